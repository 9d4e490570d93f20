#include <doctest.h>

#include <cmath>
#include <random>

#include "sfe/equilibrium.hpp"

using namespace sfe;

namespace {

struct Example1 {
    Market market{{{"firm1", {10.0, 0.0}, 80.0}, {"firm2", {15.0, 0.0}, 75.0}},
                  {0.0, 3.0},
                  0.0,
                  210.0};
    KnotVector knots = KnotVector::uniform(5.0, 77.0, 9.0);
    SplineBasis basis = SplineBasis::naturalCubic(knots);
    CollocationGrid grid = CollocationGrid::uniform(16.0, 65.0, 0.5);
    SolutionFamily family;

    Example1() { family = solveFamily(assemble(market, basis, grid), basis, market); }
};

double maxSlope(const Spline& s, double lo, double hi) {
    double m = 0.0;
    for (int i = 0; i <= 1000; ++i)
        m = std::max(m, std::abs(s.eval(lo + (hi - lo) * i / 1000.0, 1)));
    return m;
}

} // namespace

TEST_CASE("Example 1: firm 1 reaches capacity smoothly inside the window") {
    Example1 ex;
    const auto res = searchT(ex.family, ex.market, ex.basis);
    REQUIRE(res.outcome == SearchOutcome::found);
    CHECK(res.bindingFirm == 0);
    CHECK(res.pCap > 31.4);
    CHECK(res.pCap < 31.9);

    // Prop 1: slope at the capacity point vanishes relative to the curve scale
    const auto s1 = familySupply(ex.family, ex.basis, res.tStar, 0);
    CHECK(std::abs(s1.eval(res.pCap, 1)) < 0.05 * maxSlope(s1, 15.0, res.pCap));
    CHECK(s1.eval(res.pCap) == doctest::Approx(80.0).epsilon(1e-5));

    // the other firm stays interior
    const auto s2 = familySupply(ex.family, ex.basis, res.tStar, 1);
    CHECK(s2.eval(res.pCap) < 75.0);
    CHECK(s2.eval(res.pCap) == doctest::Approx(3.0 * (res.pCap - 15.0)).epsilon(0.01));
}

TEST_CASE("Prop 3: the search lands on the same t from 50 starting points") {
    Example1 ex;
    REQUIRE(ex.market.uniquenessPrecondition());
    const auto ref = searchT(ex.family, ex.market, ex.basis);
    std::mt19937 rng(555);
    std::uniform_real_distribution<double> unif(-500.0, 500.0);
    for (int trial = 0; trial < 50; ++trial) {
        const auto res = searchT(ex.family, ex.market, ex.basis, unif(rng));
        REQUIRE(res.outcome == SearchOutcome::found);
        CHECK(res.tStar == doctest::Approx(ref.tStar).epsilon(1e-4));
        CHECK(res.bindingFirm == ref.bindingFirm);
    }
}

TEST_CASE("perturbing t upward makes the capacity crossing non-smooth") {
    Example1 ex;
    const auto res = searchT(ex.family, ex.market, ex.basis);
    const auto s1 = familySupply(ex.family, ex.basis, res.tStar + 1.0, 0);
    // first crossing of Cap_1 = 80
    double lo = 15.01, hi = res.pCap;
    REQUIRE(s1.eval(hi) > 80.0);
    for (int it = 0; it < 100; ++it) {
        const double mid = 0.5 * (lo + hi);
        (s1.eval(mid) < 80.0 ? lo : hi) = mid;
    }
    CHECK(s1.eval(0.5 * (lo + hi), 1) > 0.5); // slope strictly positive at the crossing
}

TEST_CASE("pasted equilibrium reproduces the Example-1 golden segments") {
    Example1 ex;
    const auto res = searchT(ex.family, ex.market, ex.basis);
    const auto eq = paste(ex.family, res, ex.market, ex.basis, ex.grid);
    REQUIRE(eq.supplies.size() == 2);

    // [10, 15]: s1 = 3(p - 10), s2 = 0
    for (double p : {10.0, 11.5, 13.0, 14.99, 15.0}) {
        CHECK(eq.supplies[0].evalSide(p, -1) == doctest::Approx(3.0 * (p - 10.0)).epsilon(1e-12));
        CHECK(eq.supplies[1].evalSide(p, -1) == 0.0);
    }
    // p = 0: nobody produces
    CHECK(eq.supplies[0].eval(0.0) == 0.0);
    CHECK(eq.supplies[1].eval(0.0) == 0.0);
    // (p_cap, 40]: s1 = 80, s2 = 3(p - 15), ending at Cap_2 = 75
    for (double p : {31.9, 33.0, 36.5, 40.0}) {
        CHECK(eq.supplies[0].eval(p) == 80.0);
        CHECK(eq.supplies[1].eval(p) == doctest::Approx(3.0 * (p - 15.0)).epsilon(1e-12));
    }
    CHECK(eq.supplies[1].eval(40.0) == doctest::Approx(75.0));
    CHECK(eq.supplies[1].eval(45.0) == 75.0);
    REQUIRE(eq.pCap[1].has_value());
    CHECK(*eq.pCap[1] == doctest::Approx(40.0));
}

TEST_CASE("pasted curves jump only at entry prices") {
    Example1 ex;
    const auto res = searchT(ex.family, ex.market, ex.basis);
    const auto eq = paste(ex.family, res, ex.market, ex.basis, ex.grid);
    for (int i = 0; i < 2; ++i) {
        for (int k = 0; k <= 2000; ++k) {
            const double p = eq.pMax * k / 2000.0;
            const double gap =
                std::abs(eq.supplies[i].evalSide(p, +1) - eq.supplies[i].evalSide(p, -1));
            const bool atEntry = std::abs(p - 10.0) < 1e-6 || std::abs(p - 15.0) < 1e-6;
            if (!atEntry)
                CHECK(gap < 0.2); // spline/residual junction mismatch stays small
        }
        // firm 1 does jump at the entry price of firm 2
        if (i == 0)
            CHECK(eq.supplies[0].evalSide(15.0, +1) - eq.supplies[0].evalSide(15.0, -1) > 10.0);
    }
}

TEST_CASE("huge capacities: caps_not_binding outcome") {
    Market m({{"firm1", {10.0, 0.0}, 1e6}, {"firm2", {15.0, 0.0}, 1e6}},
             {0.0, 3.0}, 0.0, 210.0);
    const auto knots = KnotVector::uniform(5.0, 77.0, 9.0);
    const auto basis = SplineBasis::naturalCubic(knots);
    const auto grid = CollocationGrid::uniform(16.0, 65.0, 0.5);
    const auto fam = solveFamily(assemble(m, basis, grid), basis, m);
    const auto res = searchT(fam, m, basis);
    CHECK(res.outcome == SearchOutcome::caps_not_binding);

    const auto eq = paste(fam, res, m, basis, grid);
    CHECK(eq.bindingFirm == -1);
    CHECK_FALSE(eq.pCap[0].has_value());
    // still a monotone feasible configuration
    const auto rep = verify(eq, m, 4, 20);
    CHECK(rep.monotonicityViolation <= 1e-6 * 1e6);
}

TEST_CASE("verify: residuals, Prop 2 jump and the best-response audit") {
    Example1 ex;
    const auto res = searchT(ex.family, ex.market, ex.basis);
    const auto eq = paste(ex.family, res, ex.market, ex.basis, ex.grid);
    const auto rep = verify(eq, ex.market, 4, 20);

    CHECK(rep.odeResidualSup < 0.2);
    CHECK(rep.monotonicityViolation < 1e-6 * 80.0);
    CHECK(std::abs(rep.smoothReachSlope) < 0.05);

    // Prop 2: the non-binding firm's derivative jumps up at p_cap, and the
    // affine-demand identity ties the jump to the binding firm's curvature
    CHECK(rep.d2Jump > 0.0);
    CHECK(rep.d2Jump == doctest::Approx(rep.d2JumpPredicted).epsilon(0.10));

    // clearing consistency at every audited shock
    CHECK(rep.clearingResidualMax <= 1e-8);

    // no firm improves by more than 1% against the pasted opponent curve
    CHECK(rep.deviationAudit.size() == 20);
    CHECK(rep.maxRelImprovement < 0.01);
}

TEST_CASE("deviation audit bound shrinks when the mesh is halved") {
    Example1 ex;
    const auto res = searchT(ex.family, ex.market, ex.basis);
    const auto eq = paste(ex.family, res, ex.market, ex.basis, ex.grid);
    const double coarse = verify(eq, ex.market, 2, 20).maxRelImprovement;

    const auto knotsFine = ex.knots.refined();
    const auto basisFine = SplineBasis::naturalCubic(knotsFine);
    const auto famFine = solveFamily(assemble(ex.market, basisFine, ex.grid), basisFine, ex.market);
    const auto resFine = searchT(famFine, ex.market, basisFine);
    REQUIRE(resFine.outcome == SearchOutcome::found);
    const auto eqFine = paste(famFine, resFine, ex.market, basisFine, ex.grid);
    const double fine = verify(eqFine, ex.market, 2, 20).maxRelImprovement;
    CHECK(fine < coarse);
}

TEST_CASE("clearing at a supply jump rations the jumping firm") {
    Example1 ex;
    const auto res = searchT(ex.family, ex.market, ex.basis);
    const auto eq = paste(ex.family, res, ex.market, ex.basis, ex.grid);
    // demand realizations crossing inside firm 1's jump at p = 15 clear there
    const double eps = 88.0;
    const auto [pStar, q] = clearMarket(eq.supplies, ex.market.demand(), eps, eq.pMax);
    CHECK(pStar == doctest::Approx(15.0).epsilon(1e-9));
    CHECK(q[0] > 15.0);
    CHECK(q[0] < eq.supplies[0].evalSide(15.0, +1) + 1e-9);
    CHECK(q[0] + q[1] == doctest::Approx(-3.0 * pStar + eps).epsilon(1e-9));
}

TEST_CASE("search error paths") {
    Example1 ex;
    const Market m3({{"a", {5.0, 0.0}, 30.0}, {"b", {8.0, 0.0}, 30.0}, {"c", {12.0, 0.0}, 55.0}},
                    {0.0, 0.5}, 0.0, 110.0);
    CHECK_THROWS_AS(searchT(ex.family, m3, ex.basis), std::invalid_argument);
    SolutionFamily noKernel = ex.family;
    noKernel.nullVector.reset();
    CHECK_THROWS_AS(searchT(noKernel, ex.market, ex.basis), std::invalid_argument);
    SearchResult bad;
    bad.outcome = SearchOutcome::no_equilibrium;
    CHECK_THROWS_AS(paste(ex.family, bad, ex.market, ex.basis, ex.grid), std::invalid_argument);
}
