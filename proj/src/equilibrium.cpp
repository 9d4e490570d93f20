#include "sfe/equilibrium.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "sfe/detail/parallel.hpp"

namespace sfe {

namespace {

constexpr double kCapReachRelTol = 1e-6;  // |max - Cap| <= tol * Cap at t*
constexpr double kMonoRelTol = 1e-6;      // value dips below this * Cap are noise

struct StationaryScan {
    double sup = -1e300;
    double argmax = 0.0;
    bool interior = false;
};

// Supremum of a spline over [lo, hi]: slope sign-change scan at sub-knot
// resolution, then bisection on the slope.
StationaryScan splineMax(const Spline& s, double lo, double hi) {
    StationaryScan out;
    const auto& bp = s.basis.knots().breakpoints();
    std::vector<double> pts{lo};
    for (int i = 0; i < bp.size(); ++i) {
        if (bp(i) <= lo || bp(i) >= hi)
            continue;
        pts.push_back(bp(i));
    }
    pts.push_back(hi);
    std::vector<double> scan;
    const int sub = 8;
    for (size_t i = 0; i + 1 < pts.size(); ++i)
        for (int j = 0; j < sub; ++j)
            scan.push_back(pts[i] + (pts[i + 1] - pts[i]) * j / sub);
    scan.push_back(hi);

    auto consider = [&](double p, bool interior) {
        const double v = s.eval(p);
        if (v > out.sup) {
            out.sup = v;
            out.argmax = p;
            out.interior = interior;
        }
    };
    consider(lo, false);
    consider(hi, false);
    double prevP = scan[0], prevSl = s.eval(prevP, 1);
    for (size_t i = 1; i < scan.size(); ++i) {
        const double p = scan[i], sl = s.eval(p, 1);
        if (prevSl > 0.0 && sl <= 0.0) {
            double a = prevP, b = p;
            for (int it = 0; it < 80; ++it) {
                const double mid = 0.5 * (a + b);
                (s.eval(mid, 1) > 0.0 ? a : b) = mid;
            }
            consider(0.5 * (a + b), true);
        }
        prevP = p;
        prevSl = sl;
    }
    return out;
}

// Worst negative increment of a spline sampled densely on [lo, hi].
double worstDecrease(const Spline& s, double lo, double hi) {
    const double tau = s.basis.knots().meshNorm();
    const int n = std::max(400, static_cast<int>(std::ceil((hi - lo) / (tau / 32.0))));
    double worst = 0.0, prev = s.eval(lo);
    for (int i = 1; i <= n; ++i) {
        const double v = s.eval(lo + (hi - lo) * i / n);
        worst = std::max(worst, prev - v);
        prev = std::max(prev, v);
    }
    return worst;
}

} // namespace

// ------------------------------------------------------------ PiecewiseSupply

PiecewiseSupply::PiecewiseSupply(std::vector<SupplySegment> segments, double marginalCost,
                                 double capacity, double demandSlope)
    : segments_(std::move(segments)), marginalCost_(marginalCost), capacity_(capacity),
      demandSlope_(demandSlope) {
    if (segments_.empty())
        throw std::invalid_argument("PiecewiseSupply: no segments");
    for (size_t i = 1; i < segments_.size(); ++i)
        if (std::abs(segments_[i].lo - segments_[i - 1].hi) > 1e-9)
            throw std::invalid_argument("PiecewiseSupply: segments must partition the price range");
}

double PiecewiseSupply::rawValue(const SupplySegment& seg, double p, int deriv) const {
    switch (seg.kind) {
        case SegmentKind::zero:
            return 0.0;
        case SegmentKind::monopoly: {
            const double q = demandSlope_ * (p - marginalCost_);
            if (deriv == 0)
                return std::max(q, 0.0);
            return q > 0.0 ? demandSlope_ : 0.0;
        }
        case SegmentKind::spline:
            return seg.spline->eval(std::clamp(p, seg.spline->basis.knots().front(),
                                               seg.spline->basis.knots().back()),
                                    deriv);
        case SegmentKind::constant_cap:
            return deriv == 0 ? capacity_ : 0.0;
        case SegmentKind::residual_monopoly: {
            const double q = demandSlope_ * (p - marginalCost_);
            if (deriv == 0)
                return std::min(q, capacity_);
            return q < capacity_ ? demandSlope_ : 0.0;
        }
    }
    return 0.0;
}

const SupplySegment& PiecewiseSupply::segmentFor(double p, int side) const {
    if (side >= 0) {
        for (const auto& seg : segments_)
            if (p < seg.hi)
                return seg;
        return segments_.back();
    }
    for (const auto& seg : segments_)
        if (p <= seg.hi)
            return seg;
    return segments_.back();
}

double PiecewiseSupply::evalSide(double p, int side) const {
    p = std::clamp(p, segments_.front().lo, segments_.back().hi);
    const double v = rawValue(segmentFor(p, side), p, 0);
    return std::clamp(v, 0.0, capacity_);
}

double PiecewiseSupply::slopeSide(double p, int side) const {
    p = std::clamp(p, segments_.front().lo, segments_.back().hi);
    return rawValue(segmentFor(p, side), p, 1);
}

// ------------------------------------------------------------------- searchT

namespace {

struct CapReach {
    double t = 0.0;
    StationaryScan at; // scan of the firm's spline at t
    bool bracketed = false;
};

// t with sup_{[lo,hi]} s_firm(.; t) = Cap_firm; the sup is increasing in t
// under the unit-slope normalization of the kernel direction.
CapReach capReachT(const SolutionFamily& fam, const SplineBasis& basis, int firm,
                   double cap, double lo, double hi, double guess) {
    auto supAt = [&](double t) { return splineMax(familySupply(fam, basis, t, firm), lo, hi); };
    CapReach out;
    const double step0 = std::max(1.0, cap / std::max(hi - lo, 1e-6));
    double tLo = guess, tHi = guess;
    double gLo = supAt(tLo).sup - cap, gHi = gLo;
    for (double step = step0; gLo > 0.0 && step < 1e12 * step0; step *= 2.0) {
        tLo -= step;
        gLo = supAt(tLo).sup - cap;
    }
    for (double step = step0; gHi < 0.0 && step < 1e12 * step0; step *= 2.0) {
        tHi += step;
        gHi = supAt(tHi).sup - cap;
    }
    if (gLo > 0.0 || gHi < 0.0)
        return out;
    for (int it = 0; it < 300; ++it) {
        const double mid = 0.5 * (tLo + tHi);
        const auto scan = supAt(mid);
        if (std::abs(scan.sup - cap) <= kCapReachRelTol * cap) {
            out.t = mid;
            out.at = scan;
            out.bracketed = true;
            return out;
        }
        (scan.sup < cap ? tLo : tHi) = mid;
    }
    out.t = 0.5 * (tLo + tHi);
    out.at = supAt(out.t);
    out.bracketed = true;
    return out;
}

// smallest t at which both family splines are non-decreasing on [lo, hi]
double smallestMonotoneT(const SolutionFamily& fam, const SplineBasis& basis,
                         const Market& market, double lo, double hi) {
    auto mono = [&](double t) {
        for (int i = 0; i < 2; ++i) {
            const auto s = familySupply(fam, basis, t, i);
            if (worstDecrease(s, lo, hi) > kMonoRelTol * market.firms()[i].capacity)
                return false;
        }
        return true;
    };
    double tHi = 0.0, tLo = 0.0;
    for (double step = 1.0; !mono(tHi) && step < 1e9; step *= 2.0)
        tHi += step;
    for (double step = 1.0; mono(tLo) && step < 1e9; step *= 2.0)
        tLo -= step;
    for (int it = 0; it < 100; ++it) {
        const double mid = 0.5 * (tLo + tHi);
        (mono(mid) ? tHi : tLo) = mid;
    }
    return tHi;
}

} // namespace

SearchResult searchT(const SolutionFamily& family, const Market& market,
                     const SplineBasis& basis, double initialGuess) {
    if (market.numFirms() != 2)
        throw std::invalid_argument("searchT: duopoly only");
    if (!family.nullVector)
        throw std::invalid_argument("searchT: solution family has no kernel direction");

    const auto [pMin, pMax] = derivePriceWindow(market);
    const double lo = std::max(pMin, basis.knots().front());
    const double hi = std::min(pMax, basis.knots().back());
    const double span = hi - lo;

    struct Candidate {
        bool valid = false, boundary = false;
        double t = 0.0, pCap = 0.0;
        std::string why;
    };
    Candidate cand[2];
    for (int firm = 0; firm < 2; ++firm) {
        const double cap = market.firms()[firm].capacity;
        const auto reach = capReachT(family, basis, firm, cap, lo, hi, initialGuess);
        auto& c = cand[firm];
        if (!reach.bracketed) {
            c.why = "capacity level not bracketable";
            continue;
        }
        c.t = reach.t;
        c.pCap = reach.at.argmax;
        if (!reach.at.interior || reach.at.argmax >= hi - 1e-6 * span) {
            c.boundary = true;
            c.why = "capacity reached only at the window boundary";
            continue;
        }
        // Prop 1 configuration: this firm peaks at Cap inside the window;
        // both curves non-decreasing up to there, the other firm below its cap.
        const int other = 1 - firm;
        const auto sSelf = familySupply(family, basis, c.t, firm);
        const auto sOther = familySupply(family, basis, c.t, other);
        const double capOther = market.firms()[other].capacity;
        if (worstDecrease(sSelf, lo, c.pCap) > kMonoRelTol * cap) {
            c.why = "binding firm's curve not monotone below p_cap";
            continue;
        }
        if (worstDecrease(sOther, lo, c.pCap) > kMonoRelTol * capOther) {
            c.why = "other firm's curve not monotone below p_cap";
            continue;
        }
        if (sOther.eval(c.pCap) >= capOther) {
            c.why = "other firm above its capacity at p_cap";
            continue;
        }
        c.valid = true;
    }

    SearchResult res;
    if (cand[0].valid && cand[1].valid) {
        const int first = cand[0].pCap <= cand[1].pCap ? 0 : 1;
        res.outcome = SearchOutcome::found;
        res.bindingFirm = first;
        res.tStar = cand[first].t;
        res.pCap = cand[first].pCap;
        res.tie = std::abs(cand[0].pCap - cand[1].pCap) < 1e-6 * span;
        if (res.tie)
            res.detail = "both firms reach capacity smoothly at the same price";
        return res;
    }
    for (int firm = 0; firm < 2; ++firm) {
        if (cand[firm].valid) {
            res.outcome = SearchOutcome::found;
            res.bindingFirm = firm;
            res.tStar = cand[firm].t;
            res.pCap = cand[firm].pCap;
            return res;
        }
    }
    if (cand[0].boundary && cand[1].boundary) {
        res.outcome = SearchOutcome::caps_not_binding;
        res.tStar = smallestMonotoneT(family, basis, market, lo, hi);
        res.detail = "capacities unreachable below p_max; reporting the smallest monotone t";
        return res;
    }
    res.outcome = SearchOutcome::no_equilibrium;
    res.detail = "firm 0: " + cand[0].why + "; firm 1: " + cand[1].why;
    return res;
}

// --------------------------------------------------------------------- paste

Equilibrium paste(const SolutionFamily& family, const SearchResult& search,
                  const Market& market, const SplineBasis& basis,
                  const CollocationGrid& grid) {
    if (search.outcome == SearchOutcome::no_equilibrium)
        throw std::invalid_argument("paste: no equilibrium to paste");
    const auto [pMin, pMaxWin] = derivePriceWindow(market);
    const double gamma = market.demand().slope;
    const double tau = basis.knots().meshNorm();

    Equilibrium eq;
    eq.basis = basis;
    eq.family = family;
    eq.tStar = search.tStar;
    eq.bindingFirm = search.outcome == SearchOutcome::found ? search.bindingFirm : -1;
    eq.pMax = pMaxWin;
    eq.collocLo = grid.prices(0);
    eq.collocHi = grid.prices(grid.prices.size() - 1);
    eq.collocStep = grid.prices.size() > 1 ? grid.prices(1) - grid.prices(0) : tau;
    if (search.tie)
        eq.notes.push_back("tie: " + search.detail);

    const bool binding = search.outcome == SearchOutcome::found;
    double splineEnd = binding ? search.pCap : std::min(pMaxWin, basis.knots().back());
    if (!binding && basis.knots().back() < pMaxWin) {
        eq.notes.push_back("knot span ends before p_max; spline segment truncated");
        eq.pMax = basis.knots().back();
    }

    for (int i = 0; i < market.numFirms(); ++i) {
        const auto& firm = market.firms()[i];
        const double c = firm.cost.intercept;
        const Spline s = familySupply(family, basis, search.tStar, i);

        // mesh-scale pasting tolerances
        const double monoViol = worstDecrease(s, pMin, splineEnd);
        if (monoViol > kMonoRelTol * firm.capacity)
            throw std::runtime_error("paste: supply of " + firm.name +
                                     " decreases by " + std::to_string(monoViol) +
                                     " inside the spline segment");

        std::vector<SupplySegment> segs;
        double cursor = 0.0;
        auto push = [&](double hi, SegmentKind k, std::optional<Spline> sp = std::nullopt) {
            if (hi > cursor + 1e-12) {
                segs.push_back({cursor, hi, k, std::move(sp)});
                cursor = hi;
            }
        };
        push(std::min(c, pMin), SegmentKind::zero);
        push(pMin, SegmentKind::monopoly);
        push(splineEnd, SegmentKind::spline, s);

        if (binding && i == search.bindingFirm) {
            const double atCap = s.eval(search.pCap);
            if (std::abs(atCap - firm.capacity) > 10.0 * kCapReachRelTol * firm.capacity)
                throw std::runtime_error("paste: binding firm misses its capacity by " +
                                         std::to_string(atCap - firm.capacity));
            push(eq.pMax, SegmentKind::constant_cap);
            eq.pCap.push_back(search.pCap);
        } else if (binding) {
            const double resAtCap = gamma * (search.pCap - c);
            const double mismatch = std::abs(s.eval(search.pCap) - resAtCap);
            const double contTol = std::max(1e-6 * firm.capacity, 0.05 * gamma * tau);
            if (mismatch > contTol)
                throw std::runtime_error("paste: " + firm.name + " jumps by " +
                                         std::to_string(mismatch) + " at p_cap");
            const double pSat = c + firm.capacity / gamma;
            if (pSat < eq.pMax) {
                push(pSat, SegmentKind::residual_monopoly);
                push(eq.pMax, SegmentKind::constant_cap);
                eq.pCap.push_back(pSat);
            } else {
                push(eq.pMax, SegmentKind::residual_monopoly);
                eq.pCap.push_back(std::nullopt);
            }
        } else {
            eq.pCap.push_back(std::nullopt);
        }
        eq.supplies.emplace_back(std::move(segs), c, firm.capacity, gamma);
    }
    return eq;
}

// --------------------------------------------------------------- clearMarket

std::pair<double, std::vector<double>> clearMarket(
    const std::vector<PiecewiseSupply>& supplies, const DemandSpec& demand,
    double eps, double pMax) {
    auto excess = [&](double p) {
        double total = 0.0;
        for (const auto& s : supplies)
            total += s.eval(p);
        return total - demand.value(p) - eps;
    };
    double pStar;
    if (excess(0.0) >= 0.0) {
        pStar = 0.0;
    } else if (excess(pMax) < 0.0) {
        pStar = pMax; // excess demand even at the top of the window
    } else {
        double a = 0.0, b = pMax;
        for (int it = 0; it < 200; ++it) {
            const double mid = 0.5 * (a + b);
            (excess(mid) < 0.0 ? a : b) = mid;
        }
        pStar = b;
    }

    const int m = static_cast<int>(supplies.size());
    const double demandAt = demand.value(pStar) + eps;
    std::vector<double> q(m);
    double total = 0.0;
    for (int j = 0; j < m; ++j) {
        q[j] = supplies[j].evalSide(pStar, +1);
        total += q[j];
    }
    // If the clearing price sits at a supply jump, the jumping firm serves a
    // point on its vertical segment: take back the over-supply from the firms
    // with jump room.
    double over = total - demandAt;
    for (int j = 0; j < m && over > 0.0; ++j) {
        const double room = q[j] - supplies[j].evalSide(pStar, -1);
        const double cut = std::min(room, over);
        q[j] -= cut;
        over -= cut;
    }
    return {pStar, q};
}

// -------------------------------------------------------------------- verify

DiagnosticsReport verify(const Equilibrium& eq, const Market& market,
                         int denseFactor, int numShocks) {
    DiagnosticsReport rep;
    const int m = market.numFirms();
    const auto [pMin, pMax] = derivePriceWindow(market);
    const bool binding = eq.bindingFirm >= 0;
    const double pCapB = binding ? *eq.pCap[eq.bindingFirm] : eq.pMax;

    // (a) first-order-condition residuals over the collocation window
    std::vector<Spline> fams;
    for (int i = 0; i < m; ++i)
        fams.push_back(familySupply(eq.family, eq.basis, eq.tStar.value_or(0.0), i));
    {
        const double lo = eq.collocLo;
        const double hi = std::min(eq.collocHi, pCapB);
        const double step = eq.collocStep / std::max(1, denseFactor);
        const int n = std::max(2, static_cast<int>(std::floor((hi - lo) / step)));
        double sup = 0.0;
        for (int k = 0; k <= n; ++k) {
            const double p = lo + (hi - lo) * k / n;
            for (int i = 0; i < m; ++i) {
                double others = 0.0;
                for (int j = 0; j < m; ++j)
                    if (j != i)
                        others += fams[j].eval(p, 1);
                const double r = others - fams[i].eval(p) / (p - market.firms()[i].cost.intercept) -
                                 market.demand().deriv();
                sup = std::max(sup, std::abs(r));
            }
        }
        rep.odeResidualSup = sup;
    }

    // (b) monotonicity of the pasted curves over [0, p_max]
    {
        double worst = 0.0;
        const int n = 5000;
        for (int i = 0; i < m; ++i) {
            double prev = eq.supplies[i].eval(0.0);
            for (int k = 1; k <= n; ++k) {
                const double v = eq.supplies[i].eval(eq.pMax * k / n);
                worst = std::max(worst, prev - v);
                prev = std::max(prev, v);
            }
        }
        rep.monotonicityViolation = worst;
    }

    if (binding) {
        const int b = eq.bindingFirm, o = 1 - b;
        rep.smoothReachSlope = fams[b].eval(pCapB, 1);
        if (m == 2) {
            rep.d2Jump = eq.supplies[o].slopeSide(pCapB, +1) - eq.supplies[o].slopeSide(pCapB, -1);
            rep.d2JumpPredicted =
                -(pCapB - market.firms()[o].cost.intercept) * fams[b].eval(pCapB, 2);
        }
    }

    // (e) brute-force best-response audit against the pasted curves
    const int n = std::max(numShocks, 2);
    rep.deviationAudit.resize(n);
    std::vector<double> eqProfit(n * m), brProfit(n * m), clearRes(n);
    detail::parallelFor(n, [&](int k) {
        const double eps = market.epsMin() + (market.epsMax() - market.epsMin()) * k / (n - 1.0);
        auto [pStar, q] = clearMarket(eq.supplies, market.demand(), eps, eq.pMax);
        double total = 0.0;
        for (double v : q)
            total += v;
        clearRes[k] = std::abs(total - market.demand().value(pStar) - eps);
        rep.deviationAudit[k].eps = eps;
        rep.deviationAudit[k].clearingPrice = pStar;
        for (int j = 0; j < m; ++j) {
            const auto& firm = market.firms()[j];
            eqProfit[k * m + j] = pStar * q[j] - firm.cost.total(q[j]);
            double best = eqProfit[k * m + j];
            const int grid = 20000;
            for (int g = 1; g <= grid; ++g) {
                const double p = eq.pMax * g / grid;
                double residual = market.demand().value(p) + eps;
                for (int i = 0; i < m; ++i)
                    if (i != j)
                        residual -= eq.supplies[i].eval(p);
                if (residual < -1e-9 || residual > firm.capacity + 1e-9)
                    continue;
                const double qd = std::clamp(residual, 0.0, firm.capacity);
                best = std::max(best, p * qd - firm.cost.total(qd));
            }
            brProfit[k * m + j] = best;
        }
    });
    double scale = 0.0;
    for (double v : eqProfit)
        scale = std::max(scale, std::abs(v));
    for (int k = 0; k < n; ++k) {
        double rel = 0.0;
        for (int j = 0; j < m; ++j) {
            const double imp = std::max(0.0, brProfit[k * m + j] - eqProfit[k * m + j]);
            rel = std::max(rel, imp / std::max(std::abs(eqProfit[k * m + j]), 1e-3 * scale));
        }
        rep.deviationAudit[k].relImprovement = rel;
        rep.maxRelImprovement = std::max(rep.maxRelImprovement, rel);
        rep.clearingResidualMax = std::max(rep.clearingResidualMax, clearRes[k]);
    }
    for (const auto& note : eq.notes)
        rep.notes.push_back(note);
    return rep;
}

} // namespace sfe
