#include "sfe/duopoly_ls.hpp"

#include <cmath>
#include <stdexcept>

namespace sfe {

CollocationGrid CollocationGrid::uniform(double lo, double hi, double step) {
    if (!(step > 0.0) || !(hi >= lo))
        throw std::invalid_argument("CollocationGrid::uniform: need hi >= lo and step > 0");
    const int n = static_cast<int>(std::floor((hi - lo) / step + 1e-9));
    Eigen::VectorXd p(n + 1);
    for (int i = 0; i <= n; ++i)
        p(i) = lo + i * step;
    return CollocationGrid{std::move(p)};
}

LinearSystem assemble(const Market& market, const SplineBasis& basis,
                      const CollocationGrid& grid) {
    const int m = market.numFirms();
    const int K = basis.dimension();
    const int N = static_cast<int>(grid.prices.size());
    if (N == 0)
        throw std::invalid_argument("assemble: empty collocation grid");
    for (int k = 1; k < N; ++k)
        if (!(grid.prices(k) > grid.prices(k - 1)))
            throw std::invalid_argument("assemble: collocation prices must be strictly increasing");
    for (const auto& f : market.firms())
        if (f.cost.quad != 0.0)
            throw std::invalid_argument("assemble: duopoly LS method requires constant marginal costs");

    double cMax = 0.0;
    for (const auto& f : market.firms())
        cMax = std::max(cMax, f.cost.intercept);
    if (grid.prices(0) <= cMax)
        throw std::domain_error("assemble: collocation price " + std::to_string(grid.prices(0)) +
                                " <= max marginal cost " + std::to_string(cMax) +
                                " gives a singular denominator");

    LinearSystem sys;
    sys.numFirms = m;
    sys.basisDim = K;
    sys.matrix.setZero(N * m, K * m);
    sys.rhs.setZero(N * m);

    const double dPrime = market.demand().deriv();
    for (int k = 0; k < N; ++k) {
        const double p = grid.prices(k);
        const Eigen::VectorXd bVal = basis.evalBasis(p, 0);
        const Eigen::VectorXd bDer = basis.evalBasis(p, 1);
        for (int j = 0; j < m; ++j) {
            const int row = k * m + j;
            for (int i = 0; i < m; ++i) {
                if (i == j)
                    sys.matrix.block(row, i * K, 1, K) =
                        (-bVal / (p - market.firms()[j].cost.intercept)).transpose();
                else
                    sys.matrix.block(row, i * K, 1, K) = bDer.transpose();
            }
            sys.rhs(row) = dPrime;
        }
    }

    // Knot intervals without any collocation price can leave zero columns
    // (B-spline bases have local support); report both findings as warnings.
    const auto& bp = basis.knots().breakpoints();
    std::string empties;
    for (int i = 0; i + 1 < bp.size(); ++i) {
        bool hit = false;
        for (int k = 0; k < N && !hit; ++k)
            hit = grid.prices(k) >= bp(i) && grid.prices(k) <= bp(i + 1);
        if (!hit)
            empties += (empties.empty() ? "" : ", ") +
                       ("[" + std::to_string(bp(i)) + ", " + std::to_string(bp(i + 1)) + "]");
    }
    if (!empties.empty())
        sys.warnings.push_back("knot intervals without collocation prices: " + empties);
    std::string zeros;
    for (int c = 0; c < sys.matrix.cols(); ++c)
        if (sys.matrix.col(c).lpNorm<Eigen::Infinity>() == 0.0)
            zeros += (zeros.empty() ? "" : ", ") + std::to_string(c);
    if (!zeros.empty())
        sys.warnings.push_back("zero columns in the collocation matrix: " + zeros);

    return sys;
}

namespace {

// Least-squares slope/intercept of spline(v) against (1, p) on a dense grid.
std::pair<double, double> fitLine(const SplineBasis& basis, const Eigen::VectorXd& coef) {
    const int n = 400;
    const double lo = basis.knots().front(), hi = basis.knots().back();
    Eigen::MatrixXd X(n, 2);
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) {
        const double p = lo + (hi - lo) * i / (n - 1.0);
        X(i, 0) = 1.0;
        X(i, 1) = p;
        y(i) = Spline{basis, coef}.eval(p, 0);
    }
    Eigen::Vector2d sol = (X.transpose() * X).ldlt().solve(X.transpose() * y);
    return {sol(1), sol(0)}; // slope, intercept
}

} // namespace

SolutionFamily solveFamily(const LinearSystem& sys, const SplineBasis& basis,
                           const Market& market) {
    const int m = sys.numFirms;
    const int K = sys.basisDim;
    if (sys.matrix.rows() < sys.matrix.cols())
        throw std::invalid_argument("solveFamily: system has fewer rows than columns");

    Eigen::BDCSVD<Eigen::MatrixXd> svd(sys.matrix, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd& sv = svd.singularValues();
    const double tol = kRankTolerance * sv(0);
    int rank = 0;
    for (int i = 0; i < sv.size(); ++i)
        if (sv(i) > tol)
            ++rank;

    SolutionFamily fam;
    fam.numFirms = m;
    fam.basisDim = K;
    fam.singularValues = sv;
    fam.numericRank = rank;
    fam.warnings = sys.warnings;

    // minimum-norm least-squares solution over the retained spectrum
    Eigen::VectorXd uty = svd.matrixU().transpose() * sys.rhs;
    Eigen::VectorXd z = Eigen::VectorXd::Zero(sv.size());
    for (int i = 0; i < rank; ++i)
        z(i) = uty(i) / sv(i);
    fam.beta0 = svd.matrixV() * z;
    fam.residualNorm = (sys.matrix * fam.beta0 - sys.rhs).norm();

    if (m == 2) {
        if (rank < 2 * K - 1)
            throw std::runtime_error("solveFamily: rank deficiency >= 2 for a duopoly; "
                                     "the grid or knots are ill-posed");
        if (sv.size() >= 2 && sv(sv.size() - 2) < 1e-6 * sv(0))
            fam.warnings.push_back("two near-zero singular values: kernel direction may be unreliable");

        Eigen::VectorXd v = svd.matrixV().col(sv.size() - 1);
        const auto [slope, intercept] = fitLine(basis, v.head(K));
        if (std::abs(slope) < 1e-14)
            throw std::runtime_error("solveFamily: degenerate kernel direction (flat firm-1 component)");
        v /= slope;
        (void)intercept;
        fam.nullVector = std::move(v);
        (void)market;
    }
    return fam;
}

Spline familySupply(const SolutionFamily& family, const SplineBasis& basis,
                    double t, int firmIndex) {
    const int K = family.basisDim;
    if (firmIndex < 0 || firmIndex >= family.numFirms)
        throw std::invalid_argument("familySupply: firm index out of range");
    if (t != 0.0 && !family.nullVector)
        throw std::invalid_argument("familySupply: no kernel direction (m != 2), only t = 0 is defined");
    Eigen::VectorXd coef = family.beta0.segment(firmIndex * K, K);
    if (family.nullVector)
        coef += t * family.nullVector->segment(firmIndex * K, K);
    return Spline{basis, std::move(coef)};
}

} // namespace sfe
