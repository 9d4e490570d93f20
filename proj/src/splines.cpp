#include "sfe/splines.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace sfe {

namespace {

constexpr double kRelTol = 1e-12;

double spanTol(const KnotVector& kv) {
    return kRelTol * std::max(1.0, std::abs(kv.back() - kv.front()));
}

} // namespace

// ---------------------------------------------------------------- KnotVector

KnotVector::KnotVector(Eigen::VectorXd breakpoints) : bp_(std::move(breakpoints)) {
    if (bp_.size() < 2)
        throw std::invalid_argument("KnotVector: need at least 2 breakpoints");
    for (int i = 1; i < bp_.size(); ++i)
        if (!(bp_(i) > bp_(i - 1)))
            throw std::invalid_argument("KnotVector: breakpoints must be strictly increasing");
}

KnotVector KnotVector::uniform(double lo, double hi, double step) {
    if (!(step > 0.0) || !(hi > lo))
        throw std::invalid_argument("KnotVector::uniform: need hi > lo and step > 0");
    const int n = static_cast<int>(std::floor((hi - lo) / step + 1e-9));
    std::vector<double> pts;
    pts.reserve(n + 2);
    for (int i = 0; i <= n; ++i)
        pts.push_back(lo + i * step);
    if (hi - pts.back() > 1e-9 * std::max(1.0, std::abs(hi)))
        pts.push_back(hi);
    else
        pts.back() = hi;
    return KnotVector(Eigen::Map<Eigen::VectorXd>(pts.data(), pts.size()));
}

KnotVector KnotVector::fromSegments(const std::vector<std::array<double, 3>>& segments) {
    if (segments.empty())
        throw std::invalid_argument("KnotVector::fromSegments: empty segment list");
    std::vector<double> pts;
    for (size_t s = 0; s < segments.size(); ++s) {
        const auto& [lo, hi, step] = segments[s];
        KnotVector part = uniform(lo, hi, step);
        const auto& b = part.breakpoints();
        int start = 0;
        if (!pts.empty()) {
            if (std::abs(pts.back() - b(0)) > 1e-9 * std::max(1.0, std::abs(b(0))))
                throw std::invalid_argument("KnotVector::fromSegments: segments must be contiguous");
            start = 1;
        }
        for (int i = start; i < b.size(); ++i)
            pts.push_back(b(i));
    }
    return KnotVector(Eigen::Map<Eigen::VectorXd>(pts.data(), pts.size()));
}

double KnotVector::meshNorm() const {
    double m = 0.0;
    for (int i = 1; i < bp_.size(); ++i)
        m = std::max(m, bp_(i) - bp_(i - 1));
    return m;
}

int KnotVector::intervalOf(double p) const {
    const int n = size() - 1;
    if (p >= bp_(n))
        return n - 1;
    if (p <= bp_(0))
        return 0;
    // binary search: largest i with bp[i] <= p
    int lo = 0, hi = n;
    while (hi - lo > 1) {
        const int mid = (lo + hi) / 2;
        (bp_(mid) <= p ? lo : hi) = mid;
    }
    return lo;
}

KnotVector KnotVector::refined() const {
    Eigen::VectorXd out(2 * bp_.size() - 1);
    for (int i = 0; i + 1 < bp_.size(); ++i) {
        out(2 * i) = bp_(i);
        out(2 * i + 1) = 0.5 * (bp_(i) + bp_(i + 1));
    }
    out(out.size() - 1) = bp_(bp_.size() - 1);
    return KnotVector(std::move(out));
}

bool KnotVector::contains(double p) const {
    const double tol = spanTol(*this);
    return p >= front() - tol && p <= back() + tol;
}

// --------------------------------------------------------------- SplineBasis

SplineBasis SplineBasis::bspline(const KnotVector& knots, int order) {
    if (order < 2)
        throw std::invalid_argument("SplineBasis::bspline: order must be >= 2");
    const auto& bp = knots.breakpoints();
    const int n = knots.size() - 1; // intervals
    Eigen::VectorXd seq(n - 1 + 2 * order);
    int pos = 0;
    for (int i = 0; i < order; ++i)
        seq(pos++) = bp(0);
    for (int i = 1; i < n; ++i)
        seq(pos++) = bp(i);
    for (int i = 0; i < order; ++i)
        seq(pos++) = bp(n);
    return bsplineFromSequence(knots, order, std::move(seq));
}

SplineBasis SplineBasis::bsplineFromSequence(const KnotVector& breakpoints,
                                             int order,
                                             Eigen::VectorXd knotSequence) {
    if (order < 2)
        throw std::invalid_argument("SplineBasis: order must be >= 2");
    for (int i = 1; i < knotSequence.size(); ++i)
        if (knotSequence(i) < knotSequence(i - 1))
            throw std::invalid_argument("SplineBasis: knot sequence must be non-decreasing");
    SplineBasis b;
    b.kind_ = BasisKind::bspline;
    b.order_ = order;
    b.knots_ = breakpoints;
    b.seq_ = std::move(knotSequence);
    b.dim_ = static_cast<int>(b.seq_.size()) - order;
    if (b.dim_ < order)
        throw std::invalid_argument("SplineBasis: knot sequence too short for the order");
    return b;
}

SplineBasis SplineBasis::naturalCubic(const KnotVector& knots) {
    SplineBasis b;
    b.kind_ = BasisKind::natural_cubic;
    b.order_ = 4;
    b.knots_ = knots;
    b.dim_ = knots.size();

    // Cardinal basis: column j holds the natural-spline moments (second
    // derivatives at the breakpoints) of the interpolant of the unit data e_j.
    const auto& x = knots.breakpoints();
    const int n = knots.size() - 1;
    b.moments_ = Eigen::MatrixXd::Zero(n + 1, n + 1);
    if (n >= 2) {
        Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n - 1, n - 1);
        Eigen::MatrixXd R = Eigen::MatrixXd::Zero(n - 1, n + 1);
        for (int i = 1; i < n; ++i) {
            const double hm = x(i) - x(i - 1);
            const double hp = x(i + 1) - x(i);
            A(i - 1, i - 1) = (hm + hp) / 3.0;
            if (i > 1) A(i - 1, i - 2) = hm / 6.0;
            if (i < n - 1) A(i - 1, i) = hp / 6.0;
            R(i - 1, i - 1) += 1.0 / hm;
            R(i - 1, i) -= 1.0 / hm + 1.0 / hp;
            R(i - 1, i + 1) += 1.0 / hp;
        }
        b.moments_.block(1, 0, n - 1, n + 1) = A.partialPivLu().solve(R);
    }
    return b;
}

void SplineBasis::checkArgs(double p, int derivOrder) const {
    if (derivOrder < 0 || derivOrder > 2 || derivOrder > order_ - 1)
        throw std::invalid_argument("SplineBasis: derivative order " + std::to_string(derivOrder) +
                                    " not supported for order " + std::to_string(order_));
    if (!knots_.contains(p))
        throw std::domain_error("SplineBasis: p = " + std::to_string(p) + " outside knot span [" +
                                std::to_string(knots_.front()) + ", " + std::to_string(knots_.back()) + "]");
}

int SplineBasis::findSpan(double u) const {
    const int deg = order_ - 1;
    if (u >= seq_(dim_))
        return dim_ - 1; // right endpoint: left-continuous evaluation
    if (u <= seq_(deg))
        return deg;
    int lo = deg, hi = dim_;
    while (hi - lo > 1) {
        const int mid = (lo + hi) / 2;
        (seq_(mid) <= u ? lo : hi) = mid;
    }
    return lo;
}

namespace {

// Values and derivatives of the order (deg+1) B-splines that are nonzero on
// the span `i`: the classic triangular recurrence (de Boor), with vanishing
// denominators treated as zero terms. ders is (nders+1) x (deg+1); column r
// belongs to basis index i-deg+r.
void dersBasisFuns(int i, double u, int deg, int nders, const Eigen::VectorXd& U,
                   Eigen::MatrixXd& ders) {
    Eigen::MatrixXd ndu(deg + 1, deg + 1);
    Eigen::VectorXd left(deg + 1), right(deg + 1);
    ndu(0, 0) = 1.0;
    for (int j = 1; j <= deg; ++j) {
        left(j) = u - U(i + 1 - j);
        right(j) = U(i + j) - u;
        double saved = 0.0;
        for (int r = 0; r < j; ++r) {
            ndu(j, r) = right(r + 1) + left(j - r);
            const double temp = ndu(j, r) != 0.0 ? ndu(r, j - 1) / ndu(j, r) : 0.0;
            ndu(r, j) = saved + right(r + 1) * temp;
            saved = left(j - r) * temp;
        }
        ndu(j, j) = saved;
    }
    ders.setZero(nders + 1, deg + 1);
    for (int j = 0; j <= deg; ++j)
        ders(0, j) = ndu(j, deg);

    Eigen::MatrixXd a(2, deg + 1);
    for (int r = 0; r <= deg; ++r) {
        int s1 = 0, s2 = 1;
        a(0, 0) = 1.0;
        for (int k = 1; k <= nders; ++k) {
            double d = 0.0;
            const int rk = r - k, pk = deg - k;
            if (r >= k) {
                a(s2, 0) = ndu(pk + 1, rk) != 0.0 ? a(s1, 0) / ndu(pk + 1, rk) : 0.0;
                d = a(s2, 0) * ndu(rk, pk);
            }
            const int j1 = rk >= -1 ? 1 : -rk;
            const int j2 = r - 1 <= pk ? k - 1 : deg - r;
            for (int j = j1; j <= j2; ++j) {
                a(s2, j) = ndu(pk + 1, rk + j) != 0.0 ? (a(s1, j) - a(s1, j - 1)) / ndu(pk + 1, rk + j) : 0.0;
                d += a(s2, j) * ndu(rk + j, pk);
            }
            if (r <= pk) {
                a(s2, k) = ndu(pk + 1, r) != 0.0 ? -a(s1, k - 1) / ndu(pk + 1, r) : 0.0;
                d += a(s2, k) * ndu(r, pk);
            }
            ders(k, r) = d;
            std::swap(s1, s2);
        }
    }
    double fac = deg;
    for (int k = 1; k <= nders; ++k) {
        for (int j = 0; j <= deg; ++j)
            ders(k, j) *= fac;
        fac *= deg - k;
    }
}

} // namespace

void SplineBasis::evalLocal(double p, int derivOrder, int& first, Eigen::VectorXd& vals) const {
    checkArgs(p, derivOrder);
    if (kind_ == BasisKind::bspline) {
        const int deg = order_ - 1;
        const int span = findSpan(p);
        Eigen::MatrixXd ders;
        dersBasisFuns(span, p, deg, derivOrder, seq_, ders);
        first = span - deg;
        vals = ders.row(derivOrder);
        return;
    }

    // Natural cubic: global support; assemble the full row from the moment
    // representation of the interval containing p.
    const auto& x = knots_.breakpoints();
    const int i = knots_.intervalOf(p);
    const double h = x(i + 1) - x(i);
    const double A = x(i + 1) - p;
    const double B = p - x(i);
    double cMl, cMr, cYl, cYr;
    switch (derivOrder) {
        case 0:
            cMl = A * A * A / (6.0 * h) - h * A / 6.0;
            cMr = B * B * B / (6.0 * h) - h * B / 6.0;
            cYl = A / h;
            cYr = B / h;
            break;
        case 1:
            cMl = -A * A / (2.0 * h) + h / 6.0;
            cMr = B * B / (2.0 * h) - h / 6.0;
            cYl = -1.0 / h;
            cYr = 1.0 / h;
            break;
        default: // 2
            cMl = A / h;
            cMr = B / h;
            cYl = 0.0;
            cYr = 0.0;
            break;
    }
    first = 0;
    vals = cMl * moments_.row(i) + cMr * moments_.row(i + 1);
    vals(i) += cYl;
    vals(i + 1) += cYr;
}

Eigen::VectorXd SplineBasis::evalBasis(double p, int derivOrder) const {
    int first = 0;
    Eigen::VectorXd local;
    evalLocal(p, derivOrder, first, local);
    if (first == 0 && local.size() == dim_)
        return local;
    Eigen::VectorXd out = Eigen::VectorXd::Zero(dim_);
    out.segment(first, local.size()) = local;
    return out;
}

double Spline::eval(double p, int derivOrder) const {
    int first = 0;
    Eigen::VectorXd local;
    basis.evalLocal(p, derivOrder, first, local);
    return local.dot(coefficients.segment(first, local.size()));
}

// --------------------------------------------------------------- interpolate

namespace {

void checkDistinctSorted(const std::vector<InterpSample>& samples) {
    for (size_t i = 1; i < samples.size(); ++i)
        if (!(samples[i].p > samples[i - 1].p))
            throw std::invalid_argument("interpolate: sample abscissae must be strictly increasing");
}

void checkAbscissae(const std::vector<InterpSample>& samples,
                    const Eigen::VectorXd& expected, double tol) {
    if (static_cast<int>(samples.size()) != expected.size())
        throw std::invalid_argument("interpolate: expected " + std::to_string(expected.size()) +
                                    " samples, got " + std::to_string(samples.size()));
    for (int i = 0; i < expected.size(); ++i)
        if (std::abs(samples[i].p - expected(i)) > tol)
            throw std::invalid_argument("interpolate: sample abscissa " + std::to_string(samples[i].p) +
                                        " does not match required location " + std::to_string(expected(i)));
}

} // namespace

Spline interpolate(InterpKind kind, const std::vector<InterpSample>& samples,
                   const KnotVector& knots) {
    checkDistinctSorted(samples);
    const auto& bp = knots.breakpoints();
    const int n = knots.size() - 1;
    const double tol = 1e-9 * std::max(1.0, knots.back() - knots.front());

    SplineBasis basis = SplineBasis::bspline(knots, 4);
    Eigen::MatrixXd A;
    Eigen::VectorXd rhs;

    switch (kind) {
        case InterpKind::complete_cubic: {
            checkAbscissae(samples, bp, tol);
            if (!samples.front().slope || !samples.back().slope)
                throw std::invalid_argument("interpolate: complete cubic needs slopes at both endpoints");
            const int K = basis.dimension(); // n + 3
            A.setZero(K, K);
            rhs.setZero(K);
            for (int i = 0; i <= n; ++i) {
                A.row(i) = basis.evalBasis(samples[i].p, 0);
                rhs(i) = samples[i].value;
            }
            A.row(n + 1) = basis.evalBasis(samples.front().p, 1);
            rhs(n + 1) = *samples.front().slope;
            A.row(n + 2) = basis.evalBasis(samples.back().p, 1);
            rhs(n + 2) = *samples.back().slope;
            break;
        }
        case InterpKind::quadratic_midpoint: {
            Eigen::VectorXd expect(n + 2);
            expect(0) = bp(0);
            for (int k = 0; k < n; ++k)
                expect(k + 1) = 0.5 * (bp(k) + bp(k + 1));
            expect(n + 1) = bp(n);
            checkAbscissae(samples, expect, tol);
            basis = SplineBasis::bspline(knots, 3);
            const int K = basis.dimension(); // n + 2
            A.setZero(K, K);
            rhs.setZero(K);
            for (int i = 0; i < K; ++i) {
                A.row(i) = basis.evalBasis(samples[i].p, 0);
                rhs(i) = samples[i].value;
            }
            break;
        }
        case InterpKind::cubic_hermite: {
            checkAbscissae(samples, bp, tol);
            for (const auto& s : samples)
                if (!s.slope)
                    throw std::invalid_argument("interpolate: Hermite needs a slope at every knot");
            // cubic space with doubled interior knots (C^1 across breakpoints)
            Eigen::VectorXd seq(8 + 2 * (n - 1));
            int pos = 0;
            for (int i = 0; i < 4; ++i) seq(pos++) = bp(0);
            for (int i = 1; i < n; ++i) { seq(pos++) = bp(i); seq(pos++) = bp(i); }
            for (int i = 0; i < 4; ++i) seq(pos++) = bp(n);
            basis = SplineBasis::bsplineFromSequence(knots, 4, std::move(seq));
            const int K = basis.dimension(); // 2(n+1)
            A.setZero(K, K);
            rhs.setZero(K);
            for (int i = 0; i <= n; ++i) {
                A.row(2 * i) = basis.evalBasis(samples[i].p, 0);
                rhs(2 * i) = samples[i].value;
                A.row(2 * i + 1) = basis.evalBasis(samples[i].p, 1);
                rhs(2 * i + 1) = *samples[i].slope;
            }
            break;
        }
    }

    Eigen::VectorXd coef = A.partialPivLu().solve(rhs);
    return Spline{std::move(basis), std::move(coef)};
}

} // namespace sfe
