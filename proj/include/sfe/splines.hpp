#ifndef SFE_SPLINES_HPP
#define SFE_SPLINES_HPP

#include <Eigen/Dense>
#include <optional>
#include <vector>

namespace sfe {

/// Strictly increasing sequence of breakpoints on the price axis.
class KnotVector {
public:
    explicit KnotVector(Eigen::VectorXd breakpoints);

    /// Breakpoints lo, lo+step, ... ending exactly at hi (hi appended if the
    /// step does not divide the range evenly).
    static KnotVector uniform(double lo, double hi, double step);

    /// Concatenation of uniform segments given as (lo, hi, step) triples;
    /// adjacent segments must share endpoints.
    static KnotVector fromSegments(const std::vector<std::array<double, 3>>& segments);

    const Eigen::VectorXd& breakpoints() const { return bp_; }
    int size() const { return static_cast<int>(bp_.size()); }
    double front() const { return bp_(0); }
    double back() const { return bp_(bp_.size() - 1); }

    /// Largest gap between adjacent breakpoints, |tau|.
    double meshNorm() const;

    /// Index i with bp[i] <= p < bp[i+1]; the last interval is closed on the
    /// right so that p == back() maps to size()-2.
    int intervalOf(double p) const;

    /// New knot vector with the midpoint of every interval inserted
    /// (halves the mesh norm of a uniform mesh).
    KnotVector refined() const;

    bool contains(double p) const;

private:
    Eigen::VectorXd bp_;
};

enum class BasisKind { bspline, natural_cubic };

/// A basis of a spline space on a knot vector: B-splines of a given order on
/// the clamped extension, or the cardinal basis of natural cubic splines.
/// Immutable after construction; evaluation is pure.
class SplineBasis {
public:
    SplineBasis() = default; // empty basis; assign a factory result before use

    static SplineBasis bspline(const KnotVector& knots, int order);
    static SplineBasis naturalCubic(const KnotVector& knots);

    /// B-spline basis on an explicit non-decreasing knot sequence (interior
    /// multiplicities allowed); used for Hermite interpolation.
    static SplineBasis bsplineFromSequence(const KnotVector& breakpoints,
                                           int order,
                                           Eigen::VectorXd knotSequence);

    BasisKind kind() const { return kind_; }
    int order() const { return order_; }
    int dimension() const { return dim_; }
    const KnotVector& knots() const { return knots_; }

    /// Values (derivOrder 0) or derivatives of all basis functions at p.
    /// p must lie inside [front, back]; derivOrder in {0,1,2} and <= order-1.
    Eigen::VectorXd evalBasis(double p, int derivOrder) const;

    /// Same as evalBasis but returns only the window of possибly nonzero
    /// entries; `first` receives the index of the first entry. For the
    /// natural cubic basis the window is the whole coefficient range.
    void evalLocal(double p, int derivOrder, int& first, Eigen::VectorXd& vals) const;

private:
    void checkArgs(double p, int derivOrder) const;
    int findSpan(double u) const;

    BasisKind kind_ = BasisKind::bspline;
    int order_ = 0;                 // M; polynomial degree is M-1
    int dim_ = 0;                   // K
    KnotVector knots_{Eigen::VectorXd::LinSpaced(2, 0.0, 1.0)};
    Eigen::VectorXd seq_;           // extended knot sequence (bspline only)
    Eigen::MatrixXd moments_;       // (n+1) x K second derivatives (natural cubic)
};

/// Spline = basis plus coefficient vector.
struct Spline {
    SplineBasis basis;
    Eigen::VectorXd coefficients;

    double eval(double p, int derivOrder = 0) const;
};

enum class InterpKind { complete_cubic, quadratic_midpoint, cubic_hermite };

struct InterpSample {
    double p = 0.0;
    double value = 0.0;
    std::optional<double> slope;    // required per-knot for Hermite, at the
                                    // two endpoints for complete cubic
};

/// Interpolation operators used by the convergence studies.
///  - complete_cubic: values at every knot, slopes at the two endpoints.
///  - quadratic_midpoint: values at the two endpoints and at every knot-interval
///    midpoint (the controlled prices p_k = (tau_{k-1}+tau_k)/2).
///  - cubic_hermite: value and slope at every knot; the result lives in the
///    cubic space with doubled interior knots (C^1).
Spline interpolate(InterpKind kind,
                   const std::vector<InterpSample>& samples,
                   const KnotVector& knots);

} // namespace sfe

#endif
