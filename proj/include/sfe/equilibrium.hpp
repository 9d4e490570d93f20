#ifndef SFE_EQUILIBRIUM_HPP
#define SFE_EQUILIBRIUM_HPP

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sfe/duopoly_ls.hpp"
#include "sfe/market.hpp"
#include "sfe/splines.hpp"

namespace sfe {

enum class SegmentKind { zero, monopoly, spline, constant_cap, residual_monopoly };

struct SupplySegment {
    double lo = 0.0, hi = 0.0; // (lo, hi]; the first segment includes lo
    SegmentKind kind = SegmentKind::zero;
    std::optional<Spline> spline;
};

/// One firm's pasted supply curve on [0, p_max]: monopoly formula below the
/// solver window, the spline inside it, capacity / residual-monopoly pieces
/// above. Values are clamped to [0, Cap].
class PiecewiseSupply {
public:
    PiecewiseSupply(std::vector<SupplySegment> segments, double marginalCost,
                    double capacity, double demandSlope);

    /// Right-continuous evaluation (the value offered for prices just above p).
    double eval(double p) const { return evalSide(p, +1); }
    /// side < 0 gives the left limit at p, side >= 0 the right limit.
    double evalSide(double p, int side) const;
    /// One-sided slope taken from inside the adjacent segment.
    double slopeSide(double p, int side) const;

    const std::vector<SupplySegment>& segments() const { return segments_; }
    double capacity() const { return capacity_; }
    double marginalCost() const { return marginalCost_; }
    double priceSpanEnd() const { return segments_.back().hi; }

private:
    double rawValue(const SupplySegment& seg, double p, int deriv) const;
    const SupplySegment& segmentFor(double p, int side) const;

    std::vector<SupplySegment> segments_;
    double marginalCost_ = 0.0;
    double capacity_ = 0.0;
    double demandSlope_ = 0.0;
};

struct DeviationSample {
    double eps = 0.0;
    double clearingPrice = 0.0;
    double relImprovement = 0.0; // best over firms
};

struct DiagnosticsReport {
    double odeResidualSup = 0.0;       // over the collocation window, both firms
    double monotonicityViolation = 0.0; // worst negative increment on [0, p_max]
    double smoothReachSlope = 0.0;      // binding firm's slope at p_cap
    double d2Jump = 0.0;                // s2'(p_cap+) - s2'(p_cap-)
    double d2JumpPredicted = 0.0;       // -(p_cap - c2) * s1''(p_cap-)
    std::vector<DeviationSample> deviationAudit;
    double maxRelImprovement = 0.0;
    double clearingResidualMax = 0.0;
    std::vector<std::string> notes;
};

enum class SearchOutcome { found, caps_not_binding, no_equilibrium };

struct SearchResult {
    SearchOutcome outcome = SearchOutcome::no_equilibrium;
    double tStar = 0.0;
    int bindingFirm = -1;
    double pCap = 0.0;
    bool tie = false;
    std::string detail;
};

/// Linear search over the one-parameter family for the t at which one supply
/// curve reaches its capacity smoothly (interior maximum equal to Cap).
SearchResult searchT(const SolutionFamily& family, const Market& market,
                     const SplineBasis& basis, double initialGuess = 0.0);

struct Equilibrium {
    std::vector<PiecewiseSupply> supplies;
    std::optional<double> tStar;
    std::vector<std::optional<double>> pCap; // inf{p | s_i(p) = Cap_i}, per firm
    int bindingFirm = -1;
    double pMax = 0.0;
    // solver context retained for diagnostics
    SplineBasis basis;
    SolutionFamily family;
    double collocLo = 0.0, collocHi = 0.0, collocStep = 0.0;
    std::vector<std::string> notes;
};

Equilibrium paste(const SolutionFamily& family, const SearchResult& search,
                  const Market& market, const SplineBasis& basis,
                  const CollocationGrid& grid);

/// Residuals, Prop-1/2 checks and the brute-force best-response audit.
/// numShocks >= 20 demand realizations spanning the shock support.
DiagnosticsReport verify(const Equilibrium& eq, const Market& market,
                         int denseFactor, int numShocks = 20);

/// Market clearing of pasted curves: price p* with sum_i s_i(p*) = D(p*) + eps
/// and each firm's served quantity (rationed on the vertical segment when the
/// clearing price sits at a supply jump).
std::pair<double, std::vector<double>> clearMarket(
    const std::vector<PiecewiseSupply>& supplies, const DemandSpec& demand,
    double eps, double pMax);

} // namespace sfe

#endif
