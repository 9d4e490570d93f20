#include "sfe/market.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace sfe {

Market::Market(std::vector<Firm> firms, DemandSpec demand, double epsMin, double epsMax,
               std::optional<double> priceCap)
    : firms_(std::move(firms)), demand_(demand), epsMin_(epsMin), epsMax_(epsMax),
      priceCap_(priceCap) {
    if (firms_.empty())
        throw std::invalid_argument("Market: at least one firm required");
    for (const auto& f : firms_) {
        if (f.cost.intercept < 0.0 || f.cost.quad < 0.0)
            throw std::invalid_argument("Market: cost coefficients must be non-negative (" + f.name + ")");
        if (!(f.capacity > 0.0) || !std::isfinite(f.capacity))
            throw std::invalid_argument("Market: capacity must be finite and positive (" + f.name + ")");
    }
    if (!(demand_.slope > 0.0))
        throw std::invalid_argument("Market: demand slope must be positive");
    if (!(epsMin_ < epsMax_))
        throw std::invalid_argument("Market: need eps_min < eps_max");
    if (!(pMin() < pMax()))
        throw std::invalid_argument("Market: empty price window (p_min >= p_max)");
}

double Market::pMin() const {
    double m = 0.0;
    for (const auto& f : firms_)
        m = std::max(m, f.cost.marginal(0.0));
    return m;
}

double Market::pMax() const {
    // sup{p >= 0 | D(p) + eps_max >= 0} for affine demand
    double p = std::max(0.0, (demand_.intercept + epsMax_) / demand_.slope);
    if (priceCap_)
        p = std::min(p, *priceCap_);
    return p;
}

bool Market::uniquenessPrecondition() const {
    return demand_.value(pMin()) + epsMin_ < 0.0;
}

bool Market::duopolyLsApplicable() const {
    return numFirms() == 2 &&
           std::all_of(firms_.begin(), firms_.end(),
                       [](const Firm& f) { return f.cost.quad == 0.0; });
}

std::pair<double, double> derivePriceWindow(const Market& m) {
    const double lo = m.pMin(), hi = m.pMax();
    if (!(lo < hi))
        throw std::invalid_argument("derivePriceWindow: inconsistent market, p_min >= p_max");
    return {lo, hi};
}

} // namespace sfe
