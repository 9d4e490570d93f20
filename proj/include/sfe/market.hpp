#ifndef SFE_MARKET_HPP
#define SFE_MARKET_HPP

#include <optional>
#include <string>
#include <vector>

namespace sfe {

/// Quadratic cost C(q) = c q + a q^2, so marginal cost C'(q) = c + 2 a q.
struct CostSpec {
    double intercept = 0.0; // c
    double quad = 0.0;      // a

    double total(double q) const { return intercept * q + quad * q * q; }
    double marginal(double q) const { return intercept + 2.0 * quad * q; }
};

struct Firm {
    std::string name;
    CostSpec cost;
    double capacity = 0.0;
};

/// Affine demand D(p) = intercept - slope * p, shocked additively by eps.
struct DemandSpec {
    double intercept = 0.0; // delta_0
    double slope = 0.0;     // gamma > 0

    double value(double p) const { return intercept - slope * p; }
    double deriv() const { return -slope; }
    double deriv2() const { return 0.0; }
};

class Market {
public:
    Market(std::vector<Firm> firms, DemandSpec demand, double epsMin, double epsMax,
           std::optional<double> priceCap = std::nullopt);

    const std::vector<Firm>& firms() const { return firms_; }
    int numFirms() const { return static_cast<int>(firms_.size()); }
    const DemandSpec& demand() const { return demand_; }
    double epsMin() const { return epsMin_; }
    double epsMax() const { return epsMax_; }
    const std::optional<double>& priceCap() const { return priceCap_; }

    double pMin() const;
    double pMax() const;

    /// At most one strong SFE when D(p_min) + eps_min < 0 (strict).
    bool uniquenessPrecondition() const;

    /// The least-squares duopoly path applies only to two firms with
    /// constant marginal costs.
    bool duopolyLsApplicable() const;

private:
    std::vector<Firm> firms_;
    DemandSpec demand_;
    double epsMin_ = 0.0, epsMax_ = 0.0;
    std::optional<double> priceCap_;
};

/// (p_min, p_max); throws if the window is empty.
std::pair<double, double> derivePriceWindow(const Market& m);

} // namespace sfe

#endif
