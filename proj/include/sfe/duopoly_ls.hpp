#ifndef SFE_DUOPOLY_LS_HPP
#define SFE_DUOPOLY_LS_HPP

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "sfe/market.hpp"
#include "sfe/splines.hpp"

namespace sfe {

/// Prices at which the first-order ODE system is enforced.
struct CollocationGrid {
    Eigen::VectorXd prices;

    static CollocationGrid uniform(double lo, double hi, double step);
};

/// Collocation system B beta = d. Row (k, j) enforces the first-order
/// condition of firm j at price p_k; rhs entries are D'(p_k).
struct LinearSystem {
    Eigen::MatrixXd matrix;   // (N*m) x (K*m)
    Eigen::VectorXd rhs;      // N*m
    int numFirms = 0;
    int basisDim = 0;         // K
    std::vector<std::string> warnings;
};

LinearSystem assemble(const Market& market, const SplineBasis& basis,
                      const CollocationGrid& grid);

/// Minimum-norm least-squares solution plus, for duopolies, the unit kernel
/// direction: all ODE solutions are beta0 + t * v.
struct SolutionFamily {
    Eigen::VectorXd beta0;                    // K*m
    std::optional<Eigen::VectorXd> nullVector; // K*m; duopoly only
    Eigen::VectorXd singularValues;
    int numericRank = 0;
    double residualNorm = 0.0;
    int numFirms = 0;
    int basisDim = 0;
    std::vector<std::string> warnings;
};

/// Rank tolerance: singular values below tol * sigma_max count as zero.
inline constexpr double kRankTolerance = 1e-10;

/// For m = 2 the null vector is rescaled so the firm-1 component spline has
/// unit slope, i.e. B^T(p) v_1 is the fitted (p - c_1); t in the family is
/// then directly the coefficient of the homogeneous solution t(p - c_i).
SolutionFamily solveFamily(const LinearSystem& sys, const SplineBasis& basis,
                           const Market& market);

/// Supply spline of one firm at family parameter t.
Spline familySupply(const SolutionFamily& family, const SplineBasis& basis,
                    double t, int firmIndex);

} // namespace sfe

#endif
