#ifndef SCOREBAYES_NUMERICS_HPP_
#define SCOREBAYES_NUMERICS_HPP_

#include <Eigen/Dense>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace scorebayes {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

using ScalarField = std::function<double(const Vector&)>;

// Error types shared across modules.
struct NotPositiveDefinite : std::runtime_error {
    explicit NotPositiveDefinite(const std::string& what) : std::runtime_error(what) {}
};
struct NonFiniteEvaluation : std::runtime_error {
    explicit NonFiniteEvaluation(const std::string& what) : std::runtime_error(what) {}
};
struct DomainError : std::runtime_error {
    explicit DomainError(const std::string& what) : std::runtime_error(what) {}
};
struct ZeroMass : std::runtime_error {
    explicit ZeroMass(const std::string& what) : std::runtime_error(what) {}
};

namespace numerics {

inline constexpr int kMaxDim = 16;

/// Strictly increasing nodes with nonnegative values; the tabulated form
/// used for 1-D priors and grid posteriors.
struct Grid1D {
    Vector nodes;
    Vector values;

    void validate() const;
};

/// Upper-triangular factor R with positive diagonal, R^T R = source matrix.
struct TriangularFactor {
    Matrix r;

    int dim() const { return static_cast<int>(r.rows()); }
    Matrix reconstruct() const { return r.transpose() * r; }
};

/// Upper Cholesky factor of a symmetric positive definite matrix.
/// Throws NotPositiveDefinite on a leading-minor failure.
TriangularFactor spd_factor(const Matrix& m);

/// Central-difference gradient, step h_j = cbrt(eps) * max(1, |theta_j|).
Vector fd_gradient(const ScalarField& f, const Vector& theta);

/// Central-difference Hessian, step h_j = eps^{1/4} * max(1, |theta_j|).
/// The result is symmetrized as (H + H^T)/2.
Matrix fd_hessian(const ScalarField& f, const Vector& theta);

/// Ratio of modified Bessel functions I1(kappa)/I0(kappa), the mean
/// resultant length of a von Mises distribution. Series for small kappa,
/// continued fraction for large; never forms I0, I1 separately.
double bessel_ratio_a1(double kappa);

/// log I0(kappa), stable for large kappa.
double log_bessel_i0(double kappa);

/// Trapezoid mass of a grid.
double trapezoid(const Grid1D& g);

/// Rescale values so the trapezoid integral is one.
Grid1D grid_normalize(const Grid1D& g);

/// Linear interpolation on a grid; hard error outside the node range.
double grid_interpolate(const Grid1D& g, double x);

/// Adaptive Simpson quadrature on [a, b].
double integrate_adaptive(const std::function<double(double)>& f, double a, double b,
                          double tol = 1e-10, int max_depth = 50);

/// Pairwise (tree) summation; reduction order is independent of sharding.
double pairwise_sum(const std::vector<double>& terms);

}  // namespace numerics
}  // namespace scorebayes

#endif  // SCOREBAYES_NUMERICS_HPP_
