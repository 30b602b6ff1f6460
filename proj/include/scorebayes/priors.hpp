#ifndef SCOREBAYES_PRIORS_HPP_
#define SCOREBAYES_PRIORS_HPP_

#include <cstdint>
#include <functional>
#include <memory>
#include <string>

#include "scorebayes/estimation.hpp"
#include "scorebayes/numerics.hpp"
#include "scorebayes/scoring.hpp"

namespace scorebayes::priors {

using scoring::ScoreModel;

struct SingularGamma : std::runtime_error {
    explicit SingularGamma(const std::string& what) : std::runtime_error(what) {}
};
struct SingularJacobian : std::runtime_error {
    explicit SingularJacobian(const std::string& what) : std::runtime_error(what) {}
};

/// Scalar log-prior tabulated on a grid, with Monte-Carlo error bars.
/// Normalized on its grid; evaluation outside the node range is an error.
struct TabulatedPrior {
    Vector nodes;
    Vector log_prior;
    Vector mc_stderr;

    double log_density(double x) const;
    void normalize();

    void write_csv(const std::string& path) const;
    static TabulatedPrior read_csv(const std::string& path);
};

/// A prior known up to an additive constant on the log scale.
struct PriorSpec {
    enum class Kind { flat, power, godambe_reference, tabulated, closed_form };

    Kind kind = Kind::flat;
    std::function<double(const Vector&)> log_density;
    std::shared_ptr<TabulatedPrior> table;

    double operator()(const Vector& theta) const { return log_density(theta); }

    static PriorSpec flat(int dim);
    /// theta_coord^exponent on a named coordinate (improper power prior).
    static PriorSpec power(int coord, double exponent);
    static PriorSpec closed_form(std::function<double(const Vector&)> log_density);
    static PriorSpec tabulated(TabulatedPrior t);
};

/// sqrt(det G) from an analytic Godambe matrix; throws NotPositiveDefinite.
double godambe_reference_prior(const Matrix& g);

struct McValue {
    double value = 0.0;
    double std_error = 0.0;
};

/// Monte-Carlo Godambe provider: simulates replicate datasets at theta,
/// estimates K and J on each, and averages sqrt(det K J^-1 K).
struct McGodambeProvider {
    ScoreModel model;
    std::function<Matrix(std::uint64_t seed, const Vector& theta)> simulate;
    int replicates = 200;
    std::uint64_t seed = 1;
};

McValue godambe_reference_prior_mc(const McGodambeProvider& provider, const Vector& theta);

/// Tabulate the Monte-Carlo reference prior of a scalar parameter; each
/// grid point gets its own derived RNG stream.
TabulatedPrior tabulate_reference_prior(const McGodambeProvider& provider, const Vector& nodes);

/// Closed-form von Mises Hyvarinen reference prior
/// sqrt(A1(kappa)^2 / (kappa (2 kappa - 3 A1(kappa)))), with a series branch
/// near zero where the direct expression cancels.
double vmf_reference_prior(double kappa);

/// Sandwich variance of the von Mises Hyvarinen concentration estimator:
/// V(kappa) = kappa (2 kappa - 3 A1(kappa)) / A1(kappa)^2.
double vmf_asymptotic_variance(double kappa);

struct TsallisVariances {
    double v_beta;
    double v_error;
};

/// Asymptotic variances of the Tsallis regression estimators; exact at
/// gamma = 1 (maximum likelihood limits sigma^2 and 2 sigma^4).
TsallisVariances tsallis_regression_variances(double gamma, double sigma2);

/// Reference prior for (beta, sigma2) regression under the Tsallis score,
/// proportional to (v_beta^p * v_error)^{-1/2}; flat in beta.
PriorSpec regression_reference_prior(double gamma, int p);

/// Scalar inputs for the chi-square divergence prior: each callable returns
/// a value and a Monte-Carlo standard error (zero when analytic).
struct ChiSqPriorInputs {
    std::function<McValue(double)> godambe;      // g(theta)
    std::function<McValue(double)> fisher;       // i(theta)
    std::function<McValue(double)> sigma;        // n Cov(theta_tilde, theta_hat)
    std::function<McValue(double)> a_score;      // a^S(theta)
    std::function<McValue(double)> a_lik;        // a^ell(theta)
};

/// d log pi / d theta of the scalar chi-square prior at fixed input values.
double chi_square_prior_slope(double g, double i, double sigma, double a_s, double a_l,
                              double g_deriv, double bracket_deriv);

/// Scalar chi-square divergence prior, tabulated by cumulative trapezoid
/// integration of its log-derivative over the grid.
TabulatedPrior chi_square_prior_scalar(const Vector& nodes, const ChiSqPriorInputs& inputs);

/// Change of variables for a scalar prior: psi has log-density
/// log pi(theta(psi)) + log |d theta / d psi|.
PriorSpec transform_prior(const PriorSpec& prior, std::function<double(double)> theta_of_psi,
                          std::function<double(double)> dtheta_dpsi);

/// General change of variables with an explicit Jacobian determinant.
PriorSpec transform_prior_multivariate(const PriorSpec& prior,
                                       std::function<Vector(const Vector&)> theta_of_psi,
                                       std::function<double(const Vector&)> jacobian_det);

}  // namespace scorebayes::priors

#endif  // SCOREBAYES_PRIORS_HPP_
