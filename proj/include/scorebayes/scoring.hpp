#ifndef SCOREBAYES_SCORING_HPP_
#define SCOREBAYES_SCORING_HPP_

#include <functional>
#include <optional>
#include <stdexcept>

#include "scorebayes/numerics.hpp"

namespace scorebayes::scoring {

using numerics::Grid1D;

struct NonFiniteDensity : std::runtime_error {
    explicit NonFiniteDensity(const std::string& what) : std::runtime_error(what) {}
};
struct NonFiniteDerivative : std::runtime_error {
    explicit NonFiniteDerivative(const std::string& what) : std::runtime_error(what) {}
};
struct IntegralUnavailable : std::runtime_error {
    explicit IntegralUnavailable(const std::string& what) : std::runtime_error(what) {}
};

/// Tuning constant of the density-power (Tsallis) score; gamma > 1.
struct TsallisConfig {
    double gamma;

    explicit TsallisConfig(double g) : gamma(g) {
        if (!(gamma > 1.0)) throw DomainError("TsallisConfig: gamma must exceed 1");
    }
};

/// Monotone coordinate change used to run optimizers and samplers without
/// box constraints. `to_unconstrained` maps the natural parameter to R^d.
struct ParamTransform {
    std::function<Vector(const Vector&)> to_unconstrained;
    std::function<Vector(const Vector&)> to_constrained;
    /// log |d theta / d psi| at unconstrained point psi.
    std::function<double(const Vector&)> log_jacobian;

    static ParamTransform identity(int dim);
};

/// A parametric model paired with a pointwise scoring rule. The score is
/// oriented so that smaller is better; the total empirical score is the
/// sum over observations.
struct ScoreModel {
    int param_dim = 0;
    int obs_dim = 1;
    /// S(x; theta), minimization convention.
    std::function<double(const Vector& x, const Vector& theta)> pointwise;
    /// Optional analytic d S(x; theta) / d theta.
    std::function<Vector(const Vector& x, const Vector& theta)> pointwise_gradient;
    /// Optional analytic d^2 S(x; theta) / d theta^2.
    std::function<Matrix(const Vector& x, const Vector& theta)> pointwise_hessian;
    std::optional<ParamTransform> transform;

    bool has_gradient() const { return static_cast<bool>(pointwise_gradient); }
    bool has_hessian() const { return static_cast<bool>(pointwise_hessian); }
};

struct TotalScoreEval {
    double value = 0.0;
    std::optional<Vector> gradient;
    std::optional<Matrix> hessian;
};

/// Logarithmic score -log q(x | theta).
double log_score(double log_density);

/// Tsallis score (gamma - 1) * Int q^gamma - gamma * q(x)^{gamma-1}.
/// `density_at_x` is q(x); `integral_q_gamma` is Int q(y)^gamma dy.
double tsallis_score(double density_at_x, double integral_q_gamma, const TsallisConfig& cfg);

/// Tsallis score with the power integral computed by adaptive quadrature of
/// a 1-D density over [lo, hi].
double tsallis_score_quadrature(double density_at_x, const std::function<double(double)>& density,
                                double lo, double hi, const TsallisConfig& cfg);

/// Closed-form power integral Int q^gamma for a N(mu, sigma^2) density.
double gaussian_power_integral(double sigma2, double gamma);

/// Hyvarinen score: Laplacian of log q plus half the squared gradient norm.
/// Reads only derivatives of log q, so any normalizing constant drops out.
double hyvarinen_score(const Vector& grad_log_density, double laplacian_log_density);

/// Score matching on the circle for a density proportional to
/// exp(a cos t + b sin t), evaluated at angle t.
double circular_hyvarinen_score(double angle, double a, double b);

/// Negated pairwise log-likelihood of the equi-correlated normal model,
/// computed from the within/between sums of squares.
/// `data` is n x q; theta = (mu, sigma2, rho).
double pairwise_eqcorr_score(const Matrix& data, double mu, double sigma2, double rho);

/// Total empirical score with gradient and Hessian, analytic when the model
/// carries them, finite differences otherwise. Per-observation terms are
/// combined by pairwise summation.
TotalScoreEval total_score(const ScoreModel& model, const Matrix& data, const Vector& theta,
                           bool want_gradient = true, bool want_hessian = false);

/// Value-only total score.
double total_score_value(const ScoreModel& model, const Matrix& data, const Vector& theta);

// Bundled score models ------------------------------------------------------

/// Gaussian location-scale model under the logarithmic score; theta = (mu, sigma2).
ScoreModel gaussian_log_score_model();

/// Gaussian location-scale model under the Tsallis score; theta = (mu, sigma2).
ScoreModel gaussian_tsallis_model(const TsallisConfig& cfg);

/// Von Mises circular model with known mean direction theta0 under the
/// Hyvarinen score; theta = (kappa), observations are angles.
ScoreModel vonmises_hyvarinen_model(double theta0);

/// Von Mises natural-parameter model under the circular Hyvarinen score;
/// theta = (a, b).
ScoreModel circular_natural_model();

/// Equi-correlated normal pairwise likelihood score; theta = (mu, sigma2, rho),
/// observations are rows of dimension q. Gradient/Hessian by finite differences.
ScoreModel eqcorr_pairwise_model(int q);

/// Pairwise score in rho alone with mu, sigma2 held fixed.
ScoreModel eqcorr_rho_model(int q, double mu, double sigma2);

/// Linear regression y = X beta + sigma eps under the Tsallis score;
/// theta = (beta, sigma2), observation rows are (y_i, x_i).
ScoreModel regression_tsallis_model(int p, double gamma);

/// Linear regression under the logarithmic score; theta = (beta, sigma2).
ScoreModel regression_log_score_model(int p);

}  // namespace scorebayes::scoring

#endif  // SCOREBAYES_SCORING_HPP_
