#ifndef SCOREBAYES_ESTIMATION_HPP_
#define SCOREBAYES_ESTIMATION_HPP_

#include "scorebayes/models.hpp"
#include "scorebayes/numerics.hpp"
#include "scorebayes/scoring.hpp"

namespace scorebayes::estimation {

using scoring::ScoreModel;

struct MaxIterations : std::runtime_error {
    explicit MaxIterations(const std::string& what) : std::runtime_error(what) {}
};
struct NonFiniteScore : std::runtime_error {
    explicit NonFiniteScore(const std::string& what) : std::runtime_error(what) {}
};
struct DegenerateSample : std::runtime_error {
    explicit DegenerateSample(const std::string& what) : std::runtime_error(what) {}
};

struct MinScoreResult {
    Vector theta;
    double score_value = 0.0;
    int iterations = 0;
    bool converged = false;
    double gradient_norm = 0.0;
};

/// K, J, G = K J^-1 K, V = G^-1, the calibration matrix C with
/// C^T K C = G, and the scaled score Hessian H = C^T (d2S/dtheta2) C / n.
struct GodambeEstimate {
    Matrix k, j, g, v, c, h;
    Vector theta;
};

struct NelderMeadOptions {
    double simplex_tol = 1e-10;
    int max_iterations = 100000;
    int restarts = 3;
    double initial_step = 0.25;
};

/// Derivative-free minimum of an arbitrary objective on R^d.
MinScoreResult nelder_mead(const ScalarField& objective, const Vector& start,
                           const NelderMeadOptions& opts = {});

/// Minimum-score estimate. The simplex runs in the model's unconstrained
/// coordinates; convergence is certified by the total-score gradient at the
/// returned point.
MinScoreResult minimize_total_score(const ScoreModel& model, const Matrix& data,
                                    const Vector& theta_init, const NelderMeadOptions& opts = {});

/// Closed-form Hyvarinen concentration estimate for circular data,
/// equal to the norm of the natural-parameter normal-equations solution.
double vmf_kappa_closed_form(const Vector& angles);

/// Natural-parameter solution (a, b) of the circular score-matching
/// normal equations.
Vector circular_natural_equations(const Vector& angles);

/// Hyvarinen estimator for a natural exponential family: -mean(a'(x)).
double nef_theta_closed_form(const Vector& data, const models::NefModel& model);

/// Sensitivity matrix: empirical mean of per-observation score Hessians.
Matrix estimate_k(const ScoreModel& model, const Matrix& data, const Vector& theta);

/// Variability matrix: empirical mean of score-gradient outer products.
Matrix estimate_j(const ScoreModel& model, const Matrix& data, const Vector& theta);

/// Builds the full Godambe bundle from K, J and the total-score Hessian.
GodambeEstimate assemble_godambe(const Matrix& k, const Matrix& j, const Vector& theta,
                                 const Matrix& total_hessian, int n);

/// Convenience: estimate K, J at theta and assemble.
GodambeEstimate godambe_at(const ScoreModel& model, const Matrix& data, const Vector& theta);

}  // namespace scorebayes::estimation

#endif  // SCOREBAYES_ESTIMATION_HPP_
