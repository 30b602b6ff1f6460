#ifndef SCOREBAYES_POSTERIOR_HPP_
#define SCOREBAYES_POSTERIOR_HPP_

#include <cstdint>
#include <optional>

#include "scorebayes/estimation.hpp"
#include "scorebayes/models.hpp"
#include "scorebayes/numerics.hpp"
#include "scorebayes/priors.hpp"
#include "scorebayes/scoring.hpp"

namespace scorebayes::posterior {

using estimation::GodambeEstimate;
using numerics::Grid1D;
using priors::PriorSpec;
using scoring::ScoreModel;

struct ZeroAcceptance : std::runtime_error {
    explicit ZeroAcceptance(const std::string& what) : std::runtime_error(what) {}
};
struct UnsupportedOrder : std::runtime_error {
    explicit UnsupportedOrder(const std::string& what) : std::runtime_error(what) {}
};

/// The curvature-calibrated scoring-rule posterior
/// pi(theta) exp{-S(theta_tilde + C(theta - theta_tilde))}, with C frozen
/// at its estimate. With calibration off, C is the identity.
class CalibratedTarget {
public:
    CalibratedTarget(PriorSpec prior, ScoreModel model, Matrix data, Vector theta_tilde, Matrix c,
                     bool calibrate = true);

    /// log pi(theta) - S(theta*) + S(theta_tilde); one additive constant
    /// fixed at theta_tilde.
    double log_density(const Vector& theta) const;

    /// Target in unconstrained coordinates, transform Jacobian folded in.
    double log_density_unconstrained(const Vector& psi) const;

    const Vector& theta_tilde() const { return theta_tilde_; }
    const Matrix& calibration() const { return c_; }
    const ScoreModel& model() const { return model_; }
    const Matrix& data() const { return data_; }
    const PriorSpec& prior() const { return prior_; }
    int dim() const { return model_.param_dim; }
    bool calibrated() const { return calibrate_; }
    const scoring::ParamTransform& transform() const { return transform_; }

private:
    PriorSpec prior_;
    ScoreModel model_;
    Matrix data_;
    Vector theta_tilde_;
    Matrix c_;
    bool calibrate_;
    double score_at_tilde_;
    scoring::ParamTransform transform_;
};

struct Chain {
    Matrix draws;        // post burn-in, constrained coordinates, T x d
    Vector log_target;   // aligned with draws
    double acceptance_rate = 0.0;
    int burn_in = 0;
    int thinning = 1;
    std::uint64_t seed = 0;
};

struct MhOptions {
    int iterations = 10000;
    int burn_in = 2000;
    int thinning = 1;
    std::uint64_t seed = 1;
    /// Proposal covariance in unconstrained coordinates; when absent,
    /// (2.38^2 / d) * H(theta_tilde)^{-1} / n.
    std::optional<Matrix> proposal_cov;
    /// Diminishing scale adaptation during burn-in only.
    bool adapt = true;
    double target_acceptance = 0.30;
};

/// Random-walk Metropolis-Hastings over the calibrated target, run in
/// unconstrained coordinates; draws are reported in natural coordinates.
Chain mh_sample(const CalibratedTarget& target, const GodambeEstimate& info,
                const MhOptions& opts);

/// Same sampler against an arbitrary log-density with an explicit proposal.
Chain mh_sample_density(const std::function<double(const Vector&)>& log_density,
                        const Vector& start, const Matrix& proposal_cov, const MhOptions& opts);

/// Normalized scalar posterior on a grid.
Grid1D grid_posterior_1d(const CalibratedTarget& target, const Vector& nodes);

/// First-order normal approximation N(theta_tilde, H^{-1}/n).
struct NormalApprox {
    Vector mean;
    Matrix covariance;

    double log_density(const Vector& theta) const;
    double density(const Vector& theta) const { return std::exp(log_density(theta)); }
};

NormalApprox normal_approx(const Vector& theta_tilde, const Matrix& h, int n);

/// Inputs for the higher-order expansion of the posterior of
/// w = sqrt(n) (theta - theta_tilde).
struct ExpansionInputs {
    Vector theta_tilde;
    Matrix h;            // H(theta_tilde)
    Matrix c;            // calibration matrix
    int n = 0;
    int order = 1;       // 0, 1, or 2 (order 2 requires d = 1)
    double prior_value = 1.0;
    Vector prior_gradient;     // pi_i at theta_tilde
    Matrix prior_hessian;      // pi_ij at theta_tilde (order 2)
    std::vector<Matrix> score_third;  // S_ijk slices, one d x d matrix per k
    double score_fourth_1d = 0.0;     // S_1111 (order 2, d = 1)
};

/// Correction factor 1 + n^{-1/2} A1(w) + n^{-1} A2(w) at a single w.
double expansion_correction(const ExpansionInputs& inputs, const Vector& w);

/// Expansion density of scalar w on a grid; negative excursions of the
/// corrected density are clipped at zero.
Grid1D expansion_density(const ExpansionInputs& inputs, const Vector& w_nodes);

struct PosteriorSummary {
    Vector mode;
    Vector mean;
    Vector sd;
    Vector lower95;
    Vector upper95;
};

PosteriorSummary posterior_summaries(const Grid1D& grid);
PosteriorSummary posterior_summaries(const Chain& chain);

/// Mean and standard deviation of a grid density.
std::pair<double, double> grid_moments(const Grid1D& grid);

}  // namespace scorebayes::posterior

#endif  // SCOREBAYES_POSTERIOR_HPP_
