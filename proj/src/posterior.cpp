#include "scorebayes/posterior.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace scorebayes::posterior {

using models::Rng;
using numerics::grid_normalize;
using numerics::spd_factor;
using numerics::trapezoid;

CalibratedTarget::CalibratedTarget(PriorSpec prior, ScoreModel model, Matrix data,
                                   Vector theta_tilde, Matrix c, bool calibrate)
    : prior_(std::move(prior)),
      model_(std::move(model)),
      data_(std::move(data)),
      theta_tilde_(std::move(theta_tilde)),
      c_(calibrate ? std::move(c)
                   : Matrix(Matrix::Identity(theta_tilde_.size(), theta_tilde_.size()))),
      calibrate_(calibrate),
      transform_(model_.transform ? *model_.transform
                                  : scoring::ParamTransform::identity(model_.param_dim)) {
    if (c_.rows() != theta_tilde_.size() || c_.cols() != theta_tilde_.size())
        throw DomainError("CalibratedTarget: calibration matrix shape mismatch");
    score_at_tilde_ = scoring::total_score_value(model_, data_, theta_tilde_);
}

double CalibratedTarget::log_density(const Vector& theta) const {
    const Vector theta_star = theta_tilde_ + c_ * (theta - theta_tilde_);
    const double s = scoring::total_score_value(model_, data_, theta_star);
    return prior_(theta) - (s - score_at_tilde_);
}

double CalibratedTarget::log_density_unconstrained(const Vector& psi) const {
    return log_density(transform_.to_constrained(psi)) + transform_.log_jacobian(psi);
}

namespace {

// Proposal step R^T z with R the upper Cholesky factor, so the increment has
// the requested covariance.
Matrix proposal_factor(const Matrix& cov) { return spd_factor(cov).r; }

Chain run_chain(const std::function<double(const Vector&)>& log_target_unc,
                const std::function<Vector(const Vector&)>& to_constrained, const Vector& start_unc,
                const Matrix& proposal_cov, const MhOptions& opts) {
    const int d = static_cast<int>(start_unc.size());
    const Matrix r = proposal_factor(proposal_cov);
    Rng rng(opts.seed);

    Vector x = start_unc;
    double fx = log_target_unc(x);
    if (!std::isfinite(fx)) throw NonFiniteEvaluation("mh_sample: non-finite target at start");

    double log_scale = 0.0;
    long accepted = 0;
    const int kept = opts.iterations / opts.thinning;
    Chain chain;
    chain.draws.resize(kept, d);
    chain.log_target.resize(kept);
    chain.burn_in = opts.burn_in;
    chain.thinning = opts.thinning;
    chain.seed = opts.seed;

    int stored = 0;
    const int total = opts.burn_in + opts.iterations;
    for (int t = 0; t < total; ++t) {
        const Vector step = r.transpose() * rng.normal_vector(d);
        const Vector y = x + std::exp(log_scale) * step;
        double fy;
        try {
            fy = log_target_unc(y);
        } catch (const std::runtime_error&) {
            fy = -std::numeric_limits<double>::infinity();
        }
        const double u = rng.uniform();
        const bool accept = std::isfinite(fy) && std::log(u) < fy - fx;
        if (accept) {
            x = y;
            fx = fy;
        }
        if (t < opts.burn_in) {
            if (opts.adapt) {
                const double gain = 1.0 / std::sqrt(t + 1.0);
                log_scale += gain * ((accept ? 1.0 : 0.0) - opts.target_acceptance);
                log_scale = std::clamp(log_scale, -6.0, 6.0);
            }
            continue;
        }
        accepted += accept ? 1 : 0;
        const int post = t - opts.burn_in;
        if (post % opts.thinning == 0 && stored < kept) {
            chain.draws.row(stored) = to_constrained(x).transpose();
            chain.log_target[stored] = fx;
            ++stored;
        }
    }
    chain.draws.conservativeResize(stored, d);
    chain.log_target.conservativeResize(stored);
    chain.acceptance_rate = static_cast<double>(accepted) / opts.iterations;
    if (chain.acceptance_rate < 0.001)
        throw ZeroAcceptance("mh_sample: acceptance rate below 0.001");
    return chain;
}

// Jacobian d theta / d psi of the coordinate change, by central differences.
Matrix transform_jacobian(const scoring::ParamTransform& tr, const Vector& psi) {
    const int d = static_cast<int>(psi.size());
    Matrix jac(d, d);
    const double eps = std::cbrt(std::numeric_limits<double>::epsilon());
    for (int j = 0; j < d; ++j) {
        const double h = eps * std::max(1.0, std::abs(psi[j]));
        Vector lo = psi, hi = psi;
        lo[j] -= h;
        hi[j] += h;
        jac.col(j) = (tr.to_constrained(hi) - tr.to_constrained(lo)) / (2.0 * h);
    }
    return jac;
}

}  // namespace

Chain mh_sample(const CalibratedTarget& target, const GodambeEstimate& info,
                const MhOptions& opts) {
    const int d = target.dim();
    const int n = static_cast<int>(target.data().rows());
    const auto& tr = target.transform();
    const Vector psi0 = tr.to_unconstrained(target.theta_tilde());

    Matrix cov;
    if (opts.proposal_cov) {
        cov = *opts.proposal_cov;
    } else {
        Matrix cov_theta = info.h.inverse() / n;
        cov_theta = (0.5 * (cov_theta + cov_theta.transpose())).eval();
        const Matrix jac = transform_jacobian(tr, psi0);
        const Matrix jinv = jac.inverse();
        cov = jinv * cov_theta * jinv.transpose();
        cov = ((2.38 * 2.38 / d) * 0.5 * (cov + cov.transpose())).eval();
    }

    return run_chain([&](const Vector& psi) { return target.log_density_unconstrained(psi); },
                     [&](const Vector& psi) { return tr.to_constrained(psi); }, psi0, cov, opts);
}

Chain mh_sample_density(const std::function<double(const Vector&)>& log_density,
                        const Vector& start, const Matrix& proposal_cov, const MhOptions& opts) {
    return run_chain(log_density, [](const Vector& x) { return x; }, start, proposal_cov, opts);
}

Grid1D grid_posterior_1d(const CalibratedTarget& target, const Vector& nodes) {
    if (target.dim() != 1) throw DomainError("grid_posterior_1d: scalar targets only");
    Vector logs(nodes.size());
    for (int i = 0; i < nodes.size(); ++i) {
        Vector theta(1);
        theta[0] = nodes[i];
        logs[i] = target.log_density(theta);
    }
    const double peak = logs.maxCoeff();
    Grid1D g{nodes, (logs.array() - peak).exp().matrix()};
    return grid_normalize(g);
}

double NormalApprox::log_density(const Vector& theta) const {
    const int d = static_cast<int>(mean.size());
    const Matrix r = spd_factor(covariance).r;
    const Vector y = r.transpose().triangularView<Eigen::Lower>().solve(theta - mean);
    double logdet = 0.0;
    for (int i = 0; i < d; ++i) logdet += std::log(r(i, i));
    return -0.5 * d * std::log(2.0 * std::numbers::pi) - logdet - 0.5 * y.squaredNorm();
}

NormalApprox normal_approx(const Vector& theta_tilde, const Matrix& h, int n) {
    Matrix cov = h.inverse() / n;
    cov = (0.5 * (cov + cov.transpose())).eval();
    return NormalApprox{theta_tilde, cov};
}

double expansion_correction(const ExpansionInputs& inputs, const Vector& w) {
    const int d = static_cast<int>(w.size());
    if (inputs.order < 0 || inputs.order > 2)
        throw UnsupportedOrder("expansion_correction: order must be 0, 1 or 2");
    if (inputs.order == 2 && d != 1)
        throw UnsupportedOrder("expansion_correction: second order is scalar-only");
    double corr = 1.0;
    if (inputs.order == 0) return corr;

    const double rootn = std::sqrt(static_cast<double>(inputs.n));
    const Vector u = inputs.c * w;
    double a1 = inputs.prior_gradient.dot(w) / inputs.prior_value;
    double cubic = 0.0;
    for (int k = 0; k < d; ++k) cubic += u[k] * u.dot(inputs.score_third[k] * u);
    a1 -= cubic / (6.0 * inputs.n);
    corr += a1 / rootn;
    if (inputs.order == 1) return corr;

    const double hbar = 1.0 / inputs.h(0, 0);
    const double c = inputs.c(0, 0);
    const double s3 = inputs.score_third[0](0, 0) / inputs.n;
    const double s4 = inputs.score_fourth_1d / inputs.n;
    const double pr1 = inputs.prior_gradient[0] / inputs.prior_value;
    const double pr2 = inputs.prior_hessian(0, 0) / inputs.prior_value;
    const double w2 = w[0] * w[0];
    const double w4 = w2 * w2;
    const double w6 = w4 * w2;

    double a2 = 0.5 * pr2 * (w2 - hbar);
    a2 -= pr1 * s3 * std::pow(c, 3) * (w4 - 3.0 * hbar * hbar) / 6.0;
    a2 -= s4 * std::pow(c, 4) * (w4 - 3.0 * hbar * hbar) / 24.0;
    a2 += s3 * s3 * std::pow(c, 6) * (2.0 * w6 - 15.0 * std::pow(hbar, 3)) / 72.0;
    return corr + a2 / inputs.n;
}

Grid1D expansion_density(const ExpansionInputs& inputs, const Vector& w_nodes) {
    if (inputs.h.rows() != 1)
        throw UnsupportedOrder("expansion_density: scalar parameters only");
    const double hbar = inputs.h(0, 0);
    Vector values(w_nodes.size());
    for (int i = 0; i < w_nodes.size(); ++i) {
        Vector w(1);
        w[0] = w_nodes[i];
        const double base =
            std::sqrt(hbar / (2.0 * std::numbers::pi)) * std::exp(-0.5 * hbar * w[0] * w[0]);
        values[i] = std::max(0.0, base * expansion_correction(inputs, w));
    }
    return Grid1D{w_nodes, values};
}

std::pair<double, double> grid_moments(const Grid1D& grid) {
    const Grid1D g = grid_normalize(grid);
    Grid1D first{g.nodes, (g.nodes.array() * g.values.array()).matrix()};
    const double mean = trapezoid(first);
    Grid1D second{g.nodes,
                  ((g.nodes.array() - mean).square() * g.values.array()).matrix()};
    const double var = trapezoid(second);
    return {mean, std::sqrt(std::max(0.0, var))};
}

namespace {

// Inverse CDF on a normalized grid by linear interpolation of the
// cumulative trapezoid mass.
double grid_quantile(const Grid1D& g, double p) {
    const int m = static_cast<int>(g.nodes.size());
    Vector cdf(m);
    cdf[0] = 0.0;
    for (int i = 1; i < m; ++i)
        cdf[i] = cdf[i - 1] +
                 0.5 * (g.values[i] + g.values[i - 1]) * (g.nodes[i] - g.nodes[i - 1]);
    const double total = cdf[m - 1];
    const double target = p * total;
    for (int i = 1; i < m; ++i) {
        if (cdf[i] >= target) {
            const double span = cdf[i] - cdf[i - 1];
            const double frac = span > 0.0 ? (target - cdf[i - 1]) / span : 0.0;
            return g.nodes[i - 1] + frac * (g.nodes[i] - g.nodes[i - 1]);
        }
    }
    return g.nodes[m - 1];
}

double sorted_quantile(std::vector<double>& v, double p) {
    std::sort(v.begin(), v.end());
    const double idx = p * (static_cast<double>(v.size()) - 1.0);
    const auto lo = static_cast<std::size_t>(std::floor(idx));
    const auto hi = std::min(lo + 1, v.size() - 1);
    const double frac = idx - static_cast<double>(lo);
    return v[lo] + frac * (v[hi] - v[lo]);
}

}  // namespace

PosteriorSummary posterior_summaries(const Grid1D& grid) {
    const Grid1D g = grid_normalize(grid);
    PosteriorSummary s;
    s.mode = s.mean = s.sd = s.lower95 = s.upper95 = Vector(1);
    int arg = 0;
    g.values.maxCoeff(&arg);
    s.mode[0] = g.nodes[arg];
    const auto [mean, sd] = grid_moments(g);
    s.mean[0] = mean;
    s.sd[0] = sd;
    s.lower95[0] = grid_quantile(g, 0.025);
    s.upper95[0] = grid_quantile(g, 0.975);
    return s;
}

PosteriorSummary posterior_summaries(const Chain& chain) {
    const int t = static_cast<int>(chain.draws.rows());
    const int d = static_cast<int>(chain.draws.cols());
    if (t < 2) throw DomainError("posterior_summaries: chain too short");
    PosteriorSummary s;
    s.mode = s.mean = s.sd = s.lower95 = s.upper95 = Vector(d);

    int arg = 0;
    chain.log_target.maxCoeff(&arg);
    s.mode = chain.draws.row(arg).transpose();
    for (int j = 0; j < d; ++j) {
        const Vector col = chain.draws.col(j);
        const double mean = col.mean();
        s.mean[j] = mean;
        s.sd[j] = std::sqrt((col.array() - mean).square().sum() / (t - 1));
        std::vector<double> v(col.data(), col.data() + t);
        s.lower95[j] = sorted_quantile(v, 0.025);
        s.upper95[j] = sorted_quantile(v, 0.975);
    }
    return s;
}

}  // namespace scorebayes::posterior
