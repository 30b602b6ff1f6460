#include "scorebayes/scoring.hpp"

#include <cmath>

namespace scorebayes::scoring {

using numerics::fd_gradient;
using numerics::fd_hessian;
using numerics::integrate_adaptive;
using numerics::pairwise_sum;

ParamTransform ParamTransform::identity(int dim) {
    ParamTransform t;
    t.to_unconstrained = [](const Vector& x) { return x; };
    t.to_constrained = [](const Vector& x) { return x; };
    t.log_jacobian = [](const Vector&) { return 0.0; };
    (void)dim;
    return t;
}

double log_score(double log_density) {
    if (!std::isfinite(log_density)) throw NonFiniteDensity("log_score: non-finite log-density");
    return -log_density;
}

double tsallis_score(double density_at_x, double integral_q_gamma, const TsallisConfig& cfg) {
    if (!std::isfinite(density_at_x) || !std::isfinite(integral_q_gamma))
        throw NonFiniteDensity("tsallis_score: non-finite input");
    return (cfg.gamma - 1.0) * integral_q_gamma -
           cfg.gamma * std::pow(density_at_x, cfg.gamma - 1.0);
}

double tsallis_score_quadrature(double density_at_x, const std::function<double(double)>& density,
                                double lo, double hi, const TsallisConfig& cfg) {
    if (!(lo < hi)) throw IntegralUnavailable("tsallis_score_quadrature: empty support");
    const double integral = integrate_adaptive(
        [&](double y) { return std::pow(density(y), cfg.gamma); }, lo, hi, 1e-12);
    return tsallis_score(density_at_x, integral, cfg);
}

double gaussian_power_integral(double sigma2, double gamma) {
    if (!(sigma2 > 0.0)) throw DomainError("gaussian_power_integral: sigma2 must be positive");
    return std::pow(2.0 * M_PI * sigma2, 0.5 * (1.0 - gamma)) / std::sqrt(gamma);
}

double hyvarinen_score(const Vector& grad_log_density, double laplacian_log_density) {
    if (!grad_log_density.allFinite() || !std::isfinite(laplacian_log_density))
        throw NonFiniteDerivative("hyvarinen_score: non-finite derivative");
    return laplacian_log_density + 0.5 * grad_log_density.squaredNorm();
}

double circular_hyvarinen_score(double angle, double a, double b) {
    const double c = std::cos(angle), s = std::sin(angle);
    const double d1 = -a * s + b * c;   // (log q)'
    const double d2 = -a * c - b * s;   // (log q)''
    return d2 + 0.5 * d1 * d1;
}

namespace {

void check_eqcorr_domain(int q, double sigma2, double rho) {
    if (q < 2) throw DomainError("eqcorr: q must be at least 2");
    if (!(sigma2 > 0.0)) throw DomainError("eqcorr: sigma2 must be positive");
    if (!(rho > -1.0 / (q - 1.0) && rho < 1.0)) throw DomainError("eqcorr: rho outside (-1/(q-1), 1)");
}

// Pairwise score of a single q-vector row: sum over pairs r < s of the
// negated bivariate normal log-density, full constant included.
double eqcorr_row_score(const Vector& row, double mu, double sigma2, double rho) {
    const int q = static_cast<int>(row.size());
    check_eqcorr_domain(q, sigma2, rho);
    const double npairs = 0.5 * q * (q - 1.0);
    double sum = 0.0, sumsq = 0.0;
    for (int r = 0; r < q; ++r) {
        const double z = row[r] - mu;
        sum += z;
        sumsq += z * z;
    }
    const double quad = ((q - 1.0 + rho) * sumsq - rho * sum * sum) / (2.0 * sigma2 * (1.0 - rho * rho));
    return npairs * (std::log(2.0 * M_PI) + std::log(sigma2) + 0.5 * std::log1p(-rho * rho)) + quad;
}

}  // namespace

double pairwise_eqcorr_score(const Matrix& data, double mu, double sigma2, double rho) {
    const int n = static_cast<int>(data.rows());
    const int q = static_cast<int>(data.cols());
    check_eqcorr_domain(q, sigma2, rho);
    if (n < 1) throw DomainError("pairwise_eqcorr_score: empty dataset");

    const double xbar = data.mean();
    double ssw = 0.0, ssb = 0.0;
    for (int i = 0; i < n; ++i) {
        const double rowbar = data.row(i).mean();
        for (int r = 0; r < q; ++r) {
            const double d = data(i, r) - rowbar;
            ssw += d * d;
        }
        ssb += (rowbar - xbar) * (rowbar - xbar);
    }

    const double qq = static_cast<double>(q);
    const double sp = -0.5 * n * qq * (qq - 1.0) * (std::log(sigma2) + std::log(2.0 * M_PI)) -
                      0.25 * n * qq * (qq - 1.0) * std::log1p(-rho * rho) -
                      (qq - 1.0 + rho) / (2.0 * sigma2 * (1.0 - rho * rho)) * ssw -
                      (qq * (qq - 1.0) * ssb + n * qq * (qq - 1.0) * (xbar - mu) * (xbar - mu)) /
                          (2.0 * sigma2 * (1.0 + rho));
    return -sp;
}

TotalScoreEval total_score(const ScoreModel& model, const Matrix& data, const Vector& theta,
                           bool want_gradient, bool want_hessian) {
    const int n = static_cast<int>(data.rows());
    const int d = model.param_dim;
    TotalScoreEval out;

    std::vector<double> values(n);
    for (int i = 0; i < n; ++i) values[i] = model.pointwise(data.row(i).transpose(), theta);
    out.value = pairwise_sum(values);

    if (want_gradient) {
        std::vector<std::vector<double>> comps(d, std::vector<double>(n));
        for (int i = 0; i < n; ++i) {
            const Vector x = data.row(i).transpose();
            Vector g = model.has_gradient()
                           ? model.pointwise_gradient(x, theta)
                           : fd_gradient([&](const Vector& t) { return model.pointwise(x, t); },
                                         theta);
            for (int j = 0; j < d; ++j) comps[j][i] = g[j];
        }
        Vector grad(d);
        for (int j = 0; j < d; ++j) grad[j] = pairwise_sum(comps[j]);
        out.gradient = grad;
    }
    if (want_hessian) {
        Matrix h = Matrix::Zero(d, d);
        for (int i = 0; i < n; ++i) {
            const Vector x = data.row(i).transpose();
            h += model.has_hessian()
                     ? model.pointwise_hessian(x, theta)
                     : fd_hessian([&](const Vector& t) { return model.pointwise(x, t); }, theta);
        }
        out.hessian = h;
    }
    return out;
}

double total_score_value(const ScoreModel& model, const Matrix& data, const Vector& theta) {
    return total_score(model, data, theta, false, false).value;
}

// Bundled models -------------------------------------------------------------

namespace {

ParamTransform location_log_scale_transform(int nloc) {
    // First nloc coordinates free, last coordinate positive (log map).
    ParamTransform t;
    t.to_unconstrained = [nloc](const Vector& theta) {
        Vector psi = theta;
        psi[nloc] = std::log(theta[nloc]);
        return psi;
    };
    t.to_constrained = [nloc](const Vector& psi) {
        Vector theta = psi;
        theta[nloc] = std::exp(psi[nloc]);
        return theta;
    };
    t.log_jacobian = [nloc](const Vector& psi) { return psi[nloc]; };
    return t;
}

double gaussian_log_density(double x, double mu, double sigma2) {
    const double r = x - mu;
    return -0.5 * std::log(2.0 * M_PI * sigma2) - r * r / (2.0 * sigma2);
}

}  // namespace

ScoreModel gaussian_log_score_model() {
    ScoreModel m;
    m.param_dim = 2;
    m.obs_dim = 1;
    m.pointwise = [](const Vector& x, const Vector& th) {
        if (!(th[1] > 0.0)) throw DomainError("gaussian model: sigma2 must be positive");
        return -gaussian_log_density(x[0], th[0], th[1]);
    };
    m.pointwise_gradient = [](const Vector& x, const Vector& th) {
        const double mu = th[0], s2 = th[1], r = x[0] - mu;
        Vector g(2);
        g[0] = -r / s2;
        g[1] = 0.5 / s2 - r * r / (2.0 * s2 * s2);
        return g;
    };
    m.pointwise_hessian = [](const Vector& x, const Vector& th) {
        const double mu = th[0], s2 = th[1], r = x[0] - mu;
        Matrix h(2, 2);
        h(0, 0) = 1.0 / s2;
        h(0, 1) = h(1, 0) = r / (s2 * s2);
        h(1, 1) = -0.5 / (s2 * s2) + r * r / (s2 * s2 * s2);
        return h;
    };
    m.transform = location_log_scale_transform(1);
    return m;
}

ScoreModel gaussian_tsallis_model(const TsallisConfig& cfg) {
    const double gamma = cfg.gamma;
    ScoreModel m;
    m.param_dim = 2;
    m.obs_dim = 1;
    m.pointwise = [gamma](const Vector& x, const Vector& th) {
        if (!(th[1] > 0.0)) throw DomainError("gaussian model: sigma2 must be positive");
        const double q = std::exp(gaussian_log_density(x[0], th[0], th[1]));
        return tsallis_score(q, gaussian_power_integral(th[1], gamma), TsallisConfig(gamma));
    };
    m.pointwise_gradient = [gamma](const Vector& x, const Vector& th) {
        const double mu = th[0], s2 = th[1], r = x[0] - mu;
        const double qpow = std::exp((gamma - 1.0) * gaussian_log_density(x[0], mu, s2));
        const double igrad = gaussian_power_integral(s2, gamma) * (1.0 - gamma) / (2.0 * s2);
        Vector g(2);
        g[0] = -gamma * (gamma - 1.0) * qpow * r / s2;
        g[1] = (gamma - 1.0) * igrad -
               gamma * (gamma - 1.0) * qpow * (-0.5 / s2 + r * r / (2.0 * s2 * s2));
        return g;
    };
    m.transform = location_log_scale_transform(1);
    return m;
}

ScoreModel vonmises_hyvarinen_model(double theta0) {
    ScoreModel m;
    m.param_dim = 1;
    m.obs_dim = 1;
    m.pointwise = [theta0](const Vector& x, const Vector& th) {
        const double k = th[0];
        return circular_hyvarinen_score(x[0] - theta0, k, 0.0);
    };
    m.pointwise_gradient = [theta0](const Vector& x, const Vector& th) {
        const double u = x[0] - theta0, s = std::sin(u);
        Vector g(1);
        g[0] = -std::cos(u) + th[0] * s * s;
        return g;
    };
    m.pointwise_hessian = [theta0](const Vector& x, const Vector&) {
        const double s = std::sin(x[0] - theta0);
        Matrix h(1, 1);
        h(0, 0) = s * s;
        return h;
    };
    ParamTransform t;
    t.to_unconstrained = [](const Vector& th) {
        Vector psi(1);
        psi[0] = std::log(th[0]);
        return psi;
    };
    t.to_constrained = [](const Vector& psi) {
        Vector th(1);
        th[0] = std::exp(psi[0]);
        return th;
    };
    t.log_jacobian = [](const Vector& psi) { return psi[0]; };
    m.transform = t;
    return m;
}

ScoreModel circular_natural_model() {
    ScoreModel m;
    m.param_dim = 2;
    m.obs_dim = 1;
    m.pointwise = [](const Vector& x, const Vector& th) {
        return circular_hyvarinen_score(x[0], th[0], th[1]);
    };
    m.pointwise_gradient = [](const Vector& x, const Vector& th) {
        const double c = std::cos(x[0]), s = std::sin(x[0]);
        const double d1 = -th[0] * s + th[1] * c;
        Vector g(2);
        g[0] = -c - d1 * s;
        g[1] = -s + d1 * c;
        return g;
    };
    m.pointwise_hessian = [](const Vector& x, const Vector&) {
        const double c = std::cos(x[0]), s = std::sin(x[0]);
        Matrix h(2, 2);
        h(0, 0) = s * s;
        h(0, 1) = h(1, 0) = -s * c;
        h(1, 1) = c * c;
        return h;
    };
    m.transform = ParamTransform::identity(2);
    return m;
}

ScoreModel eqcorr_pairwise_model(int q) {
    if (q < 2) throw DomainError("eqcorr_pairwise_model: q must be at least 2");
    ScoreModel m;
    m.param_dim = 3;
    m.obs_dim = q;
    m.pointwise = [](const Vector& x, const Vector& th) {
        return eqcorr_row_score(x, th[0], th[1], th[2]);
    };
    // Gradient and Hessian by finite differences.
    const double rho_lo = -1.0 / (q - 1.0);
    ParamTransform t;
    t.to_unconstrained = [rho_lo](const Vector& th) {
        Vector psi(3);
        psi[0] = th[0];
        psi[1] = std::log(th[1]);
        const double u = (th[2] - rho_lo) / (1.0 - rho_lo);
        psi[2] = std::log(u / (1.0 - u));
        return psi;
    };
    t.to_constrained = [rho_lo](const Vector& psi) {
        Vector th(3);
        th[0] = psi[0];
        th[1] = std::exp(psi[1]);
        const double u = 1.0 / (1.0 + std::exp(-psi[2]));
        th[2] = rho_lo + (1.0 - rho_lo) * u;
        return th;
    };
    t.log_jacobian = [rho_lo](const Vector& psi) {
        const double u = 1.0 / (1.0 + std::exp(-psi[2]));
        return psi[1] + std::log((1.0 - rho_lo) * u * (1.0 - u));
    };
    m.transform = t;
    return m;
}

ScoreModel eqcorr_rho_model(int q, double mu, double sigma2) {
    if (q < 2) throw DomainError("eqcorr_rho_model: q must be at least 2");
    ScoreModel m;
    m.param_dim = 1;
    m.obs_dim = q;
    m.pointwise = [mu, sigma2](const Vector& x, const Vector& th) {
        return eqcorr_row_score(x, mu, sigma2, th[0]);
    };
    const double rho_lo = -1.0 / (q - 1.0);
    ParamTransform t;
    t.to_unconstrained = [rho_lo](const Vector& th) {
        Vector psi(1);
        const double u = (th[0] - rho_lo) / (1.0 - rho_lo);
        psi[0] = std::log(u / (1.0 - u));
        return psi;
    };
    t.to_constrained = [rho_lo](const Vector& psi) {
        Vector th(1);
        const double u = 1.0 / (1.0 + std::exp(-psi[0]));
        th[0] = rho_lo + (1.0 - rho_lo) * u;
        return th;
    };
    t.log_jacobian = [rho_lo](const Vector& psi) {
        const double u = 1.0 / (1.0 + std::exp(-psi[0]));
        return std::log((1.0 - rho_lo) * u * (1.0 - u));
    };
    m.transform = t;
    return m;
}

namespace {

// Observation row layout for regression models: (y, x_1, ..., x_p).
double regression_residual(const Vector& obs, const Vector& th, int p) {
    double fit = 0.0;
    for (int j = 0; j < p; ++j) fit += obs[1 + j] * th[j];
    return obs[0] - fit;
}

}  // namespace

ScoreModel regression_tsallis_model(int p, double gamma) {
    TsallisConfig cfg(gamma);
    ScoreModel m;
    m.param_dim = p + 1;
    m.obs_dim = p + 1;
    m.pointwise = [p, gamma](const Vector& obs, const Vector& th) {
        const double s2 = th[p];
        if (!(s2 > 0.0)) throw DomainError("regression model: sigma2 must be positive");
        const double r = regression_residual(obs, th, p);
        const double q = std::exp(gaussian_log_density(r, 0.0, s2));
        return tsallis_score(q, gaussian_power_integral(s2, gamma), TsallisConfig(gamma));
    };
    m.pointwise_gradient = [p, gamma](const Vector& obs, const Vector& th) {
        const double s2 = th[p];
        const double r = regression_residual(obs, th, p);
        const double qpow = std::exp((gamma - 1.0) * gaussian_log_density(r, 0.0, s2));
        const double igrad = gaussian_power_integral(s2, gamma) * (1.0 - gamma) / (2.0 * s2);
        Vector g(p + 1);
        for (int j = 0; j < p; ++j) g[j] = -gamma * (gamma - 1.0) * qpow * r * obs[1 + j] / s2;
        g[p] = (gamma - 1.0) * igrad -
               gamma * (gamma - 1.0) * qpow * (-0.5 / s2 + r * r / (2.0 * s2 * s2));
        return g;
    };
    m.transform = location_log_scale_transform(p);
    return m;
}

ScoreModel regression_log_score_model(int p) {
    ScoreModel m;
    m.param_dim = p + 1;
    m.obs_dim = p + 1;
    m.pointwise = [p](const Vector& obs, const Vector& th) {
        const double s2 = th[p];
        if (!(s2 > 0.0)) throw DomainError("regression model: sigma2 must be positive");
        return -gaussian_log_density(regression_residual(obs, th, p), 0.0, s2);
    };
    m.pointwise_gradient = [p](const Vector& obs, const Vector& th) {
        const double s2 = th[p];
        const double r = regression_residual(obs, th, p);
        Vector g(p + 1);
        for (int j = 0; j < p; ++j) g[j] = -r * obs[1 + j] / s2;
        g[p] = 0.5 / s2 - r * r / (2.0 * s2 * s2);
        return g;
    };
    m.transform = location_log_scale_transform(p);
    return m;
}

}  // namespace scorebayes::scoring
