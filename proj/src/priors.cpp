#include "scorebayes/priors.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "scorebayes/models.hpp"

namespace scorebayes::priors {

using estimation::estimate_j;
using estimation::estimate_k;
using models::Rng;
using numerics::bessel_ratio_a1;
using numerics::Grid1D;

double TabulatedPrior::log_density(double x) const {
    if (x < nodes[0] || x > nodes[nodes.size() - 1])
        throw DomainError("TabulatedPrior: point outside tabulated range");
    // linear interpolation of the log-prior
    Eigen::Index lo = 0, hi = nodes.size() - 1;
    while (hi - lo > 1) {
        const Eigen::Index mid = (lo + hi) / 2;
        if (nodes[mid] <= x)
            lo = mid;
        else
            hi = mid;
    }
    const double t = (x - nodes[lo]) / (nodes[hi] - nodes[lo]);
    return (1.0 - t) * log_prior[lo] + t * log_prior[hi];
}

void TabulatedPrior::normalize() {
    const double shift = log_prior.maxCoeff();
    Grid1D g{nodes, (log_prior.array() - shift).exp()};
    const double mass = numerics::trapezoid(g);
    if (!(mass > 0.0)) throw ZeroMass("TabulatedPrior: zero mass");
    log_prior.array() -= shift + std::log(mass);
}

void TabulatedPrior::write_csv(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("TabulatedPrior: cannot open " + path);
    out << "theta,log_prior,mc_stderr\n" << std::setprecision(17);
    for (Eigen::Index i = 0; i < nodes.size(); ++i)
        out << nodes[i] << ',' << log_prior[i] << ',' << mc_stderr[i] << '\n';
}

TabulatedPrior TabulatedPrior::read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("TabulatedPrior: cannot open " + path);
    std::string line;
    std::getline(in, line);  // header
    std::vector<double> n, lp, se;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string cell;
        double v[3];
        for (int k = 0; k < 3; ++k) {
            if (!std::getline(row, cell, ',')) throw std::runtime_error("TabulatedPrior: bad row");
            v[k] = std::stod(cell);
        }
        n.push_back(v[0]);
        lp.push_back(v[1]);
        se.push_back(v[2]);
    }
    TabulatedPrior t;
    t.nodes = Eigen::Map<Vector>(n.data(), static_cast<Eigen::Index>(n.size()));
    t.log_prior = Eigen::Map<Vector>(lp.data(), static_cast<Eigen::Index>(lp.size()));
    t.mc_stderr = Eigen::Map<Vector>(se.data(), static_cast<Eigen::Index>(se.size()));
    return t;
}

PriorSpec PriorSpec::flat(int dim) {
    (void)dim;
    PriorSpec p;
    p.kind = Kind::flat;
    p.log_density = [](const Vector&) { return 0.0; };
    return p;
}

PriorSpec PriorSpec::power(int coord, double exponent) {
    PriorSpec p;
    p.kind = Kind::power;
    p.log_density = [coord, exponent](const Vector& theta) {
        if (!(theta[coord] > 0.0)) throw DomainError("power prior: coordinate must be positive");
        return exponent * std::log(theta[coord]);
    };
    return p;
}

PriorSpec PriorSpec::closed_form(std::function<double(const Vector&)> log_density) {
    PriorSpec p;
    p.kind = Kind::closed_form;
    p.log_density = std::move(log_density);
    return p;
}

PriorSpec PriorSpec::tabulated(TabulatedPrior t) {
    PriorSpec p;
    p.kind = Kind::tabulated;
    p.table = std::make_shared<TabulatedPrior>(std::move(t));
    auto table = p.table;
    p.log_density = [table](const Vector& theta) { return table->log_density(theta[0]); };
    return p;
}

double godambe_reference_prior(const Matrix& g) {
    // SPD check through the factorization; prior value is prod of diag(R).
    const Matrix r = numerics::spd_factor(g).r;
    double v = 1.0;
    for (Eigen::Index i = 0; i < r.rows(); ++i) v *= r(i, i);
    return v;
}

McValue godambe_reference_prior_mc(const McGodambeProvider& provider, const Vector& theta) {
    const int reps = provider.replicates;
    if (reps < 2) throw DomainError("godambe_reference_prior_mc: need at least 2 replicates");
    double sum = 0.0, sumsq = 0.0;
    for (int r = 0; r < reps; ++r) {
        const Matrix data = provider.simulate(Rng::derive_seed(provider.seed, r), theta);
        const Matrix k = estimate_k(provider.model, data, theta);
        const Matrix j = estimate_j(provider.model, data, theta);
        const Matrix g = k * j.inverse() * k;
        const double v = godambe_reference_prior(0.5 * (g + g.transpose()));
        sum += v;
        sumsq += v * v;
    }
    McValue out;
    out.value = sum / reps;
    out.std_error = std::sqrt(std::max(0.0, sumsq / reps - out.value * out.value) / (reps - 1.0));
    return out;
}

TabulatedPrior tabulate_reference_prior(const McGodambeProvider& provider, const Vector& nodes) {
    TabulatedPrior t;
    t.nodes = nodes;
    t.log_prior.resize(nodes.size());
    t.mc_stderr.resize(nodes.size());
    for (Eigen::Index i = 0; i < nodes.size(); ++i) {
        McGodambeProvider local = provider;
        local.seed = Rng::derive_seed(provider.seed, static_cast<std::uint64_t>(i));
        Vector theta(1);
        theta[0] = nodes[i];
        const McValue v = godambe_reference_prior_mc(local, theta);
        t.log_prior[i] = std::log(v.value);
        t.mc_stderr[i] = v.std_error / v.value;  // delta method on the log scale
    }
    t.normalize();
    return t;
}

double vmf_reference_prior(double kappa) {
    if (!(kappa > 0.0)) throw DomainError("vmf_reference_prior: kappa must be positive");
    if (kappa < 1e-3) {
        // A1 = k/2 - k^3/16 + O(k^5); 2k - 3A1 = k/2 + 3k^3/16 + O(k^5).
        const double a1 = 0.5 * kappa - kappa * kappa * kappa / 16.0;
        const double denom = kappa * (0.5 * kappa + 3.0 * kappa * kappa * kappa / 16.0);
        return std::sqrt(a1 * a1 / denom);
    }
    const double a1 = bessel_ratio_a1(kappa);
    const double denom = kappa * (2.0 * kappa - 3.0 * a1);
    if (!(denom > 0.0)) throw DomainError("vmf_reference_prior: nonpositive variance expression");
    return std::sqrt(a1 * a1 / denom);
}

double vmf_asymptotic_variance(double kappa) {
    if (!(kappa > 0.0)) throw DomainError("vmf_asymptotic_variance: kappa must be positive");
    const double a1 = bessel_ratio_a1(kappa);
    return kappa * (2.0 * kappa - 3.0 * a1) / (a1 * a1);
}

TsallisVariances tsallis_regression_variances(double gamma, double sigma2) {
    if (!(gamma >= 1.0)) throw DomainError("tsallis_regression_variances: gamma must be >= 1");
    if (!(sigma2 > 0.0)) throw DomainError("tsallis_regression_variances: sigma2 must be positive");
    const double gm1 = gamma - 1.0;
    const double base = 1.0 + gm1 * gm1 / (2.0 * gamma - 1.0);
    TsallisVariances out;
    out.v_beta = sigma2 * std::pow(base, 1.5);
    out.v_error = 4.0 * sigma2 * sigma2 / ((2.0 + gm1 * gm1) * (2.0 + gm1 * gm1)) *
                  (2.0 * (1.0 + 2.0 * gm1 * gm1) * std::pow(base, 2.5) - gm1 * gm1 * gamma * gamma);
    return out;
}

PriorSpec regression_reference_prior(double gamma, int p) {
    PriorSpec prior;
    prior.kind = PriorSpec::Kind::godambe_reference;
    prior.log_density = [gamma, p](const Vector& theta) {
        const double sigma2 = theta[p];
        const TsallisVariances v = tsallis_regression_variances(gamma, sigma2);
        return -0.5 * (p * std::log(v.v_beta) + std::log(v.v_error));
    };
    return prior;
}

double chi_square_prior_slope(double g, double i, double sigma, double a_s, double a_l,
                              double g_deriv, double bracket_deriv) {
    const double gamma_inv = 1.0 / g - 4.0 / i + 4.0 * sigma;
    if (std::abs(gamma_inv) < 1e-12)
        throw SingularGamma("chi_square_prior_slope: singular Gamma factor");
    const double bracket = 6.0 * a_s / g + 4.0 * a_l / i + (g_deriv / g) * (5.0 / g - 4.0 * sigma) +
                           2.0 * g * bracket_deriv;
    return 0.25 * bracket / gamma_inv;
}

TabulatedPrior chi_square_prior_scalar(const Vector& nodes, const ChiSqPriorInputs& inputs) {
    const Eigen::Index m = nodes.size();
    if (m < 3) throw DomainError("chi_square_prior_scalar: need at least 3 nodes");

    Vector g(m), i(m), sig(m), as(m), al(m), gerr(m), ierr(m), sigerr(m), aserr(m), alerr(m);
    for (Eigen::Index k = 0; k < m; ++k) {
        const McValue vg = inputs.godambe(nodes[k]);
        const McValue vi = inputs.fisher(nodes[k]);
        const McValue vs = inputs.sigma(nodes[k]);
        const McValue vas = inputs.a_score(nodes[k]);
        const McValue val = inputs.a_lik(nodes[k]);
        if (!(vg.value > 0.0) || !(vi.value > 0.0))
            throw DomainError("chi_square_prior_scalar: g and i must be positive");
        g[k] = vg.value;
        i[k] = vi.value;
        sig[k] = vs.value;
        as[k] = vas.value;
        al[k] = val.value;
        gerr[k] = vg.std_error;
        ierr[k] = vi.std_error;
        sigerr[k] = vs.std_error;
        aserr[k] = vas.std_error;
        alerr[k] = val.std_error;
    }

    // Grid derivatives of g and of the bracketed function 5/g - 4 sigma.
    Vector bracket = 5.0 * g.cwiseInverse() - 4.0 * sig;
    const auto grid_deriv = [&](const Vector& f, Eigen::Index k) {
        if (k == 0) return (f[1] - f[0]) / (nodes[1] - nodes[0]);
        if (k == m - 1) return (f[m - 1] - f[m - 2]) / (nodes[m - 1] - nodes[m - 2]);
        return (f[k + 1] - f[k - 1]) / (nodes[k + 1] - nodes[k - 1]);
    };

    Vector slope(m), slope_err(m);
    for (Eigen::Index k = 0; k < m; ++k) {
        slope[k] = chi_square_prior_slope(g[k], i[k], sig[k], as[k], al[k], grid_deriv(g, k),
                                          grid_deriv(bracket, k));
        // First-order error propagation: bump each input by its stderr.
        double var = 0.0;
        const auto bump = [&](double dg, double di, double dsig, double das, double dal) {
            const double s =
                chi_square_prior_slope(g[k] + dg, i[k] + di, sig[k] + dsig, as[k] + das,
                                       al[k] + dal, grid_deriv(g, k), grid_deriv(bracket, k));
            var += (s - slope[k]) * (s - slope[k]);
        };
        if (gerr[k] > 0.0) bump(gerr[k], 0, 0, 0, 0);
        if (ierr[k] > 0.0) bump(0, ierr[k], 0, 0, 0);
        if (sigerr[k] > 0.0) bump(0, 0, sigerr[k], 0, 0);
        if (aserr[k] > 0.0) bump(0, 0, 0, aserr[k], 0);
        if (alerr[k] > 0.0) bump(0, 0, 0, 0, alerr[k]);
        slope_err[k] = std::sqrt(var);
    }

    // Cumulative trapezoid of the slope gives the log-prior up to a constant;
    // stderr accumulates in quadrature assuming independent grid points.
    TabulatedPrior t;
    t.nodes = nodes;
    t.log_prior.resize(m);
    t.mc_stderr.resize(m);
    t.log_prior[0] = 0.0;
    t.mc_stderr[0] = 0.0;
    double var_acc = 0.0;
    for (Eigen::Index k = 1; k < m; ++k) {
        const double h = nodes[k] - nodes[k - 1];
        t.log_prior[k] = t.log_prior[k - 1] + 0.5 * h * (slope[k] + slope[k - 1]);
        const double step_err = 0.5 * h * (slope_err[k] + slope_err[k - 1]);
        var_acc += step_err * step_err;
        t.mc_stderr[k] = std::sqrt(var_acc);
    }
    t.normalize();
    return t;
}

PriorSpec transform_prior(const PriorSpec& prior, std::function<double(double)> theta_of_psi,
                          std::function<double(double)> dtheta_dpsi) {
    PriorSpec out;
    out.kind = prior.kind;
    auto base = prior.log_density;
    out.log_density = [base, theta_of_psi, dtheta_dpsi](const Vector& psi) {
        const double deriv = dtheta_dpsi(psi[0]);
        if (!(std::abs(deriv) > 0.0)) throw SingularJacobian("transform_prior: zero derivative");
        Vector theta(1);
        theta[0] = theta_of_psi(psi[0]);
        return base(theta) + std::log(std::abs(deriv));
    };
    return out;
}

PriorSpec transform_prior_multivariate(const PriorSpec& prior,
                                       std::function<Vector(const Vector&)> theta_of_psi,
                                       std::function<double(const Vector&)> jacobian_det) {
    PriorSpec out;
    out.kind = prior.kind;
    auto base = prior.log_density;
    out.log_density = [base, theta_of_psi, jacobian_det](const Vector& psi) {
        const double det = jacobian_det(psi);
        if (!(std::abs(det) > 0.0)) throw SingularJacobian("transform_prior: singular Jacobian");
        return base(theta_of_psi(psi)) + std::log(std::abs(det));
    };
    return out;
}

}  // namespace scorebayes::priors
