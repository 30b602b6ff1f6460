#include "scorebayes/models.hpp"

#include <cmath>

#include "scorebayes/numerics.hpp"

namespace scorebayes::models {

using numerics::integrate_adaptive;
using numerics::log_bessel_i0;
using numerics::spd_factor;

// splitmix64 step; decorrelates consecutive seeds.
std::uint64_t Rng::next_raw() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

double Rng::uniform() {
    // 53 random bits into [0, 1).
    return static_cast<double>(next_raw() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double Rng::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double t = 2.0 * M_PI * u2;
    spare_ = r * std::sin(t);
    has_spare_ = true;
    return r * std::cos(t);
}

Vector Rng::normal_vector(int d) {
    Vector v(d);
    for (int i = 0; i < d; ++i) v[i] = normal();
    return v;
}

std::uint64_t Rng::derive_seed(std::uint64_t seed, std::uint64_t index) {
    // One splitmix64 scramble of (seed, index).
    std::uint64_t z = seed ^ (0x9e3779b97f4a7c15ULL * (index + 1));
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

double VonMisesModel::log_density(double t) const {
    return kappa * std::cos(t - theta0) - std::log(2.0 * M_PI) - log_bessel_i0(kappa);
}

Matrix EqCorrModel::covariance() const {
    if (!(rho > -1.0 / (q - 1.0) && rho < 1.0)) throw DomainError("EqCorrModel: rho out of range");
    if (!(sigma2 > 0.0)) throw DomainError("EqCorrModel: sigma2 must be positive");
    Matrix s = Matrix::Constant(q, q, sigma2 * rho);
    s.diagonal().setConstant(sigma2);
    return s;
}

double NefModel::log_density(double x, double theta) const {
    if (!cumulant) throw UnknownNormalizer("NefModel: cumulant k(theta) not supplied");
    return theta * x - (*cumulant)(theta) + a(x);
}

double LocationScaleModel::log_density(double x, double param) const {
    if (mode == Mode::location) return base_log_density(x - param);
    if (!(param > 0.0)) throw DomainError("LocationScaleModel: scale must be positive");
    return base_log_density(x / param) - std::log(param);
}

Vector sample_vonmises(std::uint64_t seed, int n, double theta0, double kappa) {
    if (kappa < 0.0) throw DomainError("sample_vonmises: negative kappa");
    Rng rng(seed);
    Vector out(n);

    if (kappa == 0.0) {
        for (int i = 0; i < n; ++i) out[i] = rng.uniform(-M_PI, M_PI);
        return out;
    }

    // Best & Fisher (1979) rejection from a wrapped Cauchy envelope.
    const double tau = 1.0 + std::sqrt(1.0 + 4.0 * kappa * kappa);
    const double rho0 = (tau - std::sqrt(2.0 * tau)) / (2.0 * kappa);
    const double r = (1.0 + rho0 * rho0) / (2.0 * rho0);

    for (int i = 0; i < n; ++i) {
        double angle = 0.0;
        for (;;) {
            const double u1 = rng.uniform();
            const double z = std::cos(M_PI * u1);
            const double f = (1.0 + r * z) / (r + z);
            const double c = kappa * (r - f);
            const double u2 = rng.uniform();
            if (c * (2.0 - c) - u2 > 0.0 || std::log(c / u2) + 1.0 - c >= 0.0) {
                const double u3 = rng.uniform();
                angle = (u3 > 0.5 ? 1.0 : -1.0) * std::acos(f) + theta0;
                break;
            }
        }
        // wrap to [-pi, pi)
        angle = std::remainder(angle, 2.0 * M_PI);
        if (angle >= M_PI) angle -= 2.0 * M_PI;
        out[i] = angle;
    }
    return out;
}

Matrix sample_eqcorr(std::uint64_t seed, int n, int q, double mu, double sigma2, double rho) {
    EqCorrModel model{q, mu, sigma2, rho};
    const Matrix upper = spd_factor(model.covariance()).r;  // R^T R = Sigma
    Rng rng(seed);
    Matrix out(n, q);
    for (int i = 0; i < n; ++i) {
        const Vector z = rng.normal_vector(q);
        out.row(i) = (upper.transpose() * z).transpose().array() + mu;
    }
    return out;
}

ContaminatedSample sample_linreg_contaminated(std::uint64_t seed, const Matrix& design,
                                              const Vector& beta, double sigma2,
                                              double contamination, double shift) {
    if (!(contamination >= 0.0 && contamination < 0.5))
        throw DomainError("sample_linreg_contaminated: contamination must be in [0, 0.5)");
    const int n = static_cast<int>(design.rows());
    const double sigma = std::sqrt(sigma2);
    Rng rng(seed);

    ContaminatedSample out;
    out.response = design * beta + sigma * rng.normal_vector(n);

    const int n_out = static_cast<int>(std::lround(contamination * n));
    // Outlier positions: deterministic draw without replacement.
    std::vector<int> pool(n);
    for (int i = 0; i < n; ++i) pool[i] = i;
    for (int k = 0; k < n_out; ++k) {
        const int j = k + static_cast<int>(rng.uniform() * (n - k));
        std::swap(pool[k], pool[j]);
        out.outlier_indices.push_back(pool[k]);
        out.response[pool[k]] += shift * sigma;
    }
    return out;
}

}  // namespace scorebayes::models
