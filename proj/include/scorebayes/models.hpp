#ifndef SCOREBAYES_MODELS_HPP_
#define SCOREBAYES_MODELS_HPP_

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "scorebayes/numerics.hpp"

namespace scorebayes::models {

struct UnknownNormalizer : std::runtime_error {
    explicit UnknownNormalizer(const std::string& what) : std::runtime_error(what) {}
};

/// Deterministic RNG stream. Transforms are hand-rolled so that output is
/// bit-identical across standard library implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    /// Uniform on [0, 1).
    double uniform();
    /// Uniform on [lo, hi).
    double uniform(double lo, double hi);
    /// Standard normal via Box-Muller.
    double normal();
    Vector normal_vector(int d);

    /// Independent stream for a logical sub-task (grid point, replicate).
    static std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index);

private:
    std::uint64_t next_raw();
    std::uint64_t state_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

/// Von Mises circular model with known mean direction.
struct VonMisesModel {
    double theta0 = 0.0;
    double kappa = 1.0;

    /// Normalized log-density at angle t, stable in kappa via log I0.
    double log_density(double t) const;
};

/// Equi-correlated q-variate normal.
struct EqCorrModel {
    int q = 2;
    double mu = 0.0;
    double sigma2 = 1.0;
    double rho = 0.0;

    Matrix covariance() const;
};

/// Fixed-design linear regression with Gaussian errors.
struct LinRegModel {
    Matrix design;  // n x p
    Vector beta;    // p
    double sigma2 = 1.0;
};

/// One-parameter natural exponential family exp{theta x - k(theta) + a(x)}.
struct NefModel {
    std::function<double(double)> a;
    std::function<double(double)> a_prime;
    std::function<double(double)> a_second;
    std::optional<std::function<double(double)>> cumulant;  // k(theta)

    /// Normalized log-density; throws UnknownNormalizer without k(theta).
    double log_density(double x, double theta) const;
    /// d/dx log p and d^2/dx^2 log p, normalizer-free.
    double dlog_density_dx(double x, double theta) const { return theta + a_prime(x); }
    double d2log_density_dx2(double x, double theta) const {
        (void)theta;
        return a_second(x);
    }
};

/// Location or scale family built from a base density p0.
struct LocationScaleModel {
    enum class Mode { location, scale };
    std::function<double(double)> base_log_density;
    Mode mode = Mode::location;

    double log_density(double x, double param) const;
};

/// n angles in [-pi, pi) from a von Mises distribution, Best-Fisher
/// wrapped-Cauchy rejection; kappa = 0 degenerates to the uniform law.
Vector sample_vonmises(std::uint64_t seed, int n, double theta0, double kappa);

/// n rows from the equi-correlated normal, drawn through the triangular
/// factor of the full covariance (valid for admissible negative rho).
Matrix sample_eqcorr(std::uint64_t seed, int n, int q, double mu, double sigma2, double rho);

struct ContaminatedSample {
    Vector response;
    std::vector<int> outlier_indices;
};

/// Gaussian regression responses with a fixed fraction of mean-shift
/// outliers (shifted by delta * sigma).
ContaminatedSample sample_linreg_contaminated(std::uint64_t seed, const Matrix& design,
                                              const Vector& beta, double sigma2,
                                              double contamination, double shift);

}  // namespace scorebayes::models

#endif  // SCOREBAYES_MODELS_HPP_
