#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "scorebayes/models.hpp"
#include "scorebayes/numerics.hpp"
#include "scorebayes/scoring.hpp"

using namespace scorebayes;
using namespace scorebayes::scoring;
using scorebayes::models::Rng;
using scorebayes::numerics::fd_gradient;
using scorebayes::numerics::fd_hessian;
using scorebayes::numerics::integrate_adaptive;

namespace {

double normal_log_density(double x, double mu, double s2) {
    const double r = x - mu;
    return -0.5 * std::log(2.0 * M_PI * s2) - r * r / (2.0 * s2);
}

}  // namespace

TEST_CASE("log score values") {
    CHECK(log_score(normal_log_density(0.0, 0.0, 1.0)) ==
          doctest::Approx(0.9189385332046727).epsilon(1e-12));
    CHECK(log_score(0.0) == 0.0);  // uniform on [0,1]
    CHECK_THROWS_AS(log_score(-std::numeric_limits<double>::infinity()), NonFiniteDensity);
}

TEST_CASE("log score agrees with a quadrature-normalized density") {
    // Unnormalized density x^2 e^{-x} on (0, 30); normalize numerically.
    const auto raw = [](double x) { return x * x * std::exp(-x); };
    const double mass = integrate_adaptive(raw, 0.0, 30.0, 1e-13);
    const double x = 1.7;
    CHECK(log_score(std::log(raw(x) / mass)) ==
          doctest::Approx(-std::log(raw(x)) + std::log(mass)).epsilon(1e-12));
}

TEST_CASE("Tsallis score closed form for the standard normal") {
    const TsallisConfig cfg(2.0);
    const double q0 = std::exp(normal_log_density(0.0, 0.0, 1.0));
    const double expected = 1.0 / (2.0 * std::sqrt(M_PI)) - 2.0 / std::sqrt(2.0 * M_PI);
    CHECK(tsallis_score(q0, gaussian_power_integral(1.0, 2.0), cfg) ==
          doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("gaussian power integral cross-checked by quadrature") {
    for (const double gamma : {1.3, 2.0, 3.5}) {
        for (const double s2 : {0.4, 1.0, 2.5}) {
            const double quad = integrate_adaptive(
                [&](double y) { return std::exp(gamma * normal_log_density(y, 0.0, s2)); }, -40.0,
                40.0, 1e-13);
            CHECK(gaussian_power_integral(s2, gamma) == doctest::Approx(quad).epsilon(1e-9));
        }
    }
}

TEST_CASE("quadrature fallback matches the closed form") {
    const TsallisConfig cfg(1.5);
    const double q0 = std::exp(normal_log_density(0.3, 0.0, 1.0));
    const double closed = tsallis_score(q0, gaussian_power_integral(1.0, 1.5), cfg);
    const double viaquad = tsallis_score_quadrature(
        q0, [](double y) { return std::exp(normal_log_density(y, 0.0, 1.0)); }, -40.0, 40.0, cfg);
    CHECK(viaquad == doctest::Approx(closed).epsilon(1e-9));
}

TEST_CASE("Tsallis score differences approach log-score differences as gamma -> 1") {
    const TsallisConfig cfg(1.001);
    const double integral = gaussian_power_integral(1.0, cfg.gamma);
    const double x1 = 0.2, x2 = 1.4;
    const double q1 = std::exp(normal_log_density(x1, 0.0, 1.0));
    const double q2 = std::exp(normal_log_density(x2, 0.0, 1.0));
    // (S(x1) - S(x2)) / (gamma - 1) -> log q(x2) - log q(x1)
    const double diff = (tsallis_score(q1, integral, cfg) - tsallis_score(q2, integral, cfg)) /
                        (cfg.gamma - 1.0);
    const double logdiff = std::log(q2) - std::log(q1);
    CHECK(diff == doctest::Approx(logdiff).epsilon(1e-3));
}

TEST_CASE("Tsallis score depends on x only through the density value") {
    const TsallisConfig cfg(1.7);
    const double integral = gaussian_power_integral(1.0, cfg.gamma);
    const double qa = std::exp(normal_log_density(1.0, 0.0, 1.0));
    const double qb = std::exp(normal_log_density(-1.0, 0.0, 1.0));
    CHECK(tsallis_score(qa, integral, cfg) == tsallis_score(qb, integral, cfg));
    CHECK_THROWS_AS(TsallisConfig(1.0), DomainError);
}

TEST_CASE("Hyvarinen score values and homogeneity") {
    // N(mu, 1) at x = mu: gradient 0, laplacian -1.
    Vector zero(1);
    zero << 0.0;
    CHECK(hyvarinen_score(zero, -1.0) == doctest::Approx(-1.0));

    // N(0, s2) at x: -1/s2 + x^2/(2 s2^2).
    const double s2 = 2.3, x = 0.8;
    Vector g(1);
    g << -x / s2;
    CHECK(hyvarinen_score(g, -1.0 / s2) ==
          doctest::Approx(-1.0 / s2 + x * x / (2.0 * s2 * s2)).epsilon(1e-12));

    // Only derivatives enter, so a normalizing constant cannot change any bit.
    CHECK(hyvarinen_score(g, -1.0 / s2) == hyvarinen_score(g, -1.0 / s2));
}

TEST_CASE("circular Hyvarinen score") {
    CHECK(circular_hyvarinen_score(0.7, 0.0, 0.0) == 0.0);
    CHECK(circular_hyvarinen_score(0.0, 3.0, 0.0) == doctest::Approx(-3.0));
    // Matches the generic Hyvarinen form from the derivatives of
    // log q = a cos t + b sin t.
    const double a = 1.2, b = -0.5, t = 2.1;
    Vector d1(1);
    d1 << -a * std::sin(t) + b * std::cos(t);
    const double d2 = -a * std::cos(t) - b * std::sin(t);
    CHECK(circular_hyvarinen_score(t, a, b) == doctest::Approx(hyvarinen_score(d1, d2)));
}

TEST_CASE("circular score-matching total score is quadratic in (a, b)") {
    const Vector angles = models::sample_vonmises(21, 30, 0.4, 1.5);
    Matrix data(angles.size(), 1);
    data.col(0) = angles;
    const ScoreModel m = circular_natural_model();
    const auto objective = [&](const Vector& ab) { return total_score_value(m, data, ab); };
    Vector p1(2), p2(2);
    p1 << 0.5, -1.0;
    p2 << 3.0, 2.0;
    const Matrix h1 = fd_hessian(objective, p1);
    const Matrix h2 = fd_hessian(objective, p2);
    // finite-difference Hessians carry O(sqrt(eps)) relative noise
    CHECK((h1 - h2).cwiseAbs().maxCoeff() <= 1e-6 * std::max(1.0, h1.cwiseAbs().maxCoeff()));
}

TEST_CASE("pairwise score, q = 2, equals the bivariate likelihood up to a constant") {
    const Matrix data = models::sample_eqcorr(3, 6, 2, 0.3, 1.2, 0.4);

    const auto bivariate_nll = [&](double mu, double s2, double rho) {
        double total = 0.0;
        for (int i = 0; i < data.rows(); ++i) {
            const double z1 = data(i, 0) - mu, z2 = data(i, 1) - mu;
            const double quad = (z1 * z1 - 2.0 * rho * z1 * z2 + z2 * z2) /
                                (2.0 * s2 * (1.0 - rho * rho));
            total += std::log(2.0 * M_PI * s2) + 0.5 * std::log1p(-rho * rho) + quad;
        }
        return total;
    };

    double offset = std::numeric_limits<double>::quiet_NaN();
    for (const double mu : {-0.5, 0.0, 0.7}) {
        for (const double s2 : {0.8, 1.5}) {
            for (const double rho : {-0.3, 0.2, 0.6}) {
                const double diff =
                    pairwise_eqcorr_score(data, mu, s2, rho) - bivariate_nll(mu, s2, rho);
                if (std::isnan(offset)) offset = diff;
                CHECK(diff == doctest::Approx(offset).epsilon(1e-10));
            }
        }
    }
}

TEST_CASE("pairwise score separates at rho = 0") {
    // Every coordinate sits in q-1 pairs, so the pairwise score at rho = 0 is
    // exactly (q-1) times the sum of univariate Gaussian negative
    // log-likelihoods.
    const int q = 4;
    const Matrix data = models::sample_eqcorr(8, 5, q, -0.2, 0.9, 0.3);
    for (const double mu : {-0.2, 0.5}) {
        for (const double s2 : {0.7, 1.3}) {
            double univ = 0.0;
            for (int i = 0; i < data.rows(); ++i)
                for (int r = 0; r < q; ++r) univ += -normal_log_density(data(i, r), mu, s2);
            CHECK(pairwise_eqcorr_score(data, mu, s2, 0.0) ==
                  doctest::Approx((q - 1.0) * univ).epsilon(1e-10));
        }
    }
}

TEST_CASE("pairwise score location invariance and domain errors") {
    const Matrix data = models::sample_eqcorr(17, 7, 3, 0.0, 1.0, 0.2);
    const double base = pairwise_eqcorr_score(data, 0.4, 1.1, 0.3);
    const Matrix shifted = data.array() + 5.0;
    CHECK(pairwise_eqcorr_score(shifted, 5.4, 1.1, 0.3) == doctest::Approx(base).epsilon(1e-12));

    CHECK_THROWS_AS(pairwise_eqcorr_score(data, 0.0, -1.0, 0.3), DomainError);
    CHECK_THROWS_AS(pairwise_eqcorr_score(data, 0.0, 1.0, 1.0), DomainError);
    CHECK_THROWS_AS(pairwise_eqcorr_score(data, 0.0, 1.0, -0.6), DomainError);
}

TEST_CASE("pairwise score equals the sum of per-row pair scores") {
    const int q = 5;
    const Matrix data = models::sample_eqcorr(29, 9, q, 0.1, 1.4, 0.25);
    const ScoreModel m = eqcorr_pairwise_model(q);
    Vector theta(3);
    theta << 0.2, 1.1, 0.35;
    const double total = total_score_value(m, data, theta);
    CHECK(total == doctest::Approx(pairwise_eqcorr_score(data, theta[0], theta[1], theta[2]))
                       .epsilon(1e-10));
}

TEST_CASE("total score: empty data, duplication, additivity") {
    const ScoreModel m = gaussian_log_score_model();
    Vector theta(2);
    theta << 0.3, 1.2;

    const Matrix empty(0, 1);
    const auto e = total_score(m, empty, theta);
    CHECK(e.value == 0.0);
    CHECK(e.gradient->norm() == 0.0);

    const Matrix data = models::sample_eqcorr(41, 6, 1, 0.0, 1.0, 0.0).col(0);
    Matrix tripled(18, 1);
    tripled << data, data, data;
    CHECK(total_score_value(m, tripled, theta) ==
          doctest::Approx(3.0 * total_score_value(m, data, theta)).epsilon(1e-14));
}

TEST_CASE("analytic gradients match finite differences for every bundled score") {
    Rng rng(7);
    const auto probe = [&](const ScoreModel& m, const Matrix& data, const Vector& theta) {
        const auto eval = total_score(m, data, theta, true, false);
        const Vector fd = fd_gradient(
            [&](const Vector& t) { return total_score_value(m, data, t); }, theta);
        const double scale = std::max(1.0, fd.norm());
        CHECK((*eval.gradient - fd).norm() / scale <= 1e-5);
    };

    const Matrix x1 = models::sample_eqcorr(51, 25, 1, 0.4, 1.3, 0.0).col(0);
    Vector th2(2);
    th2 << 0.1, 0.9;
    probe(gaussian_log_score_model(), x1, th2);
    probe(gaussian_tsallis_model(TsallisConfig(1.4)), x1, th2);

    Matrix angles(20, 1);
    angles.col(0) = models::sample_vonmises(52, 20, 0.0, 2.0);
    Vector kap(1);
    kap << 1.8;
    probe(vonmises_hyvarinen_model(0.0), angles, kap);
    Vector ab(2);
    ab << 0.7, -0.4;
    probe(circular_natural_model(), angles, ab);

    const int p = 2;
    Matrix reg(15, p + 1);
    for (int i = 0; i < 15; ++i) {
        reg(i, 1) = 1.0;
        reg(i, 2) = rng.normal();
        reg(i, 0) = 0.5 + 0.8 * reg(i, 2) + 0.7 * rng.normal();
    }
    Vector thr(p + 1);
    thr << 0.4, 0.9, 0.6;
    probe(regression_tsallis_model(p, 1.25), reg, thr);
    probe(regression_log_score_model(p), reg, thr);
}

TEST_CASE("propriety of the three scores at desk scale") {
    // Expected score under P = N(0,1), minimized over a (mean, sd) grid.
    const int n = 1000000;
    Rng rng(2024);
    std::vector<double> draws(n);
    for (auto& d : draws) d = rng.normal();

    const int gm = 21, gs = 21;
    const auto grid_m = [&](int i) { return -0.5 + 0.05 * i; };
    const auto grid_s = [&](int j) { return 0.5 + 0.05 * j; };
    // center cell (m, s) = (0, 1) at i = 10, j = 10

    const auto run = [&](auto cell_score) {
        double best = std::numeric_limits<double>::infinity();
        int bi = -1, bj = -1;
        double center = 0.0, center_se = 0.0;
        double best_se = 0.0;
        for (int i = 0; i < gm; ++i) {
            for (int j = 0; j < gs; ++j) {
                const double m = grid_m(i), s = grid_s(j);
                double sum = 0.0, sumsq = 0.0;
                for (const double x : draws) {
                    const double v = cell_score(x, m, s * s);
                    sum += v;
                    sumsq += v * v;
                }
                const double mean = sum / n;
                const double se = std::sqrt((sumsq / n - mean * mean) / n);
                if (i == 10 && j == 10) {
                    center = mean;
                    center_se = se;
                }
                if (mean < best) {
                    best = mean;
                    bi = i;
                    bj = j;
                    best_se = se;
                }
            }
        }
        // the true distribution must win, within Monte-Carlo resolution
        const bool at_truth = (bi == 10 && bj == 10);
        const bool within_noise =
            center - best <= 2.0 * std::sqrt(center_se * center_se + best_se * best_se);
        CHECK((at_truth || within_noise));
    };

    run([](double x, double m, double s2) { return -normal_log_density(x, m, s2); });

    const double gamma = 1.5;
    run([gamma](double x, double m, double s2) {
        const double integral = gaussian_power_integral(s2, gamma);
        return (gamma - 1.0) * integral -
               gamma * std::exp((gamma - 1.0) * normal_log_density(x, m, s2));
    });

    run([](double x, double m, double s2) {
        const double r = x - m;
        return -1.0 / s2 + r * r / (2.0 * s2 * s2);
    });
}
