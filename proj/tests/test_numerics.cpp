#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numeric>

#include "scorebayes/models.hpp"
#include "scorebayes/numerics.hpp"

using namespace scorebayes;
using namespace scorebayes::numerics;
using scorebayes::models::Rng;

namespace {

Matrix random_spd(Rng& rng, int d) {
    Matrix a(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) a(i, j) = rng.normal();
    return a.transpose() * a + Matrix::Identity(d, d);
}

}  // namespace

TEST_CASE("spd_factor on identity and diagonal matrices") {
    const Matrix i2 = Matrix::Identity(2, 2);
    CHECK((spd_factor(i2).r - i2).norm() == doctest::Approx(0.0));

    Matrix d(2, 2);
    d << 4.0, 0.0, 0.0, 9.0;
    const Matrix r = spd_factor(d).r;
    CHECK(r(0, 0) == doctest::Approx(2.0));
    CHECK(r(1, 1) == doctest::Approx(3.0));
    CHECK(r(0, 1) == 0.0);
    CHECK(r(1, 0) == 0.0);
}

TEST_CASE("spd_factor multiply-back on random SPD matrices") {
    Rng rng(11);
    for (int trial = 0; trial < 1000; ++trial) {
        const int d = 1 + static_cast<int>(rng.uniform() * 8.0);
        const Matrix m = random_spd(rng, d);
        const Matrix back = spd_factor(m).reconstruct();
        CHECK((back - m).norm() / m.norm() <= 1e-10);
    }
}

TEST_CASE("spd_factor rejects bad input") {
    Matrix asym(2, 2);
    asym << 1.0, 0.5, -0.5, 1.0;
    CHECK_THROWS_AS(spd_factor(asym), DomainError);

    Matrix indef(2, 2);
    indef << 1.0, 2.0, 2.0, 1.0;
    CHECK_THROWS_AS(spd_factor(indef), NotPositiveDefinite);
}

TEST_CASE("fd_gradient on polynomial fields") {
    const ScalarField quad = [](const Vector& t) { return t.squaredNorm(); };
    Vector theta(2);
    theta << 1.0, 2.0;
    const Vector g = fd_gradient(quad, theta);
    CHECK(g[0] == doctest::Approx(2.0).epsilon(1e-6));
    CHECK(g[1] == doctest::Approx(4.0).epsilon(1e-6));

    const ScalarField constant = [](const Vector&) { return 3.5; };
    CHECK(fd_gradient(constant, theta).norm() <= 1e-6);
}

TEST_CASE("fd_gradient matches the analytic circular score-matching derivative") {
    // Total score for angles t_i at concentration k: sum of
    // -k cos t_i + (k^2/2) sin^2 t_i, hence derivative
    // sum of -cos t_i + k sin^2 t_i.
    const Vector angles = models::sample_vonmises(5, 40, 0.0, 2.0);
    const double k = 1.7;
    const ScalarField total = [&](const Vector& t) {
        double s = 0.0;
        for (int i = 0; i < angles.size(); ++i) {
            const double d1 = -t[0] * std::sin(angles[i]);
            s += -t[0] * std::cos(angles[i]) + 0.5 * d1 * d1;
        }
        return s;
    };
    double expected = 0.0;
    for (int i = 0; i < angles.size(); ++i) {
        const double s = std::sin(angles[i]);
        expected += -std::cos(angles[i]) + k * s * s;
    }
    Vector theta(1);
    theta << k;
    CHECK(fd_gradient(total, theta)[0] == doctest::Approx(expected).epsilon(1e-7));
}

TEST_CASE("fd_gradient reports non-finite stencil evaluations") {
    const ScalarField bad = [](const Vector& t) { return std::log(t[0]); };
    Vector theta(1);
    theta << 1e-20;
    CHECK_THROWS_AS(fd_gradient(bad, theta), NonFiniteEvaluation);
}

TEST_CASE("fd_hessian on simple fields") {
    Vector theta(2);
    theta << 0.3, -1.2;

    const ScalarField quad = [](const Vector& t) { return t.squaredNorm(); };
    const Matrix h = fd_hessian(quad, theta);
    CHECK((h - 2.0 * Matrix::Identity(2, 2)).cwiseAbs().maxCoeff() <= 1e-4);

    const ScalarField lin = [](const Vector& t) { return 3.0 * t[0] - t[1]; };
    CHECK(fd_hessian(lin, theta).cwiseAbs().maxCoeff() <= 1e-4);

    // Gaussian negative log-likelihood in the mean, unit variance.
    const int n = 7;
    const ScalarField nll = [n](const Vector& t) {
        double s = 0.0;
        for (int i = 0; i < n; ++i) {
            const double r = 0.1 * i - t[0];
            s += 0.5 * r * r;
        }
        return s;
    };
    Vector mu(1);
    mu << 0.4;
    CHECK(fd_hessian(nll, mu)(0, 0) == doctest::Approx(n).epsilon(1e-4));
}

TEST_CASE("bessel ratio endpoints and quadrature oracle") {
    CHECK(bessel_ratio_a1(0.0) == 0.0);
    CHECK_THROWS_AS(bessel_ratio_a1(-1.0), DomainError);
    CHECK_THROWS_AS(bessel_ratio_a1(2e6), DomainError);

    // I1/I0 from the integral definitions.
    const double kappa = 2.0;
    const auto num = integrate_adaptive(
        [kappa](double t) { return std::cos(t) * std::exp(kappa * std::cos(t)); }, 0.0, M_PI,
        1e-13);
    const auto den = integrate_adaptive(
        [kappa](double t) { return std::exp(kappa * std::cos(t)); }, 0.0, M_PI, 1e-13);
    CHECK(bessel_ratio_a1(kappa) == doctest::Approx(num / den).epsilon(1e-9));

    const double k = 500.0;
    const double asym = 1.0 - 1.0 / (2.0 * k) - 1.0 / (8.0 * k * k);
    CHECK(bessel_ratio_a1(k) == doctest::Approx(asym).epsilon(1e-8));
}

TEST_CASE("bessel ratio is strictly increasing and bounded") {
    double prev = bessel_ratio_a1(0.0);
    for (int i = 1; i <= 10000; ++i) {
        const double kappa = 100.0 * i / 10000.0;
        const double v = bessel_ratio_a1(kappa);
        CHECK(v > prev);
        CHECK(v >= 0.0);
        CHECK(v < 1.0);
        prev = v;
    }
}

TEST_CASE("bessel ratio continuous across the algorithm switch") {
    CHECK(bessel_ratio_a1(19.999999999) ==
          doctest::Approx(bessel_ratio_a1(20.000000001)).epsilon(1e-9));
}

TEST_CASE("log_bessel_i0 against quadrature and across regimes") {
    for (const double kappa : {0.5, 3.0, 19.0, 25.0, 100.0}) {
        const double i0 = integrate_adaptive(
                              [kappa](double t) { return std::exp(kappa * std::cos(t)); }, 0.0,
                              M_PI, 1e-13) /
                          M_PI;
        CHECK(log_bessel_i0(kappa) == doctest::Approx(std::log(i0)).epsilon(1e-9));
    }
    CHECK(std::isfinite(log_bessel_i0(1e5)));
}

TEST_CASE("grid_normalize behaviour") {
    const int m = 401;
    Grid1D g;
    g.nodes.resize(m);
    g.values.resize(m);
    for (int i = 0; i < m; ++i) {
        g.nodes[i] = -8.0 + 16.0 * i / (m - 1);
        g.values[i] = 3.7 * std::exp(-0.5 * g.nodes[i] * g.nodes[i]);
    }
    const Grid1D n1 = grid_normalize(g);
    CHECK(trapezoid(n1) == doctest::Approx(1.0).epsilon(1e-12));

    // already normalized in, unchanged out (and idempotent bit-for-bit)
    const Grid1D n2 = grid_normalize(n1);
    for (int i = 0; i < m; ++i) CHECK(n2.values[i] == n1.values[i]);

    // matches the analytic standard normal
    double sup = 0.0;
    for (int i = 0; i < m; ++i) {
        const double exact = std::exp(-0.5 * g.nodes[i] * g.nodes[i]) / std::sqrt(2.0 * M_PI);
        sup = std::max(sup, std::abs(n1.values[i] - exact));
    }
    CHECK(sup < 1e-6);

    Grid1D flat2{Vector::LinSpaced(3, 0.0, 1.0), Vector::Constant(3, 2.0)};
    CHECK(grid_normalize(flat2).values[0] == doctest::Approx(1.0));

    Grid1D zero{Vector::LinSpaced(3, 0.0, 1.0), Vector::Zero(3)};
    CHECK_THROWS_AS(grid_normalize(zero), ZeroMass);
}

TEST_CASE("grid_interpolate is linear and range-checked") {
    Grid1D g{Vector::LinSpaced(5, 0.0, 4.0), Vector::LinSpaced(5, 1.0, 9.0)};
    CHECK(grid_interpolate(g, 1.5) == doctest::Approx(4.0));
    CHECK(grid_interpolate(g, 0.0) == doctest::Approx(1.0));
    CHECK(grid_interpolate(g, 4.0) == doctest::Approx(9.0));
    CHECK_THROWS_AS(grid_interpolate(g, -0.1), DomainError);
    CHECK_THROWS_AS(grid_interpolate(g, 4.1), DomainError);
}

TEST_CASE("adaptive quadrature") {
    CHECK(integrate_adaptive([](double x) { return x * x; }, 0.0, 1.0) ==
          doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK(integrate_adaptive([](double x) { return std::exp(-0.5 * x * x); }, -10.0, 10.0) ==
          doctest::Approx(std::sqrt(2.0 * M_PI)).epsilon(1e-10));
}

TEST_CASE("pairwise_sum equals sequential accumulation and is shard-stable") {
    Rng rng(99);
    std::vector<double> terms(1537);
    for (auto& t : terms) t = rng.normal() * std::exp(4.0 * rng.uniform());
    const double direct = std::accumulate(terms.begin(), terms.end(), 0.0);
    const double tree = pairwise_sum(terms);
    CHECK(tree == doctest::Approx(direct).epsilon(1e-12));
    CHECK(pairwise_sum({}) == 0.0);
    CHECK(pairwise_sum(terms) == tree);  // deterministic
}
