#include "scorebayes/numerics.hpp"

#include <cmath>
#include <limits>

namespace scorebayes::numerics {

namespace {
constexpr double kEps = std::numeric_limits<double>::epsilon();
}

void Grid1D::validate() const {
    if (nodes.size() < 3) throw DomainError("Grid1D: need at least 3 nodes");
    if (nodes.size() != values.size()) throw DomainError("Grid1D: nodes/values size mismatch");
    for (Eigen::Index i = 0; i + 1 < nodes.size(); ++i) {
        if (!(nodes[i] < nodes[i + 1])) throw DomainError("Grid1D: nodes not strictly increasing");
    }
    for (Eigen::Index i = 0; i < values.size(); ++i) {
        if (!std::isfinite(values[i]) || values[i] < 0.0)
            throw DomainError("Grid1D: values must be finite and nonnegative");
    }
}

TriangularFactor spd_factor(const Matrix& m) {
    const Eigen::Index d = m.rows();
    if (d == 0 || d != m.cols() || d > kMaxDim)
        throw DomainError("spd_factor: bad dimension");
    const double scale = m.cwiseAbs().maxCoeff();
    if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-8 * std::max(1.0, scale))
        throw DomainError("spd_factor: matrix not symmetric");

    // Upper Cholesky, R^T R = M.
    Matrix r = Matrix::Zero(d, d);
    for (Eigen::Index j = 0; j < d; ++j) {
        double diag = m(j, j);
        for (Eigen::Index k = 0; k < j; ++k) diag -= r(k, j) * r(k, j);
        if (!(diag > 0.0))
            throw NotPositiveDefinite("spd_factor: leading minor " + std::to_string(j + 1) +
                                      " not positive");
        r(j, j) = std::sqrt(diag);
        for (Eigen::Index i = j + 1; i < d; ++i) {
            double s = m(j, i);
            for (Eigen::Index k = 0; k < j; ++k) s -= r(k, j) * r(k, i);
            r(j, i) = s / r(j, j);
        }
    }
    return TriangularFactor{std::move(r)};
}

Vector fd_gradient(const ScalarField& f, const Vector& theta) {
    const double h0 = std::cbrt(kEps);
    const Eigen::Index d = theta.size();
    Vector g(d);
    Vector t = theta;
    for (Eigen::Index j = 0; j < d; ++j) {
        const double h = h0 * std::max(1.0, std::abs(theta[j]));
        t[j] = theta[j] + h;
        const double fp = f(t);
        t[j] = theta[j] - h;
        const double fm = f(t);
        t[j] = theta[j];
        if (!std::isfinite(fp) || !std::isfinite(fm))
            throw NonFiniteEvaluation("fd_gradient: non-finite evaluation at stencil point");
        g[j] = (fp - fm) / (2.0 * h);
    }
    return g;
}

Matrix fd_hessian(const ScalarField& f, const Vector& theta) {
    const double h0 = std::pow(kEps, 0.25);
    const Eigen::Index d = theta.size();
    Vector h(d);
    for (Eigen::Index j = 0; j < d; ++j) h[j] = h0 * std::max(1.0, std::abs(theta[j]));

    const double f0 = f(theta);
    if (!std::isfinite(f0)) throw NonFiniteEvaluation("fd_hessian: non-finite at center");

    Matrix out(d, d);
    Vector t = theta;
    for (Eigen::Index i = 0; i < d; ++i) {
        t[i] = theta[i] + h[i];
        const double fp = f(t);
        t[i] = theta[i] - h[i];
        const double fm = f(t);
        t[i] = theta[i];
        if (!std::isfinite(fp) || !std::isfinite(fm))
            throw NonFiniteEvaluation("fd_hessian: non-finite evaluation at stencil point");
        out(i, i) = (fp - 2.0 * f0 + fm) / (h[i] * h[i]);
        for (Eigen::Index j = i + 1; j < d; ++j) {
            t[i] = theta[i] + h[i];
            t[j] = theta[j] + h[j];
            const double fpp = f(t);
            t[j] = theta[j] - h[j];
            const double fpm = f(t);
            t[i] = theta[i] - h[i];
            const double fmm = f(t);
            t[j] = theta[j] + h[j];
            const double fmp = f(t);
            t[i] = theta[i];
            t[j] = theta[j];
            if (!std::isfinite(fpp) || !std::isfinite(fpm) || !std::isfinite(fmm) ||
                !std::isfinite(fmp))
                throw NonFiniteEvaluation("fd_hessian: non-finite evaluation at stencil point");
            const double v = (fpp - fpm - fmp + fmm) / (4.0 * h[i] * h[j]);
            out(i, j) = v;
            out(j, i) = v;
        }
    }
    return 0.5 * (out + out.transpose());
}

namespace {

// I1/I0 by the ascending series, valid for moderate kappa.
double bessel_ratio_series(double kappa) {
    const double x2 = 0.25 * kappa * kappa;
    double term = 1.0;  // (kappa/2)^{2k} / (k!)^2, k = 0
    double s0 = 1.0;
    double s1 = 1.0;  // I1 = (kappa/2) * sum term/(k+1)
    for (int k = 1; k < 200; ++k) {
        term *= x2 / (static_cast<double>(k) * k);
        s0 += term;
        s1 += term / (k + 1.0);
        if (term < 1e-17 * s0) break;
    }
    return 0.5 * kappa * s1 / s0;
}

// Gauss continued fraction for I1/I0 (modified Lentz).
double bessel_ratio_cf(double kappa) {
    const double tiny = 1e-300;
    double f = tiny, c = f, d = 0.0;
    for (int k = 1; k < 10000; ++k) {
        // I_{nu+1}/I_nu = 1 / (2(nu+1)/kappa + I_{nu+2}/I_{nu+1})
        const double b = 2.0 * k / kappa;
        d = b + d;
        if (d == 0.0) d = tiny;
        c = b + 1.0 / c;
        if (c == 0.0) c = tiny;
        d = 1.0 / d;
        const double delta = c * d;
        f *= delta;
        if (std::abs(delta - 1.0) < 1e-15) break;
    }
    return f;
}

}  // namespace

double bessel_ratio_a1(double kappa) {
    if (kappa < 0.0) throw DomainError("bessel_ratio_a1: negative kappa");
    if (kappa > 1e6) throw DomainError("bessel_ratio_a1: kappa too large");
    if (kappa == 0.0) return 0.0;
    if (kappa < 20.0) return bessel_ratio_series(kappa);
    return bessel_ratio_cf(kappa);
}

double log_bessel_i0(double kappa) {
    if (kappa < 0.0) throw DomainError("log_bessel_i0: negative kappa");
    if (kappa < 20.0) {
        const double x2 = 0.25 * kappa * kappa;
        double term = 1.0, s = 1.0;
        for (int k = 1; k < 200; ++k) {
            term *= x2 / (static_cast<double>(k) * k);
            s += term;
            if (term < 1e-17 * s) break;
        }
        return std::log(s);
    }
    // I0(k) ~ e^k / sqrt(2 pi k) * sum_j ((2j-1)!!)^2 / (j! (8k)^j)
    double term = 1.0, s = 1.0, prev = 1.0;
    for (int j = 1; j < 40; ++j) {
        const double odd = 2.0 * j - 1.0;
        term *= odd * odd / (8.0 * kappa * j);
        if (term > prev) break;  // asymptotic series started diverging
        s += term;
        prev = term;
        if (term < 1e-17 * s) break;
    }
    return kappa - 0.5 * std::log(2.0 * M_PI * kappa) + std::log(s);
}

double trapezoid(const Grid1D& g) {
    double s = 0.0;
    for (Eigen::Index i = 0; i + 1 < g.nodes.size(); ++i)
        s += 0.5 * (g.values[i] + g.values[i + 1]) * (g.nodes[i + 1] - g.nodes[i]);
    return s;
}

Grid1D grid_normalize(const Grid1D& g) {
    g.validate();
    const double mass = trapezoid(g);
    if (!(mass > 0.0) || !std::isfinite(mass)) throw ZeroMass("grid_normalize: zero or non-finite mass");
    Grid1D out = g;
    // skip rescaling within roundoff of unit mass so normalization is
    // idempotent bit-for-bit
    if (std::abs(mass - 1.0) > 16.0 * kEps) out.values /= mass;
    return out;
}

double grid_interpolate(const Grid1D& g, double x) {
    if (x < g.nodes[0] || x > g.nodes[g.nodes.size() - 1])
        throw DomainError("grid_interpolate: point outside tabulated range");
    Eigen::Index lo = 0, hi = g.nodes.size() - 1;
    while (hi - lo > 1) {
        const Eigen::Index mid = (lo + hi) / 2;
        if (g.nodes[mid] <= x)
            lo = mid;
        else
            hi = mid;
    }
    const double t = (x - g.nodes[lo]) / (g.nodes[hi] - g.nodes[lo]);
    return (1.0 - t) * g.values[lo] + t * g.values[hi];
}

namespace {
double simpson(double a, double fa, double b, double fb, double fm) {
    return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

double adaptive_step(const std::function<double(double)>& f, double a, double fa, double b,
                     double fb, double m, double fm, double whole, double tol, double tol_floor,
                     int depth) {
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = f(lm), frm = f(rm);
    const double left = simpson(a, fa, m, fm, flm);
    const double right = simpson(m, fm, b, fb, frm);
    // tol_floor keeps the recursion from chasing precision below roundoff of
    // the full integral.
    if (depth <= 0 || std::abs(left + right - whole) < 15.0 * std::max(tol, tol_floor))
        return left + right + (left + right - whole) / 15.0;
    return adaptive_step(f, a, fa, m, fm, lm, flm, left, 0.5 * tol, tol_floor, depth - 1) +
           adaptive_step(f, m, fm, b, fb, rm, frm, right, 0.5 * tol, tol_floor, depth - 1);
}
}  // namespace

double integrate_adaptive(const std::function<double(double)>& f, double a, double b, double tol,
                          int max_depth) {
    const double m = 0.5 * (a + b);
    const double fa = f(a), fb = f(b), fm = f(m);
    const double whole = simpson(a, fa, b, fb, fm);
    const double tol_floor = 4.0 * kEps * std::abs(whole);
    return adaptive_step(f, a, fa, b, fb, m, fm, whole, tol, tol_floor, max_depth);
}

double pairwise_sum(const std::vector<double>& terms) {
    const auto rec = [](const auto& self, const double* p, size_t n) -> double {
        if (n == 0) return 0.0;
        if (n <= 8) {
            double s = 0.0;
            for (size_t i = 0; i < n; ++i) s += p[i];
            return s;
        }
        const size_t half = n / 2;
        return self(self, p, half) + self(self, p + half, n - half);
    };
    return rec(rec, terms.data(), terms.size());
}

}  // namespace scorebayes::numerics
