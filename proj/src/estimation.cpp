#include "scorebayes/estimation.hpp"

#include <algorithm>
#include <cmath>

namespace scorebayes::estimation {

using numerics::fd_gradient;
using numerics::fd_hessian;
using numerics::spd_factor;
using scoring::total_score;

namespace {

struct SimplexPoint {
    Vector x;
    double f;
};

MinScoreResult nelder_mead_once(const ScalarField& objective, const Vector& start,
                                const NelderMeadOptions& opts) {
    const int d = static_cast<int>(start.size());
    std::vector<SimplexPoint> simplex(d + 1);
    simplex[0] = {start, objective(start)};
    for (int i = 0; i < d; ++i) {
        Vector x = start;
        x[i] += opts.initial_step * std::max(1.0, std::abs(start[i]));
        simplex[i + 1] = {x, objective(x)};
    }
    for (const auto& p : simplex)
        if (!std::isfinite(p.f)) throw NonFiniteScore("nelder_mead: non-finite objective");

    const auto by_f = [](const SimplexPoint& a, const SimplexPoint& b) { return a.f < b.f; };
    int iter = 0;
    for (; iter < opts.max_iterations; ++iter) {
        std::sort(simplex.begin(), simplex.end(), by_f);

        double size = 0.0;
        for (int i = 1; i <= d; ++i) size = std::max(size, (simplex[i].x - simplex[0].x).norm());
        const double fspread = std::abs(simplex[d].f - simplex[0].f);
        if (size < opts.simplex_tol * std::max(1.0, simplex[0].x.norm()) &&
            fspread < opts.simplex_tol * std::max(1.0, std::abs(simplex[0].f)))
            break;

        Vector centroid = Vector::Zero(d);
        for (int i = 0; i < d; ++i) centroid += simplex[i].x;
        centroid /= d;

        const auto eval = [&](const Vector& x) {
            const double f = objective(x);
            if (!std::isfinite(f)) throw NonFiniteScore("nelder_mead: non-finite objective");
            return f;
        };

        const Vector xr = centroid + (centroid - simplex[d].x);
        const double fr = eval(xr);
        if (fr < simplex[0].f) {
            const Vector xe = centroid + 2.0 * (centroid - simplex[d].x);
            const double fe = eval(xe);
            simplex[d] = fe < fr ? SimplexPoint{xe, fe} : SimplexPoint{xr, fr};
        } else if (fr < simplex[d - 1].f) {
            simplex[d] = {xr, fr};
        } else {
            const Vector xc = centroid + 0.5 * (simplex[d].x - centroid);
            const double fc = eval(xc);
            if (fc < simplex[d].f) {
                simplex[d] = {xc, fc};
            } else {
                for (int i = 1; i <= d; ++i) {
                    simplex[i].x = simplex[0].x + 0.5 * (simplex[i].x - simplex[0].x);
                    simplex[i].f = eval(simplex[i].x);
                }
            }
        }
    }
    if (iter >= opts.max_iterations) throw MaxIterations("nelder_mead: iteration budget exhausted");

    std::sort(simplex.begin(), simplex.end(), by_f);
    MinScoreResult res;
    res.theta = simplex[0].x;
    res.score_value = simplex[0].f;
    res.iterations = iter;
    return res;
}

}  // namespace

MinScoreResult nelder_mead(const ScalarField& objective, const Vector& start,
                           const NelderMeadOptions& opts) {
    MinScoreResult best = nelder_mead_once(objective, start, opts);
    for (int r = 1; r < opts.restarts; ++r) {
        MinScoreResult next = nelder_mead_once(objective, best.theta, opts);
        next.iterations += best.iterations;
        if (next.score_value >= best.score_value - 1e-15 * std::abs(best.score_value)) {
            best = next;
            break;
        }
        best = next;
    }
    return best;
}

MinScoreResult minimize_total_score(const ScoreModel& model, const Matrix& data,
                                    const Vector& theta_init, const NelderMeadOptions& opts) {
    const auto& tr = model.transform ? *model.transform
                                     : scoring::ParamTransform::identity(model.param_dim);
    const auto objective = [&](const Vector& psi) {
        return scoring::total_score_value(model, data, tr.to_constrained(psi));
    };

    MinScoreResult res = nelder_mead(objective, tr.to_unconstrained(theta_init), opts);
    res.theta = tr.to_constrained(res.theta);

    const auto eval = total_score(model, data, res.theta, true, false);
    res.gradient_norm = eval.gradient->norm();
    res.converged = res.gradient_norm <= 1e-6 * std::max(1.0, std::abs(res.score_value));
    return res;
}

Vector circular_natural_equations(const Vector& angles) {
    const int n = static_cast<int>(angles.size());
    if (n < 1) throw DegenerateSample("circular_natural_equations: empty sample");
    double c = 0.0, s = 0.0, c2 = 0.0, s2 = 0.0;
    for (int i = 0; i < n; ++i) {
        c += std::cos(angles[i]);
        s += std::sin(angles[i]);
        c2 += std::cos(2.0 * angles[i]);
        s2 += std::sin(2.0 * angles[i]);
    }
    c /= n;
    s /= n;
    c2 /= n;
    s2 /= n;

    // 2x2 system: [ (1-c2)/2  -s2/2 ; -s2/2  (1+c2)/2 ] (a, b)^T = (c, s)^T.
    Matrix m(2, 2);
    m << 0.5 * (1.0 - c2), -0.5 * s2, -0.5 * s2, 0.5 * (1.0 + c2);
    const double det = m.determinant();
    if (std::abs(det) < 1e-12)
        throw DegenerateSample("circular_natural_equations: singular normal equations");
    Vector rhs(2);
    rhs << c, s;
    return m.inverse() * rhs;
}

double vmf_kappa_closed_form(const Vector& angles) {
    const int n = static_cast<int>(angles.size());
    if (n < 1) throw DegenerateSample("vmf_kappa_closed_form: empty sample");
    double c = 0.0, s = 0.0, c2 = 0.0, s2 = 0.0;
    for (int i = 0; i < n; ++i) {
        c += std::cos(angles[i]);
        s += std::sin(angles[i]);
        c2 += std::cos(2.0 * angles[i]);
        s2 += std::sin(2.0 * angles[i]);
    }
    c /= n;
    s /= n;
    c2 /= n;
    s2 /= n;
    const double r2sq = c2 * c2 + s2 * s2;
    if (r2sq >= 1.0 - 1e-12)
        throw DegenerateSample("vmf_kappa_closed_form: sample concentrated on antipodal angles");
    const double rsq = c * c + s * s;
    const double num = rsq * (1.0 + r2sq) + 2.0 * (c * c - s * s) * c2 + 4.0 * c * s * s2;
    return 2.0 * std::sqrt(std::max(0.0, num)) / (1.0 - r2sq);
}

double nef_theta_closed_form(const Vector& data, const models::NefModel& model) {
    const int n = static_cast<int>(data.size());
    if (n < 1) throw DegenerateSample("nef_theta_closed_form: empty sample");
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += model.a_prime(data[i]);
    return -s / n;
}

Matrix estimate_k(const ScoreModel& model, const Matrix& data, const Vector& theta) {
    const int n = static_cast<int>(data.rows());
    const int d = model.param_dim;
    Matrix k = Matrix::Zero(d, d);
    for (int i = 0; i < n; ++i) {
        const Vector x = data.row(i).transpose();
        const Matrix h =
            model.has_hessian()
                ? model.pointwise_hessian(x, theta)
                : fd_hessian([&](const Vector& t) { return model.pointwise(x, t); }, theta);
        if (!h.allFinite()) throw scoring::NonFiniteDerivative("estimate_k: non-finite Hessian");
        k += h;
    }
    return k / n;
}

Matrix estimate_j(const ScoreModel& model, const Matrix& data, const Vector& theta) {
    const int n = static_cast<int>(data.rows());
    const int d = model.param_dim;
    Matrix j = Matrix::Zero(d, d);
    for (int i = 0; i < n; ++i) {
        const Vector x = data.row(i).transpose();
        const Vector g =
            model.has_gradient()
                ? model.pointwise_gradient(x, theta)
                : fd_gradient([&](const Vector& t) { return model.pointwise(x, t); }, theta);
        if (!g.allFinite()) throw scoring::NonFiniteDerivative("estimate_j: non-finite gradient");
        j += g * g.transpose();
    }
    return j / n;
}

GodambeEstimate assemble_godambe(const Matrix& k, const Matrix& j, const Vector& theta,
                                 const Matrix& total_hessian, int n) {
    GodambeEstimate est;
    est.theta = theta;
    est.k = 0.5 * (k + k.transpose());
    est.j = 0.5 * (j + j.transpose());

    const Matrix jinv = est.j.inverse();
    est.g = est.k * jinv * est.k;
    est.g = 0.5 * (est.g + est.g.transpose());
    est.v = est.g.inverse();

    const Matrix m = spd_factor(est.k).r;
    const Matrix ma = spd_factor(est.g).r;
    est.c = m.triangularView<Eigen::Upper>().solve(ma);
    est.h = est.c.transpose() * total_hessian * est.c / n;
    est.h = 0.5 * (est.h + est.h.transpose());
    return est;
}

GodambeEstimate godambe_at(const ScoreModel& model, const Matrix& data, const Vector& theta) {
    const Matrix k = estimate_k(model, data, theta);
    const Matrix j = estimate_j(model, data, theta);
    const auto eval = total_score(model, data, theta, false, true);
    return assemble_godambe(k, j, theta, *eval.hessian, static_cast<int>(data.rows()));
}

}  // namespace scorebayes::estimation
