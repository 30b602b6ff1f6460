// Python bindings for the scorebayes library. The high-level pipeline
// commands mirror the CLI subcommands and return the result bundle as a
// JSON string; lower-level helpers expose estimators, priors, samplers,
// and grid posteriors directly on numpy arrays.

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "scorebayes/cli_io.hpp"
#include "scorebayes/estimation.hpp"
#include "scorebayes/models.hpp"
#include "scorebayes/posterior.hpp"
#include "scorebayes/priors.hpp"
#include "scorebayes/scoring.hpp"

namespace py = pybind11;
using namespace scorebayes;

namespace {

scoring::ScoreModel named_model(const std::string& name, const py::dict& kw) {
    const auto num = [&](const char* key, double fallback) {
        return kw.contains(key) ? kw[key].cast<double>() : fallback;
    };
    const auto integer = [&](const char* key, int fallback) {
        return kw.contains(key) ? kw[key].cast<int>() : fallback;
    };
    if (name == "vmf_hyvarinen") return scoring::vonmises_hyvarinen_model(num("theta0", 0.0));
    if (name == "circular_natural") return scoring::circular_natural_model();
    if (name == "gaussian_log") return scoring::gaussian_log_score_model();
    if (name == "gaussian_tsallis")
        return scoring::gaussian_tsallis_model(scoring::TsallisConfig(num("gamma", 1.5)));
    if (name == "eqcorr_pairwise") return scoring::eqcorr_pairwise_model(integer("q", 5));
    if (name == "eqcorr_rho")
        return scoring::eqcorr_rho_model(integer("q", 5), num("mu", 0.0), num("sigma2", 1.0));
    if (name == "regression_tsallis")
        return scoring::regression_tsallis_model(integer("p", 3), num("gamma", 1.25));
    if (name == "regression_log") return scoring::regression_log_score_model(integer("p", 3));
    throw py::value_error("unknown model: " + name);
}

std::string run_command(const std::string& which, const std::string& config_text,
                        const std::string& out_dir) {
    const auto cfg = cli_io::ExperimentConfig::from_string(config_text);
    cli_io::ResultBundle bundle;
    if (which == "estimate")
        bundle = cli_io::cmd_estimate(cfg, out_dir);
    else if (which == "sample")
        bundle = cli_io::cmd_sample(cfg, out_dir);
    else
        bundle = cli_io::cmd_prior_eval(cfg, out_dir);
    return bundle.doc.dump(2);
}

}  // namespace

PYBIND11_MODULE(_scorebayes, m) {
    m.doc() = "Bayesian inference with proper scoring rules";
    m.attr("__version__") = cli_io::kVersion;

    py::register_exception<cli_io::ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<cli_io::PipelineError>(m, "PipelineError", PyExc_RuntimeError);

    // Pipeline commands ------------------------------------------------------
    m.def(
        "estimate",
        [](const std::string& config, const std::string& out_dir) {
            return run_command("estimate", config, out_dir);
        },
        py::arg("config"), py::arg("out_dir"),
        "Fit a worked example from a key=value config string; writes the "
        "result bundle into out_dir and returns it as a JSON string.");
    m.def(
        "sample",
        [](const std::string& config, const std::string& out_dir) {
            return run_command("sample", config, out_dir);
        },
        py::arg("config"), py::arg("out_dir"),
        "Fit and draw a Metropolis-Hastings chain; returns the result JSON.");
    m.def(
        "prior_eval",
        [](const std::string& config, const std::string& out_dir) {
            return run_command("prior_eval", config, out_dir);
        },
        py::arg("config"), py::arg("out_dir"),
        "Tabulate the reference prior of a worked example; returns the "
        "result JSON.");
    m.def("reproduce", &cli_io::cmd_reproduce, py::arg("example"), py::arg("out_dir"),
          py::arg("seed"), "Regenerate every figure input for a worked example.");

    // Simulation -------------------------------------------------------------
    m.def("sample_vonmises", &models::sample_vonmises, py::arg("seed"), py::arg("n"),
          py::arg("theta0"), py::arg("kappa"));
    m.def("sample_eqcorr", &models::sample_eqcorr, py::arg("seed"), py::arg("n"), py::arg("q"),
          py::arg("mu"), py::arg("sigma2"), py::arg("rho"));

    // Estimation -------------------------------------------------------------
    m.def("vmf_kappa_closed_form", &estimation::vmf_kappa_closed_form, py::arg("angles"));
    m.def(
        "minimize_total_score",
        [](const std::string& model, const Matrix& data, const Vector& init,
           const py::kwargs& kw) {
            const auto res = estimation::minimize_total_score(named_model(model, kw), data, init);
            py::dict out;
            out["theta"] = res.theta;
            out["score_value"] = res.score_value;
            out["converged"] = res.converged;
            out["gradient_norm"] = res.gradient_norm;
            return out;
        },
        py::arg("model"), py::arg("data"), py::arg("init"),
        "Minimum-score fit of a named model; model-specific constants "
        "(gamma, q, mu, sigma2, theta0, p) are keyword arguments.");
    m.def(
        "godambe",
        [](const std::string& model, const Matrix& data, const Vector& theta,
           const py::kwargs& kw) {
            const auto g = estimation::godambe_at(named_model(model, kw), data, theta);
            py::dict out;
            out["k"] = g.k;
            out["j"] = g.j;
            out["g"] = g.g;
            out["v"] = g.v;
            out["c"] = g.c;
            out["h"] = g.h;
            return out;
        },
        py::arg("model"), py::arg("data"), py::arg("theta"),
        "Sensitivity, variability, and Godambe information of a named model "
        "at theta, plus the calibration matrix C and scaled Hessian H.");

    // Priors -----------------------------------------------------------------
    m.def("vmf_reference_prior", &priors::vmf_reference_prior, py::arg("kappa"));
    m.def("vmf_asymptotic_variance", &priors::vmf_asymptotic_variance, py::arg("kappa"));
    m.def(
        "tsallis_regression_variances",
        [](double gamma, double sigma2) {
            const auto v = priors::tsallis_regression_variances(gamma, sigma2);
            return py::make_tuple(v.v_beta, v.v_error);
        },
        py::arg("gamma"), py::arg("sigma2"),
        "Asymptotic (v_beta, v_error) of the Tsallis regression estimators.");

    // Posterior --------------------------------------------------------------
    m.def(
        "grid_posterior",
        [](const std::string& model, const Matrix& data, const Vector& theta_tilde,
           const Vector& nodes, bool calibrate, const py::kwargs& kw) {
            const auto sm = named_model(model, kw);
            const auto info = estimation::godambe_at(sm, data, theta_tilde);
            const posterior::CalibratedTarget target(priors::PriorSpec::flat(sm.param_dim), sm,
                                                     data, theta_tilde, info.c, calibrate);
            const auto grid = posterior::grid_posterior_1d(target, nodes);
            return py::make_tuple(grid.nodes, grid.values);
        },
        py::arg("model"), py::arg("data"), py::arg("theta_tilde"), py::arg("nodes"),
        py::arg("calibrate") = true,
        "Flat-prior scoring-rule posterior of a scalar parameter on a grid; "
        "returns (nodes, normalized density).");
    m.def(
        "mh_sample",
        [](const std::string& model, const Matrix& data, const Vector& theta_tilde,
           int iterations, int burn_in, std::uint64_t seed, bool calibrate,
           const py::kwargs& kw) {
            const auto sm = named_model(model, kw);
            const auto info = estimation::godambe_at(sm, data, theta_tilde);
            const posterior::CalibratedTarget target(priors::PriorSpec::flat(sm.param_dim), sm,
                                                     data, theta_tilde, info.c, calibrate);
            posterior::MhOptions opts;
            opts.iterations = iterations;
            opts.burn_in = burn_in;
            opts.seed = seed;
            const auto chain = posterior::mh_sample(target, info, opts);
            py::dict out;
            out["draws"] = chain.draws;
            out["acceptance_rate"] = chain.acceptance_rate;
            return out;
        },
        py::arg("model"), py::arg("data"), py::arg("theta_tilde"),
        py::arg("iterations") = 10000, py::arg("burn_in") = 2000, py::arg("seed") = 1,
        py::arg("calibrate") = true,
        "Random-walk Metropolis-Hastings draws from the flat-prior "
        "scoring-rule posterior.");
}
