#include "scorebayes/cli_io.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "scorebayes/models.hpp"

namespace fs = std::filesystem;

namespace scorebayes::cli_io {

using estimation::GodambeEstimate;
using estimation::MinScoreResult;
using models::Rng;
using numerics::Grid1D;
using posterior::CalibratedTarget;
using posterior::Chain;
using posterior::MhOptions;
using priors::PriorSpec;
using priors::TabulatedPrior;
using scoring::ScoreModel;

namespace {

std::string fmt(double v) {
    std::ostringstream s;
    s << std::setprecision(17) << v;
    return s.str();
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

}  // namespace

// Config ---------------------------------------------------------------------

std::string ExperimentConfig::get(const std::string& key) const {
    const auto it = values.find(key);
    if (it == values.end()) throw ConfigError("missing config key: " + key);
    return it->second;
}

std::string ExperimentConfig::get_or(const std::string& key, const std::string& fallback) const {
    const auto it = values.find(key);
    return it == values.end() ? fallback : it->second;
}

double ExperimentConfig::number(const std::string& key) const {
    const std::string v = get(key);
    try {
        std::size_t used = 0;
        const double x = std::stod(v, &used);
        if (used != v.size() || !std::isfinite(x))
            throw ConfigError("config key " + key + ": not a finite number: " + v);
        return x;
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception&) {
        throw ConfigError("config key " + key + ": not a number: " + v);
    }
}

double ExperimentConfig::number_or(const std::string& key, double fallback) const {
    return has(key) ? number(key) : fallback;
}

long ExperimentConfig::integer_or(const std::string& key, long fallback) const {
    if (!has(key)) return fallback;
    const double v = number(key);
    const long n = static_cast<long>(v);
    if (static_cast<double>(n) != v) throw ConfigError("config key " + key + ": not an integer");
    return n;
}

std::uint64_t ExperimentConfig::seed() const {
    const std::string v = get("seed");
    try {
        std::size_t used = 0;
        const std::uint64_t s = std::stoull(v, &used);
        if (used != v.size()) throw ConfigError("config key seed: not an unsigned integer: " + v);
        return s;
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception&) {
        throw ConfigError("config key seed: not an unsigned integer: " + v);
    }
}

ExperimentConfig ExperimentConfig::from_string(const std::string& text) {
    ExperimentConfig cfg;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) + ": expected key=value");
        const std::string key = trim(t.substr(0, eq));
        const std::string value = trim(t.substr(eq + 1));
        if (key.empty())
            throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
        if (cfg.values.count(key))
            throw ConfigError("config line " + std::to_string(lineno) + ": duplicate key " + key);
        cfg.values[key] = value;
    }
    if (!cfg.values.count("seed")) throw ConfigError("config: mandatory key seed is missing");
    cfg.seed();  // validates the format
    return cfg;
}

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return from_string(buf.str());
}

std::string ExperimentConfig::to_string() const {
    std::ostringstream out;
    for (const auto& [k, v] : values) out << k << '=' << v << '\n';
    return out.str();
}

// Datasets -------------------------------------------------------------------

Dataset read_dataset(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open dataset: " + path);
    std::string line;
    if (!std::getline(in, line)) throw ConfigError("dataset " + path + ": empty file");

    Dataset d;
    std::istringstream header(trim(line));
    std::string cell;
    while (std::getline(header, cell, ',')) d.columns.push_back(trim(cell));
    if (d.columns.empty()) throw ConfigError("dataset " + path + ": empty header");
    for (std::size_t j = 0; j < d.columns.size(); ++j)
        if (d.columns[j] == "y") d.response = static_cast<Eigen::Index>(j);

    std::vector<double> cells;
    int lineno = 1, rows = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        std::istringstream row(line);
        std::size_t got = 0;
        while (std::getline(row, cell, ',')) {
            double v;
            try {
                std::size_t used = 0;
                v = std::stod(trim(cell), &used);
                if (used != trim(cell).size()) throw std::invalid_argument(cell);
            } catch (const std::exception&) {
                throw ConfigError("dataset " + path + " line " + std::to_string(lineno) +
                                  ": non-numeric cell '" + trim(cell) + "'");
            }
            if (!std::isfinite(v))
                throw ConfigError("dataset " + path + " line " + std::to_string(lineno) +
                                  ": non-finite cell");
            cells.push_back(v);
            ++got;
        }
        if (got != d.columns.size())
            throw ConfigError("dataset " + path + " line " + std::to_string(lineno) + ": expected " +
                              std::to_string(d.columns.size()) + " cells, got " +
                              std::to_string(got));
        ++rows;
    }
    if (rows == 0) throw ConfigError("dataset " + path + ": header but no rows");
    const auto m = static_cast<Eigen::Index>(d.columns.size());
    d.values.resize(rows, m);
    for (int i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < m; ++j) d.values(i, j) = cells[i * m + j];
    return d;
}

void write_dataset(const std::string& path, const Dataset& d) {
    std::ofstream out(path);
    if (!out) throw PipelineError("write_dataset", "cannot open " + path);
    for (std::size_t j = 0; j < d.columns.size(); ++j)
        out << (j ? "," : "") << d.columns[j];
    out << '\n';
    for (Eigen::Index i = 0; i < d.values.rows(); ++i) {
        for (Eigen::Index j = 0; j < d.values.cols(); ++j)
            out << (j ? "," : "") << fmt(d.values(i, j));
        out << '\n';
    }
}

void write_grid_csv(const std::string& path, const Grid1D& grid, const std::string& name) {
    std::ofstream out(path);
    if (!out) throw PipelineError("write_grid_csv", "cannot open " + path);
    out << name << ",density\n";
    for (Eigen::Index i = 0; i < grid.nodes.size(); ++i)
        out << fmt(grid.nodes[i]) << ',' << fmt(grid.values[i]) << '\n';
}

void write_chain_csv(const std::string& path, const Chain& chain,
                     const std::vector<std::string>& names) {
    std::ofstream out(path);
    if (!out) throw PipelineError("write_chain_csv", "cannot open " + path);
    out << "draw";
    for (const auto& n : names) out << ',' << n;
    out << ",log_target\n";
    for (Eigen::Index i = 0; i < chain.draws.rows(); ++i) {
        out << i;
        for (Eigen::Index j = 0; j < chain.draws.cols(); ++j) out << ',' << fmt(chain.draws(i, j));
        out << ',' << fmt(chain.log_target[i]) << '\n';
    }
}

// Result bundle --------------------------------------------------------------

void ResultBundle::write(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw PipelineError("write_bundle", "cannot open " + path);
    out << doc.dump(2) << '\n';
}

namespace {

nlohmann::json to_json(const Vector& v) {
    nlohmann::json a = nlohmann::json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
    return a;
}

nlohmann::json to_json(const Matrix& m) {
    nlohmann::json a = nlohmann::json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) a.push_back(to_json(Vector(m.row(i))));
    return a;
}

void ensure_finite(const nlohmann::json& node, const std::string& path) {
    if (node.is_number() && !node.is_number_integer() &&
        !std::isfinite(node.get<double>()))
        throw PipelineError("bundle", "non-finite value at " + path);
    if (node.is_object())
        for (const auto& [k, v] : node.items()) ensure_finite(v, path + "." + k);
    if (node.is_array()) {
        int i = 0;
        for (const auto& v : node) ensure_finite(v, path + "[" + std::to_string(i++) + "]");
    }
}

bool type_matches(const std::string& type, const nlohmann::json& node) {
    if (type == "object") return node.is_object();
    if (type == "array") return node.is_array();
    if (type == "string") return node.is_string();
    if (type == "boolean") return node.is_boolean();
    if (type == "integer") return node.is_number_integer() || node.is_number_unsigned();
    if (type == "number") return node.is_number();
    return true;
}

void check_schema(const nlohmann::json& schema, const nlohmann::json& node,
                  const std::string& path) {
    if (schema.contains("type") &&
        !type_matches(schema["type"].get<std::string>(), node))
        throw PipelineError("validate_result_bundle",
                            path + ": expected type " + schema["type"].get<std::string>());
    if (schema.contains("required"))
        for (const auto& key : schema["required"])
            if (!node.contains(key.get<std::string>()))
                throw PipelineError("validate_result_bundle",
                                    path + ": missing required key " + key.get<std::string>());
    if (schema.contains("properties") && node.is_object())
        for (const auto& [key, sub] : schema["properties"].items())
            if (node.contains(key)) check_schema(sub, node[key], path + "." + key);
    if (schema.contains("items") && node.is_array())
        for (const auto& el : node) check_schema(schema["items"], el, path + "[]");
}

}  // namespace

void validate_result_bundle(const nlohmann::json& doc, const std::string& schema_path) {
    std::ifstream in(schema_path);
    if (!in)
        throw PipelineError("validate_result_bundle", "cannot open schema " + schema_path);
    nlohmann::json schema;
    in >> schema;
    check_schema(schema, doc, "$");
    ensure_finite(doc, "$");
}

// Example fitting ------------------------------------------------------------

namespace {

struct FittedExample {
    ScoreModel model;
    Matrix data;
    MinScoreResult fit;
    GodambeEstimate info;
    std::vector<std::string> names;
    std::string score;
    std::string example;
};

Matrix column_matrix(const Vector& v) {
    Matrix m(v.size(), 1);
    m.col(0) = v;
    return m;
}

// Standardize every non-constant column to zero mean and unit variance.
void standardize(Matrix& x) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
        const double mean = x.col(j).mean();
        const double sd = std::sqrt((x.col(j).array() - mean).square().sum() / (x.rows() - 1.0));
        if (sd > 1e-12) x.col(j) = (x.col(j).array() - mean) / sd;
    }
}

Matrix regression_design(std::uint64_t seed, int n, int p) {
    Matrix x(n, p);
    Rng rng(seed);
    x.col(0).setOnes();
    for (Eigen::Index j = 1; j < p; ++j)
        for (int i = 0; i < n; ++i) x(i, j) = rng.normal();
    Matrix cov = x.rightCols(p - 1);
    standardize(cov);
    x.rightCols(p - 1) = cov;
    return x;
}

Vector parse_vector(const std::string& text, int expected, const std::string& key) {
    std::vector<double> out;
    std::istringstream in(text);
    std::string cell;
    while (std::getline(in, cell, ',')) {
        try {
            out.push_back(std::stod(trim(cell)));
        } catch (const std::exception&) {
            throw ConfigError("config key " + key + ": not a numeric list");
        }
    }
    if (static_cast<int>(out.size()) != expected)
        throw ConfigError("config key " + key + ": expected " + std::to_string(expected) +
                          " values");
    return Eigen::Map<Vector>(out.data(), expected);
}

MinScoreResult fit_or_throw(const ScoreModel& model, const Matrix& data, const Vector& init) {
    MinScoreResult fit;
    try {
        fit = estimation::minimize_total_score(model, data, init);
    } catch (const std::runtime_error& e) {
        throw PipelineError("estimate", e.what());
    }
    if (!fit.converged) throw PipelineError("estimate", "optimizer failed to converge");
    return fit;
}

GodambeEstimate godambe_or_throw(const ScoreModel& model, const Matrix& data, const Vector& theta) {
    try {
        return estimation::godambe_at(model, data, theta);
    } catch (const std::runtime_error& e) {
        throw PipelineError("godambe", e.what());
    }
}

FittedExample fit_example(const ExperimentConfig& cfg) {
    FittedExample fe;
    fe.example = cfg.get_or("example", "vmf");
    const std::uint64_t seed = cfg.seed();

    if (fe.example == "vmf") {
        const int n = static_cast<int>(cfg.integer_or("n", 50));
        const double kappa = cfg.number_or("kappa", 3.0);
        const double theta0 = cfg.number_or("theta0", 0.0);
        if (cfg.has("data"))
            fe.data = column_matrix(read_dataset(cfg.get("data")).values.col(0));
        else
            fe.data = column_matrix(models::sample_vonmises(seed, n, theta0, kappa));
        fe.model = scoring::vonmises_hyvarinen_model(theta0);
        fe.names = {"kappa"};
        fe.score = "hyvarinen";
        Vector init(1);
        init << std::max(0.2, estimation::vmf_kappa_closed_form(fe.data.col(0)));
        fe.fit = fit_or_throw(fe.model, fe.data, init);
    } else if (fe.example == "eqcorr") {
        const int n = static_cast<int>(cfg.integer_or("n", 10));
        const int q = static_cast<int>(cfg.integer_or("q", 5));
        const double mu = cfg.number_or("mu", 0.0);
        const double sigma2 = cfg.number_or("sigma2", 1.0);
        const double rho = cfg.number_or("rho", 0.3);
        if (cfg.has("data"))
            fe.data = read_dataset(cfg.get("data")).values;
        else
            fe.data = models::sample_eqcorr(seed, n, q, mu, sigma2, rho);
        if (fe.data.cols() != q) throw ConfigError("eqcorr: dataset has wrong dimension");
        const double lo = -1.0 / (q - 1.0);
        if (cfg.get_or("parameter", "all") == "rho") {
            fe.model = scoring::eqcorr_rho_model(q, mu, sigma2);
            fe.names = {"rho"};
            Vector init(1);
            init << std::clamp(rho, lo + 0.1, 0.9);
            fe.fit = fit_or_throw(fe.model, fe.data, init);
        } else {
            fe.model = scoring::eqcorr_pairwise_model(q);
            fe.names = {"mu", "sigma2", "rho"};
            Vector init(3);
            const double mean = fe.data.mean();
            const double var = (fe.data.array() - mean).square().sum() /
                               (fe.data.rows() * fe.data.cols() - 1.0);
            init << mean, var, std::clamp(rho, lo + 0.1, 0.9);
            fe.fit = fit_or_throw(fe.model, fe.data, init);
        }
        fe.score = "pairwise";
    } else if (fe.example == "regression") {
        const int n = static_cast<int>(cfg.integer_or("n", 30));
        const int p = static_cast<int>(cfg.integer_or("p", 3));
        const double gamma = cfg.number_or("gamma", 1.25);
        fe.score = cfg.get_or("score", gamma == 1.0 ? "log" : "tsallis");
        Matrix x;
        Vector y;
        if (cfg.has("data")) {
            const Dataset d = read_dataset(cfg.get("data"));
            if (d.values.cols() != p + 1)
                throw ConfigError("regression: dataset must have p+1 columns (response first)");
            const Eigen::Index yc = d.response.value_or(0);
            y = d.values.col(yc);
            x.resize(d.values.rows(), p);
            Eigen::Index col = 0;
            for (Eigen::Index j = 0; j < d.values.cols(); ++j)
                if (j != yc) x.col(col++) = d.values.col(j);
        } else {
            x = regression_design(Rng::derive_seed(seed, 1), n, p);
            const Vector beta = cfg.has("beta") ? parse_vector(cfg.get("beta"), p, "beta")
                                                : Vector(Vector::LinSpaced(p, 1.0, 1.0));
            const auto sample = models::sample_linreg_contaminated(
                Rng::derive_seed(seed, 2), x, beta, cfg.number_or("sigma2", 1.0),
                cfg.number_or("outlier_fraction", 0.0), cfg.number_or("outlier_shift", 0.0));
            y = sample.response;
        }
        fe.data.resize(x.rows(), p + 1);
        fe.data.col(0) = y;
        fe.data.rightCols(p) = x;
        if (fe.score == "log")
            fe.model = scoring::regression_log_score_model(p);
        else if (fe.score == "tsallis")
            fe.model = scoring::regression_tsallis_model(p, gamma);
        else
            throw ConfigError("regression: unknown score " + fe.score);
        fe.names.resize(p + 1);
        for (int j = 0; j < p; ++j) fe.names[j] = "beta" + std::to_string(j);
        fe.names[p] = "sigma2";
        Vector init(p + 1);
        const Vector ols = (x.transpose() * x).ldlt().solve(x.transpose() * y);
        const double rss = (y - x * ols).squaredNorm();
        init.head(p) = ols;
        init[p] = std::max(1e-6, rss / x.rows());
        fe.fit = fit_or_throw(fe.model, fe.data, init);
    } else if (fe.example == "custom") {
        if (!cfg.has("data")) throw ConfigError("custom: a data file is required");
        const Dataset d = read_dataset(cfg.get("data"));
        fe.data = column_matrix(d.values.col(d.response.value_or(0)));
        fe.score = cfg.get_or("score", "log");
        if (fe.score == "log")
            fe.model = scoring::gaussian_log_score_model();
        else if (fe.score == "tsallis")
            fe.model = scoring::gaussian_tsallis_model(scoring::TsallisConfig(cfg.number("gamma")));
        else
            throw ConfigError("custom: unknown score " + fe.score);
        fe.names = {"mu", "sigma2"};
        Vector init(2);
        const double mean = fe.data.col(0).mean();
        init << mean, std::max(1e-6, (fe.data.col(0).array() - mean).square().sum() /
                                         (fe.data.rows() - 1.0));
        fe.fit = fit_or_throw(fe.model, fe.data, init);
    } else {
        throw ConfigError("unknown example: " + fe.example);
    }

    fe.info = godambe_or_throw(fe.model, fe.data, fe.fit.theta);
    return fe;
}

nlohmann::json config_echo(const ExperimentConfig& cfg) {
    nlohmann::json o = nlohmann::json::object();
    for (const auto& [k, v] : cfg.values) o[k] = v;
    return o;
}

ResultBundle make_bundle(const std::string& command, const ExperimentConfig& cfg,
                         const FittedExample& fe, const std::vector<std::string>& files) {
    nlohmann::json doc;
    doc["version"] = kVersion;
    doc["command"] = command;
    doc["example"] = fe.example;
    doc["seed"] = cfg.seed();
    doc["n"] = fe.data.rows();
    doc["score"] = fe.score;
    doc["parameter_names"] = fe.names;
    doc["theta_tilde"] = to_json(fe.fit.theta);
    doc["score_value"] = fe.fit.score_value;
    doc["gradient_norm"] = fe.fit.gradient_norm;
    doc["godambe"] = {{"k", to_json(fe.info.k)}, {"j", to_json(fe.info.j)},
                      {"g", to_json(fe.info.g)}, {"v", to_json(fe.info.v)},
                      {"c", to_json(fe.info.c)}, {"h", to_json(fe.info.h)}};
    doc["config"] = config_echo(cfg);
    doc["files"] = files;
    ensure_finite(doc, "$");
    return ResultBundle{std::move(doc)};
}

void make_out_dir(const std::string& out_dir) {
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw PipelineError("output", "cannot create directory " + out_dir);
}

PriorSpec make_prior(const ExperimentConfig& cfg, const FittedExample& fe) {
    const std::string kind = cfg.get_or("prior", "flat");
    if (kind == "flat") return PriorSpec::flat(fe.model.param_dim);

    if (fe.example == "vmf") {
        if (kind == "reference")
            return PriorSpec::closed_form(
                [](const Vector& t) { return std::log(priors::vmf_reference_prior(t[0])); });
        if (kind == "inverse") return PriorSpec::power(0, -1.0);
    } else if (fe.example == "eqcorr") {
        const int q = static_cast<int>(fe.data.cols());
        const double lo = -1.0 / (q - 1.0);
        if (fe.names.size() == 1) {
            if (kind == "uniform") return PriorSpec::flat(1);
            if (kind == "reference" && cfg.has("prior_table"))
                return PriorSpec::tabulated(TabulatedPrior::read_csv(cfg.get("prior_table")));
        } else {
            // theta = (mu, sigma2, rho)
            if (kind == "flat_theta")  // flat on (mu, sigma, rho), i.e. 1/sigma d sigma
                return PriorSpec::power(1, -1.0);
            if (kind == "flat_xi")  // flat on (mu, log sigma, scaled logit rho)
                return PriorSpec::closed_form([lo](const Vector& t) {
                    if (!(t[1] > 0.0) || !(t[2] > lo) || !(t[2] < 1.0))
                        throw DomainError("flat_xi prior: parameter outside its domain");
                    return -std::log(t[1]) - std::log(t[2] - lo) - std::log(1.0 - t[2]);
                });
            if (kind == "reference" && cfg.has("prior_table")) {
                auto table =
                    std::make_shared<TabulatedPrior>(TabulatedPrior::read_csv(cfg.get("prior_table")));
                return PriorSpec::closed_form([table](const Vector& t) {
                    if (!(t[1] > 0.0)) throw DomainError("reference prior: sigma2 must be positive");
                    return table->log_density(t[2]) - 1.5 * std::log(t[1]);
                });
            }
        }
    } else if (fe.example == "regression") {
        const int p = static_cast<int>(fe.names.size()) - 1;
        if (kind == "reference")
            return priors::regression_reference_prior(cfg.number_or("gamma", 1.25), p);
        // flat in (beta, log sigma)
        if (kind == "flat_logsigma") return PriorSpec::power(p, -1.0);
    } else if (fe.example == "custom") {
        if (kind == "flat_logsigma") return PriorSpec::power(1, -1.0);
    }
    throw ConfigError("unknown prior '" + kind + "' for example " + fe.example);
}

nlohmann::json summary_json(const posterior::PosteriorSummary& s) {
    return {{"mode", to_json(s.mode)},       {"mean", to_json(s.mean)},
            {"sd", to_json(s.sd)},           {"lower95", to_json(s.lower95)},
            {"upper95", to_json(s.upper95)}};
}

}  // namespace

// Commands -------------------------------------------------------------------

ResultBundle cmd_estimate(const ExperimentConfig& cfg, const std::string& out_dir) {
    const FittedExample fe = fit_example(cfg);
    make_out_dir(out_dir);
    ResultBundle bundle = make_bundle("estimate", cfg, fe, {});
    bundle.write((fs::path(out_dir) / "result.json").string());
    return bundle;
}

ResultBundle cmd_sample(const ExperimentConfig& cfg, const std::string& out_dir) {
    const long iterations = cfg.integer_or("iterations", 10000);
    const long burn_in = cfg.integer_or("burn_in", 2000);
    const long thinning = cfg.integer_or("thinning", 1);
    if (iterations <= 0) throw ConfigError("iterations: zero-length post-burn-in run");
    if (burn_in < 0 || thinning < 1) throw ConfigError("invalid burn_in/thinning");

    const FittedExample fe = fit_example(cfg);
    const PriorSpec prior = make_prior(cfg, fe);
    // The logarithmic score satisfies the information identity, so its
    // curvature calibration is the identity map.
    const bool calibrate = cfg.has("calibrate") ? cfg.get("calibrate") == "true"
                                                : fe.score != "log";
    const CalibratedTarget target(prior, fe.model, fe.data, fe.fit.theta, fe.info.c, calibrate);

    MhOptions opts;
    opts.iterations = static_cast<int>(iterations);
    opts.burn_in = static_cast<int>(burn_in);
    opts.thinning = static_cast<int>(thinning);
    opts.seed = Rng::derive_seed(cfg.seed(), 0x6d68);

    Chain chain;
    try {
        chain = posterior::mh_sample(target, fe.info, opts);
    } catch (const std::runtime_error& e) {
        throw PipelineError("sample", e.what());
    }

    make_out_dir(out_dir);
    const std::string chain_path = (fs::path(out_dir) / "chain.csv").string();
    write_chain_csv(chain_path, chain, fe.names);

    ResultBundle bundle = make_bundle("sample", cfg, fe, {"chain.csv"});
    bundle.doc["posterior"] = summary_json(posterior::posterior_summaries(chain));
    bundle.doc["acceptance_rate"] = chain.acceptance_rate;
    bundle.doc["calibrated"] = calibrate;
    ensure_finite(bundle.doc, "$");
    bundle.write((fs::path(out_dir) / "result.json").string());
    return bundle;
}

ResultBundle cmd_prior_eval(const ExperimentConfig& cfg, const std::string& out_dir) {
    const std::string example = cfg.get_or("example", "vmf");
    const std::uint64_t seed = cfg.seed();
    TabulatedPrior table;

    if (example == "vmf") {
        const Vector nodes =
            Vector::LinSpaced(cfg.integer_or("grid_points", 200), cfg.number_or("grid_lo", 0.1),
                              cfg.number_or("grid_hi", 10.0));
        table.nodes = nodes;
        table.log_prior.resize(nodes.size());
        table.mc_stderr = Vector::Zero(nodes.size());
        for (Eigen::Index i = 0; i < nodes.size(); ++i)
            table.log_prior[i] = std::log(priors::vmf_reference_prior(nodes[i]));
        table.normalize();
    } else if (example == "eqcorr") {
        const int q = static_cast<int>(cfg.integer_or("q", 5));
        const double mu = cfg.number_or("mu", 0.0);
        const double sigma2 = cfg.number_or("sigma2", 1.0);
        const double lo = -1.0 / (q - 1.0);
        priors::McGodambeProvider provider;
        provider.model = scoring::eqcorr_rho_model(q, mu, sigma2);
        const int sim_n = static_cast<int>(cfg.integer_or("prior_n", 500));
        provider.simulate = [q, sim_n, mu, sigma2](std::uint64_t s, const Vector& theta) {
            return models::sample_eqcorr(s, sim_n, q, mu, sigma2, theta[0]);
        };
        provider.replicates = static_cast<int>(cfg.integer_or("prior_reps", 200));
        provider.seed = seed;
        const Vector nodes = Vector::LinSpaced(cfg.integer_or("grid_points", 25),
                                               cfg.number_or("grid_lo", std::max(0.02, lo + 0.05)),
                                               cfg.number_or("grid_hi", 0.9));
        try {
            table = priors::tabulate_reference_prior(provider, nodes);
        } catch (const std::runtime_error& e) {
            throw PipelineError("prior-eval", e.what());
        }
    } else if (example == "regression") {
        const double gamma = cfg.number_or("gamma", 1.25);
        const int p = static_cast<int>(cfg.integer_or("p", 3));
        const Vector nodes =
            Vector::LinSpaced(cfg.integer_or("grid_points", 200), cfg.number_or("grid_lo", 0.1),
                              cfg.number_or("grid_hi", 10.0));
        table.nodes = nodes;
        table.log_prior.resize(nodes.size());
        table.mc_stderr = Vector::Zero(nodes.size());
        for (Eigen::Index i = 0; i < nodes.size(); ++i) {
            const auto v = priors::tsallis_regression_variances(gamma, nodes[i]);
            table.log_prior[i] = -0.5 * (p * std::log(v.v_beta) + std::log(v.v_error));
        }
        table.normalize();
    } else {
        throw ConfigError("prior-eval: unknown example " + example);
    }

    make_out_dir(out_dir);
    const std::string prior_path = (fs::path(out_dir) / "prior.csv").string();
    table.write_csv(prior_path);

    nlohmann::json doc;
    doc["version"] = kVersion;
    doc["command"] = "prior-eval";
    doc["example"] = example;
    doc["seed"] = seed;
    doc["n"] = table.nodes.size();
    doc["config"] = config_echo(cfg);
    doc["files"] = {"prior.csv"};
    ensure_finite(doc, "$");
    ResultBundle bundle{std::move(doc)};
    bundle.write((fs::path(out_dir) / "result.json").string());
    return bundle;
}

// Reproduction pipelines -----------------------------------------------------

namespace {

Grid1D normalized_curve(const Vector& nodes, const std::function<double(double)>& f) {
    Vector vals(nodes.size());
    for (Eigen::Index i = 0; i < nodes.size(); ++i) vals[i] = f(nodes[i]);
    return numerics::grid_normalize(Grid1D{nodes, vals});
}

Grid1D normalized_curve_log(const Vector& nodes, const std::function<double(double)>& logf) {
    Vector logs(nodes.size());
    for (Eigen::Index i = 0; i < nodes.size(); ++i) logs[i] = logf(nodes[i]);
    const double peak = logs.maxCoeff();
    return numerics::grid_normalize(Grid1D{nodes, (logs.array() - peak).exp().matrix()});
}

struct VmfFit {
    Matrix data;
    MinScoreResult fit;
    GodambeEstimate info;
    double sd;  // calibrated posterior scale sqrt(H^{-1}/n)
};

VmfFit fit_vmf(std::uint64_t seed, int n, double kappa_true) {
    VmfFit out;
    out.data = column_matrix(models::sample_vonmises(seed, n, 0.0, kappa_true));
    const ScoreModel model = scoring::vonmises_hyvarinen_model(0.0);
    Vector init(1);
    init << std::max(0.2, estimation::vmf_kappa_closed_form(out.data.col(0)));
    out.fit = fit_or_throw(model, out.data, init);
    out.info = godambe_or_throw(model, out.data, out.fit.theta);
    out.sd = std::sqrt(out.info.h.inverse()(0, 0) / n);
    return out;
}

void write_two_column_grid(const std::string& path, const std::string& name, const Vector& nodes,
                           const Vector& a, const Vector& b, const std::string& na,
                           const std::string& nb) {
    std::ofstream out(path);
    if (!out) throw PipelineError("reproduce", "cannot open " + path);
    out << name << ',' << na << ',' << nb << '\n';
    for (Eigen::Index i = 0; i < nodes.size(); ++i)
        out << fmt(nodes[i]) << ',' << fmt(a[i]) << ',' << fmt(b[i]) << '\n';
}

void reproduce_vmf(const std::string& out_dir, std::uint64_t seed) {
    const fs::path out(out_dir);
    const ScoreModel model = scoring::vonmises_hyvarinen_model(0.0);

    // reference and 1/kappa prior curves
    const Vector kgrid = Vector::LinSpaced(401, 0.05, 10.0);
    write_grid_csv((out / "vmf_prior_reference.csv").string(),
                   normalized_curve(kgrid, priors::vmf_reference_prior), "kappa");
    write_grid_csv((out / "vmf_prior_inverse.csv").string(),
                   normalized_curve(kgrid, [](double k) { return 1.0 / k; }), "kappa");

    // calibrated / uncalibrated / full-likelihood posteriors, n = 50, kappa = 3
    const VmfFit main = fit_vmf(Rng::derive_seed(seed, 0), 50, 3.0);
    const PriorSpec inv_prior = PriorSpec::power(0, -1.0);
    const double lo = std::max(0.02, main.fit.theta[0] - 8.0 * main.sd);
    const double hi = main.fit.theta[0] + 8.0 * main.sd;
    const Vector nodes = Vector::LinSpaced(401, lo, hi);
    const CalibratedTarget cal(inv_prior, model, main.data, main.fit.theta, main.info.c, true);
    const CalibratedTarget uncal(inv_prior, model, main.data, main.fit.theta, main.info.c, false);
    write_grid_csv((out / "vmf_posterior_calibrated.csv").string(),
                   posterior::grid_posterior_1d(cal, nodes), "kappa");
    write_grid_csv((out / "vmf_posterior_uncalibrated.csv").string(),
                   posterior::grid_posterior_1d(uncal, nodes), "kappa");
    const double cos_sum = main.data.col(0).array().cos().sum();
    const int n_main = static_cast<int>(main.data.rows());
    write_grid_csv((out / "vmf_posterior_likelihood.csv").string(),
                   normalized_curve_log(nodes,
                                        [&](double k) {
                                            return -std::log(k) + k * cos_sum -
                                                   n_main * numerics::log_bessel_i0(k);
                                        }),
                   "kappa");

    // scenario sweeps: n x kappa grid, reference vs 1/kappa prior
    std::ofstream summary((out / "vmf_sweep_summary.csv").string());
    if (!summary) throw PipelineError("reproduce", "cannot open sweep summary");
    summary << "n,kappa_true,kappa_tilde,sd_reference,sd_inverse\n";
    const PriorSpec ref_prior = PriorSpec::closed_form(
        [](const Vector& t) { return std::log(priors::vmf_reference_prior(t[0])); });
    int idx = 0;
    for (const int n : {10, 30, 50}) {
        for (const double kappa : {1.0, 5.0}) {
            const VmfFit f = fit_vmf(Rng::derive_seed(seed, 100 + idx), n, kappa);
            ++idx;
            const double glo = std::max(0.02, f.fit.theta[0] - 8.0 * f.sd);
            const double ghi = f.fit.theta[0] + 8.0 * f.sd;
            const Vector g = Vector::LinSpaced(401, glo, ghi);
            const CalibratedTarget tref(ref_prior, model, f.data, f.fit.theta, f.info.c, true);
            const CalibratedTarget tinv(inv_prior, model, f.data, f.fit.theta, f.info.c, true);
            const Grid1D pref = posterior::grid_posterior_1d(tref, g);
            const Grid1D pinv = posterior::grid_posterior_1d(tinv, g);
            std::ostringstream fname;
            fname << "vmf_sweep_n" << n << "_kappa" << static_cast<int>(kappa) << ".csv";
            write_two_column_grid((out / fname.str()).string(), "kappa", g, pref.values,
                                  pinv.values, "density_reference", "density_inverse");
            const auto sref = posterior::posterior_summaries(pref);
            const auto sinv = posterior::posterior_summaries(pinv);
            summary << n << ',' << fmt(kappa) << ',' << fmt(f.fit.theta[0]) << ','
                    << fmt(sref.sd[0]) << ',' << fmt(sinv.sd[0]) << '\n';
        }
    }
}

void write_histogram_csv(const std::string& path, const std::string& name, const Vector& draws,
                         double lo, double hi, int bins) {
    std::vector<double> counts(bins, 0.0);
    long total = 0;
    const double width = (hi - lo) / bins;
    for (Eigen::Index i = 0; i < draws.size(); ++i) {
        if (draws[i] < lo || draws[i] >= hi) continue;
        counts[static_cast<int>((draws[i] - lo) / width)] += 1.0;
        ++total;
    }
    std::ofstream out(path);
    if (!out) throw PipelineError("reproduce", "cannot open " + path);
    out << name << ",density\n";
    for (int b = 0; b < bins; ++b)
        out << fmt(lo + (b + 0.5) * width) << ','
            << fmt(total > 0 ? counts[b] / (total * width) : 0.0) << '\n';
}

TabulatedPrior eqcorr_rho_reference_table(int q, double mu, double sigma2, const Vector& nodes,
                                          int reps, int sim_n, std::uint64_t seed) {
    priors::McGodambeProvider provider;
    provider.model = scoring::eqcorr_rho_model(q, mu, sigma2);
    provider.simulate = [q, sim_n, mu, sigma2](std::uint64_t s, const Vector& theta) {
        return models::sample_eqcorr(s, sim_n, q, mu, sigma2, theta[0]);
    };
    provider.replicates = reps;
    provider.seed = seed;
    try {
        return priors::tabulate_reference_prior(provider, nodes);
    } catch (const std::runtime_error& e) {
        throw PipelineError("reproduce", e.what());
    }
}

void reproduce_eqcorr(const std::string& out_dir, std::uint64_t seed) {
    const fs::path out(out_dir);

    // scalar case: mu and sigma2 known, rho unknown
    {
        const int q = 10, n = 10;
        const Vector rnodes = Vector::LinSpaced(25, 0.02, 0.9);
        const TabulatedPrior ref =
            eqcorr_rho_reference_table(q, 0.0, 1.0, rnodes, 100, 300, Rng::derive_seed(seed, 1));
        ref.write_csv((out / "eqcorr_rho_prior_reference.csv").string());

        const Matrix data = models::sample_eqcorr(Rng::derive_seed(seed, 2), n, q, 0.0, 1.0, 0.5);
        const ScoreModel model = scoring::eqcorr_rho_model(q, 0.0, 1.0);
        Vector init(1);
        init << 0.3;
        const auto fit = fit_or_throw(model, data, init);
        const auto info = godambe_or_throw(model, data, fit.theta);
        const Vector nodes = Vector::LinSpaced(401, 0.02, 0.9);
        const CalibratedTarget uni(PriorSpec::flat(1), model, data, fit.theta, info.c, true);
        const CalibratedTarget rref(PriorSpec::tabulated(ref), model, data, fit.theta, info.c,
                                    true);
        write_grid_csv((out / "eqcorr_rho_posterior_uniform.csv").string(),
                       posterior::grid_posterior_1d(uni, nodes), "rho");
        write_grid_csv((out / "eqcorr_rho_posterior_reference.csv").string(),
                       posterior::grid_posterior_1d(rref, nodes), "rho");
    }

    // full-parameter scenarios under the three priors
    struct Scenario {
        char label;
        int n, q;
        double mu, sigma2, rho;
    };
    const std::vector<Scenario> scenarios = {{'a', 10, 10, 0.0, 1.0, 0.5},
                                             {'b', 10, 4, 0.0, 0.5, 0.1}};
    std::ofstream summary((out / "eqcorr_summary.csv").string());
    if (!summary) throw PipelineError("reproduce", "cannot open eqcorr summary");
    summary << "scenario,prior,rho_mode,rho_mean,rho_sd,rho_lower95,rho_upper95\n";

    int task = 10;
    for (const auto& sc : scenarios) {
        const double lo = -1.0 / (sc.q - 1.0);
        const Matrix data = models::sample_eqcorr(Rng::derive_seed(seed, 3 + (sc.label - 'a')),
                                                  sc.n, sc.q, sc.mu, sc.sigma2, sc.rho);
        const ScoreModel model = scoring::eqcorr_pairwise_model(sc.q);
        Vector init(3);
        const double mean = data.mean();
        const double var = (data.array() - mean).square().sum() / (data.size() - 1.0);
        init << mean, var, std::clamp(sc.rho, lo + 0.1, 0.8);
        const auto fit = fit_or_throw(model, data, init);
        const auto info = godambe_or_throw(model, data, fit.theta);

        const Vector g0_nodes = Vector::LinSpaced(21, lo + 0.05, 0.9);
        const TabulatedPrior g0 = eqcorr_rho_reference_table(
            sc.q, sc.mu, sc.sigma2, g0_nodes, 60, 200, Rng::derive_seed(seed, 20 + sc.label));
        auto g0_table = std::make_shared<TabulatedPrior>(g0);

        const std::vector<std::pair<std::string, PriorSpec>> prior_set = {
            {"flat_theta", PriorSpec::power(1, -1.0)},
            {"flat_xi", PriorSpec::closed_form([lo](const Vector& t) {
                 if (!(t[1] > 0.0) || !(t[2] > lo) || !(t[2] < 1.0))
                     throw DomainError("flat_xi prior: parameter outside its domain");
                 return -std::log(t[1]) - std::log(t[2] - lo) - std::log(1.0 - t[2]);
             })},
            {"reference", PriorSpec::closed_form([g0_table](const Vector& t) {
                 if (!(t[1] > 0.0))
                     throw DomainError("reference prior: sigma2 must be positive");
                 return g0_table->log_density(t[2]) - 1.5 * std::log(t[1]);
             })}};

        for (const auto& [pname, prior] : prior_set) {
            const CalibratedTarget target(prior, model, data, fit.theta, info.c, true);
            MhOptions opts;
            opts.iterations = 20000;
            opts.burn_in = 4000;
            opts.seed = Rng::derive_seed(seed, task++);
            Chain chain;
            try {
                chain = posterior::mh_sample(target, info, opts);
            } catch (const std::runtime_error& e) {
                throw PipelineError("reproduce", e.what());
            }
            std::ostringstream fname;
            fname << "eqcorr_" << sc.label << '_' << pname << "_rho_hist.csv";
            write_histogram_csv((out / fname.str()).string(), "rho",
                                chain.draws.col(2), lo, 1.0, 40);
            const auto s = posterior::posterior_summaries(chain);
            summary << sc.label << ',' << pname << ',' << fmt(s.mode[2]) << ',' << fmt(s.mean[2])
                    << ',' << fmt(s.sd[2]) << ',' << fmt(s.lower95[2]) << ','
                    << fmt(s.upper95[2]) << '\n';
        }
    }
}

void write_marginals_csv(const std::string& path, const Chain& chain,
                         const std::vector<std::string>& names, int bins) {
    std::ofstream out(path);
    if (!out) throw PipelineError("reproduce", "cannot open " + path);
    out << "parameter,bin_center,density\n";
    for (Eigen::Index j = 0; j < chain.draws.cols(); ++j) {
        const Vector col = chain.draws.col(j);
        const double lo = col.minCoeff();
        const double hi = col.maxCoeff() + 1e-12;
        const double width = (hi - lo) / bins;
        std::vector<double> counts(bins, 0.0);
        for (Eigen::Index i = 0; i < col.size(); ++i)
            counts[std::min<int>(bins - 1, static_cast<int>((col[i] - lo) / width))] += 1.0;
        for (int b = 0; b < bins; ++b)
            out << names[j] << ',' << fmt(lo + (b + 0.5) * width) << ','
                << fmt(counts[b] / (col.size() * width)) << '\n';
    }
}

// Posterior mode under the prior that is flat in (beta, log sigma2):
// minimize S(theta) + log sigma2 over the unconstrained coordinates.
Vector regression_posterior_mode(const ScoreModel& model, const Matrix& data, const Vector& init) {
    const auto& tr = *model.transform;
    const int p = model.param_dim - 1;
    const ScalarField objective = [&](const Vector& psi) {
        const Vector theta = tr.to_constrained(psi);
        return scoring::total_score_value(model, data, theta) + std::log(theta[p]);
    };
    const auto res = estimation::nelder_mead(objective, tr.to_unconstrained(init));
    const double gnorm = numerics::fd_gradient(objective, res.theta).norm();
    if (gnorm > 1e-4 * std::max(1.0, std::abs(res.score_value)))
        throw PipelineError("reproduce", "posterior mode search failed");
    return tr.to_constrained(res.theta);
}

void reproduce_regression(const std::string& out_dir, std::uint64_t seed) {
    const fs::path out(out_dir);
    const int n = 30, p = 3;
    const Matrix x = regression_design(Rng::derive_seed(seed, 1), n, p);
    Vector beta(p);
    beta << 0.5, 1.0, -1.0;
    const auto sample = models::sample_linreg_contaminated(Rng::derive_seed(seed, 2), x, beta, 1.0,
                                                           0.1, 8.0);
    Matrix data(n, p + 1);
    data.col(0) = sample.response;
    data.rightCols(p) = x;
    const std::vector<std::string> names = {"beta0", "beta1", "beta2", "sigma2"};

    Vector init(p + 1);
    const Vector ols = (x.transpose() * x).ldlt().solve(x.transpose() * sample.response);
    init.head(p) = ols;
    init[p] = std::max(1e-6, (sample.response - x * ols).squaredNorm() / n);

    const auto run_chain = [&](const ScoreModel& model, const PriorSpec& prior, bool calibrate,
                               std::uint64_t chain_seed) {
        const auto fit = fit_or_throw(model, data, init);
        const auto info = godambe_or_throw(model, data, fit.theta);
        const CalibratedTarget target(prior, model, data, fit.theta, info.c, calibrate);
        MhOptions opts;
        opts.iterations = 20000;
        opts.burn_in = 4000;
        opts.seed = chain_seed;
        try {
            return posterior::mh_sample(target, info, opts);
        } catch (const std::runtime_error& e) {
            throw PipelineError("reproduce", e.what());
        }
    };

    // gamma = 1.25 Tsallis fits under flat and reference priors, plus the
    // classical log-score posterior on the same data
    const ScoreModel tsallis = scoring::regression_tsallis_model(p, 1.25);
    write_marginals_csv((out / "regression_marginals_flat.csv").string(),
                        run_chain(tsallis, PriorSpec::power(p, -1.0), true,
                                  Rng::derive_seed(seed, 30)),
                        names, 30);
    write_marginals_csv((out / "regression_marginals_reference.csv").string(),
                        run_chain(tsallis, priors::regression_reference_prior(1.25, p), true,
                                  Rng::derive_seed(seed, 31)),
                        names, 30);
    write_marginals_csv((out / "regression_marginals_classical.csv").string(),
                        run_chain(scoring::regression_log_score_model(p),
                                  PriorSpec::power(p, -1.0), false, Rng::derive_seed(seed, 32)),
                        names, 30);

    // gamma sweep of posterior modes under the flat prior
    std::ofstream sweep((out / "regression_gamma_sweep.csv").string());
    if (!sweep) throw PipelineError("reproduce", "cannot open gamma sweep");
    sweep << "gamma,beta0,beta1,beta2,sigma2\n";
    for (int i = 0; i < 21; ++i) {
        const double gamma = 1.0 + i / 20.0;
        const ScoreModel model = gamma == 1.0 ? scoring::regression_log_score_model(p)
                                              : scoring::regression_tsallis_model(p, gamma);
        const Vector mode = regression_posterior_mode(model, data, init);
        sweep << fmt(gamma);
        for (int j = 0; j <= p; ++j) sweep << ',' << fmt(mode[j]);
        sweep << '\n';
    }
}

}  // namespace

void cmd_reproduce(const std::string& example, const std::string& out_dir, std::uint64_t seed) {
    make_out_dir(out_dir);
    if (example == "vmf")
        reproduce_vmf(out_dir, seed);
    else if (example == "eqcorr")
        reproduce_eqcorr(out_dir, seed);
    else if (example == "regression")
        reproduce_regression(out_dir, seed);
    else
        throw ConfigError("reproduce: unknown example " + example);
}

}  // namespace scorebayes::cli_io
