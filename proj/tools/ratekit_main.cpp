// ratekit command-line tool: ingest, fit, allocate, rate, simulate, evaluate.
//
// Exit codes: 0 success, 1 numerical failure, 2 input/config error.

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ratekit/ratekit.hpp"
#include "ratekit/serialize.hpp"

namespace fs = std::filesystem;
using ratekit::ordered_json;

namespace {

constexpr const char* kVersion = "0.1.0";

struct CliConfig {
    ordered_json raw;

    std::string dataset_path;
    ratekit::CsvSchema schema;
    bool has_dataset = false;

    struct FactorConfig {
        std::string name;
        std::vector<std::string> levels;  // empty: infer from data
        std::string reference;            // empty: first level
    };
    std::vector<FactorConfig> factors;

    double tau = 0.95;
    std::vector<double> expectile_grid;
    std::optional<double> total_premium;
    int pqr_degree = 2;
    int pqr_grid_size = 99;
    bool pqr_legendre = false;
    double qr_policy_tau_rounding = 0.005;

    int gini_splits = 20;
    double gini_fraction = 0.5;
    bool gini_full_sample = false;
    bool drop_infeasible = true;

    std::uint64_t seed = 1;
    std::string out_dir = "out";

    ratekit::GlmOptions glm;
    ratekit::ExpectileOptions expectile;
    ratekit::QuantileOptions quantile;

    ratekit::SimulationConfig sim;
    std::vector<double> sim_loadings;

    std::vector<double> coherence_taus = {0.5, 0.75, 0.9, 0.95};
    long coherence_trials = 1000;
    int coherence_sample = 5000;
};

std::uint64_t fnv1a(const std::string& data) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

template <typename T>
T get_or(const ordered_json& j, const char* key, T fallback) {
    if (j.contains(key)) return j.at(key).get<T>();
    return fallback;
}

CliConfig parse_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ratekit::ConfigError("cannot open config file '" + path + "'");
    CliConfig cfg;
    try {
        cfg.raw = ordered_json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ratekit::ConfigError("config '" + path + "' is not valid JSON: " + e.what());
    }
    const ordered_json& j = cfg.raw;

    if (j.contains("dataset")) {
        const auto& d = j.at("dataset");
        cfg.dataset_path = d.at("path").get<std::string>();
        cfg.has_dataset = true;
        if (d.contains("delimiter")) {
            const std::string delim = d.at("delimiter");
            if (delim.size() != 1)
                throw ratekit::ConfigError("dataset.delimiter must be one character");
            cfg.schema.delimiter = delim[0];
        }
        if (d.contains("columns")) {
            const auto& c = d.at("columns");
            cfg.schema.exposure = get_or<std::string>(c, "exposure", cfg.schema.exposure);
            cfg.schema.claim_indicator =
                get_or<std::string>(c, "claim_indicator", cfg.schema.claim_indicator);
            cfg.schema.claim_count =
                get_or<std::string>(c, "claim_count", cfg.schema.claim_count);
            cfg.schema.aggregate_loss =
                get_or<std::string>(c, "aggregate_loss", cfg.schema.aggregate_loss);
        }
    }
    if (j.contains("factors")) {
        for (const auto& f : j.at("factors")) {
            CliConfig::FactorConfig fc;
            fc.name = f.at("name").get<std::string>();
            if (f.contains("levels")) fc.levels = f.at("levels").get<std::vector<std::string>>();
            if (f.contains("reference")) fc.reference = f.at("reference").get<std::string>();
            cfg.factors.push_back(std::move(fc));
        }
    }
    for (const auto& f : cfg.factors) cfg.schema.factors.push_back(f.name);

    cfg.tau = get_or<double>(j, "tau", cfg.tau);
    if (j.contains("expectile_tau_grid"))
        cfg.expectile_grid = j.at("expectile_tau_grid").get<std::vector<double>>();
    if (j.contains("total_premium")) cfg.total_premium = j.at("total_premium").get<double>();
    if (j.contains("pqr")) {
        const auto& p = j.at("pqr");
        cfg.pqr_degree = get_or<int>(p, "degree", cfg.pqr_degree);
        cfg.pqr_grid_size = get_or<int>(p, "grid_size", cfg.pqr_grid_size);
        cfg.pqr_legendre = get_or<bool>(p, "legendre", cfg.pqr_legendre);
    }
    cfg.qr_policy_tau_rounding =
        get_or<double>(j, "qr_policy_tau_rounding", cfg.qr_policy_tau_rounding);
    if (j.contains("gini")) {
        const auto& g = j.at("gini");
        cfg.gini_splits = get_or<int>(g, "splits", cfg.gini_splits);
        cfg.gini_fraction = get_or<double>(g, "fraction", cfg.gini_fraction);
        cfg.gini_full_sample = get_or<bool>(g, "full_sample", cfg.gini_full_sample);
        cfg.drop_infeasible = get_or<bool>(g, "drop_infeasible", cfg.drop_infeasible);
    }
    cfg.seed = get_or<std::uint64_t>(j, "seed", cfg.seed);
    cfg.out_dir = get_or<std::string>(j, "output_dir", cfg.out_dir);

    if (j.contains("solver")) {
        const auto& s = j.at("solver");
        if (s.contains("glm")) {
            const auto& g = s.at("glm");
            cfg.glm.tol = get_or<double>(g, "tol", cfg.glm.tol);
            cfg.glm.max_iter_logistic =
                get_or<int>(g, "max_iter_logistic", cfg.glm.max_iter_logistic);
            cfg.glm.max_iter_gamma = get_or<int>(g, "max_iter_gamma", cfg.glm.max_iter_gamma);
        }
        if (s.contains("expectile")) {
            const auto& e = s.at("expectile");
            cfg.expectile.tol = get_or<double>(e, "tol", cfg.expectile.tol);
            cfg.expectile.max_iter = get_or<int>(e, "max_iter", cfg.expectile.max_iter);
        }
        if (s.contains("quantile")) {
            const auto& q = s.at("quantile");
            cfg.quantile.smoothing_eps =
                get_or<double>(q, "smoothing_eps", cfg.quantile.smoothing_eps);
            cfg.quantile.tol = get_or<double>(q, "tol", cfg.quantile.tol);
            cfg.quantile.max_iter = get_or<int>(q, "max_iter", cfg.quantile.max_iter);
            cfg.quantile.restarts = get_or<int>(q, "restarts", cfg.quantile.restarts);
        }
    }

    cfg.sim.quantile = cfg.quantile;
    cfg.sim.expectile = cfg.expectile;
    cfg.sim.glm = cfg.glm;
    cfg.sim.tau = cfg.tau;
    cfg.sim.master_seed = cfg.seed;
    if (j.contains("simulation")) {
        const auto& s = j.at("simulation");
        cfg.sim.n_policies = get_or<int>(s, "n_policies", cfg.sim.n_policies);
        cfg.sim.replicates = get_or<int>(s, "replicates", cfg.sim.replicates);
        if (s.contains("bernoulli_probs"))
            cfg.sim.bernoulli_probs = s.at("bernoulli_probs").get<std::vector<double>>();
        if (s.contains("coefficients"))
            cfg.sim.coefficients = s.at("coefficients").get<std::vector<double>>();
        cfg.sim.tweedie_power = get_or<double>(s, "power", cfg.sim.tweedie_power);
        cfg.sim.tweedie_dispersion =
            get_or<double>(s, "dispersion", cfg.sim.tweedie_dispersion);
        cfg.sim.threads = get_or<int>(s, "threads", cfg.sim.threads);
        cfg.sim.pqr_degree = get_or<int>(s, "pqr_degree", cfg.sim.pqr_degree);
        if (s.contains("pqr_grid_size")) {
            const int m = s.at("pqr_grid_size").get<int>();
            cfg.sim.pqr_grid.clear();
            for (int i = 1; i <= m; ++i)
                cfg.sim.pqr_grid.push_back(static_cast<double>(i) / (m + 1));
        }
        if (s.contains("loadings"))
            cfg.sim_loadings = s.at("loadings").get<std::vector<double>>();
        else if (s.contains("loading"))
            cfg.sim_loadings = {s.at("loading").get<double>()};
        if (s.contains("models")) {
            cfg.sim.models.clear();
            for (const auto& m : s.at("models")) {
                const std::string name = m.get<std::string>();
                if (name == "QR") cfg.sim.models.push_back(ratekit::SimModel::QR);
                else if (name == "PQR") cfg.sim.models.push_back(ratekit::SimModel::PQR);
                else if (name == "QRII") cfg.sim.models.push_back(ratekit::SimModel::QRII);
                else if (name == "ER") cfg.sim.models.push_back(ratekit::SimModel::ER);
                else throw ratekit::ConfigError("unknown simulation model '" + name + "'");
            }
        }
    }
    if (cfg.sim_loadings.empty()) cfg.sim_loadings = {cfg.sim.loading_true};

    if (j.contains("coherence")) {
        const auto& c = j.at("coherence");
        if (c.contains("taus")) cfg.coherence_taus = c.at("taus").get<std::vector<double>>();
        cfg.coherence_trials = get_or<long>(c, "trials", cfg.coherence_trials);
        cfg.coherence_sample = get_or<int>(c, "sample_size", cfg.coherence_sample);
    }
    return cfg;
}

std::vector<double> default_expectile_grid() {
    std::vector<double> grid;
    for (int i = 1; i <= 19; ++i) grid.push_back(0.05 * i);
    return grid;
}

std::vector<double> pqr_grid_of(int size) {
    std::vector<double> grid;
    for (int i = 1; i <= size; ++i) grid.push_back(static_cast<double>(i) / (size + 1));
    return grid;
}

void write_text(const fs::path& path, const std::string& text) {
    fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ratekit::ConfigError("cannot write '" + path.string() + "'");
    out << text;
}

void write_json(const fs::path& path, const ordered_json& j) {
    write_text(path, j.dump(2) + "\n");
}

void write_manifest(const CliConfig& cfg, const std::string& command,
                    const std::vector<std::string>& files) {
    ordered_json m;
    m["command"] = command;
    m["config_hash"] = hex64(fnv1a(cfg.raw.dump()));
    m["seed"] = cfg.seed;
    m["version"] = kVersion;
    m["outputs"] = files;
    write_json(fs::path(cfg.out_dir) / ("manifest_" + command + ".json"), m);
}

/// Everything the fit/rate/gini pipeline shares: data, design, class rows.
struct LoadedData {
    ratekit::LoadResult loaded;
    ratekit::FactorSpec spec;
    ratekit::DesignMatrix design;
    std::vector<ratekit::TariffClass> classes;
    std::vector<std::size_t> class_of_policy;
    std::vector<std::size_t> claimants;
    Eigen::VectorXd claim_losses;
    ratekit::DesignMatrix claim_design;
    std::vector<double> losses;
    std::vector<double> exposures;
    std::vector<int> claim_indicator;
};

LoadedData load_data(const CliConfig& cfg) {
    if (!cfg.has_dataset) throw ratekit::ConfigError("config has no dataset section");
    if (!fs::exists(cfg.dataset_path))
        throw ratekit::ConfigError("dataset file '" + cfg.dataset_path + "' does not exist");
    std::ifstream in(cfg.dataset_path);
    if (!in) throw ratekit::ConfigError("cannot open dataset '" + cfg.dataset_path + "'");

    LoadedData data;
    data.loaded = ratekit::load_policies(in, cfg.schema);
    if (data.loaded.records.empty())
        throw ratekit::ValidationError("dataset '" + cfg.dataset_path + "' has no usable rows");

    for (std::size_t f = 0; f < cfg.factors.size(); ++f) {
        ratekit::FactorLevels fl;
        fl.name = cfg.factors[f].name;
        fl.levels = cfg.factors[f].levels.empty()
                        ? ratekit::infer_levels(data.loaded.records, f)
                        : cfg.factors[f].levels;
        fl.reference = cfg.factors[f].reference.empty() ? fl.levels.front()
                                                        : cfg.factors[f].reference;
        data.spec.factors.push_back(std::move(fl));
    }
    data.spec.validate();
    data.design = ratekit::encode_design(data.loaded.records, data.spec);
    data.classes = ratekit::enumerate_tariff_classes(data.spec);

    std::map<std::string, std::size_t> class_by_label;
    for (std::size_t s = 0; s < data.classes.size(); ++s)
        class_by_label[data.classes[s].label] = s;
    for (const auto& rec : data.loaded.records) {
        std::string joined;
        for (const auto& lv : rec.factor_levels) joined += lv;
        data.class_of_policy.push_back(class_by_label.at("Class_" + joined));
    }

    const std::size_t n = data.loaded.records.size();
    data.losses.reserve(n);
    data.exposures.reserve(n);
    data.claim_indicator.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& rec = data.loaded.records[i];
        data.losses.push_back(rec.aggregate_loss);
        data.exposures.push_back(rec.exposure);
        data.claim_indicator.push_back(rec.claim_occurred ? 1 : 0);
        if (rec.aggregate_loss > 0.0) data.claimants.push_back(i);
    }
    data.claim_design = ratekit::subset_design(data.design, data.claimants);
    data.claim_losses.resize(static_cast<Eigen::Index>(data.claimants.size()));
    for (std::size_t c = 0; c < data.claimants.size(); ++c)
        data.claim_losses(static_cast<Eigen::Index>(c)) = data.losses[data.claimants[c]];
    return data;
}

struct FittedModels {
    ratekit::FittedGlm logistic;
    ratekit::FittedGlm gamma;
    ratekit::FittedExpectile er;
    struct ClassQr {
        std::string label;
        double p_hat = 0.0;
        double tau_star = 0.0;
        bool feasible = false;
        std::optional<ratekit::FittedQuantile> fit;
    };
    double tau = 0.95;
    std::vector<ClassQr> qr_classes;
    ratekit::FittedPqr pqr;
    ratekit::FittedQuantile qrii;
    bool qrii_tau_solved = false;
    std::optional<ratekit::AllocationResult> qrii_allocation;
};

/// Per-class no-claim probabilities at exposure one.
std::vector<double> class_probs(const LoadedData& data, const ratekit::FittedGlm& logit,
                                const ratekit::GlmOptions& glm_opt) {
    std::vector<double> probs;
    probs.reserve(data.classes.size());
    for (const auto& tc : data.classes)
        probs.push_back(ratekit::predict_no_claim_prob(logit, tc.design_row, 1.0, glm_opt));
    return probs;
}

FittedModels fit_all(const CliConfig& cfg, const LoadedData& data) {
    FittedModels models;
    models.tau = cfg.tau;
    models.logistic = ratekit::fit_logistic_exposure(data.design, data.claim_indicator,
                                                     data.exposures, cfg.glm);
    models.gamma = ratekit::fit_gamma_log(data.claim_design, data.claim_losses, cfg.glm);

    Eigen::VectorXd all_losses(static_cast<Eigen::Index>(data.losses.size()));
    for (std::size_t i = 0; i < data.losses.size(); ++i)
        all_losses(static_cast<Eigen::Index>(i)) = data.losses[i];
    models.er = ratekit::fit_expectile(data.design, all_losses, cfg.tau, cfg.expectile);

    const Eigen::VectorXd log_losses = data.claim_losses.array().log().matrix();
    const auto probs = class_probs(data, models.logistic, cfg.glm);
    const auto levels = ratekit::class_quantile_levels(cfg.tau, probs);
    for (std::size_t s = 0; s < data.classes.size(); ++s) {
        FittedModels::ClassQr entry;
        entry.label = data.classes[s].label;
        entry.p_hat = levels[s].p_hat;
        entry.tau_star = levels[s].tau_star;
        entry.feasible = levels[s].feasible;
        if (entry.feasible)
            entry.fit = ratekit::fit_quantile(data.claim_design, log_losses, entry.tau_star,
                                              cfg.quantile);
        models.qr_classes.push_back(std::move(entry));
    }

    ratekit::PqrOptions popt;
    popt.inner = cfg.quantile;
    popt.legendre_basis = cfg.pqr_legendre;
    models.pqr = ratekit::fit_pqr(data.claim_design, log_losses, cfg.pqr_degree,
                                  pqr_grid_of(cfg.pqr_grid_size), popt);

    // QRII: solve the loading level against the portfolio total when a
    // target is configured, otherwise record the fit at the default tau.
    if (cfg.total_premium) {
        std::map<long long, ratekit::FittedQuantile> cache;
        const std::size_t n = data.loaded.records.size();
        std::vector<double> p_unit(n);
        for (std::size_t i = 0; i < n; ++i)
            p_unit[i] = ratekit::predict_no_claim_prob(
                models.logistic, data.design.values.row(static_cast<Eigen::Index>(i)), 1.0,
                cfg.glm);
        auto refit = [&](double tau) {
            const long long key = std::llround(tau * 1e6);
            auto it = cache.find(key);
            if (it == cache.end())
                it = cache.emplace(key, ratekit::fit_quantile(data.claim_design, log_losses,
                                                              tau, cfg.quantile)).first;
            std::vector<double> q(n);
            for (std::size_t i = 0; i < n; ++i)
                q[i] = ratekit::predict_var(
                    it->second, data.design.values.row(static_cast<Eigen::Index>(i)));
            return q;
        };
        const auto alloc = ratekit::solve_tau_tsqpp(p_unit, refit, *cfg.total_premium);
        models.qrii = cache.at(std::llround(alloc.parameter * 1e6));
        models.qrii_tau_solved = true;
        models.qrii_allocation = alloc;
    } else {
        models.qrii = ratekit::fit_quantile(data.claim_design, log_losses, cfg.tau,
                                            cfg.quantile);
    }
    return models;
}

void save_models(const CliConfig& cfg, const FittedModels& models,
                 std::vector<std::string>& files) {
    const fs::path dir = fs::path(cfg.out_dir) / "models";

    ordered_json glm;
    glm["family"] = "two_part_glm";
    glm["logistic"] = ratekit::glm_to_json(models.logistic);
    glm["gamma"] = ratekit::glm_to_json(models.gamma);
    write_json(dir / "glm.json", glm);
    files.push_back("models/glm.json");

    write_json(dir / "expectile.json", ratekit::expectile_to_json(models.er));
    files.push_back("models/expectile.json");

    ordered_json qr;
    qr["family"] = "quantile_per_class";
    qr["tau"] = models.tau;
    ordered_json classes = ordered_json::array();
    for (const auto& entry : models.qr_classes) {
        ordered_json c;
        c["class"] = entry.label;
        c["p_hat"] = entry.p_hat;
        c["tau_star"] = entry.feasible ? ordered_json(entry.tau_star) : ordered_json(nullptr);
        c["feasible"] = entry.feasible;
        if (entry.fit) c["fit"] = ratekit::quantile_to_json(*entry.fit);
        classes.push_back(c);
    }
    qr["classes"] = classes;
    write_json(dir / "quantile_qr.json", qr);
    files.push_back("models/quantile_qr.json");

    write_json(dir / "pqr.json", ratekit::pqr_to_json(models.pqr));
    files.push_back("models/pqr.json");

    ordered_json qrii;
    qrii["family"] = "qrii";
    qrii["tau_solved"] = models.qrii_tau_solved;
    if (models.qrii_allocation)
        qrii["allocation"] = ratekit::allocation_to_json(*models.qrii_allocation);
    qrii["fit"] = ratekit::quantile_to_json(models.qrii);
    write_json(dir / "qrii.json", qrii);
    files.push_back("models/qrii.json");
}

FittedModels load_models(const CliConfig& cfg) {
    const fs::path dir = fs::path(cfg.out_dir) / "models";
    auto read = [](const fs::path& p) {
        std::ifstream in(p);
        if (!in)
            throw ratekit::ConfigError("cannot open model file '" + p.string() +
                                       "'; run the fit command first");
        return ordered_json::parse(in);
    };
    FittedModels models;
    const ordered_json glm = read(dir / "glm.json");
    models.logistic = ratekit::glm_from_json(glm.at("logistic"));
    models.gamma = ratekit::glm_from_json(glm.at("gamma"));
    models.er = ratekit::expectile_from_json(read(dir / "expectile.json"));

    const ordered_json qr = read(dir / "quantile_qr.json");
    models.tau = qr.at("tau");
    for (const auto& c : qr.at("classes")) {
        FittedModels::ClassQr entry;
        entry.label = c.at("class");
        entry.p_hat = c.at("p_hat");
        entry.feasible = c.at("feasible");
        if (!c.at("tau_star").is_null()) entry.tau_star = c.at("tau_star");
        if (c.contains("fit")) entry.fit = ratekit::quantile_from_json(c.at("fit"));
        models.qr_classes.push_back(std::move(entry));
    }
    models.pqr = ratekit::pqr_from_json(read(dir / "pqr.json"));
    const ordered_json qrii = read(dir / "qrii.json");
    models.qrii = ratekit::quantile_from_json(qrii.at("fit"));
    models.qrii_tau_solved = qrii.at("tau_solved");
    return models;
}

/// Per-policy quantities shared by rate and gini: values at exposure one
/// for the allocation equation.
struct UnitBasis {
    std::vector<double> p_hat;       // no-claim probability at w = 1
    std::vector<double> pure;        // pure premium at w = 1
    std::vector<double> sd;          // sqrt two-part variance at w = 1
    std::vector<double> er_value;    // fitted tau-expectile
    std::vector<double> qr_q;        // class-level VaR at tau (NaN if infeasible)
    std::vector<double> pqr_q;       // class-level VaR at tau from PQR
    std::vector<bool> qr_feasible;
};

UnitBasis unit_basis(const CliConfig& cfg, const LoadedData& data,
                     const FittedModels& models) {
    const std::size_t n = data.loaded.records.size();
    UnitBasis basis;
    basis.p_hat.resize(n);
    basis.pure.resize(n);
    basis.sd.resize(n);
    basis.er_value.resize(n);
    basis.qr_q.resize(n);
    basis.pqr_q.resize(n);
    basis.qr_feasible.resize(n);

    const auto probs = class_probs(data, models.logistic, cfg.glm);
    const auto levels = ratekit::class_quantile_levels(models.tau, probs);
    std::vector<double> class_qr(data.classes.size(),
                                 std::numeric_limits<double>::quiet_NaN());
    std::vector<double> class_pqr(data.classes.size(),
                                  std::numeric_limits<double>::quiet_NaN());
    for (std::size_t s = 0; s < data.classes.size(); ++s) {
        if (!models.qr_classes[s].feasible || !models.qr_classes[s].fit) continue;
        class_qr[s] = ratekit::predict_var(*models.qr_classes[s].fit,
                                           data.classes[s].design_row);
        class_pqr[s] = ratekit::predict_var(models.pqr, data.classes[s].design_row,
                                            levels[s].tau_star);
    }

    for (std::size_t i = 0; i < n; ++i) {
        const Eigen::RowVectorXd row = data.design.values.row(static_cast<Eigen::Index>(i));
        basis.p_hat[i] =
            ratekit::predict_no_claim_prob(models.logistic, row, 1.0, cfg.glm);
        basis.pure[i] =
            ratekit::pure_premium(models.logistic, models.gamma, row, 1.0, cfg.glm);
        basis.sd[i] = std::sqrt(
            ratekit::two_part_variance(models.logistic, models.gamma, row, 1.0, cfg.glm));
        basis.er_value[i] = row.dot(models.er.coefficients);
        const std::size_t s = data.class_of_policy[i];
        basis.qr_q[i] = class_qr[s];
        basis.pqr_q[i] = class_pqr[s];
        basis.qr_feasible[i] = models.qr_classes[s].feasible;
    }
    return basis;
}

struct Allocations {
    ratekit::AllocationResult evpp, sdpp, epp, qr, pqr, qrii;
    ratekit::FittedQuantile qrii_fit;
    long qr_excluded = 0;
};

Allocations allocate_all(const CliConfig& cfg, const LoadedData& data,
                         const FittedModels& models, const UnitBasis& basis, double C) {
    Allocations out;
    const std::size_t n = basis.pure.size();

    std::vector<double> evpp_base = basis.pure;
    out.evpp = ratekit::solve_loading_linear(ratekit::Principle::EVPP, basis.pure, evpp_base, C);
    out.sdpp = ratekit::solve_loading_linear(ratekit::Principle::SDPP, basis.pure, basis.sd, C);

    std::vector<double> epp_base(n);
    for (std::size_t i = 0; i < n; ++i) epp_base[i] = basis.er_value[i] - basis.pure[i];
    out.epp = ratekit::solve_loading_linear(ratekit::Principle::EPP, basis.pure, epp_base, C);

    // quantile principles: feasible policies only; infeasible ones are
    // excluded from the allocation sums and flagged
    std::vector<double> qr_pure, qr_base, pqr_base, pqr_pure;
    for (std::size_t i = 0; i < n; ++i) {
        if (!basis.qr_feasible[i]) { ++out.qr_excluded; continue; }
        qr_pure.push_back(basis.pure[i]);
        qr_base.push_back(basis.qr_q[i] - basis.pure[i]);
        pqr_pure.push_back(basis.pure[i]);
        pqr_base.push_back(basis.pqr_q[i] - basis.pure[i]);
    }
    if (qr_pure.empty())
        throw ratekit::FeasibilityError("allocate: no feasible policies for QR at tau");
    // infeasible policies get no quantile premium; allocate their pure-premium
    // share of C over the feasible part
    double pure_all = 0.0, pure_feasible = 0.0;
    for (std::size_t i = 0; i < n; ++i) pure_all += basis.pure[i];
    for (double v : qr_pure) pure_feasible += v;
    const double qr_target = C * (pure_feasible / pure_all);
    out.qr = ratekit::solve_loading_linear(ratekit::Principle::QPP, qr_pure, qr_base, qr_target);
    out.pqr =
        ratekit::solve_loading_linear(ratekit::Principle::QPP, pqr_pure, pqr_base, qr_target);

    // TSQPP: bisection with per-iterate refits
    {
        const Eigen::VectorXd log_losses = data.claim_losses.array().log().matrix();
        std::map<long long, ratekit::FittedQuantile> cache;
        if (models.qrii_tau_solved)
            cache.emplace(std::llround(models.qrii.tau * 1e6), models.qrii);
        auto refit = [&](double tau) {
            const long long key = std::llround(tau * 1e6);
            auto it = cache.find(key);
            if (it == cache.end())
                it = cache.emplace(key, ratekit::fit_quantile(data.claim_design, log_losses,
                                                              tau, cfg.quantile)).first;
            std::vector<double> q(n);
            for (std::size_t i = 0; i < n; ++i)
                q[i] = ratekit::predict_var(
                    it->second, data.design.values.row(static_cast<Eigen::Index>(i)));
            return q;
        };
        out.qrii = ratekit::solve_tau_tsqpp(basis.p_hat, refit, C);
        out.qrii_fit = cache.at(std::llround(out.qrii.parameter * 1e6));
    }
    return out;
}

int cmd_fit(const CliConfig& cfg) {
    const LoadedData data = load_data(cfg);
    const FittedModels models = fit_all(cfg, data);
    std::vector<std::string> files;
    save_models(cfg, models, files);

    Eigen::VectorXd all_losses(static_cast<Eigen::Index>(data.losses.size()));
    for (std::size_t i = 0; i < data.losses.size(); ++i)
        all_losses(static_cast<Eigen::Index>(i)) = data.losses[i];
    const auto grid = cfg.expectile_grid.empty() ? default_expectile_grid()
                                                 : cfg.expectile_grid;
    const auto curve = ratekit::expectile_curve(data.design, all_losses, grid, cfg.expectile);
    const long crossings = ratekit::count_expectile_crossings(curve, data.design);
    write_text(fs::path(cfg.out_dir) / "reports" / "expectile_curve.csv",
               ratekit::expectile_curve_csv(curve));
    files.push_back("reports/expectile_curve.csv");
    if (crossings > 0)
        std::cerr << "note: " << crossings
                  << " expectile crossing(s) at observed rows across the tau grid\n";

    write_manifest(cfg, "fit", files);
    std::cout << "fit: wrote " << files.size() << " files to " << cfg.out_dir << "\n";
    return 0;
}

std::string rate_table_csv(const LoadedData& data, const FittedModels& models,
                           const Allocations& alloc, bool loadings) {
    using ratekit::detail::fmt;
    std::string out = "class";
    for (const auto& f : data.spec.factors) out += "," + f.name;
    out += ",p_hat,pure_premium,EPP,EVPP,SDPP,QR_QPP,PQR_QPP,QRII_TSQPP\n";

    for (std::size_t s = 0; s < data.classes.size(); ++s) {
        const auto& tc = data.classes[s];
        const double p = models.qr_classes[s].p_hat;
        const Eigen::RowVectorXd& row = tc.design_row;
        const double pure = ratekit::pure_premium(models.logistic, models.gamma, row, 1.0);
        const double sd =
            std::sqrt(ratekit::two_part_variance(models.logistic, models.gamma, row, 1.0));
        const double er_v = row.dot(models.er.coefficients);

        const auto epp = ratekit::price_epp(pure, er_v, alloc.epp.parameter, tc.label);
        const auto evpp = ratekit::price_evpp(pure, alloc.evpp.parameter, tc.label);
        const auto sdpp = ratekit::price_sdpp(pure, sd * sd, alloc.sdpp.parameter, tc.label);
        const auto tsqpp = ratekit::price_tsqpp(
            p, ratekit::predict_var(alloc.qrii_fit, row), pure, alloc.qrii.parameter,
            tc.label);

        out += tc.label;
        for (const auto& lv : tc.levels) out += "," + lv;
        out += "," + fmt(p, 3) + "," + fmt(pure, 2);
        out += "," + fmt(loadings ? epp.risk_loading : epp.risk_premium, 2);
        out += "," + fmt(loadings ? evpp.risk_loading : evpp.risk_premium, 2);
        out += "," + fmt(loadings ? sdpp.risk_loading : sdpp.risk_premium, 2);
        if (models.qr_classes[s].feasible && models.qr_classes[s].fit) {
            const double q = ratekit::predict_var(*models.qr_classes[s].fit, row);
            const auto qr = ratekit::price_qpp(pure, q, alloc.qr.parameter, tc.label);
            const auto levels = ratekit::class_quantile_levels(
                models.tau, std::vector<double>{p});
            const double qp = ratekit::predict_var(models.pqr, row, levels[0].tau_star);
            const auto pqr = ratekit::price_qpp(pure, qp, alloc.pqr.parameter, tc.label);
            out += "," + fmt(loadings ? qr.risk_loading : qr.risk_premium, 2);
            out += "," + fmt(loadings ? pqr.risk_loading : pqr.risk_premium, 2);
        } else {
            out += ",NA,NA";
        }
        out += "," + fmt(loadings ? tsqpp.risk_loading : tsqpp.risk_premium, 2) + "\n";
    }
    return out;
}

int cmd_rate(const CliConfig& cfg) {
    if (!cfg.total_premium)
        throw ratekit::ConfigError("rate: total_premium (C) required in config or via "
                                   "--total-premium");
    const LoadedData data = load_data(cfg);
    const FittedModels models = load_models(cfg);
    const UnitBasis basis = unit_basis(cfg, data, models);
    const Allocations alloc = allocate_all(cfg, data, models, basis, *cfg.total_premium);

    std::vector<std::string> files;
    write_text(fs::path(cfg.out_dir) / "reports" / "class_premiums.csv",
               rate_table_csv(data, models, alloc, false));
    files.push_back("reports/class_premiums.csv");
    write_text(fs::path(cfg.out_dir) / "reports" / "class_loadings.csv",
               rate_table_csv(data, models, alloc, true));
    files.push_back("reports/class_loadings.csv");

    ordered_json aj;
    aj["EPP"] = ratekit::allocation_to_json(alloc.epp);
    aj["EVPP"] = ratekit::allocation_to_json(alloc.evpp);
    aj["SDPP"] = ratekit::allocation_to_json(alloc.sdpp);
    aj["QR_QPP"] = ratekit::allocation_to_json(alloc.qr);
    aj["PQR_QPP"] = ratekit::allocation_to_json(alloc.pqr);
    aj["QRII_TSQPP"] = ratekit::allocation_to_json(alloc.qrii);
    if (alloc.qr_excluded > 0) aj["qr_excluded_policies"] = alloc.qr_excluded;
    write_json(fs::path(cfg.out_dir) / "reports" / "allocations.json", aj);
    files.push_back("reports/allocations.json");

    write_manifest(cfg, "rate", files);
    std::cout << "rate: C=" << *cfg.total_premium << " phi[EPP]=" << alloc.epp.parameter
              << " phi[EVPP]=" << alloc.evpp.parameter << " phi[SDPP]=" << alloc.sdpp.parameter
              << " phi[QR]=" << alloc.qr.parameter << " phi[PQR]=" << alloc.pqr.parameter
              << " tau[QRII]=" << alloc.qrii.parameter << "\n";
    return 0;
}

int cmd_simulate(const CliConfig& cfg) {
    std::vector<ratekit::SimulationReport> reports;
    for (double phi : cfg.sim_loadings) {
        ratekit::SimulationConfig sc = cfg.sim;
        sc.loading_true = phi;
        sc.master_seed = cfg.seed;
        reports.push_back(ratekit::run_simulation(sc));
    }
    std::vector<std::string> files;
    write_text(fs::path(cfg.out_dir) / "reports" / "sim_summary.csv",
               ratekit::simulation_summary_csv(reports));
    files.push_back("reports/sim_summary.csv");
    write_text(fs::path(cfg.out_dir) / "reports" / "sim_class.csv",
               ratekit::simulation_class_csv(reports));
    files.push_back("reports/sim_class.csv");
    write_manifest(cfg, "simulate", files);
    for (const auto& rep : reports) {
        std::cout << "simulate: phi_true=" << rep.loading_true;
        for (std::size_t j = 0; j < rep.model_names.size(); ++j)
            std::cout << " " << rep.model_names[j] << "=" << rep.mean_mse[j];
        std::cout << " (replicates " << rep.replicates_used << "/"
                  << rep.replicates_requested << ")\n";
    }
    return 0;
}

int cmd_gini(const CliConfig& cfg) {
    if (!cfg.total_premium)
        throw ratekit::ConfigError("gini: total_premium (C) required for the allocation step");
    const LoadedData data = load_data(cfg);
    const FittedModels models = load_models(cfg);
    const UnitBasis basis = unit_basis(cfg, data, models);
    const Allocations alloc = allocate_all(cfg, data, models, basis, *cfg.total_premium);

    const std::size_t n = data.loaded.records.size();

    // per-policy premiums at actual exposure
    std::vector<double> p_actual(n), pure_actual(n);
    for (std::size_t i = 0; i < n; ++i) {
        const Eigen::RowVectorXd row = data.design.values.row(static_cast<Eigen::Index>(i));
        p_actual[i] = ratekit::predict_no_claim_prob(models.logistic, row,
                                                     data.exposures[i], cfg.glm);
        pure_actual[i] = ratekit::pure_premium(models.logistic, models.gamma, row,
                                               data.exposures[i], cfg.glm);
    }

    const auto policy_levels = ratekit::class_quantile_levels(models.tau, p_actual);
    std::vector<std::size_t> keep;
    long dropped = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (policy_levels[i].feasible) keep.push_back(i);
        else ++dropped;
    }
    if (dropped > 0 && !cfg.drop_infeasible)
        throw ratekit::FeasibilityError(
            "gini: " + std::to_string(dropped) +
            " policies have no-claim probability above tau; rerun with --drop-infeasible");
    if (keep.size() < 2)
        throw ratekit::FeasibilityError("gini: fewer than two feasible policies");

    // QR needs one quantile fit per distinct (rounded) policy-level tau*
    const Eigen::VectorXd log_losses = data.claim_losses.array().log().matrix();
    std::map<long long, ratekit::FittedQuantile> qr_cache;
    auto qr_fit_at = [&](double tau_star) -> const ratekit::FittedQuantile& {
        const double step = cfg.qr_policy_tau_rounding;
        double rounded = step > 0.0 ? std::round(tau_star / step) * step : tau_star;
        rounded = std::min(std::max(rounded, 1e-4), 1.0 - 1e-4);
        const long long key = std::llround(rounded * 1e9);
        auto it = qr_cache.find(key);
        if (it == qr_cache.end())
            it = qr_cache.emplace(key, ratekit::fit_quantile(data.claim_design, log_losses,
                                                             rounded, cfg.quantile)).first;
        return it->second;
    };

    std::vector<ratekit::NamedPremiums> model_premiums(6);
    model_premiums[0].name = "GLMs_EVPP";
    model_premiums[1].name = "GLMs_SDPP";
    model_premiums[2].name = "QR";
    model_premiums[3].name = "PQR";
    model_premiums[4].name = "ER";
    model_premiums[5].name = "QRII";
    std::vector<double> kept_losses;
    kept_losses.reserve(keep.size());

    for (std::size_t idx : keep) {
        const Eigen::RowVectorXd row = data.design.values.row(static_cast<Eigen::Index>(idx));
        const double w = data.exposures[idx];
        const double pure = pure_actual[idx];
        const double p = p_actual[idx];
        const double variance =
            ratekit::two_part_variance(models.logistic, models.gamma, row, w, cfg.glm);
        const double er_v = row.dot(models.er.coefficients);
        const double tau_star = policy_levels[idx].tau_star;

        const double q_qr = ratekit::predict_var(qr_fit_at(tau_star), row);
        const double q_pqr = ratekit::predict_var(models.pqr, row, tau_star);
        const double q_qrii = ratekit::predict_var(alloc.qrii_fit, row);

        model_premiums[0].premiums.push_back(
            ratekit::price_evpp(pure, alloc.evpp.parameter).risk_premium);
        model_premiums[1].premiums.push_back(
            ratekit::price_sdpp(pure, variance, alloc.sdpp.parameter).risk_premium);
        model_premiums[2].premiums.push_back(
            ratekit::price_qpp(pure, q_qr, alloc.qr.parameter).risk_premium);
        model_premiums[3].premiums.push_back(
            ratekit::price_qpp(pure, q_pqr, alloc.pqr.parameter).risk_premium);
        model_premiums[4].premiums.push_back(
            ratekit::price_epp(pure, er_v, alloc.epp.parameter).risk_premium);
        model_premiums[5].premiums.push_back(
            ratekit::price_tsqpp(p, q_qrii, pure, alloc.qrii.parameter).risk_premium);
        kept_losses.push_back(data.losses[idx]);
    }

    const auto gm = ratekit::gini_matrix(model_premiums, kept_losses, cfg.gini_splits,
                                         cfg.gini_fraction, cfg.seed, cfg.gini_full_sample);

    std::vector<std::string> files;
    write_text(fs::path(cfg.out_dir) / "reports" / "gini_matrix.csv",
               ratekit::gini_matrix_csv(gm));
    files.push_back("reports/gini_matrix.csv");

    std::string curves = "base,competing,premium_share,loss_share\n";
    for (std::size_t b = 0; b < model_premiums.size(); ++b) {
        for (std::size_t c = 0; c < model_premiums.size(); ++c) {
            if (b == c) continue;
            const auto curve = ratekit::ordered_lorenz(kept_losses,
                                                       model_premiums[b].premiums,
                                                       model_premiums[c].premiums);
            for (std::size_t i = 0; i < curve.premium_share.size(); ++i) {
                curves += model_premiums[b].name + "," + model_premiums[c].name + "," +
                          ratekit::detail::fmt_full(curve.premium_share[i]) + "," +
                          ratekit::detail::fmt_full(curve.loss_share[i]) + "\n";
            }
        }
    }
    write_text(fs::path(cfg.out_dir) / "reports" / "lorenz_curves.csv", curves);
    files.push_back("reports/lorenz_curves.csv");

    ordered_json meta;
    meta["dropped_infeasible"] = dropped;
    meta["policies_used"] = keep.size();
    meta["winner"] = gm.model_names[gm.winner];
    meta["tie"] = gm.tie;
    write_json(fs::path(cfg.out_dir) / "reports" / "gini_meta.json", meta);
    files.push_back("reports/gini_meta.json");

    write_manifest(cfg, "gini", files);
    std::cout << "gini: winner=" << gm.model_names[gm.winner] << " dropped=" << dropped
              << "\n";
    return 0;
}

int cmd_coherence(const CliConfig& cfg) {
    std::vector<double> sample;
    if (cfg.has_dataset && fs::exists(cfg.dataset_path)) {
        const LoadedData data = load_data(cfg);
        sample = data.losses;
    } else {
        ratekit::RngStream rng = ratekit::RngStream::keyed(cfg.seed, 0, 0, 77);
        sample.reserve(static_cast<std::size_t>(cfg.coherence_sample));
        for (int i = 0; i < cfg.coherence_sample; ++i)
            sample.push_back(ratekit::sample_tweedie(300.0, 1.65, 120.0, rng));
    }

    ordered_json all = ordered_json::array();
    bool ok = true;
    for (double tau : cfg.coherence_taus) {
        const auto rep =
            ratekit::coherence_report(sample, tau, cfg.coherence_trials, cfg.seed);
        all.push_back(ratekit::coherence_to_json(rep));
        ok = ok && rep.passed;
        std::cout << "coherence: tau=" << tau << (rep.passed ? " PASS" : " FAIL") << "\n";
    }
    write_json(fs::path(cfg.out_dir) / "reports" / "coherence.json", all);
    write_manifest(cfg, "coherence", {"reports/coherence.json"});
    if (!ok) throw ratekit::ValidationError("coherence: axiom violations detected");
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"classification ratemaking: two-part GLM, expectile and quantile "
                 "regression, premium principles, simulation study, Gini comparison"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::uint64_t> seed_override;
    std::optional<std::string> out_override;
    std::optional<double> tau_override;
    std::optional<double> total_override;
    std::optional<int> splits_override;
    std::optional<bool> drop_infeasible_override;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "JSON run configuration")->required();
        cmd->add_option("--seed", seed_override, "override config seed");
        cmd->add_option("--out", out_override, "override output directory");
        cmd->add_option("--tau", tau_override, "override quantile/expectile level");
        cmd->add_option("--total-premium", total_override, "override target total premium C");
        cmd->add_option("--splits", splits_override, "override Gini split count");
        cmd->add_flag("--drop-infeasible,!--no-drop-infeasible", drop_infeasible_override,
                      "drop policies infeasible under quantile models");
    };

    CLI::App* fit = app.add_subcommand("fit", "fit all models and serialize them");
    CLI::App* rate = app.add_subcommand("rate", "allocate loadings and price tariff classes");
    CLI::App* simulate = app.add_subcommand("simulate", "run the Tweedie simulation study");
    CLI::App* gini = app.add_subcommand("gini", "ordered-Lorenz / Gini model comparison");
    CLI::App* coherence = app.add_subcommand("coherence", "expectile coherence axiom checks");
    for (CLI::App* cmd : {fit, rate, simulate, gini, coherence}) add_common(cmd);

    CLI11_PARSE(app, argc, argv);

    try {
        CliConfig cfg = parse_config(config_path);
        if (seed_override) cfg.seed = *seed_override;
        if (out_override) cfg.out_dir = *out_override;
        if (tau_override) cfg.tau = *tau_override;
        if (total_override) cfg.total_premium = *total_override;
        if (splits_override) cfg.gini_splits = *splits_override;
        if (drop_infeasible_override) cfg.drop_infeasible = *drop_infeasible_override;
        cfg.sim.master_seed = cfg.seed;
        cfg.sim.tau = cfg.tau;

        if (fit->parsed()) return cmd_fit(cfg);
        if (rate->parsed()) return cmd_rate(cfg);
        if (simulate->parsed()) return cmd_simulate(cfg);
        if (gini->parsed()) return cmd_gini(cfg);
        if (coherence->parsed()) return cmd_coherence(cfg);
    } catch (const ratekit::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const ratekit::SchemaError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const ratekit::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const ratekit::EncodingError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const ratekit::ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const ratekit::Error& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
