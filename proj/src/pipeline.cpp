#include "vmem/pipeline.hpp"

#include "vmem/csv.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <exception>
#include <future>
#include <map>
#include <set>
#include <utility>

namespace vmem {

StageError::StageError(std::string stage, const std::string& what)
    : Error(what), stage_(std::move(stage)) {}

std::vector<std::string> default_models() {
    return {"s-vMEM", "d-vMEM", "c-vMEM", "s-vMEM-SeC", "d-vMEM-SeC", "c-vMEM-SeC"};
}

PanelFormat parse_panel_format(const std::string& text) {
    if (text == "auto" || text == "automatic") return PanelFormat::automatic;
    if (text == "long") return PanelFormat::long_ohlc;
    if (text == "wide") return PanelFormat::wide;
    throw Error("unknown panel format '" + text + "' (expected auto, long or wide)");
}

std::string to_string(PanelFormat format) {
    switch (format) {
        case PanelFormat::automatic: return "auto";
        case PanelFormat::long_ohlc: return "long";
        case PanelFormat::wide: return "wide";
    }
    return "?";
}

// ---------------------------------------------------------------------------
// Configuration

namespace {

void reject_unknown(const Json& j, std::initializer_list<const char*> known, const std::string& where) {
    if (!j.is_object()) throw ParseError(where, "expected an object");
    for (const auto& item : j.items()) {
        if (std::none_of(known.begin(), known.end(), [&](const char* k) { return item.key() == k; }))
            throw ParseError(where, "unknown key '" + item.key() + "'");
    }
}

template <typename T>
void read_if(const Json& j, const char* key, T& target) {
    if (j.contains(key) && !j.at(key).is_null()) target = j.at(key).get<T>();
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::filesystem::path& p) {
    if (p.empty() || p.is_absolute() || base.empty()) return p;
    return base / p;
}

}  // namespace

void RunConfig::validate() const {
    if (models.empty()) throw Error("config lists no models");
    std::set<std::string> seen;
    for (const auto& m : models) {
        parse_model_label(m);
        if (!seen.insert(m).second) throw Error("model '" + m + "' is listed twice");
    }
    if (input.empty()) throw Error("config has no input path");
    if (!std::filesystem::exists(input)) throw Error("input file does not exist: " + input.string());
    if (output_dir.empty()) throw Error("config has no output directory");
    if (threads < 1) throw Error("threads must be at least 1");
    fit.validate();
    if (cluster.noise_floor_z < 0.0) throw Error("noise_floor_z must be non-negative");
    if (cluster.k1 && *cluster.k1 < 1) throw Error("k1 must be at least 1");
    if (cluster.k2 && *cluster.k2 < 1) throw Error("k2 must be at least 1");
    const auto& mcs = evaluation.mcs_options;
    if (!(mcs.alpha > 0.0 && mcs.alpha < 1.0)) throw Error("MCS alpha must lie in (0, 1)");
    if (mcs.replicates < 1) throw Error("MCS replicates must be positive");
    if (mcs.block_length < 1) throw Error("MCS block length must be positive");
}

RunConfig run_config_from_json(const Json& j, const std::filesystem::path& base_dir) {
    reject_unknown(j, {"input", "models", "fit", "cluster", "evaluation", "output_dir", "seed", "threads"}, "config");
    RunConfig c;
    if (!j.contains("input")) throw ParseError("config", "missing 'input'");
    const Json& input = j.at("input");
    if (input.is_string()) {
        c.input = input.get<std::string>();
    } else {
        reject_unknown(input, {"path", "format", "split_date"}, "config.input");
        c.input = input.at("path").get<std::string>();
        if (input.contains("format")) c.format = parse_panel_format(input.at("format").get<std::string>());
        if (input.contains("split_date") && !input.at("split_date").is_null()) {
            const auto text = input.at("split_date").get<std::string>();
            c.split_date = parse_date(text);
            if (!c.split_date) throw ParseError("config.input", "invalid split_date '" + text + "'");
        }
    }
    c.input = resolve(base_dir, c.input);
    c.models = j.contains("models") ? j.at("models").get<std::vector<std::string>>() : default_models();

    if (j.contains("fit")) {
        const Json& f = j.at("fit");
        reject_unknown(f,
                       {"outer_tolerance", "max_outer_iterations", "max_iterations", "gradient_tolerance",
                        "multistarts", "jitter", "std_errors"},
                       "config.fit");
        read_if(f, "outer_tolerance", c.fit.outer_tolerance);
        read_if(f, "max_outer_iterations", c.fit.max_outer_iterations);
        read_if(f, "max_iterations", c.fit.inner.max_iterations);
        read_if(f, "gradient_tolerance", c.fit.inner.gradient_tolerance);
        read_if(f, "multistarts", c.fit.multistarts);
        read_if(f, "jitter", c.fit.jitter);
        read_if(f, "std_errors", c.fit.std_errors);
    }
    if (j.contains("cluster")) {
        const Json& f = j.at("cluster");
        reject_unknown(f, {"noise_floor_z", "k1", "k2"}, "config.cluster");
        read_if(f, "noise_floor_z", c.cluster.noise_floor_z);
        if (f.contains("k1") && !f.at("k1").is_null()) c.cluster.k1 = f.at("k1").get<int>();
        if (f.contains("k2") && !f.at("k2").is_null()) c.cluster.k2 = f.at("k2").get<int>();
    }
    if (j.contains("evaluation")) {
        const Json& f = j.at("evaluation");
        reject_unknown(f, {"mcs", "alpha", "replicates", "block_length"}, "config.evaluation");
        read_if(f, "mcs", c.evaluation.mcs);
        read_if(f, "alpha", c.evaluation.mcs_options.alpha);
        read_if(f, "replicates", c.evaluation.mcs_options.replicates);
        read_if(f, "block_length", c.evaluation.mcs_options.block_length);
    }
    if (j.contains("output_dir")) c.output_dir = j.at("output_dir").get<std::string>();
    c.output_dir = resolve(base_dir, c.output_dir);
    read_if(j, "seed", c.seed);
    read_if(j, "threads", c.threads);
    return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    const Json j = read_json(path);
    try {
        return run_config_from_json(j, path.parent_path());
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path.string(), e.what());
    }
}

Json to_json(const RunConfig& c) {
    Json j;
    j["input"] = {{"path", c.input.string()},
                  {"format", to_string(c.format)},
                  {"split_date", c.split_date ? Json(format_date(*c.split_date)) : Json(nullptr)}};
    j["models"] = c.models;
    j["fit"] = {{"outer_tolerance", c.fit.outer_tolerance},
                {"max_outer_iterations", c.fit.max_outer_iterations},
                {"max_iterations", c.fit.inner.max_iterations},
                {"gradient_tolerance", c.fit.inner.gradient_tolerance},
                {"multistarts", c.fit.multistarts},
                {"jitter", c.fit.jitter},
                {"std_errors", c.fit.std_errors}};
    j["cluster"] = {{"noise_floor_z", c.cluster.noise_floor_z},
                    {"k1", c.cluster.k1 ? Json(*c.cluster.k1) : Json(nullptr)},
                    {"k2", c.cluster.k2 ? Json(*c.cluster.k2) : Json(nullptr)}};
    j["evaluation"] = {{"mcs", c.evaluation.mcs},
                       {"alpha", c.evaluation.mcs_options.alpha},
                       {"replicates", c.evaluation.mcs_options.replicates},
                       {"block_length", c.evaluation.mcs_options.block_length}};
    j["output_dir"] = c.output_dir.string();
    j["seed"] = c.seed;
    j["threads"] = c.threads;
    return j;
}

// ---------------------------------------------------------------------------
// Run

namespace {

namespace fs = std::filesystem;

struct WindowFits {
    Window window;
    VolatilityPanel panel;
    std::vector<FitResult> fits;  ///< config model order
    std::optional<EvaluationReport> evaluation;
};

class Run {
public:
    Run(const RunConfig& config, const Logger& log) : config_(config), log_(log) {}

    RunResult execute() {
        try {
            body();
        } catch (const StageError&) {
            write_manifest();
            throw;
        } catch (const std::exception& e) {
            failed_stage_ = stage_;
            error_ = e.what();
            write_manifest();
            throw StageError(stage_, e.what());
        }
        write_manifest();
        return std::move(result_);
    }

private:
    void body() {
        enter("config");
        config_.validate();
        fs::create_directories(config_.output_dir);

        enter("ingest");
        const VolatilityPanel loaded = load_panel_csv(config_.input, config_.format, config_.split_date);
        save_panel_csv(loaded, path("panel.csv"));
        note(fmt::format("panel: {} rows x {} assets, {} training rows", loaded.rows(), loaded.assets(),
                         loaded.train_rows()));

        std::vector<WindowFits> windows;
        windows.push_back({Window::in_sample, loaded.with_split(loaded.rows()), {}, {}});
        if (loaded.has_holdout()) windows.push_back({Window::out_of_sample, loaded, {}, {}});

        for (auto& w : windows) estimate_window(w);

        enter("evaluate");
        for (auto& w : windows) {
            w.evaluation = evaluate_models(w.panel, w.fits, w.window, evaluation_options());
            const std::string tag = to_string(w.window);
            write_evaluation_csv(*w.evaluation, path("evaluation_" + tag + ".csv"));
            Json mcs;
            if (w.evaluation->mcs_mse) mcs["mse"] = mcs_json(*w.evaluation->mcs_mse);
            if (w.evaluation->mcs_qlike) mcs["qlike"] = mcs_json(*w.evaluation->mcs_qlike);
            if (!mcs.is_null()) write_json(path("mcs_" + tag + ".json"), mcs);
        }

        enter("report");
        build_summary(windows);
        write_summary();
        for (const char* label : {"c-vMEM-SeC", "c-vMEM"}) {
            const auto it = in_sample_specs_.find(label);
            if (it == in_sample_specs_.end()) continue;
            write_partition_csv(it->second, path("cluster_map.csv"));
            break;
        }
    }

    void estimate_window(WindowFits& w) {
        const std::string tag = to_string(w.window);

        enter("factor");
        const PcFactor factor = first_principal_component(w.panel);
        write_factor_csv(w.panel, factor, path("factor/" + tag + "/scores.csv"),
                         path("factor/" + tag + "/loadings.csv"));
        note(fmt::format("{}: first component explains {:.1f}% of variance", tag, 100.0 * factor.explained_share));

        enter("cluster");
        std::map<Variant, ModelSpec> clustered;
        for (const auto& label : config_.models) {
            const auto [variant, parameterization] = parse_model_label(label);
            if (parameterization != Parameterization::clustered || clustered.count(variant)) continue;
            clustered.emplace(variant, cluster(w.panel, factor, variant, tag));
        }

        enter("fit");
        std::vector<ModelSpec> specs;
        for (const auto& label : config_.models) {
            const auto [variant, parameterization] = parse_model_label(label);
            specs.push_back(parameterization == Parameterization::clustered
                                ? clustered.at(variant)
                                : ModelSpec::make(variant, parameterization, w.panel.tickers()));
            if (w.window == Window::in_sample) in_sample_specs_.emplace(label, specs.back());
        }
        w.fits = fit_all(w.panel, factor, specs, tag);

        enter("forecast");
        for (const auto& fit : w.fits) {
            const std::string dir = "models/" + fit.spec.label() + "/";
            write_losses_csv(w.panel, fit, w.window, path(dir + "losses_" + tag + ".csv"));
            if (w.window != Window::in_sample) continue;
            const FilterOutput out = filter(w.panel, factor, fit.spec, fit.params);
            write_fitted_csv(w.panel, out, path(dir + "fitted.csv"));
            if (!fit.spec.has_common()) continue;
            write_xi_csv(w.panel, out, path(dir + "xi.csv"));
            write_decomposition_csv(w.panel, out, path(dir + "decomposition.csv"));
            write_coefficients_csv(fit.spec, fit.params, path(dir + "coefficients.csv"));
        }
    }

    ModelSpec cluster(const VolatilityPanel& panel, const PcFactor& factor, Variant variant, const std::string& tag) {
        ClusterOptions options = config_.cluster;
        options.fit = fit_options(config_.threads);
        const ClusteringReport report = clustering_pipeline(panel, factor, variant, options);
        const std::string dir = "clusters/" + tag + "/" + to_string(variant) + "/";
        write_json(path(dir + "spec.json"), vmem::to_json(report.spec));
        write_partition_csv(report.spec, path(dir + "partition.csv"));
        write_dendrogram_csv(report.ab.dendrogram, path(dir + "dendrogram_ab.csv"));
        if (report.theta) write_dendrogram_csv(report.theta->dendrogram, path(dir + "dendrogram_theta.csv"));
        csv::Writer w(path(dir + "univariate.csv"));
        w.header({"ticker", "alpha", "beta", "theta", "se_alpha", "se_beta", "se_theta"});
        for (std::size_t i = 0; i < report.univariate.size(); ++i) {
            const auto& u = report.univariate[i];
            auto se = [&](std::size_t k) {
                return k < u.std_errors.size() && std::isfinite(u.std_errors[k]) ? csv::format_double(u.std_errors[k])
                                                                                 : std::string();
            };
            w.row({panel.tickers()[i], csv::format_double(u.alpha), csv::format_double(u.beta),
                   csv::format_double(u.theta), se(0), se(1), u.theta_identified ? se(2) : std::string()});
        }
        note(fmt::format("{} {}: k1={} k2={}", tag, to_string(variant), report.spec.k1(), report.spec.k2()));
        return report.spec;
    }

    std::vector<FitResult> fit_all(const VolatilityPanel& panel, const PcFactor& factor,
                                   const std::vector<ModelSpec>& specs, const std::string& tag) {
        const std::size_t width = static_cast<std::size_t>(config_.threads);
        const FitOptions options = fit_options(1);
        std::vector<FitResult> fits(specs.size());
        for (std::size_t begin = 0; begin < specs.size(); begin += width) {
            const std::size_t end = std::min(specs.size(), begin + width);
            std::vector<std::future<FitResult>> jobs;
            for (std::size_t k = begin; k < end; ++k) {
                jobs.push_back(std::async(width > 1 ? std::launch::async : std::launch::deferred,
                                          [&, k] { return fit(panel, factor, specs[k], options); }));
            }
            for (std::size_t k = begin; k < end; ++k) {
                const std::string label = specs[k].label();
                try {
                    fits[k] = jobs[k - begin].get();
                } catch (const std::exception& e) {
                    throw StageError_at("fit", label + ": " + e.what());
                }
                const auto& f = fits[k];
                write_json(path("models/" + label + "/fit_" + tag + ".json"), vmem::to_json(f));
                write_estimates_csv(f, path("models/" + label + "/estimates_" + tag + ".csv"));
                note(fmt::format("{} {}: loglik {:.4f}, {} outer iterations{}", tag, label, f.loglik,
                                 f.outer_iterations, f.converged ? "" : " (not converged)"));
                for (const auto& warning : f.warnings) note(fmt::format("{} {}: warning: {}", tag, label, warning));
            }
        }
        return fits;
    }

    FitOptions fit_options(int threads) const {
        FitOptions o = config_.fit;
        o.seed = config_.seed;
        o.threads = threads;
        return o;
    }

    EvaluationOptions evaluation_options() const {
        EvaluationOptions o = config_.evaluation;
        o.mcs_options.seed = config_.seed;
        return o;
    }

    static Json mcs_json(const McsResult& r) {
        Json models = Json::array();
        for (std::size_t k = 0; k < r.models.size(); ++k)
            models.push_back({{"model", r.models[k]}, {"included", static_cast<bool>(r.included[k])},
                              {"p_value", number(r.p_values[k])}});
        return {{"alpha", r.alpha},
                {"replicates", r.replicates},
                {"block_length", r.block_length},
                {"models", models},
                {"elimination", r.elimination},
                {"surviving", r.surviving()}};
    }

    void build_summary(const std::vector<WindowFits>& windows) {
        const auto& is = windows.front();
        for (std::size_t k = 0; k < is.fits.size(); ++k) {
            const auto& e = is.evaluation->models[k];
            SummaryRow row;
            row.model = e.model;
            row.n_free = e.n_free;
            row.rows = e.rows;
            row.loglik = e.loglik;
            row.aic = e.criteria.aic;
            row.bic = e.criteria.bic;
            row.mse_is = e.mse.aggregate;
            row.qlike_is = e.qlike.aggregate;
            if (is.evaluation->mcs_mse) row.mcs_mse_is = is.evaluation->mcs_mse->included[k];
            if (is.evaluation->mcs_qlike) row.mcs_qlike_is = is.evaluation->mcs_qlike->included[k];
            if (windows.size() > 1) {
                const auto& oos = *windows[1].evaluation;
                row.mse_oos = oos.models[k].mse.aggregate;
                row.qlike_oos = oos.models[k].qlike.aggregate;
                if (oos.mcs_mse) row.mcs_mse_oos = oos.mcs_mse->included[k];
                if (oos.mcs_qlike) row.mcs_qlike_oos = oos.mcs_qlike->included[k];
            }
            result_.summary.push_back(row);
        }
    }

    void write_summary() {
        auto num = [](const std::optional<double>& v) { return v ? csv::format_double(*v) : std::string(); };
        auto flag = [](const std::optional<bool>& v) { return v ? std::string(*v ? "1" : "0") : std::string(); };
        csv::Writer w(path("summary.csv"));
        w.header({"model", "n_free", "T", "loglik", "aic", "bic", "mse_is", "qlike_is", "mse_oos", "qlike_oos",
                  "mcs_mse_is", "mcs_qlike_is", "mcs_mse_oos", "mcs_qlike_oos"});
        for (const auto& r : result_.summary) {
            w.row({r.model, std::to_string(r.n_free), std::to_string(r.rows), csv::format_double(r.loglik),
                   csv::format_double(r.aic), csv::format_double(r.bic), csv::format_double(r.mse_is),
                   csv::format_double(r.qlike_is), num(r.mse_oos), num(r.qlike_oos), flag(r.mcs_mse_is),
                   flag(r.mcs_qlike_is), flag(r.mcs_mse_oos), flag(r.mcs_qlike_oos)});
        }
    }

    void write_manifest() {
        Json artifacts = Json::array();
        for (const auto& a : result_.artifacts) {
            if (!fs::exists(config_.output_dir / a)) continue;
            const auto ext = a.extension().string();
            artifacts.push_back({{"path", a.generic_string()}, {"kind", ext.empty() ? "" : ext.substr(1)}});
        }
        Json m;
        m["status"] = failed_stage_ ? "failed" : "ok";
        m["failed_stage"] = failed_stage_ ? Json(*failed_stage_) : Json(nullptr);
        m["error"] = error_.empty() ? Json(nullptr) : Json(error_);
        m["models"] = config_.models;
        m["seed"] = config_.seed;
        m["artifacts"] = artifacts;
        try {
            if (!fs::is_directory(config_.output_dir)) return;
            vmem::write_json(config_.output_dir / "manifest.json", m);
        } catch (const std::exception&) {
            // The original failure is more useful than a manifest write error.
        }
    }

    StageError StageError_at(const std::string& stage, const std::string& what) {
        failed_stage_ = stage;
        error_ = what;
        return StageError(stage, what);
    }

    fs::path path(const std::string& relative) {
        const fs::path rel(relative);
        if (std::find(result_.artifacts.begin(), result_.artifacts.end(), rel) == result_.artifacts.end())
            result_.artifacts.push_back(rel);
        return config_.output_dir / rel;
    }

    void enter(const std::string& stage) {
        stage_ = stage;
        note("stage " + stage);
    }

    void note(const std::string& message) const {
        if (log_) log_(message);
    }

    const RunConfig& config_;
    const Logger& log_;
    std::string stage_ = "config";
    std::optional<std::string> failed_stage_;
    std::string error_;
    std::map<std::string, ModelSpec> in_sample_specs_;
    RunResult result_;
};

}  // namespace

RunResult run_pipeline(const RunConfig& config, const Logger& log) {
    RunResult result;
    Run run(config, log);
    result = run.execute();
    result.output_dir = config.output_dir;
    return result;
}

}  // namespace vmem
