#include "vmem/csv.hpp"
#include "vmem/pipeline.hpp"

#include "CLI11.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace vmem;

namespace {

struct Global {
    std::uint64_t seed = 12345;
    int threads = 1;
    bool verbose = false;
    bool seed_given = false;
    bool threads_given = false;
};

Global global;

void log(const std::string& message) {
    if (global.verbose) std::cerr << "vmem: " << message << '\n';
}

/// Raised inside a subcommand; the tag names the stage for diagnostics.
struct Failure {
    std::string stage;
    std::string message;
};

template <typename F>
auto stage(const std::string& name, F&& body) -> decltype(body()) {
    try {
        return body();
    } catch (const StageError& e) {
        throw Failure{e.stage(), e.what()};
    } catch (const std::exception& e) {
        throw Failure{name, e.what()};
    }
}

std::optional<Date> date_option(const std::string& text, const char* flag) {
    if (text.empty()) return std::nullopt;
    const auto d = parse_date(text);
    if (!d) throw Error(fmt::format("{} expects YYYY-MM-DD, got '{}'", flag, text));
    return d;
}

VolatilityPanel load_panel(const std::string& path, const std::string& split_date) {
    return stage("ingest", [&] { return load_panel_csv(path, PanelFormat::automatic, date_option(split_date, "--split-date")); });
}

fs::path sibling(const fs::path& path, const std::string& suffix) {
    return path.parent_path() / (path.stem().string() + suffix);
}

FitOptions base_fit_options() {
    FitOptions o;
    o.seed = global.seed;
    o.threads = global.threads;
    return o;
}

std::vector<std::pair<std::string, double>> parse_fixed(const std::vector<std::string>& items) {
    std::vector<std::pair<std::string, double>> out;
    for (const auto& item : items) {
        const auto eq = item.find('=');
        const auto value = eq == std::string::npos ? std::nullopt : csv::parse_double(item.substr(eq + 1));
        if (!value) throw Error("--fix expects name=value, got '" + item + "'");
        out.emplace_back(item.substr(0, eq), *value);
    }
    return out;
}

ModelSpec spec_for(const std::string& spec_path, const std::string& model, const std::vector<std::string>& tickers) {
    if (!spec_path.empty()) {
        ModelSpec spec = spec_from_json(read_json(spec_path));
        if (spec.tickers != tickers) throw Error("specification tickers do not match the panel");
        return spec;
    }
    if (model.empty()) throw Error("either --spec or --model is required");
    const auto [variant, parameterization] = parse_model_label(model);
    if (parameterization == Parameterization::clustered)
        throw Error("clustered models need a --spec file (see the cluster subcommand)");
    return ModelSpec::make(variant, parameterization, tickers);
}

// ---------------------------------------------------------------------------

struct IngestArgs {
    std::string input, format = "auto", split_date, out;
};

void run_ingest(const IngestArgs& a) {
    const auto panel = stage("ingest", [&] {
        return load_panel_csv(a.input, parse_panel_format(a.format), date_option(a.split_date, "--split-date"));
    });
    stage("ingest", [&] { save_panel_csv(panel, a.out); });
    std::cout << fmt::format("{} rows x {} assets, {} training rows -> {}\n", panel.rows(), panel.assets(),
                             panel.train_rows(), a.out);
}

struct FactorArgs {
    std::string panel, split_date, out, loadings;
};

void run_factor(const FactorArgs& a) {
    const auto panel = load_panel(a.panel, a.split_date);
    const auto factor = stage("factor", [&] { return first_principal_component(panel); });
    const fs::path loadings = a.loadings.empty() ? sibling(a.out, "_loadings.csv") : fs::path(a.loadings);
    stage("factor", [&] { write_factor_csv(panel, factor, a.out, loadings); });
    std::cout << fmt::format("explained share {:.4f}; scores -> {}, loadings -> {}\n", factor.explained_share, a.out,
                             loadings.string());
}

struct ClusterArgs {
    std::string panel, split_date, variant = "vmem-sec", out, partition, dendrogram_prefix;
    double noise_floor_z = 2.0;
    std::optional<int> k1, k2;
};

void run_cluster(const ClusterArgs& a) {
    const auto panel = load_panel(a.panel, a.split_date);
    const auto factor = stage("factor", [&] { return first_principal_component(panel); });
    const auto report = stage("cluster", [&] {
        ClusterOptions options;
        options.fit = base_fit_options();
        options.noise_floor_z = a.noise_floor_z;
        options.k1 = a.k1;
        options.k2 = a.k2;
        return clustering_pipeline(panel, factor, parse_variant(a.variant), options);
    });
    stage("report", [&] {
        write_json(a.out, to_json(report.spec));
        const fs::path out(a.out);
        write_partition_csv(report.spec, a.partition.empty() ? sibling(out, "_partition.csv") : fs::path(a.partition));
        const fs::path prefix = a.dendrogram_prefix.empty() ? sibling(out, "_dendrogram") : fs::path(a.dendrogram_prefix);
        write_dendrogram_csv(report.ab.dendrogram, prefix.string() + "_ab.csv");
        if (report.theta) write_dendrogram_csv(report.theta->dendrogram, prefix.string() + "_theta.csv");
    });
    std::cout << fmt::format("{}: k1={} k2={} (floors {:.4g}, {:.4g})\n", report.spec.label(), report.spec.k1(),
                             report.spec.k2(), report.ab_floor, report.theta_floor);
}

struct FitArgs {
    std::string panel, split_date, spec, model, out;
    std::vector<std::string> fixed;
    double tolerance = 1e-4;
    int max_outer = 50;
    bool no_std_errors = false;
    bool full_sample = false;
};

void run_fit(const FitArgs& a) {
    auto panel = load_panel(a.panel, a.split_date);
    if (a.full_sample) panel = panel.with_split(panel.rows());
    const auto spec = stage("fit", [&] { return spec_for(a.spec, a.model, panel.tickers()); });
    const auto factor = stage("factor", [&] { return first_principal_component(panel); });
    const auto result = stage("fit", [&] {
        FitOptions options = base_fit_options();
        options.outer_tolerance = a.tolerance;
        options.max_outer_iterations = a.max_outer;
        options.std_errors = !a.no_std_errors;
        options.fixed = parse_fixed(a.fixed);
        return fit(panel, factor, spec, options);
    });
    stage("report", [&] { write_json(a.out, to_json(result)); });
    for (const auto& w : result.warnings) std::cerr << "vmem: warning [fit]: " << w << '\n';
    std::cout << fmt::format("{}: loglik {:.6f}, {} free, {} outer iterations, {} -> {}\n", spec.label(),
                             result.loglik, result.n_free, result.outer_iterations,
                             result.converged ? "converged" : "NOT converged", a.out);
}

struct ForecastArgs {
    std::string panel, split_date, fit, window = "oos", out, filter_out;
};

void run_forecast(const ForecastArgs& a) {
    const auto panel = load_panel(a.panel, a.split_date);
    const auto fitted = stage("forecast", [&] { return fit_from_json(read_json(a.fit)); });
    stage("forecast", [&] {
        write_losses_csv(panel, fitted, parse_window(a.window), a.out);
        if (!a.filter_out.empty())
            write_filter_csv(panel, filter(panel, fitted_factor(panel, fitted), fitted.spec, fitted.params),
                             a.filter_out);
    });
    std::cout << fmt::format("{} forecasts for {} -> {}\n", a.window, fitted.spec.label(), a.out);
}

struct EvaluateArgs {
    std::string fits, panel, split_date, window = "is", out;
    bool mcs = false;
    double alpha = 0.05;
    int replicates = 1000, block_length = 20;
};

void run_evaluate(const EvaluateArgs& a) {
    const auto panel = load_panel(a.panel, a.split_date);
    const auto fits = stage("evaluate", [&] {
        std::vector<fs::path> files;
        for (const auto& entry : fs::directory_iterator(a.fits))
            if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
        std::sort(files.begin(), files.end());
        std::vector<FitResult> out;
        for (const auto& f : files) {
            const Json j = read_json(f);
            if (j.contains("coefficients") && j.contains("params")) out.push_back(fit_from_json(j));
        }
        if (out.empty()) throw Error("no fit files found in " + a.fits);
        return out;
    });
    const auto report = stage("evaluate", [&] {
        EvaluationOptions options;
        options.mcs = a.mcs;
        options.mcs_options = {a.alpha, a.replicates, a.block_length, global.seed};
        return evaluate_models(panel, fits, parse_window(a.window), options);
    });
    stage("report", [&] { write_evaluation_csv(report, a.out); });
    for (std::size_t k = 0; k < report.models.size(); ++k) {
        const auto& e = report.models[k];
        std::cout << fmt::format("{:<12} aic {:>10.4f} bic {:>10.4f} mse {:>10.4f} qlike {:>8.4f}{}\n", e.model,
                                 e.criteria.aic, e.criteria.bic, e.mse.aggregate, e.qlike.aggregate,
                                 report.mcs_qlike && report.mcs_qlike->included[k] ? "  *" : "");
    }
}

struct SimulateArgs {
    std::string spec, model, params, fit, out;
    std::vector<std::string> tickers;
    std::size_t rows = 2000;
    std::size_t holdout = 0;
};

void run_simulate(const SimulateArgs& a) {
    const auto path = stage("simulate", [&] {
        ModelSpec spec;
        ParamSet params;
        if (!a.fit.empty()) {
            const FitResult f = fit_from_json(read_json(a.fit));
            spec = f.spec;
            params = f.params;
        } else {
            if (a.params.empty()) throw Error("either --fit or --params is required");
            params = params_from_json(read_json(a.params));
            if (!a.spec.empty() && a.tickers.empty()) {
                spec = spec_from_json(read_json(a.spec));
            } else {
                std::vector<std::string> tickers = a.tickers;
                if (tickers.empty())
                    for (std::size_t i = 0; i < params.assets(); ++i) tickers.push_back(fmt::format("S{}", i + 1));
                spec = spec_for(a.spec, a.model, tickers);
            }
            if (spec.assets() != params.assets()) throw Error("specification and parameters differ in size");
        }
        if (a.holdout >= a.rows) throw Error("--holdout must be smaller than --rows");
        return simulate(spec, params, a.rows, global.seed);
    });
    stage("simulate", [&] { save_panel_csv(path.panel.with_split(a.rows - a.holdout), a.out); });
    std::cout << fmt::format("simulated {} rows x {} assets -> {}\n", path.panel.rows(), path.panel.assets(), a.out);
}

void run_run(const std::string& config_path, const std::string& output_override) {
    const RunConfig config = stage("config", [&] {
        RunConfig c = load_run_config(config_path);
        if (!output_override.empty()) c.output_dir = output_override;
        if (global.seed_given) c.seed = global.seed;
        if (global.threads_given) c.threads = global.threads;
        return c;
    });
    const auto result = stage("run", [&] { return run_pipeline(config, log); });
    std::cout << fmt::format("{} models, {} artifacts -> {}\n", result.summary.size(), result.artifacts.size(),
                             result.output_dir.string());
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Vector multiplicative error models with spillovers and co-movement"};
    app.require_subcommand(1);
    app.add_option("--seed", global.seed, "Random seed")->capture_default_str();
    app.add_option("--threads", global.threads, "Worker threads")->check(CLI::PositiveNumber)->capture_default_str();
    app.add_flag("-v,--verbose", global.verbose, "Progress messages on stderr");

    IngestArgs ingest;
    auto* ingest_cmd = app.add_subcommand("ingest", "Build a volatility panel from OHLC or wide CSV");
    ingest_cmd->add_option("--input", ingest.input)->required()->check(CLI::ExistingFile);
    ingest_cmd->add_option("--format", ingest.format)->check(CLI::IsMember({"auto", "long", "wide"}));
    ingest_cmd->add_option("--split-date", ingest.split_date, "First out-of-sample date");
    ingest_cmd->add_option("--out", ingest.out)->required();

    FactorArgs factor;
    auto* factor_cmd = app.add_subcommand("factor", "First principal component of the log panel");
    factor_cmd->add_option("--panel", factor.panel)->required()->check(CLI::ExistingFile);
    factor_cmd->add_option("--split-date", factor.split_date);
    factor_cmd->add_option("--out", factor.out, "Scores CSV (date,p)")->required();
    factor_cmd->add_option("--loadings", factor.loadings, "Loadings CSV (ticker,c)");

    ClusterArgs cluster;
    auto* cluster_cmd = app.add_subcommand("cluster", "Clustered specification from univariate fits");
    cluster_cmd->add_option("--panel", cluster.panel)->required()->check(CLI::ExistingFile);
    cluster_cmd->add_option("--split-date", cluster.split_date);
    cluster_cmd->add_option("--variant", cluster.variant)->check(CLI::IsMember({"vmem", "vmem-sec"}));
    cluster_cmd->add_option("--out", cluster.out, "Specification JSON")->required();
    cluster_cmd->add_option("--partition", cluster.partition, "ticker,ab_group,theta_group CSV");
    cluster_cmd->add_option("--dendrogram", cluster.dendrogram_prefix, "Prefix of the merge-list CSVs");
    cluster_cmd->add_option("--noise-floor-z", cluster.noise_floor_z)->check(CLI::NonNegativeNumber);
    cluster_cmd->add_option("--k1", cluster.k1)->check(CLI::PositiveNumber);
    cluster_cmd->add_option("--k2", cluster.k2)->check(CLI::PositiveNumber);

    FitArgs fit_args;
    auto* fit_cmd = app.add_subcommand("fit", "Maximum likelihood fit");
    fit_cmd->add_option("--panel", fit_args.panel)->required()->check(CLI::ExistingFile);
    fit_cmd->add_option("--split-date", fit_args.split_date);
    auto* spec_opt = fit_cmd->add_option("--spec", fit_args.spec, "Specification JSON")->check(CLI::ExistingFile);
    fit_cmd->add_option("--model", fit_args.model, "Scalar/diagonal label, e.g. s-vMEM-SeC")->excludes(spec_opt);
    fit_cmd->add_option("--out", fit_args.out)->required();
    fit_cmd->add_option("--fix", fit_args.fixed, "Hold a coefficient fixed, name=value");
    fit_cmd->add_option("--tolerance", fit_args.tolerance, "Outer log-likelihood tolerance")->capture_default_str();
    fit_cmd->add_option("--max-outer", fit_args.max_outer)->check(CLI::PositiveNumber)->capture_default_str();
    fit_cmd->add_flag("--no-std-errors", fit_args.no_std_errors);
    fit_cmd->add_flag("--full-sample", fit_args.full_sample, "Ignore the split and fit on every row");

    ForecastArgs forecast;
    auto* forecast_cmd = app.add_subcommand("forecast", "One-step-ahead forecasts and losses");
    forecast_cmd->add_option("--panel", forecast.panel)->required()->check(CLI::ExistingFile);
    forecast_cmd->add_option("--split-date", forecast.split_date);
    forecast_cmd->add_option("--fit", forecast.fit)->required()->check(CLI::ExistingFile);
    forecast_cmd->add_option("--window", forecast.window)->check(CLI::IsMember({"is", "oos"}))->capture_default_str();
    forecast_cmd->add_option("--out", forecast.out)->required();
    forecast_cmd->add_option("--filter-out", forecast.filter_out, "Full filter paths CSV");

    EvaluateArgs evaluate;
    auto* evaluate_cmd = app.add_subcommand("evaluate", "Compare fitted models");
    evaluate_cmd->add_option("--fits", evaluate.fits, "Directory of fit JSON files")->required()->check(CLI::ExistingDirectory);
    evaluate_cmd->add_option("--panel", evaluate.panel)->required()->check(CLI::ExistingFile);
    evaluate_cmd->add_option("--split-date", evaluate.split_date);
    evaluate_cmd->add_option("--window", evaluate.window)->check(CLI::IsMember({"is", "oos"}))->capture_default_str();
    evaluate_cmd->add_flag("--mcs", evaluate.mcs, "Model confidence set on both losses");
    evaluate_cmd->add_option("--alpha", evaluate.alpha)->capture_default_str();
    evaluate_cmd->add_option("--replicates", evaluate.replicates)->check(CLI::PositiveNumber)->capture_default_str();
    evaluate_cmd->add_option("--block-length", evaluate.block_length)->check(CLI::PositiveNumber)->capture_default_str();
    evaluate_cmd->add_option("--out", evaluate.out)->required();

    SimulateArgs sim;
    auto* simulate_cmd = app.add_subcommand("simulate", "Simulate a panel from a model");
    auto* sim_fit = simulate_cmd->add_option("--fit", sim.fit, "Fit JSON (spec and parameters)")->check(CLI::ExistingFile);
    simulate_cmd->add_option("--params", sim.params, "Parameter JSON")->check(CLI::ExistingFile)->excludes(sim_fit);
    simulate_cmd->add_option("--spec", sim.spec, "Specification JSON")->check(CLI::ExistingFile)->excludes(sim_fit);
    simulate_cmd->add_option("--model", sim.model, "Scalar/diagonal label")->excludes(sim_fit);
    simulate_cmd->add_option("--tickers", sim.tickers)->delimiter(',');
    simulate_cmd->add_option("--rows", sim.rows)->check(CLI::PositiveNumber)->capture_default_str();
    simulate_cmd->add_option("--holdout", sim.holdout, "Trailing rows marked out-of-sample")->capture_default_str();
    simulate_cmd->add_option("--out", sim.out)->required();

    std::string config_path, output_override;
    auto* run_cmd = app.add_subcommand("run", "Full pipeline from a JSON config");
    run_cmd->add_option("--config", config_path)->required()->check(CLI::ExistingFile);
    run_cmd->add_option("--out", output_override, "Override the output directory");

    CLI11_PARSE(app, argc, argv);
    global.seed_given = app.count("--seed") > 0;
    global.threads_given = app.count("--threads") > 0;

    try {
        if (*ingest_cmd) run_ingest(ingest);
        else if (*factor_cmd) run_factor(factor);
        else if (*cluster_cmd) run_cluster(cluster);
        else if (*fit_cmd) run_fit(fit_args);
        else if (*forecast_cmd) run_forecast(forecast);
        else if (*evaluate_cmd) run_evaluate(evaluate);
        else if (*simulate_cmd) run_simulate(sim);
        else if (*run_cmd) run_run(config_path, output_override);
    } catch (const Failure& f) {
        std::cerr << "vmem: error [" << f.stage << "]: " << f.message << '\n';
        return 1;
    }
    return 0;
}
