#pragma once

#include "vmem/cluster.hpp"
#include "vmem/error.hpp"
#include "vmem/report.hpp"
#include "vmem/serialize.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace vmem {

/// Everything a full run needs. Relative paths in the config file are
/// resolved against the directory that holds it.
///
///   {
///     "input": {"path": "panel.csv", "format": "auto", "split_date": "2023-01-03"},
///     "models": ["s-vMEM", "c-vMEM-SeC"],
///     "fit": {"outer_tolerance": 1e-4, "max_outer_iterations": 50, "max_iterations": 400,
///             "gradient_tolerance": 1e-7, "multistarts": 2, "jitter": 0.25, "std_errors": true},
///     "cluster": {"noise_floor_z": 2.0, "k1": null, "k2": null},
///     "evaluation": {"mcs": true, "alpha": 0.05, "replicates": 1000, "block_length": 20},
///     "output_dir": "out",
///     "seed": 12345,
///     "threads": 1
///   }
struct RunConfig {
    std::filesystem::path input;
    PanelFormat format = PanelFormat::automatic;
    std::optional<Date> split_date;
    std::vector<std::string> models;
    FitOptions fit;
    ClusterOptions cluster;
    EvaluationOptions evaluation;
    std::filesystem::path output_dir = "out";
    std::uint64_t seed = 12345;
    int threads = 1;

    /// Checks the model labels, that the input exists, and option ranges.
    void validate() const;
};

RunConfig run_config_from_json(const Json& j, const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::filesystem::path& path);
Json to_json(const RunConfig& config);

PanelFormat parse_panel_format(const std::string& text);
std::string to_string(PanelFormat format);

/// The six specifications compared in the study, in reporting order.
std::vector<std::string> default_models();

/// A failure inside run_pipeline, tagged with the stage that raised it.
class StageError : public Error {
public:
    StageError(std::string stage, const std::string& what);
    const std::string& stage() const noexcept { return stage_; }

private:
    std::string stage_;
};

struct SummaryRow {
    std::string model;
    int n_free = 0;
    std::size_t rows = 0;
    double loglik = 0.0;
    double aic = 0.0;
    double bic = 0.0;
    double mse_is = 0.0;
    double qlike_is = 0.0;
    std::optional<double> mse_oos;
    std::optional<double> qlike_oos;
    std::optional<bool> mcs_mse_is, mcs_qlike_is, mcs_mse_oos, mcs_qlike_oos;
};

struct RunResult {
    std::filesystem::path output_dir;
    std::vector<SummaryRow> summary;
    std::vector<std::filesystem::path> artifacts;  ///< relative to output_dir
};

using Logger = std::function<void(const std::string&)>;

/// ingest -> factor -> cluster -> fit -> forecast -> evaluate -> report.
///
/// In-sample fits use every row of the panel. When the panel has a split
/// date, each model (and each clustering) is re-estimated on the rows before
/// it and evaluated on the rows from it onward. Artifacts written before a
/// failure are kept and listed in manifest.json, which also records the
/// failed stage. Throws StageError.
RunResult run_pipeline(const RunConfig& config, const Logger& log = {});

}  // namespace vmem
