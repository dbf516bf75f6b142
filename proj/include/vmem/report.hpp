#pragma once

// Tidy CSV writers for fitted models and evaluation tables. Numbers use the
// shortest round-trip decimal form, so identical inputs give identical bytes.

#include "vmem/cluster.hpp"
#include "vmem/estimate.hpp"
#include "vmem/evaluate.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace vmem {

struct EvaluationOptions {
    bool mcs = true;
    McsOptions mcs_options;
};

struct ModelEvaluation {
    std::string model;
    int n_free = 0;
    std::size_t rows = 0;  ///< observations behind loglik
    double loglik = 0.0;
    InformationCriteria criteria;
    LossSeries mse;
    LossSeries qlike;
};

struct EvaluationReport {
    Window window = Window::in_sample;
    std::vector<ModelEvaluation> models;
    std::optional<McsResult> mcs_mse;
    std::optional<McsResult> mcs_qlike;
};

/// Rebuilds the factor a fit was estimated with (its loadings and x_bar).
PcFactor fitted_factor(const VolatilityPanel& panel, const FitResult& fit);

/// Forecasts, losses and information criteria for each fit over `window`,
/// plus the MCS on both losses when enabled and at least two models are given.
EvaluationReport evaluate_models(const VolatilityPanel& panel, const std::vector<FitResult>& fits, Window window,
                                 const EvaluationOptions& options = {});

/// Columns: model,n_free,T,loglik,aic,bic,mse,qlike,mcs_mse,mcs_qlike,p_mse,p_qlike
void write_evaluation_csv(const EvaluationReport& report, const std::filesystem::path& path);

/// Columns: date,ticker,observed,forecast,mse,qlike
void write_losses_csv(const VolatilityPanel& panel, const FitResult& fit, Window window,
                      const std::filesystem::path& path);

/// Columns: date,ticker,ln_mu,varsigma,xi
void write_filter_csv(const VolatilityPanel& panel, const FilterOutput& out, const std::filesystem::path& path);

/// Columns: date,xi,exp_xi
void write_xi_csv(const VolatilityPanel& panel, const FilterOutput& out, const std::filesystem::path& path);

/// Columns: date,ticker,exp_varsigma,mu
void write_decomposition_csv(const VolatilityPanel& panel, const FilterOutput& out,
                             const std::filesystem::path& path);

/// Columns: date,ticker,observed,fitted
void write_fitted_csv(const VolatilityPanel& panel, const FilterOutput& out, const std::filesystem::path& path);

/// Columns: ticker,intercept,own_lag,inertia,common,spill_<ticker>...
void write_coefficients_csv(const ModelSpec& spec, const ParamSet& params, const std::filesystem::path& path);

/// Columns: name,estimate,std_error
void write_estimates_csv(const FitResult& fit, const std::filesystem::path& path);

/// Columns: ticker,ab_group,theta_group (theta_group empty for vMEM)
void write_partition_csv(const ModelSpec& spec, const std::filesystem::path& path);

/// Columns: step,left,right,height,size
void write_dendrogram_csv(const Dendrogram& dendrogram, const std::filesystem::path& path);

/// Columns: date,p; loadings sidecar columns: ticker,c
void write_factor_csv(const VolatilityPanel& panel, const PcFactor& factor, const std::filesystem::path& scores,
                      const std::filesystem::path& loadings);

/// Reads a `ticker,c` sidecar back into loadings ordered like the panel.
Vector read_loadings_csv(const VolatilityPanel& panel, const std::filesystem::path& path);

}  // namespace vmem
