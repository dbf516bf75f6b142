#pragma once

#include "vmem/factor.hpp"
#include "vmem/model.hpp"
#include "vmem/panel.hpp"

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace vmem {

enum class Window { in_sample, out_of_sample };

std::string to_string(Window window);
Window parse_window(const std::string& text);

/// Row range [first, last) of the panel covered by a window.
std::pair<std::size_t, std::size_t> window_rows(const VolatilityPanel& panel, Window window);

/// One-step-ahead forecasts of y over the window: exp(ln mu_t), where ln mu_t
/// uses information through t-1 only. Parameters, x_bar and the factor
/// loadings are the ones fitted on the training rows.
Matrix forecast_one_step(const VolatilityPanel& panel, const PcFactor& factor, const ModelSpec& spec,
                         const ParamSet& params, Window window);

struct LossSeries {
    std::string model;
    Window window = Window::in_sample;
    Matrix values;  ///< T_eval x n per-observation losses
    double aggregate = 0.0;

    /// Cross-asset average per period.
    Vector per_period() const;
};

/// (y - mu)^2
LossSeries loss_mse(const Matrix& y, const Matrix& mu);
/// ln mu + y / mu; throws DomainError for non-positive forecasts.
LossSeries loss_qlike(const Matrix& y, const Matrix& mu);

struct InformationCriteria {
    double aic = 0.0;
    double bic = 0.0;
};

/// AIC = (-2 ll + 2 k) / T, BIC = (-2 ll + k ln T) / T.
InformationCriteria information_criteria(double loglik, int n_free, double T);

struct McsOptions {
    double alpha = 0.05;
    int replicates = 1000;
    int block_length = 20;
    std::uint64_t seed = 12345;
};

struct McsResult {
    std::vector<std::string> models;
    std::vector<bool> included;
    std::vector<double> p_values;            ///< MCS p-value per model
    std::vector<std::string> elimination;    ///< eliminated models, in order
    double alpha = 0.05;
    int replicates = 0;
    int block_length = 0;

    std::vector<std::string> surviving() const;
};

/// Model confidence set with the semi-quadratic statistic
///   T_SQ = sum_{i<j} dbar_ij^2 / var(dbar_ij)
/// over losses averaged across assets per period. var(dbar_ij) and the null
/// distribution come from a circular block bootstrap. The worst model
/// (largest max_j t_ij) is removed while equal predictive ability is rejected
/// at `alpha`.
McsResult model_confidence_set(const std::vector<LossSeries>& losses, const McsOptions& options = {});

}  // namespace vmem
