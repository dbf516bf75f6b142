#pragma once

#include "vmem/factor.hpp"
#include "vmem/model.hpp"
#include "vmem/optimize.hpp"
#include "vmem/panel.hpp"

#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace vmem {

struct FitOptions {
    double outer_tolerance = 1e-4;  ///< |change in maximized log-likelihood| between outer iterations
    int max_outer_iterations = 50;
    OptimizerSettings inner;
    int multistarts = 2;            ///< jittered restarts on the first outer iteration
    double jitter = 0.25;           ///< std. dev. of the restart jitter (unconstrained scale)
    std::uint64_t seed = 12345;
    int threads = 1;                ///< multistart replicas run concurrently when > 1
    bool std_errors = true;
    /// Free coefficients held at a fixed value, by FreeLayout name (e.g. "delta").
    std::vector<std::pair<std::string, double>> fixed;

    void validate() const;
};

struct FitResult {
    ModelSpec spec;
    ParamSet params;
    double loglik = 0.0;
    std::vector<double> loglik_trace;  ///< maximized log-likelihood of each accepted outer iteration
    /// Change in the maximized log-likelihood at the step that met the
    /// tolerance. A negative value means that step was discarded.
    double final_change = std::numeric_limits<double>::quiet_NaN();
    std::vector<std::string> names;    ///< free coefficients, FreeLayout order
    std::vector<double> estimates;
    std::vector<double> std_errors;    ///< sandwich SEs, NaN for fixed coefficients
    int n_free = 0;                    ///< estimated coefficients (held ones excluded)
    bool converged = false;
    int outer_iterations = 0;
    long inner_evaluations = 0;
    std::size_t train_rows = 0;
    double wall_seconds = 0.0;
    std::vector<std::string> warnings;
};

/// Maximum likelihood with the covariance concentrated out:
///  (a) V <- sample covariance of x over the training rows,
///  (b) maximize the log-likelihood over the free coefficients at fixed V,
///  (c) log-residuals x_t - ln mu_t,
///  (d) V <- sample covariance of the log-residuals, m = -diag(V)/2,
///  (e) repeat (b)-(d) until the maximized log-likelihood changes by less than
///      outer_tolerance. When that last change is negative the previous
///      iterate is returned.
/// Stationarity/invertibility are enforced by smooth reparameterization;
/// returns converged = false with the best iterate when the outer budget runs out.
FitResult fit(const VolatilityPanel& panel, const PcFactor& factor, const ModelSpec& spec,
              const FitOptions& options = {});

struct UnivariateFit {
    double alpha = 0.0;
    double beta = 0.0;
    double theta = 0.0;
    double variance = 0.0;  ///< v_ii
    double loglik = 0.0;
    bool theta_identified = true;  ///< false when xi* is identically zero
    std::vector<double> std_errors;  ///< alpha, beta[, theta]
    Matrix covariance;               ///< sandwich covariance, same order
    bool converged = false;
};

/// Univariate MEM-SeC for one series (training rows) with xi* as a known
/// regressor; theta is unrestricted. With xi* == 0 this is the univariate
/// log-MEM and theta is not estimated.
UnivariateFit fit_univariate_mem_sec(const Vector& x, const Vector& xi_star, const FitOptions& options = {});

struct SandwichResult {
    Matrix covariance;  ///< H^-1 S H^-1
    Matrix hessian;     ///< negative Hessian of the total log-likelihood
    Matrix outer;       ///< sum_t s_t s_t'
    std::vector<double> std_errors;
    std::vector<double> hessian_std_errors;  ///< sqrt(diag(H^-1)), for comparison
};

using PerObservation = std::function<Vector(std::span<const double>)>;

/// Sandwich covariance from central finite differences of per-observation
/// log-likelihood contributions; step h = 1e-4 max(1, |theta_k|). Throws
/// EstimationError when the Hessian is numerically singular.
SandwichResult sandwich_covariance(const PerObservation& per_obs, std::span<const double> theta);

/// Robust standard errors of the free coefficients of `spec` at `params`
/// (V held at params.V), in FreeLayout order.
std::vector<double> sandwich_std_errors(const VolatilityPanel& panel, const PcFactor& factor, const ModelSpec& spec,
                                        const ParamSet& params);

/// Training-window sample covariance (divisor = number of rows) of the
/// columns of `values`.
Matrix sample_covariance(const Matrix& values);

}  // namespace vmem
