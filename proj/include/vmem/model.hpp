#pragma once

#include "vmem/factor.hpp"
#include "vmem/panel.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace vmem {

enum class Variant {
    vmem,      ///< classical log-vMEM, no common component
    vmem_sec,  ///< vMEM with spillover effects and co-movement
};

enum class Parameterization { scalar, diagonal, clustered };

/// Which coefficients are shared across assets.
///
/// ab_groups maps each asset (in panel column order) to its (alpha, beta)
/// group 1..k1; theta_groups does the same for the loadings (vMEM-SeC only).
/// The scalar vMEM-SeC uses a single loading group, which pins theta at 1
/// through the normalization sum(theta) = n.
struct ModelSpec {
    Variant variant = Variant::vmem_sec;
    Parameterization parameterization = Parameterization::scalar;
    std::vector<std::string> tickers;
    std::vector<int> ab_groups;
    std::vector<int> theta_groups;

    /// Scalar or diagonal specification for the given assets.
    static ModelSpec make(Variant variant, Parameterization parameterization, std::vector<std::string> tickers);
    static ModelSpec clustered(Variant variant, std::vector<std::string> tickers, std::vector<int> ab_groups,
                               std::vector<int> theta_groups = {});

    std::size_t assets() const noexcept { return tickers.size(); }
    int k1() const;
    int k2() const;
    bool has_common() const noexcept { return variant == Variant::vmem_sec; }

    /// Throws Error when group maps are inconsistent with the variant.
    void validate() const;

    /// Short label, e.g. "c-vMEM-SeC".
    std::string label() const;
};

/// Relabels group ids in order of first appearance (1, 2, ...).
std::vector<int> canonical_groups(const std::vector<int>& groups);

std::string to_string(Variant variant);
std::string to_string(Parameterization parameterization);
Variant parse_variant(const std::string& text);
Parameterization parse_parameterization(const std::string& text);

/// Parses labels such as "s-vMEM", "d-vMEM-SeC" or "c-vMEM-SeC".
std::pair<Variant, Parameterization> parse_model_label(const std::string& label);

/// Full coefficient set, expanded to one entry per asset.
struct ParamSet {
    Vector alpha;
    Vector beta;
    Vector theta;  ///< loadings on the common component (vMEM-SeC)
    double delta = 0.0;
    double phi = 0.0;
    Matrix V;      ///< covariance of ln(epsilon)
    Vector m;      ///< always -diag(V)/2
    Vector x_bar;  ///< targeting mean of x
    Vector c;      ///< principal component loadings (vMEM-SeC)

    std::size_t assets() const noexcept { return static_cast<std::size_t>(alpha.size()); }

    /// Sets V and the matching unit-mean location m = -diag(V)/2.
    void set_covariance(Matrix covariance);
};

/// Maps between the free coefficients of a specification and a ParamSet.
///
/// Free vector order: alpha[1..k1], beta[1..k1], then for vMEM-SeC
/// theta[1..k2-1], delta, phi. The last loading group is implied by
/// sum(theta) = n.
class FreeLayout {
public:
    explicit FreeLayout(const ModelSpec& spec);

    std::size_t size() const noexcept { return size_; }
    std::vector<std::string> names() const;

    /// Free values read from the first member of each group.
    std::vector<double> collapse(const ParamSet& params) const;

    /// Writes alpha, beta, theta, delta, phi into `params` (other fields untouched).
    void expand(std::span<const double> free, ParamSet& params) const;

    int k1() const noexcept { return k1_; }
    int k2() const noexcept { return k2_; }
    std::size_t alpha_offset() const noexcept { return 0; }
    std::size_t beta_offset() const noexcept { return static_cast<std::size_t>(k1_); }
    std::size_t theta_offset() const noexcept { return 2 * static_cast<std::size_t>(k1_); }
    std::optional<std::size_t> delta_index() const noexcept;
    std::optional<std::size_t> phi_index() const noexcept;

private:
    ModelSpec spec_;
    int k1_ = 0;
    int k2_ = 0;
    std::vector<int> theta_group_sizes_;
    std::size_t size_ = 0;
};

enum class ConstraintKind {
    common_stationarity,          ///< |delta + phi| < 1
    common_invertibility,         ///< |phi| < 1
    idiosyncratic_stationarity,   ///< alpha_i + beta_i < 1
    spillover_stationarity,       ///< delta c_i < 1 - (alpha_i + beta_i)
    idiosyncratic_invertibility,  ///< |beta_i| < 1
};

struct ConstraintViolation {
    ConstraintKind kind;
    std::optional<std::size_t> asset;
    std::string message;
};

/// Lists every violated stationarity/invertibility condition; empty when the
/// parameter set is admissible. The vMEM variant is checked on alpha/beta only.
std::vector<ConstraintViolation> check_constraints(const ParamSet& params, const ModelSpec& spec);

/// Same conditions as check_constraints without building diagnostics.
bool admissible(const ParamSet& params, bool common) noexcept;

/// Time paths of the filter. Row t holds quantities dated t; ln_mu at row t
/// uses information through t-1 only.
struct FilterOutput {
    Matrix ln_mu;
    Matrix varsigma;
    Matrix nu;
    Vector xi;
    Vector p;
    Vector per_obs_loglik;
};

/// Expectation-targeting intercept (I - A - B) x_bar + (I - B) diag(V)/2.
Vector targeting_intercept(const Vector& alpha, const Vector& beta, const Vector& x_bar, const Matrix& V);

/// xi_t = delta p_{t-1} + phi xi_{t-1} with xi_0 = 0 and p_0 = 0.
Vector common_component(const Vector& scores, double delta, double phi);

/// Idiosyncratic recursion given a common-component path (zeros and
/// theta = 0 give the classical vMEM). Presample: varsigma_0 = x_bar + diag(V)/2,
/// nu_0 = x_bar. Fills ln_mu, varsigma, nu and copies xi.
void run_recursion(const Matrix& x, const Vector& x_bar, const Vector& alpha, const Vector& beta,
                   const Vector& theta, const Vector& xi, const Vector& diag_v, FilterOutput& out);

/// Filters the whole panel. Throws ConstraintError for inadmissible parameters.
FilterOutput filter(const VolatilityPanel& panel, const PcFactor& factor, const ModelSpec& spec,
                    const ParamSet& params);

/// Cholesky view of V used by the likelihood.
struct CovarianceFactor {
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> inverse_lower;
    double log_det = 0.0;
};

/// Throws DomainError("covariance not positive definite") when a pivot <= 1e-12.
CovarianceFactor factor_covariance(const Matrix& V);

/// Log-normal log-likelihood contributions for every row of x; returns the
/// sum over rows [0, rows).
double gaussian_log_likelihood(const Matrix& x, const Matrix& ln_mu, const Vector& m, const CovarianceFactor& cov,
                               std::size_t rows, Vector* per_obs);

/// Log-likelihood over the panel's training rows. per_obs_loglik is filled for
/// every panel row; its training entries sum to the returned value.
double log_likelihood(const VolatilityPanel& panel, FilterOutput& filter_out, const ParamSet& params);

/// One row of the per-equation representation
///   ln mu_it = x_bar_i + intercept + own_lag (x_i,t-1 - x_bar_i) + inertia (ln mu_i,t-1 - x_bar_i)
///              + sum_{j != i} spillover_j (x_j,t-1 - x_bar_j) + common xi_{t-1}
/// where intercept = (1 - beta_i) v_ii / 2 comes from the targeted constant.
struct EquationCoefficients {
    std::string ticker;
    double intercept = 0.0;
    double own_lag = 0.0;
    double inertia = 0.0;
    Vector spillover;  ///< theta_i delta c_j, zero at j == i
    double common = 0.0;
};

std::vector<EquationCoefficients> per_equation_coefficients(const ModelSpec& spec, const ParamSet& params);

/// Number of free dynamic coefficients (V is concentrated out):
/// vMEM 2 k1, vMEM-SeC 2 (k1 + 1) + (k2 - 1).
int count_parameters(const ModelSpec& spec);
int count_parameters(Variant variant, Parameterization parameterization, int n, int k1 = 0, int k2 = 0);

/// Fully parameterized vMEM-SeC including every covariance entry: n(n+7)/2 + 1.
int count_full_parameters(int n);

struct SimulatedPath {
    VolatilityPanel panel;
    Vector xi;
    Matrix ln_mu;
    Matrix varsigma;
};

/// Draws a path of length `rows` with ln(epsilon_t) ~ N(m, V). The common
/// component is driven by p_t = c'(x_t - x_bar) computed from the simulated
/// x_t itself. Presample values match filter(), so re-filtering the returned
/// panel at the same parameters reproduces xi and ln_mu.
SimulatedPath simulate(const ModelSpec& spec, const ParamSet& params, std::size_t rows, std::uint64_t seed);

}  // namespace vmem
