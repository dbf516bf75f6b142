#include "vmem/model.hpp"

#include "vmem/error.hpp"
#include "vmem/kernels/kernels.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <set>

namespace vmem {

// ---------------------------------------------------------------------------
// ModelSpec

namespace {

int max_group(const std::vector<int>& groups) {
    return groups.empty() ? 0 : *std::max_element(groups.begin(), groups.end());
}

void check_groups(const std::vector<int>& groups, std::size_t n, const char* what) {
    if (groups.size() != n)
        throw Error(fmt::format("{} map has {} entries for {} assets", what, groups.size(), n));
    const int k = max_group(groups);
    std::set<int> seen(groups.begin(), groups.end());
    if (*seen.begin() < 1 || static_cast<int>(seen.size()) != k)
        throw Error(fmt::format("{} group ids must be contiguous from 1", what));
}

std::vector<int> identity_groups(std::size_t n) {
    std::vector<int> g(n);
    for (std::size_t i = 0; i < n; ++i) g[i] = static_cast<int>(i) + 1;
    return g;
}

}  // namespace

ModelSpec ModelSpec::make(Variant variant, Parameterization parameterization, std::vector<std::string> tickers) {
    if (parameterization == Parameterization::clustered)
        throw Error("clustered specifications need explicit group maps");
    ModelSpec spec;
    spec.variant = variant;
    spec.parameterization = parameterization;
    const std::size_t n = tickers.size();
    spec.tickers = std::move(tickers);
    spec.ab_groups = parameterization == Parameterization::scalar ? std::vector<int>(n, 1) : identity_groups(n);
    if (variant == Variant::vmem_sec) spec.theta_groups = spec.ab_groups;
    spec.validate();
    return spec;
}

ModelSpec ModelSpec::clustered(Variant variant, std::vector<std::string> tickers, std::vector<int> ab_groups,
                               std::vector<int> theta_groups) {
    ModelSpec spec;
    spec.variant = variant;
    spec.parameterization = Parameterization::clustered;
    spec.tickers = std::move(tickers);
    spec.ab_groups = std::move(ab_groups);
    spec.theta_groups = variant == Variant::vmem_sec ? std::move(theta_groups) : std::vector<int>{};
    spec.validate();
    return spec;
}

int ModelSpec::k1() const { return max_group(ab_groups); }
int ModelSpec::k2() const { return has_common() ? max_group(theta_groups) : 0; }

void ModelSpec::validate() const {
    const std::size_t n = tickers.size();
    if (n == 0) throw Error("model specification has no assets");
    check_groups(ab_groups, n, "(alpha, beta)");
    if (has_common()) {
        check_groups(theta_groups, n, "theta");
    } else if (!theta_groups.empty()) {
        throw Error("the vMEM variant has no loading groups");
    }
    if (parameterization == Parameterization::scalar) {
        if (k1() != 1) throw Error("scalar parameterization needs a single (alpha, beta) group");
        if (has_common() && k2() != 1) throw Error("scalar vMEM-SeC fixes theta at 1 (single loading group)");
    }
    if (parameterization == Parameterization::diagonal) {
        if (static_cast<std::size_t>(k1()) != n) throw Error("diagonal parameterization needs one group per asset");
        if (has_common() && static_cast<std::size_t>(k2()) != n)
            throw Error("diagonal vMEM-SeC needs one loading group per asset");
    }
}

std::string ModelSpec::label() const {
    const char prefix = parameterization == Parameterization::scalar     ? 's'
                        : parameterization == Parameterization::diagonal ? 'd'
                                                                          : 'c';
    return fmt::format("{}-{}", prefix, variant == Variant::vmem ? "vMEM" : "vMEM-SeC");
}

std::vector<int> canonical_groups(const std::vector<int>& groups) {
    std::vector<int> out(groups.size());
    std::vector<std::pair<int, int>> mapping;
    for (std::size_t i = 0; i < groups.size(); ++i) {
        auto it = std::find_if(mapping.begin(), mapping.end(), [&](const auto& p) { return p.first == groups[i]; });
        if (it == mapping.end()) {
            mapping.emplace_back(groups[i], static_cast<int>(mapping.size()) + 1);
            it = mapping.end() - 1;
        }
        out[i] = it->second;
    }
    return out;
}

std::string to_string(Variant variant) { return variant == Variant::vmem ? "vmem" : "vmem-sec"; }

std::string to_string(Parameterization p) {
    switch (p) {
        case Parameterization::scalar: return "scalar";
        case Parameterization::diagonal: return "diagonal";
        case Parameterization::clustered: return "clustered";
    }
    return "?";
}

Variant parse_variant(const std::string& text) {
    if (text == "vmem" || text == "vMEM") return Variant::vmem;
    if (text == "vmem-sec" || text == "vMEM-SeC") return Variant::vmem_sec;
    throw Error("unknown model variant '" + text + "' (expected vmem or vmem-sec)");
}

Parameterization parse_parameterization(const std::string& text) {
    if (text == "scalar") return Parameterization::scalar;
    if (text == "diagonal") return Parameterization::diagonal;
    if (text == "clustered") return Parameterization::clustered;
    throw Error("unknown parameterization '" + text + "' (expected scalar, diagonal or clustered)");
}

std::pair<Variant, Parameterization> parse_model_label(const std::string& label) {
    if (label.size() < 6 || label[1] != '-') throw Error("malformed model label '" + label + "'");
    Parameterization p;
    switch (label[0]) {
        case 's': p = Parameterization::scalar; break;
        case 'd': p = Parameterization::diagonal; break;
        case 'c': p = Parameterization::clustered; break;
        default: throw Error("malformed model label '" + label + "'");
    }
    return {parse_variant(label.substr(2)), p};
}

// ---------------------------------------------------------------------------
// ParamSet / FreeLayout

void ParamSet::set_covariance(Matrix covariance) {
    V = std::move(covariance);
    m = -0.5 * V.diagonal();
}

FreeLayout::FreeLayout(const ModelSpec& spec) : spec_(spec) {
    spec_.validate();
    k1_ = spec_.k1();
    k2_ = spec_.k2();
    size_ = 2 * static_cast<std::size_t>(k1_);
    if (spec_.has_common()) {
        theta_group_sizes_.assign(static_cast<std::size_t>(k2_), 0);
        for (int g : spec_.theta_groups) ++theta_group_sizes_[static_cast<std::size_t>(g - 1)];
        size_ += static_cast<std::size_t>(k2_ - 1) + 2;
    }
}

std::optional<std::size_t> FreeLayout::delta_index() const noexcept {
    if (!spec_.has_common()) return std::nullopt;
    return size_ - 2;
}

std::optional<std::size_t> FreeLayout::phi_index() const noexcept {
    if (!spec_.has_common()) return std::nullopt;
    return size_ - 1;
}

std::vector<std::string> FreeLayout::names() const {
    std::vector<std::string> out;
    for (int g = 1; g <= k1_; ++g) out.push_back(fmt::format("alpha[{}]", g));
    for (int g = 1; g <= k1_; ++g) out.push_back(fmt::format("beta[{}]", g));
    if (spec_.has_common()) {
        for (int g = 1; g < k2_; ++g) out.push_back(fmt::format("theta[{}]", g));
        out.push_back("delta");
        out.push_back("phi");
    }
    return out;
}

std::vector<double> FreeLayout::collapse(const ParamSet& params) const {
    const std::size_t n = spec_.assets();
    if (params.assets() != n) throw Error("parameter set size does not match the specification");
    std::vector<double> free(size_, 0.0);
    std::vector<bool> seen_ab(static_cast<std::size_t>(k1_), false);
    for (std::size_t i = 0; i < n; ++i) {
        const auto g = static_cast<std::size_t>(spec_.ab_groups[i] - 1);
        if (seen_ab[g]) continue;
        seen_ab[g] = true;
        free[g] = params.alpha(static_cast<Eigen::Index>(i));
        free[static_cast<std::size_t>(k1_) + g] = params.beta(static_cast<Eigen::Index>(i));
    }
    if (spec_.has_common()) {
        std::vector<bool> seen_theta(static_cast<std::size_t>(k2_), false);
        for (std::size_t i = 0; i < n; ++i) {
            const auto g = static_cast<std::size_t>(spec_.theta_groups[i] - 1);
            if (seen_theta[g] || g + 1 == static_cast<std::size_t>(k2_)) continue;
            seen_theta[g] = true;
            free[theta_offset() + g] = params.theta(static_cast<Eigen::Index>(i));
        }
        free[*delta_index()] = params.delta;
        free[*phi_index()] = params.phi;
    }
    return free;
}

void FreeLayout::expand(std::span<const double> free, ParamSet& params) const {
    if (free.size() != size_)
        throw Error(fmt::format("expected {} free parameters, got {}", size_, free.size()));
    const std::size_t n = spec_.assets();
    params.alpha.resize(static_cast<Eigen::Index>(n));
    params.beta.resize(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
        const auto g = static_cast<std::size_t>(spec_.ab_groups[i] - 1);
        params.alpha(static_cast<Eigen::Index>(i)) = free[g];
        params.beta(static_cast<Eigen::Index>(i)) = free[static_cast<std::size_t>(k1_) + g];
    }
    if (!spec_.has_common()) {
        params.theta = Vector::Zero(static_cast<Eigen::Index>(n));
        params.delta = 0.0;
        params.phi = 0.0;
        return;
    }
    const auto last = static_cast<std::size_t>(k2_ - 1);
    double weighted = 0.0;
    for (std::size_t g = 0; g < last; ++g) weighted += static_cast<double>(theta_group_sizes_[g]) * free[theta_offset() + g];
    const double implied = (static_cast<double>(n) - weighted) / static_cast<double>(theta_group_sizes_[last]);
    params.theta.resize(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
        const auto g = static_cast<std::size_t>(spec_.theta_groups[i] - 1);
        params.theta(static_cast<Eigen::Index>(i)) = g == last ? implied : free[theta_offset() + g];
    }
    params.delta = free[*delta_index()];
    params.phi = free[*phi_index()];
}

// ---------------------------------------------------------------------------
// Constraints

std::vector<ConstraintViolation> check_constraints(const ParamSet& params, const ModelSpec& spec) {
    std::vector<ConstraintViolation> out;
    const std::size_t n = params.assets();
    if (static_cast<std::size_t>(params.beta.size()) != n)
        throw Error("alpha and beta have different lengths");
    const bool common = spec.has_common();
    if (common && static_cast<std::size_t>(params.c.size()) != n)
        throw Error("vMEM-SeC constraints need the principal component loadings c");

    if (common) {
        if (!(std::abs(params.delta + params.phi) < 1.0))
            out.push_back({ConstraintKind::common_stationarity, std::nullopt,
                           fmt::format("stationarity of common component: |delta + phi| = {} >= 1",
                                       std::abs(params.delta + params.phi))});
        if (!(std::abs(params.phi) < 1.0))
            out.push_back({ConstraintKind::common_invertibility, std::nullopt,
                           fmt::format("invertibility of common component: |phi| = {} >= 1", std::abs(params.phi))});
    }
    for (std::size_t i = 0; i < n; ++i) {
        const auto k = static_cast<Eigen::Index>(i);
        const double persistence = params.alpha(k) + params.beta(k);
        if (!(persistence < 1.0))
            out.push_back({ConstraintKind::idiosyncratic_stationarity, i,
                           fmt::format("stationarity of idiosyncratic component {}: alpha + beta = {} >= 1", i,
                                       persistence)});
        if (common && !(params.delta * params.c(k) < 1.0 - persistence))
            out.push_back({ConstraintKind::spillover_stationarity, i,
                           fmt::format("stationarity with spillover for asset {}: delta*c = {} >= 1 - (alpha + beta) = {}",
                                       i, params.delta * params.c(k), 1.0 - persistence)});
        if (!(std::abs(params.beta(k)) < 1.0))
            out.push_back({ConstraintKind::idiosyncratic_invertibility, i,
                           fmt::format("invertibility of idiosyncratic component {}: |beta| = {} >= 1", i,
                                       std::abs(params.beta(k)))});
    }
    return out;
}

bool admissible(const ParamSet& params, bool common) noexcept {
    if (common && !(std::abs(params.delta + params.phi) < 1.0 && std::abs(params.phi) < 1.0)) return false;
    for (Eigen::Index i = 0; i < params.alpha.size(); ++i) {
        const double persistence = params.alpha(i) + params.beta(i);
        if (!(persistence < 1.0) || !(std::abs(params.beta(i)) < 1.0)) return false;
        if (common && !(params.delta * params.c(i) < 1.0 - persistence)) return false;
    }
    return true;
}

namespace {

void require_admissible(const ParamSet& params, const ModelSpec& spec) {
    const auto violations = check_constraints(params, spec);
    if (violations.empty()) return;
    std::string msg = "parameter set violates constraints:";
    for (const auto& v : violations) msg += "\n  " + v.message;
    throw ConstraintError(msg);
}

void require_dimensions(const ParamSet& params, std::size_t n, bool common) {
    auto check = [&](Eigen::Index size, const char* name) {
        if (static_cast<std::size_t>(size) != n)
            throw Error(fmt::format("parameter '{}' has length {}, expected {}", name, size, n));
    };
    check(params.alpha.size(), "alpha");
    check(params.beta.size(), "beta");
    check(params.x_bar.size(), "x_bar");
    check(params.m.size(), "m");
    if (static_cast<std::size_t>(params.V.rows()) != n || static_cast<std::size_t>(params.V.cols()) != n)
        throw Error("covariance V has the wrong shape");
    if (common) {
        check(params.theta.size(), "theta");
        check(params.c.size(), "c");
    }
}

}  // namespace

// ---------------------------------------------------------------------------
// Filter

Vector targeting_intercept(const Vector& alpha, const Vector& beta, const Vector& x_bar, const Matrix& V) {
    if (alpha.size() != beta.size() || alpha.size() != x_bar.size() || V.rows() != alpha.size())
        throw Error("targeting_intercept: dimension mismatch");
    const auto one = Vector::Ones(alpha.size()).array();
    return ((one - alpha.array() - beta.array()) * x_bar.array() +
            (one - beta.array()) * V.diagonal().array() / 2.0)
        .matrix();
}

Vector common_component(const Vector& scores, double delta, double phi) {
    Vector xi(scores.size());
    double prev_xi = 0.0;
    double prev_p = 0.0;
    for (Eigen::Index t = 0; t < scores.size(); ++t) {
        const double value = delta * prev_p + phi * prev_xi;
        xi(t) = value;
        prev_xi = value;
        prev_p = scores(t);
    }
    return xi;
}

void run_recursion(const Matrix& x, const Vector& x_bar, const Vector& alpha, const Vector& beta,
                   const Vector& theta, const Vector& xi, const Vector& diag_v, FilterOutput& out) {
    const Eigen::Index T = x.rows();
    const Eigen::Index n = x.cols();
    const Vector omega = ((Vector::Ones(n) - alpha - beta).array() * x_bar.array() +
                          (Vector::Ones(n) - beta).array() * diag_v.array() / 2.0)
                             .matrix();
    out.ln_mu.resize(T, n);
    out.varsigma.resize(T, n);
    out.nu.resize(T, n);
    out.xi = xi;

    Vector nu = x_bar;
    Vector varsigma = x_bar + diag_v / 2.0;
    Vector ln_mu(n);
    Vector x_row(n);
    const auto& k = kernels::active();
    for (Eigen::Index t = 0; t < T; ++t) {
        x_row = x.row(t).transpose();
        k.recursion_step({static_cast<std::size_t>(n), omega.data(), alpha.data(), beta.data(), theta.data(), xi(t),
                          x_row.data(), nu.data(), varsigma.data(), ln_mu.data()});
        out.varsigma.row(t) = varsigma.transpose();
        out.ln_mu.row(t) = ln_mu.transpose();
        out.nu.row(t) = nu.transpose();
    }
}

FilterOutput filter(const VolatilityPanel& panel, const PcFactor& factor, const ModelSpec& spec,
                    const ParamSet& params) {
    const std::size_t n = panel.assets();
    if (spec.assets() != n) throw Error("specification and panel have different numbers of assets");
    require_dimensions(params, n, spec.has_common());
    require_admissible(params, spec);

    FilterOutput out;
    const auto T = static_cast<Eigen::Index>(panel.rows());
    if (spec.has_common()) {
        if (factor.scores.size() != T) throw Error("factor scores do not cover the panel rows");
        out.p = factor.scores;
        const Vector xi = common_component(factor.scores, params.delta, params.phi);
        run_recursion(panel.x(), params.x_bar, params.alpha, params.beta, params.theta, xi, params.V.diagonal(), out);
    } else {
        out.p = Vector::Zero(T);
        run_recursion(panel.x(), params.x_bar, params.alpha, params.beta, Vector::Zero(static_cast<Eigen::Index>(n)),
                      Vector::Zero(T), params.V.diagonal(), out);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Likelihood

CovarianceFactor factor_covariance(const Matrix& V) {
    if (V.rows() != V.cols() || V.rows() == 0) throw Error("covariance must be a non-empty square matrix");
    if (!V.allFinite()) throw DomainError("covariance not positive definite (non-finite entries)");
    Eigen::LLT<Matrix> llt(V);
    const Matrix L = llt.matrixL();
    if (llt.info() != Eigen::Success) throw DomainError("covariance not positive definite");
    for (Eigen::Index i = 0; i < L.rows(); ++i)
        if (!(L(i, i) * L(i, i) > 1e-12))
            throw DomainError(fmt::format("covariance not positive definite (pivot {} = {})", i, L(i, i) * L(i, i)));
    CovarianceFactor f;
    f.log_det = 2.0 * L.diagonal().array().log().sum();
    const Matrix inv = L.triangularView<Eigen::Lower>().solve(Matrix::Identity(V.rows(), V.cols()));
    f.inverse_lower = inv.triangularView<Eigen::Lower>();
    return f;
}

double gaussian_log_likelihood(const Matrix& x, const Matrix& ln_mu, const Vector& m, const CovarianceFactor& cov,
                               std::size_t rows, Vector* per_obs) {
    const Eigen::Index T = x.rows();
    const Eigen::Index n = x.cols();
    const Matrix resid = (x - ln_mu).rowwise() - m.transpose();
    Vector quad(T);
    kernels::active().whitened_sq_norms(static_cast<std::size_t>(T), static_cast<std::size_t>(n),
                                        cov.inverse_lower.data(), resid.data(), static_cast<std::size_t>(T),
                                        quad.data());
    const double constant = -0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi) - 0.5 * cov.log_det;
    const Vector contributions = (constant - x.rowwise().sum().array() - 0.5 * quad.array()).matrix();
    if (per_obs) *per_obs = contributions;
    return contributions.head(static_cast<Eigen::Index>(rows)).sum();
}

double log_likelihood(const VolatilityPanel& panel, FilterOutput& filter_out, const ParamSet& params) {
    if (filter_out.ln_mu.rows() != panel.x().rows() || filter_out.ln_mu.cols() != panel.x().cols())
        throw Error("filter output does not match the panel shape");
    const CovarianceFactor cov = factor_covariance(params.V);
    return gaussian_log_likelihood(panel.x(), filter_out.ln_mu, params.m, cov, panel.train_rows(),
                                   &filter_out.per_obs_loglik);
}

// ---------------------------------------------------------------------------

std::vector<EquationCoefficients> per_equation_coefficients(const ModelSpec& spec, const ParamSet& params) {
    if (!spec.has_common())
        throw Error("per-equation coefficients are defined for the vMEM-SeC variant only");
    const std::size_t n = params.assets();
    require_dimensions(params, n, true);
    std::vector<EquationCoefficients> rows;
    rows.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto k = static_cast<Eigen::Index>(i);
        EquationCoefficients eq;
        eq.ticker = i < spec.tickers.size() ? spec.tickers[i] : fmt::format("{}", i + 1);
        eq.intercept = (1.0 - params.beta(k)) * params.V(k, k) / 2.0;
        eq.own_lag = params.alpha(k) + params.theta(k) * params.delta * params.c(k);
        eq.inertia = params.beta(k);
        eq.spillover = params.theta(k) * params.delta * params.c;
        eq.spillover(k) = 0.0;
        eq.common = (params.phi - params.alpha(k) - params.beta(k)) * params.theta(k);
        rows.push_back(std::move(eq));
    }
    return rows;
}

// ---------------------------------------------------------------------------

int count_parameters(Variant variant, Parameterization parameterization, int n, int k1, int k2) {
    switch (parameterization) {
        case Parameterization::scalar: k1 = 1; k2 = 1; break;
        case Parameterization::diagonal: k1 = n; k2 = n; break;
        case Parameterization::clustered: break;
    }
    if (variant == Variant::vmem) return 2 * k1;
    return 2 * (k1 + 1) + (k2 - 1);
}

int count_parameters(const ModelSpec& spec) {
    return count_parameters(spec.variant, spec.parameterization, static_cast<int>(spec.assets()), spec.k1(),
                            spec.k2());
}

int count_full_parameters(int n) { return n * (n + 7) / 2 + 1; }

// ---------------------------------------------------------------------------

SimulatedPath simulate(const ModelSpec& spec, const ParamSet& params, std::size_t rows, std::uint64_t seed) {
    const std::size_t n = spec.assets();
    require_dimensions(params, n, spec.has_common());
    require_admissible(params, spec);
    if (rows < 2) throw Error("simulation needs at least 2 rows");

    Eigen::LLT<Matrix> llt(params.V);
    if (llt.info() != Eigen::Success) throw DomainError("covariance not positive definite");
    const Matrix L = llt.matrixL();

    const auto N = static_cast<Eigen::Index>(n);
    const auto T = static_cast<Eigen::Index>(rows);
    const bool common = spec.has_common();
    const Vector theta = common ? params.theta : Vector::Zero(N);
    const Vector c = common ? params.c : Vector::Zero(N);
    const Vector omega = targeting_intercept(params.alpha, params.beta, params.x_bar, params.V);

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);

    Matrix x(T, N);
    Vector xi_path(T);
    Matrix ln_mu_path(T, N);
    Matrix varsigma_path(T, N);
    Vector nu = params.x_bar;
    Vector varsigma = params.x_bar + params.V.diagonal() / 2.0;
    Vector ln_mu(N);
    Vector x_row(N);
    Vector z(N);
    double prev_xi = 0.0;
    double prev_p = 0.0;
    const auto& k = kernels::active();
    for (Eigen::Index t = 0; t < T; ++t) {
        const double xi = common ? params.delta * prev_p + params.phi * prev_xi : 0.0;
        for (Eigen::Index i = 0; i < N; ++i) z(i) = normal(rng);
        const Vector ln_eps = params.m + L * z;
        // ln_mu_t does not depend on x_t: step with a zero observation, which
        // leaves nu = -theta xi, then add the drawn x_t (bitwise x_t - theta xi).
        x_row.setZero();
        k.recursion_step({n, omega.data(), params.alpha.data(), params.beta.data(), theta.data(), xi, x_row.data(),
                          nu.data(), varsigma.data(), ln_mu.data()});
        x_row = ln_mu + ln_eps;
        nu += x_row;
        x.row(t) = x_row.transpose();
        xi_path(t) = xi;
        ln_mu_path.row(t) = ln_mu.transpose();
        varsigma_path.row(t) = varsigma.transpose();
        if (common) {
            double p = 0.0;
            k.centered_projection(1, n, x_row.data(), 1, params.x_bar.data(), c.data(), &p);
            prev_p = p;
        }
        prev_xi = xi;
    }

    std::vector<std::string> tickers = spec.tickers;
    std::vector<Date> dates;
    dates.reserve(rows);
    const std::chrono::sys_days start = std::chrono::year{2000} / std::chrono::January / 3;
    for (std::size_t t = 0; t < rows; ++t) dates.emplace_back(start + std::chrono::days{static_cast<int>(t)});
    return SimulatedPath{VolatilityPanel::from_logs(std::move(tickers), std::move(dates), std::move(x), rows),
                         std::move(xi_path), std::move(ln_mu_path), std::move(varsigma_path)};
}

}  // namespace vmem
