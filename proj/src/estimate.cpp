#include "vmem/estimate.hpp"

#include "vmem/error.hpp"

#include <fmt/format.h>

#include <Eigen/Eigenvalues>

#include <chrono>
#include <cmath>
#include <future>
#include <limits>
#include <optional>
#include <random>

namespace vmem {

void FitOptions::validate() const {
    if (!(outer_tolerance > 0.0)) throw Error("outer_tolerance must be positive");
    if (max_outer_iterations < 1) throw Error("max_outer_iterations must be at least 1");
    if (inner.max_iterations < 1) throw Error("inner max_iterations must be at least 1");
    if (!(inner.gradient_tolerance > 0.0)) throw Error("inner gradient_tolerance must be positive");
    if (multistarts < 0) throw Error("multistarts must be non-negative");
}

Matrix sample_covariance(const Matrix& values) {
    if (values.rows() < 2) throw Error("sample covariance needs at least 2 rows");
    const Matrix centered = values.rowwise() - values.colwise().mean();
    return (centered.transpose() * centered) / static_cast<double>(values.rows());
}

namespace {

double logistic(double z) { return 1.0 / (1.0 + std::exp(-z)); }

double logit(double p) {
    p = std::clamp(p, 1e-9, 1.0 - 1e-9);
    return std::log(p / (1.0 - p));
}

// ---------------------------------------------------------------------------
// Smooth maps from R^k onto the admissible region.
//   beta  = tanh(b)                    (|beta| < 1)
//   alpha = logistic(a) (1 - beta)     (0 < alpha < 1 - beta)
//   phi   = tanh(f)                    (|phi| < 1)
//   delta = 2 logistic(d) - 1 - phi    (|delta + phi| < 1)
// Loadings are unrestricted. delta c_i < 1 - alpha_i - beta_i is checked
// when the likelihood is evaluated.

enum class Role { alpha, beta, free, delta, phi };

struct Coordinate {
    Role role;
    std::size_t partner = 0;  // beta index for alpha, phi index for delta
};

class Reparameterization {
public:
    Reparameterization(std::vector<Coordinate> coords, std::vector<std::optional<double>> fixed)
        : coords_(std::move(coords)), fixed_(std::move(fixed)) {
        slot_.assign(coords_.size(), kNone);
        for (std::size_t k = 0; k < coords_.size(); ++k) {
            if (!fixed_[k]) {
                slot_[k] = free_.size();
                free_.push_back(k);
            }
        }
    }

    std::size_t full_size() const noexcept { return coords_.size(); }
    std::size_t free_size() const noexcept { return free_.size(); }
    const std::vector<std::size_t>& free_indices() const noexcept { return free_; }

    std::vector<double> natural(std::span<const double> u) const {
        std::vector<double> theta(coords_.size(), 0.0);
        for (int pass = 0; pass < 2; ++pass) {
            for (std::size_t k = 0; k < coords_.size(); ++k) {
                const Role role = coords_[k].role;
                const bool dependent = role == Role::alpha || role == Role::delta;
                if ((pass == 0) == dependent) continue;
                if (fixed_[k]) {
                    theta[k] = *fixed_[k];
                    continue;
                }
                const double z = u[slot_[k]];
                switch (role) {
                    case Role::beta:
                    case Role::phi: theta[k] = std::tanh(z); break;
                    case Role::free: theta[k] = z; break;
                    case Role::alpha: theta[k] = logistic(z) * (1.0 - theta[coords_[k].partner]); break;
                    case Role::delta: theta[k] = 2.0 * logistic(z) - 1.0 - theta[coords_[k].partner]; break;
                }
            }
        }
        return theta;
    }

    std::vector<double> unconstrained(std::span<const double> theta) const {
        std::vector<double> u(free_.size(), 0.0);
        for (std::size_t s = 0; s < free_.size(); ++s) {
            const std::size_t k = free_[s];
            const double v = theta[k];
            switch (coords_[k].role) {
                case Role::beta:
                case Role::phi: u[s] = std::atanh(std::clamp(v, -1.0 + 1e-9, 1.0 - 1e-9)); break;
                case Role::free: u[s] = v; break;
                case Role::alpha: {
                    const double room = 1.0 - theta[coords_[k].partner];
                    u[s] = logit(room > 0.0 ? v / room : 0.5);
                    break;
                }
                case Role::delta: u[s] = logit((v + theta[coords_[k].partner] + 1.0) / 2.0); break;
            }
        }
        return u;
    }

    std::vector<double> full_from_free(std::span<const double> free_values) const {
        std::vector<double> theta(coords_.size(), 0.0);
        for (std::size_t k = 0; k < coords_.size(); ++k)
            theta[k] = fixed_[k] ? *fixed_[k] : free_values[slot_[k]];
        return theta;
    }

    std::vector<double> free_from_full(std::span<const double> theta) const {
        std::vector<double> out;
        out.reserve(free_.size());
        for (std::size_t k : free_) out.push_back(theta[k]);
        return out;
    }

private:
    static constexpr std::size_t kNone = static_cast<std::size_t>(-1);
    std::vector<Coordinate> coords_;
    std::vector<std::optional<double>> fixed_;
    std::vector<std::size_t> slot_;
    std::vector<std::size_t> free_;
};

struct CovState {
    Matrix V;
    Vector m;
    CovarianceFactor factor;

    explicit CovState(Matrix covariance)
        : V(std::move(covariance)), m(-0.5 * V.diagonal()), factor(factor_covariance(V)) {}
};

class Problem {
public:
    virtual ~Problem() = default;
    virtual const Reparameterization& transform() const = 0;
    virtual std::size_t rows() const = 0;
    virtual Matrix initial_covariance() const = 0;
    /// Training-row log-likelihood, nullopt outside the admissible region.
    virtual std::optional<double> loglik(std::span<const double> theta, const CovState& cov,
                                         Vector* per_obs) const = 0;
    virtual Matrix log_residuals(std::span<const double> theta, const CovState& cov) const = 0;
};

// ---------------------------------------------------------------------------

class PanelProblem final : public Problem {
public:
    PanelProblem(const VolatilityPanel& panel, const PcFactor& factor, const ModelSpec& spec,
                 const std::vector<std::optional<double>>& fixed)
        : spec_(spec), layout_(spec), transform_(coordinates(layout_, spec), fixed) {
        rows_ = panel.train_rows();
        x_ = panel.x().topRows(static_cast<Eigen::Index>(rows_));
        params_.x_bar = panel.x_bar();
        if (spec.has_common()) {
            if (factor.scores.size() != static_cast<Eigen::Index>(panel.rows()) ||
                factor.loadings.size() != static_cast<Eigen::Index>(panel.assets()))
                throw Error("factor does not match the panel");
            scores_ = factor.scores.head(static_cast<Eigen::Index>(rows_));
            params_.c = factor.loadings;
        }
    }

    const Reparameterization& transform() const override { return transform_; }
    std::size_t rows() const override { return rows_; }
    Matrix initial_covariance() const override { return sample_covariance(x_); }
    const FreeLayout& layout() const { return layout_; }

    std::optional<double> loglik(std::span<const double> theta, const CovState& cov, Vector* per_obs) const override {
        FilterOutput out;
        if (!run(theta, cov, out)) return std::nullopt;
        const double ll = gaussian_log_likelihood(x_, out.ln_mu, cov.m, cov.factor, rows_, per_obs);
        if (!std::isfinite(ll)) return std::nullopt;
        return ll;
    }

    Matrix log_residuals(std::span<const double> theta, const CovState& cov) const override {
        FilterOutput out;
        if (!run(theta, cov, out)) throw EstimationError("log-residuals requested at an inadmissible point");
        return x_ - out.ln_mu;
    }

    ParamSet params_at(std::span<const double> theta, const Matrix& V) const {
        ParamSet p = params_;
        layout_.expand(theta, p);
        p.set_covariance(V);
        return p;
    }

private:
    static std::vector<Coordinate> coordinates(const FreeLayout& layout, const ModelSpec& spec) {
        std::vector<Coordinate> coords(layout.size(), Coordinate{Role::free});
        for (int g = 0; g < layout.k1(); ++g) {
            coords[layout.alpha_offset() + static_cast<std::size_t>(g)] =
                Coordinate{Role::alpha, layout.beta_offset() + static_cast<std::size_t>(g)};
            coords[layout.beta_offset() + static_cast<std::size_t>(g)] = Coordinate{Role::beta};
        }
        if (spec.has_common()) {
            coords[*layout.phi_index()] = Coordinate{Role::phi};
            coords[*layout.delta_index()] = Coordinate{Role::delta, *layout.phi_index()};
        }
        return coords;
    }

    bool run(std::span<const double> theta, const CovState& cov, FilterOutput& out) const {
        ParamSet p = params_;
        layout_.expand(theta, p);
        if (!admissible(p, spec_.has_common())) return false;
        const Vector diag_v = cov.V.diagonal();
        if (spec_.has_common()) {
            const Vector xi = common_component(scores_, p.delta, p.phi);
            run_recursion(x_, p.x_bar, p.alpha, p.beta, p.theta, xi, diag_v, out);
        } else {
            run_recursion(x_, p.x_bar, p.alpha, p.beta, Vector::Zero(x_.cols()),
                          Vector::Zero(static_cast<Eigen::Index>(rows_)), diag_v, out);
        }
        return out.ln_mu.allFinite();
    }

    ModelSpec spec_;
    FreeLayout layout_;
    Reparameterization transform_;
    std::size_t rows_ = 0;
    Matrix x_;
    Vector scores_;
    ParamSet params_;
};

// ---------------------------------------------------------------------------

class UnivariateProblem final : public Problem {
public:
    UnivariateProblem(const Vector& x, const Vector& xi_star, bool with_theta)
        : transform_(coordinates(with_theta), std::vector<std::optional<double>>(with_theta ? 3 : 2)),
          with_theta_(with_theta) {
        x_ = x;
        x_bar_ = Vector::Constant(1, x.mean());
        xi_ = xi_star;
    }

    const Reparameterization& transform() const override { return transform_; }
    std::size_t rows() const override { return static_cast<std::size_t>(x_.rows()); }
    Matrix initial_covariance() const override { return sample_covariance(x_); }

    std::optional<double> loglik(std::span<const double> theta, const CovState& cov, Vector* per_obs) const override {
        FilterOutput out;
        if (!run(theta, cov, out)) return std::nullopt;
        const double ll = gaussian_log_likelihood(x_, out.ln_mu, cov.m, cov.factor, rows(), per_obs);
        if (!std::isfinite(ll)) return std::nullopt;
        return ll;
    }

    Matrix log_residuals(std::span<const double> theta, const CovState& cov) const override {
        FilterOutput out;
        if (!run(theta, cov, out)) throw EstimationError("log-residuals requested at an inadmissible point");
        return x_ - out.ln_mu;
    }

private:
    static std::vector<Coordinate> coordinates(bool with_theta) {
        std::vector<Coordinate> c{{Role::alpha, 1}, {Role::beta}};
        if (with_theta) c.push_back({Role::free});
        return c;
    }

    bool run(std::span<const double> theta, const CovState& cov, FilterOutput& out) const {
        const double alpha = theta[0];
        const double beta = theta[1];
        if (!(alpha + beta < 1.0) || !(std::abs(beta) < 1.0)) return false;
        const Vector a = Vector::Constant(1, alpha);
        const Vector b = Vector::Constant(1, beta);
        const Vector loading = Vector::Constant(1, with_theta_ ? theta[2] : 0.0);
        run_recursion(x_, x_bar_, a, b, loading, xi_, cov.V.diagonal(), out);
        return out.ln_mu.allFinite();
    }

    Reparameterization transform_;
    bool with_theta_;
    Matrix x_;
    Vector x_bar_;
    Vector xi_;
};

// ---------------------------------------------------------------------------
// Outer/inner maximization

struct InnerResult {
    std::vector<double> theta;
    double loglik = -std::numeric_limits<double>::infinity();
    bool converged = false;
    long evaluations = 0;
};

Objective make_objective(const Problem& problem, const CovState& cov) {
    const double scale = 1.0 / static_cast<double>(problem.rows());
    return [&problem, &cov, scale](std::span<const double> u) {
        const auto theta = problem.transform().natural(u);
        const auto ll = problem.loglik(theta, cov, nullptr);
        return ll ? -(*ll) * scale : std::numeric_limits<double>::infinity();
    };
}

InnerResult maximize_from(const Problem& problem, const CovState& cov, const std::vector<double>& u0,
                          const FitOptions& options) {
    const Objective objective = make_objective(problem, cov);
    const MinimizeResult r = minimize(objective, u0, options.inner);
    InnerResult out;
    out.evaluations = r.evaluations;
    if (!std::isfinite(r.value) || r.value >= 1e9) return out;
    out.theta = problem.transform().natural(r.x);
    const auto ll = problem.loglik(out.theta, cov, nullptr);
    if (!ll) return out;
    out.loglik = *ll;
    out.converged = r.converged;
    return out;
}

/// Moves `u` toward `anchor` by halving until the point is admissible.
std::optional<std::vector<double>> pull_inside(const Objective& objective, std::vector<double> u,
                                               const std::vector<double>& anchor) {
    for (int attempt = 0; attempt < 40; ++attempt) {
        if (std::isfinite(objective(u))) return u;
        for (std::size_t k = 0; k < u.size(); ++k) u[k] = 0.5 * (u[k] + anchor[k]);
    }
    return std::nullopt;
}

std::vector<std::vector<double>> starting_points(const Problem& problem, const CovState& cov,
                                                 const std::vector<double>& theta0, const FitOptions& options) {
    const Objective objective = make_objective(problem, cov);
    const auto& tr = problem.transform();
    const std::vector<double> origin(tr.free_size(), 0.0);
    // The origin maps to beta = phi = delta = 0, which is admissible whenever
    // the fixed coefficients are, so it is the last-resort restart target.
    auto base = pull_inside(objective, tr.unconstrained(theta0), origin);
    if (!base) throw EstimationError("no admissible starting point (check fixed coefficients)");

    std::vector<std::vector<double>> starts{*base};
    std::mt19937_64 rng(options.seed);
    std::normal_distribution<double> normal(0.0, options.jitter);
    for (int s = 0; s < options.multistarts; ++s) {
        std::vector<double> u = *base;
        for (double& v : u) v += normal(rng);
        if (auto inside = pull_inside(objective, u, *base)) starts.push_back(*inside);
    }
    return starts;
}

InnerResult best_of(const Problem& problem, const CovState& cov, const std::vector<std::vector<double>>& starts,
                    const FitOptions& options) {
    std::vector<InnerResult> results(starts.size());
    if (options.threads > 1 && starts.size() > 1) {
        std::vector<std::future<InnerResult>> jobs;
        for (const auto& u : starts)
            jobs.push_back(std::async(std::launch::async, [&, u] { return maximize_from(problem, cov, u, options); }));
        for (std::size_t k = 0; k < jobs.size(); ++k) results[k] = jobs[k].get();
    } else {
        for (std::size_t k = 0; k < starts.size(); ++k) results[k] = maximize_from(problem, cov, starts[k], options);
    }
    InnerResult best;
    long evaluations = 0;
    for (const auto& r : results) {
        evaluations += r.evaluations;
        if (!r.theta.empty() && r.loglik > best.loglik) best = r;
    }
    best.evaluations = evaluations;
    if (best.theta.empty())
        throw EstimationError(fmt::format("inner optimizer failed from all {} starting points", starts.size()));
    return best;
}

struct OuterResult {
    std::vector<double> theta;
    Matrix V;
    double loglik = -std::numeric_limits<double>::infinity();
    std::vector<double> trace;
    double final_change = std::numeric_limits<double>::quiet_NaN();
    bool converged = false;
    int iterations = 0;
    long evaluations = 0;
};

OuterResult concentrate(const Problem& problem, const std::vector<double>& theta0, const FitOptions& options) {
    OuterResult out;
    auto cov = std::make_unique<CovState>(problem.initial_covariance());
    std::vector<double> theta = theta0;
    double previous = -std::numeric_limits<double>::infinity();
    for (int it = 1; it <= options.max_outer_iterations; ++it) {
        std::vector<std::vector<double>> starts;
        if (it == 1) {
            starts = starting_points(problem, *cov, theta, options);
        } else {
            starts.push_back(problem.transform().unconstrained(theta));
        }
        InnerResult inner = best_of(problem, *cov, starts, options);
        // The previous optimum is always a candidate, so the trace cannot drop
        // because of an inner optimizer stall.
        if (it > 1) {
            if (const auto ll_prev = problem.loglik(theta, *cov, nullptr); ll_prev && *ll_prev > inner.loglik) {
                inner.theta = theta;
                inner.loglik = *ll_prev;
            }
        }
        out.evaluations += inner.evaluations;
        out.iterations = it;
        const double change = inner.loglik - previous;
        const bool settled = std::abs(change) < options.outer_tolerance;
        if (settled) out.final_change = change;
        if (settled && change < 0.0) {
            // The covariance step is not an exact maximizer, so the last
            // step can lower the likelihood slightly; keep the better iterate.
            out.converged = true;
            break;
        }
        theta = inner.theta;
        out.trace.push_back(inner.loglik);
        if (inner.loglik >= out.loglik || it == 1) {
            out.theta = theta;
            out.V = cov->V;
            out.loglik = inner.loglik;
        }
        if (settled) {
            out.converged = true;
            break;
        }
        previous = inner.loglik;
        if (it == options.max_outer_iterations) break;
        const Matrix resid = problem.log_residuals(theta, *cov);
        cov = std::make_unique<CovState>(sample_covariance(resid));
    }
    return out;
}

PerObservation per_obs_function(const Problem& problem, const CovState& cov) {
    return [&problem, &cov](std::span<const double> free_values) {
        const auto theta = problem.transform().full_from_free(free_values);
        Vector per_obs;
        const auto ll = problem.loglik(theta, cov, &per_obs);
        if (!ll) throw EstimationError("finite-difference step left the admissible region (estimate on the boundary)");
        return Vector(per_obs.head(static_cast<Eigen::Index>(problem.rows())));
    };
}

std::vector<std::optional<double>> fixed_vector(const FreeLayout& layout, const FitOptions& options) {
    const auto names = layout.names();
    std::vector<std::optional<double>> fixed(names.size());
    for (const auto& [name, value] : options.fixed) {
        const auto it = std::find(names.begin(), names.end(), name);
        if (it == names.end()) throw Error("cannot fix unknown coefficient '" + name + "'");
        fixed[static_cast<std::size_t>(it - names.begin())] = value;
    }
    return fixed;
}

std::vector<double> default_start(const FreeLayout& layout) {
    std::vector<double> theta(layout.size(), 1.0);
    for (int g = 0; g < layout.k1(); ++g) {
        theta[layout.alpha_offset() + static_cast<std::size_t>(g)] = 0.05;
        theta[layout.beta_offset() + static_cast<std::size_t>(g)] = 0.90;
    }
    if (layout.delta_index()) {
        theta[*layout.delta_index()] = 0.05;
        theta[*layout.phi_index()] = 0.3;
    }
    return theta;
}

}  // namespace

// ---------------------------------------------------------------------------

SandwichResult sandwich_covariance(const PerObservation& per_obs, std::span<const double> theta) {
    const std::size_t p = theta.size();
    if (p == 0) return {};
    std::vector<double> point(theta.begin(), theta.end());
    std::vector<double> step(p);
    for (std::size_t k = 0; k < p; ++k) step[k] = 1e-4 * std::max(1.0, std::abs(theta[k]));

    const Vector center = per_obs(point);
    const double f0 = center.sum();
    const Eigen::Index T = center.size();

    Matrix scores(T, static_cast<Eigen::Index>(p));
    std::vector<double> f_plus(p), f_minus(p);
    for (std::size_t k = 0; k < p; ++k) {
        point[k] = theta[k] + step[k];
        const Vector up = per_obs(point);
        point[k] = theta[k] - step[k];
        const Vector down = per_obs(point);
        point[k] = theta[k];
        scores.col(static_cast<Eigen::Index>(k)) = (up - down) / (2.0 * step[k]);
        f_plus[k] = up.sum();
        f_minus[k] = down.sum();
    }

    Matrix hessian(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(p));
    for (std::size_t i = 0; i < p; ++i) {
        const auto a = static_cast<Eigen::Index>(i);
        hessian(a, a) = (f_plus[i] - 2.0 * f0 + f_minus[i]) / (step[i] * step[i]);
        for (std::size_t j = 0; j < i; ++j) {
            auto corner = [&](double si, double sj) {
                point[i] = theta[i] + si * step[i];
                point[j] = theta[j] + sj * step[j];
                const double v = per_obs(point).sum();
                point[i] = theta[i];
                point[j] = theta[j];
                return v;
            };
            const double value =
                (corner(1, 1) - corner(1, -1) - corner(-1, 1) + corner(-1, -1)) / (4.0 * step[i] * step[j]);
            const auto b = static_cast<Eigen::Index>(j);
            hessian(a, b) = value;
            hessian(b, a) = value;
        }
    }

    SandwichResult result;
    result.hessian = -hessian;
    result.outer = scores.transpose() * scores;

    Eigen::SelfAdjointEigenSolver<Matrix> eig(result.hessian);
    const Vector ev = eig.eigenvalues().cwiseAbs();
    const double condition = ev.maxCoeff() / ev.minCoeff();
    if (!result.hessian.allFinite() || !std::isfinite(condition) || condition > 1e12)
        throw EstimationError(fmt::format("Hessian is numerically singular (condition number {:.3g})", condition));

    const Matrix h_inv = result.hessian.inverse();
    result.covariance = h_inv * result.outer * h_inv;
    for (std::size_t k = 0; k < p; ++k) {
        const auto a = static_cast<Eigen::Index>(k);
        result.std_errors.push_back(std::sqrt(std::max(0.0, result.covariance(a, a))));
        result.hessian_std_errors.push_back(h_inv(a, a) > 0.0 ? std::sqrt(h_inv(a, a))
                                                              : std::numeric_limits<double>::quiet_NaN());
    }
    return result;
}

std::vector<double> sandwich_std_errors(const VolatilityPanel& panel, const PcFactor& factor, const ModelSpec& spec,
                                        const ParamSet& params) {
    const PanelProblem problem(panel, factor, spec, std::vector<std::optional<double>>(FreeLayout(spec).size()));
    const CovState cov(params.V);
    const auto theta = problem.layout().collapse(params);
    return sandwich_covariance(per_obs_function(problem, cov), theta).std_errors;
}

FitResult fit(const VolatilityPanel& panel, const PcFactor& factor, const ModelSpec& spec, const FitOptions& options) {
    const auto started = std::chrono::steady_clock::now();
    options.validate();
    spec.validate();
    if (spec.assets() != panel.assets()) throw Error("specification and panel have different numbers of assets");

    const FreeLayout layout(spec);
    const int n_free = count_parameters(spec);
    if (panel.train_rows() <= 10 * static_cast<std::size_t>(n_free))
        throw Error(fmt::format("training window of {} rows is too short for {} free coefficients (need > {})",
                                panel.train_rows(), n_free, 10 * n_free));

    const auto fixed = fixed_vector(layout, options);
    const PanelProblem problem(panel, factor, spec, fixed);
    std::vector<double> start = default_start(layout);
    for (std::size_t k = 0; k < fixed.size(); ++k)
        if (fixed[k]) start[k] = *fixed[k];

    const OuterResult outer = concentrate(problem, start, options);

    FitResult result;
    result.spec = spec;
    result.params = problem.params_at(outer.theta, outer.V);
    result.loglik = outer.loglik;
    result.loglik_trace = outer.trace;
    result.final_change = outer.final_change;
    result.names = layout.names();
    result.estimates = outer.theta;
    result.n_free = static_cast<int>(std::count_if(fixed.begin(), fixed.end(), [](const auto& f) { return !f; }));
    result.converged = outer.converged;
    result.outer_iterations = outer.iterations;
    result.inner_evaluations = outer.evaluations;
    result.train_rows = panel.train_rows();
    result.std_errors.assign(layout.size(), std::numeric_limits<double>::quiet_NaN());
    if (options.std_errors) {
        const CovState cov(outer.V);
        const auto& tr = problem.transform();
        try {
            const auto se =
                sandwich_covariance(per_obs_function(problem, cov), tr.free_from_full(outer.theta)).std_errors;
            for (std::size_t s = 0; s < se.size(); ++s) result.std_errors[tr.free_indices()[s]] = se[s];
        } catch (const EstimationError& e) {
            result.warnings.push_back(std::string("standard errors unavailable: ") + e.what());
        }
    }
    result.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return result;
}

UnivariateFit fit_univariate_mem_sec(const Vector& x, const Vector& xi_star, const FitOptions& options) {
    options.validate();
    if (x.size() != xi_star.size()) throw Error("series and xi* have different lengths");
    if (x.size() < 30) throw Error("univariate fit needs at least 30 observations");
    const double mean = x.mean();
    const double variance = (x.array() - mean).square().mean();
    if (!(variance > 1e-14)) throw EstimationError("degenerate series: zero variance");

    const bool with_theta = xi_star.cwiseAbs().maxCoeff() > 0.0;
    const UnivariateProblem problem(x, xi_star, with_theta);
    std::vector<double> start{0.05, 0.90};
    if (with_theta) start.push_back(1.0);

    const OuterResult outer = concentrate(problem, start, options);

    UnivariateFit result;
    result.alpha = outer.theta[0];
    result.beta = outer.theta[1];
    result.theta = with_theta ? outer.theta[2] : 0.0;
    result.theta_identified = with_theta;
    result.variance = outer.V(0, 0);
    result.loglik = outer.loglik;
    result.converged = outer.converged;
    if (options.std_errors) {
        const CovState cov(outer.V);
        try {
            const SandwichResult sandwich = sandwich_covariance(per_obs_function(problem, cov), outer.theta);
            result.std_errors = sandwich.std_errors;
            result.covariance = sandwich.covariance;
        } catch (const EstimationError&) {
            const auto k = static_cast<Eigen::Index>(outer.theta.size());
            result.std_errors.assign(outer.theta.size(), std::numeric_limits<double>::quiet_NaN());
            result.covariance = Matrix::Constant(k, k, std::numeric_limits<double>::quiet_NaN());
        }
    }
    return result;
}

}  // namespace vmem
