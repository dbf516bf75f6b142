#include "vmem/optimize.hpp"

#include <ceres/gradient_problem.h>
#include <ceres/gradient_problem_solver.h>
#include <gsl/gsl_errno.h>
#include <gsl/gsl_multimin.h>

#include <cmath>
#include <limits>
#include <memory>

namespace vmem {
namespace {

constexpr double kRejected = 1e10;
constexpr double kGradientStep = 1e-6;

struct Context {
    const Objective* objective = nullptr;
    int evaluations = 0;
    double best_value = std::numeric_limits<double>::infinity();
    std::vector<double> best_x;

    double eval(std::span<const double> x) {
        ++evaluations;
        const double v = (*objective)(x);
        if (!std::isfinite(v)) return std::numeric_limits<double>::infinity();
        if (v < best_value) {
            best_value = v;
            best_x.assign(x.begin(), x.end());
        }
        return v;
    }
};

class FiniteDifferenceFunction final : public ceres::FirstOrderFunction {
public:
    FiniteDifferenceFunction(Context& ctx, int size) : ctx_(ctx), size_(size) {}

    bool Evaluate(const double* parameters, double* cost, double* gradient) const override {
        const std::span<const double> x(parameters, static_cast<std::size_t>(size_));
        *cost = ctx_.eval(x);
        if (!std::isfinite(*cost)) return false;
        if (gradient) {
            const Objective counted = [this](std::span<const double> p) { return ctx_.eval(p); };
            const auto g = numeric_gradient(counted, x, kGradientStep, *cost);
            std::copy(g.begin(), g.end(), gradient);
        }
        return true;
    }

    int NumParameters() const override { return size_; }

private:
    Context& ctx_;
    int size_;
};

struct Stage {
    std::vector<double> x;
    int iterations = 0;
    bool converged = false;
};

Stage run_bfgs(Context& ctx, const std::vector<double>& start, const OptimizerSettings& settings) {
    ceres::GradientProblem problem(new FiniteDifferenceFunction(ctx, static_cast<int>(start.size())));
    ceres::GradientProblemSolver::Options options;
    options.line_search_direction_type = ceres::BFGS;
    options.line_search_type = ceres::WOLFE;
    options.max_num_iterations = settings.max_iterations;
    options.gradient_tolerance = settings.gradient_tolerance;
    options.function_tolerance = 1e-13;
    options.parameter_tolerance = 1e-11;
    options.logging_type = ceres::SILENT;
    options.minimizer_progress_to_stdout = false;

    Stage stage{start};
    ceres::GradientProblemSolver::Summary summary;
    ceres::Solve(options, problem, stage.x.data(), &summary);
    stage.iterations = static_cast<int>(summary.iterations.size());
    stage.converged = summary.termination_type == ceres::CONVERGENCE;
    return stage;
}

struct SimplexDeleter {
    void operator()(gsl_multimin_fminimizer* m) const { gsl_multimin_fminimizer_free(m); }
};
struct VectorDeleter {
    void operator()(gsl_vector* v) const { gsl_vector_free(v); }
};
using VectorPtr = std::unique_ptr<gsl_vector, VectorDeleter>;

double gsl_f(const gsl_vector* x, void* params) {
    const double v = static_cast<Context*>(params)->eval({x->data, x->size});
    return std::isfinite(v) ? v : kRejected;
}

Stage run_simplex(Context& ctx, const std::vector<double>& start, int max_iterations) {
    gsl_multimin_function fn;
    fn.n = start.size();
    fn.f = gsl_f;
    fn.params = &ctx;
    std::unique_ptr<gsl_multimin_fminimizer, SimplexDeleter> solver(
        gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, start.size()));
    VectorPtr x0(gsl_vector_alloc(start.size()));
    for (std::size_t k = 0; k < start.size(); ++k) gsl_vector_set(x0.get(), k, start[k]);
    VectorPtr steps(gsl_vector_alloc(start.size()));
    gsl_vector_set_all(steps.get(), 0.05);
    Stage stage{start};
    if (gsl_multimin_fminimizer_set(solver.get(), &fn, x0.get(), steps.get()) != GSL_SUCCESS) return stage;
    for (int it = 0; it < max_iterations; ++it) {
        stage.iterations = it + 1;
        if (gsl_multimin_fminimizer_iterate(solver.get()) != GSL_SUCCESS) break;
        if (gsl_multimin_test_size(gsl_multimin_fminimizer_size(solver.get()), 1e-9) == GSL_SUCCESS) {
            stage.converged = true;
            break;
        }
    }
    const gsl_vector* x = gsl_multimin_fminimizer_x(solver.get());
    stage.x.assign(x->data, x->data + x->size);
    return stage;
}

double gradient_norm(Context& ctx, const std::vector<double>& x) {
    const Objective counted = [&ctx](std::span<const double> p) { return ctx.eval(p); };
    const auto g = numeric_gradient(counted, x, kGradientStep, ctx.eval(x));
    double s = 0.0;
    for (double v : g) s = std::max(s, std::abs(v));
    return s;
}

}  // namespace

std::vector<double> numeric_gradient(const Objective& objective, std::span<const double> x, double rel_step,
                                     double f0) {
    std::vector<double> point(x.begin(), x.end());
    std::vector<double> grad(x.size(), 0.0);
    for (std::size_t k = 0; k < x.size(); ++k) {
        const double h = rel_step * std::max(1.0, std::abs(x[k]));
        point[k] = x[k] + h;
        const double up = objective(point);
        point[k] = x[k] - h;
        const double down = objective(point);
        point[k] = x[k];
        const bool up_ok = std::isfinite(up);
        const bool down_ok = std::isfinite(down);
        if (up_ok && down_ok) {
            grad[k] = (up - down) / (2.0 * h);
        } else if (up_ok && std::isfinite(f0)) {
            grad[k] = (up - f0) / h;
        } else if (down_ok && std::isfinite(f0)) {
            grad[k] = (f0 - down) / h;
        }
    }
    return grad;
}

MinimizeResult minimize(const Objective& objective, std::vector<double> start, const OptimizerSettings& settings) {
    static const bool handler_off = [] {
        gsl_set_error_handler_off();
        return true;
    }();
    (void)handler_off;

    Context ctx;
    ctx.objective = &objective;
    MinimizeResult result;
    if (start.empty()) {
        result.x = start;
        result.value = objective(start);
        result.converged = true;
        result.method = "none";
        return result;
    }
    if (!std::isfinite(ctx.eval(start))) {
        result.x = start;
        result.value = std::numeric_limits<double>::infinity();
        result.method = "rejected-start";
        return result;
    }

    Stage stage = run_bfgs(ctx, start, settings);
    result.method = "bfgs";
    result.iterations = stage.iterations;
    if (!stage.converged) {
        const Stage polish = run_simplex(ctx, ctx.best_x, 20 * settings.max_iterations);
        const Stage retry = run_bfgs(ctx, polish.x, settings);
        result.method = "bfgs+simplex";
        result.iterations += polish.iterations + retry.iterations;
        stage = retry;
    }
    result.x = ctx.best_x;
    result.value = ctx.best_value;
    result.converged = stage.converged || gradient_norm(ctx, result.x) < 10.0 * settings.gradient_tolerance;
    result.evaluations = ctx.evaluations;
    return result;
}

}  // namespace vmem
