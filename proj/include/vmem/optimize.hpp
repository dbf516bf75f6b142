#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

namespace vmem {

struct OptimizerSettings {
    int max_iterations = 400;
    double gradient_tolerance = 1e-7;  ///< on the per-observation objective
};

struct MinimizeResult {
    std::vector<double> x;
    double value = 0.0;
    int iterations = 0;
    int evaluations = 0;
    bool converged = false;
    std::string method;
};

using Objective = std::function<double(std::span<const double>)>;

/// Unconstrained minimization of a smooth objective. Quasi-Newton (BFGS) with
/// central finite-difference gradients; when the line search stalls the
/// point is polished with a simplex search and BFGS restarted from there.
/// The objective may return +inf (or any non-finite value) to reject a point.
MinimizeResult minimize(const Objective& objective, std::vector<double> start, const OptimizerSettings& settings);

/// Central finite-difference gradient with step h_k = rel_step * max(1, |x_k|);
/// falls back to a one-sided difference when one neighbour is rejected.
std::vector<double> numeric_gradient(const Objective& objective, std::span<const double> x, double rel_step,
                                     double f0);

}  // namespace vmem
