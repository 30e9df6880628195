#pragma once

#include <functional>

#include <Eigen/Dense>

namespace ctsm {

using Objective = std::function<double(const Eigen::VectorXd&)>;

struct NelderMeadOptions {
    int max_iter = 5000;
    int max_evals = 20000;
    double initial_step = 0.25;
    // Converged when the simplex spread in f is below f_tol * max(1, |f_best|)
    // and every vertex lies within x_tol of the best one.
    double f_tol = 1e-7;
    double x_tol = 1e-6;
    // Dimension-dependent coefficients (Gao and Han) instead of the classic
    // (1, 2, 0.5, 0.5).
    bool adaptive = true;
};

struct OptimizerResult {
    Eigen::VectorXd x;
    double f = 0.0;
    int iterations = 0;
    int evaluations = 0;
    bool converged = false;
};

/// Minimizes f. Non-finite objective values are treated as +infinity.
OptimizerResult nelder_mead(const Objective& f, const Eigen::VectorXd& x0,
                            const NelderMeadOptions& options = {});

/// Central differences with step 1e-4 * (1 + |x_i|).
Eigen::VectorXd central_gradient(const Objective& f, const Eigen::VectorXd& x,
                                 int* evaluations = nullptr);

struct BfgsOptions {
    int max_iter = 100;
    double g_tol = 1e-6;
    double f_tol = 1e-10;
};

/// Quasi-Newton polish with central-difference gradients and a backtracking
/// Armijo line search. Never returns a point worse than x0.
OptimizerResult bfgs(const Objective& f, const Eigen::VectorXd& x0, const BfgsOptions& options = {});

}  // namespace ctsm
