#include "ctsm/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

namespace ctsm {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double safe_eval(const Objective& f, const Eigen::VectorXd& x, int& evals) {
    ++evals;
    const double v = f(x);
    return std::isfinite(v) ? v : kInf;
}

}  // namespace

OptimizerResult nelder_mead(const Objective& f, const Eigen::VectorXd& x0,
                            const NelderMeadOptions& options) {
    const int n = static_cast<int>(x0.size());
    OptimizerResult out;
    out.x = x0;
    if (n == 0) {
        out.f = safe_eval(f, x0, out.evaluations);
        out.converged = true;
        return out;
    }
    if (options.max_iter <= 0 || options.max_evals <= 1) {
        out.f = safe_eval(f, x0, out.evaluations);
        return out;
    }

    const double dim = static_cast<double>(n);
    const double reflect = 1.0;
    const double expand = options.adaptive ? 1.0 + 2.0 / dim : 2.0;
    const double contract = options.adaptive ? 0.75 - 1.0 / (2.0 * dim) : 0.5;
    const double shrink = options.adaptive ? 1.0 - 1.0 / dim : 0.5;

    std::vector<Eigen::VectorXd> simplex(static_cast<std::size_t>(n + 1), x0);
    std::vector<double> values(static_cast<std::size_t>(n + 1));
    for (int i = 0; i < n; ++i) simplex[static_cast<std::size_t>(i + 1)](i) += options.initial_step;
    for (int i = 0; i <= n; ++i)
        values[static_cast<std::size_t>(i)] = safe_eval(f, simplex[static_cast<std::size_t>(i)], out.evaluations);

    std::vector<int> order(static_cast<std::size_t>(n + 1));
    Eigen::VectorXd centroid(n);
    while (out.iterations < options.max_iter && out.evaluations < options.max_evals) {
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
            return values[static_cast<std::size_t>(a)] < values[static_cast<std::size_t>(b)];
        });
        const auto best = static_cast<std::size_t>(order.front());
        const auto worst = static_cast<std::size_t>(order.back());
        const auto second = static_cast<std::size_t>(order[static_cast<std::size_t>(n - 1)]);

        const double f_best = values[best];
        const double spread = values[worst] - f_best;
        double x_spread = 0.0;
        for (const auto& v : simplex) x_spread = std::max(x_spread, (v - simplex[best]).cwiseAbs().maxCoeff());
        if (std::isfinite(f_best) && spread <= options.f_tol * std::max(1.0, std::abs(f_best)) &&
            x_spread <= options.x_tol) {
            out.converged = true;
            break;
        }
        ++out.iterations;

        centroid.setZero();
        for (int i = 0; i <= n; ++i)
            if (static_cast<std::size_t>(i) != worst) centroid += simplex[static_cast<std::size_t>(i)];
        centroid /= dim;

        const Eigen::VectorXd xr = centroid + reflect * (centroid - simplex[worst]);
        const double fr = safe_eval(f, xr, out.evaluations);
        if (fr < f_best) {
            const Eigen::VectorXd xe = centroid + expand * (xr - centroid);
            const double fe = safe_eval(f, xe, out.evaluations);
            if (fe < fr) {
                simplex[worst] = xe;
                values[worst] = fe;
            } else {
                simplex[worst] = xr;
                values[worst] = fr;
            }
            continue;
        }
        if (fr < values[second]) {
            simplex[worst] = xr;
            values[worst] = fr;
            continue;
        }
        const bool outside = fr < values[worst];
        const Eigen::VectorXd xc = outside ? Eigen::VectorXd(centroid + contract * (xr - centroid))
                                           : Eigen::VectorXd(centroid + contract * (simplex[worst] - centroid));
        const double fc = safe_eval(f, xc, out.evaluations);
        if (fc < (outside ? fr : values[worst])) {
            simplex[worst] = xc;
            values[worst] = fc;
            continue;
        }
        for (int i = 0; i <= n; ++i) {
            const auto k = static_cast<std::size_t>(i);
            if (k == best) continue;
            simplex[k] = simplex[best] + shrink * (simplex[k] - simplex[best]);
            values[k] = safe_eval(f, simplex[k], out.evaluations);
        }
    }

    const auto it = std::min_element(values.begin(), values.end());
    const auto k = static_cast<std::size_t>(it - values.begin());
    out.x = simplex[k];
    out.f = *it;
    return out;
}

Eigen::VectorXd central_gradient(const Objective& f, const Eigen::VectorXd& x, int* evaluations) {
    const int n = static_cast<int>(x.size());
    Eigen::VectorXd g(n);
    Eigen::VectorXd xp = x;
    for (int i = 0; i < n; ++i) {
        const double h = 1e-4 * (1.0 + std::abs(x(i)));
        xp(i) = x(i) + h;
        const double fp = f(xp);
        xp(i) = x(i) - h;
        const double fm = f(xp);
        xp(i) = x(i);
        g(i) = (fp - fm) / (2.0 * h);
    }
    if (evaluations) *evaluations += 2 * n;
    return g;
}

OptimizerResult bfgs(const Objective& f, const Eigen::VectorXd& x0, const BfgsOptions& options) {
    const int n = static_cast<int>(x0.size());
    OptimizerResult out;
    out.x = x0;
    out.f = safe_eval(f, x0, out.evaluations);
    if (n == 0 || !std::isfinite(out.f)) return out;

    Eigen::MatrixXd inv_h = Eigen::MatrixXd::Identity(n, n);
    Eigen::VectorXd g = central_gradient(f, out.x, &out.evaluations);
    if (!g.allFinite()) return out;
    bool scaled = false;
    for (int it = 0; it < options.max_iter; ++it) {
        if (g.lpNorm<Eigen::Infinity>() <= options.g_tol) {
            out.converged = true;
            break;
        }
        ++out.iterations;
        Eigen::VectorXd dir = -inv_h * g;
        if (!(dir.dot(g) < 0.0)) {
            inv_h.setIdentity();
            dir = -g;
        }
        // Keep the first trial step modest in unconstrained coordinates.
        const double len = dir.norm();
        if (len > 1.0) dir /= len;

        double step = 1.0;
        double f_new = kInf;
        Eigen::VectorXd x_new;
        const double slope = dir.dot(g);
        for (int ls = 0; ls < 30; ++ls) {
            x_new = out.x + step * dir;
            f_new = safe_eval(f, x_new, out.evaluations);
            if (f_new <= out.f + 1e-4 * step * slope) break;
            step *= 0.5;
        }
        if (!(f_new < out.f)) break;

        const Eigen::VectorXd g_new = central_gradient(f, x_new, &out.evaluations);
        if (!g_new.allFinite()) break;
        const Eigen::VectorXd s = x_new - out.x;
        const Eigen::VectorXd y = g_new - g;
        const double improvement = out.f - f_new;
        out.x = x_new;
        out.f = f_new;
        g = g_new;
        const double sy = s.dot(y);
        if (sy > 1e-12 * s.norm() * y.norm()) {
            if (!scaled) {
                inv_h *= sy / y.squaredNorm();
                scaled = true;
            }
            const double rho = 1.0 / sy;
            const Eigen::MatrixXd i_rsy = Eigen::MatrixXd::Identity(n, n) - rho * s * y.transpose();
            inv_h = i_rsy * inv_h * i_rsy.transpose() + rho * s * s.transpose();
        }
        if (improvement <= options.f_tol * std::max(1.0, std::abs(out.f))) {
            out.converged = true;
            break;
        }
    }
    return out;
}

}  // namespace ctsm
