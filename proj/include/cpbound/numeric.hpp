#pragma once

#include <Eigen/Dense>

#include <functional>
#include <span>
#include <vector>

namespace cpbound::numeric {

/// Adaptive Simpson quadrature on [a, b] to absolute tolerance `abs_tol`.
double adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                        double abs_tol, int max_depth = 48);

/// Integrates piecewise over consecutive breakpoints; the tolerance is split
/// evenly across pieces. Breakpoints must be sorted.
double integrate_pieces(const std::function<double(double)>& f, std::span<const double> breakpoints,
                        double abs_tol);

/// Root of a monotone function on [lo, hi] by bisection; `f(lo)` and `f(hi)` must bracket.
double bisect(const std::function<double(double)>& f, double lo, double hi, double x_tol = 1e-14,
              int max_iter = 400);

/// Dense LU solve with one round of iterative refinement. Throws SingularSystem
/// when the reciprocal condition estimate falls below `rcond_min`.
Eigen::VectorXd solve_refined(const Eigen::MatrixXd& a, const Eigen::VectorXd& b, double rcond_min = 1e-13);
Eigen::MatrixXd solve_refined(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, double rcond_min = 1e-13);

/// Spectral radius via eigenvalues of a small dense matrix.
double spectral_radius(const Eigen::MatrixXd& a);

/// Evaluation grid: `linear_points` evenly spaced on [0, knee], then `log_points`
/// logarithmically spaced on (knee, knee * tail_factor].
std::vector<double> make_grid(double knee, std::size_t linear_points, std::size_t log_points,
                              double tail_factor);

}  // namespace cpbound::numeric
