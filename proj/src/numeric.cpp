#include "cpbound/numeric.hpp"

#include "cpbound/error.hpp"

#include <algorithm>
#include <cmath>

namespace cpbound::numeric {
namespace {

double simpson_step(const std::function<double(double)>& f, double a, double b, double fa, double fm,
                    double fb, double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = f(lm);
  const double frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
  return simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

}  // namespace

double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double abs_tol,
                        int max_depth) {
  if (!(b > a)) return 0.0;
  // Seed with a coarse split so that narrow features are not missed by the first estimate.
  constexpr int kSeed = 16;
  const double h = (b - a) / kSeed;
  double total = 0.0;
  double x0 = a;
  double f0 = f(x0);
  for (int i = 1; i <= kSeed; ++i) {
    const double x1 = i == kSeed ? b : a + i * h;
    const double f1 = f(x1);
    const double fm = f(0.5 * (x0 + x1));
    const double whole = (x1 - x0) / 6.0 * (f0 + 4.0 * fm + f1);
    total += simpson_step(f, x0, x1, f0, fm, f1, whole, abs_tol / kSeed, max_depth);
    x0 = x1;
    f0 = f1;
  }
  return total;
}

double integrate_pieces(const std::function<double(double)>& f, std::span<const double> breakpoints,
                        double abs_tol) {
  if (breakpoints.size() < 2) return 0.0;
  const double piece_tol = abs_tol / static_cast<double>(breakpoints.size() - 1);
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < breakpoints.size(); ++i) {
    total += adaptive_simpson(f, breakpoints[i], breakpoints[i + 1], piece_tol);
  }
  return total;
}

double bisect(const std::function<double(double)>& f, double lo, double hi, double x_tol, int max_iter) {
  double flo = f(lo);
  for (int i = 0; i < max_iter && hi - lo > x_tol * std::max(1.0, std::abs(lo)); ++i) {
    const double mid = 0.5 * (lo + hi);
    const double fm = f(mid);
    if ((fm < 0.0) == (flo < 0.0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

Eigen::MatrixXd solve_refined(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, double rcond_min) {
  if (a.rows() == 0) return Eigen::MatrixXd(0, b.cols());
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(a);
  const double rcond = lu.rcond();
  require(std::isfinite(rcond) && rcond >= rcond_min, ErrorCode::SingularSystem,
          "linear system is numerically singular (rcond=" + std::to_string(rcond) + ")");
  Eigen::MatrixXd x = lu.solve(b);
  const Eigen::MatrixXd residual = b - a * x;
  x += lu.solve(residual);
  return x;
}

Eigen::VectorXd solve_refined(const Eigen::MatrixXd& a, const Eigen::VectorXd& b, double rcond_min) {
  const Eigen::MatrixXd x = solve_refined(a, Eigen::MatrixXd(b), rcond_min);
  return x.col(0);
}

double spectral_radius(const Eigen::MatrixXd& a) {
  if (a.rows() == 0) return 0.0;
  Eigen::EigenSolver<Eigen::MatrixXd> solver(a, false);
  return solver.eigenvalues().cwiseAbs().maxCoeff();
}

std::vector<double> make_grid(double knee, std::size_t linear_points, std::size_t log_points,
                              double tail_factor) {
  std::vector<double> grid;
  grid.reserve(linear_points + log_points);
  const std::size_t n_lin = std::max<std::size_t>(linear_points, 2);
  for (std::size_t i = 0; i < n_lin; ++i) {
    grid.push_back(knee * static_cast<double>(i) / static_cast<double>(n_lin - 1));
  }
  if (log_points > 0 && tail_factor > 1.0) {
    const double step = std::log(tail_factor) / static_cast<double>(log_points);
    for (std::size_t i = 1; i <= log_points; ++i) {
      grid.push_back(knee * std::exp(step * static_cast<double>(i)));
    }
  }
  return grid;
}

}  // namespace cpbound::numeric
