#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "hitlor/error.hpp"

namespace hitlor::svm {

// Row-major dense sample matrix.
struct DenseMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  std::span<const double> row(std::size_t i) const { return {values.data() + i * cols, cols}; }
  std::span<double> row(std::size_t i) { return {values.data() + i * cols, cols}; }
};

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) s += a[j] * b[j];
  return s;
}

struct DualSolution {
  std::vector<double> w;      // primal weights, w = sum_i alpha_i y_i x_i
  std::vector<double> alpha;  // dual variables, 0 <= alpha_i <= upper_i
  double max_violation = 0;   // largest projected-gradient magnitude at exit
  double dual_objective = 0;  // sum(alpha) - |w|^2 / 2
  int epochs = 0;
  bool converged = false;
  bool polished = false;  // free-set refinement was applied
};

// Dual objective sum(alpha) - |sum alpha_i y_i x_i|^2 / 2 of the
// L2-regularized hinge-loss SVM (maximization form).
inline double dual_objective(const DenseMatrix& x, std::span<const int> y, std::span<const double> alpha) {
  std::vector<double> w(x.cols, 0.0);
  double sum_alpha = 0.0;
  for (std::size_t i = 0; i < x.rows; ++i) {
    sum_alpha += alpha[i];
    const auto xi = x.row(i);
    for (std::size_t j = 0; j < x.cols; ++j) w[j] += alpha[i] * y[i] * xi[j];
  }
  return sum_alpha - 0.5 * dot(w, w);
}

// Primal objective |w|^2 / 2 + sum_i upper_i * max(0, 1 - y_i w.x_i).
inline double primal_objective(const DenseMatrix& x, std::span<const int> y, std::span<const double> upper,
                               std::span<const double> w) {
  double value = 0.5 * dot(w, w);
  for (std::size_t i = 0; i < x.rows; ++i) value += upper[i] * std::max(0.0, 1.0 - y[i] * dot(w, x.row(i)));
  return value;
}

namespace detail {

inline double projected_gradient(double gradient, double alpha, double upper) {
  if (alpha <= 0.0) return std::min(gradient, 0.0);
  if (alpha >= upper) return std::max(gradient, 0.0);
  return gradient;
}

// Eigen-decomposition of a symmetric k x k matrix (row-major, destroyed) by
// cyclic Jacobi rotations. Column c of `vectors` pairs with values[c].
inline void symmetric_eigen(std::vector<double>& a, std::size_t k, std::vector<double>& values,
                            std::vector<double>& vectors) {
  vectors.assign(k * k, 0.0);
  for (std::size_t i = 0; i < k; ++i) vectors[i * k + i] = 1.0;
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    double scale = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      scale += a[i * k + i] * a[i * k + i];
      for (std::size_t j = i + 1; j < k; ++j) off += a[i * k + j] * a[i * k + j];
    }
    if (off <= 1e-30 * std::max(scale, 1e-300)) break;
    for (std::size_t p = 0; p + 1 < k; ++p) {
      for (std::size_t q = p + 1; q < k; ++q) {
        const double apq = a[p * k + q];
        if (apq == 0.0) continue;
        const double theta = (a[q * k + q] - a[p * k + p]) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t r = 0; r < k; ++r) {
          const double arp = a[r * k + p];
          const double arq = a[r * k + q];
          a[r * k + p] = c * arp - s * arq;
          a[r * k + q] = s * arp + c * arq;
        }
        for (std::size_t r = 0; r < k; ++r) {
          const double apr = a[p * k + r];
          const double aqr = a[q * k + r];
          a[p * k + r] = c * apr - s * aqr;
          a[q * k + r] = s * apr + c * aqr;
        }
        for (std::size_t r = 0; r < k; ++r) {
          const double vrp = vectors[r * k + p];
          const double vrq = vectors[r * k + q];
          vectors[r * k + p] = c * vrp - s * vrq;
          vectors[r * k + q] = s * vrp + c * vrq;
        }
      }
    }
  }
  values.resize(k);
  for (std::size_t i = 0; i < k; ++i) values[i] = a[i * k + i];
}

// Applies the pseudo-inverse of the symmetric PSD matrix `a` (k x k) `power`
// times to b.
inline std::vector<double> pinv_apply(std::vector<double> a, std::size_t k, std::span<const double> b, int power) {
  std::vector<double> values;
  std::vector<double> vectors;
  symmetric_eigen(a, k, values, vectors);
  double top = 0.0;
  for (double v : values) top = std::max(top, std::abs(v));
  const double cutoff = 1e-12 * std::max(top, 1e-300) * static_cast<double>(k);
  std::vector<double> out(k, 0.0);
  for (std::size_t c = 0; c < k; ++c) {
    if (values[c] <= cutoff) continue;
    double proj = 0.0;
    for (std::size_t r = 0; r < k; ++r) proj += vectors[r * k + c] * b[r];
    const double factor = proj / std::pow(values[c], power);
    for (std::size_t r = 0; r < k; ++r) out[r] += factor * vectors[r * k + c];
  }
  return out;
}

inline double max_violation(const DenseMatrix& x, std::span<const int> y, std::span<const double> upper,
                            std::span<const double> alpha, std::span<const double> w) {
  double worst = 0.0;
  for (std::size_t i = 0; i < x.rows; ++i) {
    const double g = y[i] * dot(w, x.row(i)) - 1.0;
    worst = std::max(worst, std::abs(projected_gradient(g, alpha[i], upper[i])));
  }
  return worst;
}

// Minimum-norm change of the free duals that puts every free sample exactly
// on its margin: solves (A A') delta = e with A the rows y_i x_i.
inline std::vector<double> margin_step(const DenseMatrix& x, std::span<const int> y,
                                       const std::vector<std::size_t>& free, std::span<const double> w) {
  const std::size_t f = free.size();
  const std::size_t p = x.cols;
  std::vector<double> e(f);
  for (std::size_t a = 0; a < f; ++a) e[a] = 1.0 - y[free[a]] * dot(w, x.row(free[a]));
  if (f <= p) {
    std::vector<double> q(f * f);
    for (std::size_t a = 0; a < f; ++a) {
      for (std::size_t b = a; b < f; ++b) {
        q[a * f + b] = q[b * f + a] = y[free[a]] * y[free[b]] * dot(x.row(free[a]), x.row(free[b]));
      }
    }
    return pinv_apply(std::move(q), f, e, 1);
  }
  // (A A')^+ = A (A'A)^+2 A'
  std::vector<double> g(p * p, 0.0);
  std::vector<double> ate(p, 0.0);
  for (std::size_t a = 0; a < f; ++a) {
    const auto xi = x.row(free[a]);
    for (std::size_t r = 0; r < p; ++r) {
      ate[r] += y[free[a]] * xi[r] * e[a];
      for (std::size_t c = 0; c < p; ++c) g[r * p + c] += xi[r] * xi[c];
    }
  }
  const auto z = pinv_apply(std::move(g), p, ate, 2);
  std::vector<double> delta(f);
  for (std::size_t a = 0; a < f; ++a) delta[a] = y[free[a]] * dot(x.row(free[a]), z);
  return delta;
}

// Active-set refinement. Each round takes the margin step on the free set,
// stopping at the first bound hit and pinning that variable, then lets the
// worst-violating bound variable back in. Kept only if the result does not
// raise the violation; returns whether it was kept.
inline bool polish_free_set(const DenseMatrix& x, std::span<const int> y, std::span<const double> upper,
                            DualSolution& sol, std::size_t max_rank) {
  const std::size_t n = x.rows;
  std::vector<char> is_free(n, 0);
  std::vector<std::size_t> free;
  for (std::size_t i = 0; i < n; ++i) {
    if (sol.alpha[i] > 0.0 && sol.alpha[i] < upper[i]) {
      is_free[i] = 1;
      free.push_back(i);
    }
  }
  if (free.empty() || std::min(free.size(), x.cols) > max_rank) return false;

  std::vector<double> alpha = sol.alpha;
  std::vector<double> w = sol.w;
  const auto move = [&](std::size_t i, double next) {
    const double step = (next - alpha[i]) * y[i];
    const auto xi = x.row(i);
    for (std::size_t j = 0; j < x.cols; ++j) w[j] += step * xi[j];
    alpha[i] = next;
  };
  const std::size_t max_rounds = 3 * n + 10;
  for (std::size_t round = 0; round < max_rounds; ++round) {
    while (!free.empty() && std::min(free.size(), x.cols) <= max_rank) {
      auto delta = margin_step(x, y, free, w);
      // Residual of the margin system. Nonzero only when the free rows are
      // dependent; it then lies in the null space, where w is unchanged and
      // the dual rises linearly, so follow it until a bound blocks.
      std::vector<double> u(x.cols, 0.0);
      for (std::size_t a = 0; a < free.size(); ++a) {
        const auto xi = x.row(free[a]);
        for (std::size_t j = 0; j < x.cols; ++j) u[j] += delta[a] * y[free[a]] * xi[j];
      }
      double residual = 0.0;
      double scale = 1.0;
      std::vector<double> r(free.size());
      for (std::size_t a = 0; a < free.size(); ++a) {
        const double e = 1.0 - y[free[a]] * dot(w, x.row(free[a]));
        r[a] = e - y[free[a]] * dot(u, x.row(free[a]));
        residual = std::max(residual, std::abs(r[a]));
        scale = std::max(scale, std::abs(e));
      }
      double tau = 1.0;
      if (residual > 1e-12 * scale) {
        delta = r;
        tau = std::numeric_limits<double>::infinity();
      }
      std::size_t blocking = free.size();
      for (std::size_t a = 0; a < free.size(); ++a) {
        const std::size_t i = free[a];
        if (delta[a] < 0.0 && alpha[i] + tau * delta[a] < 0.0) {
          const double t = alpha[i] / -delta[a];
          if (t < tau) tau = t, blocking = a;
        } else if (delta[a] > 0.0 && alpha[i] + tau * delta[a] > upper[i]) {
          const double t = (upper[i] - alpha[i]) / delta[a];
          if (t < tau) tau = t, blocking = a;
        }
      }
      if (blocking == free.size() && !std::isfinite(tau)) return false;
      for (std::size_t a = 0; a < free.size(); ++a) {
        const std::size_t i = free[a];
        move(i, std::clamp(alpha[i] + tau * delta[a], 0.0, upper[i]));
      }
      if (blocking == free.size()) break;
      const std::size_t i = free[blocking];
      move(i, delta[blocking] < 0.0 ? 0.0 : upper[i]);
      is_free[i] = 0;
      free.erase(free.begin() + static_cast<std::ptrdiff_t>(blocking));
    }
    double worst = 0.0;
    std::size_t entering = n;
    for (std::size_t i = 0; i < n; ++i) {
      if (is_free[i]) continue;
      const double g = y[i] * dot(w, x.row(i)) - 1.0;
      const double pg = std::abs(projected_gradient(g, alpha[i], upper[i]));
      if (pg > worst) worst = pg, entering = i;
    }
    if (entering == n || worst <= 1e-13) break;
    is_free[entering] = 1;
    free.push_back(entering);
  }
  const double violation = max_violation(x, y, upper, alpha, w);
  if (violation > sol.max_violation) return false;
  sol.alpha = std::move(alpha);
  sol.w = std::move(w);
  sol.max_violation = violation;
  return true;
}

}  // namespace detail

// Dual coordinate descent for
//   min_alpha  alpha' Q alpha / 2 - sum(alpha),  0 <= alpha_i <= upper_i,
//   Q_ij = y_i y_j x_i.x_j,
// visiting coordinates in a fixed cyclic order. Coordinates stuck at a bound
// are shrunk out of the active set; before exit the full set is rechecked,
// so the returned max_violation is the exact projected-gradient bound over
// all samples.
//
// After convergence the free-set refinement above is attempted when the
// smaller of (free samples, features) is at most `polish_rank`; 0 disables it.
inline DualSolution solve_dual_cd(const DenseMatrix& x, std::span<const int> y, std::span<const double> upper,
                                  double tolerance, int max_epochs, std::size_t polish_rank = 128) {
  const std::size_t n = x.rows;
  const std::size_t p = x.cols;
  if (y.size() != n || upper.size() != n) throw ValidationError("label/cost count does not match sample count");

  DualSolution sol;
  sol.w.assign(p, 0.0);
  sol.alpha.assign(n, 0.0);

  std::vector<double> diag(n);
  for (std::size_t i = 0; i < n; ++i) diag[i] = dot(x.row(i), x.row(i));

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::size_t active = n;

  constexpr double kInf = std::numeric_limits<double>::infinity();
  double pg_max_old = kInf;
  double pg_min_old = -kInf;

  const auto exact_violation = [&] { return detail::max_violation(x, y, upper, sol.alpha, sol.w); };
  constexpr int kPolishEvery = 25;

  while (sol.epochs < max_epochs) {
    double pg_max = -kInf;
    double pg_min = kInf;
    for (std::size_t s = 0; s < active; ++s) {
      const std::size_t i = order[s];
      const auto xi = x.row(i);
      const double g = y[i] * dot(sol.w, xi) - 1.0;
      double pg = 0.0;
      if (sol.alpha[i] <= 0.0) {
        if (g > pg_max_old) {
          std::swap(order[s], order[--active]);
          --s;
          continue;
        }
        pg = std::min(g, 0.0);
      } else if (sol.alpha[i] >= upper[i]) {
        if (g < pg_min_old) {
          std::swap(order[s], order[--active]);
          --s;
          continue;
        }
        pg = std::max(g, 0.0);
      } else {
        pg = g;
      }
      pg_max = std::max(pg_max, pg);
      pg_min = std::min(pg_min, pg);
      if (std::abs(pg) > 1e-12 && diag[i] > 0.0) {
        const double old = sol.alpha[i];
        sol.alpha[i] = std::clamp(old - g / diag[i], 0.0, upper[i]);
        const double step = (sol.alpha[i] - old) * y[i];
        for (std::size_t j = 0; j < p; ++j) sol.w[j] += step * xi[j];
      }
    }
    ++sol.epochs;
    if (active == 0) {
      pg_max = 0.0;
      pg_min = 0.0;
    }

    if (std::max(pg_max, -pg_min) <= tolerance) {
      if (active == n) {
        sol.max_violation = exact_violation();
        if (sol.max_violation <= tolerance) {
          sol.converged = true;
          break;
        }
      }
      active = n;
      pg_max_old = kInf;
      pg_min_old = -kInf;
      continue;
    }
    pg_max_old = pg_max <= 0.0 ? kInf : pg_max;
    pg_min_old = pg_min >= 0.0 ? -kInf : pg_min;

    // Near-hard-margin problems converge slowly in the tail; once the free
    // set has settled a refinement step often lands within tolerance.
    if (polish_rank > 0 && sol.epochs % kPolishEvery == 0) {
      DualSolution trial = sol;
      trial.max_violation = exact_violation();
      if (detail::polish_free_set(x, y, upper, trial, polish_rank) && trial.max_violation <= tolerance) {
        sol = std::move(trial);
        sol.converged = true;
        sol.polished = true;
        break;
      }
    }
  }

  if (!sol.converged) sol.max_violation = exact_violation();
  if (sol.converged && !sol.polished && polish_rank > 0) sol.polished = detail::polish_free_set(x, y, upper, sol, polish_rank);
  double sum_alpha = 0.0;
  for (double a : sol.alpha) sum_alpha += a;
  sol.dual_objective = sum_alpha - 0.5 * dot(sol.w, sol.w);
  return sol;
}

}  // namespace hitlor::svm
