#include "support/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace testsupport {
namespace {

// Saturating conductivity lookup so Newton iterates that overshoot the curve
// domain see a flat extension instead of an exception.  The converged
// solution is checked against the true domain by the caller.
double clamped_rho(const cryolink::ConductivityModel& m, double t) {
  const double lo = m.domain_min_k();
  const double hi = m.domain_max_k();
  return m.conductivity(std::clamp(t, lo, hi));
}

// Tridiagonal solve (Thomas algorithm); diagonals are overwritten.
void solve_tridiagonal(std::vector<double>& sub, std::vector<double>& diag,
                       std::vector<double>& sup, std::vector<double>& rhs) {
  const std::size_t n = diag.size();
  for (std::size_t i = 1; i < n; ++i) {
    const double w = sub[i] / diag[i - 1];
    diag[i] -= w * sup[i - 1];
    rhs[i] -= w * rhs[i - 1];
  }
  rhs[n - 1] /= diag[n - 1];
  for (std::size_t i = n - 1; i-- > 0;) {
    rhs[i] = (rhs[i] - sup[i] * rhs[i + 1]) / diag[i];
  }
}

}  // namespace

double simpson(const std::function<double(double)>& f, double a, double b,
               std::size_t panels) {
  if (b <= a) return 0.0;
  if (panels % 2 != 0) ++panels;
  const double h = (b - a) / static_cast<double>(panels);
  double sum = f(a) + f(b);
  for (std::size_t i = 1; i < panels; ++i) {
    const double x = a + h * static_cast<double>(i);
    sum += f(x) * ((i % 2 == 0) ? 2.0 : 4.0);
  }
  return sum * h / 3.0;
}

double FdSolution::temperature_at(double x) const {
  if (x_m.empty()) throw std::logic_error("FdSolution: empty grid");
  if (x <= x_m.front()) return t_k.front();
  if (x >= x_m.back()) return t_k.back();
  const auto it = std::upper_bound(x_m.begin(), x_m.end(), x);
  const std::size_t i = static_cast<std::size_t>(it - x_m.begin());
  const double f = (x - x_m[i - 1]) / (x_m[i] - x_m[i - 1]);
  return t_k[i - 1] + f * (t_k[i] - t_k[i - 1]);
}

FdSolution solve_fd(const FdProblem& problem, std::size_t nodes) {
  if (nodes < 3) throw std::invalid_argument("solve_fd: need at least 3 nodes");
  if (problem.material == nullptr) throw std::invalid_argument("solve_fd: material not set");
  const double lo = problem.x_lo_m;
  const double hi = problem.x_hi_m;
  if (!(hi > lo)) throw std::invalid_argument("solve_fd: empty span");

  const std::size_t n = nodes;
  const double h = (hi - lo) / static_cast<double>(n - 1);
  const double area = problem.cross_section_m2;
  const auto& material = *problem.material;

  FdSolution out;
  out.x_m.resize(n);
  out.t_k.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.x_m[i] = lo + h * static_cast<double>(i);
    const double f = static_cast<double>(i) / static_cast<double>(n - 1);
    out.t_k[i] = problem.t_lo_k + f * (problem.t_hi_k - problem.t_lo_k);
  }
  out.x_m.back() = hi;

  // Per-cell heat input (W): the distributed density integrated over the cell
  // around each interior node plus any post delta landing inside the cell.
  std::vector<double> cell_source(n, 0.0);
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const double a = out.x_m[i] - 0.5 * h;
    const double b = out.x_m[i] + 0.5 * h;
    if (problem.density_w_per_m) {
      cell_source[i] = simpson(problem.density_w_per_m, a, b, 8);
    }
  }
  for (const auto& delta : problem.post_deltas) {
    const double rel = (delta.position_m - lo) / h;
    std::size_t i = static_cast<std::size_t>(std::llround(rel));
    i = std::clamp<std::size_t>(i, 1, n - 2);
    cell_source[i] += delta.power_w;
  }

  // Face conductance A*rho(T_mid)/h between nodes i and i+1.
  const auto face = [&](const std::vector<double>& t, std::size_t i) {
    return area * clamped_rho(material, 0.5 * (t[i] + t[i + 1])) / h;
  };
  // Residual at interior node i: net conductive inflow plus cell source.
  const auto residual = [&](const std::vector<double>& t, std::size_t i) {
    return face(t, i) * (t[i + 1] - t[i]) - face(t, i - 1) * (t[i] - t[i - 1]) +
           cell_source[i];
  };
  const auto norm2 = [&](const std::vector<double>& t) {
    double s = 0.0;
    for (std::size_t i = 1; i + 1 < n; ++i) {
      const double r = residual(t, i);
      s += r * r;
    }
    return std::sqrt(s);
  };

  std::vector<double> sub(n - 2), diag(n - 2), sup(n - 2), rhs(n - 2);
  std::vector<double> trial(n);
  double fnorm = norm2(out.t_k);
  const int max_newton = 200;
  for (int iter = 0; iter < max_newton; ++iter) {
    // Numeric Jacobian of the tridiagonal system: residual i depends only on
    // t[i-1], t[i], t[i+1].
    for (std::size_t i = 1; i + 1 < n; ++i) {
      const std::size_t r = i - 1;
      const double base = residual(out.t_k, i);
      rhs[r] = -base;
      for (int off = -1; off <= 1; ++off) {
        const std::size_t j = i + static_cast<std::size_t>(off + 1) - 1;
        if (j == 0 || j == n - 1) continue;  // Dirichlet nodes are fixed
        const double save = out.t_k[j];
        const double eps = std::max(1e-9, 1e-7 * std::abs(save));
        out.t_k[j] = save + eps;
        const double bumped = residual(out.t_k, i);
        out.t_k[j] = save;
        const double deriv = (bumped - base) / eps;
        if (off == -1) sub[r] = deriv;
        if (off == 0) diag[r] = deriv;
        if (off == 1) sup[r] = deriv;
      }
    }
    solve_tridiagonal(sub, diag, sup, rhs);

    double step_max = 0.0;
    for (double d : rhs) step_max = std::max(step_max, std::abs(d));

    // Damped update: halve the step until the residual norm improves.
    double damping = 1.0;
    double next_norm = fnorm;
    for (int back = 0; back < 40; ++back) {
      trial = out.t_k;
      for (std::size_t i = 1; i + 1 < n; ++i) {
        trial[i] += damping * rhs[i - 1];
      }
      next_norm = norm2(trial);
      if (std::isfinite(next_norm) && next_norm < fnorm) break;
      damping *= 0.5;
    }
    out.t_k = trial;
    fnorm = next_norm;
    out.newton_iterations = iter + 1;

    double t_scale = 1.0;
    for (double t : out.t_k) t_scale = std::max(t_scale, std::abs(t));
    if (step_max < 1e-12 * t_scale) break;
  }

  // Conductive flow in +x is -A*rho*dT/dx; one-sided differences at the two
  // Dirichlet nodes match the discrete conservation statement exactly.
  out.flux_lo_w = -face(out.t_k, 0) * (out.t_k[1] - out.t_k[0]);
  out.flux_hi_w = -face(out.t_k, n - 2) * (out.t_k[n - 1] - out.t_k[n - 2]);
  return out;
}

}  // namespace testsupport
