#include "dfm/fit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "dfm/layout_core.hpp"

namespace dfm {

namespace {

constexpr double kReflect = 1.0;
constexpr double kExpand = 2.0;
constexpr double kContract = 0.5;
constexpr double kShrink = 0.5;
constexpr int kMaxRestarts = 3;

class Simplex {
 public:
  Simplex(const Objective& f, const FitBounds& b, int max_evals) : f_(f), b_(b), max_evals_(max_evals) {}

  // Past the budget every point scores +inf, so no step can be accepted.
  double eval(std::vector<double>& x) {
    project(x);
    if (exhausted()) return std::numeric_limits<double>::infinity();
    ++evaluations;
    double v = f_(x);
    return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
  }

  void project(std::vector<double>& x) const {
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::clamp(x[i], b_.lower[i], b_.upper[i]);
  }

  bool exhausted() const { return evaluations >= max_evals_; }

  int evaluations = 0;

 private:
  const Objective& f_;
  const FitBounds& b_;
  int max_evals_;
};

std::vector<std::vector<double>> initial_simplex(const std::vector<double>& x0, const FitBounds& b) {
  std::vector<std::vector<double>> pts{x0};
  for (std::size_t i = 0; i < x0.size(); ++i) {
    auto p = x0;
    double step = x0[i] != 0.0 ? 0.05 * std::abs(x0[i]) : 0.00025;
    if (p[i] + step > b.upper[i]) step = -step;
    p[i] += step;
    pts.push_back(p);
  }
  return pts;
}

}  // namespace

FitResult fit_nonlinear(const Objective& objective, std::vector<double> initial, const FitBounds& bounds,
                        const FitOptions& options) {
  const std::size_t n = initial.size();
  if (n == 0) throw Error("fit_nonlinear: empty parameter vector");
  if (bounds.lower.size() != n || bounds.upper.size() != n) throw Error("fit_nonlinear: bounds size mismatch");
  for (std::size_t i = 0; i < n; ++i) {
    if (!(bounds.lower[i] <= bounds.upper[i])) throw Error("fit_nonlinear: bounds not ordered");
  }

  Simplex s(objective, bounds, options.max_evaluations);
  s.project(initial);
  double f0 = objective(initial);
  ++s.evaluations;
  if (!std::isfinite(f0)) throw Error("fit_nonlinear: objective not finite at initial point");

  FitResult res;
  res.x = initial;
  res.value = f0;

  bool converged = false;
  for (int restart = 0; restart <= kMaxRestarts && !s.exhausted(); ++restart) {
    auto pts = initial_simplex(res.x, bounds);
    std::vector<double> fv(n + 1);
    fv[0] = res.value;
    for (std::size_t j = 1; j <= n; ++j) fv[j] = s.eval(pts[j]);

    std::vector<std::size_t> order(n + 1);
    converged = false;
    while (!s.exhausted()) {
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return fv[a] < fv[b]; });
      const std::size_t best = order.front(), worst = order.back(), second = order[n - 1];

      double diameter = 0.0;
      for (std::size_t j = 0; j <= n; ++j) {
        for (std::size_t i = 0; i < n; ++i) diameter = std::max(diameter, std::abs(pts[j][i] - pts[best][i]));
      }
      if (diameter < options.diameter_tol) {
        converged = true;
        break;
      }
      ++res.iterations;

      std::vector<double> centroid(n, 0.0);
      for (std::size_t j = 0; j <= n; ++j) {
        if (j == worst) continue;
        for (std::size_t i = 0; i < n; ++i) centroid[i] += pts[j][i] / static_cast<double>(n);
      }
      auto along = [&](double t) {
        std::vector<double> p(n);
        for (std::size_t i = 0; i < n; ++i) p[i] = centroid[i] + t * (pts[worst][i] - centroid[i]);
        return p;
      };

      auto xr = along(-kReflect);
      double fr = s.eval(xr);
      if (fr < fv[best]) {
        auto xe = along(-kExpand);
        double fe = s.eval(xe);
        if (fe < fr) {
          pts[worst] = xe;
          fv[worst] = fe;
        } else {
          pts[worst] = xr;
          fv[worst] = fr;
        }
        continue;
      }
      if (fr < fv[second]) {
        pts[worst] = xr;
        fv[worst] = fr;
        continue;
      }
      bool outside = fr < fv[worst];
      auto xc = along(outside ? -kContract : kContract);
      double fc = s.eval(xc);
      if (fc < (outside ? fr : fv[worst])) {
        pts[worst] = xc;
        fv[worst] = fc;
        continue;
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (j == best) continue;
        for (std::size_t i = 0; i < n; ++i) pts[j][i] = pts[best][i] + kShrink * (pts[j][i] - pts[best][i]);
        fv[j] = s.eval(pts[j]);
      }
    }

    std::size_t best = static_cast<std::size_t>(std::min_element(fv.begin(), fv.end()) - fv.begin());
    bool improved = fv[best] < res.value;
    if (fv[best] <= res.value) {
      res.x = pts[best];
      res.value = fv[best];
    }
    // A fresh simplex that cannot improve confirms the minimum.
    if (converged && !improved && restart > 0) break;
  }

  res.evaluations = s.evaluations;
  res.hit_max_evaluations = !converged && s.exhausted();
  for (std::size_t i = 0; i < n; ++i) {
    double scale = std::max(1.0, std::abs(res.x[i]));
    if (std::abs(res.x[i] - bounds.lower[i]) <= 1e-12 * scale || std::abs(res.x[i] - bounds.upper[i]) <= 1e-12 * scale) {
      res.at_bound = true;
    }
  }
  return res;
}

}  // namespace dfm
