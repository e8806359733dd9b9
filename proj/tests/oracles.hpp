// Reference computations used by the tests. Nothing in here calls into the
// library's numerical code; each routine is a slow, direct restatement.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "protokd/feature_model.hpp"

namespace oracle {

using protokd::PairedFeatureSet;
using protokd::Vector;

inline double dot(const Vector& a, const Vector& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double sq(const Vector& a) { return dot(a, a); }

inline Vector axpy(const Vector& r, double w, const Vector& g) {
  Vector out(r.size());
  for (std::size_t i = 0; i < r.size(); ++i) out[i] = r[i] - w * g[i];
  return out;
}

/// ||r_t - w_t g_t||^2 + ||r_s - w_s g_s||^2 + lambda (w_t - w_s)^2, evaluated literally.
inline double pair_objective(const Vector& rt, const Vector& rs, const Vector& gt, const Vector& gs,
                             double lambda, double wt, double ws) {
  return sq(axpy(rt, wt, gt)) + sq(axpy(rs, ws, gs)) + lambda * (wt - ws) * (wt - ws);
}

/// Dense grid search followed by Newton refinement with finite-difference
/// derivatives. Knows nothing about the closed form.
inline std::pair<double, double> brute_force_pair(const Vector& rt, const Vector& rs,
                                                  const Vector& gt, const Vector& gs,
                                                  double lambda) {
  auto f = [&](double a, double b) { return pair_objective(rt, rs, gt, gs, lambda, a, b); };
  double best_a = 0.0, best_b = 0.0, best = f(0.0, 0.0);
  double span = 8.0;
  for (int level = 0; level < 4; ++level) {
    const int n = 40;
    const double ca = best_a, cb = best_b;
    for (int i = -n; i <= n; ++i) {
      for (int j = -n; j <= n; ++j) {
        const double a = ca + span * i / n, b = cb + span * j / n;
        const double v = f(a, b);
        if (v < best) { best = v; best_a = a; best_b = b; }
      }
    }
    span /= 10.0;
  }
  for (int it = 0; it < 20; ++it) {
    const double h = 1e-3;
    const double fa = (f(best_a + h, best_b) - f(best_a - h, best_b)) / (2 * h);
    const double fb = (f(best_a, best_b + h) - f(best_a, best_b - h)) / (2 * h);
    const double faa = (f(best_a + h, best_b) - 2 * f(best_a, best_b) + f(best_a - h, best_b)) / (h * h);
    const double fbb = (f(best_a, best_b + h) - 2 * f(best_a, best_b) + f(best_a, best_b - h)) / (h * h);
    const double fab = (f(best_a + h, best_b + h) - f(best_a + h, best_b - h) -
                        f(best_a - h, best_b + h) + f(best_a - h, best_b - h)) / (4 * h * h);
    const double det = faa * fbb - fab * fab;
    if (!(det > 0)) break;
    const double da = (fbb * fa - fab * fb) / det;
    const double db = (faa * fb - fab * fa) / det;
    best_a -= da;
    best_b -= db;
    if (std::abs(da) + std::abs(db) < 1e-14) break;
  }
  return {best_a, best_b};
}

/// Exact minimizer via the 2x2 normal equations, assembled by hand.
inline std::pair<double, double> normal_equations_pair(const Vector& rt, const Vector& rs,
                                                       const Vector& gt, const Vector& gs,
                                                       double lambda) {
  Eigen::Matrix2d h;
  h << sq(gt) + lambda, -lambda, -lambda, sq(gs) + lambda;
  Eigen::Vector2d rhs(dot(rt, gt), dot(rs, gs));
  const Eigen::Vector2d w = h.fullPivLu().solve(rhs);
  return {w(0), w(1)};
}

/// Alg. 1 as written: at each step score every unselected candidate by the
/// full joint objective and keep the first strict minimum.
struct NaiveGreedy {
  std::vector<std::size_t> picks;  // group-local
  std::vector<double> objectives;  // L_0 .. L_K
};

inline NaiveGreedy naive_greedy(const std::vector<Vector>& ft, const std::vector<Vector>& fs,
                                std::size_t k, double lambda) {
  const std::size_t n = ft.size();
  std::vector<Vector> rt = ft, rs = fs;
  double coupling = 0.0;
  auto total = [&](const std::vector<Vector>& a, const std::vector<Vector>& b, double c) {
    double s = lambda * c;
    for (std::size_t i = 0; i < n; ++i) s += sq(a[i]) + sq(b[i]);
    return s;
  };
  NaiveGreedy out;
  out.objectives.push_back(total(rt, rs, coupling));
  std::vector<bool> used(n, false);
  // Exact ties go to the lowest index; "exact" means within 1e-12 of the group energy.
  double energy = 0.0;
  for (std::size_t i = 0; i < n; ++i) energy += sq(ft[i]) + sq(fs[i]);
  for (std::size_t step = 0; step < std::min(k, n); ++step) {
    std::vector<double> score(n, std::numeric_limits<double>::infinity());
    std::vector<std::vector<Vector>> cand_rt(n), cand_rs(n);
    std::vector<double> cand_c(n, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      if (used[j]) continue;
      std::vector<Vector> nrt(n), nrs(n);
      double c = coupling;
      for (std::size_t i = 0; i < n; ++i) {
        const auto [wt, ws] = normal_equations_pair(rt[i], rs[i], ft[j], fs[j], lambda);
        nrt[i] = axpy(rt[i], wt, ft[j]);
        nrs[i] = axpy(rs[i], ws, fs[j]);
        c += (wt - ws) * (wt - ws);
      }
      score[j] = total(nrt, nrs, c);
      cand_rt[j] = std::move(nrt);
      cand_rs[j] = std::move(nrs);
      cand_c[j] = c;
    }
    const double low = *std::min_element(score.begin(), score.end());
    std::size_t best_j = 0;
    while (used[best_j] || score[best_j] > low + 1e-12 * energy) ++best_j;
    used[best_j] = true;
    out.picks.push_back(best_j);
    out.objectives.push_back(score[best_j]);
    rt = std::move(cand_rt[best_j]);
    rs = std::move(cand_rs[best_j]);
    coupling = cand_c[best_j];
  }
  return out;
}

/// Norm-wise relative error between two gradient vectors.
inline double relative_error(const std::vector<double>& a, const std::vector<double>& b) {
  double diff = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  const double scale = std::max(std::sqrt(std::max(na, nb)), 1e-12);
  return std::sqrt(diff) / scale;
}

/// Central differences of f over a flat parameter vector.
inline std::vector<double> central_difference(const std::function<double(const std::vector<double>&)>& f,
                                              std::vector<double> x, double h = 1e-5) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double x0 = x[i];
    x[i] = x0 + h;
    const double fp = f(x);
    x[i] = x0 - h;
    const double fm = f(x);
    x[i] = x0;
    g[i] = (fp - fm) / (2 * h);
  }
  return g;
}

inline double naive_cosine(const Vector& a, const Vector& b) {
  const double na = std::sqrt(sq(a)), nb = std::sqrt(sq(b));
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot(a, b) / (na * nb);
}

inline Vector gaussian(std::mt19937_64& gen, std::size_t d, double scale = 1.0) {
  std::normal_distribution<double> nd(0.0, scale);
  Vector v(d);
  for (auto& x : v) x = nd(gen);
  return v;
}

/// Random valid set with the given group layout: groups[g] records in group (g, 0).
inline PairedFeatureSet random_set(std::mt19937_64& gen, const std::vector<std::size_t>& groups,
                                   std::size_t dt, std::size_t ds, std::size_t logits = 0,
                                   double scale = 1.0) {
  PairedFeatureSet set{dt, ds, {}};
  std::uint64_t id = 0;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    for (std::size_t i = 0; i < groups[g]; ++i) {
      protokd::FeatureRecord r;
      r.instance_id = id++;
      r.group = {static_cast<std::uint32_t>(g), 0};
      r.f_t = gaussian(gen, dt, scale);
      r.f_s = gaussian(gen, ds, scale);
      if (logits > 0) {
        r.logits_t = gaussian(gen, logits);
        r.logits_s = gaussian(gen, logits);
      }
      set.records.push_back(std::move(r));
    }
  }
  return set;
}

}  // namespace oracle
