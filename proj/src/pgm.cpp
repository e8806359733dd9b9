#include "protokd/pgm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "protokd/error.hpp"
#include "protokd/linalg.hpp"

namespace protokd {

using detail::dot;
using detail::residual_sq;
using detail::squared_norm;

CoefficientPair solve_pair_moments(double a, double b, double gt_sq, double gs_sq, double lambda) {
  const double p = lambda + gt_sq;
  const double q = lambda + gs_sq;
  const double det = p * q - lambda * lambda;
  if (det <= 1e-12 * std::max(1.0, lambda * lambda)) {
    if (lambda > 0.0) return {0.0, 0.0};
    throw Error(ErrorCode::DegenerateAtom, "atom has zero norm in a space with lambda = 0");
  }
  return {(a * q + lambda * b) / det, (b * p + lambda * a) / det};
}

CoefficientPair solve_pair_coefficients(std::span<const double> r_t, std::span<const double> r_s,
                                        std::span<const double> g_t, std::span<const double> g_s,
                                        double lambda) {
  if (r_t.size() != g_t.size() || r_s.size() != g_s.size()) {
    throw Error(ErrorCode::DimensionMismatch, "residual and atom dimensions differ");
  }
  return solve_pair_moments(dot(r_t, g_t), dot(r_s, g_s), squared_norm(g_t), squared_norm(g_s),
                            lambda);
}

bool ResidualState::is_selected(std::size_t local) const {
  return std::find(selected.begin(), selected.end(), local) != selected.end();
}

double ResidualState::objective(double lambda) const {
  double total = 0.0;
  for (std::size_t i = 0; i < members.size(); ++i) {
    total += squared_norm(r_t[i]) + squared_norm(r_s[i]);
  }
  return total + lambda * coupling_sq;
}

ResidualState initial_state(const PairedFeatureSet& set, const GroupKey& group) {
  ResidualState state;
  state.members = group_members(set, group);
  if (state.members.empty()) {
    throw Error(ErrorCode::EmptyGroup, "no records in " + to_string(group));
  }
  for (std::size_t pos : state.members) {
    state.r_t.push_back(set.records[pos].f_t);
    state.r_s.push_back(set.records[pos].f_s);
  }
  return state;
}

double candidate_objective(const ResidualState& state, std::size_t candidate,
                           const PairedFeatureSet& set, double lambda) {
  if (candidate >= state.group_size()) {
    throw Error(ErrorCode::DimensionMismatch, "candidate outside the group");
  }
  const auto& rec = set.records[state.members[candidate]];
  const std::span<const double> g_t = rec.f_t;
  const std::span<const double> g_s = rec.f_s;
  const double gt_sq = squared_norm(g_t);
  const double gs_sq = squared_norm(g_s);

  double total = lambda * state.coupling_sq;
  for (std::size_t i = 0; i < state.group_size(); ++i) {
    const auto w = solve_pair_moments(dot(state.r_t[i], g_t), dot(state.r_s[i], g_s), gt_sq,
                                      gs_sq, lambda);
    const double diff = w.w_t - w.w_s;
    total += residual_sq(state.r_t[i], g_t, w.w_t) + residual_sq(state.r_s[i], g_s, w.w_s) +
             lambda * diff * diff;
  }
  return total;
}

std::size_t select_next_prototype(const ResidualState& state, const PairedFeatureSet& set,
                                  double lambda) {
  if (state.selected.size() >= state.group_size()) {
    throw Error(ErrorCode::Exhausted, "every instance of the group is already a prototype");
  }
  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> values(state.group_size(), nan);
  double best_value = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < state.group_size(); ++k) {
    if (state.is_selected(k)) continue;
    try {
      values[k] = candidate_objective(state, k, set, lambda);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::DegenerateAtom) continue;
      throw;
    }
    best_value = std::min(best_value, values[k]);
  }
  // Objectives within rounding noise of the group's energy count as ties.
  double energy = 0.0;
  for (auto pos : state.members) {
    energy += squared_norm(set.records[pos].f_t) + squared_norm(set.records[pos].f_s);
  }
  const double slack = kTieRelTolerance * energy;
  std::size_t best = state.group_size();
  for (std::size_t k = 0; k < state.group_size(); ++k) {
    if (!std::isnan(values[k]) && values[k] <= best_value + slack) {
      best = k;
      break;
    }
  }
  if (best == state.group_size()) {
    throw Error(ErrorCode::DegenerateAtom, "no admissible candidate remains");
  }
  return best;
}

ResidualState update_residuals(const ResidualState& state, std::size_t chosen,
                               const PairedFeatureSet& set, double lambda) {
  if (chosen >= state.group_size() || state.is_selected(chosen)) {
    throw Error(ErrorCode::DimensionMismatch, "chosen index is out of range or already selected");
  }
  const auto& rec = set.records[state.members[chosen]];
  const std::span<const double> g_t = rec.f_t;
  const std::span<const double> g_s = rec.f_s;
  const double gt_sq = squared_norm(g_t);
  const double gs_sq = squared_norm(g_s);

  ResidualState next = state;
  const std::size_t n = state.group_size();
  Vector row_t(n), row_s(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto w = solve_pair_moments(dot(state.r_t[i], g_t), dot(state.r_s[i], g_s), gt_sq,
                                      gs_sq, lambda);
    row_t[i] = w.w_t;
    row_s[i] = w.w_s;
    for (std::size_t d = 0; d < g_t.size(); ++d) next.r_t[i][d] -= w.w_t * g_t[d];
    for (std::size_t d = 0; d < g_s.size(); ++d) next.r_s[i][d] -= w.w_s * g_s[d];
    const double diff = w.w_t - w.w_s;
    next.coupling_sq += diff * diff;
  }
  next.w_t.push_back(std::move(row_t));
  next.w_s.push_back(std::move(row_s));
  next.selected.push_back(chosen);
  return next;
}

PrototypeSet generate_prototypes(const PairedFeatureSet& set, const GroupKey& group,
                                 const Hyperparams& hyper) {
  check_hyperparams(hyper);
  ResidualState state = initial_state(set, group);

  PrototypeSet out;
  out.group = group;
  out.lambda_used = hyper.lambda;
  out.members = state.members;

  std::size_t steps = hyper.k;
  if (steps > state.group_size()) {
    steps = state.group_size();
    out.capped = true;
    out.warnings.push_back("Capped: requested K=" + std::to_string(hyper.k) + " but " +
                           to_string(group) + " has only " +
                           std::to_string(state.group_size()) + " instances");
  }

  out.objectives.push_back(state.objective(hyper.lambda));
  for (std::size_t step = 0; step < steps; ++step) {
    const std::size_t k = select_next_prototype(state, set, hyper.lambda);
    state = update_residuals(state, k, set, hyper.lambda);
    out.objectives.push_back(state.objective(hyper.lambda));
  }

  for (std::size_t local : state.selected) {
    const std::size_t pos = state.members[local];
    out.positions.push_back(pos);
    out.instance_ids.push_back(set.records[pos].instance_id);
    out.g_t.push_back(set.records[pos].f_t);
    out.g_s.push_back(set.records[pos].f_s);
  }
  out.w_t = std::move(state.w_t);
  out.w_s = std::move(state.w_s);
  return out;
}

PrototypeMap generate_all_groups(const PairedFeatureSet& set, const Hyperparams& hyper) {
  require_valid(set);
  PrototypeMap out;
  for (const auto& key : group_keys(set)) {
    try {
      out.emplace(key, generate_prototypes(set, key, hyper));
    } catch (const Error& e) {
      throw Error(e.code(), to_string(key) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace protokd
