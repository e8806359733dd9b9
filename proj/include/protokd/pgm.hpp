#pragma once

// Prototype generation: greedy joint matching pursuit over the teacher and
// student spaces. Each step picks the instance whose feature pair, used as a
// shared atom in both spaces, most reduces
//
//   sum_i ||r_t,i||^2 + sum_i ||r_s,i||^2 + lambda * sum_i sum_k (w_t,ki - w_s,ki)^2
//
// with per-instance coefficients from the coupled 2x2 solve. Previously
// chosen coefficients are never refit.

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "protokd/feature_model.hpp"

namespace protokd {

struct CoefficientPair {
  double w_t = 0.0;
  double w_s = 0.0;
};

/// Minimizer of ||r_t - w_t g_t||^2 + ||r_s - w_s g_s||^2 + lambda (w_t - w_s)^2.
///
/// With a = <r_t,g_t>, b = <r_s,g_s>, p = lambda + |g_t|^2, q = lambda + |g_s|^2
/// the stationarity conditions give w_t = (a q + lambda b) / (p q - lambda^2) and
/// w_s = (b p + lambda a) / (p q - lambda^2). When p q - lambda^2 is below
/// 1e-12 * max(1, lambda^2): lambda > 0 means both atoms are null and (0, 0) is
/// returned; lambda == 0 throws DegenerateAtom.
CoefficientPair solve_pair_coefficients(std::span<const double> r_t, std::span<const double> r_s,
                                        std::span<const double> g_t, std::span<const double> g_s,
                                        double lambda);

/// Same solve from the sufficient statistics (a, b, |g_t|^2, |g_s|^2).
CoefficientPair solve_pair_moments(double a, double b, double gt_sq, double gs_sq, double lambda);

/// Greedy state for one group. Residuals and coefficient columns are indexed by
/// group-local position (0..N-1, record order within the group).
struct ResidualState {
  std::vector<std::size_t> members;  // positions into set.records
  std::vector<Vector> r_t;
  std::vector<Vector> r_s;
  std::vector<Vector> w_t;  // one row per selected prototype, N columns
  std::vector<Vector> w_s;
  std::vector<std::size_t> selected;  // group-local positions, in selection order
  double coupling_sq = 0.0;           // sum_i sum_k (w_t - w_s)^2 over selected rows

  std::size_t group_size() const { return members.size(); }
  bool is_selected(std::size_t local) const;
  /// Current objective L_n.
  double objective(double lambda) const;
};

/// State with zero prototypes: residuals equal the features.
ResidualState initial_state(const PairedFeatureSet& set, const GroupKey& group);

/// L_{n+1} if `candidate` (group-local) became the next prototype. Pure.
double candidate_objective(const ResidualState& state, std::size_t candidate,
                           const PairedFeatureSet& set, double lambda);

/// Candidate objectives closer than this times the group energy
/// (sum of |f_t|^2 + |f_s|^2) are treated as equal.
inline constexpr double kTieRelTolerance = 1e-12;

/// Unselected admissible candidate with the smallest objective; ties go to the
/// lowest position. Throws Exhausted when nothing is left and DegenerateAtom
/// when every remaining candidate is degenerate.
std::size_t select_next_prototype(const ResidualState& state, const PairedFeatureSet& set,
                                  double lambda);

ResidualState update_residuals(const ResidualState& state, std::size_t chosen,
                               const PairedFeatureSet& set, double lambda);

struct PrototypeSet {
  GroupKey group;
  std::vector<std::size_t> positions;        // into set.records, selection order
  std::vector<std::uint64_t> instance_ids;   // same order
  std::vector<Vector> g_t;
  std::vector<Vector> g_s;
  std::vector<std::size_t> members;          // group positions into set.records
  std::vector<Vector> w_t;                   // K' x N
  std::vector<Vector> w_s;
  std::vector<double> objectives;            // L_0 .. L_K'
  double lambda_used = 0.0;
  bool capped = false;                       // requested K exceeded the group size
  std::vector<std::string> warnings;

  std::size_t size() const { return positions.size(); }
};

using PrototypeMap = std::map<GroupKey, PrototypeSet>;

PrototypeSet generate_prototypes(const PairedFeatureSet& set, const GroupKey& group,
                                 const Hyperparams& hyper);

/// Validates the set, then runs generate_prototypes for every group. Errors are
/// rethrown with the group named in the message.
PrototypeMap generate_all_groups(const PairedFeatureSet& set, const Hyperparams& hyper);

}  // namespace protokd
