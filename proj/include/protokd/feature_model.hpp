#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace protokd {

using Vector = std::vector<double>;

/// Partition key: prototypes are generated independently per (class, level).
struct GroupKey {
  std::uint32_t class_id = 0;
  std::uint32_t level_id = 0;

  auto operator<=>(const GroupKey&) const = default;
};

std::string to_string(const GroupKey& key);

/// One instance observed in both feature spaces.
struct FeatureRecord {
  std::uint64_t instance_id = 0;
  GroupKey group;
  Vector f_t;
  Vector f_s;
  std::optional<Vector> logits_t;
  std::optional<Vector> logits_s;
  std::optional<bool> ambiguous;

  bool operator==(const FeatureRecord&) const = default;
};

struct PairedFeatureSet {
  std::size_t dim_t = 0;
  std::size_t dim_s = 0;
  std::vector<FeatureRecord> records;

  std::size_t size() const { return records.size(); }
  bool has_logits() const;

  bool operator==(const PairedFeatureSet&) const = default;
};

struct Hyperparams {
  std::size_t k = 10;
  double lambda = 10.0;
  std::size_t refresh_period = 1;
  double alpha_global = 1.0;
  double alpha_feat = 1.0;
  double alpha_resp = 5.0;
  double temperature = 1.0;
};

/// Throws InvalidConfig when a field is out of range.
void check_hyperparams(const Hyperparams& hyper);

struct Violation {
  std::optional<std::size_t> record;  // index into records, absent for set-level issues
  std::string reason;
};

struct ValidationReport {
  std::vector<Violation> violations;
  bool ok() const { return violations.empty(); }
};

ValidationReport validate(const PairedFeatureSet& set);

/// Throws InvalidSet with the first violation when the set is not valid.
void require_valid(const PairedFeatureSet& set);

/// Distinct groups in ascending key order.
std::vector<GroupKey> group_keys(const PairedFeatureSet& set);

/// Positions in `set.records` belonging to `key`, in record order.
std::vector<std::size_t> group_members(const PairedFeatureSet& set, const GroupKey& key);

}  // namespace protokd
