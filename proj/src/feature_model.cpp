#include "protokd/feature_model.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <unordered_set>

#include "protokd/error.hpp"

namespace protokd {

namespace {

bool all_finite(const Vector& v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace

std::string to_string(const GroupKey& key) {
  return "class " + std::to_string(key.class_id) + " level " + std::to_string(key.level_id);
}

bool PairedFeatureSet::has_logits() const {
  return !records.empty() && records.front().logits_t.has_value();
}

void check_hyperparams(const Hyperparams& h) {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::InvalidConfig, what); };
  if (h.k < 1) fail("k must be positive");
  if (!std::isfinite(h.lambda) || h.lambda < 0) fail("lambda must be finite and non-negative");
  if (h.refresh_period < 1) fail("refresh period T must be positive");
  for (double a : {h.alpha_global, h.alpha_feat, h.alpha_resp}) {
    if (!std::isfinite(a) || a < 0) fail("alpha weights must be finite and non-negative");
  }
  if (!std::isfinite(h.temperature) || h.temperature <= 0) fail("temperature must be positive");
}

ValidationReport validate(const PairedFeatureSet& set) {
  ValidationReport report;
  auto add = [&](std::optional<std::size_t> idx, std::string reason) {
    report.violations.push_back({idx, std::move(reason)});
  };

  if (set.dim_t == 0 || set.dim_s == 0) add(std::nullopt, "feature dimensions must be positive");
  if (set.records.empty()) add(std::nullopt, "set has no records");

  std::unordered_set<std::uint64_t> seen_ids;
  std::optional<std::size_t> logit_len;
  for (std::size_t i = 0; i < set.records.size(); ++i) {
    const auto& r = set.records[i];
    if (!seen_ids.insert(r.instance_id).second) {
      add(i, "duplicate instance_id " + std::to_string(r.instance_id));
    }
    if (r.f_t.size() != set.dim_t) add(i, "f_t length differs from D_t");
    if (r.f_s.size() != set.dim_s) add(i, "f_s length differs from D_s");
    if (!all_finite(r.f_t)) add(i, "non-finite value in f_t");
    if (!all_finite(r.f_s)) add(i, "non-finite value in f_s");

    if (r.logits_t.has_value() != r.logits_s.has_value()) {
      add(i, "logits present for only one model");
    } else if (r.logits_t) {
      if (r.logits_t->size() != r.logits_s->size() || r.logits_t->empty()) {
        add(i, "teacher and student logits differ in length");
      } else if (logit_len && *logit_len != r.logits_t->size()) {
        add(i, "logit length differs from other records");
      } else {
        logit_len = r.logits_t->size();
      }
      if (!all_finite(*r.logits_t) || !all_finite(*r.logits_s)) add(i, "non-finite logit");
    }
    if (i > 0 && r.logits_t.has_value() != set.records.front().logits_t.has_value()) {
      add(i, "logits present on some records but not others");
    }
  }
  return report;
}

void require_valid(const PairedFeatureSet& set) {
  const auto report = validate(set);
  if (!report.ok()) {
    const auto& v = report.violations.front();
    std::string where = v.record ? "record " + std::to_string(*v.record) + ": " : "";
    throw Error(ErrorCode::InvalidSet, where + v.reason);
  }
}

std::vector<GroupKey> group_keys(const PairedFeatureSet& set) {
  std::set<GroupKey> keys;
  for (const auto& r : set.records) keys.insert(r.group);
  return {keys.begin(), keys.end()};
}

std::vector<std::size_t> group_members(const PairedFeatureSet& set, const GroupKey& key) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < set.records.size(); ++i) {
    if (set.records[i].group == key) out.push_back(i);
  }
  return out;
}

}  // namespace protokd
