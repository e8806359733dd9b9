#pragma once

// Run configuration file: a flat TOML subset.
//
//   # comment
//   [hyper]
//   k = 10
//   lambda = 10.0
//   [run]
//   input = "data.pfs1"
//
// Values are integers, reals, true/false or double-quoted strings. Unknown
// sections and keys are rejected. Sections: hyper, sim, run.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "json.hpp"
#include "protokd/distill_sim.hpp"
#include "protokd/feature_model.hpp"
#include "protokd/rdm.hpp"

namespace protokd {

struct RunConfig {
  Hyperparams hyper;
  SimConfig sim;
  std::uint64_t seed = 0;
  std::size_t seed_count = 20;  // compare-bases draws seeds seed .. seed+seed_count-1
  std::string input;
  std::string output;
  std::optional<GroupKey> group;
  std::string method = "prototypes";
  bool rectify = false;
  SigmaMode sigma = SigmaMode::Robust;
  ProjectionMode projection = ProjectionMode::Greedy;
  std::size_t histogram_bins = 20;
};

/// Throws InvalidConfig naming the offending line.
RunConfig parse_run_config(std::string_view text);
RunConfig load_run_config(const std::filesystem::path& path);

/// "3" or "3:1" (class:level).
GroupKey parse_group_key(std::string_view text);

/// Effective configuration, all fields, stable key order.
nlohmann::ordered_json to_json(const RunConfig& config);

}  // namespace protokd
