#pragma once

// Feature-level simulation of the periodic-refresh distillation loop. Student
// features and the adaptation matrix are the free parameters; every epoch
// takes a fixed number of plain gradient steps on the weighted distillation
// loss, and prototypes are regenerated from scratch whenever epoch % T == 0.

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "protokd/feature_model.hpp"
#include "protokd/pgm.hpp"
#include "protokd/rdm.hpp"

namespace protokd {

struct SimConfig {
  std::size_t classes = 2;
  std::size_t n_per_class = 200;
  std::size_t dim_t = 16;
  std::size_t dim_s = 16;
  double class_separation = 0.03;        // class centers ~ N(0, class_separation^2 I)
  double teacher_cluster_spread = 0.25;  // per-dimension spread (or latent factor scale)
  std::size_t latent_rank = 0;           // 0 = isotropic clusters
  double residual_spread = 0.0125;       // isotropic jitter added when latent_rank > 0
  double map_distortion = 0.2;           // A = I + map_distortion * G / sqrt(D_t)
  std::uint64_t map_matrix_seed = 1;
  std::uint64_t noise_seed = 2;
  double noise_sigma = 0.0125;
  double ambiguous_fraction = 0.15;
  double ambiguous_noise_multiplier = 20.0;
  double learning_rate = 0.32;
  std::size_t epochs = 20;
  std::size_t steps_per_epoch = 10;
};

/// Throws InvalidConfig.
void check_sim_config(const SimConfig& config);

/// Default noisy fixture with both seeds derived from `seed`.
SimConfig noisy_fixture(std::uint64_t seed);
/// Noise-free, no ambiguous instances, D_t == D_s.
SimConfig noiseless_fixture(std::uint64_t seed);

/// The seeded student map A (D_s x D_t) used by synth_generate.
Eigen::MatrixXd synth_map(const SimConfig& config);

PairedFeatureSet synth_generate(const SimConfig& config);

struct SimOptions {
  RdmOptions rdm;
  bool rectify = false;
};

struct EpochRecord {
  std::size_t epoch = 0;
  bool refreshed = false;
  double global = 0.0;
  double local_feat = 0.0;
  double local_resp = 0.0;
  double total = 0.0;
  double mean_discrepancy = 0.0;  // mean ||lambda_s - lambda_t||
  double sigma_mean_clean = 0.0;
  std::optional<double> sigma_mean_ambiguous;
  std::map<GroupKey, std::vector<std::uint64_t>> prototype_ids;
};

struct SimTrace {
  std::vector<EpochRecord> epochs;  // state at the start of each epoch, after any refresh
  EpochRecord final_state;          // after the last epoch, with the last prototypes
  std::size_t refresh_count = 0;
  std::vector<bool> ambiguous;      // per record
  std::vector<double> final_sigma;  // per record
  PairedFeatureSet final_set;
  AdaptationMap final_adaptation;
};

SimTrace run_distillation(const PairedFeatureSet& set, const Hyperparams& hyper,
                          const SimConfig& config, const SimOptions& options = {});

/// Mann-Whitney AUC of sigma ranking clean instances above ambiguous ones.
/// Absent when either class is empty.
std::optional<double> sigma_separation_auc(const std::vector<double>& sigma,
                                           const std::vector<bool>& ambiguous);

/// Mean ||H(f_s) - f_t|| over instances not flagged ambiguous.
double clean_feature_error(const PairedFeatureSet& set, const AdaptationMap& adapt);

struct SimReport {
  std::vector<double> total_curve;  // one per epoch, then the final value
  std::optional<double> sigma_auc;
  double discrepancy_reduction = 1.0;
  double loss_reduction = 1.0;
  double clean_feature_error = 0.0;
};

SimReport report_metrics(const SimTrace& trace, const PairedFeatureSet& set);

}  // namespace protokd
