#pragma once

// Alternative basis selections and the cross-space relation discrepancy used
// to compare them. For a basis B and a non-basis instance i the discrepancy is
//
//   d_i = sum_{b in B} | cos(f_t,i, f_t,b) - cos(f_s,i, f_s,b) |
//
// with cos(x, 0) defined as 0.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "protokd/feature_model.hpp"

namespace protokd {

enum class BasisMethod { Prototypes, KMeansTeacher, KMeansStudent, Random, Ambiguous };

inline constexpr BasisMethod kAllBasisMethods[] = {
    BasisMethod::Prototypes, BasisMethod::KMeansTeacher, BasisMethod::KMeansStudent,
    BasisMethod::Random, BasisMethod::Ambiguous};

std::string_view method_name(BasisMethod method);
/// Inverse of method_name; throws InvalidConfig.
BasisMethod parse_method(std::string_view name);

enum class FeatureSpace { Teacher, Student };

struct BasisSelection {
  BasisMethod method = BasisMethod::Prototypes;
  GroupKey group;
  std::vector<std::size_t> positions;  // into set.records
  std::vector<std::uint64_t> instance_ids;
};

/// Lloyd's algorithm with k-means++ seeding in one space; each centroid is
/// replaced by its nearest unused instance. Throws KTooLarge when k > N.
BasisSelection kmeans_select(const PairedFeatureSet& set, const GroupKey& group,
                             FeatureSpace space, std::size_t k, std::uint64_t seed);

BasisSelection random_select(const PairedFeatureSet& set, const GroupKey& group, std::size_t k,
                             std::uint64_t seed);

/// Per-member discrepancy against the whole group, in group order.
std::vector<double> ambiguity_scores(const PairedFeatureSet& set, const GroupKey& group);

/// Top-k ambiguity scores; ties go to the lower position.
BasisSelection ambiguous_select(const PairedFeatureSet& set, const GroupKey& group,
                                std::size_t k);

/// PGM prototypes wrapped as a selection.
BasisSelection prototype_select(const PairedFeatureSet& set, const GroupKey& group,
                                const Hyperparams& hyper);

struct Histogram {
  double lo = 0.0;
  double hi = 0.0;
  std::vector<std::size_t> counts;
};

Histogram make_histogram(std::span<const double> values, double lo, double hi, std::size_t bins);

struct DiscrepancyProfile {
  GroupKey group;
  std::vector<std::size_t> positions;  // non-basis instances
  std::vector<double> discrepancy;     // aligned with positions
  double mean = 0.0;
  double median = 0.0;
  Histogram histogram;
};

/// cos(a, b), 0 when either vector has zero norm.
double cosine(std::span<const double> a, std::span<const double> b);

double median(std::vector<double> values);

DiscrepancyProfile relation_discrepancy_profile(const PairedFeatureSet& set,
                                                const GroupKey& group,
                                                const BasisSelection& basis,
                                                std::size_t bins = 20);

struct MethodSummary {
  BasisMethod method = BasisMethod::Prototypes;
  std::vector<double> seed_means;  // pooled mean per seed
  double mean = 0.0;               // over all pooled values and seeds
  double median = 0.0;
  Histogram histogram;
};

struct BasisComparison {
  std::vector<std::uint64_t> seeds;
  std::vector<MethodSummary> methods;  // kAllBasisMethods order

  const MethodSummary& get(BasisMethod method) const;
};

/// Runs every method with K matched to the prototype count of each group and
/// pools discrepancies across groups. Seeds drive k-means and random.
BasisComparison compare_bases(const PairedFeatureSet& set, const Hyperparams& hyper,
                              std::span<const std::uint64_t> seeds, std::size_t bins = 20);

}  // namespace protokd
