#include "protokd/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "protokd/error.hpp"
#include "protokd/linalg.hpp"
#include "protokd/pgm.hpp"
#include "protokd/rng.hpp"

namespace protokd {

using detail::dot;

namespace {

std::vector<std::size_t> members_or_throw(const PairedFeatureSet& set, const GroupKey& group,
                                          std::size_t k) {
  auto members = group_members(set, group);
  if (members.empty()) throw Error(ErrorCode::EmptyGroup, "no records in " + to_string(group));
  if (k > members.size()) {
    throw Error(ErrorCode::KTooLarge, "k=" + std::to_string(k) + " exceeds group size " +
                                          std::to_string(members.size()));
  }
  return members;
}

BasisSelection make_selection(const PairedFeatureSet& set, BasisMethod method,
                              const GroupKey& group, std::vector<std::size_t> positions) {
  BasisSelection out{method, group, std::move(positions), {}};
  for (std::size_t pos : out.positions) out.instance_ids.push_back(set.records[pos].instance_id);
  return out;
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

}  // namespace

std::string_view method_name(BasisMethod method) {
  switch (method) {
    case BasisMethod::Prototypes: return "prototypes";
    case BasisMethod::KMeansTeacher: return "kmeans_teacher";
    case BasisMethod::KMeansStudent: return "kmeans_student";
    case BasisMethod::Random: return "random";
    case BasisMethod::Ambiguous: return "ambiguous";
  }
  return "unknown";
}

BasisMethod parse_method(std::string_view name) {
  for (auto m : kAllBasisMethods) {
    if (method_name(m) == name) return m;
  }
  throw Error(ErrorCode::InvalidConfig, "unknown basis method '" + std::string(name) + "'");
}

BasisSelection kmeans_select(const PairedFeatureSet& set, const GroupKey& group,
                             FeatureSpace space, std::size_t k, std::uint64_t seed) {
  const auto members = members_or_throw(set, group, k);
  const std::size_t n = members.size();
  const auto point = [&](std::size_t local) -> const Vector& {
    const auto& r = set.records[members[local]];
    return space == FeatureSpace::Teacher ? r.f_t : r.f_s;
  };
  if (k == 0) return make_selection(set, space == FeatureSpace::Teacher
                                             ? BasisMethod::KMeansTeacher
                                             : BasisMethod::KMeansStudent,
                                    group, {});

  // k-means++ seeding
  Rng rng(seed);
  std::vector<Vector> centroids;
  std::vector<bool> used(n, false);
  std::size_t first = rng.below(n);
  centroids.push_back(point(first));
  used[first] = true;
  std::vector<double> nearest(n);
  for (std::size_t i = 0; i < n; ++i) nearest[i] = squared_distance(point(i), centroids[0]);
  while (centroids.size() < k) {
    const double total = std::accumulate(nearest.begin(), nearest.end(), 0.0);
    std::size_t pick = n;
    if (total > 0.0) {
      double target = rng.uniform() * total;
      for (std::size_t i = 0; i < n; ++i) {
        if (nearest[i] <= 0.0) continue;
        pick = i;
        target -= nearest[i];
        if (target < 0.0) break;
      }
    } else {
      // every point coincides with a centroid; take an unused one at random
      std::vector<std::size_t> free;
      for (std::size_t i = 0; i < n; ++i) {
        if (!used[i]) free.push_back(i);
      }
      pick = free[rng.below(free.size())];
    }
    used[pick] = true;
    centroids.push_back(point(pick));
    for (std::size_t i = 0; i < n; ++i) {
      nearest[i] = std::min(nearest[i], squared_distance(point(i), centroids.back()));
    }
  }

  // Lloyd iterations
  std::vector<std::size_t> assign(n, k);
  for (int iter = 0; iter < 300; ++iter) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t best = 0;
      double best_d = squared_distance(point(i), centroids[0]);
      for (std::size_t c = 1; c < k; ++c) {
        const double d = squared_distance(point(i), centroids[c]);
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      if (assign[i] != best) {
        assign[i] = best;
        changed = true;
      }
    }
    if (!changed) break;
    for (std::size_t c = 0; c < k; ++c) {
      Vector sum(point(0).size(), 0.0);
      std::size_t count = 0;
      for (std::size_t i = 0; i < n; ++i) {
        if (assign[i] != c) continue;
        for (std::size_t d = 0; d < sum.size(); ++d) sum[d] += point(i)[d];
        ++count;
      }
      if (count == 0) continue;  // empty cluster keeps its centroid
      for (double& v : sum) v /= static_cast<double>(count);
      centroids[c] = std::move(sum);
    }
  }

  // nearest unused instance per centroid
  std::vector<bool> taken(n, false);
  std::vector<std::size_t> positions;
  for (std::size_t c = 0; c < k; ++c) {
    std::size_t best = n;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
      if (taken[i]) continue;
      const double d = squared_distance(point(i), centroids[c]);
      if (best == n || d < best_d) {
        best = i;
        best_d = d;
      }
    }
    taken[best] = true;
    positions.push_back(members[best]);
  }
  return make_selection(
      set, space == FeatureSpace::Teacher ? BasisMethod::KMeansTeacher : BasisMethod::KMeansStudent,
      group, std::move(positions));
}

BasisSelection random_select(const PairedFeatureSet& set, const GroupKey& group, std::size_t k,
                             std::uint64_t seed) {
  auto members = members_or_throw(set, group, k);
  Rng rng(seed);
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + rng.below(members.size() - i);
    std::swap(members[i], members[j]);
  }
  members.resize(k);
  return make_selection(set, BasisMethod::Random, group, std::move(members));
}

double cosine(std::span<const double> a, std::span<const double> b) {
  const double na = std::sqrt(dot(a, a));
  const double nb = std::sqrt(dot(b, b));
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot(a, b) / (na * nb);
}

std::vector<double> ambiguity_scores(const PairedFeatureSet& set, const GroupKey& group) {
  const auto members = group_members(set, group);
  std::vector<double> scores(members.size(), 0.0);
  for (std::size_t i = 0; i < members.size(); ++i) {
    const auto& ri = set.records[members[i]];
    for (std::size_t b = 0; b < members.size(); ++b) {
      const auto& rb = set.records[members[b]];
      scores[i] += std::abs(cosine(ri.f_t, rb.f_t) - cosine(ri.f_s, rb.f_s));
    }
  }
  return scores;
}

BasisSelection ambiguous_select(const PairedFeatureSet& set, const GroupKey& group,
                                std::size_t k) {
  const auto members = members_or_throw(set, group, k);
  const auto scores = ambiguity_scores(set, group);
  std::vector<std::size_t> order(members.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  std::vector<std::size_t> positions;
  for (std::size_t i = 0; i < k; ++i) positions.push_back(members[order[i]]);
  return make_selection(set, BasisMethod::Ambiguous, group, std::move(positions));
}

BasisSelection prototype_select(const PairedFeatureSet& set, const GroupKey& group,
                                const Hyperparams& hyper) {
  auto protos = generate_prototypes(set, group, hyper);
  return make_selection(set, BasisMethod::Prototypes, group, std::move(protos.positions));
}

Histogram make_histogram(std::span<const double> values, double lo, double hi, std::size_t bins) {
  Histogram h{lo, hi, std::vector<std::size_t>(std::max<std::size_t>(bins, 1), 0)};
  const double width = (hi - lo) / static_cast<double>(h.counts.size());
  for (double v : values) {
    std::size_t bin = 0;
    if (width > 0.0) {
      const double t = std::floor((v - lo) / width);
      bin = t <= 0.0 ? 0 : std::min(static_cast<std::size_t>(t), h.counts.size() - 1);
    }
    ++h.counts[bin];
  }
  return h;
}

double median(std::vector<double> values) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const std::size_t mid = values.size() / 2;
  return values.size() % 2 ? values[mid] : 0.5 * (values[mid - 1] + values[mid]);
}

DiscrepancyProfile relation_discrepancy_profile(const PairedFeatureSet& set,
                                                const GroupKey& group,
                                                const BasisSelection& basis, std::size_t bins) {
  if (basis.positions.empty()) throw Error(ErrorCode::EmptyBasis, "basis is empty");
  for (std::size_t pos : basis.positions) {
    if (pos >= set.size() || !(set.records[pos].group == group)) {
      throw Error(ErrorCode::DimensionMismatch, "basis index outside " + to_string(group));
    }
  }
  DiscrepancyProfile out;
  out.group = group;
  for (std::size_t pos : group_members(set, group)) {
    if (std::find(basis.positions.begin(), basis.positions.end(), pos) !=
        basis.positions.end()) {
      continue;
    }
    const auto& r = set.records[pos];
    double d = 0.0;
    for (std::size_t b : basis.positions) {
      const auto& g = set.records[b];
      d += std::abs(cosine(r.f_t, g.f_t) - cosine(r.f_s, g.f_s));
    }
    out.positions.push_back(pos);
    out.discrepancy.push_back(d);
  }
  if (!out.discrepancy.empty()) {
    out.mean = std::accumulate(out.discrepancy.begin(), out.discrepancy.end(), 0.0) /
               static_cast<double>(out.discrepancy.size());
  }
  out.median = median(out.discrepancy);
  const double hi = out.discrepancy.empty()
                        ? 0.0
                        : *std::max_element(out.discrepancy.begin(), out.discrepancy.end());
  out.histogram = make_histogram(out.discrepancy, 0.0, hi, bins);
  return out;
}

const MethodSummary& BasisComparison::get(BasisMethod method) const {
  for (const auto& m : methods) {
    if (m.method == method) return m;
  }
  throw Error(ErrorCode::InvalidConfig, "method missing from comparison");
}

BasisComparison compare_bases(const PairedFeatureSet& set, const Hyperparams& hyper,
                              std::span<const std::uint64_t> seeds, std::size_t bins) {
  require_valid(set);
  const auto keys = group_keys(set);

  // seed-independent selections
  std::vector<BasisSelection> protos, ambiguous;
  for (const auto& key : keys) {
    protos.push_back(prototype_select(set, key, hyper));
    ambiguous.push_back(ambiguous_select(set, key, protos.back().positions.size()));
  }

  BasisComparison out;
  out.seeds.assign(seeds.begin(), seeds.end());
  std::vector<std::vector<double>> pooled(std::size(kAllBasisMethods));
  for (std::size_t m = 0; m < std::size(kAllBasisMethods); ++m) {
    out.methods.push_back({kAllBasisMethods[m], {}, 0.0, 0.0, {}});
  }

  for (std::uint64_t seed : seeds) {
    for (std::size_t m = 0; m < std::size(kAllBasisMethods); ++m) {
      const auto method = kAllBasisMethods[m];
      std::vector<double> values;
      for (std::size_t g = 0; g < keys.size(); ++g) {
        const std::size_t k = protos[g].positions.size();
        // distinct streams per group so groups do not share draws
        const std::uint64_t group_seed = seed * 1000003ULL + g;
        BasisSelection basis;
        switch (method) {
          case BasisMethod::Prototypes: basis = protos[g]; break;
          case BasisMethod::Ambiguous: basis = ambiguous[g]; break;
          case BasisMethod::Random: basis = random_select(set, keys[g], k, group_seed); break;
          case BasisMethod::KMeansTeacher:
            basis = kmeans_select(set, keys[g], FeatureSpace::Teacher, k, group_seed);
            break;
          case BasisMethod::KMeansStudent:
            basis = kmeans_select(set, keys[g], FeatureSpace::Student, k, group_seed);
            break;
        }
        const auto profile = relation_discrepancy_profile(set, keys[g], basis, bins);
        values.insert(values.end(), profile.discrepancy.begin(), profile.discrepancy.end());
      }
      const double mean =
          values.empty() ? 0.0
                         : std::accumulate(values.begin(), values.end(), 0.0) /
                               static_cast<double>(values.size());
      out.methods[m].seed_means.push_back(mean);
      pooled[m].insert(pooled[m].end(), values.begin(), values.end());
    }
  }

  double hi = 0.0;
  for (const auto& values : pooled) {
    for (double v : values) hi = std::max(hi, v);
  }
  for (std::size_t m = 0; m < out.methods.size(); ++m) {
    auto& summary = out.methods[m];
    const auto& values = pooled[m];
    if (!values.empty()) {
      summary.mean = std::accumulate(values.begin(), values.end(), 0.0) /
                     static_cast<double>(values.size());
    }
    summary.median = median(values);
    summary.histogram = make_histogram(values, 0.0, hi, bins);
  }
  return out;
}

}  // namespace protokd
