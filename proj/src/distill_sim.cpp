#include "protokd/distill_sim.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "protokd/error.hpp"
#include "protokd/rng.hpp"

namespace protokd {

void check_sim_config(const SimConfig& c) {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::InvalidConfig, what); };
  if (c.classes < 1) fail("classes must be at least 1");
  if (c.n_per_class < 2) fail("n_per_class must be at least 2");
  if (c.dim_t < 1 || c.dim_s < 1) fail("feature dimensions must be positive");
  if (!(c.teacher_cluster_spread > 0) || !std::isfinite(c.teacher_cluster_spread)) {
    fail("teacher_cluster_spread must be positive");
  }
  if (!(c.class_separation >= 0) || !std::isfinite(c.class_separation)) {
    fail("class_separation must be non-negative");
  }
  if (c.latent_rank > c.dim_t) fail("latent_rank must not exceed dim_t");
  if (!(c.residual_spread >= 0) || !std::isfinite(c.residual_spread)) {
    fail("residual_spread must be non-negative");
  }
  if (!(c.map_distortion >= 0) || !std::isfinite(c.map_distortion)) {
    fail("map_distortion must be non-negative");
  }
  if (!(c.noise_sigma >= 0) || !std::isfinite(c.noise_sigma)) fail("noise_sigma must be >= 0");
  if (!(c.ambiguous_fraction >= 0 && c.ambiguous_fraction < 1)) {
    fail("ambiguous_fraction must be in [0, 1)");
  }
  if (!(c.ambiguous_noise_multiplier >= 1) || !std::isfinite(c.ambiguous_noise_multiplier)) {
    fail("ambiguous_noise_multiplier must be >= 1");
  }
  if (!(c.learning_rate >= 0) || !std::isfinite(c.learning_rate)) {
    fail("learning_rate must be finite and non-negative");
  }
  if (c.epochs < 1) fail("epochs must be at least 1");
  if (c.steps_per_epoch < 1) fail("steps_per_epoch must be at least 1");
}

SimConfig noisy_fixture(std::uint64_t seed) {
  SimConfig c;
  c.map_matrix_seed = 2 * seed + 1;
  c.noise_seed = 2 * seed + 2;
  return c;
}

SimConfig noiseless_fixture(std::uint64_t seed) {
  SimConfig c = noisy_fixture(seed);
  c.noise_sigma = 0.0;
  c.ambiguous_fraction = 0.0;
  c.dim_s = c.dim_t;
  return c;
}

Eigen::MatrixXd synth_map(const SimConfig& config) {
  const auto ds = static_cast<Eigen::Index>(config.dim_s);
  const auto dt = static_cast<Eigen::Index>(config.dim_t);
  Rng rng(config.map_matrix_seed);
  Eigen::MatrixXd a = Eigen::MatrixXd::Identity(ds, dt);
  const double scale = config.map_distortion / std::sqrt(static_cast<double>(dt));
  for (Eigen::Index r = 0; r < ds; ++r) {
    for (Eigen::Index c = 0; c < dt; ++c) a(r, c) += scale * rng.normal();
  }
  return a;
}

PairedFeatureSet synth_generate(const SimConfig& config) {
  check_sim_config(config);
  const Eigen::MatrixXd map = synth_map(config);
  Rng rng(config.noise_seed);

  const std::size_t total = config.classes * config.n_per_class;
  const auto n_ambiguous = static_cast<std::size_t>(
      std::floor(config.ambiguous_fraction * static_cast<double>(total) + 0.5));
  std::vector<std::size_t> order(total);
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = 0; i < n_ambiguous; ++i) {
    std::swap(order[i], order[i + rng.below(total - i)]);
  }
  std::vector<bool> ambiguous(total, false);
  for (std::size_t i = 0; i < n_ambiguous; ++i) ambiguous[order[i]] = true;

  const auto dt = static_cast<Eigen::Index>(config.dim_t);
  const auto rank = static_cast<Eigen::Index>(config.latent_rank);
  std::vector<Eigen::VectorXd> centers;
  std::vector<Eigen::MatrixXd> factors;
  for (std::size_t c = 0; c < config.classes; ++c) {
    Eigen::VectorXd mu(dt);
    for (auto& v : mu) v = config.class_separation * rng.normal();
    centers.push_back(std::move(mu));
    Eigen::MatrixXd b(dt, rank);
    for (Eigen::Index i = 0; i < b.size(); ++i) b.data()[i] = rng.normal();
    if (rank > 0) b /= std::sqrt(static_cast<double>(dt));
    factors.push_back(std::move(b));
  }

  PairedFeatureSet set;
  set.dim_t = config.dim_t;
  set.dim_s = config.dim_s;
  for (std::size_t c = 0; c < config.classes; ++c) {
    for (std::size_t j = 0; j < config.n_per_class; ++j) {
      const std::size_t id = c * config.n_per_class + j;
      Eigen::VectorXd f_t = centers[c];
      if (rank == 0) {
        for (auto& v : f_t) v += config.teacher_cluster_spread * rng.normal();
      } else {
        Eigen::VectorXd z(rank);
        for (auto& v : z) v = config.teacher_cluster_spread * rng.normal();
        f_t += factors[c] * z;
        for (auto& v : f_t) v += config.residual_spread * rng.normal();
      }
      Eigen::VectorXd f_s = map * f_t;
      const double noise =
          config.noise_sigma * (ambiguous[id] ? config.ambiguous_noise_multiplier : 1.0);
      if (noise > 0.0) {
        for (auto& v : f_s) v += noise * rng.normal();
      }
      FeatureRecord r;
      r.instance_id = id;
      r.group = {static_cast<std::uint32_t>(c), 0};
      r.f_t.assign(f_t.begin(), f_t.end());
      r.f_s.assign(f_s.begin(), f_s.end());
      r.ambiguous = static_cast<bool>(ambiguous[id]);
      set.records.push_back(std::move(r));
    }
  }
  return set;
}

namespace {

EpochRecord snapshot(const PairedFeatureSet& set, const PrototypeMap& protos,
                     const LossBreakdown& loss, const Hyperparams& hyper,
                     const RdmOptions& rdm) {
  EpochRecord rec;
  rec.global = loss.global;
  rec.local_feat = loss.local_feat;
  rec.local_resp = loss.local_resp;
  rec.total = loss.total;

  const auto projections = project_all(set, protos, hyper.lambda, rdm.projection);
  double disc = 0.0, clean_sum = 0.0, amb_sum = 0.0;
  std::size_t clean_n = 0, amb_n = 0;
  for (std::size_t i = 0; i < set.size(); ++i) {
    double sq = 0.0;
    for (std::size_t j = 0; j < projections[i].lambda_t.size(); ++j) {
      const double d = projections[i].lambda_s[j] - projections[i].lambda_t[j];
      sq += d * d;
    }
    disc += std::sqrt(sq);
    if (set.records[i].ambiguous.value_or(false)) {
      amb_sum += loss.sigma[i];
      ++amb_n;
    } else {
      clean_sum += loss.sigma[i];
      ++clean_n;
    }
  }
  rec.mean_discrepancy = set.size() ? disc / static_cast<double>(set.size()) : 0.0;
  rec.sigma_mean_clean = clean_n ? clean_sum / static_cast<double>(clean_n) : 0.0;
  if (amb_n) rec.sigma_mean_ambiguous = amb_sum / static_cast<double>(amb_n);
  for (const auto& [key, ps] : protos) rec.prototype_ids[key] = ps.instance_ids;
  return rec;
}

}  // namespace

SimTrace run_distillation(const PairedFeatureSet& set, const Hyperparams& hyper,
                          const SimConfig& config, const SimOptions& options) {
  check_hyperparams(hyper);
  check_sim_config(config);
  require_valid(set);

  SimTrace trace;
  PairedFeatureSet current = set;
  AdaptationMap adapt = AdaptationMap::identity(set.dim_t, set.dim_s, options.rectify);
  PrototypeMap protos;
  const double lr = config.learning_rate;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const bool refresh = epoch % hyper.refresh_period == 0;
    if (refresh) {
      protos = generate_all_groups(current, hyper);
      ++trace.refresh_count;
    }
    LossBreakdown loss = total_loss(current, protos, adapt, hyper, options.rdm);
    EpochRecord rec = snapshot(current, protos, loss, hyper, options.rdm);
    rec.epoch = epoch;
    rec.refreshed = refresh;
    trace.epochs.push_back(std::move(rec));

    for (std::size_t step = 0; step < config.steps_per_epoch; ++step) {
      if (step > 0) loss = total_loss(current, protos, adapt, hyper, options.rdm);
      for (std::size_t i = 0; i < current.size(); ++i) {
        auto& f_s = current.records[i].f_s;
        for (std::size_t d = 0; d < f_s.size(); ++d) f_s[d] -= lr * loss.grad_student[i][d];
      }
      adapt.matrix -= lr * loss.grad_adaptation;
    }
  }

  const LossBreakdown final_loss = total_loss(current, protos, adapt, hyper, options.rdm);
  trace.final_state = snapshot(current, protos, final_loss, hyper, options.rdm);
  trace.final_state.epoch = config.epochs;
  trace.final_sigma = final_loss.sigma;
  for (const auto& r : current.records) trace.ambiguous.push_back(r.ambiguous.value_or(false));
  trace.final_set = std::move(current);
  trace.final_adaptation = std::move(adapt);
  return trace;
}

std::optional<double> sigma_separation_auc(const std::vector<double>& sigma,
                                           const std::vector<bool>& ambiguous) {
  std::vector<double> clean, amb;
  for (std::size_t i = 0; i < sigma.size(); ++i) (ambiguous[i] ? amb : clean).push_back(sigma[i]);
  if (clean.empty() || amb.empty()) return std::nullopt;
  double wins = 0.0;
  for (double c : clean) {
    for (double a : amb) {
      if (c > a) {
        wins += 1.0;
      } else if (c == a) {
        wins += 0.5;
      }
    }
  }
  return wins / (static_cast<double>(clean.size()) * static_cast<double>(amb.size()));
}

double clean_feature_error(const PairedFeatureSet& set, const AdaptationMap& adapt) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& r : set.records) {
    if (r.ambiguous.value_or(false)) continue;
    const Eigen::Map<const Eigen::VectorXd> f_s(r.f_s.data(), static_cast<Eigen::Index>(r.f_s.size()));
    const Eigen::Map<const Eigen::VectorXd> f_t(r.f_t.data(), static_cast<Eigen::Index>(r.f_t.size()));
    Eigen::VectorXd h = adapt.matrix * f_s;
    if (adapt.rectify) h = h.cwiseMax(0.0);
    sum += (h - f_t).norm();
    ++n;
  }
  return n ? sum / static_cast<double>(n) : 0.0;
}

SimReport report_metrics(const SimTrace& trace, const PairedFeatureSet& set) {
  SimReport report;
  for (const auto& e : trace.epochs) report.total_curve.push_back(e.total);
  report.total_curve.push_back(trace.final_state.total);

  std::vector<bool> flags;
  for (const auto& r : set.records) flags.push_back(r.ambiguous.value_or(false));
  report.sigma_auc = sigma_separation_auc(trace.final_sigma, flags);

  const double initial = trace.epochs.empty() ? 0.0 : trace.epochs.front().mean_discrepancy;
  const double final = trace.final_state.mean_discrepancy;
  report.discrepancy_reduction = final > 0.0 ? initial / final : (initial > 0.0 ? INFINITY : 1.0);
  const double l0 = trace.epochs.empty() ? 0.0 : trace.epochs.front().total;
  const double l1 = trace.final_state.total;
  report.loss_reduction = l1 > 0.0 ? l0 / l1 : (l0 > 0.0 ? INFINITY : 1.0);
  report.clean_feature_error = clean_feature_error(trace.final_set, trace.final_adaptation);
  return report;
}

}  // namespace protokd
