#include <cmath>

#include "doctest.h"
#include "oracles.hpp"
#include "protokd/distill_sim.hpp"
#include "protokd/error.hpp"

using namespace protokd;

namespace {

SimConfig small_config() {
  SimConfig c = noisy_fixture(4);
  c.n_per_class = 30;
  c.epochs = 4;
  c.steps_per_epoch = 3;
  return c;
}

}  // namespace

TEST_CASE("synth: noiseless map, ambiguous count, determinism") {
  SimConfig c = small_config();
  c.noise_sigma = 0.0;
  c.ambiguous_fraction = 0.0;
  auto set = synth_generate(c);
  const auto a = synth_map(c);
  for (const auto& r : set.records) {
    Eigen::Map<const Eigen::VectorXd> ft(r.f_t.data(), r.f_t.size());
    const Eigen::VectorXd expect = a * ft;
    for (std::size_t d = 0; d < r.f_s.size(); ++d) CHECK(r.f_s[d] == expect(d));
    CHECK(r.ambiguous == std::optional<bool>(false));
  }

  c = small_config();
  c.ambiguous_fraction = 0.25;
  c.n_per_class = 8;
  c.classes = 2;
  set = synth_generate(c);
  std::size_t flagged = 0;
  for (const auto& r : set.records) flagged += r.ambiguous.value_or(false) ? 1 : 0;
  CHECK(flagged == 4);
  CHECK(synth_generate(c) == set);

  c.classes = 0;
  CHECK_THROWS_AS(synth_generate(c), Error);
}

TEST_CASE("simulate: frozen run") {
  auto c = small_config();
  c.learning_rate = 0.0;
  const auto set = synth_generate(c);
  const auto trace = run_distillation(set, Hyperparams{}, c);
  CHECK(trace.epochs.size() == c.epochs);
  CHECK(trace.final_set == set);
  for (const auto& e : trace.epochs) CHECK(e.total == trace.epochs.front().total);
  const auto report = report_metrics(trace, set);
  CHECK(report.discrepancy_reduction == 1.0);
}

TEST_CASE("simulate: refresh bookkeeping and teacher immutability") {
  auto c = small_config();
  const auto set = synth_generate(c);
  Hyperparams hyper;
  hyper.refresh_period = 1;
  auto trace = run_distillation(set, hyper, c);
  CHECK(trace.refresh_count == c.epochs);
  hyper.refresh_period = c.epochs;
  trace = run_distillation(set, hyper, c);
  CHECK(trace.refresh_count == 1);
  CHECK(trace.epochs[0].refreshed);
  CHECK_FALSE(trace.epochs[1].refreshed);
  for (std::size_t i = 0; i < set.size(); ++i) {
    CHECK(trace.final_set.records[i].f_t == set.records[i].f_t);
  }
}

TEST_CASE("simulate: determinism and finite trace") {
  const auto c = small_config();
  const auto set = synth_generate(c);
  const auto a = run_distillation(set, Hyperparams{}, c);
  const auto b = run_distillation(set, Hyperparams{}, c);
  CHECK(a.final_set == b.final_set);
  CHECK(a.final_sigma == b.final_sigma);
  for (std::size_t e = 0; e < a.epochs.size(); ++e) {
    CHECK(a.epochs[e].total == b.epochs[e].total);
    CHECK(std::isfinite(a.epochs[e].total));
    CHECK(a.epochs[e].prototype_ids == b.epochs[e].prototype_ids);
  }
}

TEST_CASE("report: recomputation from the stored trace") {
  const auto c = small_config();
  const auto set = synth_generate(c);
  const auto trace = run_distillation(set, Hyperparams{}, c);
  const auto report = report_metrics(trace, set);

  double pairs = 0.0, wins = 0.0;
  for (std::size_t i = 0; i < set.size(); ++i) {
    if (*set.records[i].ambiguous) continue;
    for (std::size_t j = 0; j < set.size(); ++j) {
      if (!*set.records[j].ambiguous) continue;
      pairs += 1.0;
      const double si = trace.final_sigma[i], sj = trace.final_sigma[j];
      wins += si > sj ? 1.0 : (si == sj ? 0.5 : 0.0);
    }
  }
  REQUIRE(report.sigma_auc.has_value());
  CHECK(*report.sigma_auc == doctest::Approx(wins / pairs).epsilon(1e-12));
  CHECK(report.discrepancy_reduction ==
        doctest::Approx(trace.epochs.front().mean_discrepancy / trace.final_state.mean_discrepancy));
  REQUIRE(report.total_curve.size() == c.epochs + 1);
  CHECK(report.total_curve.back() == trace.final_state.total);

  auto clean = c;
  clean.ambiguous_fraction = 0.0;
  const auto cs = synth_generate(clean);
  const auto ct = run_distillation(cs, Hyperparams{}, clean);
  CHECK_FALSE(report_metrics(ct, cs).sigma_auc.has_value());
}

TEST_CASE("auc helper") {
  CHECK(*sigma_separation_auc({0.9, 0.8, 0.1}, {false, false, true}) == 1.0);
  CHECK(*sigma_separation_auc({0.1, 0.8}, {false, true}) == 0.0);
  CHECK(*sigma_separation_auc({0.5, 0.5}, {false, true}) == 0.5);
  CHECK_FALSE(sigma_separation_auc({0.5, 0.5}, {false, false}).has_value());
}
