#include <cmath>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "protokd/error.hpp"
#include "protokd/pgm.hpp"
#include "protokd/rdm.hpp"

using namespace protokd;

namespace {

PrototypeSet random_protos(std::mt19937_64& gen, std::size_t k, std::size_t dt, std::size_t ds,
                           double lambda) {
  PrototypeSet ps;
  for (std::size_t i = 0; i < k; ++i) {
    ps.g_t.push_back(oracle::gaussian(gen, dt));
    ps.g_s.push_back(oracle::gaussian(gen, ds));
    ps.positions.push_back(i);
    ps.instance_ids.push_back(i);
  }
  ps.lambda_used = lambda;
  return ps;
}

std::vector<double> flatten_student(const PairedFeatureSet& set) {
  std::vector<double> x;
  for (const auto& r : set.records) x.insert(x.end(), r.f_s.begin(), r.f_s.end());
  return x;
}

void unflatten_student(PairedFeatureSet& set, const std::vector<double>& x) {
  std::size_t p = 0;
  for (auto& r : set.records) {
    for (auto& v : r.f_s) v = x[p++];
  }
}

std::vector<double> flatten(const std::vector<Vector>& rows) {
  std::vector<double> x;
  for (const auto& r : rows) x.insert(x.end(), r.begin(), r.end());
  return x;
}

}  // namespace

TEST_CASE("project: orthogonal exact recovery and zero input") {
  PrototypeSet ps;
  ps.g_t = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
  ps.g_s = {{1, 0, 0}, {0, 2, 0}, {0, 0, 3}};
  ps.positions = {0, 1, 2};
  for (std::size_t k = 0; k < 3; ++k) {
    const auto pp = project(ps.g_t[k], ps.g_s[k], ps, 0.0);
    for (std::size_t j = 0; j < 3; ++j) {
      CHECK(pp.lambda_t[j] == doctest::Approx(j == k ? 1.0 : 0.0));
      CHECK(pp.lambda_s[j] == doctest::Approx(j == k ? 1.0 : 0.0));
    }
  }
  const auto zero = project(Vector(3, 0.0), Vector(3, 0.0), ps, 5.0);
  for (double v : zero.lambda_t) CHECK(v == 0.0);
  for (double v : zero.lambda_s) CHECK(v == 0.0);
  CHECK_THROWS_AS(project(Vector(2, 0.0), Vector(3, 0.0), ps, 5.0), Error);
}

TEST_CASE("project: step-by-step recomputation with the pair solve") {
  std::mt19937_64 gen(8);
  const auto ps = random_protos(gen, 3, 4, 5, 10.0);
  const auto ft = oracle::gaussian(gen, 4), fs = oracle::gaussian(gen, 5);
  const auto pp = project(ft, fs, ps, 10.0);
  Vector rt = ft, rs = fs;
  for (std::size_t k = 0; k < 3; ++k) {
    const auto w = solve_pair_coefficients(rt, rs, ps.g_t[k], ps.g_s[k], 10.0);
    CHECK(pp.lambda_t[k] == doctest::Approx(w.w_t).epsilon(1e-12));
    CHECK(pp.lambda_s[k] == doctest::Approx(w.w_s).epsilon(1e-12));
    rt = oracle::axpy(rt, w.w_t, ps.g_t[k]);
    rs = oracle::axpy(rs, w.w_s, ps.g_s[k]);
  }
}

TEST_CASE("projection operator reproduces project and is linear") {
  std::mt19937_64 gen(12);
  for (auto mode : {ProjectionMode::Greedy, ProjectionMode::JointLeastSquares}) {
    const auto ps = random_protos(gen, 4, 3, 5, 2.0);
    const auto op = projection_operator(ps, 2.0, mode);
    CHECK(op.m_t.rows() == 4);
    CHECK(op.m_t.cols() == 8);
    double worst = 0.0;
    for (int t = 0; t < 100; ++t) {
      const auto ft = oracle::gaussian(gen, 3), fs = oracle::gaussian(gen, 5);
      Eigen::VectorXd x(8);
      for (int i = 0; i < 3; ++i) x(i) = ft[i];
      for (int i = 0; i < 5; ++i) x(3 + i) = fs[i];
      const Eigen::VectorXd lt = op.m_t * x, ls = op.m_s * x;
      const auto pp = project(ft, fs, ps, 2.0, mode);
      for (int k = 0; k < 4; ++k) {
        worst = std::max(worst, std::abs(lt(k) - pp.lambda_t[k]) / std::max(1.0, std::abs(lt(k))));
        worst = std::max(worst, std::abs(ls(k) - pp.lambda_s[k]) / std::max(1.0, std::abs(ls(k))));
      }
    }
    CHECK(worst <= 1e-10);

    const auto at = oracle::gaussian(gen, 3), as = oracle::gaussian(gen, 5);
    const auto bt = oracle::gaussian(gen, 3), bs = oracle::gaussian(gen, 5);
    Vector ct(3), cs(5);
    for (int i = 0; i < 3; ++i) ct[i] = 2.0 * at[i] - 0.5 * bt[i];
    for (int i = 0; i < 5; ++i) cs[i] = 2.0 * as[i] - 0.5 * bs[i];
    const auto pa = project(at, as, ps, 2.0, mode), pb = project(bt, bs, ps, 2.0, mode);
    const auto pc = project(ct, cs, ps, 2.0, mode);
    for (int k = 0; k < 4; ++k) {
      const double e = 2.0 * pa.lambda_t[k] - 0.5 * pb.lambda_t[k];
      CHECK(std::abs(pc.lambda_t[k] - e) <= 1e-10 * std::max(1.0, std::abs(e)));
    }
  }
}

TEST_CASE("robust weight") {
  CHECK(robust_weight({{1.0, 2.0}, {1.0, 2.0}}).sigma == 1.0);
  CHECK(robust_weight({{0.0}, {0.4}}).sigma == doctest::Approx(0.6));
  CHECK(robust_weight({{0.0, 0.0}, {0.9, 1.2}}).sigma == 0.0);
}

TEST_CASE("global loss: identical spaces, scalar case, missing prototypes") {
  std::mt19937_64 gen(4);
  auto set = oracle::random_set(gen, {5}, 3, 3);
  for (auto& r : set.records) r.f_s = r.f_t;
  Hyperparams hyper;
  hyper.k = 2;
  auto protos = generate_all_groups(set, hyper);
  auto g = global_loss(set, protos, hyper.lambda);
  CHECK(g.value == doctest::Approx(0.0));
  for (const auto& row : g.grad_student) {
    for (double v : row) CHECK(std::abs(v) < 1e-12);
  }

  // One instance, one atom: lambda_t, lambda_s from the 2x2 system by hand.
  PairedFeatureSet one{1, 1, {{0, {0, 0}, {2.0}, {1.0}, {}, {}, {}}}};
  PrototypeSet ps;
  ps.group = {0, 0};
  ps.g_t = {{1.0}};
  ps.g_s = {{2.0}};
  ps.positions = {0};
  ps.instance_ids = {0};
  PrototypeMap map{{{0, 0}, ps}};
  const double lambda = 1.0;
  // [[1+1, -1], [-1, 4+1]] w = [2, 2]  ->  w_t = 12/9, w_s = 6/9
  const double wt = 12.0 / 9.0, ws = 6.0 / 9.0;
  const double sigma = std::clamp(1.0 - std::abs(ws - wt), 0.0, 1.0);
  g = global_loss(one, map, lambda);
  CHECK(g.value == doctest::Approx(0.5 * sigma * (ws - wt) * (ws - wt)).epsilon(1e-12));

  PairedFeatureSet other = one;
  other.records[0].group = {4, 0};
  try {
    global_loss(other, map, lambda);
    FAIL("expected MissingPrototypes");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::MissingPrototypes);
  }
}

TEST_CASE("global loss gradient matches finite differences") {
  std::mt19937_64 gen(31);
  for (int t = 0; t < 5; ++t) {
    const auto set = oracle::random_set(gen, {6, 5}, 3, 4);
    Hyperparams hyper;
    hyper.k = 3;
    hyper.lambda = 1.0 + t;
    const auto protos = generate_all_groups(set, hyper);
    std::vector<double> sigma(set.size());
    std::uniform_real_distribution<double> u(0.1, 1.0);
    for (auto& s : sigma) s = u(gen);
    const auto g = global_loss(set, protos, hyper.lambda, sigma);
    auto f = [&](const std::vector<double>& x) {
      auto copy = set;
      unflatten_student(copy, x);
      return global_loss(copy, protos, hyper.lambda, sigma).value;
    };
    const auto fd = oracle::central_difference(f, flatten_student(set));
    CHECK(oracle::relative_error(flatten(g.grad_student), fd) <= 1e-5);
  }
}

TEST_CASE("feature loss: values and gradients") {
  std::mt19937_64 gen(17);
  auto set = oracle::random_set(gen, {4}, 3, 3);
  for (auto& r : set.records) r.f_s = r.f_t;
  std::vector<double> ones(set.size(), 1.0), zeros(set.size(), 0.0);
  CHECK(local_feature_loss(set, AdaptationMap::identity(3, 3), ones).value == 0.0);

  set = oracle::random_set(gen, {5}, 3, 4);
  ones.assign(set.size(), 1.0);
  zeros.assign(set.size(), 0.0);
  auto h = AdaptationMap::identity(3, 4);
  h.matrix = Eigen::MatrixXd::Random(3, 4);
  auto zero = local_feature_loss(set, h, zeros);
  CHECK(zero.value == 0.0);
  CHECK(zero.grad_adaptation.norm() == 0.0);

  for (bool rectify : {false, true}) {
    h.rectify = rectify;
    std::vector<double> sigma(set.size());
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (auto& s : sigma) s = u(gen);
    const auto res = local_feature_loss(set, h, sigma);
    CHECK(res.value >= 0.0);
    auto fs = [&](const std::vector<double>& x) {
      auto copy = set;
      unflatten_student(copy, x);
      return local_feature_loss(copy, h, sigma).value;
    };
    CHECK(oracle::relative_error(flatten(res.grad_student),
                                 oracle::central_difference(fs, flatten_student(set))) <= 1e-5);
    std::vector<double> hx(h.matrix.data(), h.matrix.data() + h.matrix.size());
    auto fh = [&](const std::vector<double>& x) {
      auto copy = h;
      std::copy(x.begin(), x.end(), copy.matrix.data());
      return local_feature_loss(set, copy, sigma).value;
    };
    std::vector<double> gh(res.grad_adaptation.data(),
                           res.grad_adaptation.data() + res.grad_adaptation.size());
    CHECK(oracle::relative_error(gh, oracle::central_difference(fh, hx)) <= 1e-5);
  }
  CHECK_THROWS_AS(local_feature_loss(set, AdaptationMap::identity(3, 3), ones), Error);
}

TEST_CASE("response loss: KL values and gradient") {
  const Vector zt{0.0, std::log(3.0)}, zs{0.0, 0.0};
  const double expected = 0.25 * std::log(0.25 / 0.5) + 0.75 * std::log(0.75 / 0.5);
  CHECK(kl_divergence(zt, zs, 1.0) == doctest::Approx(expected).epsilon(1e-14));
  CHECK(kl_divergence(zt, zt, 1.0) == 0.0);

  PairedFeatureSet set{1, 1, {{0, {0, 0}, {0.0}, {0.0}, zt, zs, {}}}};
  std::vector<double> one{1.0}, zero{0.0};
  CHECK(response_loss(set, one, 1.0).value == doctest::Approx(expected).epsilon(1e-14));
  CHECK(response_loss(set, zero, 1.0).value == 0.0);

  std::mt19937_64 gen(23);
  auto big = oracle::random_set(gen, {6}, 2, 2, 5);
  std::vector<double> sigma(big.size());
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (auto& s : sigma) s = u(gen);
  for (double tau : {1.0, 2.5}) {
    const auto res = response_loss(big, sigma, tau);
    auto f = [&](const std::vector<double>& x) {
      auto copy = big;
      std::size_t p = 0;
      for (auto& r : copy.records) {
        for (auto& v : *r.logits_s) v = x[p++];
      }
      return response_loss(copy, sigma, tau).value;
    };
    std::vector<double> x;
    for (const auto& r : big.records) x.insert(x.end(), r.logits_s->begin(), r.logits_s->end());
    CHECK(oracle::relative_error(flatten(res.grad_student_logits), oracle::central_difference(f, x)) <= 1e-5);
  }

  auto no_logits = oracle::random_set(gen, {2}, 2, 2);
  std::vector<double> s2(2, 1.0);
  try {
    response_loss(no_logits, s2, 1.0);
    FAIL("expected MissingLogits");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::MissingLogits);
  }
}

TEST_CASE("total loss composes its parts") {
  std::mt19937_64 gen(57);
  const auto set = oracle::random_set(gen, {7, 6}, 3, 3, 4);
  Hyperparams hyper;
  hyper.k = 3;
  hyper.lambda = 2.0;
  hyper.alpha_global = 0.7;
  hyper.alpha_feat = 1.3;
  hyper.alpha_resp = 2.0;
  hyper.temperature = 1.5;
  const auto protos = generate_all_groups(set, hyper);
  auto h = AdaptationMap::identity(3, 3);
  const auto total = total_loss(set, protos, h, hyper);
  const auto sigma = instance_weights(set, protos, hyper.lambda);
  CHECK(total.sigma == sigma);
  const double g = global_loss(set, protos, hyper.lambda, sigma).value;
  const double f = local_feature_loss(set, h, sigma).value;
  const double r = response_loss(set, sigma, hyper.temperature).value;
  CHECK(std::abs(total.total - (0.7 * g + 1.3 * f + 2.0 * r)) <= 1e-12 * std::max(1.0, total.total));
  CHECK(total.global == g);
  CHECK(total.local_feat == f);
  CHECK(total.local_resp == r);

  hyper.alpha_global = hyper.alpha_feat = hyper.alpha_resp = 0.0;
  CHECK(total_loss(set, protos, h, hyper).total == 0.0);

  auto perfect = set;
  for (auto& rec : perfect.records) {
    rec.f_s = rec.f_t;
    rec.logits_s = rec.logits_t;
  }
  hyper = {};
  hyper.k = 3;
  const auto pp = generate_all_groups(perfect, hyper);
  const auto zero = total_loss(perfect, pp, h, hyper);
  CHECK(zero.global == doctest::Approx(0.0));
  CHECK(zero.local_feat == 0.0);
  CHECK(zero.local_resp == 0.0);
}
