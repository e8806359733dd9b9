#include "protokd/rdm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <string>

#include "protokd/error.hpp"
#include "protokd/linalg.hpp"

namespace protokd {

using detail::dot;
using detail::squared_norm;

namespace {

void check_dims(std::span<const double> f_t, std::span<const double> f_s,
                const PrototypeSet& protos) {
  if (protos.size() == 0) throw Error(ErrorCode::EmptyBasis, "prototype set is empty");
  if (f_t.size() != protos.g_t.front().size() || f_s.size() != protos.g_s.front().size()) {
    throw Error(ErrorCode::DimensionMismatch, "feature and prototype dimensions differ");
  }
}

Eigen::Map<const Eigen::VectorXd> as_eigen(std::span<const double> v) {
  return {v.data(), static_cast<Eigen::Index>(v.size())};
}

const PrototypeSet& protos_for(const PrototypeMap& protos, const GroupKey& key) {
  auto it = protos.find(key);
  if (it == protos.end() || it->second.size() == 0) {
    throw Error(ErrorCode::MissingPrototypes, "no prototypes for " + to_string(key));
  }
  return it->second;
}

void check_sigma(const PairedFeatureSet& set, std::span<const double> sigma) {
  if (sigma.size() != set.size()) {
    throw Error(ErrorCode::DimensionMismatch, "one sigma per record is required");
  }
}

Vector log_softmax(std::span<const double> z, double temperature) {
  double m = -std::numeric_limits<double>::infinity();
  for (double v : z) m = std::max(m, v / temperature);
  double s = 0.0;
  for (double v : z) s += std::exp(v / temperature - m);
  const double log_norm = m + std::log(s);
  Vector out(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) out[i] = z[i] / temperature - log_norm;
  return out;
}

// Joint least squares: [Gt'Gt + lI, -lI; -lI, Gs'Gs + lI] [a; b] = [Gt' f_t; Gs' f_s]
Eigen::MatrixXd joint_operator(const PrototypeSet& protos, double lambda) {
  const auto k = static_cast<Eigen::Index>(protos.size());
  const auto dt = static_cast<Eigen::Index>(protos.g_t.front().size());
  const auto ds = static_cast<Eigen::Index>(protos.g_s.front().size());
  Eigen::MatrixXd gt(dt, k), gs(ds, k);
  for (Eigen::Index j = 0; j < k; ++j) {
    gt.col(j) = as_eigen(protos.g_t[j]);
    gs.col(j) = as_eigen(protos.g_s[j]);
  }
  Eigen::MatrixXd system = Eigen::MatrixXd::Zero(2 * k, 2 * k);
  system.topLeftCorner(k, k) = gt.transpose() * gt;
  system.bottomRightCorner(k, k) = gs.transpose() * gs;
  system.diagonal().array() += lambda;
  system.topRightCorner(k, k).diagonal().setConstant(-lambda);
  system.bottomLeftCorner(k, k).diagonal().setConstant(-lambda);

  Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(2 * k, dt + ds);
  rhs.topLeftCorner(k, dt) = gt.transpose();
  rhs.bottomRightCorner(k, ds) = gs.transpose();
  return system.completeOrthogonalDecomposition().solve(rhs);
}

}  // namespace

ProjectionPair project(std::span<const double> f_t, std::span<const double> f_s,
                       const PrototypeSet& protos, double lambda, ProjectionMode mode) {
  check_dims(f_t, f_s, protos);
  const std::size_t k = protos.size();
  ProjectionPair out{Vector(k, 0.0), Vector(k, 0.0)};

  if (mode == ProjectionMode::JointLeastSquares) {
    const auto op = projection_operator(protos, lambda, mode);
    Eigen::VectorXd x(f_t.size() + f_s.size());
    x << as_eigen(f_t), as_eigen(f_s);
    Eigen::VectorXd::Map(out.lambda_t.data(), k) = op.m_t * x;
    Eigen::VectorXd::Map(out.lambda_s.data(), k) = op.m_s * x;
    return out;
  }

  Vector r_t(f_t.begin(), f_t.end());
  Vector r_s(f_s.begin(), f_s.end());
  for (std::size_t j = 0; j < k; ++j) {
    const auto& g_t = protos.g_t[j];
    const auto& g_s = protos.g_s[j];
    const auto w = solve_pair_coefficients(r_t, r_s, g_t, g_s, lambda);
    out.lambda_t[j] = w.w_t;
    out.lambda_s[j] = w.w_s;
    for (std::size_t d = 0; d < r_t.size(); ++d) r_t[d] -= w.w_t * g_t[d];
    for (std::size_t d = 0; d < r_s.size(); ++d) r_s[d] -= w.w_s * g_s[d];
  }
  return out;
}

ProjectionOperator projection_operator(const PrototypeSet& protos, double lambda,
                                       ProjectionMode mode) {
  if (protos.size() == 0) throw Error(ErrorCode::EmptyBasis, "prototype set is empty");
  const auto k = static_cast<Eigen::Index>(protos.size());
  const auto dt = static_cast<Eigen::Index>(protos.g_t.front().size());
  const auto ds = static_cast<Eigen::Index>(protos.g_s.front().size());

  if (mode == ProjectionMode::JointLeastSquares) {
    const Eigen::MatrixXd m = joint_operator(protos, lambda);
    return {m.topRows(k), m.bottomRows(k)};
  }

  // Residual maps: r_t = res_t * x, r_s = res_s * x.
  Eigen::MatrixXd res_t = Eigen::MatrixXd::Zero(dt, dt + ds);
  Eigen::MatrixXd res_s = Eigen::MatrixXd::Zero(ds, dt + ds);
  res_t.leftCols(dt).setIdentity();
  res_s.rightCols(ds).setIdentity();

  ProjectionOperator op{Eigen::MatrixXd::Zero(k, dt + ds), Eigen::MatrixXd::Zero(k, dt + ds)};
  for (Eigen::Index j = 0; j < k; ++j) {
    const auto g_t = as_eigen(protos.g_t[j]);
    const auto g_s = as_eigen(protos.g_s[j]);
    const double p = lambda + g_t.squaredNorm();
    const double q = lambda + g_s.squaredNorm();
    const double det = p * q - lambda * lambda;
    if (det <= 1e-12 * std::max(1.0, lambda * lambda)) {
      if (lambda > 0.0) continue;  // null atom, zero coefficients
      throw Error(ErrorCode::DegenerateAtom, "atom has zero norm in a space with lambda = 0");
    }
    const Eigen::RowVectorXd a = g_t.transpose() * res_t;
    const Eigen::RowVectorXd b = g_s.transpose() * res_s;
    op.m_t.row(j) = (q * a + lambda * b) / det;
    op.m_s.row(j) = (p * b + lambda * a) / det;
    res_t -= g_t * op.m_t.row(j);
    res_s -= g_s * op.m_s.row(j);
  }
  return op;
}

RobustWeight robust_weight(const ProjectionPair& pp) {
  double sq = 0.0;
  for (std::size_t j = 0; j < pp.lambda_t.size(); ++j) {
    const double d = pp.lambda_s[j] - pp.lambda_t[j];
    sq += d * d;
  }
  return {std::clamp(1.0 - std::sqrt(sq), 0.0, 1.0)};
}

AdaptationMap AdaptationMap::identity(std::size_t dim_t, std::size_t dim_s, bool rectify) {
  return {Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(dim_t),
                                    static_cast<Eigen::Index>(dim_s)),
          rectify};
}

std::vector<ProjectionPair> project_all(const PairedFeatureSet& set, const PrototypeMap& protos,
                                        double lambda, ProjectionMode mode) {
  std::vector<ProjectionPair> out;
  out.reserve(set.size());
  for (const auto& r : set.records) {
    out.push_back(project(r.f_t, r.f_s, protos_for(protos, r.group), lambda, mode));
  }
  return out;
}

std::vector<double> instance_weights(const PairedFeatureSet& set, const PrototypeMap& protos,
                                     double lambda, const RdmOptions& options) {
  if (options.sigma == SigmaMode::Unit) {
    for (const auto& r : set.records) protos_for(protos, r.group);
    return std::vector<double>(set.size(), 1.0);
  }
  std::vector<double> sigma;
  sigma.reserve(set.size());
  for (const auto& pp : project_all(set, protos, lambda, options.projection)) {
    sigma.push_back(robust_weight(pp).sigma);
  }
  return sigma;
}

GradResult global_loss(const PairedFeatureSet& set, const PrototypeMap& protos, double lambda,
                       std::span<const double> sigma, ProjectionMode mode) {
  check_sigma(set, sigma);
  GradResult out;
  out.grad_student.assign(set.size(), Vector(set.dim_s, 0.0));
  if (set.size() == 0) return out;
  const double n = static_cast<double>(set.size());
  const auto ds = static_cast<Eigen::Index>(set.dim_s);

  std::map<GroupKey, Eigen::MatrixXd> diff_ops;  // student block of (m_s - m_t)
  for (std::size_t i = 0; i < set.size(); ++i) {
    const auto& r = set.records[i];
    const auto& ps = protos_for(protos, r.group);
    const auto pp = project(r.f_t, r.f_s, ps, lambda, mode);
    const double k = static_cast<double>(ps.size());

    Eigen::VectorXd d(static_cast<Eigen::Index>(ps.size()));
    for (std::size_t j = 0; j < ps.size(); ++j) d[j] = pp.lambda_s[j] - pp.lambda_t[j];
    out.value += sigma[i] * d.squaredNorm() / (2.0 * n * k);

    if (sigma[i] == 0.0) continue;
    auto it = diff_ops.find(r.group);
    if (it == diff_ops.end()) {
      const auto op = projection_operator(ps, lambda, mode);
      it = diff_ops.emplace(r.group, (op.m_s - op.m_t).rightCols(ds)).first;
    }
    Eigen::VectorXd::Map(out.grad_student[i].data(), ds) =
        (sigma[i] / (n * k)) * (it->second.transpose() * d);
  }
  return out;
}

GradResult global_loss(const PairedFeatureSet& set, const PrototypeMap& protos, double lambda) {
  const auto sigma = instance_weights(set, protos, lambda);
  return global_loss(set, protos, lambda, sigma);
}

FeatureLossResult local_feature_loss(const PairedFeatureSet& set, const AdaptationMap& adapt,
                                     std::span<const double> sigma) {
  check_sigma(set, sigma);
  const auto dt = static_cast<Eigen::Index>(set.dim_t);
  const auto ds = static_cast<Eigen::Index>(set.dim_s);
  if (adapt.matrix.rows() != dt || adapt.matrix.cols() != ds) {
    throw Error(ErrorCode::DimensionMismatch, "adaptation map must be D_t x D_s");
  }
  FeatureLossResult out;
  out.grad_student.assign(set.size(), Vector(set.dim_s, 0.0));
  out.grad_adaptation = Eigen::MatrixXd::Zero(dt, ds);
  if (set.size() == 0) return out;
  const double n = static_cast<double>(set.size());

  for (std::size_t i = 0; i < set.size(); ++i) {
    const auto& r = set.records[i];
    const auto f_s = as_eigen(r.f_s);
    const Eigen::VectorXd pre = adapt.matrix * f_s;
    Eigen::VectorXd err = (adapt.rectify ? pre.cwiseMax(0.0) : pre) - as_eigen(r.f_t);
    out.value += sigma[i] * err.squaredNorm() / (2.0 * n);
    if (sigma[i] == 0.0) continue;
    if (adapt.rectify) {
      for (Eigen::Index d = 0; d < dt; ++d) {
        if (pre[d] <= 0.0) err[d] = 0.0;
      }
    }
    const double scale = sigma[i] / n;
    Eigen::VectorXd::Map(out.grad_student[i].data(), ds) =
        scale * (adapt.matrix.transpose() * err);
    out.grad_adaptation.noalias() += scale * err * f_s.transpose();
  }
  return out;
}

double kl_divergence(std::span<const double> logits_t, std::span<const double> logits_s,
                     double temperature) {
  if (logits_t.size() != logits_s.size()) {
    throw Error(ErrorCode::DimensionMismatch, "teacher and student logits differ in length");
  }
  const auto lp = log_softmax(logits_t, temperature);
  const auto lq = log_softmax(logits_s, temperature);
  double kl = 0.0;
  for (std::size_t c = 0; c < lp.size(); ++c) kl += std::exp(lp[c]) * (lp[c] - lq[c]);
  return std::max(kl, 0.0);
}

ResponseLossResult response_loss(const PairedFeatureSet& set, std::span<const double> sigma,
                                 double temperature) {
  check_sigma(set, sigma);
  ResponseLossResult out;
  if (set.size() == 0) return out;
  const double n = static_cast<double>(set.size());
  for (std::size_t i = 0; i < set.size(); ++i) {
    const auto& r = set.records[i];
    if (!r.logits_t || !r.logits_s) {
      throw Error(ErrorCode::MissingLogits, "record " + std::to_string(i) + " has no logits");
    }
    out.value += sigma[i] * kl_divergence(*r.logits_t, *r.logits_s, temperature) / n;

    const auto lp = log_softmax(*r.logits_t, temperature);
    const auto lq = log_softmax(*r.logits_s, temperature);
    Vector grad(lp.size());
    for (std::size_t c = 0; c < lp.size(); ++c) {
      grad[c] = sigma[i] / n * (std::exp(lq[c]) - std::exp(lp[c])) / temperature;
    }
    out.grad_student_logits.push_back(std::move(grad));
  }
  return out;
}

LossBreakdown total_loss(const PairedFeatureSet& set, const PrototypeMap& protos,
                         const AdaptationMap& adapt, const Hyperparams& hyper,
                         const RdmOptions& options) {
  LossBreakdown out;
  out.alpha_global = hyper.alpha_global;
  out.alpha_feat = hyper.alpha_feat;
  out.alpha_resp = hyper.alpha_resp;
  out.sigma = instance_weights(set, protos, hyper.lambda, options);

  const auto global = global_loss(set, protos, hyper.lambda, out.sigma, options.projection);
  const auto feat = local_feature_loss(set, adapt, out.sigma);
  out.global = global.value;
  out.local_feat = feat.value;
  out.grad_student.assign(set.size(), Vector(set.dim_s, 0.0));
  for (std::size_t i = 0; i < set.size(); ++i) {
    for (std::size_t d = 0; d < set.dim_s; ++d) {
      out.grad_student[i][d] = hyper.alpha_global * global.grad_student[i][d] +
                               hyper.alpha_feat * feat.grad_student[i][d];
    }
  }
  out.grad_adaptation = hyper.alpha_feat * feat.grad_adaptation;

  if (set.has_logits()) {
    auto resp = response_loss(set, out.sigma, hyper.temperature);
    out.local_resp = resp.value;
    for (auto& g : resp.grad_student_logits) {
      for (double& v : g) v *= hyper.alpha_resp;
    }
    out.grad_student_logits = std::move(resp.grad_student_logits);
  }
  out.total = hyper.alpha_global * out.global + hyper.alpha_feat * out.local_feat +
              hyper.alpha_resp * out.local_resp;
  return out;
}

}  // namespace protokd
