#pragma once

// Global knowledge and robust weighting. Instances are projected onto their
// group's prototypes in both spaces, the discrepancy of the two coefficient
// vectors yields a per-instance weight sigma, and sigma scales the global,
// local-feature and response distillation terms. All gradients treat sigma
// and the prototypes as constants.

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "protokd/feature_model.hpp"
#include "protokd/pgm.hpp"

namespace protokd {

struct ProjectionPair {
  Vector lambda_t;
  Vector lambda_s;
};

enum class ProjectionMode {
  Greedy,             // sequential coupled solve over prototypes in selection order
  JointLeastSquares,  // all K coefficients at once; ablation only
};

ProjectionPair project(std::span<const double> f_t, std::span<const double> f_s,
                       const PrototypeSet& protos, double lambda,
                       ProjectionMode mode = ProjectionMode::Greedy);

/// The linear map behind `project`: for x = [f_t; f_s],
/// lambda_t = m_t * x and lambda_s = m_s * x. Both are K x (D_t + D_s).
struct ProjectionOperator {
  Eigen::MatrixXd m_t;
  Eigen::MatrixXd m_s;
};

ProjectionOperator projection_operator(const PrototypeSet& protos, double lambda,
                                       ProjectionMode mode = ProjectionMode::Greedy);

struct RobustWeight {
  double sigma = 1.0;
};

/// sigma = clamp(1 - ||lambda_s - lambda_t||_2, 0, 1)
RobustWeight robust_weight(const ProjectionPair& pp);

/// Linear student-to-teacher adaptation, optionally followed by max(0, .).
struct AdaptationMap {
  Eigen::MatrixXd matrix;  // D_t x D_s
  bool rectify = false;

  static AdaptationMap identity(std::size_t dim_t, std::size_t dim_s, bool rectify = false);
};

struct GradResult {
  double value = 0.0;
  std::vector<Vector> grad_student;  // per record, length D_s
};

struct FeatureLossResult {
  double value = 0.0;
  std::vector<Vector> grad_student;
  Eigen::MatrixXd grad_adaptation;
};

struct ResponseLossResult {
  double value = 0.0;
  std::vector<Vector> grad_student_logits;
};

enum class SigmaMode {
  Robust,  // sigma from the projection discrepancy
  Unit,    // sigma forced to 1 (ablation)
};

struct RdmOptions {
  ProjectionMode projection = ProjectionMode::Greedy;
  SigmaMode sigma = SigmaMode::Robust;
};

/// Per-record projections onto the record's group prototypes.
std::vector<ProjectionPair> project_all(const PairedFeatureSet& set, const PrototypeMap& protos,
                                        double lambda,
                                        ProjectionMode mode = ProjectionMode::Greedy);

/// Per-record sigma, in record order.
std::vector<double> instance_weights(const PairedFeatureSet& set, const PrototypeMap& protos,
                                     double lambda, const RdmOptions& options = {});

/// (1 / 2N) sum_i sigma_i ||lambda_s,i - lambda_t,i||^2 / K_i, with the supplied sigma.
GradResult global_loss(const PairedFeatureSet& set, const PrototypeMap& protos, double lambda,
                       std::span<const double> sigma,
                       ProjectionMode mode = ProjectionMode::Greedy);

/// Same, with sigma computed from the projections themselves.
GradResult global_loss(const PairedFeatureSet& set, const PrototypeMap& protos, double lambda);

/// (1 / 2N) sum_i sigma_i ||H(f_s,i) - f_t,i||^2
FeatureLossResult local_feature_loss(const PairedFeatureSet& set, const AdaptationMap& adapt,
                                     std::span<const double> sigma);

/// KL(softmax(z_t / tau) || softmax(z_s / tau)), single instance.
double kl_divergence(std::span<const double> logits_t, std::span<const double> logits_s,
                     double temperature);

/// (1 / N) sum_i sigma_i KL_i over the records' logit pairs.
ResponseLossResult response_loss(const PairedFeatureSet& set, std::span<const double> sigma,
                                 double temperature);

struct LossBreakdown {
  double global = 0.0;
  double local_feat = 0.0;
  double local_resp = 0.0;
  double total = 0.0;
  double alpha_global = 0.0;
  double alpha_feat = 0.0;
  double alpha_resp = 0.0;
  std::vector<double> sigma;
  std::vector<Vector> grad_student;
  Eigen::MatrixXd grad_adaptation;
  std::vector<Vector> grad_student_logits;  // empty when the set carries no logits
};

/// alpha_global * global + alpha_feat * local_feat + alpha_resp * local_resp.
/// The detection loss is not part of this sum. Sets without logits contribute
/// a zero response term.
LossBreakdown total_loss(const PairedFeatureSet& set, const PrototypeMap& protos,
                         const AdaptationMap& adapt, const Hyperparams& hyper,
                         const RdmOptions& options = {});

}  // namespace protokd
