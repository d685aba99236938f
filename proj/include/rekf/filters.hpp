#pragma once

// The three estimators behind one interface:
//   - GlobalEkf: classical EKF on (p, theta, pf_1, ..., pf_N).
//   - GlobalEkf with first-estimate Jacobians: identical formulas, but the
//     transition and measurement Jacobians are evaluated at first-available
//     estimates so the unobservable subspace stays consistent across steps.
//   - ReducedEkf: EKF on (p, theta, z_1, ..., z_N) with the reduced Bayesian
//     measurement update, which touches only the feature marginal and keeps
//     the conditional of the pose given the features fixed.

#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "rekf/gaussian.hpp"
#include "rekf/scenario.hpp"
#include "rekf/se2.hpp"
#include "rekf/sensor.hpp"

namespace rekf {

enum class FeatureFrame { Global, Relative };

// Stacked filter state: pose block at indices 0..2, then one 2-block per
// registered feature in registration order.
struct FilterBelief {
  FeatureFrame frame = FeatureFrame::Global;
  MomentGaussian state;
  std::vector<int> feature_ids;
  std::unordered_map<int, Eigen::Index> slots;

  Eigen::Index dim() const { return state.dim(); }
  std::size_t feature_count() const { return feature_ids.size(); }
  bool has_feature(int id) const { return slots.find(id) != slots.end(); }

  Eigen::Index block_of(int id) const {
    auto it = slots.find(id);
    if (it == slots.end())
      throw std::invalid_argument("filter: feature " + std::to_string(id) + " is not registered");
    return 3 + 2 * it->second;
  }

  bool finite() const { return state.mean.allFinite() && state.cov.allFinite(); }
};

// Pose block of the transition matrix: [[I2, J*dp],[0,1]].  The displacement
// argument is what distinguishes the classic from the first-estimate filter.
inline Eigen::Matrix3d pose_transition(const Eigen::Vector2d& displacement) {
  Eigen::Matrix3d phi = Eigen::Matrix3d::Identity();
  phi.block<2, 1>(0, 2) = kJ * displacement;
  return phi;
}

// Feature block of the reduced transition matrix: I - dtheta*J.
inline Eigen::Matrix2d relative_feature_transition(double dtheta) {
  return Eigen::Matrix2d::Identity() - dtheta * kJ;
}

// Blocks of the measurement Jacobian dh_i = R^T [-I2 | J^T (pf - p) | ... I2 ...]
// evaluated at the given linearization values.
struct MeasurementJacobianBlocks {
  Eigen::Matrix<double, 2, 3> pose;
  Eigen::Matrix2d feature;
};

inline MeasurementJacobianBlocks global_dh_blocks(const Eigen::Vector2d& p, double theta,
                                                  const Eigen::Vector2d& pf) {
  const Eigen::Matrix2d rt = rot(theta).transpose();
  MeasurementJacobianBlocks b;
  b.pose.leftCols<2>() = -rt;
  b.pose.col(2) = rt * kJ.transpose() * (pf - p);
  b.feature = rt;
  return b;
}

// Dense measurement Jacobian for the listed features, evaluated at the
// belief mean.  Global frame: the EKF-SLAM Jacobian; relative frame: the
// identity measurement, i.e. block selection.
inline Eigen::MatrixXd measurement_jacobian(const FilterBelief& b, const std::vector<int>& ids) {
  const Eigen::Index n = b.dim();
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(2 * static_cast<Eigen::Index>(ids.size()), n);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const Eigen::Index j = b.block_of(ids[i]);
    const Eigen::Index row = 2 * static_cast<Eigen::Index>(i);
    if (b.frame == FeatureFrame::Global) {
      const auto blocks = global_dh_blocks(b.state.mean.head<2>(), b.state.mean(2),
                                           b.state.mean.segment<2>(j));
      h.block<2, 3>(row, 0) = blocks.pose;
      h.block<2, 2>(row, j) = blocks.feature;
    } else {
      h.block<2, 2>(row, j).setIdentity();
    }
  }
  return h;
}

// Basis of the unobservable subspace at the belief mean.  Global frame:
// stacked [I2, J p; 0, 1; I2, J pf_i; ...]; relative frame: the feature rows
// vanish (the group action is trivial on relative coordinates).
inline Eigen::MatrixXd nullspace_basis(const FilterBelief& b) {
  Eigen::MatrixXd basis = Eigen::MatrixXd::Zero(b.dim(), 3);
  basis.block<2, 2>(0, 0).setIdentity();
  basis.block<2, 1>(0, 2) = kJ * b.state.mean.head<2>();
  basis(2, 2) = 1.0;
  if (b.frame == FeatureFrame::Global) {
    for (std::size_t i = 0; i < b.feature_count(); ++i) {
      const Eigen::Index j = 3 + 2 * static_cast<Eigen::Index>(i);
      basis.block<2, 2>(j, 0).setIdentity();
      basis.block<2, 1>(j, 2) = kJ * b.state.mean.segment<2>(j);
    }
  }
  return basis;
}

struct GlobalEstimate {
  Pose pose;
  FeatureMap features;
};

// Belief snapshot as diffable text (frame, registry, mean, covariance), for
// debugging and golden-file tests.
inline void write_belief(std::ostream& os, const FilterBelief& b) {
  os.precision(17);
  os << "frame " << (b.frame == FeatureFrame::Global ? "global" : "relative") << "\n";
  os << "ids";
  for (int id : b.feature_ids) os << " " << id;
  os << "\nmean";
  for (Eigen::Index i = 0; i < b.dim(); ++i) os << " " << b.state.mean(i);
  os << "\n";
  for (Eigen::Index i = 0; i < b.dim(); ++i) {
    os << "cov";
    for (Eigen::Index j = 0; j < b.dim(); ++j) os << " " << b.state.cov(i, j);
    os << "\n";
  }
}

inline FilterBelief read_belief(std::istream& is) {
  FilterBelief b;
  std::string line, tag;
  std::vector<double> mean;
  std::vector<std::vector<double>> cov_rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    row >> tag;
    if (tag == "frame") {
      std::string frame;
      row >> frame;
      if (frame != "global" && frame != "relative")
        throw std::runtime_error("belief snapshot: unknown frame " + frame);
      b.frame = frame == "global" ? FeatureFrame::Global : FeatureFrame::Relative;
    } else if (tag == "ids") {
      int id;
      while (row >> id) {
        b.slots[id] = static_cast<Eigen::Index>(b.feature_ids.size());
        b.feature_ids.push_back(id);
      }
    } else if (tag == "mean") {
      double v;
      while (row >> v) mean.push_back(v);
    } else if (tag == "cov") {
      std::vector<double> r;
      double v;
      while (row >> v) r.push_back(v);
      cov_rows.push_back(std::move(r));
    } else {
      throw std::runtime_error("belief snapshot: unknown tag " + tag);
    }
  }
  const Eigen::Index n = static_cast<Eigen::Index>(mean.size());
  if (n != 3 + 2 * static_cast<Eigen::Index>(b.feature_ids.size()) ||
      cov_rows.size() != static_cast<std::size_t>(n))
    throw std::runtime_error("belief snapshot: inconsistent dimensions");
  b.state.mean.resize(n);
  b.state.cov.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (cov_rows[i].size() != static_cast<std::size_t>(n))
      throw std::runtime_error("belief snapshot: inconsistent covariance row");
    b.state.mean(i) = mean[i];
    for (Eigen::Index j = 0; j < n; ++j) b.state.cov(i, j) = cov_rows[i][j];
  }
  return b;
}

class SlamFilter {
 public:
  virtual ~SlamFilter() = default;
  virtual void propagate(const OdometryReading& odo, double dt, const Eigen::Matrix2d& qv,
                         double qw) = 0;
  virtual void update(const std::vector<RelativeMeasurement>& batch) = 0;
  virtual void register_feature(const RelativeMeasurement& m) = 0;
  virtual GlobalEstimate estimate_globals() const = 0;
  virtual const FilterBelief& belief() const = 0;

  bool has_feature(int id) const { return belief().has_feature(id); }
};

// First-available estimates used by the first-estimate-Jacobian variant:
// per feature the estimate at registration, per step the prior pose.
struct FirstEstimateCache {
  std::unordered_map<int, Eigen::Vector2d> feature_first;
  Eigen::Vector2d prior_position{0.0, 0.0};
  double prior_theta = 0.0;
};

namespace detail {

// In-place M <- [[1, a],[-a, 1]] M on two rows (the 2x2 factor I - a*J).
template <typename Block, typename Scratch>
inline void rotate_rows(Block&& m, Eigen::Index r0, double a, Scratch& scratch) {
  scratch = m.row(r0);
  m.row(r0) += a * m.row(r0 + 1);
  m.row(r0 + 1) -= a * scratch;
}

template <typename Block, typename Scratch>
inline void rotate_cols(Block&& m, Eigen::Index c0, double a, Scratch& scratch) {
  scratch = m.col(c0);
  m.col(c0) += a * m.col(c0 + 1);
  m.col(c0 + 1) -= a * scratch;
}

}  // namespace detail

// Classical EKF on global feature coordinates; optionally with
// first-estimate Jacobians.
class GlobalEkf final : public SlamFilter {
 public:
  explicit GlobalEkf(const Pose& start, const Eigen::Matrix3d& start_cov = Eigen::Matrix3d::Zero(),
                     bool first_estimate_jacobians = false)
      : fej_(first_estimate_jacobians) {
    b_.frame = FeatureFrame::Global;
    b_.state.mean.resize(3);
    b_.state.mean << start.p.x(), start.p.y(), start.theta;
    b_.state.cov = start_cov;
    cache_.prior_position = start.p;
    cache_.prior_theta = start.theta;
  }

  void propagate(const OdometryReading& odo, double dt, const Eigen::Matrix2d& qv,
                 double qw) override {
    auto& mean = b_.state.mean;
    auto& cov = b_.state.cov;

    const double theta = mean(2);
    const Eigen::Matrix2d r = rot(theta);
    const Eigen::Vector2d dd = odo.v_m * dt;
    const double dth = odo.w_m * dt;
    const Eigen::Vector2d p_pred = mean.head<2>() + r * dd;

    const Eigen::Vector2d displacement =
        fej_ ? Eigen::Vector2d(p_pred - cache_.prior_position) : Eigen::Vector2d(r * dd);
    last_pose_transition_ = pose_transition(displacement);
    const Eigen::Vector2d jd = kJ * displacement;

    // Phi only mixes the heading column into the position rows.
    cov.row(0) += jd.x() * cov.row(2);
    cov.row(1) += jd.y() * cov.row(2);
    cov.col(0) += jd.x() * cov.col(2);
    cov.col(1) += jd.y() * cov.col(2);

    Eigen::Matrix3d g = Eigen::Matrix3d::Zero();
    g.topLeftCorner<2, 2>() = r;
    g(2, 2) = 1.0;
    g *= dt;
    Eigen::Matrix3d qu = Eigen::Matrix3d::Zero();
    qu.topLeftCorner<2, 2>() = qv;
    qu(2, 2) = qw;
    cov.topLeftCorner<3, 3>() += g * qu * g.transpose();
    cov.topLeftCorner<3, 3>() = (0.5 * (cov.topLeftCorner<3, 3>() + cov.topLeftCorner<3, 3>().transpose())).eval();

    mean.head<2>() = p_pred;
    mean(2) = theta + dth;

    cache_.prior_position = p_pred;
    cache_.prior_theta = mean(2);
  }

  void update(const std::vector<RelativeMeasurement>& batch) override {
    if (batch.empty()) return;
    auto& mean = b_.state.mean;
    auto& cov = b_.state.cov;
    const Eigen::Index n = b_.dim();
    const Eigen::Index m = 2 * static_cast<Eigen::Index>(batch.size());

    const Eigen::Vector2d p_lin = fej_ ? cache_.prior_position : Eigen::Vector2d(mean.head<2>());
    const double th_lin = fej_ ? cache_.prior_theta : mean(2);
    const Eigen::Matrix2d rt_mean = rot(mean(2)).transpose();

    std::vector<MeasurementJacobianBlocks> blocks(batch.size());
    std::vector<Eigen::Index> cols(batch.size());
    Eigen::MatrixXd hs(m, n);  // H Sigma
    Eigen::VectorXd residual(m);
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const Eigen::Index j = b_.block_of(batch[i].feature_id);
      cols[i] = j;
      const Eigen::Vector2d pf_lin =
          fej_ ? cache_.feature_first.at(batch[i].feature_id) : Eigen::Vector2d(mean.segment<2>(j));
      blocks[i] = global_dh_blocks(p_lin, th_lin, pf_lin);
      const Eigen::Index row = 2 * static_cast<Eigen::Index>(i);
      hs.middleRows<2>(row).noalias() = blocks[i].pose * cov.topRows<3>();
      hs.middleRows<2>(row).noalias() += blocks[i].feature * cov.middleRows<2>(j);
      residual.segment<2>(row) = batch[i].z - rt_mean * (mean.segment<2>(j) - mean.head<2>());
    }

    Eigen::MatrixXd s(m, m);
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const Eigen::Index row = 2 * static_cast<Eigen::Index>(i);
      for (std::size_t k = 0; k < batch.size(); ++k) {
        const Eigen::Index col = 2 * static_cast<Eigen::Index>(k);
        s.block<2, 2>(row, col) = hs.block<2, 3>(row, 0) * blocks[k].pose.transpose() +
                                  hs.block<2, 2>(row, cols[k]) * blocks[k].feature.transpose();
      }
      s.block<2, 2>(row, row) += batch[i].cov;
    }
    symmetrize(s);

    Eigen::LLT<Eigen::MatrixXd> llt_s(s);
    if (llt_s.info() != Eigen::Success)
      throw std::runtime_error("ekf update: innovation covariance not positive definite");

    const Eigen::MatrixXd gain = llt_s.solve(hs).transpose();  // Sigma H^T S^-1
    mean.noalias() += gain * residual;

    // Joseph form, expanded: Sigma - K(HS) - (HS)^T K^T + K S K^T.
    Eigen::MatrixXd khs(b_.dim(), b_.dim());
    khs.noalias() = gain * hs;
    cov -= khs;
    cov -= khs.transpose().eval();
    Eigen::MatrixXd w(b_.dim(), m);
    w.noalias() = gain * llt_s.matrixL().toDenseMatrix();
    cov.noalias() += w * w.transpose();
    symmetrize(cov);
  }

  void register_feature(const RelativeMeasurement& meas) override {
    if (b_.has_feature(meas.feature_id))
      throw std::invalid_argument("filter: feature " + std::to_string(meas.feature_id) +
                                  " already registered");
    auto& mean = b_.state.mean;
    auto& cov = b_.state.cov;
    const Eigen::Index n = b_.dim();

    const Eigen::Matrix2d r = rot(mean(2));
    const Eigen::Vector2d pf = mean.head<2>() + r * meas.z;

    Eigen::Matrix<double, 2, 3> l;  // d pf / d pose
    l.leftCols<2>().setIdentity();
    l.col(2) = kJ * (r * meas.z);

    const Eigen::MatrixXd cross = l * cov.topRows<3>();  // 2 x n
    const Eigen::Matrix2d block =
        l * cov.topLeftCorner<3, 3>() * l.transpose() + r * meas.cov * r.transpose();

    mean.conservativeResize(n + 2);
    mean.tail<2>() = pf;
    cov.conservativeResize(n + 2, n + 2);
    cov.bottomLeftCorner(2, n) = cross;
    cov.topRightCorner(n, 2) = cross.transpose();
    cov.bottomRightCorner<2, 2>() = 0.5 * (block + block.transpose());

    b_.slots[meas.feature_id] = static_cast<Eigen::Index>(b_.feature_ids.size());
    b_.feature_ids.push_back(meas.feature_id);
    cache_.feature_first[meas.feature_id] = pf;
  }

  GlobalEstimate estimate_globals() const override {
    GlobalEstimate out;
    out.pose = Pose(b_.state.mean.head<2>(), b_.state.mean(2));
    for (std::size_t i = 0; i < b_.feature_count(); ++i) {
      out.features.ids.push_back(b_.feature_ids[i]);
      out.features.positions.emplace_back(b_.state.mean.segment<2>(3 + 2 * static_cast<Eigen::Index>(i)));
    }
    return out;
  }

  const FilterBelief& belief() const override { return b_; }
  const FirstEstimateCache& first_estimates() const { return cache_; }
  const Eigen::Matrix3d& last_pose_transition() const { return last_pose_transition_; }

  // Adopts a restored snapshot; first estimates reseed from it.
  void set_belief(FilterBelief b) {
    if (b.frame != FeatureFrame::Global)
      throw std::invalid_argument("GlobalEkf: snapshot frame mismatch");
    b_ = std::move(b);
    cache_.prior_position = b_.state.mean.head<2>();
    cache_.prior_theta = b_.state.mean(2);
    cache_.feature_first.clear();
    for (std::size_t i = 0; i < b_.feature_count(); ++i)
      cache_.feature_first[b_.feature_ids[i]] =
          b_.state.mean.segment<2>(3 + 2 * static_cast<Eigen::Index>(i));
  }

 private:
  FilterBelief b_;
  bool fej_;
  FirstEstimateCache cache_;
  Eigen::Matrix3d last_pose_transition_ = Eigen::Matrix3d::Identity();
};

// EKF on relative feature coordinates.  The measurement is the identity on
// the observed blocks, so the update carries no linearization error; it is
// applied only to the feature marginal, holding the pose-given-features
// conditional fixed.
class ReducedEkf final : public SlamFilter {
 public:
  explicit ReducedEkf(const Pose& start, const Eigen::Matrix3d& start_cov = Eigen::Matrix3d::Zero()) {
    b_.frame = FeatureFrame::Relative;
    b_.state.mean.resize(3);
    b_.state.mean << start.p.x(), start.p.y(), start.theta;
    b_.state.cov = start_cov;
  }

  void propagate(const OdometryReading& odo, double dt, const Eigen::Matrix2d& qv,
                 double qw) override {
    auto& mean = b_.state.mean;
    auto& cov = b_.state.cov;
    const Eigen::Index n = b_.dim();

    const double theta = mean(2);
    const Eigen::Matrix2d r = rot(theta);
    const Eigen::Vector2d dd = odo.v_m * dt;
    const double dth = odo.w_m * dt;
    const Eigen::Vector2d jd = kJ * (r * dd);

    // Noise Jacobian at the current estimate (before the mean moves).
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(n, 3);
    g.topLeftCorner<2, 2>() = r;
    g(2, 2) = 1.0;
    for (Eigen::Index j = 3; j < n; j += 2) {
      g.block<2, 2>(j, 0) = -Eigen::Matrix2d::Identity();
      g.block<2, 1>(j, 2) = -(kJ * mean.segment<2>(j));
    }
    g *= dt;

    // Phi rows/cols: pose block [[I2, J dp],[0,1]], feature blocks I - dth*J.
    scratch_row_.resize(n);
    scratch_col_.resize(n);
    cov.row(0) += jd.x() * cov.row(2);
    cov.row(1) += jd.y() * cov.row(2);
    for (Eigen::Index j = 3; j < n; j += 2) detail::rotate_rows(cov, j, dth, scratch_row_);
    cov.col(0) += jd.x() * cov.col(2);
    cov.col(1) += jd.y() * cov.col(2);
    for (Eigen::Index j = 3; j < n; j += 2) detail::rotate_cols(cov, j, dth, scratch_col_);

    Eigen::Matrix3d qu = Eigen::Matrix3d::Zero();
    qu.topLeftCorner<2, 2>() = qv;
    qu(2, 2) = qw;
    cov.noalias() += (g * qu) * g.transpose();
    symmetrize(cov);

    mean.head<2>() += r * dd;
    mean(2) = theta + dth;
    for (Eigen::Index j = 3; j < n; j += 2) {
      const Eigen::Vector2d z = mean.segment<2>(j);
      mean.segment<2>(j) = z - dth * (kJ * z) - dd;
    }
  }

  // Reduced Bayesian update with the selection measurement matrix: the
  // gathered-block form of gaussian_belief's reduced update, which the unit
  // tests pin against both the information-form pipeline and the moment
  // route on small states.
  void update(const std::vector<RelativeMeasurement>& batch) override {
    if (batch.empty()) return;
    auto& mean = b_.state.mean;
    auto& cov = b_.state.cov;
    const Eigen::Index m = 2 * static_cast<Eigen::Index>(batch.size());

    Eigen::MatrixXd t(b_.dim(), m);  // Sigma C~^T
    Eigen::VectorXd residual(m);
    std::vector<Eigen::Index> cols(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const Eigen::Index j = b_.block_of(batch[i].feature_id);
      const Eigen::Index row = 2 * static_cast<Eigen::Index>(i);
      cols[i] = j;
      t.middleCols<2>(row) = cov.middleCols<2>(j);
      residual.segment<2>(row) = batch[i].z - mean.segment<2>(j);
    }
    Eigen::MatrixXd s(m, m);
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const Eigen::Index row = 2 * static_cast<Eigen::Index>(i);
      for (std::size_t k = 0; k < batch.size(); ++k)
        s.block<2, 2>(row, 2 * static_cast<Eigen::Index>(k)) = cov.block<2, 2>(cols[i], cols[k]);
      s.block<2, 2>(row, row) += batch[i].cov;
    }
    symmetrize(s);

    Eigen::LLT<Eigen::MatrixXd> llt_s(s);
    if (llt_s.info() != Eigen::Success)
      throw std::runtime_error("reduced update: innovation covariance not positive definite");

    const Eigen::MatrixXd gain = llt_s.solve(t.transpose()).transpose();
    mean.noalias() += gain * residual;
    Eigen::MatrixXd w(b_.dim(), m);
    w.noalias() = gain * llt_s.matrixL().toDenseMatrix();
    cov.noalias() -= w * w.transpose();
    symmetrize(cov);
  }

  // New relative block, independent of the existing state.
  void register_feature(const RelativeMeasurement& meas) override {
    if (b_.has_feature(meas.feature_id))
      throw std::invalid_argument("filter: feature " + std::to_string(meas.feature_id) +
                                  " already registered");
    auto& mean = b_.state.mean;
    auto& cov = b_.state.cov;
    const Eigen::Index n = b_.dim();

    mean.conservativeResize(n + 2);
    mean.tail<2>() = meas.z;
    cov.conservativeResize(n + 2, n + 2);
    cov.bottomLeftCorner(2, n).setZero();
    cov.topRightCorner(n, 2).setZero();
    cov.bottomRightCorner<2, 2>() = meas.cov;

    b_.slots[meas.feature_id] = static_cast<Eigen::Index>(b_.feature_ids.size());
    b_.feature_ids.push_back(meas.feature_id);
  }

  GlobalEstimate estimate_globals() const override {
    GlobalEstimate out;
    out.pose = Pose(b_.state.mean.head<2>(), b_.state.mean(2));
    const Eigen::Matrix2d r = rot(b_.state.mean(2));
    for (std::size_t i = 0; i < b_.feature_count(); ++i) {
      const Eigen::Index j = 3 + 2 * static_cast<Eigen::Index>(i);
      out.features.ids.push_back(b_.feature_ids[i]);
      out.features.positions.emplace_back(b_.state.mean.head<2>() + r * b_.state.mean.segment<2>(j));
    }
    return out;
  }

  const FilterBelief& belief() const override { return b_; }

  void set_belief(FilterBelief b) {
    if (b.frame != FeatureFrame::Relative)
      throw std::invalid_argument("ReducedEkf: snapshot frame mismatch");
    b_ = std::move(b);
  }

 private:
  FilterBelief b_;
  Eigen::RowVectorXd scratch_row_;
  Eigen::VectorXd scratch_col_;
};

}  // namespace rekf
