#pragma once

// Joint Gaussian belief algebra: moment and information forms, conditional
// factorization over an (unobservable, observable) index split, additive
// information-filter fusion, and the reduced Bayesian update that improves
// the observable marginal while keeping the conditional of the unobservable
// block fixed.

#include <cstddef>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

namespace rekf {

struct MomentGaussian {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;

  Eigen::Index dim() const { return mean.size(); }
};

struct InformationGaussian {
  Eigen::VectorXd info_vec;   // xi = Sigma^-1 mu
  Eigen::MatrixXd precision;  // Omega = Sigma^-1

  Eigen::Index dim() const { return info_vec.size(); }
};

// Index split of a joint state into an unobservable block N and an
// observable block O.  The lists must be disjoint and together cover
// 0..dim-1; they need not be contiguous.
struct Partition {
  std::vector<Eigen::Index> unobservable;  // idx_N
  std::vector<Eigen::Index> observable;    // idx_O

  Eigen::Index dim() const {
    return static_cast<Eigen::Index>(unobservable.size() + observable.size());
  }

  void validate(Eigen::Index n) const {
    if (dim() != n) throw std::invalid_argument("partition does not cover the state dimension");
    std::vector<char> seen(static_cast<std::size_t>(n), 0);
    auto mark = [&](const std::vector<Eigen::Index>& idx) {
      for (Eigen::Index i : idx) {
        if (i < 0 || i >= n || seen[static_cast<std::size_t>(i)])
          throw std::invalid_argument("partition indices must be unique and in range");
        seen[static_cast<std::size_t>(i)] = 1;
      }
    };
    mark(unobservable);
    mark(observable);
  }
};

// The factor p(x_N | x_O) = N(x_N; A x_O + b, Omega_{N|O}^-1).
struct ConditionalLinearGaussian {
  Eigen::MatrixXd gain;            // A = Sigma_NO Sigma_OO^-1
  Eigen::VectorXd offset;          // b = mu_N - A mu_O
  Eigen::MatrixXd cond_precision;  // Omega_{N|O} = (Sigma_NN - A Sigma_ON)^-1
};

inline void symmetrize(Eigen::MatrixXd& m) { m = ((m + m.transpose()) * 0.5).eval(); }

namespace detail {

inline constexpr double kMaxCondition = 1e12;

// Cholesky with an explicit failure when the matrix is not usable as an SPD
// operand: either not positive definite or with condition number past 1e12.
inline Eigen::LLT<Eigen::MatrixXd> spd_factor(const Eigen::MatrixXd& m, const char* what) {
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() != Eigen::Success) {
    throw std::runtime_error(std::string(what) + ": matrix is not positive definite");
  }
  const double rcond = llt.rcond();
  if (!(rcond > 1.0 / kMaxCondition)) {
    std::ostringstream msg;
    msg << what << ": matrix is singular to working precision (condition number ~ "
        << (rcond > 0.0 ? 1.0 / rcond : std::numeric_limits<double>::infinity()) << ")";
    throw std::runtime_error(msg.str());
  }
  return llt;
}

inline Eigen::MatrixXd spd_inverse(const Eigen::MatrixXd& m, const char* what) {
  auto llt = spd_factor(m, what);
  Eigen::MatrixXd inv = llt.solve(Eigen::MatrixXd::Identity(m.rows(), m.cols()));
  symmetrize(inv);
  return inv;
}

inline Eigen::MatrixXd gather(const Eigen::MatrixXd& m, const std::vector<Eigen::Index>& rows,
                              const std::vector<Eigen::Index>& cols) {
  Eigen::MatrixXd out(rows.size(), cols.size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < cols.size(); ++j) out(i, j) = m(rows[i], cols[j]);
  return out;
}

inline Eigen::VectorXd gather(const Eigen::VectorXd& v, const std::vector<Eigen::Index>& idx) {
  Eigen::VectorXd out(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) out(i) = v(idx[i]);
  return out;
}

}  // namespace detail

inline InformationGaussian to_information(const MomentGaussian& g) {
  auto llt = detail::spd_factor(g.cov, "to_information: covariance");
  InformationGaussian out;
  out.precision = llt.solve(Eigen::MatrixXd::Identity(g.dim(), g.dim()));
  symmetrize(out.precision);
  out.info_vec = llt.solve(g.mean);
  return out;
}

inline MomentGaussian to_moment(const InformationGaussian& g) {
  auto llt = detail::spd_factor(g.precision, "to_moment: precision");
  MomentGaussian out;
  out.cov = llt.solve(Eigen::MatrixXd::Identity(g.dim(), g.dim()));
  symmetrize(out.cov);
  out.mean = llt.solve(g.info_vec);
  return out;
}

// Factors p(x_N, x_O) = p(x_O) * p(x_N | x_O).  Returns the observable
// marginal in moment form together with the conditional factor.
inline std::pair<MomentGaussian, ConditionalLinearGaussian> condition_split(
    const MomentGaussian& g, const Partition& part) {
  part.validate(g.dim());
  const auto& idx_n = part.unobservable;
  const auto& idx_o = part.observable;

  Eigen::MatrixXd s_nn = detail::gather(g.cov, idx_n, idx_n);
  Eigen::MatrixXd s_no = detail::gather(g.cov, idx_n, idx_o);
  Eigen::MatrixXd s_oo = detail::gather(g.cov, idx_o, idx_o);
  Eigen::VectorXd mu_n = detail::gather(g.mean, idx_n);
  Eigen::VectorXd mu_o = detail::gather(g.mean, idx_o);

  auto llt_oo = detail::spd_factor(s_oo, "condition_split: observable-block covariance");

  ConditionalLinearGaussian cond;
  cond.gain = llt_oo.solve(s_no.transpose()).transpose();  // A = S_NO S_OO^-1
  cond.offset = mu_n - cond.gain * mu_o;
  Eigen::MatrixXd cond_cov = s_nn - cond.gain * s_no.transpose();
  symmetrize(cond_cov);
  cond.cond_precision = detail::spd_inverse(cond_cov, "condition_split: conditional covariance");

  return {MomentGaussian{std::move(mu_o), std::move(s_oo)}, std::move(cond)};
}

// Fuses the linear measurement z = C x + delta, delta ~ N(0, Q):
//   Omega += C^T Q^-1 C,  xi += C^T Q^-1 z.
inline InformationGaussian information_update(const InformationGaussian& g,
                                              const Eigen::MatrixXd& c, const Eigen::MatrixXd& q,
                                              const Eigen::VectorXd& z) {
  if (c.cols() != g.dim() || c.rows() != q.rows() || q.rows() != q.cols() || z.size() != c.rows())
    throw std::invalid_argument("information_update: inconsistent dimensions");
  auto llt_q = detail::spd_factor(q, "information_update: measurement noise");

  InformationGaussian out = g;
  out.precision += c.transpose() * llt_q.solve(c);
  symmetrize(out.precision);
  out.info_vec += c.transpose() * llt_q.solve(z);
  return out;
}

// Reassembles the joint information form from an (updated) observable
// marginal and the untouched conditional:
//   Omega = [ Omega_N|O            -Omega_N|O A                 ]
//           [ -A^T Omega_N|O        Omega_OO + A^T Omega_N|O A  ]
//   xi    = [ Omega_N|O b ; xi_O - A^T Omega_N|O b ]
// with blocks scattered back to the positions given by the partition.
inline InformationGaussian recombine(const InformationGaussian& marginal_o,
                                     const ConditionalLinearGaussian& cond,
                                     const Partition& part) {
  const auto& idx_n = part.unobservable;
  const auto& idx_o = part.observable;
  const Eigen::Index nn = static_cast<Eigen::Index>(idx_n.size());
  const Eigen::Index no = static_cast<Eigen::Index>(idx_o.size());
  if (marginal_o.dim() != no || cond.gain.rows() != nn || cond.gain.cols() != no ||
      cond.offset.size() != nn || cond.cond_precision.rows() != nn ||
      cond.cond_precision.cols() != nn)
    throw std::invalid_argument("recombine: inconsistent dimensions");

  const Eigen::MatrixXd cross = cond.cond_precision * cond.gain;  // Omega_N|O A
  const Eigen::MatrixXd block_nn = cond.cond_precision;
  Eigen::MatrixXd block_oo = marginal_o.precision + cond.gain.transpose() * cross;
  symmetrize(block_oo);
  const Eigen::VectorXd xi_n = cond.cond_precision * cond.offset;
  const Eigen::VectorXd xi_o = marginal_o.info_vec - cond.gain.transpose() * xi_n;

  InformationGaussian out;
  out.precision.setZero(part.dim(), part.dim());
  out.info_vec.setZero(part.dim());
  for (Eigen::Index i = 0; i < nn; ++i) {
    out.info_vec(idx_n[i]) = xi_n(i);
    for (Eigen::Index j = 0; j < nn; ++j) out.precision(idx_n[i], idx_n[j]) = block_nn(i, j);
    for (Eigen::Index j = 0; j < no; ++j) {
      out.precision(idx_n[i], idx_o[j]) = -cross(i, j);
      out.precision(idx_o[j], idx_n[i]) = -cross(i, j);
    }
  }
  for (Eigen::Index i = 0; i < no; ++i) {
    out.info_vec(idx_o[i]) = xi_o(i);
    for (Eigen::Index j = 0; j < no; ++j) out.precision(idx_o[i], idx_o[j]) = block_oo(i, j);
  }
  symmetrize(out.precision);
  return out;
}

// Reduced Bayesian update: fuse the measurement z = C_O x_O + delta into the
// observable marginal only, keeping p(x_N | x_O) fixed.  Composition of
// condition_split, information_update on the O-marginal, recombine, and the
// conversion back to moment form.
inline MomentGaussian reduced_bayes_update(const MomentGaussian& g, const Partition& part,
                                           const Eigen::MatrixXd& c_o, const Eigen::MatrixXd& q,
                                           const Eigen::VectorXd& z) {
  auto [marginal_o, cond] = condition_split(g, part);
  InformationGaussian info_o = to_information(marginal_o);
  InformationGaussian updated_o = information_update(info_o, c_o, q, z);
  InformationGaussian joint = recombine(updated_o, cond, part);
  return to_moment(joint);
}

// Same update computed in moment form.  Because the measurement involves
// only x_O, the joint Kalman update with the zero-padded measurement matrix
// [0 C_O] leaves p(x_N | x_O) unchanged and equals reduced_bayes_update
// exactly; this route avoids the dense information-form round trip and is
// the one the filters use on large states.
inline MomentGaussian reduced_bayes_update_moment(const MomentGaussian& g, const Partition& part,
                                                  const Eigen::MatrixXd& c_o,
                                                  const Eigen::MatrixXd& q,
                                                  const Eigen::VectorXd& z) {
  part.validate(g.dim());
  const auto& idx_o = part.observable;
  const Eigen::Index m = c_o.rows();
  if (c_o.cols() != static_cast<Eigen::Index>(idx_o.size()) || q.rows() != m || q.cols() != m ||
      z.size() != m)
    throw std::invalid_argument("reduced_bayes_update: inconsistent dimensions");

  Eigen::MatrixXd cov_cols_o(g.dim(), idx_o.size());
  for (std::size_t j = 0; j < idx_o.size(); ++j) cov_cols_o.col(j) = g.cov.col(idx_o[j]);

  const Eigen::MatrixXd t = cov_cols_o * c_o.transpose();  // Sigma C~^T, n x m
  Eigen::MatrixXd t_rows_o(idx_o.size(), m);
  for (std::size_t i = 0; i < idx_o.size(); ++i) t_rows_o.row(i) = t.row(idx_o[i]);
  Eigen::MatrixXd s = c_o * t_rows_o + q;
  symmetrize(s);

  auto llt_s = detail::spd_factor(s, "reduced_bayes_update: innovation covariance");
  const Eigen::VectorXd mu_o = detail::gather(g.mean, idx_o);
  const Eigen::VectorXd residual = z - c_o * mu_o;

  MomentGaussian out = g;
  const Eigen::MatrixXd gain = llt_s.solve(t.transpose()).transpose();  // K = T S^-1
  out.mean += gain * residual;
  const Eigen::MatrixXd w = gain * llt_s.matrixL();
  out.cov -= w * w.transpose();
  symmetrize(out.cov);
  return out;
}

}  // namespace rekf
