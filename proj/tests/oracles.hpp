#pragma once

// Test-only reference implementations.  These stay deliberately naive
// (explicit inverses, direct density formulas, finite differences) and
// independent of the library's computation paths.

#include <cmath>
#include <random>

#include <Eigen/Dense>

#include "rekf/gaussian.hpp"
#include "rekf/se2.hpp"

namespace oracles {

// Plain moment-form Kalman update for z = H x + delta, delta ~ N(0, Q).
inline rekf::MomentGaussian kf_update(const rekf::MomentGaussian& g, const Eigen::MatrixXd& h,
                                      const Eigen::MatrixXd& q, const Eigen::VectorXd& z) {
  const Eigen::MatrixXd s = h * g.cov * h.transpose() + q;
  const Eigen::MatrixXd k = g.cov * h.transpose() * s.inverse();
  rekf::MomentGaussian out;
  out.mean = g.mean + k * (z - h * g.mean);
  out.cov = (Eigen::MatrixXd::Identity(g.dim(), g.dim()) - k * h) * g.cov;
  out.cov = 0.5 * (out.cov + out.cov.transpose()).eval();
  return out;
}

inline double gaussian_logpdf(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov,
                              const Eigen::VectorXd& x) {
  const Eigen::Index n = mean.size();
  const Eigen::VectorXd d = x - mean;
  const double quad = d.dot(cov.inverse() * d);
  const double logdet = std::log(cov.determinant());
  return -0.5 * (quad + logdet + n * std::log(2.0 * rekf::kPi));
}

inline Eigen::MatrixXd random_spd(Eigen::Index n, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> unit(0.0, 1.0);
  Eigen::MatrixXd b(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) b(i, j) = unit(rng);
  return scale * (b * b.transpose()) + 0.1 * scale * Eigen::MatrixXd::Identity(n, n);
}

inline rekf::MomentGaussian random_gaussian(Eigen::Index n, std::mt19937_64& rng,
                                            double scale = 1.0) {
  std::normal_distribution<double> unit(0.0, 1.0);
  rekf::MomentGaussian g;
  g.mean.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) g.mean(i) = unit(rng);
  g.cov = random_spd(n, rng, scale);
  return g;
}

// Central-difference Jacobian of f: R^n -> R^m.
template <typename F>
inline Eigen::MatrixXd numeric_jacobian(F f, const Eigen::VectorXd& x0, double h = 1e-6) {
  const Eigen::VectorXd f0 = f(x0);
  Eigen::MatrixXd jac(f0.size(), x0.size());
  for (Eigen::Index j = 0; j < x0.size(); ++j) {
    Eigen::VectorXd xp = x0, xm = x0;
    xp(j) += h;
    xm(j) -= h;
    jac.col(j) = (f(xp) - f(xm)) / (2.0 * h);
  }
  return jac;
}

}  // namespace oracles
