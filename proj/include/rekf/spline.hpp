#pragma once

// One-dimensional natural cubic spline with analytic first and second
// derivatives, used to turn sparse waypoints into a smooth control profile.

#include <algorithm>
#include <stdexcept>
#include <vector>

namespace rekf {

class NaturalCubicSpline {
 public:
  // Knots must be strictly increasing; at least two points.
  NaturalCubicSpline(std::vector<double> t, std::vector<double> y)
      : t_(std::move(t)), y_(std::move(y)) {
    const std::size_t n = t_.size();
    if (n < 2 || y_.size() != n) throw std::invalid_argument("spline: need >= 2 knots");
    for (std::size_t i = 0; i + 1 < n; ++i)
      if (!(t_[i] < t_[i + 1])) throw std::invalid_argument("spline: knots must be increasing");

    // Second derivatives at the knots, natural boundary (M_0 = M_{n-1} = 0),
    // via the Thomas algorithm.
    m_.assign(n, 0.0);
    if (n > 2) {
      const std::size_t k = n - 2;  // interior unknowns
      std::vector<double> diag(k), upper(k), rhs(k);
      for (std::size_t i = 0; i < k; ++i) {
        const double h0 = t_[i + 1] - t_[i];
        const double h1 = t_[i + 2] - t_[i + 1];
        diag[i] = (h0 + h1) / 3.0;
        upper[i] = h1 / 6.0;
        rhs[i] = (y_[i + 2] - y_[i + 1]) / h1 - (y_[i + 1] - y_[i]) / h0;
      }
      for (std::size_t i = 1; i < k; ++i) {
        const double lower = (t_[i + 1] - t_[i]) / 6.0;
        const double w = lower / diag[i - 1];
        diag[i] -= w * upper[i - 1];
        rhs[i] -= w * rhs[i - 1];
      }
      m_[k] = rhs[k - 1] / diag[k - 1];
      for (std::size_t i = k - 1; i >= 1; --i)
        m_[i] = (rhs[i - 1] - upper[i - 1] * m_[i + 1]) / diag[i - 1];
    }
  }

  double value(double t) const {
    const auto [i, a, b, h] = locate(t);
    return a * y_[i] + b * y_[i + 1] +
           ((a * a * a - a) * m_[i] + (b * b * b - b) * m_[i + 1]) * h * h / 6.0;
  }

  double derivative(double t) const {
    const auto [i, a, b, h] = locate(t);
    return (y_[i + 1] - y_[i]) / h - (3.0 * a * a - 1.0) * h / 6.0 * m_[i] +
           (3.0 * b * b - 1.0) * h / 6.0 * m_[i + 1];
  }

  double second_derivative(double t) const {
    const auto [i, a, b, h] = locate(t);
    return a * m_[i] + b * m_[i + 1];
  }

  double t_min() const { return t_.front(); }
  double t_max() const { return t_.back(); }

 private:
  struct Segment {
    std::size_t i;
    double a, b, h;
  };

  Segment locate(double t) const {
    t = std::clamp(t, t_.front(), t_.back());
    auto it = std::upper_bound(t_.begin(), t_.end(), t);
    std::size_t i = static_cast<std::size_t>(std::distance(t_.begin(), it));
    i = std::min(std::max<std::size_t>(i, 1), t_.size() - 1) - 1;
    const double h = t_[i + 1] - t_[i];
    return {i, (t_[i + 1] - t) / h, (t - t_[i]) / h, h};
  }

  std::vector<double> t_, y_, m_;
};

}  // namespace rekf
