#include "conalign/pchip.hpp"

#include "conalign/error.hpp"

#include <algorithm>
#include <cmath>

namespace conalign::pchip {

namespace {

double sign(double v) { return (v > 0.0) - (v < 0.0); }

double edge_slope(double h0, double h1, double m0, double m1) {
  double d = ((2.0 * h0 + h1) * m0 - h0 * m1) / (h0 + h1);
  if (sign(d) != sign(m0)) {
    d = 0.0;
  } else if (sign(m0) != sign(m1) && std::abs(d) > 3.0 * std::abs(m0)) {
    d = 3.0 * m0;
  }
  return d;
}

template <typename SpacingFn>
void fill_slopes(std::span<const double> y, SpacingFn spacing, std::span<double> d) {
  const std::size_t n = y.size();
  if (n == 2) {
    d[0] = d[1] = (y[1] - y[0]) / spacing(0);
    return;
  }
  for (std::size_t k = 1; k + 1 < n; ++k) {
    const double h0 = spacing(k - 1);
    const double h1 = spacing(k);
    const double m0 = (y[k] - y[k - 1]) / h0;
    const double m1 = (y[k + 1] - y[k]) / h1;
    if (m0 * m1 <= 0.0) {
      d[k] = 0.0;
    } else {
      const double w1 = 2.0 * h1 + h0;
      const double w2 = h1 + 2.0 * h0;
      d[k] = (w1 + w2) / (w1 / m0 + w2 / m1);
    }
  }
  d[0] = edge_slope(spacing(0), spacing(1), (y[1] - y[0]) / spacing(0), (y[2] - y[1]) / spacing(1));
  d[n - 1] = edge_slope(spacing(n - 2), spacing(n - 3), (y[n - 1] - y[n - 2]) / spacing(n - 2),
                        (y[n - 2] - y[n - 3]) / spacing(n - 3));
}

}  // namespace

std::vector<double> slopes(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw ValidationError("pchip: need >= 2 matching samples");
  std::vector<double> d(x.size());
  fill_slopes(y, [&](std::size_t k) { return x[k + 1] - x[k]; }, d);
  return d;
}

void uniform_slopes(std::span<const double> y, double h, std::span<double> out) {
  fill_slopes(y, [h](std::size_t) { return h; }, out);
}

Interpolant::Interpolant(std::vector<double> x, std::vector<double> y) : x_(std::move(x)), y_(std::move(y)) {
  if (x_.size() != y_.size() || x_.size() < 2) throw ValidationError("pchip: need >= 2 matching samples");
  for (std::size_t k = 1; k < x_.size(); ++k) {
    if (!(x_[k] > x_[k - 1])) throw ValidationError("pchip: abscissae must be strictly increasing");
  }
  d_ = slopes(x_, y_);
}

std::size_t Interpolant::interval(double t) const {
  auto it = std::upper_bound(x_.begin(), x_.end(), t);
  std::size_t k = it == x_.begin() ? 0 : static_cast<std::size_t>(it - x_.begin()) - 1;
  return std::min(k, x_.size() - 2);
}

double Interpolant::operator()(double t) const {
  const std::size_t k = interval(t);
  const double h = x_[k + 1] - x_[k];
  const double s = (t - x_[k]) / h;
  const double s2 = s * s;
  const double s3 = s2 * s;
  return (2 * s3 - 3 * s2 + 1) * y_[k] + (s3 - 2 * s2 + s) * h * d_[k] + (-2 * s3 + 3 * s2) * y_[k + 1] +
         (s3 - s2) * h * d_[k + 1];
}

double Interpolant::derivative(double t) const {
  const std::size_t k = interval(t);
  const double h = x_[k + 1] - x_[k];
  const double s = (t - x_[k]) / h;
  const double s2 = s * s;
  return (6 * s2 - 6 * s) / h * y_[k] + (3 * s2 - 4 * s + 1) * d_[k] + (-6 * s2 + 6 * s) / h * y_[k + 1] +
         (3 * s2 - 2 * s) * d_[k + 1];
}

namespace {

template <typename Weights>
std::vector<Stencil> stencils(std::size_t n, std::span<const double> queries, Weights weights) {
  const double h = 1.0 / static_cast<double>(n - 1);
  std::vector<Stencil> out(queries.size());
  for (std::size_t i = 0; i < queries.size(); ++i) {
    const double t = std::clamp(queries[i], 0.0, 1.0);
    std::size_t k = std::min(static_cast<std::size_t>(t / h), n - 2);
    double s = (t - static_cast<double>(k) * h) / h;
    if (s > 1.0 && k + 2 < n) {
      ++k;
      s -= 1.0;
    }
    s = std::clamp(s, 0.0, 1.0);
    out[i] = weights(k, s, h);
  }
  return out;
}

}  // namespace

std::vector<Stencil> uniform_stencils(std::size_t n, std::span<const double> queries) {
  return stencils(n, queries, [](std::size_t k, double s, double h) {
    const double s2 = s * s;
    const double s3 = s2 * s;
    return Stencil{k, 2 * s3 - 3 * s2 + 1, -2 * s3 + 3 * s2, (s3 - 2 * s2 + s) * h, (s3 - s2) * h};
  });
}

std::vector<Stencil> uniform_derivative_stencils(std::size_t n, std::span<const double> queries) {
  return stencils(n, queries, [](std::size_t k, double s, double h) {
    const double s2 = s * s;
    return Stencil{k, (6 * s2 - 6 * s) / h, (6 * s - 6 * s2) / h, 3 * s2 - 4 * s + 1, 3 * s2 - 2 * s};
  });
}

}  // namespace conalign::pchip
