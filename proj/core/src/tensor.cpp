#include "advpc/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>

#include "advpc/errors.hpp"

namespace advpc {

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (int d : shape) {
    if (d <= 0) throw ContractError("shape extents must be positive, got " + shape_str(shape));
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << "]";
  return os.str();
}

Tensor::Tensor(Shape shape) : shape_(std::move(shape)) {
  data_.assign(shape_size(shape_), 0.0);
}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (shape_size(shape_) != data_.size())
    throw ContractError("tensor data length " + std::to_string(data_.size()) +
                        " does not match shape " + shape_str(shape_));
  for (double v : data_)
    if (!std::isfinite(v)) throw ContractError("tensor data must be finite");
}

Tensor Tensor::scalar(double v) { return Tensor(Shape{1}, std::vector<double>{v}); }

Tensor Tensor::full(Shape shape, double v) {
  Tensor t(std::move(shape));
  std::fill(t.data_.begin(), t.data_.end(), v);
  return t;
}

bool Tensor::bit_equal(const Tensor& other) const {
  if (shape_ != other.shape_) return false;
  return std::memcmp(data_.data(), other.data_.data(),
                     data_.size() * sizeof(double)) == 0;
}

static void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b))
    throw ContractError(std::string(op) + ": shape mismatch " +
                        shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

Tensor sign(const Tensor& t) {
  Tensor out(t.shape());
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double v = t[i];
    out[i] = (v > 0.0) ? 1.0 : ((v < 0.0) ? -1.0 : 0.0);
  }
  return out;
}

Tensor clip_ball(const Tensor& x_orig, const Tensor& x, double epsilon,
                 double lo, double hi) {
  require_same_shape(x_orig, x, "clip_ball");
  if (!(epsilon >= 0.0)) throw ContractError("clip_ball: epsilon must be >= 0");
  if (!(lo < hi)) throw ContractError("clip_ball: pixel range is empty");
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double floor_i = std::max(x_orig[i] - epsilon, lo);
    const double ceil_i = std::min(x_orig[i] + epsilon, hi);
    out[i] = std::min(std::max(x[i], floor_i), ceil_i);
  }
  return out;
}

double l1_norm(const Tensor& t) {
  double s = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) s += std::fabs(t[i]);
  return s;
}

Tensor l1_normalize(const Tensor& t) {
  const double s = l1_norm(t);
  if (s < kDegenerateL1)
    throw DegenerateGradientError("l1_normalize: mass " + std::to_string(s) +
                                  " below usable threshold");
  Tensor out(t.shape());
  for (std::size_t i = 0; i < t.size(); ++i) out[i] = t[i] / s;
  return out;
}

Tensor l1_normalize_or_zero(const Tensor& t, bool* degenerate) {
  const double s = l1_norm(t);
  if (s < kDegenerateL1) {
    if (degenerate) *degenerate = true;
    return Tensor(t.shape());
  }
  Tensor out(t.shape());
  for (std::size_t i = 0; i < t.size(); ++i) out[i] = t[i] / s;
  return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  Tensor out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  Tensor out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
  return out;
}

Tensor scale(const Tensor& t, double c) {
  Tensor out(t.shape());
  for (std::size_t i = 0; i < t.size(); ++i) out[i] = c * t[i];
  return out;
}

Tensor add_scaled(const Tensor& a, double c, const Tensor& b) {
  require_same_shape(a, b, "add_scaled");
  Tensor out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + c * b[i];
  return out;
}

double max_abs(const Tensor& t) {
  double m = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) m = std::max(m, std::fabs(t[i]));
  return m;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "max_abs_diff");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
  return m;
}

bool all_finite(const Tensor& t) {
  for (std::size_t i = 0; i < t.size(); ++i)
    if (!std::isfinite(t[i])) return false;
  return true;
}

}  // namespace advpc
