#ifndef ADVPC_TENSOR_HPP
#define ADVPC_TENSOR_HPP

#include <cstddef>
#include <string>
#include <vector>

namespace advpc {

using Shape = std::vector<int>;

std::size_t shape_size(const Shape& shape);
std::string shape_str(const Shape& shape);

// L1 mass below this is treated as a vanished gradient everywhere.
inline constexpr double kDegenerateL1 = 1e-12;

// Dense row-major array of f64. All attack arithmetic runs on doubles; the
// file formats narrow to f32 on write and widen back on read.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape);                      // zero-filled
  Tensor(Shape shape, std::vector<double> data);     // validates size + finiteness
  static Tensor scalar(double v);
  static Tensor full(Shape shape, double v);

  const Shape& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  double operator[](std::size_t i) const { return data_[i]; }
  double& operator[](std::size_t i) { return data_[i]; }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  // Shape equal and every payload double bitwise equal (so +0 != -0).
  bool bit_equal(const Tensor& other) const;

 private:
  Shape shape_;
  std::vector<double> data_;
};

// sign(v) in {-1, 0, +1}; zero exactly where the input is exactly zero.
Tensor sign(const Tensor& t);

// Project x onto the L-inf ball of radius epsilon around x_orig intersected
// with the pixel box [lo, hi]. Idempotent bit-for-bit.
Tensor clip_ball(const Tensor& x_orig, const Tensor& x, double epsilon,
                 double lo, double hi);

double l1_norm(const Tensor& t);

// t / ||t||_1; throws DegenerateGradientError when the mass is below
// kDegenerateL1.
Tensor l1_normalize(const Tensor& t);

// Attack-loop variant: a degenerate input yields a zero tensor instead of
// an error; *degenerate (if given) is OR-ed with the outcome.
Tensor l1_normalize_or_zero(const Tensor& t, bool* degenerate = nullptr);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& t, double c);
// a + c * b, the one fused update every stepping rule uses.
Tensor add_scaled(const Tensor& a, double c, const Tensor& b);

double max_abs(const Tensor& t);
double max_abs_diff(const Tensor& a, const Tensor& b);
bool all_finite(const Tensor& t);

}  // namespace advpc

#endif  // ADVPC_TENSOR_HPP
