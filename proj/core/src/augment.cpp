#include "advpc/augment.hpp"

#include <cmath>
#include <string>

#include "advpc/errors.hpp"

namespace advpc {

namespace {

void validate_dim(const DimConfig& cfg) {
  if (!(cfg.probability >= 0.0 && cfg.probability <= 1.0))
    throw ContractError("dim: probability must be in [0,1]");
  if (!(cfg.max_expand_ratio > 1.0))
    throw ContractError("dim: max_expand_ratio must exceed 1");
}

void validate_tim(const TimConfig& cfg) {
  if (cfg.kernel_size < 1 || cfg.kernel_size % 2 == 0)
    throw ContractError("tim: kernel size must be odd and positive");
}

void validate_sim(const SimConfig& cfg) {
  if (cfg.copies < 1) throw ContractError("sim: copies must be >= 1");
}

double tim_sigma(const TimConfig& cfg) {
  return cfg.sigma > 0.0 ? cfg.sigma : static_cast<double>(cfg.kernel_size) / 3.0;
}

int square_side(const Tensor& x, const char* op) {
  if (x.shape().size() != 3 || x.shape()[1] != x.shape()[2])
    throw ContractError(std::string(op) + ": needs square {C,H,H} input, got " +
                        shape_str(x.shape()));
  return x.shape()[1];
}

}  // namespace

Tensor gaussian_kernel(int size, double sigma) {
  if (size < 1 || size % 2 == 0)
    throw ContractError("gaussian_kernel: size must be odd and positive");
  if (!(sigma > 0.0)) throw ContractError("gaussian_kernel: sigma must be positive");
  Tensor k(Shape{size, size});
  const int c = size / 2;
  const double inv = 1.0 / (2.0 * sigma * sigma);
  double sum = 0.0;
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      const double d2 = static_cast<double>((y - c) * (y - c) + (x - c) * (x - c));
      const double w = std::exp(-d2 * inv);
      k[static_cast<std::size_t>(y) * size + x] = w;
      sum += w;
    }
  for (std::size_t i = 0; i < k.size(); ++i) k[i] /= sum;
  return k;
}

Tensor plain_gradient(const Model& m, const Tensor& x, int label) {
  ForwardPass pass = forward_loss(m, x, label);
  return input_gradient(pass);
}

Tensor dim_transform_gradient(const Model& m, const Tensor& x, int label, int size,
                              int top, int left, int canvas) {
  Tape tape(true);
  const NodeId xn = tape.leaf(x);
  NodeId cur = tape.bilinear_resize(xn, size, size);
  cur = tape.pad2d(cur, top, left, canvas, canvas);
  const NodeId logits = m.build_logits(tape, cur);
  const NodeId loss = m.build_loss(tape, logits, label);
  tape.backward(loss);
  return tape.grad(xn);
}

Tensor dim_gradient(const Model& m, const Tensor& x, int label, const DimConfig& cfg,
                    Rng& rng) {
  validate_dim(cfg);
  const int side = square_side(x, "dim_gradient");
  const int canvas = static_cast<int>(std::ceil(cfg.max_expand_ratio * side));
  if (canvas <= side)
    throw ContractError("dim_gradient: expand ratio leaves no room on the canvas");

  // Fixed draw order, always fully consumed: coin, size, top, left.
  const double coin = rng.next_unit();
  const int size = side + static_cast<int>(rng.next_below(static_cast<std::uint32_t>(canvas - side)));
  const int max_off = canvas - size;
  const int top = static_cast<int>(rng.next_below(static_cast<std::uint32_t>(max_off + 1)));
  const int left = static_cast<int>(rng.next_below(static_cast<std::uint32_t>(max_off + 1)));

  if (coin < cfg.probability)
    return dim_transform_gradient(m, x, label, size, top, left, canvas);
  return plain_gradient(m, x, label);
}

Tensor smooth_gradient(const Tensor& g, const Tensor& kernel) {
  if (kernel.shape().size() != 2 || kernel.shape()[0] != kernel.shape()[1])
    throw ContractError("smooth_gradient: kernel must be square");
  const int size = kernel.shape()[0];
  if (size % 2 == 0) throw ContractError("smooth_gradient: kernel size must be odd");
  if (g.shape().size() != 3)
    throw ContractError("smooth_gradient: gradient must be {C,H,W}");
  const int c = g.shape()[0], h = g.shape()[1], w = g.shape()[2];
  if (size > h || size > w)
    throw ContractError("smooth_gradient: kernel larger than the image");
  if (size == 1) return scale(g, kernel[0]);  // single tap: exact scale

  const int off = size / 2;
  Tensor out(g.shape());
  for (int ch = 0; ch < c; ++ch) {
    const double* src = g.data() + static_cast<std::size_t>(ch) * h * w;
    double* dst = out.data() + static_cast<std::size_t>(ch) * h * w;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        double acc = 0.0;
        for (int ky = 0; ky < size; ++ky) {
          const int iy = y + ky - off;
          if (iy < 0 || iy >= h) continue;
          for (int kx = 0; kx < size; ++kx) {
            const int ix = x + kx - off;
            if (ix < 0 || ix >= w) continue;
            acc += kernel[static_cast<std::size_t>(ky) * size + kx] * src[iy * w + ix];
          }
        }
        dst[y * w + x] = acc;
      }
  }
  return out;
}

Tensor tim_gradient(const Model& m, const Tensor& x, int label, const TimConfig& cfg) {
  validate_tim(cfg);
  return smooth_gradient(plain_gradient(m, x, label),
                         gaussian_kernel(cfg.kernel_size, tim_sigma(cfg)));
}

Tensor sim_gradient(const Model& m, const Tensor& x, int label, const SimConfig& cfg) {
  validate_sim(cfg);
  Tensor acc(x.shape());
  for (int i = 0; i < cfg.copies; ++i) {
    const Tensor copy = (i == 0) ? x : scale(x, std::ldexp(1.0, -i));
    const Tensor g = plain_gradient(m, copy, label);
    for (std::size_t k = 0; k < acc.size(); ++k) acc[k] += g[k];
  }
  return scale(acc, 1.0 / cfg.copies);
}

GradientOracle::GradientOracle(const Model& model, std::optional<AugmentConfig> aug,
                               Rng rng)
    : model_(model), aug_(std::move(aug)), rng_(rng) {
  if (aug_) {
    if (aug_->dim) validate_dim(*aug_->dim);
    if (aug_->sim) validate_sim(*aug_->sim);
    if (aug_->tim) {
      validate_tim(*aug_->tim);
      tim_kernel_ = gaussian_kernel(aug_->tim->kernel_size, tim_sigma(*aug_->tim));
    }
  }
}

Tensor GradientOracle::base_gradient(const Tensor& x, int label) {
  ++model_grads_;
  if (aug_ && aug_->dim) return dim_gradient(model_, x, label, *aug_->dim, rng_);
  return plain_gradient(model_, x, label);
}

Tensor GradientOracle::loss_gradient(const Tensor& x, int label) {
  ++queries_;
  const int copies = (aug_ && aug_->sim) ? aug_->sim->copies : 1;
  Tensor acc(x.shape());
  for (int i = 0; i < copies; ++i) {
    const Tensor copy = (i == 0) ? x : scale(x, std::ldexp(1.0, -i));
    const Tensor g = base_gradient(copy, label);
    for (std::size_t k = 0; k < acc.size(); ++k) acc[k] += g[k];
  }
  Tensor out = scale(acc, 1.0 / copies);
  if (!tim_kernel_.empty()) out = smooth_gradient(out, tim_kernel_);
  return out;
}

}  // namespace advpc
