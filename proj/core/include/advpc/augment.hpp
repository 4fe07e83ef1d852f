#ifndef ADVPC_AUGMENT_HPP
#define ADVPC_AUGMENT_HPP

#include <cstdint>
#include <optional>

#include "advpc/model.hpp"
#include "advpc/rng.hpp"
#include "advpc/tensor.hpp"

namespace advpc {

// Random resize-and-pad diversity. With probability `probability` the input
// is bilinearly resized to a drawn square size in [S, ceil(ratio*S)) and
// zero-padded at a drawn offset onto the ceil(ratio*S) canvas; the gradient
// is pulled back through the transform. Needs a source whose stack accepts
// the enlarged canvas (the conv architectures do; a flat dense front layer
// does not).
struct DimConfig {
  double probability = 0.5;
  double max_expand_ratio = 330.0 / 299.0;  // 28 px grows to at most 31
};

// Gaussian smoothing of the gradient (translation-invariance surrogate).
struct TimConfig {
  int kernel_size = 7;
  double sigma = 0.0;  // <= 0 selects kernel_size / 3
};

// Scale-invariance average over copies x / 2^i, i = 0..copies-1. Each term
// is the loss gradient with respect to the scaled copy itself, accumulated
// at x's shape.
struct SimConfig {
  int copies = 5;
};

struct AugmentConfig {
  std::optional<DimConfig> dim;
  std::optional<TimConfig> tim;
  std::optional<SimConfig> sim;
  std::uint64_t rng_stream = 0;
};

// Unit-mass Gaussian kernel; size must be odd and positive.
Tensor gaussian_kernel(int size, double sigma);

// Plain d(loss)/d(input) at x.
Tensor plain_gradient(const Model& m, const Tensor& x, int label);

// Deterministic resize/pad transform with the gradient mapped back through
// the transform's reverse pass. size == canvas == input side with zero
// offset is an exact identity.
Tensor dim_transform_gradient(const Model& m, const Tensor& x, int label, int size,
                              int top, int left, int canvas);

// One randomized diversity draw. Exactly four values are consumed from rng
// whether or not the transform fires, so downstream draws stay aligned.
Tensor dim_gradient(const Model& m, const Tensor& x, int label, const DimConfig& cfg,
                    Rng& rng);

// Same-size zero-padded per-channel convolution of g with `kernel`; a 1x1
// kernel degenerates to an exact elementwise scale.
Tensor smooth_gradient(const Tensor& g, const Tensor& kernel);

Tensor tim_gradient(const Model& m, const Tensor& x, int label, const TimConfig& cfg);

Tensor sim_gradient(const Model& m, const Tensor& x, int label, const SimConfig& cfg);

// The full estimator stack with fixed composition order: the scale average
// is outermost, the diversity draw applies to every scaled copy, and the
// smoothing kernel hits the aggregated gradient last. Counts every query so
// attacks can reconcile their reported budgets. With no parts configured
// this is exactly the plain gradient.
class GradientOracle {
 public:
  GradientOracle(const Model& model, std::optional<AugmentConfig> aug, Rng rng);

  Tensor loss_gradient(const Tensor& x, int label);

  // Attack-level gradient calculations (one per loss_gradient call).
  long long query_count() const { return queries_; }
  // Raw model backward passes (grows faster under the scale average).
  long long model_grad_count() const { return model_grads_; }

  const Model& model() const { return model_; }

 private:
  Tensor base_gradient(const Tensor& x, int label);

  const Model& model_;
  std::optional<AugmentConfig> aug_;
  Rng rng_;
  Tensor tim_kernel_;  // empty when smoothing is off
  long long queries_ = 0;
  long long model_grads_ = 0;
};

}  // namespace advpc

#endif  // ADVPC_AUGMENT_HPP
