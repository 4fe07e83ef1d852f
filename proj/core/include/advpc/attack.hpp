#ifndef ADVPC_ATTACK_HPP
#define ADVPC_ATTACK_HPP

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "advpc/augment.hpp"
#include "advpc/model.hpp"
#include "advpc/tensor.hpp"

namespace advpc {

enum class BaseMethod { Fgsm, IFgsm, MiFgsm, NiFgsm };

const char* base_method_name(BaseMethod base);

// Attack identifier: a base method plus the optional estimator prefixes.
// Canonical string form is "pc-si-ti-di-<base>" with absent parts dropped,
// e.g. "fgsm", "pc-i-fgsm", "si-ti-di-ni-fgsm". parse() accepts the prefixes
// in any order, each at most once.
struct AttackId {
  BaseMethod base = BaseMethod::Fgsm;
  bool pc = false;  // predictor-corrector gradient
  bool si = false;  // scale-copy average
  bool ti = false;  // kernel-smoothed gradient
  bool di = false;  // random resize-and-pad

  std::string str() const;
  static AttackId parse(const std::string& text);

  bool operator==(const AttackId& other) const = default;
};

// Snapshot of the prediction loop after step k of k_total, handed to the
// trace hook. g_sum accumulates one unit-L1 addend per step, scaled by
// 1/k_total, so ||g_sum||_1 stays within k/k_total plus rounding.
struct PredictionState {
  Tensor x_pre;
  Tensor g_sum;
  int k = 0;
  int k_total = 0;
};

using PredictionObserver = std::function<void(const PredictionState&)>;
using IterateObserver = std::function<void(int t, const Tensor& x_t)>;

struct AttackConfig {
  double epsilon = 0.3;                    // L-inf budget in pixel units
  std::optional<double> step_alpha;        // per-iteration step; epsilon/iterations when unset
  int iterations = 10;                     // T, for the iterative methods
  int predictions = 1;                     // K, prediction horizon per gradient
  double momentum_mu = 1.0;                // decay on the accumulated gradient
  std::optional<AugmentConfig> augment;
  std::uint64_t rng_seed = 0;
  double lo = 0.0;                         // pixel range
  double hi = 1.0;

  // Ablation: anchor the prediction loop at the current iterate instead of
  // the Nesterov lookahead point. Costs one extra gradient per iteration
  // because the anchor's gradient is no longer shared with the correction.
  bool ni_anchor_at_iterate = false;

  // Pure trace hooks for invariant checking; never affect the result.
  PredictionObserver on_prediction;
  IterateObserver on_iterate;

  double alpha() const {
    return step_alpha ? *step_alpha : epsilon / iterations;
  }
};

struct AttackResult {
  Tensor x_adv;
  long long grad_evals = 0;        // attack-level gradient calculations
  int source_label = -1;
  bool success_on_source = false;  // prediction on x_adv differs from the label
  bool degenerate_gradient = false;  // some step saw a gradient with ~zero L1 mass
  double momentum_l1 = 0.0;          // final accumulated-gradient L1 (momentum methods)
};

// Single sign step of magnitude epsilon, clipped to the budget and pixel
// range. One gradient evaluation; a degenerate gradient returns the input
// unchanged with the flag set.
AttackResult fgsm(const Model& m, const Tensor& x, int y, const AttackConfig& cfg);

// T clipped sign steps of size alpha from the unmodified input.
AttackResult i_fgsm(const Model& m, const Tensor& x, int y, const AttackConfig& cfg);

// Adds a momentum accumulator: g <- mu*g + normalized gradient, stepping on
// sign(g). mu = 0 reduces to plain iteration bit-for-bit.
AttackResult mi_fgsm(const Model& m, const Tensor& x, int y, const AttackConfig& cfg);

// Momentum with a Nesterov lookahead: the gradient is taken at
// x + alpha*mu*g rather than at the iterate.
AttackResult ni_fgsm(const Model& m, const Tensor& x, int y, const AttackConfig& cfg);

// Prediction loop: starting from anchor_x, run K sign steps of size `step`
// (each clipped into the epsilon-ball around original_x and the pixel
// range), averaging the L1-normalized gradient of each predicted point.
// Returns the averaged mass (||.||_1 <= 1 plus rounding). `anchor_grad` is
// the already-computed gradient at anchor_x; passing null makes the loop
// evaluate it itself at the cost of one extra query. Consumes exactly K
// oracle queries when anchor_grad is given. A degenerate gradient
// contributes a zero addend and sets *degenerate_seen.
Tensor pc_predict(GradientOracle& oracle, const Tensor& anchor_x,
                  const Tensor* anchor_grad, const Tensor& original_x, int label,
                  int K, double step, double epsilon, double lo, double hi,
                  bool* degenerate_seen = nullptr,
                  const PredictionObserver& observer = {});

// Predictor-corrector single-step attack: the step direction is
// sign(normalized gradient at x + averaged prediction mass), with both the
// prediction steps and the final step using magnitude epsilon. K = 0 is
// exactly fgsm; grad_evals = K + 1.
AttackResult pc_fgsm(const Model& m, const Tensor& x, int y, const AttackConfig& cfg);

// Predictor-corrector form of the iterative methods. Each iteration anchors
// a K-step prediction at the point where the base method evaluates its
// gradient (the iterate for plain/momentum iteration, the lookahead for
// Nesterov), then feeds the corrected direction into the base update rule.
// K = 0 is bit-identical to the base method; grad_evals = T*(K+1).
AttackResult pc_iterative(BaseMethod base, const Model& m, const Tensor& x, int y,
                          const AttackConfig& cfg);

// Dispatch by attack id. The id decides which gradient estimators are
// active: parameter values come from cfg.augment when present (defaults
// otherwise), but estimators not named in the id are switched off.
AttackResult run_attack(const AttackId& id, const Model& m, const Tensor& x, int y,
                        const AttackConfig& cfg);

// Runs `id` against the weighted-logit fusion of `members`. A single member
// with weight one is bit-identical to attacking that member directly.
AttackResult ensemble_attack(const std::vector<const Model*>& members,
                             const std::vector<double>& weights, const AttackId& id,
                             const Tensor& x, int y, const AttackConfig& cfg);

// Closed-form gradient-calculation count for the id under cfg
// (1 for single-step, T for iterative, times K+1 with prediction).
long long expected_grad_evals(const AttackId& id, const AttackConfig& cfg);

}  // namespace advpc

#endif  // ADVPC_ATTACK_HPP
