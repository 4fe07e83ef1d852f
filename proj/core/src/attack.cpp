#include "advpc/attack.hpp"

#include <utility>

#include "advpc/errors.hpp"
#include "advpc/rng.hpp"

namespace advpc {

namespace {

void validate(const AttackConfig& cfg) {
  if (!(cfg.epsilon >= 0.0)) throw ContractError("attack: epsilon must be >= 0");
  if (cfg.iterations < 1) throw ContractError("attack: iterations must be >= 1");
  if (cfg.predictions < 0) throw ContractError("attack: predictions must be >= 0");
  if (!(cfg.momentum_mu >= 0.0))
    throw ContractError("attack: momentum decay must be >= 0");
  if (cfg.step_alpha && !(*cfg.step_alpha >= 0.0))
    throw ContractError("attack: step size must be >= 0");
  if (!(cfg.lo < cfg.hi)) throw ContractError("attack: empty pixel range");
}

// Shared iteration core. Every public attack is an instance of this loop;
// the bit-exact collapses between methods (K = 0, mu = 0, T = 1) follow
// from them literally running the same code on the same parameters.
AttackResult run_core(const Model& model, const Tensor& x, int y,
                      const AttackConfig& cfg, BaseMethod base, int T, double alpha,
                      int K) {
  validate(cfg);
  if (!(alpha >= 0.0)) throw ContractError("attack: step size must be >= 0");
  const std::uint64_t stream = cfg.augment ? cfg.augment->rng_stream : 0;
  GradientOracle oracle(model, cfg.augment, Rng::derive(cfg.rng_seed, stream));

  const bool with_momentum = base == BaseMethod::MiFgsm || base == BaseMethod::NiFgsm;
  bool degenerate = false;
  Tensor x_t = x;
  Tensor g(x.shape());  // momentum accumulator, starts at zero

  for (int t = 0; t < T; ++t) {
    Tensor anchor =
        base == BaseMethod::NiFgsm
            ? add_scaled(x_t, alpha * cfg.momentum_mu, g)  // lookahead, unclipped
            : x_t;
    Tensor grad = oracle.loss_gradient(anchor, y);
    bool step_degenerate = false;
    Tensor dir = l1_normalize_or_zero(grad, &step_degenerate);
    degenerate |= step_degenerate;

    if (K > 0) {
      const Tensor* pred_anchor = &anchor;
      const Tensor* pred_grad = &grad;
      if (base == BaseMethod::NiFgsm && cfg.ni_anchor_at_iterate) {
        pred_anchor = &x_t;
        pred_grad = nullptr;  // gradient at the iterate is not available for free
      }
      Tensor g_pre = pc_predict(oracle, *pred_anchor, pred_grad, x, y, K, alpha,
                                cfg.epsilon, cfg.lo, cfg.hi, &degenerate,
                                cfg.on_prediction);
      dir = add(dir, g_pre);
    }

    if (with_momentum) {
      g = add_scaled(dir, cfg.momentum_mu, g);
      dir = g;
    }
    x_t = clip_ball(x, add_scaled(x_t, alpha, sign(dir)), cfg.epsilon, cfg.lo, cfg.hi);
    if (cfg.on_iterate) cfg.on_iterate(t, x_t);
  }

  AttackResult res;
  res.x_adv = std::move(x_t);
  res.grad_evals = oracle.query_count();
  res.source_label = y;
  res.degenerate_gradient = degenerate;
  res.momentum_l1 = with_momentum ? l1_norm(g) : 0.0;
  res.success_on_source = predict(model, res.x_adv) != y;
  return res;
}

}  // namespace

Tensor pc_predict(GradientOracle& oracle, const Tensor& anchor_x,
                  const Tensor* anchor_grad, const Tensor& original_x, int label,
                  int K, double step, double epsilon, double lo, double hi,
                  bool* degenerate_seen, const PredictionObserver& observer) {
  if (K < 1) throw ContractError("pc_predict: prediction count must be >= 1");
  if (!(step >= 0.0)) throw ContractError("pc_predict: step must be >= 0");
  if (!(epsilon >= 0.0)) throw ContractError("pc_predict: epsilon must be >= 0");

  Tensor g_here = anchor_grad ? *anchor_grad : oracle.loss_gradient(anchor_x, label);
  Tensor x_pre = anchor_x;
  Tensor g_sum(original_x.shape());
  const double inv_k = 1.0 / K;
  for (int k = 1; k <= K; ++k) {
    x_pre = clip_ball(original_x, add_scaled(x_pre, step, sign(g_here)), epsilon, lo, hi);
    g_here = oracle.loss_gradient(x_pre, label);
    bool degenerate = false;
    g_sum = add_scaled(g_sum, inv_k, l1_normalize_or_zero(g_here, &degenerate));
    if (degenerate && degenerate_seen) *degenerate_seen = true;
    if (observer) observer({x_pre, g_sum, k, K});
  }
  return g_sum;
}

AttackResult fgsm(const Model& m, const Tensor& x, int y, const AttackConfig& cfg) {
  return run_core(m, x, y, cfg, BaseMethod::Fgsm, 1, cfg.epsilon, 0);
}

AttackResult i_fgsm(const Model& m, const Tensor& x, int y, const AttackConfig& cfg) {
  return run_core(m, x, y, cfg, BaseMethod::IFgsm, cfg.iterations, cfg.alpha(), 0);
}

AttackResult mi_fgsm(const Model& m, const Tensor& x, int y, const AttackConfig& cfg) {
  return run_core(m, x, y, cfg, BaseMethod::MiFgsm, cfg.iterations, cfg.alpha(), 0);
}

AttackResult ni_fgsm(const Model& m, const Tensor& x, int y, const AttackConfig& cfg) {
  return run_core(m, x, y, cfg, BaseMethod::NiFgsm, cfg.iterations, cfg.alpha(), 0);
}

AttackResult pc_fgsm(const Model& m, const Tensor& x, int y, const AttackConfig& cfg) {
  return run_core(m, x, y, cfg, BaseMethod::Fgsm, 1, cfg.epsilon, cfg.predictions);
}

AttackResult pc_iterative(BaseMethod base, const Model& m, const Tensor& x, int y,
                          const AttackConfig& cfg) {
  if (base == BaseMethod::Fgsm) return pc_fgsm(m, x, y, cfg);
  return run_core(m, x, y, cfg, base, cfg.iterations, cfg.alpha(), cfg.predictions);
}

const char* base_method_name(BaseMethod base) {
  switch (base) {
    case BaseMethod::Fgsm: return "fgsm";
    case BaseMethod::IFgsm: return "i-fgsm";
    case BaseMethod::MiFgsm: return "mi-fgsm";
    case BaseMethod::NiFgsm: return "ni-fgsm";
  }
  throw ContractError("base_method_name: unknown method");
}

std::string AttackId::str() const {
  std::string out;
  if (pc) out += "pc-";
  if (si) out += "si-";
  if (ti) out += "ti-";
  if (di) out += "di-";
  out += base_method_name(base);
  return out;
}

AttackId AttackId::parse(const std::string& text) {
  AttackId id;
  std::string rest = text;
  for (;;) {
    const auto dash = rest.find('-');
    if (dash == std::string::npos) break;
    const std::string head = rest.substr(0, dash);
    bool* flag = nullptr;
    if (head == "pc") flag = &id.pc;
    else if (head == "si") flag = &id.si;
    else if (head == "ti") flag = &id.ti;
    else if (head == "di") flag = &id.di;
    if (!flag) break;
    if (*flag) throw ContractError("attack id '" + text + "': repeated prefix '" + head + "'");
    *flag = true;
    rest = rest.substr(dash + 1);
  }
  if (rest == "fgsm") id.base = BaseMethod::Fgsm;
  else if (rest == "i-fgsm") id.base = BaseMethod::IFgsm;
  else if (rest == "mi-fgsm") id.base = BaseMethod::MiFgsm;
  else if (rest == "ni-fgsm") id.base = BaseMethod::NiFgsm;
  else throw ContractError("attack id '" + text + "': unknown base method '" + rest + "'");
  return id;
}

AttackResult run_attack(const AttackId& id, const Model& m, const Tensor& x, int y,
                        const AttackConfig& cfg) {
  AttackConfig eff = cfg;
  if (id.di || id.ti || id.si) {
    AugmentConfig aug;
    aug.rng_stream = cfg.augment ? cfg.augment->rng_stream : 0;
    const AugmentConfig* given = cfg.augment ? &*cfg.augment : nullptr;
    if (id.di) aug.dim = (given && given->dim) ? *given->dim : DimConfig{};
    if (id.ti) aug.tim = (given && given->tim) ? *given->tim : TimConfig{};
    if (id.si) aug.sim = (given && given->sim) ? *given->sim : SimConfig{};
    eff.augment = aug;
  } else {
    eff.augment.reset();
  }

  if (!id.pc) {
    switch (id.base) {
      case BaseMethod::Fgsm: return fgsm(m, x, y, eff);
      case BaseMethod::IFgsm: return i_fgsm(m, x, y, eff);
      case BaseMethod::MiFgsm: return mi_fgsm(m, x, y, eff);
      case BaseMethod::NiFgsm: return ni_fgsm(m, x, y, eff);
    }
    throw ContractError("run_attack: unknown base method");
  }
  if (id.base == BaseMethod::Fgsm) return pc_fgsm(m, x, y, eff);
  return pc_iterative(id.base, m, x, y, eff);
}

AttackResult ensemble_attack(const std::vector<const Model*>& members,
                             const std::vector<double>& weights, const AttackId& id,
                             const Tensor& x, int y, const AttackConfig& cfg) {
  EnsembleModel fused(members, weights);
  return run_attack(id, fused, x, y, cfg);
}

long long expected_grad_evals(const AttackId& id, const AttackConfig& cfg) {
  const long long iters = id.base == BaseMethod::Fgsm ? 1 : cfg.iterations;
  const long long per_iter = id.pc ? cfg.predictions + 1 : 1;
  return iters * per_iter;
}

}  // namespace advpc
