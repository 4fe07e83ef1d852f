#include "advpc/ode.hpp"

#include <cmath>
#include <string>

#include "advpc/errors.hpp"

namespace advpc {

namespace {

void validate(const OdeProblem& p) {
  if (!p.f) throw ContractError("ode: missing derivative function");
  if (p.u0.empty()) throw ContractError("ode: empty initial value");
  if (p.steps < 1) throw ContractError("ode: steps must be >= 1");
  if (!(p.t_end > p.t0) && !(p.t_end == p.t0))
    throw ContractError("ode: t_end must not precede t0");
}

Tensor eval_f(const OdeProblem& p, double t, const Tensor& u) {
  Tensor out = p.f(t, u);
  if (!out.same_shape(u))
    throw IntegrationError("ode: derivative shape mismatch at t=" + std::to_string(t));
  if (!all_finite(out))
    throw IntegrationError("ode: non-finite derivative at t=" + std::to_string(t));
  return out;
}

SolverRun init_run(OdeScheme scheme, const OdeProblem& p) {
  SolverRun run;
  run.scheme = scheme;
  run.nodes.reserve(static_cast<std::size_t>(p.steps) + 1);
  run.values.reserve(static_cast<std::size_t>(p.steps) + 1);
  run.nodes.push_back(p.t0);
  run.values.push_back(p.u0);
  return run;
}

}  // namespace

const char* scheme_name(OdeScheme s) {
  switch (s) {
    case OdeScheme::Euler: return "euler";
    case OdeScheme::Trapezoid: return "trapezoid";
    case OdeScheme::ImprovedEuler: return "improved-euler";
  }
  throw ContractError("unknown scheme enum value");
}

SolverRun euler(const OdeProblem& p) {
  validate(p);
  SolverRun run = init_run(OdeScheme::Euler, p);
  const double h = (p.t_end - p.t0) / p.steps;
  Tensor u = p.u0;
  for (int n = 0; n < p.steps; ++n) {
    const double t = p.t0 + n * h;
    u = add_scaled(u, h, eval_f(p, t, u));
    run.nodes.push_back(p.t0 + (n + 1) * h);
    run.values.push_back(u);
  }
  return run;
}

SolverRun trapezoid(const OdeProblem& p, double tol, int max_iter) {
  validate(p);
  if (!(tol > 0.0)) throw ContractError("trapezoid: tol must be positive");
  if (max_iter < 1) throw ContractError("trapezoid: max_iter must be >= 1");
  SolverRun run = init_run(OdeScheme::Trapezoid, p);
  const double h = (p.t_end - p.t0) / p.steps;
  Tensor u = p.u0;
  for (int n = 0; n < p.steps; ++n) {
    const double t = p.t0 + n * h;
    const double t_next = p.t0 + (n + 1) * h;
    const Tensor fn = eval_f(p, t, u);
    // Euler predictor seeds the fixed-point iteration for
    // u_next = u + h/2 (f(t,u) + f(t_next, u_next)).
    Tensor guess = add_scaled(u, h, fn);
    bool converged = false;
    for (int it = 0; it < max_iter; ++it) {
      const Tensor rhs = add(fn, eval_f(p, t_next, guess));
      Tensor next = add_scaled(u, 0.5 * h, rhs);
      const double moved = max_abs_diff(next, guess);
      guess = std::move(next);
      if (moved < tol) {
        converged = true;
        break;
      }
    }
    if (!converged)
      throw ImplicitSolveError("trapezoid: fixed point did not converge at t=" +
                               std::to_string(t_next));
    u = std::move(guess);
    run.nodes.push_back(t_next);
    run.values.push_back(u);
  }
  return run;
}

SolverRun improved_euler(const OdeProblem& p) {
  validate(p);
  SolverRun run = init_run(OdeScheme::ImprovedEuler, p);
  const double h = (p.t_end - p.t0) / p.steps;
  Tensor u = p.u0;
  for (int n = 0; n < p.steps; ++n) {
    const double t = p.t0 + n * h;
    const double t_next = p.t0 + (n + 1) * h;
    const Tensor fn = eval_f(p, t, u);
    const Tensor predictor = add_scaled(u, h, fn);
    const Tensor f_pred = eval_f(p, t_next, predictor);
    u = add_scaled(u, 0.5 * h, add(fn, f_pred));
    run.nodes.push_back(t_next);
    run.values.push_back(u);
  }
  return run;
}

std::optional<double> convergence_order(OdeScheme scheme, const OdeProblem& base,
                                        const std::function<Tensor(double)>& exact,
                                        const std::vector<int>& step_counts,
                                        double tol, int max_iter) {
  if (!exact) throw ContractError("convergence_order: missing exact solution");
  if (step_counts.size() < 2)
    throw ContractError("convergence_order: need at least two step counts");
  const Tensor reference = exact(base.t_end);

  std::vector<double> log_h, log_err;
  for (int steps : step_counts) {
    OdeProblem p = base;
    p.steps = steps;
    SolverRun run;
    switch (scheme) {
      case OdeScheme::Euler: run = euler(p); break;
      case OdeScheme::Trapezoid: run = trapezoid(p, tol, max_iter); break;
      case OdeScheme::ImprovedEuler: run = improved_euler(p); break;
    }
    const double err = max_abs_diff(run.values.back(), reference);
    if (err == 0.0) return std::nullopt;  // exact scheme: slope undefined
    log_h.push_back(std::log((base.t_end - base.t0) / steps));
    log_err.push_back(std::log(err));
  }

  const std::size_t n = log_h.size();
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += log_h[i];
    my += log_err[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (log_h[i] - mx) * (log_h[i] - mx);
    sxy += (log_h[i] - mx) * (log_err[i] - my);
  }
  if (sxx == 0.0) throw ContractError("convergence_order: step counts must differ");
  return sxy / sxx;
}

CorrespondencePair fgsm_correspondence_demo(const Model& m, const Tensor& x, int label,
                                            double epsilon) {
  if (!(epsilon >= 0.0)) throw ContractError("correspondence demo: epsilon must be >= 0");
  auto grad_at = [&m, label](const Tensor& u) {
    ForwardPass pass = forward_loss(m, u, label);
    return input_gradient(pass);
  };

  OdeProblem p;
  p.f = [&grad_at](double, const Tensor& u) { return grad_at(u); };
  p.t0 = 0.0;
  p.u0 = x;
  p.t_end = epsilon;
  p.steps = 1;

  CorrespondencePair pair;
  pair.euler_step = euler(p).values.back();
  pair.unsigned_step = add_scaled(x, epsilon, grad_at(x));
  return pair;
}

}  // namespace advpc
