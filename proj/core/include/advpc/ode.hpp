#ifndef ADVPC_ODE_HPP
#define ADVPC_ODE_HPP

#include <functional>
#include <optional>
#include <vector>

#include "advpc/model.hpp"
#include "advpc/tensor.hpp"

namespace advpc {

// Initial value problem u' = f(t, u) on [t0, t_end] with a fixed step count.
struct OdeProblem {
  std::function<Tensor(double, const Tensor&)> f;
  double t0 = 0.0;
  Tensor u0;
  double t_end = 1.0;
  int steps = 1;
};

enum class OdeScheme { Euler, Trapezoid, ImprovedEuler };

const char* scheme_name(OdeScheme s);

struct SolverRun {
  OdeScheme scheme = OdeScheme::Euler;
  std::vector<double> nodes;   // t0 + n*h
  std::vector<Tensor> values;  // u at each node, u0 first
};

// Forward Euler: u_{n+1} = u_n + h f(t_n, u_n).
SolverRun euler(const OdeProblem& p);

// Implicit trapezoid, solved per step by fixed-point iteration seeded with
// an Euler predictor; throws ImplicitSolveError when max_iter is exhausted.
SolverRun trapezoid(const OdeProblem& p, double tol = 1e-12, int max_iter = 100);

// Heun's predictor-corrector: Euler predictor, trapezoid-style corrector.
SolverRun improved_euler(const OdeProblem& p);

// Least-squares slope of log(endpoint error) versus log(h) over the given
// step counts (>= 2 required, >= 4 recommended). Errors are measured in the
// max norm against `exact`. Returns nullopt when any error is exactly zero
// (the scheme is exact on this problem and the slope is meaningless).
std::optional<double> convergence_order(OdeScheme scheme, const OdeProblem& base,
                                        const std::function<Tensor(double)>& exact,
                                        const std::vector<int>& step_counts,
                                        double tol = 1e-12, int max_iter = 100);

// One Euler step of size epsilon along the loss gradient next to the same
// update written as an unsigned single-step attack; the two expressions are
// evaluated through the same arithmetic and must agree bit-for-bit.
struct CorrespondencePair {
  Tensor euler_step;
  Tensor unsigned_step;
};
CorrespondencePair fgsm_correspondence_demo(const Model& m, const Tensor& x, int label,
                                            double epsilon);

}  // namespace advpc

#endif  // ADVPC_ODE_HPP
