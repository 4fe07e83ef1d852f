#include <cmath>
#include <limits>
#include <optional>

#include "advpc/errors.hpp"
#include "advpc/ode.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace advpc;
using advpc::testing::unit_corpus;
using advpc::testing::unit_model;

namespace {

// u' = u, u(0) = 1: every hand value below follows from two lines of algebra.
OdeProblem growth(int steps) {
  OdeProblem p;
  p.f = [](double, const Tensor& u) { return u; };
  p.u0 = Tensor::scalar(1.0);
  p.t_end = 1.0;
  p.steps = steps;
  return p;
}

// u' = -2u, u(0) = 1, exact e^{-2t}: the decay problem used for order fits.
OdeProblem decay(int steps) {
  OdeProblem p;
  p.f = [](double, const Tensor& u) { return scale(u, -2.0); };
  p.u0 = Tensor::scalar(1.0);
  p.t_end = 1.0;
  p.steps = steps;
  return p;
}

Tensor decay_exact(double t) { return Tensor::scalar(std::exp(-2.0 * t)); }

const std::vector<int> kStepLadder{8, 16, 32, 64, 128};

}  // namespace

TEST_CASE("Euler reproduces hand-iterated values") {
  // h = 0.5: u1 = 1 + 0.5*1 = 1.5, u2 = 1.5 + 0.5*1.5 = 2.25.
  const SolverRun run = euler(growth(2));
  REQUIRE(run.values.size() == 3);
  REQUIRE(run.nodes.size() == 3);
  CHECK(run.nodes[0] == 0.0);
  CHECK(run.nodes[1] == 0.5);
  CHECK(run.nodes[2] == 1.0);
  CHECK(run.values[0][0] == 1.0);
  CHECK(run.values[1][0] == 1.5);
  CHECK(run.values[2][0] == 2.25);
}

TEST_CASE("improved Euler reproduces a hand-iterated first step") {
  // h = 0.5: predictor 1.5, corrector 1 + 0.25*(1 + 1.5) = 1.625.
  const SolverRun run = improved_euler(growth(2));
  REQUIRE(run.values.size() == 3);
  CHECK(run.values[1][0] == 1.625);
}

TEST_CASE("trapezoid solves its implicit step to tolerance") {
  // h = 0.5 on u' = u: exact step fixed point is u1 = 1.25/0.75 = 5/3.
  const SolverRun run = trapezoid(growth(2), 1e-14, 200);
  REQUIRE(run.values.size() == 3);
  CHECK(run.values[1][0] == doctest::Approx(5.0 / 3.0).epsilon(1e-10));

  // An impossible iteration budget must surface as a solver failure.
  CHECK_THROWS_AS(trapezoid(growth(2), 1e-300, 2), ImplicitSolveError);
}

TEST_CASE("schemes converge at their textbook orders") {
  const auto euler_order =
      convergence_order(OdeScheme::Euler, decay(1), decay_exact, kStepLadder);
  const auto trap_order =
      convergence_order(OdeScheme::Trapezoid, decay(1), decay_exact, kStepLadder);
  const auto heun_order =
      convergence_order(OdeScheme::ImprovedEuler, decay(1), decay_exact, kStepLadder);
  REQUIRE(euler_order.has_value());
  REQUIRE(trap_order.has_value());
  REQUIRE(heun_order.has_value());
  CHECK(*euler_order == doctest::Approx(1.0).epsilon(0.1));
  CHECK(*trap_order == doctest::Approx(2.0).epsilon(0.1));
  CHECK(*heun_order == doctest::Approx(2.0).epsilon(0.1));
}

TEST_CASE("the corrector beats plain Euler at every step size") {
  for (int steps : kStepLadder) {
    const SolverRun e = euler(decay(steps));
    const SolverRun h = improved_euler(decay(steps));
    const double exact = decay_exact(1.0)[0];
    CHECK(std::abs(h.values.back()[0] - exact) < std::abs(e.values.back()[0] - exact));
  }
}

TEST_CASE("an exact scheme yields no order estimate") {
  // u' = 0 is integrated exactly by every scheme, so all errors vanish.
  OdeProblem flat;
  flat.f = [](double, const Tensor&) { return Tensor::scalar(0.0); };
  flat.u0 = Tensor::scalar(4.0);
  flat.steps = 1;
  const auto order = convergence_order(OdeScheme::Euler, flat,
                                       [](double) { return Tensor::scalar(4.0); },
                                       kStepLadder);
  CHECK_FALSE(order.has_value());
}

TEST_CASE("order fits need at least two step counts") {
  CHECK_THROWS_AS(convergence_order(OdeScheme::Euler, decay(1), decay_exact, {8}),
                  ContractError);
}

TEST_CASE("non-finite right-hand sides are rejected during integration") {
  OdeProblem p;
  p.f = [](double, const Tensor&) {
    Tensor t = Tensor::scalar(0.0);
    t[0] = std::numeric_limits<double>::infinity();
    return t;
  };
  p.u0 = Tensor::scalar(1.0);
  p.steps = 2;
  CHECK_THROWS_AS(euler(p), IntegrationError);
  CHECK_THROWS_AS(improved_euler(p), IntegrationError);
}

TEST_CASE("solver input contracts") {
  OdeProblem p = growth(0);  // zero steps
  CHECK_THROWS_AS(euler(p), ContractError);
  p = growth(2);
  p.t_end = p.t0 - 1.0;  // reversed interval
  CHECK_THROWS_AS(euler(p), ContractError);
  p = growth(2);
  p.f = nullptr;
  CHECK_THROWS_AS(euler(p), ContractError);

  // An empty interval is legal (h = 0) and simply repeats u0.
  p = growth(2);
  p.t_end = p.t0;
  const SolverRun run = euler(p);
  CHECK(run.values.back().bit_equal(p.u0));
}

TEST_CASE("a single sign step is one Euler step in disguise") {
  for (int i = 0; i < 10; ++i) {
    const Tensor& x = unit_corpus().examples[static_cast<std::size_t>(i)].image;
    const int label = unit_corpus().examples[static_cast<std::size_t>(i)].label;
    const CorrespondencePair pair =
        fgsm_correspondence_demo(unit_model(), x, label, 0.05 + 0.01 * i);
    CHECK(pair.euler_step.bit_equal(pair.unsigned_step));
  }
}
