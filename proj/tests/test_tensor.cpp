#include <cmath>
#include <limits>

#include "advpc/errors.hpp"
#include "advpc/rng.hpp"
#include "advpc/tensor.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace advpc;

TEST_CASE("tensor construction validates shape and payload") {
  const Tensor z(Shape{2, 3});
  CHECK(z.size() == 6);
  for (std::size_t i = 0; i < z.size(); ++i) CHECK(z[i] == 0.0);

  CHECK_THROWS_AS(Tensor(Shape{2}, {1.0, 2.0, 3.0}), ContractError);
  CHECK_THROWS_AS(Tensor(Shape{1}, {std::numeric_limits<double>::quiet_NaN()}),
                  ContractError);
  CHECK_THROWS_AS(Tensor(Shape{-1}), ContractError);

  CHECK(Tensor::scalar(4.0).size() == 1);
  CHECK(Tensor::full(Shape{3}, 2.5)[2] == 2.5);
}

TEST_CASE("bit_equal distinguishes payload bits, not just values") {
  const Tensor a(Shape{2}, {0.0, 1.0});
  const Tensor b(Shape{2}, {-0.0, 1.0});
  CHECK(a.bit_equal(a));
  CHECK_FALSE(a.bit_equal(b));  // +0 and -0 compare equal but are different bits
  CHECK_FALSE(a.bit_equal(Tensor(Shape{1, 2}, {0.0, 1.0})));  // shape matters
}

TEST_CASE("sign maps to {-1,0,+1} with zero exactly at zero") {
  const Tensor t(Shape{3}, {-0.5, 0.0, 2.0});
  const Tensor s = sign(t);
  CHECK(s[0] == -1.0);
  CHECK(s[1] == 0.0);
  CHECK(s[2] == 1.0);

  CHECK(sign(Tensor(Shape{4})).bit_equal(Tensor(Shape{4})));

  // Negative zero still counts as zero, and the output zero is positive.
  const Tensor nz(Shape{1}, {-0.0});
  CHECK(sign(nz)[0] == 0.0);
  CHECK_FALSE(std::signbit(sign(nz)[0]));

  Rng rng(77);
  const Tensor r = advpc::testing::random_tensor(rng, Shape{50}, -2.0, 2.0);
  CHECK(sign(sign(r)).bit_equal(sign(r)));
}

TEST_CASE("clip_ball projects onto the ball intersected with the pixel box") {
  const Tensor orig(Shape{1}, {0.5});
  CHECK(clip_ball(orig, Tensor(Shape{1}, {0.9}), 0.1, 0.0, 1.0)[0] == doctest::Approx(0.6));

  // The range bound binds before the ball bound.
  const Tensor near_top(Shape{1}, {0.95});
  CHECK(clip_ball(near_top, Tensor(Shape{1}, {1.30}), 0.2, 0.0, 1.0)[0] == 1.0);

  // Inside both constraints: unchanged bit-for-bit.
  const Tensor inside(Shape{1}, {0.55});
  CHECK(clip_ball(orig, inside, 0.1, 0.0, 1.0).bit_equal(inside));

  CHECK_THROWS_AS(clip_ball(orig, Tensor(Shape{2}), 0.1, 0.0, 1.0), ContractError);
  CHECK_THROWS_AS(clip_ball(orig, Tensor(Shape{1}), -0.5, 0.0, 1.0), ContractError);
  CHECK_THROWS_AS(clip_ball(orig, Tensor(Shape{1}), 0.1, 1.0, 0.0), ContractError);
}

TEST_CASE("clip_ball is idempotent bit-for-bit") {
  Rng rng(123);
  const Tensor orig = advpc::testing::random_tensor(rng, Shape{64});
  const Tensor wild = advpc::testing::random_tensor(rng, Shape{64}, -1.0, 2.0);
  const Tensor once = clip_ball(orig, wild, 0.3, 0.0, 1.0);
  const Tensor twice = clip_ball(orig, once, 0.3, 0.0, 1.0);
  CHECK(once.bit_equal(twice));

  for (std::size_t i = 0; i < once.size(); ++i) {
    // The ball edge is fl(orig + 0.3), which can sit one ulp past 0.3.
    CHECK(std::abs(once[i] - orig[i]) <= 0.3 + 1e-15);
    CHECK(once[i] >= 0.0);
    CHECK(once[i] <= 1.0);
  }

  // Radius zero pins the output to the center exactly.
  CHECK(clip_ball(orig, wild, 0.0, 0.0, 1.0).bit_equal(orig));
}

TEST_CASE("l1_normalize divides by the total absolute mass") {
  const Tensor t(Shape{2}, {3.0, -1.0});
  const Tensor u = l1_normalize(t);
  CHECK(u[0] == doctest::Approx(0.75));
  CHECK(u[1] == doctest::Approx(-0.25));
  CHECK(l1_norm(u) == doctest::Approx(1.0));

  // Already unit mass: unchanged.
  CHECK(l1_normalize(u).bit_equal(u));

  CHECK_THROWS_AS(l1_normalize(Tensor(Shape{3})), DegenerateGradientError);
  CHECK_THROWS_AS(l1_normalize(Tensor::full(Shape{2}, 1e-14)), DegenerateGradientError);

  bool degenerate = false;
  const Tensor z = l1_normalize_or_zero(Tensor(Shape{3}), &degenerate);
  CHECK(degenerate);
  CHECK(z.bit_equal(Tensor(Shape{3})));

  degenerate = false;
  l1_normalize_or_zero(t, &degenerate);
  CHECK_FALSE(degenerate);
}

TEST_CASE("elementwise helpers keep shapes honest") {
  const Tensor a(Shape{2}, {1.0, 2.0});
  const Tensor b(Shape{2}, {0.5, -1.0});
  CHECK(add(a, b)[1] == 1.0);
  CHECK(sub(a, b)[0] == 0.5);
  CHECK(scale(a, 2.0)[1] == 4.0);
  CHECK(add_scaled(a, 3.0, b)[0] == 2.5);
  CHECK(max_abs(b) == 1.0);
  CHECK(max_abs_diff(a, b) == 3.0);
  CHECK_THROWS_AS(add(a, Tensor(Shape{3})), ContractError);

  // Adding a zero-scaled direction to non-negative data changes no bits:
  // attack steps with a zero coefficient must be exact no-ops.
  CHECK(add_scaled(a, 0.0, b).bit_equal(a));
  const Tensor with_zero(Shape{2}, {0.0, 0.25});
  CHECK(add_scaled(with_zero, 0.0, Tensor(Shape{2}, {-1.0, 1.0})).bit_equal(with_zero));
}

TEST_CASE("all_finite spots infinities") {
  Tensor t(Shape{2}, {1.0, 2.0});
  CHECK(all_finite(t));
  t[1] = std::numeric_limits<double>::infinity();
  CHECK_FALSE(all_finite(t));
}
