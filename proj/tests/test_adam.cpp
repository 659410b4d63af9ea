#include <doctest.h>

#include <cmath>

#include "fgad/adam.hpp"
#include "fgad/error.hpp"

using namespace fgad;

TEST_CASE("first Adam step moves each weight by lr against its gradient sign") {
  Matrix w{{1.0, -2.0, 0.5}};
  const Matrix g{{0.3, -4.0, 1e-3}};
  std::vector<Matrix*> params{&w};
  std::vector<const Matrix*> grads{&g};
  AdamState st = AdamState::for_shapes(std::vector<const Matrix*>{&w});
  AdamSettings s;
  adam_step(params, grads, st, s);
  CHECK(st.step == 1);
  // m_hat = g, v_hat = g^2, update = lr * g / (|g| + eps)
  CHECK(w(0, 0) == doctest::Approx(1.0 - 0.001 * 0.3 / (0.3 + 1e-8)).epsilon(1e-14));
  CHECK(w(0, 1) == doctest::Approx(-2.0 + 0.001 * 4.0 / (4.0 + 1e-8)).epsilon(1e-14));
  CHECK(w(0, 2) == doctest::Approx(0.5 - 0.001 * 1e-3 / (1e-3 + 1e-8)).epsilon(1e-14));
}

TEST_CASE("Adam matches a scalar re-derivation over several steps") {
  double x = 0.7, m = 0, v = 0;
  Matrix w{{0.7}};
  AdamState st = AdamState::for_shapes(std::vector<const Matrix*>{&w});
  const AdamSettings s{0.01, 0.9, 0.999, 1e-8};
  for (int t = 1; t <= 25; ++t) {
    const double g = 2.0 * x - 1.0;  // d/dx (x^2 - x)
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g * g;
    const double mh = m / (1.0 - std::pow(0.9, t)), vh = v / (1.0 - std::pow(0.999, t));
    x -= 0.01 * mh / (std::sqrt(vh) + 1e-8);
    const Matrix gm{{2.0 * w(0, 0) - 1.0}};
    std::vector<Matrix*> p{&w};
    std::vector<const Matrix*> gp{&gm};
    adam_step(p, gp, st, s);
    CHECK(w(0, 0) == doctest::Approx(x).epsilon(1e-12));
  }
}

TEST_CASE("Adam rejects mismatched shapes") {
  Matrix w(2, 2);
  const Matrix g(2, 3);
  std::vector<Matrix*> p{&w};
  std::vector<const Matrix*> gp{&g};
  AdamState st = AdamState::for_shapes(std::vector<const Matrix*>{&w});
  CHECK_THROWS_AS(adam_step(p, gp, st, AdamSettings{}), DimensionError);
  std::vector<const Matrix*> none;
  CHECK_THROWS_AS(adam_step(p, none, st, AdamSettings{}), DimensionError);
}
