// Copyright 2026 The fusesep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <vector>

#include "doctest.h"
#include "fusesep/bounds.hpp"
#include "fusesep/common.hpp"
#include "fusesep/ref.hpp"
#include "fusesep/rng.hpp"

using namespace fusesep;

namespace {

DiscreteJoint random_joint(const std::vector<int>& card, uint64_t seed) {
  DiscreteJoint j;
  j.card = card;
  size_t n = 1;
  for (int c : card) n *= size_t(c);
  j.p.resize(n);
  Rng r(seed);
  double s = 0;
  for (double& v : j.p) {
    v = r.uniform() + 1e-3;
    s += v;
  }
  for (double& v : j.p) v /= s;
  // renormalize the tail so the sum is exact to the last ulp
  double acc = 0;
  for (size_t i = 0; i + 1 < n; ++i) acc += j.p[i];
  j.p[n - 1] = 1.0 - acc;
  return j;
}

std::vector<std::vector<double>> random_kernel(int rows, int cols, uint64_t seed) {
  Rng r(seed);
  std::vector<std::vector<double>> k(static_cast<size_t>(rows), std::vector<double>(static_cast<size_t>(cols)));
  for (auto& row : k) {
    double s = 0;
    for (double& v : row) {
      v = r.uniform() + 1e-3;
      s += v;
    }
    double acc = 0;
    for (size_t i = 0; i + 1 < row.size(); ++i) {
      row[i] /= s;
      acc += row[i];
    }
    row.back() = 1.0 - acc;
  }
  return k;
}

}  // namespace

TEST_CASE("discrete_mi: independent variables carry zero information") {
  std::vector<double> px = {0.3, 0.7}, py = {0.2, 0.5, 0.3};
  DiscreteJoint j;
  j.card = {2, 3};
  for (double a : px)
    for (double b : py) j.p.push_back(a * b);
  CHECK(std::fabs(discrete_mi(j)) <= 1e-12);
}

TEST_CASE("discrete_mi: identity channel gives the full entropy") {
  DiscreteJoint j;
  j.card = {4, 4};
  j.p.assign(16, 0.0);
  for (int i = 0; i < 4; ++i) j.p[size_t(i) * 4 + i] = 0.25;
  CHECK(discrete_mi(j) == doctest::Approx(std::log(4.0)).epsilon(1e-12));
}

TEST_CASE("discrete_mi: hand-computed binary symmetric joint") {
  // p = [[0.4, 0.1], [0.1, 0.4]]; marginals uniform
  // MI = 0.8*ln(1.6) + 0.2*ln(0.4)
  DiscreteJoint j;
  j.card = {2, 2};
  j.p = {0.4, 0.1, 0.1, 0.4};
  double want = 0.8 * std::log(1.6) + 0.2 * std::log(0.4);
  CHECK(discrete_mi(j) == doctest::Approx(want).epsilon(1e-12));
  CHECK(want == doctest::Approx(0.19274475702175749).epsilon(1e-14));
}

TEST_CASE("validate_joint rejects malformed tables") {
  DiscreteJoint j;
  j.card = {2, 2};
  j.p = {0.5, 0.5, 0.1, -0.1};
  CHECK_THROWS_AS(validate_joint(j), InvalidInput);
  j.p = {0.5, 0.5, 0.5, 0.5};
  CHECK_THROWS_AS(validate_joint(j), InvalidInput);
  j.p = {1.0};
  CHECK_THROWS_AS(validate_joint(j), InvalidInput);
  j.card = {2};
  j.p = {0.5, 0.5};
  CHECK_THROWS_AS(validate_joint(j), InvalidInput);
}

TEST_CASE("chain rule: both expansion routes agree to 1e-12") {
  for (uint64_t seed = 0; seed < 25; ++seed) {
    auto j = random_joint({3, 4, 2}, 1000 + seed);
    auto [lhs, rhs] = chain_rule_check(j);
    INFO("seed=" << seed);
    CHECK(lhs >= -1e-12);
    CHECK(std::fabs(lhs - rhs) <= 1e-12);
  }
}

TEST_CASE("data processing inequality holds through random kernels") {
  for (uint64_t seed = 0; seed < 25; ++seed) {
    auto vm = random_joint({4, 5}, 2000 + seed);
    auto kernel = random_kernel(5, 3, 3000 + seed);
    auto [i_vm, i_vd] = dpi_check(vm, kernel);
    INFO("seed=" << seed);
    CHECK(i_vd <= i_vm + 1e-12);
    CHECK(i_vd >= -1e-12);
  }
}

TEST_CASE("data processing: identity kernel preserves information") {
  auto vm = random_joint({3, 4}, 77);
  std::vector<std::vector<double>> eye(4, std::vector<double>(4, 0.0));
  for (int i = 0; i < 4; ++i) eye[size_t(i)][size_t(i)] = 1.0;
  auto [i_vm, i_vd] = dpi_check(vm, eye);
  CHECK(i_vd == doctest::Approx(i_vm).epsilon(1e-12));
}

TEST_CASE("markov chain bounds: every stated inequality holds") {
  for (uint64_t seed = 0; seed < 25; ++seed) {
    auto vm = random_joint({3, 4}, 4000 + seed);
    auto kmd = random_kernel(4, 3, 5000 + seed);
    auto kdg = random_kernel(3, 3, 6000 + seed);
    auto cb = chain_bound_check(vm, kmd, kdg);
    INFO("seed=" << seed);
    CHECK(cb.i_v_d <= cb.i_v_m + 1e-12);
    CHECK(cb.i_v_g <= cb.i_v_d + 1e-12);  // two kernel hops
    CHECK(cb.i_v_dg <= cb.i_v_m + cb.i_v_g_given_d + 1e-12);
    CHECK(cb.i_v_g <= 2.0 * cb.i_v_m + 1e-12);
    CHECK(cb.i_v_g_given_d >= -1e-12);
    // joint observation is at least as informative as either part
    CHECK(cb.i_v_dg >= cb.i_v_d - 1e-12);
    CHECK(cb.i_v_dg >= cb.i_v_g - 1e-12);
  }
}

TEST_CASE("mi_laplace_awgn reproduces the reference values") {
  // the three variance operating points land at 4.53, 3.38 and 2.24 nats
  CHECK(mi_laplace_awgn(1e-4) == doctest::Approx(4.53).epsilon(0.005));
  CHECK(mi_laplace_awgn(1e-3) == doctest::Approx(3.38).epsilon(0.005));
  CHECK(mi_laplace_awgn(1e-2) == doctest::Approx(2.24).epsilon(0.005));
  // frozen regression anchors for the default quadrature
  CHECK(mi_laplace_awgn(1e-4) == doctest::Approx(4.5328930234919831).epsilon(1e-9));
  CHECK(mi_laplace_awgn(1e-2) == doctest::Approx(2.2392189912622418).epsilon(1e-6));
}

TEST_CASE("mi_laplace_awgn: monotone decreasing in the noise variance") {
  double prev = mi_laplace_awgn(1e-4);
  for (double s2 : {3e-4, 1e-3, 3e-3, 1e-2, 0.1, 1.0, 10.0}) {
    double mi = mi_laplace_awgn(s2);
    CHECK(mi < prev);
    CHECK(mi > 0.0);
    prev = mi;
  }
}

TEST_CASE("mi_laplace_awgn: input and grid validation") {
  CHECK_THROWS_AS(mi_laplace_awgn(0.0), InvalidInput);
  CHECK_THROWS_AS(mi_laplace_awgn(-1.0), InvalidInput);
  QuadratureSpec q;
  q.points_override = 101;  // coarser than the 401-point floor
  CHECK_THROWS_AS(mi_laplace_awgn(1e-3, q), InvalidConfig);
}

TEST_CASE("mi_laplace_awgn: serial reference is bit-identical") {
  for (double s2 : {1e-4, 1e-2, 1.0}) {
    double a = mi_laplace_awgn(s2);
    double b = ref::mi_laplace_awgn(s2);
    CHECK(a == b);
  }
}

TEST_CASE("rho: default calibration pins the low-noise regime to 1") {
  double mi_ref = default_mi_ref();
  CHECK(mi_ref == mi_laplace_awgn(1e-2));
  CHECK(rho(1e-4, mi_ref).rho == 1.0);  // exact: the clamp is active
  CHECK(rho(1e-3, mi_ref).rho == 1.0);
  CHECK(rho(1e-2, mi_ref).rho == 1.0);
  CHECK(rho(1e-1, mi_ref).rho < 1.0);
  CHECK(rho(1e-1, mi_ref).rho > 0.0);
}

TEST_CASE("rho_curve: monotone non-increasing over an increasing grid") {
  std::vector<double> grid;
  for (int i = 0; i < 25; ++i) grid.push_back(std::pow(10.0, -4.0 + 5.0 * i / 24.0));
  auto curve = rho_curve(grid, default_mi_ref());
  REQUIRE(curve.size() == grid.size());
  for (size_t i = 1; i < curve.size(); ++i) {
    CHECK(curve[i].rho <= curve[i - 1].rho + 1e-12);
    CHECK(curve[i].sigma2 == grid[i]);
  }
  CHECK(curve.front().rho == 1.0);
  CHECK(curve.back().rho < 0.5);
}

TEST_CASE("rho_curve: decreasing grids are evaluated pointwise, unchecked") {
  // the monotonicity tripwire applies only along increasing grid segments
  std::vector<double> grid = {1e-1, 1e-4};
  auto curve = rho_curve(grid, default_mi_ref());
  REQUIRE(curve.size() == 2);
  CHECK(curve[0].rho == rho(1e-1, default_mi_ref()).rho);
  CHECK(curve[1].rho == rho(1e-4, default_mi_ref()).rho);
  CHECK(curve[1].rho > curve[0].rho);

  CHECK_THROWS_AS(rho_curve({}, 1.0), InvalidInput);
  CHECK_THROWS_AS(rho(1e-3, 0.0), InvalidInput);
}

TEST_CASE("classical bound: closed form and preconditions") {
  BoundInputs b;  // L = w = var = mi_ref = 1
  CHECK(classical_sdr_bound(b) == doctest::Approx(0.0));
  b.L = 100.0;
  CHECK(classical_sdr_bound(b) == doctest::Approx(20.0).epsilon(1e-12));
  b.var_v = 2.0;
  b.mi_ref = 5.0;
  CHECK(classical_sdr_bound(b) ==
        doctest::Approx(10.0 * std::log10(100.0 * 2.0 * 5.0)).epsilon(1e-12));

  BoundInputs bad;
  bad.L = 0.5;  // L < w
  CHECK_THROWS_AS(classical_sdr_bound(bad), InvalidInput);
  bad = BoundInputs{};
  bad.w = 0.0;
  CHECK_THROWS_AS(classical_sdr_bound(bad), InvalidInput);
  bad = BoundInputs{};
  bad.var_v = -1.0;
  CHECK_THROWS_AS(classical_sdr_bound(bad), InvalidInput);
  bad = BoundInputs{};
  bad.mi_ref = 0.0;
  CHECK_THROWS_AS(classical_sdr_bound(bad), InvalidInput);
}

TEST_CASE("generative bound is classical plus exactly 3 dB") {
  Rng r(31);
  for (int i = 0; i < 100; ++i) {
    BoundInputs b;
    b.w = r.uniform(1.0, 100.0);
    b.L = b.w * r.uniform(1.0, 1000.0);
    b.var_v = r.uniform(0.01, 10.0);
    b.mi_ref = r.uniform(0.01, 10.0);
    // the same floating-point addition, not an algebraic restatement
    CHECK(generative_sdr_bound(b) == classical_sdr_bound(b) + 3.0);
  }
}
