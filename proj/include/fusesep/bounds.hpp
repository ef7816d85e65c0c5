// Copyright 2026 The fusesep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <utility>
#include <vector>

#include "fusesep/common.hpp"

namespace fusesep {

// Probability table over 2 or 3 finite alphabets, row-major in variable
// order; entries >= 0 summing to 1 within 1e-12.
struct DiscreteJoint {
  std::vector<int> card;
  std::vector<double> p;
};

void validate_joint(const DiscreteJoint& j);

// I(X;Y) in nats for a 2-variable joint; 0*log(0) := 0.
double discrete_mi(const DiscreteJoint& j);

// For a 3-variable joint over (X, Y, Z) returns
//   lhs = I(X; Y,Z)          (computed by grouping (Y,Z) into one block)
//   rhs = I(X;Z) + I(X;Y|Z)  (computed by conditional expansion)
// The two routes share no intermediate sums; callers assert |lhs-rhs|<=1e-12.
std::pair<double, double> chain_rule_check(const DiscreteJoint& j);

// Push (V, M) through a stochastic kernel M->D and return
// (I(V;M), I(V;D)); the data-processing inequality says second <= first.
std::pair<double, double> dpi_check(const DiscreteJoint& vm,
                                    const std::vector<std::vector<double>>& kernel_md);

// Markov chain V - M - D - G built from two kernels; all listed quantities
// are computed so callers can assert
//   I(V;D) <= I(V;M),  I(V;D,G) <= I(V;M) + I(V;G|D),  I(V;G) <= 2 I(V;M).
struct ChainBoundData {
  double i_v_m = 0, i_v_d = 0, i_v_g = 0, i_v_dg = 0, i_v_g_given_d = 0;
};

ChainBoundData chain_bound_check(const DiscreteJoint& vm,
                                 const std::vector<std::vector<double>>& kernel_md,
                                 const std::vector<std::vector<double>>& kernel_dg);

// Grid for the Laplace+AWGN double integral.  The x step is sigma-scaled
// (step_sigma_frac * sigma) and clamped to [min_points, max_points] per axis;
// points_override forces an explicit odd point count on the x axis instead.
struct QuadratureSpec {
  double x_max = 10.0;       // unit-variance Laplace tail beyond is < 1e-6
  double band_sigmas = 8.0;  // Gaussian factor treated as 0 beyond this
  double step_sigma_frac = 0.25;
  int min_points = 401;
  int max_points = 20001;
  int points_override = 0;
};

// I(x; v_g) in nats for x ~ unit-variance Laplace and v_g = x + N(0, sigma2),
// via h(v_g) - h(noise) with composite Simpson quadrature.  The paper's
// density exp(-|x/sqrt(2)|)/sqrt(2) does not normalize; the unit-variance
// Laplace (scale 1/sqrt(2)) is used instead.
double mi_laplace_awgn(double sigma2, const QuadratureSpec& q = QuadratureSpec());

// Default calibration for rho: mi_ref = MI at sigma2 = 1e-2, which makes
// rho = 1 on the whole regime sigma2 <= 1e-2 (in particular rho(1e-4) = 1).
// Anchoring at MI(1e-4) instead would put rho(1e-2) near 0.5, contradicting
// the rho(sigma2 <= 1e-2) ~ 1 behaviour the curve must reproduce.
double default_mi_ref(const QuadratureSpec& q = QuadratureSpec());

struct RhoPoint {
  double sigma2 = 0.0;
  double rho = 0.0;
};

// min(1, MI(sigma2)/mi_ref): the generative estimate can at best recover the
// source-mixture information.
RhoPoint rho(double sigma2, double mi_ref, const QuadratureSpec& q = QuadratureSpec());

// Element-wise rho over a grid; the result is checked monotone non-increasing
// when the grid is increasing.
std::vector<RhoPoint> rho_curve(const std::vector<double>& sigma2_grid, double mi_ref,
                                const QuadratureSpec& q = QuadratureSpec());

// Eq-style bound inputs: signal length L and segment width w in samples
// (only the ratio enters), source variance, and per-segment mutual
// information (dimensionless, nats).
struct BoundInputs {
  double L = 1.0;
  double w = 1.0;
  double var_v = 1.0;
  double mi_ref = 1.0;
};

// 10*log10((L/w) * var_v * mi_ref).
double classical_sdr_bound(const BoundInputs& b);

// classical + 3.0 dB exactly (the stated generative headroom constant).
double generative_sdr_bound(const BoundInputs& b);

}  // namespace fusesep
