// Copyright 2026 The fusesep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "fusesep/bounds.hpp"

#include <algorithm>
#include <cmath>

namespace fusesep {

namespace {

double xlogx(double p) { return p > 0.0 ? p * std::log(p) : 0.0; }

void check_kernel(const std::vector<std::vector<double>>& k, size_t rows) {
  if (k.size() != rows) throw InvalidInput("kernel row count mismatch");
  size_t cols = k.empty() ? 0 : k[0].size();
  if (cols == 0) throw InvalidInput("kernel has no columns");
  for (const auto& row : k) {
    if (row.size() != cols) throw InvalidInput("kernel is ragged");
    double s = 0.0;
    for (double v : row) {
      if (!(v >= 0.0)) throw InvalidInput("kernel entries must be >= 0");
      s += v;
    }
    if (std::fabs(s - 1.0) > 1e-12) throw InvalidInput("kernel rows must sum to 1");
  }
}

// I(X;Y) from a flat cx-by-cy table (need not be validated again).
double mi_table(const std::vector<double>& p, int cx, int cy) {
  std::vector<double> px(size_t(cx), 0.0), py(size_t(cy), 0.0);
  for (int x = 0; x < cx; ++x)
    for (int y = 0; y < cy; ++y) {
      px[x] += p[size_t(x) * cy + y];
      py[y] += p[size_t(x) * cy + y];
    }
  double mi = 0.0;
  for (int x = 0; x < cx; ++x)
    for (int y = 0; y < cy; ++y) {
      double v = p[size_t(x) * cy + y];
      if (v > 0.0) mi += v * std::log(v / (px[x] * py[y]));
    }
  return std::max(mi, 0.0);
}

}  // namespace

void validate_joint(const DiscreteJoint& j) {
  if (j.card.size() != 2 && j.card.size() != 3)
    throw InvalidInput("joint must have 2 or 3 variables");
  size_t n = 1;
  for (int c : j.card) {
    if (c < 1) throw InvalidInput("alphabet size must be >= 1");
    n *= size_t(c);
  }
  if (j.p.size() != n) throw InvalidInput("probability table size mismatch");
  double s = 0.0;
  for (double v : j.p) {
    if (!(v >= 0.0)) throw InvalidInput("probabilities must be >= 0");
    s += v;
  }
  if (std::fabs(s - 1.0) > 1e-12) throw InvalidInput("probability table must sum to 1");
}

double discrete_mi(const DiscreteJoint& j) {
  validate_joint(j);
  if (j.card.size() != 2) throw InvalidInput("discrete_mi expects a 2-variable joint");
  return mi_table(j.p, j.card[0], j.card[1]);
}

std::pair<double, double> chain_rule_check(const DiscreteJoint& j) {
  validate_joint(j);
  if (j.card.size() != 3) throw InvalidInput("chain_rule_check expects a 3-variable joint");
  const int cx = j.card[0], cy = j.card[1], cz = j.card[2];

  // lhs: group (Y,Z) into one block variable; memory layout already matches.
  double lhs = mi_table(j.p, cx, cy * cz);

  // rhs: I(X;Z) + sum_z p(z) I(X;Y|Z=z), all from scratch marginals.
  std::vector<double> pxz(size_t(cx) * cz, 0.0), pz(size_t(cz), 0.0);
  for (int x = 0; x < cx; ++x)
    for (int y = 0; y < cy; ++y)
      for (int z = 0; z < cz; ++z) {
        double v = j.p[(size_t(x) * cy + y) * cz + z];
        pxz[size_t(x) * cz + z] += v;
        pz[z] += v;
      }
  double rhs = mi_table(pxz, cx, cz);
  for (int z = 0; z < cz; ++z) {
    if (pz[z] <= 0.0) continue;
    std::vector<double> cond(size_t(cx) * cy, 0.0);
    for (int x = 0; x < cx; ++x)
      for (int y = 0; y < cy; ++y)
        cond[size_t(x) * cy + y] = j.p[(size_t(x) * cy + y) * cz + z] / pz[z];
    rhs += pz[z] * mi_table(cond, cx, cy);
  }
  return {lhs, rhs};
}

std::pair<double, double> dpi_check(const DiscreteJoint& vm,
                                    const std::vector<std::vector<double>>& kernel_md) {
  validate_joint(vm);
  if (vm.card.size() != 2) throw InvalidInput("dpi_check expects a 2-variable joint");
  const int cv = vm.card[0], cm = vm.card[1];
  check_kernel(kernel_md, size_t(cm));
  const int cd = int(kernel_md[0].size());
  std::vector<double> pvd(size_t(cv) * cd, 0.0);
  for (int v = 0; v < cv; ++v)
    for (int m = 0; m < cm; ++m)
      for (int d = 0; d < cd; ++d)
        pvd[size_t(v) * cd + d] += vm.p[size_t(v) * cm + m] * kernel_md[m][d];
  return {mi_table(vm.p, cv, cm), mi_table(pvd, cv, cd)};
}

ChainBoundData chain_bound_check(const DiscreteJoint& vm,
                                 const std::vector<std::vector<double>>& kernel_md,
                                 const std::vector<std::vector<double>>& kernel_dg) {
  validate_joint(vm);
  if (vm.card.size() != 2) throw InvalidInput("chain_bound_check expects a 2-variable joint");
  const int cv = vm.card[0], cm = vm.card[1];
  check_kernel(kernel_md, size_t(cm));
  const int cd = int(kernel_md[0].size());
  check_kernel(kernel_dg, size_t(cd));
  const int cg = int(kernel_dg[0].size());

  // G depends on V only through D by construction: p(v,d,g) = p(v,d) k(g|d).
  std::vector<double> pvd(size_t(cv) * cd, 0.0);
  for (int v = 0; v < cv; ++v)
    for (int m = 0; m < cm; ++m)
      for (int d = 0; d < cd; ++d)
        pvd[size_t(v) * cd + d] += vm.p[size_t(v) * cm + m] * kernel_md[m][d];
  std::vector<double> pvdg(size_t(cv) * cd * cg, 0.0);
  for (int v = 0; v < cv; ++v)
    for (int d = 0; d < cd; ++d)
      for (int g = 0; g < cg; ++g)
        pvdg[(size_t(v) * cd + d) * cg + g] = pvd[size_t(v) * cd + d] * kernel_dg[d][g];

  ChainBoundData out;
  out.i_v_m = mi_table(vm.p, cv, cm);
  out.i_v_d = mi_table(pvd, cv, cd);
  out.i_v_dg = mi_table(pvdg, cv, cd * cg);

  std::vector<double> pvg(size_t(cv) * cg, 0.0), pd(size_t(cd), 0.0);
  for (int v = 0; v < cv; ++v)
    for (int d = 0; d < cd; ++d)
      for (int g = 0; g < cg; ++g) {
        pvg[size_t(v) * cg + g] += pvdg[(size_t(v) * cd + d) * cg + g];
        pd[d] += pvdg[(size_t(v) * cd + d) * cg + g];
      }
  out.i_v_g = mi_table(pvg, cv, cg);

  for (int d = 0; d < cd; ++d) {
    if (pd[d] <= 0.0) continue;
    std::vector<double> cond(size_t(cv) * cg, 0.0);
    for (int v = 0; v < cv; ++v)
      for (int g = 0; g < cg; ++g)
        cond[size_t(v) * cg + g] = pvdg[(size_t(v) * cd + d) * cg + g] / pd[d];
    out.i_v_g_given_d += pd[d] * mi_table(cond, cv, cg);
  }
  return out;
}

double mi_laplace_awgn(double sigma2, const QuadratureSpec& q) {
  if (!(sigma2 > 0.0)) throw InvalidInput("mi_laplace_awgn: sigma2 must be > 0");
  const double sigma = std::sqrt(sigma2);

  int nx;
  if (q.points_override > 0) {
    nx = q.points_override;
  } else {
    double step = sigma * q.step_sigma_frac;
    nx = int(std::ceil(2.0 * q.x_max / step)) + 1;
    nx = std::clamp(nx, q.min_points, q.max_points);
  }
  if (nx < 401) throw InvalidConfig("mi_laplace_awgn: quadrature grid too coarse");
  if (nx % 2 == 0) ++nx;
  const double hx = 2.0 * q.x_max / double(nx - 1);

  const double v_max = q.x_max + q.band_sigmas * sigma;
  int nv = int(std::ceil(2.0 * v_max / hx)) + 1;
  nv = std::min(nv, 4 * q.max_points);
  if (nv % 2 == 0) ++nv;
  const double hv = 2.0 * v_max / double(nv - 1);

  // unit-variance Laplace density at the x nodes, Simpson-weighted
  const double b = 1.0 / std::sqrt(2.0);
  std::vector<double> wpx(static_cast<size_t>(nx));
  for (int i = 0; i < nx; ++i) {
    double x = -q.x_max + hx * double(i);
    double w = (i == 0 || i == nx - 1) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    wpx[i] = (hx / 3.0) * w * std::exp(-std::fabs(x) / b) / (2.0 * b);
  }

  const double band = q.band_sigmas * sigma;
  const double gnorm = 1.0 / (sigma * std::sqrt(2.0 * kPi));

  // h(V) by Simpson over v; p_V(v) by Simpson over x restricted to the
  // Gaussian band (the dropped tail mass is < 1e-14).
  std::vector<double> hv_terms(static_cast<size_t>(nv));
#pragma omp parallel for
  for (int jv = 0; jv < nv; ++jv) {
    double v = -v_max + hv * double(jv);
    int ilo = std::max(0, int(std::ceil((v - band + q.x_max) / hx)));
    int ihi = std::min(nx - 1, int(std::floor((v + band + q.x_max) / hx)));
    double pv = 0.0;
    for (int i = ilo; i <= ihi; ++i) {
      double x = -q.x_max + hx * double(i);
      double d = (v - x) / sigma;
      pv += wpx[i] * gnorm * std::exp(-0.5 * d * d);
    }
    double w = (jv == 0 || jv == nv - 1) ? 1.0 : (jv % 2 ? 4.0 : 2.0);
    hv_terms[jv] = (hv / 3.0) * w * (-xlogx(pv));
  }
  double h_v = 0.0;
  for (int jv = 0; jv < nv; ++jv) h_v += hv_terms[jv];  // fixed order

  const double h_noise = 0.5 * std::log(2.0 * kPi * std::exp(1.0) * sigma2);
  return std::max(0.0, h_v - h_noise);
}

double default_mi_ref(const QuadratureSpec& q) { return mi_laplace_awgn(1e-2, q); }

RhoPoint rho(double sigma2, double mi_ref, const QuadratureSpec& q) {
  if (!(mi_ref > 0.0)) throw InvalidInput("rho: mi_ref must be > 0");
  return {sigma2, std::min(1.0, mi_laplace_awgn(sigma2, q) / mi_ref)};
}

std::vector<RhoPoint> rho_curve(const std::vector<double>& sigma2_grid, double mi_ref,
                                const QuadratureSpec& q) {
  if (sigma2_grid.empty()) throw InvalidInput("rho_curve: empty grid");
  std::vector<RhoPoint> out;
  out.reserve(sigma2_grid.size());
  for (double s2 : sigma2_grid) out.push_back(rho(s2, mi_ref, q));
  for (size_t i = 1; i < out.size(); ++i)
    if (sigma2_grid[i] > sigma2_grid[i - 1] && out[i].rho > out[i - 1].rho + 1e-9)
      throw Error("rho_curve: curve not monotone non-increasing");
  return out;
}

double classical_sdr_bound(const BoundInputs& b) {
  if (!(b.L >= b.w) || !(b.w > 0.0)) throw InvalidInput("bound inputs need L >= w > 0");
  if (!(b.var_v > 0.0)) throw InvalidInput("bound inputs need var_v > 0");
  double arg = (b.L / b.w) * b.var_v * b.mi_ref;
  if (!(arg > 0.0) || !std::isfinite(arg))
    throw InvalidInput("bound argument must be positive and finite");
  return 10.0 * std::log10(arg);
}

double generative_sdr_bound(const BoundInputs& b) { return classical_sdr_bound(b) + 3.0; }

}  // namespace fusesep
