// Copyright 2026 The fusesep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "fusesep/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace fusesep {

namespace {

void check_lengths(const TimeSignal& a, const TimeSignal& b) {
  if (a.samples.size() != b.samples.size()) throw InvalidInput("signal length mismatch");
  if (a.samples.empty()) throw InvalidInput("empty signals");
}

double variance(const std::vector<double>& x) {
  double m = std::accumulate(x.begin(), x.end(), 0.0) / double(x.size());
  double s = 0.0;
  for (double v : x) s += (v - m) * (v - m);
  return s / double(x.size());
}

void check_cost(const std::vector<std::vector<double>>& cost) {
  const size_t c = cost.size();
  if (c == 0) throw InvalidInput("empty cost matrix");
  for (const auto& row : cost) {
    if (row.size() != c) throw InvalidInput("cost matrix not square");
    for (double v : row)
      if (!std::isfinite(v)) throw InvalidInput("cost matrix has non-finite entries");
  }
}

// Row-order accumulation; brute force and Hungarian must score permutations
// with the identical float expression for tie handling to be exact.
double canonical_total(const std::vector<std::vector<double>>& cost,
                       const std::vector<int>& perm) {
  double t = 0.0;
  for (size_t i = 0; i < perm.size(); ++i) t += cost[i][perm[i]];
  return t;
}

// O(C^3) assignment on an explicit row/column subset (potentials method).
std::vector<int> hungarian_raw(const std::vector<std::vector<double>>& cost,
                               const std::vector<int>& rows, const std::vector<int>& cols) {
  const int n = int(rows.size());
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(size_t(n) + 1, 0.0), v(size_t(n) + 1, 0.0);
  std::vector<int> p(size_t(n) + 1, 0), way(size_t(n) + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(size_t(n) + 1, inf);
    std::vector<char> used(size_t(n) + 1, 0);
    do {
      used[j0] = 1;
      int i0 = p[j0], j1 = -1;
      double delta = inf;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        double cur = cost[rows[i0 - 1]][cols[j - 1]] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }
  std::vector<int> perm(size_t(n), -1);
  for (int j = 1; j <= n; ++j) perm[size_t(p[j] - 1)] = j - 1;  // local indices
  return perm;
}

}  // namespace

double sdr(const TimeSignal& v, const TimeSignal& vbar) {
  check_lengths(v, vbar);
  double var_v = variance(v.samples);
  if (var_v <= 0.0) throw InvalidInput("sdr: reference has zero variance");
  std::vector<double> e(v.samples.size());
  for (size_t i = 0; i < e.size(); ++i) e[i] = v.samples[i] - vbar.samples[i];
  double var_e = variance(e);
  if (var_e < 1e-20 * var_v) return kSdrCap;
  return 10.0 * std::log10(var_v / var_e);
}

double si_sdr(const TimeSignal& v, const TimeSignal& vbar) {
  check_lengths(v, vbar);
  double vv = 0.0, vb = 0.0, dot = 0.0;
  for (size_t i = 0; i < v.samples.size(); ++i) {
    vv += v.samples[i] * v.samples[i];
    vb += vbar.samples[i] * vbar.samples[i];
    dot += v.samples[i] * vbar.samples[i];
  }
  if (vv <= 0.0) throw InvalidInput("si_sdr: reference has zero norm");
  if (vb <= 0.0) throw InvalidInput("si_sdr: estimate has zero norm");
  double c = dot / vv;          // projection coefficient
  double tt = c * c * vv;       // ||vt||^2
  double ee = 0.0;              // ||vbar - vt||^2
  for (size_t i = 0; i < v.samples.size(); ++i) {
    double d = vbar.samples[i] - c * v.samples[i];
    ee += d * d;
  }
  if (tt <= 0.0) return -kSdrCap;  // orthogonal estimate: no target component
  if (ee < 1e-20 * tt) return kSdrCap;
  return 10.0 * std::log10(tt / ee);
}

double si_sdri(const TimeSignal& v, const TimeSignal& vbar, const TimeSignal& m) {
  return si_sdr(v, vbar) - si_sdr(v, m);
}

AssignmentResult pit_brute_force(const std::vector<std::vector<double>>& cost) {
  check_cost(cost);
  const int c = int(cost.size());
  if (c > 8) throw InvalidInput("pit_brute_force: C > 8");
  std::vector<int> perm(static_cast<size_t>(c));
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<int> best_perm = perm;
  double best = canonical_total(cost, perm);
  while (std::next_permutation(perm.begin(), perm.end())) {
    double t = canonical_total(cost, perm);
    if (t < best) {
      best = t;
      best_perm = perm;
    }
  }
  return {best_perm, best};
}

AssignmentResult hungarian_assign(const std::vector<std::vector<double>>& cost) {
  check_cost(cost);
  const int c = int(cost.size());
  std::vector<int> all(static_cast<size_t>(c));
  std::iota(all.begin(), all.end(), 0);
  std::vector<int> incumbent = hungarian_raw(cost, all, all);
  double best = canonical_total(cost, incumbent);

  // Lexicographic refinement: fix rows top-down to the smallest column that
  // still reaches the optimal total.  The incumbent column needs no re-solve,
  // so the loop always terminates with a consistent assignment.
  std::vector<char> used(size_t(c), 0);
  for (int i = 0; i < c; ++i) {
    for (int j = 0; j < c; ++j) {
      if (used[j]) continue;
      if (j == incumbent[i]) break;  // already the best admissible choice
      std::vector<int> rows, cols;
      for (int r = i + 1; r < c; ++r) rows.push_back(r);
      for (int q = 0; q < c; ++q)
        if (!used[q] && q != j) cols.push_back(q);
      std::vector<int> candidate = incumbent;
      candidate[i] = j;
      if (!rows.empty()) {
        std::vector<int> sub = hungarian_raw(cost, rows, cols);
        for (size_t r = 0; r < rows.size(); ++r) candidate[size_t(rows[r])] = cols[size_t(sub[r])];
      }
      double t = canonical_total(cost, candidate);
      if (t <= best) {
        best = t;
        incumbent = candidate;
        break;
      }
    }
    used[size_t(incumbent[i])] = 1;
  }
  return {incumbent, canonical_total(cost, incumbent)};
}

SegmentErrorStats segment_mse(const TimeSignal& v, const TimeSignal& vbar, double width_s) {
  check_lengths(v, vbar);
  int seg = int(std::lround(width_s * v.sample_rate));
  if (seg < 1) throw InvalidInput("segment width below one sample");
  int nseg = int(v.samples.size()) / seg;
  if (nseg < 1) throw InvalidInput("signal shorter than one segment");
  SegmentErrorStats st;
  st.seg_len = seg;
  st.mse.resize(size_t(nseg));
  for (int s = 0; s < nseg; ++s) {
    double acc = 0.0;
    for (int i = 0; i < seg; ++i) {
      double d = v.samples[size_t(s) * seg + i] - vbar.samples[size_t(s) * seg + i];
      acc += d * d;
    }
    st.mse[s] = acc / double(seg);
  }
  return st;
}

PairedHistogram paired_log_histogram(const std::vector<double>& a, const std::vector<double>& b,
                                     int nbins) {
  if (nbins < 1) throw InvalidInput("histogram needs at least one bin");
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  auto scan = [&](const std::vector<double>& v) {
    for (double x : v) {
      if (x < 0.0 || !std::isfinite(x)) throw InvalidInput("histogram values must be finite and >= 0");
      if (x > 0.0) lo = std::min(lo, x);
      hi = std::max(hi, x);
    }
  };
  scan(a);
  scan(b);
  if (!(hi > 0.0)) {  // all zeros: degenerate but well-defined edges
    lo = 1e-12;
    hi = 1.0;
  }
  lo = std::max(lo, hi * 1e-12);
  if (lo >= hi) lo = hi / 10.0;

  PairedHistogram h;
  h.edges.resize(size_t(nbins) + 1);
  for (int t = 0; t <= nbins; ++t)
    h.edges[t] = lo * std::pow(hi / lo, double(t) / double(nbins));
  h.edges[0] = lo;
  h.edges[size_t(nbins)] = hi;
  h.count_a.assign(size_t(nbins), 0);
  h.count_b.assign(size_t(nbins), 0);
  auto fill = [&](const std::vector<double>& v, std::vector<long>& cnt) {
    for (double x : v) {
      int idx;
      if (x <= h.edges[0]) {
        idx = 0;
      } else if (x >= h.edges[size_t(nbins)]) {
        idx = nbins - 1;
      } else {
        idx = int(std::upper_bound(h.edges.begin(), h.edges.end(), x) - h.edges.begin()) - 1;
        idx = std::clamp(idx, 0, nbins - 1);
      }
      ++cnt[size_t(idx)];
    }
  };
  fill(a, h.count_a);
  fill(b, h.count_b);
  return h;
}

double wasserstein1(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.empty() || b.empty()) throw InvalidInput("wasserstein1: empty sample set");
  std::vector<double> sa = a, sb = b;
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  if (sa.size() == sb.size()) {
    double s = 0.0;
    for (size_t i = 0; i < sa.size(); ++i) s += std::fabs(sa[i] - sb[i]);
    return s / double(sa.size());
  }
  // unequal sizes: integrate |F_a^-1 - F_b^-1| on a fixed quantile grid
  auto quant = [](const std::vector<double>& s, double q) {
    double p = q * double(s.size() - 1);
    size_t i = size_t(p);
    if (i + 1 >= s.size()) return s.back();
    double f = p - double(i);
    return s[i] * (1.0 - f) + s[i + 1] * f;
  };
  const int m = 4096;
  double s = 0.0;
  for (int t = 0; t < m; ++t) {
    double q = (double(t) + 0.5) / double(m);
    s += std::fabs(quant(sa, q) - quant(sb, q));
  }
  return s / double(m);
}

double mean(const std::vector<double>& v) {
  if (v.empty()) throw InvalidInput("mean of empty vector");
  return std::accumulate(v.begin(), v.end(), 0.0) / double(v.size());
}

double median(std::vector<double> v) {
  if (v.empty()) throw InvalidInput("median of empty vector");
  std::sort(v.begin(), v.end());
  size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace fusesep
