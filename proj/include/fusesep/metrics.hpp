// Copyright 2026 The fusesep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <vector>

#include "fusesep/spectral.hpp"

namespace fusesep {

// Perfect-reconstruction cap; keeps reports free of infinities.
inline constexpr double kSdrCap = 100.0;

// 10*log10(Var(v)/Var(v - vbar)), population variances (mean removed);
// capped at +100 dB when the error variance is below 1e-20 * Var(v).
double sdr(const TimeSignal& v, const TimeSignal& vbar);

// Scale-invariant SDR: vt = <v,vbar> v / ||v||^2, e = vbar - vt,
// 10*log10(||vt||^2/||e||^2), same cap rule.
double si_sdr(const TimeSignal& v, const TimeSignal& vbar);

// si_sdr(v, vbar) - si_sdr(v, m).
double si_sdri(const TimeSignal& v, const TimeSignal& vbar, const TimeSignal& m);

struct AssignmentResult {
  std::vector<int> perm;  // perm[source] = estimate
  double total_cost = 0.0;
};

// Minimum-cost bijection in O(C^3) via potentials, then an exactness-
// preserving refinement that picks the lexicographically smallest
// permutation among cost ties.  Totals are accumulated row 0..C-1 so they
// are bit-comparable with pit_brute_force.
AssignmentResult hungarian_assign(const std::vector<std::vector<double>>& cost);

// Exhaustive O(C!) reference; C <= 8.  Permutations are visited in
// lexicographic order and kept on strict improvement, which realizes the
// same tie-break rule.
AssignmentResult pit_brute_force(const std::vector<std::vector<double>>& cost);

// Per-segment mean squared error over fixed-width windows (default 20 ms);
// trailing samples that do not fill a segment are dropped.
struct SegmentErrorStats {
  int seg_len = 0;
  std::vector<double> mse;
};

SegmentErrorStats segment_mse(const TimeSignal& v, const TimeSignal& vbar,
                              double width_s = 0.02);

// Shared log-spaced bins over the pooled positive range of both sample sets;
// zeros fall into the first bin.  Serializes to CSV as
// bin_left,bin_right,count_det,count_gen.
struct PairedHistogram {
  std::vector<double> edges;  // nbins + 1
  std::vector<long> count_a, count_b;
};

PairedHistogram paired_log_histogram(const std::vector<double>& a,
                                     const std::vector<double>& b, int nbins = 50);

// Wasserstein-1 distance between empirical distributions (sorted-sample
// form; quantile interpolation when sizes differ).
double wasserstein1(const std::vector<double>& a, const std::vector<double>& b);

double mean(const std::vector<double>& v);
double median(std::vector<double> v);

}  // namespace fusesep
