// Copyright 2026 The fusesep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include "fusesep/alignment.hpp"
#include "fusesep/spectral.hpp"
#include "fusesep/tensor.hpp"

namespace fusesep {

// One 3x3 zero-pad-1 convolution layer; w is out x in x 3 x 3 row-major.
struct ConvLayer {
  int in_ch = 0, out_ch = 0;
  std::vector<double> w, b;
};

// Combiner trunk: conv layers over the 4-channel feature stack
// [|Vd|, |Vg|, angle(Vd), angle(Vg*conj(Vd))], leaky-rectifier (slope 0.01)
// after every layer except the last, identity residual between consecutive
// equal-channel layers.  The last layer projects linearly to 4 channels:
// {0,1} -> D1 (magnitude head), {2,3} -> D2 (phase head); the heads share
// the trunk and differ only in their projection rows.
struct CombinerParams {
  int in_ch = 4;
  std::vector<int> hidden;  // e.g. {8,8,16} desk scale, {32,32,64,64,64} full
  std::vector<ConvLayer> layers;
  uint64_t seed = 0;
};

// Fan-in-scaled uniform init (bound 1/sqrt(9*in_ch)), zero biases, seeded.
CombinerParams make_combiner(const std::vector<int>& hidden, uint64_t seed);

// One trunk convolution on its own: the hot kernel, exposed for the
// kernel benchmark and the parallel-vs-serial equivalence tests.
Tensor3 conv3x3_apply(const ConvLayer& L, const Tensor3& x);

size_t param_count(const CombinerParams& p);
std::vector<double> flatten_params(const CombinerParams& p);
void unflatten_params(const std::vector<double>& flat, CombinerParams* p);

// Deterministic forward pass; d1/d2 come out as 2 x bins x frames.
void combiner_forward(const MagnitudeFeatures& a, const PhaseFeatures& psi,
                      const CombinerParams& p, Tensor3* d1, Tensor3* d2);

// Complex per-tile fusion coefficients (alpha, beta) = the two channels of
// Q = D1 * exp(-j * D2).
struct FusionWeights {
  int bins = 0, frames = 0;
  std::vector<std::complex<double>> alpha, beta;  // bin-major
};

FusionWeights weights_from_heads(const Tensor3& d1, const Tensor3& d2);

// alpha .* Vd + beta .* Vg.
Spectrogram fuse_spectrum(const Spectrogram& Vd, const Spectrogram& Vg,
                          const FusionWeights& w);

// istft of the fused spectrum.
TimeSignal apply_fusion(const Spectrogram& Vd, const Spectrogram& Vg, const FusionWeights& w);

// Ground-truth-informed least squares: per frequency bin, the complex
// (alpha_b, beta_b) constant over frames minimizing
//   sum_k |Vref - alpha Vd - beta Vg|^2 + lambda (|alpha|^2 + |beta|^2).
// Singular systems (det < 1e-12) cascade to scalar LS on Vd, then on Vg,
// then to (1, 0); the cascade keeps the optimality invariant
// residual <= min(residual(1,0), residual(0,1)) intact in degenerate bins.
FusionWeights oracle_weights(const Spectrogram& Vd, const Spectrogram& Vg,
                             const Spectrogram& Vref, double lambda);

// Per-tile variant (2 unknowns per single equation): rank-deficient without
// ridge, so lambda must be > 0.
FusionWeights oracle_weights_per_tile(const Spectrogram& Vd, const Spectrogram& Vg,
                                      const Spectrogram& Vref, double lambda);

// Frequency-domain residual ||Vref - alpha Vd - beta Vg||^2 (diagnostics and
// the dominance acceptance check).
double fusion_residual(const Spectrogram& Vd, const Spectrogram& Vg, const Spectrogram& Vref,
                       const FusionWeights& w);

struct TrainExample {
  TimeSignal mixture;
  std::vector<TimeSignal> sources, vd, vg;  // index-aligned estimates
};

struct TrainConfig {
  double learning_rate = 1e-3;
  int batch_size = 3;
  int epochs = 0;
  uint64_t seed = 0;
  std::vector<int> hidden = {8, 8, 16};
  SpectralConfig spectral;
};

struct TrainLogRow {
  int epoch = 0;
  double mean_si_sdr = 0.0;
};

// Batch loss (mean over examples and sources of -si_sdr(source, fused)) for
// fixed assignments; assignments[e][i] is the estimate index fused for
// source i of batch example e.
double combiner_loss(const std::vector<const TrainExample*>& batch,
                     const std::vector<std::vector<int>>& assignments,
                     const CombinerParams& p, const SpectralConfig& cfg);

// Exact analytic gradient of loss_scale * batch loss w.r.t. every parameter
// (assignments held fixed); returns the scaled loss.  grads comes back with
// the same layer shapes as p.layers.
double combiner_backward(const std::vector<const TrainExample*>& batch,
                         const std::vector<std::vector<int>>& assignments,
                         const CombinerParams& p, const SpectralConfig& cfg,
                         std::vector<ConvLayer>* grads, double loss_scale = 1.0);

// Adam training with per-batch Hungarian assignment on -si_sdr costs
// (recomputed each step, constant within the backward pass).  Deterministic
// for a fixed config; single-threaded by contract.
CombinerParams train_combiner(const std::vector<TrainExample>& dataset, const TrainConfig& tcfg,
                              std::vector<TrainLogRow>* log = nullptr);

// JSON checkpoint with layer shapes, row-major weights and a config hash.
void save_combiner(const std::string& path, const CombinerParams& p);
CombinerParams load_combiner(const std::string& path);
uint64_t combiner_config_hash(const CombinerParams& p);

}  // namespace fusesep
