// Copyright 2026 The fusesep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "fusesep/fusion.hpp"
#include "fusesep/spectral.hpp"

namespace fusesep {

// Deterministic-separator stand-in: constant cross-talk plus rectangular
// 10 ms bursts of interfering content.  leakage_db <= -300 means exactly
// zero leakage (a plain dB knob cannot express 0).
struct DetSimCfg {
  double leakage_db = -12.0;
  double burst_rate = 6.0;  // expected bursts per second per source
  double burst_gain = 2.5;
};

// Vocoder stand-in: mel -> Griffin-Lim (seeded random initial phase) -> AWGN.
struct GenSimCfg {
  double sigma2 = 1e-3;
  int griffin_lim_iters = 60;
};

struct BenchConfig {
  int speakers = 2;  // C
  int instances = 50;
  double duration_s = 1.0;
  double snr_min_db = 0.0, snr_max_db = 5.0;  // non-reference gain range
  // short analysis windows: the 20 ms envelope blocks stay near-stationary
  // per frame, which is what keeps the Griffin-Lim stand-in competitive
  SpectralConfig spectral{8000, 128, 32, "hann"};
  MelConfig mel{64, 0.0, 0.0};
  DetSimCfg det_sim;
  GenSimCfg gen_sim;
  double oracle_lambda = 0.0;
  double mse_w1_threshold = 0.5;  // on W1 / mean(det segment mse)
  bool keep_first_instance = false;
  uint64_t seed = 42;
};

void validate(const BenchConfig& cfg);

// Harmonic carriers (fundamentals 100*2^(i/6) Hz with 2% jitter, 1/h rolloff
// up to 3.6 kHz) under per-20 ms |Laplace| amplitude envelopes, unit variance.
// Super-Gaussian by construction, which is the only source statistic the
// information bounds lean on.
std::vector<TimeSignal> gen_sources(int C, double duration_s, uint64_t seed,
                                    int sample_rate = 8000);

// Scales sources in place (reference keeps gain 1, the rest draw
// 10^(-U[snr_min, snr_max]/20)) and returns the mixture plus the gains.
std::pair<TimeSignal, std::vector<double>> mix(std::vector<TimeSignal>* sources,
                                               double snr_min_db, double snr_max_db,
                                               uint64_t seed);

// v_d^i = v^i + leakage*(m - v^i) + Poisson-count 10 ms bursts of
// burst_gain*(m - v^i) content.
std::vector<TimeSignal> simulate_deterministic(const std::vector<TimeSignal>& sources,
                                               const TimeSignal& mixture,
                                               const DetSimCfg& det, uint64_t seed);

// v_g = griffin_lim(mel(v_d)) + AWGN(sigma2); length and rate preserved.
TimeSignal simulate_generative(const TimeSignal& vd, const GenSimCfg& gen,
                               const SpectralConfig& cfg, const MelConfig& mcfg, uint64_t seed);

// One fully simulated mixture: ground-truth (scaled) sources, both estimate
// families.  Seeding is per-instance, so instances are order-independent.
struct Instance {
  TimeSignal m;
  std::vector<TimeSignal> v, vd, vg;
};
Instance make_instance(const BenchConfig& cfg, int index);

std::vector<TrainExample> make_dataset(const BenchConfig& cfg);

struct StrategyRow {
  std::string strategy;
  int instance = 0, source = 0;
  double si_sdr = 0.0, si_sdri = 0.0, sdr = 0.0;
};

struct StrategyStats {
  std::string strategy;
  double mean_si_sdr = 0.0, median_si_sdr = 0.0;
  double mean_si_sdri = 0.0, median_si_sdri = 0.0;
  double mean_sdr = 0.0;
};

struct BenchReport {
  std::vector<std::string> strategies;
  std::vector<StrategyRow> rows;     // strategy-major, then instance, source
  std::vector<StrategyStats> stats;  // aggregates of rows
  // per-(instance, source) frequency-domain residuals for the dominance check
  std::vector<double> resid_oracle, resid_det, resid_gen;
  // pooled 20 ms segment errors (generative branch is delay-aligned first,
  // otherwise its free phase would pin every MSE near the variance sum)
  std::vector<double> mse_det, mse_gen;
  double mse_det_mean = 0.0, mse_gen_mean = 0.0;
  double mse_w1 = 0.0, mse_w1_rel = 0.0, mse_w1_threshold = 0.0;
  std::string report_csv, summary_csv, hist_csv;
  std::vector<std::pair<std::string, TimeSignal>> first_instance_wavs;
  double wall_seconds = 0.0;  // kept out of the CSVs: they must be seed-deterministic
};

// Runs every strategy (learned only when a combiner is given) over
// cfg.instances mixtures, Hungarian-assigns estimates to sources on
// -si_sdr, and renders the three report CSVs.
BenchReport run_benchmark(const BenchConfig& cfg, const CombinerParams* combiner = nullptr);

// Bisection on gen_sim.sigma2 until the pooled mean segment MSEs of the two
// simulators agree within rel_tol.  converged=false when the Griffin-Lim
// error floor already exceeds the deterministic mean (no variance can help).
struct MseParityReport {
  double sigma2 = 0.0;
  double det_mean = 0.0, gen_mean = 0.0;
  double w1 = 0.0, w1_rel = 0.0, threshold = 0.0;
  bool converged = false;
};
MseParityReport calibrate_mse_parity(const BenchConfig& base, double rel_tol = 0.05,
                                     int max_iter = 30);

}  // namespace fusesep
