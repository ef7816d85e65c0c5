// Copyright 2026 The fusesep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "fusesep/synthbench.hpp"

#include <omp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <utility>

#include "fusesep/alignment.hpp"
#include "fusesep/common.hpp"
#include "fusesep/csv_io.hpp"
#include "fusesep/metrics.hpp"
#include "fusesep/rng.hpp"

namespace fusesep {

namespace {

int thread_cap() {
  const char* e = std::getenv("FUSESEP_THREADS");
  if (e && *e) {
    const int v = std::atoi(e);
    if (v >= 1) return v;
  }
  return omp_get_max_threads();
}

double population_sd(const std::vector<double>& x) {
  double mean = 0.0;
  for (double t : x) mean += t;
  mean /= double(x.size());
  double var = 0.0;
  for (double t : x) var += (t - mean) * (t - mean);
  return std::sqrt(var / double(x.size()));
}

constexpr double kEnvelopeSeconds = 0.02;  // Laplace amplitude block, 20 ms
constexpr double kBurstSeconds = 0.01;
constexpr double kCarrierCeilingHz = 3600.0;

}  // namespace

void validate(const BenchConfig& cfg) {
  validate(cfg.spectral);
  if (cfg.speakers < 2) throw InvalidConfig("benchmark needs at least 2 speakers");
  if (cfg.instances < 1) throw InvalidConfig("benchmark needs at least 1 instance");
  const long len = std::lround(cfg.duration_s * cfg.spectral.sample_rate);
  if (len < cfg.spectral.n_fft)
    throw InvalidConfig("duration shorter than one analysis frame");
  if (!(cfg.snr_min_db <= cfg.snr_max_db) || !std::isfinite(cfg.snr_min_db) ||
      !std::isfinite(cfg.snr_max_db))
    throw InvalidConfig("snr range must be finite with min <= max");
  if (!std::isfinite(cfg.det_sim.leakage_db) && cfg.det_sim.leakage_db > -300.0)
    throw InvalidConfig("leakage_db must be finite (or <= -300 for none)");
  if (!(cfg.det_sim.burst_rate >= 0.0) || !(cfg.det_sim.burst_gain >= 0.0))
    throw InvalidConfig("burst parameters must be >= 0");
  if (!(cfg.gen_sim.sigma2 >= 0.0) || !std::isfinite(cfg.gen_sim.sigma2))
    throw InvalidConfig("sigma2 must be finite and >= 0");
  if (cfg.gen_sim.griffin_lim_iters < 1)
    throw InvalidConfig("griffin_lim_iters must be >= 1");
  if (!(cfg.oracle_lambda >= 0.0)) throw InvalidConfig("oracle_lambda must be >= 0");
  if (!(cfg.mse_w1_threshold > 0.0)) throw InvalidConfig("mse_w1_threshold must be > 0");
}

std::vector<TimeSignal> gen_sources(int C, double duration_s, uint64_t seed, int sample_rate) {
  if (C < 2) throw InvalidInput("need at least 2 sources");
  const long len = std::lround(duration_s * sample_rate);
  if (len < 1) throw InvalidInput("duration must cover at least one sample");
  const int env_len = std::max(1L, std::lround(kEnvelopeSeconds * sample_rate));
  std::vector<TimeSignal> out(C);
  for (int i = 0; i < C; ++i) {
    Rng rng(derive_seed(seed, uint64_t(i)));
    double f0 = 100.0 * std::pow(2.0, double(i) / 6.0);
    f0 *= 1.0 + rng.uniform(-0.02, 0.02);
    const int nh = std::max(1, int(kCarrierCeilingHz / f0));
    std::vector<double> phase(nh);
    for (double& p : phase) p = rng.uniform(0.0, 2.0 * kPi);
    TimeSignal s;
    s.sample_rate = sample_rate;
    s.samples.resize(len);
    // per-20ms |Laplace| envelope, linearly blended across block boundaries so
    // the waveform stays free of synthetic broadband clicks
    const long nblocks = (len + env_len - 1) / env_len;
    std::vector<double> env(size_t(nblocks) + 1);
    for (double& e : env) e = std::fabs(rng.laplace(1.0));
    for (long t = 0; t < len; ++t) {
      const long j = t / env_len;
      const double frac = double(t - j * env_len) / double(env_len);
      const double e = env[j] + (env[j + 1] - env[j]) * frac;
      double c = 0.0;
      for (int h = 1; h <= nh; ++h)
        c += std::sin(2.0 * kPi * h * f0 * double(t) / sample_rate + phase[h - 1]) / double(h);
      s.samples[t] = e * c;
    }
    const double sd = population_sd(s.samples);
    if (sd > 0.0)
      for (double& v : s.samples) v /= sd;
    out[i] = std::move(s);
  }
  return out;
}

std::pair<TimeSignal, std::vector<double>> mix(std::vector<TimeSignal>* sources,
                                               double snr_min_db, double snr_max_db,
                                               uint64_t seed) {
  if (!sources || sources->size() < 2) throw InvalidInput("need at least 2 sources to mix");
  const size_t len = (*sources)[0].samples.size();
  const int sr = (*sources)[0].sample_rate;
  for (const TimeSignal& s : *sources)
    if (s.samples.size() != len || s.sample_rate != sr)
      throw InvalidInput("sources disagree in length or rate");
  Rng rng(seed);
  std::vector<double> gains(sources->size(), 1.0);
  for (size_t i = 1; i < sources->size(); ++i)
    gains[i] = std::pow(10.0, -rng.uniform(snr_min_db, snr_max_db) / 20.0);
  TimeSignal m;
  m.sample_rate = sr;
  m.samples.assign(len, 0.0);
  for (size_t i = 0; i < sources->size(); ++i) {
    for (size_t t = 0; t < len; ++t) {
      (*sources)[i].samples[t] *= gains[i];
      m.samples[t] += (*sources)[i].samples[t];
    }
  }
  return {std::move(m), std::move(gains)};
}

std::vector<TimeSignal> simulate_deterministic(const std::vector<TimeSignal>& sources,
                                               const TimeSignal& mixture, const DetSimCfg& det,
                                               uint64_t seed) {
  if (sources.empty()) throw InvalidInput("no sources");
  const size_t len = mixture.samples.size();
  for (const TimeSignal& s : sources)
    if (s.samples.size() != len) throw InvalidInput("source/mixture length mismatch");
  const double leak = det.leakage_db <= -300.0 ? 0.0 : std::pow(10.0, det.leakage_db / 20.0);
  const int sr = mixture.sample_rate;
  const long blen = std::max(1L, std::lround(kBurstSeconds * sr));
  const double dur = double(len) / sr;
  std::vector<TimeSignal> out(sources.size());
  for (size_t i = 0; i < sources.size(); ++i) {
    Rng rng(derive_seed(seed, uint64_t(i)));
    TimeSignal vd = sources[i];
    if (leak != 0.0)
      for (size_t t = 0; t < len; ++t)
        vd.samples[t] += leak * (mixture.samples[t] - sources[i].samples[t]);
    if (det.burst_rate > 0.0 && det.burst_gain > 0.0 && long(len) > blen) {
      const long nb = rng.poisson(det.burst_rate * dur);
      for (long b = 0; b < nb; ++b) {
        const long t0 = long(rng.uniform_int(uint64_t(long(len) - blen + 1)));
        for (long t = t0; t < t0 + blen; ++t)
          vd.samples[t] += det.burst_gain * (mixture.samples[t] - sources[i].samples[t]);
      }
    }
    out[i] = std::move(vd);
  }
  return out;
}

TimeSignal simulate_generative(const TimeSignal& vd, const GenSimCfg& gen,
                               const SpectralConfig& cfg, const MelConfig& mcfg, uint64_t seed) {
  if (!(gen.sigma2 >= 0.0) || !std::isfinite(gen.sigma2))
    throw InvalidConfig("sigma2 must be finite and >= 0");
  if (gen.griffin_lim_iters < 1) throw InvalidConfig("griffin_lim_iters must be >= 1");
  const MelSpec M = mel_spectrogram(vd, cfg, mcfg);
  TimeSignal vg = griffin_lim_mel(M, cfg, mcfg, gen.griffin_lim_iters, derive_seed(seed, 1),
                                  int(vd.samples.size()));
  vg.sample_rate = vd.sample_rate;
  if (gen.sigma2 > 0.0) {
    Rng rng(derive_seed(seed, 2));
    const double sd = std::sqrt(gen.sigma2);
    for (double& t : vg.samples) t += sd * rng.normal();
  }
  return vg;
}

Instance make_instance(const BenchConfig& cfg, int index) {
  const uint64_t iseed = derive_seed(cfg.seed, uint64_t(index));
  Instance inst;
  inst.v = gen_sources(cfg.speakers, cfg.duration_s, derive_seed(iseed, 1),
                       cfg.spectral.sample_rate);
  inst.m = mix(&inst.v, cfg.snr_min_db, cfg.snr_max_db, derive_seed(iseed, 2)).first;
  inst.vd = simulate_deterministic(inst.v, inst.m, cfg.det_sim, derive_seed(iseed, 3));
  inst.vg.resize(inst.vd.size());
  for (size_t i = 0; i < inst.vd.size(); ++i)
    inst.vg[i] = simulate_generative(inst.vd[i], cfg.gen_sim, cfg.spectral, cfg.mel,
                                     derive_seed(iseed, 100 + uint64_t(i)));
  return inst;
}

std::vector<TrainExample> make_dataset(const BenchConfig& cfg) {
  validate(cfg);
  std::vector<TrainExample> out(cfg.instances);
  const int nt = thread_cap();
#pragma omp parallel for num_threads(nt) schedule(dynamic)
  for (int idx = 0; idx < cfg.instances; ++idx) {
    Instance inst = make_instance(cfg, idx);
    out[idx] = {std::move(inst.m), std::move(inst.v), std::move(inst.vd), std::move(inst.vg)};
  }
  return out;
}

namespace {

struct InstanceResult {
  // per strategy (outer) and source (inner, assignment applied)
  std::vector<std::vector<double>> si_sdr, si_sdri, sdr;
  std::vector<double> resid_oracle, resid_det, resid_gen;
  std::vector<double> mse_det, mse_gen;
  std::vector<std::pair<std::string, TimeSignal>> wavs;
};

std::vector<double> strategy_metrics(const std::vector<TimeSignal>& v,
                                     const std::vector<TimeSignal>& est,
                                     const std::vector<double>& mix_sisdr,
                                     std::vector<double>* sisdri, std::vector<double>* sdrs) {
  const size_t C = v.size();
  std::vector<std::vector<double>> cost(C, std::vector<double>(C));
  for (size_t i = 0; i < C; ++i)
    for (size_t j = 0; j < C; ++j) cost[i][j] = -si_sdr(v[i], est[j]);
  const std::vector<int> perm = hungarian_assign(cost).perm;
  std::vector<double> out(C);
  sisdri->resize(C);
  sdrs->resize(C);
  for (size_t i = 0; i < C; ++i) {
    out[i] = -cost[i][perm[i]];
    (*sisdri)[i] = out[i] - mix_sisdr[i];
    (*sdrs)[i] = sdr(v[i], est[perm[i]]);
  }
  return out;
}

double residual_against(const Spectrogram& Vref, const Spectrogram& V) {
  double acc = 0.0;
  for (size_t i = 0; i < V.data.size(); ++i) {
    const std::complex<double> r = Vref.data[i] - V.data[i];
    acc += r.real() * r.real() + r.imag() * r.imag();
  }
  return acc;
}

InstanceResult run_instance(const BenchConfig& cfg, int idx, const CombinerParams* combiner) {
  const Instance inst = make_instance(cfg, idx);
  const int C = cfg.speakers;
  InstanceResult res;

  std::vector<double> mix_sisdr(C);
  for (int i = 0; i < C; ++i) mix_sisdr[i] = si_sdr(inst.v[i], inst.m);

  std::vector<Spectrogram> Vd(C), Vg(C), Vref(C);
  for (int i = 0; i < C; ++i) {
    Vd[i] = stft(inst.vd[i], cfg.spectral);
    Vg[i] = stft(inst.vg[i], cfg.spectral);
    Vref[i] = stft(inst.v[i], cfg.spectral);
  }

  std::vector<std::vector<TimeSignal>> est;
  est.push_back(inst.vd);
  est.push_back(inst.vg);
  {
    std::vector<TimeSignal> xc(C);
    for (int i = 0; i < C; ++i) xc[i] = xcorr_fuse(Vd[i], Vg[i]);
    est.push_back(std::move(xc));
  }
  {
    std::vector<TimeSignal> oc(C);
    for (int i = 0; i < C; ++i) {
      const FusionWeights w = oracle_weights(Vd[i], Vg[i], Vref[i], cfg.oracle_lambda);
      res.resid_oracle.push_back(fusion_residual(Vd[i], Vg[i], Vref[i], w));
      res.resid_det.push_back(residual_against(Vref[i], Vd[i]));
      res.resid_gen.push_back(residual_against(Vref[i], Vg[i]));
      oc[i] = apply_fusion(Vd[i], Vg[i], w);
    }
    est.push_back(std::move(oc));
  }
  if (combiner) {
    std::vector<TimeSignal> lf(C);
    for (int i = 0; i < C; ++i) {
      Tensor3 d1, d2;
      combiner_forward(magnitude_features(Vd[i], Vg[i]), phase_features(Vd[i], Vg[i]), *combiner,
                       &d1, &d2);
      lf[i] = apply_fusion(Vd[i], Vg[i], weights_from_heads(d1, d2));
    }
    est.push_back(std::move(lf));
  }

  res.si_sdr.resize(est.size());
  res.si_sdri.resize(est.size());
  res.sdr.resize(est.size());
  for (size_t s = 0; s < est.size(); ++s)
    res.si_sdr[s] = strategy_metrics(inst.v, est[s], mix_sisdr, &res.si_sdri[s], &res.sdr[s]);

  // Fig. 4 analog pools: raw det error vs delay-aligned gen error per 20 ms.
  for (int i = 0; i < C; ++i) {
    const SegmentErrorStats d = segment_mse(inst.v[i], inst.vd[i]);
    res.mse_det.insert(res.mse_det.end(), d.mse.begin(), d.mse.end());
    const AlignmentResult ar = align(Vd[i], Vg[i]);
    const TimeSignal vg_al = istft(apply_alignment(Vg[i], ar));
    const SegmentErrorStats g = segment_mse(inst.v[i], vg_al);
    res.mse_gen.insert(res.mse_gen.end(), g.mse.begin(), g.mse.end());
  }

  if (cfg.keep_first_instance && idx == 0) {
    const char* names[] = {"deterministic", "generative", "xcorr", "oracle", "learned"};
    res.wavs.emplace_back("mixture", inst.m);
    for (int i = 0; i < C; ++i) res.wavs.emplace_back("source" + std::to_string(i), inst.v[i]);
    for (size_t s = 0; s < est.size(); ++s)
      for (int i = 0; i < C; ++i)
        res.wavs.emplace_back(std::string(names[s]) + std::to_string(i), est[s][i]);
  }
  return res;
}

}  // namespace

BenchReport run_benchmark(const BenchConfig& cfg, const CombinerParams* combiner) {
  validate(cfg);
  const auto t0 = std::chrono::steady_clock::now();
  BenchReport rep;
  rep.strategies = {"deterministic", "generative", "xcorr", "oracle"};
  if (combiner) rep.strategies.push_back("learned");

  std::vector<InstanceResult> results(cfg.instances);
  const int nt = thread_cap();
#pragma omp parallel for num_threads(nt) schedule(dynamic)
  for (int idx = 0; idx < cfg.instances; ++idx) results[idx] = run_instance(cfg, idx, combiner);

  const size_t S = rep.strategies.size();
  std::vector<std::vector<double>> all_sisdr(S), all_sisdri(S), all_sdr(S);
  for (size_t s = 0; s < S; ++s) {
    for (int idx = 0; idx < cfg.instances; ++idx) {
      const InstanceResult& r = results[idx];
      for (int i = 0; i < cfg.speakers; ++i) {
        rep.rows.push_back({rep.strategies[s], idx, i, r.si_sdr[s][i], r.si_sdri[s][i],
                            r.sdr[s][i]});
        all_sisdr[s].push_back(r.si_sdr[s][i]);
        all_sisdri[s].push_back(r.si_sdri[s][i]);
        all_sdr[s].push_back(r.sdr[s][i]);
      }
    }
    StrategyStats st;
    st.strategy = rep.strategies[s];
    st.mean_si_sdr = mean(all_sisdr[s]);
    st.median_si_sdr = median(all_sisdr[s]);
    st.mean_si_sdri = mean(all_sisdri[s]);
    st.median_si_sdri = median(all_sisdri[s]);
    st.mean_sdr = mean(all_sdr[s]);
    rep.stats.push_back(st);
  }
  for (int idx = 0; idx < cfg.instances; ++idx) {
    const InstanceResult& r = results[idx];
    rep.resid_oracle.insert(rep.resid_oracle.end(), r.resid_oracle.begin(), r.resid_oracle.end());
    rep.resid_det.insert(rep.resid_det.end(), r.resid_det.begin(), r.resid_det.end());
    rep.resid_gen.insert(rep.resid_gen.end(), r.resid_gen.begin(), r.resid_gen.end());
    rep.mse_det.insert(rep.mse_det.end(), r.mse_det.begin(), r.mse_det.end());
    rep.mse_gen.insert(rep.mse_gen.end(), r.mse_gen.begin(), r.mse_gen.end());
    if (!r.wavs.empty()) rep.first_instance_wavs = r.wavs;
  }

  rep.mse_det_mean = mean(rep.mse_det);
  rep.mse_gen_mean = mean(rep.mse_gen);
  rep.mse_w1 = wasserstein1(rep.mse_det, rep.mse_gen);
  rep.mse_w1_rel = rep.mse_det_mean > 0.0 ? rep.mse_w1 / rep.mse_det_mean : 0.0;
  rep.mse_w1_threshold = cfg.mse_w1_threshold;

  rep.report_csv = csv_row({"strategy", "instance", "source", "si_sdr_db", "si_sdri_db",
                            "sdr_db"});
  for (const StrategyRow& r : rep.rows)
    rep.report_csv += csv_row({r.strategy, fmt_int(r.instance), fmt_int(r.source),
                               fmt_double(r.si_sdr), fmt_double(r.si_sdri), fmt_double(r.sdr)});

  rep.summary_csv = csv_row({"strategy", "mean_si_sdr_db", "median_si_sdr_db", "mean_si_sdri_db",
                             "median_si_sdri_db", "mean_sdr_db"});
  for (const StrategyStats& st : rep.stats)
    rep.summary_csv +=
        csv_row({st.strategy, fmt_double(st.mean_si_sdr), fmt_double(st.median_si_sdr),
                 fmt_double(st.mean_si_sdri), fmt_double(st.median_si_sdri),
                 fmt_double(st.mean_sdr)});
  rep.summary_csv += csv_row({"segment_mse_det_mean", fmt_double(rep.mse_det_mean), "", "", "",
                              ""});
  rep.summary_csv += csv_row({"segment_mse_gen_mean", fmt_double(rep.mse_gen_mean), "", "", "",
                              ""});
  rep.summary_csv += csv_row({"segment_mse_w1", fmt_double(rep.mse_w1), "", "", "", ""});
  rep.summary_csv += csv_row({"segment_mse_w1_rel", fmt_double(rep.mse_w1_rel), "", "", "", ""});
  rep.summary_csv +=
      csv_row({"segment_mse_w1_threshold", fmt_double(rep.mse_w1_threshold), "", "", "", ""});

  const PairedHistogram hist = paired_log_histogram(rep.mse_det, rep.mse_gen, 50);
  rep.hist_csv = csv_row({"bin_lo", "bin_hi", "count_det", "count_gen"});
  for (size_t b = 0; b + 1 < hist.edges.size(); ++b)
    rep.hist_csv += csv_row({fmt_double(hist.edges[b]), fmt_double(hist.edges[b + 1]),
                             fmt_int(hist.count_a[b]), fmt_int(hist.count_b[b])});

  rep.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

MseParityReport calibrate_mse_parity(const BenchConfig& base, double rel_tol, int max_iter) {
  validate(base);
  if (!(rel_tol > 0.0)) throw InvalidConfig("rel_tol must be > 0");

  // Only the two simulator pools matter here; skip the fusion strategies.
  auto pools = [&base](double sigma2, std::vector<double>* det, std::vector<double>* gen) {
    BenchConfig c = base;
    c.gen_sim.sigma2 = sigma2;
    const int nt = thread_cap();
    std::vector<std::vector<double>> pd(c.instances), pg(c.instances);
#pragma omp parallel for num_threads(nt) schedule(dynamic)
    for (int idx = 0; idx < c.instances; ++idx) {
      const Instance inst = make_instance(c, idx);
      for (int i = 0; i < c.speakers; ++i) {
        const SegmentErrorStats d = segment_mse(inst.v[i], inst.vd[i]);
        pd[idx].insert(pd[idx].end(), d.mse.begin(), d.mse.end());
        const Spectrogram Vd = stft(inst.vd[i], c.spectral);
        const Spectrogram Vg = stft(inst.vg[i], c.spectral);
        const TimeSignal vg_al = istft(apply_alignment(Vg, align(Vd, Vg)));
        const SegmentErrorStats g = segment_mse(inst.v[i], vg_al);
        pg[idx].insert(pg[idx].end(), g.mse.begin(), g.mse.end());
      }
    }
    det->clear();
    gen->clear();
    for (int idx = 0; idx < c.instances; ++idx) {
      det->insert(det->end(), pd[idx].begin(), pd[idx].end());
      gen->insert(gen->end(), pg[idx].begin(), pg[idx].end());
    }
  };

  MseParityReport rep;
  rep.threshold = base.mse_w1_threshold;
  std::vector<double> det_pool, gen_pool;

  pools(0.0, &det_pool, &gen_pool);
  const double det_mean = mean(det_pool);
  double lo = 0.0, lo_mean = mean(gen_pool);
  rep.det_mean = det_mean;
  if (lo_mean > det_mean * (1.0 + rel_tol)) {
    // Griffin-Lim floor already above target: no noise level can equalize.
    rep.sigma2 = 0.0;
    rep.gen_mean = lo_mean;
    rep.w1 = wasserstein1(det_pool, gen_pool);
    rep.w1_rel = det_mean > 0.0 ? rep.w1 / det_mean : 0.0;
    rep.converged = false;
    return rep;
  }

  double hi = std::max(det_mean, 1e-6), hi_mean = 0.0;
  for (int g = 0; g < 16; ++g) {
    pools(hi, &det_pool, &gen_pool);
    hi_mean = mean(gen_pool);
    if (hi_mean > det_mean) break;
    hi *= 4.0;
  }
  double s2 = hi, s2_mean = hi_mean;
  for (int it = 0; it < max_iter; ++it) {
    if (std::fabs(s2_mean - det_mean) <= rel_tol * det_mean) break;
    const double mid = 0.5 * (lo + hi);
    pools(mid, &det_pool, &gen_pool);
    const double m = mean(gen_pool);
    if (m < det_mean) {
      lo = mid;
      lo_mean = m;
    } else {
      hi = mid;
      hi_mean = m;
    }
    s2 = mid;
    s2_mean = m;
  }
  // Final pools at the chosen variance (the loop may exit on the bracket).
  pools(s2, &det_pool, &gen_pool);
  rep.sigma2 = s2;
  rep.gen_mean = mean(gen_pool);
  rep.w1 = wasserstein1(det_pool, gen_pool);
  rep.w1_rel = det_mean > 0.0 ? rep.w1 / det_mean : 0.0;
  rep.converged = std::fabs(rep.gen_mean - det_mean) <= 0.2 * det_mean;
  return rep;
}

}  // namespace fusesep
