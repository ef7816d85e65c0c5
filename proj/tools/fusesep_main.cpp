// Copyright 2026 The fusesep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fusesep/alignment.hpp"
#include "fusesep/bounds.hpp"
#include "fusesep/common.hpp"
#include "fusesep/csv_io.hpp"
#include "fusesep/fusion.hpp"
#include "fusesep/metrics.hpp"
#include "fusesep/spectral.hpp"
#include "fusesep/synthbench.hpp"
#include "fusesep/wav_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace fusesep;

namespace {

// ---------------------------------------------------------------------------
// JSON config file: sections spectral / mel / train / bench / bounds,
// unknown keys rejected at every level, CLI flags override file values.

void check_keys(const json& j, std::initializer_list<const char*> allowed,
                const std::string& where) {
  if (!j.is_object()) throw InvalidConfig("config section '" + where + "' must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* a : allowed)
      if (it.key() == a) {
        ok = true;
        break;
      }
    if (!ok) throw InvalidConfig("unknown key '" + it.key() + "' in config section " + where);
  }
}

struct FileConfig {
  SpectralConfig spectral;
  MelConfig mel;
  TrainConfig train;
  BenchConfig bench;
  BoundInputs bounds;
  bool loaded = false;
};

void parse_spectral(const json& j, SpectralConfig* c) {
  check_keys(j, {"sample_rate", "n_fft", "hop", "window"}, "spectral");
  if (j.contains("sample_rate")) c->sample_rate = j.at("sample_rate").get<int>();
  if (j.contains("n_fft")) c->n_fft = j.at("n_fft").get<int>();
  if (j.contains("hop")) c->hop = j.at("hop").get<int>();
  if (j.contains("window")) c->window = j.at("window").get<std::string>();
}

void parse_mel(const json& j, MelConfig* c) {
  check_keys(j, {"n_mels", "f_min", "f_max"}, "mel");
  if (j.contains("n_mels")) c->n_mels = j.at("n_mels").get<int>();
  if (j.contains("f_min")) c->f_min = j.at("f_min").get<double>();
  if (j.contains("f_max")) c->f_max = j.at("f_max").get<double>();
}

void parse_train(const json& j, TrainConfig* c) {
  check_keys(j, {"learning_rate", "batch_size", "epochs", "seed", "hidden"}, "train");
  if (j.contains("learning_rate")) c->learning_rate = j.at("learning_rate").get<double>();
  if (j.contains("batch_size")) c->batch_size = j.at("batch_size").get<int>();
  if (j.contains("epochs")) c->epochs = j.at("epochs").get<int>();
  if (j.contains("seed")) c->seed = j.at("seed").get<uint64_t>();
  if (j.contains("hidden")) c->hidden = j.at("hidden").get<std::vector<int>>();
}

void parse_bench(const json& j, BenchConfig* c) {
  check_keys(j,
             {"C", "n_instances", "duration_s", "snr_range_db", "det_sim", "gen_sim",
              "oracle_lambda", "mse_w1_threshold", "seed"},
             "bench");
  if (j.contains("C")) c->speakers = j.at("C").get<int>();
  if (j.contains("n_instances")) c->instances = j.at("n_instances").get<int>();
  if (j.contains("duration_s")) c->duration_s = j.at("duration_s").get<double>();
  if (j.contains("snr_range_db")) {
    const auto r = j.at("snr_range_db").get<std::vector<double>>();
    if (r.size() != 2) throw InvalidConfig("snr_range_db must be [min, max]");
    c->snr_min_db = r[0];
    c->snr_max_db = r[1];
  }
  if (j.contains("det_sim")) {
    const json& d = j.at("det_sim");
    check_keys(d, {"leakage_db", "burst_rate", "burst_gain"}, "bench.det_sim");
    if (d.contains("leakage_db")) c->det_sim.leakage_db = d.at("leakage_db").get<double>();
    if (d.contains("burst_rate")) c->det_sim.burst_rate = d.at("burst_rate").get<double>();
    if (d.contains("burst_gain")) c->det_sim.burst_gain = d.at("burst_gain").get<double>();
  }
  if (j.contains("gen_sim")) {
    const json& g = j.at("gen_sim");
    check_keys(g, {"sigma2", "griffin_lim_iters"}, "bench.gen_sim");
    if (g.contains("sigma2")) c->gen_sim.sigma2 = g.at("sigma2").get<double>();
    if (g.contains("griffin_lim_iters"))
      c->gen_sim.griffin_lim_iters = g.at("griffin_lim_iters").get<int>();
  }
  if (j.contains("oracle_lambda")) c->oracle_lambda = j.at("oracle_lambda").get<double>();
  if (j.contains("mse_w1_threshold"))
    c->mse_w1_threshold = j.at("mse_w1_threshold").get<double>();
  if (j.contains("seed")) c->seed = j.at("seed").get<uint64_t>();
}

void parse_bounds(const json& j, BoundInputs* c) {
  check_keys(j, {"L", "w", "var_v", "mi_ref"}, "bounds");
  if (j.contains("L")) c->L = j.at("L").get<double>();
  if (j.contains("w")) c->w = j.at("w").get<double>();
  if (j.contains("var_v")) c->var_v = j.at("var_v").get<double>();
  if (j.contains("mi_ref")) c->mi_ref = j.at("mi_ref").get<double>();
}

FileConfig load_config(const std::string& path) {
  FileConfig cfg;
  bool has_spectral = false, has_mel = false;
  if (!path.empty()) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open config file: " + path);
    json j;
    try {
      f >> j;
    } catch (const json::exception& e) {
      throw InvalidConfig(std::string("config is not valid JSON: ") + e.what());
    }
    try {
      check_keys(j, {"spectral", "mel", "train", "bench", "bounds"}, "(top level)");
      if (j.contains("spectral")) parse_spectral(j.at("spectral"), &cfg.spectral);
      if (j.contains("mel")) parse_mel(j.at("mel"), &cfg.mel);
      if (j.contains("train")) parse_train(j.at("train"), &cfg.train);
      if (j.contains("bench")) parse_bench(j.at("bench"), &cfg.bench);
      if (j.contains("bounds")) parse_bounds(j.at("bounds"), &cfg.bounds);
    } catch (const json::exception& e) {
      throw InvalidConfig(std::string("bad config value: ") + e.what());
    }
    has_spectral = j.contains("spectral");
    has_mel = j.contains("mel");
    cfg.loaded = true;
  }
  if (has_spectral) {
    cfg.train.spectral = cfg.spectral;
    cfg.bench.spectral = cfg.spectral;
  } else {
    // the combiner trains on bench-made data, so it must analyze with the
    // bench windows unless the file pins something else
    cfg.train.spectral = cfg.bench.spectral;
    cfg.spectral = cfg.bench.spectral;
  }
  if (has_mel) cfg.bench.mel = cfg.mel;
  else cfg.mel = cfg.bench.mel;
  return cfg;
}

void write_text(const std::string& path, const std::string& body) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot write: " + path);
  f << body;
  if (!f) throw DataError("short write: " + path);
}

void write_json(const std::string& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

// Two estimates of one scene must agree on rate and length before fusion.
void check_same_shape(const TimeSignal& a, const TimeSignal& b, const char* what) {
  if (a.sample_rate != b.sample_rate)
    throw InvalidInput(std::string("sample-rate mismatch between inputs (") + what + ")");
  if (a.samples.size() != b.samples.size())
    throw InvalidInput(std::string("length mismatch between inputs (") + what + ")");
}

SpectralConfig adopt_rate(const FileConfig& cfg, const TimeSignal& x) {
  SpectralConfig sc = cfg.spectral;
  if (!cfg.loaded) {
    sc.sample_rate = x.sample_rate;  // default config follows the input file
  } else if (sc.sample_rate != x.sample_rate) {
    throw InvalidInput("input sample rate does not match the configured sample_rate");
  }
  return sc;
}

// ---------------------------------------------------------------------------
// subcommand bodies

struct FuseOpts {
  std::string vd, vg, ref, params, config;
  std::string strategy;
  std::string out = "fused.wav";
  std::string metrics_path;
  std::string wav_format = "pcm16";
  double lambda = 0.0;
};

int run_fuse(const FuseOpts& o) {
  const FileConfig cfg = load_config(o.config);
  const TimeSignal vd = read_wav(o.vd);
  const TimeSignal vg = read_wav(o.vg);
  check_same_shape(vd, vg, "vd vs vg");
  const SpectralConfig sc = adopt_rate(cfg, vd);

  const Spectrogram Vd = stft(vd, sc), Vg = stft(vg, sc);
  TimeSignal fused;
  if (o.strategy == "xcorr") {
    fused = xcorr_fuse(Vd, Vg);
  } else if (o.strategy == "oracle") {
    if (o.ref.empty()) throw InvalidConfig("strategy=oracle requires --ref");
    const TimeSignal ref = read_wav(o.ref);
    check_same_shape(vd, ref, "vd vs ref");
    fused = apply_fusion(Vd, Vg, oracle_weights(Vd, Vg, stft(ref, sc), o.lambda));
  } else {  // learned
    if (o.params.empty()) throw InvalidConfig("strategy=learned requires --params");
    const CombinerParams p = load_combiner(o.params);
    Tensor3 d1, d2;
    combiner_forward(magnitude_features(Vd, Vg), phase_features(Vd, Vg), p, &d1, &d2);
    fused = apply_fusion(Vd, Vg, weights_from_heads(d1, d2));
  }
  write_wav(o.out, fused, o.wav_format);
  std::printf("wrote %s (strategy=%s, %zu samples @ %d Hz)\n", o.out.c_str(),
              o.strategy.c_str(), fused.samples.size(), fused.sample_rate);

  if (!o.ref.empty()) {
    const TimeSignal ref = read_wav(o.ref);
    check_same_shape(vd, ref, "vd vs ref");
    const double si = si_sdr(ref, fused), sd = sdr(ref, fused);
    std::printf("si_sdr_db = %.6f\nsdr_db = %.6f\n", si, sd);
    if (!o.metrics_path.empty()) {
      json m;
      m["strategy"] = o.strategy;
      m["si_sdr_db"] = si;
      m["sdr_db"] = sd;
      write_json(o.metrics_path, m);
    }
  } else if (!o.metrics_path.empty()) {
    throw InvalidConfig("--metrics needs --ref to compare against");
  }
  return 0;
}

struct BoundsOpts {
  std::string config, json_path;
  double L = 1.0, w = 1.0, var_v = 1.0, mi_ref = 1.0;
  bool classical = false, generative = false;
  const CLI::App* sub = nullptr;
};

int run_bounds(const BoundsOpts& o) {
  BoundInputs b = load_config(o.config).bounds;
  if (o.sub->count("--L")) b.L = o.L;
  if (o.sub->count("--w")) b.w = o.w;
  if (o.sub->count("--var")) b.var_v = o.var_v;
  if (o.sub->count("--mi-ref")) b.mi_ref = o.mi_ref;
  const bool both = !o.classical && !o.generative;
  json j;
  if (o.classical || both) {
    const double c = classical_sdr_bound(b);
    std::printf("classical_sdr_bound_db = %.6f\n", c);
    j["classical_db"] = c;
  }
  if (o.generative || both) {
    const double g = generative_sdr_bound(b);
    std::printf("generative_sdr_bound_db = %.6f\n", g);
    j["generative_db"] = g;
  }
  if (!o.json_path.empty()) write_json(o.json_path, j);
  return 0;
}

struct RhoOpts {
  std::string sigma2_list, out = "rho.csv";
  double grid_start = 1e-4, grid_stop = 10.0;
  int grid_points = 25;
  double mi_ref = 0.0;  // 0 -> default calibration
  int quad_points = 0;
  bool no_plot = false;
};

int run_rho(const RhoOpts& o) {
  std::vector<double> grid;
  if (!o.sigma2_list.empty()) {
    std::string tok;
    for (char c : o.sigma2_list + ",") {
      if (c == ',') {
        if (!tok.empty()) grid.push_back(std::stod(tok));
        tok.clear();
      } else {
        tok += c;
      }
    }
  } else {
    if (o.grid_points < 2) throw InvalidConfig("--grid-points must be >= 2");
    if (!(o.grid_start > 0.0) || !(o.grid_stop > o.grid_start))
      throw InvalidConfig("need 0 < grid start < stop");
    const double l0 = std::log10(o.grid_start), l1 = std::log10(o.grid_stop);
    for (int i = 0; i < o.grid_points; ++i)
      grid.push_back(std::pow(10.0, l0 + (l1 - l0) * double(i) / double(o.grid_points - 1)));
  }
  QuadratureSpec q;
  q.points_override = o.quad_points;
  const double ref = o.mi_ref > 0.0 ? o.mi_ref : default_mi_ref(q);
  const std::vector<RhoPoint> curve = rho_curve(grid, ref, q);

  std::string csv = csv_row({"sigma2", "mi_nats", "rho"});
  for (const RhoPoint& p : curve)
    csv += csv_row({fmt_double(p.sigma2), fmt_double(mi_laplace_awgn(p.sigma2, q)),
                    fmt_double(p.rho)});
  write_text(o.out, csv);
  std::printf("mi_ref = %.12f nats\nwrote %s (%zu points)\n", ref, o.out.c_str(), curve.size());

  if (!o.no_plot) {
    const std::string py = "#!/usr/bin/env python3\n"
        "import csv, sys\n"
        "import matplotlib.pyplot as plt\n\n"
        "path = sys.argv[1] if len(sys.argv) > 1 else '" + o.out + "'\n"
        "s2, rho = [], []\n"
        "with open(path, newline='') as f:\n"
        "    for row in csv.DictReader(f):\n"
        "        s2.append(float(row['sigma2']))\n"
        "        rho.append(float(row['rho']))\n"
        "plt.semilogx(s2, rho, marker='o')\n"
        "plt.xlabel('sigma^2')\n"
        "plt.ylabel('rho')\n"
        "plt.grid(True, which='both', alpha=0.3)\n"
        "plt.tight_layout()\n"
        "plt.savefig(path + '.png', dpi=150)\n"
        "print('wrote', path + '.png')\n";
    write_text(o.out + ".plot.py", py);
  }
  return 0;
}

struct BenchOpts {
  std::string config, out_dir = ".", params;
  bool dump_wavs = false, calibrate = false;
  uint64_t seed = 0;
  int instances = 0;
  const CLI::App* sub = nullptr;
};

int run_bench(const BenchOpts& o) {
  FileConfig cfg = load_config(o.config);
  BenchConfig bc = cfg.bench;
  if (o.sub->count("--seed")) bc.seed = o.seed;
  if (o.sub->count("--instances")) bc.instances = o.instances;
  bc.keep_first_instance = o.dump_wavs;

  fs::create_directories(o.out_dir);
  const auto path = [&o](const char* name) { return (fs::path(o.out_dir) / name).string(); };

  if (o.calibrate) {
    const MseParityReport cal = calibrate_mse_parity(bc);
    std::printf("calibration: sigma2 = %.8g, det mean mse = %.6g, gen mean mse = %.6g, "
                "w1 = %.6g (rel %.4f, threshold %.4f), converged = %s\n",
                cal.sigma2, cal.det_mean, cal.gen_mean, cal.w1, cal.w1_rel, cal.threshold,
                cal.converged ? "yes" : "no");
    json j;
    j["sigma2"] = cal.sigma2;
    j["det_mean_mse"] = cal.det_mean;
    j["gen_mean_mse"] = cal.gen_mean;
    j["w1"] = cal.w1;
    j["w1_rel"] = cal.w1_rel;
    j["threshold"] = cal.threshold;
    j["converged"] = cal.converged;
    write_json(path("calibration.json"), j);
    if (!cal.converged)
      throw DataError("mse parity calibration did not converge; adjust det_sim/gen_sim");
    bc.gen_sim.sigma2 = cal.sigma2;
  }

  CombinerParams params;
  const CombinerParams* pp = nullptr;
  if (!o.params.empty()) {
    params = load_combiner(o.params);
    pp = &params;
  }

  const BenchReport rep = run_benchmark(bc, pp);
  write_text(path("report.csv"), rep.report_csv);
  write_text(path("summary.csv"), rep.summary_csv);
  write_text(path("mse_hist.csv"), rep.hist_csv);
  if (o.dump_wavs)
    for (const auto& [name, wav] : rep.first_instance_wavs)
      write_wav(path((name + ".wav").c_str()), wav, "float32");

  std::printf("%-14s %14s %14s %14s\n", "strategy", "mean si-sdr", "median si-sdri",
              "mean sdr");
  for (const StrategyStats& st : rep.stats)
    std::printf("%-14s %14.4f %14.4f %14.4f\n", st.strategy.c_str(), st.mean_si_sdr,
                st.median_si_sdri, st.mean_sdr);
  std::printf("segment mse: det mean %.6g, gen mean %.6g, w1 %.6g (rel %.4f)\n",
              rep.mse_det_mean, rep.mse_gen_mean, rep.mse_w1, rep.mse_w1_rel);
  // wall time goes to stdout only; the CSVs stay bit-reproducible
  std::printf("wall time: %.2f s\n", rep.wall_seconds);
  return 0;
}

struct TrainOpts {
  std::string config, out = "combiner.json", log_path;
  int epochs = -1;
  const CLI::App* sub = nullptr;
};

int run_train(const TrainOpts& o) {
  FileConfig cfg = load_config(o.config);
  if (o.sub->count("--epochs")) cfg.train.epochs = o.epochs;
  const std::vector<TrainExample> dataset = make_dataset(cfg.bench);
  std::vector<TrainLogRow> log;
  const CombinerParams p = train_combiner(dataset, cfg.train, &log);
  save_combiner(o.out, p);
  std::printf("wrote %s (%zu parameters, %d epochs, %zu examples)\n", o.out.c_str(),
              param_count(p), cfg.train.epochs, dataset.size());
  if (!log.empty())
    std::printf("final epoch mean si-sdr: %.4f dB\n", log.back().mean_si_sdr);
  if (!o.log_path.empty()) {
    std::string csv = csv_row({"epoch", "mean_si_sdr_db"});
    for (const TrainLogRow& r : log) csv += csv_row({fmt_int(r.epoch), fmt_double(r.mean_si_sdr)});
    write_text(o.log_path, csv);
  }
  return 0;
}

struct MetricsOpts {
  std::string ref, est, mix_path, json_path, config;
  bool align_first = false;
};

int run_metrics(const MetricsOpts& o) {
  const TimeSignal ref = read_wav(o.ref);
  TimeSignal est = read_wav(o.est);
  check_same_shape(ref, est, "ref vs est");
  if (o.align_first) {
    // delay-compensate the estimate against the reference before scoring
    const SpectralConfig sc = adopt_rate(load_config(o.config), ref);
    const Spectrogram R = stft(ref, sc), E = stft(est, sc);
    est = istft(apply_alignment(E, align(R, E)), sc);
  }
  const double si = si_sdr(ref, est), sd = sdr(ref, est);
  const SegmentErrorStats seg = segment_mse(ref, est);
  const double seg_mean = mean(seg.mse), seg_median = median(seg.mse);
  std::printf("si_sdr_db = %.6f\nsdr_db = %.6f\nsegment_mse_mean = %.8g\n"
              "segment_mse_median = %.8g\n",
              si, sd, seg_mean, seg_median);
  json j;
  j["si_sdr_db"] = si;
  j["sdr_db"] = sd;
  j["segment_mse_mean"] = seg_mean;
  j["segment_mse_median"] = seg_median;
  if (!o.mix_path.empty()) {
    const TimeSignal m = read_wav(o.mix_path);
    check_same_shape(ref, m, "ref vs mix");
    const double imp = si_sdri(ref, est, m);
    std::printf("si_sdri_db = %.6f\n", imp);
    j["si_sdri_db"] = imp;
  }
  if (!o.json_path.empty()) write_json(o.json_path, j);
  return 0;
}

struct AlignOpts {
  std::string vd, vg, config, out, csv_path;
  std::string wav_format = "pcm16";
};

int run_align(const AlignOpts& o) {
  const FileConfig cfg = load_config(o.config);
  const TimeSignal vd = read_wav(o.vd);
  const TimeSignal vg = read_wav(o.vg);
  check_same_shape(vd, vg, "vd vs vg");
  const SpectralConfig sc = adopt_rate(cfg, vd);
  const Spectrogram Vd = stft(vd, sc), Vg = stft(vg, sc);
  const AlignmentResult ar = align(Vd, Vg);

  std::vector<double> dl(ar.delays.begin(), ar.delays.end());
  std::printf("frames = %d, median delay = %g samples\n", ar.frames, median(dl));
  if (!o.out.empty()) {
    write_wav(o.out, istft(apply_alignment(Vg, ar), sc), o.wav_format);
    std::printf("wrote %s\n", o.out.c_str());
  }
  if (!o.csv_path.empty()) {
    std::string csv = csv_row({"frame", "delay_samples"});
    for (size_t k = 0; k < ar.delays.size(); ++k)
      csv += csv_row({fmt_int(long(k)), fmt_int(ar.delays[k])});
    write_text(o.csv_path, csv);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fusesep: frequency-domain fusion of a deterministic source-separation estimate "
               "with a phase-unsynchronized generative estimate, plus the matching "
               "information-theoretic bound calculators and a synthetic benchmark."};
  app.require_subcommand(1);
  app.footer("Config file: JSON with sections spectral{sample_rate,n_fft,hop,window}, "
             "mel{n_mels,f_min,f_max}, train{learning_rate,batch_size,epochs,seed,hidden}, "
             "bench{C,n_instances,duration_s,snr_range_db,det_sim{leakage_db,burst_rate,"
             "burst_gain},gen_sim{sigma2,griffin_lim_iters},oracle_lambda,mse_w1_threshold,"
             "seed}, bounds{L,w,var_v,mi_ref}. Unknown keys are rejected; flags override "
             "file values. FUSESEP_THREADS caps bench parallelism.\n"
             "Exit codes: 0 success, 2 usage/config error, 3 data error.");

  int rc = 0;

  FuseOpts fo;
  CLI::App* fuse = app.add_subcommand("fuse", "fuse two estimate WAVs into one");
  fuse->add_option("--vd", fo.vd, "deterministic estimate WAV")->required();
  fuse->add_option("--vg", fo.vg, "generative estimate WAV")->required();
  fuse->add_option("--strategy", fo.strategy, "xcorr | oracle | learned")
      ->required()
      ->check(CLI::IsMember({"xcorr", "oracle", "learned"}));
  fuse->add_option("--ref", fo.ref, "ground-truth WAV (required for oracle; enables metrics)");
  fuse->add_option("--params", fo.params, "combiner checkpoint (required for learned)");
  fuse->add_option("--out", fo.out, "output WAV path (default fused.wav)");
  fuse->add_option("--metrics", fo.metrics_path, "write metrics JSON here (needs --ref)");
  fuse->add_option("--config", fo.config, "JSON config file");
  fuse->add_option("--lambda", fo.lambda, "oracle ridge weight (default 0)");
  fuse->add_option("--wav-format", fo.wav_format, "pcm16 | float32")
      ->check(CLI::IsMember({"pcm16", "float32"}));
  fuse->callback([&] { rc = run_fuse(fo); });

  BoundsOpts bo;
  CLI::App* bounds = app.add_subcommand("bounds", "classical/generative SDR upper bounds");
  bounds->add_option("--L", bo.L, "signal length (samples)");
  bounds->add_option("--w", bo.w, "window length (samples)");
  bounds->add_option("--var", bo.var_v, "source variance");
  bounds->add_option("--mi-ref", bo.mi_ref, "reference mutual information (nats)");
  bounds->add_flag("--classical", bo.classical, "print only the classical bound");
  bounds->add_flag("--generative", bo.generative, "print only the generative bound");
  bounds->add_option("--json", bo.json_path, "write the bounds to this JSON file");
  bounds->add_option("--config", bo.config, "JSON config file (bounds section)");
  bo.sub = bounds;
  bounds->callback([&] { rc = run_bounds(bo); });

  RhoOpts ro;
  CLI::App* rho = app.add_subcommand("rho", "rho(sigma2) usable-information curve CSV");
  rho->add_option("--sigma2", ro.sigma2_list, "comma-separated sigma2 values (overrides grid)");
  rho->add_option("--grid-start", ro.grid_start, "log grid start (default 1e-4)");
  rho->add_option("--grid-stop", ro.grid_stop, "log grid stop (default 10)");
  rho->add_option("--grid-points", ro.grid_points, "log grid size (default 25)");
  rho->add_option("--mi-ref", ro.mi_ref,
                  "reference MI in nats (default: MI at sigma2=1e-2, making rho(<=1e-2)=1)");
  rho->add_option("--quad-points", ro.quad_points, "override quadrature grid size");
  rho->add_option("--out", ro.out, "output CSV (default rho.csv)");
  rho->add_flag("--no-plot", ro.no_plot, "skip writing the companion plot script");
  rho->callback([&] { rc = run_rho(ro); });

  BenchOpts eo;
  CLI::App* bench = app.add_subcommand("bench", "synthetic fusion benchmark -> 3 CSV reports");
  bench->add_option("--config", eo.config, "JSON config file (bench section)");
  bench->add_option("--out-dir", eo.out_dir, "directory for report CSVs (default .)");
  bench->add_option("--params", eo.params, "combiner checkpoint enabling the learned strategy");
  bench->add_flag("--dump-wavs", eo.dump_wavs, "write instance 0 WAVs next to the reports");
  bench->add_flag("--calibrate", eo.calibrate,
                  "equalize mean segment MSE over sigma2 before the run");
  bench->add_option("--seed", eo.seed, "override bench seed");
  bench->add_option("--instances", eo.instances, "override instance count");
  eo.sub = bench;
  bench->callback([&] { rc = run_bench(eo); });

  TrainOpts to;
  CLI::App* train = app.add_subcommand("train", "train a combiner on synthetic mixtures");
  train->add_option("--config", to.config, "JSON config file (train + bench sections)");
  train->add_option("--out", to.out, "checkpoint path (default combiner.json)");
  train->add_option("--log", to.log_path, "write per-epoch mean SI-SDR CSV here");
  train->add_option("--epochs", to.epochs, "override epoch count");
  to.sub = train;
  train->callback([&] { rc = run_train(to); });

  MetricsOpts mo;
  CLI::App* metrics = app.add_subcommand("metrics", "SI-SDR / SDR / segment MSE of est vs ref");
  metrics->add_option("--ref", mo.ref, "reference WAV")->required();
  metrics->add_option("--est", mo.est, "estimate WAV")->required();
  metrics->add_option("--mix", mo.mix_path, "mixture WAV (adds SI-SDRi)");
  metrics->add_option("--json", mo.json_path, "write metrics JSON here");
  metrics->add_flag("--align-first", mo.align_first,
                    "delay-compensate est against ref before scoring");
  metrics->add_option("--config", mo.config, "JSON config file");
  metrics->callback([&] { rc = run_metrics(mo); });

  AlignOpts ao;
  CLI::App* align = app.add_subcommand("align", "per-frame delay alignment of vg against vd");
  align->add_option("--vd", ao.vd, "reference-phase estimate WAV")->required();
  align->add_option("--vg", ao.vg, "estimate WAV to align")->required();
  align->add_option("--out", ao.out, "write the aligned waveform here");
  align->add_option("--csv", ao.csv_path, "write per-frame delays CSV here");
  align->add_option("--config", ao.config, "JSON config file");
  align->add_option("--wav-format", ao.wav_format, "pcm16 | float32")
      ->check(CLI::IsMember({"pcm16", "float32"}));
  align->callback([&] { rc = run_align(ao); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const InvalidConfig& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const InvalidInput& e) {
    std::fprintf(stderr, "input error: %s\n", e.what());
    return 3;
  } catch (const DataError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
  return rc;
}
