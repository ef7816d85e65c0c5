// Copyright 2026 The fusesep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "fusesep/common.hpp"
#include "fusesep/csv_io.hpp"
#include "fusesep/fft.hpp"
#include "fusesep/rng.hpp"
#include "fusesep/wav_io.hpp"

using namespace fusesep;

namespace {

std::string tmp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("fusesep_core_" + name)).string();
}

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  REQUIRE(f.good());
  return std::string(std::istreambuf_iterator<char>(f), {});
}

void spit(const std::string& path, const std::string& bytes) {
  std::ofstream f(path, std::ios::binary);
  f.write(bytes.data(), std::streamsize(bytes.size()));
  REQUIRE(f.good());
}

}  // namespace

TEST_CASE("rng: identical seeds give identical streams") {
  Rng a(1234), b(1234);
  for (int i = 0; i < 1000; ++i) {
    CHECK(a.bits() == b.bits());
  }
  Rng c(1234), d(1235);
  int differ = 0;
  for (int i = 0; i < 64; ++i) differ += (c.bits() != d.bits());
  CHECK(differ > 60);
}

TEST_CASE("rng: derive_seed decorrelates streams") {
  CHECK(derive_seed(42, 0) == derive_seed(42, 0));
  CHECK(derive_seed(42, 0) != derive_seed(42, 1));
  CHECK(derive_seed(42, 0) != derive_seed(43, 0));
  // no collisions across a modest index range
  std::vector<uint64_t> seen;
  for (uint64_t i = 0; i < 4096; ++i) seen.push_back(derive_seed(7, i));
  std::sort(seen.begin(), seen.end());
  CHECK(std::adjacent_find(seen.begin(), seen.end()) == seen.end());
}

TEST_CASE("rng: uniform range and moments") {
  Rng r(5);
  const int n = 200000;
  double s = 0, s2 = 0;
  for (int i = 0; i < n; ++i) {
    double u = r.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    s += u;
    s2 += u * u;
  }
  double m = s / n, var = s2 / n - m * m;
  CHECK(m == doctest::Approx(0.5).epsilon(0.01));
  CHECK(var == doctest::Approx(1.0 / 12.0).epsilon(0.02));
}

TEST_CASE("rng: normal and laplace moments") {
  Rng r(17);
  const int n = 200000;
  double s = 0, s2 = 0;
  for (int i = 0; i < n; ++i) {
    double x = r.normal();
    s += x;
    s2 += x * x;
  }
  CHECK(s / n == doctest::Approx(0.0).epsilon(0.02));
  CHECK(s2 / n == doctest::Approx(1.0).epsilon(0.02));

  // laplace(b) has variance 2 b^2
  double b = 0.7, ls = 0, ls2 = 0;
  for (int i = 0; i < n; ++i) {
    double x = r.laplace(b);
    ls += x;
    ls2 += x * x;
  }
  CHECK(ls / n == doctest::Approx(0.0).epsilon(0.03));
  CHECK(ls2 / n == doctest::Approx(2 * b * b).epsilon(0.03));
}

TEST_CASE("rng: poisson mean and edge cases") {
  Rng r(9);
  const int n = 100000;
  long total = 0;
  for (int i = 0; i < n; ++i) total += r.poisson(3.0);
  CHECK(double(total) / n == doctest::Approx(3.0).epsilon(0.02));
  CHECK(r.poisson(0.0) == 0);
  CHECK_THROWS_AS(r.poisson(-1.0), InvalidInput);
}

TEST_CASE("rng: uniform_int bounds and bias") {
  Rng r(3);
  std::vector<int> counts(7, 0);
  const int n = 70000;
  for (int i = 0; i < n; ++i) {
    int k = r.uniform_int(7);
    REQUIRE(k >= 0);
    REQUIRE(k < 7);
    counts[size_t(k)]++;
  }
  for (int c : counts) CHECK(double(c) == doctest::Approx(n / 7.0).epsilon(0.05));
  CHECK_THROWS_AS(r.uniform_int(0), InvalidInput);
}

TEST_CASE("rng: shuffle is a permutation and seed-stable") {
  std::vector<int> v(100);
  for (int i = 0; i < 100; ++i) v[size_t(i)] = i;
  std::vector<int> w = v;
  Rng a(88), b(88);
  a.shuffle(v);
  b.shuffle(w);
  CHECK(v == w);
  std::sort(v.begin(), v.end());
  for (int i = 0; i < 100; ++i) CHECK(v[size_t(i)] == i);
}

TEST_CASE("fft: known 4-point transforms") {
  // x = [1,0,0,0] -> X[k] = 1 for all k
  double x0[4] = {1, 0, 0, 0};
  auto X0 = fft::rfft(x0, 4);
  REQUIRE(X0.size() == 3);
  for (auto z : X0) {
    CHECK(z.real() == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(z.imag() == doctest::Approx(0.0).epsilon(1e-15));
  }
  // x = [0,1,0,0] -> X[k] = exp(-2*pi*i*k/4): 1, -i, -1
  double x1[4] = {0, 1, 0, 0};
  auto X1 = fft::rfft(x1, 4);
  CHECK(std::abs(X1[0] - std::complex<double>(1, 0)) < 1e-14);
  CHECK(std::abs(X1[1] - std::complex<double>(0, -1)) < 1e-14);
  CHECK(std::abs(X1[2] - std::complex<double>(-1, 0)) < 1e-14);
}

TEST_CASE("fft: roundtrip and parseval on random input") {
  const size_t n = 256;
  Rng r(21);
  std::vector<double> x(n);
  for (double& v : x) v = r.normal();
  auto X = fft::rfft(x.data(), n);
  REQUIRE(X.size() == n / 2 + 1);

  std::vector<double> y(n);
  fft::irfft(X.data(), n, y.data());
  double max_err = 0;
  for (size_t i = 0; i < n; ++i) max_err = std::max(max_err, std::fabs(x[i] - y[i]));
  CHECK(max_err < 1e-12);

  // parseval for the one-sided layout
  double tx = 0;
  for (double v : x) tx += v * v;
  double tf = std::norm(X[0]) + std::norm(X[n / 2]);
  for (size_t k = 1; k < n / 2; ++k) tf += 2.0 * std::norm(X[k]);
  CHECK(tx == doctest::Approx(tf / double(n)).epsilon(1e-12));
}

TEST_CASE("fft: non-power-of-two size is rejected") {
  double x[6] = {1, 2, 3, 4, 5, 6};
  CHECK_THROWS_AS(fft::rfft(x, 6), InvalidInput);
  CHECK(fft::is_pow2(8));
  CHECK(!fft::is_pow2(12));
  CHECK(!fft::is_pow2(0));
}

TEST_CASE("fft: inplace inverse undoes forward") {
  const size_t n = 64;
  Rng r(2);
  std::vector<fft::cd> a(n), orig(n);
  for (size_t i = 0; i < n; ++i) orig[i] = a[i] = {r.normal(), r.normal()};
  fft::fft_inplace(a.data(), n, false);
  fft::fft_inplace(a.data(), n, true);
  for (size_t i = 0; i < n; ++i) CHECK(std::abs(a[i] - orig[i]) < 1e-12);
}

TEST_CASE("csv: escaping rules") {
  CHECK(csv_escape("plain") == "plain");
  CHECK(csv_escape("with,comma") == "\"with,comma\"");
  CHECK(csv_escape("with\"quote") == "\"with\"\"quote\"");
  CHECK(csv_escape("line\nbreak") == "\"line\nbreak\"");
  CHECK(csv_escape("") == "");
  CHECK(csv_row({"a", "b,c", "d"}) == "a,\"b,c\",d\r\n");
}

TEST_CASE("csv: writer/parser roundtrip with hostile fields") {
  std::vector<std::vector<std::string>> rows = {
      {"id", "text", "value"},
      {"1", "comma, inside", "3.5"},
      {"2", "quote \" and\nnewline", "-1"},
      {"3", "", "0"},
  };
  std::string text;
  for (const auto& r : rows) text += csv_row(r);
  auto parsed = parse_csv(text);
  CHECK(parsed == rows);
}

TEST_CASE("csv: %.17g roundtrips doubles exactly") {
  std::vector<double> vals = {0.0,       -0.0,     1.0 / 3.0, 1e-300,
                              6.02e23,   -2.5e-17, 3.14159265358979312,
                              123456789.123456789};
  for (double v : vals) {
    std::string s = fmt_double(v);
    double back = std::strtod(s.c_str(), nullptr);
    CHECK(back == v);
  }
  CHECK(fmt_int(-42) == "-42");
}

TEST_CASE("wav: pcm16 roundtrip within quantization step") {
  TimeSignal x;
  x.sample_rate = 8000;
  Rng r(11);
  x.samples.resize(4000);
  for (double& v : x.samples) v = 0.9 * std::sin(r.uniform(0, 2 * kPi)) * r.uniform();
  const std::string p = tmp_path("rt.wav");
  write_wav(p, x, "pcm16");
  TimeSignal y = read_wav(p);
  REQUIRE(y.sample_rate == 8000);
  REQUIRE(y.samples.size() == x.samples.size());
  double max_err = 0;
  for (size_t i = 0; i < x.samples.size(); ++i)
    max_err = std::max(max_err, std::fabs(x.samples[i] - y.samples[i]));
  // encode rounds x*32767, decode divides by 32768: half an LSB of rounding
  // plus up to |x| <= 1 LSB of scale skew.
  CHECK(max_err <= 1.5 / 32768.0 + 1e-12);
  std::remove(p.c_str());
}

TEST_CASE("wav: float32 roundtrip at single precision") {
  TimeSignal x;
  x.sample_rate = 16000;
  Rng r(12);
  x.samples.resize(1000);
  for (double& v : x.samples) v = 3.0 * r.normal();  // float32 is not clamped
  const std::string p = tmp_path("rtf.wav");
  write_wav(p, x, "float32");
  TimeSignal y = read_wav(p);
  REQUIRE(y.sample_rate == 16000);
  REQUIRE(y.samples.size() == x.samples.size());
  for (size_t i = 0; i < x.samples.size(); ++i) {
    CHECK(y.samples[i] == doctest::Approx(x.samples[i]).epsilon(1e-6));
    CHECK(float(x.samples[i]) == float(y.samples[i]));  // exact at float32
  }
  std::remove(p.c_str());
}

TEST_CASE("wav: pcm16 clamps out-of-range samples") {
  TimeSignal x;
  x.sample_rate = 8000;
  x.samples = {2.0, -2.0, 0.5};
  const std::string p = tmp_path("clamp.wav");
  write_wav(p, x, "pcm16");
  TimeSignal y = read_wav(p);
  CHECK(y.samples[0] == doctest::Approx(32767.0 / 32768.0).epsilon(1e-9));
  CHECK(y.samples[1] == doctest::Approx(-32767.0 / 32768.0).epsilon(1e-9));
  CHECK(y.samples[2] == doctest::Approx(0.5).epsilon(1e-3));
  std::remove(p.c_str());
}

TEST_CASE("wav: malformed files are rejected with DataError") {
  TimeSignal x;
  x.sample_rate = 8000;
  x.samples.assign(64, 0.25);
  const std::string good = tmp_path("good.wav");
  write_wav(good, x, "pcm16");
  std::string bytes = slurp(good);
  REQUIRE(bytes.size() > 44);

  const std::string bad = tmp_path("bad.wav");

  SUBCASE("wrong magic") {
    bytes[0] = 'X';
    spit(bad, bytes);
    CHECK_THROWS_AS(read_wav(bad), DataError);
  }
  SUBCASE("truncated header") {
    spit(bad, bytes.substr(0, 20));
    CHECK_THROWS_AS(read_wav(bad), DataError);
  }
  SUBCASE("stereo is unsupported") {
    bytes[22] = 2;  // channel count in the canonical fmt chunk
    spit(bad, bytes);
    CHECK_THROWS_AS(read_wav(bad), DataError);
  }
  SUBCASE("missing file") { CHECK_THROWS_AS(read_wav(tmp_path("nope.wav")), DataError); }

  std::remove(good.c_str());
  std::remove(bad.c_str());
}

TEST_CASE("wav: writer input validation") {
  TimeSignal empty;
  empty.sample_rate = 8000;
  CHECK_THROWS_AS(write_wav(tmp_path("e.wav"), empty, "pcm16"), InvalidInput);
  TimeSignal x;
  x.sample_rate = 8000;
  x.samples = {0.1};
  CHECK_THROWS_AS(write_wav(tmp_path("f.wav"), x, "mp3"), InvalidConfig);
}
