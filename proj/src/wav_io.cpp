// Copyright 2026 The fusesep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "fusesep/wav_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

#include "fusesep/common.hpp"

namespace fusesep {

namespace {

uint32_t rd_u32(const unsigned char* p) {
  return uint32_t(p[0]) | uint32_t(p[1]) << 8 | uint32_t(p[2]) << 16 | uint32_t(p[3]) << 24;
}
uint16_t rd_u16(const unsigned char* p) { return uint16_t(p[0]) | uint16_t(p[1]) << 8; }

void wr_u32(std::string* s, uint32_t v) {
  s->push_back(char(v & 0xff));
  s->push_back(char((v >> 8) & 0xff));
  s->push_back(char((v >> 16) & 0xff));
  s->push_back(char((v >> 24) & 0xff));
}
void wr_u16(std::string* s, uint16_t v) {
  s->push_back(char(v & 0xff));
  s->push_back(char((v >> 8) & 0xff));
}

}  // namespace

TimeSignal read_wav(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open WAV: " + path);
  std::vector<unsigned char> raw((std::istreambuf_iterator<char>(f)),
                                 std::istreambuf_iterator<char>());
  if (raw.size() < 12 || std::memcmp(raw.data(), "RIFF", 4) != 0 ||
      std::memcmp(raw.data() + 8, "WAVE", 4) != 0)
    throw DataError("not a RIFF/WAVE file: " + path);

  uint16_t fmt_tag = 0, channels = 0, bits = 0;
  uint32_t rate = 0;
  bool have_fmt = false;
  const unsigned char* data = nullptr;
  uint32_t data_len = 0;

  size_t off = 12;
  while (off + 8 <= raw.size()) {
    const char* id = reinterpret_cast<const char*>(raw.data() + off);
    const uint32_t sz = rd_u32(raw.data() + off + 4);
    if (off + 8 + sz > raw.size()) throw DataError("truncated WAV chunk: " + path);
    const unsigned char* body = raw.data() + off + 8;
    if (std::memcmp(id, "fmt ", 4) == 0) {
      if (sz < 16) throw DataError("short fmt chunk: " + path);
      fmt_tag = rd_u16(body);
      channels = rd_u16(body + 2);
      rate = rd_u32(body + 4);
      bits = rd_u16(body + 14);
      have_fmt = true;
    } else if (std::memcmp(id, "data", 4) == 0) {
      data = body;
      data_len = sz;
    }
    off += 8 + sz + (sz & 1);  // chunks are word-aligned
  }
  if (!have_fmt || !data) throw DataError("missing fmt or data chunk: " + path);
  if (channels != 1) throw DataError("only mono WAV is supported: " + path);
  if (rate == 0 || rate > 1u << 24) throw DataError("implausible sample rate: " + path);

  TimeSignal x;
  x.sample_rate = int(rate);
  if (fmt_tag == 1 && bits == 16) {
    const size_t n = data_len / 2;
    x.samples.resize(n);
    for (size_t i = 0; i < n; ++i) {
      const int16_t s = int16_t(rd_u16(data + 2 * i));
      x.samples[i] = double(s) / 32768.0;
    }
  } else if (fmt_tag == 3 && bits == 32) {
    const size_t n = data_len / 4;
    x.samples.resize(n);
    for (size_t i = 0; i < n; ++i) {
      const uint32_t u = rd_u32(data + 4 * i);
      float v;
      std::memcpy(&v, &u, 4);
      if (!std::isfinite(v)) throw DataError("non-finite sample in WAV: " + path);
      x.samples[i] = double(v);
    }
  } else {
    throw DataError("unsupported WAV encoding (want PCM16 or float32): " + path);
  }
  if (x.samples.empty()) throw DataError("empty WAV data chunk: " + path);
  return x;
}

void write_wav(const std::string& path, const TimeSignal& x, const std::string& format) {
  if (x.samples.empty()) throw InvalidInput("refusing to write an empty WAV");
  if (x.sample_rate < 1) throw InvalidInput("sample rate must be >= 1");
  const bool pcm = format == "pcm16";
  if (!pcm && format != "float32")
    throw InvalidConfig("unknown WAV format (want pcm16 or float32): " + format);

  std::string payload;
  if (pcm) {
    payload.reserve(2 * x.samples.size());
    for (double v : x.samples) {
      const double c = std::min(1.0, std::max(-1.0, v));
      const long q = std::lround(c * 32767.0);
      wr_u16(&payload, uint16_t(int16_t(q)));
    }
  } else {
    payload.reserve(4 * x.samples.size());
    for (double v : x.samples) {
      const float fv = float(v);
      uint32_t u;
      std::memcpy(&u, &fv, 4);
      wr_u32(&payload, u);
    }
  }

  const uint16_t bytes_per = pcm ? 2 : 4;
  std::string out;
  out += "RIFF";
  wr_u32(&out, uint32_t(4 + 8 + 16 + 8 + payload.size()));
  out += "WAVEfmt ";
  wr_u32(&out, 16);
  wr_u16(&out, pcm ? 1 : 3);
  wr_u16(&out, 1);
  wr_u32(&out, uint32_t(x.sample_rate));
  wr_u32(&out, uint32_t(x.sample_rate) * bytes_per);
  wr_u16(&out, bytes_per);
  wr_u16(&out, uint16_t(bytes_per * 8));
  out += "data";
  wr_u32(&out, uint32_t(payload.size()));
  out += payload;

  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot write WAV: " + path);
  f.write(out.data(), std::streamsize(out.size()));
  if (!f) throw DataError("short write on WAV: " + path);
}

}  // namespace fusesep
