// Copyright 2026 The fusesep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <string>

#include "fusesep/spectral.hpp"

namespace fusesep {

// Mono RIFF/WAVE, PCM16 or IEEE float32.  PCM16 maps to [-1, 1) by /32768;
// anything else (stereo, other depths, broken chunks) is a DataError.
TimeSignal read_wav(const std::string& path);

// format: "pcm16" (clamped to [-1, 1]) or "float32" (verbatim doubles
// narrowed to float).
void write_wav(const std::string& path, const TimeSignal& x, const std::string& format = "pcm16");

}  // namespace fusesep
