// Copyright 2026 The fusesep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include "fusesep/bounds.hpp"
#include "fusesep/fusion.hpp"
#include "fusesep/spectral.hpp"
#include "fusesep/tensor.hpp"

// Slow, obviously-correct serial counterparts of the parallel kernels.
// stft/istft use direct DFT sums (different rounding, compared with a
// tolerance); conv3x3 and mi_laplace_awgn repeat the exact accumulation
// order of the parallel versions, so those pairs must match bit for bit.
namespace fusesep::ref {

Spectrogram stft(const TimeSignal& x, const SpectralConfig& cfg);
TimeSignal istft(const Spectrogram& S);

Tensor3 conv3x3_apply(const ConvLayer& L, const Tensor3& x);

double mi_laplace_awgn(double sigma2, const QuadratureSpec& q = QuadratureSpec());

}  // namespace fusesep::ref
