// Copyright 2026 The fusesep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstddef>
#include <vector>

namespace fusesep {

// Dense row-major C x H x W tensor of doubles.  H maps to frequency bins and
// W to frames everywhere in this codebase.
struct Tensor3 {
  int c = 0, h = 0, w = 0;
  std::vector<double> v;

  Tensor3() = default;
  Tensor3(int C, int H, int W) : c(C), h(H), w(W), v(size_t(C) * H * W, 0.0) {}

  double& at(int ci, int hi, int wi) { return v[(size_t(ci) * h + hi) * w + wi]; }
  double at(int ci, int hi, int wi) const { return v[(size_t(ci) * h + hi) * w + wi]; }

  size_t size() const { return v.size(); }
  bool same_shape(const Tensor3& o) const { return c == o.c && h == o.h && w == o.w; }
};

}  // namespace fusesep
