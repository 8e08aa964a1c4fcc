#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "rvgen/errors.hpp"

namespace rvgen {

// Dense H x W x C tensor, row-major with the channel index fastest.
// Double precision in memory; file formats quantize to float32 on write.
struct Grid {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<double> data;

  Grid() = default;
  Grid(int h, int w, int c, double fill = 0.0)
      : height(h), width(w), channels(c) {
    if (h <= 0 || w <= 0 || c <= 0)
      throw UsageError("Grid dimensions must be positive");
    data.assign(static_cast<std::size_t>(h) * w * c, fill);
  }

  std::size_t index(int r, int c, int ch) const {
    return (static_cast<std::size_t>(r) * width + c) * channels + ch;
  }
  double& at(int r, int c, int ch) { return data[index(r, c, ch)]; }
  double at(int r, int c, int ch) const { return data[index(r, c, ch)]; }

  std::size_t size() const { return data.size(); }
  bool same_shape(const Grid& o) const {
    return height == o.height && width == o.width && channels == o.channels;
  }
};

// Numerically stable per-pixel softmax over the channel axis.
inline Grid softmax_per_pixel(const Grid& logits) {
  Grid out(logits.height, logits.width, logits.channels);
  for (int r = 0; r < logits.height; ++r) {
    for (int c = 0; c < logits.width; ++c) {
      double mx = logits.at(r, c, 0);
      for (int ch = 1; ch < logits.channels; ++ch)
        if (logits.at(r, c, ch) > mx) mx = logits.at(r, c, ch);
      double sum = 0.0;
      for (int ch = 0; ch < logits.channels; ++ch) {
        double e = std::exp(logits.at(r, c, ch) - mx);
        out.at(r, c, ch) = e;
        sum += e;
      }
      for (int ch = 0; ch < logits.channels; ++ch) out.at(r, c, ch) /= sum;
    }
  }
  return out;
}

// Per-pixel argmax over channels; ties resolve to the lowest index.
inline std::vector<int> argmax_per_pixel(const Grid& probs) {
  std::vector<int> ids(static_cast<std::size_t>(probs.height) * probs.width);
  for (int r = 0; r < probs.height; ++r) {
    for (int c = 0; c < probs.width; ++c) {
      int best = 0;
      double bv = probs.at(r, c, 0);
      for (int ch = 1; ch < probs.channels; ++ch) {
        if (probs.at(r, c, ch) > bv) {
          bv = probs.at(r, c, ch);
          best = ch;
        }
      }
      ids[static_cast<std::size_t>(r) * probs.width + c] = best;
    }
  }
  return ids;
}

}  // namespace rvgen
