#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "scgnet/error.hpp"

namespace scgnet {

/// Row-major matrix of encoded feature vectors.
struct FeatureMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<float> data;

  FeatureMatrix() = default;
  FeatureMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0f) {}

  std::span<float> row(std::size_t i) { return {data.data() + i * cols, cols}; }
  std::span<const float> row(std::size_t i) const { return {data.data() + i * cols, cols}; }

  void append_row(std::span<const float> r) {
    if (rows == 0 && cols == 0) cols = r.size();
    if (r.size() != cols) throw Error(Errc::ShapeMismatch, "row width differs from matrix width");
    data.insert(data.end(), r.begin(), r.end());
    ++rows;
  }

  bool operator==(const FeatureMatrix&) const = default;
};

/// Encoded examples with integer class ids, ready for training.
struct EncodedSet {
  FeatureMatrix x;
  std::vector<int> y;
  /// 1 for rows produced by oversampling.
  std::vector<std::uint8_t> synthetic;
  int n_classes = 2;

  std::size_t size() const { return y.size(); }

  EncodedSet subset(std::span<const std::size_t> idx) const {
    EncodedSet out;
    out.n_classes = n_classes;
    out.x.cols = x.cols;
    out.x.data.reserve(idx.size() * x.cols);
    for (auto i : idx) {
      out.x.append_row(x.row(i));
      out.y.push_back(y[i]);
      out.synthetic.push_back(synthetic.empty() ? 0 : synthetic[i]);
    }
    return out;
  }
};

}  // namespace scgnet
