#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "scgnet/matrix.hpp"
#include "scgnet/model.hpp"
#include "scgnet/rng.hpp"

namespace testsupport {

inline scgnet::model::ScgnetConfig tiny_config(bool binary, std::size_t width = 12, std::uint64_t seed = 17) {
  scgnet::model::ScgnetConfig c;
  c.conv_blocks = {{4, 2, 0.2}};
  c.gru_blocks = {{3, 0.2}};
  c.dense_units = 5;
  c.head = binary ? scgnet::model::Head::BinarySigmoid : scgnet::model::Head::Multiclass;
  c.n_classes = binary ? 2 : 5;
  c.input_length = width;
  c.seed = seed;
  return c;
}

/// Gaussian blobs: class c is centred at +2 on feature c (mod width) and 0
/// elsewhere, unit noise scaled by `spread`.
inline scgnet::EncodedSet blobs(std::size_t per_class, int n_classes, std::size_t width, std::uint64_t seed,
                                double spread = 0.5) {
  scgnet::EncodedSet s;
  s.n_classes = n_classes;
  s.x.cols = width;
  scgnet::Rng rng(seed);
  std::vector<float> row(width);
  for (std::size_t i = 0; i < per_class; ++i) {
    for (int c = 0; c < n_classes; ++c) {
      for (std::size_t j = 0; j < width; ++j) row[j] = static_cast<float>(spread * rng.normal());
      row[static_cast<std::size_t>(c) % width] += 2.0f;
      s.x.append_row(row);
      s.y.push_back(c);
      s.synthetic.push_back(0);
    }
  }
  return s;
}

inline std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("scgnet_test_" + name);
}

}  // namespace testsupport
