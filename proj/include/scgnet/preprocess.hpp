#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "scgnet/dataset.hpp"
#include "scgnet/error.hpp"
#include "scgnet/io.hpp"
#include "scgnet/matrix.hpp"

namespace scgnet::prep {

inline const data::RawRecord& raw_of(const data::RawRecord& r) { return r; }
inline const data::RawRecord& raw_of(const data::LabeledExample& e) { return e.raw; }

/// Category vocabulary per categorical column, each sorted lexicographically.
struct EncoderSpec {
  std::vector<std::size_t> columns;
  std::vector<std::vector<std::string>> categories;

  std::size_t width() const {
    std::size_t w = 0;
    for (const auto& c : categories) w += c.size();
    return w;
  }

  bool operator==(const EncoderSpec&) const = default;
};

/// Per-column mean and population standard deviation.
struct Standardizer {
  std::vector<std::size_t> columns;
  std::vector<double> mean;
  std::vector<double> stddev;

  bool operator==(const Standardizer&) const = default;
};

template <class Records>
EncoderSpec fit_one_hot(const Records& train, const std::vector<std::size_t>& columns) {
  if (std::empty(train)) throw Error(Errc::EmptyTrainingSet, "cannot fit one-hot encoder on zero records");
  EncoderSpec spec;
  spec.columns = columns;
  for (const auto col : columns) {
    std::set<std::string> seen;
    for (const auto& r : train) seen.insert(raw_of(r).fields[col]);
    spec.categories.emplace_back(seen.begin(), seen.end());
  }
  return spec;
}

/// Writes the one-hot blocks of `record` into `out` (length spec.width()).
/// Returns the number of categorical fields whose value was not seen at fit
/// time; those blocks stay all-zero. If per_column is non-null, the unknown
/// count for each column is incremented there.
inline std::size_t encode_one_hot(const EncoderSpec& spec, const data::RawRecord& record, std::span<float> out,
                                  std::vector<std::size_t>* per_column = nullptr) {
  std::fill(out.begin(), out.end(), 0.0f);
  std::size_t offset = 0;
  std::size_t unknown = 0;
  for (std::size_t b = 0; b < spec.columns.size(); ++b) {
    const auto& cats = spec.categories[b];
    const auto& value = record.fields[spec.columns[b]];
    const auto it = std::lower_bound(cats.begin(), cats.end(), value);
    if (it != cats.end() && *it == value) {
      out[offset + static_cast<std::size_t>(it - cats.begin())] = 1.0f;
    } else {
      ++unknown;
      if (per_column) ++(*per_column)[b];
    }
    offset += cats.size();
  }
  return unknown;
}

template <class Records>
Standardizer fit_standardizer(const Records& train, const std::vector<std::size_t>& columns) {
  if (std::empty(train)) throw Error(Errc::EmptyTrainingSet, "cannot fit standardizer on zero records");
  Standardizer s;
  s.columns = columns;
  const auto n = static_cast<double>(std::size(train));
  for (const auto col : columns) {
    double sum = 0.0;
    for (const auto& r : train) sum += raw_of(r).values[col];
    const double mean = sum / n;
    double sq = 0.0;
    for (const auto& r : train) {
      const double d = raw_of(r).values[col] - mean;
      sq += d * d;
    }
    s.mean.push_back(mean);
    s.stddev.push_back(std::sqrt(sq / n));
  }
  return s;
}

/// (Y - mean) / std for the i-th standardized column; 0 when std is 0.
inline double standardize(const Standardizer& s, double value, std::size_t i) {
  if (s.stddev[i] == 0.0) return 0.0;
  return (value - s.mean[i]) / s.stddev[i];
}

inline double unstandardize(const Standardizer& s, double z, std::size_t i) {
  return z * s.stddev[i] + s.mean[i];
}

/// The fitted preprocessing state: schema, one-hot vocabularies,
/// standardization moments, and the per-column training range used for the
/// non-negative view consumed by multinomial naive Bayes.
struct Pipeline {
  data::Schema schema;
  EncoderSpec encoder;
  Standardizer standardizer;
  std::vector<double> min;
  std::vector<double> max;

  std::size_t width() const { return standardizer.columns.size() + encoder.width(); }

  bool operator==(const Pipeline&) const = default;
};

struct TransformReport {
  std::size_t rows = 0;
  std::size_t width = 0;
  /// Unknown category occurrences per categorical column.
  std::vector<std::size_t> unknown_per_column;

  std::size_t unknown_total() const {
    std::size_t t = 0;
    for (auto v : unknown_per_column) t += v;
    return t;
  }
};

template <class Records>
Pipeline fit_pipeline(const Records& train, const data::Schema& schema = {}) {
  Pipeline p;
  p.schema = schema;
  p.encoder = fit_one_hot(train, schema.categorical);
  const auto numeric = schema.numeric_columns();
  p.standardizer = fit_standardizer(train, numeric);
  for (const auto col : numeric) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (const auto& r : train) {
      lo = std::min(lo, raw_of(r).values[col]);
      hi = std::max(hi, raw_of(r).values[col]);
    }
    p.min.push_back(lo);
    p.max.push_back(hi);
  }
  return p;
}

enum class NumericView {
  Standardized,  // (Y - mean) / std
  UnitRange,     // (Y - min) / (max - min), clipped to [0, 1]
};

/// Encodes records as [numeric block | one-hot blocks]. Numeric columns keep
/// dataset order; one-hot blocks follow column order then category order.
template <class Records>
FeatureMatrix transform(const Pipeline& p, const Records& records, TransformReport* report = nullptr,
                        NumericView view = NumericView::Standardized) {
  const std::size_t n_num = p.standardizer.columns.size();
  FeatureMatrix out(std::size(records), p.width());
  std::vector<std::size_t> unknown(p.encoder.columns.size(), 0);
  std::size_t i = 0;
  for (const auto& rec : records) {
    const auto& raw = raw_of(rec);
    auto row = out.row(i++);
    for (std::size_t j = 0; j < n_num; ++j) {
      const double y = raw.values[p.standardizer.columns[j]];
      double v;
      if (view == NumericView::Standardized) {
        v = standardize(p.standardizer, y, j);
      } else {
        const double range = p.max[j] - p.min[j];
        v = range > 0.0 ? std::clamp((y - p.min[j]) / range, 0.0, 1.0) : 0.0;
      }
      row[j] = static_cast<float>(v);
    }
    encode_one_hot(p.encoder, raw, row.subspan(n_num), &unknown);
  }
  if (report) {
    report->rows = out.rows;
    report->width = out.cols;
    report->unknown_per_column = unknown;
  }
  return out;
}

/// Feature names matching the transform layout.
inline std::vector<std::string> feature_names(const Pipeline& p) {
  std::vector<std::string> names;
  for (auto c : p.standardizer.columns) names.push_back(p.schema.column_name(c));
  for (std::size_t b = 0; b < p.encoder.columns.size(); ++b) {
    for (const auto& cat : p.encoder.categories[b]) {
      names.push_back(p.schema.column_name(p.encoder.columns[b]) + "=" + cat);
    }
  }
  return names;
}

/// Labels for the chosen task: 0/1 for binary, class id for multiclass.
inline std::vector<int> task_labels(const std::vector<data::LabeledExample>& examples, bool multiclass) {
  std::vector<int> y;
  y.reserve(examples.size());
  for (const auto& ex : examples) {
    y.push_back(multiclass ? static_cast<int>(ex.cls) : static_cast<int>(ex.binary));
  }
  return y;
}

inline EncodedSet encode(const Pipeline& p, const std::vector<data::LabeledExample>& examples, bool multiclass,
                         TransformReport* report = nullptr, NumericView view = NumericView::Standardized) {
  EncodedSet set;
  set.x = transform(p, examples, report, view);
  set.y = task_labels(examples, multiclass);
  set.synthetic.assign(set.y.size(), 0);
  set.n_classes = multiclass ? static_cast<int>(data::kNumClasses) : 2;
  return set;
}

// ---------------------------------------------------------------------------
// Fitted-pipeline file ("SCGP", see docs/formats.md).

inline constexpr std::uint32_t kPipelineVersion = 1;

inline std::vector<std::uint8_t> encode_pipeline(const Pipeline& p) {
  nlohmann::ordered_json header;
  header["n_features"] = p.schema.n_features;
  header["categorical_columns"] = p.schema.categorical;
  header["numeric_columns"] = p.standardizer.columns;
  nlohmann::ordered_json cats = nlohmann::ordered_json::array();
  for (std::size_t b = 0; b < p.encoder.columns.size(); ++b) {
    cats.push_back({{"column", p.encoder.columns[b]}, {"values", p.encoder.categories[b]}});
  }
  header["categories"] = cats;
  header["width"] = p.width();

  io::Writer w;
  w.put_string(header.dump());
  for (const auto* arr : {&p.standardizer.mean, &p.standardizer.stddev, &p.min, &p.max}) {
    w.put_array(std::span<const double>(*arr));
  }
  return io::frame("SCGP", kPipelineVersion, w.bytes());
}

inline Pipeline decode_pipeline(std::span<const std::uint8_t> file) {
  const auto body = io::unframe(file, "SCGP", kPipelineVersion);
  io::Reader r(body);
  const auto header = nlohmann::json::parse(r.get_string());
  Pipeline p;
  p.schema.n_features = header.at("n_features").get<std::size_t>();
  p.schema.categorical = header.at("categorical_columns").get<std::vector<std::size_t>>();
  p.standardizer.columns = header.at("numeric_columns").get<std::vector<std::size_t>>();
  for (const auto& c : header.at("categories")) {
    p.encoder.columns.push_back(c.at("column").get<std::size_t>());
    p.encoder.categories.push_back(c.at("values").get<std::vector<std::string>>());
  }
  const auto n = p.standardizer.columns.size();
  p.standardizer.mean = r.get_array<double>(n);
  p.standardizer.stddev = r.get_array<double>(n);
  p.min = r.get_array<double>(n);
  p.max = r.get_array<double>(n);
  return p;
}

inline void save_pipeline(const std::filesystem::path& path, const Pipeline& p) {
  io::write_file(path, encode_pipeline(p));
}

inline Pipeline load_pipeline(const std::filesystem::path& path) { return decode_pipeline(io::read_file(path)); }

/// CRC-32 of the serialized fitted state.
inline std::uint32_t state_hash(const Pipeline& p) { return io::crc32(encode_pipeline(p)); }

}  // namespace scgnet::prep
