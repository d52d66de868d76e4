#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "scgnet/error.hpp"
#include "scgnet/io.hpp"

namespace scgnet::data {

enum class ClassLabel : std::uint8_t { Normal = 0, DoS = 1, Probe = 2, R2L = 3, U2R = 4 };
enum class BinaryLabel : std::uint8_t { Normal = 0, Attack = 1 };

inline constexpr std::size_t kNumClasses = 5;
inline constexpr std::array<const char*, kNumClasses> kClassNames = {"Normal", "DoS", "Probe", "R2L", "U2R"};
inline constexpr std::array<const char*, 2> kBinaryNames = {"Normal", "Attack"};

inline const char* class_name(ClassLabel c) { return kClassNames[static_cast<std::size_t>(c)]; }

inline std::optional<ClassLabel> parse_class_name(std::string_view s) {
  for (std::size_t i = 0; i < kNumClasses; ++i) {
    if (s == kClassNames[i]) return static_cast<ClassLabel>(i);
  }
  return std::nullopt;
}

/// Standard NSL-KDD feature names in file order.
inline const std::vector<std::string>& nsl_kdd_feature_names() {
  static const std::vector<std::string> names = {
      "duration", "protocol_type", "service", "flag", "src_bytes", "dst_bytes", "land",
      "wrong_fragment", "urgent", "hot", "num_failed_logins", "logged_in", "num_compromised",
      "root_shell", "su_attempted", "num_root", "num_file_creations", "num_shells",
      "num_access_files", "num_outbound_cmds", "is_host_login", "is_guest_login", "count",
      "srv_count", "serror_rate", "srv_serror_rate", "rerror_rate", "srv_rerror_rate",
      "same_srv_rate", "diff_srv_rate", "srv_diff_host_rate", "dst_host_count",
      "dst_host_srv_count", "dst_host_same_srv_rate", "dst_host_diff_srv_rate",
      "dst_host_same_src_port_rate", "dst_host_srv_diff_host_rate", "dst_host_serror_rate",
      "dst_host_srv_serror_rate", "dst_host_rerror_rate", "dst_host_srv_rerror_rate"};
  return names;
}

/// Column descriptor for a record file: feature count plus the 0-based
/// indices of the categorical (text) features. Each line carries
/// n_features fields, then the subclass label, then the difficulty score.
struct Schema {
  std::size_t n_features = 41;
  std::vector<std::size_t> categorical = {1, 2, 3};

  bool is_categorical(std::size_t col) const {
    return std::find(categorical.begin(), categorical.end(), col) != categorical.end();
  }

  std::vector<std::size_t> numeric_columns() const {
    std::vector<std::size_t> out;
    for (std::size_t c = 0; c < n_features; ++c) {
      if (!is_categorical(c)) out.push_back(c);
    }
    return out;
  }

  std::size_t line_fields() const { return n_features + 2; }

  std::string column_name(std::size_t col) const {
    if (n_features == 41) return nsl_kdd_feature_names()[col];
    return "f" + std::to_string(col);
  }

  bool operator==(const Schema&) const = default;
};

struct RawRecord {
  /// Feature fields verbatim, in file order.
  std::vector<std::string> fields;
  /// Parsed value of each numeric field; 0 at categorical positions.
  std::vector<double> values;
  std::string subclass;
  int difficulty = 0;

  bool operator==(const RawRecord&) const = default;
};

struct LabeledExample {
  RawRecord raw;
  BinaryLabel binary = BinaryLabel::Normal;
  ClassLabel cls = ClassLabel::Normal;
  /// True when the subclass was unknown and mapped by coercion.
  bool coerced = false;
};

namespace detail {

inline std::string_view trim_right(std::string_view s) {
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r' || s.back() == '\n')) {
    s.remove_suffix(1);
  }
  return s;
}

inline std::string_view trim(std::string_view s) {
  s = trim_right(s);
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  return s;
}

inline std::optional<double> parse_finite(std::string_view s) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty() || !std::isfinite(v)) {
    return std::nullopt;
  }
  return v;
}

inline std::string location(std::size_t line_no, std::size_t col) {
  return "line " + std::to_string(line_no) + ", column " + std::to_string(col);
}

}  // namespace detail

/// Parses one comma-separated record. line_no and the column in error
/// messages are 1-based.
inline RawRecord parse_record_line(std::string_view line, const Schema& schema, std::size_t line_no) {
  line = detail::trim_right(line);
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      parts.push_back(line.substr(start));
      break;
    }
    parts.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  if (parts.size() != schema.line_fields()) {
    throw Error(Errc::FieldCountMismatch, "line " + std::to_string(line_no) + ": expected " +
                                              std::to_string(schema.line_fields()) + " fields, found " +
                                              std::to_string(parts.size()));
  }

  RawRecord rec;
  rec.fields.reserve(schema.n_features);
  rec.values.assign(schema.n_features, 0.0);
  for (std::size_t c = 0; c < schema.n_features; ++c) {
    rec.fields.emplace_back(parts[c]);
    if (schema.is_categorical(c)) {
      if (detail::trim(parts[c]).empty()) {
        throw Error(Errc::NumericParseError, detail::location(line_no, c + 1) + ": empty categorical field");
      }
      continue;
    }
    const auto v = detail::parse_finite(parts[c]);
    if (!v) {
      throw Error(Errc::NumericParseError,
                  detail::location(line_no, c + 1) + ": '" + std::string(parts[c]) + "' is not a finite number");
    }
    rec.values[c] = *v;
  }
  rec.subclass = std::string(detail::trim(parts[schema.n_features]));
  const auto diff_text = detail::trim(parts[schema.n_features + 1]);
  int diff = -1;
  const auto [ptr, ec] = std::from_chars(diff_text.data(), diff_text.data() + diff_text.size(), diff);
  if (ec != std::errc() || ptr != diff_text.data() + diff_text.size() || diff < 0 || diff > 21) {
    throw Error(Errc::NumericParseError, detail::location(line_no, schema.n_features + 2) +
                                             ": difficulty must be an integer in [0, 21]");
  }
  rec.difficulty = diff;
  return rec;
}

/// One RawRecord per non-empty line, in input order.
inline std::vector<RawRecord> parse_records(std::istream& in, const Schema& schema = {}) {
  std::vector<RawRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    out.push_back(parse_record_line(line, schema, line_no));
  }
  return out;
}

inline std::vector<RawRecord> parse_records_file(const std::filesystem::path& path, const Schema& schema = {}) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::MissingFile, path.string());
  return parse_records(in, schema);
}

inline std::string serialize_record(const RawRecord& rec) {
  std::string line;
  for (const auto& f : rec.fields) {
    line += f;
    line += ',';
  }
  line += rec.subclass;
  line += ',';
  line += std::to_string(rec.difficulty);
  return line;
}

/// subclass -> class mapping loaded from a tab-separated text file.
class AttackTaxonomy {
 public:
  static AttackTaxonomy parse(std::string_view text, std::string source = "<memory>") {
    AttackTaxonomy tax;
    tax.source_ = std::move(source);
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      std::string_view sv = line;
      if (const auto hash = sv.find('#'); hash != std::string_view::npos) sv = sv.substr(0, hash);
      sv = detail::trim(sv);
      if (sv.empty()) continue;
      const auto tab = sv.find('\t');
      if (tab == std::string_view::npos) {
        throw Error(Errc::FieldCountMismatch, tax.source_ + " line " + std::to_string(line_no) +
                                                  ": expected 'subclass<TAB>class'");
      }
      const auto key = detail::trim(sv.substr(0, tab));
      const auto value = detail::trim(sv.substr(tab + 1));
      const auto cls = parse_class_name(value);
      if (!cls) {
        throw Error(Errc::UnknownSubclass, tax.source_ + " line " + std::to_string(line_no) +
                                               ": '" + std::string(value) + "' is not a class label");
      }
      if (!tax.mapping_.emplace(std::string(key), *cls).second) {
        throw Error(Errc::FieldCountMismatch, tax.source_ + " line " + std::to_string(line_no) +
                                                  ": duplicate subclass '" + std::string(key) + "'");
      }
    }
    const auto normal = tax.mapping_.find("normal");
    if (normal == tax.mapping_.end() || normal->second != ClassLabel::Normal) {
      throw Error(Errc::UnknownSubclass, tax.source_ + ": taxonomy must map 'normal' to Normal");
    }
    return tax;
  }

  static AttackTaxonomy load(const std::filesystem::path& path) {
    return parse(io::read_text(path), path.string());
  }

  ClassLabel map(std::string_view subclass) const {
    const auto it = mapping_.find(std::string(subclass));
    if (it == mapping_.end()) {
      throw Error(Errc::UnknownSubclass, "'" + std::string(subclass) + "' is not in taxonomy " + source_);
    }
    return it->second;
  }

  bool contains(std::string_view subclass) const { return mapping_.count(std::string(subclass)) > 0; }

  const std::map<std::string, ClassLabel>& mapping() const { return mapping_; }
  const std::string& source() const { return source_; }

 private:
  std::map<std::string, ClassLabel> mapping_;
  std::string source_;
};

inline ClassLabel map_subclass(const AttackTaxonomy& taxonomy, std::string_view subclass) {
  return taxonomy.map(subclass);
}

inline BinaryLabel binary_of(ClassLabel c) {
  return c == ClassLabel::Normal ? BinaryLabel::Normal : BinaryLabel::Attack;
}

struct LabelOptions {
  /// Map unknown subclasses to Attack and the nearest attack class instead
  /// of rejecting the record.
  bool coerce_unknown_to_attack = false;
};

/// Attaches binary and class labels. With coercion enabled, an unknown
/// subclass becomes Attack and takes the attack class whose centroid (over
/// log1p-scaled numeric fields of the known attack records in the same
/// batch) is nearest; DoS when no known attack records exist.
inline std::vector<LabeledExample> label_records(std::vector<RawRecord> records, const AttackTaxonomy& taxonomy,
                                                 const LabelOptions& opts = {}) {
  std::vector<LabeledExample> out;
  out.reserve(records.size());
  std::vector<std::size_t> unknown;
  for (auto& r : records) {
    LabeledExample ex;
    if (taxonomy.contains(r.subclass)) {
      ex.cls = taxonomy.map(r.subclass);
    } else if (opts.coerce_unknown_to_attack) {
      ex.coerced = true;
      unknown.push_back(out.size());
    } else {
      taxonomy.map(r.subclass);  // throws UnknownSubclass
    }
    ex.raw = std::move(r);
    ex.binary = ex.coerced ? BinaryLabel::Attack : binary_of(ex.cls);
    out.push_back(std::move(ex));
  }
  if (unknown.empty()) return out;

  const std::size_t width = out.front().raw.values.size();
  auto scaled = [](double v) { return std::log1p(std::fabs(v)); };
  std::array<std::vector<double>, kNumClasses> centroid;
  std::array<std::size_t, kNumClasses> count{};
  for (auto& c : centroid) c.assign(width, 0.0);
  for (const auto& ex : out) {
    if (ex.coerced || ex.cls == ClassLabel::Normal) continue;
    const auto k = static_cast<std::size_t>(ex.cls);
    ++count[k];
    for (std::size_t j = 0; j < width; ++j) centroid[k][j] += scaled(ex.raw.values[j]);
  }
  for (std::size_t k = 1; k < kNumClasses; ++k) {
    if (count[k] == 0) continue;
    for (auto& v : centroid[k]) v /= static_cast<double>(count[k]);
  }
  for (const auto idx : unknown) {
    auto& ex = out[idx];
    ex.cls = ClassLabel::DoS;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t k = 1; k < kNumClasses; ++k) {
      if (count[k] == 0) continue;
      double d = 0.0;
      for (std::size_t j = 0; j < width; ++j) {
        const double diff = scaled(ex.raw.values[j]) - centroid[k][j];
        d += diff * diff;
      }
      if (d < best) {
        best = d;
        ex.cls = static_cast<ClassLabel>(k);
      }
    }
  }
  return out;
}

using ClassCounts = std::array<std::size_t, kNumClasses>;

inline ClassCounts class_histogram(const std::vector<LabeledExample>& examples) {
  ClassCounts counts{};
  for (const auto& ex : examples) ++counts[static_cast<std::size_t>(ex.cls)];
  return counts;
}

inline std::array<std::size_t, 2> binary_histogram(const std::vector<LabeledExample>& examples) {
  std::array<std::size_t, 2> counts{};
  for (const auto& ex : examples) ++counts[static_cast<std::size_t>(ex.binary)];
  return counts;
}

// ---------------------------------------------------------------------------
// Columnar intermediate file ("NSLC", see docs/formats.md).

inline constexpr std::uint32_t kColumnarVersion = 1;

struct LabeledSet {
  Schema schema;
  std::vector<LabeledExample> examples;
};

namespace detail {

inline std::string canonical_number(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

inline void put_dictionary_column(io::Writer& w, const std::vector<std::string>& column) {
  std::map<std::string, std::uint32_t> dict;
  for (const auto& v : column) dict.emplace(v, 0);
  std::uint32_t code = 0;
  for (auto& [k, c] : dict) c = code++;
  w.put<std::uint32_t>(static_cast<std::uint32_t>(dict.size()));
  for (const auto& [k, c] : dict) w.put_string(k);
  for (const auto& v : column) w.put<std::uint32_t>(dict.at(v));
}

inline std::vector<std::string> get_dictionary_column(io::Reader& r, std::size_t rows) {
  const auto n = r.get<std::uint32_t>();
  std::vector<std::string> dict(n);
  for (auto& s : dict) s = r.get_string();
  std::vector<std::string> column(rows);
  for (auto& v : column) {
    const auto c = r.get<std::uint32_t>();
    if (c >= n) throw Error(Errc::ChecksumMismatch, "dictionary code out of range");
    v = dict[c];
  }
  return column;
}

}  // namespace detail

inline std::vector<std::uint8_t> encode_columnar(const LabeledSet& set) {
  const auto& schema = set.schema;
  const auto rows = set.examples.size();
  io::Writer w;
  w.put<std::uint64_t>(rows);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(schema.n_features));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(schema.categorical.size()));
  for (auto c : schema.categorical) w.put<std::uint32_t>(static_cast<std::uint32_t>(c));
  for (std::size_t c = 0; c < schema.n_features; ++c) {
    if (schema.is_categorical(c)) {
      std::vector<std::string> column;
      column.reserve(rows);
      for (const auto& ex : set.examples) column.push_back(ex.raw.fields[c]);
      detail::put_dictionary_column(w, column);
    } else {
      for (const auto& ex : set.examples) w.put<double>(ex.raw.values[c]);
    }
  }
  std::vector<std::string> subclasses;
  subclasses.reserve(rows);
  for (const auto& ex : set.examples) subclasses.push_back(ex.raw.subclass);
  detail::put_dictionary_column(w, subclasses);
  for (const auto& ex : set.examples) w.put<std::uint8_t>(static_cast<std::uint8_t>(ex.raw.difficulty));
  for (const auto& ex : set.examples) w.put<std::uint8_t>(static_cast<std::uint8_t>(ex.cls));
  for (const auto& ex : set.examples) w.put<std::uint8_t>(static_cast<std::uint8_t>(ex.binary));
  for (const auto& ex : set.examples) w.put<std::uint8_t>(ex.coerced ? 1 : 0);
  return io::frame("NSLC", kColumnarVersion, w.bytes());
}

inline LabeledSet decode_columnar(std::span<const std::uint8_t> file) {
  const auto body = io::unframe(file, "NSLC", kColumnarVersion);
  io::Reader r(body);
  LabeledSet set;
  const auto rows = r.get<std::uint64_t>();
  set.schema.n_features = r.get<std::uint32_t>();
  set.schema.categorical.clear();
  const auto n_cat = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < n_cat; ++i) set.schema.categorical.push_back(r.get<std::uint32_t>());
  if (rows > r.remaining()) throw Error(Errc::TruncatedFile, "row count exceeds payload");

  set.examples.resize(rows);
  for (auto& ex : set.examples) {
    ex.raw.fields.resize(set.schema.n_features);
    ex.raw.values.assign(set.schema.n_features, 0.0);
  }
  for (std::size_t c = 0; c < set.schema.n_features; ++c) {
    if (set.schema.is_categorical(c)) {
      auto column = detail::get_dictionary_column(r, rows);
      for (std::size_t i = 0; i < rows; ++i) set.examples[i].raw.fields[c] = std::move(column[i]);
    } else {
      const auto values = r.get_array<double>(rows);
      for (std::size_t i = 0; i < rows; ++i) {
        set.examples[i].raw.values[c] = values[i];
        set.examples[i].raw.fields[c] = detail::canonical_number(values[i]);
      }
    }
  }
  auto subclasses = detail::get_dictionary_column(r, rows);
  const auto difficulty = r.get_array<std::uint8_t>(rows);
  const auto cls = r.get_array<std::uint8_t>(rows);
  const auto bin = r.get_array<std::uint8_t>(rows);
  const auto flags = r.get_array<std::uint8_t>(rows);
  for (std::size_t i = 0; i < rows; ++i) {
    auto& ex = set.examples[i];
    ex.raw.subclass = std::move(subclasses[i]);
    ex.raw.difficulty = difficulty[i];
    if (cls[i] >= kNumClasses || bin[i] > 1) throw Error(Errc::LabelOutOfRange, "label byte out of range");
    ex.cls = static_cast<ClassLabel>(cls[i]);
    ex.binary = static_cast<BinaryLabel>(bin[i]);
    ex.coerced = (flags[i] & 1) != 0;
  }
  return set;
}

inline void write_columnar(const std::filesystem::path& path, const LabeledSet& set) {
  io::write_file(path, encode_columnar(set));
}

inline LabeledSet read_columnar(const std::filesystem::path& path) {
  return decode_columnar(io::read_file(path));
}

/// Human-readable side-car describing an ingested file.
inline nlohmann::ordered_json ingest_summary(const LabeledSet& set, const std::string& source,
                                             std::uint32_t source_crc) {
  nlohmann::ordered_json j;
  j["schema_version"] = 1;
  j["source"] = source;
  j["source_crc32"] = io::hex32(source_crc);
  j["rows"] = set.examples.size();
  const auto hist = class_histogram(set.examples);
  for (std::size_t k = 0; k < kNumClasses; ++k) j["class_counts"][kClassNames[k]] = hist[k];
  const auto bin = binary_histogram(set.examples);
  j["binary_counts"]["Normal"] = bin[0];
  j["binary_counts"]["Attack"] = bin[1];
  std::map<std::string, std::size_t> subclasses;
  std::size_t coerced = 0;
  for (const auto& ex : set.examples) {
    ++subclasses[ex.raw.subclass];
    coerced += ex.coerced ? 1 : 0;
  }
  j["coerced_unknown_subclasses"] = coerced;
  for (const auto& [k, v] : subclasses) j["subclass_counts"][k] = v;
  return j;
}

/// Reads either a columnar file (by magic) or a raw comma-separated file.
inline LabeledSet load_labeled(const std::filesystem::path& path, const AttackTaxonomy* taxonomy,
                               const LabelOptions& opts = {}, const Schema& schema = {}) {
  const auto bytes = io::read_file(path);
  if (bytes.size() >= 4 && std::equal(bytes.begin(), bytes.begin() + 4, "NSLC")) {
    return decode_columnar(bytes);
  }
  if (taxonomy == nullptr) throw Error(Errc::MissingFile, "raw record file needs a taxonomy: " + path.string());
  std::istringstream in(std::string(bytes.begin(), bytes.end()));
  return LabeledSet{schema, label_records(parse_records(in, schema), *taxonomy, opts)};
}

}  // namespace scgnet::data
