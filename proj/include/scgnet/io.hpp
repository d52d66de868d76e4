#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <boost/crc.hpp>

#include "scgnet/error.hpp"

namespace scgnet::io {

static_assert(std::endian::native == std::endian::little,
              "binary formats assume a little-endian host");

inline std::uint32_t crc32(std::span<const std::uint8_t> bytes) {
  boost::crc_32_type crc;
  crc.process_bytes(bytes.data(), bytes.size());
  return crc.checksum();
}

inline std::uint32_t crc32(std::string_view bytes) {
  return crc32(std::span(reinterpret_cast<const std::uint8_t*>(bytes.data()), bytes.size()));
}

inline std::string hex32(std::uint32_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(8) << std::setfill('0') << v;
  return os.str();
}

inline std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::MissingFile, path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return bytes;
}

inline std::string read_text(const std::filesystem::path& path) {
  auto bytes = read_file(path);
  return std::string(bytes.begin(), bytes.end());
}

inline void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::IoError, "cannot open for writing: " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(Errc::IoError, "write failed: " + path.string());
}

inline void write_text(const std::filesystem::path& path, std::string_view text) {
  write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

inline std::uint32_t file_crc32(const std::filesystem::path& path) {
  return crc32(read_file(path));
}

/// Append-only little-endian byte sink.
class Writer {
 public:
  template <class T>
    requires std::is_arithmetic_v<T>
  void put(T v) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
    buf_.insert(buf_.end(), p, p + sizeof(T));
  }

  template <class T>
    requires std::is_arithmetic_v<T>
  void put_array(std::span<const T> v) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(v.data());
    buf_.insert(buf_.end(), p, p + v.size_bytes());
  }

  void put_bytes(std::span<const std::uint8_t> b) { buf_.insert(buf_.end(), b.begin(), b.end()); }

  /// u32 length prefix followed by the raw bytes.
  void put_string(std::string_view s) {
    put<std::uint32_t>(static_cast<std::uint32_t>(s.size()));
    buf_.insert(buf_.end(), s.begin(), s.end());
  }

  const std::vector<std::uint8_t>& bytes() const { return buf_; }
  std::vector<std::uint8_t>& bytes() { return buf_; }

 private:
  std::vector<std::uint8_t> buf_;
};

/// Bounds-checked little-endian reader. Running off the end raises TruncatedFile.
class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  template <class T>
    requires std::is_arithmetic_v<T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }

  template <class T>
    requires std::is_arithmetic_v<T>
  std::vector<T> get_array(std::size_t n) {
    if (n > remaining() / sizeof(T)) throw Error(Errc::TruncatedFile, "array runs past end of data");
    std::vector<T> v(n);
    std::memcpy(v.data(), bytes_.data() + pos_, n * sizeof(T));
    pos_ += n * sizeof(T);
    return v;
  }

  std::string get_string() {
    const auto n = get<std::uint32_t>();
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }

  std::span<const std::uint8_t> get_bytes(std::size_t n) {
    need(n);
    auto s = bytes_.subspan(pos_, n);
    pos_ += n;
    return s;
  }

  std::size_t remaining() const { return bytes_.size() - pos_; }
  std::size_t position() const { return pos_; }

 private:
  void need(std::size_t n) const {
    if (n > remaining()) throw Error(Errc::TruncatedFile, "unexpected end of data");
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

/// Shared container framing for the toolkit's binary files:
///   magic[4] | u32 version | u64 body_len | body | u32 crc32(body)
inline std::vector<std::uint8_t> frame(std::string_view magic, std::uint32_t version,
                                       std::span<const std::uint8_t> body) {
  Writer w;
  w.put_bytes(std::span(reinterpret_cast<const std::uint8_t*>(magic.data()), 4));
  w.put<std::uint32_t>(version);
  w.put<std::uint64_t>(body.size());
  w.put_bytes(body);
  w.put<std::uint32_t>(crc32(body));
  return std::move(w.bytes());
}

/// Validates framing and returns the body. Checks run in the order
/// magic, version, length, checksum.
inline std::vector<std::uint8_t> unframe(std::span<const std::uint8_t> file, std::string_view magic,
                                         std::uint32_t version) {
  if (file.size() < 4) throw Error(Errc::TruncatedFile, "file shorter than its magic");
  if (std::memcmp(file.data(), magic.data(), 4) != 0) {
    throw Error(Errc::BadMagic, "expected '" + std::string(magic) + "'");
  }
  Reader r(file.subspan(4));
  const auto found = r.get<std::uint32_t>();
  if (found != version) {
    throw Error(Errc::VersionMismatch,
                "file version " + std::to_string(found) + ", reader supports " + std::to_string(version));
  }
  const auto body_len = r.get<std::uint64_t>();
  if (body_len > r.remaining() || r.remaining() - body_len < 4) {
    throw Error(Errc::TruncatedFile, "declared body length exceeds file size");
  }
  auto body = r.get_bytes(body_len);
  const auto stored = r.get<std::uint32_t>();
  if (stored != crc32(body)) throw Error(Errc::ChecksumMismatch, "payload CRC-32 does not match trailer");
  return {body.begin(), body.end()};
}

}  // namespace scgnet::io
