#pragma once

#include <chrono>
#include <ctime>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "scgnet/error.hpp"
#include "scgnet/io.hpp"

#ifndef SCGNET_VERSION
#define SCGNET_VERSION "0.0.0"
#endif

namespace scgnet::manifest {

inline constexpr int kManifestSchema = 1;

struct FileEntry {
  std::string path;
  std::string crc32;
  std::uint64_t bytes = 0;

  bool operator==(const FileEntry&) const = default;
};

inline FileEntry describe(const std::filesystem::path& path) {
  const auto data = io::read_file(path);
  return {path.string(), io::hex32(io::crc32(data)), data.size()};
}

struct RunManifest {
  std::string command;
  std::vector<std::string> argv;
  /// Config document exactly as the run resolved it.
  std::string config;
  std::vector<FileEntry> inputs;
  std::uint64_t seed = 0;
  std::string version = SCGNET_VERSION;
  std::string started;
  std::string finished;
  std::vector<FileEntry> outputs;

  void add_input(const std::filesystem::path& p) { inputs.push_back(describe(p)); }
  void add_output(const std::filesystem::path& p) { outputs.push_back(describe(p)); }
};

/// UTC, second resolution, ISO 8601.
inline std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline nlohmann::ordered_json to_json(const RunManifest& m) {
  using J = nlohmann::ordered_json;
  auto files = [](const std::vector<FileEntry>& v) {
    J a = J::array();
    for (const auto& f : v) a.push_back({{"path", f.path}, {"crc32", f.crc32}, {"bytes", f.bytes}});
    return a;
  };
  J j;
  j["schema_version"] = kManifestSchema;
  j["command"] = m.command;
  j["argv"] = m.argv;
  j["seed"] = m.seed;
  j["version"] = m.version;
  j["started"] = m.started;
  j["finished"] = m.finished;
  j["config"] = m.config;
  j["inputs"] = files(m.inputs);
  j["outputs"] = files(m.outputs);
  return j;
}

inline RunManifest from_json(const nlohmann::ordered_json& j) {
  try {
    if (j.at("schema_version").get<int>() != kManifestSchema) {
      throw Error(Errc::VersionMismatch, "manifest schema " + j.at("schema_version").dump());
    }
    auto files = [](const nlohmann::ordered_json& a) {
      std::vector<FileEntry> v;
      for (const auto& f : a) v.push_back({f.at("path"), f.at("crc32"), f.at("bytes")});
      return v;
    };
    RunManifest m;
    m.command = j.at("command");
    m.argv = j.at("argv").get<std::vector<std::string>>();
    m.seed = j.at("seed");
    m.version = j.at("version");
    m.started = j.at("started");
    m.finished = j.at("finished");
    m.config = j.at("config");
    m.inputs = files(j.at("inputs"));
    m.outputs = files(j.at("outputs"));
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::TypeError, std::string("malformed manifest: ") + e.what());
  }
}

inline RunManifest read(const std::filesystem::path& path) {
  try {
    return from_json(nlohmann::ordered_json::parse(io::read_text(path)));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(Errc::TypeError, path.string() + ": " + e.what());
  }
}

/// First unused "manifest-<command>-<n>.json" in `dir`; earlier manifests
/// are never overwritten.
inline std::filesystem::path next_path(const std::filesystem::path& dir, const std::string& command) {
  for (std::size_t n = 1;; ++n) {
    auto p = dir / ("manifest-" + command + "-" + std::to_string(n) + ".json");
    if (!std::filesystem::exists(p)) return p;
  }
}

inline void write(const std::filesystem::path& path, const RunManifest& m) {
  if (std::filesystem::exists(path)) throw Error(Errc::IoError, "refusing to overwrite manifest " + path.string());
  io::write_text(path, to_json(m).dump(2) + "\n");
}

/// Missing outputs and checksum mismatches; empty when the run's artifacts
/// are intact.
inline std::vector<std::string> audit(const RunManifest& m) {
  std::vector<std::string> problems;
  for (const auto& f : m.outputs) {
    if (!std::filesystem::is_regular_file(f.path)) {
      problems.push_back("missing: " + f.path);
      continue;
    }
    const auto now = describe(f.path);
    if (now.crc32 != f.crc32 || now.bytes != f.bytes) {
      problems.push_back("changed: " + f.path + " (crc " + f.crc32 + " -> " + now.crc32 + ")");
    }
  }
  return problems;
}

}  // namespace scgnet::manifest
