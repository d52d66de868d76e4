#pragma once

#include <charconv>
#include <cmath>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "scgnet/error.hpp"

namespace scgnet::ini {

using Tree = boost::property_tree::ptree;

inline Tree parse(const std::string& text, const std::string& source = "<config>") {
  std::istringstream in(text);
  Tree tree;
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw Error(Errc::TypeError, source + ": " + e.message() + " at line " + std::to_string(e.line()));
  }
  return tree;
}

/// Shortest text that reads back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

template <class T>
std::string format_value(const T& v) {
  if constexpr (std::is_same_v<T, bool>) {
    return v ? "true" : "false";
  } else if constexpr (std::is_floating_point_v<T>) {
    return format_double(static_cast<double>(v));
  } else if constexpr (std::is_arithmetic_v<T>) {
    return std::to_string(v);
  } else {
    return std::string(v);
  }
}

template <class T>
std::string format_list(const std::vector<T>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    out += format_value(v[i]);
  }
  return out;
}

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

/// Parses one scalar; any trailing garbage, sign violation or non-finite
/// value is a TypeError naming the key.
template <class T>
T parse_value(const std::string& raw, const std::string& key) {
  const std::string s = trim(raw);
  auto bad = [&]() { return Error(Errc::TypeError, key + ": cannot read '" + s + "'"); };
  if constexpr (std::is_same_v<T, bool>) {
    if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
    if (s == "false" || s == "0" || s == "no" || s == "off") return false;
    throw bad();
  } else if constexpr (std::is_arithmetic_v<T>) {
    if (s.empty()) throw bad();
    if constexpr (std::is_unsigned_v<T>) {
      if (s.front() == '-') throw bad();
    }
    T v{};
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) throw bad();
    if constexpr (std::is_floating_point_v<T>) {
      if (!std::isfinite(v)) throw bad();
    }
    return v;
  } else {
    return s;
  }
}

template <class T>
std::vector<T> parse_list(const std::string& raw, const std::string& key) {
  std::vector<T> out;
  const std::string s = trim(raw);
  if (s.empty()) return out;
  std::size_t start = 0;
  while (true) {
    const auto comma = s.find(',', start);
    out.push_back(parse_value<T>(s.substr(start, comma - start), key));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

/// Value at "section.key", or `fallback` when absent.
template <class T>
T get(const Tree& tree, const std::string& path, T fallback) {
  const auto node = tree.get_optional<std::string>(path);
  return node ? parse_value<T>(*node, path) : fallback;
}

template <class T>
std::vector<T> get_list(const Tree& tree, const std::string& path, std::vector<T> fallback) {
  const auto node = tree.get_optional<std::string>(path);
  return node ? parse_list<T>(*node, path) : fallback;
}

/// Rejects sections or keys not named in `allowed` (section -> keys).
inline void check_keys(const Tree& tree, const std::map<std::string, std::set<std::string>>& allowed) {
  for (const auto& [section, body] : tree) {
    const auto it = allowed.find(section);
    if (it == allowed.end()) {
      if (body.empty()) throw Error(Errc::UnknownKey, section + " (keys belong in a [section])");
      throw Error(Errc::UnknownKey, "[" + section + "]");
    }
    for (const auto& [key, value] : body) {
      if (!it->second.count(key)) throw Error(Errc::UnknownKey, section + "." + key);
    }
  }
}

inline void require(bool ok, const std::string& key, const std::string& what) {
  if (!ok) throw Error(Errc::TypeError, key + ": " + what);
}

}  // namespace scgnet::ini
