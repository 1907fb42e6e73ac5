#pragma once

#include <cctype>
#include <charconv>
#include <cmath>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>

namespace poa {

/// Parsed form of "name(key=value, key=value)". Used to address instance
/// factories and algorithms from configuration files.
struct SpecString {
  std::string name;
  std::map<std::string, std::string> params;

  bool has(const std::string& key) const { return params.count(key) != 0; }

  /// Reads a real. Accepts plain decimals and "e^x" (meaning exp(x)).
  double number(const std::string& key) const {
    const auto it = params.find(key);
    if (it == params.end()) throw std::invalid_argument(name + ": missing parameter '" + key + "'");
    return parse_number(it->second, name + "." + key);
  }

  double number_or(const std::string& key, double fallback) const { return has(key) ? number(key) : fallback; }

  long long integer(const std::string& key) const {
    const double v = number(key);
    if (v != std::floor(v) || std::abs(v) > 9.0e15) {
      throw std::invalid_argument(name + "." + key + ": expected an integer, got '" + params.at(key) + "'");
    }
    return static_cast<long long>(v);
  }

  long long integer_or(const std::string& key, long long fallback) const { return has(key) ? integer(key) : fallback; }

  const std::string& text(const std::string& key) const {
    const auto it = params.find(key);
    if (it == params.end()) throw std::invalid_argument(name + ": missing parameter '" + key + "'");
    return it->second;
  }

  /// Rejects keys outside the allowed set.
  void require_only(const std::set<std::string>& allowed) const {
    for (const auto& [k, v] : params) {
      if (!allowed.count(k)) throw std::invalid_argument(name + ": unknown parameter '" + k + "'");
    }
  }

  static double parse_number(std::string_view s, const std::string& what) {
    auto trimmed = s;
    double sign = 1.0;
    if (!trimmed.empty() && trimmed.front() == '-') {
      sign = -1.0;
      trimmed.remove_prefix(1);
    }
    const bool exp_form = trimmed.size() > 2 && trimmed[0] == 'e' && trimmed[1] == '^';
    if (exp_form) trimmed.remove_prefix(2);
    double v = 0.0;
    const auto res = std::from_chars(trimmed.data(), trimmed.data() + trimmed.size(), v);
    if (res.ec != std::errc() || res.ptr != trimmed.data() + trimmed.size()) {
      throw std::invalid_argument(what + ": cannot parse number '" + std::string(s) + "'");
    }
    return sign * (exp_form ? std::exp(v) : v);
  }
};

inline SpecString parse_spec_string(std::string_view text) {
  auto trim = [](std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
  };
  text = trim(text);
  SpecString out;
  const auto open = text.find('(');
  if (open == std::string_view::npos) {
    out.name = std::string(text);
  } else {
    if (text.back() != ')') throw std::invalid_argument("spec '" + std::string(text) + "': missing ')'");
    out.name = std::string(trim(text.substr(0, open)));
    auto body = text.substr(open + 1, text.size() - open - 2);
    while (!trim(body).empty()) {
      const auto comma = body.find(',');
      auto item = trim(body.substr(0, comma));
      body = comma == std::string_view::npos ? std::string_view{} : body.substr(comma + 1);
      const auto eq = item.find('=');
      if (eq == std::string_view::npos) {
        throw std::invalid_argument("spec '" + std::string(text) + "': expected key=value, got '" + std::string(item) + "'");
      }
      const auto key = std::string(trim(item.substr(0, eq)));
      const auto value = std::string(trim(item.substr(eq + 1)));
      if (key.empty() || value.empty()) {
        throw std::invalid_argument("spec '" + std::string(text) + "': empty key or value");
      }
      if (!out.params.emplace(key, value).second) {
        throw std::invalid_argument("spec '" + std::string(text) + "': duplicate key '" + key + "'");
      }
    }
  }
  if (out.name.empty()) throw std::invalid_argument("spec '" + std::string(text) + "': missing name");
  for (char c : out.name) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_')) {
      throw std::invalid_argument("spec '" + std::string(text) + "': invalid name");
    }
  }
  return out;
}

}  // namespace poa
