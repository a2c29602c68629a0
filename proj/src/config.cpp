#include <cctype>
#include <cstdlib>
#include <set>
#include <string>

#include "oseen/cli.hpp"
#include "oseen/errors.hpp"

namespace oseen {

namespace {

[[noreturn]] void config_fail(int line, int col, const std::string& msg) {
  fail(errc::config, "ConfigError",
       "line " + std::to_string(line) + ", column " + std::to_string(col) +
           ": " + msg);
}

struct Token {
  std::string text;
  int col = 0;  // 1-based column of the first character
};

// strips comments and surrounding whitespace, remembering columns
Token trim(const std::string& raw, int from, int to) {
  int b = from;
  while (b < to && std::isspace(static_cast<unsigned char>(raw[b]))) ++b;
  int e = to;
  while (e > b && std::isspace(static_cast<unsigned char>(raw[e - 1]))) --e;
  return {raw.substr(b, e - b), b + 1};
}

bool valid_key_chars(const std::string& k) {
  if (k.empty()) return false;
  if (!std::isalpha(static_cast<unsigned char>(k[0])) && k[0] != '_')
    return false;
  for (char c : k)
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_')
      return false;
  return true;
}

double parse_double(const Token& v, int line, const std::string& key) {
  const char* s = v.text.c_str();
  char* end = nullptr;
  const double x = std::strtod(s, &end);
  if (end == s || *end != '\0')
    config_fail(line, v.col, "expected a number for '" + key + "'");
  return x;
}

long long parse_int(const Token& v, int line, const std::string& key) {
  const char* s = v.text.c_str();
  char* end = nullptr;
  const long long x = std::strtoll(s, &end, 10);
  if (end == s || *end != '\0')
    config_fail(line, v.col, "expected an integer for '" + key + "'");
  return x;
}

std::string parse_string(const Token& v, int line, const std::string& key) {
  const std::string& t = v.text;
  if (t.empty()) config_fail(line, v.col, "empty value for '" + key + "'");
  if (t.front() == '"') {
    if (t.size() < 2 || t.back() != '"')
      config_fail(line, v.col, "unterminated string for '" + key + "'");
    return t.substr(1, t.size() - 2);
  }
  return t;
}

}  // namespace

std::pair<Variant, int> variant_parts(const std::string& spelling) {
  if (spelling == "complex") return {Variant::complex_modes, -1};
  if (spelling == "real") return {Variant::real_modes, -1};
  if (spelling == "restricted(0)") return {Variant::restricted, 0};
  if (spelling == "restricted(1)") return {Variant::restricted, 1};
  fail(errc::config, "ConfigError",
       "variant must be one of complex, real, restricted(0), restricted(1)");
}

RunConfig parse_config(const std::string& text) {
  RunConfig cfg;
  std::set<std::string> seen;

  int line = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t nl = text.find('\n', pos);
    const std::size_t end = (nl == std::string::npos) ? text.size() : nl;
    const std::string raw = text.substr(pos, end - pos);
    pos = end + 1;
    ++line;
    if (nl == std::string::npos && raw.empty()) break;

    // comments run to the end of the line; quotes do not escape them since
    // no config value legitimately contains '#'
    const std::size_t hash = raw.find('#');
    const int scan_end =
        static_cast<int>(hash == std::string::npos ? raw.size() : hash);
    const Token whole = trim(raw, 0, scan_end);
    if (whole.text.empty()) continue;

    const std::size_t eq = raw.find('=');
    if (eq == std::string::npos || static_cast<int>(eq) >= scan_end)
      config_fail(line, whole.col, "expected 'key = value'");

    const Token key = trim(raw, 0, static_cast<int>(eq));
    const Token val = trim(raw, static_cast<int>(eq) + 1, scan_end);
    if (!valid_key_chars(key.text))
      config_fail(line, key.col, "malformed key '" + key.text + "'");
    if (val.text.empty())
      config_fail(line, static_cast<int>(eq) + 2,
                  "missing value for '" + key.text + "'");
    if (!seen.insert(key.text).second)
      config_fail(line, key.col, "duplicate key '" + key.text + "'");

    const std::string& k = key.text;
    if (k == "nu") {
      cfg.nu = parse_double(val, line, k);
      if (!(cfg.nu > 0.0))
        config_fail(line, val.col, "'nu' must be positive");
    } else if (k == "a") {
      cfg.a = parse_double(val, line, k);
      if (!(cfg.a >= 0.0))
        config_fail(line, val.col, "'a' must be nonnegative");
    } else if (k == "M") {
      const long long m = parse_int(val, line, k);
      if (m < 8) config_fail(line, val.col, "'M' must be at least 8");
      cfg.M = static_cast<int>(m);
    } else if (k == "M_x") {
      const long long m = parse_int(val, line, k);
      if (m < 1) config_fail(line, val.col, "'M_x' must be at least 1");
      cfg.M_x = static_cast<int>(m);
    } else if (k == "alpha0") {
      cfg.alpha0 = parse_double(val, line, k);
      if (!(cfg.alpha0 >= 0.0))
        config_fail(line, val.col, "'alpha0' must be nonnegative");
    } else if (k == "variant") {
      cfg.variant = parse_string(val, line, k);
      try {
        variant_parts(cfg.variant);
      } catch (const error&) {
        config_fail(line, val.col,
                    "variant must be one of complex, real, restricted(0), "
                    "restricted(1)");
      }
    } else if (k == "T") {
      cfg.T = parse_double(val, line, k);
      if (!(cfg.T > 0.0))
        config_fail(line, val.col, "'T' must be positive");
    } else if (k == "dt") {
      cfg.dt = parse_double(val, line, k);
      if (!(cfg.dt > 0.0))
        config_fail(line, val.col, "'dt' must be positive");
    } else if (k == "J") {
      const long long j = parse_int(val, line, k);
      if (j < 0) config_fail(line, val.col, "'J' must be nonnegative");
      cfg.J = static_cast<int>(j);
    } else if (k == "seed") {
      cfg.seed = parse_int(val, line, k);
    } else if (k == "output_dir") {
      cfg.output_dir = parse_string(val, line, k);
      if (cfg.output_dir.empty())
        config_fail(line, val.col, "'output_dir' must not be empty");
    } else {
      config_fail(line, key.col, "unknown key '" + k + "'");
    }
  }
  return cfg;
}

}  // namespace oseen
