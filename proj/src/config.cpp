#include "obslab/config.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace obslab::config {

ConfigError::ConfigError(const std::string& msg, int line)
    : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + msg : msg),
      line_(line) {}

std::string qualified(const std::string& section, const std::string& key) {
  return section.empty() ? key : section + "." + key;
}

namespace {

std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

// Drops a trailing comment that is not inside a string.
std::string strip_comment(const std::string& s) {
  bool in_str = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '"' && (i == 0 || s[i - 1] != '\\')) in_str = !in_str;
    if (s[i] == '#' && !in_str) return s.substr(0, i);
  }
  return s;
}

bool valid_name(const std::string& s) {
  if (s.empty()) return false;
  for (char c : s)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-'))
      return false;
  return true;
}

double parse_number(const std::string& raw, int line) {
  std::string s;
  for (char c : raw)
    if (c != '_') s += c;
  if (s == "inf" || s == "+inf") return INFINITY;
  if (s == "-inf") return -INFINITY;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size() || std::isnan(v))
    throw ConfigError("invalid value '" + raw + "'", line);
  return v;
}

Value parse_value(const std::string& raw, int line) {
  if (raw.empty()) throw ConfigError("missing value", line);
  if (raw == "true") return true;
  if (raw == "false") return false;
  if (raw.front() == '"') {
    if (raw.size() < 2 || raw.back() != '"') throw ConfigError("unterminated string", line);
    std::string out;
    for (std::size_t i = 1; i + 1 < raw.size(); ++i) {
      if (raw[i] == '\\' && i + 2 < raw.size()) {
        const char n = raw[++i];
        out += n == 'n' ? '\n' : n == 't' ? '\t' : n;
      } else {
        out += raw[i];
      }
    }
    return out;
  }
  if (raw.front() == '[') {
    if (raw.back() != ']') throw ConfigError("unterminated array", line);
    std::vector<double> out;
    std::stringstream ss(raw.substr(1, raw.size() - 2));
    std::string item;
    while (std::getline(ss, item, ',')) {
      item = trim(item);
      if (item.empty()) continue;
      out.push_back(parse_number(item, line));
    }
    return out;
  }
  return parse_number(raw, line);
}

const char* type_name(const Value& v) {
  switch (v.index()) {
    case 0: return "number";
    case 1: return "boolean";
    case 2: return "string";
    default: return "array";
  }
}

}  // namespace

Document Document::parse(const std::string& text) {
  Document doc;
  doc.order_.push_back("");
  doc.data_[""];
  std::string section;
  std::istringstream in(text);
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const std::string s = trim(strip_comment(raw));
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']') throw ConfigError("malformed section header", line);
      section = trim(s.substr(1, s.size() - 2));
      if (!valid_name(section)) throw ConfigError("invalid section name '" + section + "'", line);
      if (doc.section_line_.count(section))
        throw ConfigError("duplicate section [" + section + "]", line);
      doc.section_line_[section] = line;
      doc.order_.push_back(section);
      doc.data_[section];
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError("expected key = value", line);
    const std::string key = trim(s.substr(0, eq));
    if (!valid_name(key)) throw ConfigError("invalid key '" + key + "'", line);
    auto& sec = doc.data_[section];
    if (sec.count(key))
      throw ConfigError("duplicate key '" + qualified(section, key) + "'", line);
    sec[key] = Entry{parse_value(trim(s.substr(eq + 1)), line), line};
  }
  return doc;
}

Document Document::load(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return parse(ss.str());
}

bool Document::has(const std::string& section, const std::string& key) const {
  return find(section, key) != nullptr;
}

bool Document::has_section(const std::string& section) const {
  return data_.count(section) > 0;
}

const Entry* Document::find(const std::string& section, const std::string& key) const {
  auto s = data_.find(section);
  if (s == data_.end()) return nullptr;
  auto k = s->second.find(key);
  return k == s->second.end() ? nullptr : &k->second;
}

int Document::line_of(const std::string& section, const std::string& key) const {
  const Entry* e = find(section, key);
  if (e) return e->line;
  auto s = section_line_.find(section);
  return s == section_line_.end() ? 0 : s->second;
}

const Entry& Document::require(const std::string& section, const std::string& key) const {
  const Entry* e = find(section, key);
  if (!e)
    throw ConfigError("missing required key '" + qualified(section, key) + "'",
                      line_of(section, key));
  return *e;
}

double Document::number(const std::string& section, const std::string& key,
                        double fallback) {
  if (!has(section, key)) return fallback;
  return number(section, key);
}

double Document::number(const std::string& section, const std::string& key) {
  const Entry& e = require(section, key);
  used_.insert({section, key});
  if (!std::holds_alternative<double>(e.value))
    throw ConfigError("key '" + qualified(section, key) + "' must be a number, got " +
                          type_name(e.value),
                      e.line);
  return std::get<double>(e.value);
}

long Document::integer(const std::string& section, const std::string& key, long fallback) {
  if (!has(section, key)) return fallback;
  const double v = number(section, key);
  if (v != std::floor(v) || std::abs(v) > 9e15)
    throw ConfigError("key '" + qualified(section, key) + "' must be an integer",
                      line_of(section, key));
  return static_cast<long>(v);
}

bool Document::boolean(const std::string& section, const std::string& key, bool fallback) {
  if (!has(section, key)) return fallback;
  const Entry& e = require(section, key);
  used_.insert({section, key});
  if (!std::holds_alternative<bool>(e.value))
    throw ConfigError("key '" + qualified(section, key) + "' must be true or false", e.line);
  return std::get<bool>(e.value);
}

std::string Document::string(const std::string& section, const std::string& key,
                             const std::string& fallback) {
  if (!has(section, key)) return fallback;
  const Entry& e = require(section, key);
  used_.insert({section, key});
  if (!std::holds_alternative<std::string>(e.value))
    throw ConfigError("key '" + qualified(section, key) + "' must be a string", e.line);
  return std::get<std::string>(e.value);
}

std::vector<double> Document::array(const std::string& section, const std::string& key,
                                    const std::vector<double>& fallback) {
  if (!has(section, key)) return fallback;
  const Entry& e = require(section, key);
  used_.insert({section, key});
  if (!std::holds_alternative<std::vector<double>>(e.value))
    throw ConfigError("key '" + qualified(section, key) + "' must be an array of numbers",
                      e.line);
  return std::get<std::vector<double>>(e.value);
}

void Document::reject_unconsumed() const {
  for (const auto& name : order_) {
    const auto& sec = data_.at(name);
    // Report in file order.
    const std::pair<const std::string, Entry>* first = nullptr;
    for (const auto& kv : sec)
      if (!used_.count({name, kv.first}) && (!first || kv.second.line < first->second.line))
        first = &kv;
    if (first)
      throw ConfigError("unknown key '" + qualified(name, first->first) + "'",
                        first->second.line);
  }
}

}  // namespace obslab::config
