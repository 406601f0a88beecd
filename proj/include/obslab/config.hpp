#pragma once

#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace obslab::config {

// Error carrying the 1-based line of the offending entry (0 when unknown).
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& msg, int line = 0);
  int line() const noexcept { return line_; }

 private:
  int line_;
};

using Value = std::variant<double, bool, std::string, std::vector<double>>;

struct Entry {
  Value value;
  int line = 0;
};

// Flat TOML subset: `key = value` pairs, `[section]` headers, `#` comments.
// Values: numbers, true/false, "strings", and arrays of numbers.
class Document {
 public:
  static Document parse(const std::string& text);
  static Document load(const std::string& path);

  bool has(const std::string& section, const std::string& key) const;
  const Entry* find(const std::string& section, const std::string& key) const;

  // Typed accessors mark the key as consumed. `section` "" is the top level.
  double number(const std::string& section, const std::string& key, double fallback);
  double number(const std::string& section, const std::string& key);
  long integer(const std::string& section, const std::string& key, long fallback);
  bool boolean(const std::string& section, const std::string& key, bool fallback);
  std::string string(const std::string& section, const std::string& key,
                     const std::string& fallback);
  std::vector<double> array(const std::string& section, const std::string& key,
                            const std::vector<double>& fallback);

  int line_of(const std::string& section, const std::string& key) const;
  bool has_section(const std::string& section) const;
  const std::vector<std::string>& sections() const { return order_; }

  // Throws for any key never read through an accessor.
  void reject_unconsumed() const;

 private:
  const Entry& require(const std::string& section, const std::string& key) const;

  std::map<std::string, std::map<std::string, Entry>> data_;
  std::map<std::string, int> section_line_;
  std::vector<std::string> order_;
  std::set<std::pair<std::string, std::string>> used_;
};

std::string qualified(const std::string& section, const std::string& key);

}  // namespace obslab::config
