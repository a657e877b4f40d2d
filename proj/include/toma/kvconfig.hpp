#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace toma {

// Flat key=value configuration text. '#' starts a comment, blank lines are
// skipped. Parse errors report 1-based line numbers.
struct KvEntry {
  std::string key;
  std::string value;
  int line = 0;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::vector<KvEntry> parse_kv_text(const std::string& text, const std::string& origin);
std::vector<KvEntry> parse_kv_file(const std::string& path);

// Typed access over parsed entries with unknown-key detection. Every key that
// the owning config understands must be declared via the get_* calls before
// finish() is invoked.
class KvReader {
 public:
  explicit KvReader(std::vector<KvEntry> entries);

  bool has(const std::string& key) const;
  double get_double(const std::string& key, double fallback);
  long long get_int(const std::string& key, long long fallback);
  std::string get_string(const std::string& key, const std::string& fallback);
  bool get_bool(const std::string& key, bool fallback);

  // Throws ConfigError if any entry was never consumed (unknown key).
  void finish() const;

 private:
  const KvEntry* find(const std::string& key) const;
  std::vector<KvEntry> entries_;
  mutable std::map<std::string, bool> seen_;
};

}  // namespace toma
