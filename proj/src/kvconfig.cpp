#include "toma/kvconfig.hpp"

#include <cctype>
#include <fstream>
#include <limits>
#include <sstream>

namespace toma {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

}  // namespace

std::vector<KvEntry> parse_kv_text(const std::string& text, const std::string& origin) {
  std::vector<KvEntry> out;
  std::istringstream in(text);
  std::string raw;
  int lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    std::string line = raw;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected key=value, got '" +
                        trim(raw) + "'");
    }
    KvEntry e;
    e.key = trim(line.substr(0, eq));
    e.value = trim(line.substr(eq + 1));
    e.line = lineno;
    if (e.key.empty()) {
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
    }
    out.push_back(std::move(e));
  }
  return out;
}

std::vector<KvEntry> parse_kv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_kv_text(buf.str(), path);
}

KvReader::KvReader(std::vector<KvEntry> entries) : entries_(std::move(entries)) {
  for (const auto& e : entries_) seen_[e.key] = false;
}

const KvEntry* KvReader::find(const std::string& key) const {
  const KvEntry* hit = nullptr;
  for (const auto& e : entries_) {
    if (e.key == key) hit = &e;  // later entries override earlier ones
  }
  if (hit) seen_[key] = true;
  return hit;
}

bool KvReader::has(const std::string& key) const { return find(key) != nullptr; }

double KvReader::get_double(const std::string& key, double fallback) {
  const KvEntry* e = find(key);
  if (!e) return fallback;
  if (e->value == "inf") return std::numeric_limits<double>::infinity();
  try {
    std::size_t pos = 0;
    const double v = std::stod(e->value, &pos);
    if (pos != e->value.size()) throw std::invalid_argument("");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("line " + std::to_string(e->line) + ": invalid number for '" + key + "': '" +
                      e->value + "'");
  }
}

long long KvReader::get_int(const std::string& key, long long fallback) {
  const KvEntry* e = find(key);
  if (!e) return fallback;
  try {
    std::size_t pos = 0;
    const long long v = std::stoll(e->value, &pos);
    if (pos != e->value.size()) throw std::invalid_argument("");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("line " + std::to_string(e->line) + ": invalid integer for '" + key +
                      "': '" + e->value + "'");
  }
}

std::string KvReader::get_string(const std::string& key, const std::string& fallback) {
  const KvEntry* e = find(key);
  return e ? e->value : fallback;
}

bool KvReader::get_bool(const std::string& key, bool fallback) {
  const KvEntry* e = find(key);
  if (!e) return fallback;
  if (e->value == "true" || e->value == "1") return true;
  if (e->value == "false" || e->value == "0") return false;
  throw ConfigError("line " + std::to_string(e->line) + ": invalid boolean for '" + key + "': '" +
                    e->value + "'");
}

void KvReader::finish() const {
  for (const auto& e : entries_) {
    const auto it = seen_.find(e.key);
    if (it == seen_.end() || !it->second) {
      throw ConfigError("line " + std::to_string(e.line) + ": unknown key '" + e.key + "'");
    }
  }
}

}  // namespace toma
