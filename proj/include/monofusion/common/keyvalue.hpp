#pragma once

#include <charconv>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "monofusion/common/error.hpp"

namespace mf {

/// Plain-text configuration:
///
///   # comment
///   key = value               top-level entry (dotted names group keys: mvs.planes = 48 4 4)
///   [sphere]                  opens a new block; a block type may repeat
///   radius = 0.5              entries below a header belong to that block
///
/// Values are whitespace-separated tokens. Lookups of typed values raise FormatError with
/// the originating line when a value does not parse.
class KeyValueConfig {
 public:
  struct Entry {
    std::string value;
    int line = 0;
  };
  struct Block {
    std::string type;
    int line = 0;
    std::map<std::string, Entry> entries;

    [[nodiscard]] bool has(const std::string& key) const { return entries.count(key) != 0; }
  };

  static KeyValueConfig parse(std::istream& in, const std::string& origin = "<config>") {
    KeyValueConfig cfg;
    cfg.origin_ = origin;
    std::string line;
    int line_no = 0;
    Block* current = nullptr;
    while (std::getline(in, line)) {
      ++line_no;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      const std::string text = trim(line);
      if (text.empty()) continue;
      if (text.front() == '[') {
        if (text.back() != ']' || text.size() < 3)
          fail(ErrorCode::FormatError, origin + ":" + std::to_string(line_no) + ": malformed block header");
        cfg.blocks_.push_back(Block{trim(text.substr(1, text.size() - 2)), line_no, {}});
        current = &cfg.blocks_.back();
        continue;
      }
      const auto eq = text.find('=');
      if (eq == std::string::npos)
        fail(ErrorCode::FormatError, origin + ":" + std::to_string(line_no) + ": expected key = value");
      const std::string key = trim(text.substr(0, eq));
      const std::string value = trim(text.substr(eq + 1));
      if (key.empty())
        fail(ErrorCode::FormatError, origin + ":" + std::to_string(line_no) + ": empty key");
      auto& target = current ? current->entries : cfg.globals_;
      target[key] = Entry{value, line_no};
    }
    return cfg;
  }

  static KeyValueConfig parse_string(const std::string& text, const std::string& origin = "<string>") {
    std::istringstream in(text);
    return parse(in, origin);
  }

  static KeyValueConfig load(const std::string& path) {
    std::ifstream in(path);
    require(static_cast<bool>(in), ErrorCode::IoError, "cannot open config " + path);
    return parse(in, path);
  }

  void set(const std::string& key, const std::string& value) { globals_[key] = Entry{value, 0}; }

  [[nodiscard]] bool has(const std::string& key) const { return globals_.count(key) != 0; }
  [[nodiscard]] const std::vector<Block>& blocks() const noexcept { return blocks_; }
  [[nodiscard]] const std::map<std::string, Entry>& globals() const noexcept { return globals_; }
  [[nodiscard]] const std::string& origin() const noexcept { return origin_; }

  [[nodiscard]] std::optional<std::string> raw(const std::string& key) const {
    auto it = globals_.find(key);
    if (it == globals_.end()) return std::nullopt;
    used_.insert(key);
    return it->second.value;
  }

  template <typename T>
  [[nodiscard]] T get(const std::string& key, const T& fallback) const {
    auto it = globals_.find(key);
    if (it == globals_.end()) return fallback;
    used_.insert(key);
    return convert<T>(it->second, key);
  }

  template <typename T>
  [[nodiscard]] T require_value(const std::string& key) const {
    auto it = globals_.find(key);
    if (it == globals_.end()) fail(ErrorCode::FormatError, origin_ + ": missing key '" + key + "'");
    used_.insert(key);
    return convert<T>(it->second, key);
  }

  template <typename T>
  [[nodiscard]] T block_get(const Block& block, const std::string& key, const T& fallback) const {
    auto it = block.entries.find(key);
    if (it == block.entries.end()) return fallback;
    return convert<T>(it->second, block.type + "." + key);
  }

  /// Top-level keys never read through get/raw/require_value.
  [[nodiscard]] std::vector<std::string> unused_keys() const {
    std::vector<std::string> out;
    for (const auto& [k, _] : globals_)
      if (!used_.count(k)) out.push_back(k);
    return out;
  }

  template <typename T>
  T convert(const Entry& e, const std::string& key) const {
    std::istringstream ss(e.value);
    T out{};
    if constexpr (std::is_same_v<T, std::string>) {
      return e.value;
    } else if constexpr (std::is_same_v<T, bool>) {
      std::string s;
      ss >> s;
      if (s == "true" || s == "1" || s == "on" || s == "yes") return true;
      if (s == "false" || s == "0" || s == "off" || s == "no") return false;
      bad_value(e, key);
    } else if constexpr (std::is_arithmetic_v<T>) {
      if (!(ss >> out)) bad_value(e, key);
      std::string rest;
      if (ss >> rest) bad_value(e, key);
      return out;
    } else {
      // Fixed-size sequence (std::array) or std::vector of arithmetic values.
      using V = typename T::value_type;
      std::vector<V> items;
      V v{};
      while (ss >> v) items.push_back(v);
      if (!ss.eof()) bad_value(e, key);
      if constexpr (requires(T t) { t.resize(0); }) {
        return T(items.begin(), items.end());
      } else {
        if (items.size() != out.size()) bad_value(e, key);
        std::copy(items.begin(), items.end(), out.begin());
        return out;
      }
    }
    return out;
  }

 private:
  [[noreturn]] void bad_value(const Entry& e, const std::string& key) const {
    fail(ErrorCode::FormatError,
         origin_ + ":" + std::to_string(e.line) + ": bad value '" + e.value + "' for key '" + key + "'");
  }

  static std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
  }

  std::string origin_;
  std::map<std::string, Entry> globals_;
  std::vector<Block> blocks_;
  mutable std::set<std::string> used_;
};

}  // namespace mf
