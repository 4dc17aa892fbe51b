// Copyright 2026 The lfad Authors
// SPDX-License-Identifier: Apache-2.0

// Flat "key = value" configuration text. Lines starting with '#' are
// comments; keys are unique.

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace lfad {

std::uint64_t fnv1a_64(std::string_view text);

class KeyValueConfig {
 public:
  static KeyValueConfig parse(std::string_view text);
  static KeyValueConfig load(const std::filesystem::path& path);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  void set(const std::string& key, std::string value) { values_[key] = std::move(value); }
  void merge(const KeyValueConfig& other);

  std::string get(const std::string& key, const std::string& fallback) const;
  int get_int(const std::string& key, int fallback) const;
  long get_long(const std::string& key, long fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  double get_double(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<int> get_ints(const std::string& key, const std::vector<int>& fallback) const;

  const std::map<std::string, std::string>& entries() const { return values_; }

  // Sorted "key = value" lines; equal configurations give equal text.
  std::string canonical() const;
  std::uint64_t hash() const { return fnv1a_64(canonical()); }

 private:
  std::map<std::string, std::string> values_;
};

std::string join_ints(const std::vector<int>& values);

}  // namespace lfad
