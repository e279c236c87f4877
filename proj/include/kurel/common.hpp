#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace kurel {

using KuId = std::int64_t;

/// Thrown for every contract violation in the toolkit (bad input, corrupt dump, bad config).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Relatedness classes in priority order: duplicate > direct > indirect > isolated.
/// The enum value doubles as the class index used by the classifiers and the
/// tie-breaking order of argmax decisions.
enum class Relation : int { duplicate = 0, direct = 1, indirect = 2, isolated = 3 };

inline constexpr int kNumRelations = 4;
inline constexpr Relation kAllRelations[kNumRelations] = {Relation::duplicate, Relation::direct,
                                                          Relation::indirect, Relation::isolated};

std::string_view to_string(Relation r);
Relation parse_relation(std::string_view s);

/// Non-fatal problems found while reading input. Each entry is one line of
/// the `*.skipped.log` files written by the CLI.
class SkipLog {
 public:
  void add(std::string entry) { entries_.push_back(std::move(entry)); }
  const std::vector<std::string>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  void write(const std::filesystem::path& path) const;

 private:
  std::vector<std::string> entries_;
};

// Warnings go to stderr unless a sink is installed (tests install a capturing sink).
using WarningSink = std::function<void(std::string_view)>;
void set_warning_sink(WarningSink sink);
void warn(std::string_view message);

std::string sha256_hex(std::string_view data);
std::string sha256_file(const std::filesystem::path& path);
/// First 8 bytes of the SHA-256 digest, for compact binary headers.
std::uint64_t sha256_u64(std::string_view data);

/// The single RNG type used for every seeded stage.
using Rng = std::mt19937_64;

/// Uniform integer in [0, n). Implemented locally so sampled values do not
/// depend on the standard library's distribution algorithms.
std::uint64_t uniform_index(Rng& rng, std::uint64_t n);
/// Uniform double in [0, 1).
double uniform_unit(Rng& rng);
/// Fisher-Yates shuffle driven by uniform_index.
template <class T>
void shuffle(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::size_t j = uniform_index(rng, i);
    std::swap(v[i - 1], v[j]);
  }
}
/// Derive an independent stream seed from a base seed and a salt (splitmix64).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t salt);

/// Read every non-empty line of a text file.
void for_each_line(const std::filesystem::path& path, const std::function<void(std::string_view)>& fn);
std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);

std::string to_lower_ascii(std::string_view s);

}  // namespace kurel
