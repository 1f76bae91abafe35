#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

namespace gazevlm::util {

// SHA-256 hex digest of a byte string.
std::string sha256_hex(const std::string& bytes);
std::string sha256_file_hex(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& bytes);

std::string to_lower(std::string s);

// Deterministic RNG. mt19937_64 output is fixed by the standard; the
// distribution helpers below avoid std::uniform_*_distribution, whose
// output is implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform integer in [0, n), n > 0. Rejection sampling, unbiased.
  std::uint64_t below(std::uint64_t n);

  // Uniform double in [0, 1) with 53 bits of precision.
  double unit_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  bool coin_flip() { return (next_u64() & 1u) != 0; }

 private:
  std::mt19937_64 engine_;
};

// Stateless mix for deriving independent per-item sub-seeds.
std::uint64_t splitmix64(std::uint64_t x);

}  // namespace gazevlm::util
