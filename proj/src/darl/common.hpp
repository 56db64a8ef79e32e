// Shared utilities: error taxonomy, deterministic RNG, text and binary encoding.
#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace darl {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Error taxonomy. The C API maps each type to a status code.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};
struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};
struct NotReadyError : std::runtime_error {
  explicit NotReadyError(const std::string& msg) : std::runtime_error(msg) {}
};
struct DataError : std::runtime_error {
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};
struct IoError : std::runtime_error {
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

// Deterministic RNG. mt19937_64 is bit-exact across platforms; the
// distributions are implemented here because the standard library's are not.
class Rng {
 public:
  explicit Rng(uint64_t seed) : eng_(seed) {}

  uint64_t next_u64() { return eng_(); }

  // Uniform in [0, 1) with 53-bit resolution.
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n). Modulo bias is negligible for n << 2^64.
  int uniform_int(int n) { return static_cast<int>(eng_() % static_cast<uint64_t>(n)); }

  // Standard normal via Box-Muller, with the paired draw cached.
  double normal();

  VectorXd uniform_vec(int n, double lo, double hi);
  VectorXd normal_vec(int n);
  MatrixXd normal_mat(int rows, int cols);  // filled column by column

  // Derive an independent stream seed (splitmix64 finalizer).
  static uint64_t derive(uint64_t seed, uint64_t stream);

 private:
  std::mt19937_64 eng_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// Shortest decimal representation that round-trips a double exactly.
std::string fmt_double(double x);
double parse_double(std::string_view text, const std::string& what);
int64_t parse_int(std::string_view text, const std::string& what);

std::vector<std::string> split_ws(std::string_view line);
std::string trim(std::string_view s);

// FNV-1a 64-bit, used for content-addressed caching and provenance.
uint64_t fnv1a(std::string_view bytes, uint64_t h = 1469598103934665603ull);
uint64_t fnv1a_file(const std::filesystem::path& path);
std::string hex64(uint64_t v);

// Little-endian scalar IO for the checkpoint format.
void write_u32_le(std::ostream& os, uint32_t v);
uint32_t read_u32_le(std::istream& is);
void write_f64_le(std::ostream& os, double v);
double read_f64_le(std::istream& is);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view content);

}  // namespace darl
