#pragma once

#include <Eigen/Dense>

#include <atomic>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstdlib>
#include <limits>
#include <mutex>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace rscope {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;
using Complex = std::complex<double>;
using Index = Eigen::Index;

// Error taxonomy, mirrored by the CLI exit codes: argument and dimension
// errors exit 2, format errors 3, numerical errors 4.
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class DimensionError : public ArgumentError {
 public:
  using ArgumentError::ArgumentError;
};

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// SplitMix64 finalizer, used to derive independent stream seeds.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline std::uint64_t mix64(std::uint64_t a, std::uint64_t b) {
  return mix64(a ^ mix64(b));
}

/// Seeded random stream. Gaussian draws use Box-Muller on top of
/// mt19937_64 so sequences are identical across standard libraries,
/// which the byte-identical reproducibility guarantees rely on.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t next_u64() { return eng_(); }

  /// Uniform in (0, 1].
  double uniform() {
    return static_cast<double>((eng_() >> 11) + 1) * 0x1.0p-53;
  }

  /// Uniform integer in [0, n). Rejection sampling keeps it exact.
  std::uint64_t uniform_index(std::uint64_t n) {
    if (n == 0) throw ArgumentError("uniform_index: empty range");
    const std::uint64_t max = std::numeric_limits<std::uint64_t>::max();
    const std::uint64_t limit = max - max % n;
    std::uint64_t x;
    do {
      x = eng_();
    } while (x >= limit);
    return x % n;
  }

  double gaussian() {
    const double u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
  }

  Complex gaussian_complex() {
    const double re = gaussian();
    const double im = gaussian();
    return {re, im};
  }

  Vec gaussian_vector(Index n) {
    Vec v(n);
    for (Index i = 0; i < n; ++i) v(i) = gaussian();
    return v;
  }

  CVec gaussian_cvector(Index n) {
    CVec v(n);
    for (Index i = 0; i < n; ++i) v(i) = gaussian_complex();
    return v;
  }

 private:
  std::mt19937_64 eng_;
};

/// Worker cap: RSCOPE_THREADS if set (clamped to >= 1), else hardware.
inline unsigned thread_limit() {
  if (const char* env = std::getenv("RSCOPE_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && v >= 1) return static_cast<unsigned>(v);
    return 1;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw ? hw : 1;
}

/// Runs body(i) for i in [0, count). Results must go to per-index slots;
/// under that discipline output is identical for any worker count.
template <typename F>
void parallel_for(std::size_t count, F&& body) {
  const std::size_t workers =
      std::min<std::size_t>(thread_limit(), count);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_lock;
  auto run = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count || failed.load()) return;
      try {
        body(i);
      } catch (...) {
        std::lock_guard<std::mutex> guard(error_lock);
        if (!error) error = std::current_exception();
        failed.store(true);
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(run);
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace rscope
