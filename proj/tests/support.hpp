#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "rcd/random.hpp"

namespace rcd::test {

// Fresh directory under the system temp dir, removed on destruction.
struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& tag) {
    path = std::filesystem::temp_directory_path() /
           ("rcd_test_" + tag + "_" + std::to_string(reinterpret_cast<std::uintptr_t>(this)));
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
};

// Integer-valued series with occasional spikes, like binned demand.
inline std::vector<double> random_series(Rng& rng, std::size_t n = 48, double base = 20.0) {
  std::vector<double> s(n);
  const double level = rng.uniform(0.0, base);
  for (auto& v : s) {
    v = static_cast<double>(rng.poisson(level));
    if (rng.uniform() < 0.05) v += static_cast<double>(rng.below(60));
  }
  return s;
}

inline std::vector<double> random_values(Rng& rng, std::size_t n, double lo, double hi) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(lo, hi);
  return v;
}

template <class T>
void shuffle(Rng& rng, std::vector<T>& v) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.below(i)]);
}

}  // namespace rcd::test
