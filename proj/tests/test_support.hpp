#pragma once

#include "fovkit/image.hpp"
#include "fovkit/rng.hpp"

#include <filesystem>
#include <optional>
#include <string>

namespace testsupport {

using namespace fovkit;

template <class Fn>
std::optional<ErrorKind> thrown_kind(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  return std::nullopt;
}

inline GridF random_grid(int h, int w, Rng& rng, float lo = -1.0f, float hi = 1.0f) {
  GridF g(h, w);
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    g.data()[i] = static_cast<float>(rng.uniform(lo, hi));
  }
  return g;
}

inline NormalizedSlice random_slice(int h, int w, Rng& rng) {
  NormalizedSlice s;
  s.values = random_grid(h, w, rng);
  s.spacing = {1.0, 1.0};
  return s;
}

inline HuSlice hu_constant(int h, int w, float value) {
  HuSlice s;
  s.values = GridF::Constant(h, w, value);
  s.spacing = {1.0, 1.0};
  return s;
}

inline GridB random_mask(int h, int w, Rng& rng, double p = 0.5) {
  GridB m(h, w);
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    m.data()[i] = rng.uniform() < p;
  }
  return m;
}

// Scratch directory under the system temp path, unique per test tag.
inline std::filesystem::path scratch_dir(const std::string& tag) {
  const auto dir = std::filesystem::temp_directory_path() / ("fovkit_test_" + tag);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::string file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

}  // namespace testsupport
