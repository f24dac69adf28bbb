#pragma once

#include <atomic>
#include <cmath>
#include <filesystem>
#include <string>

#include <unistd.h>

#include "echomi/image.hpp"
#include "echomi/rng.hpp"

namespace echomi::test {

/// Scratch directory removed on scope exit.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("echomi_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline double uniform(Rng& rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }

inline int uniform_int(Rng& rng, int lo, int hi) {
  return lo + static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(hi - lo + 1)));
}

/// Dark disk on a bright field.
inline Image disk_image(int w, int h, double cx, double cy, double r, double inside = 0.1, double outside = 0.9) {
  Image img(w, h, outside);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (std::hypot(x - cx, y - cy) <= r) img(x, y) = inside;
  return img;
}

inline Mask disk_mask(int w, int h, double cx, double cy, double r) {
  Mask m(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) m(x, y) = std::hypot(x - cx, y - cy) <= r;
  return m;
}

/// Symmetric Hausdorff distance between the set pixels of two masks.
inline double hausdorff(const Mask& a, const Mask& b) {
  auto directed = [](const Mask& from, const Mask& to) {
    double worst = 0.0;
    for (int y = 0; y < from.height(); ++y)
      for (int x = 0; x < from.width(); ++x) {
        if (!from(x, y)) continue;
        double best = INFINITY;
        for (int v = 0; v < to.height(); ++v)
          for (int u = 0; u < to.width(); ++u)
            if (to(u, v)) best = std::min(best, std::hypot(u - x, v - y));
        worst = std::max(worst, best);
      }
    return worst;
  };
  return std::max(directed(a, b), directed(b, a));
}

}  // namespace echomi::test
