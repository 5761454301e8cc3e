#pragma once

#include <cmath>
#include <filesystem>
#include <random>
#include <string>

#include "uavsec/scenario.hpp"

namespace testutil {

inline double rel_err(double got, double want) {
  const double scale = std::max(std::abs(want), 1e-300);
  return std::abs(got - want) / scale;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("uavsec-" + tag + "-" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::string str() const { return path_.string(); }

 private:
  std::filesystem::path path_;
};

/// Small scenario for fast environment and trainer tests.
inline uavsec::SimConfig small_config() {
  uavsec::SimConfig c = uavsec::load_config_text(R"({
    "schema_version": 1,
    "e_max_j": 1500,
    "training": {"episodes": 2, "hidden": [16, 8], "batch_size": 32, "buffer_capacity": 2000,
                 "checkpoint_every": 0}
  })");
  return c;
}

}  // namespace testutil
