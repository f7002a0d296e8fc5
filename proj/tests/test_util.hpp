#pragma once

#include <filesystem>
#include <random>
#include <string>

#include <gtest/gtest.h>

#include "renovor/volume.hpp"

namespace renovor::test {

/// Fresh empty directory under the system temp dir, removed on destruction.
class TempDir {
public:
  TempDir()
  {
    const auto *info = ::testing::UnitTest::GetInstance()->current_test_info();
    path_ = std::filesystem::temp_directory_path() /
            ("renovor_" + std::string(info->test_suite_name()) + "_" + info->name());
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() { std::filesystem::remove_all(path_); }
  TempDir(const TempDir &) = delete;
  TempDir &operator=(const TempDir &) = delete;

  const std::filesystem::path &path() const { return path_; }
  std::filesystem::path operator/(const std::string &name) const { return path_ / name; }

private:
  std::filesystem::path path_;
};

inline LabelVolume random_mask(const VolumeGeometry &g, double p, std::mt19937_64 &rng)
{
  std::bernoulli_distribution b(p);
  LabelVolume m(g);
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = b(rng) ? 1 : 0;
  return m;
}

inline VolumeGeometry cube(long n, double spacing = 1.0)
{
  return VolumeGeometry{{n, n, n}, {spacing, spacing, spacing}, {0, 0, 0}};
}

} // namespace renovor::test
