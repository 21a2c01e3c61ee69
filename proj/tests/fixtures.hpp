#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "modist/synthvid.hpp"

namespace fixtures {

inline std::filesystem::path temp_dir(const std::string& name) {
  static const std::string run = std::to_string(std::random_device{}());
  auto p = std::filesystem::temp_directory_path() / ("modist_test_" + run) / name;
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

// Small three-split corpus shared by the slower tests; generated once.
inline const std::filesystem::path& tiny_dataset() {
  static const std::filesystem::path dir = [] {
    auto d = temp_dir("tiny_dataset");
    modist::SceneDistribution dist;
    modist::generate_dataset(dist, 64, 11, d, modist::Split::pretrain, 0);
    modist::generate_dataset(dist, 32, 12, d, modist::Split::probe_train, 64);
    modist::generate_dataset(dist, 32, 13, d, modist::Split::probe_test, 96);
    return d;
  }();
  return dir;
}

// The default corpus (512 / 256 / 256, seed 0), as written by gen-data.
inline const std::filesystem::path& default_corpus() {
  static const std::filesystem::path dir = [] {
    auto d = temp_dir("default_corpus");
    modist::generate_corpus(modist::SceneDistribution{}, 512, 256, 0, d);
    return d;
  }();
  return dir;
}

}  // namespace fixtures
