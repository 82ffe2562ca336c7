#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <string>

#include "ctc/model.hpp"
#include "ctc/synth.hpp"

namespace ctc::fixture {

// A few hundred titles; trains in well under a second.
inline SynthConfig small_world(std::uint64_t seed = 3) {
  SynthConfig c = SynthConfig::desk_default();
  c.seed = seed;
  c.labeled_size = 600;
  c.test_size = 200;
  c.groups = 300;
  c.consistency_groups = 100;
  c.nouns_per_leaf = 20;
  c.brands = 15;
  return c;
}

inline Hyperparams small_hp(std::uint64_t seed = 1) {
  Hyperparams hp;
  hp.dim = 16;
  hp.epochs = 5;
  hp.buckets = 5000;
  hp.seed = seed;
  return hp;
}

// Every level has a single label, so every title maps to `path`.
inline HierarchicalModel constant_model(const CategoryPath& path) {
  Hyperparams hp;
  hp.dim = 2;
  hp.buckets = 4;
  std::vector<FlatModel> levels;
  for (std::size_t i = 1; i <= path.depth(); ++i) {
    levels.push_back(FlatModel::from_parts(i, hp, Vocabulary{}, {truncate(path, i)},
                                           std::vector<float>(hp.buckets * hp.dim, 0.0f),
                                           std::vector<float>(hp.dim, 0.0f)));
  }
  return HierarchicalModel(std::move(levels), std::nullopt);
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("ctc-" + tag + "-" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::string str(const std::string& name = "") const {
    return name.empty() ? path_.string() : (path_ / name).string();
  }

 private:
  std::filesystem::path path_;
};

}  // namespace ctc::fixture
