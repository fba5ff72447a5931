#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include "fads/corpus.hpp"
#include "fads/random.hpp"
#include "fads/synthetic.hpp"

namespace fads::testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "fads") {
    static std::atomic<int> counter{0};
    const auto stamp = std::chrono::steady_clock::now().time_since_epoch().count();
    path_ = std::filesystem::temp_directory_path() /
            (tag + "_" + std::to_string(stamp) + "_" + std::to_string(counter++));
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

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

inline void spit(const std::filesystem::path& p, const std::string& text) {
  std::ofstream f(p, std::ios::binary);
  f << text;
}

inline SyntheticAttribute gender(double male = 0.5) { return {"gender", {"Male", "Female"}, {male, 1.0 - male}}; }

inline SyntheticAttribute race(std::vector<double> p = {0.5, 0.3, 0.2}) {
  return {"race", {"White", "Black", "Asian"}, std::move(p)};
}

inline SyntheticSpec small_spec(std::vector<SyntheticAttribute> attrs, std::size_t n, std::uint64_t seed,
                                std::size_t queries = 50) {
  SyntheticSpec s;
  s.attributes = std::move(attrs);
  s.pool_size = n;
  s.query_count = queries;
  s.seed = seed;
  s.leakage = 0.5;
  return s;
}

/// Writes a synthetic dataset (inline embeddings) and returns its directory.
inline std::filesystem::path write_dataset(const TempDir& dir, const std::string& name, const SyntheticSpec& spec,
                                           bool sidecar = false) {
  const auto d = dir / name;
  write_synthetic(generate_synthetic(spec), d, sidecar);
  return d;
}

/// Snapshot of every regular file under `root`: relative path -> contents.
inline std::vector<std::pair<std::string, std::string>> tree(const std::filesystem::path& root) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& e : std::filesystem::recursive_directory_iterator(root))
    if (e.is_regular_file())
      out.emplace_back(std::filesystem::relative(e.path(), root).generic_string(), slurp(e.path()));
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace fads::testing
