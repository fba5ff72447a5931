#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "fads/corpus.hpp"

namespace fads {

struct SyntheticAttribute {
  std::string name;
  std::vector<std::string> categories;
  /// One entry per effective category ("Unknown" last when allowed).
  std::vector<double> proportions;
  bool allow_unknown = false;
};

/// Gaussian-blob corpus. Each item sits at
///   topic_center[t] + label_offset[y] + leakage * sum_a attribute_offset[a][c] + noise * N(0, I)
/// so leakage = 0 leaves the geometry independent of the sensitive attributes.
struct SyntheticSpec {
  std::vector<SyntheticAttribute> attributes;
  double positive_rate = 0.5;
  std::size_t pool_size = 2000;
  std::size_t query_count = 200;
  std::size_t dim = 16;
  std::size_t topics = 8;
  double topic_spread = 3.0;
  double label_separation = 1.0;
  double leakage = 0.0;
  double noise = 1.0;
  std::uint64_t seed = 0;
};

struct SyntheticData {
  SensitiveAttributeSchema schema;
  Pool pool;
  QuerySet queries;
};

/// Category and label counts follow the proportions exactly (largest
/// remainder, ties to the earlier category) in both pool and query set.
/// Throws BadProportions.
SyntheticData generate_synthetic(const SyntheticSpec& spec);

/// Largest-remainder apportionment of n over `proportions`. Throws BadProportions.
std::vector<std::size_t> exact_quotas(std::size_t n, const std::vector<double>& proportions);

/// Writes schema.records, pool.records and queries.records into `dir`; with
/// `sidecar` the embeddings go to pool.emb / queries.emb instead of inline.
void write_synthetic(const SyntheticData& data, const std::filesystem::path& dir, bool sidecar = false);

}  // namespace fads
