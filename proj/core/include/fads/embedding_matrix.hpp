#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace fads {

/// Dense row-major float32 matrix whose rows are addressable by id.
/// Validated on construction: uniform dimension, finite entries, unique ids.
class EmbeddingMatrix {
 public:
  EmbeddingMatrix() = default;

  /// `ids` may be empty, in which case row i is named std::to_string(i).
  EmbeddingMatrix(std::size_t dim, std::vector<float> data, std::vector<std::string> ids = {});

  static EmbeddingMatrix from_rows(const std::vector<std::vector<float>>& rows,
                                   std::vector<std::string> ids = {});

  std::size_t dim() const noexcept { return dim_; }
  std::size_t row_count() const noexcept { return ids_.size(); }
  bool empty() const noexcept { return ids_.empty(); }

  std::span<const float> row(std::size_t i) const {
    return {data_.data() + i * dim_, dim_};
  }
  /// Euclidean norm of row i, computed in double at construction.
  double row_norm(std::size_t i) const { return norms_[i]; }

  const std::string& id(std::size_t i) const { return ids_[i]; }
  const std::vector<std::string>& ids() const noexcept { return ids_; }
  std::optional<std::size_t> find(std::string_view id) const;

  const std::vector<float>& data() const noexcept { return data_; }

  /// Rows copied in the given order, ids carried along.
  EmbeddingMatrix select_rows(std::span<const std::size_t> rows) const;

 private:
  std::size_t dim_ = 0;
  std::vector<float> data_;
  std::vector<std::string> ids_;
  std::vector<double> norms_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Sidecar format: "FADSEMB1", u32le rows, u32le dim, rows*dim f32le, row-major.
void write_embedding_sidecar(const std::filesystem::path& path, const EmbeddingMatrix& matrix);
void write_embedding_sidecar(const std::filesystem::path& path, std::size_t dim,
                             std::span<const float> data);

/// Rows come back unnamed; callers bind ids through the records that reference them.
EmbeddingMatrix read_embedding_sidecar(const std::filesystem::path& path);

}  // namespace fads
