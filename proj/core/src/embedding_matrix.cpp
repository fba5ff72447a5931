#include "fads/embedding_matrix.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "fads/error.hpp"

namespace fads {

namespace {

constexpr char kMagic[8] = {'F', 'A', 'D', 'S', 'E', 'M', 'B', '1'};

void put_u32le(std::ostream& out, std::uint32_t v) {
  const unsigned char bytes[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                                  static_cast<unsigned char>(v >> 16),
                                  static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(bytes), 4);
}

std::uint32_t get_u32le(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

}  // namespace

EmbeddingMatrix::EmbeddingMatrix(std::size_t dim, std::vector<float> data,
                                 std::vector<std::string> ids)
    : dim_(dim), data_(std::move(data)), ids_(std::move(ids)) {
  if (dim_ == 0) {
    if (!data_.empty() || !ids_.empty())
      throw Error(ErrorKind::kDimensionMismatch, "matrix with rows must have dim > 0");
    return;
  }
  if (data_.size() % dim_ != 0)
    throw Error(ErrorKind::kDimensionMismatch,
                "data length " + std::to_string(data_.size()) + " is not a multiple of dim " +
                    std::to_string(dim_));
  const std::size_t rows = data_.size() / dim_;
  if (ids_.empty()) {
    ids_.reserve(rows);
    for (std::size_t i = 0; i < rows; ++i) ids_.push_back(std::to_string(i));
  } else if (ids_.size() != rows) {
    throw Error(ErrorKind::kDimensionMismatch, "expected " + std::to_string(rows) +
                                                   " ids, got " + std::to_string(ids_.size()));
  }
  norms_.resize(rows);
  index_.reserve(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    double sq = 0.0;
    for (std::size_t c = 0; c < dim_; ++c) {
      const float v = data_[r * dim_ + c];
      if (!std::isfinite(v))
        throw Error(ErrorKind::kNonFiniteValue,
                    "row " + ids_[r] + " column " + std::to_string(c) + " is not finite");
      sq += static_cast<double>(v) * v;
    }
    norms_[r] = std::sqrt(sq);
    if (!index_.emplace(ids_[r], r).second) throw Error(ErrorKind::kDuplicateId, ids_[r]);
  }
}

EmbeddingMatrix EmbeddingMatrix::from_rows(const std::vector<std::vector<float>>& rows,
                                           std::vector<std::string> ids) {
  if (rows.empty()) return EmbeddingMatrix{};
  const std::size_t dim = rows.front().size();
  std::vector<float> data;
  data.reserve(rows.size() * dim);
  for (const auto& r : rows) {
    if (r.size() != dim)
      throw Error(ErrorKind::kDimensionMismatch,
                  "expected " + std::to_string(dim) + ", got " + std::to_string(r.size()));
    data.insert(data.end(), r.begin(), r.end());
  }
  return EmbeddingMatrix(dim, std::move(data), std::move(ids));
}

std::optional<std::size_t> EmbeddingMatrix::find(std::string_view id) const {
  const auto it = index_.find(std::string(id));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

EmbeddingMatrix EmbeddingMatrix::select_rows(std::span<const std::size_t> rows) const {
  std::vector<float> data;
  data.reserve(rows.size() * dim_);
  std::vector<std::string> ids;
  ids.reserve(rows.size());
  for (std::size_t r : rows) {
    const auto src = row(r);
    data.insert(data.end(), src.begin(), src.end());
    ids.push_back(ids_[r]);
  }
  if (rows.empty()) return EmbeddingMatrix{};
  return EmbeddingMatrix(dim_, std::move(data), std::move(ids));
}

void write_embedding_sidecar(const std::filesystem::path& path, const EmbeddingMatrix& matrix) {
  write_embedding_sidecar(path, matrix.dim(), matrix.data());
}

void write_embedding_sidecar(const std::filesystem::path& path, std::size_t dim,
                             std::span<const float> data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::kIoFailure, path.string());
  const std::size_t rows = dim == 0 ? 0 : data.size() / dim;
  out.write(kMagic, sizeof kMagic);
  put_u32le(out, static_cast<std::uint32_t>(rows));
  put_u32le(out, static_cast<std::uint32_t>(dim));
  for (float v : data) put_u32le(out, std::bit_cast<std::uint32_t>(v));
  if (!out) throw Error(ErrorKind::kIoFailure, path.string());
}

EmbeddingMatrix read_embedding_sidecar(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIoFailure, path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, 8) != 0)
    throw Error(ErrorKind::kMalformedRecord, path.string() + ": bad sidecar header");
  const std::uint32_t rows = get_u32le(bytes.data() + 8);
  const std::uint32_t dim = get_u32le(bytes.data() + 12);
  const std::size_t expected = 16 + static_cast<std::size_t>(rows) * dim * 4;
  if (bytes.size() != expected)
    throw Error(ErrorKind::kDimensionMismatch,
                path.string() + ": header promises " + std::to_string(expected) +
                    " bytes, file has " + std::to_string(bytes.size()));
  std::vector<float> data(static_cast<std::size_t>(rows) * dim);
  for (std::size_t i = 0; i < data.size(); ++i)
    data[i] = std::bit_cast<float>(get_u32le(bytes.data() + 16 + 4 * i));
  if (rows == 0) return EmbeddingMatrix{};
  return EmbeddingMatrix(dim, std::move(data));
}

}  // namespace fads
