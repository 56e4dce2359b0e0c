// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "icurate/error.hpp"

namespace icurate {

/// Dense embedding. Stored unnormalized; cosine normalizes on the fly.
struct EmbeddingVector {
  std::vector<double> values;

  EmbeddingVector() = default;
  explicit EmbeddingVector(std::vector<double> v) : values(std::move(v)) {}
  EmbeddingVector(std::initializer_list<double> v) : values(v) {}

  std::size_t dim() const { return values.size(); }
  std::span<const double> view() const { return values; }
  bool operator==(const EmbeddingVector&) const = default;
};

inline double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ContractError("dimension mismatch in dot product");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

/// dot(a,b) / (|a||b|). A zero vector has similarity 0 with everything.
inline double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  const double na = norm(a);
  const double nb = norm(b);
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot(a, b) / (na * nb);
}

inline double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b) {
  return cosine_similarity(a.view(), b.view());
}

/// Row-major block of unit-normalized copies, for many-to-many cosine scans.
class NormalizedMatrix {
 public:
  NormalizedMatrix() = default;
  explicit NormalizedMatrix(const std::vector<EmbeddingVector>& rows) {
    if (rows.empty()) return;
    dim_ = rows.front().dim();
    data_.reserve(rows.size() * dim_);
    for (const auto& r : rows) {
      if (r.dim() != dim_) throw ContractError("embedding dimensionality differs within a batch");
      const double n = norm(r.view());
      for (double v : r.values) data_.push_back(n == 0.0 ? 0.0 : v / n);
    }
    rows_ = rows.size();
  }

  std::size_t rows() const { return rows_; }
  std::size_t dim() const { return dim_; }
  std::span<const double> row(std::size_t i) const { return {data_.data() + i * dim_, dim_}; }

  double cosine(std::size_t i, std::size_t j) const {
    const double* a = data_.data() + i * dim_;
    const double* b = data_.data() + j * dim_;
    double s = 0.0;
    for (std::size_t k = 0; k < dim_; ++k) s += a[k] * b[k];
    return s;
  }

 private:
  std::vector<double> data_;
  std::size_t rows_ = 0;
  std::size_t dim_ = 0;
};

}  // namespace icurate
