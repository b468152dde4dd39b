#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace sfbd {

enum class DatasetTag { clean, noisy, denoised };

std::string_view to_string(DatasetTag tag);
DatasetTag parse_tag(std::string_view s);

// A tagged n x d point set. Storage is row-major (one point per row), which is
// the same memory layout as a column-major d x n Eigen matrix, so `matrix()`
// views every point as a column.
struct Dataset {
  std::size_t dim = 1;
  std::vector<double> points;
  DatasetTag tag = DatasetTag::clean;
  std::string origin;
  std::vector<std::uint64_t> lineage;

  Dataset() = default;
  Dataset(std::size_t d, std::vector<double> pts, DatasetTag t,
          std::string org = {}, std::vector<std::uint64_t> lin = {});

  std::size_t size() const { return dim == 0 ? 0 : points.size() / dim; }
  bool empty() const { return points.empty(); }

  std::span<const double> row(std::size_t i) const {
    return {points.data() + i * dim, dim};
  }
  std::span<double> row(std::size_t i) { return {points.data() + i * dim, dim}; }

  Eigen::Map<const Eigen::MatrixXd> matrix() const {
    return {points.data(), static_cast<Eigen::Index>(dim),
            static_cast<Eigen::Index>(size())};
  }
  Eigen::Map<Eigen::MatrixXd> matrix() {
    return {points.data(), static_cast<Eigen::Index>(dim),
            static_cast<Eigen::Index>(size())};
  }

  // Distribution identity of the source, i.e. `origin` up to the first '|'.
  std::string_view source() const;

  // Throws ShapeError / NumericError when the invariants are violated.
  void validate() const;
};

Dataset subset(const Dataset& ds, std::span<const std::size_t> indices);
// Set union used for clean-sample injection; `a` keeps its tag and origin.
Dataset concat(const Dataset& a, const Dataset& b);

Eigen::VectorXd sample_mean(const Dataset& ds);
Eigen::MatrixXd sample_covariance(const Dataset& ds);

}  // namespace sfbd
