#include "sfbd/dataset.hpp"

#include <cmath>

#include "sfbd/errors.hpp"

namespace sfbd {

std::string_view to_string(DatasetTag tag) {
  switch (tag) {
    case DatasetTag::clean:
      return "clean";
    case DatasetTag::noisy:
      return "noisy";
    case DatasetTag::denoised:
      return "denoised";
  }
  return "clean";
}

DatasetTag parse_tag(std::string_view s) {
  if (s == "clean") return DatasetTag::clean;
  if (s == "noisy") return DatasetTag::noisy;
  if (s == "denoised") return DatasetTag::denoised;
  throw ValidationError("tag", "unknown dataset tag '" + std::string(s) + "'");
}

Dataset::Dataset(std::size_t d, std::vector<double> pts, DatasetTag t,
                 std::string org, std::vector<std::uint64_t> lin)
    : dim(d),
      points(std::move(pts)),
      tag(t),
      origin(std::move(org)),
      lineage(std::move(lin)) {
  validate();
}

std::string_view Dataset::source() const {
  std::string_view o = origin;
  return o.substr(0, o.find('|'));
}

void Dataset::validate() const {
  if (dim == 0) throw ShapeError("dataset dimension must be positive");
  if (points.size() % dim != 0)
    throw ShapeError("dataset storage is not a multiple of the dimension");
  for (std::size_t i = 0; i < points.size(); ++i)
    if (!std::isfinite(points[i]))
      throw NumericError("non-finite dataset entry", i);
}

Dataset subset(const Dataset& ds, std::span<const std::size_t> indices) {
  Dataset out;
  out.dim = ds.dim;
  out.tag = ds.tag;
  out.origin = ds.origin;
  out.lineage = ds.lineage;
  out.points.reserve(indices.size() * ds.dim);
  for (std::size_t i : indices) {
    if (i >= ds.size()) throw ShapeError("subset index out of range");
    auto r = ds.row(i);
    out.points.insert(out.points.end(), r.begin(), r.end());
  }
  return out;
}

Dataset concat(const Dataset& a, const Dataset& b) {
  if (a.dim != b.dim) throw ShapeError("concat: dimension mismatch");
  Dataset out = a;
  out.points.insert(out.points.end(), b.points.begin(), b.points.end());
  return out;
}

Eigen::VectorXd sample_mean(const Dataset& ds) {
  if (ds.empty()) throw DomainError("sample_mean: empty dataset");
  return ds.matrix().rowwise().mean();
}

Eigen::MatrixXd sample_covariance(const Dataset& ds) {
  const auto n = static_cast<double>(ds.size());
  if (ds.size() < 2) throw DomainError("sample_covariance: need >= 2 points");
  const Eigen::MatrixXd centred = ds.matrix().colwise() - sample_mean(ds);
  return centred * centred.transpose() / (n - 1.0);
}

}  // namespace sfbd
