#include <numeric>

#include "wfn/errors.hpp"
#include "wfn/similarity.hpp"

namespace wfn {

Eigen::MatrixXd center_columns(const Eigen::MatrixXd& m) {
  return m.rowwise() - m.colwise().mean();
}

double linear_cka(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  if (a.rows() != b.rows()) {
    throw DimensionError("linear_cka: " + std::to_string(a.rows()) + " rows vs " +
                         std::to_string(b.rows()));
  }
  if (a.rows() < 2) throw DimensionError("linear_cka: need at least 2 rows");
  const Eigen::MatrixXd ca = center_columns(a);
  const Eigen::MatrixXd cb = center_columns(b);
  if (ca.isZero(0.0) || cb.isZero(0.0)) return 0.0;
  const double cross = (ca.transpose() * cb).squaredNorm();
  const double norm_a = (ca.transpose() * ca).norm();
  const double norm_b = (cb.transpose() * cb).norm();
  return cross / (norm_a * norm_b);
}

double normalize_against_benchmark(double raw, std::span<const double> benchmark) {
  if (benchmark.empty()) throw ConfigError("benchmark list is empty");
  const double mean =
      std::accumulate(benchmark.begin(), benchmark.end(), 0.0) / static_cast<double>(benchmark.size());
  if (!(mean > 0.0)) throw NumericError("benchmark mean must be positive");
  return 100.0 * raw / mean;
}

}  // namespace wfn
