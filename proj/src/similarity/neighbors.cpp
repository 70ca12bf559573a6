#include <algorithm>
#include <cmath>
#include <numeric>

#include "wfn/errors.hpp"
#include "wfn/similarity.hpp"

namespace wfn {

double cosine_distance(const Eigen::Ref<const Eigen::RowVectorXd>& a,
                       const Eigen::Ref<const Eigen::RowVectorXd>& b) {
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) return 1.0;
  return 1.0 - a.dot(b) / (na * nb);
}

std::vector<std::size_t> knn(const Eigen::MatrixXd& space, std::size_t query, std::size_t k) {
  const auto n = static_cast<std::size_t>(space.rows());
  if (query >= n) {
    throw IndexError("knn: query row " + std::to_string(query) + " of " + std::to_string(n));
  }
  if (k >= n) {
    throw DimensionError("knn: k=" + std::to_string(k) + " must be below n=" + std::to_string(n));
  }
  std::vector<double> dist(n);
  for (std::size_t j = 0; j < n; ++j) {
    dist[j] = cosine_distance(space.row(static_cast<Eigen::Index>(query)),
                              space.row(static_cast<Eigen::Index>(j)));
  }
  std::vector<std::size_t> idx;
  idx.reserve(n - 1);
  for (std::size_t j = 0; j < n; ++j) {
    if (j != query) idx.push_back(j);
  }
  auto closer = [&](std::size_t x, std::size_t y) {
    return dist[x] != dist[y] ? dist[x] < dist[y] : x < y;
  };
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(), closer);
  idx.resize(k);
  return idx;
}

std::size_t default_k(std::size_t n) {
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(0.05 * static_cast<double>(n))));
}

double jaccard(std::span<const std::size_t> a, std::span<const std::size_t> b) {
  std::vector<std::size_t> sa(a.begin(), a.end()), sb(b.begin(), b.end());
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  sa.erase(std::unique(sa.begin(), sa.end()), sa.end());
  sb.erase(std::unique(sb.begin(), sb.end()), sb.end());
  std::vector<std::size_t> inter;
  std::set_intersection(sa.begin(), sa.end(), sb.begin(), sb.end(), std::back_inserter(inter));
  const std::size_t uni = sa.size() + sb.size() - inter.size();
  return uni == 0 ? 1.0 : static_cast<double>(inter.size()) / static_cast<double>(uni);
}

double lns(const Eigen::MatrixXd& s1, const Eigen::MatrixXd& s2, std::optional<std::size_t> k) {
  if (s1.rows() != s2.rows()) {
    throw DimensionError("lns: " + std::to_string(s1.rows()) + " rows vs " +
                         std::to_string(s2.rows()));
  }
  const auto n = static_cast<std::size_t>(s1.rows());
  if (n == 0) throw DimensionError("lns: empty spaces");
  const std::size_t kk = k.value_or(default_k(n));
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) total += jaccard(knn(s1, i, kk), knn(s2, i, kk));
  return total / static_cast<double>(n);
}

std::size_t count_zero_rows(const Eigen::MatrixXd& m) {
  std::size_t z = 0;
  for (Eigen::Index i = 0; i < m.rows(); ++i) z += m.row(i).isZero(0.0) ? 1 : 0;
  return z;
}

}  // namespace wfn
