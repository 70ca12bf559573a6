#include <cstdio>
#include <map>

#include "wfn/errors.hpp"
#include "wfn/similarity.hpp"

namespace wfn {

std::string to_string(Metric metric) { return metric == Metric::Cka ? "cka" : "lns"; }

Metric parse_metric(std::string_view name) {
  if (name == "cka") return Metric::Cka;
  if (name == "lns") return Metric::Lns;
  throw ConfigError("unknown metric '" + std::string(name) + "' (cka, lns)");
}

double similarity(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, Metric metric,
                  std::optional<std::size_t> k) {
  return metric == Metric::Cka ? linear_cka(a, b) : lns(a, b, k);
}

namespace {

std::string layer_of(const std::string& tap) { return tap.substr(0, tap.find('.')); }

/// Index of the last tap of every layer, in layer order.
std::vector<std::size_t> layer_outputs(const ActivationSet& set) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < set.size(); ++i) {
    if (i + 1 == set.size() || layer_of(set[i + 1].module_name) != layer_of(set[i].module_name)) {
      out.push_back(i);
    }
  }
  return out;
}

}  // namespace

SimilarityReport pairwise_layer_similarity(const ActivationSet& a, const ActivationSet& b,
                                           Metric metric, std::optional<std::size_t> k) {
  if (a.empty() || b.empty()) throw DataError("pairwise_layer_similarity: empty tap set");
  if (a.front().corpus_hash != b.front().corpus_hash) {
    throw DataError("activations come from different corpora or sentence orders");
  }
  SimilarityReport r;
  r.metric = metric;
  r.matrix.resize(static_cast<Eigen::Index>(a.size()), static_cast<Eigen::Index>(b.size()));
  for (const auto& t : a) r.row_labels.push_back(t.module_name);
  for (const auto& t : b) r.col_labels.push_back(t.module_name);
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < b.size(); ++j) {
      r.matrix(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          similarity(a[i].values, b[j].values, metric, k);
    }
  }

  std::map<std::string, std::size_t> b_index;
  for (std::size_t j = 0; j < b.size(); ++j) b_index[b[j].module_name] = j;
  std::vector<std::pair<std::size_t, std::size_t>> by_name;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (auto it = b_index.find(a[i].module_name); it != b_index.end()) by_name.emplace_back(i, it->second);
  }
  const bool same_modules = by_name.size() == a.size() && a.size() == b.size();
  const auto la = layer_outputs(a);
  const auto lb = layer_outputs(b);
  if (same_modules) {
    r.matched = by_name;
  } else if (la.size() == lb.size()) {
    r.whole_layer = true;
    for (std::size_t l = 0; l < la.size(); ++l) r.matched.emplace_back(la[l], lb[l]);
  } else if (!by_name.empty()) {
    r.matched = by_name;
  } else {
    throw DataError("no corresponding modules: module names are disjoint and layer counts differ (" +
                    std::to_string(la.size()) + " vs " + std::to_string(lb.size()) + ")");
  }
  double total = 0.0;
  for (auto [i, j] : r.matched) total += r.matrix(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  r.aggregate = total / static_cast<double>(r.matched.size());
  return r;
}

Eigen::MatrixXd self_similarity(const ActivationSet& taps) {
  const auto n = static_cast<Eigen::Index>(taps.size());
  Eigen::MatrixXd m = Eigen::MatrixXd::Identity(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      m(i, j) = m(j, i) = linear_cka(taps[static_cast<std::size_t>(i)].values,
                                     taps[static_cast<std::size_t>(j)].values);
    }
  }
  return m;
}

std::string heatmap_csv(std::span<const std::string> row_labels,
                        std::span<const std::string> col_labels, const Eigen::MatrixXd& m) {
  if (row_labels.size() != static_cast<std::size_t>(m.rows()) ||
      col_labels.size() != static_cast<std::size_t>(m.cols())) {
    throw DimensionError("heatmap_csv: label counts do not match the matrix");
  }
  std::string out = "module";
  for (const auto& c : col_labels) out += "," + c;
  out += "\n";
  char buf[32];
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    out += row_labels[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      std::snprintf(buf, sizeof buf, ",%.9f", m(i, j));
      out += buf;
    }
    out += "\n";
  }
  return out;
}

}  // namespace wfn
