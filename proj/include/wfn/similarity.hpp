#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "wfn/corpus.hpp"
#include "wfn/model.hpp"

namespace wfn {

/// n x d sentence representations of one module: row i is the mean of the
/// module's output over the tokens of sentence i.
struct ActivationMatrix {
  std::string model_id;
  std::uint64_t corpus_hash = 0;
  std::string module_name;
  Eigen::MatrixXd values;
};

/// Tap order: layer, then sublayer.
using ActivationSet = std::vector<ActivationMatrix>;

/// Encoder taps read `src <eos>`; decoder taps force-decode `<bos> tgt`
/// (for decoder-only models, the rows after the source prefix). Runs in
/// evaluation mode.
ActivationSet collect_activations(TransformerModel& model, const Corpus& corpus, Side side,
                                  const std::string& model_id, std::size_t batch_size = 64);

/// Subtracts the per-column mean.
Eigen::MatrixXd center_columns(const Eigen::MatrixXd& m);

/// ||A^T B||_F^2 / (||A^T A||_F ||B^T B||_F) on column-centred inputs; 0 when
/// either centred matrix is all zero.
double linear_cka(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

/// 1 - cos(a, b); 1 when either vector is zero.
double cosine_distance(const Eigen::Ref<const Eigen::RowVectorXd>& a,
                       const Eigen::Ref<const Eigen::RowVectorXd>& b);

/// The k rows nearest to `query` by cosine distance, excluding the query,
/// nearest first; equal distances go to the lower index.
std::vector<std::size_t> knn(const Eigen::MatrixXd& space, std::size_t query, std::size_t k);

/// ceil(0.05 n), at least 1.
std::size_t default_k(std::size_t n);

double jaccard(std::span<const std::size_t> a, std::span<const std::size_t> b);

/// Mean Jaccard overlap of per-sentence k-NN sets in the two spaces.
double lns(const Eigen::MatrixXd& s1, const Eigen::MatrixXd& s2,
           std::optional<std::size_t> k = std::nullopt);

std::size_t count_zero_rows(const Eigen::MatrixXd& m);

enum class Metric { Cka, Lns };
std::string to_string(Metric metric);
Metric parse_metric(std::string_view name);

double similarity(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, Metric metric,
                  std::optional<std::size_t> k = std::nullopt);

struct SimilarityReport {
  Metric metric = Metric::Cka;
  std::vector<std::string> row_labels;
  std::vector<std::string> col_labels;
  Eigen::MatrixXd matrix;
  /// (row, col) cells that count as corresponding modules.
  std::vector<std::pair<std::size_t, std::size_t>> matched;
  /// True when the module sets differ and layers are compared by their final output.
  bool whole_layer = false;
  double aggregate = 0.0;
  std::optional<double> normalized;
};

/// Full |A| x |B| matrix over module taps. Corresponding modules are those
/// with equal names; when the module sets differ and the layer counts agree,
/// the last tap of each layer is paired instead.
SimilarityReport pairwise_layer_similarity(const ActivationSet& a, const ActivationSet& b,
                                           Metric metric,
                                           std::optional<std::size_t> k = std::nullopt);

/// Symmetric CKA matrix among one model's taps with unit diagonal.
Eigen::MatrixXd self_similarity(const ActivationSet& taps);

/// 100 * raw / mean(benchmark).
double normalize_against_benchmark(double raw, std::span<const double> benchmark);

/// First row: "module" then column labels; each following row: label then values.
std::string heatmap_csv(std::span<const std::string> row_labels,
                        std::span<const std::string> col_labels, const Eigen::MatrixXd& m);

// Activation dump: "WFNA", u32 count, then per matrix u32-prefixed model_id,
// u64 corpus hash, u32-prefixed module name, u64 n, u64 d and n*d row-major
// little-endian f32 values.
void write_activation_dump(const std::filesystem::path& path, const ActivationSet& set);
ActivationSet read_activation_dump(const std::filesystem::path& path);

}  // namespace wfn
