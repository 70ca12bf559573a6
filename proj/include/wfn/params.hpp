#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "wfn/config.hpp"
#include "wfn/tensor.hpp"

namespace wfn {

/// Breakdown buckets reported by count_params. Matrices go to their
/// component; every linear bias goes to "biases" and every layer-norm gain
/// or bias to "layer_norms".
inline constexpr const char* kComponents[] = {"embedding",      "enc_attn",   "enc_ffn",
                                              "dec_self_attn",  "dec_cross_attn", "dec_ffn",
                                              "layer_norms",    "biases"};

struct PlannedTensor {
  std::string name;
  Shape shape;
  std::string component;
  enum class Init { Xavier, Zeros, Ones } init = Init::Xavier;
};

/// Physical tensors and the logical-site alias table of a configuration,
/// computed without allocating any parameter memory.
struct ParamPlan {
  std::vector<PlannedTensor> tensors;
  std::vector<std::pair<std::string, std::string>> aliases;  // logical -> canonical
};

ParamPlan plan_params(const ModelConfig& config);

struct ParamCount {
  std::uint64_t total = 0;
  std::map<std::string, std::uint64_t> breakdown;
};

/// Parameters of the physical tensors only; tied sites count once.
ParamCount count_params(const ModelConfig& config);

/// Parameters removed when `copies` FFNs of width d_ff' are folded into an
/// already-present shared one: the matrices-only figure and the exact figure
/// with the two linear biases.
struct FfnSavings {
  std::uint64_t matrices_only = 0;
  std::uint64_t with_biases = 0;
};
FfnSavings ffn_savings(std::size_t copies, std::size_t d_model, std::size_t d_ff_prime);

/// Named parameter tensors plus a tie-alias table mapping every logical
/// site onto exactly one physical tensor.
class ParamStore {
 public:
  void add(std::string canonical, Tensor tensor);
  void alias(std::string logical, std::string canonical);

  bool contains(std::string_view canonical) const;
  Tensor& physical(std::string_view canonical);
  const Tensor& physical(std::string_view canonical) const;
  /// Resolves a logical site through the alias table.
  Tensor& at(std::string_view logical);
  const Tensor& at(std::string_view logical) const;
  const std::string& canonical_of(std::string_view logical) const;

  /// Canonical names in insertion order.
  const std::vector<std::string>& names() const noexcept { return order_; }
  const std::vector<std::pair<std::string, std::string>>& aliases() const noexcept {
    return alias_list_;
  }

  std::uint64_t total() const;
  std::vector<Tensor*> tensors();
  void zero_grad();

  /// Same names, shapes and bit-identical values.
  bool same_values(const ParamStore& other) const;

 private:
  std::map<std::string, Tensor, std::less<>> physical_;
  std::vector<std::string> order_;
  std::unordered_map<std::string, std::string> alias_;
  std::vector<std::pair<std::string, std::string>> alias_list_;
};

// Logical site names.
std::string attn_site(Side side, std::size_t layer, std::string_view kind, std::string_view field);
std::string ffn_site(Side side, std::size_t layer, std::string_view field);

}  // namespace wfn
