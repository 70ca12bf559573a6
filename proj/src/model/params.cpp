#include "wfn/params.hpp"

#include <set>

#include "wfn/errors.hpp"

namespace wfn {

namespace {

constexpr const char* kAttnFields[] = {"wq", "bq", "wk", "bk", "wv", "bv", "wo", "bo", "ln_g", "ln_b"};

std::string side_prefix(Side side) { return side == Side::Encoder ? "enc" : "dec"; }

class Planner {
 public:
  explicit Planner(ParamPlan& plan) : plan_(plan) {}

  // Adds the tensor unless a tensor of that canonical name already exists.
  void physical(const std::string& name, Shape shape, const std::string& component,
                PlannedTensor::Init init) {
    if (!seen_.insert(name).second) return;
    plan_.tensors.push_back({name, std::move(shape), component, init});
  }
  void alias(std::string logical, std::string canonical) {
    plan_.aliases.emplace_back(std::move(logical), std::move(canonical));
  }

 private:
  ParamPlan& plan_;
  std::set<std::string> seen_;
};

void plan_attention(Planner& p, Side side, std::size_t layer, const std::string& kind,
                    bool shared, std::size_t d, const std::string& component) {
  const std::string base = shared ? side_prefix(side) + "." + kind + "."
                                  : side_prefix(side) + "." + std::to_string(layer) + "." + kind + ".";
  for (const char* f : kAttnFields) {
    const std::string field = f;
    const std::string canonical = base + field;
    if (field[0] == 'w') {
      p.physical(canonical, {d, d}, component, PlannedTensor::Init::Xavier);
    } else if (field == "ln_g") {
      p.physical(canonical, {d}, "layer_norms", PlannedTensor::Init::Ones);
    } else if (field == "ln_b") {
      p.physical(canonical, {d}, "layer_norms", PlannedTensor::Init::Zeros);
    } else {
      p.physical(canonical, {d}, "biases", PlannedTensor::Init::Zeros);
    }
    p.alias(attn_site(side, layer, kind, field), canonical);
  }
}

void plan_ffn(Planner& p, const ModelConfig& c, Side side, std::size_t layer,
              std::size_t physical_index) {
  const std::size_t d = c.d_model;
  const std::size_t w = ffn_width(c, side);
  const std::string component = side == Side::Encoder ? "enc_ffn" : "dec_ffn";
  const bool tied = c.sharing.tie_enc_dec_ffn;
  const std::string base = tied ? std::string("encdec.ffn.")
                                : side_prefix(side) + ".ffn." + std::to_string(physical_index) + ".";
  const std::string comp = tied ? std::string("enc_ffn") : component;
  p.physical(base + "w1", {d, w}, comp, PlannedTensor::Init::Xavier);
  p.physical(base + "b1", {w}, "biases", PlannedTensor::Init::Zeros);
  p.physical(base + "w2", {w, d}, comp, PlannedTensor::Init::Xavier);
  p.physical(base + "b2", {d}, "biases", PlannedTensor::Init::Zeros);
  for (const char* f : {"w1", "b1", "w2", "b2"}) p.alias(ffn_site(side, layer, f), base + f);
  // Within one side the layer norm stays with its layer; the encoder-decoder
  // tie shares the whole sublayer including its norm.
  const std::string ln_base =
      tied ? base : side_prefix(side) + "." + std::to_string(layer) + ".ffn.";
  p.physical(ln_base + "ln_g", {d}, "layer_norms", PlannedTensor::Init::Ones);
  p.physical(ln_base + "ln_b", {d}, "layer_norms", PlannedTensor::Init::Zeros);
  p.alias(ffn_site(side, layer, "ln_g"), ln_base + "ln_g");
  p.alias(ffn_site(side, layer, "ln_b"), ln_base + "ln_b");
}

}  // namespace

std::string attn_site(Side side, std::size_t layer, std::string_view kind, std::string_view field) {
  return side_prefix(side) + "." + std::to_string(layer) + "." + std::string(kind) + "." +
         std::string(field);
}

std::string ffn_site(Side side, std::size_t layer, std::string_view field) {
  return side_prefix(side) + "." + std::to_string(layer) + ".ffn." + std::string(field);
}

ParamPlan plan_params(const ModelConfig& c) {
  validate(c);
  ParamPlan plan;
  Planner p(plan);
  const std::size_t d = c.d_model;
  const bool enc_dec = c.architecture == Architecture::EncoderDecoder;
  p.physical("embed", {c.vocab_size, d}, "embedding", PlannedTensor::Init::Xavier);
  if (enc_dec) p.alias("src_embed", "embed");
  p.alias("tgt_embed", "embed");
  p.alias("out_proj", "embed");

  const auto enc_assign = resolve_ffn_assignment(effective_ffn_strategy(c, Side::Encoder), c.n_enc);
  for (std::size_t i = 0; i < c.n_enc; ++i) {
    plan_attention(p, Side::Encoder, i, "sa", c.sharing.enc_self_attn == AttnSharing::SharedAll, d,
                   "enc_attn");
    if (!enc_assign.empty()) plan_ffn(p, c, Side::Encoder, i, enc_assign[i]);
  }
  const auto dec_assign = resolve_ffn_assignment(effective_ffn_strategy(c, Side::Decoder), c.n_dec);
  for (std::size_t i = 0; i < c.n_dec; ++i) {
    plan_attention(p, Side::Decoder, i, "sa", c.sharing.dec_self_attn == AttnSharing::SharedAll, d,
                   "dec_self_attn");
    if (enc_dec) {
      plan_attention(p, Side::Decoder, i, "ca", c.sharing.dec_cross_attn == AttnSharing::SharedAll,
                     d, "dec_cross_attn");
    }
    if (!dec_assign.empty()) plan_ffn(p, c, Side::Decoder, i, dec_assign[i]);
  }
  return plan;
}

ParamCount count_params(const ModelConfig& config) {
  ParamCount count;
  for (const char* k : kComponents) count.breakdown[k] = 0;
  for (const auto& t : plan_params(config).tensors) {
    const auto n = static_cast<std::uint64_t>(shape_numel(t.shape));
    count.total += n;
    count.breakdown[t.component] += n;
  }
  return count;
}

FfnSavings ffn_savings(std::size_t copies, std::size_t d_model, std::size_t d_ff_prime) {
  const auto n = static_cast<std::uint64_t>(copies);
  const auto d = static_cast<std::uint64_t>(d_model);
  const auto w = static_cast<std::uint64_t>(d_ff_prime);
  return {n * 2 * d * w, n * (2 * d * w + w + d)};
}

// ---------------------------------------------------------------------------
// ParamStore

void ParamStore::add(std::string canonical, Tensor tensor) {
  if (physical_.count(canonical)) throw ConfigError("duplicate parameter '" + canonical + "'");
  order_.push_back(canonical);
  physical_.emplace(std::move(canonical), std::move(tensor));
}

void ParamStore::alias(std::string logical, std::string canonical) {
  if (!physical_.count(canonical)) {
    throw ConfigError("alias '" + logical + "' targets unknown tensor '" + canonical + "'");
  }
  if (alias_.count(logical)) throw ConfigError("logical site '" + logical + "' aliased twice");
  alias_.emplace(logical, canonical);
  alias_list_.emplace_back(std::move(logical), std::move(canonical));
}

bool ParamStore::contains(std::string_view canonical) const {
  return physical_.find(canonical) != physical_.end();
}

Tensor& ParamStore::physical(std::string_view canonical) {
  auto it = physical_.find(canonical);
  if (it == physical_.end()) throw ConfigError("unknown parameter '" + std::string(canonical) + "'");
  return it->second;
}

const Tensor& ParamStore::physical(std::string_view canonical) const {
  return const_cast<ParamStore*>(this)->physical(canonical);
}

const std::string& ParamStore::canonical_of(std::string_view logical) const {
  auto it = alias_.find(std::string(logical));
  if (it == alias_.end()) throw ConfigError("unknown logical site '" + std::string(logical) + "'");
  return it->second;
}

Tensor& ParamStore::at(std::string_view logical) { return physical(canonical_of(logical)); }

const Tensor& ParamStore::at(std::string_view logical) const {
  return physical(canonical_of(logical));
}

std::uint64_t ParamStore::total() const {
  std::uint64_t n = 0;
  for (const auto& [name, t] : physical_) n += t.size();
  return n;
}

std::vector<Tensor*> ParamStore::tensors() {
  std::vector<Tensor*> out;
  out.reserve(order_.size());
  for (const auto& name : order_) out.push_back(&physical(name));
  return out;
}

void ParamStore::zero_grad() {
  for (auto& [name, t] : physical_) t.zero_grad();
}

bool ParamStore::same_values(const ParamStore& other) const {
  if (order_ != other.order_ || alias_list_ != other.alias_list_) return false;
  for (const auto& name : order_) {
    if (!physical(name).same_values(other.physical(name))) return false;
  }
  return true;
}

}  // namespace wfn
