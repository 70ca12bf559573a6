#include <cmath>

#include "wfn/decoding.hpp"
#include "wfn/errors.hpp"
#include "wfn/kernels.hpp"

namespace wfn {

namespace {

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  return kernels::add_bias(kernels::matmul(x, w), b);
}

Tensor residual_norm(const Tensor& x, const Tensor& y, const Tensor& gain, const Tensor& bias) {
  return kernels::layer_norm(kernels::add(x, y), gain, bias);
}

/// Row i of `q` attends over the first visible[i] rows of k/v.
Tensor multi_head(const Tensor& q, const float* k, const float* v, std::size_t heads,
                  std::span<const std::size_t> visible) {
  const std::size_t d = q.cols();
  const std::size_t dh = d / heads;
  const float scale = 1.0f / std::sqrt(static_cast<float>(dh));
  Tensor out({q.rows(), d});
  std::vector<float> p;
  for (std::size_t i = 0; i < q.rows(); ++i) {
    const std::size_t nk = visible[i];
    p.resize(nk);
    for (std::size_t h = 0; h < heads; ++h) {
      const float* qi = q.data() + i * d + h * dh;
      for (std::size_t j = 0; j < nk; ++j) {
        const float* kj = k + j * d + h * dh;
        float s = 0.0f;
        for (std::size_t c = 0; c < dh; ++c) s += qi[c] * kj[c];
        p[j] = s * scale;
      }
      kernels::softmax_row_inplace(p);
      float* o = out.data() + i * d + h * dh;
      for (std::size_t j = 0; j < nk; ++j) {
        const float* vj = v + j * d + h * dh;
        for (std::size_t c = 0; c < dh; ++c) o[c] += p[j] * vj[c];
      }
    }
  }
  return out;
}

struct LayerCache {
  std::vector<float> k, v;  // rows x d
};

struct SourceState {
  std::vector<LayerCache> cross;   // per decoder layer (encoder-decoder)
  std::vector<LayerCache> prefix;  // per decoder layer (decoder-only)
  std::size_t prefix_len = 0;
};

struct HypState {
  std::size_t source = 0;
  std::size_t position = 0;
  std::vector<LayerCache> self;
};

}  // namespace

struct ModelScorer::Impl {
  TransformerModel& model;
  const ModelConfig& c;
  bool enc_dec;
  std::vector<AttentionBlock> enc_sa, dec_sa, dec_ca;
  std::vector<FfnBlock> enc_ffn, dec_ffn;
  std::vector<SourceState> sources;
  std::vector<HypState> hyps;

  explicit Impl(TransformerModel& m)
      : model(m), c(m.config()), enc_dec(c.architecture == Architecture::EncoderDecoder) {
    for (std::size_t i = 0; i < c.n_enc; ++i) {
      enc_sa.push_back(model.attention_block(Side::Encoder, i, "sa"));
      enc_ffn.push_back(model.ffn_block(Side::Encoder, i));
    }
    for (std::size_t i = 0; i < c.n_dec; ++i) {
      dec_sa.push_back(model.attention_block(Side::Decoder, i, "sa"));
      if (enc_dec) dec_ca.push_back(model.attention_block(Side::Decoder, i, "ca"));
      dec_ffn.push_back(model.ffn_block(Side::Decoder, i));
    }
  }

  Tensor embed(std::span<const int> tokens, std::span<const std::size_t> positions) const {
    const std::size_t d = c.d_model;
    const Tensor& table = model.embedding();
    const float factor = std::sqrt(static_cast<float>(d));
    Tensor x({tokens.size(), d});
    for (std::size_t r = 0; r < tokens.size(); ++r) {
      const int t = tokens[r];
      if (t < 0 || static_cast<std::size_t>(t) >= table.rows()) {
        throw IndexError("token id " + std::to_string(t) + " outside vocabulary of size " +
                         std::to_string(table.rows()));
      }
      if (positions[r] >= c.max_len) {
        throw IndexError("position " + std::to_string(positions[r]) + " exceeds max_len " +
                         std::to_string(c.max_len));
      }
      for (std::size_t j = 0; j < d; ++j) {
        x.at(r, j) = table.at(static_cast<std::size_t>(t), j) * factor +
                     model.positions().at(positions[r], j);
      }
    }
    return x;
  }

  static Tensor ffn(const Tensor& x, const FfnBlock& b) {
    if (b.is_noop()) return x;
    Tensor h = kernels::relu(linear(x, *b.w1, *b.b1));
    return residual_norm(x, linear(h, *b.w2, *b.b2), *b.ln_gain, *b.ln_bias);
  }

  /// Bidirectional self-attention stack over one sequence; optionally keeps
  /// each layer's keys and values.
  Tensor full_stack(const std::vector<int>& tokens, const std::vector<AttentionBlock>& sa,
                    const std::vector<FfnBlock>& ff, std::vector<LayerCache>* caches) const {
    std::vector<std::size_t> pos(tokens.size());
    for (std::size_t i = 0; i < pos.size(); ++i) pos[i] = i;
    Tensor x = embed(tokens, pos);
    const std::vector<std::size_t> visible(tokens.size(), tokens.size());
    for (std::size_t l = 0; l < sa.size(); ++l) {
      const auto& b = sa[l];
      Tensor q = linear(x, *b.wq, *b.bq);
      Tensor k = linear(x, *b.wk, *b.bk);
      Tensor v = linear(x, *b.wv, *b.bv);
      Tensor o = linear(multi_head(q, k.data(), v.data(), c.heads, visible), *b.wo, *b.bo);
      if (caches) {
        caches->push_back({std::vector<float>(k.values().begin(), k.values().end()),
                           std::vector<float>(v.values().begin(), v.values().end())});
      }
      x = ffn(residual_norm(x, o, *b.ln_gain, *b.ln_bias), ff[l]);
    }
    return x;
  }
};

ModelScorer::ModelScorer(TransformerModel& model) : impl_(std::make_unique<Impl>(model)) {}
ModelScorer::~ModelScorer() = default;

std::size_t ModelScorer::vocab_size() const { return impl_->c.vocab_size; }

void ModelScorer::begin(std::span<const std::vector<int>> sources) {
  auto& m = *impl_;
  m.sources.assign(sources.size(), {});
  m.hyps.clear();
  for (std::size_t s = 0; s < sources.size(); ++s) {
    std::vector<int> src = sources[s];
    src.push_back(kEos);
    SourceState& st = m.sources[s];
    HypState hyp;
    hyp.source = s;
    hyp.self.resize(m.c.n_dec);
    if (m.enc_dec) {
      const Tensor mem = m.full_stack(src, m.enc_sa, m.enc_ffn, nullptr);
      for (const auto& b : m.dec_ca) {
        Tensor k = linear(mem, *b.wk, *b.bk);
        Tensor v = linear(mem, *b.wv, *b.bv);
        st.cross.push_back({std::vector<float>(k.values().begin(), k.values().end()),
                            std::vector<float>(v.values().begin(), v.values().end())});
      }
    } else {
      m.full_stack(src, m.dec_sa, m.dec_ffn, &st.prefix);
      st.prefix_len = src.size();
      hyp.self = st.prefix;
      hyp.position = src.size();
    }
    m.hyps.push_back(std::move(hyp));
  }
}

void ModelScorer::reorder(std::span<const std::size_t> parents) {
  auto& m = *impl_;
  std::vector<HypState> next;
  next.reserve(parents.size());
  for (std::size_t p : parents) {
    if (p >= m.hyps.size()) {
      throw IndexError("reorder: parent " + std::to_string(p) + " of " + std::to_string(m.hyps.size()));
    }
    next.push_back(m.hyps[p]);
  }
  m.hyps = std::move(next);
}

Tensor ModelScorer::step(std::span<const int> tokens) {
  auto& m = *impl_;
  const std::size_t n = m.hyps.size();
  const std::size_t d = m.c.d_model;
  if (tokens.size() != n) {
    throw DimensionError("step: " + std::to_string(tokens.size()) + " tokens for " +
                         std::to_string(n) + " hypotheses");
  }
  std::vector<std::size_t> pos(n);
  for (std::size_t i = 0; i < n; ++i) pos[i] = m.hyps[i].position;
  Tensor x = m.embed(tokens, pos);
  std::vector<std::size_t> one(1);
  for (std::size_t l = 0; l < m.c.n_dec; ++l) {
    const auto& b = m.dec_sa[l];
    Tensor q = linear(x, *b.wq, *b.bq);
    Tensor k = linear(x, *b.wk, *b.bk);
    Tensor v = linear(x, *b.wv, *b.bv);
    Tensor heads({n, d});
    for (std::size_t i = 0; i < n; ++i) {
      auto& cache = m.hyps[i].self[l];
      cache.k.insert(cache.k.end(), k.data() + i * d, k.data() + (i + 1) * d);
      cache.v.insert(cache.v.end(), v.data() + i * d, v.data() + (i + 1) * d);
      Tensor qi({1, d}, std::vector<float>(q.data() + i * d, q.data() + (i + 1) * d));
      one[0] = cache.k.size() / d;
      Tensor oi = multi_head(qi, cache.k.data(), cache.v.data(), m.c.heads, one);
      std::copy_n(oi.data(), d, heads.data() + i * d);
    }
    x = residual_norm(x, linear(heads, *b.wo, *b.bo), *b.ln_gain, *b.ln_bias);
    if (m.enc_dec) {
      const auto& cb = m.dec_ca[l];
      Tensor cq = linear(x, *cb.wq, *cb.bq);
      Tensor cross({n, d});
      for (std::size_t i = 0; i < n; ++i) {
        const auto& mem = m.sources[m.hyps[i].source].cross[l];
        Tensor qi({1, d}, std::vector<float>(cq.data() + i * d, cq.data() + (i + 1) * d));
        one[0] = mem.k.size() / d;
        Tensor oi = multi_head(qi, mem.k.data(), mem.v.data(), m.c.heads, one);
        std::copy_n(oi.data(), d, cross.data() + i * d);
      }
      x = residual_norm(x, linear(cross, *cb.wo, *cb.bo), *cb.ln_gain, *cb.ln_bias);
    }
    x = Impl::ffn(x, m.dec_ffn[l]);
  }
  Tensor logits = kernels::matmul_nt(x, m.model.embedding());
  for (std::size_t i = 0; i < n; ++i) {
    kernels::log_softmax_row_inplace({logits.data() + i * logits.cols(), logits.cols()});
    ++m.hyps[i].position;
  }
  return logits;
}

std::size_t ModelScorer::max_steps(std::size_t source) const {
  const auto& m = *impl_;
  const std::size_t used = m.enc_dec ? 0 : m.sources.at(source).prefix_len;
  return m.c.max_len > used ? m.c.max_len - used : 0;
}

}  // namespace wfn
