#include "wfn/tape.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "wfn/errors.hpp"
#include "wfn/kernels.hpp"

namespace wfn {

// ---------------------------------------------------------------------------
// AttentionMask

AttentionMask AttentionMask::dense(const BoolMatrix& m) {
  AttentionMask mask(m.rows, m.cols);
  if (m.rows == 0) return mask;
  Block b{0, m.rows, 0, m.cols, m.cells};
  mask.blocks_.push_back(std::move(b));
  return mask;
}

void AttentionMask::add_block(Block block) {
  if (block.q_end > q_len_ || block.k_end > k_len_ || block.q_begin > block.q_end ||
      block.k_begin > block.k_end) {
    throw DimensionError("attention mask block out of range");
  }
  const std::size_t cells = (block.q_end - block.q_begin) * (block.k_end - block.k_begin);
  if (!block.allow.empty() && block.allow.size() != cells) {
    throw DimensionError("attention mask block has wrong cell count");
  }
  for (const auto& b : blocks_) {
    if (block.q_begin < b.q_end && b.q_begin < block.q_end) {
      throw DimensionError("attention mask blocks overlap in query rows");
    }
  }
  blocks_.push_back(std::move(block));
}

void AttentionMask::add_full(std::size_t q_begin, std::size_t q_end, std::size_t k_begin,
                             std::size_t k_end) {
  add_block(Block{q_begin, q_end, k_begin, k_end, {}});
}

void AttentionMask::add_causal(std::size_t q_begin, std::size_t q_end, std::size_t k_begin) {
  const std::size_t nq = q_end - q_begin;
  Block b{q_begin, q_end, k_begin, k_begin + nq, std::vector<unsigned char>(nq * nq, 0)};
  for (std::size_t i = 0; i < nq; ++i)
    for (std::size_t j = 0; j <= i; ++j) b.allow[i * nq + j] = 1;
  add_block(std::move(b));
}

std::vector<AttentionMask::Block> AttentionMask::covering_blocks() const {
  std::vector<Block> out = blocks_;
  std::vector<unsigned char> covered(q_len_, 0);
  for (const auto& b : blocks_)
    for (std::size_t i = b.q_begin; i < b.q_end; ++i) covered[i] = 1;
  for (std::size_t i = 0; i < q_len_; ++i) {
    if (covered[i]) continue;
    std::size_t j = i;
    while (j < q_len_ && !covered[j]) ++j;
    out.push_back(Block{i, j, 0, k_len_, std::vector<unsigned char>((j - i) * k_len_, 0)});
    i = j;
  }
  return out;
}

BoolMatrix AttentionMask::to_dense() const {
  BoolMatrix m(q_len_, k_len_, false);
  for (const auto& b : blocks_) {
    const std::size_t nk = b.k_end - b.k_begin;
    for (std::size_t i = b.q_begin; i < b.q_end; ++i)
      for (std::size_t j = b.k_begin; j < b.k_end; ++j)
        m.set(i, j, b.allow.empty() || b.allow[(i - b.q_begin) * nk + (j - b.k_begin)]);
  }
  return m;
}

// ---------------------------------------------------------------------------
// Tape

namespace {

void add_into(std::span<float> dst, std::span<const float> src) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + a.shape_string() + " vs " +
                         b.shape_string());
  }
}

}  // namespace

Var Tape::push(Tensor value, std::function<void(Tape&, Node&)> backward) {
  Node n;
  n.owned = std::move(value);
  n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

const Tensor& Tape::value(Var v) const {
  const Node& n = node(v);
  return n.param ? *n.param : n.owned;
}

std::span<float> Tape::grad_of(Var v) {
  Node& n = node(v);
  if (n.grad.empty()) n.grad.assign(value(v).size(), 0.0f);
  return n.grad;
}

Var Tape::constant(Tensor value) { return push(std::move(value), nullptr); }

Var Tape::param(Tensor& tensor) {
  for (const auto& [ptr, id] : param_index_) {
    if (ptr == &tensor) return Var{id};
  }
  Node n;
  n.param = &tensor;
  nodes_.push_back(std::move(n));
  param_index_.emplace_back(&tensor, nodes_.size() - 1);
  return Var{nodes_.size() - 1};
}

Var Tape::matmul(Var a, Var b) {
  Tensor out = kernels::matmul(value(a), value(b));
  return push(std::move(out), [a, b](Tape& t, Node& self) {
    const Tensor& av = t.value(a);
    const Tensor& bv = t.value(b);
    const std::size_t m = av.rows(), k = av.cols(), n = bv.cols();
    kernels::gemm_nt(self.grad.data(), bv.data(), t.grad_of(a).data(), m, n, k, true);
    kernels::gemm_tn(av.data(), self.grad.data(), t.grad_of(b).data(), k, m, n, true);
  });
}

Var Tape::matmul_nt(Var a, Var b) {
  Tensor out = kernels::matmul_nt(value(a), value(b));
  return push(std::move(out), [a, b](Tape& t, Node& self) {
    const Tensor& av = t.value(a);
    const Tensor& bv = t.value(b);
    const std::size_t m = av.rows(), k = av.cols(), n = bv.rows();
    kernels::gemm_nn(self.grad.data(), bv.data(), t.grad_of(a).data(), m, n, k, true);
    kernels::gemm_tn(self.grad.data(), av.data(), t.grad_of(b).data(), n, m, k, true);
  });
}

Var Tape::add(Var a, Var b) {
  Tensor out = kernels::add(value(a), value(b));
  return push(std::move(out), [a, b](Tape& t, Node& self) {
    add_into(t.grad_of(a), self.grad);
    add_into(t.grad_of(b), self.grad);
  });
}

Var Tape::add_bias(Var x, Var bias) {
  Tensor out = kernels::add_bias(value(x), value(bias));
  return push(std::move(out), [x, bias](Tape& t, Node& self) {
    add_into(t.grad_of(x), self.grad);
    auto gb = t.grad_of(bias);
    const std::size_t d = gb.size();
    const std::size_t rows = self.grad.size() / d;
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t j = 0; j < d; ++j) gb[j] += self.grad[r * d + j];
  });
}

Var Tape::mul(Var a, Var b) {
  require_same_shape(value(a), value(b), "mul");
  Tensor out = value(a);
  const Tensor& bv = value(b);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  return push(std::move(out), [a, b](Tape& t, Node& self) {
    const Tensor& av = t.value(a);
    const Tensor& bv = t.value(b);
    auto ga = t.grad_of(a);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += self.grad[i] * bv[i];
    auto gb = t.grad_of(b);
    for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += self.grad[i] * av[i];
  });
}

Var Tape::scale(Var x, float factor) {
  Tensor out = value(x);
  for (auto& v : out.values()) v *= factor;
  return push(std::move(out), [x, factor](Tape& t, Node& self) {
    auto gx = t.grad_of(x);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += self.grad[i] * factor;
  });
}

Var Tape::relu(Var x) {
  Tensor out = kernels::relu(value(x));
  for (float v : value(x).values()) {
    relu_signature_ = (relu_signature_ ^ (v > 0.0f ? 1u : 0u)) * 1099511628211ull;
  }
  return push(std::move(out), [x](Tape& t, Node& self) {
    const Tensor& xv = t.value(x);
    auto gx = t.grad_of(x);
    for (std::size_t i = 0; i < gx.size(); ++i) {
      if (xv[i] > 0.0f) gx[i] += self.grad[i];
    }
  });
}

Var Tape::layer_norm(Var x, Var gain, Var bias) {
  const Tensor& xv = value(x);
  std::vector<float> mean(xv.rows()), rstd(xv.rows());
  Tensor out = kernels::layer_norm(xv, value(gain), value(bias), mean, rstd);
  return push(std::move(out), [x, gain, bias, mean = std::move(mean),
                               rstd = std::move(rstd)](Tape& t, Node& self) {
    const Tensor& xv = t.value(x);
    const Tensor& gv = t.value(gain);
    const std::size_t d = xv.cols();
    const std::size_t rows = xv.rows();
    auto gx = t.grad_of(x);
    auto gg = t.grad_of(gain);
    auto gb = t.grad_of(bias);
    std::vector<float> xhat(d), dxhat(d);
    for (std::size_t r = 0; r < rows; ++r) {
      const float* xr = xv.data() + r * d;
      const float* dy = self.grad.data() + r * d;
      float sum_dxhat = 0.0f, sum_dxhat_xhat = 0.0f;
      for (std::size_t j = 0; j < d; ++j) {
        xhat[j] = (xr[j] - mean[r]) * rstd[r];
        dxhat[j] = dy[j] * gv[j];
        gg[j] += dy[j] * xhat[j];
        gb[j] += dy[j];
        sum_dxhat += dxhat[j];
        sum_dxhat_xhat += dxhat[j] * xhat[j];
      }
      const float inv_d = 1.0f / static_cast<float>(d);
      for (std::size_t j = 0; j < d; ++j) {
        gx[r * d + j] +=
            rstd[r] * (dxhat[j] - sum_dxhat * inv_d - xhat[j] * sum_dxhat_xhat * inv_d);
      }
    }
  });
}

Var Tape::softmax_rows(Var x) {
  Tensor out = kernels::softmax_rows(value(x));
  return push(std::move(out), [x](Tape& t, Node& self) {
    const Tensor& y = self.owned;
    const std::size_t d = y.cols();
    auto gx = t.grad_of(x);
    for (std::size_t r = 0; r < y.rows(); ++r) {
      float dot = 0.0f;
      for (std::size_t j = 0; j < d; ++j) dot += self.grad[r * d + j] * y[r * d + j];
      for (std::size_t j = 0; j < d; ++j)
        gx[r * d + j] += y[r * d + j] * (self.grad[r * d + j] - dot);
    }
  });
}

Var Tape::dropout(Var x, float p, std::mt19937_64& rng) {
  if (p <= 0.0f) return x;
  const Tensor& xv = value(x);
  std::vector<float> keep(xv.size());
  const float scale = p >= 1.0f ? 0.0f : 1.0f / (1.0f - p);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  for (auto& k : keep) k = u(rng) >= p ? scale : 0.0f;
  Tensor out = xv;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= keep[i];
  return push(std::move(out), [x, keep = std::move(keep)](Tape& t, Node& self) {
    auto gx = t.grad_of(x);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += self.grad[i] * keep[i];
  });
}

Var Tape::embedding(Var table, std::span<const int> ids, float factor) {
  const Tensor& tv = value(table);
  const std::size_t d = tv.cols();
  const std::size_t vocab = tv.rows();
  Tensor out({ids.size(), d});
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= vocab) {
      throw IndexError("token id " + std::to_string(ids[i]) + " outside vocabulary of size " +
                       std::to_string(vocab));
    }
    const float* src = tv.data() + static_cast<std::size_t>(ids[i]) * d;
    for (std::size_t j = 0; j < d; ++j) out.at(i, j) = src[j] * factor;
  }
  std::vector<int> idv(ids.begin(), ids.end());
  return push(std::move(out), [table, idv = std::move(idv), factor, d](Tape& t, Node& self) {
    auto gt = t.grad_of(table);
    for (std::size_t i = 0; i < idv.size(); ++i) {
      float* dst = gt.data() + static_cast<std::size_t>(idv[i]) * d;
      for (std::size_t j = 0; j < d; ++j) dst[j] += self.grad[i * d + j] * factor;
    }
  });
}

Var Tape::attention(Var q, Var k, Var v, std::size_t heads, const AttentionMask& mask) {
  const Tensor& qv = value(q);
  const Tensor& kv = value(k);
  const Tensor& vv = value(v);
  const std::size_t d = qv.cols();
  if (kv.cols() != d || vv.cols() != d || kv.rows() != vv.rows() || heads == 0 ||
      d % heads != 0) {
    throw DimensionError("attention: incompatible q " + qv.shape_string() + ", k " +
                         kv.shape_string() + ", v " + vv.shape_string() + " with " +
                         std::to_string(heads) + " heads");
  }
  if (mask.q_len() != qv.rows() || mask.k_len() != kv.rows()) {
    throw DimensionError("attention: mask " + std::to_string(mask.q_len()) + "x" +
                         std::to_string(mask.k_len()) + " does not match q/k rows");
  }
  const std::size_t dh = d / heads;
  const float scale = 1.0f / std::sqrt(static_cast<float>(dh));
  auto blocks = mask.covering_blocks();

  Tensor out({qv.rows(), d});
  // probs[block][head] holds the (nq x nk) attention weights.
  std::vector<std::vector<std::vector<float>>> probs(blocks.size());
  std::vector<float> qh, kh, vh, oh;
  for (std::size_t bi = 0; bi < blocks.size(); ++bi) {
    const auto& b = blocks[bi];
    const std::size_t nq = b.q_end - b.q_begin, nk = b.k_end - b.k_begin;
    probs[bi].resize(heads);
    if (nq == 0) continue;
    std::vector<unsigned char> all_true;
    if (b.allow.empty()) all_true.assign(nq * nk, 1);
    const auto& allow = b.allow.empty() ? all_true : b.allow;
    qh.resize(nq * dh);
    kh.resize(nk * dh);
    vh.resize(nk * dh);
    oh.resize(nq * dh);
    for (std::size_t h = 0; h < heads; ++h) {
      for (std::size_t i = 0; i < nq; ++i)
        std::copy_n(qv.data() + (b.q_begin + i) * d + h * dh, dh, qh.data() + i * dh);
      for (std::size_t j = 0; j < nk; ++j) {
        std::copy_n(kv.data() + (b.k_begin + j) * d + h * dh, dh, kh.data() + j * dh);
        std::copy_n(vv.data() + (b.k_begin + j) * d + h * dh, dh, vh.data() + j * dh);
      }
      auto& p = probs[bi][h];
      p.resize(nq * nk);
      if (nk > 0) {
        kernels::gemm_nt(qh.data(), kh.data(), p.data(), nq, dh, nk, false);
        for (auto& s : p) s *= scale;
        for (std::size_t i = 0; i < nq; ++i)
          kernels::masked_softmax_row_inplace({p.data() + i * nk, nk},
                                              {allow.data() + i * nk, nk});
        kernels::gemm_nn(p.data(), vh.data(), oh.data(), nq, nk, dh, false);
      } else {
        std::fill(oh.begin(), oh.end(), 0.0f);
      }
      for (std::size_t i = 0; i < nq; ++i)
        std::copy_n(oh.data() + i * dh, dh, out.data() + (b.q_begin + i) * d + h * dh);
    }
  }

  return push(std::move(out), [q, k, v, heads, dh, scale, blocks = std::move(blocks),
                               probs = std::move(probs)](Tape& t, Node& self) {
    const Tensor& qv = t.value(q);
    const Tensor& kv = t.value(k);
    const Tensor& vv = t.value(v);
    const std::size_t d = qv.cols();
    auto gq = t.grad_of(q);
    auto gk = t.grad_of(k);
    auto gv = t.grad_of(v);
    std::vector<float> qh, kh, vh, doh, dp, dqh, dkh, dvh;
    for (std::size_t bi = 0; bi < blocks.size(); ++bi) {
      const auto& b = blocks[bi];
      const std::size_t nq = b.q_end - b.q_begin, nk = b.k_end - b.k_begin;
      if (nq == 0 || nk == 0) continue;
      qh.resize(nq * dh);
      kh.resize(nk * dh);
      vh.resize(nk * dh);
      doh.resize(nq * dh);
      dp.resize(nq * nk);
      dqh.resize(nq * dh);
      dkh.resize(nk * dh);
      dvh.resize(nk * dh);
      for (std::size_t h = 0; h < heads; ++h) {
        for (std::size_t i = 0; i < nq; ++i) {
          std::copy_n(qv.data() + (b.q_begin + i) * d + h * dh, dh, qh.data() + i * dh);
          std::copy_n(self.grad.data() + (b.q_begin + i) * d + h * dh, dh, doh.data() + i * dh);
        }
        for (std::size_t j = 0; j < nk; ++j) {
          std::copy_n(kv.data() + (b.k_begin + j) * d + h * dh, dh, kh.data() + j * dh);
          std::copy_n(vv.data() + (b.k_begin + j) * d + h * dh, dh, vh.data() + j * dh);
        }
        const auto& p = probs[bi][h];
        // dV = P^T dO ; dP = dO V^T
        kernels::gemm_tn(p.data(), doh.data(), dvh.data(), nk, nq, dh, false);
        kernels::gemm_nt(doh.data(), vh.data(), dp.data(), nq, dh, nk, false);
        for (std::size_t i = 0; i < nq; ++i) {
          bool any_allowed = b.allow.empty();
          for (std::size_t j = 0; !any_allowed && j < nk; ++j) any_allowed = b.allow[i * nk + j];
          float* row = dp.data() + i * nk;
          if (!any_allowed) {
            std::fill(row, row + nk, 0.0f);
            continue;
          }
          const float* pr = p.data() + i * nk;
          float dot = 0.0f;
          for (std::size_t j = 0; j < nk; ++j) dot += row[j] * pr[j];
          for (std::size_t j = 0; j < nk; ++j) row[j] = pr[j] * (row[j] - dot) * scale;
        }
        // dQ = dS K ; dK = dS^T Q
        kernels::gemm_nn(dp.data(), kh.data(), dqh.data(), nq, nk, dh, false);
        kernels::gemm_tn(dp.data(), qh.data(), dkh.data(), nk, nq, dh, false);
        for (std::size_t i = 0; i < nq; ++i) {
          float* dst = gq.data() + (b.q_begin + i) * d + h * dh;
          for (std::size_t c = 0; c < dh; ++c) dst[c] += dqh[i * dh + c];
        }
        for (std::size_t j = 0; j < nk; ++j) {
          float* dk = gk.data() + (b.k_begin + j) * d + h * dh;
          float* dv = gv.data() + (b.k_begin + j) * d + h * dh;
          for (std::size_t c = 0; c < dh; ++c) {
            dk[c] += dkh[j * dh + c];
            dv[c] += dvh[j * dh + c];
          }
        }
      }
    }
  });
}

Var Tape::sum(Var x) {
  const Tensor& xv = value(x);
  double s = 0.0;
  for (float v : xv.values()) s += v;
  return push(Tensor({1}, {static_cast<float>(s)}), [x](Tape& t, Node& self) {
    auto gx = t.grad_of(x);
    for (auto& g : gx) g += self.grad[0];
  });
}

Var Tape::cross_entropy(Var logits, std::span<const int> targets, int ignore_index) {
  const Tensor& lv = value(logits);
  const std::size_t n = lv.rows(), vocab = lv.cols();
  if (targets.size() != n) {
    throw DimensionError("cross_entropy: " + std::to_string(targets.size()) +
                         " targets for logits " + lv.shape_string());
  }
  std::vector<float> probs(lv.values().begin(), lv.values().end());
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const int tgt = targets[i];
    if (tgt == ignore_index) continue;
    if (tgt < 0 || static_cast<std::size_t>(tgt) >= vocab) {
      throw IndexError("cross_entropy: target " + std::to_string(tgt) + " outside [0, " +
                       std::to_string(vocab) + ")");
    }
    std::span<float> row(probs.data() + i * vocab, vocab);
    kernels::log_softmax_row_inplace(row);
    total -= row[static_cast<std::size_t>(tgt)];
    for (auto& p : row) p = std::exp(p);
    ++count;
  }
  const float loss = count ? static_cast<float>(total / static_cast<double>(count)) : 0.0f;
  std::vector<int> tv(targets.begin(), targets.end());
  return push(Tensor({1}, {loss}), [logits, tv = std::move(tv), probs = std::move(probs),
                                    ignore_index, count, vocab](Tape& t, Node& self) {
    if (count == 0) return;
    auto gl = t.grad_of(logits);
    const float g = self.grad[0] / static_cast<float>(count);
    for (std::size_t i = 0; i < tv.size(); ++i) {
      if (tv[i] == ignore_index) continue;
      const float* pr = probs.data() + i * vocab;
      float* dst = gl.data() + i * vocab;
      for (std::size_t j = 0; j < vocab; ++j) dst[j] += g * pr[j];
      dst[static_cast<std::size_t>(tv[i])] -= g;
    }
  });
}

void Tape::backward(Var loss) {
  if (value(loss).size() != 1) {
    throw DimensionError("backward: loss must be a single value, got " +
                         value(loss).shape_string());
  }
  grad_of(loss)[0] = 1.0f;
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.grad.empty()) continue;
    if (n.param) {
      add_into(n.param->grad(), n.grad);
    } else if (n.backward) {
      n.backward(*this, n);
    }
  }
}

}  // namespace wfn
