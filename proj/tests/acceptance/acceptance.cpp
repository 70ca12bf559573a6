#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include "wfn/checkpoint.hpp"
#include "wfn/config.hpp"
#include "wfn/corpus.hpp"
#include "wfn/decoding.hpp"
#include "wfn/grad_check.hpp"
#include "wfn/model.hpp"
#include "wfn/optim.hpp"
#include "wfn/params.hpp"
#include "wfn/similarity.hpp"
#include "wfn/throughput.hpp"
#include "wfn/trainer.hpp"

using namespace wfn;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

double seconds_since(Clock::time_point t) {
  return std::chrono::duration<double>(Clock::now() - t).count();
}

ModelConfig tiny(std::size_t d_model = 16) {
  ModelConfig c;
  c.n_enc = 2;
  c.n_dec = 2;
  c.d_model = d_model;
  c.d_ff = 2 * d_model;
  c.heads = 2;
  c.vocab_size = 12;
  c.max_len = 24;
  c.dropout = 0.0f;
  return c;
}

std::vector<const SentencePair*> pointers(const Corpus& c) {
  std::vector<const SentencePair*> out;
  for (const auto& p : c.pairs) out.push_back(&p);
  return out;
}

void synchronise(ParamStore& to, const ParamStore& from) {
  for (const auto& [logical, canonical] : to.aliases()) {
    const Tensor& src = from.at(logical);
    std::copy(src.values().begin(), src.values().end(), to.at(logical).values().begin());
  }
}

// Untied tensors grouped by the tied tensor their sites resolve to.
std::map<std::string, std::vector<Tensor*>> tie_groups(const ParamStore& tied, ParamStore& untied) {
  std::map<std::string, std::vector<Tensor*>> groups;
  for (const auto& [logical, canonical] : untied.aliases()) {
    auto& g = groups[tied.canonical_of(logical)];
    Tensor* t = &untied.at(logical);
    if (std::find(g.begin(), g.end(), t) == g.end()) g.push_back(t);
  }
  return groups;
}

double rel_diff(std::span<const float> a, std::span<const double> b) {
  double num = 0, den = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (a[i] - b[i]) * (a[i] - b[i]);
    den += b[i] * b[i];
  }
  return den == 0 ? std::sqrt(num) : std::sqrt(num / den);
}

// ---------------------------------------------------------------------------

Outcome parameter_accounting() {
  const auto start = Clock::now();
  const ModelConfig big = transformer_big();
  const double base = double(count_params(apply_preset(big, "baseline")).total);
  auto pct = [&](const ModelConfig& c) { return 100.0 * double(count_params(c).total) / base; };
  auto wide = [&](std::size_t d) {
    ModelConfig c = apply_preset(big, "SharedEncNoDec");
    c.d_ff_shared = d;
    return c;
  };
  const std::vector<std::pair<std::string, std::pair<ModelConfig, double>>> rows{
      {"SharedEnc", {apply_preset(big, "SharedEnc"), 82}},
      {"SharedDec", {apply_preset(big, "SharedDec"), 82}},
      {"SharedEncSharedDec", {apply_preset(big, "SharedEncSharedDec"), 63}},
      {"SharedEncDec", {apply_preset(big, "SharedEncDec"), 59}},
      {"NoEnc", {apply_preset(big, "NoEnc"), 78}},
      {"NoDec", {apply_preset(big, "NoDec"), 78}},
      {"NoEncNoDec", {apply_preset(big, "NoEncNoDec"), 56}},
      {"SharedEncNoDec", {apply_preset(big, "SharedEncNoDec"), 60}},
      {"NoEncSharedDec", {apply_preset(big, "NoEncSharedDec"), 60}},
      {"OneWideFFN(49152)", {apply_preset(big, "OneWideFFN"), 100}},
      {"SharedEncNoDec(24576)", {wide(24576), 80}},
      {"SharedEncNoDec(98304)", {wide(98304), 145}},
  };
  Outcome o;
  std::string misses;
  for (const auto& [name, row] : rows) {
    const double p = pct(row.first);
    if (std::abs(p - row.second) > 1.0) {
      o.pass = false;
      misses += " " + name + "=" + fmt("%.1f", p) + "(want " + fmt("%.0f", row.second) + ")";
    }
  }
  const double t = seconds_since(start);
  if (t >= 1.0) o.pass = false;
  o.detail = "baseline " + fmt("%.1fM", base / 1e6) + ", " + fmt("%.3f s", t) +
             (misses.empty() ? "; all within 1 point" : ";" + misses);
  return o;
}

Outcome wide_ffn_sizing() {
  const std::size_t a = one_wide_dff(transformer_big());
  const std::size_t b = one_wide_dff(transformer_base());
  const std::size_t c = one_wide_dff(deep_encoder_shallow_decoder());
  return {a == 49152 && b == 24576 && c == 57344,
          std::to_string(a) + " / " + std::to_string(b) + " / " + std::to_string(c)};
}

Outcome gradient_correctness() {
  const auto start = Clock::now();
  const Corpus data = generate_toy_task(ToyTask::Reverse, 3, 2, 4, 12, 1);
  const auto ptrs = pointers(data);
  Outcome o;
  double worst = 0;
  std::string worst_preset;
  std::size_t coords = 0, skipped = 0;
  for (const auto& preset : preset_names()) {
    TransformerModel m = build_model(apply_preset(tiny(), preset), 17);
    const auto batch = make_teacher_forced(m.config(), ptrs);
    auto ps = m.params().tensors();
    const GradCheckResult r = grad_check(
        [&](Tape& t) { return teacher_forced_loss(t, m, batch, {}); }, ps, {3e-3f, 4, 5, true});
    coords += r.coords_checked;
    skipped += r.coords_skipped;
    if (r.max_rel_error > worst) worst = r.max_rel_error, worst_preset = preset;
  }
  const double t = seconds_since(start);
  o.pass = worst < 1e-3 && t < 60.0;
  o.detail = std::to_string(preset_names().size()) + " presets, " + std::to_string(coords) +
             " coords (" + std::to_string(skipped) + " skipped at relu kinks), max rel err " +
             fmt("%.2e", worst) + " (" + worst_preset + "), " + fmt("%.1f s", t);
  return o;
}

Outcome tying_invariants() {
  const Corpus data = generate_toy_task(ToyTask::Copy, 4, 2, 5, 12, 2);
  const auto ptrs = pointers(data);
  bool forward_ok = true;
  double grad_err = 0, traj_err = 0, output_err = 0, key_bias_grad = 0;
  std::string traj_worst;
  for (const char* preset : {"SharedEnc", "SharedDec", "SharedEncSharedDec", "SharedEncDec",
                             "SharedEncNoDec", "OneWideFFN"}) {
    const ModelConfig tc = apply_preset(tiny(), preset);
    ModelConfig uc = tiny();
    uc.d_ff = ffn_width(tc, Side::Encoder) ? ffn_width(tc, Side::Encoder) : ffn_width(tc, Side::Decoder);
    if (ffn_width(tc, Side::Encoder) == 0) uc.sharing.enc_ffn = FfnStrategy::no_op();
    if (ffn_width(tc, Side::Decoder) == 0) uc.sharing.dec_ffn = FfnStrategy::no_op();
    TransformerModel tied = build_model(tc, 3);
    TransformerModel untied = build_model(uc, 4);
    synchronise(untied.params(), tied.params());
    const auto batch = make_teacher_forced(tc, ptrs);
    {
      Tape a, b;
      forward_ok &= a.value(teacher_forced_logits(a, tied, batch, {}))
                        .same_values(b.value(teacher_forced_logits(b, untied, batch, {})));
    }
    const auto groups = tie_groups(tied.params(), untied.params());
    AdamState tied_state, untied_state;
    for (std::size_t step = 1; step <= 10; ++step) {
      for (auto* m : {&tied, &untied}) {
        m->params().zero_grad();
        Tape t;
        t.backward(teacher_forced_loss(t, *m, batch, {}));
      }
      for (const auto& [canonical, members] : groups) {
        const Tensor& tg = tied.params().physical(canonical);
        std::vector<double> sum(tg.size(), 0.0);
        for (Tensor* u : members)
          for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += u->grad()[i];
        if (step == 1) grad_err = std::max(grad_err, rel_diff(tg.grad(), sum));
        if (canonical.ends_with(".bk")) {
          for (float g : tg.grad()) key_bias_grad = std::max(key_bias_grad, double(std::abs(g)));
        }
        for (Tensor* u : members)
          for (std::size_t i = 0; i < sum.size(); ++i) u->grad()[i] = static_cast<float>(sum[i]);
      }
      const double lr = 1e-3;
      adam_step(tied.params(), tied_state, lr);
      adam_step(untied.params(), untied_state, lr);
    }
    {
      Tape a, b;
      const Tensor& la = a.value(teacher_forced_logits(a, tied, batch, {}));
      const Tensor& lb = b.value(teacher_forced_logits(b, untied, batch, {}));
      std::vector<double> ub(lb.values().begin(), lb.values().end());
      output_err = std::max(output_err, rel_diff(la.values(), ub));
    }
    // Key biases shift every score of a query row equally, so softmax makes
    // their gradient zero and Adam only rescales rounding noise there.
    for (const auto& [canonical, members] : groups) {
      if (canonical.ends_with(".bk")) continue;
      const Tensor& tw = tied.params().physical(canonical);
      for (Tensor* u : members) {
        std::vector<double> uw(u->values().begin(), u->values().end());
        const double e = rel_diff(tw.values(), uw);
        if (e > traj_err) traj_err = e, traj_worst = std::string(preset) + ":" + canonical;
      }
    }
  }
  Outcome o;
  o.pass = forward_ok && grad_err <= 1e-6 && traj_err <= 1e-5 && output_err <= 1e-5;
  o.detail = std::string("forward ") + (forward_ok ? "bit-identical" : "DIFFERS") +
             ", grad rel err " + fmt("%.2e", grad_err) + ", 10-step Adam rel err " +
             fmt("%.2e", traj_err) + " (" + traj_worst + "), outputs after 10 steps " +
             fmt("%.2e", output_err) + "; key biases excluded, max |grad| " +
             fmt("%.1e", key_bias_grad);
  return o;
}

Outcome similarity_math() {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> nd;
  auto rnd = [&](int n, int d) {
    Eigen::MatrixXd m(n, d);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = nd(rng);
    return m;
  };
  double cka_err = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 10 + trial % 30;
    const Eigen::MatrixXd a = rnd(n, 3 + trial % 7), b = rnd(n, 2 + trial % 5);
    const Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(rnd(a.cols(), a.cols())).householderQ();
    const double base = linear_cka(a, b);
    cka_err = std::max({cka_err, std::abs(linear_cka(a, a) - 1.0), std::abs(linear_cka(b, a) - base),
                        std::abs(linear_cka(a * q, b) - base), std::abs(linear_cka(2.7 * a, b) - base)});
  }
  // O(n^2) oracle over sorted (distance, index) pairs.
  auto brute = [](const Eigen::MatrixXd& s, std::size_t q, std::size_t k) {
    std::vector<std::pair<double, std::size_t>> d;
    for (Eigen::Index j = 0; j < s.rows(); ++j) {
      if (std::size_t(j) == q) continue;
      d.emplace_back(1.0 - s.row(q).dot(s.row(j)) / (s.row(q).norm() * s.row(j).norm()), j);
    }
    std::sort(d.begin(), d.end());
    std::set<std::size_t> out;
    for (std::size_t i = 0; i < k; ++i) out.insert(d[i].second);
    return out;
  };
  bool lns_self = true, lns_oracle = true;
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 20 + trial % 31;
    const Eigen::MatrixXd a = rnd(n, 4), b = rnd(n, 6);
    lns_self &= lns(a, a) == 1.0;
    for (std::size_t k : {1, 3, 5}) {
      double total = 0;
      for (int i = 0; i < n; ++i) {
        const auto x = brute(a, i, k), y = brute(b, i, k);
        std::size_t inter = 0;
        for (auto v : x) inter += y.count(v);
        total += double(inter) / double(2 * k - inter);
      }
      lns_oracle &= lns(a, b, k) == total / n;
    }
  }
  const std::vector<double> bench{0.96, 0.96};
  const double norm = normalize_against_benchmark(0.94, bench);
  Outcome o;
  o.pass = cka_err <= 1e-9 && lns_self && lns_oracle && std::abs(norm - 97.6) <= 0.5;
  o.detail = "CKA max err " + fmt("%.1e", cka_err) + ", LNS self " + (lns_self ? "1" : "!=1") +
             ", LNS oracle " + (lns_oracle ? "exact" : "MISMATCH") + ", normalized " +
             fmt("%.2f", norm) + " (want 97.6)";
  return o;
}

Outcome sharing_assignments() {
  using K = FfnStrategyKind;
  using V = std::vector<std::size_t>;
  bool ok = resolve_ffn_assignment(K::Sequence, 6, 1) == V(6, 0) &&
            resolve_ffn_assignment(K::Sequence, 6, 2) == V{0, 0, 0, 1, 1, 1} &&
            resolve_ffn_assignment(K::Sequence, 6, 3) == V{0, 0, 1, 1, 2, 2} &&
            resolve_ffn_assignment(K::Cycle, 6, 1) == V(6, 0) &&
            resolve_ffn_assignment(K::Cycle, 6, 2) == V{0, 1, 0, 1, 0, 1} &&
            resolve_ffn_assignment(K::Cycle, 6, 3) == V{0, 1, 2, 0, 1, 2} &&
            resolve_ffn_assignment(K::CycleRev, 6, 3) == V{0, 1, 2, 2, 1, 0};
  ModelConfig cyc = transformer_big();
  cyc.sharing.enc_ffn = FfnStrategy::cycle(3);
  const double pct = 100.0 * double(count_params(cyc).total) /
                     double(count_params(transformer_big()).total);
  Outcome o;
  o.pass = ok && std::abs(pct - 88.0) <= 1.0;
  o.detail = std::string("patterns ") + (ok ? "match" : "DIFFER") + ", encoder Cycle M=3 at " +
             fmt("%.2f%%", pct) + " of baseline (want 88)";
  return o;
}

Outcome toy_training() {
  const auto start = Clock::now();
  ModelConfig base;
  base.n_enc = 2;
  base.n_dec = 2;
  base.d_model = 32;
  base.d_ff = 64;
  base.heads = 4;
  base.vocab_size = 20;
  base.max_len = 32;
  base.dropout = 0.0f;
  const Corpus train_set = generate_toy_task(ToyTask::Copy, 2000, 1, 8, 20, 1);
  const Corpus eval_set = generate_toy_task(ToyTask::Copy, 200, 1, 8, 20, 99);
  TrainOptions opts;
  opts.steps = 2000;
  opts.batch_size = 32;
  opts.seed = 1;
  opts.schedule = {3e-3, 100};
  ModelConfig wide = apply_preset(base, "OneWideFFN");
  const std::vector<std::pair<std::string, ModelConfig>> models{
      {"baseline", base}, {"SharedEncNoDec", apply_preset(base, "SharedEncNoDec")}, {"OneWide", wide}};
  Outcome o;
  std::string parts;
  for (const auto& [name, config] : models) {
    TransformerModel m = build_model(config, 1);
    train(m, train_set, opts);
    const double acc = token_accuracy(m, eval_set).accuracy();
    o.pass &= acc >= 0.95;
    parts += name + " " + fmt("%.3f", acc) + ", ";
  }
  const double t = seconds_since(start);
  o.pass &= t < 600.0;
  o.detail = parts + "2000 steps each, " + fmt("%.0f s", t) + " (OneWide d_ff'=" +
             std::to_string(*wide.d_ff_shared) + ")";
  return o;
}

Outcome latency_direction(const std::filesystem::path& csv_path) {
  ModelConfig shape;
  shape.n_enc = 2;
  shape.n_dec = 2;
  shape.d_model = 64;
  shape.d_ff = 256;
  shape.heads = 4;
  shape.vocab_size = 20;
  shape.max_len = 64;
  shape.dropout = 0.0f;
  const Corpus train_set = generate_toy_task(ToyTask::Copy, 1000, 4, 8, 20, 3);
  const Corpus bench = generate_toy_task(ToyTask::Copy, 40, 6, 8, 20, 4);
  TrainOptions opts;
  opts.steps = 300;
  opts.batch_size = 32;
  opts.seed = 2;
  opts.schedule = {2e-3, 100};
  TransformerModel baseline = build_model(shape, 5);
  TransformerModel nodec = build_model(apply_preset(shape, "NoDec"), 5);
  train(baseline, train_set, opts);
  train(nodec, train_set, opts);

  ThroughputOptions t;
  t.batch_size = 1;
  t.beam = 1;
  t.runs = 5;
  t.max_len = 16;
  const ThroughputReport rb = measure_throughput(baseline, bench, t, "baseline");
  const ThroughputReport rn = measure_throughput(nodec, bench, t, "NoDec");

  std::vector<TransformerModel*> models{&baseline, &nodec};
  const std::vector<std::string> ids{"baseline", "NoDec"};
  const std::vector<std::size_t> sizes{1, 2, 4, 8};
  t.runs = 3;
  const auto rows = batch_size_sweep(models, ids, sizes, bench, t);
  std::ofstream(csv_path) << throughput_csv(rows);

  Outcome o;
  o.pass = rn.tokens_per_sec_mean > rb.tokens_per_sec_mean && rows.size() == 8;
  o.detail = "batch 1 greedy: NoDec " + fmt("%.0f", rn.tokens_per_sec_mean) + " vs baseline " +
             fmt("%.0f", rb.tokens_per_sec_mean) + " tok/s (" +
             fmt("%+.1f%%", 100.0 * (rn.tokens_per_sec_mean / rb.tokens_per_sec_mean - 1.0)) +
             "), sweep CSV " + csv_path.filename().string();
  return o;
}

Outcome checkpoint_economics(const std::filesystem::path& dir) {
  ModelConfig shape = tiny(32);
  const auto base_path = dir / "acceptance_baseline.wfn";
  const auto shared_path = dir / "acceptance_sharedenc.wfn";
  TransformerModel base = build_model(shape, 1);
  TransformerModel shared = build_model(apply_preset(shape, "SharedEnc"), 1);
  save_checkpoint(base_path, base.params());
  save_checkpoint(shared_path, shared.params());
  const double delta = double(std::filesystem::file_size(base_path)) -
                       double(std::filesystem::file_size(shared_path));
  const double predicted = 4.0 * double(ffn_savings(shape.n_enc - 1, shape.d_model, shape.d_ff).with_biases);

  TransformerModel reloaded = build_model(apply_preset(shape, "SharedEnc"), 2);
  load_checkpoint(shared_path, reloaded);
  const auto again = dir / "acceptance_sharedenc_again.wfn";
  save_checkpoint(again, reloaded.params());
  auto bytes = [](const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
  };
  const bool identical = bytes(shared_path) == bytes(again) && reloaded.params().same_values(shared.params());
  Outcome o;
  o.pass = delta > 0 && std::abs(delta - predicted) <= 1024.0 && identical;
  o.detail = "delta " + fmt("%.0f", delta) + " B vs predicted " + fmt("%.0f", predicted) +
             " B, round-trip " + (identical ? "byte-identical" : "DIFFERS");
  return o;
}

std::vector<double> table_dist(std::map<int, double> m) {
  std::vector<double> p(8, 1e-12);
  for (auto [t, v] : m) p[t] = v;
  return p;
}

class TableScorer : public IncrementalScorer {
 public:
  using Table = std::function<std::vector<double>(const std::vector<int>&)>;
  explicit TableScorer(Table t) : table_(std::move(t)) {}
  std::size_t vocab_size() const override { return 8; }
  void begin(std::span<const std::vector<int>> sources) override {
    prefixes_.assign(sources.size(), {});
    fresh_ = true;
  }
  void reorder(std::span<const std::size_t> parents) override {
    std::vector<std::vector<int>> next;
    for (auto p : parents) next.push_back(prefixes_[p]);
    prefixes_ = std::move(next);
  }
  Tensor step(std::span<const int> tokens) override {
    Tensor out({prefixes_.size(), 8});
    for (std::size_t h = 0; h < prefixes_.size(); ++h) {
      if (!fresh_) prefixes_[h].push_back(tokens[h]);
      const auto p = table_(prefixes_[h]);
      for (std::size_t t = 0; t < 8; ++t) out.at(h, t) = static_cast<float>(std::log(p[t]));
    }
    fresh_ = false;
    return out;
  }

 private:
  Table table_;
  std::vector<std::vector<int>> prefixes_;
  bool fresh_ = true;
};

Outcome decoding() {
  std::size_t mismatches = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    ModelConfig c = tiny(16);
    c.vocab_size = 10;
    if (seed % 2) {
      c.architecture = Architecture::DecoderOnly;
      c.n_enc = 0;
    }
    TransformerModel m = build_model(c, 1000 + seed);
    const Corpus src = generate_toy_task(ToyTask::Copy, 3, 1, 5, 10, seed);
    std::vector<std::vector<int>> sources;
    for (const auto& p : src.pairs) sources.push_back(p.source);
    ModelScorer scorer(m);
    const auto g = decode_greedy(scorer, sources, 8);
    const auto b = decode_beam(scorer, sources, 1, 8);
    for (std::size_t i = 0; i < sources.size(); ++i) {
      if (g[i].tokens != b[i].tokens || g[i].finished != b[i].finished ||
          g[i].logprob != b[i].logprob)
        ++mismatches;
    }
  }

  // Greedy takes the 0.6 branch, which then finishes poorly.
  constexpr int A = 4, B = 5, C = 6, D = 7;
  TableScorer scorer([&](const std::vector<int>& p) {
    if (p.empty()) return table_dist({{A, .6}, {B, .4}});
    if (p == std::vector<int>{A}) return table_dist({{kEos, .35}, {C, .325}, {D, .325}});
    if (p == std::vector<int>{B}) return table_dist({{kEos, .9}, {C, .1}});
    return table_dist({{kEos, .97}, {A, .03}});
  });
  const std::vector<std::vector<int>> one{{A}};
  const std::size_t max_len = 4;
  const double greedy = decode_greedy(scorer, one, max_len)[0].score();
  const double beam2 = decode_beam(scorer, one, 2, max_len)[0].score();
  double best = -1e300;
  std::function<void(std::vector<int>&)> walk = [&](std::vector<int>& prefix) {
    best = std::max(best, score_sequence(scorer, one[0], prefix, true) / double(prefix.size() + 1));
    for (int t = 0; t < 8; ++t) {
      if (t == kEos) continue;
      prefix.push_back(t);
      if (prefix.size() == max_len) {
        best = std::max(best, score_sequence(scorer, one[0], prefix, false) / double(max_len));
      } else {
        walk(prefix);
      }
      prefix.pop_back();
    }
  };
  std::vector<int> prefix;
  walk(prefix);
  Outcome o;
  o.pass = mismatches == 0 && beam2 > greedy && std::abs(beam2 - best) < 1e-6;
  o.detail = "beam1 vs greedy mismatches " + std::to_string(mismatches) + "/300; counterexample greedy " +
             fmt("%.4f", greedy) + ", beam2 " + fmt("%.4f", beam2) + ", exhaustive optimum " +
             fmt("%.4f", best);
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  const std::filesystem::path out_dir = argc > 1 ? argv[1] : std::filesystem::current_path();
  std::filesystem::create_directories(out_dir);
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"parameter accounting (Big shape percentages)", parameter_accounting},
      {"wide FFN sizing identities", wide_ffn_sizing},
      {"gradient correctness under every preset", gradient_correctness},
      {"tying invariants", tying_invariants},
      {"similarity math", similarity_math},
      {"sharing strategy assignments", sharing_assignments},
      {"toy copy task training", toy_training},
      {"latency direction", [&] { return latency_direction(out_dir / "throughput_batch_sweep.csv"); }},
      {"checkpoint economics", [&] { return checkpoint_economics(out_dir); }},
      {"decoding", decoding},
  };
  std::set<std::size_t> only;
  for (int i = 2; i < argc; ++i) only.insert(std::stoul(argv[i]));
  int failures = 0, ran = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (!only.empty() && !only.count(i + 1)) continue;
    ++ran;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += o.pass ? 0 : 1;
    std::printf("%s %2zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %d criteria passed\n", ran - failures, ran);
  return failures == 0 ? 0 : 1;
}
