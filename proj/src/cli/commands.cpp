#include "wfn/commands.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <ostream>

#include "wfn/bleu.hpp"
#include "wfn/checkpoint.hpp"
#include "wfn/decoding.hpp"
#include "wfn/errors.hpp"
#include "wfn/sweep.hpp"
#include "wfn/throughput.hpp"
#include "wfn/trainer.hpp"

namespace wfn {

using nlohmann::json;
namespace fs = std::filesystem;

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return 2;
  if (dynamic_cast<const DataError*>(&e) || dynamic_cast<const IndexError*>(&e) ||
      dynamic_cast<const DimensionError*>(&e)) {
    return 3;
  }
  if (dynamic_cast<const NumericError*>(&e)) return 4;
  return 1;
}

namespace {

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  if (!out) throw DataError("failed writing " + path.string());
}

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

std::string with_commas(std::uint64_t v) {
  std::string s = std::to_string(v);
  for (int i = static_cast<int>(s.size()) - 3; i > 0; i -= 3) s.insert(static_cast<std::size_t>(i), ",");
  return s;
}

bool is_activation_dump(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  char magic[4] = {};
  return in.read(magic, 4) && std::memcmp(magic, "WFNA", 4) == 0;
}

std::vector<Side> sides_of(const ModelConfig& c) {
  if (c.architecture == Architecture::DecoderOnly) return {Side::Decoder};
  return {Side::Encoder, Side::Decoder};
}

}  // namespace

fs::path sidecar_path(const fs::path& checkpoint) {
  return fs::path(checkpoint.string() + ".json");
}

void save_model(const fs::path& checkpoint, const TransformerModel& model, const Vocab& vocab,
                const json& extra) {
  if (checkpoint.has_parent_path()) fs::create_directories(checkpoint.parent_path());
  save_checkpoint(checkpoint, model.params());
  json meta = extra;
  meta["model"] = model_config_to_json(model.config());
  meta["vocab"] = vocab.tokens();
  write_text(sidecar_path(checkpoint), meta.dump(2) + "\n");
}

LoadedModel load_model(const fs::path& checkpoint) {
  const fs::path side = sidecar_path(checkpoint);
  std::ifstream in(side);
  if (!in) throw DataError("missing checkpoint sidecar " + side.string());
  json meta;
  try {
    meta = json::parse(in);
  } catch (const json::exception& e) {
    throw DataError("sidecar " + side.string() + ": " + e.what());
  }
  if (!meta.contains("model") || !meta.contains("vocab")) {
    throw DataError("sidecar " + side.string() + " lacks model or vocab");
  }
  ModelConfig config = model_config_from_json(meta["model"]);
  Vocab vocab = Vocab::from_tokens(meta["vocab"].get<std::vector<std::string>>());
  if (vocab.size() > config.vocab_size) {
    throw DataError("sidecar vocabulary exceeds the model vocab_size");
  }
  TransformerModel model = build_model(config, 0);
  load_checkpoint(checkpoint, model);
  return {std::move(model), std::move(vocab), std::move(meta)};
}

ParamsReport params_report(const ModelConfig& config, const std::string& label) {
  ModelConfig baseline = config;
  baseline.sharing = SharingSpec{};
  baseline.d_ff_shared.reset();
  baseline.d_ff_enc.reset();
  baseline.d_ff_dec.reset();
  ParamsReport r;
  r.label = label;
  r.count = count_params(config);
  r.baseline_total = count_params(baseline).total;
  r.percent = 100.0 * static_cast<double>(r.count.total) / static_cast<double>(r.baseline_total);
  return r;
}

json to_json(const ParamsReport& r) {
  return {{"config", r.label},
          {"total", r.count.total},
          {"baseline_total", r.baseline_total},
          {"percent", r.percent},
          {"breakdown", r.count.breakdown}};
}

void cmd_params(const ModelConfig& config, const std::string& label, bool json_only,
                std::ostream& out) {
  const ParamsReport r = params_report(config, label);
  if (!json_only) {
    out << label << ": " << with_commas(r.count.total) << " parameters ("
        << fmt("%.1f", r.percent) << "% of " << with_commas(r.baseline_total) << ")\n";
    for (const auto& [component, n] : r.count.breakdown) {
      char line[96];
      std::snprintf(line, sizeof line, "  %-16s %15s\n", component.c_str(), with_commas(n).c_str());
      out << line;
    }
  }
  out << to_json(r).dump(2) << "\n";
}

void cmd_params_presets(const ModelConfig& shape, bool json_only, std::ostream& out) {
  json rows = json::array();
  if (!json_only) out << "preset                   params        %\n";
  for (const auto& name : preset_names()) {
    ModelConfig c;
    try {
      c = apply_preset(shape, name);
      validate(c);
    } catch (const ConfigError&) {
      continue;
    }
    const ParamsReport r = params_report(c, name);
    rows.push_back(to_json(r));
    if (!json_only) {
      char line[96];
      std::snprintf(line, sizeof line, "%-20s %15s %7.1f\n", name.c_str(),
                    with_commas(r.count.total).c_str(), r.percent);
      out << line;
    }
  }
  out << rows.dump(2) << "\n";
}

void cmd_train(const TrainCommand& cmd, std::ostream& out) {
  RunConfig cfg = cmd.config;
  if (!cfg.data.present()) throw ConfigError("train needs a 'data' section");
  Corpus corpus = load_data(cfg.data);
  std::optional<LoadedModel> resumed;
  if (cmd.resume) {
    resumed.emplace(load_model(*cmd.resume));
    if (resumed->vocab.tokens() != corpus.vocab.tokens()) {
      throw DataError("resume checkpoint vocabulary differs from the training corpus");
    }
  }
  if (!cfg.vocab_explicit) cfg.model.vocab_size = corpus.vocab.size();
  if (corpus.vocab.size() > cfg.model.vocab_size) {
    throw DataError("corpus vocabulary of " + std::to_string(corpus.vocab.size()) +
                    " exceeds model vocab_size " + std::to_string(cfg.model.vocab_size));
  }
  TransformerModel model = build_model(cfg.model, cfg.seed);
  if (resumed) {
    if (!(resumed->model.config() == cfg.model)) {
      throw ConfigError("resume checkpoint was trained with a different model configuration");
    }
    load_checkpoint(read_checkpoint(*cmd.resume), model.params());
  }
  const std::vector<float> losses = train(model, corpus, cfg.train);

  json extra{{"seed", cfg.seed}, {"steps", cfg.train.steps}};
  if (cfg.preset) extra["preset"] = *cfg.preset;
  save_model(cmd.checkpoint, model, corpus.vocab, extra);
  std::string csv = "step,loss\n";
  for (std::size_t i = 0; i < losses.size(); ++i) {
    csv += std::to_string(i + 1) + fmt(",%.6f", losses[i]) + "\n";
  }
  const fs::path loss_path =
      cmd.loss_csv.empty() ? fs::path(cmd.checkpoint.string() + ".loss.csv") : cmd.loss_csv;
  write_text(loss_path, csv);

  json summary{{"checkpoint", cmd.checkpoint.string()},
               {"loss_csv", loss_path.string()},
               {"steps", losses.size()},
               {"params", model.params().total()}};
  if (!losses.empty()) summary["final_loss"] = losses.back();
  if (cfg.eval.present()) {
    const Corpus eval = load_data(cfg.eval, &corpus.vocab);
    summary["eval_token_accuracy"] = token_accuracy(model, eval).accuracy();
  }
  out << summary.dump(2) << "\n";
}

void cmd_eval(const EvalCommand& cmd, std::ostream& out) {
  LoadedModel lm = load_model(cmd.checkpoint);
  const Corpus corpus = load_data(cmd.data, &lm.vocab);
  corpus.check();
  const AccuracyResult acc = token_accuracy(lm.model, corpus);
  ModelScorer scorer(lm.model);
  std::vector<std::string> hyps, refs;
  for (std::size_t start = 0; start < corpus.size(); start += 32) {
    std::vector<std::vector<int>> sources;
    std::size_t longest = 0;
    for (std::size_t i = start; i < std::min(corpus.size(), start + 32); ++i) {
      sources.push_back(corpus.pairs[i].source);
      longest = std::max(longest, sources.back().size());
      refs.push_back(lm.vocab.decode(corpus.pairs[i].target));
    }
    const std::size_t cap = cmd.max_len ? cmd.max_len : 2 * longest + 10;
    const auto decoded = cmd.beam == 1 ? decode_greedy(scorer, sources, cap)
                                       : decode_beam(scorer, sources, cmd.beam, cap);
    for (const auto& h : decoded) hyps.push_back(lm.vocab.decode(h.tokens));
  }
  std::size_t exact = 0;
  for (std::size_t i = 0; i < hyps.size(); ++i) exact += hyps[i] == refs[i] ? 1 : 0;
  const json report{{"sentences", corpus.size()},
                    {"token_accuracy", acc.accuracy()},
                    {"bleu", corpus_bleu(hyps, refs)},
                    {"exact_match", static_cast<double>(exact) / static_cast<double>(hyps.size())},
                    {"beam", cmd.beam}};
  out << report.dump(2) << "\n";
}

void cmd_compare(const CompareCommand& cmd, std::ostream& out) {
  json summary = json::object();
  auto emit = [&](const std::string& tag, const ActivationSet& a, const ActivationSet& b,
                  const std::vector<ActivationSet>& bench) {
    SimilarityReport r = pairwise_layer_similarity(a, b, cmd.metric, cmd.k);
    json s{{"metric", to_string(cmd.metric)},
           {"aggregate", r.aggregate},
           {"whole_layer", r.whole_layer}};
    if (!bench.empty()) {
      std::vector<double> raws;
      for (const auto& bset : bench) {
        raws.push_back(pairwise_layer_similarity(a, bset, cmd.metric, cmd.k).aggregate);
      }
      r.normalized = normalize_against_benchmark(r.aggregate, raws);
      s["benchmark_raw"] = raws;
      s["normalized"] = *r.normalized;
    }
    const fs::path csv = cmd.out_dir / (tag + "_" + to_string(cmd.metric) + ".csv");
    write_text(csv, heatmap_csv(r.row_labels, r.col_labels, r.matrix));
    s["matrix_csv"] = csv.string();
    summary[tag] = s;
  };

  if (is_activation_dump(cmd.a) && is_activation_dump(cmd.b)) {
    std::vector<ActivationSet> bench;
    for (const auto& p : cmd.benchmarks) bench.push_back(read_activation_dump(p));
    emit("dump", read_activation_dump(cmd.a), read_activation_dump(cmd.b), bench);
  } else {
    LoadedModel a = load_model(cmd.a);
    LoadedModel b = load_model(cmd.b);
    if (a.vocab.tokens() != b.vocab.tokens()) {
      throw DataError("compared models use different vocabularies");
    }
    const Corpus corpus = load_data(cmd.data, &a.vocab);
    std::vector<LoadedModel> bench;
    for (const auto& p : cmd.benchmarks) bench.push_back(load_model(p));
    const bool a_enc = a.model.config().architecture == Architecture::EncoderDecoder;
    const bool b_enc = b.model.config().architecture == Architecture::EncoderDecoder;
    for (Side side : {Side::Encoder, Side::Decoder}) {
      if (side == Side::Encoder && !(a_enc && b_enc)) continue;
      const std::string tag = to_string(side);
      const ActivationSet sa = collect_activations(a.model, corpus, side, cmd.a.string());
      const ActivationSet sb = collect_activations(b.model, corpus, side, cmd.b.string());
      std::vector<ActivationSet> sbench;
      for (std::size_t i = 0; i < bench.size(); ++i) {
        sbench.push_back(collect_activations(bench[i].model, corpus, side, cmd.benchmarks[i].string()));
      }
      if (cmd.save_activations) {
        write_activation_dump(cmd.out_dir / (tag + "_a.wfna"), sa);
        write_activation_dump(cmd.out_dir / (tag + "_b.wfna"), sb);
      }
      emit(tag, sa, sb, sbench);
    }
  }
  write_text(cmd.out_dir / ("compare_" + to_string(cmd.metric) + ".json"), summary.dump(2) + "\n");
  out << summary.dump(2) << "\n";
}

void cmd_selfsim(const fs::path& checkpoint, const DataSpec& data, const fs::path& out_dir,
                 std::ostream& out) {
  LoadedModel lm = load_model(checkpoint);
  const Corpus corpus = load_data(data, &lm.vocab);
  json summary = json::object();
  for (Side side : sides_of(lm.model.config())) {
    const ActivationSet taps = collect_activations(lm.model, corpus, side, checkpoint.string());
    std::vector<std::string> labels;
    for (const auto& t : taps) labels.push_back(t.module_name);
    const fs::path csv = out_dir / (to_string(side) + "_selfsim.csv");
    write_text(csv, heatmap_csv(labels, labels, self_similarity(taps)));
    summary[to_string(side)] = {{"modules", labels}, {"matrix_csv", csv.string()}};
  }
  out << summary.dump(2) << "\n";
}

void cmd_bench(const BenchCommand& cmd, std::ostream& out) {
  if (cmd.checkpoints.empty()) throw ConfigError("bench needs at least one checkpoint");
  std::vector<LoadedModel> models;
  std::vector<TransformerModel*> ptrs;
  std::vector<std::string> ids;
  for (const auto& p : cmd.checkpoints) models.push_back(load_model(p));
  for (std::size_t i = 0; i < models.size(); ++i) {
    ptrs.push_back(&models[i].model);
    ids.push_back(models[i].meta.value("preset", cmd.checkpoints[i].stem().string()));
    if (models[i].vocab.tokens() != models[0].vocab.tokens()) {
      throw DataError("benchmarked models use different vocabularies");
    }
  }
  for (std::size_t i = 1; i < ids.size(); ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      if (ids[i] == ids[j]) ids[i] = cmd.checkpoints[i].stem().string() + "#" + std::to_string(i);
    }
  }
  const Corpus corpus = load_data(cmd.data, &models[0].vocab);
  ThroughputOptions opts;
  opts.beam = cmd.beam;
  opts.runs = cmd.runs;
  opts.max_len = cmd.max_len;
  const auto rows = batch_size_sweep(ptrs, ids, cmd.batch_sizes, corpus, opts);
  const std::string csv = throughput_csv(rows);
  if (!cmd.out.empty()) write_text(cmd.out, csv);
  out << csv;
}

void cmd_sweep(const SweepCommand& cmd, std::ostream& out) {
  RunConfig cfg = cmd.config;
  if (!cfg.data.present()) throw ConfigError("sweep needs a 'data' section");
  const Corpus train_set = load_data(cfg.data);
  const Corpus eval = cfg.eval.present() ? load_data(cfg.eval, &train_set.vocab) : train_set;
  if (!cfg.vocab_explicit) cfg.model.vocab_size = train_set.vocab.size();
  const auto rows =
      ffn_dim_sweep(cmd.side, cmd.dims, cfg.model, train_set, eval, cfg.train, cfg.seed);
  const std::string csv = sweep_csv(rows);
  if (!cmd.out.empty()) write_text(cmd.out, csv);
  out << csv;
}

}  // namespace wfn
