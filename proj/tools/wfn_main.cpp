#include <CLI11.hpp>
#include <iostream>
#include <sstream>

#include "wfn/commands.hpp"
#include "wfn/errors.hpp"

namespace {

struct DataFlags {
  std::string task;
  std::size_t count = 200;
  std::size_t min_len = 1;
  std::size_t max_len = 8;
  std::size_t vocab = 0;
  std::uint64_t seed = 0;
  std::string src, tgt;

  void add(CLI::App* app) {
    app->add_option("--task", task, "toy task: copy, reverse or sort");
    app->add_option("--task-count", count, "toy task sentence count");
    app->add_option("--task-min-len", min_len, "toy task minimum length");
    app->add_option("--task-max-len", max_len, "toy task maximum length");
    app->add_option("--task-vocab", vocab, "toy task vocabulary (default: model vocabulary)");
    app->add_option("--task-seed", seed, "toy task seed");
    app->add_option("--src", src, "source text file");
    app->add_option("--tgt", tgt, "target text file");
  }

  wfn::DataSpec spec(std::size_t default_vocab) const {
    wfn::DataSpec d;
    if (!task.empty()) {
      if (!src.empty() || !tgt.empty()) throw wfn::ConfigError("give --task or --src/--tgt, not both");
      d.task = wfn::TaskSpec{wfn::parse_toy_task(task), count, min_len, max_len,
                             vocab ? vocab : default_vocab, seed};
    } else {
      if (src.empty() || tgt.empty()) throw wfn::ConfigError("data needs --task or both --src and --tgt");
      d.src = src;
      d.tgt = tgt;
    }
    return d;
  }
};

std::size_t checkpoint_vocab(const std::string& checkpoint) {
  return wfn::load_model(checkpoint).vocab.size();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Transformer FFN sharing and similarity toolkit"};
  app.require_subcommand(1);

  // params
  auto* params = app.add_subcommand("params", "parameter accounting");
  std::string params_config, shape = "big", preset = "baseline";
  std::optional<std::size_t> d_ff_shared, vocab_size;
  bool all_presets = false, json_only = false;
  params->add_option("--config", params_config, "run config JSON");
  params->add_option("--shape", shape, "big, base, deep-shallow, decoder-only, toy");
  params->add_option("--preset", preset, "sharing preset");
  params->add_option("--d-ff-shared", d_ff_shared, "width of shared FFNs");
  params->add_option("--vocab", vocab_size, "vocabulary size");
  params->add_flag("--all-presets", all_presets, "report every preset of the shape");
  params->add_flag("--json", json_only, "print JSON only");

  // train
  auto* train = app.add_subcommand("train", "train a model");
  wfn::TrainCommand train_cmd;
  std::string train_config, train_out, loss_csv, resume;
  train->add_option("--config", train_config, "run config JSON")->required();
  train->add_option("--out", train_out, "checkpoint path")->required();
  train->add_option("--loss-csv", loss_csv, "loss curve CSV (default <out>.loss.csv)");
  train->add_option("--resume", resume, "start from this checkpoint's parameters");

  // eval
  auto* eval = app.add_subcommand("eval", "token accuracy and BLEU of a checkpoint");
  wfn::EvalCommand eval_cmd;
  std::string eval_ckpt;
  DataFlags eval_data;
  eval->add_option("checkpoint", eval_ckpt)->required();
  eval->add_option("--beam", eval_cmd.beam, "beam width (1 = greedy)");
  eval->add_option("--max-len", eval_cmd.max_len, "generation cap (0 = 2*source+10)");
  eval_data.add(eval);

  // compare
  auto* compare = app.add_subcommand("compare", "representation similarity of two models");
  wfn::CompareCommand compare_cmd;
  std::string cmp_a, cmp_b, metric = "cka", out_dir = ".";
  std::optional<std::size_t> k;
  std::vector<std::string> benchmarks;
  DataFlags compare_data;
  compare->add_option("a", cmp_a, "checkpoint or activation dump")->required();
  compare->add_option("b", cmp_b, "checkpoint or activation dump")->required();
  compare->add_option("--metric", metric, "cka or lns");
  compare->add_option("--k", k, "LNS neighbourhood size (default 5% of sentences)");
  compare->add_option("--benchmark", benchmarks, "re-seeded reference checkpoints");
  compare->add_option("--out-dir", out_dir, "output directory");
  compare->add_flag("--save-activations", compare_cmd.save_activations, "write activation dumps");
  compare_data.add(compare);

  // selfsim
  auto* selfsim = app.add_subcommand("selfsim", "CKA self-similarity of a model's modules");
  std::string selfsim_ckpt, selfsim_out = ".";
  DataFlags selfsim_data;
  selfsim->add_option("checkpoint", selfsim_ckpt)->required();
  selfsim->add_option("--out-dir", selfsim_out, "output directory");
  selfsim_data.add(selfsim);

  // bench
  auto* bench = app.add_subcommand("bench", "decoding throughput");
  wfn::BenchCommand bench_cmd;
  std::vector<std::string> bench_ckpts;
  std::string batch_sizes = "1", bench_out;
  DataFlags bench_data;
  bench->add_option("checkpoints", bench_ckpts)->required();
  bench->add_option("--batch-sizes", batch_sizes, "comma-separated batch sizes");
  bench->add_option("--beam", bench_cmd.beam, "beam width");
  bench->add_option("--runs", bench_cmd.runs, "timed runs");
  bench->add_option("--max-len", bench_cmd.max_len, "generation cap (0 = 2*source+10)");
  bench->add_option("--out", bench_out, "CSV output path");
  bench_data.add(bench);

  // sweep
  auto* sweep = app.add_subcommand("sweep", "FFN width sweep");
  std::string sweep_config, side = "encoder", dims, sweep_out;
  sweep->add_option("--config", sweep_config, "run config JSON")->required();
  sweep->add_option("--side", side, "encoder or decoder");
  sweep->add_option("--dims", dims, "comma-separated widths (0 = No-op)")->required();
  sweep->add_option("--out", sweep_out, "CSV output path");

  CLI11_PARSE(app, argc, argv);

  auto parse_sizes = [](const std::string& list) {
    std::vector<std::size_t> out;
    std::stringstream in(list);
    std::string item;
    while (std::getline(in, item, ',')) {
      try {
        std::size_t used = 0;
        const auto v = std::stoull(item, &used);
        if (used != item.size()) throw std::invalid_argument(item);
        out.push_back(v);
      } catch (const std::exception&) {
        throw wfn::ConfigError("not a non-negative integer: '" + item + "'");
      }
    }
    if (out.empty()) throw wfn::ConfigError("empty list");
    return out;
  };

  try {
    if (*params) {
      wfn::ModelConfig config;
      std::string label = preset;
      if (!params_config.empty()) {
        const wfn::RunConfig rc = wfn::load_run_config(params_config);
        config = rc.model;
        label = rc.preset.value_or("custom");
      } else {
        config = wfn::shape_config(shape);
        if (vocab_size) config.vocab_size = *vocab_size;
        if (d_ff_shared) config.d_ff_shared = *d_ff_shared;
        if (!all_presets) config = wfn::apply_preset(config, preset);
      }
      wfn::validate(config);
      if (all_presets) {
        wfn::cmd_params_presets(config, json_only, std::cout);
      } else {
        wfn::cmd_params(config, label, json_only, std::cout);
      }
    } else if (*train) {
      train_cmd.config = wfn::load_run_config(train_config);
      train_cmd.checkpoint = train_out;
      train_cmd.loss_csv = loss_csv;
      if (!resume.empty()) train_cmd.resume = resume;
      wfn::cmd_train(train_cmd, std::cout);
    } else if (*eval) {
      eval_cmd.checkpoint = eval_ckpt;
      eval_cmd.data = eval_data.spec(checkpoint_vocab(eval_ckpt));
      wfn::cmd_eval(eval_cmd, std::cout);
    } else if (*compare) {
      compare_cmd.a = cmp_a;
      compare_cmd.b = cmp_b;
      compare_cmd.metric = wfn::parse_metric(metric);
      compare_cmd.k = k;
      compare_cmd.out_dir = out_dir;
      for (const auto& b : benchmarks) compare_cmd.benchmarks.emplace_back(b);
      if (!compare_data.task.empty() || !compare_data.src.empty()) {
        compare_cmd.data = compare_data.spec(checkpoint_vocab(cmp_a));
      }
      wfn::cmd_compare(compare_cmd, std::cout);
    } else if (*selfsim) {
      wfn::cmd_selfsim(selfsim_ckpt, selfsim_data.spec(checkpoint_vocab(selfsim_ckpt)),
                       selfsim_out, std::cout);
    } else if (*bench) {
      for (const auto& c : bench_ckpts) bench_cmd.checkpoints.emplace_back(c);
      bench_cmd.batch_sizes = parse_sizes(batch_sizes);
      bench_cmd.out = bench_out;
      bench_cmd.data = bench_data.spec(checkpoint_vocab(bench_ckpts.front()));
      wfn::cmd_bench(bench_cmd, std::cout);
    } else if (*sweep) {
      wfn::SweepCommand cmd;
      cmd.config = wfn::load_run_config(sweep_config);
      cmd.side = wfn::parse_side(side);
      cmd.dims = parse_sizes(dims);
      cmd.out = sweep_out;
      wfn::cmd_sweep(cmd, std::cout);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return wfn::exit_code_for(e);
  }
  return 0;
}
