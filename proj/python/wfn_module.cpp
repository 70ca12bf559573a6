#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "wfn/bleu.hpp"
#include "wfn/checkpoint.hpp"
#include "wfn/commands.hpp"
#include "wfn/decoding.hpp"
#include "wfn/errors.hpp"
#include "wfn/optim.hpp"
#include "wfn/similarity.hpp"
#include "wfn/trainer.hpp"

namespace py = pybind11;
using namespace wfn;

namespace {

std::vector<std::vector<int>> sources_of(const Corpus& corpus) {
  std::vector<std::vector<int>> out;
  for (const auto& p : corpus.pairs) out.push_back(p.source);
  return out;
}

}  // namespace

PYBIND11_MODULE(wfn, m) {
  m.doc() = "Transformer FFN sharing, training and representation similarity";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<DataError>(m, "DataError", base.ptr());
  py::register_exception<DimensionError>(m, "DimensionError", base.ptr());
  py::register_exception<IndexError>(m, "IndexError", base.ptr());
  py::register_exception<NumericError>(m, "NumericError", base.ptr());

  py::enum_<Side>(m, "Side").value("Encoder", Side::Encoder).value("Decoder", Side::Decoder);
  py::enum_<Architecture>(m, "Architecture")
      .value("EncoderDecoder", Architecture::EncoderDecoder)
      .value("DecoderOnly", Architecture::DecoderOnly);
  py::enum_<ToyTask>(m, "ToyTask")
      .value("Copy", ToyTask::Copy)
      .value("Reverse", ToyTask::Reverse)
      .value("Sort", ToyTask::Sort);

  py::class_<FfnStrategy>(m, "FfnStrategy")
      .def(py::init([](const std::string& kind, std::size_t distinct) {
             return FfnStrategy{parse_ffn_strategy_kind(kind), distinct};
           }),
           py::arg("kind"), py::arg("distinct") = 0)
      .def_property_readonly("kind", [](const FfnStrategy& s) { return to_string(s.kind); })
      .def_readonly("distinct", &FfnStrategy::distinct)
      .def("__repr__", [](const FfnStrategy& s) { return "FfnStrategy(" + to_string(s) + ")"; });

  py::class_<SharingSpec>(m, "SharingSpec")
      .def(py::init<>())
      .def_readwrite("enc_ffn", &SharingSpec::enc_ffn)
      .def_readwrite("dec_ffn", &SharingSpec::dec_ffn)
      .def_readwrite("tie_enc_dec_ffn", &SharingSpec::tie_enc_dec_ffn);

  py::class_<ModelConfig>(m, "ModelConfig")
      .def(py::init<>())
      .def_readwrite("n_enc", &ModelConfig::n_enc)
      .def_readwrite("n_dec", &ModelConfig::n_dec)
      .def_readwrite("d_model", &ModelConfig::d_model)
      .def_readwrite("d_ff", &ModelConfig::d_ff)
      .def_readwrite("d_ff_shared", &ModelConfig::d_ff_shared)
      .def_readwrite("d_ff_enc", &ModelConfig::d_ff_enc)
      .def_readwrite("d_ff_dec", &ModelConfig::d_ff_dec)
      .def_readwrite("heads", &ModelConfig::heads)
      .def_readwrite("vocab_size", &ModelConfig::vocab_size)
      .def_readwrite("max_len", &ModelConfig::max_len)
      .def_readwrite("dropout", &ModelConfig::dropout)
      .def_readwrite("architecture", &ModelConfig::architecture)
      .def_readwrite("sharing", &ModelConfig::sharing)
      .def("to_json", [](const ModelConfig& c) { return model_config_to_json(c).dump(); })
      .def("__eq__", [](const ModelConfig& a, const ModelConfig& b) { return a == b; });

  m.def("shape", &shape_config, py::arg("name"),
        "Named base shape: big, base, deep-shallow, decoder-only or toy.");
  m.def("apply_preset", &apply_preset, py::arg("config"), py::arg("preset"));
  m.def("preset_names", &preset_names);
  m.def("validate", &validate);
  m.def("one_wide_dff", &one_wide_dff);
  m.def("ffn_width", &ffn_width);
  m.def(
      "resolve_ffn_assignment",
      [](const std::string& kind, std::size_t n, std::size_t distinct) {
        return resolve_ffn_assignment(parse_ffn_strategy_kind(kind), n, distinct);
      },
      py::arg("kind"), py::arg("n"), py::arg("distinct") = 0);
  m.def(
      "count_params",
      [](const ModelConfig& c) {
        const ParamCount pc = count_params(c);
        return py::make_tuple(pc.total, pc.breakdown);
      },
      "Total physical parameters and the per-component breakdown.");
  m.def(
      "ffn_savings",
      [](std::size_t copies, std::size_t d_model, std::size_t d_ff) {
        const FfnSavings s = ffn_savings(copies, d_model, d_ff);
        return py::make_tuple(s.matrices_only, s.with_biases);
      },
      py::arg("copies"), py::arg("d_model"), py::arg("d_ff_prime"));
  m.def("params_percent", [](const ModelConfig& c) { return params_report(c, "").percent; });

  m.def(
      "lr_at",
      [](double base_lr, std::size_t warmup, std::size_t step) {
        return lr_at(Schedule{base_lr, warmup}, step);
      },
      py::arg("base_lr"), py::arg("warmup_steps"), py::arg("step"));

  m.def(
      "prefix_lm_mask",
      [](std::size_t src_len, std::size_t tgt_len) {
        const BoolMatrix mask = prefix_lm_mask(src_len, tgt_len);
        py::array_t<bool> out({mask.rows, mask.cols});
        auto view = out.mutable_unchecked<2>();
        for (std::size_t r = 0; r < mask.rows; ++r)
          for (std::size_t c = 0; c < mask.cols; ++c) view(r, c) = mask(r, c);
        return out;
      },
      py::arg("src_len"), py::arg("tgt_len"));

  m.def("linear_cka", &linear_cka, py::arg("a"), py::arg("b"));
  m.def(
      "knn", [](const Eigen::MatrixXd& s, std::size_t q, std::size_t k) { return knn(s, q, k); },
      py::arg("space"), py::arg("query"), py::arg("k"));
  m.def("default_k", &default_k);
  m.def(
      "lns",
      [](const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, std::optional<std::size_t> k) {
        return lns(a, b, k);
      },
      py::arg("a"), py::arg("b"), py::arg("k") = py::none());
  m.def(
      "normalize_against_benchmark",
      [](double raw, const std::vector<double>& bench) {
        return normalize_against_benchmark(raw, bench);
      },
      py::arg("raw"), py::arg("benchmark"));
  m.def(
      "corpus_bleu",
      [](const std::vector<std::string>& h, const std::vector<std::string>& r) {
        return corpus_bleu(h, r);
      },
      py::arg("hypotheses"), py::arg("references"));

  py::class_<Corpus>(m, "Corpus")
      .def("__len__", &Corpus::size)
      .def_property_readonly("sources", &sources_of)
      .def_property_readonly("targets",
                             [](const Corpus& c) {
                               std::vector<std::vector<int>> out;
                               for (const auto& p : c.pairs) out.push_back(p.target);
                               return out;
                             })
      .def("content_hash", &Corpus::content_hash);
  m.def(
      "toy_task",
      [](const std::string& task, std::size_t count, std::size_t min_len, std::size_t max_len,
         std::size_t vocab, std::uint64_t seed) {
        return generate_toy_task(parse_toy_task(task), count, min_len, max_len, vocab, seed);
      },
      py::arg("task"), py::arg("count"), py::arg("min_len") = 1, py::arg("max_len") = 8,
      py::arg("vocab") = 20, py::arg("seed") = 0);

  py::class_<TransformerModel>(m, "Model")
      .def(py::init([](const ModelConfig& c, std::uint64_t seed) { return build_model(c, seed); }),
           py::arg("config"), py::arg("seed") = 0)
      .def_property_readonly("config", &TransformerModel::config)
      .def_property_readonly("param_count",
                             [](const TransformerModel& mdl) { return mdl.params().total(); })
      .def(
          "train",
          [](TransformerModel& mdl, const Corpus& corpus, std::size_t steps,
             std::size_t batch_size, std::uint64_t seed, double base_lr, std::size_t warmup) {
            TrainOptions o;
            o.steps = steps;
            o.batch_size = batch_size;
            o.seed = seed;
            o.schedule = {base_lr, warmup};
            py::gil_scoped_release release;
            return train(mdl, corpus, o);
          },
          py::arg("corpus"), py::arg("steps"), py::arg("batch_size") = 32, py::arg("seed") = 0,
          py::arg("base_lr") = 7e-4, py::arg("warmup_steps") = 4000)
      .def("token_accuracy",
           [](TransformerModel& mdl, const Corpus& c) { return token_accuracy(mdl, c).accuracy(); })
      .def(
          "decode",
          [](TransformerModel& mdl, const std::vector<std::vector<int>>& sources, std::size_t beam,
             std::size_t max_len) {
            ModelScorer scorer(mdl);
            const auto hyps = beam == 1 ? decode_greedy(scorer, sources, max_len)
                                        : decode_beam(scorer, sources, beam, max_len);
            std::vector<std::vector<int>> out;
            for (const auto& h : hyps) out.push_back(h.tokens);
            return out;
          },
          py::arg("sources"), py::arg("beam") = 1, py::arg("max_len") = 32)
      .def(
          "activations",
          [](TransformerModel& mdl, const Corpus& c, Side side) {
            std::vector<std::pair<std::string, Eigen::MatrixXd>> out;
            for (auto& a : collect_activations(mdl, c, side, "")) {
              out.emplace_back(a.module_name, std::move(a.values));
            }
            return out;
          },
          py::arg("corpus"), py::arg("side"))
      .def("checkpoint_bytes", [](const TransformerModel& mdl) {
        const auto bytes = encode_checkpoint(mdl.params());
        return py::bytes(reinterpret_cast<const char*>(bytes.data()), bytes.size());
      });
}
