#include "wfn/run_config.hpp"

#include <cstdlib>
#include <fstream>
#include <set>

#include "wfn/errors.hpp"

namespace wfn {

using nlohmann::json;

namespace {

void check_keys(const json& j, std::string_view where, const std::set<std::string>& allowed) {
  if (!j.is_object()) throw ConfigError(std::string(where) + " must be an object");
  for (const auto& [key, _] : j.items()) {
    if (!allowed.count(key)) {
      std::string valid;
      for (const auto& a : allowed) valid += (valid.empty() ? "" : ", ") + a;
      throw ConfigError("unknown key '" + key + "' in " + std::string(where) +
                        " (valid keys: " + valid + ")");
    }
  }
}

template <typename T>
T get(const json& j, const char* key, std::string_view where) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string(where) + "." + key + ": " + e.what());
  }
}

template <typename T>
void maybe(const json& j, const char* key, std::string_view where, T& out) {
  if (j.contains(key)) out = get<T>(j, key, where);
}

FfnStrategy parse_strategy(const json& j, std::string_view where) {
  if (j.is_string()) return {parse_ffn_strategy_kind(j.get<std::string>()), 0};
  check_keys(j, where, {"kind", "distinct"});
  FfnStrategy s{parse_ffn_strategy_kind(get<std::string>(j, "kind", where)), 0};
  maybe(j, "distinct", where, s.distinct);
  return s;
}

json strategy_to_json(const FfnStrategy& s) {
  return {{"kind", to_string(s.kind)}, {"distinct", s.distinct}};
}

AttnSharing parse_attn(const json& j, std::string_view where) {
  const auto name = j.is_string() ? j.get<std::string>() : std::string();
  if (name == "Individual") return AttnSharing::Individual;
  if (name == "SharedAll") return AttnSharing::SharedAll;
  throw ConfigError(std::string(where) + ": attention sharing must be Individual or SharedAll");
}

std::string attn_name(AttnSharing a) {
  return a == AttnSharing::Individual ? "Individual" : "SharedAll";
}

SharingSpec parse_sharing(const json& j) {
  constexpr std::string_view w = "model.sharing";
  check_keys(j, w, {"enc_ffn", "dec_ffn", "tie_enc_dec_ffn", "enc_self_attn", "dec_self_attn",
                    "dec_cross_attn"});
  SharingSpec s;
  if (j.contains("enc_ffn")) s.enc_ffn = parse_strategy(j["enc_ffn"], "model.sharing.enc_ffn");
  if (j.contains("dec_ffn")) s.dec_ffn = parse_strategy(j["dec_ffn"], "model.sharing.dec_ffn");
  maybe(j, "tie_enc_dec_ffn", w, s.tie_enc_dec_ffn);
  if (j.contains("enc_self_attn")) s.enc_self_attn = parse_attn(j["enc_self_attn"], w);
  if (j.contains("dec_self_attn")) s.dec_self_attn = parse_attn(j["dec_self_attn"], w);
  if (j.contains("dec_cross_attn")) s.dec_cross_attn = parse_attn(j["dec_cross_attn"], w);
  return s;
}

const std::set<std::string> kModelKeys = {
    "shape",    "n_enc",   "n_dec",   "d_model", "d_ff",    "d_ff_shared", "d_ff_enc",
    "d_ff_dec", "heads",   "vocab_size", "max_len", "dropout", "architecture", "sharing"};

void parse_model_fields(const json& j, std::string_view w, ModelConfig& c) {
  maybe(j, "n_enc", w, c.n_enc);
  maybe(j, "n_dec", w, c.n_dec);
  maybe(j, "d_model", w, c.d_model);
  maybe(j, "d_ff", w, c.d_ff);
  maybe(j, "heads", w, c.heads);
  maybe(j, "vocab_size", w, c.vocab_size);
  maybe(j, "max_len", w, c.max_len);
  maybe(j, "dropout", w, c.dropout);
  for (auto [key, field] : {std::pair{"d_ff_shared", &c.d_ff_shared},
                            std::pair{"d_ff_enc", &c.d_ff_enc}, std::pair{"d_ff_dec", &c.d_ff_dec}}) {
    if (j.contains(key) && !j[key].is_null()) *field = get<std::size_t>(j, key, w);
  }
  if (j.contains("architecture")) {
    c.architecture = parse_architecture(get<std::string>(j, "architecture", w));
  }
}

}  // namespace

ModelConfig shape_config(std::string_view shape) {
  if (shape == "big") return transformer_big();
  if (shape == "base") return transformer_base();
  if (shape == "deep-shallow") return deep_encoder_shallow_decoder();
  if (shape == "decoder-only") return decoder_only_big();
  if (shape == "toy") {
    ModelConfig c;
    c.n_enc = 2;
    c.n_dec = 2;
    c.d_model = 32;
    c.d_ff = 64;
    c.heads = 4;
    c.vocab_size = 20;
    c.max_len = 64;
    c.dropout = 0.1f;
    return c;
  }
  throw ConfigError("unknown shape '" + std::string(shape) +
                    "' (big, base, deep-shallow, decoder-only, toy)");
}

DataSpec parse_data_spec(const json& j, std::string_view where) {
  check_keys(j, where, {"task", "count", "min_len", "max_len", "vocab", "seed", "src", "tgt"});
  DataSpec d;
  if (j.contains("task")) {
    if (j.contains("src") || j.contains("tgt")) {
      throw ConfigError(std::string(where) + ": give either a task or src/tgt files, not both");
    }
    TaskSpec t;
    t.kind = parse_toy_task(get<std::string>(j, "task", where));
    maybe(j, "count", where, t.count);
    maybe(j, "min_len", where, t.min_len);
    maybe(j, "max_len", where, t.max_len);
    maybe(j, "vocab", where, t.vocab);
    maybe(j, "seed", where, t.seed);
    d.task = t;
  } else {
    for (const char* k : {"count", "min_len", "max_len", "vocab", "seed"}) {
      if (j.contains(k)) throw ConfigError(std::string(where) + "." + k + " needs a task");
    }
    if (!j.contains("src") || !j.contains("tgt")) {
      throw ConfigError(std::string(where) + " needs a task or both src and tgt");
    }
    d.src = get<std::string>(j, "src", where);
    d.tgt = get<std::string>(j, "tgt", where);
  }
  return d;
}

RunConfig parse_run_config(const json& doc) {
  check_keys(doc, "config", {"seed", "preset", "model", "train", "data", "eval"});
  RunConfig rc;
  maybe(doc, "seed", "config", rc.seed);
  json model = doc.value("model", json::object());
  check_keys(model, "model", kModelKeys);
  maybe(model, "shape", "model", rc.shape);
  rc.model = shape_config(rc.shape);
  parse_model_fields(model, "model", rc.model);
  rc.vocab_explicit = model.contains("vocab_size");
  if (doc.contains("preset")) {
    if (model.contains("sharing")) {
      throw ConfigError("config: 'preset' and 'model.sharing' are mutually exclusive");
    }
    rc.preset = get<std::string>(doc, "preset", "config");
    rc.model = apply_preset(rc.model, *rc.preset);
  } else if (model.contains("sharing")) {
    rc.model.sharing = parse_sharing(model["sharing"]);
  }

  if (doc.contains("train")) {
    const json& t = doc["train"];
    constexpr std::string_view w = "train";
    check_keys(t, w, {"steps", "batch_size", "base_lr", "warmup_steps", "beta1", "beta2", "eps"});
    maybe(t, "steps", w, rc.train.steps);
    maybe(t, "batch_size", w, rc.train.batch_size);
    maybe(t, "base_lr", w, rc.train.schedule.base_lr);
    maybe(t, "warmup_steps", w, rc.train.schedule.warmup_steps);
    maybe(t, "beta1", w, rc.train.adam.beta1);
    maybe(t, "beta2", w, rc.train.adam.beta2);
    maybe(t, "eps", w, rc.train.adam.eps);
  }
  if (doc.contains("data")) rc.data = parse_data_spec(doc["data"], "data");
  if (doc.contains("eval")) rc.eval = parse_data_spec(doc["eval"], "eval");
  if (!rc.vocab_explicit && rc.data.task) rc.model.vocab_size = rc.data.task->vocab;
  rc.train.seed = rc.seed;
  validate(rc.model);
  return rc;
}

void apply_seed_override(RunConfig& config) {
  if (const char* s = std::getenv("WFN_SEED"); s && *s) {
    try {
      std::size_t used = 0;
      config.seed = std::stoull(s, &used);
      if (used != std::string_view(s).size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw ConfigError("WFN_SEED must be a non-negative integer, got '" + std::string(s) + "'");
    }
    config.train.seed = config.seed;
  }
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  RunConfig rc = parse_run_config(doc);
  apply_seed_override(rc);
  return rc;
}

Corpus load_data(const DataSpec& spec, const Vocab* vocab) {
  if (spec.task) {
    const TaskSpec& t = *spec.task;
    Corpus c = generate_toy_task(t.kind, t.count, t.min_len, t.max_len, t.vocab, t.seed);
    if (vocab && vocab->size() < c.vocab.size()) {
      throw DataError("task vocabulary of " + std::to_string(c.vocab.size()) +
                      " exceeds the model vocabulary of " + std::to_string(vocab->size()));
    }
    return c;
  }
  if (spec.src.empty()) throw ConfigError("no data given");
  return vocab ? load_parallel_corpus(spec.src, spec.tgt, *vocab)
               : load_parallel_corpus(spec.src, spec.tgt);
}

json model_config_to_json(const ModelConfig& c) {
  auto opt = [](const std::optional<std::size_t>& v) { return v ? json(*v) : json(nullptr); };
  return {{"n_enc", c.n_enc},
          {"n_dec", c.n_dec},
          {"d_model", c.d_model},
          {"d_ff", c.d_ff},
          {"d_ff_shared", opt(c.d_ff_shared)},
          {"d_ff_enc", opt(c.d_ff_enc)},
          {"d_ff_dec", opt(c.d_ff_dec)},
          {"heads", c.heads},
          {"vocab_size", c.vocab_size},
          {"max_len", c.max_len},
          {"dropout", c.dropout},
          {"architecture", to_string(c.architecture)},
          {"sharing",
           {{"enc_ffn", strategy_to_json(c.sharing.enc_ffn)},
            {"dec_ffn", strategy_to_json(c.sharing.dec_ffn)},
            {"tie_enc_dec_ffn", c.sharing.tie_enc_dec_ffn},
            {"enc_self_attn", attn_name(c.sharing.enc_self_attn)},
            {"dec_self_attn", attn_name(c.sharing.dec_self_attn)},
            {"dec_cross_attn", attn_name(c.sharing.dec_cross_attn)}}}};
}

ModelConfig model_config_from_json(const json& j) {
  check_keys(j, "model", kModelKeys);
  ModelConfig c;
  parse_model_fields(j, "model", c);
  if (j.contains("sharing")) c.sharing = parse_sharing(j["sharing"]);
  validate(c);
  return c;
}

}  // namespace wfn
