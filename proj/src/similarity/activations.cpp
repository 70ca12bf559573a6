#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "wfn/errors.hpp"
#include "wfn/similarity.hpp"
#include "wfn/trainer.hpp"

namespace wfn {

namespace {

/// Per-sequence means, skipping the first skip[s] rows of each sequence.
void append_means(Eigen::MatrixXd& out, Eigen::Index first_row, const Tensor& tap,
                  const PackedBatch& batch, std::span<const std::size_t> skip) {
  const std::size_t d = tap.cols();
  for (std::size_t s = 0; s < batch.count(); ++s) {
    const std::size_t lead = skip.empty() ? 0 : skip[s];
    const std::size_t len = batch.length(s) - lead;
    Eigen::RowVectorXd mean = Eigen::RowVectorXd::Zero(static_cast<Eigen::Index>(d));
    for (std::size_t r = 0; r < len; ++r) {
      const float* row = tap.data() + (batch.begin(s) + lead + r) * d;
      for (std::size_t j = 0; j < d; ++j) mean[static_cast<Eigen::Index>(j)] += row[j];
    }
    out.row(first_row + static_cast<Eigen::Index>(s)) = mean / static_cast<double>(len);
  }
}

}  // namespace

ActivationSet collect_activations(TransformerModel& model, const Corpus& corpus, Side side,
                                  const std::string& model_id, std::size_t batch_size) {
  if (corpus.empty()) throw DataError("collect_activations: corpus is empty");
  if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
  const auto& c = model.config();
  const bool enc_dec = c.architecture == Architecture::EncoderDecoder;
  if (side == Side::Encoder && !enc_dec) {
    throw ConfigError("decoder-only models have no encoder activations");
  }
  const auto n = static_cast<Eigen::Index>(corpus.size());
  const std::uint64_t hash = corpus.content_hash();
  ActivationSet set;
  ForwardOptions opts;
  opts.record_taps = true;
  for (std::size_t start = 0; start < corpus.size(); start += batch_size) {
    std::vector<const SentencePair*> pairs;
    for (std::size_t i = start; i < std::min(corpus.size(), start + batch_size); ++i) {
      pairs.push_back(&corpus.pairs[i]);
    }
    const TeacherForcedBatch batch = make_teacher_forced(c, pairs);
    Tape tape;
    Taps taps;
    const PackedBatch* rows = &batch.decoder;
    std::span<const std::size_t> skip;
    if (side == Side::Encoder) {
      taps = encoder_forward(tape, model, batch.source, opts).taps;
      rows = &batch.source;
    } else if (enc_dec) {
      const StackResult enc = encoder_forward(tape, model, batch.source, {});
      taps = decoder_forward(tape, model, EncoderMemory{enc.output, &batch.source}, batch.decoder,
                             opts)
                 .taps;
    } else {
      taps = decoder_forward(tape, model, std::nullopt, batch.decoder, opts, batch.prefix_lengths)
                 .taps;
      skip = batch.prefix_lengths;
    }
    if (set.empty()) {
      for (const auto& t : taps) {
        set.push_back({model_id, hash, t.name,
                       Eigen::MatrixXd::Zero(n, static_cast<Eigen::Index>(t.value.cols()))});
      }
    }
    for (std::size_t t = 0; t < taps.size(); ++t) {
      append_means(set[t].values, static_cast<Eigen::Index>(start), taps[t].value, *rows, skip);
    }
  }
  return set;
}

namespace {

constexpr char kDumpMagic[4] = {'W', 'F', 'N', 'A'};

template <typename T>
void put(std::ofstream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

void put_str(std::ofstream& out, const std::string& s) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

template <typename T>
T get(std::ifstream& in, const std::filesystem::path& path) {
  T v;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) {
    throw DataError("activation dump truncated: " + path.string());
  }
  return v;
}

std::string get_str(std::ifstream& in, const std::filesystem::path& path) {
  const auto len = get<std::uint32_t>(in, path);
  std::string s(len, '\0');
  if (!in.read(s.data(), len)) throw DataError("activation dump truncated: " + path.string());
  return s;
}

}  // namespace

static_assert(std::endian::native == std::endian::little,
              "activation dump I/O assumes a little-endian host");

void write_activation_dump(const std::filesystem::path& path, const ActivationSet& set) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write activation dump " + path.string());
  out.write(kDumpMagic, 4);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(set.size()));
  for (const auto& a : set) {
    put_str(out, a.model_id);
    put<std::uint64_t>(out, a.corpus_hash);
    put_str(out, a.module_name);
    put<std::uint64_t>(out, static_cast<std::uint64_t>(a.values.rows()));
    put<std::uint64_t>(out, static_cast<std::uint64_t>(a.values.cols()));
    for (Eigen::Index i = 0; i < a.values.rows(); ++i) {
      for (Eigen::Index j = 0; j < a.values.cols(); ++j) put<float>(out, static_cast<float>(a.values(i, j)));
    }
  }
  if (!out) throw DataError("failed writing activation dump " + path.string());
}

ActivationSet read_activation_dump(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open activation dump " + path.string());
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kDumpMagic, 4) != 0) {
    throw DataError("not an activation dump: " + path.string());
  }
  ActivationSet set(get<std::uint32_t>(in, path));
  for (auto& a : set) {
    a.model_id = get_str(in, path);
    a.corpus_hash = get<std::uint64_t>(in, path);
    a.module_name = get_str(in, path);
    const auto n = static_cast<Eigen::Index>(get<std::uint64_t>(in, path));
    const auto d = static_cast<Eigen::Index>(get<std::uint64_t>(in, path));
    a.values.resize(n, d);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < d; ++j) a.values(i, j) = get<float>(in, path);
    }
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw DataError("activation dump has trailing bytes: " + path.string());
  }
  return set;
}

}  // namespace wfn
