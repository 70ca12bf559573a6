#include "wfn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "wfn/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

namespace wfn {

namespace {

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  template <typename T>
  void pod(T v) {
    bytes(&v, sizeof(T));
  }
  void str(const std::string& s) {
    pod<std::uint32_t>(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& in) : in_(in) {}
  void bytes(void* p, std::size_t n) {
    if (pos_ + n > in_.size()) throw DataError("checkpoint truncated at byte " + std::to_string(pos_));
    std::memcpy(p, in_.data() + pos_, n);
    pos_ += n;
  }
  template <typename T>
  T pod() {
    T v;
    bytes(&v, sizeof(T));
    return v;
  }
  std::string str() {
    const auto n = pod<std::uint32_t>();
    std::string s(n, '\0');
    bytes(s.data(), n);
    return s;
  }
  bool done() const { return pos_ == in_.size(); }

 private:
  const std::vector<std::uint8_t>& in_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const ParamStore& params) {
  Writer w;
  w.bytes(kCheckpointMagic, 4);
  w.pod<std::uint32_t>(static_cast<std::uint32_t>(params.names().size()));
  for (const auto& name : params.names()) {
    const Tensor& t = params.physical(name);
    w.str(name);
    w.pod<std::uint8_t>(0);
    w.pod<std::uint32_t>(static_cast<std::uint32_t>(t.rank()));
    for (auto d : t.shape()) w.pod<std::uint64_t>(d);
  }
  w.pod<std::uint32_t>(static_cast<std::uint32_t>(params.aliases().size()));
  for (const auto& [logical, canonical] : params.aliases()) {
    w.str(logical);
    w.str(canonical);
  }
  for (const auto& name : params.names()) {
    const Tensor& t = params.physical(name);
    w.bytes(t.data(), t.size() * sizeof(float));
  }
  return w.take();
}

void save_checkpoint(const std::filesystem::path& path, const ParamStore& params) {
  const auto bytes = encode_checkpoint(params);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write checkpoint " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("failed writing checkpoint " + path.string());
}

CheckpointContents decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
  Reader r(bytes);
  char magic[4];
  r.bytes(magic, 4);
  if (std::memcmp(magic, kCheckpointMagic, 4) != 0) throw DataError("not a WFN1 checkpoint");
  CheckpointContents c;
  const auto n = r.pod<std::uint32_t>();
  for (std::uint32_t i = 0; i < n; ++i) {
    CheckpointEntry e;
    e.name = r.str();
    if (r.pod<std::uint8_t>() != 0) throw DataError("checkpoint tensor '" + e.name + "' is not f32");
    const auto rank = r.pod<std::uint32_t>();
    if (rank == 0 || rank > 3) throw DataError("checkpoint tensor '" + e.name + "' has bad rank");
    for (std::uint32_t k = 0; k < rank; ++k) e.shape.push_back(r.pod<std::uint64_t>());
    c.entries.push_back(std::move(e));
  }
  const auto na = r.pod<std::uint32_t>();
  for (std::uint32_t i = 0; i < na; ++i) {
    std::string logical = r.str();
    std::string canonical = r.str();
    c.aliases.emplace_back(std::move(logical), std::move(canonical));
  }
  for (const auto& e : c.entries) {
    std::vector<float> values(shape_numel(e.shape));
    r.bytes(values.data(), values.size() * sizeof(float));
    c.tensors.emplace_back(e.shape, std::move(values));
  }
  if (!r.done()) throw DataError("checkpoint has trailing bytes");
  return c;
}

CheckpointContents read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

void load_checkpoint(const CheckpointContents& contents, ParamStore& params) {
  if (contents.entries.size() != params.names().size()) {
    throw DataError("checkpoint has " + std::to_string(contents.entries.size()) +
                    " tensors, model expects " + std::to_string(params.names().size()));
  }
  if (contents.aliases != params.aliases()) {
    throw DataError("checkpoint tie table does not match the model configuration");
  }
  for (std::size_t i = 0; i < contents.entries.size(); ++i) {
    const auto& e = contents.entries[i];
    if (e.name != params.names()[i]) {
      throw DataError("checkpoint tensor " + std::to_string(i) + " is '" + e.name +
                      "', model expects '" + params.names()[i] + "'");
    }
    Tensor& dst = params.physical(e.name);
    if (dst.shape() != e.shape) {
      throw DataError("checkpoint tensor '" + e.name + "' has shape " + shape_to_string(e.shape) +
                      ", model expects " + dst.shape_string());
    }
    std::copy(contents.tensors[i].values().begin(), contents.tensors[i].values().end(),
              dst.values().begin());
  }
}

void load_checkpoint(const std::filesystem::path& path, TransformerModel& model) {
  load_checkpoint(read_checkpoint(path), model.params());
}

std::uint64_t checkpoint_param_count(const CheckpointContents& contents) {
  std::uint64_t n = 0;
  for (const auto& e : contents.entries) n += shape_numel(e.shape);
  return n;
}

}  // namespace wfn
