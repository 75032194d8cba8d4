#include <bit>
#include <cstring>
#include <fstream>

#include "s2p/tinyformer.hpp"

namespace s2p {

namespace {

constexpr char kMagic[8] = {'S', '2', 'P', 'M', 'O', 'D', 'E', 'L'};
constexpr std::uint32_t kFormatVersion = 1;

class Writer {
 public:
  void u32(std::uint32_t v) { le(v); }
  void u64(std::uint64_t v) { le(v); }
  void f64(double v) { le(std::bit_cast<std::uint64_t>(v)); }
  void bytes(std::string_view s) { out_.append(s); }
  std::string take() { return std::move(out_); }

 private:
  template <class U>
  void le(U v) {
    for (std::size_t i = 0; i < sizeof(U); ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  std::string out_;
};

class Reader {
 public:
  explicit Reader(std::string_view in) : in_(in) {}

  std::uint32_t u32() { return le<std::uint32_t>(); }
  std::uint64_t u64() { return le<std::uint64_t>(); }
  double f64() { return std::bit_cast<double>(le<std::uint64_t>()); }
  std::string_view bytes(std::size_t n) {
    need(n);
    const auto s = in_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == in_.size(); }

 private:
  void need(std::size_t n) const {
    if (in_.size() - pos_ < n) throw ModelError("model file truncated");
  }
  template <class U>
  U le() {
    need(sizeof(U));
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(static_cast<unsigned char>(in_[pos_ + i])) << (8 * i);
    pos_ += sizeof(U);
    return v;
  }
  std::string_view in_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string serialize_model(const TrainedModel& model) {
  const ModelConfig& c = model.params.config;
  Writer w;
  w.bytes(std::string_view(kMagic, sizeof kMagic));
  w.u32(kFormatVersion);
  for (int v : {c.d_model, c.heads, c.encoder_layers, c.decoder_layers, c.ffn_dim, c.max_len}) {
    w.u32(static_cast<std::uint32_t>(v));
  }
  w.f64(c.dropout);
  w.u64(c.seed);
  w.u32(static_cast<std::uint32_t>(model.vocab.size()));
  for (const auto& t : model.vocab.tokens()) {
    w.u32(static_cast<std::uint32_t>(t.size()));
    w.bytes(t);
  }
  w.u64(model.params.values.size());
  for (double v : model.params.values) w.f64(v);
  return w.take();
}

TrainedModel deserialize_model(std::string_view bytes) {
  Reader r(bytes);
  if (r.bytes(sizeof kMagic) != std::string_view(kMagic, sizeof kMagic)) throw ModelError("not a model file");
  const std::uint32_t version = r.u32();
  if (version != kFormatVersion) throw ModelError("unsupported model file version " + std::to_string(version));

  ModelConfig c;
  c.d_model = static_cast<int>(r.u32());
  c.heads = static_cast<int>(r.u32());
  c.encoder_layers = static_cast<int>(r.u32());
  c.decoder_layers = static_cast<int>(r.u32());
  c.ffn_dim = static_cast<int>(r.u32());
  c.max_len = static_cast<int>(r.u32());
  c.dropout = r.f64();
  c.seed = r.u64();
  c.validate();

  const std::uint32_t vocab_size = r.u32();
  if (vocab_size < static_cast<std::uint32_t>(Vocab::kReserved)) throw ModelError("model vocabulary too small");
  std::vector<std::string> tokens;
  for (std::uint32_t i = 0; i < vocab_size; ++i) {
    const std::uint32_t len = r.u32();
    const std::string tok(r.bytes(len));
    if (i >= static_cast<std::uint32_t>(Vocab::kReserved)) tokens.push_back(tok);
  }
  TrainedModel model{Vocab(tokens), {}};
  model.params.config = c;
  model.params.vocab_size = model.vocab.size();
  model.params.layout = ParamLayout::make(c, model.params.vocab_size);

  const std::uint64_t count = r.u64();
  if (count != model.params.layout.total) throw ModelError("parameter count does not match the stored config");
  model.params.values.resize(count);
  for (auto& v : model.params.values) v = r.f64();
  if (!r.done()) throw ModelError("trailing bytes in model file");
  if (!model.params.all_finite()) throw ModelError("model file holds non-finite parameters");
  return model;
}

void save_model(const TrainedModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ModelError("cannot write model file " + path.string());
  const std::string bytes = serialize_model(model);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw ModelError("cannot write model file " + path.string());
}

TrainedModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ModelError("model file not found: " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_model(bytes);
}

}  // namespace s2p
