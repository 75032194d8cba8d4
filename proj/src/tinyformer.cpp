#include "s2p/tinyformer.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "s2p/kernels.hpp"
#include "s2p/metric.hpp"
#include "s2p/random.hpp"

namespace s2p {

// ===================================================================== vocab

std::vector<std::string> tokenize_code(std::string_view text) {
  std::vector<std::string> out;
  std::string word;
  auto flush = [&] {
    if (!word.empty()) out.push_back(std::move(word));
    word.clear();
  };
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c) || c == '_' || c >= 0x80) {
      word += ch;
    } else {
      flush();
      if (!std::isspace(c)) out.emplace_back(1, ch);
    }
  }
  flush();
  return out;
}

Vocab::Vocab() : Vocab(std::vector<std::string>{}) {}

Vocab::Vocab(const std::vector<std::string>& tokens) {
  tokens_ = {"<pad>", "<unk>", "<s>", "</s>"};
  for (int i = 0; i < kReserved; ++i) ids_[tokens_[i]] = i;
  for (const auto& t : tokens) {
    if (!ids_.emplace(t, static_cast<int>(tokens_.size())).second) {
      throw ModelError("duplicate vocabulary entry `" + t + "`");
    }
    tokens_.push_back(t);
  }
}

int Vocab::id(const std::string& token) const {
  const auto it = ids_.find(token);
  return it == ids_.end() ? kUnk : it->second;
}

std::vector<int> Vocab::encode(std::string_view text) const {
  std::vector<int> ids;
  for (const auto& t : tokenize_code(text)) ids.push_back(id(t));
  return ids;
}

std::string Vocab::decode(const std::vector<int>& ids) const {
  std::string out;
  for (int id : ids) {
    if (id == kPad || id == kBos || id == kEos) continue;
    if (!out.empty()) out += ' ';
    out += token(id);
  }
  return out;
}

Vocab build_vocab(const std::vector<ParallelPair>& pairs, int min_freq) {
  if (pairs.empty()) throw ModelError("cannot build a vocabulary from an empty corpus");
  std::map<std::string, int> freq;
  for (const auto& p : pairs) {
    for (const auto& t : tokenize_code(p.source)) ++freq[t];
    for (const auto& t : tokenize_code(p.target)) ++freq[t];
  }
  std::vector<std::pair<std::string, int>> entries;
  for (const auto& [tok, n] : freq) {
    if (n >= min_freq) entries.emplace_back(tok, n);
  }
  // freq is a std::map, so entries start in lexicographic order.
  std::stable_sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> tokens;
  for (auto& [tok, n] : entries) tokens.push_back(tok);
  return Vocab(tokens);
}

// ===================================================================== attention

AttentionMask AttentionMask::full(int rows, int cols) {
  return {rows, cols, std::vector<char>(static_cast<std::size_t>(rows) * cols, 1)};
}

AttentionMask AttentionMask::causal(int size) {
  AttentionMask m{size, size, std::vector<char>(static_cast<std::size_t>(size) * size, 0)};
  for (int i = 0; i < size; ++i) {
    for (int j = 0; j <= i; ++j) m.visible[static_cast<std::size_t>(i) * size + j] = 1;
  }
  return m;
}

namespace {

constexpr double kNormEps = 1e-5;

// Softmax weights of one head, reading columns [off, off + width) of q and k.
template <class Visible>
void head_weights(const Matrix& q, const Matrix& k, int off, int width, Visible visible, Matrix& probs) {
  const double scale = 1.0 / std::sqrt(static_cast<double>(width));
  probs = Matrix(q.rows, k.rows);
  std::vector<double> scores(static_cast<std::size_t>(k.rows));
  for (int i = 0; i < q.rows; ++i) {
    double best = -INFINITY;
    for (int j = 0; j < k.rows; ++j) {
      if (!visible(i, j)) continue;
      double acc = 0.0;
      for (int c = 0; c < width; ++c) acc += q(i, off + c) * k(j, off + c);
      scores[j] = acc * scale;
      best = std::max(best, scores[j]);
    }
    if (best == -INFINITY) continue;  // nothing visible: weights stay zero
    double sum = 0.0;
    for (int j = 0; j < k.rows; ++j) {
      if (!visible(i, j)) continue;
      probs(i, j) = std::exp(scores[j] - best);
      sum += probs(i, j);
    }
    for (int j = 0; j < k.rows; ++j) probs(i, j) /= sum;
  }
}

void head_context(const Matrix& probs, const Matrix& v, int off, int width, Matrix& ctx) {
  for (int i = 0; i < probs.rows; ++i) {
    for (int c = 0; c < width; ++c) {
      double acc = 0.0;
      for (int j = 0; j < probs.cols; ++j) acc += probs(i, j) * v(j, off + c);
      ctx(i, off + c) = acc;
    }
  }
}

}  // namespace

Matrix attention_weights(const Matrix& queries, const Matrix& keys, const AttentionMask& mask) {
  if (queries.cols != keys.cols) throw ModelError("attention: query and key widths differ");
  if (mask.rows != queries.rows || mask.cols != keys.rows) throw ModelError("attention: mask shape mismatch");
  Matrix probs;
  head_weights(queries, keys, 0, queries.cols, mask, probs);
  return probs;
}

Matrix attention(const Matrix& queries, const Matrix& keys, const Matrix& values, const AttentionMask& mask) {
  if (values.rows != keys.rows) throw ModelError("attention: key and value lengths differ");
  const Matrix probs = attention_weights(queries, keys, mask);
  Matrix out(queries.rows, values.cols);
  head_context(probs, values, 0, values.cols, out);
  return out;
}

// ===================================================================== params

void ModelConfig::validate() const {
  if (d_model < 1 || heads < 1 || encoder_layers < 1 || decoder_layers < 1 || ffn_dim < 1 || max_len < 2) {
    throw ConfigError("model dimensions must be positive (max_len at least 2)");
  }
  if (d_model % heads != 0) throw ConfigError("d_model must be divisible by heads");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must be in [0, 1)");
}

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be at least 1");
  if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
  if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("betas must be in [0, 1)");
  if (!(adam_eps > 0.0)) throw ConfigError("adam eps must be positive");
}

ParamLayout ParamLayout::make(const ModelConfig& config, int vocab_size) {
  ParamLayout layout;
  std::size_t offset = 0;
  auto take = [&offset](int rows, int cols) {
    Slice s{offset, rows, cols};
    offset += s.size();
    return s;
  };
  const int d = config.d_model;
  auto norm = [&] { return NormSlices{take(1, d), take(1, d)}; };
  auto attn = [&] { return AttentionSlices{take(d, d), take(d, d), take(d, d), take(d, d)}; };
  auto ffn = [&] { return FeedForwardSlices{take(d, config.ffn_dim), take(1, config.ffn_dim), take(config.ffn_dim, d), take(1, d)}; };

  layout.embedding = take(vocab_size, d);
  for (int l = 0; l < config.encoder_layers; ++l) {
    EncoderLayerSlices s;
    s.norm1 = norm();
    s.self_attn = attn();
    s.norm2 = norm();
    s.ffn = ffn();
    layout.encoder.push_back(s);
  }
  layout.encoder_norm = norm();
  for (int l = 0; l < config.decoder_layers; ++l) {
    DecoderLayerSlices s;
    s.norm1 = norm();
    s.self_attn = attn();
    s.norm2 = norm();
    s.cross_attn = attn();
    s.norm3 = norm();
    s.ffn = ffn();
    layout.decoder.push_back(s);
  }
  layout.decoder_norm = norm();
  layout.total = offset;
  return layout;
}

bool ModelParams::all_finite() const {
  return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
}

ModelParams init_params(const ModelConfig& config, int vocab_size) {
  config.validate();
  if (vocab_size <= Vocab::kReserved - 1) throw ModelError("vocabulary too small");
  ModelParams p;
  p.config = config;
  p.vocab_size = vocab_size;
  p.layout = ParamLayout::make(config, vocab_size);
  p.values.assign(p.layout.total, 0.0);

  SeededRng rng(config.seed);
  const double bound = 1.0 / std::sqrt(static_cast<double>(config.d_model));
  auto uniform = [&](const Slice& s) {
    for (double& v : p.view(s)) v = rng.uniform(-bound, bound);
  };
  auto ones = [&](const Slice& s) {
    for (double& v : p.view(s)) v = 1.0;
  };
  auto attn = [&](const AttentionSlices& a) {
    uniform(a.wq);
    uniform(a.wk);
    uniform(a.wv);
    uniform(a.wo);
  };
  auto ffn = [&](const FeedForwardSlices& f) {
    uniform(f.w1);
    uniform(f.w2);
  };

  uniform(p.layout.embedding);
  for (const auto& l : p.layout.encoder) {
    ones(l.norm1.gain);
    attn(l.self_attn);
    ones(l.norm2.gain);
    ffn(l.ffn);
  }
  ones(p.layout.encoder_norm.gain);
  for (const auto& l : p.layout.decoder) {
    ones(l.norm1.gain);
    attn(l.self_attn);
    ones(l.norm2.gain);
    attn(l.cross_attn);
    ones(l.norm3.gain);
    ffn(l.ffn);
  }
  ones(p.layout.decoder_norm.gain);
  return p;
}

// ===================================================================== forward / backward

namespace {

using GradSpan = std::span<double>;

// y = x · W, W is in x out.
Matrix linear(const Matrix& x, std::span<const double> w, int out) {
  Matrix y(x.rows, out);
  kernels::matmul(x.data, w, y.data, x.rows, x.cols, out);
  return y;
}

// dW += xᵀ · dy ; returns dx = dy · Wᵀ
Matrix linear_backward(const Matrix& x, std::span<const double> w, const Matrix& dy, GradSpan dw) {
  kernels::matmul_at_acc(x.data, dy.data, dw, x.cols, x.rows, dy.cols);
  Matrix dx(x.rows, x.cols);
  kernels::matmul_bt(dy.data, w, dx.data, dy.rows, dy.cols, x.cols);
  return dx;
}

void add_inplace(Matrix& a, const Matrix& b) {
  for (std::size_t i = 0; i < a.data.size(); ++i) a.data[i] += b.data[i];
}

// ---- layer norm

struct NormCache {
  Matrix xhat;
  std::vector<double> rstd;
};

Matrix layer_norm(const Matrix& x, std::span<const double> gain, std::span<const double> bias, NormCache& cache) {
  Matrix y(x.rows, x.cols);
  cache.xhat = Matrix(x.rows, x.cols);
  cache.rstd.assign(static_cast<std::size_t>(x.rows), 0.0);
  for (int r = 0; r < x.rows; ++r) {
    double mean = 0.0;
    for (int c = 0; c < x.cols; ++c) mean += x(r, c);
    mean /= x.cols;
    double var = 0.0;
    for (int c = 0; c < x.cols; ++c) var += (x(r, c) - mean) * (x(r, c) - mean);
    var /= x.cols;
    const double rstd = 1.0 / std::sqrt(var + kNormEps);
    cache.rstd[r] = rstd;
    for (int c = 0; c < x.cols; ++c) {
      const double xh = (x(r, c) - mean) * rstd;
      cache.xhat(r, c) = xh;
      y(r, c) = gain[c] * xh + bias[c];
    }
  }
  return y;
}

Matrix layer_norm_backward(const Matrix& dy, std::span<const double> gain, const NormCache& cache, GradSpan dgain,
                           GradSpan dbias) {
  Matrix dx(dy.rows, dy.cols);
  const double n = dy.cols;
  for (int r = 0; r < dy.rows; ++r) {
    double mean_dxh = 0.0, mean_dxh_xh = 0.0;
    for (int c = 0; c < dy.cols; ++c) {
      const double dxh = dy(r, c) * gain[c];
      mean_dxh += dxh;
      mean_dxh_xh += dxh * cache.xhat(r, c);
      dgain[c] += dy(r, c) * cache.xhat(r, c);
      dbias[c] += dy(r, c);
    }
    mean_dxh /= n;
    mean_dxh_xh /= n;
    for (int c = 0; c < dy.cols; ++c) {
      const double dxh = dy(r, c) * gain[c];
      dx(r, c) = cache.rstd[r] * (dxh - mean_dxh - cache.xhat(r, c) * mean_dxh_xh);
    }
  }
  return dx;
}

// ---- multi-head attention

struct AttnCache {
  Matrix xq, xkv;  // inputs
  Matrix q, k, v, ctx;
  std::vector<Matrix> probs;  // one per head
  bool causal = false;
};

Matrix mha_forward(const ModelParams& p, const AttentionSlices& s, const Matrix& xq, const Matrix& xkv, bool causal,
                   AttnCache& cache) {
  const int d = p.config.d_model;
  const int heads = p.config.heads;
  const int width = d / heads;
  cache.xq = xq;
  cache.xkv = xkv;
  cache.causal = causal;
  cache.q = linear(xq, p.view(s.wq), d);
  cache.k = linear(xkv, p.view(s.wk), d);
  cache.v = linear(xkv, p.view(s.wv), d);
  cache.ctx = Matrix(xq.rows, d);
  cache.probs.assign(static_cast<std::size_t>(heads), Matrix{});
  for (int h = 0; h < heads; ++h) {
    if (causal) {
      head_weights(cache.q, cache.k, h * width, width, [](int i, int j) { return j <= i; }, cache.probs[h]);
    } else {
      head_weights(cache.q, cache.k, h * width, width, [](int, int) { return true; }, cache.probs[h]);
    }
    head_context(cache.probs[h], cache.v, h * width, width, cache.ctx);
  }
  return linear(cache.ctx, p.view(s.wo), d);
}

// Returns (dxq, dxkv).
std::pair<Matrix, Matrix> mha_backward(const ModelParams& p, const AttentionSlices& s, const AttnCache& cache,
                                       const Matrix& dout, std::vector<double>& grads) {
  const int d = p.config.d_model;
  const int heads = p.config.heads;
  const int width = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(width));
  auto g = [&grads](const Slice& sl) { return GradSpan(grads.data() + sl.offset, sl.size()); };

  const Matrix dctx = linear_backward(cache.ctx, p.view(s.wo), dout, g(s.wo));
  Matrix dq(cache.q.rows, d), dk(cache.k.rows, d), dv(cache.v.rows, d);
  const int tq = cache.q.rows, tk = cache.k.rows;
  std::vector<double> dprob(static_cast<std::size_t>(tk));
  for (int h = 0; h < heads; ++h) {
    const Matrix& P = cache.probs[h];
    const int off = h * width;
    for (int i = 0; i < tq; ++i) {
      double dot = 0.0;
      for (int j = 0; j < tk; ++j) {
        double acc = 0.0;
        for (int c = 0; c < width; ++c) acc += dctx(i, off + c) * cache.v(j, off + c);
        dprob[j] = acc;
        dot += P(i, j) * acc;
        const double pij = P(i, j);
        if (pij != 0.0) {
          for (int c = 0; c < width; ++c) dv(j, off + c) += pij * dctx(i, off + c);
        }
      }
      for (int j = 0; j < tk; ++j) {
        const double pij = P(i, j);
        if (pij == 0.0) continue;
        const double ds = pij * (dprob[j] - dot) * scale;
        for (int c = 0; c < width; ++c) {
          dq(i, off + c) += ds * cache.k(j, off + c);
          dk(j, off + c) += ds * cache.q(i, off + c);
        }
      }
    }
  }
  Matrix dxq = linear_backward(cache.xq, p.view(s.wq), dq, g(s.wq));
  Matrix dxkv = linear_backward(cache.xkv, p.view(s.wk), dk, g(s.wk));
  add_inplace(dxkv, linear_backward(cache.xkv, p.view(s.wv), dv, g(s.wv)));
  return {std::move(dxq), std::move(dxkv)};
}

// ---- feed-forward with tanh-approximated GELU

constexpr double kGeluC = 0.7978845608028654;  // sqrt(2 / pi)

double gelu(double x) { return 0.5 * x * (1.0 + std::tanh(kGeluC * (x + 0.044715 * x * x * x))); }

double gelu_grad(double x) {
  const double t = std::tanh(kGeluC * (x + 0.044715 * x * x * x));
  return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * kGeluC * (1.0 + 3.0 * 0.044715 * x * x);
}

struct FfnCache {
  Matrix x, h, u;
};

Matrix ffn_forward(const ModelParams& p, const FeedForwardSlices& s, const Matrix& x, FfnCache& cache) {
  const int d = p.config.d_model, f = p.config.ffn_dim;
  cache.x = x;
  cache.h = linear(x, p.view(s.w1), f);
  const auto b1 = p.view(s.b1);
  cache.u = Matrix(x.rows, f);
  for (int r = 0; r < x.rows; ++r) {
    for (int c = 0; c < f; ++c) {
      cache.h(r, c) += b1[c];
      cache.u(r, c) = gelu(cache.h(r, c));
    }
  }
  Matrix y = linear(cache.u, p.view(s.w2), d);
  const auto b2 = p.view(s.b2);
  for (int r = 0; r < y.rows; ++r) {
    for (int c = 0; c < d; ++c) y(r, c) += b2[c];
  }
  return y;
}

Matrix ffn_backward(const ModelParams& p, const FeedForwardSlices& s, const FfnCache& cache, const Matrix& dy,
                    std::vector<double>& grads) {
  auto g = [&grads](const Slice& sl) { return GradSpan(grads.data() + sl.offset, sl.size()); };
  auto db2 = g(s.b2);
  for (int r = 0; r < dy.rows; ++r) {
    for (int c = 0; c < dy.cols; ++c) db2[c] += dy(r, c);
  }
  Matrix du = linear_backward(cache.u, p.view(s.w2), dy, g(s.w2));
  auto db1 = g(s.b1);
  for (int r = 0; r < du.rows; ++r) {
    for (int c = 0; c < du.cols; ++c) {
      du(r, c) *= gelu_grad(cache.h(r, c));
      db1[c] += du(r, c);
    }
  }
  return linear_backward(cache.x, p.view(s.w1), du, g(s.w1));
}

// ---- dropout on residual branches

struct Dropout {
  double rate = 0.0;
  SeededRng* rng = nullptr;  // null: inference, no dropout

  bool active() const { return rng != nullptr && rate > 0.0; }

  // Applies inverted dropout in place and returns the mask (empty if inactive).
  Matrix apply(Matrix& x) const {
    if (!active()) return {};
    Matrix mask(x.rows, x.cols);
    const double keep = 1.0 / (1.0 - rate);
    for (std::size_t i = 0; i < x.data.size(); ++i) {
      mask.data[i] = rng->unit() >= rate ? keep : 0.0;
      x.data[i] *= mask.data[i];
    }
    return mask;
  }
};

Matrix masked(const Matrix& dy, const Matrix& mask) {
  if (mask.data.empty()) return dy;
  Matrix out = dy;
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] *= mask.data[i];
  return out;
}

// ---- whole model

struct EncoderLayerCache {
  NormCache n1, n2;
  AttnCache attn;
  FfnCache ffn;
  Matrix drop1, drop2;
};

struct DecoderLayerCache {
  NormCache n1, n2, n3;
  AttnCache self_attn, cross_attn;
  FfnCache ffn;
  Matrix drop1, drop2, drop3;
};

struct ForwardCache {
  std::vector<int> source, target;
  std::vector<EncoderLayerCache> enc;
  NormCache enc_norm;
  Matrix memory;  // encoder output
  std::vector<DecoderLayerCache> dec;
  NormCache dec_norm;
  Matrix final;   // normalized decoder output
};

Matrix embed(const ModelParams& p, const std::vector<int>& ids) {
  const int d = p.config.d_model;
  const double scale = std::sqrt(static_cast<double>(d));
  const auto emb = p.view(p.layout.embedding);
  Matrix x(static_cast<int>(ids.size()), d);
  for (int t = 0; t < x.rows; ++t) {
    for (int i = 0; i < d; i += 2) {
      const double angle = t / std::pow(10000.0, static_cast<double>(i) / d);
      x(t, i) = emb[static_cast<std::size_t>(ids[t]) * d + i] * scale + std::sin(angle);
      if (i + 1 < d) x(t, i + 1) = emb[static_cast<std::size_t>(ids[t]) * d + i + 1] * scale + std::cos(angle);
    }
  }
  return x;
}

void check_ids(const ModelParams& p, const std::vector<int>& ids, const char* what) {
  if (ids.empty()) throw ModelError(std::string(what) + " sequence is empty");
  if (static_cast<int>(ids.size()) > p.config.max_len) {
    throw ModelError(std::string(what) + " sequence longer than max_len");
  }
  for (int id : ids) {
    if (id < 0 || id >= p.vocab_size) throw ModelError(std::string(what) + " id out of vocabulary range");
  }
}

Matrix encode(const ModelParams& p, const std::vector<int>& source, ForwardCache& cache, const Dropout& drop) {
  Matrix x = embed(p, source);
  cache.enc.resize(p.layout.encoder.size());
  for (std::size_t l = 0; l < p.layout.encoder.size(); ++l) {
    const auto& s = p.layout.encoder[l];
    auto& c = cache.enc[l];
    const Matrix a = layer_norm(x, p.view(s.norm1.gain), p.view(s.norm1.bias), c.n1);
    Matrix attn = mha_forward(p, s.self_attn, a, a, false, c.attn);
    c.drop1 = drop.apply(attn);
    add_inplace(x, attn);
    const Matrix b = layer_norm(x, p.view(s.norm2.gain), p.view(s.norm2.bias), c.n2);
    Matrix f = ffn_forward(p, s.ffn, b, c.ffn);
    c.drop2 = drop.apply(f);
    add_inplace(x, f);
  }
  cache.memory = layer_norm(x, p.view(p.layout.encoder_norm.gain), p.view(p.layout.encoder_norm.bias), cache.enc_norm);
  return cache.memory;
}

Matrix decode(const ModelParams& p, const Matrix& memory, const std::vector<int>& target, ForwardCache& cache,
              const Dropout& drop) {
  Matrix y = embed(p, target);
  cache.dec.resize(p.layout.decoder.size());
  for (std::size_t l = 0; l < p.layout.decoder.size(); ++l) {
    const auto& s = p.layout.decoder[l];
    auto& c = cache.dec[l];
    const Matrix a = layer_norm(y, p.view(s.norm1.gain), p.view(s.norm1.bias), c.n1);
    Matrix self = mha_forward(p, s.self_attn, a, a, true, c.self_attn);
    c.drop1 = drop.apply(self);
    add_inplace(y, self);
    const Matrix b = layer_norm(y, p.view(s.norm2.gain), p.view(s.norm2.bias), c.n2);
    Matrix cross = mha_forward(p, s.cross_attn, b, memory, false, c.cross_attn);
    c.drop2 = drop.apply(cross);
    add_inplace(y, cross);
    const Matrix e = layer_norm(y, p.view(s.norm3.gain), p.view(s.norm3.bias), c.n3);
    Matrix f = ffn_forward(p, s.ffn, e, c.ffn);
    c.drop3 = drop.apply(f);
    add_inplace(y, f);
  }
  cache.final = layer_norm(y, p.view(p.layout.decoder_norm.gain), p.view(p.layout.decoder_norm.bias), cache.dec_norm);
  Matrix logits(cache.final.rows, p.vocab_size);
  kernels::matmul_bt(cache.final.data, p.view(p.layout.embedding), logits.data, cache.final.rows, p.config.d_model,
                     p.vocab_size);
  return logits;
}

void backward(const ModelParams& p, const ForwardCache& cache, const Matrix& dlogits, std::vector<double>& grads) {
  const int d = p.config.d_model;
  auto g = [&grads](const Slice& sl) { return GradSpan(grads.data() + sl.offset, sl.size()); };
  const double scale = std::sqrt(static_cast<double>(d));

  // logits = final · Eᵀ
  kernels::matmul_at_acc(dlogits.data, cache.final.data, g(p.layout.embedding), p.vocab_size, dlogits.rows, d);
  Matrix dfinal(dlogits.rows, d);
  kernels::matmul(dlogits.data, p.view(p.layout.embedding), dfinal.data, dlogits.rows, p.vocab_size, d);

  Matrix dy = layer_norm_backward(dfinal, p.view(p.layout.decoder_norm.gain), cache.dec_norm,
                                  g(p.layout.decoder_norm.gain), g(p.layout.decoder_norm.bias));
  Matrix dmemory(cache.memory.rows, d);
  for (std::size_t l = p.layout.decoder.size(); l-- > 0;) {
    const auto& s = p.layout.decoder[l];
    const auto& c = cache.dec[l];
    {
      const Matrix de = ffn_backward(p, s.ffn, c.ffn, masked(dy, c.drop3), grads);
      add_inplace(dy, layer_norm_backward(de, p.view(s.norm3.gain), c.n3, g(s.norm3.gain), g(s.norm3.bias)));
    }
    {
      auto [db, dmem] = mha_backward(p, s.cross_attn, c.cross_attn, masked(dy, c.drop2), grads);
      add_inplace(dmemory, dmem);
      add_inplace(dy, layer_norm_backward(db, p.view(s.norm2.gain), c.n2, g(s.norm2.gain), g(s.norm2.bias)));
    }
    {
      auto [dq, dkv] = mha_backward(p, s.self_attn, c.self_attn, masked(dy, c.drop1), grads);
      add_inplace(dq, dkv);
      add_inplace(dy, layer_norm_backward(dq, p.view(s.norm1.gain), c.n1, g(s.norm1.gain), g(s.norm1.bias)));
    }
  }
  auto demb = g(p.layout.embedding);
  for (int t = 0; t < dy.rows; ++t) {
    for (int i = 0; i < d; ++i) demb[static_cast<std::size_t>(cache.target[t]) * d + i] += dy(t, i) * scale;
  }

  Matrix dx = layer_norm_backward(dmemory, p.view(p.layout.encoder_norm.gain), cache.enc_norm,
                                  g(p.layout.encoder_norm.gain), g(p.layout.encoder_norm.bias));
  for (std::size_t l = p.layout.encoder.size(); l-- > 0;) {
    const auto& s = p.layout.encoder[l];
    const auto& c = cache.enc[l];
    {
      const Matrix db = ffn_backward(p, s.ffn, c.ffn, masked(dx, c.drop2), grads);
      add_inplace(dx, layer_norm_backward(db, p.view(s.norm2.gain), c.n2, g(s.norm2.gain), g(s.norm2.bias)));
    }
    {
      auto [dq, dkv] = mha_backward(p, s.self_attn, c.attn, masked(dx, c.drop1), grads);
      add_inplace(dq, dkv);
      add_inplace(dx, layer_norm_backward(dq, p.view(s.norm1.gain), c.n1, g(s.norm1.gain), g(s.norm1.bias)));
    }
  }
  for (int t = 0; t < dx.rows; ++t) {
    for (int i = 0; i < d; ++i) demb[static_cast<std::size_t>(cache.source[t]) * d + i] += dx(t, i) * scale;
  }
}

// Summed token cross-entropy; adds grad_scale * d(sum)/d(params) to grads.
double loss_sum(const ModelParams& p, const std::vector<int>& source, const std::vector<int>& target_in,
                const std::vector<int>& labels, double grad_scale, std::vector<double>* grads, const Dropout& drop,
                std::size_t* token_count) {
  check_ids(p, source, "source");
  check_ids(p, target_in, "target");
  if (labels.size() != target_in.size()) throw ModelError("labels and target lengths differ");
  ForwardCache cache;
  cache.source = source;
  cache.target = target_in;
  const Matrix memory = encode(p, source, cache, drop);
  const Matrix logits = decode(p, memory, target_in, cache, drop);

  double total = 0.0;
  std::size_t count = 0;
  Matrix dlogits(logits.rows, logits.cols);
  for (int t = 0; t < logits.rows; ++t) {
    if (labels[t] == Vocab::kPad) continue;
    ++count;
    double best = -INFINITY;
    for (int v = 0; v < logits.cols; ++v) best = std::max(best, logits(t, v));
    double sum = 0.0;
    for (int v = 0; v < logits.cols; ++v) sum += std::exp(logits(t, v) - best);
    const double log_z = best + std::log(sum);
    total += log_z - logits(t, labels[t]);
    for (int v = 0; v < logits.cols; ++v) {
      dlogits(t, v) = grad_scale * std::exp(logits(t, v) - log_z);
    }
    dlogits(t, labels[t]) -= grad_scale;
  }
  if (token_count) *token_count = count;
  if (grads && count > 0) backward(p, cache, dlogits, *grads);
  return total;
}

}  // namespace

Matrix forward(const ModelParams& params, const std::vector<int>& source_ids, const std::vector<int>& target_ids) {
  check_ids(params, source_ids, "source");
  check_ids(params, target_ids, "target");
  if (target_ids.front() != Vocab::kBos) throw ModelError("target must start with BOS");
  ForwardCache cache;
  const Dropout none;
  const Matrix memory = encode(params, source_ids, cache, none);
  return decode(params, memory, target_ids, cache, none);
}

double sequence_loss(const ModelParams& params, const std::vector<int>& source_ids, const std::vector<int>& target_in,
                     const std::vector<int>& labels, std::vector<double>* grads) {
  std::size_t count = 0;
  // Count first so that the gradient can be scaled to the mean in one pass.
  for (int l : labels) count += l != Vocab::kPad;
  if (grads) grads->resize(params.values.size(), 0.0);
  if (count == 0) {
    check_ids(params, source_ids, "source");
    check_ids(params, target_in, "target");
    return 0.0;
  }
  const double sum = loss_sum(params, source_ids, target_in, labels, 1.0 / static_cast<double>(count), grads,
                              Dropout{}, nullptr);
  return sum / static_cast<double>(count);
}

// ===================================================================== training

TrainingExample make_example(const Vocab& vocab, const ModelConfig& config, const ParallelPair& pair) {
  TrainingExample ex;
  ex.source = vocab.encode(pair.source);
  const std::vector<int> target = vocab.encode(pair.target);
  if (ex.source.empty()) throw ModelError("source has no tokens: `" + pair.source + "`");
  if (static_cast<int>(ex.source.size()) > config.max_len) {
    throw ModelError("source exceeds max_len (" + std::to_string(ex.source.size()) + " tokens): `" + pair.source + "`");
  }
  if (static_cast<int>(target.size()) + 1 > config.max_len) {
    throw ModelError("target exceeds max_len (" + std::to_string(target.size() + 1) + " tokens): `" + pair.target + "`");
  }
  ex.target_in.push_back(Vocab::kBos);
  ex.target_in.insert(ex.target_in.end(), target.begin(), target.end());
  ex.labels = target;
  ex.labels.push_back(Vocab::kEos);
  return ex;
}

namespace {

class Adam {
 public:
  Adam(std::size_t n, const TrainConfig& c) : config_(c), m_(n, 0.0), v_(n, 0.0) {}

  void step(std::vector<double>& params, const std::vector<double>& grads) {
    ++t_;
    const double c1 = 1.0 - std::pow(config_.beta1, t_);
    const double c2 = 1.0 - std::pow(config_.beta2, t_);
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_[i] = config_.beta1 * m_[i] + (1.0 - config_.beta1) * grads[i];
      v_[i] = config_.beta2 * v_[i] + (1.0 - config_.beta2) * grads[i] * grads[i];
      params[i] -= config_.learning_rate * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + config_.adam_eps);
    }
  }

 private:
  TrainConfig config_;
  std::vector<double> m_, v_;
  int t_ = 0;
};

std::vector<int> greedy_decode(const ModelParams& p, std::vector<int> source) {
  if (static_cast<int>(source.size()) > p.config.max_len) source.resize(static_cast<std::size_t>(p.config.max_len));
  ForwardCache cache;
  const Dropout none;
  const Matrix memory = encode(p, source, cache, none);
  std::vector<int> target{Vocab::kBos};
  while (static_cast<int>(target.size()) < p.config.max_len) {
    const Matrix logits = decode(p, memory, target, cache, none);
    const int last = logits.rows - 1;
    int best = Vocab::kUnk;
    for (int v = Vocab::kUnk; v < logits.cols; ++v) {
      if (v == Vocab::kBos) continue;
      if (logits(last, v) > logits(last, best)) best = v;
    }
    if (best == Vocab::kEos) break;
    target.push_back(best);
  }
  return {target.begin() + 1, target.end()};
}

}  // namespace

TrainedModel train(const std::vector<ParallelPair>& pairs, const Vocab& vocab, const ModelConfig& config,
                   const TrainConfig& train_config, TrainReport& report) {
  config.validate();
  train_config.validate();
  if (pairs.empty()) throw ModelError("empty training corpus");
  const auto started = std::chrono::steady_clock::now();

  std::vector<TrainingExample> examples;
  for (const auto& p : pairs) examples.push_back(make_example(vocab, config, p));

  TrainedModel model{vocab, init_params(config, vocab.size())};
  ModelParams& params = model.params;
  report = TrainReport{};
  report.seed = config.seed;
  report.epochs = train_config.epochs;

  {
    double total = 0.0;
    std::size_t tokens = 0;
    for (const auto& ex : examples) {
      std::size_t n = 0;
      total += loss_sum(params, ex.source, ex.target_in, ex.labels, 0.0, nullptr, Dropout{}, &n);
      tokens += n;
    }
    report.initial_loss = total / static_cast<double>(tokens);
  }

  // Separate streams for batch order and dropout, both derived from the seed.
  SeededRng order_rng(config.seed ^ 0x5eed0f0dd5ULL);
  SeededRng dropout_rng(config.seed ^ 0xd50ff1ceULL);
  const Dropout drop{config.dropout, &dropout_rng};
  Adam adam(params.values.size(), train_config);
  std::vector<double> grads(params.values.size());
  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < train_config.epochs; ++epoch) {
    order_rng.shuffle(order);
    double epoch_total = 0.0;
    std::size_t epoch_tokens = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(train_config.batch_size)) {
      const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(train_config.batch_size));
      std::size_t batch_tokens = 0;
      for (std::size_t i = start; i < stop; ++i) batch_tokens += examples[order[i]].labels.size();
      std::fill(grads.begin(), grads.end(), 0.0);
      for (std::size_t i = start; i < stop; ++i) {
        const auto& ex = examples[order[i]];
        epoch_total += loss_sum(params, ex.source, ex.target_in, ex.labels, 1.0 / static_cast<double>(batch_tokens),
                                &grads, drop, nullptr);
      }
      epoch_tokens += batch_tokens;
      adam.step(params.values, grads);
    }
    const double mean = epoch_total / static_cast<double>(epoch_tokens);
    if (!std::isfinite(mean) || !params.all_finite()) {
      throw ModelError("training diverged at epoch " + std::to_string(epoch + 1));
    }
    report.epoch_losses.push_back(mean);
  }

  std::vector<BleuPair> scored;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    TokenSeq hyp = tokenize_for_bleu(vocab.decode(greedy_decode(params, examples[i].source)));
    if (hyp.empty()) hyp.push_back("");  // an empty output still counts as a (wrong) candidate
    scored.push_back({std::move(hyp), {tokenize_code(pairs[i].target)}});
  }
  report.final_train_bleu = corpus_bleu(scored).score;
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return model;
}

std::string translate(const TrainedModel& model, std::string_view source) {
  const std::vector<int> ids = model.vocab.encode(source);
  if (ids.empty()) throw ModelError("source has no tokens after preprocessing");
  return model.vocab.decode(greedy_decode(model.params, ids));
}

std::string format_train_report(const TrainReport& r) {
  std::string out;
  char buf[128];
  std::snprintf(buf, sizeof buf, "seed           %llu\nepochs         %d\ninitial_loss   %.17g\n",
                static_cast<unsigned long long>(r.seed), r.epochs, r.initial_loss);
  out += buf;
  for (std::size_t e = 0; e < r.epoch_losses.size(); ++e) {
    std::snprintf(buf, sizeof buf, "epoch %-8zu %.17g\n", e + 1, r.epoch_losses[e]);
    out += buf;
  }
  std::snprintf(buf, sizeof buf, "train_bleu     %.17g\n", r.final_train_bleu);
  out += buf;
  return out;
}

// ===================================================================== gradient check

GradCheckResult grad_check(const ModelParams& params, const TrainingExample& sample, double epsilon,
                           std::size_t count, std::uint64_t seed) {
  GradCheckResult result;
  std::vector<double> grads(params.values.size(), 0.0);
  sequence_loss(params, sample.source, sample.target_in, sample.labels, &grads);

  count = std::min(count, params.values.size());
  std::vector<std::size_t> all(params.values.size());
  std::iota(all.begin(), all.end(), 0);
  SeededRng rng(seed);
  rng.shuffle(all);
  result.indices.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(count));
  std::sort(result.indices.begin(), result.indices.end());

  ModelParams probe = params;
  for (std::size_t idx : result.indices) {
    const double saved = probe.values[idx];
    probe.values[idx] = saved + epsilon;
    const double up = sequence_loss(probe, sample.source, sample.target_in, sample.labels);
    probe.values[idx] = saved - epsilon;
    const double down = sequence_loss(probe, sample.source, sample.target_in, sample.labels);
    probe.values[idx] = saved;
    const double numeric = (up - down) / (2.0 * epsilon);
    const double analytic = grads[idx];
    const double rel = std::fabs(analytic - numeric) / std::max({std::fabs(analytic), std::fabs(numeric), 1e-8});
    result.max_relative_error = std::max(result.max_relative_error, rel);
    result.analytic.push_back(analytic);
    result.numeric.push_back(numeric);
  }
  result.checked = count;
  return result;
}

}  // namespace s2p
