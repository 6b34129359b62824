#pragma once

// Mini-batch RMSprop training, batching with PAD masking, training logs and
// the binary checkpoint format.

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <istream>
#include <limits>
#include <ostream>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "c2c/error.hpp"
#include "c2c/model.hpp"
#include "c2c/textprep.hpp"
#include "c2c/vocab.hpp"

namespace c2c {

struct TrainingConfig {
  std::size_t batch_size = 128;
  std::size_t epochs = 100;
  double learning_rate = 0.001;
  double rho = 0.9;
  double epsilon = 1e-8;
  double clip_norm = 5.0;
  bool clip_gradients = true;
  std::uint64_t seed = 1;
  std::size_t max_char_len = 400;
  std::size_t hidden = kDefaultHidden;

  void validate() const {
    if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
    if (epochs < 1) throw ConfigError("epochs must be at least 1");
    if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
    if (!(rho > 0.0 && rho < 1.0)) throw ConfigError("rho must lie in (0, 1)");
    if (!(epsilon > 0.0)) throw ConfigError("epsilon must be positive");
    if (!(clip_norm > 0.0)) throw ConfigError("clip_norm must be positive");
    if (max_char_len < 1) throw ConfigError("max_char_len must be at least 1");
    if (hidden < 1) throw ConfigError("hidden must be at least 1");
  }
};

// ---------------------------------------------------------------------------
// RMSprop

struct RmspropState {
  std::vector<Vector> acc;  // one per parameter array, checkpoint order

  static RmspropState for_model(const Seq2SeqModel& m) {
    RmspropState s;
    for_each_array(m, [&](auto span) { s.acc.emplace_back(span.size(), 0.0); });
    return s;
  }
};

/// Global L2 norm over all gradient arrays.
inline double global_norm(const ModelGrads& g) {
  double sq = 0.0;
  for_each_array(g, [&](auto span) {
    for (double x : span) sq += x * x;
  });
  return std::sqrt(sq);
}

/// Rescales every gradient by clip_norm / norm when norm exceeds clip_norm.
/// Returns the pre-clipping norm.
inline double clip_global_norm(ModelGrads& g, double clip_norm) {
  const double norm = global_norm(g);
  if (norm > clip_norm) {
    const double scale = clip_norm / norm;
    for_each_array(g, [&](auto span) {
      for (double& x : span) x *= scale;
    });
  }
  return norm;
}

/// Elementwise update of one array:
///   acc = rho*acc + (1-rho)*g^2;  theta -= lr * g / (sqrt(acc) + eps)
inline void rmsprop_update(std::span<double> params, std::span<const double> grads,
                           std::span<double> acc, const TrainingConfig& cfg) {
  if (params.size() != grads.size() || params.size() != acc.size())
    throw ContractViolation("rmsprop_update: parameter, gradient and accumulator sizes differ");
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    acc[i] = cfg.rho * acc[i] + (1.0 - cfg.rho) * g * g;
    params[i] -= cfg.learning_rate * g / (std::sqrt(acc[i]) + cfg.epsilon);
  }
}

/// Clips (when enabled) and applies one RMSprop update to every parameter.
inline void rmsprop_step(RmspropState& state, Seq2SeqModel& model, ModelGrads& grads,
                         const TrainingConfig& cfg) {
  if (cfg.clip_gradients) clip_global_norm(grads, cfg.clip_norm);
  std::vector<std::span<double>> params;
  std::vector<std::span<double>> gs;
  for_each_array(model, [&](auto s) { params.push_back(s); });
  for_each_array(grads, [&](auto s) { gs.push_back(s); });
  if (state.acc.size() != params.size())
    throw ContractViolation("rmsprop_step: optimizer state does not match the model");
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (state.acc[k].size() != params[k].size() || gs[k].size() != params[k].size())
      throw ContractViolation("rmsprop_step: array " + std::to_string(k) + " shape mismatch");
    rmsprop_update(params[k], gs[k], state.acc[k], cfg);
  }
  ++model.revision;
}

// ---------------------------------------------------------------------------
// Batching

/// Sequences padded with PAD to the longest member on each side.
struct Batch {
  std::vector<Ids> src;
  std::vector<Ids> tgt;

  std::size_t size() const noexcept { return src.size(); }
};

struct BatchPlan {
  std::vector<Batch> batches;
  std::size_t dropped = 0;  // pairs over max_char_len on either side
};

/// Strips trailing PAD. Encoded text never contains PAD itself.
inline Ids unpad(const Ids& ids) {
  auto end = ids.end();
  while (end != ids.begin() && *(end - 1) == kPad) --end;
  return Ids(ids.begin(), end);
}

inline std::mt19937_64 epoch_rng(std::uint64_t seed, std::size_t epoch) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(epoch), static_cast<std::uint32_t>(epoch >> 32)};
  return std::mt19937_64(seq);
}

/// Deterministic shuffle by (seed, epoch), then consecutive batches of
/// cfg.batch_size; the last one may be smaller.
inline BatchPlan make_batches(std::span<const EncodedPair> pairs, const TrainingConfig& cfg,
                              std::size_t epoch) {
  if (cfg.batch_size < 1) throw ConfigError("batch_size must be at least 1");
  BatchPlan plan;
  std::vector<std::size_t> order;
  order.reserve(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (pairs[i].src.size() > cfg.max_char_len || pairs[i].tgt.size() > cfg.max_char_len)
      ++plan.dropped;
    else if (pairs[i].src.empty() || pairs[i].tgt.empty())
      throw DataError("make_batches: pair " + std::to_string(i) + " has an empty side");
    else
      order.push_back(i);
  }
  if (order.empty()) throw ConfigError("make_batches: no trainable pairs in corpus");
  auto rng = epoch_rng(cfg.seed, epoch);
  std::shuffle(order.begin(), order.end(), rng);

  for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
    const std::size_t end = std::min(order.size(), start + cfg.batch_size);
    Batch b;
    std::size_t src_max = 0, tgt_max = 0;
    for (std::size_t k = start; k < end; ++k) {
      src_max = std::max(src_max, pairs[order[k]].src.size());
      tgt_max = std::max(tgt_max, pairs[order[k]].tgt.size());
    }
    for (std::size_t k = start; k < end; ++k) {
      Ids s = pairs[order[k]].src, t = pairs[order[k]].tgt;
      s.resize(src_max, kPad);
      t.resize(tgt_max, kPad);
      b.src.push_back(std::move(s));
      b.tgt.push_back(std::move(t));
    }
    plan.batches.push_back(std::move(b));
  }
  return plan;
}

struct BatchResult {
  double loss = 0.0;          // summed over sentences and time
  std::size_t symbols = 0;    // supervised prediction steps
  std::size_t src_chars = 0;
};

/// Loss of a batch and its gradient scaled by 1/N (mean over sentences,
/// sum over time). PAD positions are masked out entirely.
inline BatchResult batch_loss_and_grads(const Seq2SeqModel& m, const Batch& batch, ModelGrads& grads) {
  BatchResult r;
  if (batch.size() == 0) return r;
  const double scale = 1.0 / static_cast<double>(batch.size());
  for (std::size_t k = 0; k < batch.size(); ++k) {
    const Ids src = unpad(batch.src[k]);
    const Ids tgt = unpad(batch.tgt[k]);
    const auto fwd = teacher_forced_loss(m, src, tgt);
    r.loss += fwd.loss;
    r.symbols += fwd.cache.targets.size();
    r.src_chars += src.size();
    backward(m, fwd.cache, grads, scale);
  }
  return r;
}

// ---------------------------------------------------------------------------
// Training log

struct EpochRecord {
  std::size_t epoch = 0;
  double loss = 0.0;  // mean per target symbol
  double seconds = 0.0;
  double chars_per_sec = 0.0;
};

struct TrainLog {
  std::vector<EpochRecord> epochs;

  void append(const EpochRecord& r) {
    if (!epochs.empty() && r.epoch <= epochs.back().epoch)
      throw ContractViolation("TrainLog: epochs must be appended in increasing order");
    epochs.push_back(r);
  }

  std::vector<double> losses() const {
    std::vector<double> out;
    for (const auto& e : epochs) out.push_back(e.loss);
    return out;
  }
};

inline std::string format_log_line(const EpochRecord& r) {
  char buf[128];
  std::snprintf(buf, sizeof buf, "%zu\t%.17g\t%.3f\t%.1f\n", r.epoch, r.loss, r.seconds,
                r.chars_per_sec);
  return buf;
}

// ---------------------------------------------------------------------------
// Checkpoints

class CheckpointError : public DataError {
 public:
  enum class Kind { bad_magic, version_mismatch, truncated, dimension_mismatch, io };

  CheckpointError(Kind kind, const std::string& what) : DataError(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

inline constexpr char kCheckpointMagic[6] = {'C', '2', 'C', 'N', 'M', 'T'};
inline constexpr std::uint8_t kCheckpointVersion = 1;

namespace detail {

inline void put_u32(std::ostream& os, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  os.write(b, 4);
}

inline void put_f64(std::ostream& os, double d) {
  const auto v = std::bit_cast<std::uint64_t>(d);
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  os.write(b, 8);
}

inline void read_exact(std::istream& is, char* dst, std::size_t n, const char* what) {
  is.read(dst, static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(is.gcount()) != n)
    throw CheckpointError(CheckpointError::Kind::truncated,
                          std::string("checkpoint truncated while reading ") + what);
}

inline std::uint32_t get_u32(std::istream& is, const char* what) {
  unsigned char b[4];
  read_exact(is, reinterpret_cast<char*>(b), 4, what);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

inline double get_f64(std::istream& is, const char* what) {
  unsigned char b[8];
  read_exact(is, reinterpret_cast<char*>(b), 8, what);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return std::bit_cast<double>(v);
}

inline void put_vocab(std::ostream& os, const CharVocab& v) {
  std::ostringstream text;
  v.save(text);
  const std::string s = text.str();
  put_u32(os, static_cast<std::uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline CharVocab get_vocab(std::istream& is, std::size_t expected_size, const char* side) {
  const std::uint32_t n = get_u32(is, "vocab block length");
  std::string s(n, '\0');
  read_exact(is, s.data(), n, "vocab block");
  std::istringstream text(s);
  CharVocab v = CharVocab::load(text);
  if (v.size() != expected_size)
    throw CheckpointError(CheckpointError::Kind::dimension_mismatch,
                          std::string(side) + " vocab has " + std::to_string(v.size()) +
                              " symbols, header says " + std::to_string(expected_size));
  return v;
}

inline void put_array(std::ostream& os, std::size_t rows, std::size_t cols,
                      std::span<const double> data) {
  put_u32(os, static_cast<std::uint32_t>(rows));
  put_u32(os, static_cast<std::uint32_t>(cols));
  for (double d : data) put_f64(os, d);
}

inline void get_array(std::istream& is, std::size_t rows, std::size_t cols, std::span<double> out,
                      const char* name) {
  const std::uint32_t r = get_u32(is, name);
  const std::uint32_t c = get_u32(is, name);
  if (r != rows || c != cols)
    throw CheckpointError(CheckpointError::Kind::dimension_mismatch,
                          std::string("checkpoint array ") + name + " is " + std::to_string(r) + "x" +
                              std::to_string(c) + ", expected " + std::to_string(rows) + "x" +
                              std::to_string(cols));
  for (double& d : out) d = get_f64(is, name);
}

}  // namespace detail

inline void save_checkpoint(const Seq2SeqModel& m, std::ostream& os) {
  m.validate();
  os.write(kCheckpointMagic, sizeof kCheckpointMagic);
  os.put(static_cast<char>(kCheckpointVersion));
  detail::put_u32(os, static_cast<std::uint32_t>(m.hidden()));
  detail::put_u32(os, static_cast<std::uint32_t>(m.src_vocab.size()));
  detail::put_u32(os, static_cast<std::uint32_t>(m.tgt_vocab.size()));
  detail::put_vocab(os, m.src_vocab);
  detail::put_vocab(os, m.tgt_vocab);
  for (const LstmParams* p : {&m.encoder, &m.decoder}) {
    detail::put_array(os, p->W.rows(), p->W.cols(), p->W.data());
    detail::put_array(os, p->U.rows(), p->U.cols(), p->U.data());
    detail::put_array(os, p->b.size(), 1, p->b);
  }
  detail::put_array(os, m.output.W.rows(), m.output.W.cols(), m.output.W.data());
  detail::put_array(os, m.output.b.size(), 1, m.output.b);
}

inline Seq2SeqModel load_checkpoint(std::istream& is) {
  using Kind = CheckpointError::Kind;
  char magic[sizeof kCheckpointMagic];
  is.read(magic, sizeof magic);
  if (static_cast<std::size_t>(is.gcount()) != sizeof magic ||
      !std::equal(magic, magic + sizeof magic, kCheckpointMagic))
    throw CheckpointError(Kind::bad_magic, "bad magic: not a checkpoint file");
  char version = 0;
  detail::read_exact(is, &version, 1, "version");
  if (static_cast<std::uint8_t>(version) != kCheckpointVersion)
    throw CheckpointError(Kind::version_mismatch,
                          "checkpoint version " + std::to_string(static_cast<unsigned>(
                                                      static_cast<std::uint8_t>(version))) +
                              " is not supported (expected " +
                              std::to_string(kCheckpointVersion) + ")");
  const std::size_t H = detail::get_u32(is, "hidden size");
  const std::size_t sv = detail::get_u32(is, "source vocab size");
  const std::size_t tv = detail::get_u32(is, "target vocab size");
  if (H == 0 || sv < kNumControls || tv < kNumControls)
    throw CheckpointError(Kind::dimension_mismatch, "checkpoint header has invalid dimensions");

  Seq2SeqModel m;
  m.src_vocab = detail::get_vocab(is, sv, "source");
  m.tgt_vocab = detail::get_vocab(is, tv, "target");
  m.encoder = LstmParams(sv, H);
  m.decoder = LstmParams(tv, H);
  m.output = DenseParams(H, tv);
  for (LstmParams* p : {&m.encoder, &m.decoder}) {
    detail::get_array(is, 4 * H, p->W.cols(), p->W.data(), "lstm W");
    detail::get_array(is, 4 * H, H, p->U.data(), "lstm U");
    detail::get_array(is, 4 * H, 1, p->b, "lstm b");
  }
  detail::get_array(is, tv, H, m.output.W.data(), "output W");
  detail::get_array(is, tv, 1, m.output.b, "output b");
  return m;
}

inline void save_checkpoint(const Seq2SeqModel& m, const std::string& path) {
  // Write to a sibling file first so a crash never leaves a torn checkpoint.
  const std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw CheckpointError(CheckpointError::Kind::io, "cannot write " + tmp);
    save_checkpoint(m, os);
    if (!os) throw CheckpointError(CheckpointError::Kind::io, "write failed for " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw CheckpointError(CheckpointError::Kind::io, "cannot move checkpoint into " + path);
}

inline Seq2SeqModel load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw CheckpointError(CheckpointError::Kind::io, "cannot open checkpoint " + path);
  return load_checkpoint(is);
}

// ---------------------------------------------------------------------------
// Training loop

struct TrainOptions {
  std::string checkpoint_path;  // empty: no checkpoints
  std::string log_path;         // empty: no log file
  std::function<void(const EpochRecord&, const Seq2SeqModel&)> on_epoch;
  std::function<void(std::size_t dropped)> on_dropped;
};

struct TrainResult {
  Seq2SeqModel model;
  TrainLog log;
};

/// Encodes a parallel corpus with the given vocabularies (no SOS/EOS).
inline std::vector<EncodedPair> encode_corpus(const CharVocab& src_vocab, const CharVocab& tgt_vocab,
                                              std::span<const SentencePair> corpus) {
  std::vector<EncodedPair> out;
  out.reserve(corpus.size());
  for (const auto& p : corpus) out.push_back({encode(src_vocab, p.source), encode(tgt_vocab, p.target)});
  return out;
}

/// Continues training an existing model on pre-encoded pairs.
inline TrainLog train_model(Seq2SeqModel& model, std::span<const EncodedPair> pairs,
                            const TrainingConfig& cfg, const TrainOptions& opts = {}) {
  cfg.validate();
  model.validate();
  RmspropState opt = RmspropState::for_model(model);
  ModelGrads grads = ModelGrads::zeros_like(model);
  TrainLog log;
  std::ofstream log_file;
  if (!opts.log_path.empty()) {
    log_file.open(opts.log_path, std::ios::app);
    if (!log_file) throw ConfigError("cannot open training log " + opts.log_path);
  }

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    const BatchPlan plan = make_batches(pairs, cfg, epoch);
    if (epoch == 1 && plan.dropped && opts.on_dropped) opts.on_dropped(plan.dropped);
    double loss = 0.0;
    std::size_t symbols = 0, chars = 0;
    for (std::size_t b = 0; b < plan.batches.size(); ++b) {
      grads.set_zero();
      const BatchResult r = batch_loss_and_grads(model, plan.batches[b], grads);
      if (!std::isfinite(r.loss) || !std::isfinite(global_norm(grads)))
        throw NumericError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(b + 1));
      rmsprop_step(opt, model, grads, cfg);
      loss += r.loss;
      symbols += r.symbols;
      chars += r.src_chars + r.symbols;
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    EpochRecord rec{epoch, loss / static_cast<double>(symbols), secs,
                    secs > 0 ? static_cast<double>(chars) / secs : 0.0};
    log.append(rec);
    if (log_file) {
      log_file << format_log_line(rec);
      log_file.flush();
    }
    if (!opts.checkpoint_path.empty()) save_checkpoint(model, opts.checkpoint_path);
    if (opts.on_epoch) opts.on_epoch(rec, model);
  }
  return log;
}

/// Builds per-side vocabularies, initializes a model from cfg.seed and trains it.
inline TrainResult train(std::span<const SentencePair> corpus, const TrainingConfig& cfg,
                         const TrainOptions& opts = {}) {
  cfg.validate();
  if (corpus.empty()) throw ConfigError("train: empty corpus");
  std::vector<std::string> src_lines, tgt_lines;
  for (const auto& p : corpus) {
    src_lines.push_back(p.source);
    tgt_lines.push_back(p.target);
  }
  TrainResult out;
  out.model = make_model(build_vocab(src_lines), build_vocab(tgt_lines), cfg.hidden, cfg.seed);
  const auto pairs = encode_corpus(out.model.src_vocab, out.model.tgt_vocab, corpus);
  out.log = train_model(out.model, pairs, cfg, opts);
  return out;
}

}  // namespace c2c
