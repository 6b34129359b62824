#pragma once

// Encoder-decoder assembly: a single-layer LSTM encoder whose final (h, c)
// initializes a single-layer LSTM decoder, followed by a dense softmax
// layer over target characters. Inputs to both LSTMs are one-hot rows.

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "c2c/error.hpp"
#include "c2c/layers.hpp"
#include "c2c/numerics.hpp"
#include "c2c/vocab.hpp"

namespace c2c {

inline constexpr std::size_t kDefaultHidden = 256;

struct Seq2SeqModel {
  CharVocab src_vocab;
  CharVocab tgt_vocab;
  LstmParams encoder;
  LstmParams decoder;
  DenseParams output;
  // Bumped on every optimizer update; ties forward caches to a parameter version.
  std::uint64_t revision = 0;

  std::size_t hidden() const noexcept { return encoder.hidden(); }

  void validate() const {
    encoder.validate();
    decoder.validate();
    output.validate();
    const std::size_t H = hidden();
    if (encoder.input_dim() != src_vocab.size())
      throw ShapeError("encoder input dim " + std::to_string(encoder.input_dim()) +
                       " != source vocab size " + std::to_string(src_vocab.size()));
    if (decoder.input_dim() != tgt_vocab.size())
      throw ShapeError("decoder input dim " + std::to_string(decoder.input_dim()) +
                       " != target vocab size " + std::to_string(tgt_vocab.size()));
    if (decoder.hidden() != H || output.hidden() != H)
      throw ShapeError("encoder, decoder and output layer disagree on hidden size");
    if (output.outputs() != tgt_vocab.size())
      throw ShapeError("output layer has " + std::to_string(output.outputs()) +
                       " rows, target vocab has " + std::to_string(tgt_vocab.size()));
  }
};

/// Parameter-shaped gradient buffers.
struct ModelGrads {
  LstmParams encoder;
  LstmParams decoder;
  DenseParams output;

  static ModelGrads zeros_like(const Seq2SeqModel& m) {
    return {LstmParams(m.encoder.input_dim(), m.hidden()),
            LstmParams(m.decoder.input_dim(), m.hidden()),
            DenseParams(m.hidden(), m.output.outputs())};
  }

  void set_zero() {
    encoder.set_zero();
    decoder.set_zero();
    output.set_zero();
  }
};

/// Visits every parameter array of a model or gradient set in checkpoint
/// order: encoder W, U, b; decoder W, U, b; output W, b.
template <class Params, class F>
void for_each_array(Params& p, F&& f) {
  f(std::span(p.encoder.W.data()));
  f(std::span(p.encoder.U.data()));
  f(std::span(p.encoder.b));
  f(std::span(p.decoder.W.data()));
  f(std::span(p.decoder.U.data()));
  f(std::span(p.decoder.b));
  f(std::span(p.output.W.data()));
  f(std::span(p.output.b));
}

/// Seeded Glorot initialization of all three layers.
inline Seq2SeqModel make_model(CharVocab src_vocab, CharVocab tgt_vocab, std::size_t hidden,
                               std::uint64_t seed) {
  if (hidden == 0) throw ConfigError("hidden size must be positive");
  std::mt19937_64 rng(seed);
  Seq2SeqModel m;
  m.encoder = init_lstm(rng, src_vocab.size(), hidden);
  m.decoder = init_lstm(rng, tgt_vocab.size(), hidden);
  m.output = init_dense(rng, hidden, tgt_vocab.size());
  m.src_vocab = std::move(src_vocab);
  m.tgt_vocab = std::move(tgt_vocab);
  return m;
}

struct EncoderSummary {
  LstmState final;
};

struct ForwardCache {
  std::vector<LstmStepCache> encoder_steps;
  std::vector<LstmStepCache> decoder_steps;
  std::vector<Vector> probs;  // softmax output per decoder step
  Ids targets;                // tgt + [EOS]
  std::uint64_t revision = 0;
  std::size_t hidden = 0;
};

namespace detail {

inline void check_ids(const Ids& ids, std::size_t vocab_size, const char* what) {
  for (TokenId id : ids)
    if (id >= vocab_size)
      throw ContractViolation(std::string(what) + ": id " + std::to_string(id) +
                              " out of range for vocab size " + std::to_string(vocab_size));
}

}  // namespace detail

/// Runs the encoder left to right from the zero state; keeps only the final state.
inline EncoderSummary encode_source(const Seq2SeqModel& m, const Ids& src,
                                    std::vector<LstmStepCache>* steps = nullptr) {
  if (src.empty()) throw ContractViolation("encode_source: empty source sequence");
  detail::check_ids(src, m.src_vocab.size(), "encode_source");
  LstmState state = LstmState::zeros(m.hidden());
  for (TokenId id : src) {
    if (steps) {
      steps->push_back(lstm_step_cached(m.encoder, std::size_t{id}, state));
      state = steps->back().next;
    } else {
      state = lstm_step(m.encoder, std::size_t{id}, state);
    }
  }
  return {std::move(state)};
}

struct LossResult {
  double loss = 0.0;
  ForwardCache cache;
};

/// Summed cross-entropy of one pair under teacher forcing. The decoder
/// reads [SOS] + tgt and predicts tgt + [EOS].
inline LossResult teacher_forced_loss(const Seq2SeqModel& m, const Ids& src, const Ids& tgt) {
  if (tgt.empty()) throw ContractViolation("teacher_forced_loss: empty target sequence");
  detail::check_ids(tgt, m.tgt_vocab.size(), "teacher_forced_loss");
  LossResult r;
  ForwardCache& cache = r.cache;
  cache.revision = m.revision;
  cache.hidden = m.hidden();
  cache.encoder_steps.reserve(src.size());
  LstmState state = encode_source(m, src, &cache.encoder_steps).final;

  cache.targets = tgt;
  cache.targets.push_back(kEos);
  cache.decoder_steps.reserve(cache.targets.size());
  cache.probs.reserve(cache.targets.size());
  TokenId input = kSos;
  for (TokenId target : cache.targets) {
    cache.decoder_steps.push_back(lstm_step_cached(m.decoder, std::size_t{input}, state));
    state = cache.decoder_steps.back().next;
    const Vector logits = dense_forward(m.output, state.h);
    r.loss += cross_entropy_logits(logits, target);
    cache.probs.push_back(softmax(logits));
    input = target;
  }
  return r;
}

/// Exact BPTT of `scale * loss` for the pair that produced `cache`.
/// Gradients are accumulated into `grads`.
inline void backward(const Seq2SeqModel& m, const ForwardCache& cache, ModelGrads& grads,
                     double scale = 1.0) {
  const std::size_t H = m.hidden();
  if (cache.revision != m.revision || cache.hidden != H)
    throw ContractViolation("backward: forward cache is stale for this model");
  if (cache.decoder_steps.size() != cache.targets.size() ||
      cache.probs.size() != cache.targets.size() || cache.encoder_steps.empty())
    throw ContractViolation("backward: forward cache is incomplete");

  Vector dh(H, 0.0), dc(H, 0.0);
  Vector dlogits;
  for (std::size_t t = cache.targets.size(); t-- > 0;) {
    const auto& step = cache.decoder_steps[t];
    dlogits = cache.probs[t];
    dlogits[cache.targets[t]] -= 1.0;
    for (double& g : dlogits) g *= scale;
    const Vector dh_out = dense_backward(m.output, step.next.h, dlogits, grads.output);
    for (std::size_t k = 0; k < H; ++k) dh[k] += dh_out[k];
    auto g = lstm_step_backward(m.decoder, step, dh, dc, grads.decoder);
    dh = std::move(g.dprev.h);
    dc = std::move(g.dprev.c);
  }
  for (std::size_t t = cache.encoder_steps.size(); t-- > 0;) {
    auto g = lstm_step_backward(m.encoder, cache.encoder_steps[t], dh, dc, grads.encoder);
    dh = std::move(g.dprev.h);
    dc = std::move(g.dprev.c);
  }
}

inline ModelGrads backward(const Seq2SeqModel& m, const ForwardCache& cache, double scale = 1.0) {
  ModelGrads g = ModelGrads::zeros_like(m);
  backward(m, cache, g, scale);
  return g;
}

/// Feeds back the argmax symbol until EOS or max_len outputs.
inline Ids greedy_decode(const Seq2SeqModel& m, const Ids& src, std::size_t max_len) {
  if (max_len < 1) throw ContractViolation("greedy_decode: max_len must be at least 1");
  LstmState state = encode_source(m, src).final;
  Ids out;
  TokenId input = kSos;
  for (std::size_t step = 0; step < max_len; ++step) {
    state = lstm_step(m.decoder, std::size_t{input}, state);
    const auto next = static_cast<TokenId>(argmax(dense_forward(m.output, state.h)));
    if (next == kEos) break;
    if (next != kSos) out.push_back(next);
    input = next;
  }
  return out;
}

struct EncodedPair {
  Ids src;
  Ids tgt;
};

struct TeacherForcedScore {
  std::size_t correct = 0;
  std::size_t total = 0;
  double loss = 0.0;

  double accuracy() const noexcept { return total ? double(correct) / double(total) : 0.0; }
  double loss_per_symbol() const noexcept { return total ? loss / double(total) : 0.0; }
};

/// Next-symbol accuracy and loss under teacher forcing, without updates.
inline TeacherForcedScore teacher_forced_score(const Seq2SeqModel& m,
                                               std::span<const EncodedPair> pairs) {
  TeacherForcedScore s;
  for (const auto& p : pairs) {
    const auto r = teacher_forced_loss(m, p.src, p.tgt);
    s.loss += r.loss;
    for (std::size_t t = 0; t < r.cache.targets.size(); ++t) {
      ++s.total;
      if (argmax(r.cache.probs[t]) == r.cache.targets[t]) ++s.correct;
    }
  }
  return s;
}

}  // namespace c2c
