// Runs every acceptance criterion and prints one PASS/FAIL line each.
// Exit status is nonzero when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "c2c/metrics.hpp"
#include "c2c/model.hpp"
#include "c2c/sgml.hpp"
#include "c2c/textprep.hpp"
#include "c2c/trainer.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

namespace {

using namespace c2c;
using testing::uniform_index;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!detail.empty()) detail += "; ";
    detail += what + (ok ? "" : " [failed]");
    pass = pass && ok;
  }
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// ---------------------------------------------------------------------------

Outcome gradient_correctness() {
  Outcome out;
  const auto t0 = Clock::now();
  std::mt19937_64 rng(1001);
  const std::size_t hs[] = {1, 4, 8}, chars[] = {1, 8};  // vocab sizes 5 and 12
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const Seq2SeqModel m = testing::random_model(rng, chars[trial % 2], chars[(trial / 2) % 2], hs[trial % 3]);
    const Ids src = testing::random_ids(rng, m.src_vocab, 1 + uniform_index(rng, 5));
    const Ids tgt = testing::random_ids(rng, m.tgt_vocab, 1 + uniform_index(rng, 5));
    const Vector analytic = testing::flatten(backward(m, teacher_forced_loss(m, src, tgt).cache));
    auto f = [&](std::span<const double> theta) {
      Seq2SeqModel q = m;
      testing::unflatten(q, theta);
      return teacher_forced_loss(q, src, tgt).loss;
    };
    worst = std::max(worst, grad_check(f, testing::flatten(m), analytic, 1e-5));
  }
  const double secs = seconds_since(t0);
  out.require(worst < 1e-4, "max relative error " + fmt("%.3g", worst) + " < 1e-4 over 100 models");
  out.require(secs < 120.0, "runtime " + fmt("%.1f", secs) + "s < 120s");
  return out;
}

// ---------------------------------------------------------------------------

const std::string kAlphabet20 = "abcdefghijklmnopqrst";

std::vector<SentencePair> synthetic_corpus(std::uint64_t seed, std::size_t lo, std::size_t hi, bool reverse) {
  std::mt19937_64 rng(seed);
  std::vector<SentencePair> corpus;
  for (std::size_t i = 0; i < 2000; ++i) {
    std::string s = testing::random_string(rng, kAlphabet20, lo, hi);
    std::string t = s;
    if (reverse) std::reverse(t.begin(), t.end());
    corpus.push_back({s, t, i + 1});
  }
  return corpus;
}

TrainingConfig task_config(std::size_t epochs) {
  TrainingConfig cfg;  // batch 128, lr 0.001, rmsprop defaults
  cfg.hidden = 128;
  cfg.epochs = epochs;
  cfg.seed = 2024;
  return cfg;
}

struct TaskRun {
  Seq2SeqModel model;
  TrainLog log;
  double untrained_loss = 0.0;
  double accuracy = 0.0;
  double exact = 0.0;
  double seconds = 0.0;
};

TaskRun run_task(const std::vector<SentencePair>& corpus, std::size_t epochs) {
  const auto t0 = Clock::now();
  TaskRun r;
  std::vector<std::string> src, tgt;
  for (const auto& p : corpus) {
    src.push_back(p.source);
    tgt.push_back(p.target);
  }
  const TrainingConfig cfg = task_config(epochs);
  r.model = make_model(build_vocab(src), build_vocab(tgt), cfg.hidden, cfg.seed);
  const auto pairs = encode_corpus(r.model.src_vocab, r.model.tgt_vocab, corpus);
  r.untrained_loss = teacher_forced_score(r.model, pairs).loss_per_symbol();
  TrainOptions opts;
  opts.on_epoch = [](const EpochRecord& e, const Seq2SeqModel&) {
    std::fprintf(stderr, "  epoch %zu loss %.4f (%.1fs)\n", e.epoch, e.loss, e.seconds);
  };
  r.log = train_model(r.model, pairs, cfg, opts);
  r.accuracy = teacher_forced_score(r.model, pairs).accuracy();
  std::size_t hits = 0;
  for (const auto& p : pairs) hits += greedy_decode(r.model, p.src, 2 * p.src.size() + 10) == p.tgt;
  r.exact = static_cast<double>(hits) / static_cast<double>(pairs.size());
  r.seconds = seconds_since(t0);
  return r;
}

Outcome copy_task(const TaskRun& run) {
  Outcome out;
  out.require(run.accuracy >= 0.99, "teacher-forced accuracy " + fmt("%.4f", run.accuracy) + " >= 0.99");
  out.require(run.exact >= 0.90, "greedy exact match " + fmt("%.4f", run.exact) + " >= 0.90");
  out.require(run.seconds < 600.0, "runtime " + fmt("%.1f", run.seconds) + "s < 600s");
  const std::string abc = decode(run.model.tgt_vocab, greedy_decode(run.model, encode(run.model.src_vocab, "abc"), 16));
  out.detail += "; decode(\"abc\") = \"" + abc + "\"";
  return out;
}

Outcome reversal_task(const TaskRun& run) {
  Outcome out;
  out.require(run.exact >= 0.80, "greedy exact match " + fmt("%.4f", run.exact) + " >= 0.80 after 40 epochs");
  out.detail += "; teacher-forced accuracy " + fmt("%.4f", run.accuracy);
  return out;
}

// ---------------------------------------------------------------------------

std::vector<Tokens> random_corpus(std::mt19937_64& rng, std::size_t n, const Tokens& vocab) {
  std::vector<Tokens> out(n);
  for (auto& s : out) {
    s.resize(4 + uniform_index(rng, 12));
    for (auto& w : s) w = vocab[uniform_index(rng, vocab.size())];
  }
  return out;
}

Outcome bleu_oracle() {
  Outcome out;
  const std::vector<Tokens> h{tokenize("the cat sat on mat")}, r{tokenize("the cat sat on the mat")};
  const double ex = corpus_bleu(h, r, true);
  out.require(std::abs(ex - 57.89) <= 0.01, "hand example " + fmt("%.4f", ex));

  std::mt19937_64 rng(1004);
  const Tokens vocab = {"the", "The", "cat", "Cat", "a", "A", "sat", "on"};
  double worst = 0.0;
  for (int i = 0; i < 50; ++i) {
    const auto hyp = random_corpus(rng, 1, vocab), ref = random_corpus(rng, 1, vocab);
    worst = std::max(worst, std::abs(corpus_bleu(hyp, ref, true) - oracle::bleu(hyp, ref)));
  }
  out.require(worst <= 1e-6, "recount deviation " + fmt("%.2g", worst) + " <= 1e-6 on 50 pairs");

  bool self = true, order = true;
  for (int i = 0; i < 100; ++i) {
    const auto hyp = random_corpus(rng, 3, vocab), ref = random_corpus(rng, 3, vocab);
    self = self && corpus_bleu(hyp, hyp, true) == 100.0;
    order = order && corpus_bleu(hyp, ref, false) >= corpus_bleu(hyp, ref, true);
  }
  out.require(self, "BLEU(h,h) = 100");
  out.require(order, "uncased >= cased on 100 corpora");
  return out;
}

Tokens letters(const std::string& s) {
  Tokens t;
  for (char c : s) t.emplace_back(1, c);
  return t;
}

Outcome ter_oracle() {
  Outcome out;
  out.require(ter(tokenize("a b c d"), tokenize("a b c d")) == 0.0, "identity 0");
  out.require(ter(tokenize("a b x d"), tokenize("a b c d")) == 0.25, "substitution 0.25");

  std::mt19937_64 rng(1005);
  bool bounded = true;
  for (int i = 0; i < 200; ++i) {
    Tokens hyp(uniform_index(rng, 31)), ref(1 + uniform_index(rng, 30));
    for (auto& w : hyp) w = std::string(1, static_cast<char>('a' + uniform_index(rng, 4)));
    for (auto& w : ref) w = std::string(1, static_cast<char>('a' + uniform_index(rng, 4)));
    bounded = bounded && ter(hyp, ref) <= ter(hyp, ref, {.shifts = false});
  }
  out.require(bounded, "TER <= no-shift rate on 200 pairs");

  const oracle::EditGraph graph("ab", 6);
  const auto& all = graph.strings();
  std::size_t mismatches = 0, pairs = 0;
  for (const auto& hyp : all) {
    const auto dist = graph.distances_from(hyp);
    for (std::size_t j = 0; j < all.size(); ++j) {
      if (all[j].empty()) continue;
      ++pairs;
      const auto c = ter_counts<std::string>(letters(hyp), letters(all[j]), {.shifts = false});
      mismatches += c.edits != static_cast<std::uint64_t>(dist[j]) || c.shifts != 0;
    }
  }
  out.require(mismatches == 0, "exact edit distance on all " + std::to_string(pairs) + " pairs up to length 6");
  return out;
}

// ---------------------------------------------------------------------------

Outcome preprocessing() {
  Outcome out;
  std::mt19937_64 rng(1006);
  bool clean_ok = true;
  for (int i = 0; i < 1000; ++i) {
    std::vector<TokenizedPair> pairs(uniform_index(rng, 20));
    for (std::size_t k = 0; k < pairs.size(); ++k)
      pairs[k] = {Tokens(uniform_index(rng, 120), "w"), Tokens(uniform_index(rng, 120), "v"), k + 1};
    const auto r = clean(pairs);
    std::vector<std::size_t> want, got;
    for (const auto& p : pairs)
      if (p.source.size() <= 80 && p.target.size() <= 80) want.push_back(p.line_number);
    for (const auto& p : r.kept) got.push_back(p.line_number);
    clean_ok = clean_ok && want == got && r.removed == pairs.size() - want.size();
  }
  out.require(clean_ok, "clean keeps exactly both-side <= 80 pairs in 1000 cases");

  const Tokens words = {"the", "The", "THE", "eu", "EU", "cat", "Cat", ",", "ä", "Ä"};
  bool idem = true;
  for (int i = 0; i < 200; ++i) {
    std::vector<Tokens> corpus = random_corpus(rng, 10, words);
    const auto model = train_truecaser(corpus);
    for (const auto& s : random_corpus(rng, 10, words)) {
      const Tokens once = truecase(model, s);
      idem = idem && truecase(model, once) == once;
    }
  }
  out.require(idem, "truecase idempotent");

  bool stats_ok = true;
  const std::vector<std::string> pieces = {"a", "B", "7", " ", ",", "ä", "Ö", "\t", "€"};
  for (int i = 0; i < 3; ++i) {
    std::vector<std::string> lines(1000);
    std::set<std::string> wv;
    std::set<char32_t> cv;
    std::uint64_t wc = 0, cc = 0;
    for (auto& l : lines) {
      for (std::size_t k = uniform_index(rng, 25); k > 0; --k) l += pieces[uniform_index(rng, pieces.size())];
      for (const auto& t : tokenize(l)) ++wc, wv.insert(t);
      for (char32_t c : unicode::decode(l)) ++cc, cv.insert(c);
    }
    const auto s = corpus_stats(lines);
    stats_ok = stats_ok && s.sentence_count == 1000 && s.word_count == wc && s.char_count == cc &&
               s.word_vocab_size == wv.size() && s.char_vocab_size == cv.size();
  }
  out.require(stats_ok, "corpus_stats matches recount on 1000-line samples");
  return out;
}

// ---------------------------------------------------------------------------

Outcome determinism() {
  Outcome out;
  const auto corpus = synthetic_corpus(1007, 3, 8, false);
  const std::vector<SentencePair> small(corpus.begin(), corpus.begin() + 300);
  TrainingConfig cfg;
  cfg.hidden = 16;
  cfg.epochs = 3;
  cfg.batch_size = 32;
  cfg.seed = 77;
  const auto a = train(small, cfg), b = train(small, cfg);
  out.require(a.log.losses() == b.log.losses(), "identical-seed TrainLog losses bitwise equal");

  std::stringstream ss;
  save_checkpoint(a.model, ss);
  const Seq2SeqModel back = load_checkpoint(ss);
  std::mt19937_64 rng(1008);
  bool same = true;
  for (int i = 0; i < 20; ++i) {
    const Ids src = testing::random_ids(rng, a.model.src_vocab, 1 + uniform_index(rng, 12));
    same = same && greedy_decode(back, src, 30) == greedy_decode(a.model, src, 30);
  }
  out.require(same, "checkpoint round trip gives identical decodes on 20 inputs");

  const std::vector<std::string> pieces = {"a", "Z", " ", "&", "<", ">", "\"", "ä", "&amp;", "\t"};
  auto text = [&] {
    std::string s;
    for (std::size_t k = uniform_index(rng, 20); k > 0; --k) s += pieces[uniform_index(rng, pieces.size())];
    return s;
  };
  bool sgml = true;
  for (int i = 0; i < 100; ++i) {
    SgmlDocument d{"tstset", text(), "fi", "en", {}};
    for (std::size_t k = uniform_index(rng, 4); k > 0; --k) {
      SgmlDoc doc{"d" + std::to_string(k) + text(), {}};
      for (std::size_t s = 1; s <= uniform_index(rng, 6); ++s) doc.segments.push_back({s, text()});
      d.docs.push_back(doc);
    }
    sgml = sgml && parse_sgml(write_sgml(d)) == d;
  }
  out.require(sgml, "SGML round trip on 100 documents");
  return out;
}

Outcome loss_sanity(const TaskRun& copy) {
  Outcome out;
  const double ln_v = std::log(static_cast<double>(copy.model.tgt_vocab.size()));
  const double rel = std::abs(copy.untrained_loss / ln_v - 1.0);
  out.require(rel <= 0.05, "untrained loss " + fmt("%.4f", copy.untrained_loss) + " vs ln V " + fmt("%.4f", ln_v));
  const auto losses = copy.log.losses();
  bool mono = losses.size() >= 10;
  for (std::size_t e = 1; e < std::min<std::size_t>(10, losses.size()); ++e) mono = mono && losses[e] <= losses[e - 1];
  out.require(mono, "copy-task loss non-increasing over epochs 1-10");
  return out;
}

}  // namespace

int main() {
  int failures = 0;
  auto report = [&](int id, const char* name, const Outcome& o) {
    std::printf("[%s] %d %s: %s\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str());
    std::fflush(stdout);
    failures += !o.pass;
  };
  auto guarded = [&](int id, const char* name, const std::function<Outcome()>& f) {
    try {
      report(id, name, f());
    } catch (const std::exception& e) {
      report(id, name, Outcome{false, std::string("exception: ") + e.what()});
    }
  };

  guarded(1, "gradient correctness", gradient_correctness);
  guarded(4, "BLEU oracle", bleu_oracle);
  guarded(5, "TER oracle", ter_oracle);
  guarded(6, "preprocessing", preprocessing);
  guarded(7, "determinism and persistence", determinism);

  std::fprintf(stderr, "copy task\n");
  const TaskRun copy = run_task(synthetic_corpus(2002, 5, 20, false), 30);
  guarded(2, "copy task", [&] { return copy_task(copy); });
  std::fprintf(stderr, "reversal task\n");
  const TaskRun rev = run_task(synthetic_corpus(2003, 5, 12, true), 40);
  guarded(3, "reversal task", [&] { return reversal_task(rev); });
  guarded(8, "loss sanity", [&] { return loss_sanity(copy); });

  std::printf("%d of 8 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
