#pragma once

// Corpus BLEU and translation edit rate (word and character level).

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "c2c/error.hpp"
#include "c2c/textprep.hpp"
#include "c2c/unicode.hpp"

namespace c2c {

// ---------------------------------------------------------------------------
// BLEU

inline constexpr std::size_t kBleuOrder = 4;

/// Pooled n-gram statistics; segments add into one instance.
struct BleuStats {
  std::array<std::uint64_t, kBleuOrder> matches{};
  std::array<std::uint64_t, kBleuOrder> totals{};
  std::uint64_t hyp_len = 0;
  std::uint64_t ref_len = 0;

  void add(const Tokens& hyp, const Tokens& ref) {
    hyp_len += hyp.size();
    ref_len += ref.size();
    for (std::size_t n = 1; n <= kBleuOrder; ++n) {
      const auto h = ngram_counts(hyp, n);
      const auto r = ngram_counts(ref, n);
      for (const auto& [gram, c] : h) {
        totals[n - 1] += c;
        auto it = r.find(gram);
        if (it != r.end()) matches[n - 1] += std::min(c, it->second);
      }
    }
  }

  /// Percentage in [0, 100]. Any zero precision gives 0 (no smoothing).
  double score() const {
    if (hyp_len == 0) return 0.0;
    double log_sum = 0.0;
    for (std::size_t n = 0; n < kBleuOrder; ++n) {
      if (matches[n] == 0 || totals[n] == 0) return 0.0;
      log_sum += std::log(static_cast<double>(matches[n]) / static_cast<double>(totals[n]));
    }
    const double bp =
        hyp_len < ref_len ? std::exp(1.0 - static_cast<double>(ref_len) / static_cast<double>(hyp_len))
                          : 1.0;
    return 100.0 * bp * std::exp(log_sum / static_cast<double>(kBleuOrder));
  }

 private:
  static std::map<std::vector<std::string>, std::uint64_t> ngram_counts(const Tokens& toks,
                                                                        std::size_t n) {
    std::map<std::vector<std::string>, std::uint64_t> out;
    for (std::size_t i = 0; i + n <= toks.size(); ++i)
      ++out[std::vector<std::string>(toks.begin() + static_cast<std::ptrdiff_t>(i),
                                     toks.begin() + static_cast<std::ptrdiff_t>(i + n))];
    return out;
  }
};

inline Tokens lowercase_tokens(const Tokens& toks) {
  Tokens out;
  out.reserve(toks.size());
  for (const auto& t : toks) out.push_back(unicode::to_lower(t));
  return out;
}

/// Single-reference corpus BLEU. Uncased scoring lowercases both sides.
inline double corpus_bleu(std::span<const Tokens> hyps, std::span<const Tokens> refs, bool cased) {
  if (hyps.size() != refs.size())
    throw ContractViolation("corpus_bleu: " + std::to_string(hyps.size()) + " hypotheses vs " +
                            std::to_string(refs.size()) + " references");
  if (hyps.empty()) throw ContractViolation("corpus_bleu: empty corpus");
  BleuStats stats;
  for (std::size_t i = 0; i < hyps.size(); ++i) {
    if (cased)
      stats.add(hyps[i], refs[i]);
    else
      stats.add(lowercase_tokens(hyps[i]), lowercase_tokens(refs[i]));
  }
  return stats.score();
}

// ---------------------------------------------------------------------------
// TER

struct TerOptions {
  bool shifts = true;
  std::size_t max_shift_span = 10;
};

struct TerCounts {
  std::uint64_t edits = 0;
  std::uint64_t shifts = 0;
  std::uint64_t ref_len = 0;

  double score() const {
    if (ref_len == 0) throw ContractViolation("ter: empty reference");
    return static_cast<double>(edits + shifts) / static_cast<double>(ref_len);
  }

  TerCounts& operator+=(const TerCounts& o) {
    edits += o.edits;
    shifts += o.shifts;
    ref_len += o.ref_len;
    return *this;
  }
};

namespace detail {

enum class EditOp : std::uint8_t { match, substitute, del, ins };  // del: extra hyp symbol

/// Unit-cost Levenshtein distance with a deterministic backtrace.
template <class T>
std::size_t edit_distance(std::span<const T> hyp, std::span<const T> ref,
                          std::vector<EditOp>* path = nullptr) {
  const std::size_t n = hyp.size(), m = ref.size();
  std::vector<std::size_t> d((n + 1) * (m + 1));
  auto at = [&](std::size_t i, std::size_t j) -> std::size_t& { return d[i * (m + 1) + j]; };
  for (std::size_t i = 0; i <= n; ++i) at(i, 0) = i;
  for (std::size_t j = 0; j <= m; ++j) at(0, j) = j;
  for (std::size_t i = 1; i <= n; ++i)
    for (std::size_t j = 1; j <= m; ++j)
      at(i, j) = std::min({at(i - 1, j - 1) + (hyp[i - 1] == ref[j - 1] ? 0u : 1u), at(i - 1, j) + 1,
                           at(i, j - 1) + 1});
  if (path) {
    path->clear();
    std::size_t i = n, j = m;
    while (i > 0 || j > 0) {
      if (i > 0 && j > 0) {
        const bool same = hyp[i - 1] == ref[j - 1];
        if (at(i, j) == at(i - 1, j - 1) + (same ? 0u : 1u)) {
          path->push_back(same ? EditOp::match : EditOp::substitute);
          --i, --j;
          continue;
        }
      }
      if (i > 0 && at(i, j) == at(i - 1, j) + 1) {
        path->push_back(EditOp::del);
        --i;
      } else {
        path->push_back(EditOp::ins);
        --j;
      }
    }
    std::reverse(path->begin(), path->end());
  }
  return at(n, m);
}

template <class T>
std::vector<T> apply_shift(std::span<const T> hyp, std::size_t start, std::size_t len,
                           std::size_t dest) {
  std::vector<T> rest;
  rest.reserve(hyp.size());
  rest.insert(rest.end(), hyp.begin(), hyp.begin() + static_cast<std::ptrdiff_t>(start));
  rest.insert(rest.end(), hyp.begin() + static_cast<std::ptrdiff_t>(start + len), hyp.end());
  rest.insert(rest.begin() + static_cast<std::ptrdiff_t>(dest),
              hyp.begin() + static_cast<std::ptrdiff_t>(start),
              hyp.begin() + static_cast<std::ptrdiff_t>(start + len));
  return rest;
}

}  // namespace detail

/// Edit and shift counts turning `hyp` into `ref`.
///
/// Shift search is greedy. Candidate block moves take a hypothesis span that
/// occurs verbatim in the reference, contains a misaligned hypothesis symbol,
/// and lands next to the hypothesis symbols currently aligned with a
/// misaligned occurrence. The move with the lowest resulting edit distance
/// wins, ties going to (smallest span start, shortest span, smallest
/// destination). A move is adopted only when it lowers edits + shifts.
template <class T>
TerCounts ter_counts(std::span<const T> hyp_in, std::span<const T> ref, const TerOptions& opts = {}) {
  if (ref.empty()) throw ContractViolation("ter: empty reference");
  std::vector<T> hyp(hyp_in.begin(), hyp_in.end());
  TerCounts out;
  out.ref_len = ref.size();
  std::vector<detail::EditOp> path;
  std::size_t cur = detail::edit_distance<T>(hyp, ref, &path);

  while (opts.shifts && cur > 1) {
    const std::size_t n = hyp.size(), m = ref.size();
    std::vector<bool> herr(n, false), rerr(m, false);
    std::vector<std::ptrdiff_t> ralign(m, -1);  // hyp index aligned to (or preceding) ref j
    {
      std::ptrdiff_t hi = -1, ri = -1;
      for (auto op : path) {
        switch (op) {
          case detail::EditOp::match:
          case detail::EditOp::substitute:
            ++hi, ++ri;
            herr[hi] = rerr[ri] = op == detail::EditOp::substitute;
            ralign[ri] = hi;
            break;
          case detail::EditOp::del:
            ++hi;
            herr[hi] = true;
            break;
          case detail::EditOp::ins:
            ++ri;
            rerr[ri] = true;
            ralign[ri] = hi;
            break;
        }
      }
    }

    using Move = std::tuple<std::size_t, std::size_t, std::size_t>;  // start, len, dest
    std::vector<Move> moves;
    for (std::size_t s = 0; s < n; ++s) {
      for (std::size_t len = 1; len <= opts.max_shift_span && s + len <= n; ++len) {
        std::vector<std::size_t> occurrences;
        for (std::size_t j = 0; j + len <= m; ++j)
          if (std::equal(hyp.begin() + static_cast<std::ptrdiff_t>(s),
                         hyp.begin() + static_cast<std::ptrdiff_t>(s + len),
                         ref.begin() + static_cast<std::ptrdiff_t>(j)))
            occurrences.push_back(j);
        if (occurrences.empty()) break;
        if (std::none_of(herr.begin() + static_cast<std::ptrdiff_t>(s),
                         herr.begin() + static_cast<std::ptrdiff_t>(s + len), [](bool b) { return b; }))
          continue;
        for (std::size_t j : occurrences) {
          if (std::none_of(rerr.begin() + static_cast<std::ptrdiff_t>(j),
                           rerr.begin() + static_cast<std::ptrdiff_t>(j + len), [](bool b) { return b; }))
            continue;
          // insertion points (before original hyp index) next to the aligned symbols
          for (std::size_t k = j; k < j + len; ++k) {
            for (std::ptrdiff_t loc : {ralign[k], ralign[k] + 1}) {
              if (loc < 0) loc = 0;
              const auto uloc = static_cast<std::size_t>(loc);
              if (uloc >= s && uloc <= s + len) continue;
              const std::size_t dest = uloc < s ? uloc : uloc - len;
              moves.emplace_back(s, len, dest);
            }
          }
        }
      }
    }
    std::sort(moves.begin(), moves.end());
    moves.erase(std::unique(moves.begin(), moves.end()), moves.end());

    std::size_t best = cur;
    std::vector<T> best_hyp;
    for (const auto& [s, len, dest] : moves) {
      auto shifted = detail::apply_shift<T>(hyp, s, len, dest);
      const std::size_t e = detail::edit_distance<T>(shifted, ref);
      if (e < best) {
        best = e;
        best_hyp = std::move(shifted);
      }
    }
    if (best + 1 >= cur) break;
    hyp = std::move(best_hyp);
    ++out.shifts;
    cur = detail::edit_distance<T>(hyp, ref, &path);
  }
  out.edits = cur;
  return out;
}

inline double ter(const Tokens& hyp, const Tokens& ref, const TerOptions& opts = {}) {
  return ter_counts<std::string>(hyp, ref, opts).score();
}

/// TER with characters (spaces included) as symbols.
inline TerCounts char_ter_counts(const std::string& hyp, const std::string& ref,
                                 const TerOptions& opts = {}) {
  const auto h = unicode::decode(hyp);
  const auto r = unicode::decode(ref);
  return ter_counts<char32_t>(std::span<const char32_t>(h.data(), h.size()),
                              std::span<const char32_t>(r.data(), r.size()), opts);
}

inline double char_ter(const std::string& hyp, const std::string& ref, const TerOptions& opts = {}) {
  return char_ter_counts(hyp, ref, opts).score();
}

// ---------------------------------------------------------------------------
// Corpus report

struct EvalReport {
  double bleu = 0.0;        // uncased, percent
  double bleu_cased = 0.0;  // percent
  double ter = 0.0;
  double char_ter = 0.0;
  std::size_t segment_count = 0;
};

/// Segments are raw lines; word metrics run on tokenize() output. TER
/// values pool edits and shifts over segments and divide by the total
/// reference length.
inline EvalReport evaluate(std::span<const std::string> hyps, std::span<const std::string> refs,
                           const TerOptions& opts = {}) {
  if (hyps.size() != refs.size())
    throw DataError("evaluate: " + std::to_string(hyps.size()) + " hypothesis segments vs " +
                    std::to_string(refs.size()) + " reference segments");
  if (hyps.empty()) throw DataError("evaluate: empty corpus");
  std::vector<Tokens> ht, rt;
  TerCounts word, chars;
  for (std::size_t i = 0; i < hyps.size(); ++i) {
    ht.push_back(tokenize(hyps[i]));
    rt.push_back(tokenize(refs[i]));
    if (rt.back().empty()) {
      word += TerCounts{ht.back().size(), 0, 0};
    } else {
      word += ter_counts<std::string>(ht.back(), rt.back(), opts);
    }
    if (refs[i].empty()) {
      chars += TerCounts{unicode::decode(hyps[i]).size(), 0, 0};
    } else {
      chars += char_ter_counts(hyps[i], refs[i], opts);
    }
  }
  EvalReport r;
  r.segment_count = hyps.size();
  r.bleu = corpus_bleu(ht, rt, false);
  r.bleu_cased = corpus_bleu(ht, rt, true);
  r.ter = word.score();
  r.char_ter = chars.score();
  return r;
}

}  // namespace c2c
