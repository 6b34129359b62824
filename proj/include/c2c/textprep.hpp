#pragma once

// Corpus preprocessing: tokenization, truecasing, length cleaning and
// corpus statistics.

#include <cstddef>
#include <cstdint>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "c2c/error.hpp"
#include "c2c/unicode.hpp"

namespace c2c {

using Tokens = std::vector<std::string>;

/// Letter/digit runs become tokens, every other non-space character is a
/// token by itself, whitespace is dropped.
inline Tokens tokenize(std::string_view line) {
  Tokens out;
  std::u32string word;
  auto flush = [&] {
    if (!word.empty()) {
      out.push_back(unicode::encode(word));
      word.clear();
    }
  };
  for (char32_t c : unicode::decode(line)) {
    if (unicode::is_space(c)) {
      flush();
    } else if (unicode::is_word_char(c)) {
      word.push_back(c);
    } else {
      flush();
      out.push_back(unicode::encode(std::u32string(1, c)));
    }
  }
  flush();
  return out;
}

inline std::string join_tokens(const Tokens& tokens) {
  std::string s;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) s.push_back(' ');
    s += tokens[i];
  }
  return s;
}

/// Most frequent non-initial surface form per lowercased token type.
class TruecaseModel {
 public:
  struct Entry {
    std::string form;
    std::uint64_t count = 0;
    friend bool operator==(const Entry&, const Entry&) = default;
  };

  static constexpr std::string_view kFormatTag = "C2C-TRUECASE-1";

  const Entry* find(const std::string& lowered) const {
    auto it = entries_.find(lowered);
    return it == entries_.end() ? nullptr : &it->second;
  }

  void set(const std::string& form, std::uint64_t count) {
    entries_[unicode::to_lower(form)] = Entry{form, count};
  }

  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }
  const std::map<std::string, Entry>& entries() const noexcept { return entries_; }

  void save(std::ostream& os) const {
    os << kFormatTag << '\n';
    for (const auto& [key, e] : entries_) os << key << '\t' << e.form << '\t' << e.count << '\n';
  }

  static TruecaseModel load(std::istream& is) {
    std::string line;
    if (!std::getline(is, line) || line != kFormatTag)
      throw DataError("truecase model: missing " + std::string(kFormatTag) + " header");
    TruecaseModel m;
    std::size_t lineno = 1;
    while (std::getline(is, line)) {
      ++lineno;
      if (line.empty()) continue;
      const auto t1 = line.find('\t');
      const auto t2 = t1 == std::string::npos ? t1 : line.find('\t', t1 + 1);
      if (t2 == std::string::npos)
        throw DataError("truecase model: malformed line " + std::to_string(lineno));
      std::string key = line.substr(0, t1);
      std::string form = line.substr(t1 + 1, t2 - t1 - 1);
      if (unicode::to_lower(form) != key)
        throw DataError("truecase model: form does not match key on line " + std::to_string(lineno));
      m.entries_[key] = Entry{std::move(form), std::stoull(line.substr(t2 + 1))};
    }
    return m;
  }

  friend bool operator==(const TruecaseModel&, const TruecaseModel&) = default;

 private:
  std::map<std::string, Entry> entries_;
};

/// Counts only tokens after the first of each sentence. Ties go to the
/// lexicographically smallest surface form.
inline TruecaseModel train_truecaser(const std::vector<Tokens>& corpus) {
  std::map<std::string, std::map<std::string, std::uint64_t>> counts;
  for (const auto& sentence : corpus)
    for (std::size_t i = 1; i < sentence.size(); ++i)
      ++counts[unicode::to_lower(sentence[i])][sentence[i]];

  TruecaseModel model;
  for (const auto& [key, forms] : counts) {
    // std::map iterates forms in ascending order, so strict > keeps the smallest on ties
    const std::pair<const std::string, std::uint64_t>* best = nullptr;
    for (const auto& kv : forms)
      if (!best || kv.second > best->second) best = &kv;
    model.set(best->first, best->second);
  }
  return model;
}

/// Rewrites the sentence-initial token to its preferred casing; unseen
/// initial tokens are lowercased. Other tokens pass through.
inline Tokens truecase(const TruecaseModel& model, Tokens tokens) {
  if (tokens.empty()) return tokens;
  std::string lowered = unicode::to_lower(tokens.front());
  const auto* e = model.find(lowered);
  tokens.front() = e ? e->form : std::move(lowered);
  return tokens;
}

struct SentencePair {
  std::string source;
  std::string target;
  std::size_t line_number = 1;
};

struct TokenizedPair {
  Tokens source;
  Tokens target;
  std::size_t line_number = 1;
};

struct CleanResult {
  std::vector<TokenizedPair> kept;
  std::size_t removed = 0;
};

inline constexpr std::size_t kDefaultMaxTokens = 80;

/// Drops pairs where either side has more than max_tokens tokens.
inline CleanResult clean(std::vector<TokenizedPair> pairs, std::size_t max_tokens = kDefaultMaxTokens) {
  if (max_tokens < 1) throw ConfigError("clean: max_tokens must be at least 1");
  CleanResult r;
  r.kept.reserve(pairs.size());
  for (auto& p : pairs) {
    if (p.source.size() <= max_tokens && p.target.size() <= max_tokens)
      r.kept.push_back(std::move(p));
    else
      ++r.removed;
  }
  return r;
}

struct CorpusStats {
  std::uint64_t sentence_count = 0;
  std::uint64_t word_count = 0;
  std::uint64_t word_vocab_size = 0;
  std::uint64_t char_count = 0;
  std::uint64_t char_vocab_size = 0;

  friend bool operator==(const CorpusStats&, const CorpusStats&) = default;
};

/// Counts characters of the lines as given; callers strip terminators.
inline CorpusStats corpus_stats(const std::vector<std::string>& lines) {
  CorpusStats s;
  std::unordered_set<std::string> words;
  std::unordered_set<char32_t> chars;
  for (const auto& line : lines) {
    ++s.sentence_count;
    for (auto& tok : tokenize(line)) {
      ++s.word_count;
      words.insert(std::move(tok));
    }
    for (char32_t c : unicode::decode(line)) {
      ++s.char_count;
      chars.insert(c);
    }
  }
  s.word_vocab_size = words.size();
  s.char_vocab_size = chars.size();
  return s;
}

/// Key/value lines named after the corpus statistics table.
inline void write_stats(std::ostream& os, const CorpusStats& s, const std::string& side) {
  os << "# sentences in " << side << " corpus\t" << s.sentence_count << '\n'
     << "# words in " << side << " corpus\t" << s.word_count << '\n'
     << "# word vocab size for " << side << " corpus\t" << s.word_vocab_size << '\n'
     << "# chars in " << side << " corpus\t" << s.char_count << '\n'
     << "# char vocab size for " << side << " corpus\t" << s.char_vocab_size << '\n';
}

}  // namespace c2c
