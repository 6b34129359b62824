#pragma once

// Character inventories and one-hot encoding.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <ostream>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <unicode/uchar.h>

#include "c2c/error.hpp"
#include "c2c/numerics.hpp"
#include "c2c/unicode.hpp"

namespace c2c {

using TokenId = std::uint32_t;
using Ids = std::vector<TokenId>;

inline constexpr TokenId kPad = 0;
inline constexpr TokenId kSos = 1;
inline constexpr TokenId kEos = 2;
inline constexpr TokenId kUnk = 3;
inline constexpr std::size_t kNumControls = 4;

inline constexpr char32_t kReplacementChar = 0xFFFD;

/// Reserved control ids followed by characters in code-point order.
class CharVocab {
 public:
  static constexpr std::string_view kFormatTag = "C2C-VOCAB-1";

  CharVocab() = default;

  /// Symbols must be distinct; they are stored in the given order.
  explicit CharVocab(std::vector<char32_t> symbols) : symbols_(std::move(symbols)) {
    index_.reserve(symbols_.size());
    for (std::size_t i = 0; i < symbols_.size(); ++i) {
      if (!index_.emplace(symbols_[i], static_cast<TokenId>(i + kNumControls)).second)
        throw DataError("vocabulary symbol U+" + hex(symbols_[i]) + " is duplicated");
    }
  }

  std::size_t size() const noexcept { return kNumControls + symbols_.size(); }
  const std::vector<char32_t>& symbols() const noexcept { return symbols_; }

  TokenId id(char32_t c) const {
    auto it = index_.find(c);
    return it == index_.end() ? kUnk : it->second;
  }

  bool contains(char32_t c) const { return index_.contains(c); }

  /// Symbol for a character id (>= 4).
  char32_t symbol(TokenId id) const {
    if (id < kNumControls || id >= size())
      throw ContractViolation("vocab: id " + std::to_string(id) + " is not a character id");
    return symbols_[id - kNumControls];
  }

  void save(std::ostream& os) const {
    os << kFormatTag << '\n';
    for (char32_t c : symbols_) os << escape(c) << '\n';
  }

  static CharVocab load(std::istream& is) {
    std::string line;
    if (!std::getline(is, line) || line != kFormatTag)
      throw DataError("vocab: missing " + std::string(kFormatTag) + " header");
    std::vector<char32_t> symbols;
    std::size_t lineno = 1;
    while (std::getline(is, line)) {
      ++lineno;
      symbols.push_back(unescape(line, lineno));
    }
    return CharVocab(std::move(symbols));
  }

  friend bool operator==(const CharVocab& a, const CharVocab& b) { return a.symbols_ == b.symbols_; }

  static std::string escape(char32_t c) {
    if (c == U'\n') return "\\n";
    if (c == U'\\') return "\\\\";
    if (!u_isprint(static_cast<UChar32>(c)) || c == U'\r' || c == 0x2028 || c == 0x2029) {
      char buf[16];
      if (c <= 0xFFFF)
        std::snprintf(buf, sizeof buf, "\\u%04X", static_cast<unsigned>(c));
      else
        std::snprintf(buf, sizeof buf, "\\U%08X", static_cast<unsigned>(c));
      return buf;
    }
    std::string s;
    unicode::append(s, c);
    return s;
  }

  static char32_t unescape(std::string_view line, std::size_t lineno = 0) {
    auto fail = [&] { return DataError("vocab: bad symbol on line " + std::to_string(lineno)); };
    if (!line.empty() && line.front() == '\\') {
      if (line == "\\n") return U'\n';
      if (line == "\\\\") return U'\\';
      const std::size_t digits = line.size() >= 2 && line[1] == 'u' ? 4 : 8;
      if (line.size() != 2 + digits || (line[1] != 'u' && line[1] != 'U')) throw fail();
      char32_t v = 0;
      for (char ch : line.substr(2)) {
        v <<= 4;
        if (ch >= '0' && ch <= '9') v |= static_cast<char32_t>(ch - '0');
        else if (ch >= 'A' && ch <= 'F') v |= static_cast<char32_t>(ch - 'A' + 10);
        else if (ch >= 'a' && ch <= 'f') v |= static_cast<char32_t>(ch - 'a' + 10);
        else throw fail();
      }
      return v;
    }
    const auto cps = unicode::decode(line);
    if (cps.size() != 1) throw fail();
    return cps.front();
  }

 private:
  static std::string hex(char32_t c) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04X", static_cast<unsigned>(c));
    return buf;
  }

  std::vector<char32_t> symbols_;
  std::unordered_map<char32_t, TokenId> index_;
};

inline CharVocab build_vocab(const std::vector<std::string>& lines) {
  std::set<char32_t> distinct;
  for (const auto& line : lines)
    for (char32_t c : unicode::decode(line)) distinct.insert(c);
  return CharVocab(std::vector<char32_t>(distinct.begin(), distinct.end()));
}

inline Ids encode(const CharVocab& v, std::string_view text, bool add_sos = false,
                  bool add_eos = false) {
  const auto cps = unicode::decode(text);
  Ids ids;
  ids.reserve(cps.size() + 2);
  if (add_sos) ids.push_back(kSos);
  for (char32_t c : cps) ids.push_back(v.id(c));
  if (add_eos) ids.push_back(kEos);
  return ids;
}

/// T x V matrix with a single 1.0 per row.
inline Matrix onehot(const CharVocab& v, const Ids& ids) {
  if (ids.empty()) throw ContractViolation("onehot: empty id sequence");
  Matrix m(ids.size(), v.size());
  for (std::size_t t = 0; t < ids.size(); ++t) {
    if (ids[t] >= v.size())
      throw ContractViolation("onehot: id " + std::to_string(ids[t]) + " out of range for vocab size " +
                              std::to_string(v.size()));
    m(t, ids[t]) = 1.0;
  }
  return m;
}

/// Skips PAD and SOS, stops at the first EOS, renders UNK as U+FFFD.
inline std::string decode(const CharVocab& v, const Ids& ids) {
  std::string out;
  for (TokenId id : ids) {
    if (id == kEos) break;
    if (id == kPad || id == kSos) continue;
    unicode::append(out, id == kUnk ? kReplacementChar : v.symbol(id));
  }
  return out;
}

}  // namespace c2c
