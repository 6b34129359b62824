#pragma once

// WMT-style SGML test sets:
//
//   <tstset setid="S" srclang="fi" trglang="en">
//     <doc docid="D">
//       <seg id="1">text</seg>
//     </doc>
//   </tstset>
//
// One element per line, two spaces of indentation per level.

#include <cstddef>
#include <istream>
#include <map>
#include <optional>
#include <utility>
#include <ostream>
#include <regex>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "c2c/error.hpp"

namespace c2c {

struct SgmlSegment {
  std::size_t id = 0;
  std::string text;
  friend bool operator==(const SgmlSegment&, const SgmlSegment&) = default;
};

struct SgmlDoc {
  std::string docid;
  std::vector<SgmlSegment> segments;
  friend bool operator==(const SgmlDoc&, const SgmlDoc&) = default;
};

struct SgmlDocument {
  std::string root = "tstset";  // tstset, srcset or refset
  std::string setid;
  std::string srclang;
  std::string trglang;
  std::vector<SgmlDoc> docs;

  std::size_t segment_count() const {
    std::size_t n = 0;
    for (const auto& d : docs) n += d.segments.size();
    return n;
  }

  friend bool operator==(const SgmlDocument&, const SgmlDocument&) = default;
};

class SgmlParseError : public DataError {
 public:
  SgmlParseError(std::size_t line, const std::string& msg)
      : DataError("SGML line " + std::to_string(line) + ": " + msg), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

inline std::string sgml_escape(std::string_view s, bool attribute = false) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"':
        if (attribute) {
          out += "&quot;";
          break;
        }
        [[fallthrough]];
      default: out.push_back(c);
    }
  }
  return out;
}

/// Inverse of sgml_escape. Unknown entities and bare '&', '<', '>' are errors.
inline std::string sgml_unescape(std::string_view s, std::size_t line) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    const char c = s[i];
    if (c == '<' || c == '>') throw SgmlParseError(line, "unescaped markup character in text");
    if (c != '&') {
      out.push_back(c);
      continue;
    }
    const auto semi = s.find(';', i);
    if (semi == std::string_view::npos) throw SgmlParseError(line, "unterminated entity");
    const auto name = s.substr(i + 1, semi - i - 1);
    if (name == "amp") out.push_back('&');
    else if (name == "lt") out.push_back('<');
    else if (name == "gt") out.push_back('>');
    else if (name == "quot") out.push_back('"');
    else throw SgmlParseError(line, "unknown entity &" + std::string(name) + ";");
    i = semi;
  }
  return out;
}

inline void write_sgml(const SgmlDocument& doc, std::ostream& os) {
  if (doc.root != "tstset" && doc.root != "srcset" && doc.root != "refset")
    throw ContractViolation("write_sgml: unsupported root element " + doc.root);
  os << '<' << doc.root << " setid=\"" << sgml_escape(doc.setid, true) << "\" srclang=\""
     << sgml_escape(doc.srclang, true) << "\" trglang=\"" << sgml_escape(doc.trglang, true) << "\">\n";
  for (const auto& d : doc.docs) {
    std::set<std::size_t> ids;
    os << "  <doc docid=\"" << sgml_escape(d.docid, true) << "\">\n";
    for (const auto& seg : d.segments) {
      if (!ids.insert(seg.id).second)
        throw ContractViolation("write_sgml: duplicate segment id " + std::to_string(seg.id) +
                                " in document " + d.docid);
      if (seg.text.find_first_of("\r\n") != std::string::npos)
        throw ContractViolation("write_sgml: segment text contains a line break");
      os << "    <seg id=\"" << seg.id << "\">" << sgml_escape(seg.text) << "</seg>\n";
    }
    os << "  </doc>\n";
  }
  os << "</" << doc.root << ">\n";
}

inline std::string write_sgml(const SgmlDocument& doc) {
  std::ostringstream os;
  write_sgml(doc, os);
  return os.str();
}

namespace detail {

inline std::map<std::string, std::string> parse_attrs(const std::string& s, std::size_t line) {
  static const std::regex attr(R"re(\s+([A-Za-z_][A-Za-z0-9_-]*)="([^"]*)")re");
  std::map<std::string, std::string> out;
  std::size_t consumed = 0;
  for (auto it = std::sregex_iterator(s.begin(), s.end(), attr); it != std::sregex_iterator(); ++it) {
    if (static_cast<std::size_t>(it->position()) != consumed)
      throw SgmlParseError(line, "malformed attribute list");
    consumed += static_cast<std::size_t>(it->length());
    out[(*it)[1]] = sgml_unescape((*it)[2].str(), line);
  }
  if (consumed != s.size()) throw SgmlParseError(line, "malformed attribute list");
  return out;
}

// Segment lines are matched by hand; std::regex recurses per character and
// long segments would exhaust the stack.
inline std::optional<std::pair<std::size_t, std::string_view>> match_seg(std::string_view line) {
  const auto b = line.find_first_not_of(" \t");
  const auto e = line.find_last_not_of(" \t");
  if (b == std::string_view::npos) return std::nullopt;
  line = line.substr(b, e - b + 1);
  constexpr std::string_view open = "<seg id=\"", close = "</seg>";
  if (!line.starts_with(open) || !line.ends_with(close)) return std::nullopt;
  line.remove_prefix(open.size());
  line.remove_suffix(close.size());
  std::size_t digits = 0;
  while (digits < line.size() && line[digits] >= '0' && line[digits] <= '9') ++digits;
  if (digits == 0 || digits > 18 || line.substr(digits, 2) != "\">") return std::nullopt;
  return std::pair{static_cast<std::size_t>(std::stoull(std::string(line.substr(0, digits)))),
                   line.substr(digits + 2)};
}

}  // namespace detail

inline SgmlDocument parse_sgml(std::istream& is) {
  static const std::regex open_root(R"re(^\s*<(tstset|srcset|refset)((?:\s+[^>]*)?)>\s*$)re");
  static const std::regex open_doc(R"re(^\s*<doc((?:\s+[^>]*)?)>\s*$)re");
  static const std::regex close_doc(R"re(^\s*</doc>\s*$)re");
  static const std::regex close_root(R"re(^\s*</(tstset|srcset|refset)>\s*$)re");

  SgmlDocument doc;
  enum class State { start, in_root, in_doc, done } state = State::start;
  std::set<std::size_t> seg_ids;
  std::string line;
  std::size_t lineno = 0;
  std::smatch m;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    switch (state) {
      case State::start: {
        if (!std::regex_match(line, m, open_root)) throw SgmlParseError(lineno, "expected set element");
        doc.root = m[1];
        auto attrs = detail::parse_attrs(m[2], lineno);
        doc.setid = attrs["setid"];
        doc.srclang = attrs["srclang"];
        doc.trglang = attrs["trglang"];
        state = State::in_root;
        break;
      }
      case State::in_root:
        if (std::regex_match(line, m, open_doc)) {
          auto attrs = detail::parse_attrs(m[1], lineno);
          if (!attrs.contains("docid")) throw SgmlParseError(lineno, "doc without docid");
          doc.docs.push_back({attrs["docid"], {}});
          seg_ids.clear();
          state = State::in_doc;
        } else if (std::regex_match(line, m, close_root)) {
          if (m[1] != doc.root) throw SgmlParseError(lineno, "mismatched closing element");
          state = State::done;
        } else {
          throw SgmlParseError(lineno, "expected <doc> or closing set element");
        }
        break;
      case State::in_doc:
        if (auto s = detail::match_seg(line)) {
          if (!seg_ids.insert(s->first).second)
            throw SgmlParseError(lineno, "duplicate segment id " + std::to_string(s->first));
          doc.docs.back().segments.push_back({s->first, sgml_unescape(s->second, lineno)});
        } else if (std::regex_match(line, close_doc)) {
          state = State::in_root;
        } else {
          throw SgmlParseError(lineno, "expected <seg> or </doc>");
        }
        break;
      case State::done:
        throw SgmlParseError(lineno, "content after closing set element");
    }
  }
  if (state != State::done) throw SgmlParseError(lineno, "unexpected end of file");
  return doc;
}

inline SgmlDocument parse_sgml(const std::string& text) {
  std::istringstream is(text);
  return parse_sgml(is);
}

/// True when the first non-blank line opens an SGML set element.
inline bool looks_like_sgml(std::string_view text) {
  const auto p = text.find_first_not_of(" \t\r\n");
  if (p == std::string_view::npos) return false;
  const auto rest = text.substr(p);
  return rest.starts_with("<tstset") || rest.starts_with("<srcset") || rest.starts_with("<refset");
}

}  // namespace c2c
