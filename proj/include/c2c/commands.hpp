#pragma once

// Implementations of the c2c subcommands. Each takes a JobConfig whose keys
// come from a config file overlaid with command-line flags.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "c2c/config.hpp"
#include "c2c/error.hpp"
#include "c2c/io.hpp"
#include "c2c/metrics.hpp"
#include "c2c/model.hpp"
#include "c2c/sgml.hpp"
#include "c2c/textprep.hpp"
#include "c2c/trainer.hpp"
#include "c2c/vocab.hpp"

namespace c2c::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kData = 2, kNumeric = 3 };

namespace fs = std::filesystem;

inline std::set<std::string> keys_for(const std::string& command) {
  if (command == "prep") return {"src", "tgt", "out", "max_tokens", "src_lang", "tgt_lang"};
  if (command == "stats") return {"input", "label"};
  if (command == "train") {
    std::set<std::string> k = {"prep_dir", "src", "tgt", "src_vocab", "tgt_vocab", "checkpoint", "log"};
    k.insert(training_keys().begin(), training_keys().end());
    return k;
  }
  if (command == "translate")
    return {"checkpoint", "input", "output", "prep_dir", "max_len", "setid", "srclang", "trglang", "docid"};
  if (command == "eval") return {"hyp", "ref", "shifts"};
  throw ConfigError("unknown command " + command);
}

/// Runs `body`, mapping library exceptions to exit codes.
inline int run_guarded(const std::function<void()>& body, std::ostream& err) {
  try {
    body();
    return kOk;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const NumericError& e) {
    err << "numeric abort: " << e.what() << '\n';
    return kNumeric;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kData;
  }
}

inline std::string side_label(const std::string& lang) {
  std::string s = lang;
  if (!s.empty() && s[0] >= 'a' && s[0] <= 'z') s[0] = static_cast<char>(s[0] - 'a' + 'A');
  return s;
}

inline void require_file(const std::string& path, const char* what) {
  if (!fs::is_regular_file(path)) throw ConfigError(std::string(what) + " not found: " + path);
}

// ---------------------------------------------------------------------------
// prep

struct PrepSummary {
  std::size_t kept = 0;
  std::size_t removed = 0;
  CorpusStats src_stats;
  CorpusStats tgt_stats;
};

/// tokenize -> train truecasers -> truecase -> clean, then writes
/// train.{src,tgt}, truecase.{src,tgt}, vocab.{src,tgt} and stats.txt.
inline PrepSummary cmd_prep(const JobConfig& job, std::ostream& log) {
  const std::string src_path = job.require("src");
  const std::string tgt_path = job.require("tgt");
  const fs::path out = job.require("out");
  const auto max_tokens = job.get_number<long long>("max_tokens").value_or(kDefaultMaxTokens);
  if (max_tokens < 1) throw ConfigError("max_tokens must be at least 1");
  const std::string src_lang = job.get("src_lang").value_or("fi");
  const std::string tgt_lang = job.get("tgt_lang").value_or("en");
  require_file(src_path, "source corpus");
  require_file(tgt_path, "target corpus");

  const auto src = io::read_lines(src_path);
  const auto tgt = io::read_lines(tgt_path);
  if (src.size() != tgt.size())
    throw DataError("line count mismatch: source has " + std::to_string(src.size()) +
                    " lines, target has " + std::to_string(tgt.size()));

  std::vector<TokenizedPair> pairs;
  pairs.reserve(src.size());
  std::vector<Tokens> src_tok, tgt_tok;
  for (std::size_t i = 0; i < src.size(); ++i) {
    try {
      pairs.push_back({tokenize(src[i]), tokenize(tgt[i]), i + 1});
    } catch (const DataError& e) {
      throw DataError("line " + std::to_string(i + 1) + ": " + e.what());
    }
    src_tok.push_back(pairs.back().source);
    tgt_tok.push_back(pairs.back().target);
  }
  const TruecaseModel src_tc = train_truecaser(src_tok);
  const TruecaseModel tgt_tc = train_truecaser(tgt_tok);
  for (auto& p : pairs) {
    p.source = truecase(src_tc, std::move(p.source));
    p.target = truecase(tgt_tc, std::move(p.target));
  }
  CleanResult cleaned = clean(std::move(pairs), static_cast<std::size_t>(max_tokens));

  std::vector<std::string> out_src, out_tgt;
  for (const auto& p : cleaned.kept) {
    out_src.push_back(join_tokens(p.source));
    out_tgt.push_back(join_tokens(p.target));
  }

  fs::create_directories(out);
  io::write_lines(out / "train.src", out_src);
  io::write_lines(out / "train.tgt", out_tgt);
  auto write_text = [](const fs::path& p, const auto& obj) {
    std::ofstream os(p, std::ios::binary | std::ios::trunc);
    if (!os) throw DataError("cannot write " + p.string());
    obj.save(os);
  };
  write_text(out / "truecase.src", src_tc);
  write_text(out / "truecase.tgt", tgt_tc);
  write_text(out / "vocab.src", build_vocab(out_src));
  write_text(out / "vocab.tgt", build_vocab(out_tgt));

  PrepSummary s{cleaned.kept.size(), cleaned.removed, corpus_stats(src), corpus_stats(tgt)};
  std::ofstream stats(out / "stats.txt", std::ios::binary | std::ios::trunc);
  write_stats(stats, s.src_stats, side_label(src_lang));
  write_stats(stats, s.tgt_stats, side_label(tgt_lang));
  stats << "# pairs kept\t" << s.kept << '\n' << "# pairs removed\t" << s.removed << '\n';
  log << "prep: kept " << s.kept << " pairs, removed " << s.removed << " (> " << max_tokens
      << " tokens)\n";
  return s;
}

// ---------------------------------------------------------------------------
// stats

inline void cmd_stats(const JobConfig& job, std::ostream& out) {
  const std::string path = job.require("input");
  require_file(path, "input");
  write_stats(out, corpus_stats(io::read_lines(path)), job.get("label").value_or("input"));
}

// ---------------------------------------------------------------------------
// train

struct TrainPaths {
  std::string src, tgt, src_vocab, tgt_vocab, checkpoint, log;
};

inline TrainPaths train_paths(const JobConfig& job) {
  const auto dir = job.get("prep_dir");
  auto path = [&](const char* key, const char* file) -> std::string {
    if (auto v = job.get(key); v && !v->empty()) return *v;
    if (dir) return (fs::path(*dir) / file).string();
    throw ConfigError(std::string("missing required configuration key '") + key + "'");
  };
  TrainPaths p{path("src", "train.src"), path("tgt", "train.tgt"), path("src_vocab", "vocab.src"),
               path("tgt_vocab", "vocab.tgt"), job.require("checkpoint"), job.get("log").value_or("")};
  require_file(p.src, "source training file");
  require_file(p.tgt, "target training file");
  require_file(p.src_vocab, "source vocab file");
  require_file(p.tgt_vocab, "target vocab file");
  for (const std::string& f : {p.checkpoint, p.log}) {
    if (f.empty()) continue;
    const auto parent = fs::path(f).parent_path();
    if (!parent.empty() && !fs::is_directory(parent))
      throw ConfigError("output directory does not exist: " + parent.string());
  }
  return p;
}

inline CharVocab load_vocab_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot open vocab file " + path);
  return CharVocab::load(is);
}

inline TrainLog cmd_train(const JobConfig& job, std::ostream& log, bool quiet = false) {
  const TrainingConfig cfg = training_config_from(job);
  const TrainPaths paths = train_paths(job);
  CharVocab src_vocab = load_vocab_file(paths.src_vocab);
  CharVocab tgt_vocab = load_vocab_file(paths.tgt_vocab);

  const auto src = io::read_lines(paths.src);
  const auto tgt = io::read_lines(paths.tgt);
  if (src.size() != tgt.size())
    throw DataError("line count mismatch: source has " + std::to_string(src.size()) +
                    " lines, target has " + std::to_string(tgt.size()));
  std::vector<EncodedPair> pairs;
  std::size_t empty = 0;
  for (std::size_t i = 0; i < src.size(); ++i) {
    if (src[i].empty() || tgt[i].empty()) {
      ++empty;
      continue;
    }
    pairs.push_back({encode(src_vocab, src[i]), encode(tgt_vocab, tgt[i])});
  }
  if (pairs.empty()) throw DataError("no non-empty training pairs in " + paths.src);
  if (empty && !quiet) log << "train: skipped " << empty << " pairs with an empty side\n";

  Seq2SeqModel model = make_model(std::move(src_vocab), std::move(tgt_vocab), cfg.hidden, cfg.seed);
  TrainOptions opts;
  opts.checkpoint_path = paths.checkpoint;
  opts.log_path = paths.log;
  opts.on_dropped = [&](std::size_t n) {
    if (!quiet) log << "train: warning: dropped " << n << " pairs longer than " << cfg.max_char_len
                    << " characters\n";
  };
  opts.on_epoch = [&](const EpochRecord& r, const Seq2SeqModel&) {
    if (!quiet) log << "epoch " << r.epoch << "\tloss " << r.loss << "\t" << r.seconds << "s\n";
  };
  return train_model(model, pairs, cfg, opts);
}

// ---------------------------------------------------------------------------
// translate

struct Segments {
  std::optional<SgmlDocument> sgml;  // set when the input was SGML
  std::vector<std::string> lines;
};

inline Segments read_segments(const std::string& path) {
  const std::string text = io::read_file(path);
  Segments s;
  if (looks_like_sgml(text)) {
    s.sgml = parse_sgml(text);
    for (const auto& d : s.sgml->docs)
      for (const auto& seg : d.segments) s.lines.push_back(seg.text);
  } else {
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      s.lines.push_back(std::move(line));
    }
  }
  return s;
}

inline std::size_t cmd_translate(const JobConfig& job, std::ostream& log) {
  const std::string ckpt = job.require("checkpoint");
  const std::string input = job.require("input");
  const std::string output = job.require("output");
  require_file(ckpt, "checkpoint");
  require_file(input, "input");
  const auto max_len_opt = job.get_number<long long>("max_len");
  if (max_len_opt && *max_len_opt < 1) throw ConfigError("max_len must be at least 1");

  const Seq2SeqModel model = load_checkpoint(ckpt);
  std::optional<TruecaseModel> tc;
  if (auto dir = job.get("prep_dir")) {
    const fs::path d(*dir);
    require_file((d / "truecase.src").string(), "truecase model");
    require_file((d / "vocab.src").string(), "source vocab");
    if (load_vocab_file((d / "vocab.src").string()) != model.src_vocab)
      throw ConfigError("source vocabulary in " + d.string() + " does not match the checkpoint");
    std::ifstream is(d / "truecase.src", std::ios::binary);
    tc = TruecaseModel::load(is);
  }

  const Segments in = read_segments(input);
  std::vector<std::string> hyps;
  hyps.reserve(in.lines.size());
  for (const auto& raw : in.lines) {
    const std::string line = tc ? join_tokens(truecase(*tc, tokenize(raw))) : raw;
    if (line.empty()) {
      hyps.emplace_back();
      continue;
    }
    const Ids src = encode(model.src_vocab, line);
    const std::size_t max_len =
        max_len_opt ? static_cast<std::size_t>(*max_len_opt) : 2 * src.size() + 10;
    hyps.push_back(decode(model.tgt_vocab, greedy_decode(model, src, max_len)));
  }

  const auto setid = job.get("setid");
  std::ofstream os(output, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("cannot write " + output);
  if (setid || in.sgml) {
    SgmlDocument doc;
    doc.root = "tstset";
    doc.setid = setid.value_or(in.sgml ? in.sgml->setid : "");
    doc.srclang = job.get("srclang").value_or(in.sgml ? in.sgml->srclang : "fi");
    doc.trglang = job.get("trglang").value_or(in.sgml ? in.sgml->trglang : "en");
    if (in.sgml) {
      std::size_t k = 0;
      for (const auto& d : in.sgml->docs) {
        SgmlDoc out{d.docid, {}};
        for (const auto& seg : d.segments) out.segments.push_back({seg.id, hyps[k++]});
        doc.docs.push_back(std::move(out));
      }
    } else if (!hyps.empty()) {
      SgmlDoc out{job.get("docid").value_or("doc1"), {}};
      for (std::size_t i = 0; i < hyps.size(); ++i) out.segments.push_back({i + 1, hyps[i]});
      doc.docs.push_back(std::move(out));
    }
    write_sgml(doc, os);
  } else {
    for (const auto& h : hyps) os << h << '\n';
  }
  log << "translate: " << hyps.size() << " segments\n";
  return hyps.size();
}

// ---------------------------------------------------------------------------
// eval

/// Aligns hypothesis and reference segments. SGML pairs are matched by
/// document and segment id.
inline std::pair<std::vector<std::string>, std::vector<std::string>> aligned_segments(
    const Segments& hyp, const Segments& ref) {
  if (hyp.sgml && ref.sgml) {
    const auto& hd = hyp.sgml->docs;
    const auto& rd = ref.sgml->docs;
    for (std::size_t i = 0; i < std::max(hd.size(), rd.size()); ++i) {
      if (i >= hd.size() || i >= rd.size() || hd[i].docid != rd[i].docid)
        throw DataError("segment misalignment: document " +
                        (i < rd.size() ? rd[i].docid : hd[i].docid) + " does not match");
      const auto& hs = hd[i].segments;
      const auto& rs = rd[i].segments;
      for (std::size_t j = 0; j < std::max(hs.size(), rs.size()); ++j)
        if (j >= hs.size() || j >= rs.size() || hs[j].id != rs[j].id)
          throw DataError("segment misalignment: document " + rd[i].docid + ", segment " +
                          std::to_string(j < rs.size() ? rs[j].id : hs[j].id));
    }
  } else if (hyp.lines.size() != ref.lines.size()) {
    throw DataError("segment misalignment: " + std::to_string(hyp.lines.size()) +
                    " hypothesis segments vs " + std::to_string(ref.lines.size()) +
                    " reference segments; first unmatched segment " +
                    std::to_string(std::min(hyp.lines.size(), ref.lines.size()) + 1));
  }
  return {hyp.lines, ref.lines};
}

inline std::string format_report(const EvalReport& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "BLEU=%.4f\nBLEU-cased=%.4f\nTER=%.4f\nCharTER=%.4f\nsegments=%zu\n",
                r.bleu, r.bleu_cased, r.ter, r.char_ter, r.segment_count);
  return buf;
}

inline EvalReport cmd_eval(const JobConfig& job, std::ostream& out) {
  const std::string hyp_path = job.require("hyp");
  const std::string ref_path = job.require("ref");
  require_file(hyp_path, "hypothesis file");
  require_file(ref_path, "reference file");
  TerOptions opts;
  opts.shifts = job.get_bool("shifts").value_or(true);
  const auto [hyps, refs] = aligned_segments(read_segments(hyp_path), read_segments(ref_path));
  const EvalReport r = evaluate(hyps, refs, opts);
  out << format_report(r);
  return r;
}

}  // namespace c2c::cli
