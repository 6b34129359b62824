// c2c: character-level encoder-decoder translation toolkit.

#include <iostream>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "c2c/commands.hpp"

namespace {

using c2c::JobConfig;
namespace cli = c2c::cli;

// Flag values are collected as strings and converted by JobConfig, so flags
// and config-file entries go through the same validation.
struct Subcommand {
  CLI::App* app = nullptr;
  std::string name;
  std::map<std::string, std::pair<CLI::Option*, std::string>> flags;

  void add(const std::string& flag, const std::string& key, const std::string& help) {
    auto& slot = flags[key];
    slot.first = app->add_option(flag, slot.second, help);
  }

  void add_switch(const std::string& flag, const std::string& key, const std::string& value,
                  const std::string& help) {
    auto& slot = flags[key];
    slot.second = value;
    slot.first = app->add_flag(flag, help);
  }

  void add_positional(const std::string& name_, const std::string& key, const std::string& help) {
    auto& slot = flags[key];
    slot.first = app->add_option(name_, slot.second, help);
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"c2c: character-level encoder-decoder translation"};
  app.require_subcommand(1);
  app.footer(
      "Settings are read from --config (flat key=value lines) first; command-line flags "
      "override file values. Exit codes: 0 success, 1 usage/config error, 2 data error, "
      "3 numeric abort.");

  std::string config_path;
  std::string seed;
  bool quiet = false;
  app.add_option("--config", config_path, "key=value configuration file");
  auto* seed_opt = app.add_option("--seed", seed, "random seed (training)");
  app.add_flag("--quiet", quiet, "suppress progress output");

  std::vector<Subcommand> subs;
  subs.reserve(5);

  {
    Subcommand s{app.add_subcommand("prep", "tokenize, truecase and clean a parallel corpus"), "prep", {}};
    s.add("--src", "src", "raw source-side text, one sentence per line");
    s.add("--tgt", "tgt", "raw target-side text, same line count");
    s.add("--out", "out", "output directory");
    s.add("--max-tokens", "max_tokens", "drop pairs with more tokens on either side (default 80)");
    s.add("--src-lang", "src_lang", "source language code for the stats report (default fi)");
    s.add("--tgt-lang", "tgt_lang", "target language code for the stats report (default en)");
    subs.push_back(std::move(s));
  }
  {
    Subcommand s{app.add_subcommand("stats", "corpus statistics for one side"), "stats", {}};
    s.add_positional("input", "input", "text file, one sentence per line");
    s.add("--label", "label", "side name used in the report keys");
    subs.push_back(std::move(s));
  }
  {
    Subcommand s{app.add_subcommand("train", "train an encoder-decoder model"), "train", {}};
    s.add("--prep-dir", "prep_dir", "directory written by prep (supplies default data paths)");
    s.add("--src", "src", "prepared source text");
    s.add("--tgt", "tgt", "prepared target text");
    s.add("--src-vocab", "src_vocab", "source vocab file");
    s.add("--tgt-vocab", "tgt_vocab", "target vocab file");
    s.add("--checkpoint", "checkpoint", "checkpoint path, rewritten after every epoch");
    s.add("--log", "log", "training log, one line appended per epoch");
    s.add("--batch-size", "batch_size", "sentences per update (default 128)");
    s.add("--epochs", "epochs", "passes over the corpus (default 100)");
    s.add("--learning-rate", "learning_rate", "RMSprop step size (default 0.001)");
    s.add("--rho", "rho", "RMSprop decay (default 0.9)");
    s.add("--epsilon", "epsilon", "RMSprop stabilizer (default 1e-8)");
    s.add("--clip-norm", "clip_norm", "global gradient norm bound (default 5)");
    s.add_switch("--no-clip", "clip_gradients", "false", "disable gradient clipping");
    s.add("--max-char-len", "max_char_len", "drop pairs longer than this many characters (default 400)");
    s.add("--hidden", "hidden", "LSTM hidden size (default 256)");
    subs.push_back(std::move(s));
  }
  {
    Subcommand s{app.add_subcommand("translate", "greedy-decode a text or SGML source file"), "translate", {}};
    s.add("--checkpoint", "checkpoint", "trained model");
    s.add("--input", "input", "source text (one segment per line) or SGML source set");
    s.add("--output", "output", "where to write translations");
    s.add("--prep-dir", "prep_dir", "apply tokenization and the truecase model saved by prep");
    s.add("--max-len", "max_len", "output length cap per segment (default 2*len+10)");
    s.add("--setid", "setid", "write an SGML test set with this set id");
    s.add("--srclang", "srclang", "SGML source language (default fi)");
    s.add("--trglang", "trglang", "SGML target language (default en)");
    s.add("--docid", "docid", "SGML document id for plain-text input (default doc1)");
    subs.push_back(std::move(s));
  }
  {
    Subcommand s{app.add_subcommand("eval", "BLEU, cased BLEU, TER and character TER"), "eval", {}};
    s.add("--hyp", "hyp", "system output, plain text or SGML");
    s.add("--ref", "ref", "reference, plain text or SGML");
    s.add_switch("--no-shifts", "shifts", "false", "pure edit distance, no block shifts");
    subs.push_back(std::move(s));
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? cli::kOk : cli::kUsage;
  }

  std::ostream null_stream(nullptr);
  std::ostream& log = quiet ? null_stream : std::cerr;
  for (auto& s : subs) {
    if (!s.app->parsed()) continue;
    return cli::run_guarded(
        [&] {
          JobConfig job(cli::keys_for(s.name));
          if (!config_path.empty()) job.parse_file(config_path);
          for (const auto& [key, slot] : s.flags)
            if (slot.first->count() > 0) job.set(key, slot.second);
          if (seed_opt->count() > 0) {
            if (s.name != "train") throw c2c::ConfigError("--seed only applies to train");
            job.set("seed", seed);
          }
          if (s.name == "prep") cli::cmd_prep(job, log);
          else if (s.name == "stats") cli::cmd_stats(job, std::cout);
          else if (s.name == "train") cli::cmd_train(job, log, quiet);
          else if (s.name == "translate") cli::cmd_translate(job, log);
          else if (s.name == "eval") cli::cmd_eval(job, std::cout);
        },
        std::cerr);
  }
  return cli::kUsage;
}
