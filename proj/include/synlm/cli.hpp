#pragma once

// Subcommand implementations behind the synlm tool: init, train, ppl, parse,
// trigram. Reports go to `out`; run metadata and warnings go to `err` so the
// report bytes depend only on the evaluated values.

#include <filesystem>
#include <iostream>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "synlm/config.hpp"
#include "synlm/corpus.hpp"
#include "synlm/decoder.hpp"
#include "synlm/evaluation.hpp"
#include "synlm/model.hpp"
#include "synlm/reestimation.hpp"
#include "synlm/tree.hpp"
#include "synlm/vocab.hpp"

namespace synlm {

namespace cli {

inline std::string vocab_path(const RunConfig& c) { return c.out_dir + "/vocab.v1"; }
inline std::string checkpoint_path(const RunConfig& c, const std::string& iter) {
  return c.out_dir + "/" + iter + ".slm";
}
inline std::string train_log_path(const RunConfig& c) { return c.out_dir + "/train.log"; }

inline std::string file_stem(const std::string& path) {
  return std::filesystem::path(path).filename().string();
}

inline std::string stream_path(const RunConfig& c, const std::string& corpus_path,
                               const std::string& model_path, const std::string& kind) {
  return c.out_dir + "/" + file_stem(corpus_path) + "." + file_stem(model_path) + "." + kind +
         ".probs";
}

inline BeamConfig beam_config(const RunConfig& c) {
  return BeamConfig{c.beam_depth, c.beam_threshold};
}

inline TrainOptions train_options(const RunConfig& c) {
  TrainOptions o;
  o.bucket_edges = c.bucket_edges;
  o.lambda_em_iters = c.lambda_em_iterations;
  o.eos_epsilon = c.eos_epsilon;
  return o;
}

inline TrainConfig train_config(const RunConfig& c) {
  TrainConfig t;
  t.beam = beam_config(c);
  t.first_pass_iterations = c.first_pass_iterations;
  t.l2r_iterations = c.l2r_iterations;
  t.reestimate_lambdas = c.reestimate_lambdas;
  t.workers = c.workers;
  t.opts = train_options(c);
  return t;
}

inline HeadRules head_rules(const RunConfig& c) {
  if (c.head_rules.empty()) return HeadRules::default_rules();
  return HeadRules::load(c.require_path("head_rules", c.head_rules));
}

inline std::set<std::string> drop_set(const RunConfig& c) {
  return std::set<std::string>(c.drop_labels.begin(), c.drop_labels.end());
}

inline std::vector<Tree> load_treebank_file(const std::string& path) {
  return parse_treebank(read_file(path));
}

inline std::vector<std::vector<std::string>> sentences_from_text(const std::string& path) {
  std::vector<std::vector<std::string>> out;
  for (const std::string& line : read_lines(path)) {
    std::vector<std::string> toks = split_ws(line);
    if (!toks.empty()) out.push_back(std::move(toks));
  }
  return out;
}

inline std::vector<std::vector<std::string>> sentences_from_treebank(
    const std::vector<Tree>& trees, const std::set<std::string>& drop) {
  std::vector<std::vector<std::string>> out;
  for (const Tree& t : trees) {
    Tree copy = t;
    if (!detail::drop_leaves(copy, drop)) continue;
    out.push_back(tree_yield(copy));
  }
  return out;
}

inline std::vector<std::vector<WordId>> encode_corpus(
    const std::vector<std::vector<std::string>>& sentences, const Vocab& v) {
  std::vector<std::vector<WordId>> out;
  out.reserve(sentences.size());
  for (const auto& s : sentences) out.push_back(encode_sentence(s, v));
  return out;
}

// Resolves a split's corpus: the text file when configured, else the yields
// of the split's treebank.
inline std::vector<std::vector<WordId>> corpus_for(const RunConfig& c, const std::string& split,
                                                   const Vocab& v) {
  const std::string* text = nullptr;
  const std::string* bank = nullptr;
  if (split == "dev") { text = &c.dev_text; bank = &c.dev_treebank; }
  else if (split == "check") { text = &c.check_text; bank = &c.check_treebank; }
  else if (split == "test") { text = &c.test_text; bank = &c.test_treebank; }
  else fail("unknown corpus split '" + split + "'");
  if (!text->empty())
    return encode_corpus(sentences_from_text(c.require_path(split + "_text", *text)), v);
  std::vector<Tree> trees =
      load_treebank_file(c.require_path(split + "_treebank", *bank));
  return encode_corpus(sentences_from_treebank(trees, drop_set(c)), v);
}

inline Vocab load_vocab(const RunConfig& c) {
  return parse_vocab(read_file(c.require_path("out_dir/vocab.v1", vocab_path(c))));
}

inline Slm load_slm(const RunConfig& c, const std::string& model_path) {
  return parse_slm(read_file(model_path), load_vocab(c));
}

inline void ensure_out_dir(const RunConfig& c) {
  std::filesystem::create_directories(c.out_dir);
}

}  // namespace cli

// Builds the vocabulary and the treebank-initialized model, writing
// out_dir/vocab.v1 and out_dir/E0.slm.
inline int cmd_init(const RunConfig& cfg, std::ostream& out = std::cout,
                    std::ostream& err = std::cerr) {
  cli::ensure_out_dir(cfg);
  HeadRules rules = cli::head_rules(cfg);
  std::set<std::string> drop = cli::drop_set(cfg);
  std::vector<Tree> dev_trees =
      cli::load_treebank_file(cfg.require_path("dev_treebank", cfg.dev_treebank));
  std::vector<Tree> check_trees =
      cli::load_treebank_file(cfg.require_path("check_treebank", cfg.check_treebank));

  std::vector<Tree> normalized;
  for (const std::vector<Tree>* side : {&dev_trees, &check_trees})
    for (const Tree& t : *side) {
      Tree copy = t;
      if (normalize_tree(copy, rules, drop)) normalized.push_back(std::move(copy));
    }
  Vocab v = build_vocab(normalized, cfg.vocab_size);
  write_file(cli::vocab_path(cfg), serialize_vocab(v));

  TreebankStats stats;
  Slm m = init_from_treebank(dev_trees, check_trees, rules, drop, v, cli::train_options(cfg), &stats);
  write_file(cli::checkpoint_path(cfg, "E0"), serialize_slm(m));

  out << v.audit();
  out << "trees_used=" << stats.used << "\n";
  out << "trees_skipped=" << stats.skipped << "\n";
  if (stats.skipped > 0) err << "warning: skipped " << stats.skipped << " invalid trees\n";
  return 0;
}

// Runs init when no E0 checkpoint exists, then the first reestimation pass
// (E1..En), then seeds the L2R predictor and runs the second pass
// (L2R0..L2Rm). Every iteration writes a checkpoint and a metrics line.
inline int cmd_train(const RunConfig& cfg, std::ostream& out = std::cout,
                     std::ostream& err = std::cerr) {
  cli::ensure_out_dir(cfg);
  if (!std::filesystem::exists(cli::vocab_path(cfg)) ||
      !std::filesystem::exists(cli::checkpoint_path(cfg, "E0"))) {
    cmd_init(cfg, err, err);  // bootstrap; its report is metadata here
  }
  Vocab v = cli::load_vocab(cfg);
  Slm m = parse_slm(read_file(cli::checkpoint_path(cfg, "E0")), v);

  std::vector<std::vector<WordId>> dev = cli::corpus_for(cfg, "dev", v);
  std::vector<std::vector<WordId>> check = cli::corpus_for(cfg, "check", v);
  write_file(cfg.out_dir + "/cache.dev.corpus", serialize_corpus(dev));
  write_file(cfg.out_dir + "/cache.check.corpus", serialize_corpus(check));

  TrainConfig tc = cli::train_config(cfg);
  std::string log;
  auto log_iter = [&](const std::string& name, const Slm& model) {
    double dev_ppl = ppl_causal(model, dev, tc.beam, tc.workers).ppl;
    double check_ppl = ppl_causal(model, check, tc.beam, tc.workers).ppl;
    std::string line = "iter=" + name + " dev_ppl=" + fmt_fixed4(dev_ppl) +
                       " check_ppl=" + fmt_fixed4(check_ppl);
    log += line + "\n";
    write_file(cli::train_log_path(cfg), log);
    out << line << "\n";
  };

  log_iter("E0", m);
  for (std::size_t i = 1; i <= tc.first_pass_iterations; ++i) {
    NBestStats stats;
    m = first_pass_iteration(m, dev, check, tc, &stats);
    if (stats.failures) err << "warning: " << stats.failures << " search failures\n";
    std::string name = "E" + std::to_string(i);
    write_file(cli::checkpoint_path(cfg, name), serialize_slm(m));
    log_iter(name, m);
  }
  if (tc.l2r_iterations > 0) {
    m = seed_l2r(m);
    write_file(cli::checkpoint_path(cfg, "L2R0"), serialize_slm(m));
    log_iter("L2R0", m);
    for (std::size_t j = 1; j <= tc.l2r_iterations; ++j) {
      NBestStats stats;
      m = l2r_pass_iteration(m, dev, check, tc, &stats);
      if (stats.failures) err << "warning: " << stats.failures << " search failures\n";
      std::string name = "L2R" + std::to_string(j);
      write_file(cli::checkpoint_path(cfg, name), serialize_slm(m));
      log_iter(name, m);
    }
  }
  return 0;
}

namespace cli {

// Computes (or reuses) the causal probability stream of an SLM on a corpus.
inline ProbStream slm_stream(const RunConfig& cfg, const std::string& model_path,
                             const std::string& corpus_path,
                             const std::vector<std::vector<WordId>>& corpus, const Slm& m) {
  std::string path = stream_path(cfg, corpus_path, model_path, "causal");
  if (std::filesystem::exists(path)) return parse_prob_stream(read_file(path));
  ProbStream s;
  ppl_causal(m, corpus, beam_config(cfg), cfg.workers, &s);
  write_file(path, serialize_prob_stream(s));
  return s;
}

inline ProbStream trigram_stream(const RunConfig& cfg, const std::string& model_path,
                                 const std::string& corpus_path,
                                 const std::vector<std::vector<WordId>>& corpus,
                                 const TrigramModel& tm, const Vocab& v) {
  std::string path = stream_path(cfg, corpus_path, model_path, "trigram");
  if (std::filesystem::exists(path)) return parse_prob_stream(read_file(path));
  ProbStream s;
  trigram_ppl(tm, corpus, v, &s);
  write_file(path, serialize_prob_stream(s));
  return s;
}

}  // namespace cli

// Perplexity evaluation. Modes: causal (Eq.-14 mixture), lower-bound
// (best-parse conditioning), trigram (model_path is a trigram file), and
// interpolated (model_path is an SLM; the trigram partner comes from the
// trigram_model config key, and lambda from interpolation_lambda or a fit on
// the check corpus).
inline int cmd_ppl(const RunConfig& cfg, const std::string& model_path,
                   const std::string& corpus_path, const std::string& mode,
                   std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  cli::ensure_out_dir(cfg);
  Vocab v = cli::load_vocab(cfg);
  if (!std::filesystem::exists(corpus_path)) fail("corpus path does not exist: " + corpus_path);
  std::vector<std::vector<WordId>> corpus =
      cli::encode_corpus(cli::sentences_from_text(corpus_path), v);

  PplReport report;
  if (mode == "causal" || mode == "lower-bound") {
    Slm m = parse_slm(read_file(model_path), v);
    ProbStream s;
    report = mode == "causal"
                 ? ppl_causal(m, corpus, cli::beam_config(cfg), cfg.workers, &s)
                 : ppl_lower_bound(m, corpus, cli::beam_config(cfg), cfg.workers, &s);
    write_file(cli::stream_path(cfg, corpus_path, model_path,
                                mode == "causal" ? "causal" : "lower-bound"),
               serialize_prob_stream(s));
  } else if (mode == "trigram") {
    TrigramModel tm = parse_trigram(read_file(model_path), v);
    ProbStream s;
    report = trigram_ppl(tm, corpus, v, &s);
    write_file(cli::stream_path(cfg, corpus_path, model_path, "trigram"),
               serialize_prob_stream(s));
  } else if (mode == "interpolated") {
    Slm m = parse_slm(read_file(model_path), v);
    std::string tri_path = cfg.require_path("trigram_model", cfg.trigram_model);
    TrigramModel tm = parse_trigram(read_file(tri_path), v);
    ProbStream slm_s = cli::slm_stream(cfg, model_path, corpus_path, corpus, m);
    ProbStream tri_s = cli::trigram_stream(cfg, tri_path, corpus_path, corpus, tm, v);
    double lambda = cfg.interpolation_lambda;
    if (lambda < 0.0) {
      std::string check_path = !cfg.check_text.empty()
                                   ? cfg.require_path("check_text", cfg.check_text)
                                   : cfg.require_path("check_treebank", cfg.check_treebank);
      std::vector<std::vector<WordId>> check = cli::corpus_for(cfg, "check", v);
      (void)check_path;
      ProbStream slm_c = cli::slm_stream(cfg, model_path, "check", check, m);
      ProbStream tri_c = cli::trigram_stream(cfg, tri_path, "check", check, tm, v);
      InterpolationFit fit = fit_interpolation_weight(tri_c, slm_c);
      lambda = fit.lambda;
      err << "fitted interpolation_lambda=" << fmt_fixed4(lambda)
          << (fit.degenerate ? " (degenerate: identical streams)" : "") << "\n";
    }
    report = interpolated_ppl(tri_s, slm_s, lambda);
  } else {
    fail("unknown ppl mode '" + mode + "' (expected causal, lower-bound, trigram, interpolated)");
  }
  out << render_report(report);
  if (report.failures) err << "warning: " << report.failures << " sentences excluded (search failure)\n";
  return 0;
}

// Best parse per input sentence: `logprob<TAB>(NT~headword left right)`.
inline int cmd_parse(const RunConfig& cfg, const std::string& model_path,
                     const std::string& input_path, std::ostream& out = std::cout,
                     std::ostream& err = std::cerr) {
  Vocab v = cli::load_vocab(cfg);
  Slm m = parse_slm(read_file(model_path), v);
  if (!std::filesystem::exists(input_path)) fail("input path does not exist: " + input_path);
  BeamConfig beam = cli::beam_config(cfg);
  for (const auto& sent : cli::sentences_from_text(input_path)) {
    std::vector<WordId> ids = encode_sentence(sent, v);
    try {
      ScoredParse best = best_parse(m, ids, beam);
      auto tree = replay_to_tree(best.derivation, v);
      out << fmt_fixed4(best.logprob) << "\t" << headed_tree_to_string(*tree, v) << "\n";
    } catch (const SearchFailure& e) {
      out << "FAILED\t" << e.what() << "\n";
      err << "warning: search failure\n";
    }
  }
  return 0;
}

// Trains the deleted-interpolation trigram baseline on the dev/check splits,
// writes out_dir/trigram.v1, and reports test perplexity.
inline int cmd_trigram(const RunConfig& cfg, std::ostream& out = std::cout,
                       std::ostream& err = std::cerr) {
  cli::ensure_out_dir(cfg);
  if (!std::filesystem::exists(cli::vocab_path(cfg))) {
    // vocabulary comes from the treebanks, as in init
    cmd_init(cfg, err, err);
  }
  Vocab v = cli::load_vocab(cfg);
  std::vector<std::vector<WordId>> dev = cli::corpus_for(cfg, "dev", v);
  std::vector<std::vector<WordId>> check = cli::corpus_for(cfg, "check", v);
  std::vector<std::vector<WordId>> test = cli::corpus_for(cfg, "test", v);
  TrigramModel tm = train_trigram(dev, check, v, cfg.bucket_edges, cfg.lambda_em_iterations);
  std::string tri_path = cfg.out_dir + "/trigram.v1";
  write_file(tri_path, serialize_trigram(tm, v));
  ProbStream s;
  PplReport report = trigram_ppl(tm, test, v, &s);
  write_file(cli::stream_path(cfg, "test", tri_path, "trigram"), serialize_prob_stream(s));
  out << render_report(report);
  return 0;
}

}  // namespace synlm
