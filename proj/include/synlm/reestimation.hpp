#pragma once

// Training: treebank initialization (joint counts from hand-parse
// derivations with unit weight, lambdas estimated on check derivations),
// N-best reestimation (counts weighted by the normalized score of each
// surviving parse), and the second pass that re-trains only the L2R word
// predictor as the emission model of the fixed-weight mixture used for
// probability assignment.

#include <optional>
#include <set>
#include <string>
#include <vector>

#include "synlm/corpus.hpp"
#include "synlm/decoder.hpp"
#include "synlm/evaluation.hpp"
#include "synlm/model.hpp"
#include "synlm/smoothing.hpp"

namespace synlm {

struct MoveCounters {
  CountTable predictor{kPredictorOrder};
  CountTable tagger{kTaggerOrder};
  CountTable parser{kParserOrder};

  // Forced moves carry no information (their probability is fixed at 1) and
  // are kept out of the tables so they cannot distort back-off estimates.
  void add_derivation(const Vocab& v, const Derivation& d, double weight) {
    replay_events(v, d, [&](const MoveEvent& e) {
      if (e.forced) return;
      switch (e.component) {
        case Component::predictor: predictor.add(e.context, e.outcome, weight); break;
        case Component::tagger: tagger.add(e.context, e.outcome, weight); break;
        case Component::parser: parser.add(e.context, e.outcome, weight); break;
      }
    });
  }
};

struct TrainOptions {
  std::vector<double> bucket_edges = default_bucket_edges();
  std::size_t lambda_em_iters = 20;
  double eos_epsilon = 1e-4;
};

struct TrainConfig {
  BeamConfig beam;
  std::size_t first_pass_iterations = 3;  // E1..E3
  std::size_t l2r_iterations = 5;         // L2R1..L2R5
  bool reestimate_lambdas = true;
  std::size_t workers = 1;
  TrainOptions opts;
};

struct TreebankStats {
  std::size_t used = 0;
  std::size_t skipped = 0;
};

inline std::vector<Derivation> derivations_from_treebank(const std::vector<Tree>& trees,
                                                         const HeadRules& rules,
                                                         const std::set<std::string>& drop_labels,
                                                         const Vocab& v, TreebankStats* stats) {
  std::vector<Derivation> out;
  for (const Tree& t : trees) {
    try {
      out.push_back(derivation_of(*prepare_complete_parse(t, rules, drop_labels, v), v));
      if (stats) ++stats->used;
    } catch (const Error&) {
      if (stats) ++stats->skipped;
    }
  }
  return out;
}

namespace detail {

inline LambdaBuckets lambdas_for(const CountTable& train, std::size_t outcomes,
                                 const CountTable& check, const TrainOptions& opts) {
  // components with no check events keep the symmetric initial weights
  if (check.empty())
    return LambdaBuckets::uniform(train.order(), opts.bucket_edges, 0.5);
  return estimate_lambdas_em_trace(train, outcomes, opts.bucket_edges, check, opts.lambda_em_iters)
      .lambdas;
}

}  // namespace detail

// E0: joint counts from development derivations with weight 1, lambdas from
// EM on check-data derivation counts.
inline Slm init_from_treebank(const std::vector<Tree>& dev_trees,
                              const std::vector<Tree>& check_trees, const HeadRules& rules,
                              const std::set<std::string>& drop_labels, const Vocab& v,
                              const TrainOptions& opts, TreebankStats* stats = nullptr) {
  TreebankStats dev_stats, check_stats;
  std::vector<Derivation> dev = derivations_from_treebank(dev_trees, rules, drop_labels, v, &dev_stats);
  std::vector<Derivation> check =
      derivations_from_treebank(check_trees, rules, drop_labels, v, &check_stats);
  if (dev.empty()) fail("init_from_treebank: no valid development trees");
  if (check.empty()) fail("init_from_treebank: no valid check trees");
  if (stats) *stats = TreebankStats{dev_stats.used + check_stats.used,
                                    dev_stats.skipped + check_stats.skipped};

  MoveCounters dev_counts, check_counts;
  for (const Derivation& d : dev) dev_counts.add_derivation(v, d, 1.0);
  for (const Derivation& d : check) check_counts.add_derivation(v, d, 1.0);

  Slm m;
  m.vocab = v;
  m.eos_epsilon = opts.eos_epsilon;
  auto assemble = [&](CountTable& table, const CountTable& check_table, std::size_t outcomes) {
    LambdaBuckets lb = detail::lambdas_for(table, outcomes, check_table, opts);
    return SmoothedModel{std::move(table), std::move(lb), outcomes};
  };
  m.predictor = assemble(dev_counts.predictor, check_counts.predictor, v.word_count());
  m.tagger = assemble(dev_counts.tagger, check_counts.tagger, v.pos_count());
  m.parser = assemble(dev_counts.parser, check_counts.parser, v.action_count());
  return m;
}

struct NBestStats {
  std::size_t failures = 0;
};

// Decodes every sentence, weights each surviving derivation's moves by its
// normalized score, and accumulates fresh counters. Decoding runs in
// parallel; accumulation is sequential in sentence order so results do not
// depend on the worker count.
inline MoveCounters nbest_counters(const Slm& m, const std::vector<std::vector<WordId>>& corpus,
                                   const BeamConfig& beam, std::size_t workers,
                                   NBestStats* stats = nullptr) {
  std::vector<std::vector<ScoredParse>> parses(corpus.size());
  std::vector<char> failed(corpus.size(), 0);
  parallel_for(corpus.size(), workers, [&](std::size_t i) {
    try {
      parses[i] = nbest_parses(m, corpus[i], beam);
    } catch (const SearchFailure&) {
      failed[i] = 1;
    }
  });
  MoveCounters counters;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    if (failed[i]) {
      if (stats) ++stats->failures;
      continue;
    }
    for (const ScoredParse& p : parses[i])
      counters.add_derivation(m.vocab, p.derivation, p.rho);
  }
  return counters;
}

// One first-pass iteration: rebuild all three structure components from
// N-best weighted counts under the current parameters, then re-estimate
// lambdas on check-data counts gathered the same way. The L2R component, if
// present, passes through untouched.
inline Slm first_pass_iteration(const Slm& m, const std::vector<std::vector<WordId>>& dev_corpus,
                                const std::vector<std::vector<WordId>>& check_corpus,
                                const TrainConfig& cfg, NBestStats* stats = nullptr) {
  MoveCounters dev_counts = nbest_counters(m, dev_corpus, cfg.beam, cfg.workers, stats);
  MoveCounters check_counts = nbest_counters(m, check_corpus, cfg.beam, cfg.workers, stats);

  Slm next = m;
  auto rebuild = [&](SmoothedModel& dst, CountTable& dev_table, CountTable& check_table,
                     std::size_t outcomes, const LambdaBuckets& prev) {
    dst.table = std::move(dev_table);
    dst.outcome_vocab_size = outcomes;
    dst.lambdas = cfg.reestimate_lambdas
                      ? detail::lambdas_for(dst.table, outcomes, check_table, cfg.opts)
                      : prev;
  };
  rebuild(next.predictor, dev_counts.predictor, check_counts.predictor, m.vocab.word_count(),
          m.predictor.lambdas);
  rebuild(next.tagger, dev_counts.tagger, check_counts.tagger, m.vocab.pos_count(),
          m.tagger.lambdas);
  rebuild(next.parser, dev_counts.parser, check_counts.parser, m.vocab.action_count(),
          m.parser.lambdas);
  return next;
}

// Seeds the L2R predictor with the structure predictor's joint counts. The
// lambdas come along too: re-running EM on the identical check counts would
// reproduce them, and the copy makes the post-seed equality of the two
// components exact.
inline Slm seed_l2r(const Slm& m) {
  Slm next = m;
  next.l2r_predictor = m.predictor;
  return next;
}

// Position-wise emission counts for the L2R predictor: each surviving parse
// T_k contributes the event (w_{k+1} | heads of T_k) weighted by the
// standard mixture posterior, rho(W_k,T_k) * P_l2r(w_{k+1}|T_k) normalized
// over S_k. The structure search itself still runs on the structure
// predictor.
inline CountTable l2r_counts(const Slm& m, const std::vector<std::vector<WordId>>& corpus,
                             const BeamConfig& beam, std::size_t workers,
                             NBestStats* stats = nullptr) {
  struct Event {
    IdTuple ctx;
    WordId word;
    double weight;
  };
  std::vector<std::vector<Event>> events(corpus.size());
  std::vector<char> failed(corpus.size(), 0);
  parallel_for(corpus.size(), workers, [&](std::size_t si) {
    const std::vector<WordId>& ids = corpus[si];
    try {
      StackGrid grid(m, beam);
      for (std::size_t i = 1; i < ids.size(); ++i) {
        WordId target = ids[i];
        ParseSet s = grid.surviving_parses(grid.position());
        std::vector<double> w(s.entries.size());
        double norm = 0.0;
        for (std::size_t j = 0; j < s.entries.size(); ++j) {
          IdTuple ctx = head_context(s.entries[j].hyp->stack, m.vocab);
          w[j] = s.entries[j].rho * eval_word_prob(m, ctx, target);
          norm += w[j];
        }
        for (std::size_t j = 0; j < s.entries.size(); ++j)
          events[si].push_back(
              {head_context(s.entries[j].hyp->stack, m.vocab), target, w[j] / norm});
        if (i + 1 < ids.size()) grid.advance(target);
      }
    } catch (const SearchFailure&) {
      failed[si] = 1;
      events[si].clear();
    }
  });
  CountTable out(kPredictorOrder);
  for (std::size_t si = 0; si < corpus.size(); ++si) {
    if (failed[si]) {
      if (stats) ++stats->failures;
      continue;
    }
    for (const Event& e : events[si]) out.add(e.ctx, e.word, e.weight);
  }
  return out;
}

// One L2R iteration. Only the L2R predictor changes; predictor, tagger and
// parser tables are byte-identical before and after.
inline Slm l2r_pass_iteration(const Slm& m, const std::vector<std::vector<WordId>>& dev_corpus,
                              const std::vector<std::vector<WordId>>& check_corpus,
                              const TrainConfig& cfg, NBestStats* stats = nullptr) {
  if (!m.l2r_predictor) fail("l2r_pass_iteration: model has no seeded L2R predictor");
  CountTable dev = l2r_counts(m, dev_corpus, cfg.beam, cfg.workers, stats);
  CountTable check = l2r_counts(m, check_corpus, cfg.beam, cfg.workers, stats);
  Slm next = m;
  next.l2r_predictor->table = std::move(dev);
  next.l2r_predictor->outcome_vocab_size = m.vocab.word_count();
  next.l2r_predictor->lambdas =
      cfg.reestimate_lambdas
          ? detail::lambdas_for(next.l2r_predictor->table, m.vocab.word_count(), check, cfg.opts)
          : m.l2r_predictor->lambdas;
  return next;
}

}  // namespace synlm
