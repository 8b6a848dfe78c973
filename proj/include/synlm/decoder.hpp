#pragma once

// Synchronous multi-stack search over word-parse prefixes. Hypotheses are
// stacked by (words predicted, adjoins performed); within a position the
// adjoin cascade settles cell by cell (each cell is pruned once all of its
// arrivals are in), and only then is the next word shifted. That order makes
// the surviving set S_k available strictly before w_{k+1} is read, which the
// causal probability assignment depends on.

#include <algorithm>
#include <cmath>
#include <vector>

#include "synlm/model.hpp"
#include "synlm/util.hpp"

namespace synlm {

struct BeamConfig {
  std::size_t max_stack_depth = 100;
  double logprob_threshold = 6.9;  // ~ probability ratio 1000

  static BeamConfig unbounded() {
    return BeamConfig{std::numeric_limits<std::size_t>::max(),
                      std::numeric_limits<double>::infinity()};
  }
};

class SearchFailure : public Error {
 public:
  explicit SearchFailure(const std::string& msg) : Error("search-failure: " + msg) {}
};

// Ranks by logprob descending, truncates to the depth, and drops entries
// more than the threshold below the top. The sort is stable so equal scores
// keep their insertion order.
inline void prune(std::vector<Hypothesis>& stack, const BeamConfig& cfg) {
  if (cfg.max_stack_depth < 1) fail("BeamConfig: max_stack_depth must be >= 1");
  std::stable_sort(stack.begin(), stack.end(),
                   [](const Hypothesis& a, const Hypothesis& b) { return a.logprob > b.logprob; });
  if (stack.size() > cfg.max_stack_depth) stack.resize(cfg.max_stack_depth);
  if (!stack.empty() && std::isfinite(cfg.logprob_threshold)) {
    double cut = stack.front().logprob - cfg.logprob_threshold;
    while (!stack.empty() && stack.back().logprob < cut) stack.pop_back();
  }
}

struct ParseSet {
  struct Entry {
    const Hypothesis* hyp;
    double rho;
  };
  std::vector<Entry> entries;
};

class StackGrid {
 public:
  StackGrid(const Slm& m, BeamConfig cfg) : m_(&m), cfg_(cfg) {
    cells_.resize(1);
    cells_[0].push_back(initial_hypothesis(m.vocab));
    settled_ = true;  // no parser move precedes the first prediction
  }

  std::uint32_t position() const { return pos_; }

  // All surviving word-parse k-prefixes with their normalized posteriors
  // (Eq. 15 weights), computed over the settled stacks at the current
  // position. Probabilities are reconstructed with max-shifted
  // exponentiation.
  ParseSet surviving_parses(std::uint32_t k) {
    if (k != pos_) fail("surviving_parses: grid is at position " + std::to_string(pos_));
    settle();
    ParseSet out;
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& cell : cells_)
      for (const Hypothesis& h : cell) best = std::max(best, h.logprob);
    double norm = 0.0;
    for (const auto& cell : cells_)
      for (const Hypothesis& h : cell) {
        double w = std::exp(h.logprob - best);
        out.entries.push_back({&h, w});
        norm += w;
      }
    if (out.entries.empty()) throw SearchFailure("no surviving parses at position " + std::to_string(pos_));
    for (auto& e : out.entries) e.rho /= norm;
    return out;
  }

  const std::vector<std::vector<Hypothesis>>& cells() {
    settle();
    return cells_;
  }

  // Shifts the next word into every hypothesis that may take a null
  // transition, branching over all POS tags (</s> takes SE with no tagger
  // move). Destination stacks are buffered and pruned when the new position
  // settles, once adjoin arrivals are in as well.
  void advance(WordId next_word) {
    settle();
    std::vector<std::vector<Hypothesis>> next(cells_.size());
    bool eos = next_word == m_->vocab.eos_word;
    for (std::size_t a = 0; a < cells_.size(); ++a) {
      for (const Hypothesis& h : cells_[a]) {
        Hypothesis ready;
        if (h.words_predicted == 0 && h.stack.size() == 1) {
          ready = h;  // nothing precedes the first prediction
        } else {
          double p_null = null_prob(h);
          if (p_null <= 0.0) continue;  // inside the completion cascade
          ready = apply_action(*m_, h, ParserAction::make_null(), p_null);
        }
        double p_w = predict_word_prob(*m_, ready, next_word);
        if (eos) {
          next[a].push_back(shift(*m_, ready, next_word, m_->vocab.se_pos, p_w, 1.0));
        } else {
          for (PosId t = 0; t < m_->vocab.pos_count(); ++t)
            next[a].push_back(shift(*m_, ready, next_word, t, p_w, tag_prob(*m_, ready, next_word, t)));
        }
      }
    }
    cells_ = std::move(next);
    ++pos_;
    settled_ = false;
    last_was_eos_ = eos;
  }

  // Completed parses; callable once the final </s> has been advanced. After
  // settling, every complete parse sits in the cell whose adjoin count has
  // reduced the stack to the single (</s>, TOP) head.
  const std::vector<Hypothesis>& finish() {
    if (!last_was_eos_) fail("finish: last advanced word was not </s>");
    settle();
    for (std::size_t a = cells_.size(); a-- > 0;) {
      if (!cells_[a].empty()) {
        if (cells_[a].front().stack.size() != 1)
          throw SearchFailure("completion did not reduce to a single head");
        return cells_[a];
      }
    }
    throw SearchFailure("no completed parses");
  }

 private:
  // Parser cascade at the current position: cell a is merged (predict
  // arrivals first, then adjoin arrivals — a stable, deterministic order),
  // pruned once all arrivals are in, then expanded; its adjoins land in cell
  // a+1. An adjoin consumes one stack element, so a never exceeds the number
  // of words predicted, which bounds the loop.
  void settle() {
    if (settled_) return;
    std::size_t max_cells = static_cast<std::size_t>(pos_) + 1;
    std::vector<std::vector<Hypothesis>> settled(max_cells);
    std::vector<Hypothesis> adjoins;  // arrivals into the next cell
    std::vector<ParserAction> actions;
    bool any = false;
    for (std::size_t a = 0; a < max_cells; ++a) {
      std::vector<Hypothesis> cell;
      if (a < cells_.size()) cell = std::move(cells_[a]);
      cell.insert(cell.end(), std::make_move_iterator(adjoins.begin()),
                  std::make_move_iterator(adjoins.end()));
      adjoins.clear();
      prune(cell, cfg_);
      for (const Hypothesis& h : cell) {
        if (h.stack.size() < 2) continue;  // completed parse, no parser move left
        legal_actions_into(*m_, h.stack, actions);
        for (const ParserAction& act : actions) {
          if (act.is_null()) continue;
          adjoins.push_back(apply_action(*m_, h, act, parser_action_prob(*m_, h, act)));
        }
      }
      any = any || !cell.empty();
      settled[a] = std::move(cell);
    }
    cells_ = std::move(settled);
    while (!cells_.empty() && cells_.back().empty()) cells_.pop_back();
    settled_ = true;
    if (!any) throw SearchFailure("all stacks empty after pruning");
  }

  double null_prob(const Hypothesis& h) const {
    switch (parser_regime(h.stack, m_->vocab.eos_word)) {
      case ParserRegime::forced_null: return 1.0;
      case ParserRegime::free_choice:
        if (m_->right_branching_only) return 1.0;
        return m_->parser.prob(head_context(h.stack, m_->vocab), 0);
      default: return 0.0;
    }
  }

  const Slm* m_;
  BeamConfig cfg_;
  std::vector<std::vector<Hypothesis>> cells_;  // index = adjoin count at the current position
  std::uint32_t pos_ = 0;
  bool settled_ = false;
  bool last_was_eos_ = false;
};

struct ScoredParse {
  Derivation derivation;
  double logprob = 0.0;
  double rho = 0.0;
};

namespace detail {

inline void check_encoded(const std::vector<WordId>& sentence, const Vocab& v) {
  if (sentence.size() < 2 || sentence.front() != v.bos_word || sentence.back() != v.eos_word)
    fail("decoder: sentence must be encoded with <s> and </s>");
  for (std::size_t i = 1; i + 1 < sentence.size(); ++i)
    if (sentence[i] == v.eos_word) fail("decoder: </s> inside the sentence");
}

inline const std::vector<Hypothesis>& decode_to_completion(StackGrid& grid,
                                                           const std::vector<WordId>& sentence,
                                                           const Vocab& v) {
  check_encoded(sentence, v);
  for (std::size_t i = 1; i < sentence.size(); ++i) grid.advance(sentence[i]);
  return grid.finish();
}

}  // namespace detail

// All completed parses that survived the beams, posteriors normalized over
// the set, best first.
inline std::vector<ScoredParse> nbest_parses(const Slm& m, const std::vector<WordId>& sentence,
                                             const BeamConfig& cfg) {
  StackGrid grid(m, cfg);
  const std::vector<Hypothesis>& done = detail::decode_to_completion(grid, sentence, m.vocab);
  std::size_t n_words = sentence.size() - 2;
  double best = -std::numeric_limits<double>::infinity();
  for (const Hypothesis& h : done) best = std::max(best, h.logprob);
  double norm = 0.0;
  std::vector<ScoredParse> out;
  out.reserve(done.size());
  for (const Hypothesis& h : done) {
    double w = std::exp(h.logprob - best);
    norm += w;
    out.push_back({h.derivation(n_words), h.logprob, w});
  }
  for (ScoredParse& p : out) p.rho /= norm;
  return out;
}

inline ScoredParse best_parse(const Slm& m, const std::vector<WordId>& sentence,
                              const BeamConfig& cfg) {
  StackGrid grid(m, cfg);
  const std::vector<Hypothesis>& done = detail::decode_to_completion(grid, sentence, m.vocab);
  const Hypothesis* win = &done.front();  // cells are pruned, hence sorted, ties by insertion
  ScoredParse out;
  out.derivation = win->derivation(sentence.size() - 2);
  out.logprob = win->logprob;
  out.rho = 1.0;
  return out;
}

}  // namespace synlm
