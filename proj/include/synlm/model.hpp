#pragma once

// The factored structured language model: WORD-PREDICTOR, TAGGER and PARSER
// components over exposed-head contexts, the optional L2R word predictor
// used for probability assignment, and the joint probability of a
// derivation. Contexts are nearest-first: the predictor and parser condition
// on (h_0.word, h_0.tag, h_{-1}.word, h_{-1}.tag), the tagger on
// (w_k, h_0.tag, h_{-1}.tag); back-off drops the most distant element first.

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "synlm/corpus.hpp"
#include "synlm/smoothing.hpp"
#include "synlm/transitions.hpp"
#include "synlm/util.hpp"
#include "synlm/vocab.hpp"

namespace synlm {

constexpr std::size_t kPredictorOrder = 4;
constexpr std::size_t kTaggerOrder = 3;
constexpr std::size_t kParserOrder = 4;

struct TraceNode {
  Move move;
  std::shared_ptr<const TraceNode> prev;
};

// A word-parse k-prefix under construction: exposed heads, the number of
// predictor and adjoin moves taken, the accumulated ln P(W_k,T_k), and a
// backpointer chain from which the derivation is recovered.
struct Hypothesis {
  HeadStack stack;
  std::uint32_t words_predicted = 0;
  std::uint32_t adjoin_count = 0;
  double logprob = 0.0;
  std::shared_ptr<const TraceNode> trace;

  Hypothesis extend(Move m) const {
    Hypothesis h = *this;
    h.trace = std::make_shared<const TraceNode>(TraceNode{m, trace});
    return h;
  }

  Derivation derivation(std::size_t sentence_len) const {
    Derivation d;
    d.sentence_len = sentence_len;
    for (const TraceNode* n = trace.get(); n; n = n->prev.get()) d.moves.push_back(n->move);
    std::reverse(d.moves.begin(), d.moves.end());
    return d;
  }
};

struct Slm {
  Vocab vocab;
  SmoothedModel predictor;  // order 4, outcomes = words
  SmoothedModel tagger;     // order 3, outcomes = POS tags
  SmoothedModel parser;     // order 4, outcomes = parser actions
  std::optional<SmoothedModel> l2r_predictor;
  double eos_epsilon = 1e-4;
  // Reduction mode: the parser takes only null transitions until </s>, so
  // structure degenerates to right-branching attachment at sentence end.
  bool right_branching_only = false;
};

// Untrained model over a given vocabulary; every component is the uniform
// ground of its outcome space.
inline Slm make_empty_slm(Vocab v, std::vector<double> edges = default_bucket_edges(),
                          double eos_epsilon = 1e-4) {
  Slm m;
  m.eos_epsilon = eos_epsilon;
  m.predictor = SmoothedModel{CountTable(kPredictorOrder),
                              LambdaBuckets::uniform(kPredictorOrder, edges), v.word_count()};
  m.tagger = SmoothedModel{CountTable(kTaggerOrder), LambdaBuckets::uniform(kTaggerOrder, edges),
                           v.pos_count()};
  m.parser = SmoothedModel{CountTable(kParserOrder), LambdaBuckets::uniform(kParserOrder, edges),
                           v.action_count()};
  m.vocab = std::move(v);
  return m;
}

inline Head pad_head(const Vocab& v) { return Head{v.bos_word, v.tag_of_pos(v.sb_pos)}; }

// (h_0.word, h_0.tag, h_{-1}.word, h_{-1}.tag); a stack of one real head is
// padded below with the sentence-start head, so both heads always exist.
inline IdTuple head_context(const HeadStack& s, const Vocab& v) {
  const Head& h0 = s.top();
  Head h1 = s.size() >= 2 ? s.second() : pad_head(v);
  return IdTuple{h0.word, h0.tag, h1.word, h1.tag};
}

inline IdTuple tagger_context(WordId w, const HeadStack& s, const Vocab& v) {
  const Head& h0 = s.top();
  Head h1 = s.size() >= 2 ? s.second() : pad_head(v);
  return IdTuple{w, h0.tag, h1.tag};
}

// Word probability with the halting floor: P(</s>|ctx) is raised to at least
// eps and the remaining mass rescaled, so the model stops with probability
// one while each step stays a proper distribution.
inline double floored_word_prob(const SmoothedModel& mdl, const IdTuple& ctx, WordId w,
                                WordId eos_word, double eps) {
  double pe = mdl.prob(ctx, eos_word);
  if (pe >= eps) return w == eos_word ? pe : mdl.prob(ctx, w);
  if (w == eos_word) return eps;
  return mdl.prob(ctx, w) * (1.0 - eps) / (1.0 - pe);
}

inline double predict_word_prob(const Slm& m, const Hypothesis& h, WordId w) {
  return floored_word_prob(m.predictor, head_context(h.stack, m.vocab), w, m.vocab.eos_word,
                           m.eos_epsilon);
}

// The component used for probability assignment in the causal mixture: the
// L2R predictor when present, else the structure predictor.
inline const SmoothedModel& assignment_predictor(const Slm& m) {
  return m.l2r_predictor ? *m.l2r_predictor : m.predictor;
}

inline double eval_word_prob(const Slm& m, const IdTuple& ctx, WordId w) {
  return floored_word_prob(assignment_predictor(m), ctx, w, m.vocab.eos_word, m.eos_epsilon);
}

inline double tag_prob(const Slm& m, const Hypothesis& h, WordId w, PosId t) {
  return m.tagger.prob(tagger_context(w, h.stack, m.vocab), t);
}

inline void legal_actions_into(const Slm& m, const HeadStack& s, std::vector<ParserAction>& out) {
  out.clear();
  switch (parser_regime(s, m.vocab.eos_word)) {
    case ParserRegime::forced_top:
      out.push_back(ParserAction::right(m.vocab.top_nt));
      return;
    case ParserRegime::forced_top_prime:
      out.push_back(ParserAction::right(m.vocab.top_prime_nt));
      return;
    case ParserRegime::forced_null:
      out.push_back(ParserAction::make_null());
      return;
    case ParserRegime::free_choice:
      out.push_back(ParserAction::make_null());
      if (!m.right_branching_only) {
        for (NtId n = 0; n < m.vocab.nt_count(); ++n) out.push_back(ParserAction::left(n));
        for (NtId n = 0; n < m.vocab.nt_count(); ++n) out.push_back(ParserAction::right(n));
      }
      return;
  }
}

inline std::vector<ParserAction> legal_actions(const Slm& m, const Hypothesis& h) {
  std::vector<ParserAction> out;
  legal_actions_into(m, h.stack, out);
  return out;
}

// Forced moves score exactly 0 or 1 per the complete-parse constraints; free
// moves take the smoothed probability, which already normalizes over the
// full action vocabulary (the legal set in a free state).
inline double parser_action_prob(const Slm& m, const Hypothesis& h, const ParserAction& a) {
  switch (parser_regime(h.stack, m.vocab.eos_word)) {
    case ParserRegime::forced_top:
      return a == ParserAction::right(m.vocab.top_nt) ? 1.0 : 0.0;
    case ParserRegime::forced_top_prime:
      return a == ParserAction::right(m.vocab.top_prime_nt) ? 1.0 : 0.0;
    case ParserRegime::forced_null:
      return a.is_null() ? 1.0 : 0.0;
    case ParserRegime::free_choice:
      if (m.right_branching_only) return a.is_null() ? 1.0 : 0.0;
      return m.parser.prob(head_context(h.stack, m.vocab),
                           action_id(a, m.vocab.nt_count()));
  }
  return 0.0;
}

inline bool action_is_legal(const Slm& m, const HeadStack& s, const ParserAction& a) {
  switch (parser_regime(s, m.vocab.eos_word)) {
    case ParserRegime::forced_top: return a == ParserAction::right(m.vocab.top_nt);
    case ParserRegime::forced_top_prime: return a == ParserAction::right(m.vocab.top_prime_nt);
    case ParserRegime::forced_null: return a.is_null();
    case ParserRegime::free_choice: return a.is_null() || !m.right_branching_only;
  }
  return false;
}

inline Hypothesis apply_action(const Slm& m, const Hypothesis& h, const ParserAction& a,
                               double p) {
  if (h.stack.size() < 2 || !action_is_legal(m, h.stack, a))
    fail("apply_action: illegal parser action");
  Hypothesis out = h.extend(Move::parse(action_id(a, m.vocab.nt_count())));
  if (p != 1.0) out.logprob += std::log(p);
  if (a.is_null()) return out;
  const Head& h0 = h.stack.top();
  const Head& h1 = h.stack.second();
  WordId headword = a.kind == ParserAction::Kind::adjoin_left ? h1.word : h0.word;
  out.stack = out.stack.pop2_push(Head{headword, m.vocab.tag_of_nt(a.nt)});
  out.adjoin_count += 1;
  return out;
}

// Pushes the newly predicted and tagged word as the new h_0. </s> takes the
// fixed tag SE with no tagger move.
inline Hypothesis shift(const Slm& m, const Hypothesis& h, WordId w, PosId t, double p_w,
                        double p_t) {
  Hypothesis out = h.extend(Move::predict(w));
  out.logprob += std::log(p_w);
  if (w == m.vocab.eos_word) {
    out.stack = out.stack.push(Head{w, m.vocab.tag_of_pos(m.vocab.se_pos)});
  } else {
    out = out.extend(Move::tag(t));
    if (p_t != 1.0) out.logprob += std::log(p_t);
    out.stack = out.stack.push(Head{w, m.vocab.tag_of_pos(t)});
  }
  out.words_predicted += 1;
  return out;
}

inline Hypothesis initial_hypothesis(const Vocab& v) {
  Hypothesis h;
  h.stack = HeadStack::initial(pad_head(v));
  return h;
}

// --- derivation replay -------------------------------------------------------

enum class Component : std::uint8_t { predictor, tagger, parser };

struct MoveEvent {
  Component component;
  IdTuple context;
  std::uint32_t outcome = 0;
  bool forced = false;  // probability fixed at 1 by the move grammar
};

// Replays a derivation through the transition system, emitting one event per
// probabilistic decision (forced parser moves are emitted with forced=true
// and carry no probability mass). Throws on malformed derivations.
template <typename Fn>
inline void replay_events(const Vocab& v, const Derivation& d, Fn&& fn) {
  HeadStack heads = HeadStack::initial(pad_head(v));
  enum class Expect { predict, tag, parse, done };
  Expect state = Expect::predict;
  WordId pending = 0;
  std::size_t predicted = 0;

  for (const Move& m : d.moves) {
    switch (m.kind) {
      case Move::Kind::predict: {
        if (state != Expect::predict) fail("derivation: unexpected predict move");
        fn(MoveEvent{Component::predictor, head_context(heads, v), m.id, false});
        ++predicted;
        pending = m.id;
        if (m.id == v.eos_word) {
          heads = heads.push(Head{m.id, v.tag_of_pos(v.se_pos)});
          state = Expect::parse;
        } else {
          state = Expect::tag;
        }
        break;
      }
      case Move::Kind::tag: {
        if (state != Expect::tag) fail("derivation: unexpected tag move");
        if (m.id >= v.pos_count()) fail("derivation: POS id out of range");
        fn(MoveEvent{Component::tagger, tagger_context(pending, heads, v), m.id, false});
        heads = heads.push(Head{pending, v.tag_of_pos(m.id)});
        state = Expect::parse;
        break;
      }
      case Move::Kind::parse: {
        if (state != Expect::parse) fail("derivation: unexpected parse move");
        ParserAction a = action_from_id(m.id, v.nt_count());
        ParserRegime regime = parser_regime(heads, v.eos_word);
        bool forced = regime != ParserRegime::free_choice;
        if (forced) {
          bool ok = (regime == ParserRegime::forced_null && a.is_null()) ||
                    (regime == ParserRegime::forced_top_prime &&
                     a == ParserAction::right(v.top_prime_nt)) ||
                    (regime == ParserRegime::forced_top && a == ParserAction::right(v.top_nt));
          if (!ok) fail("derivation: move violates a forced parser rule");
        }
        fn(MoveEvent{Component::parser, head_context(heads, v), m.id, forced});
        if (a.is_null()) {
          state = Expect::predict;
          break;
        }
        const Head& h0 = heads.top();
        const Head& h1 = heads.second();
        WordId headword = a.kind == ParserAction::Kind::adjoin_left ? h1.word : h0.word;
        heads = heads.pop2_push(Head{headword, v.tag_of_nt(a.nt)});
        if (heads.size() == 1) {
          if (heads.top().word != v.eos_word) fail("derivation: bad final head");
          state = Expect::done;
        }
        break;
      }
    }
    if (state == Expect::done && &m != &d.moves.back()) fail("derivation: moves after completion");
  }
  if (state != Expect::done) fail("derivation: incomplete");
  if (predicted != d.sentence_len + 1) fail("derivation: sentence_len mismatch");
}

// ln P(W,T): the sum over the derivation's probabilistic moves, Eq.-(7)
// factorization by construction. Illegal free moves under a constrained
// parser yield -inf.
inline double joint_logprob(const Slm& m, const Derivation& d) {
  double lp = 0.0;
  replay_events(m.vocab, d, [&](const MoveEvent& e) {
    if (e.forced) return;
    switch (e.component) {
      case Component::predictor:
        lp += std::log(
            floored_word_prob(m.predictor, e.context, e.outcome, m.vocab.eos_word, m.eos_epsilon));
        break;
      case Component::tagger:
        lp += std::log(m.tagger.prob(e.context, e.outcome));
        break;
      case Component::parser:
        if (m.right_branching_only) {
          if (e.outcome != 0) lp = -std::numeric_limits<double>::infinity();
        } else {
          lp += std::log(m.parser.prob(e.context, e.outcome));
        }
        break;
    }
  });
  return lp;
}

// --- serialization -----------------------------------------------------------

inline std::string serialize_slm(const Slm& m) {
  std::string s = "synlm-slm v1\n";
  s += "vocab_hash " + std::to_string(vocab_hash(m.vocab)) + "\n";
  s += "eos_epsilon " + fmt_double(m.eos_epsilon) + "\n";
  s += std::string("parser_mode ") + (m.right_branching_only ? "null_until_eos" : "full") + "\n";
  s += "components " + std::to_string(m.l2r_predictor ? 4 : 3) + "\n";
  write_model_block(s, "predictor", m.predictor);
  write_model_block(s, "tagger", m.tagger);
  write_model_block(s, "parser", m.parser);
  if (m.l2r_predictor) write_model_block(s, "l2r", *m.l2r_predictor);
  return s;
}

inline Slm parse_slm(const std::string& text, Vocab vocab) {
  std::istringstream in(text);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  std::size_t pos = 0;
  auto next = [&]() -> std::vector<std::string> {
    if (pos >= lines.size()) fail("slm file: unexpected end");
    return split_ws(lines[pos++]);
  };
  if (pos >= lines.size() || trim(lines[pos++]) != "synlm-slm v1") fail("slm file: bad header");
  std::vector<std::string> t = next();
  if (t.size() != 2 || t[0] != "vocab_hash") fail("slm file: expected vocab_hash");
  if (parse_u64(t[1]) != vocab_hash(vocab)) fail("slm file: vocab hash mismatch");
  Slm m;
  m.vocab = std::move(vocab);
  t = next();
  if (t.size() != 2 || t[0] != "eos_epsilon") fail("slm file: expected eos_epsilon");
  m.eos_epsilon = parse_double(t[1]);
  t = next();
  if (t.size() != 2 || t[0] != "parser_mode") fail("slm file: expected parser_mode");
  m.right_branching_only = t[1] == "null_until_eos";
  t = next();
  if (t.size() != 2 || t[0] != "components") fail("slm file: expected components");
  std::size_t n_components = parse_u64(t[1]);
  for (std::size_t i = 0; i < n_components; ++i) {
    std::string name;
    SmoothedModel mdl = read_model_block(lines, pos, &name);
    if (name == "predictor") m.predictor = std::move(mdl);
    else if (name == "tagger") m.tagger = std::move(mdl);
    else if (name == "parser") m.parser = std::move(mdl);
    else if (name == "l2r") m.l2r_predictor = std::move(mdl);
    else fail("slm file: unknown component '" + name + "'");
  }
  return m;
}

}  // namespace synlm
