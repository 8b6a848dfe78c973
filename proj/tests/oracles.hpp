#pragma once

// Test-only oracles, implemented independently of the library code paths
// they check: a naive deleted-interpolation evaluator over flat event lists
// (lower-order statistics recomputed by brute-force marginal sums at query
// time), a plain-vector transition simulator, and an exhaustive enumerator
// of complete parses.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <vector>

namespace oracle {

using Ctx = std::vector<std::uint32_t>;

struct Event {
  Ctx ctx;  // full order, nearest element first
  std::uint32_t outcome;
  double weight;
};

struct Events {
  std::size_t order = 0;
  std::vector<Event> list;

  void add(Ctx ctx, std::uint32_t outcome, double weight) {
    list.push_back({std::move(ctx), outcome, weight});
  }
};

inline bool has_prefix(const Ctx& ctx, const Ctx& prefix) {
  for (std::size_t i = 0; i < prefix.size(); ++i)
    if (ctx[i] != prefix[i]) return false;
  return true;
}

inline double count_of(const Events& e, const Ctx& prefix, std::optional<std::uint32_t> outcome) {
  double total = 0;
  for (const Event& ev : e.list) {
    if (!has_prefix(ev.ctx, prefix)) continue;
    if (outcome && ev.outcome != *outcome) continue;
    total += ev.weight;
  }
  return total;
}

struct Lambdas {
  std::vector<double> edges;                // ascending, first 0
  std::vector<std::vector<double>> value;   // [order][bucket]

  std::size_t bucket(double count) const {
    std::size_t b = 0;
    for (std::size_t i = 1; i < edges.size(); ++i)
      if (count >= edges[i]) b = i;
      else break;
    return b;
  }
};

// Top-down recursion of the interpolation formula; unseen contexts back off
// with weight one.
inline double prob(const Events& e, const Lambdas& lb, std::size_t vocab_size, const Ctx& ctx,
                   std::uint32_t outcome, std::size_t order_k) {
  if (order_k == static_cast<std::size_t>(-1)) return 1.0 / static_cast<double>(vocab_size);
  Ctx prefix(ctx.begin(), ctx.begin() + order_k);
  double below = prob(e, lb, vocab_size, ctx, outcome, order_k - 1);
  double total = count_of(e, prefix, std::nullopt);
  if (total <= 0) return below;
  double f = count_of(e, prefix, outcome) / total;
  double lam = lb.value[order_k][lb.bucket(total)];
  return lam * below + (1.0 - lam) * f;
}

inline double prob(const Events& e, const Lambdas& lb, std::size_t vocab_size, const Ctx& ctx,
                   std::uint32_t outcome) {
  return prob(e, lb, vocab_size, ctx, outcome, e.order);
}

// --- transition simulator ----------------------------------------------------

struct OHead {
  std::uint32_t word, tag;
};

struct Model {
  // id layout mirrors the artifact's conventions so fixtures can be shared:
  // pos ids then nt ids in one tag space; action 0 = null, 1..N adjoin-left,
  // N+1..2N adjoin-right.
  std::size_t n_words = 0, n_pos = 0, n_nt = 0;
  std::uint32_t bos = 0, eos = 1;
  std::uint32_t sb = 0, se = 1;
  std::uint32_t top = 0, top_prime = 1;
  double eos_eps = 1e-4;
  Events predictor, tagger, parser;  // orders 4, 3, 4
  Lambdas pred_lb, tag_lb, parse_lb;

  std::uint32_t pos_tag(std::uint32_t p) const { return p; }
  std::uint32_t nt_tag(std::uint32_t n) const { return static_cast<std::uint32_t>(n_pos + n); }

  Ctx head_ctx(const std::vector<OHead>& stack) const {
    OHead h0 = stack.back();
    OHead h1 = stack.size() >= 2 ? stack[stack.size() - 2] : OHead{bos, pos_tag(sb)};
    return {h0.word, h0.tag, h1.word, h1.tag};
  }

  double word_prob(const std::vector<OHead>& stack, std::uint32_t w) const {
    Ctx ctx = head_ctx(stack);
    double pe = prob(predictor, pred_lb, n_words, ctx, eos);
    if (pe >= eos_eps) return w == eos ? pe : prob(predictor, pred_lb, n_words, ctx, w);
    if (w == eos) return eos_eps;
    return prob(predictor, pred_lb, n_words, ctx, w) * (1.0 - eos_eps) / (1.0 - pe);
  }

  double tag_prob_of(const std::vector<OHead>& stack, std::uint32_t w, std::uint32_t t) const {
    OHead h0 = stack.back();
    OHead h1 = stack.size() >= 2 ? stack[stack.size() - 2] : OHead{bos, pos_tag(sb)};
    return prob(tagger, tag_lb, n_pos, Ctx{w, h0.tag, h1.tag}, t);
  }

  double action_prob(const std::vector<OHead>& stack, std::uint32_t action) const {
    return prob(parser, parse_lb, 2 * n_nt + 1, head_ctx(stack), action);
  }
};

struct OMove {
  enum Kind { predict, tag, parse } kind;
  std::uint32_t id;

  friend bool operator==(const OMove& a, const OMove& b) = default;
  friend auto operator<=>(const OMove& a, const OMove& b) = default;
};

struct Parse {
  std::vector<OMove> moves;
  double logprob;
};

namespace detail {

// Expands parser choices recursively after a shift, then hands off to
// `on_ready` (which either predicts the next word or finishes).
template <typename Ready, typename Done>
inline void parser_phase(const Model& m, std::vector<OHead>& stack, std::vector<OMove>& moves,
                         double lp, const Ready& on_ready, const Done& on_done) {
  OHead h0 = stack.back();
  if (h0.word == m.eos) {  // completion cascade, probability one
    if (stack.size() == 2) {
      OHead popped0 = stack.back();
      OHead popped1 = stack[stack.size() - 2];
      stack.pop_back();
      stack.back() = OHead{m.eos, m.nt_tag(m.top)};
      moves.push_back({OMove::parse, static_cast<std::uint32_t>(1 + m.n_nt + m.top)});
      on_done(moves, lp);
      moves.pop_back();
      stack.back() = popped1;
      stack.push_back(popped0);
      return;
    }
    OHead popped0 = stack.back();
    OHead popped1 = stack[stack.size() - 2];
    stack.pop_back();
    stack.back() = OHead{m.eos, m.nt_tag(m.top_prime)};
    moves.push_back({OMove::parse, static_cast<std::uint32_t>(1 + m.n_nt + m.top_prime)});
    parser_phase(m, stack, moves, lp, on_ready, on_done);
    moves.pop_back();
    stack.back() = popped1;
    stack.push_back(popped0);
    return;
  }
  if (stack.size() == 2) {  // null forced before two real heads exist
    moves.push_back({OMove::parse, 0});
    on_ready(moves, lp);
    moves.pop_back();
    return;
  }
  // free choice: null plus every adjoin
  double p_null = m.action_prob(stack, 0);
  moves.push_back({OMove::parse, 0});
  on_ready(moves, lp + std::log(p_null));
  moves.pop_back();
  for (std::uint32_t nt = 0; nt < m.n_nt; ++nt) {
    for (bool left : {true, false}) {
      std::uint32_t action = left ? 1 + nt : static_cast<std::uint32_t>(1 + m.n_nt + nt);
      double p = m.action_prob(stack, action);
      OHead popped0 = stack.back();
      OHead popped1 = stack[stack.size() - 2];
      std::uint32_t headword = left ? popped1.word : popped0.word;
      stack.pop_back();
      stack.back() = OHead{headword, m.nt_tag(nt)};
      moves.push_back({OMove::parse, action});
      parser_phase(m, stack, moves, lp + std::log(p), on_ready, on_done);
      moves.pop_back();
      stack.back() = popped1;
      stack.push_back(popped0);
    }
  }
}

}  // namespace detail

// Every complete parse of the given encoded sentence (with <s>/</s>), with
// exact log-probabilities, in depth-first expansion order.
inline void enumerate_parses(const Model& m, const std::vector<std::uint32_t>& ids,
                             const std::function<void(const Parse&)>& emit) {
  std::vector<OHead> stack{{m.bos, m.pos_tag(m.sb)}};
  std::vector<OMove> moves;

  // recursive lambdas via explicit std::function
  std::function<void(std::size_t, std::vector<OMove>&, double)> predict_at;
  predict_at = [&](std::size_t next_idx, std::vector<OMove>& mv, double lp) {
    std::uint32_t w = ids[next_idx];
    double pw = m.word_prob(stack, w);
    mv.push_back({OMove::predict, w});
    if (w == m.eos) {
      stack.push_back({m.eos, m.pos_tag(m.se)});
      detail::parser_phase(
          m, stack, mv, lp + std::log(pw),
          [](std::vector<OMove>&, double) {},  // no further predictions
          [&](std::vector<OMove>& done_moves, double done_lp) {
            emit(Parse{done_moves, done_lp});
          });
      stack.pop_back();
    } else {
      for (std::uint32_t t = 0; t < m.n_pos; ++t) {
        double pt = m.tag_prob_of(stack, w, t);
        mv.push_back({OMove::tag, t});
        stack.push_back({w, m.pos_tag(t)});
        detail::parser_phase(
            m, stack, mv, lp + std::log(pw) + std::log(pt),
            [&](std::vector<OMove>& ready_moves, double ready_lp) {
              predict_at(next_idx + 1, ready_moves, ready_lp);
            },
            [](std::vector<OMove>&, double) {});
        stack.pop_back();
        mv.pop_back();
      }
    }
    mv.pop_back();
  };
  predict_at(1, moves, 0.0);
}

// Exhaustive generation: every complete parse of every word string of up to
// max_len real words (any predictable word may occur mid-sentence). Returns
// the total probability mass, checking the halting property.
inline double total_mass(const Model& m, std::size_t max_len,
                         const std::function<void(const Parse&)>& emit = nullptr) {
  std::vector<OHead> stack{{m.bos, m.pos_tag(m.sb)}};
  std::vector<OMove> moves;
  double mass = 0.0;

  std::function<void(std::size_t, std::vector<OMove>&, double)> predict_any;
  predict_any = [&](std::size_t words_so_far, std::vector<OMove>& mv, double lp) {
    for (std::uint32_t w = 0; w < m.n_words; ++w) {
      if (w != m.eos && words_so_far >= max_len) continue;
      double pw = m.word_prob(stack, w);
      mv.push_back({OMove::predict, w});
      if (w == m.eos) {
        stack.push_back({m.eos, m.pos_tag(m.se)});
        detail::parser_phase(m, stack, mv, lp + std::log(pw),
                             [](std::vector<OMove>&, double) {},
                             [&](std::vector<OMove>& done_moves, double done_lp) {
                               mass += std::exp(done_lp);
                               if (emit) emit(Parse{done_moves, done_lp});
                             });
        stack.pop_back();
      } else {
        for (std::uint32_t t = 0; t < m.n_pos; ++t) {
          double pt = m.tag_prob_of(stack, w, t);
          mv.push_back({OMove::tag, t});
          stack.push_back({w, m.pos_tag(t)});
          detail::parser_phase(m, stack, mv, lp + std::log(pw) + std::log(pt),
                               [&](std::vector<OMove>& ready_moves, double ready_lp) {
                                 predict_any(words_so_far + 1, ready_moves, ready_lp);
                               },
                               [](std::vector<OMove>&, double) {});
          stack.pop_back();
          mv.pop_back();
        }
      }
      mv.pop_back();
    }
  };
  predict_any(0, moves, 0.0);
  return mass;
}

}  // namespace oracle
