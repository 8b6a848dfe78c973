#pragma once

// Shared test fixtures: a small hand-written treebank, direct vocabulary
// builders, model builders over explicit event lists (shared with the
// oracles), and a deterministic sampler for synthetic corpora.

#include <filesystem>
#include <random>
#include <string>
#include <tuple>
#include <vector>

#include "oracles.hpp"
#include "synlm/synlm.hpp"

namespace fixtures {

using namespace synlm;

inline const char* kTreebankDev = R"((S (NP (DT the) (NN dog)) (VP (VB barks)))
(S (NP (DT the) (NN cat)) (VP (VB sleeps)))
(S (NP (DT a) (NN dog)) (VP (VB runs) (ADVP (RB fast))))
(S (NP (DT the) (NN bird)) (VP (VB sings) (NP (DT a) (NN song))))
(S (NP (NN dogs)) (VP (VB bark)))
(S (NP (DT the) (NN dog)) (VP (VB sees) (NP (DT the) (NN cat))))
(S (NP (DT a) (NN cat)) (VP (VB sleeps) (PP (IN on) (NP (DT the) (NN mat)))))
(S (NP (DT the) (NN man)) (VP (VB walks) (PP (IN to) (NP (DT the) (NN park)))))
(S (NP (DT a) (NN bird)) (VP (VB sees) (NP (DT a) (NN dog))))
(S (NP (DT the) (NN cat)) (VP (VB runs)))
)";

inline const char* kTreebankCheck = R"((S (NP (DT a) (NN man)) (VP (VB barks)))
(S (NP (DT the) (NN dog)) (VP (VB sleeps) (ADVP (RB fast))))
(S (NP (DT the) (NN song)) (VP (VB runs)))
(S (NP (NN cats)) (VP (VB see) (NP (DT the) (NN bird))))
)";

inline const char* kHeadRules = R"(S right-to-left VP
NP right-to-left NN NNS
VP left-to-right VB VBZ
PP left-to-right IN
* right
)";

inline std::vector<Tree> dev_trees() { return parse_treebank(kTreebankDev); }
inline std::vector<Tree> check_trees() { return parse_treebank(kTreebankCheck); }
inline HeadRules fixture_rules() { return HeadRules::parse(kHeadRules); }

// Vocabulary with n_words real words (w0, w1, ...), n_pos real POS tags
// (X0, ...) on top of SB/SE, and n_nt real NT tags (N0, ...) on top of
// TOP/TOP'.
inline Vocab tiny_vocab(std::size_t n_words, std::size_t n_pos, std::size_t n_nt) {
  Vocab v;
  auto add = [](std::vector<std::string>& names, auto& ids, const std::string& s) {
    ids.emplace(s, static_cast<std::uint32_t>(names.size()));
    names.push_back(s);
  };
  add(v.words, v.word_ids, kBos);
  add(v.words, v.word_ids, kEos);
  add(v.words, v.word_ids, kUnk);
  for (std::size_t i = 0; i < n_words; ++i) add(v.words, v.word_ids, "w" + std::to_string(i));
  add(v.pos, v.pos_ids, kSb);
  add(v.pos, v.pos_ids, kSe);
  for (std::size_t i = 0; i < n_pos; ++i) add(v.pos, v.pos_ids, "X" + std::to_string(i));
  add(v.nts, v.nt_ids, kTop);
  add(v.nts, v.nt_ids, kTopPrime);
  for (std::size_t i = 0; i < n_nt; ++i) add(v.nts, v.nt_ids, "N" + std::to_string(i));
  v.bos_word = 0;
  v.eos_word = 1;
  v.unk_word = 2;
  v.sb_pos = 0;
  v.se_pos = 1;
  v.top_nt = 0;
  v.top_prime_nt = 1;
  return v;
}

// The single-tag-type reduction: POS and NT vocabularies mapped to one type
// each (SB = SE = "T", TOP = TOP' = "N"), so the tagger is deterministic and
// the completion cascade uses the lone NT.
inline Vocab collapsed_vocab(std::size_t n_words) {
  Vocab v;
  auto add = [](std::vector<std::string>& names, auto& ids, const std::string& s) {
    ids.emplace(s, static_cast<std::uint32_t>(names.size()));
    names.push_back(s);
  };
  add(v.words, v.word_ids, kBos);
  add(v.words, v.word_ids, kEos);
  add(v.words, v.word_ids, kUnk);
  for (std::size_t i = 0; i < n_words; ++i) add(v.words, v.word_ids, "w" + std::to_string(i));
  add(v.pos, v.pos_ids, "T");
  add(v.nts, v.nt_ids, "N");
  v.bos_word = 0;
  v.eos_word = 1;
  v.unk_word = 2;
  v.sb_pos = 0;
  v.se_pos = 0;
  v.top_nt = 0;
  v.top_prime_nt = 0;
  return v;
}

using EventList = std::vector<std::tuple<std::vector<std::uint32_t>, std::uint32_t, double>>;

struct FixtureEvents {
  EventList predictor;  // contexts of length 4
  EventList tagger;     // contexts of length 3
  EventList parser;     // contexts of length 4
};

inline IdTuple to_tuple(const std::vector<std::uint32_t>& xs) {
  IdTuple t;
  for (auto x : xs) t.push_back(x);
  return t;
}

inline CountTable table_from(const EventList& events, std::size_t order) {
  CountTable t(order);
  for (const auto& [ctx, y, w] : events) t.add(to_tuple(ctx), y, w);
  return t;
}

inline oracle::Events oracle_events_from(const EventList& events, std::size_t order) {
  oracle::Events e;
  e.order = order;
  for (const auto& [ctx, y, w] : events) e.add(ctx, y, w);
  return e;
}

inline Slm slm_from_events(const Vocab& v, const FixtureEvents& ev, double lambda_value,
                           double eos_epsilon = 1e-4,
                           std::vector<double> edges = default_bucket_edges()) {
  Slm m = make_empty_slm(v, edges, eos_epsilon);
  m.predictor.table = table_from(ev.predictor, kPredictorOrder);
  m.tagger.table = table_from(ev.tagger, kTaggerOrder);
  m.parser.table = table_from(ev.parser, kParserOrder);
  m.predictor.lambdas = LambdaBuckets::uniform(kPredictorOrder, edges, lambda_value);
  m.tagger.lambdas = LambdaBuckets::uniform(kTaggerOrder, edges, lambda_value);
  m.parser.lambdas = LambdaBuckets::uniform(kParserOrder, edges, lambda_value);
  return m;
}

inline oracle::Lambdas oracle_lambdas_from(const LambdaBuckets& lb) {
  return oracle::Lambdas{lb.edges, lb.lambda};
}

inline oracle::Model oracle_from_slm(const Slm& m, const FixtureEvents& ev) {
  oracle::Model om;
  om.n_words = m.vocab.word_count();
  om.n_pos = m.vocab.pos_count();
  om.n_nt = m.vocab.nt_count();
  om.bos = m.vocab.bos_word;
  om.eos = m.vocab.eos_word;
  om.sb = m.vocab.sb_pos;
  om.se = m.vocab.se_pos;
  om.top = m.vocab.top_nt;
  om.top_prime = m.vocab.top_prime_nt;
  om.eos_eps = m.eos_epsilon;
  om.predictor = oracle_events_from(ev.predictor, kPredictorOrder);
  om.tagger = oracle_events_from(ev.tagger, kTaggerOrder);
  om.parser = oracle_events_from(ev.parser, kParserOrder);
  om.pred_lb = oracle_lambdas_from(m.predictor.lambdas);
  om.tag_lb = oracle_lambdas_from(m.tagger.lambdas);
  om.parse_lb = oracle_lambdas_from(m.parser.lambdas);
  return om;
}

// Deterministic pseudo-random id/weight source for patterned fixture counts.
struct Lcg {
  std::uint64_t state;
  explicit Lcg(std::uint64_t seed) : state(seed) {}
  std::uint32_t next(std::uint32_t bound) {
    state = state * 6364136223846793005ull + 1442695040888963407ull;
    return static_cast<std::uint32_t>((state >> 33) % bound);
  }
  double next_weight() { return 1.0 + next(16); }
};

// Patterned counts over the reachable context space: asymmetric enough that
// derivation scores are generically distinct.
inline FixtureEvents patterned_events(const Vocab& v, std::size_t n_events, std::uint64_t seed) {
  FixtureEvents ev;
  Lcg lcg(seed);
  auto word = [&]() { return lcg.next(static_cast<std::uint32_t>(v.word_count())); };
  auto tag = [&]() { return lcg.next(static_cast<std::uint32_t>(v.tag_count())); };
  auto pos = [&]() { return lcg.next(static_cast<std::uint32_t>(v.pos_count())); };
  auto action = [&]() { return lcg.next(static_cast<std::uint32_t>(v.action_count())); };
  for (std::size_t i = 0; i < n_events; ++i) {
    ev.predictor.push_back({{word(), tag(), word(), tag()}, word(), lcg.next_weight()});
    ev.tagger.push_back({{word(), tag(), tag()}, pos(), lcg.next_weight()});
    ev.parser.push_back({{word(), tag(), word(), tag()}, action(), lcg.next_weight()});
  }
  return ev;
}

// --- deterministic sampling from a model ------------------------------------

struct Sampler {
  std::mt19937 rng;
  explicit Sampler(std::uint32_t seed) : rng(seed) {}

  double next_u() { return (static_cast<double>(rng()) + 0.5) * (1.0 / 4294967296.0); }

  std::size_t pick(const std::vector<double>& probs) {
    double u = next_u();
    double acc = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
      acc += probs[i];
      if (u < acc) return i;
    }
    return probs.size() - 1;
  }
};

// Generates one sentence (encoded, with <s> and </s>) by running the model
// generatively. Returns an empty optional if the sentence exceeds max_len.
inline std::optional<std::vector<WordId>> sample_sentence(const Slm& m, Sampler& s,
                                                          std::size_t max_len) {
  Hypothesis h = initial_hypothesis(m.vocab);
  std::vector<WordId> words{m.vocab.bos_word};
  std::vector<double> probs;
  for (;;) {
    // predict
    probs.assign(m.vocab.word_count(), 0.0);
    for (WordId w = 0; w < m.vocab.word_count(); ++w) probs[w] = predict_word_prob(m, h, w);
    WordId w = static_cast<WordId>(s.pick(probs));
    words.push_back(w);
    if (w == m.vocab.eos_word) return words;
    if (words.size() - 1 > max_len) return std::nullopt;
    // tag
    probs.assign(m.vocab.pos_count(), 0.0);
    for (PosId t = 0; t < m.vocab.pos_count(); ++t) probs[t] = tag_prob(m, h, w, t);
    PosId t = static_cast<PosId>(s.pick(probs));
    h = shift(m, h, w, t, 1.0, 1.0);  // probabilities irrelevant when sampling
    // parser moves until null
    for (;;) {
      std::vector<ParserAction> legal = legal_actions(m, h);
      if (legal.size() == 1) {
        h = apply_action(m, h, legal[0], 1.0);
        if (legal[0].is_null()) break;
        continue;
      }
      probs.clear();
      for (const ParserAction& a : legal) probs.push_back(parser_action_prob(m, h, a));
      const ParserAction& a = legal[s.pick(probs)];
      h = apply_action(m, h, a, 1.0);
      if (a.is_null()) break;
    }
  }
}

inline std::vector<std::vector<WordId>> sample_corpus(const Slm& m, std::size_t n,
                                                      std::uint32_t seed,
                                                      std::size_t max_len = 20) {
  Sampler s(seed);
  std::vector<std::vector<WordId>> out;
  while (out.size() < n) {
    if (auto sent = sample_sentence(m, s, max_len)) out.push_back(std::move(*sent));
  }
  return out;
}

// --- misc helpers -------------------------------------------------------------

struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& name) {
    path = std::filesystem::current_path() / ("synlm_test_" + name);
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  std::string file(const std::string& rel) const { return (path / rel).string(); }
};

inline std::vector<Move> oracle_moves_to_library(const std::vector<oracle::OMove>& moves) {
  std::vector<Move> out;
  for (const oracle::OMove& m : moves) {
    switch (m.kind) {
      case oracle::OMove::predict: out.push_back(Move::predict(m.id)); break;
      case oracle::OMove::tag: out.push_back(Move::tag(m.id)); break;
      case oracle::OMove::parse: out.push_back(Move::parse(m.id)); break;
    }
  }
  return out;
}

}  // namespace fixtures
