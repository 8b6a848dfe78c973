#pragma once

// The word-parse prefix state machine: exposed-head stacks, parser actions,
// and the forced-move rules that make every generation path end in exactly
// one complete parse. The rules are keyed structurally — stack size 2 means
// h_{-1} is the sentence-start head, and a top head whose word is </s>
// triggers the TOP'/TOP completion cascade — so boundary lexemes predicted
// mid-sentence behave like ordinary rare words.

#include <cstdint>
#include <memory>
#include <vector>

#include "synlm/util.hpp"
#include "synlm/vocab.hpp"

namespace synlm {

struct Head {
  WordId word = 0;
  TagId tag = 0;

  friend bool operator==(const Head& a, const Head& b) = default;
};

struct ParserAction {
  enum class Kind : std::uint8_t { null, adjoin_left, adjoin_right };
  Kind kind = Kind::null;
  NtId nt = 0;

  static ParserAction make_null() { return {}; }
  static ParserAction left(NtId n) { return {Kind::adjoin_left, n}; }
  static ParserAction right(NtId n) { return {Kind::adjoin_right, n}; }
  bool is_null() const { return kind == Kind::null; }

  friend bool operator==(const ParserAction& a, const ParserAction& b) = default;
};

inline ActionId action_id(const ParserAction& a, std::size_t nt_count) {
  switch (a.kind) {
    case ParserAction::Kind::null: return 0;
    case ParserAction::Kind::adjoin_left: return 1 + a.nt;
    default: return static_cast<ActionId>(1 + nt_count + a.nt);
  }
}

inline ParserAction action_from_id(ActionId id, std::size_t nt_count) {
  if (id == 0) return ParserAction::make_null();
  if (id <= nt_count) return ParserAction::left(static_cast<NtId>(id - 1));
  if (id <= 2 * nt_count) return ParserAction::right(static_cast<NtId>(id - 1 - nt_count));
  fail("action id out of range");
}

inline std::string action_name(const ParserAction& a, const Vocab& v) {
  switch (a.kind) {
    case ParserAction::Kind::null: return "null";
    case ParserAction::Kind::adjoin_left: return "adjoin-left:" + v.nts[a.nt];
    default: return "adjoin-right:" + v.nts[a.nt];
  }
}

struct Move {
  enum class Kind : std::uint8_t { predict, tag, parse };
  Kind kind = Kind::predict;
  std::uint32_t id = 0;  // word id, POS id, or action id

  static Move predict(WordId w) { return {Kind::predict, w}; }
  static Move tag(PosId t) { return {Kind::tag, t}; }
  static Move parse(ActionId a) { return {Kind::parse, a}; }

  friend bool operator==(const Move& a, const Move& b) = default;
  friend auto operator<=>(const Move& a, const Move& b) = default;
};

// The unique predictor/tagger/parser move sequence producing a (W,T) pair.
struct Derivation {
  std::vector<Move> moves;
  std::size_t sentence_len = 0;  // words excluding <s> and </s>
};

// Persistent stack of exposed heads; pushes and pops share structure so a
// branching hypothesis never mutates its parent.
class HeadStack {
  struct Node {
    Head head;
    std::shared_ptr<const Node> below;
  };

 public:
  HeadStack() = default;

  static HeadStack initial(Head bottom) {
    HeadStack s;
    s.top_ = std::make_shared<Node>(Node{bottom, nullptr});
    s.size_ = 1;
    return s;
  }

  std::uint32_t size() const { return size_; }
  const Head& top() const { return top_->head; }
  const Head& second() const { return top_->below->head; }

  HeadStack push(Head h) const {
    HeadStack s;
    s.top_ = std::make_shared<Node>(Node{h, top_});
    s.size_ = size_ + 1;
    return s;
  }

  // pops the two rightmost heads and pushes their new constituent's head
  HeadStack pop2_push(Head h) const {
    HeadStack s;
    s.top_ = std::make_shared<Node>(Node{h, top_->below->below});
    s.size_ = size_ - 1;
    return s;
  }

  std::vector<Head> to_vector() const {  // oldest first
    std::vector<Head> out;
    for (const Node* n = top_.get(); n; n = n->below.get()) out.push_back(n->head);
    std::reverse(out.begin(), out.end());
    return out;
  }

 private:
  std::shared_ptr<const Node> top_;
  std::uint32_t size_ = 0;
};

// What the parser may do given the current exposed heads. Consulted only
// when the stack has >= 2 elements (the parser runs after a shift).
enum class ParserRegime : std::uint8_t {
  forced_null,       // h_{-1} is the sentence-start head: adjoining it early is forbidden
  forced_top_prime,  // completion cascade below the root: adjoin-right under TOP'
  forced_top,        // final move: adjoin the start head under TOP
  free_choice,
};

inline ParserRegime parser_regime(const HeadStack& s, WordId eos_word) {
  if (s.top().word == eos_word) {
    return s.size() == 2 ? ParserRegime::forced_top : ParserRegime::forced_top_prime;
  }
  return s.size() == 2 ? ParserRegime::forced_null : ParserRegime::free_choice;
}

}  // namespace synlm
