#pragma once

// Headed binary parse trees and their unique derivations. A treebank tree is
// normalized (tree.hpp), head-percolated against the rules, wrapped into a
// complete parse over (<s>,SB) ... (</s>,SE), and decomposed into the move
// sequence that regenerates it through the transition system.

#include <memory>
#include <set>
#include <string>
#include <vector>

#include "synlm/transitions.hpp"
#include "synlm/tree.hpp"
#include "synlm/util.hpp"
#include "synlm/vocab.hpp"

namespace synlm {

struct HeadedBinaryTree {
  enum class Side : std::uint8_t { left, right };

  std::uint32_t label = 0;  // PosId for leaves, NtId for internal nodes
  Head head;
  std::unique_ptr<HeadedBinaryTree> left, right;
  Side head_side = Side::right;  // internal nodes only

  bool is_leaf() const { return !left; }
};

inline bool trees_equal(const HeadedBinaryTree& a, const HeadedBinaryTree& b) {
  if (a.label != b.label || !(a.head == b.head) || a.is_leaf() != b.is_leaf()) return false;
  if (a.is_leaf()) return true;
  if (a.head_side != b.head_side) return false;
  return trees_equal(*a.left, *b.left) && trees_equal(*a.right, *b.right);
}

inline std::unique_ptr<HeadedBinaryTree> make_leaf(PosId pos, WordId word, const Vocab& v) {
  auto t = std::make_unique<HeadedBinaryTree>();
  t->label = pos;
  t->head = Head{word, v.tag_of_pos(pos)};
  return t;
}

inline std::unique_ptr<HeadedBinaryTree> make_node(NtId nt, HeadedBinaryTree::Side side,
                                                   std::unique_ptr<HeadedBinaryTree> l,
                                                   std::unique_ptr<HeadedBinaryTree> r,
                                                   const Vocab& v) {
  auto t = std::make_unique<HeadedBinaryTree>();
  t->label = nt;
  t->head_side = side;
  t->head = Head{side == HeadedBinaryTree::Side::left ? l->head.word : r->head.word,
                 v.tag_of_nt(nt)};
  t->left = std::move(l);
  t->right = std::move(r);
  return t;
}

// Percolates headwords through a binary tree bottom-up. Internal nodes take
// the head of the rule-selected child; leaves head themselves. Unknown POS
// or NT labels are closed-vocabulary violations.
inline std::unique_ptr<HeadedBinaryTree> percolate_heads(const Tree& t, const HeadRules& rules,
                                                         const Vocab& v) {
  if (t.is_leaf()) return make_leaf(v.pos_id(t.label), v.word_or_unk(t.lexeme), v);
  if (t.children.size() != 2) fail("percolate_heads: tree is not binary");
  auto l = percolate_heads(t.children[0], rules, v);
  auto r = percolate_heads(t.children[1], rules, v);
  std::size_t head_idx =
      rules.select(t.label, {t.children[0].label, t.children[1].label});
  auto side = head_idx == 0 ? HeadedBinaryTree::Side::left : HeadedBinaryTree::Side::right;
  return make_node(v.nt_id(t.label), side, std::move(l), std::move(r), v);
}

// Wraps a headed tree over w_1..w_n into the complete parse over
// <s> w_1..w_n </s>: the sentence tree joins </s> under TOP' (headed by
// </s>), and <s> joins the result under TOP.
inline std::unique_ptr<HeadedBinaryTree> wrap_complete(std::unique_ptr<HeadedBinaryTree> root,
                                                       const Vocab& v) {
  auto prime = make_node(v.top_prime_nt, HeadedBinaryTree::Side::right, std::move(root),
                         make_leaf(v.se_pos, v.eos_word, v), v);
  return make_node(v.top_nt, HeadedBinaryTree::Side::right, make_leaf(v.sb_pos, v.bos_word, v),
                   std::move(prime), v);
}

inline std::string headed_tree_to_string(const HeadedBinaryTree& t, const Vocab& v) {
  if (t.is_leaf()) return "(" + v.pos[t.label] + "~" + v.words[t.head.word] + ")";
  return "(" + v.nts[t.label] + "~" + v.words[t.head.word] + " " +
         headed_tree_to_string(*t.left, v) + " " + headed_tree_to_string(*t.right, v) + ")";
}

// --- derivation extraction --------------------------------------------------

namespace detail {

inline void collect_leaves(const HeadedBinaryTree& t,
                           std::vector<const HeadedBinaryTree*>& leaves) {
  if (t.is_leaf()) {
    leaves.push_back(&t);
    return;
  }
  collect_leaves(*t.left, leaves);
  collect_leaves(*t.right, leaves);
}

[[noreturn]] inline void not_complete(const std::string& why) {
  fail("not-a-complete-parse: " + why);
}

}  // namespace detail

// Decomposes a complete parse into its unique derivation. Adjoins follow the
// canonical order forced by the two-rightmost-heads discipline: each
// constituent is built immediately after its rightmost word is shifted,
// innermost first. Every emitted move is checked against the move grammar,
// so trees violating the complete-parse restrictions are rejected.
inline Derivation derivation_of(const HeadedBinaryTree& t, const Vocab& v) {
  std::vector<const HeadedBinaryTree*> leaves;
  detail::collect_leaves(t, leaves);
  if (leaves.size() < 2) detail::not_complete("fewer than two leaves");
  if (!(leaves.front()->head == Head{v.bos_word, v.tag_of_pos(v.sb_pos)}))
    detail::not_complete("leftmost leaf is not (<s>, SB)");
  if (!(leaves.back()->head == Head{v.eos_word, v.tag_of_pos(v.se_pos)}))
    detail::not_complete("rightmost leaf is not (</s>, SE)");
  if (!(t.head == Head{v.eos_word, v.tag_of_nt(v.top_nt)}) || t.is_leaf() || t.label != v.top_nt)
    detail::not_complete("root is not headed by (</s>, TOP)");

  // parent links for sibling detection
  std::unordered_map<const HeadedBinaryTree*, const HeadedBinaryTree*> parent;
  std::vector<const HeadedBinaryTree*> walk{&t};
  while (!walk.empty()) {
    const HeadedBinaryTree* n = walk.back();
    walk.pop_back();
    if (n->is_leaf()) continue;
    parent[n->left.get()] = n;
    parent[n->right.get()] = n;
    walk.push_back(n->left.get());
    walk.push_back(n->right.get());
  }

  Derivation d;
  d.sentence_len = leaves.size() - 2;
  std::vector<const HeadedBinaryTree*> stack{leaves.front()};
  HeadStack heads = HeadStack::initial(leaves.front()->head);

  for (std::size_t i = 1; i < leaves.size(); ++i) {
    const HeadedBinaryTree* leaf = leaves[i];
    bool last = i + 1 == leaves.size();
    if (!last && leaf->head.word == v.eos_word)
      detail::not_complete("</s> appears before the final position");
    d.moves.push_back(Move::predict(leaf->head.word));
    if (!last) d.moves.push_back(Move::tag(leaf->label));
    stack.push_back(leaf);
    heads = heads.push(leaf->head);

    while (stack.size() >= 2) {
      const HeadedBinaryTree* top = stack[stack.size() - 1];
      const HeadedBinaryTree* sec = stack[stack.size() - 2];
      auto pit = parent.find(top);
      if (pit == parent.end() || pit->second != parent[sec] ||
          pit->second->left.get() != sec || pit->second->right.get() != top)
        break;
      const HeadedBinaryTree* par = pit->second;
      ParserAction action = par->head_side == HeadedBinaryTree::Side::left
                                ? ParserAction::left(par->label)
                                : ParserAction::right(par->label);
      switch (parser_regime(heads, v.eos_word)) {
        case ParserRegime::forced_null:
          detail::not_complete("adjoin while the start head is exposed as h_{-1}");
        case ParserRegime::forced_top_prime:
          if (!(action == ParserAction::right(v.top_prime_nt)))
            detail::not_complete("completion constituent is not right-headed TOP'");
          break;
        case ParserRegime::forced_top:
          if (!(action == ParserAction::right(v.top_nt)))
            detail::not_complete("final constituent is not right-headed TOP");
          break;
        case ParserRegime::free_choice:
          break;
      }
      d.moves.push_back(Move::parse(action_id(action, v.nt_count())));
      stack.pop_back();
      stack.back() = par;
      heads = heads.pop2_push(par->head);
    }
    if (!last) {
      d.moves.push_back(Move::parse(0));  // null: hand control back to the predictor
    } else if (stack.size() != 1) {
      detail::not_complete("completion does not reduce to a single constituent");
    }
  }
  return d;
}

// Reconstructs the headed tree by replaying moves through the transition
// system; the strict inverse of derivation_of.
inline std::unique_ptr<HeadedBinaryTree> replay_to_tree(const Derivation& d, const Vocab& v) {
  std::vector<std::unique_ptr<HeadedBinaryTree>> stack;
  stack.push_back(make_leaf(v.sb_pos, v.bos_word, v));
  HeadStack heads = HeadStack::initial(stack.back()->head);

  enum class Expect { predict, tag, parse, done };
  Expect state = Expect::predict;
  WordId pending = 0;

  auto heads_of = [&]() -> HeadStack { return heads; };

  for (const Move& m : d.moves) {
    switch (m.kind) {
      case Move::Kind::predict: {
        if (state != Expect::predict) fail("replay: unexpected predict move");
        pending = m.id;
        if (pending == v.eos_word) {
          stack.push_back(make_leaf(v.se_pos, v.eos_word, v));
          heads = heads.push(stack.back()->head);
          state = Expect::parse;
        } else {
          state = Expect::tag;
        }
        break;
      }
      case Move::Kind::tag: {
        if (state != Expect::tag) fail("replay: unexpected tag move");
        if (m.id >= v.pos_count()) fail("replay: POS id out of range");
        stack.push_back(make_leaf(m.id, pending, v));
        heads = heads.push(stack.back()->head);
        state = Expect::parse;
        break;
      }
      case Move::Kind::parse: {
        if (state != Expect::parse) fail("replay: unexpected parse move");
        ParserAction a = action_from_id(m.id, v.nt_count());
        ParserRegime regime = parser_regime(heads_of(), v.eos_word);
        if (a.is_null()) {
          if (regime != ParserRegime::forced_null && regime != ParserRegime::free_choice)
            fail("replay: null move where an adjoin is forced");
          state = Expect::predict;
          break;
        }
        if (regime == ParserRegime::forced_null) fail("replay: adjoin where null is forced");
        if (regime == ParserRegime::forced_top_prime && !(a == ParserAction::right(v.top_prime_nt)))
          fail("replay: completion requires adjoin-right TOP'");
        if (regime == ParserRegime::forced_top && !(a == ParserAction::right(v.top_nt)))
          fail("replay: final move requires adjoin-right TOP");
        auto r = std::move(stack.back());
        stack.pop_back();
        auto l = std::move(stack.back());
        stack.pop_back();
        auto side = a.kind == ParserAction::Kind::adjoin_left ? HeadedBinaryTree::Side::left
                                                              : HeadedBinaryTree::Side::right;
        stack.push_back(make_node(a.nt, side, std::move(l), std::move(r), v));
        heads = heads.pop2_push(stack.back()->head);
        if (stack.size() == 1 && stack.back()->head.word == v.eos_word &&
            stack.back()->label == v.top_nt)
          state = Expect::done;
        break;
      }
    }
  }
  if (state != Expect::done || stack.size() != 1) fail("replay: derivation is incomplete");
  return std::move(stack.back());
}

// Normalize + percolate + wrap in one step; what init feeds on.
inline std::unique_ptr<HeadedBinaryTree> prepare_complete_parse(
    const Tree& raw, const HeadRules& rules, const std::set<std::string>& drop_labels,
    const Vocab& v) {
  Tree t = raw;
  if (!normalize_tree(t, rules, drop_labels)) fail("tree has no leaves after trace removal");
  return wrap_complete(percolate_heads(t, rules, v), v);
}

}  // namespace synlm
