#pragma once

// Treebank trees and the preprocessing that turns them into the binary,
// headable form the model trains on: configurable trace-leaf removal, unary
// chain collapsing, and right binarization with primed intermediate labels.

#include <memory>
#include <set>
#include <string>
#include <vector>

#include "synlm/util.hpp"

namespace synlm {

struct Tree {
  std::string label;
  std::vector<Tree> children;
  std::string lexeme;  // leaves only

  bool is_leaf() const { return children.empty(); }
};

// --- S-expression treebank reader -----------------------------------------
//
// Format: `(LABEL child ...)` with leaves `(POS lexeme)`. A label-less node
// with exactly one child (the standard treebank top wrapper `( (S ...) )`)
// is transparent.

namespace detail {

struct SexprReader {
  std::string_view text;
  std::size_t pos = 0;
  std::size_t line = 1;

  void skip_ws() {
    while (pos < text.size()) {
      char c = text[pos];
      if (c == '\n') ++line;
      if (c == ' ' || c == '\t' || c == '\n' || c == '\r') ++pos;
      else break;
    }
  }

  bool at_end() {
    skip_ws();
    return pos >= text.size();
  }

  [[noreturn]] void err(const std::string& msg) const {
    fail("treebank parse error at line " + std::to_string(line) + ": " + msg);
  }

  std::string atom() {
    std::size_t start = pos;
    while (pos < text.size()) {
      char c = text[pos];
      if (c == '(' || c == ')' || c == ' ' || c == '\t' || c == '\n' || c == '\r') break;
      ++pos;
    }
    if (pos == start) err("expected atom");
    return std::string(text.substr(start, pos - start));
  }

  Tree node() {
    skip_ws();
    if (pos >= text.size() || text[pos] != '(') err("expected '('");
    ++pos;
    skip_ws();
    if (pos >= text.size()) err("unbalanced parentheses");
    Tree t;
    bool wrapper = false;
    if (text[pos] == '(') {
      wrapper = true;  // label-less wrapper node
    } else if (text[pos] == ')') {
      err("empty node");
    } else {
      t.label = atom();
    }
    std::vector<std::string> atoms;
    for (;;) {
      skip_ws();
      if (pos >= text.size()) err("unbalanced parentheses");
      if (text[pos] == ')') {
        ++pos;
        break;
      }
      if (text[pos] == '(') {
        t.children.push_back(node());
      } else {
        atoms.push_back(atom());
      }
    }
    if (wrapper) {
      if (!atoms.empty() || t.children.size() != 1) err("label-less node must wrap exactly one tree");
      return std::move(t.children.front());
    }
    if (!atoms.empty()) {
      // `(POS lexeme)` leaf; mixed or multi-atom nodes are not a tree
      if (!t.children.empty() || atoms.size() != 1) err("node mixes children and atoms");
      t.lexeme = atoms.front();
      return t;
    }
    if (t.children.empty()) err("empty node");
    return t;
  }
};

}  // namespace detail

inline std::vector<Tree> parse_treebank(std::string_view text) {
  detail::SexprReader r{text};
  std::vector<Tree> trees;
  while (!r.at_end()) {
    if (r.text[r.pos] != '(') r.err("expected '('");
    trees.push_back(r.node());
  }
  return trees;
}

inline std::string tree_to_string(const Tree& t) {
  if (t.is_leaf()) return "(" + t.label + " " + t.lexeme + ")";
  std::string s = "(" + t.label;
  for (const Tree& c : t.children) s += " " + tree_to_string(c);
  return s + ")";
}

inline void collect_yield(const Tree& t, std::vector<std::string>& words) {
  if (t.is_leaf()) {
    words.push_back(t.lexeme);
    return;
  }
  for (const Tree& c : t.children) collect_yield(c, words);
}

inline std::vector<std::string> tree_yield(const Tree& t) {
  std::vector<std::string> words;
  collect_yield(t, words);
  return words;
}

// --- head rules ------------------------------------------------------------
//
// File format, one rule per line:
//   LABEL direction child-label...
//   * left|right
// direction is `left-to-right` or `right-to-left`. Rules for the same label
// form an ordered preference list; the `*` line sets the default side taken
// when no rule matches (also used for labels with no rules at all).

struct HeadRules {
  enum class Dir { l2r, r2l };
  struct Rule {
    std::string label;
    Dir dir;
    std::set<std::string> child_labels;
  };
  std::vector<Rule> rules;
  bool default_right = true;

  static HeadRules default_rules() { return HeadRules{}; }

  static HeadRules parse(std::string_view text) {
    HeadRules hr;
    std::size_t start = 0, line_no = 0;
    while (start <= text.size()) {
      std::size_t end = text.find('\n', start);
      if (end == std::string_view::npos) end = text.size();
      ++line_no;
      std::string_view line = trim(text.substr(start, end - start));
      start = end + 1;
      if (line.empty() || line.front() == '#') {
        if (end == text.size()) break;
        continue;
      }
      std::vector<std::string> t = split_ws(line);
      if (t[0] == "*") {
        if (t.size() != 2 || (t[1] != "left" && t[1] != "right"))
          fail("head rules line " + std::to_string(line_no) + ": expected '* left' or '* right'");
        hr.default_right = t[1] == "right";
      } else {
        if (t.size() < 3 || (t[1] != "left-to-right" && t[1] != "right-to-left"))
          fail("head rules line " + std::to_string(line_no) +
               ": expected 'LABEL left-to-right|right-to-left child-labels...'");
        Rule r;
        r.label = t[0];
        r.dir = t[1] == "left-to-right" ? Dir::l2r : Dir::r2l;
        r.child_labels.insert(t.begin() + 2, t.end());
        hr.rules.push_back(std::move(r));
      }
      if (end == text.size()) break;
    }
    return hr;
  }

  static HeadRules load(const std::string& path) { return parse(read_file(path)); }

  // Picks the head among an ordered child label sequence. Every lookup
  // terminates: unmatched labels fall through to the default side.
  std::size_t select(const std::string& parent_label,
                     const std::vector<std::string>& child_labels) const {
    for (const Rule& r : rules) {
      if (r.label != parent_label) continue;
      if (r.dir == Dir::l2r) {
        for (std::size_t i = 0; i < child_labels.size(); ++i)
          if (r.child_labels.count(child_labels[i])) return i;
      } else {
        for (std::size_t i = child_labels.size(); i-- > 0;)
          if (r.child_labels.count(child_labels[i])) return i;
      }
    }
    return default_right ? child_labels.size() - 1 : 0;
  }
};

// --- normalization ---------------------------------------------------------

inline constexpr char kPrimeSuffix = '\'';

namespace detail {

// Removes leaves whose POS label is in `drop`, pruning any internal node
// emptied by the removal.
inline bool drop_leaves(Tree& t, const std::set<std::string>& drop) {
  if (t.is_leaf()) return drop.count(t.label) == 0;
  std::vector<Tree> kept;
  for (Tree& c : t.children)
    if (drop_leaves(c, drop)) kept.push_back(std::move(c));
  t.children = std::move(kept);
  return !t.children.empty();
}

inline Tree binarize_node(Tree t) {
  if (t.is_leaf()) return t;
  // collapse unary chains: (A (B ...)) -> (A_B ...)
  while (t.children.size() == 1) {
    Tree child = std::move(t.children.front());
    std::string joined = t.label + "_" + child.label;
    t = std::move(child);
    t.label = std::move(joined);
  }
  if (t.is_leaf()) return t;
  for (Tree& c : t.children) c = binarize_node(std::move(c));
  if (t.children.size() == 2) return t;
  // right-binarize, labeling the new spine with the parent label plus a prime
  std::string prime = t.label + kPrimeSuffix;
  Tree tail = std::move(t.children.back());
  for (std::size_t i = t.children.size() - 1; i-- > 1;) {
    Tree node;
    node.label = prime;
    node.children.push_back(std::move(t.children[i]));
    node.children.push_back(std::move(tail));
    tail = std::move(node);
  }
  Tree out;
  out.label = std::move(t.label);
  out.children.push_back(std::move(t.children.front()));
  out.children.push_back(std::move(tail));
  return out;
}

}  // namespace detail

// Right-binarizes after collapsing unary chains; leaf order is preserved.
// The head rules travel with the call for interface stability; head
// selection itself happens during percolation.
inline Tree binarize(const Tree& t, const HeadRules&) {
  Tree copy = t;
  return detail::binarize_node(std::move(copy));
}

// Full preprocessing for one treebank tree: trace removal then binarization.
// Returns false when the tree has no leaves left.
inline bool normalize_tree(Tree& t, const HeadRules& rules,
                           const std::set<std::string>& drop_labels) {
  if (!detail::drop_leaves(t, drop_labels)) return false;
  t = binarize(t, rules);
  return true;
}

}  // namespace synlm
