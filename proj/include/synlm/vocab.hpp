#pragma once

// Vocabularies: an open word map (with <s>, </s>, <unk>) plus closed POS,
// non-terminal and parser-action inventories. POS and NT ids share one
// range-partitioned tag space: tag ids below pos_count() are POS tags, the
// rest are NT tags. Parser actions are derived from the NT inventory:
// id 0 is null, 1..|NT| adjoin-left, |NT|+1..2|NT| adjoin-right.

#include <algorithm>
#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "synlm/tree.hpp"
#include "synlm/util.hpp"

namespace synlm {

inline constexpr const char* kBos = "<s>";
inline constexpr const char* kEos = "</s>";
inline constexpr const char* kUnk = "<unk>";
inline constexpr const char* kSb = "SB";
inline constexpr const char* kSe = "SE";
inline constexpr const char* kTop = "TOP";
inline constexpr const char* kTopPrime = "TOP'";

using WordId = std::uint32_t;
using PosId = std::uint32_t;
using NtId = std::uint32_t;
using TagId = std::uint32_t;     // combined POS+NT space
using ActionId = std::uint32_t;

struct Vocab {
  std::vector<std::string> words;  // index = id
  std::vector<std::string> pos;
  std::vector<std::string> nts;
  std::unordered_map<std::string, WordId> word_ids;
  std::unordered_map<std::string, PosId> pos_ids;
  std::unordered_map<std::string, NtId> nt_ids;

  WordId bos_word = 0, eos_word = 0, unk_word = 0;
  PosId sb_pos = 0, se_pos = 0;
  NtId top_nt = 0, top_prime_nt = 0;

  std::size_t word_count() const { return words.size(); }
  std::size_t pos_count() const { return pos.size(); }
  std::size_t nt_count() const { return nts.size(); }
  std::size_t action_count() const { return 2 * nt_count() + 1; }
  std::size_t tag_count() const { return pos_count() + nt_count(); }

  TagId tag_of_pos(PosId p) const { return p; }
  TagId tag_of_nt(NtId n) const { return static_cast<TagId>(pos_count()) + n; }
  bool tag_is_nt(TagId t) const { return t >= pos_count(); }

  const std::string& tag_name(TagId t) const {
    return tag_is_nt(t) ? nts[t - pos_count()] : pos[t];
  }

  WordId word_or_unk(const std::string& w) const {
    // a literal boundary token inside a sentence would derail the state
    // machine, so it degrades to <unk>
    if (w == kBos || w == kEos) return unk_word;
    auto it = word_ids.find(w);
    return it == word_ids.end() ? unk_word : it->second;
  }

  PosId pos_id(const std::string& p) const {
    auto it = pos_ids.find(p);
    if (it == pos_ids.end()) fail("closed-vocabulary violation: unknown POS tag '" + p + "'");
    return it->second;
  }

  NtId nt_id(const std::string& n) const {
    auto it = nt_ids.find(n);
    if (it == nt_ids.end()) fail("closed-vocabulary violation: unknown NT tag '" + n + "'");
    return it->second;
  }

  std::string audit() const {
    std::string s;
    s += "words " + std::to_string(word_count()) + "\n";
    s += "pos " + std::to_string(pos_count()) + "\n";
    s += "nt " + std::to_string(nt_count()) + "\n";
    s += "actions " + std::to_string(action_count()) + "\n";
    return s;
  }
};

namespace detail {

inline void collect_labels(const Tree& t, std::map<std::string, std::uint64_t>& word_freq,
                           std::map<std::string, bool>& pos_seen,
                           std::map<std::string, bool>& nt_seen) {
  if (t.is_leaf()) {
    ++word_freq[t.lexeme];
    pos_seen[t.label] = true;
    return;
  }
  nt_seen[t.label] = true;
  for (const Tree& c : t.children) collect_labels(c, word_freq, pos_seen, nt_seen);
}

}  // namespace detail

// Builds the four inventories from normalized (binarized) trees: the word
// map keeps the max_words most frequent lexemes, ties broken
// lexicographically; POS/NT maps close over the observed labels plus the
// boundary specials.
inline Vocab build_vocab(const std::vector<Tree>& trees, std::size_t max_words) {
  if (max_words < 1) fail("build_vocab: max_words must be >= 1");
  std::map<std::string, std::uint64_t> word_freq;
  std::map<std::string, bool> pos_seen, nt_seen;
  for (const Tree& t : trees) detail::collect_labels(t, word_freq, pos_seen, nt_seen);

  Vocab v;
  auto add_word = [&](const std::string& w) {
    if (v.word_ids.count(w)) return;
    v.word_ids.emplace(w, static_cast<WordId>(v.words.size()));
    v.words.push_back(w);
  };
  add_word(kBos);
  add_word(kEos);
  add_word(kUnk);
  v.bos_word = v.word_ids[kBos];
  v.eos_word = v.word_ids[kEos];
  v.unk_word = v.word_ids[kUnk];

  std::vector<std::pair<std::string, std::uint64_t>> ranked;
  for (const auto& [w, c] : word_freq)
    if (w != kBos && w != kEos && w != kUnk) ranked.emplace_back(w, c);
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (ranked.size() > max_words) ranked.resize(max_words);
  for (const auto& [w, c] : ranked) add_word(w);

  auto add_pos = [&](const std::string& p) {
    if (v.pos_ids.count(p)) return;
    v.pos_ids.emplace(p, static_cast<PosId>(v.pos.size()));
    v.pos.push_back(p);
  };
  add_pos(kSb);
  add_pos(kSe);
  for (const auto& [p, _] : pos_seen) add_pos(p);
  v.sb_pos = v.pos_ids[kSb];
  v.se_pos = v.pos_ids[kSe];

  auto add_nt = [&](const std::string& n) {
    if (v.nt_ids.count(n)) return;
    v.nt_ids.emplace(n, static_cast<NtId>(v.nts.size()));
    v.nts.push_back(n);
  };
  add_nt(kTop);
  add_nt(kTopPrime);
  for (const auto& [n, _] : nt_seen) add_nt(n);
  v.top_nt = v.nt_ids[kTop];
  v.top_prime_nt = v.nt_ids[kTopPrime];
  return v;
}

// [<s>] + mapped words (OOV -> <unk>) + [</s>]
inline std::vector<WordId> encode_sentence(const std::vector<std::string>& words, const Vocab& v) {
  std::vector<WordId> ids;
  ids.reserve(words.size() + 2);
  ids.push_back(v.bos_word);
  for (const std::string& w : words) ids.push_back(v.word_or_unk(w));
  ids.push_back(v.eos_word);
  return ids;
}

// --- serialization ---------------------------------------------------------

inline std::string serialize_vocab(const Vocab& v) {
  std::string s = "synlm-vocab v1\n";
  for (std::size_t i = 0; i < v.words.size(); ++i)
    s += "word " + std::to_string(i) + " " + v.words[i] + "\n";
  for (std::size_t i = 0; i < v.pos.size(); ++i)
    s += "pos " + std::to_string(i) + " " + v.pos[i] + "\n";
  for (std::size_t i = 0; i < v.nts.size(); ++i)
    s += "nt " + std::to_string(i) + " " + v.nts[i] + "\n";
  return s;
}

inline std::uint64_t vocab_hash(const Vocab& v) { return fnv1a(serialize_vocab(v)); }

inline Vocab parse_vocab(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || std::string(trim(line)) != "synlm-vocab v1")
    fail("vocab file: bad header");
  Vocab v;
  while (std::getline(in, line)) {
    std::vector<std::string> t = split_ws(line);
    if (t.empty()) continue;
    if (t.size() != 3) fail("vocab file: bad line '" + line + "'");
    std::size_t id = parse_u64(t[1]);
    auto place = [&](std::vector<std::string>& names, auto& ids) {
      if (id != names.size()) fail("vocab file: ids must be dense and ordered");
      ids.emplace(t[2], static_cast<std::uint32_t>(id));
      names.push_back(t[2]);
    };
    if (t[0] == "word") place(v.words, v.word_ids);
    else if (t[0] == "pos") place(v.pos, v.pos_ids);
    else if (t[0] == "nt") place(v.nts, v.nt_ids);
    else fail("vocab file: unknown entry '" + t[0] + "'");
  }
  auto need = [&](const std::unordered_map<std::string, std::uint32_t>& ids, const char* name,
                  const char* what) -> std::uint32_t {
    auto it = ids.find(name);
    if (it == ids.end()) fail(std::string("vocab file: missing ") + what + " '" + name + "'");
    return it->second;
  };
  v.bos_word = need(v.word_ids, kBos, "word");
  v.eos_word = need(v.word_ids, kEos, "word");
  v.unk_word = need(v.word_ids, kUnk, "word");
  v.sb_pos = need(v.pos_ids, kSb, "POS tag");
  v.se_pos = need(v.pos_ids, kSe, "POS tag");
  v.top_nt = need(v.nt_ids, kTop, "NT tag");
  v.top_prime_nt = need(v.nt_ids, kTopPrime, "NT tag");
  return v;
}

// --- encoded-corpus cache --------------------------------------------------

inline std::string serialize_corpus(const std::vector<std::vector<WordId>>& sentences) {
  std::string s = "synlm-corpus v1\n";
  for (const auto& sent : sentences) {
    for (std::size_t i = 0; i < sent.size(); ++i) {
      if (i) s += ' ';
      s += std::to_string(sent[i]);
    }
    s += '\n';
  }
  return s;
}

inline std::vector<std::vector<WordId>> parse_corpus(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || std::string(trim(line)) != "synlm-corpus v1")
    fail("corpus cache: bad header");
  std::vector<std::vector<WordId>> out;
  while (std::getline(in, line)) {
    std::string_view sv = trim(line);
    if (sv.empty()) continue;
    std::vector<WordId> sent;
    for (const std::string& tok : split_ws(sv))
      sent.push_back(static_cast<WordId>(parse_u64(tok)));
    out.push_back(std::move(sent));
  }
  return out;
}

}  // namespace synlm
