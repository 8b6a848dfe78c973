#pragma once

// Word-level perplexity. The causal assignment mixes the next-word
// probability over all parses surviving the beams, weighted by their
// normalized scores, strictly before the word is read. The non-causal
// variant conditions on prefixes of the single best parse and bounds the
// achievable perplexity from below. A deleted-interpolation trigram provides
// the baseline and the linear-interpolation partner.

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "synlm/decoder.hpp"
#include "synlm/model.hpp"
#include "synlm/util.hpp"

namespace synlm {

struct SentencePpl {
  std::size_t words = 0;      // predicted tokens: w_1..w_n and </s>
  double logprob = 0.0;       // natural log
  bool failed = false;
};

struct PplReport {
  std::size_t word_count = 0;
  double total_logprob = 0.0;
  double ppl = 0.0;
  std::size_t failures = 0;
  std::vector<SentencePpl> sentences;
};

inline double perplexity(double total_logprob, std::size_t word_count) {
  if (word_count == 0) fail("perplexity: word_count must be >= 1");
  return std::exp(-total_logprob / static_cast<double>(word_count));
}

// Per-token probability stream, cached to disk so interpolation and weight
// fitting never re-decode.
struct ProbStream {
  struct Entry {
    std::uint32_t sent = 0;
    std::uint32_t word_idx = 0;  // position among the sentence's predicted tokens
    WordId word = 0;
    double logprob = 0.0;
  };
  std::uint64_t vocab_hash = 0;
  std::vector<Entry> entries;
};

namespace detail {

// Summaries are reduced in sentence order whatever the worker count.
inline PplReport reduce_report(std::vector<SentencePpl> sentences) {
  PplReport r;
  for (const SentencePpl& s : sentences) {
    if (s.failed) {
      ++r.failures;
      continue;
    }
    r.word_count += s.words;
    r.total_logprob += s.logprob;
  }
  r.ppl = perplexity(r.total_logprob, r.word_count);
  r.sentences = std::move(sentences);
  return r;
}

}  // namespace detail

// Eq.-(14)/(15) probability assignment: at each position the surviving
// word-parse prefixes are weighted by their normalized scores and the next
// word's probability is their mixture under the assignment predictor (the
// L2R component when present). S_k is computed before w_{k+1} is read.
inline PplReport ppl_causal(const Slm& m, const std::vector<std::vector<WordId>>& corpus,
                            const BeamConfig& cfg, std::size_t workers = 1,
                            ProbStream* stream_out = nullptr) {
  std::vector<SentencePpl> sentences(corpus.size());
  std::vector<std::vector<ProbStream::Entry>> streams(stream_out ? corpus.size() : 0);
  parallel_for(corpus.size(), workers, [&](std::size_t si) {
    const std::vector<WordId>& ids = corpus[si];
    detail::check_encoded(ids, m.vocab);
    SentencePpl& out = sentences[si];
    try {
      StackGrid grid(m, cfg);
      for (std::size_t i = 1; i < ids.size(); ++i) {
        WordId target = ids[i];
        ParseSet s = grid.surviving_parses(grid.position());
        double p = 0.0;
        for (const ParseSet::Entry& e : s.entries)
          p += e.rho * eval_word_prob(m, head_context(e.hyp->stack, m.vocab), target);
        double lp = std::log(p);
        out.logprob += lp;
        out.words += 1;
        if (stream_out)
          streams[si].push_back({static_cast<std::uint32_t>(si),
                                 static_cast<std::uint32_t>(i - 1), target, lp});
        if (i + 1 < ids.size()) grid.advance(target);
      }
    } catch (const SearchFailure&) {
      out = SentencePpl{};
      out.failed = true;
      if (stream_out) streams[si].clear();
    }
  });
  if (stream_out) {
    stream_out->vocab_hash = vocab_hash(m.vocab);
    stream_out->entries.clear();
    for (const auto& s : streams)
      stream_out->entries.insert(stream_out->entries.end(), s.begin(), s.end());
  }
  return detail::reduce_report(std::move(sentences));
}

// Eq.-(13) assignment: find T* = argmax P(W,T) first, then score each word
// against the prefix of T* in force at its position. Not causal — T* is
// chosen with knowledge of the whole sentence — hence a lower bound.
inline PplReport ppl_lower_bound(const Slm& m, const std::vector<std::vector<WordId>>& corpus,
                                 const BeamConfig& cfg, std::size_t workers = 1,
                                 ProbStream* stream_out = nullptr) {
  std::vector<SentencePpl> sentences(corpus.size());
  std::vector<std::vector<ProbStream::Entry>> streams(stream_out ? corpus.size() : 0);
  parallel_for(corpus.size(), workers, [&](std::size_t si) {
    const std::vector<WordId>& ids = corpus[si];
    SentencePpl& out = sentences[si];
    try {
      ScoredParse best = best_parse(m, ids, cfg);
      replay_events(m.vocab, best.derivation, [&](const MoveEvent& e) {
        if (e.component != Component::predictor) return;
        double lp = std::log(eval_word_prob(m, e.context, e.outcome));
        if (stream_out)
          streams[si].push_back({static_cast<std::uint32_t>(si),
                                 static_cast<std::uint32_t>(out.words), e.outcome, lp});
        out.logprob += lp;
        out.words += 1;
      });
    } catch (const SearchFailure&) {
      out = SentencePpl{};
      out.failed = true;
      if (stream_out) streams[si].clear();
    }
  });
  if (stream_out) {
    stream_out->vocab_hash = vocab_hash(m.vocab);
    stream_out->entries.clear();
    for (const auto& s : streams)
      stream_out->entries.insert(stream_out->entries.end(), s.begin(), s.end());
  }
  return detail::reduce_report(std::move(sentences));
}

// --- trigram baseline --------------------------------------------------------

constexpr std::size_t kTrigramOrder = 2;

struct TrigramModel {
  SmoothedModel model;  // contexts (w_{i-1}, w_{i-2}) nearest-first
};

inline IdTuple trigram_context(const std::vector<WordId>& ids, std::size_t i) {
  WordId w1 = ids[i - 1];
  WordId w2 = i >= 2 ? ids[i - 2] : ids.front();  // sentence starts pad with <s>
  return IdTuple{w1, w2};
}

inline CountTable trigram_counts(const std::vector<std::vector<WordId>>& corpus, const Vocab& v) {
  CountTable t(kTrigramOrder);
  for (const auto& ids : corpus) {
    detail::check_encoded(ids, v);
    for (std::size_t i = 1; i < ids.size(); ++i) t.add(trigram_context(ids, i), ids[i], 1.0);
  }
  return t;
}

inline TrigramModel train_trigram(const std::vector<std::vector<WordId>>& dev_corpus,
                                  const std::vector<std::vector<WordId>>& check_corpus,
                                  const Vocab& v,
                                  std::vector<double> edges = default_bucket_edges(),
                                  std::size_t em_iters = 20) {
  if (dev_corpus.empty() || check_corpus.empty()) fail("train_trigram: empty corpus");
  TrigramModel tm;
  tm.model.table = trigram_counts(dev_corpus, v);
  tm.model.outcome_vocab_size = v.word_count();
  CountTable check = trigram_counts(check_corpus, v);
  tm.model.lambdas =
      estimate_lambdas_em_trace(tm.model.table, v.word_count(), edges, check, em_iters).lambdas;
  return tm;
}

inline PplReport trigram_ppl(const TrigramModel& tm, const std::vector<std::vector<WordId>>& corpus,
                             const Vocab& v, ProbStream* stream_out = nullptr) {
  std::vector<SentencePpl> sentences(corpus.size());
  if (stream_out) {
    stream_out->vocab_hash = vocab_hash(v);
    stream_out->entries.clear();
  }
  for (std::size_t si = 0; si < corpus.size(); ++si) {
    const auto& ids = corpus[si];
    detail::check_encoded(ids, v);
    for (std::size_t i = 1; i < ids.size(); ++i) {
      double lp = std::log(tm.model.prob(trigram_context(ids, i), ids[i]));
      sentences[si].logprob += lp;
      sentences[si].words += 1;
      if (stream_out)
        stream_out->entries.push_back({static_cast<std::uint32_t>(si),
                                       static_cast<std::uint32_t>(i - 1), ids[i], lp});
    }
  }
  return detail::reduce_report(std::move(sentences));
}

// --- linear interpolation ------------------------------------------------------

namespace detail {

inline void check_aligned(const ProbStream& a, const ProbStream& b) {
  if (a.vocab_hash != b.vocab_hash) fail("probability streams: vocab hash mismatch");
  if (a.entries.size() != b.entries.size()) fail("probability streams: length mismatch");
  for (std::size_t i = 0; i < a.entries.size(); ++i) {
    const auto& x = a.entries[i];
    const auto& y = b.entries[i];
    if (x.sent != y.sent || x.word_idx != y.word_idx || x.word != y.word)
      fail("probability streams: token mismatch at entry " + std::to_string(i));
  }
}

}  // namespace detail

// Q(w) = lambda * P_trigram(w) + (1-lambda) * P_slm(w), per token. The
// endpoints reuse the input log-probabilities unchanged so lambda=0/1
// reproduce the component reports exactly.
inline PplReport interpolated_ppl(const ProbStream& trigram_stream, const ProbStream& slm_stream,
                                  double lambda) {
  if (lambda < 0.0 || lambda > 1.0) fail("interpolated_ppl: lambda must be in [0,1]");
  detail::check_aligned(trigram_stream, slm_stream);
  std::vector<SentencePpl> sentences;
  for (std::size_t i = 0; i < trigram_stream.entries.size(); ++i) {
    const auto& t = trigram_stream.entries[i];
    const auto& s = slm_stream.entries[i];
    double lp;
    if (lambda == 1.0) lp = t.logprob;
    else if (lambda == 0.0) lp = s.logprob;
    else lp = std::log(lambda * std::exp(t.logprob) + (1.0 - lambda) * std::exp(s.logprob));
    if (t.sent >= sentences.size()) sentences.resize(t.sent + 1);
    sentences[t.sent].logprob += lp;
    sentences[t.sent].words += 1;
  }
  return detail::reduce_report(std::move(sentences));
}

struct InterpolationFit {
  double lambda = 0.5;
  bool degenerate = false;  // identical streams: any weight is optimal
};

// Maximizes the check-data log-likelihood of the two-stream mixture over
// lambda in [0,1]; the objective is concave, so golden-section search
// converges. Tolerance 1e-4 on lambda.
inline InterpolationFit fit_interpolation_weight(const ProbStream& trigram_stream,
                                                 const ProbStream& slm_stream) {
  detail::check_aligned(trigram_stream, slm_stream);
  if (trigram_stream.entries.empty()) fail("fit_interpolation_weight: empty streams");
  bool identical = true;
  for (std::size_t i = 0; i < trigram_stream.entries.size() && identical; ++i)
    identical = std::abs(trigram_stream.entries[i].logprob - slm_stream.entries[i].logprob) < 1e-12;
  if (identical) return {0.5, true};

  auto ll = [&](double lam) {
    double total = 0.0;
    for (std::size_t i = 0; i < trigram_stream.entries.size(); ++i)
      total += std::log(lam * std::exp(trigram_stream.entries[i].logprob) +
                        (1.0 - lam) * std::exp(slm_stream.entries[i].logprob));
    return total;
  };

  const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
  double lo = 0.0, hi = 1.0;
  double x1 = hi - gr * (hi - lo), x2 = lo + gr * (hi - lo);
  double f1 = ll(x1), f2 = ll(x2);
  while (hi - lo > 1e-6) {
    if (f1 < f2) {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + gr * (hi - lo);
      f2 = ll(x2);
    } else {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - gr * (hi - lo);
      f1 = ll(x1);
    }
  }
  double mid = (lo + hi) / 2.0;
  // the maximum may sit at an endpoint when one stream dominates
  double best = mid, best_ll = ll(mid);
  for (double cand : {0.0, 1.0}) {
    double v = ll(cand);
    if (v > best_ll) {
      best_ll = v;
      best = cand;
    }
  }
  return {best, false};
}

inline std::string serialize_trigram(const TrigramModel& tm, const Vocab& v) {
  std::string s = "synlm-trigram v1\n";
  s += "vocab_hash " + std::to_string(vocab_hash(v)) + "\n";
  write_model_block(s, "trigram", tm.model);
  return s;
}

inline TrigramModel parse_trigram(const std::string& text, const Vocab& v) {
  std::istringstream in(text);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  std::size_t pos = 0;
  if (lines.empty() || trim(lines[pos++]) != "synlm-trigram v1") fail("trigram file: bad header");
  std::vector<std::string> t = pos < lines.size() ? split_ws(lines[pos++]) : std::vector<std::string>{};
  if (t.size() != 2 || t[0] != "vocab_hash") fail("trigram file: expected vocab_hash");
  if (parse_u64(t[1]) != vocab_hash(v)) fail("trigram file: vocab hash mismatch");
  TrigramModel tm;
  std::string name;
  tm.model = read_model_block(lines, pos, &name);
  if (name != "trigram") fail("trigram file: unexpected component '" + name + "'");
  return tm;
}

// --- stream files ----------------------------------------------------------

inline std::string serialize_prob_stream(const ProbStream& s) {
  std::string out = "synlm-probs v1 vocab " + std::to_string(s.vocab_hash) + "\n";
  for (const auto& e : s.entries)
    out += std::to_string(e.sent) + " " + std::to_string(e.word_idx) + " " +
           std::to_string(e.word) + " " + fmt_double(e.logprob) + "\n";
  return out;
}

inline ProbStream parse_prob_stream(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) fail("probs file: empty");
  std::vector<std::string> h = split_ws(line);
  if (h.size() != 4 || h[0] != "synlm-probs" || h[1] != "v1" || h[2] != "vocab")
    fail("probs file: bad header");
  ProbStream s;
  s.vocab_hash = parse_u64(h[3]);
  while (std::getline(in, line)) {
    std::vector<std::string> t = split_ws(line);
    if (t.empty()) continue;
    if (t.size() != 4) fail("probs file: bad line '" + line + "'");
    s.entries.push_back({static_cast<std::uint32_t>(parse_u64(t[0])),
                         static_cast<std::uint32_t>(parse_u64(t[1])),
                         static_cast<WordId>(parse_u64(t[2])), parse_double(t[3])});
  }
  return s;
}

// --- report rendering --------------------------------------------------------

// Human table followed by machine-readable key=value lines; 4-decimal fixed
// formatting throughout.
inline std::string render_report(const PplReport& r) {
  std::string out = "sent\twords\tlogprob\tppl\n";
  for (std::size_t i = 0; i < r.sentences.size(); ++i) {
    const SentencePpl& s = r.sentences[i];
    if (s.failed) {
      out += std::to_string(i) + "\t-\t-\tFAILED\n";
      continue;
    }
    out += std::to_string(i) + "\t" + std::to_string(s.words) + "\t" + fmt_fixed4(s.logprob) +
           "\t" + fmt_fixed4(perplexity(s.logprob, s.words)) + "\n";
  }
  out += "sentences=" + std::to_string(r.sentences.size()) + "\n";
  out += "words=" + std::to_string(r.word_count) + "\n";
  out += "failures=" + std::to_string(r.failures) + "\n";
  out += "logprob=" + fmt_fixed4(r.total_logprob) + "\n";
  out += "ppl=" + fmt_fixed4(r.ppl) + "\n";
  return out;
}

}  // namespace synlm
