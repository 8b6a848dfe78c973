#pragma once

// Order-n conditional models smoothed by recursive deleted interpolation:
//   P(y|x1..xn) = lambda(x1..xn) * P(y|x1..x_{n-1}) + (1-lambda(x1..xn)) * f_n(y|x1..xn)
// grounded at the uniform distribution over the outcome vocabulary. Contexts
// are stored nearest-element-first; backing off drops the most distant
// element, i.e. the last tuple slot. Lambdas are tied by the count range of
// the conditioning context and estimated on check data with EM.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "synlm/util.hpp"

namespace synlm {

using CountMap = std::unordered_map<IdTuple, double, IdTupleHash>;

class CountTable {
 public:
  CountTable() : order_(0), counts_(1), totals_(1) {}
  explicit CountTable(std::size_t order)
      : order_(order), counts_(order + 1), totals_(order + 1) {}

  std::size_t order() const { return order_; }

  // Accumulates one event at the full order; every lower order is updated in
  // the same call, which keeps derived counts equal to marginalizing the top
  // order over its most distant context element.
  void add(const IdTuple& context, std::uint32_t outcome, double weight) {
    if (weight < 0) fail("CountTable::add: negative weight");
    if (context.size() != order_) fail("CountTable::add: context length != order");
    for (std::size_t k = 0; k <= order_; ++k) {
      IdTuple ctx = context.prefix(k);
      counts_[k][ctx.with(outcome)] += weight;
      totals_[k][ctx] += weight;
    }
  }

  double count(const IdTuple& context, std::uint32_t outcome) const {
    const CountMap& m = counts_[context.size()];
    auto it = m.find(context.with(outcome));
    return it == m.end() ? 0.0 : it->second;
  }

  double context_total(const IdTuple& context) const {
    const CountMap& m = totals_[context.size()];
    auto it = m.find(context);
    return it == m.end() ? 0.0 : it->second;
  }

  double total() const { return context_total(IdTuple{}); }
  bool empty() const { return counts_[0].empty(); }

  const CountMap& events(std::size_t k) const { return counts_[k]; }
  const CountMap& totals(std::size_t k) const { return totals_[k]; }

  void merge_from(const CountTable& other) {
    if (other.order_ != order_) fail("CountTable::merge: order mismatch");
    for (std::size_t k = 0; k <= order_; ++k) {
      for (const auto& [key, w] : other.counts_[k]) counts_[k][key] += w;
      for (const auto& [key, w] : other.totals_[k]) totals_[k][key] += w;
    }
  }

  // Used by deserialization, which restores both maps verbatim so a reloaded
  // table is value-identical to the one written out.
  void set_raw(std::size_t k, const IdTuple& key, double count_w, bool is_total) {
    (is_total ? totals_ : counts_)[k][key] = count_w;
  }

 private:
  std::size_t order_;
  std::vector<CountMap> counts_;  // counts_[k]: (context prefix of length k) + outcome -> weight
  std::vector<CountMap> totals_;  // totals_[k]: context prefix of length k -> weight
};

inline CountTable merge(const std::vector<CountTable>& tables) {
  if (tables.empty()) fail("merge: no tables");
  CountTable out(tables.front().order());
  for (const CountTable& t : tables) out.merge_from(t);
  return out;
}

struct LambdaBuckets {
  std::vector<double> edges;                 // ascending count thresholds, first is 0
  std::vector<std::vector<double>> lambda;   // [order k][bucket]

  static LambdaBuckets uniform(std::size_t order, std::vector<double> edges_in, double value = 0.5) {
    if (edges_in.empty() || edges_in.front() != 0.0) fail("LambdaBuckets: edges must start at 0");
    for (std::size_t i = 1; i < edges_in.size(); ++i)
      if (edges_in[i] <= edges_in[i - 1]) fail("LambdaBuckets: edges must be strictly ascending");
    LambdaBuckets b;
    b.edges = std::move(edges_in);
    b.lambda.assign(order + 1, std::vector<double>(b.edges.size(), value));
    return b;
  }

  std::size_t bucket_count() const { return edges.size(); }
  std::size_t max_order() const { return lambda.size() - 1; }

  std::size_t bucket_of(double context_count) const {
    if (context_count < 0) fail("bucket_of: negative count");
    // index of the half-open range [edge_i, edge_{i+1}) containing the count;
    // the last bucket is unbounded above
    auto it = std::upper_bound(edges.begin(), edges.end(), context_count);
    return static_cast<std::size_t>(it - edges.begin()) - 1;
  }

  double get(std::size_t order, double context_count) const {
    return lambda[order][bucket_of(context_count)];
  }
};

inline std::size_t bucket_of(const LambdaBuckets& b, double context_count) {
  return b.bucket_of(context_count);
}

inline std::vector<double> default_bucket_edges() {
  return {0, 1, 2, 4, 8, 16, 32, 64, 128, 256};
}

constexpr double kLambdaFloor = 0.001;
constexpr double kLambdaCeil = 0.999;

struct SmoothedModel {
  CountTable table;
  LambdaBuckets lambdas;
  std::size_t outcome_vocab_size = 0;

  std::size_t order() const { return table.order(); }

  // Deleted-interpolation recursion, evaluated bottom-up from the uniform
  // ground. Contexts never seen in training fall through to the next lower
  // order (their relative-frequency estimate is undefined), which keeps the
  // distribution normalized.
  double prob(const IdTuple& context, std::uint32_t outcome) const {
    if (context.size() != table.order()) fail("SmoothedModel::prob: context length != order");
    double p = 1.0 / static_cast<double>(outcome_vocab_size);
    for (std::size_t k = 0; k <= table.order(); ++k) {
      IdTuple ctx = context.prefix(k);
      double tot = table.context_total(ctx);
      if (tot <= 0.0) continue;
      double f = table.count(ctx, outcome) / tot;
      double lam = lambdas.get(k, tot);
      p = lam * p + (1.0 - lam) * f;
    }
    return p;
  }
};

struct LambdaEmResult {
  LambdaBuckets lambdas;
  // log_likelihood[i] is the check-data log-likelihood under the lambdas in
  // effect at the start of iteration i; the last entry is the final model.
  std::vector<double> log_likelihood;
};

// EM over the tied interpolation weights. Each check event descends the
// back-off chain; the E-step splits its mass at every order between "back
// off" and "stop here" in proportion to the mixture posteriors, and the
// M-step re-estimates each (order, bucket) weight as its expected back-off
// fraction, clamped to [kLambdaFloor, kLambdaCeil]. Orders whose context is
// unseen in training are skipped (they back off with probability one and are
// not estimated).
inline LambdaEmResult estimate_lambdas_em_trace(const CountTable& train,
                                                std::size_t outcome_vocab_size,
                                                const std::vector<double>& edges,
                                                const CountTable& check,
                                                std::size_t iters) {
  if (iters < 1) fail("estimate_lambdas_em: iters must be >= 1");
  if (check.order() != train.order()) fail("estimate_lambdas_em: order mismatch");
  if (check.empty()) fail("estimate_lambdas_em: empty check counts");

  const std::size_t order = train.order();
  LambdaEmResult res;
  res.lambdas = LambdaBuckets::uniform(order, edges, 0.5);
  LambdaBuckets& lb = res.lambdas;

  const CountMap& events = check.events(order);
  std::vector<double> p(order + 2);       // p[k+1] = mixture prob through order k
  std::vector<double> f(order + 1);
  std::vector<double> lam(order + 1);
  std::vector<std::size_t> bucket(order + 1);
  std::vector<bool> seen(order + 1);

  for (std::size_t iter = 0; iter <= iters; ++iter) {
    std::vector<std::vector<double>> go(order + 1, std::vector<double>(lb.bucket_count(), 0.0));
    std::vector<std::vector<double>> stay(order + 1, std::vector<double>(lb.bucket_count(), 0.0));
    double ll = 0.0;
    for (const auto& [key, w] : events) {
      std::uint32_t y = key.back();
      p[0] = 1.0 / static_cast<double>(outcome_vocab_size);
      for (std::size_t k = 0; k <= order; ++k) {
        IdTuple ctx = key.prefix(k);
        double tot = train.context_total(ctx);
        if (tot <= 0.0) {
          seen[k] = false;
          p[k + 1] = p[k];
          continue;
        }
        seen[k] = true;
        f[k] = train.count(ctx, y) / tot;
        bucket[k] = lb.bucket_of(tot);
        lam[k] = lb.lambda[k][bucket[k]];
        p[k + 1] = lam[k] * p[k] + (1.0 - lam[k]) * f[k];
      }
      ll += w * std::log(p[order + 1]);
      if (iter == iters) continue;  // final pass only records the likelihood
      double reach = w;
      for (std::size_t k = order + 1; k-- > 0;) {
        if (!seen[k]) continue;
        double back = reach * (lam[k] * p[k] / p[k + 1]);
        go[k][bucket[k]] += back;
        stay[k][bucket[k]] += reach - back;
        reach = back;
      }
    }
    res.log_likelihood.push_back(ll);
    if (iter == iters) break;
    for (std::size_t k = 0; k <= order; ++k)
      for (std::size_t b = 0; b < lb.bucket_count(); ++b) {
        double denom = go[k][b] + stay[k][b];
        if (denom > 0.0)
          lb.lambda[k][b] = std::clamp(go[k][b] / denom, kLambdaFloor, kLambdaCeil);
      }
  }
  return res;
}

inline LambdaBuckets estimate_lambdas_em(const SmoothedModel& m, const CountTable& check_counts,
                                         std::size_t iters) {
  return estimate_lambdas_em_trace(m.table, m.outcome_vocab_size, m.lambdas.edges, check_counts, iters)
      .lambdas;
}

// --- serialization -------------------------------------------------------
//
// A model is written as one block inside a versioned file:
//   model <name>
//   order <n>
//   outcomes <V>
//   edges <e0> <e1> ...
//   count <k> <ctx ids...> <outcome id> <weight>
//   total <k> <ctx ids...> <weight>
//   lambda <k> <b> <value>
//   end
// Keys are emitted in sorted order and weights with shortest round-trip
// formatting, so writing is deterministic and reloading is value-exact.

inline void write_model_block(std::string& out, const std::string& name, const SmoothedModel& m) {
  out += "model " + name + "\n";
  out += "order " + std::to_string(m.table.order()) + "\n";
  out += "outcomes " + std::to_string(m.outcome_vocab_size) + "\n";
  out += "edges";
  for (double e : m.lambdas.edges) out += " " + fmt_double(e);
  out += "\n";
  for (std::size_t k = 0; k <= m.table.order(); ++k) {
    std::vector<std::pair<IdTuple, double>> rows(m.table.events(k).begin(), m.table.events(k).end());
    std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    for (const auto& [key, w] : rows) {
      out += "count " + std::to_string(k);
      for (std::size_t i = 0; i < key.size(); ++i) out += " " + std::to_string(key[i]);
      out += " " + fmt_double(w) + "\n";
    }
    std::vector<std::pair<IdTuple, double>> trows(m.table.totals(k).begin(), m.table.totals(k).end());
    std::sort(trows.begin(), trows.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    for (const auto& [key, w] : trows) {
      out += "total " + std::to_string(k);
      for (std::size_t i = 0; i < key.size(); ++i) out += " " + std::to_string(key[i]);
      out += " " + fmt_double(w) + "\n";
    }
  }
  for (std::size_t k = 0; k < m.lambdas.lambda.size(); ++k)
    for (std::size_t b = 0; b < m.lambdas.bucket_count(); ++b)
      out += "lambda " + std::to_string(k) + " " + std::to_string(b) + " " +
             fmt_double(m.lambdas.lambda[k][b]) + "\n";
  out += "end\n";
}

// Reads one block from `lines` starting at `pos` (which must point at the
// "model <name>" line); advances pos past "end".
inline SmoothedModel read_model_block(const std::vector<std::string>& lines, std::size_t& pos,
                                      std::string* name_out = nullptr) {
  auto next = [&]() -> std::vector<std::string> {
    if (pos >= lines.size()) fail("model block: unexpected end of file");
    return split_ws(lines[pos++]);
  };
  std::vector<std::string> t = next();
  if (t.size() != 2 || t[0] != "model") fail("model block: expected 'model <name>'");
  if (name_out) *name_out = t[1];
  t = next();
  if (t.size() != 2 || t[0] != "order") fail("model block: expected 'order <n>'");
  SmoothedModel m;
  std::size_t order = parse_u64(t[1]);
  m.table = CountTable(order);
  t = next();
  if (t.size() != 2 || t[0] != "outcomes") fail("model block: expected 'outcomes <V>'");
  m.outcome_vocab_size = parse_u64(t[1]);
  t = next();
  if (t.size() < 2 || t[0] != "edges") fail("model block: expected 'edges ...'");
  std::vector<double> edges;
  for (std::size_t i = 1; i < t.size(); ++i) edges.push_back(parse_double(t[i]));
  m.lambdas = LambdaBuckets::uniform(order, edges, 0.5);
  for (;;) {
    t = next();
    if (t.empty()) continue;
    if (t[0] == "end") break;
    if (t[0] == "count" || t[0] == "total") {
      bool is_total = t[0] == "total";
      if (t.size() < 3) fail("model block: short " + t[0] + " line");
      std::size_t k = parse_u64(t[1]);
      std::size_t key_len = t.size() - 3;
      IdTuple key;
      for (std::size_t i = 0; i < key_len; ++i)
        key.push_back(static_cast<std::uint32_t>(parse_u64(t[2 + i])));
      double w = parse_double(t.back());
      if (k > order || key.size() != (is_total ? k : k + 1)) fail("model block: bad key length");
      m.table.set_raw(k, key, w, is_total);
    } else if (t[0] == "lambda") {
      if (t.size() != 4) fail("model block: bad lambda line");
      std::size_t k = parse_u64(t[1]);
      std::size_t b = parse_u64(t[2]);
      if (k > order || b >= m.lambdas.bucket_count()) fail("model block: lambda index out of range");
      m.lambdas.lambda[k][b] = parse_double(t[3]);
    } else {
      fail("model block: unknown line '" + t[0] + "'");
    }
  }
  return m;
}

}  // namespace synlm
