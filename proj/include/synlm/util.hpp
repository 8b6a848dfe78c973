#pragma once

#include <array>
#include <atomic>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <initializer_list>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace synlm {

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

[[noreturn]] inline void fail(const std::string& msg) { throw Error(msg); }

// Small fixed-capacity tuple of ids used for model contexts (nearest element
// first) and context+outcome event keys. Unused slots stay zero so the
// defaulted comparison and the hash below are well defined.
struct IdTuple {
  static constexpr std::size_t kMaxLen = 6;

  std::array<std::uint32_t, kMaxLen> v{};
  std::uint8_t len = 0;

  IdTuple() = default;
  IdTuple(std::initializer_list<std::uint32_t> xs) {
    for (std::uint32_t x : xs) push_back(x);
  }

  void push_back(std::uint32_t x) {
    if (len >= kMaxLen) fail("IdTuple overflow");
    v[len++] = x;
  }

  std::size_t size() const { return len; }
  std::uint32_t operator[](std::size_t i) const { return v[i]; }
  std::uint32_t back() const { return v[len - 1]; }

  IdTuple prefix(std::size_t n) const {
    IdTuple t;
    for (std::size_t i = 0; i < n; ++i) t.push_back(v[i]);
    return t;
  }

  IdTuple with(std::uint32_t outcome) const {
    IdTuple t = *this;
    t.push_back(outcome);
    return t;
  }

  friend bool operator==(const IdTuple& a, const IdTuple& b) = default;
  friend auto operator<=>(const IdTuple& a, const IdTuple& b) = default;
};

struct IdTupleHash {
  std::size_t operator()(const IdTuple& t) const {
    std::uint64_t h = 1469598103934665603ull;
    for (std::size_t i = 0; i < t.len; ++i) {
      h ^= t.v[i];
      h *= 1099511628211ull;
    }
    h ^= t.len;
    h *= 1099511628211ull;
    return static_cast<std::size_t>(h);
  }
};

inline std::uint64_t fnv1a(std::string_view s, std::uint64_t seed = 1469598103934665603ull) {
  std::uint64_t h = seed;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

// Shortest decimal representation that round-trips; used by every machine
// file format so serialization is bit-exact.
inline std::string fmt_double(double x) {
  std::array<char, 64> buf;
  auto res = std::to_chars(buf.data(), buf.data() + buf.size(), x);
  return std::string(buf.data(), res.ptr);
}

inline double parse_double(std::string_view s) {
  double x = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), x);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
    fail("bad float literal: '" + std::string(s) + "'");
  return x;
}

inline std::uint64_t parse_u64(std::string_view s) {
  std::uint64_t x = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), x);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
    fail("bad integer literal: '" + std::string(s) + "'");
  return x;
}

// Fixed 4-decimal formatting for human-facing reports.
inline std::string fmt_fixed4(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.4f", x);
  return buf;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string> split_ws(std::string_view s) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < s.size() && s[j] != ' ' && s[j] != '\t' && s[j] != '\r') ++j;
    if (j > i) out.emplace_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail("cannot write file: " + path);
  out << content;
  if (!out) fail("write failed: " + path);
}

inline std::vector<std::string> read_lines(const std::string& path) {
  std::vector<std::string> lines;
  std::istringstream in(read_file(path));
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

// Runs fn(i) for i in [0, n) on `workers` threads. Each index is processed
// exactly once and writes only its own output slot, so results do not depend
// on the worker count or scheduling.
inline void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn) {
  if (workers == 0) workers = std::thread::hardware_concurrency();
  if (workers <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  std::exception_ptr err;
  std::atomic<bool> failed{false};
  std::mutex err_mu;
  auto work = [&] {
    for (;;) {
      std::size_t i = next.fetch_add(1);
      if (i >= n || failed.load()) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mu);
        if (!failed.exchange(true)) err = std::current_exception();
        return;
      }
    }
  };
  std::size_t spawn = std::min(workers, n);
  pool.reserve(spawn);
  for (std::size_t t = 0; t < spawn; ++t) pool.emplace_back(work);
  for (auto& th : pool) th.join();
  if (failed.load() && err) std::rethrow_exception(err);
}

}  // namespace synlm
