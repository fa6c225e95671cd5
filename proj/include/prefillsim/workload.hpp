#pragma once

// Request streams: seeded synthetic generation (Poisson arrivals, two-point
// length mixtures, multi-turn sessions) and JSONL trace loading/saving.

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "prefillsim/types.hpp"

namespace prefillsim {

struct Request {
  RequestId id = 0;
  std::int64_t session_id = 0;
  int turn = 1;                // 1-based; turn 1 has no history
  Tokens new_tokens = 1;       // L
  Tokens history_tokens = 0;   // H, cumulative context from prior turns
  double arrival_ms = 0;
  std::optional<double> deadline_ms;  // absolute, > arrival when present

  bool operator==(const Request&) const = default;
};

// Uniform integer distribution over [lo, hi] tokens, inclusive.
struct LengthDist {
  Tokens lo = 1;
  Tokens hi = 1;
};

struct IntRange {
  int lo = 1;
  int hi = 1;
};

struct SynthConfig {
  double lambda_per_ms = 0.01;       // merged-stream Poisson rate
  double short_fraction = 0.63;      // turn-1 mixture weight on short_len
  double short_fraction_later = 0.63;  // later-turn mixture weight
  LengthDist short_len{8, 255};
  LengthDist long_len{256, 2048};
  IntRange turns_per_session{1, 1};
  std::optional<double> slo_offset_ms;  // deadline = arrival + offset
  std::optional<double> duration_ms;    // cap this stream's horizon
  std::uint64_t seed = 1;
};

struct InvalidConfig : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ParseError : std::runtime_error {
  ParseError(const std::string& msg, int line)
      : std::runtime_error("line " + std::to_string(line) + ": " + msg),
        line_number(line) {}
  int line_number;
};
struct InvariantViolation : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Deterministic for a fixed (config, duration): ids sequential in arrival
// order, inter-arrivals i.i.d. exponential(lambda), sessions interleaved,
// turn-k history = cumulative prompt tokens of turns 1..k-1.
std::vector<Request> synth_stream(const SynthConfig& cfg, double duration_ms);

// JSONL, one request per line. Fields: session_id, turn, arrival_ms,
// new_tokens; optional gen_tokens, history_tokens, deadline_ms; unknown
// fields ignored. Missing history is reconstructed as the cumulative
// (new_tokens + gen_tokens) of the session's earlier turns. Result is
// sorted by arrival time with ids assigned in that order.
std::vector<Request> load_trace(const std::string& path);

// Inverse of load_trace up to id renumbering; history_tokens is always
// written so reloading reproduces H exactly.
void save_trace(const std::string& path, std::span<const Request> requests);

enum class LengthClass { kShort, kLong };

// Short iff L <= boundary for the request's kind (first prefill vs
// re-prefill); equality classifies as Short.
LengthClass classify(const Request& r, Tokens l_m_first, Tokens l_m_re);

// Merge two streams into one arrival-ordered stream with fresh ids and
// disjoint session ids.
std::vector<Request> merge_streams(std::vector<Request> a,
                                   std::vector<Request> b);

// Shift every arrival (and deadline, when present) by dt_ms.
std::vector<Request> shift_stream(std::vector<Request> v, double dt_ms);

}  // namespace prefillsim
