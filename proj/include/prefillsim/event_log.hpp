#pragma once

#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "prefillsim/types.hpp"

namespace prefillsim {

enum class EventKind {
  kArrival,
  kDispatch,
  kBatchComplete,
  kControllerTick,
  kMigration,
};

const char* to_string(EventKind k);

// One line of the event log. A single flat record covers every kind;
// fields irrelevant to a kind keep their defaults and are not written.
struct LogRecord {
  double t = 0;
  std::int64_t seq = 0;
  EventKind kind = EventKind::kArrival;

  // arrival
  RequestId req = -1;
  Tokens length = 0;
  Tokens history = 0;
  std::optional<double> deadline_ms;

  // dispatch / batch_complete
  int inst = -1;
  std::vector<RequestId> reqs;
  std::string cls;     // "short" | "long" | "mixed"
  std::string reason;  // dispatch trigger
  Tokens l_pad = 0;
  int depth = 0;  // shape depth (padded); member count = reqs.size()
  bool graph = false;
  Tokens real_tokens = 0;
  Tokens padded_tokens = 0;
  int chunk = 0;         // 1-based chunk index, 0 for unchunked batches
  int chunks_total = 0;  // 0 for unchunked batches
  double service_ms = 0;
  bool final_chunk = true;  // completion finishes its members' requests

  // controller_tick / migration
  int n_short = 0;
  int n_long = 0;
  double p_short = 0;
  double p_long = 0;
  bool migrated = false;
  std::string direction;  // "long_to_short" | "short_to_long"
};

struct LogParseError : std::runtime_error {
  explicit LogParseError(const std::string& what) : std::runtime_error(what) {}
};

// One line, fixed field order, %.6f times — byte-stable across runs.
std::string serialize(const LogRecord& r);

LogRecord parse_record(const std::string& line);
std::vector<LogRecord> parse_event_log(const std::string& text);

void write_event_log(const std::string& path,
                     std::span<const LogRecord> log);
std::vector<LogRecord> read_event_log(const std::string& path);

}  // namespace prefillsim
