#include "prefillsim/event_log.hpp"

#include <cinttypes>
#include <cstdarg>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace prefillsim {

const char* to_string(EventKind k) {
  switch (k) {
    case EventKind::kArrival: return "arrival";
    case EventKind::kDispatch: return "dispatch";
    case EventKind::kBatchComplete: return "batch_complete";
    case EventKind::kControllerTick: return "controller_tick";
    case EventKind::kMigration: return "migration";
  }
  return "?";
}

namespace {

EventKind kind_from(const std::string& s) {
  if (s == "arrival") return EventKind::kArrival;
  if (s == "dispatch") return EventKind::kDispatch;
  if (s == "batch_complete") return EventKind::kBatchComplete;
  if (s == "controller_tick") return EventKind::kControllerTick;
  if (s == "migration") return EventKind::kMigration;
  throw LogParseError("unknown event kind: " + s);
}

void append(std::string& out, const char* fmt, ...) {
  char buf[256];
  va_list ap;
  va_start(ap, fmt);
  vsnprintf(buf, sizeof(buf), fmt, ap);
  va_end(ap);
  out += buf;
}

void append_ids(std::string& out, const std::vector<RequestId>& ids) {
  out += '[';
  for (size_t i = 0; i < ids.size(); ++i) {
    if (i) out += ',';
    append(out, "%" PRId64, ids[i]);
  }
  out += ']';
}

}  // namespace

std::string serialize(const LogRecord& r) {
  std::string out;
  out.reserve(160);
  append(out, "{\"t\":%.6f,\"seq\":%" PRId64 ",\"kind\":\"%s\"", r.t, r.seq,
         to_string(r.kind));
  switch (r.kind) {
    case EventKind::kArrival:
      append(out, ",\"req\":%" PRId64 ",\"cls\":\"%s\",\"L\":%" PRId64
                  ",\"H\":%" PRId64,
             r.req, r.cls.c_str(), r.length, r.history);
      if (r.deadline_ms) append(out, ",\"ddl\":%.6f", *r.deadline_ms);
      break;
    case EventKind::kDispatch:
      append(out, ",\"inst\":%d,\"reqs\":", r.inst);
      append_ids(out, r.reqs);
      append(out, ",\"cls\":\"%s\",\"reason\":\"%s\",\"l_pad\":%" PRId64
                  ",\"depth\":%d,\"graph\":%d,\"real\":%" PRId64
                  ",\"padded\":%" PRId64 ",\"chunk\":%d,\"chunks\":%d",
             r.cls.c_str(), r.reason.c_str(), r.l_pad, r.depth,
             r.graph ? 1 : 0, r.real_tokens, r.padded_tokens, r.chunk,
             r.chunks_total);
      break;
    case EventKind::kBatchComplete:
      append(out, ",\"inst\":%d,\"reqs\":", r.inst);
      append_ids(out, r.reqs);
      append(out, ",\"cls\":\"%s\",\"service\":%.6f,\"chunk\":%d,"
                  "\"chunks\":%d,\"final\":%d",
             r.cls.c_str(), r.service_ms, r.chunk, r.chunks_total,
             r.final_chunk ? 1 : 0);
      break;
    case EventKind::kControllerTick:
      append(out, ",\"n_s\":%d,\"n_l\":%d,\"p_s\":%.6f,\"p_l\":%.6f,"
                  "\"migrated\":%d",
             r.n_short, r.n_long, r.p_short, r.p_long, r.migrated ? 1 : 0);
      break;
    case EventKind::kMigration:
      append(out, ",\"inst\":%d,\"dir\":\"%s\",\"n_s\":%d,\"n_l\":%d",
             r.inst, r.direction.c_str(), r.n_short, r.n_long);
      break;
  }
  out += '}';
  return out;
}

LogRecord parse_record(const std::string& line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw LogParseError(std::string("bad log line: ") + e.what());
  }
  LogRecord r;
  try {
    r.t = j.at("t").get<double>();
    r.seq = j.at("seq").get<std::int64_t>();
    r.kind = kind_from(j.at("kind").get<std::string>());
    switch (r.kind) {
      case EventKind::kArrival:
        r.req = j.at("req").get<RequestId>();
        r.cls = j.at("cls").get<std::string>();
        r.length = j.at("L").get<Tokens>();
        r.history = j.at("H").get<Tokens>();
        if (j.contains("ddl")) r.deadline_ms = j.at("ddl").get<double>();
        break;
      case EventKind::kDispatch:
        r.inst = j.at("inst").get<int>();
        r.reqs = j.at("reqs").get<std::vector<RequestId>>();
        r.cls = j.at("cls").get<std::string>();
        r.reason = j.at("reason").get<std::string>();
        r.l_pad = j.at("l_pad").get<Tokens>();
        r.depth = j.at("depth").get<int>();
        r.graph = j.at("graph").get<int>() != 0;
        r.real_tokens = j.at("real").get<Tokens>();
        r.padded_tokens = j.at("padded").get<Tokens>();
        r.chunk = j.at("chunk").get<int>();
        r.chunks_total = j.at("chunks").get<int>();
        break;
      case EventKind::kBatchComplete:
        r.inst = j.at("inst").get<int>();
        r.reqs = j.at("reqs").get<std::vector<RequestId>>();
        r.cls = j.at("cls").get<std::string>();
        r.service_ms = j.at("service").get<double>();
        r.chunk = j.at("chunk").get<int>();
        r.chunks_total = j.at("chunks").get<int>();
        r.final_chunk = j.at("final").get<int>() != 0;
        break;
      case EventKind::kControllerTick:
        r.n_short = j.at("n_s").get<int>();
        r.n_long = j.at("n_l").get<int>();
        r.p_short = j.at("p_s").get<double>();
        r.p_long = j.at("p_l").get<double>();
        r.migrated = j.at("migrated").get<int>() != 0;
        break;
      case EventKind::kMigration:
        r.inst = j.at("inst").get<int>();
        r.direction = j.at("dir").get<std::string>();
        r.n_short = j.at("n_s").get<int>();
        r.n_long = j.at("n_l").get<int>();
        break;
    }
  } catch (const nlohmann::json::exception& e) {
    throw LogParseError(std::string("missing log field: ") + e.what());
  }
  return r;
}

std::vector<LogRecord> parse_event_log(const std::string& text) {
  std::vector<LogRecord> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    out.push_back(parse_record(line));
  }
  return out;
}

void write_event_log(const std::string& path,
                     std::span<const LogRecord> log) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  for (const auto& r : log) {
    out << serialize(r) << '\n';
  }
}

std::vector<LogRecord> read_event_log(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_event_log(ss.str());
}

}  // namespace prefillsim
