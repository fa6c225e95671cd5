#include "prefillsim/workload.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

#include <json.hpp>

namespace prefillsim {

namespace {

// Draws are built from raw mt19937_64 output only, so streams are
// reproducible across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  double uniform() {  // [0, 1)
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }
  double exponential(double rate) { return -std::log1p(-uniform()) / rate; }
  Tokens uniform_int(Tokens lo, Tokens hi) {
    const auto span = static_cast<std::uint64_t>(hi - lo + 1);
    return lo + static_cast<Tokens>(gen_() % span);
  }

 private:
  std::mt19937_64 gen_;
};

void check(const SynthConfig& c) {
  if (!(c.lambda_per_ms > 0)) throw InvalidConfig("lambda must be > 0");
  for (double f : {c.short_fraction, c.short_fraction_later}) {
    if (f < 0 || f > 1) throw InvalidConfig("mixture fraction outside [0,1]");
  }
  for (const auto& d : {c.short_len, c.long_len}) {
    if (d.lo < 1 || d.hi < d.lo) throw InvalidConfig("bad length range");
  }
  if (c.turns_per_session.lo < 1 ||
      c.turns_per_session.hi < c.turns_per_session.lo) {
    throw InvalidConfig("bad turns_per_session range");
  }
  if (c.slo_offset_ms && !(*c.slo_offset_ms > 0)) {
    throw InvalidConfig("slo_offset must be > 0");
  }
}

}  // namespace

std::vector<Request> synth_stream(const SynthConfig& cfg, double duration_ms) {
  check(cfg);
  Rng rng(cfg.seed);

  struct OpenSession {
    std::int64_t sid;
    int next_turn;
    int remaining;
    Tokens cum_tokens;
  };
  std::deque<OpenSession> open;
  std::int64_t next_sid = 0;
  const double mean_turns =
      0.5 * (cfg.turns_per_session.lo + cfg.turns_per_session.hi);
  const double p_new = 1.0 / mean_turns;

  std::vector<Request> out;
  double t = 0;
  for (;;) {
    t += rng.exponential(cfg.lambda_per_ms);
    if (t > duration_ms) break;

    bool fresh = open.empty() || rng.uniform() < p_new;
    OpenSession s;
    if (fresh) {
      const int turns = static_cast<int>(
          rng.uniform_int(cfg.turns_per_session.lo, cfg.turns_per_session.hi));
      s = {next_sid++, 1, turns, 0};
    } else {
      s = open.front();
      open.pop_front();
    }

    const double frac =
        s.next_turn == 1 ? cfg.short_fraction : cfg.short_fraction_later;
    const auto& dist = rng.uniform() < frac ? cfg.short_len : cfg.long_len;

    Request r;
    r.id = static_cast<RequestId>(out.size());
    r.session_id = s.sid;
    r.turn = s.next_turn;
    r.new_tokens = rng.uniform_int(dist.lo, dist.hi);
    r.history_tokens = s.cum_tokens;
    r.arrival_ms = t;
    if (cfg.slo_offset_ms) r.deadline_ms = t + *cfg.slo_offset_ms;
    out.push_back(r);

    s.cum_tokens += r.new_tokens;
    s.next_turn += 1;
    s.remaining -= 1;
    if (s.remaining > 0) open.push_back(s);
  }
  return out;
}

std::vector<Request> load_trace(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path, 0);

  struct Raw {
    Request req;
    Tokens gen_tokens = 0;
    bool explicit_history = false;
    int line = 0;
    size_t order = 0;
  };
  std::vector<Raw> raws;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(e.what(), lineno);
    }
    Raw raw;
    raw.line = lineno;
    raw.order = raws.size();
    try {
      raw.req.session_id = j.at("session_id").get<std::int64_t>();
      raw.req.turn = j.at("turn").get<int>();
      raw.req.arrival_ms = j.at("arrival_ms").get<double>();
      raw.req.new_tokens = j.at("new_tokens").get<Tokens>();
      if (j.contains("gen_tokens")) raw.gen_tokens = j["gen_tokens"].get<Tokens>();
      if (j.contains("history_tokens")) {
        raw.req.history_tokens = j["history_tokens"].get<Tokens>();
        raw.explicit_history = true;
      }
      if (j.contains("deadline_ms")) {
        raw.req.deadline_ms = j["deadline_ms"].get<double>();
      }
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(e.what(), lineno);
    }
    if (raw.req.turn < 1) throw ParseError("turn must be >= 1", lineno);
    if (raw.req.new_tokens < 1) throw ParseError("new_tokens must be >= 1", lineno);
    if (raw.req.arrival_ms < 0) throw ParseError("arrival_ms must be >= 0", lineno);
    if (raw.gen_tokens < 0) throw ParseError("gen_tokens must be >= 0", lineno);
    raws.push_back(std::move(raw));
  }

  // Per session: turns strictly increasing, arrivals non-decreasing along
  // turns, turn 1 carries no history; fill in missing history cumulatively.
  std::map<std::int64_t, std::vector<Raw*>> sessions;
  for (auto& r : raws) sessions[r.req.session_id].push_back(&r);
  for (auto& [sid, recs] : sessions) {
    std::sort(recs.begin(), recs.end(), [](const Raw* a, const Raw* b) {
      return a->req.turn < b->req.turn;
    });
    Tokens cum = 0;
    double prev_arrival = -1;
    int prev_turn = 0;
    for (Raw* r : recs) {
      if (r->req.turn == prev_turn) {
        throw InvariantViolation("session " + std::to_string(sid) +
                                 ": duplicate turn " +
                                 std::to_string(r->req.turn));
      }
      if (r->req.arrival_ms < prev_arrival) {
        throw InvariantViolation("session " + std::to_string(sid) +
                                 ": arrivals decrease across turns");
      }
      if (r->req.turn == 1 && r->explicit_history &&
          r->req.history_tokens != 0) {
        throw InvariantViolation("session " + std::to_string(sid) +
                                 ": turn 1 with nonzero history");
      }
      if (r->explicit_history) {
        cum = r->req.history_tokens;
      } else {
        r->req.history_tokens = cum;
      }
      if (r->req.deadline_ms && *r->req.deadline_ms <= r->req.arrival_ms) {
        throw InvariantViolation("session " + std::to_string(sid) +
                                 ": deadline not after arrival");
      }
      cum += r->req.new_tokens + r->gen_tokens;
      prev_arrival = r->req.arrival_ms;
      prev_turn = r->req.turn;
    }
  }

  std::sort(raws.begin(), raws.end(), [](const Raw& a, const Raw& b) {
    if (a.req.arrival_ms != b.req.arrival_ms)
      return a.req.arrival_ms < b.req.arrival_ms;
    return a.order < b.order;
  });
  std::vector<Request> out;
  out.reserve(raws.size());
  for (auto& r : raws) {
    r.req.id = static_cast<RequestId>(out.size());
    out.push_back(r.req);
  }
  return out;
}

void save_trace(const std::string& path, std::span<const Request> requests) {
  std::ofstream outf(path);
  if (!outf) throw InvalidConfig("cannot write " + path);
  for (const auto& r : requests) {
    nlohmann::ordered_json j;
    j["session_id"] = r.session_id;
    j["turn"] = r.turn;
    j["arrival_ms"] = r.arrival_ms;
    j["new_tokens"] = r.new_tokens;
    j["history_tokens"] = r.history_tokens;
    if (r.deadline_ms) j["deadline_ms"] = *r.deadline_ms;
    outf << j.dump() << "\n";
  }
}

LengthClass classify(const Request& r, Tokens l_m_first, Tokens l_m_re) {
  const Tokens boundary = r.turn == 1 ? l_m_first : l_m_re;
  return r.new_tokens <= boundary ? LengthClass::kShort : LengthClass::kLong;
}

std::vector<Request> merge_streams(std::vector<Request> a,
                                   std::vector<Request> b) {
  std::int64_t max_sid = -1;
  for (const auto& r : a) max_sid = std::max(max_sid, r.session_id);
  for (auto& r : b) r.session_id += max_sid + 1;
  a.insert(a.end(), b.begin(), b.end());
  std::stable_sort(a.begin(), a.end(), [](const Request& x, const Request& y) {
    return x.arrival_ms < y.arrival_ms;
  });
  for (size_t i = 0; i < a.size(); ++i) a[i].id = static_cast<RequestId>(i);
  return a;
}

std::vector<Request> shift_stream(std::vector<Request> v, double dt_ms) {
  for (auto& r : v) {
    r.arrival_ms += dt_ms;
    if (r.deadline_ms) *r.deadline_ms += dt_ms;
  }
  return v;
}

}  // namespace prefillsim
