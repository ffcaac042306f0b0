#pragma once

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>

#include <json.hpp>

#include "fewshot/protocol.hpp"
#include "fewshot/service/store.hpp"

namespace fewshot::service {

enum class SeedPolicy { Fresh, Fixed };

struct ServerConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  ExperimentKind kind = ExperimentKind::Exp1;  // used when a request names no kind
  SeedPolicy seed_policy = SeedPolicy::Fresh;
  std::uint64_t seed = 0;                    // the seed under the fixed policy
  std::optional<std::uint64_t> entropy_seed;  // makes ids and fresh seeds reproducible
  std::string data_dir = "data";
  std::string static_dir;  // UI bundle; empty serves a built-in page
  std::size_t max_sessions = 100000;
  bool fsync = false;

  void validate() const {
    if (port < 0 || port > 65535) throw Error(Errc::InvalidConfig, "port out of range");
    if (data_dir.empty()) throw Error(Errc::InvalidConfig, "data_dir must be set");
    if (max_sessions == 0) throw Error(Errc::InvalidConfig, "max_sessions must be positive");
  }

  std::filesystem::path log_path() const { return std::filesystem::path(data_dir) / "events.jsonl"; }
};

inline constexpr const char* kDataDirEnv = "FEWSHOT_DATA_DIR";

inline ServerConfig server_config_from_json(const nlohmann::json& j) {
  ServerConfig c;
  for (const auto& [k, v] : j.items()) {
    if (k == "host") c.host = v.get<std::string>();
    else if (k == "port") c.port = v.get<int>();
    else if (k == "kind") c.kind = parse_experiment_kind(v.get<std::string>());
    else if (k == "seed_policy") {
      const auto s = v.get<std::string>();
      if (s == "fresh") c.seed_policy = SeedPolicy::Fresh;
      else if (s == "fixed") c.seed_policy = SeedPolicy::Fixed;
      else throw Error(Errc::InvalidConfig, "seed_policy must be fresh or fixed");
    } else if (k == "seed") c.seed = v.get<std::uint64_t>();
    else if (k == "entropy_seed") c.entropy_seed = v.get<std::uint64_t>();
    else if (k == "data_dir") c.data_dir = v.get<std::string>();
    else if (k == "static_dir") c.static_dir = v.get<std::string>();
    else if (k == "max_sessions") c.max_sessions = v.get<std::size_t>();
    else if (k == "fsync") c.fsync = v.get<bool>();
    else throw Error(Errc::InvalidConfig, "unknown config field: " + k);
  }
  if (const char* dir = std::getenv(kDataDirEnv); dir && *dir) c.data_dir = dir;
  c.validate();
  return c;
}

/// Wall-clock milliseconds; replaceable for tests.
using Clock = std::function<std::int64_t()>;

inline std::int64_t wall_clock_ms() {
  using namespace std::chrono;
  return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
}

inline nlohmann::json error_json(Errc code, std::string_view message) {
  return {{"error", {{"code", to_string(code)}, {"message", message}}}};
}

class SessionService {
 public:
  explicit SessionService(ServerConfig cfg, Clock clock = wall_clock_ms)
      : cfg_(validated(std::move(cfg))),
        clock_(std::move(clock)),
        store_(std::make_unique<SessionStore>(cfg_.log_path(), cfg_.fsync)),
        entropy_(cfg_.entropy_seed ? *cfg_.entropy_seed : random_entropy()),
        counter_(store_->size()) {}

  const ServerConfig& config() const { return cfg_; }
  SessionStore& store() { return *store_; }

  /// New session; returns {session_id, kind, seed, next}.
  nlohmann::json create_session(std::optional<std::string_view> kind_name) {
    const ExperimentKind kind = kind_name ? parse_kind(*kind_name) : cfg_.kind;
    std::lock_guard lock(mu_);
    if (store_->size() >= cfg_.max_sessions) throw Error(Errc::CapacityExceeded, "session capacity reached");
    std::string id;
    std::uint64_t seed = 0;
    do {
      const std::uint64_t draw = mix_seed(entropy_, counter_++);
      char buf[24];
      std::snprintf(buf, sizeof buf, "s-%016llx", static_cast<unsigned long long>(draw));
      id = buf;
      seed = cfg_.seed_policy == SeedPolicy::Fixed ? cfg_.seed : mix_seed(draw, 1) >> 1;
    } while (store_->contains(id));
    store_->create(id, kind, seed);
    return {{"session_id", id}, {"kind", to_string(kind)}, {"seed", seed}, {"next", next_locked(id)}};
  }

  /// The pending step (idempotent until a response arrives) or a done marker.
  nlohmann::json next_item(const std::string& id) {
    std::lock_guard lock(mu_);
    return next_locked(id);
  }

  /// Appends the response if it answers the pending item; feedback only
  /// outside the test phase.
  nlohmann::json submit_response(const std::string& id, const std::string& item_id,
                                 const std::vector<std::string>& symbols) {
    std::lock_guard lock(mu_);
    const Session s = session(id);
    const auto& spec = spec_for(s);
    const Replay r = replay(spec, s.records);
    if (r.done()) throw Error(Errc::OutOfOrder, "session is complete");
    const PendingStep& step = *r.pending;
    if (step.item->id != item_id)
      throw Error(Errc::OutOfOrder, "item '" + item_id + "' is not pending; '" + step.item->id + "' is");
    const OutputSeq response = parse_symbols(symbols, *step.item);
    store_->append(id, {item_id, response, step.phase, step.cycle, clock_()});
    nlohmann::json ack = {{"accepted", true}, {"item_id", item_id}, {"phase", to_string(step.phase)}};
    if (step.phase != Phase::Test)
      ack["feedback"] = {{"correct", response == *step.item->target}, {"target", *step.item->target}};
    return ack;
  }

  /// Post-test survey (free-form experiment exclusion question).
  nlohmann::json submit_survey(const std::string& id, bool external_aid) {
    std::lock_guard lock(mu_);
    const Session s = session(id);
    if (!replay(spec_for(s), s.records).done()) throw Error(Errc::OutOfOrder, "survey before the end of the session");
    store_->set_external_aid(id, external_aid);
    return {{"accepted", true}};
  }

  /// Sessions file (one session per line, ordered by id). Byte-stable for
  /// identical store contents.
  std::string export_sessions(std::optional<ExperimentKind> kind = std::nullopt, bool complete_only = false) {
    std::lock_guard lock(mu_);
    std::vector<Session> out;
    for (auto& s : store_->all()) {
      if (kind && s.kind != *kind) continue;
      if (complete_only && !replay(spec_for(s), s.records).done()) continue;
      out.push_back(std::move(s));
    }
    return write_sessions_jsonl(out);
  }

  static ExperimentKind parse_kind(std::string_view name) {
    try {
      return parse_experiment_kind(name);
    } catch (const Error&) {
      throw Error(Errc::BadRequest, "unknown experiment kind: " + std::string(name));
    }
  }

 private:
  static ServerConfig validated(ServerConfig c) {
    c.validate();
    return c;
  }

  static std::uint64_t random_entropy() {
    std::random_device rd;
    return (std::uint64_t{rd()} << 32) ^ rd();
  }

  Session session(const std::string& id) const {
    auto s = store_->get(id);
    if (!s) throw Error(Errc::UnknownSession, "unknown session: " + id);
    return *s;
  }

  const ExperimentSpec& spec_for(const Session& s) {
    auto key = std::pair{s.kind, s.seed};
    auto it = specs_.find(key);
    if (it == specs_.end()) it = specs_.emplace(key, s.spec()).first;
    return it->second;
  }

  static OutputSeq parse_symbols(const std::vector<std::string>& symbols, const Item& item) {
    if (symbols.empty()) throw Error(Errc::BadRequest, "empty response");
    if (symbols.size() > 32) throw Error(Errc::BadRequest, "response too long");
    OutputSeq out;
    for (const auto& name : symbols) {
      ColorSymbol c;
      try {
        c = ColorSymbol::parse(name);
      } catch (const Error&) {
        throw Error(Errc::BadRequest, "not a symbol: " + name);
      }
      if (std::find(item.pool.begin(), item.pool.end(), c) == item.pool.end())
        throw Error(Errc::BadRequest, "symbol not in the pool: " + name);
      out.push_back(c);
    }
    return out;
  }

  static nlohmann::json item_json(const Item& it) {
    nlohmann::json pool = nlohmann::json::array();
    for (auto c : it.pool) pool.push_back(c.name());
    return {{"id", it.id}, {"instruction", it.instruction.str()}, {"pool", pool}};
  }

  nlohmann::json next_locked(const std::string& id) {
    const Session s = session(id);
    const auto& spec = spec_for(s);
    const Replay r = replay(spec, s.records);
    nlohmann::json out = {{"schema", "fewshot.step/1"}, {"session_id", id}, {"kind", to_string(s.kind)}};
    if (r.done()) {
      out["status"] = "done";
      out["survey"] = {{"asked", spec.kind == ExperimentKind::Exp3}, {"external_aid", s.external_aid}};
      return out;
    }
    const PendingStep& step = *r.pending;
    out["status"] = "pending";
    out["phase"] = to_string(step.phase);
    out["cycle"] = step.cycle;
    out["item"] = item_json(*step.item);
    if (step.phase == Phase::Instructions) {
      out["item"]["demonstration"] = *step.item->target;
      return out;
    }
    const std::size_t si = *step.stage_index;
    const Stage& stage = spec.stages[si];
    out["stage"] = {{"index", si},
                    {"id", stage.id},
                    {"kind", to_string(stage.kind)},
                    {"count", spec.stages.size()},
                    {"excluded_at_grading", r.stages[si].quiz_passed == false}};
    // study items stay on screen; the quizzed one is covered
    nlohmann::json reference = nlohmann::json::array();
    for (const auto& st : stage.study) {
      auto ref = item_json(st);
      const bool covered = step.phase == Phase::Quiz && st.id == step.item->id;
      ref["output"] = covered ? nlohmann::json(nullptr) : nlohmann::json(*st.target);
      reference.push_back(ref);
    }
    out["reference"] = reference;
    if (stage.kind == StageKind::FreeForm) {
      nlohmann::json page = nlohmann::json::array();
      for (const auto& it : stage.test) page.push_back(item_json(it));
      out["page"] = page;
    }
    return out;
  }

  ServerConfig cfg_;
  Clock clock_;
  std::unique_ptr<SessionStore> store_;
  std::mutex mu_;
  std::map<std::pair<ExperimentKind, std::uint64_t>, ExperimentSpec> specs_;
  std::uint64_t entropy_ = 0;
  std::uint64_t counter_ = 0;
};

}  // namespace fewshot::service
