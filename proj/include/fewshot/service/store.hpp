#pragma once

// Append-only event log. One JSON object per line:
//   {"type":"session","session_id":...,"kind":...,"seed":...}
//   {"type":"response","session_id":...,"record":{...}}
//   {"type":"survey","session_id":...,"external_aid":bool}
// Each event is written with a single write(2) on an O_APPEND descriptor, so
// a crash can leave at most one partial trailing line, which loading drops.

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>

#include <json.hpp>

#include "fewshot/error.hpp"
#include "fewshot/protocol/session.hpp"

namespace fewshot::service {

class SessionStore {
 public:
  /// In-memory store (nothing persisted).
  SessionStore() = default;

  /// Opens or creates the log at path and replays it.
  explicit SessionStore(std::filesystem::path path, bool fsync_each = false)
      : path_(std::move(path)), fsync_(fsync_each) {
    if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
    load();
    fd_ = ::open(path_.c_str(), O_WRONLY | O_APPEND | O_CREAT | O_CLOEXEC, 0644);
    if (fd_ < 0) throw Error(Errc::Io, "cannot open " + path_.string() + ": " + std::strerror(errno));
  }

  SessionStore(const SessionStore&) = delete;
  SessionStore& operator=(const SessionStore&) = delete;

  ~SessionStore() {
    if (fd_ >= 0) ::close(fd_);
  }

  bool contains(const std::string& id) const {
    std::lock_guard lock(mu_);
    return sessions_.contains(id);
  }

  std::optional<Session> get(const std::string& id) const {
    std::lock_guard lock(mu_);
    auto it = sessions_.find(id);
    if (it == sessions_.end()) return std::nullopt;
    return it->second;
  }

  std::size_t size() const {
    std::lock_guard lock(mu_);
    return sessions_.size();
  }

  /// Sessions ordered by id.
  std::vector<Session> all() const {
    std::lock_guard lock(mu_);
    std::vector<Session> out;
    for (const auto& [id, s] : sessions_) out.push_back(s);
    return out;
  }

  void create(const std::string& id, ExperimentKind kind, std::uint64_t seed) {
    nlohmann::json ev = {{"type", "session"}, {"session_id", id}, {"kind", to_string(kind)}, {"seed", seed}};
    std::lock_guard lock(mu_);
    if (sessions_.contains(id)) throw Error(Errc::BadRequest, "session exists: " + id);
    write_line(ev);
    apply(ev);
  }

  void append(const std::string& id, const ResponseRecord& rec) {
    nlohmann::json ev = {{"type", "response"}, {"session_id", id}, {"record", rec}};
    std::lock_guard lock(mu_);
    require(id);
    write_line(ev);
    apply(ev);
  }

  void set_external_aid(const std::string& id, bool aid) {
    nlohmann::json ev = {{"type", "survey"}, {"session_id", id}, {"external_aid", aid}};
    std::lock_guard lock(mu_);
    require(id);
    write_line(ev);
    apply(ev);
  }

  const std::filesystem::path& path() const { return path_; }
  std::size_t dropped_bytes() const { return dropped_; }

 private:
  void require(const std::string& id) const {
    if (!sessions_.contains(id)) throw Error(Errc::UnknownSession, "unknown session: " + id);
  }

  void apply(const nlohmann::json& ev) {
    const auto type = ev.at("type").get<std::string>();
    const auto id = ev.at("session_id").get<std::string>();
    if (type == "session") {
      Session s;
      s.participant_id = id;
      s.kind = parse_experiment_kind(ev.at("kind").get<std::string>());
      s.seed = ev.at("seed").get<std::uint64_t>();
      sessions_[id] = std::move(s);
      return;
    }
    auto it = sessions_.find(id);
    if (it == sessions_.end()) throw Error(Errc::Format, "event for unknown session " + id);
    if (type == "response") it->second.records.push_back(ev.at("record").get<ResponseRecord>());
    else if (type == "survey") it->second.external_aid = ev.at("external_aid").get<bool>();
    else throw Error(Errc::Format, "unknown event type " + type);
  }

  void write_line(const nlohmann::json& ev) {
    if (fd_ < 0) return;
    const std::string line = ev.dump() + "\n";
    const auto n = ::write(fd_, line.data(), line.size());
    if (n != static_cast<ssize_t>(line.size()))
      throw Error(Errc::Io, "short write to " + path_.string());
    if (fsync_) ::fsync(fd_);
  }

  void load() {
    std::ifstream in(path_, std::ios::binary);
    if (!in) return;
    std::stringstream buf;
    buf << in.rdbuf();
    const std::string text = buf.str();
    const auto last_nl = text.rfind('\n');
    const std::size_t complete = last_nl == std::string::npos ? 0 : last_nl + 1;
    std::size_t start = 0;
    while (start < complete) {
      const auto end = text.find('\n', start);
      const auto line = std::string_view(text).substr(start, end - start);
      if (!line.empty()) {
        try {
          apply(nlohmann::json::parse(line));
        } catch (const nlohmann::json::exception& e) {
          throw Error(Errc::Format, "corrupt event log line: " + std::string(e.what()));
        }
      }
      start = end + 1;
    }
    if (complete < text.size()) {
      // partial trailing record from an interrupted write
      dropped_ = text.size() - complete;
      std::filesystem::resize_file(path_, complete);
    }
  }

  std::filesystem::path path_;
  bool fsync_ = false;
  int fd_ = -1;
  std::size_t dropped_ = 0;
  mutable std::mutex mu_;
  std::map<std::string, Session> sessions_;
};

}  // namespace fewshot::service
