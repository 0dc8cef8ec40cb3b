#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "dsia/backend.hpp"
#include "dsia/home.hpp"
#include "dsia/pipeline.hpp"

namespace dsia {

struct ServiceOptions {
  std::chrono::seconds idle_timeout{30 * 60};
  std::chrono::milliseconds reap_interval{1000};
  PipelineOptions pipeline;
};

// Append-only event log of one session, readable by any number of SSE
// subscribers. Event ids start at 1.
class EventLog {
 public:
  struct Event {
    std::uint64_t id;
    std::string kind;
    std::string data;
  };

  void append(std::string kind, const nlohmann::json& payload);
  // Events with id > after. Blocks up to `wait` for one to arrive unless the
  // log is closed.
  std::vector<Event> read_after(std::uint64_t after, std::chrono::milliseconds wait);
  void close();
  bool closed() const;

 private:
  mutable std::mutex mutex_;
  std::condition_variable cv_;
  std::vector<Event> events_;
  bool closed_ = false;
};

std::string format_sse(const EventLog::Event& event);

class Service {
 public:
  Service(LanguageBackend& stage1, LanguageBackend& stage2, ServiceOptions options = {});
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  // Registers every *.json snapshot in dir; returns how many were loaded.
  // Throws SnapshotError naming the offending file.
  std::size_t load_homes(const std::filesystem::path& dir);
  void add_home(HomeState home);

  // Blocking. Returns false if the socket could not be bound.
  bool listen(const std::string& host, int port);
  // Binds an ephemeral port and serves on a background thread.
  int start_background(const std::string& host = "127.0.0.1");
  void stop();

  // Drops sessions idle for longer than the timeout. Returns how many.
  std::size_t expire_idle();
  std::size_t session_count() const;

 private:
  struct SessionEntry {
    std::unique_ptr<Session> session;
    std::shared_ptr<EventLog> log;
    std::chrono::steady_clock::time_point last_active;
  };

  void routes();
  std::shared_ptr<SessionEntry> find_session(const std::string& id);
  void reaper_loop();

  LanguageBackend& stage1_;
  LanguageBackend& stage2_;
  ServiceOptions options_;
  Pipeline pipeline_;
  httplib::Server server_;

  mutable std::mutex mutex_;
  std::map<std::string, HomeState> homes_;
  std::map<std::string, std::shared_ptr<SessionEntry>> sessions_;
  std::uint64_t next_session_ = 1;

  std::mutex reaper_mutex_;
  std::condition_variable reaper_cv_;
  bool stopping_ = false;
  std::thread reaper_;
  std::thread listener_;
};

}  // namespace dsia
