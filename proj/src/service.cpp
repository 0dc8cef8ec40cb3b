#include "dsia/service.hpp"

#include <algorithm>
#include <charconv>

#include "dsia/errors.hpp"

namespace dsia {

using nlohmann::json;

void EventLog::append(std::string kind, const json& payload) {
  {
    std::lock_guard lock(mutex_);
    events_.push_back({events_.size() + 1, std::move(kind), payload.dump()});
  }
  cv_.notify_all();
}

std::vector<EventLog::Event> EventLog::read_after(std::uint64_t after, std::chrono::milliseconds wait) {
  std::unique_lock lock(mutex_);
  cv_.wait_for(lock, wait, [&] { return closed_ || events_.size() > after; });
  if (after >= events_.size()) return {};
  return {events_.begin() + static_cast<std::ptrdiff_t>(after), events_.end()};
}

void EventLog::close() {
  {
    std::lock_guard lock(mutex_);
    closed_ = true;
  }
  cv_.notify_all();
}

bool EventLog::closed() const {
  std::lock_guard lock(mutex_);
  return closed_;
}

std::string format_sse(const EventLog::Event& event) {
  return "id: " + std::to_string(event.id) + "\nevent: " + event.kind + "\ndata: " + event.data + "\n\n";
}

namespace {

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& message) {
  send_json(res, status, {{"error", message}});
}

std::optional<json> parse_body(const httplib::Request& req, httplib::Response& res) {
  json body = json::parse(req.body, nullptr, false);
  if (body.is_discarded() || !body.is_object()) {
    send_error(res, 400, "request body must be a JSON object");
    return std::nullopt;
  }
  return body;
}

std::optional<std::string> string_member(const json& body, const char* key, httplib::Response& res) {
  auto it = body.find(key);
  if (it == body.end() || !it->is_string()) {
    send_error(res, 400, std::string("'") + key + "' must be a string");
    return std::nullopt;
  }
  return it->get<std::string>();
}

std::uint64_t last_event_id(const httplib::Request& req) {
  std::string text = req.get_header_value("Last-Event-ID");
  if (text.empty() && req.has_param("last_event_id")) text = req.get_param_value("last_event_id");
  std::uint64_t id = 0;
  std::from_chars(text.data(), text.data() + text.size(), id);
  return id;
}

}  // namespace

Service::Service(LanguageBackend& stage1, LanguageBackend& stage2, ServiceOptions options)
    : stage1_(stage1), stage2_(stage2), options_(std::move(options)),
      pipeline_(stage1_, stage2_, options_.pipeline) {
  routes();
  reaper_ = std::thread([this] { reaper_loop(); });
}

Service::~Service() {
  stop();
  if (reaper_.joinable()) reaper_.join();
  if (listener_.joinable()) listener_.join();
}

std::size_t Service::load_homes(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& file : files) {
    HomeState home;
    try {
      home = load_snapshot_file(file);
    } catch (const SnapshotError& e) {
      throw SnapshotError(file.string() + (e.path().empty() ? "" : ":" + e.path()), e.what());
    }
    if (home.home_id().empty()) {
      home = HomeState(file.stem().string(), home.catalog(), home.rooms(), home.version());
    }
    add_home(std::move(home));
  }
  return files.size();
}

void Service::add_home(HomeState home) {
  std::lock_guard lock(mutex_);
  const std::string id = home.home_id();
  homes_.insert_or_assign(id, std::move(home));
}

bool Service::listen(const std::string& host, int port) { return server_.listen(host, port); }

int Service::start_background(const std::string& host) {
  const int port = server_.bind_to_any_port(host);
  if (port < 0) return port;
  listener_ = std::thread([this] { server_.listen_after_bind(); });
  server_.wait_until_ready();
  return port;
}

void Service::stop() {
  {
    std::lock_guard lock(reaper_mutex_);
    if (stopping_) return;
    stopping_ = true;
  }
  reaper_cv_.notify_all();
  {
    std::lock_guard lock(mutex_);
    for (auto& [_, entry] : sessions_) entry->log->close();
  }
  server_.stop();
}

std::size_t Service::expire_idle() {
  const auto now = std::chrono::steady_clock::now();
  std::vector<std::shared_ptr<SessionEntry>> expired;
  {
    std::lock_guard lock(mutex_);
    for (auto it = sessions_.begin(); it != sessions_.end();) {
      if (now - it->second->last_active > options_.idle_timeout) {
        expired.push_back(it->second);
        it = sessions_.erase(it);
      } else {
        ++it;
      }
    }
  }
  for (auto& entry : expired) entry->log->close();
  return expired.size();
}

std::size_t Service::session_count() const {
  std::lock_guard lock(mutex_);
  return sessions_.size();
}

void Service::reaper_loop() {
  std::unique_lock lock(reaper_mutex_);
  while (!stopping_) {
    reaper_cv_.wait_for(lock, options_.reap_interval, [this] { return stopping_; });
    if (stopping_) break;
    lock.unlock();
    expire_idle();
    lock.lock();
  }
}

std::shared_ptr<Service::SessionEntry> Service::find_session(const std::string& id) {
  std::lock_guard lock(mutex_);
  auto it = sessions_.find(id);
  if (it == sessions_.end()) return nullptr;
  it->second->last_active = std::chrono::steady_clock::now();
  return it->second;
}

void Service::routes() {
  server_.Post("/homes", [this](const httplib::Request& req, httplib::Response& res) {
    json body = json::parse(req.body, nullptr, false);
    if (body.is_discarded()) return send_error(res, 400, "request body must be JSON");
    try {
      HomeState home = load_snapshot(body);
      if (home.home_id().empty()) return send_error(res, 400, "snapshot needs a home_id");
      const std::string id = home.home_id();
      const std::size_t devices = home.device_count();
      add_home(std::move(home));
      send_json(res, 201, {{"home_id", id}, {"devices", devices}});
    } catch (const SnapshotError& e) {
      send_json(res, 400, {{"error", e.what()}, {"path", e.path()}});
    }
  });

  server_.Get(R"(/homes/([^/]+)/state)", [this](const httplib::Request& req, httplib::Response& res) {
    std::lock_guard lock(mutex_);
    auto it = homes_.find(req.matches[1]);
    if (it == homes_.end()) return send_error(res, 404, "unknown home");
    send_json(res, 200, to_snapshot_json(it->second));
  });

  server_.Post("/sessions", [this](const httplib::Request& req, httplib::Response& res) {
    auto body = parse_body(req, res);
    if (!body) return;
    auto home_id = string_member(*body, "home_id", res);
    if (!home_id) return;
    std::lock_guard lock(mutex_);
    auto it = homes_.find(*home_id);
    if (it == homes_.end()) return send_error(res, 404, "unknown home");
    const std::string id = "s" + std::to_string(next_session_++);
    auto entry = std::make_shared<SessionEntry>();
    entry->session = std::make_unique<Session>(id, it->second);
    entry->log = std::make_shared<EventLog>();
    entry->last_active = std::chrono::steady_clock::now();
    sessions_.emplace(id, std::move(entry));
    send_json(res, 201, {{"session_id", id}, {"home_id", *home_id}});
  });

  server_.Delete(R"(/sessions/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
    std::shared_ptr<SessionEntry> entry;
    {
      std::lock_guard lock(mutex_);
      auto it = sessions_.find(req.matches[1]);
      if (it == sessions_.end()) return send_error(res, 404, "unknown session");
      entry = it->second;
      sessions_.erase(it);
    }
    entry->log->close();
    res.status = 204;
  });

  auto run_turn = [this](const httplib::Request& req, httplib::Response& res, bool clarify) {
    auto entry = find_session(req.matches[1]);
    if (!entry) return send_error(res, 404, "unknown session");
    auto body = parse_body(req, res);
    if (!body) return;
    auto text = string_member(*body, clarify ? "answer" : "text", res);
    if (!text) return;
    const bool pending = entry->session->pending().has_value();
    if (!clarify && pending) return send_error(res, 409, "a clarification is pending");
    if (clarify && !pending) return send_error(res, 409, "no clarification is pending");
    auto log = entry->log;
    EventSink sink = [log](std::string_view kind, const json& payload) { log->append(std::string(kind), payload); };
    try {
      PipelineResult result = clarify ? pipeline_.answer_clarification(*entry->session, *text, sink)
                                      : pipeline_.execute_instruction(*entry->session, *text, sink);
      send_json(res, 200, to_json(result));
    } catch (const ContractError& e) {
      send_error(res, 409, e.what());
    }
    std::lock_guard lock(mutex_);
    entry->last_active = std::chrono::steady_clock::now();
  };
  server_.Post(R"(/sessions/([^/]+)/instruction)",
               [run_turn](const httplib::Request& req, httplib::Response& res) { run_turn(req, res, false); });
  server_.Post(R"(/sessions/([^/]+)/clarify)",
               [run_turn](const httplib::Request& req, httplib::Response& res) { run_turn(req, res, true); });

  server_.Get(R"(/sessions/([^/]+)/state)", [this](const httplib::Request& req, httplib::Response& res) {
    auto entry = find_session(req.matches[1]);
    if (!entry) return send_error(res, 404, "unknown session");
    const HomeState home = entry->session->home();
    json doc = {{"session_id", entry->session->id()},
                {"version", home.version()},
                {"home", to_snapshot_json(home)},
                {"pending", nullptr}};
    if (auto p = entry->session->pending()) doc["pending"] = {{"question", p->question}};
    send_json(res, 200, doc);
  });

  server_.Get(R"(/sessions/([^/]+)/events)", [this](const httplib::Request& req, httplib::Response& res) {
    auto entry = find_session(req.matches[1]);
    if (!entry) return send_error(res, 404, "unknown session");
    const bool follow = !(req.has_param("follow") && req.get_param_value("follow") == "0");
    auto log = entry->log;
    auto cursor = std::make_shared<std::uint64_t>(last_event_id(req));
    res.set_header("Cache-Control", "no-cache");
    if (!follow) {
      std::string out;
      for (const auto& e : log->read_after(*cursor, std::chrono::milliseconds(0))) out += format_sse(e);
      res.set_content(out, "text/event-stream");
      return;
    }
    res.set_chunked_content_provider("text/event-stream", [log, cursor](std::size_t, httplib::DataSink& sink) {
      while (sink.is_writable()) {
        auto events = log->read_after(*cursor, std::chrono::milliseconds(250));
        if (events.empty()) {
          if (log->closed()) {
            sink.done();
            return true;
          }
          continue;
        }
        for (const auto& e : events) {
          const std::string chunk = format_sse(e);
          if (!sink.write(chunk.data(), chunk.size())) return false;
          *cursor = e.id;
        }
        return true;
      }
      return false;
    });
  });

  server_.Get("/usage", [this](const httplib::Request&, httplib::Response& res) {
    auto totals = [](const StageTotals& t) {
      return json{{"calls", t.calls}, {"prompt_tokens", t.prompt_tokens},
                  {"completion_tokens", t.completion_tokens}, {"tokens", t.tokens()}};
    };
    send_json(res, 200, {{"stage1", totals(pipeline_.stage1_totals())},
                         {"stage2", totals(pipeline_.stage2_totals())}});
  });
}

}  // namespace dsia
