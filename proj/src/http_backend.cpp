#include "dsia/http_backend.hpp"

#include <cstdlib>
#include <thread>

#include <httplib.h>

#include "dsia/errors.hpp"

namespace dsia {

using nlohmann::json;

std::optional<ParsedUrl> parse_url(std::string_view url) {
  const std::size_t scheme_end = url.find("://");
  if (scheme_end == std::string_view::npos) return std::nullopt;
  const std::string_view scheme = url.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https") return std::nullopt;
  const std::size_t host_begin = scheme_end + 3;
  const std::size_t path_begin = url.find('/', host_begin);
  const std::string_view host = url.substr(host_begin, path_begin - host_begin);
  if (host.empty() || host.find_first_of(" \t") != std::string_view::npos) return std::nullopt;
  ParsedUrl out;
  out.origin = std::string(url.substr(0, path_begin));
  out.path = path_begin == std::string_view::npos ? "/" : std::string(url.substr(path_begin));
  return out;
}

json build_chat_request(std::string_view model, std::string_view prompt) {
  return {{"model", model},
          {"messages", json::array({{{"role", "user"}, {"content", prompt}}})},
          {"temperature", 0}};
}

CompletionResult parse_chat_response(std::string_view body, std::string_view prompt) {
  json doc = json::parse(body, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) throw BackendError("response is not JSON");
  if (auto err = doc.find("error"); err != doc.end()) {
    throw BackendError("provider error: " + err->dump());
  }
  const json* content = nullptr;
  if (auto choices = doc.find("choices"); choices != doc.end() && choices->is_array() &&
                                          !choices->empty()) {
    const json& first = (*choices)[0];
    if (auto msg = first.find("message"); msg != first.end() && msg->is_object()) {
      if (auto c = msg->find("content"); c != msg->end() && c->is_string()) content = &*c;
    }
  }
  if (content == nullptr) throw BackendError("response has no choices[0].message.content");

  CompletionResult out;
  out.text = content->get<std::string>();
  auto usage = doc.find("usage");
  if (usage != doc.end() && usage->is_object() && usage->value("prompt_tokens", json()).is_number_integer() &&
      usage->value("completion_tokens", json()).is_number_integer()) {
    out.usage = {usage->at("prompt_tokens").get<std::int64_t>(),
                 usage->at("completion_tokens").get<std::int64_t>(), true};
  } else {
    out.usage = approximate_usage(prompt, out.text);
  }
  return out;
}

HttpBackend::HttpBackend(BackendSpec spec)
    : spec_(std::move(spec)), inflight_(spec_.max_inflight) {
  auto url = parse_url(spec_.endpoint);
  if (!url) throw BackendError("bad endpoint URL '" + spec_.endpoint + "'");
  url_ = *url;
  if (const char* key = std::getenv(spec_.api_key_env.c_str())) api_key_ = key;
}

CompletionResult HttpBackend::attempt(std::string_view prompt) {
  httplib::Client client(url_.origin);
  client.set_connection_timeout(spec_.timeout);
  client.set_read_timeout(spec_.timeout);
  client.set_write_timeout(spec_.timeout);
  httplib::Headers headers;
  if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);

  const std::string body = build_chat_request(spec_.model, prompt).dump();
  auto res = client.Post(url_.path, headers, body, "application/json");
  if (!res) {
    throw BackendError("transport failure: " + httplib::to_string(res.error()), true);
  }
  if (res->status < 200 || res->status >= 300) {
    const bool retryable = res->status == 429 || res->status >= 500;
    throw BackendError("HTTP " + std::to_string(res->status) + ": " + res->body, retryable,
                       res->status);
  }
  return parse_chat_response(res->body, prompt);
}

CompletionResult HttpBackend::complete(std::string_view prompt) {
  inflight_.acquire();
  struct Release {
    std::counting_semaphore<1024>& s;
    ~Release() { s.release(); }
  } release{inflight_};

  auto delay = spec_.backoff;
  for (int attempt_no = 0;; ++attempt_no) {
    try {
      return attempt(prompt);
    } catch (const BackendError& e) {
      if (!e.retryable() || attempt_no >= spec_.retries) throw;
    }
    std::this_thread::sleep_for(delay);
    delay *= 2;
  }
}

}  // namespace dsia
