#pragma once

#include <optional>
#include <semaphore>
#include <string>
#include <string_view>

#include <json.hpp>

#include "dsia/backend.hpp"

namespace dsia {

struct ParsedUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;    // starts with '/'
};

std::optional<ParsedUrl> parse_url(std::string_view url);

// Chat-completions request body in deterministic mode (temperature 0).
nlohmann::json build_chat_request(std::string_view model, std::string_view prompt);
// Extracts choices[0].message.content and usage; falls back to approximated
// counts when the provider reports none. Throws BackendError.
CompletionResult parse_chat_response(std::string_view body, std::string_view prompt);

// POSTs to a chat-completions endpoint. Bearer token comes from the
// environment variable named in the spec (when set). At most
// `max_inflight` requests are outstanding at once.
class HttpBackend : public LanguageBackend {
 public:
  explicit HttpBackend(BackendSpec spec);

  CompletionResult complete(std::string_view prompt) override;
  std::string name() const override { return "http"; }

 private:
  CompletionResult attempt(std::string_view prompt);

  BackendSpec spec_;
  ParsedUrl url_;
  std::string api_key_;
  std::counting_semaphore<1024> inflight_;
};

}  // namespace dsia
