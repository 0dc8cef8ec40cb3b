#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <unordered_map>

#include <json.hpp>

namespace dsia {

struct TokenUsage {
  std::int64_t prompt_tokens = 0;
  std::int64_t completion_tokens = 0;
  // false: counts are approximated as ceil(chars / 4).
  bool reported = false;

  std::int64_t total() const { return prompt_tokens + completion_tokens; }
};

struct CompletionResult {
  std::string text;
  TokenUsage usage;
};

std::int64_t approximate_tokens(std::string_view text);
TokenUsage approximate_usage(std::string_view prompt, std::string_view completion);

struct StageTotals {
  std::int64_t calls = 0;
  std::int64_t prompt_tokens = 0;
  std::int64_t completion_tokens = 0;

  std::int64_t tokens() const { return prompt_tokens + completion_tokens; }
  StageTotals& operator+=(const StageTotals& other);
};

// Lock-free per-stage accumulator, shared across sessions and threads.
class UsageMeter {
 public:
  void record(const TokenUsage& usage);
  StageTotals totals() const;
  void reset();

 private:
  std::atomic<std::int64_t> calls_{0};
  std::atomic<std::int64_t> prompt_tokens_{0};
  std::atomic<std::int64_t> completion_tokens_{0};
};

// Completion contract. Implementations must be safe to call concurrently.
class LanguageBackend {
 public:
  virtual ~LanguageBackend() = default;
  virtual CompletionResult complete(std::string_view prompt) = 0;
  virtual std::string name() const = 0;
};

enum class BackendKind { http, scripted, rule_oracle, noisy_oracle };

enum class NoiseTarget { device, room, capability };

struct BackendSpec {
  BackendKind kind = BackendKind::rule_oracle;

  // http
  std::string endpoint;
  std::string model = "gpt-4o-mini";
  std::string api_key_env = "DSIA_API_KEY";
  int max_inflight = 4;
  int retries = 0;
  std::chrono::milliseconds backoff{250};
  std::chrono::seconds timeout{60};

  // scripted
  std::filesystem::path transcript;

  // noisy_oracle
  double noise_rate = 0.0;
  std::uint64_t seed = 0;
  NoiseTarget target = NoiseTarget::device;
  bool forced_grounding = true;
};

// `rule_oracle` | `noisy_oracle:p=0.3,seed=7[,target=device|room|capability][,ground=0|1]`
// | `scripted:<transcript.jsonl>`
// | `http:<url>[,model=M][,key_env=VAR][,max_inflight=N][,retries=N][,timeout=S]`
BackendSpec parse_backend_spec(std::string_view text);
// Throws std::invalid_argument.
void validate(const BackendSpec& spec);
std::string describe(const BackendSpec& spec);

std::unique_ptr<LanguageBackend> make_backend(const BackendSpec& spec);

// One-shot form of make_backend(spec)->complete(prompt).
CompletionResult complete(std::string_view prompt, const BackendSpec& spec);

// Lowercase hex SHA-256 of the prompt; the transcript lookup key.
std::string prompt_digest(std::string_view prompt);

// Replays recorded completions keyed by prompt digest. Transcript lines are
// `{"prompt_digest": "...", "response_text": "..."}`.
class ScriptedBackend : public LanguageBackend {
 public:
  explicit ScriptedBackend(const std::filesystem::path& transcript);
  explicit ScriptedBackend(std::unordered_map<std::string, std::string> by_digest);

  CompletionResult complete(std::string_view prompt) override;
  std::string name() const override { return "scripted"; }
  std::size_t size() const { return responses_.size(); }

 private:
  std::unordered_map<std::string, std::string> responses_;
};

// Forwards to an inner backend and appends every exchange to a transcript
// file that ScriptedBackend can replay.
class RecordingBackend : public LanguageBackend {
 public:
  RecordingBackend(LanguageBackend& inner, const std::filesystem::path& transcript);

  CompletionResult complete(std::string_view prompt) override;
  std::string name() const override { return "recording(" + inner_.name() + ")"; }

 private:
  LanguageBackend& inner_;
  std::filesystem::path path_;
  std::mutex mutex_;
};

// --- oracle side channel -------------------------------------------------

// Appends the structured intent the oracle backends read, as
// `<!--dsia:{json}-->`.
std::string embed_intent(std::string_view text, const nlohmann::json& intent);
// Removes every side-channel comment (for display).
std::string strip_intent(std::string_view text);

}  // namespace dsia
