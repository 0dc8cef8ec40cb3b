#pragma once

#include <cstdint>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "dsia/action.hpp"
#include "dsia/backend.hpp"
#include "dsia/generator.hpp"
#include "dsia/home.hpp"
#include "dsia/router.hpp"
#include "dsia/verifier.hpp"

namespace dsia {

enum class Outcome { executed, rejected, clarification_needed, failed };

std::string_view to_string(Outcome outcome);

inline constexpr std::string_view kRejectedFeedback = "Operation rejected: No valid device.";
inline constexpr std::string_view kSuccessFeedback = "Success.";
inline constexpr std::string_view kGenerationFailed = "generation failed";

struct StageUsage {
  std::int64_t stage1_calls = 0;
  std::int64_t stage1_tokens = 0;
  std::int64_t stage2_calls = 0;
  std::int64_t stage2_tokens = 0;

  StageUsage& operator+=(const StageUsage& other);
};

struct PipelineResult {
  Outcome outcome = Outcome::failed;
  std::string question;  // ClarificationNeeded
  std::string cause;     // Failed
  ActionSequence raw;    // A_raw as generated (empty when Stage 2 did not run)
  ActionSequence final;  // A_final; `{error_input}` when rejected
  std::vector<VerificationResult> verification;
  std::vector<Call> executed;  // in application order
  std::string feedback;
  IntentAnalysis analysis;
  StageUsage usage;
  std::uint64_t state_version = 0;
};

nlohmann::json to_json(const PipelineResult& result);
nlohmann::json to_json(const IntentAnalysis& analysis);
nlohmann::json to_json(const VerificationResult& result);

// "Success." or "Executed valid actions. Failed: a, b" (sorted).
std::string build_feedback(const FilterOutcome& outcome);

// `Which <device_type>? Options: <room.device, ...>` from the first
// ambiguous verdict.
std::string clarification_question(const IntentAnalysis& analysis);

struct PendingClarification {
  std::string instruction;
  std::string question;
  IntentAnalysis analysis;
};

// Progress notifications: kind is one of analysis | verification | executed
// | rejected | clarification_request | feedback.
using EventSink = std::function<void(std::string_view kind, const nlohmann::json& payload)>;

// One user's conversation with one home. Instructions are serialized; the
// pipeline holds the session lock for the duration of a call.
class Session {
 public:
  Session(std::string id, HomeState home) : id_(std::move(id)), home_(std::move(home)) {}

  const std::string& id() const { return id_; }
  HomeState home() const;
  std::optional<PendingClarification> pending() const;
  std::vector<std::pair<std::string, PipelineResult>> history() const;
  void clear_pending();

 private:
  friend class Pipeline;

  std::string id_;
  HomeState home_;
  std::optional<PendingClarification> pending_;
  std::vector<std::pair<std::string, PipelineResult>> history_;
  mutable std::mutex mutex_;
};

struct PipelineOptions {
  // false runs the ablation: every instruction goes straight to Stage 2.
  bool stage1_enabled = true;
  std::vector<FewShotExample> examples = default_few_shot_bank();
};

class Pipeline {
 public:
  Pipeline(LanguageBackend& stage1, LanguageBackend& stage2, PipelineOptions options = {});

  // Throws ContractError if a clarification is pending.
  PipelineResult execute_instruction(Session& session, std::string_view instruction,
                                     const EventSink& sink = {});
  // Re-routes the pending instruction with `User clarified: <answer>`
  // appended. Throws ContractError if nothing is pending.
  PipelineResult answer_clarification(Session& session, std::string_view answer,
                                      const EventSink& sink = {});

  StageTotals stage1_totals() const { return stage1_meter_.totals(); }
  StageTotals stage2_totals() const { return stage2_meter_.totals(); }
  const PipelineOptions& options() const { return options_; }

 private:
  PipelineResult run(Session& session, const std::string& instruction, const EventSink& sink);

  LanguageBackend& stage1_;
  LanguageBackend& stage2_;
  PipelineOptions options_;
  UsageMeter stage1_meter_;
  UsageMeter stage2_meter_;
};

}  // namespace dsia
