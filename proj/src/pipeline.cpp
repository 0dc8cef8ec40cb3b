#include "dsia/pipeline.hpp"

#include "dsia/errors.hpp"

namespace dsia {

using nlohmann::json;

std::string_view to_string(Outcome outcome) {
  switch (outcome) {
    case Outcome::executed: return "Executed";
    case Outcome::rejected: return "Rejected";
    case Outcome::clarification_needed: return "ClarificationNeeded";
    case Outcome::failed: return "Failed";
  }
  return "Failed";
}

StageUsage& StageUsage::operator+=(const StageUsage& other) {
  stage1_calls += other.stage1_calls;
  stage1_tokens += other.stage1_tokens;
  stage2_calls += other.stage2_calls;
  stage2_tokens += other.stage2_tokens;
  return *this;
}

json to_json(const IntentAnalysis& analysis) {
  json ops = json::array();
  for (const auto& v : analysis.operations) {
    json op = {{"description", v.description},
               {"valid", v.valid},
               {"ambiguous", v.ambiguous},
               {"reason", v.reason}};
    if (!v.device_type.empty()) op["device_type"] = v.device_type;
    if (!v.candidates.empty()) op["candidates"] = v.candidates;
    ops.push_back(std::move(op));
  }
  return {{"route", to_string(analysis.route)},
          {"operations", ops},
          {"reasoning", analysis.reasoning},
          {"all_valid", analysis.all_valid},
          {"fail_safe", analysis.fail_safe}};
}

json to_json(const VerificationResult& r) {
  json doc = {{"action", render_action(r.action)},
              {"room", r.level_room},
              {"device", r.level_device},
              {"capability", r.level_capability},
              {"passed", r.passed}};
  if (r.failure_reason) doc["failure_reason"] = *r.failure_reason;
  return doc;
}

json to_json(const PipelineResult& result) {
  json verification = json::array();
  for (const auto& v : result.verification) verification.push_back(to_json(v));
  json executed = json::array();
  for (const auto& c : result.executed) executed.push_back(render_action(c));
  json doc = {{"outcome", to_string(result.outcome)},
              {"raw", render_sequence(result.raw)},
              {"final", render_sequence(result.final)},
              {"verification", verification},
              {"executed", executed},
              {"feedback", result.feedback},
              {"analysis", to_json(result.analysis)},
              {"usage",
               {{"stage1_calls", result.usage.stage1_calls},
                {"stage1_tokens", result.usage.stage1_tokens},
                {"stage2_calls", result.usage.stage2_calls},
                {"stage2_tokens", result.usage.stage2_tokens}}},
              {"state_version", result.state_version}};
  if (result.outcome == Outcome::clarification_needed) doc["question"] = result.question;
  if (result.outcome == Outcome::failed) doc["cause"] = result.cause;
  return doc;
}

std::string build_feedback(const FilterOutcome& outcome) {
  if (outcome.error_set.empty()) return std::string(kSuccessFeedback);
  std::string msg = "Executed valid actions. Failed: ";
  bool first = true;
  for (const auto& device : outcome.error_set) {
    if (!first) msg += ", ";
    first = false;
    msg += device;
  }
  return msg;
}

std::string clarification_question(const IntentAnalysis& analysis) {
  for (const auto& v : analysis.operations) {
    if (!v.ambiguous) continue;
    std::string type = v.device_type.empty() ? "device" : v.device_type;
    for (char& c : type) {
      if (c == '_') c = ' ';
    }
    std::string q = "Which " + type + "?";
    if (!v.candidates.empty()) {
      q += " Options: ";
      for (std::size_t i = 0; i < v.candidates.size(); ++i) {
        if (i != 0) q += ", ";
        q += v.candidates[i];
      }
    }
    return q;
  }
  return "Which device do you mean?";
}

HomeState Session::home() const {
  std::lock_guard lock(mutex_);
  return home_;
}

std::optional<PendingClarification> Session::pending() const {
  std::lock_guard lock(mutex_);
  return pending_;
}

std::vector<std::pair<std::string, PipelineResult>> Session::history() const {
  std::lock_guard lock(mutex_);
  return history_;
}

void Session::clear_pending() {
  std::lock_guard lock(mutex_);
  pending_.reset();
}

Pipeline::Pipeline(LanguageBackend& stage1, LanguageBackend& stage2, PipelineOptions options)
    : stage1_(stage1), stage2_(stage2), options_(std::move(options)) {}

PipelineResult Pipeline::execute_instruction(Session& session, std::string_view instruction,
                                             const EventSink& sink) {
  std::lock_guard lock(session.mutex_);
  if (session.pending_) throw ContractError("session has a pending clarification");
  PipelineResult result = run(session, std::string(instruction), sink);
  session.history_.emplace_back(std::string(instruction), result);
  return result;
}

PipelineResult Pipeline::answer_clarification(Session& session, std::string_view answer,
                                              const EventSink& sink) {
  std::lock_guard lock(session.mutex_);
  if (!session.pending_) throw ContractError("no pending clarification");
  std::string instruction = session.pending_->instruction;
  instruction += "\n";
  instruction += kClarifiedPrefix;
  instruction += answer;
  session.pending_.reset();
  PipelineResult result = run(session, instruction, sink);
  session.history_.emplace_back(std::move(instruction), result);
  return result;
}

PipelineResult Pipeline::run(Session& session, const std::string& instruction,
                             const EventSink& sink) {
  auto emit = [&](std::string_view kind, const json& payload) {
    if (sink) sink(kind, payload);
  };
  PipelineResult result;
  result.state_version = session.home_.version();

  auto fail = [&](std::string cause, std::string feedback) {
    result.outcome = Outcome::failed;
    result.cause = std::move(cause);
    result.feedback = std::move(feedback);
    emit("feedback", {{"outcome", to_string(result.outcome)}, {"feedback", result.feedback},
                      {"cause", result.cause}});
    return result;
  };

  if (options_.stage1_enabled) {
    try {
      result.analysis = route_instruction(instruction, session.home_, stage1_, &stage1_meter_);
    } catch (const BackendError& e) {
      return fail(std::string("stage-1 backend error: ") + e.what(), "stage-1 backend error");
    }
    result.usage.stage1_calls = 1;
    result.usage.stage1_tokens = result.analysis.usage.total();
    emit("analysis", to_json(result.analysis));

    if (result.analysis.route == Route::invalid) {
      result.outcome = Outcome::rejected;
      result.final = {ErrorToken{}};
      result.feedback = std::string(kRejectedFeedback);
      emit("rejected", {{"final", render_sequence(result.final)}});
      emit("feedback", {{"outcome", to_string(result.outcome)}, {"feedback", result.feedback}});
      return result;
    }
    if (result.analysis.route == Route::ambiguous) {
      result.outcome = Outcome::clarification_needed;
      result.question = clarification_question(result.analysis);
      result.feedback = result.question;
      session.pending_ = PendingClarification{instruction, result.question, result.analysis};
      json options = json::array();
      for (const auto& v : result.analysis.operations) {
        for (const auto& c : v.candidates) options.push_back(c);
      }
      emit("clarification_request", {{"question", result.question}, {"options", options}});
      return result;
    }
  } else {
    result.analysis.route = Route::valid;
    result.analysis.all_valid = true;
  }

  GenerationRequest request{instruction, session.home_,
                            options_.stage1_enabled ? result.analysis.reasoning : std::string(),
                            options_.examples};
  Generation generation;
  try {
    generation.completion = stage2_.complete(build_stage2_prompt(request));
  } catch (const BackendError& e) {
    return fail(std::string("stage-2 backend error: ") + e.what(), "stage-2 backend error");
  }
  stage2_meter_.record(generation.completion.usage);
  result.usage.stage2_calls = 1;
  result.usage.stage2_tokens = generation.completion.usage.total();
  try {
    generation.parsed = parse_sequence(generation.completion.text);
  } catch (const ParseError& e) {
    return fail(std::string(kGenerationFailed) + ": " + e.what(), std::string(kGenerationFailed));
  }
  result.raw = generation.parsed.actions;

  FilterOutcome filtered = filter_sequence(result.raw, session.home_);
  result.final = filtered.final;
  result.verification = filtered.results;
  json checks = json::array();
  for (const auto& v : filtered.results) checks.push_back(to_json(v));
  emit("verification", {{"results", checks}, {"final", render_sequence(result.final)}});

  for (const auto& action : result.final) {
    const Call* call = as_call(action);
    if (call == nullptr) continue;
    try {
      session.home_ = apply_action(session.home_, action);
    } catch (const ContractError& e) {
      result.state_version = session.home_.version();
      return fail(e.what(), "internal error: unverified action");
    }
    result.executed.push_back(*call);
    const Device& device = session.home_.rooms().at(call->room).devices.at(call->device);
    json attributes = json::object();
    for (const auto& [k, v] : device.attributes) attributes[k] = v;
    emit("executed", {{"action", render_action(*call)},
                      {"room", call->room},
                      {"device", call->device},
                      {"attributes", attributes},
                      {"state_version", session.home_.version()}});
  }
  result.state_version = session.home_.version();
  result.outcome = Outcome::executed;
  result.feedback = build_feedback(filtered);
  emit("feedback", {{"outcome", to_string(result.outcome)}, {"feedback", result.feedback}});
  return result;
}

}  // namespace dsia
