#include "dsia/bench.hpp"

#include <algorithm>

#include "dsia/errors.hpp"

namespace dsia::bench {

namespace {

std::vector<std::string> field_atoms(const ActionSequence& seq) {
  std::vector<std::string> out;
  for (const auto& a : seq) {
    const Call* call = as_call(a);
    if (call == nullptr) {
      out.emplace_back("error:");
      continue;
    }
    out.push_back("room:" + call->room);
    out.push_back("device:" + call->room + "." + call->device);
    std::string action = "action:" + call->capability + "(";
    for (std::size_t i = 0; i < call->params.size(); ++i) {
      if (i != 0) action += ",";
      action += render_literal(call->params[i]);
    }
    out.push_back(action + ")");
  }
  return out;
}

template <typename T>
std::size_t multiset_overlap(std::vector<T> a, std::vector<T> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::size_t i = 0;
  std::size_t j = 0;
  std::size_t common = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i] < b[j]) {
      ++i;
    } else if (b[j] < a[i]) {
      ++j;
    } else {
      ++common;
      ++i;
      ++j;
    }
  }
  return common;
}

double f1_from_counts(std::size_t common, std::size_t n_pred, std::size_t n_gold) {
  if (n_pred == 0 && n_gold == 0) return 1.0;
  if (n_pred == 0 || n_gold == 0 || common == 0) return 0.0;
  const double precision = static_cast<double>(common) / static_cast<double>(n_pred);
  const double recall = static_cast<double>(common) / static_cast<double>(n_gold);
  return 2.0 * precision * recall / (precision + recall);
}

}  // namespace

int exact_match(const ActionSequence& pred, const ActionSequence& gold, MatchOptions options) {
  ActionSequence p = normalize_sequence(pred);
  ActionSequence g = normalize_sequence(gold);
  if (options.order_sensitive) return p == g ? 1 : 0;
  if (p.size() != g.size()) return 0;
  std::sort(p.begin(), p.end());
  std::sort(g.begin(), g.end());
  return p == g ? 1 : 0;
}

double f1_score(const ActionSequence& pred, const ActionSequence& gold, MatchOptions options) {
  ActionSequence p = normalize_sequence(pred);
  ActionSequence g = normalize_sequence(gold);
  if (options.per_field_f1) {
    auto pa = field_atoms(p);
    auto ga = field_atoms(g);
    const std::size_t np = pa.size();
    const std::size_t ng = ga.size();
    return f1_from_counts(multiset_overlap(std::move(pa), std::move(ga)), np, ng);
  }
  const std::size_t np = p.size();
  const std::size_t ng = g.size();
  return f1_from_counts(multiset_overlap(std::move(p), std::move(g)), np, ng);
}

MetricsReport score_corpus(const std::vector<TaskRecord>& tasks, const std::vector<TaskRun>& runs,
                           MatchOptions options) {
  if (tasks.size() != runs.size()) {
    throw CorpusError("score_corpus: " + std::to_string(tasks.size()) + " tasks but " +
                      std::to_string(runs.size()) + " results");
  }
  MetricsReport report;
  double em_sum = 0;
  double f1_sum = 0;
  double rejection_sum = 0;
  double autonomous_sum = 0;
  double clarification_sum = 0;

  for (std::size_t i = 0; i < tasks.size(); ++i) {
    const TaskRecord& task = tasks[i];
    const TaskRun& run = runs[i];
    const bool wants_clarification = task.interaction && task.interaction->requires_clarification;
    const std::string& gold_text =
        wants_clarification ? task.interaction->gold_after_answer : task.gold;
    const ActionSequence gold = parse_sequence(gold_text).actions;

    const Outcome outcome = run.result.outcome;
    const bool scorable = outcome == Outcome::executed || outcome == Outcome::rejected;
    const int em = scorable ? exact_match(run.result.final, gold, options) : 0;
    const double f1 = scorable ? f1_score(run.result.final, gold, options) : 0.0;

    CategoryScore& cat = report.per_category[task.category];
    cat.em += em;
    cat.f1 += f1;
    ++cat.n;
    em_sum += em;
    f1_sum += f1;
    ++report.outcomes[std::string(to_string(outcome))];
    report.usage += run.result.usage;

    if (is_invalid(task.category)) {
      rejection_sum += em;
      ++report.rejection_n;
    }
    if (task.category == Category::INTERACTIVE && task.interaction) {
      if (wants_clarification) {
        ++report.clarification_n;
        if (run.clarification_turns == 1 && run.answer_consumed && em == 1) clarification_sum += 1;
      } else {
        ++report.autonomous_n;
        if (run.clarification_turns == 0 && em == 1) autonomous_sum += 1;
      }
    }
  }

  for (auto& [_, cat] : report.per_category) {
    cat.em /= static_cast<double>(cat.n);
    cat.f1 /= static_cast<double>(cat.n);
  }
  report.overall.n = static_cast<std::int64_t>(tasks.size());
  if (!tasks.empty()) {
    report.overall.em = em_sum / static_cast<double>(tasks.size());
    report.overall.f1 = f1_sum / static_cast<double>(tasks.size());
  }
  auto mean = [](double sum, std::int64_t n) { return n == 0 ? 0.0 : sum / static_cast<double>(n); };
  report.rejection_rate = mean(rejection_sum, report.rejection_n);
  report.autonomous_success = mean(autonomous_sum, report.autonomous_n);
  report.clarification_success = mean(clarification_sum, report.clarification_n);
  return report;
}

}  // namespace dsia::bench
