#include <doctest.h>

#include <random>

#include "dsia/bench.hpp"
#include "dsia/errors.hpp"
#include "metric_oracle.hpp"

using namespace dsia;
using namespace dsia::bench;

namespace {

ActionSequence seq(std::string_view text) { return parse_sequence(text).actions; }

TaskRun run_with(Outcome outcome, std::string_view final_text) {
  TaskRun run;
  run.result.outcome = outcome;
  run.result.final = seq(final_text);
  return run;
}

TaskRecord task(std::string id, Category c, std::string gold) {
  return TaskRecord{std::move(id), "h", "x", std::move(gold), c, std::nullopt};
}

}  // namespace

TEST_CASE("exact match examples") {
  const auto a = seq("{kitchen.lamp.turn_on()}");
  const auto ab = seq("{kitchen.lamp.turn_on(), hall.lock.lock()}");
  const auto ba = seq("{hall.lock.lock(), kitchen.lamp.turn_on()}");
  CHECK(exact_match(ab, ba) == 1);
  CHECK(exact_match(ab, ba, {.order_sensitive = true}) == 0);
  CHECK(exact_match(ab, ab, {.order_sensitive = true}) == 1);
  CHECK(exact_match(a, ab) == 0);
  CHECK(exact_match(seq("{error_input}"), seq("{error_input}")) == 1);
  CHECK(exact_match(seq("{error_input, error_input}"), seq("{error_input}")) == 0);
  CHECK(exact_match(seq("{Kitchen.Lamp.turn_on()}"), a) == 1);
  CHECK(exact_match(seq("{bedroom.fan.set_level(3)}"), seq("{bedroom.fan.set_level(3.0)}")) == 1);
  CHECK(exact_match({}, {}) == 1);
}

TEST_CASE("f1 examples") {
  const auto a = seq("{kitchen.lamp.turn_on()}");
  const auto ab = seq("{kitchen.lamp.turn_on(), hall.lock.lock()}");
  CHECK(f1_score(a, ab) == doctest::Approx(2.0 / 3.0));
  CHECK(f1_score(ab, a) == doctest::Approx(2.0 / 3.0));
  CHECK(f1_score({}, {}) == 1.0);
  CHECK(f1_score(a, {}) == 0.0);
  CHECK(f1_score({}, a) == 0.0);
  CHECK(f1_score(seq("{error_input}"), a) == 0.0);
  // duplicates count once per occurrence
  CHECK(f1_score(seq("{kitchen.lamp.turn_on(), kitchen.lamp.turn_on()}"), a) == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("per-field f1 gives partial credit for the right device") {
  const auto pred = seq("{kitchen.lamp.turn_off()}");
  const auto gold = seq("{kitchen.lamp.turn_on()}");
  CHECK(f1_score(pred, gold) == 0.0);
  CHECK(f1_score(pred, gold, {.per_field_f1 = true}) == doctest::Approx(2.0 / 3.0));
  CHECK(f1_score(gold, gold, {.per_field_f1 = true}) == 1.0);
  CHECK(f1_score(seq("{error_input}"), seq("{error_input}"), {.per_field_f1 = true}) == 1.0);
}

TEST_CASE("property: metrics agree with the counting oracle") {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 3000; ++i) {
    const auto [pred, gold] = testing::random_pair(rng);
    const int em = exact_match(pred, gold);
    const double f1 = f1_score(pred, gold);
    REQUIRE(em == testing::oracle_em(pred, gold));
    REQUIRE(f1 == doctest::Approx(testing::oracle_f1(pred, gold)));
    CHECK(f1 >= 0.0);
    CHECK(f1 <= 1.0);
    if (em == 1) CHECK(f1 == 1.0);
    if (exact_match(pred, gold, {.order_sensitive = true}) == 1) CHECK(em == 1);
    CHECK(f1_score(gold, pred) == doctest::Approx(f1));
  }
}

TEST_CASE("score_corpus aggregates per category") {
  const std::vector<TaskRecord> tasks = {
      task("a", Category::VS, "{kitchen.lamp.turn_on()}"),
      task("b", Category::VS, "{kitchen.lamp.turn_on()}"),
      task("c", Category::IS, "{error_input}"),
      task("d", Category::IM, "{error_input}"),
      task("e", Category::MM, "{kitchen.lamp.turn_on(), error_input}"),
  };
  std::vector<TaskRun> runs = {
      run_with(Outcome::executed, "{kitchen.lamp.turn_on()}"),
      run_with(Outcome::failed, "{kitchen.lamp.turn_on()}"),
      run_with(Outcome::rejected, "{error_input}"),
      run_with(Outcome::executed, "{kitchen.lamp.turn_on()}"),
      run_with(Outcome::executed, "{error_input, kitchen.lamp.turn_on()}"),
  };
  runs[0].result.usage = {1, 10, 1, 20};
  runs[2].result.usage = {1, 5, 0, 0};

  const MetricsReport r = score_corpus(tasks, runs);
  CHECK(r.per_category.at(Category::VS).em == 0.5);
  CHECK(r.per_category.at(Category::VS).n == 2);
  CHECK(r.per_category.at(Category::IS).em == 1.0);
  CHECK(r.per_category.at(Category::IM).em == 0.0);
  CHECK(r.per_category.at(Category::MM).em == 1.0);
  CHECK(r.overall.em == doctest::Approx(3.0 / 5.0));
  CHECK(r.overall.n == 5);
  CHECK(r.rejection_rate == 0.5);
  CHECK(r.rejection_n == 2);
  CHECK(r.rejection_rate == doctest::Approx((r.per_category.at(Category::IS).em + r.per_category.at(Category::IM).em) / 2));
  CHECK(r.outcomes.at("Executed") == 3);
  CHECK(r.outcomes.at("Failed") == 1);
  CHECK(r.usage.stage1_calls == 2);
  CHECK(r.usage.stage2_tokens == 20);

  SUBCASE("task order does not matter") {
    std::vector<TaskRecord> t2(tasks.rbegin(), tasks.rend());
    std::vector<TaskRun> r2(runs.rbegin(), runs.rend());
    const MetricsReport s = score_corpus(t2, r2);
    CHECK(to_json(s) == to_json(r));
  }
  SUBCASE("length mismatch") {
    runs.pop_back();
    CHECK_THROWS_AS(score_corpus(tasks, runs), CorpusError);
  }
}

TEST_CASE("interactive success rates") {
  TaskRecord auto_task = task("a", Category::INTERACTIVE, "{bedroom.lamp_b.turn_on()}");
  auto_task.interaction = Interaction{false, "", ""};
  TaskRecord ask_task = task("b", Category::INTERACTIVE, "{bedroom.lamp_a.turn_on()}");
  ask_task.interaction = Interaction{true, "Lamp B, please.", "{bedroom.lamp_b.turn_on()}"};

  TaskRun silent = run_with(Outcome::executed, "{bedroom.lamp_b.turn_on()}");
  TaskRun asked = silent;
  asked.clarification_turns = 1;
  asked.answer_consumed = true;

  auto score = [&](const TaskRun& a, const TaskRun& b) { return score_corpus({auto_task, ask_task}, {a, b}); };
  MetricsReport r = score(silent, asked);
  CHECK(r.autonomous_success == 1.0);
  CHECK(r.clarification_success == 1.0);
  CHECK(r.autonomous_n == 1);
  CHECK(r.clarification_n == 1);
  CHECK(r.per_category.at(Category::INTERACTIVE).em == 1.0);

  r = score(asked, silent);  // asked when it should not have, did not ask when it should have
  CHECK(r.autonomous_success == 0.0);
  CHECK(r.clarification_success == 0.0);

  TaskRun unresolved = run_with(Outcome::clarification_needed, "{}");
  unresolved.clarification_turns = 2;
  r = score(silent, unresolved);
  CHECK(r.clarification_success == 0.0);
  CHECK(r.per_category.at(Category::INTERACTIVE).em == 0.5);
}

TEST_CASE("report json and tables") {
  const std::vector<TaskRecord> tasks = {task("a", Category::VS, "{kitchen.lamp.turn_on()}"),
                                         task("b", Category::IS, "{error_input}")};
  const std::vector<TaskRun> runs = {run_with(Outcome::executed, "{kitchen.lamp.turn_on()}"),
                                     run_with(Outcome::executed, "{kitchen.lamp.turn_on()}")};
  const MetricsReport r = score_corpus(tasks, runs);
  const auto doc = to_json(r);
  CHECK(doc["per_category"]["VS"]["em"] == 1.0);
  CHECK(doc["per_category"]["IS"]["n"] == 1);
  CHECK(doc["overall"]["em"] == 0.5);
  CHECK(doc["rejection"]["rate"] == 0.0);
  CHECK(doc.contains("interactive"));
  CHECK(doc.contains("usage"));

  const std::string table = render_table({{"Two-stage", r}});
  CHECK(table.find("Method") != std::string::npos);
  CHECK(table.find("VS EM") != std::string::npos);
  CHECK(table.find("100.00") != std::string::npos);
  CHECK(table.find("50.00") != std::string::npos);
  CHECK(table.find("Two-stage") != std::string::npos);
  CHECK(render_usage_table({{"Two-stage", r}}).find("S2 tokens") != std::string::npos);
}
