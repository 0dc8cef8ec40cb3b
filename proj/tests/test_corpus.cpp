#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "dsia/bench.hpp"
#include "dsia/errors.hpp"
#include "dsia/oracle.hpp"
#include "support.hpp"

using namespace dsia;
using namespace dsia::bench;
namespace fs = std::filesystem;

namespace {

Call op_call(const oracle::IntentOp& op) {
  return Call{op.room.value_or(""), op.device.value_or(""), op.method, op.args};
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("dsia_corpus_" + name);
  fs::remove_all(dir);
  return dir;
}

}  // namespace

TEST_CASE("category counts use largest remainder") {
  CorpusParams p;
  p.n_tasks = 1000;
  p.mix = {{Category::VS, 0.3}, {Category::IS, 0.12}, {Category::VM, 0.25}, {Category::IM, 0.061},
           {Category::MM, 0.269}};
  const auto c = category_counts(p);
  CHECK(c.at(Category::IS) + c.at(Category::IM) == 181);
  int total = 0;
  for (const auto& [_, n] : c) total += n;
  CHECK(total == 1000);

  p.n_tasks = 7;
  p.mix = {{Category::VS, 1.0 / 3}, {Category::IS, 1.0 / 3}, {Category::VM, 1.0 / 3}};
  const auto d = category_counts(p);
  CHECK(d.at(Category::VS) + d.at(Category::IS) + d.at(Category::VM) == 7);
  CHECK(d.at(Category::VS) == 3);

  p.mix = {{Category::VS, 0.5}, {Category::IS, 0.4}};
  CHECK_THROWS_AS(category_counts(p), CorpusError);
  p.mix = {{Category::VS, 1.2}, {Category::IS, -0.2}};
  CHECK_THROWS_AS(category_counts(p), CorpusError);
}

TEST_CASE("parse_mix") {
  const auto mix = parse_mix("VS=0.5, IS=0.25,MM=0.25");
  CHECK(mix.at(Category::VS) == 0.5);
  CHECK(mix.at(Category::MM) == 0.25);
  CHECK_THROWS_AS(parse_mix("XX=1"), CorpusError);
  CHECK_THROWS_AS(parse_mix("VS"), CorpusError);
  CHECK_THROWS_AS(parse_mix("VS=abc"), CorpusError);
}

TEST_CASE("generation is deterministic under the seed") {
  CorpusParams p;
  p.n_tasks = 200;
  p.seed = 9;
  const Dataset a = generate_corpus(p);
  const Dataset b = generate_corpus(p);
  CHECK(dataset_jsonl(a) == dataset_jsonl(b));
  REQUIRE(a.homes.size() == b.homes.size());
  for (const auto& [id, home] : a.homes) CHECK(to_snapshot_json(home) == to_snapshot_json(b.homes.at(id)));
  p.seed = 10;
  CHECK(dataset_jsonl(generate_corpus(p)) != dataset_jsonl(a));

  p.n_tasks = 0;
  CHECK(generate_corpus(p).tasks.empty());
}

TEST_CASE("infeasible parameters are rejected") {
  CorpusParams p;
  p.rooms_min = 5;
  p.rooms_max = 2;
  CHECK_THROWS_AS(generate_corpus(p), CorpusError);
  p = {};
  p.n_homes = 0;
  CHECK_THROWS_AS(generate_corpus(p), CorpusError);
  p = {};
  p.devices_min = 0;
  CHECK_THROWS_AS(generate_corpus(p), CorpusError);
  p = {};
  p.rooms_max = 1000;
  CHECK_THROWS_AS(generate_corpus(p), CorpusError);
}

TEST_CASE("property: tasks match their category against the home") {
  CorpusParams p;
  p.n_tasks = 1000;
  p.seed = 123;
  p.mix = {{Category::VS, 0.25}, {Category::IS, 0.25}, {Category::VM, 0.15}, {Category::IM, 0.136},
           {Category::MM, 0.214}};
  const Dataset data = generate_corpus(p);
  REQUIRE(data.tasks.size() == 1000);
  const auto counts = category_counts(p);
  CHECK(counts.at(Category::IS) + counts.at(Category::IM) == 386);

  std::map<Category, int> seen;
  for (const auto& task : data.tasks) {
    ++seen[task.category];
    const HomeState& home = data.homes.at(task.home_id);
    const testing::BruteForce oracle(to_snapshot_json(home));
    const auto intent = oracle::read_intent(task.instruction);
    const auto gold = parse_sequence(task.gold).actions;
    std::vector<bool> ok;
    for (const auto& op : intent.ops) ok.push_back(oracle.passes(op_call(op)));
    const auto n_ok = std::count(ok.begin(), ok.end(), true);
    CAPTURE(task.task_id);
    CAPTURE(task.instruction);
    switch (task.category) {
      case Category::VS:
        CHECK(ok.size() == 1);
        CHECK(n_ok == 1);
        break;
      case Category::VM:
        CHECK(ok.size() >= 2);
        CHECK(n_ok == static_cast<long>(ok.size()));
        break;
      case Category::IS:
        CHECK(ok.size() == 1);
        CHECK(n_ok == 0);
        CHECK(task.gold == "{error_input}");
        break;
      case Category::IM:
        CHECK(ok.size() >= 2);
        CHECK(n_ok == 0);
        CHECK(task.gold == "{error_input}");
        break;
      case Category::MM:
        CHECK(ok.size() == 2);
        CHECK(n_ok == 1);
        REQUIRE(gold.size() == 2);
        for (std::size_t i = 0; i < 2; ++i) CHECK(is_error(gold[i]) == !ok[i]);
        break;
      case Category::INTERACTIVE: FAIL("unexpected"); break;
    }
    if (!is_invalid(task.category)) {
      std::size_t j = 0;
      for (std::size_t i = 0; i < ok.size(); ++i) {
        if (ok[i]) CHECK(gold[j] == AtomicAction(op_call(intent.ops[i])));
        ++j;
      }
    }
  }
  for (const auto& [c, n] : counts) CHECK(seen[c] == n);
}

TEST_CASE("rule-oracle route follows the category") {
  CorpusParams p;
  p.n_tasks = 300;
  p.seed = 4;
  const Dataset data = generate_corpus(p);
  oracle::RuleOracleBackend backend;
  for (const auto& task : data.tasks) {
    const auto analysis = route_instruction(task.instruction, data.homes.at(task.home_id), backend);
    CAPTURE(task.instruction);
    switch (task.category) {
      case Category::VS:
      case Category::VM: CHECK(analysis.route == Route::valid); break;
      case Category::IS:
      case Category::IM: CHECK(analysis.route == Route::invalid); break;
      case Category::MM: CHECK(analysis.route == Route::mixed); break;
      default: break;
    }
  }
}

TEST_CASE("dataset save and load round trip") {
  CorpusParams p;
  p.n_tasks = 60;
  p.mix = {{Category::VS, 0.5}, {Category::INTERACTIVE, 0.5}};
  const Dataset data = generate_corpus(p);
  const fs::path dir = scratch("roundtrip");
  save_dataset(data, dir);
  const Dataset back = load_dataset(dir / "dataset.jsonl");
  CHECK(dataset_jsonl(back) == dataset_jsonl(data));
  CHECK(back.homes.size() == data.homes.size());
  for (const auto& [id, home] : data.homes) CHECK(back.homes.at(id).same_content(home));
  int interactive = 0;
  for (const auto& t : back.tasks) {
    if (t.category != Category::INTERACTIVE) continue;
    ++interactive;
    REQUIRE(t.interaction);
    if (t.interaction->requires_clarification) {
      CHECK_FALSE(t.interaction->simulated_answer.empty());
      CHECK_FALSE(t.interaction->gold_after_answer.empty());
    }
  }
  CHECK(interactive == 30);
  fs::remove_all(dir);
}

TEST_CASE("malformed datasets report the line") {
  const fs::path dir = scratch("bad");
  fs::create_directories(dir / "homes");
  auto home_doc = to_snapshot_json(testing::fixture("lamps_one_off"));
  home_doc["home_id"] = "h";
  std::ofstream(dir / "homes" / "h.json") << home_doc.dump();
  {
    std::ofstream out(dir / "dataset.jsonl");
    out << R"({"task_id":"a","home_id":"h","instruction":"x","gold":"{error_input}","category":"IS"})" << "\n";
    out << "not json\n";
  }
  try {
    load_dataset(dir / "dataset.jsonl");
    FAIL("expected CorpusError");
  } catch (const CorpusError& e) {
    CHECK(std::string(e.what()).find(":2") != std::string::npos);
  }
  {
    std::ofstream out(dir / "dataset.jsonl");
    out << R"({"task_id":"a","home_id":"missing","instruction":"x","gold":"{error_input}","category":"IS"})" << "\n";
  }
  CHECK_THROWS_AS(load_dataset(dir / "dataset.jsonl"), std::exception);
  {
    std::ofstream out(dir / "dataset.jsonl");
    out << R"({"task_id":"a","home":)" << to_snapshot_json(testing::fixture("lamps_one_off")).dump()
        << R"(,"instruction":"x","gold":"{error_input}","category":"IS"})" << "\n";
    out << R"({"task_id":"a","home_id":"bedroom_lamps","instruction":"x","gold":"{error_input}","category":"XX"})" << "\n";
  }
  CHECK_THROWS_AS(load_dataset(dir / "dataset.jsonl"), CorpusError);
  fs::remove_all(dir);
}

TEST_CASE("rule oracle scores perfectly and calls stage 2 only for routed tasks") {
  CorpusParams p;
  p.n_tasks = 400;
  p.seed = 21;
  const Dataset data = generate_corpus(p);
  const auto counts = category_counts(p);
  oracle::RuleOracleBackend backend;
  const auto runs = run_corpus(data, backend, backend, {.stage1_enabled = true, .threads = 4});
  const MetricsReport r = score_corpus(data.tasks, runs);
  CHECK(r.overall.em == 1.0);
  CHECK(r.overall.f1 == 1.0);
  CHECK(r.rejection_rate == 1.0);
  CHECK(r.usage.stage1_calls == 400);
  CHECK(r.usage.stage2_calls == 400 - counts.at(Category::IS) - counts.at(Category::IM));

  const auto serial = run_corpus(data, backend, backend, {.stage1_enabled = true, .threads = 1});
  CHECK(to_json(score_corpus(data.tasks, serial)) == to_json(r));
}

TEST_CASE("stage-2 noise does not reach invalid tasks while stage 1 is on") {
  CorpusParams p;
  p.n_tasks = 400;
  p.seed = 22;
  const Dataset data = generate_corpus(p);
  oracle::NoisyOracleBackend noisy({0.3, 1, NoiseTarget::device, true});
  const MetricsReport with = score_corpus(data.tasks, run_corpus(data, noisy, noisy));
  CHECK(with.rejection_rate == 1.0);
  CHECK(with.per_category.at(Category::VS).em < 1.0);
  CHECK(with.per_category.at(Category::VM).em < 1.0);
  CHECK(with.per_category.at(Category::MM).em < 1.0);

  const MetricsReport without = score_corpus(data.tasks, run_corpus(data, noisy, noisy, {.stage1_enabled = false}));
  CHECK(without.rejection_rate < with.rejection_rate);
  CHECK(without.usage.stage2_calls == 400);
  CHECK(without.usage.stage1_calls == 0);
}

TEST_CASE("interactive corpus resolves with the simulated user") {
  CorpusParams p;
  p.n_tasks = 50;
  p.mix = {{Category::INTERACTIVE, 1.0}};
  const Dataset data = generate_corpus(p);
  oracle::RuleOracleBackend backend;
  const auto runs = run_corpus(data, backend, backend);
  const MetricsReport r = score_corpus(data.tasks, runs);
  CHECK(r.autonomous_n + r.clarification_n == 50);
  CHECK(r.autonomous_n > 0);
  CHECK(r.clarification_n > 0);
  CHECK(r.autonomous_success == 1.0);
  CHECK(r.clarification_success == 1.0);
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const bool asks = data.tasks[i].interaction->requires_clarification;
    CHECK(runs[i].clarification_turns == (asks ? 1 : 0));
    if (asks) CHECK(runs[i].result.usage.stage1_calls == 2);
  }
}

TEST_CASE("runner rejects missing homes") {
  Dataset data;
  data.tasks.push_back(TaskRecord{"a", "nowhere", "x", "{error_input}", Category::IS, std::nullopt});
  oracle::RuleOracleBackend backend;
  CHECK_THROWS_AS(run_corpus(data, backend, backend), CorpusError);
}
