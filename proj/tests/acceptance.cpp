// One PASS/FAIL line per acceptance criterion; exit status 1 if any fails.

#include <chrono>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "dsia/bench.hpp"
#include "dsia/oracle.hpp"
#include "dsia/pipeline.hpp"
#include "dsia/verifier.hpp"
#include "metric_oracle.hpp"
#include "support.hpp"

using namespace dsia;
using namespace dsia::bench;
using nlohmann::json;

namespace {

struct Check {
  bool ok = true;
  std::string detail;
  void require(bool cond, const std::string& what) {
    if (!cond && ok) detail = what;
    ok = ok && cond;
  }
};

int failures = 0;

void criterion(const char* name, double budget_s, const std::function<void(Check&)>& body) {
  Check c;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    body(c);
  } catch (const std::exception& e) {
    c.ok = false;
    c.detail = std::string("exception: ") + e.what();
  }
  const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (budget_s > 0 && s > budget_s) c.require(false, "over time budget");
  if (!c.ok) ++failures;
  std::printf("%s  %-34s %7.2fs  %s\n", c.ok ? "PASS" : "FAIL", name, s, c.detail.c_str());
  std::fflush(stdout);
}

CorpusParams corpus(int n, std::uint64_t seed) {
  CorpusParams p;
  p.n_tasks = n;
  p.seed = seed;
  return p;
}

}  // namespace

int main() {
  criterion("verifier vs brute force", 10.0, [](Check& c) {
    std::mt19937_64 rng(2024);
    long pairs = 0;
    long disagreements = 0;
    long passed = 0;
    for (int h = 0; h < 250; ++h) {
      const json doc = testing::random_home_doc(rng);
      const HomeState s = load_snapshot(doc);
      const testing::BruteForce oracle(doc);
      for (int i = 0; i < 60; ++i) {
        const Call call = testing::random_call(rng);
        const bool v = verify_action(call, s).passed;
        disagreements += v != oracle.passes(call);
        passed += v;
        ++pairs;
      }
    }
    c.require(pairs >= 10000, "fewer than 10000 pairs");
    c.require(passed > 0 && passed < pairs, "degenerate sample");
    c.require(disagreements == 0, std::to_string(disagreements) + " disagreements");
    c.detail = c.ok ? std::to_string(pairs) + " pairs, " + std::to_string(passed) + " valid" : c.detail;
  });

  criterion("generate-and-filter guarantees", 60.0, [](Check& c) {
    const Dataset data = generate_corpus(corpus(1000, 31));
    long checked = 0;
    long blocked = 0;
    for (double p : {0.1, 0.3, 0.7}) {
      oracle::NoisyOracleBackend noisy({p, 5, NoiseTarget::device, true});
      for (bool stage1 : {true, false}) {
        const auto runs = run_corpus(data, noisy, noisy, {.stage1_enabled = stage1});
        for (std::size_t t = 0; t < runs.size(); ++t) {
          const PipelineResult& r = runs[t].result;
          if (r.outcome != Outcome::executed) continue;
          const HomeState& home = data.homes.at(data.tasks[t].home_id);
          const testing::BruteForce oracle(to_snapshot_json(home));
          c.require(r.final.size() == r.raw.size(), "length changed on " + data.tasks[t].task_id);
          if (r.final.size() != r.raw.size()) continue;
          std::size_t executed = 0;
          for (std::size_t i = 0; i < r.raw.size(); ++i) {
            const Call* raw = as_call(r.raw[i]);
            const bool phi = raw != nullptr && oracle.passes(*raw);
            if (phi) {
              c.require(r.final[i] == r.raw[i], "valid action dropped in " + data.tasks[t].task_id);
              c.require(executed < r.executed.size() && AtomicAction(r.executed[executed]) == r.raw[i],
                        "valid action not executed in " + data.tasks[t].task_id);
              ++executed;
            } else {
              c.require(is_error(r.final[i]), "invalid action kept in " + data.tasks[t].task_id);
              blocked += raw != nullptr;
            }
            ++checked;
          }
          c.require(executed == r.executed.size(), "unverified action executed in " + data.tasks[t].task_id);
        }
      }
    }
    c.require(blocked > 0, "noise never produced an invalid action");
    if (c.ok) c.detail = std::to_string(checked) + " atoms, " + std::to_string(blocked) + " blocked";
  });

  criterion("early-rejection call accounting", 0, [](Check& c) {
    CorpusParams p = corpus(1000, 77);
    p.mix = {{Category::VS, 0.3}, {Category::IS, 0.12}, {Category::VM, 0.25}, {Category::IM, 0.061},
             {Category::MM, 0.269}};
    const Dataset data = generate_corpus(p);
    long invalid = 0;
    for (const auto& t : data.tasks) invalid += is_invalid(t.category);
    c.require(invalid == 181, "corpus has " + std::to_string(invalid) + " invalid tasks");
    oracle::RuleOracleBackend backend;
    const MetricsReport with = score_corpus(data.tasks, run_corpus(data, backend, backend));
    const MetricsReport without =
        score_corpus(data.tasks, run_corpus(data, backend, backend, {.stage1_enabled = false}));
    c.require(with.usage.stage2_calls == 819, "stage2_calls " + std::to_string(with.usage.stage2_calls));
    c.require(with.usage.stage1_calls == 1000, "stage1_calls " + std::to_string(with.usage.stage1_calls));
    c.require(with.usage.stage2_tokens < without.usage.stage2_tokens, "stage-2 tokens did not drop");
    if (c.ok) {
      c.detail = "S2 calls 819, S2 tokens " + std::to_string(with.usage.stage2_tokens) + " vs " +
                 std::to_string(without.usage.stage2_tokens) + " without stage 1";
    }
  });

  criterion("rejection and mixed-intent cases", 0, [](Check& c) {
    oracle::RuleOracleBackend backend;
    Pipeline pipeline(backend, backend);
    Session store("a", testing::fixture("study_room_home"));
    const PipelineResult rej = pipeline.execute_instruction(store, testing::store_room_instruction());
    c.require(render_sequence(rej.final) == "{error_input}", "store-room output " + render_sequence(rej.final));
    c.require(rej.usage.stage2_calls == 0, "store-room case reached stage 2");

    Session mixed("b", testing::fixture("running_example"));
    const PipelineResult r = pipeline.execute_instruction(mixed, testing::running_instruction());
    const ActionSequence expect = {Call{"bedroom", "reading_lamp", "turn_on", {}}, ErrorToken{},
                                   Call{"entrance", "smart_lock", "lock", {}}};
    c.require(r.final == expect, "mixed final " + render_sequence(r.final));
    c.require(r.feedback == "Executed valid actions. Failed: dehumidifier", "feedback '" + r.feedback + "'");
  });

  criterion("ablation lowers rejection EM", 0, [](Check& c) {
    const Dataset data = generate_corpus(corpus(1000, 55));
    oracle::NoisyOracleBackend noisy({0.3, 8, NoiseTarget::device, true});
    const MetricsReport with = score_corpus(data.tasks, run_corpus(data, noisy, noisy));
    const MetricsReport without =
        score_corpus(data.tasks, run_corpus(data, noisy, noisy, {.stage1_enabled = false}));
    c.require(without.rejection_rate < with.rejection_rate, "ablation not lower");
    char buf[96];
    std::snprintf(buf, sizeof buf, "%.2f%% with stage 1, %.2f%% without", with.rejection_rate * 100,
                  without.rejection_rate * 100);
    if (c.ok) c.detail = buf;
  });

  criterion("metric oracle", 0, [](Check& c) {
    std::mt19937_64 rng(99);
    int em_ones = 0;
    for (int i = 0; i < 1000; ++i) {
      const auto [pred, gold] = testing::random_pair(rng);
      const int em = exact_match(pred, gold);
      const double f1 = f1_score(pred, gold);
      c.require(em == testing::oracle_em(pred, gold), "EM disagrees on pair " + std::to_string(i));
      c.require(std::abs(f1 - testing::oracle_f1(pred, gold)) < 1e-12, "F1 disagrees on pair " + std::to_string(i));
      c.require(em == 0 || f1 == 1.0, "EM=1 with F1<1 on pair " + std::to_string(i));
      em_ones += em;
    }
    c.require(em_ones > 0 && em_ones < 1000, "degenerate sample");
    if (c.ok) c.detail = "1000 pairs, " + std::to_string(em_ones) + " exact";
  });

  criterion("interaction contract", 0, [](Check& c) {
    CorpusParams p = corpus(50, 12);
    p.mix = {{Category::INTERACTIVE, 1.0}};
    const Dataset data = generate_corpus(p);
    oracle::RuleOracleBackend backend;
    const auto runs = run_corpus(data, backend, backend);
    const MetricsReport r = score_corpus(data.tasks, runs);
    c.require(r.autonomous_n > 0 && r.clarification_n > 0, "corpus lacks one interaction kind");
    c.require(r.autonomous_success == 1.0, "autonomous success below 1");
    c.require(r.clarification_success == 1.0, "clarification success below 1");
    for (std::size_t i = 0; i < runs.size(); ++i) {
      const bool asks = data.tasks[i].interaction->requires_clarification;
      c.require(runs[i].clarification_turns == (asks ? 1 : 0), "wrong turn count on " + data.tasks[i].task_id);
      c.require(!asks || runs[i].answer_consumed, "answer not consumed on " + data.tasks[i].task_id);
    }
    if (c.ok) {
      c.detail = std::to_string(r.autonomous_n) + " autonomous, " + std::to_string(r.clarification_n) +
                 " clarified";
    }
  });

  criterion("deterministic reports", 0, [](Check& c) {
    auto report = [] {
      CorpusParams p = corpus(500, 3);
      p.mix = {{Category::VS, 0.2}, {Category::IS, 0.2}, {Category::VM, 0.2}, {Category::IM, 0.1},
               {Category::MM, 0.2}, {Category::INTERACTIVE, 0.1}};
      const Dataset data = generate_corpus(p);
      oracle::NoisyOracleBackend noisy({0.3, 4, NoiseTarget::device, true});
      const auto runs = run_corpus(data, noisy, noisy);
      json doc = to_json(score_corpus(data.tasks, runs));
      json rows = json::array();
      for (const auto& run : runs) rows.push_back(to_json(run.result));
      doc["tasks"] = rows;
      return dataset_jsonl(data) + doc.dump(2);
    };
    const std::string a = report();
    const std::string b = report();
    c.require(a == b, "reports differ");
    if (c.ok) c.detail = std::to_string(a.size()) + " bytes identical";
  });

  std::printf("%s\n", failures == 0 ? "ALL PASS" : "SOME FAILED");
  return failures == 0 ? 0 : 1;
}
