#include <csignal>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <thread>

#include <CLI11.hpp>

#include "dsia/backend.hpp"
#include "dsia/bench.hpp"
#include "dsia/errors.hpp"
#include "dsia/pipeline.hpp"
#include "dsia/service.hpp"

namespace {

using nlohmann::json;
using namespace dsia;

struct Backends {
  std::unique_ptr<LanguageBackend> stage2;
  std::unique_ptr<LanguageBackend> stage1_own;
  std::unique_ptr<LanguageBackend> stage2_recorder;
  std::unique_ptr<LanguageBackend> stage1_recorder;
  LanguageBackend* stage1 = nullptr;
  LanguageBackend* generator = nullptr;
};

Backends make_backends(const std::string& spec, const std::string& stage1_spec, const std::string& record) {
  Backends b;
  b.stage2 = make_backend(parse_backend_spec(spec));
  b.stage1 = b.stage2.get();
  if (!stage1_spec.empty()) {
    b.stage1_own = make_backend(parse_backend_spec(stage1_spec));
    b.stage1 = b.stage1_own.get();
  }
  b.generator = b.stage2.get();
  if (!record.empty()) {
    b.stage2_recorder = std::make_unique<RecordingBackend>(*b.generator, record);
    b.generator = b.stage2_recorder.get();
    if (b.stage1 == b.stage2.get()) {
      b.stage1 = b.generator;
    } else {
      b.stage1_recorder = std::make_unique<RecordingBackend>(*b.stage1, record);
      b.stage1 = b.stage1_recorder.get();
    }
  }
  return b;
}

json task_rows(const bench::Dataset& dataset, const std::vector<bench::TaskRun>& runs,
               bench::MatchOptions match) {
  json rows = json::array();
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const auto& task = dataset.tasks[i];
    const auto& r = runs[i].result;
    const bool wants = task.interaction && task.interaction->requires_clarification;
    const ActionSequence gold = parse_sequence(wants ? task.interaction->gold_after_answer : task.gold).actions;
    const bool scorable = r.outcome == Outcome::executed || r.outcome == Outcome::rejected;
    rows.push_back({{"task_id", task.task_id},
                    {"category", bench::to_string(task.category)},
                    {"outcome", to_string(r.outcome)},
                    {"route", to_string(r.analysis.route)},
                    {"final", render_sequence(r.final)},
                    {"gold", render_sequence(gold)},
                    {"em", scorable ? bench::exact_match(r.final, gold, match) : 0},
                    {"f1", scorable ? bench::f1_score(r.final, gold, match) : 0.0},
                    {"clarification_turns", runs[i].clarification_turns}});
  }
  return rows;
}

int cmd_run(const std::string& dataset_path, const std::string& spec, const std::string& stage1_spec,
            const std::string& report_path, const std::string& record, bool order_sensitive,
            bool per_field, bool no_stage1, bool compare, unsigned threads) {
  const bench::Dataset dataset = bench::load_dataset(dataset_path);
  Backends b = make_backends(spec, stage1_spec, record);
  const bench::MatchOptions match{order_sensitive, per_field};

  std::vector<std::pair<std::string, bench::MetricsReport>> rows;
  json methods = json::object();
  auto run_one = [&](const std::string& label, bool stage1) {
    auto runs = bench::run_corpus(dataset, *b.stage1, *b.generator, {stage1, threads});
    auto report = bench::score_corpus(dataset.tasks, runs, match);
    json doc = bench::to_json(report);
    doc["stage1_enabled"] = stage1;
    doc["tasks"] = task_rows(dataset, runs, match);
    methods[label] = std::move(doc);
    rows.emplace_back(label, std::move(report));
  };
  if (!no_stage1 || compare) run_one("Two-stage", true);
  if (no_stage1 || compare) run_one("Stage-2 only", false);

  std::cout << bench::render_table(rows) << "\n" << bench::render_usage_table(rows);
  for (const auto& [label, report] : rows) {
    if (report.rejection_n > 0) {
      std::cout << label << ": rejection rate " << report.rejection_rate * 100.0 << "% over "
                << report.rejection_n << " invalid tasks\n";
    }
    if (report.autonomous_n + report.clarification_n > 0) {
      std::cout << label << ": autonomous success " << report.autonomous_success * 100.0 << "% ("
                << report.autonomous_n << "), clarification success "
                << report.clarification_success * 100.0 << "% (" << report.clarification_n << ")\n";
    }
  }
  if (!report_path.empty()) {
    json doc = {{"dataset", std::filesystem::path(dataset_path).filename().string()},
                {"backend", describe(parse_backend_spec(spec))},
                {"order_sensitive", order_sensitive},
                {"per_field_f1", per_field},
                {"tasks", dataset.tasks.size()},
                {"methods", methods}};
    std::ofstream out(report_path, std::ios::binary);
    if (!out) throw Error("cannot write report " + report_path);
    out << doc.dump(2) << "\n";
  }
  return 0;
}

int cmd_gen(const bench::CorpusParams& params, const std::string& out) {
  const bench::Dataset dataset = bench::generate_corpus(params);
  bench::save_dataset(dataset, out);
  std::map<bench::Category, int> counts;
  for (const auto& t : dataset.tasks) ++counts[t.category];
  std::cout << "wrote " << dataset.tasks.size() << " tasks and " << dataset.homes.size() << " homes to "
            << out << "\n";
  for (const auto& [c, n] : counts) std::cout << "  " << bench::to_string(c) << ": " << n << "\n";
  return 0;
}

int cmd_serve(int port, const std::string& host, const std::string& spec, const std::string& stage1_spec,
              const std::string& homes, int idle_minutes, bool no_stage1) {
  Backends b = make_backends(spec, stage1_spec, "");
  ServiceOptions options;
  options.idle_timeout = std::chrono::minutes(idle_minutes);
  options.pipeline.stage1_enabled = !no_stage1;

  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  Service service(*b.stage1, *b.generator, options);
  if (!homes.empty()) std::cerr << "loaded " << service.load_homes(homes) << " homes from " << homes << "\n";

  std::jthread waiter([&] {
    int sig = 0;
    sigwait(&signals, &sig);
    std::cerr << "shutting down\n";
    service.stop();
  });
  std::cerr << "listening on " << host << ":" << port << "\n";
  if (!service.listen(host, port)) {
    std::cerr << "error: cannot listen on " << host << ":" << port << "\n";
    pthread_kill(waiter.native_handle(), SIGTERM);
    return 1;
  }
  return 0;
}

int cmd_repl(const std::string& home_path, const std::string& spec, const std::string& stage1_spec,
             bool no_stage1) {
  Backends b = make_backends(spec, stage1_spec, "");
  PipelineOptions options;
  options.stage1_enabled = !no_stage1;
  Pipeline pipeline(*b.stage1, *b.generator, options);
  Session session("repl", load_snapshot_file(home_path));
  std::cout << "home " << session.home().home_id() << " (" << session.home().device_count()
            << " devices). :state shows the home, :quit exits.\n";
  std::string line;
  while (std::cout << (session.pending() ? "answer> " : "> ") << std::flush && std::getline(std::cin, line)) {
    if (line.empty()) continue;
    if (line == ":quit" || line == ":q") break;
    if (line == ":state") {
      std::cout << render_state_text(session.home());
      continue;
    }
    const PipelineResult r = session.pending() ? pipeline.answer_clarification(session, line)
                                               : pipeline.execute_instruction(session, line);
    std::cout << "[" << to_string(r.outcome) << "] route " << to_string(r.analysis.route) << "\n";
    if (!r.raw.empty()) std::cout << "raw:   " << render_sequence(r.raw) << "\n";
    if (!r.final.empty()) std::cout << "final: " << render_sequence(r.final) << "\n";
    std::cout << r.feedback << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Smart-home command pipeline with intent routing and action verification"};
  app.require_subcommand(1);

  std::string backend = "rule_oracle";
  std::string stage1_backend;
  bool no_stage1 = false;

  auto* serve = app.add_subcommand("serve", "Run the HTTP service");
  int port = 8080;
  std::string host = "127.0.0.1";
  std::string homes;
  int idle_minutes = 30;
  serve->add_option("--port", port, "Listen port")->check(CLI::Range(1, 65535));
  serve->add_option("--host", host, "Listen address");
  serve->add_option("--backend", backend, "Language backend spec");
  serve->add_option("--stage1-backend", stage1_backend, "Separate backend for intent analysis");
  serve->add_option("--homes", homes, "Directory of home snapshots")->check(CLI::ExistingDirectory);
  serve->add_option("--idle-timeout", idle_minutes, "Session idle timeout in minutes")->check(CLI::PositiveNumber);
  serve->add_flag("--no-stage1", no_stage1, "Skip intent analysis");

  auto* run = app.add_subcommand("run", "Run a benchmark dataset and score it");
  std::string dataset;
  std::string report;
  std::string record;
  bool order_sensitive = false;
  bool per_field = false;
  bool compare = false;
  unsigned threads = 0;
  run->add_option("--dataset", dataset, "dataset.jsonl")->required()->check(CLI::ExistingFile);
  run->add_option("--backend", backend, "Language backend spec");
  run->add_option("--stage1-backend", stage1_backend, "Separate backend for intent analysis");
  run->add_option("--report", report, "Write a JSON report here");
  run->add_option("--record", record, "Append every prompt/response pair to a transcript");
  run->add_option("--threads", threads, "Worker threads (0: all cores)");
  run->add_flag("--order-sensitive", order_sensitive, "Exact match also compares order");
  run->add_flag("--per-field-f1", per_field, "Score F1 over room/device/action fields");
  run->add_flag("--no-stage1", no_stage1, "Run only the generate-and-filter stage");
  run->add_flag("--compare-ablation", compare, "Run with and without intent analysis");

  auto* gen = app.add_subcommand("gen-homes", "Generate a synthetic benchmark corpus");
  bench::CorpusParams params;
  std::string mix;
  std::string out;
  gen->add_option("--n", params.n_homes, "Number of homes")->check(CLI::NonNegativeNumber);
  gen->add_option("--tasks", params.n_tasks, "Number of tasks")->check(CLI::NonNegativeNumber);
  gen->add_option("--seed", params.seed, "Random seed");
  gen->add_option("--mix", mix, "Category shares, e.g. VS=0.3,IS=0.2,VM=0.2,IM=0.1,MM=0.2");
  gen->add_option("--rooms-min", params.rooms_min);
  gen->add_option("--rooms-max", params.rooms_max);
  gen->add_option("--devices-min", params.devices_min);
  gen->add_option("--devices-max", params.devices_max);
  gen->add_option("--out", out, "Output directory")->required();

  auto* repl = app.add_subcommand("repl", "Interactive session against one home");
  std::string home;
  repl->add_option("--home", home, "Home snapshot")->required()->check(CLI::ExistingFile);
  repl->add_option("--backend", backend, "Language backend spec");
  repl->add_option("--stage1-backend", stage1_backend, "Separate backend for intent analysis");
  repl->add_flag("--no-stage1", no_stage1, "Skip intent analysis");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*serve) return cmd_serve(port, host, backend, stage1_backend, homes, idle_minutes, no_stage1);
    if (*run) {
      return cmd_run(dataset, backend, stage1_backend, report, record, order_sensitive, per_field, no_stage1,
                     compare, threads);
    }
    if (*gen) {
      if (!mix.empty()) params.mix = bench::parse_mix(mix);
      return cmd_gen(params, out);
    }
    if (*repl) return cmd_repl(home, backend, stage1_backend, no_stage1);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
