#include "dsia/bench.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>

#include "dsia/errors.hpp"

namespace dsia::bench {

namespace {

TaskRun run_task(Pipeline& pipeline, const TaskRecord& task, const HomeState& home) {
  Session session(task.task_id, home);
  TaskRun run;
  run.result = pipeline.execute_instruction(session, task.instruction);
  if (run.result.outcome != Outcome::clarification_needed) return run;

  run.clarification_turns = 1;
  if (!task.interaction || task.interaction->simulated_answer.empty()) return run;
  const StageUsage first = run.result.usage;
  run.result = pipeline.answer_clarification(session, task.interaction->simulated_answer);
  run.result.usage += first;
  run.answer_consumed = true;
  // The simulated user answers once; a second question goes unanswered.
  if (run.result.outcome == Outcome::clarification_needed) run.clarification_turns = 2;
  return run;
}

}  // namespace

std::vector<TaskRun> run_corpus(const Dataset& dataset, LanguageBackend& stage1,
                                LanguageBackend& stage2, RunOptions options) {
  for (const auto& task : dataset.tasks) {
    if (!dataset.homes.contains(task.home_id)) {
      throw CorpusError("task " + task.task_id + " references unknown home " + task.home_id);
    }
  }
  PipelineOptions pipeline_options;
  pipeline_options.stage1_enabled = options.stage1_enabled;
  Pipeline pipeline(stage1, stage2, pipeline_options);

  std::vector<TaskRun> runs(dataset.tasks.size());
  unsigned threads = options.threads != 0 ? options.threads : std::thread::hardware_concurrency();
  threads = std::clamp<unsigned>(threads, 1, 64);

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < dataset.tasks.size(); i = next++) {
      try {
        const TaskRecord& task = dataset.tasks[i];
        runs[i] = run_task(pipeline, task, dataset.homes.at(task.home_id));
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);
  return runs;
}

}  // namespace dsia::bench
