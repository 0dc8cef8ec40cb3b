#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "dsia/action.hpp"
#include "dsia/backend.hpp"
#include "dsia/home.hpp"
#include "dsia/pipeline.hpp"

namespace dsia::bench {

enum class Category { VS, IS, VM, IM, MM, INTERACTIVE };

inline constexpr Category kAllCategories[] = {Category::VS, Category::IS, Category::VM,
                                              Category::IM, Category::MM, Category::INTERACTIVE};

std::string_view to_string(Category category);
std::optional<Category> category_from_string(std::string_view text);
inline bool is_invalid(Category c) { return c == Category::IS || c == Category::IM; }

struct Interaction {
  bool requires_clarification = false;
  std::string simulated_answer;
  std::string gold_after_answer;
};

struct TaskRecord {
  std::string task_id;
  std::string home_id;
  std::string instruction;
  std::string gold;
  Category category = Category::VS;
  std::optional<Interaction> interaction;
};

nlohmann::json to_json(const TaskRecord& task);
TaskRecord task_from_json(const nlohmann::json& doc);  // throws CorpusError

struct Dataset {
  std::vector<TaskRecord> tasks;
  std::map<std::string, HomeState> homes;
};

// `<dir>/dataset.jsonl` plus `<dir>/homes/<home_id>.json`.
void save_dataset(const Dataset& dataset, const std::filesystem::path& dir);
// Reads a JSONL dataset; homes come from the `homes` directory beside it.
Dataset load_dataset(const std::filesystem::path& dataset_file);
// JSONL text of the tasks only (one record per line).
std::string dataset_jsonl(const Dataset& dataset);

// --- metrics ---------------------------------------------------------------

struct MatchOptions {
  bool order_sensitive = false;
  bool per_field_f1 = false;
};

// 1 iff the normalized Call multisets and error-token counts agree.
int exact_match(const ActionSequence& pred, const ActionSequence& gold, MatchOptions options = {});
// Multiset F1 over whole atoms (or over pooled room / device / action fields
// with per_field_f1). Both empty scores 1.
double f1_score(const ActionSequence& pred, const ActionSequence& gold, MatchOptions options = {});

// What happened to one task, including the simulated user's side.
struct TaskRun {
  PipelineResult result;
  int clarification_turns = 0;
  bool answer_consumed = false;
};

struct CategoryScore {
  double em = 0.0;
  double f1 = 0.0;
  std::int64_t n = 0;
};

struct MetricsReport {
  std::map<Category, CategoryScore> per_category;
  CategoryScore overall;
  double rejection_rate = 0.0;  // mean EM over IS and IM
  std::int64_t rejection_n = 0;
  double autonomous_success = 0.0;
  std::int64_t autonomous_n = 0;
  double clarification_success = 0.0;
  std::int64_t clarification_n = 0;
  StageUsage usage;
  std::map<std::string, std::int64_t> outcomes;
};

// Throws CorpusError on a length mismatch.
MetricsReport score_corpus(const std::vector<TaskRecord>& tasks, const std::vector<TaskRun>& runs,
                           MatchOptions options = {});

nlohmann::json to_json(const MetricsReport& report);
// Rows are methods; columns VS/IS/VM/IM/MM/Overall x EM/F1.
std::string render_table(const std::vector<std::pair<std::string, MetricsReport>>& rows);
// Per-stage calls and tokens per method.
std::string render_usage_table(const std::vector<std::pair<std::string, MetricsReport>>& rows);

// --- running ---------------------------------------------------------------

struct RunOptions {
  bool stage1_enabled = true;
  unsigned threads = 0;  // 0: hardware concurrency
};

// Runs every task in its own session; the simulated user answers the first
// clarification with the record's simulated_answer and refuses any further
// one. Results are index-aligned with the tasks.
std::vector<TaskRun> run_corpus(const Dataset& dataset, LanguageBackend& stage1,
                                LanguageBackend& stage2, RunOptions options = {});

// --- synthetic corpus ------------------------------------------------------

struct CorpusParams {
  int n_homes = 10;
  int rooms_min = 3;
  int rooms_max = 6;
  int devices_min = 2;
  int devices_max = 4;
  int n_tasks = 100;
  std::map<Category, double> mix = {{Category::VS, 0.25}, {Category::IS, 0.25}, {Category::VM, 0.15},
                                    {Category::IM, 0.136}, {Category::MM, 0.214}};
  std::uint64_t seed = 42;
};

// Largest-remainder split of n_tasks by the mix. Throws CorpusError unless
// the mix sums to 1.
std::map<Category, int> category_counts(const CorpusParams& params);

// Deterministic under the seed. Throws CorpusError on infeasible params.
Dataset generate_corpus(const CorpusParams& params);

// Parses "VS=0.3,IS=0.2,..." into a mix.
std::map<Category, double> parse_mix(std::string_view text);

}  // namespace dsia::bench
