#include "dsia/bench.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "dsia/errors.hpp"

namespace dsia::bench {

using nlohmann::json;

std::string_view to_string(Category category) {
  switch (category) {
    case Category::VS: return "VS";
    case Category::IS: return "IS";
    case Category::VM: return "VM";
    case Category::IM: return "IM";
    case Category::MM: return "MM";
    case Category::INTERACTIVE: return "INTERACTIVE";
  }
  return "VS";
}

std::optional<Category> category_from_string(std::string_view text) {
  for (Category c : kAllCategories) {
    if (to_string(c) == text) return c;
  }
  return std::nullopt;
}

json to_json(const TaskRecord& task) {
  json doc = {{"task_id", task.task_id},
              {"home_id", task.home_id},
              {"instruction", task.instruction},
              {"gold", task.gold},
              {"category", to_string(task.category)}};
  if (task.interaction) {
    doc["interaction"] = {{"requires_clarification", task.interaction->requires_clarification},
                          {"simulated_answer", task.interaction->simulated_answer},
                          {"gold_after_answer", task.interaction->gold_after_answer}};
  }
  return doc;
}

namespace {

std::string string_field(const json& doc, const char* key, bool required = true) {
  auto it = doc.find(key);
  if (it == doc.end()) {
    if (required) throw CorpusError(std::string("task record missing '") + key + "'");
    return {};
  }
  if (!it->is_string()) throw CorpusError(std::string("task field '") + key + "' must be a string");
  return it->get<std::string>();
}

}  // namespace

TaskRecord task_from_json(const json& doc) {
  if (!doc.is_object()) throw CorpusError("task record must be an object");
  TaskRecord task;
  task.task_id = string_field(doc, "task_id");
  task.home_id = string_field(doc, "home_id", false);
  if (task.home_id.empty()) {
    if (auto it = doc.find("home"); it != doc.end() && it->is_object()) {
      task.home_id = it->value("home_id", task.task_id);
    } else {
      throw CorpusError("task " + task.task_id + " has no home_id");
    }
  }
  task.instruction = string_field(doc, "instruction");
  task.gold = string_field(doc, "gold");
  const std::string category = string_field(doc, "category");
  auto parsed = category_from_string(category);
  if (!parsed) throw CorpusError("task " + task.task_id + ": unknown category '" + category + "'");
  task.category = *parsed;
  try {
    parse_sequence(task.gold);
  } catch (const ParseError& e) {
    throw CorpusError("task " + task.task_id + ": bad gold: " + e.what());
  }
  if (auto it = doc.find("interaction"); it != doc.end() && !it->is_null()) {
    if (!it->is_object()) throw CorpusError("task " + task.task_id + ": interaction must be an object");
    Interaction interaction;
    interaction.requires_clarification = it->value("requires_clarification", false);
    interaction.simulated_answer = it->value("simulated_answer", std::string());
    interaction.gold_after_answer = it->value("gold_after_answer", std::string());
    if (interaction.requires_clarification) {
      try {
        parse_sequence(interaction.gold_after_answer);
      } catch (const ParseError& e) {
        throw CorpusError("task " + task.task_id + ": bad gold_after_answer: " + e.what());
      }
    }
    task.interaction = std::move(interaction);
  }
  return task;
}

std::string dataset_jsonl(const Dataset& dataset) {
  std::string out;
  for (const auto& task : dataset.tasks) {
    out += to_json(task).dump();
    out += "\n";
  }
  return out;
}

void save_dataset(const Dataset& dataset, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir / "homes");
  {
    std::ofstream out(dir / "dataset.jsonl", std::ios::binary);
    if (!out) throw CorpusError("cannot write " + (dir / "dataset.jsonl").string());
    out << dataset_jsonl(dataset);
  }
  for (const auto& [id, home] : dataset.homes) {
    std::ofstream out(dir / "homes" / (id + ".json"), std::ios::binary);
    if (!out) throw CorpusError("cannot write home " + id);
    out << to_snapshot_json(home).dump(2) << "\n";
  }
}

Dataset load_dataset(const std::filesystem::path& dataset_file) {
  std::ifstream in(dataset_file);
  if (!in) throw CorpusError("cannot open dataset " + dataset_file.string());
  const std::filesystem::path homes_dir = dataset_file.parent_path() / "homes";
  Dataset dataset;
  std::set<std::string> ids;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = dataset_file.string() + ":" + std::to_string(lineno) + ": ";
    json doc = json::parse(line, nullptr, false);
    if (doc.is_discarded()) throw CorpusError(where + "invalid JSON");
    TaskRecord task;
    try {
      task = task_from_json(doc);
    } catch (const CorpusError& e) {
      throw CorpusError(where + e.what());
    }
    if (!ids.insert(task.task_id).second) throw CorpusError(where + "duplicate task_id " + task.task_id);

    if (!dataset.homes.contains(task.home_id)) {
      try {
        if (auto it = doc.find("home"); it != doc.end() && it->is_object()) {
          dataset.homes.emplace(task.home_id, load_snapshot(*it));
        } else {
          dataset.homes.emplace(task.home_id,
                                load_snapshot_file(homes_dir / (task.home_id + ".json")));
        }
      } catch (const SnapshotError& e) {
        throw CorpusError(where + "home " + task.home_id + ": " + e.what());
      }
    }
    dataset.tasks.push_back(std::move(task));
  }
  return dataset;
}

}  // namespace dsia::bench
