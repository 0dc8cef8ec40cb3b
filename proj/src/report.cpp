#include "dsia/bench.hpp"

#include <cstdio>

namespace dsia::bench {

using nlohmann::json;

namespace {

json score_json(const CategoryScore& s) { return {{"em", s.em}, {"f1", s.f1}, {"n", s.n}}; }

std::string cell(double value) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%6.2f", value * 100.0);
  return buf;
}

std::string pad(std::string s, std::size_t width) {
  if (s.size() < width) s.append(width - s.size(), ' ');
  return s;
}

std::size_t label_width(const std::vector<std::pair<std::string, MetricsReport>>& rows) {
  std::size_t w = 6;
  for (const auto& [name, _] : rows) w = std::max(w, name.size());
  return w;
}

}  // namespace

json to_json(const MetricsReport& report) {
  json per_category = json::object();
  for (const auto& [c, s] : report.per_category) per_category[std::string(to_string(c))] = score_json(s);
  return {{"per_category", per_category},
          {"overall", score_json(report.overall)},
          {"rejection", {{"rate", report.rejection_rate}, {"n", report.rejection_n}}},
          {"interactive",
           {{"autonomous_success", report.autonomous_success},
            {"autonomous_n", report.autonomous_n},
            {"clarification_success", report.clarification_success},
            {"clarification_n", report.clarification_n}}},
          {"usage",
           {{"stage1_calls", report.usage.stage1_calls},
            {"stage1_tokens", report.usage.stage1_tokens},
            {"stage2_calls", report.usage.stage2_calls},
            {"stage2_tokens", report.usage.stage2_tokens}}},
          {"outcomes", report.outcomes}};
}

std::string render_table(const std::vector<std::pair<std::string, MetricsReport>>& rows) {
  static constexpr Category kColumns[] = {Category::VS, Category::IS, Category::VM, Category::IM,
                                          Category::MM};
  const std::size_t w = label_width(rows);
  std::string out = pad("Method", w);
  for (Category c : kColumns) {
    out += " | " + pad(std::string(to_string(c)) + " EM", 6) + " " + pad(std::string(to_string(c)) + " F1", 6);
  }
  out += " | " + pad("All EM", 6) + " " + pad("All F1", 6) + "\n";
  out += std::string(out.size() - 1, '-') + "\n";
  for (const auto& [name, report] : rows) {
    out += pad(name, w);
    for (Category c : kColumns) {
      auto it = report.per_category.find(c);
      if (it == report.per_category.end()) {
        out += " |    -      - ";
      } else {
        out += " | " + cell(it->second.em) + " " + cell(it->second.f1);
      }
    }
    out += " | " + cell(report.overall.em) + " " + cell(report.overall.f1) + "\n";
  }
  return out;
}

std::string render_usage_table(const std::vector<std::pair<std::string, MetricsReport>>& rows) {
  const std::size_t w = label_width(rows);
  char buf[160];
  std::snprintf(buf, sizeof buf, " | %12s %14s | %12s %14s | %14s\n", "S1 calls", "S1 tokens", "S2 calls",
                "S2 tokens", "total tokens");
  std::string out = pad("Method", w) + buf;
  out += std::string(out.size() - 1, '-') + "\n";
  for (const auto& [name, report] : rows) {
    const auto& u = report.usage;
    std::snprintf(buf, sizeof buf, " | %12lld %14lld | %12lld %14lld | %14lld\n",
                  static_cast<long long>(u.stage1_calls), static_cast<long long>(u.stage1_tokens),
                  static_cast<long long>(u.stage2_calls), static_cast<long long>(u.stage2_tokens),
                  static_cast<long long>(u.stage1_tokens + u.stage2_tokens));
    out += pad(name, w) + buf;
  }
  return out;
}

}  // namespace dsia::bench
