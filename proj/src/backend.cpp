#include "dsia/backend.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <openssl/evp.h>

#include "dsia/errors.hpp"
#include "dsia/http_backend.hpp"
#include "dsia/oracle.hpp"

namespace dsia {

using nlohmann::json;

std::int64_t approximate_tokens(std::string_view text) {
  return static_cast<std::int64_t>((text.size() + 3) / 4);
}

TokenUsage approximate_usage(std::string_view prompt, std::string_view completion) {
  return {approximate_tokens(prompt), approximate_tokens(completion), false};
}

StageTotals& StageTotals::operator+=(const StageTotals& other) {
  calls += other.calls;
  prompt_tokens += other.prompt_tokens;
  completion_tokens += other.completion_tokens;
  return *this;
}

void UsageMeter::record(const TokenUsage& usage) {
  calls_.fetch_add(1, std::memory_order_relaxed);
  prompt_tokens_.fetch_add(usage.prompt_tokens, std::memory_order_relaxed);
  completion_tokens_.fetch_add(usage.completion_tokens, std::memory_order_relaxed);
}

StageTotals UsageMeter::totals() const {
  return {calls_.load(), prompt_tokens_.load(), completion_tokens_.load()};
}

void UsageMeter::reset() {
  calls_ = 0;
  prompt_tokens_ = 0;
  completion_tokens_ = 0;
}

namespace {

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t begin = 0;
  for (std::size_t i = 0; i <= s.size(); ++i) {
    if (i == s.size() || s[i] == sep) {
      out.push_back(s.substr(begin, i - begin));
      begin = i + 1;
    }
  }
  return out;
}

template <typename T>
T parse_number(std::string_view key, std::string_view value) {
  T out{};
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc{} || ptr != value.data() + value.size()) {
    throw std::invalid_argument("backend option " + std::string(key) + ": bad number '" +
                                std::string(value) + "'");
  }
  return out;
}

}  // namespace

BackendSpec parse_backend_spec(std::string_view text) {
  BackendSpec spec;
  const std::size_t colon = text.find(':');
  const std::string_view kind = text.substr(0, colon);
  const std::string_view rest = colon == std::string_view::npos ? "" : text.substr(colon + 1);

  if (kind == "rule_oracle") {
    spec.kind = BackendKind::rule_oracle;
  } else if (kind == "noisy_oracle") {
    spec.kind = BackendKind::noisy_oracle;
  } else if (kind == "scripted") {
    spec.kind = BackendKind::scripted;
    spec.transcript = std::string(rest);
  } else if (kind == "http") {
    spec.kind = BackendKind::http;
  } else {
    throw std::invalid_argument("unknown backend kind '" + std::string(kind) + "'");
  }

  if (spec.kind == BackendKind::noisy_oracle || spec.kind == BackendKind::http) {
    bool first = true;
    for (std::string_view field : split(rest, ',')) {
      if (field.empty()) continue;
      const std::size_t eq = field.find('=');
      if (spec.kind == BackendKind::http && first && eq == std::string_view::npos) {
        spec.endpoint = std::string(field);
        first = false;
        continue;
      }
      first = false;
      if (eq == std::string_view::npos) {
        throw std::invalid_argument("backend option '" + std::string(field) + "' needs key=value");
      }
      const std::string_view key = field.substr(0, eq);
      const std::string_view value = field.substr(eq + 1);
      if (key == "p") {
        spec.noise_rate = parse_number<double>(key, value);
      } else if (key == "seed") {
        spec.seed = parse_number<std::uint64_t>(key, value);
      } else if (key == "target") {
        if (value == "device") spec.target = NoiseTarget::device;
        else if (value == "room") spec.target = NoiseTarget::room;
        else if (value == "capability") spec.target = NoiseTarget::capability;
        else throw std::invalid_argument("unknown noise target '" + std::string(value) + "'");
      } else if (key == "ground") {
        spec.forced_grounding = value != "0";
      } else if (key == "url") {
        spec.endpoint = std::string(value);
      } else if (key == "model") {
        spec.model = std::string(value);
      } else if (key == "key_env") {
        spec.api_key_env = std::string(value);
      } else if (key == "max_inflight") {
        spec.max_inflight = parse_number<int>(key, value);
      } else if (key == "retries") {
        spec.retries = parse_number<int>(key, value);
      } else if (key == "timeout") {
        spec.timeout = std::chrono::seconds(parse_number<int>(key, value));
      } else {
        throw std::invalid_argument("unknown backend option '" + std::string(key) + "'");
      }
    }
  }
  validate(spec);
  return spec;
}

void validate(const BackendSpec& spec) {
  switch (spec.kind) {
    case BackendKind::noisy_oracle:
      if (!(spec.noise_rate >= 0.0 && spec.noise_rate <= 1.0)) {
        throw std::invalid_argument("noise rate must lie in [0, 1]");
      }
      break;
    case BackendKind::scripted:
      if (spec.transcript.empty()) throw std::invalid_argument("scripted backend needs a transcript path");
      break;
    case BackendKind::http:
      if (!parse_url(spec.endpoint)) {
        throw std::invalid_argument("http backend endpoint '" + spec.endpoint + "' is not a URL");
      }
      if (spec.max_inflight < 1 || spec.max_inflight > 1024) {
        throw std::invalid_argument("max_inflight must lie in [1, 1024]");
      }
      if (spec.retries < 0) throw std::invalid_argument("retries must be >= 0");
      break;
    case BackendKind::rule_oracle:
      break;
  }
}

std::string describe(const BackendSpec& spec) {
  switch (spec.kind) {
    case BackendKind::rule_oracle: return "rule_oracle";
    case BackendKind::noisy_oracle: {
      std::ostringstream ss;
      ss << "noisy_oracle:p=" << spec.noise_rate << ",seed=" << spec.seed;
      return ss.str();
    }
    case BackendKind::scripted: return "scripted:" + spec.transcript.string();
    case BackendKind::http: return "http:" + spec.endpoint + ",model=" + spec.model;
  }
  return "unknown";
}

std::unique_ptr<LanguageBackend> make_backend(const BackendSpec& spec) {
  validate(spec);
  switch (spec.kind) {
    case BackendKind::rule_oracle: return std::make_unique<oracle::RuleOracleBackend>();
    case BackendKind::noisy_oracle:
      return std::make_unique<oracle::NoisyOracleBackend>(oracle::NoiseConfig{
          spec.noise_rate, spec.seed, spec.target, spec.forced_grounding});
    case BackendKind::scripted: return std::make_unique<ScriptedBackend>(spec.transcript);
    case BackendKind::http: return std::make_unique<HttpBackend>(spec);
  }
  throw std::invalid_argument("unknown backend kind");
}

CompletionResult complete(std::string_view prompt, const BackendSpec& spec) {
  return make_backend(spec)->complete(prompt);
}

std::string prompt_digest(std::string_view prompt) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(prompt.data(), prompt.size(), md, &len, EVP_sha256(), nullptr) != 1) {
    throw Error("sha256 digest failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[md[i] >> 4]);
    out.push_back(kHex[md[i] & 0xf]);
  }
  return out;
}

ScriptedBackend::ScriptedBackend(const std::filesystem::path& transcript) {
  std::ifstream in(transcript);
  if (!in) throw BackendError("cannot open transcript " + transcript.string());
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json doc = json::parse(line, nullptr, false);
    if (doc.is_discarded() || !doc.is_object() || !doc.contains("prompt_digest") ||
        !doc.contains("response_text")) {
      throw BackendError(transcript.string() + ":" + std::to_string(lineno) +
                         ": malformed transcript record");
    }
    responses_[doc["prompt_digest"].get<std::string>()] = doc["response_text"].get<std::string>();
  }
}

ScriptedBackend::ScriptedBackend(std::unordered_map<std::string, std::string> by_digest)
    : responses_(std::move(by_digest)) {}

CompletionResult ScriptedBackend::complete(std::string_view prompt) {
  const std::string digest = prompt_digest(prompt);
  auto it = responses_.find(digest);
  if (it == responses_.end()) throw BackendError("no transcript entry for prompt " + digest);
  return {it->second, approximate_usage(prompt, it->second)};
}

RecordingBackend::RecordingBackend(LanguageBackend& inner, const std::filesystem::path& transcript)
    : inner_(inner), path_(transcript) {}

CompletionResult RecordingBackend::complete(std::string_view prompt) {
  CompletionResult result = inner_.complete(prompt);
  json record = {{"prompt_digest", prompt_digest(prompt)}, {"response_text", result.text}};
  std::lock_guard lock(mutex_);
  std::ofstream out(path_, std::ios::app);
  out << record.dump() << "\n";
  return result;
}

namespace {
constexpr std::string_view kIntentOpen = "<!--dsia:";
constexpr std::string_view kIntentClose = "-->";
}  // namespace

std::string embed_intent(std::string_view text, const json& intent) {
  std::string out(text);
  out += " ";
  out += kIntentOpen;
  out += intent.dump();
  out += kIntentClose;
  return out;
}

std::string strip_intent(std::string_view text) {
  std::string out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const std::size_t open = text.find(kIntentOpen, pos);
    if (open == std::string_view::npos) {
      out.append(text.substr(pos));
      break;
    }
    out.append(text.substr(pos, open - pos));
    const std::size_t close = text.find(kIntentClose, open);
    if (close == std::string_view::npos) break;
    pos = close + kIntentClose.size();
  }
  while (!out.empty() && out.back() == ' ') out.pop_back();
  return out;
}

}  // namespace dsia
