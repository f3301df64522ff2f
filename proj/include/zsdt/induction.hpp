#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include "zsdt/error.hpp"
#include "zsdt/llm_client.hpp"
#include "zsdt/prompts.hpp"
#include "zsdt/schema.hpp"
#include "zsdt/text.hpp"
#include "zsdt/tree.hpp"
#include "zsdt/tree_text.hpp"

namespace zsdt {

inline const PromptTemplates& default_templates() {
  static const PromptTemplates templates;
  return templates;
}

/// Everything the induction prompt is built from.
struct PromptSpec {
  std::string target_description;
  std::vector<std::string> features;  // annotated names, e.g. "age (years)"
  std::optional<std::size_t> max_depth = 2;  // nullopt: the model picks the depth
  std::vector<std::string> examples{std::string(builtin_prompts::k_iris_example)};

  void check() const {
    if (features.empty()) throw ConfigError("prompt needs at least one feature");
    std::unordered_set<std::string> seen;
    for (const auto& f : features) {
      if (text::trim(f).empty()) throw ConfigError("empty feature name in prompt");
      if (!seen.insert(f).second) throw ConfigError("duplicate feature name in prompt: '" + f + "'");
    }
    if (max_depth && *max_depth == 0) throw ConfigError("max depth must be >= 1 when constrained");
    if (examples.empty()) throw ConfigError("prompt needs at least one in-context example");
  }

  static PromptSpec from_schema(const DatasetSchema& schema, std::string target_description,
                                std::optional<std::size_t> max_depth) {
    PromptSpec spec;
    spec.target_description = std::move(target_description);
    for (const auto& f : schema.features()) spec.features.push_back(f.prompt_name());
    spec.max_depth = max_depth;
    return spec;
  }
};

/// Deterministic prompt text for `spec`.
inline std::string build_prompt(const PromptSpec& spec, const PromptTemplates& templates = default_templates()) {
  spec.check();
  std::vector<std::string> blocks;
  for (const auto& e : spec.examples) blocks.push_back(chomp(e));
  std::map<std::string, std::string, std::less<>> values{
      {"target", spec.target_description},
      {"features", text::join(spec.features, ", ")},
      {"example", text::join(blocks, "\n\n")},
  };
  if (spec.max_depth) values["max_depth"] = std::to_string(*spec.max_depth);
  const auto& tmpl = spec.max_depth ? templates.induction : templates.induction_unconstrained;
  return substitute(tmpl, values);
}

inline std::string build_repair_prompt(std::string_view raw_text,
                                       const PromptTemplates& templates = default_templates()) {
  return substitute(templates.repair, {{"grammar", chomp(templates.tree_grammar)},
                                       {"example", chomp(templates.iris_example)},
                                       {"raw", chomp(std::string(raw_text))}});
}

struct AttemptFailure {
  std::size_t attempt = 0;  // 1-based call number
  std::string reason;
};

struct InducedTree {
  DecisionTree tree;
  std::string raw_text;
  std::size_t attempts_used = 0;
  std::string provider;
  std::vector<AttemptFailure> failures;
};

struct InductionOptions {
  std::size_t max_extra_attempts = 5;
  bool repair = true;
  std::function<void(const std::string&)> log;  // receives one line per rejected attempt
};

/// Asks the provider to restate `raw_text` in the canonical layout and parses
/// the reply. One provider call.
inline ParseResult repair_format(std::string_view raw_text, const DatasetSchema& schema, LlmClient& client,
                                 std::size_t attempt_index = 0, std::size_t sample_index = 0,
                                 const PromptTemplates& templates = default_templates()) {
  auto reply = client.complete(build_repair_prompt(raw_text, templates), attempt_index, sample_index);
  return parse_tree(extract_tree_text(reply), schema);
}

/// Prompts until a response both parses and validates, within
/// 1 + max_extra_attempts provider calls (repair calls included).
inline InducedTree induce_tree(const PromptSpec& spec, const DatasetSchema& schema, LlmClient& client,
                               const InductionOptions& options = {}, std::size_t sample_index = 0,
                               const PromptTemplates& templates = default_templates()) {
  const auto prompt = build_prompt(spec, templates);
  const std::size_t budget = options.max_extra_attempts + 1;
  std::vector<AttemptFailure> failures;
  std::size_t calls = 0;
  std::size_t attempt_index = 0;

  auto reject = [&](std::string reason) {
    if (options.log) options.log("attempt " + std::to_string(calls) + " rejected: " + reason);
    failures.push_back({calls, std::move(reason)});
  };
  auto accept = [&](const DecisionTree& tree) -> std::optional<std::string> {
    auto report = validate(tree, schema, spec.max_depth);
    if (report.valid()) return std::nullopt;
    return "invalid tree: " + report.summary();
  };

  while (calls < budget) {
    auto raw = client.complete(prompt, attempt_index, sample_index);
    ++calls;
    auto parsed = parse_tree(extract_tree_text(raw), schema);
    if (parsed) {
      auto why = accept(*parsed);
      if (!why) return {*parsed, raw, calls, client.config().model_name, failures};
      reject(*why);
    } else {
      reject("parse error: " + parsed.error().describe());
      if (options.repair && calls < budget) {
        auto repaired = repair_format(raw, schema, client, attempt_index, sample_index, templates);
        ++calls;
        if (repaired) {
          auto why = accept(*repaired);
          if (!why) return {*repaired, raw, calls, client.config().model_name, failures};
          reject("repaired " + *why);
        } else {
          reject("repair parse error: " + repaired.error().describe());
        }
      }
    }
    ++attempt_index;
  }
  throw ExhaustedAttempts(calls, failures.empty() ? "no attempts" : failures.back().reason);
}

}  // namespace zsdt
