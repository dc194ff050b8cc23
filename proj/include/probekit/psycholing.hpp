#pragma once

// Output-probability paradigms: direct sentence-probability comparison and
// metalinguistic prompting (a judgment question whose answer options are
// scored as continuations).

#include <array>
#include <cstddef>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "probekit/activation_store.hpp"
#include "probekit/corpus.hpp"

namespace probekit {

struct DirectResult {
  std::string pair_id;
  std::string task_id;
  double logprob_good = 0.0;
  double logprob_bad = 0.0;
  bool correct = false;  // logprob_good > logprob_bad strictly
  bool tie = false;
};

/// Sums the per-token log-probs of each sentence (no length normalization).
/// Throws DataError when a record is empty or belongs to another pair.
DirectResult direct_score(const MinimalPair& pair, const TokenScoreRecord& good, const TokenScoreRecord& bad);

/// Scores every pair of the dataset. Throws DataError naming the first
/// sentence without a record.
std::vector<DirectResult> direct_scores(const Dataset& dataset, const TokenScoreFile& scores);

enum class OptionOrder { GoodFirst, BadFirst };

std::string_view to_string(OptionOrder o);
OptionOrder parse_option_order(std::string_view s);

struct MetaPrompt {
  std::string prompt_id;  // pair_id + ":gf" or ":bf"
  std::string pair_id;
  std::string task_id;
  std::string prompt_text;
  std::array<std::string, 2> option_labels;
  std::string correct_option_label;
  OptionOrder order = OptionOrder::GoodFirst;

  bool operator==(const MetaPrompt&) const = default;
};

/// Placeholders: {language}, {s1}, {s2} in form templates; {a}, {b},
/// {question} in the meaning template.
struct PromptTemplates {
  std::map<std::string, std::string> form;       // language code -> template
  std::map<std::string, std::string> meaning;    // language code -> template
  std::map<std::string, std::string> wh_word;    // language code -> word replacing the concept slot
  std::map<std::string, std::string> question_mark;
  std::map<std::string, std::string> language_name;

  // Missing languages fall back to the "en" entry.

  static PromptTemplates defaults();
};

/// Options are "1" and "2"; the correct label follows the good sentence.
/// Throws UsageError for a meaning pair.
MetaPrompt build_meta_prompt_form(const MinimalPair& pair, OptionOrder order,
                                  const PromptTemplates& templates = PromptTemplates::defaults());

/// Options are the two concept words, listed in `order`; the question is the
/// property template with the slot replaced by the language's wh-word.
/// Throws UsageError for a form pair, DataError for missing concept metadata.
MetaPrompt build_meta_prompt_meaning(const MinimalPair& pair, const ConceptAnnotation& concepts, OptionOrder order,
                                     const PromptTemplates& templates = PromptTemplates::defaults());

/// Both orders per pair when balanced, GoodFirst only otherwise. Meaning pairs
/// need an annotation; pairs without one throw DataError.
std::vector<MetaPrompt> build_meta_prompts(const Dataset& dataset, std::span<const ConceptAnnotation> annotations,
                                           bool order_balancing,
                                           const PromptTemplates& templates = PromptTemplates::defaults());

struct MetaResult {
  std::string prompt_id;
  std::string pair_id;
  std::string task_id;
  OptionOrder order = OptionOrder::GoodFirst;
  std::array<double, 2> option_logprobs{};  // same order as MetaPrompt::option_labels
  bool correct = false;
  bool tie = false;
};

MetaResult meta_score(const MetaPrompt& prompt, double logprob_option0, double logprob_option1);

/// Looks up both option scores of every prompt. Throws DataError on a
/// missing or duplicated (prompt_id, option_label) score.
std::vector<MetaResult> meta_scores(std::span<const MetaPrompt> prompts, const ContinuationScoreFile& scores);

struct AccuracySummary {
  double accuracy = 0.0;  // ties count as incorrect
  double tie_rate = 0.0;
  std::size_t n = 0;
};

/// Throws DataError when the task has no results.
AccuracySummary paradigm_accuracy(std::span<const DirectResult> results, std::string_view task_id);
AccuracySummary paradigm_accuracy(std::span<const MetaResult> results, std::string_view task_id);

struct MetaAccuracy {
  AccuracySummary pooled;
  std::map<OptionOrder, AccuracySummary> per_order;
};

MetaAccuracy meta_accuracy(std::span<const MetaResult> results, std::string_view task_id);

// Prompt batch JSONL: a header line {"format":"probekit.prompts","version":1,
// "wrapper":...}, then one object per prompt. Each record carries the raw
// prompt_text and model_input, the text with the per-model wrapper applied
// ("{prompt}" marks where the prompt goes).
void save_prompts(std::span<const MetaPrompt> prompts, const std::string& wrapper, const std::filesystem::path& path);
std::vector<MetaPrompt> load_prompts(const std::filesystem::path& path);

/// Substitutes {prompt}. Throws UsageError when the wrapper lacks it.
std::string apply_wrapper(std::string_view wrapper, std::string_view prompt);

}  // namespace probekit
