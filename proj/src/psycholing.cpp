#include "probekit/psycholing.hpp"

#include <fstream>
#include <set>
#include <unordered_map>

#include "json.hpp"
#include "probekit/error.hpp"

namespace probekit {

namespace {

std::string substitute(std::string text, std::string_view key, std::string_view value) {
  const std::string needle = "{" + std::string(key) + "}";
  std::size_t pos = 0;
  while ((pos = text.find(needle, pos)) != std::string::npos) {
    text.replace(pos, needle.size(), value);
    pos += value.size();
  }
  return text;
}

const std::string& lookup(const std::map<std::string, std::string>& m, const std::string& lang, const char* what) {
  if (auto it = m.find(lang); it != m.end()) return it->second;
  if (auto it = m.find("en"); it != m.end()) return it->second;
  throw UsageError(std::string("no ") + what + " for language '" + lang + "'");
}

bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

std::string with_terminal_punctuation(std::string s) {
  for (std::string_view p : {".", "!", "?", "。", "！", "？"})
    if (ends_with(s, p)) return s;
  return s + ".";
}

std::string strip_terminal_punctuation(std::string s) {
  for (std::string_view p : {".", "!", "?", "。", "！", "？"})
    if (ends_with(s, p)) return s.substr(0, s.size() - p.size());
  return s;
}

std::string prompt_id_for(const MinimalPair& pair, OptionOrder order) {
  return pair.pair_id + (order == OptionOrder::GoodFirst ? ":gf" : ":bf");
}

AccuracySummary summarize(std::size_t n, std::size_t correct, std::size_t ties) {
  AccuracySummary s;
  s.n = n;
  s.accuracy = static_cast<double>(correct) / static_cast<double>(n);
  s.tie_rate = static_cast<double>(ties) / static_cast<double>(n);
  return s;
}

template <typename Result>
AccuracySummary accuracy_of(std::span<const Result> results, std::string_view task_id) {
  std::size_t n = 0, correct = 0, ties = 0;
  for (const auto& r : results) {
    if (r.task_id != task_id) continue;
    ++n;
    correct += r.correct;
    ties += r.tie;
  }
  if (n == 0) throw DataError("no results for task '" + std::string(task_id) + "'");
  return summarize(n, correct, ties);
}

}  // namespace

DirectResult direct_score(const MinimalPair& pair, const TokenScoreRecord& good, const TokenScoreRecord& bad) {
  const auto check = [&](const TokenScoreRecord& r, Role role) {
    if (r.sentence.pair_id != pair.pair_id || r.sentence.role != role)
      throw DataError("token scores " + r.sentence.str() + " do not belong to " + pair.pair_id + "/" +
                      std::string(to_string(role)));
    if (r.tokens.empty()) throw DataError("empty token list for " + r.sentence.str());
  };
  check(good, Role::Good);
  check(bad, Role::Bad);
  DirectResult d;
  d.pair_id = pair.pair_id;
  d.task_id = pair.task_id;
  d.logprob_good = good.total();
  d.logprob_bad = bad.total();
  d.correct = d.logprob_good > d.logprob_bad;
  d.tie = d.logprob_good == d.logprob_bad;
  return d;
}

std::vector<DirectResult> direct_scores(const Dataset& dataset, const TokenScoreFile& scores) {
  std::map<SentenceId, const TokenScoreRecord*> index;
  for (const auto& r : scores.records) index[r.sentence] = &r;
  const auto find = [&](const std::string& pair_id, Role role) -> const TokenScoreRecord& {
    auto it = index.find(SentenceId{pair_id, role});
    if (it == index.end()) throw DataError("no token scores for " + SentenceId{pair_id, role}.str());
    return *it->second;
  };
  std::vector<DirectResult> out;
  out.reserve(dataset.size());
  for (const auto& p : dataset) out.push_back(direct_score(p, find(p.pair_id, Role::Good), find(p.pair_id, Role::Bad)));
  return out;
}

std::string_view to_string(OptionOrder o) { return o == OptionOrder::GoodFirst ? "good_first" : "bad_first"; }

OptionOrder parse_option_order(std::string_view s) {
  if (s == "good_first") return OptionOrder::GoodFirst;
  if (s == "bad_first") return OptionOrder::BadFirst;
  throw DataError("unknown option order '" + std::string(s) + "'");
}

PromptTemplates PromptTemplates::defaults() {
  PromptTemplates t;
  t.form["en"] =
      "Here are two {language} sentences: 1) {s1} 2) {s2} Which sentence is a better {language} sentence? "
      "Respond with either 1 or 2 as your answer. Answer:";
  t.meaning["en"] = "What word is most likely to come next in the following sentence ({a}, or {b})? {question}";
  t.wh_word = {{"en", "what"}, {"de", "was"}, {"zh", "什么"}};
  t.question_mark = {{"en", "?"}, {"de", "?"}, {"zh", "？"}};
  t.language_name = {{"en", "English"}, {"de", "German"}, {"zh", "Chinese"}};
  return t;
}

MetaPrompt build_meta_prompt_form(const MinimalPair& pair, OptionOrder order, const PromptTemplates& templates) {
  if (pair.duality != Duality::Form) throw UsageError("form prompt requested for meaning pair " + pair.pair_id);
  const bool good_first = order == OptionOrder::GoodFirst;
  const auto s1 = with_terminal_punctuation(good_first ? pair.sentence_good : pair.sentence_bad);
  const auto s2 = with_terminal_punctuation(good_first ? pair.sentence_bad : pair.sentence_good);
  auto it = templates.language_name.find(pair.language);
  const std::string language = it != templates.language_name.end() ? it->second : pair.language;

  MetaPrompt m;
  m.prompt_id = prompt_id_for(pair, order);
  m.pair_id = pair.pair_id;
  m.task_id = pair.task_id;
  m.prompt_text = substitute(substitute(substitute(lookup(templates.form, pair.language, "form template"), "language",
                                                   language),
                                        "s1", s1),
                             "s2", s2);
  m.option_labels = {"1", "2"};
  m.correct_option_label = good_first ? "1" : "2";
  m.order = order;
  return m;
}

MetaPrompt build_meta_prompt_meaning(const MinimalPair& pair, const ConceptAnnotation& concepts, OptionOrder order,
                                     const PromptTemplates& templates) {
  if (pair.duality != Duality::Meaning) throw UsageError("meaning prompt requested for form pair " + pair.pair_id);
  if (concepts.pair_id != pair.pair_id) throw DataError("concept annotation does not belong to " + pair.pair_id);
  if (concepts.concept_good.empty() || concepts.concept_bad.empty() || concepts.property_template.empty())
    throw DataError("missing concept metadata for " + pair.pair_id);
  if (concepts.concept_good == concepts.concept_bad)
    throw DataError("identical concept options for " + pair.pair_id);

  const auto question =
      strip_terminal_punctuation(instantiate_template(concepts.property_template,
                                                      lookup(templates.wh_word, pair.language, "wh-word"))) +
      lookup(templates.question_mark, pair.language, "question mark");
  const bool good_first = order == OptionOrder::GoodFirst;
  const auto& a = good_first ? concepts.concept_good : concepts.concept_bad;
  const auto& b = good_first ? concepts.concept_bad : concepts.concept_good;

  MetaPrompt m;
  m.prompt_id = prompt_id_for(pair, order);
  m.pair_id = pair.pair_id;
  m.task_id = pair.task_id;
  m.prompt_text = substitute(
      substitute(substitute(lookup(templates.meaning, pair.language, "meaning template"), "a", a), "b", b),
      "question", question);
  m.option_labels = {a, b};
  m.correct_option_label = concepts.concept_good;
  m.order = order;
  return m;
}

std::vector<MetaPrompt> build_meta_prompts(const Dataset& dataset, std::span<const ConceptAnnotation> annotations,
                                           bool order_balancing, const PromptTemplates& templates) {
  std::unordered_map<std::string, const ConceptAnnotation*> by_pair;
  for (const auto& a : annotations) by_pair[a.pair_id] = &a;
  std::vector<OptionOrder> orders{OptionOrder::GoodFirst};
  if (order_balancing) orders.push_back(OptionOrder::BadFirst);

  std::vector<MetaPrompt> out;
  for (const auto& p : dataset) {
    for (auto order : orders) {
      if (p.duality == Duality::Form) {
        out.push_back(build_meta_prompt_form(p, order, templates));
      } else {
        auto it = by_pair.find(p.pair_id);
        if (it == by_pair.end()) throw DataError("missing concept metadata for " + p.pair_id);
        out.push_back(build_meta_prompt_meaning(p, *it->second, order, templates));
      }
    }
  }
  return out;
}

MetaResult meta_score(const MetaPrompt& prompt, double logprob_option0, double logprob_option1) {
  MetaResult r;
  r.prompt_id = prompt.prompt_id;
  r.pair_id = prompt.pair_id;
  r.task_id = prompt.task_id;
  r.order = prompt.order;
  r.option_logprobs = {logprob_option0, logprob_option1};
  const int right = prompt.option_labels[0] == prompt.correct_option_label ? 0 : 1;
  r.correct = r.option_logprobs[right] > r.option_logprobs[1 - right];
  r.tie = logprob_option0 == logprob_option1;
  return r;
}

std::vector<MetaResult> meta_scores(std::span<const MetaPrompt> prompts, const ContinuationScoreFile& scores) {
  std::map<std::pair<std::string, std::string>, double> index;
  for (const auto& c : scores.records)
    if (!index.emplace(std::pair{c.prompt_id, c.option_label}, c.logprob).second)
      throw DataError("duplicate continuation score for " + c.prompt_id + " option '" + c.option_label + "'");
  std::vector<MetaResult> out;
  out.reserve(prompts.size());
  for (const auto& p : prompts) {
    double lp[2];
    for (int i = 0; i < 2; ++i) {
      auto it = index.find({p.prompt_id, p.option_labels[i]});
      if (it == index.end())
        throw DataError("no continuation score for " + p.prompt_id + " option '" + p.option_labels[i] + "'");
      lp[i] = it->second;
    }
    out.push_back(meta_score(p, lp[0], lp[1]));
  }
  return out;
}

AccuracySummary paradigm_accuracy(std::span<const DirectResult> results, std::string_view task_id) {
  return accuracy_of(results, task_id);
}

AccuracySummary paradigm_accuracy(std::span<const MetaResult> results, std::string_view task_id) {
  return accuracy_of(results, task_id);
}

MetaAccuracy meta_accuracy(std::span<const MetaResult> results, std::string_view task_id) {
  MetaAccuracy m;
  m.pooled = accuracy_of(results, task_id);
  for (auto order : {OptionOrder::GoodFirst, OptionOrder::BadFirst}) {
    std::size_t n = 0, correct = 0, ties = 0;
    for (const auto& r : results) {
      if (r.task_id != task_id || r.order != order) continue;
      ++n;
      correct += r.correct;
      ties += r.tie;
    }
    if (n > 0) m.per_order[order] = summarize(n, correct, ties);
  }
  return m;
}

std::string apply_wrapper(std::string_view wrapper, std::string_view prompt) {
  if (wrapper.find("{prompt}") == std::string_view::npos) throw UsageError("prompt wrapper must contain {prompt}");
  return substitute(std::string(wrapper), "prompt", prompt);
}

void save_prompts(std::span<const MetaPrompt> prompts, const std::string& wrapper, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  nlohmann::ordered_json head;
  head["format"] = "probekit.prompts";
  head["version"] = 1;
  head["wrapper"] = wrapper;
  out << head.dump() << '\n';
  for (const auto& p : prompts) {
    nlohmann::ordered_json j;
    j["prompt_id"] = p.prompt_id;
    j["pair_id"] = p.pair_id;
    j["task_id"] = p.task_id;
    j["order"] = to_string(p.order);
    j["prompt_text"] = p.prompt_text;
    j["model_input"] = apply_wrapper(wrapper, p.prompt_text);
    j["options"] = {p.option_labels[0], p.option_labels[1]};
    j["correct_option"] = p.correct_option_label;
    out << j.dump() << '\n';
  }
}

std::vector<MetaPrompt> load_prompts(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<MetaPrompt> out;
  std::set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    const auto where = path.string() + ":" + std::to_string(line_no);
    try {
      const auto j = nlohmann::json::parse(line);
      if (!header_seen) {
        if (j.value("format", std::string()) != "probekit.prompts")
          throw DataError("expected a probekit.prompts header line");
        header_seen = true;
        continue;
      }
      MetaPrompt m;
      m.prompt_id = j.at("prompt_id").get<std::string>();
      m.pair_id = j.at("pair_id").get<std::string>();
      m.task_id = j.at("task_id").get<std::string>();
      m.order = parse_option_order(j.at("order").get<std::string>());
      m.prompt_text = j.at("prompt_text").get<std::string>();
      const auto& opts = j.at("options");
      if (!opts.is_array() || opts.size() != 2) throw DataError("a prompt needs exactly two options");
      m.option_labels = {opts[0].get<std::string>(), opts[1].get<std::string>()};
      m.correct_option_label = j.at("correct_option").get<std::string>();
      if (m.correct_option_label != m.option_labels[0] && m.correct_option_label != m.option_labels[1])
        throw DataError("correct_option is not one of the options");
      if (!seen.insert(m.prompt_id).second) throw DataError("duplicate prompt_id " + m.prompt_id);
      out.push_back(std::move(m));
    } catch (const nlohmann::json::exception& e) {
      throw DataError(where + ": " + e.what());
    } catch (const DataError& e) {
      throw DataError(where + ": " + e.what());
    }
  }
  return out;
}

}  // namespace probekit
