#include <filesystem>
#include <string>
#include <vector>

#include "doctest.h"
#include "probekit/error.hpp"
#include "probekit/psycholing.hpp"

using namespace probekit;
namespace fs = std::filesystem;

namespace {

MinimalPair form_pair(std::string id, std::string task = "agr") {
  return {std::move(id), std::move(task), "The keys are here", "The keys is here", "en",
          Duality::Form, "agreement", Level::Morphology};
}

MinimalPair meaning_pair() {
  return {"comps_en_1", "comps_en_taxonomy", "Helmet can absorb shocks", "Cap can absorb shocks", "en",
          Duality::Meaning, "taxonomy", Level::Conceptual};
}

const ConceptAnnotation kHelmet{"comps_en_1", "helmet", "cap", "<C> can absorb shocks"};

TokenScoreRecord rec(const std::string& id, Role role, std::vector<double> lps) {
  TokenScoreRecord r{{id, role}, {}};
  for (double lp : lps) r.tokens.push_back({"t", lp});
  return r;
}

}  // namespace

TEST_SUITE("psycholing") {

TEST_CASE("direct scoring sums token log-probs") {
  const auto p = form_pair("p1");
  const auto d = direct_score(p, rec("p1", Role::Good, {-1.0, -2.0, -0.5}), rec("p1", Role::Bad, {-1.0, -4.0}));
  CHECK(d.logprob_good == -3.5);
  CHECK(d.logprob_bad == -5.0);
  CHECK(d.correct);
  CHECK(!d.tie);

  const auto t = direct_score(p, rec("p1", Role::Good, {-2.0}), rec("p1", Role::Bad, {-1.5, -0.5}));
  CHECK(t.tie);
  CHECK(!t.correct);

  CHECK_THROWS_AS(direct_score(p, rec("p2", Role::Good, {-1}), rec("p1", Role::Bad, {-1})), DataError);
  CHECK_THROWS_AS(direct_score(p, rec("p1", Role::Bad, {-1}), rec("p1", Role::Bad, {-1})), DataError);
  CHECK_THROWS_AS(direct_score(p, rec("p1", Role::Good, {}), rec("p1", Role::Bad, {-1})), DataError);
}

TEST_CASE("direct scores over a dataset and accuracy") {
  const Dataset d{form_pair("a"), form_pair("b"), form_pair("c"), form_pair("x", "other")};
  TokenScoreFile f;
  f.records = {rec("a", Role::Good, {-1}), rec("a", Role::Bad, {-2}), rec("b", Role::Good, {-3}),
               rec("b", Role::Bad, {-2}), rec("c", Role::Good, {-2}), rec("c", Role::Bad, {-2}),
               rec("x", Role::Good, {-1}), rec("x", Role::Bad, {-9})};
  const auto results = direct_scores(d, f);
  REQUIRE(results.size() == 4);
  const auto acc = paradigm_accuracy(results, "agr");
  CHECK(acc.n == 3);
  CHECK(acc.accuracy == doctest::Approx(1.0 / 3.0));
  CHECK(acc.tie_rate == doctest::Approx(1.0 / 3.0));
  CHECK(paradigm_accuracy(results, "other").accuracy == 1.0);
  CHECK_THROWS_AS(paradigm_accuracy(results, "none"), DataError);

  f.records.pop_back();
  CHECK_THROWS_AS(direct_scores(d, f), DataError);
}

TEST_CASE("form prompt text") {
  const auto gf = build_meta_prompt_form(form_pair("p1"), OptionOrder::GoodFirst);
  CHECK(gf.prompt_text ==
        "Here are two English sentences: 1) The keys are here. 2) The keys is here. Which sentence is a better "
        "English sentence? Respond with either 1 or 2 as your answer. Answer:");
  CHECK(gf.prompt_id == "p1:gf");
  CHECK(gf.correct_option_label == "1");
  const auto bf = build_meta_prompt_form(form_pair("p1"), OptionOrder::BadFirst);
  CHECK(bf.prompt_id == "p1:bf");
  CHECK(bf.correct_option_label == "2");
  CHECK(bf.prompt_text.find("1) The keys is here. 2) The keys are here.") != std::string::npos);

  auto de = form_pair("p2");
  de.language = "de";
  de.sentence_good = "Die Schlüssel sind hier.";
  de.sentence_bad = "Die Schlüssel ist hier.";
  const auto g = build_meta_prompt_form(de, OptionOrder::GoodFirst);
  CHECK(g.prompt_text.find("two German sentences: 1) Die Schlüssel sind hier. 2)") != std::string::npos);

  CHECK_THROWS_AS(build_meta_prompt_form(meaning_pair(), OptionOrder::GoodFirst), UsageError);
}

TEST_CASE("meaning prompt text") {
  const auto gf = build_meta_prompt_meaning(meaning_pair(), kHelmet, OptionOrder::GoodFirst);
  CHECK(gf.prompt_text ==
        "What word is most likely to come next in the following sentence (helmet, or cap)? What can absorb shocks?");
  CHECK(gf.option_labels == std::array<std::string, 2>{"helmet", "cap"});
  CHECK(gf.correct_option_label == "helmet");
  const auto bf = build_meta_prompt_meaning(meaning_pair(), kHelmet, OptionOrder::BadFirst);
  CHECK(bf.option_labels == std::array<std::string, 2>{"cap", "helmet"});
  CHECK(bf.correct_option_label == "helmet");

  auto zh = meaning_pair();
  zh.language = "zh";
  const ConceptAnnotation zh_ann{"comps_en_1", "头盔", "帽子", "<C>能吸收冲击。"};
  const auto z = build_meta_prompt_meaning(zh, zh_ann, OptionOrder::GoodFirst);
  CHECK(z.prompt_text.find("什么能吸收冲击？") != std::string::npos);

  CHECK_THROWS_AS(build_meta_prompt_meaning(form_pair("p"), kHelmet, OptionOrder::GoodFirst), UsageError);
  auto other = kHelmet;
  other.pair_id = "comps_en_2";
  CHECK_THROWS_AS(build_meta_prompt_meaning(meaning_pair(), other, OptionOrder::GoodFirst), DataError);
  other = kHelmet;
  other.concept_bad = "helmet";
  CHECK_THROWS_AS(build_meta_prompt_meaning(meaning_pair(), other, OptionOrder::GoodFirst), DataError);
}

TEST_CASE("prompt batches and order balancing") {
  const Dataset d{form_pair("p1"), meaning_pair()};
  CHECK(build_meta_prompts(d, std::vector<ConceptAnnotation>{kHelmet}, true).size() == 4);
  const auto one = build_meta_prompts(d, std::vector<ConceptAnnotation>{kHelmet}, false);
  REQUIRE(one.size() == 2);
  CHECK(one[1].order == OptionOrder::GoodFirst);
  CHECK_THROWS_AS(build_meta_prompts(d, {}, true), DataError);
}

TEST_CASE("meta scoring and per-order accuracy") {
  const auto gf = build_meta_prompt_meaning(meaning_pair(), kHelmet, OptionOrder::GoodFirst);
  const auto bf = build_meta_prompt_meaning(meaning_pair(), kHelmet, OptionOrder::BadFirst);
  CHECK(meta_score(gf, -0.5, -1.0).correct);
  CHECK(!meta_score(bf, -0.5, -1.0).correct);  // "cap" scored higher
  CHECK(meta_score(gf, -1.0, -1.0).tie);

  const std::vector<MetaPrompt> prompts{gf, bf};
  ContinuationScoreFile f{"m", "raw", {{gf.prompt_id, "helmet", -0.2}, {gf.prompt_id, "cap", -2.0},
                                       {bf.prompt_id, "cap", -0.2}, {bf.prompt_id, "helmet", -2.0}}};
  const auto results = meta_scores(prompts, f);
  const auto acc = meta_accuracy(results, "comps_en_taxonomy");
  CHECK(acc.pooled.accuracy == 0.5);
  CHECK(acc.per_order.at(OptionOrder::GoodFirst).accuracy == 1.0);
  CHECK(acc.per_order.at(OptionOrder::BadFirst).accuracy == 0.0);

  auto dup = f;
  dup.records.push_back(dup.records.front());
  CHECK_THROWS_AS(meta_scores(prompts, dup), DataError);
  auto missing = f;
  missing.records.pop_back();
  CHECK_THROWS_AS(meta_scores(prompts, missing), DataError);
}

TEST_CASE("prompt files and wrappers") {
  const Dataset d{form_pair("p1"), meaning_pair()};
  const auto prompts = build_meta_prompts(d, std::vector<ConceptAnnotation>{kHelmet}, true);
  const auto path = fs::temp_directory_path() / "probekit_prompts_test.jsonl";
  save_prompts(prompts, "<|user|>\n{prompt}\n<|assistant|>\n", path);
  CHECK(load_prompts(path) == prompts);
  fs::remove(path);

  CHECK(apply_wrapper("[INST] {prompt} [/INST]", "hi") == "[INST] hi [/INST]");
  CHECK(apply_wrapper("{prompt}", "x") == "x");
  CHECK_THROWS_AS(apply_wrapper("no slot", "x"), UsageError);
  CHECK(parse_option_order("bad_first") == OptionOrder::BadFirst);
  CHECK_THROWS_AS(parse_option_order("sideways"), DataError);
}

}  // TEST_SUITE
