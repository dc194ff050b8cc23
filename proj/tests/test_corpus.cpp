#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "probekit/corpus.hpp"
#include "probekit/csv.hpp"
#include "probekit/error.hpp"

using namespace probekit;
namespace fs = std::filesystem;

namespace {

const fs::path kData = PROBEKIT_TEST_DATA_DIR;

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string to_jsonl(const Dataset& d) {
  std::ostringstream out;
  save_pairs(d, out, PairFormat::Jsonl);
  return out.str();
}

MinimalPair form_pair(std::string id) {
  return {std::move(id), "agr", "The dog barks.", "The dog bark.", "en", Duality::Form, "agreement", Level::Morphology};
}

}  // namespace

TEST_SUITE("corpus") {

TEST_CASE("jsonl and csv round trip") {
  Dataset d{form_pair("p1"), form_pair("p2")};
  d[1].sentence_good = "She said, \"yes\"\nthen left.";
  d[1].sentence_bad = "She say, \"yes\"\nthen left.";

  for (auto fmt : {PairFormat::Jsonl, PairFormat::Csv}) {
    std::ostringstream out;
    save_pairs(d, out, fmt);
    CHECK(parse_pairs(out.str(), fmt) == d);
  }
}

TEST_CASE("parse errors carry the line number") {
  const std::string good = to_jsonl({form_pair("p1")});
  std::string text = good + "{\"pair_id\":\"p2\"}\n";
  try {
    parse_pairs(text, PairFormat::Jsonl, "x.jsonl");
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("x.jsonl:2") != std::string::npos);
    CHECK(std::string(e.what()).find("task_id") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_pairs(good + good, PairFormat::Jsonl), DataError);
  CHECK_THROWS_AS(parse_pairs("{not json\n", PairFormat::Jsonl), DataError);

  std::string bad_enum = good;
  bad_enum.replace(bad_enum.find("\"form\""), 6, "\"shape\"");
  CHECK_THROWS_AS(parse_pairs(bad_enum, PairFormat::Jsonl), DataError);
}

TEST_CASE("blank lines are skipped") {
  const std::string one = to_jsonl({form_pair("p1")});
  CHECK(parse_pairs("\n" + one + "\n  \n", PairFormat::Jsonl).size() == 1);
}

TEST_CASE("pair invariants") {
  CHECK(check_pair(form_pair("p")).empty());
  auto p = form_pair("p");
  p.sentence_bad = p.sentence_good;
  CHECK(check_pair(p).size() == 1);
  p = form_pair("p");
  p.duality = Duality::Meaning;
  CHECK(!check_pair(p).empty());
  p.level = Level::Conceptual;
  CHECK(check_pair(p).empty());
  p.duality = Duality::Form;
  CHECK(!check_pair(p).empty());
  p = form_pair("");
  CHECK(!check_pair(p).empty());
}

TEST_CASE("validation against task specs") {
  Dataset d{form_pair("p1"), form_pair("p2"), form_pair("p3")};
  d[2].task_id = "stray";
  d[1].language = "de";
  std::vector<TaskSpec> specs{{"agr", "Agreement", Duality::Form, Level::Morphology, "en", 3}};
  const auto report = validate_dataset(d, specs);
  CHECK(!report.valid());
  CHECK(report.total_pairs == 3);
  CHECK(report.task_counts.at("agr") == 2);
  int counts = 0, unknown = 0, meta = 0;
  for (const auto& i : report.issues) {
    counts += i.kind == ValidationIssue::Kind::CountMismatch;
    unknown += i.kind == ValidationIssue::Kind::UnknownTask;
    meta += i.kind == ValidationIssue::Kind::MetadataMismatch;
  }
  CHECK(counts == 1);
  CHECK(unknown == 1);
  CHECK(meta == 1);

  CHECK(validate_dataset({form_pair("p1")}, {}).valid());
}

TEST_CASE("task ids keep first-appearance order") {
  Dataset d{form_pair("a"), form_pair("b"), form_pair("c")};
  d[0].task_id = "zeta";
  d[2].task_id = "alpha";
  CHECK(task_ids(d) == std::vector<std::string>{"zeta", "agr", "alpha"});
}

TEST_CASE("template instantiation") {
  CHECK(instantiate_template("<C> can absorb shocks", "helmet") == "Helmet can absorb shocks");
  CHECK(instantiate_template("<C> mag Äpfel", "ähre") == "Ähre mag Äpfel");
  CHECK(instantiate_template("<C>能吸收冲击", "头盔") == "头盔能吸收冲击");
  CHECK(instantiate_template("a <C> b", "x") == "A x b");
  CHECK_THROWS_AS(instantiate_template("no slot", "x"), DataError);
  CHECK_THROWS_AS(instantiate_template("<C> and <C>", "x"), DataError);
}

TEST_CASE("concept builder matches the golden file") {
  const auto table = load_table(kData / "comps_mini/table.json");
  CHECK(check_table(table).empty());
  CHECK(to_jsonl(build_comps(table, "en")) == slurp(kData / "comps_mini/expected_en.jsonl"));

  const auto built = build_comps_annotated(table, "en");
  REQUIRE(built.annotations.size() == 5);
  CHECK(built.annotations[0] == ConceptAnnotation{"comps_en_1", "helmet", "cap", "<C> can absorb shocks"});
}

TEST_CASE("overlay corrections apply per language") {
  const auto table = load_table(kData / "comps_mini/table.json");
  const auto overlay = load_overlay(kData / "comps_mini/overlay.json");
  const auto fixed = apply_overlay(table, overlay);

  CHECK(to_jsonl(build_comps(fixed, "de")) == slurp(kData / "comps_mini/expected_de_corrected.jsonl"));
  // English output is untouched by German corrections.
  CHECK(to_jsonl(build_comps(fixed, "en")) == to_jsonl(build_comps(table, "en")));
  CHECK(apply_overlay(fixed, overlay) == fixed);
  CHECK(parse_table(dump_table(fixed)) == fixed);

  const auto zh = build_comps(fixed, "zh");
  CHECK(zh[0].sentence_good == "头盔能吸收冲击");
  CHECK(zh[0].task_id == "comps_zh_taxonomy");
}

TEST_CASE("overlay errors") {
  const auto table = load_table(kData / "comps_mini/table.json");
  auto make = [](std::string kind, std::string id, std::string text) {
    CorrectionOverlay o;
    o.entries.push_back({kind == "concept" ? EntityKind::Concept : EntityKind::Property, id, "de", text, ""});
    return o;
  };
  CHECK_THROWS_AS(apply_overlay(table, make("concept", "bicycle", "Fahrrad")), DataError);
  CHECK_THROWS_AS(apply_overlay(table, make("concept", "cup", "")), DataError);
  CHECK_THROWS_AS(apply_overlay(table, make("property", "hold_tea", "kein Platzhalter")), DataError);
  auto dup = make("concept", "cup", "Tasse");
  dup.entries.push_back(dup.entries[0]);
  CHECK_THROWS_AS(apply_overlay(table, dup), DataError);

  const auto csv = parse_overlay(
      "entity_kind,entity_id,language,corrected_text,note\nconcept,cup,de,Tasse,\"mug, not cup\"\n", PairFormat::Csv);
  REQUIRE(csv.entries.size() == 1);
  CHECK(csv.entries[0].note == "mug, not cup");
}

TEST_CASE("table problems are reported") {
  auto table = load_table(kData / "comps_mini/table.json");
  table.relations[0].concept_neg = table.relations[0].concept_pos;
  CHECK(!check_table(table).empty());
  CHECK_THROWS_AS(build_comps(table, "en"), DataError);

  table = load_table(kData / "comps_mini/table.json");
  table.relations[1].property_id = "missing";
  CHECK(!check_table(table).empty());

  table = load_table(kData / "comps_mini/table.json");
  CHECK_THROWS_AS(build_comps(table, "fr"), DataError);
}

TEST_CASE("annotations round trip") {
  const auto table = load_table(kData / "comps_mini/table.json");
  const auto built = build_comps_annotated(table, "de");
  const auto path = fs::temp_directory_path() / "probekit_annotations_test.jsonl";
  save_annotations(built.annotations, path);
  CHECK(load_annotations(path) == built.annotations);
  fs::remove(path);
}

TEST_CASE("csv reader") {
  const auto recs = csv::parse("\xEF\xBB\xBF" "a,b\r\n\"x,1\",\"he said \"\"hi\"\"\"\n\"multi\nline\",z\n");
  REQUIRE(recs.size() == 3);
  CHECK(recs[0].fields == std::vector<std::string>{"a", "b"});
  CHECK(recs[1].fields[0] == "x,1");
  CHECK(recs[1].fields[1] == "he said \"hi\"");
  CHECK(recs[2].fields[0] == "multi\nline");
  CHECK(recs[2].line == 3);
  CHECK_THROWS_AS(csv::parse("\"open,1\n"), DataError);
  CHECK_THROWS_AS(csv::parse("\"a\"b,1\n"), DataError);

  const auto t = csv::Table::parse("x,y\n1,2\n", "t.csv");
  CHECK(t.column("y") == 1);
  CHECK(!t.has_column("z"));
  CHECK_THROWS_AS(t.column("z"), DataError);
  CHECK(csv::escape("plain") == "plain");
  CHECK(csv::escape("a,b") == "\"a,b\"");
}

}  // TEST_SUITE
