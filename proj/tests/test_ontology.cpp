#include <doctest.h>

#include <set>

#include "cmbert/error.hpp"
#include "cmbert/ontology.hpp"
#include "support/test_util.hpp"

using namespace cmbert;

namespace {

const char* kFixtureCsv =
    "system,version,code,description,chapter\n"
    "ICD-diagnosis,9,250.00,diabetes mellitus without complication,\n"
    "ICD-diagnosis,10,E11.9,\"type 2 diabetes mellitus, without complications\",endocrine\n"
    "ICD-diagnosis,9,V10.1,personal history of malignant neoplasm of trachea,\n"
    "CPT,2024,99213,office outpatient visit,\n"
    "medication,2024,81-mg-aspirin,aspirin 81 mg oral tablet,\n";

std::string fixture_path(const testutil::TempDir& dir) {
  const std::string path = dir.file("codes.csv");
  testutil::write_file(path, kFixtureCsv);
  return path;
}

}  // namespace

TEST_CASE("parse_code_table reads the fixture exactly") {
  testutil::TempDir dir("ont");
  const auto codes = parse_code_table(fixture_path(dir));
  REQUIRE(codes.size() == 5);
  CHECK(codes[0].system == CodeSystem::icd_diagnosis);
  CHECK(codes[0].version == "9");
  CHECK(codes[0].code == "250.00");
  CHECK(codes[0].description == "diabetes mellitus without complication");
  CHECK(codes[1].description == "type 2 diabetes mellitus, without complications");
  CHECK(codes[1].chapter == "endocrine");
  CHECK(codes[3].system == CodeSystem::cpt);
  CHECK(codes[4].system == CodeSystem::medication);
}

TEST_CASE("parse_code_table: empty data, duplicates, malformed rows") {
  testutil::TempDir dir("ont2");
  const std::string empty = dir.file("empty.csv");
  testutil::write_file(empty, "system,version,code,description\n");
  CHECK(parse_code_table(empty).empty());

  const std::string dup = dir.file("dup.csv");
  testutil::write_file(dup,
                       "system,version,code,description\n"
                       "CPT,2024,99213,visit a\n"
                       "CPT,2024,99213,visit b\n");
  CHECK_THROWS_WITH_AS(parse_code_table(dup),
                       doctest::Contains("duplicate key (CPT, 2024, 99213)"), ParseError);

  const std::string bad = dir.file("bad.csv");
  testutil::write_file(bad,
                       "system,version,code,description\n"
                       "CPT,2024,99213\n");
  try {
    parse_code_table(bad);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line_number == 2);
  }

  const std::string empty_code = dir.file("nocode.csv");
  testutil::write_file(empty_code,
                       "system,version,code,description\n"
                       "CPT,2024,,visit\n");
  CHECK_THROWS_AS(parse_code_table(empty_code), ParseError);
}

TEST_CASE("serialize: default template, colon survival, key injectivity") {
  const SerializationTemplate tmpl;
  const MedicalCode c{CodeSystem::icd_diagnosis, "9", "250.00",
                      "diabetes mellitus without complication", ""};
  CHECK(serialize(c, tmpl) ==
        "ICD-diagnosis version 9 code 250.00: diabetes mellitus without complication");

  MedicalCode with_colon = c;
  with_colon.description = "diabetes: without complication";
  CHECK(serialize(with_colon, tmpl).find("diabetes: without complication") != std::string::npos);

  // distinct keys always serialize to distinct strings
  std::set<std::string> seen;
  for (const char* code : {"1.0", "10.0", "100.0"}) {
    MedicalCode v = c;
    v.code = code;
    CHECK(seen.insert(serialize(v, tmpl)).second);
  }
}

TEST_CASE("template validation requires each placeholder exactly once") {
  SerializationTemplate missing;
  missing.pattern = "{system} {version} {code}";
  CHECK_THROWS_AS(missing.validate(), ConfigError);
  SerializationTemplate doubled;
  doubled.pattern = "{system} {system} {version} {code} {description}";
  CHECK_THROWS_AS(doubled.validate(), ConfigError);
}

TEST_CASE("deserialize_code_key: round trip, prose rejection, strictness") {
  const SerializationTemplate tmpl;
  testutil::TempDir dir("ont3");
  for (const auto& code : parse_code_table(fixture_path(dir))) {
    const auto key = deserialize_code_key(serialize(code, tmpl), tmpl);
    CHECK(key.system == code.system);
    CHECK(key.version == code.version);
    CHECK(key.code == code.code);
  }
  CHECK_THROWS_AS(deserialize_code_key("the patient presented with chest pain", tmpl),
                  ParseError);
  const std::string good = "CPT version 2024 code 99213: office visit";
  CHECK_THROWS_AS(deserialize_code_key(" " + good, tmpl), ParseError);
  CHECK_THROWS_AS(deserialize_code_key(good + " ", tmpl), ParseError);
}

TEST_CASE("icd-9 chapter bucketing follows the classical ranges") {
  auto icd9 = [](const char* code) {
    return chapter_of(MedicalCode{CodeSystem::icd_diagnosis, "9", code, "d", ""});
  };
  CHECK(icd9("250.00") == "endocrine, nutritional, metabolic, immunity");
  CHECK(icd9("001.1") == "infectious and parasitic diseases");
  CHECK(icd9("139.8") == "infectious and parasitic diseases");
  CHECK(icd9("140.0") == "neoplasms");
  CHECK(icd9("239.9") == "neoplasms");
  CHECK(icd9("285.9") == "blood and blood-forming organs");
  CHECK(icd9("296.3") == "mental disorders");
  CHECK(icd9("345.9") == "nervous system and sense organs");
  CHECK(icd9("401.9") == "circulatory system");
  CHECK(icd9("486.0") == "respiratory system");
  CHECK(icd9("530.81") == "digestive system");
  CHECK(icd9("599.0") == "genitourinary system");
  CHECK(icd9("650.0") == "pregnancy and childbirth complications");
  CHECK(icd9("682.9") == "skin and subcutaneous tissue");
  CHECK(icd9("715.9") == "musculoskeletal and connective tissue");
  CHECK(icd9("745.5") == "congenital anomalies");
  CHECK(icd9("765.1") == "perinatal conditions");
  CHECK(icd9("780.6") == "symptoms, signs, and ill-defined conditions");
  CHECK(icd9("999.9") == "injury and poisoning");
  CHECK(icd9("V10.1") == "supplementary classification (V)");
  CHECK(icd9("E880.9") == "external causes (E)");
  CHECK(icd9("X99") == "unknown");

  // non-diagnosis systems are a precondition error
  CHECK_THROWS_AS(chapter_of(MedicalCode{CodeSystem::cpt, "2024", "99213", "d", ""}),
                  InputError);
  // other versions pass the table's chapter column through
  CHECK(chapter_of(MedicalCode{CodeSystem::icd_diagnosis, "10", "E11.9", "d", "endocrine"}) ==
        "endocrine");
  CHECK(chapter_of(MedicalCode{CodeSystem::icd_diagnosis, "10", "E11.9", "d", ""}) == "unknown");
}

TEST_CASE("chapter_of is total over a generated icd-9 table") {
  const auto& labels = icd9_chapter_labels();
  CHECK(labels.size() == 20);  // 17 ranges + V + E + unknown
  const std::set<std::string> label_set(labels.begin(), labels.end());
  for (int prefix = 1; prefix <= 999; prefix += 7) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%03d.5", prefix);
    const auto chapter =
        chapter_of(MedicalCode{CodeSystem::icd_diagnosis, "9", buf, "d", ""});
    CHECK(label_set.count(chapter) == 1);
    CHECK(chapter != "unknown");
  }
}

TEST_CASE("ontology corpus: cardinality, fixed order, auditability") {
  testutil::TempDir dir("ont4");
  const auto codes = parse_code_table(fixture_path(dir));
  const SerializationTemplate tmpl;
  const auto docs = build_ontology_corpus(codes, tmpl, 42);
  CHECK(docs.size() == codes.size());
  CHECK(build_ontology_corpus(codes, tmpl, 42) == docs);   // fixed seed, fixed order
  CHECK(build_ontology_corpus(codes, tmpl, 43) != docs);   // order is seed-driven

  std::set<std::string> keys;
  for (const auto& line : docs) {
    const auto key = deserialize_code_key(line, tmpl);
    keys.insert(std::string(code_system_name(key.system)) + "|" + key.version + "|" + key.code);
  }
  CHECK(keys.size() == codes.size());
}
