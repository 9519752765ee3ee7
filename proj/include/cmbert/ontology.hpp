#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace cmbert {

enum class CodeSystem { icd_diagnosis, icd_procedure, cpt, medication };

const char* code_system_name(CodeSystem s);
CodeSystem parse_code_system(const std::string& s);  // throws InputError

// One ontology row: a versioned code with its description and optional
// chapter label (used for coloring/evaluation when the version has no
// built-in bucketing).
struct MedicalCode {
  CodeSystem system = CodeSystem::icd_diagnosis;
  std::string version;
  std::string code;
  std::string description;
  std::string chapter;
};

// Pattern with the placeholders {system} {version} {code} {description},
// each exactly once.
struct SerializationTemplate {
  std::string pattern = "{system} version {version} code {code}: {description}";
  void validate() const;  // throws ConfigError
};

// Reads a delimiter-separated table with header
// "system,version,code,description[,chapter]". Rows with empty code or
// description, malformed rows and duplicate (system, version, code) keys
// fail with row numbers.
std::vector<MedicalCode> parse_code_table(const std::string& path);

// Deterministic placeholder substitution into one pretraining sentence.
std::string serialize(const MedicalCode& code, const SerializationTemplate& tmpl);

struct CodeKey {
  CodeSystem system;
  std::string version;
  std::string code;
  bool operator==(const CodeKey&) const = default;
};

// Strict inverse on the key fields: the input must match the template's
// literal segments exactly (no surrounding whitespace tolerated). Throws
// ParseError otherwise.
CodeKey deserialize_code_key(const std::string& serialized, const SerializationTemplate& tmpl);

// High-level category label. ICD-9 diagnosis codes bucket by the classical
// 17 chapter ranges plus the V/E supplementary classes; anything
// unbucketable is "unknown". Other ICD versions pass the table's chapter
// column through. Throws InputError for non-diagnosis systems.
std::string chapter_of(const MedicalCode& code);

// All 19 ICD-9 labels chapter_of can produce (plus "unknown").
const std::vector<std::string>& icd9_chapter_labels();

// One serialized sentence per code, shuffled under the seed.
std::vector<std::string> build_ontology_corpus(const std::vector<MedicalCode>& codes,
                                               const SerializationTemplate& tmpl,
                                               std::uint64_t seed);

}  // namespace cmbert
