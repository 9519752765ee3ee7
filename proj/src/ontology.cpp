#include "cmbert/ontology.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>

#include "cmbert/error.hpp"
#include "cmbert/rng.hpp"

namespace cmbert {

const char* code_system_name(CodeSystem s) {
  switch (s) {
    case CodeSystem::icd_diagnosis: return "ICD-diagnosis";
    case CodeSystem::icd_procedure: return "ICD-procedure";
    case CodeSystem::cpt: return "CPT";
    case CodeSystem::medication: return "medication";
  }
  return "?";
}

CodeSystem parse_code_system(const std::string& s) {
  if (s == "ICD-diagnosis") return CodeSystem::icd_diagnosis;
  if (s == "ICD-procedure") return CodeSystem::icd_procedure;
  if (s == "CPT") return CodeSystem::cpt;
  if (s == "medication") return CodeSystem::medication;
  throw InputError("unknown code system '" + s + "'");
}

void SerializationTemplate::validate() const {
  for (const char* ph : {"{system}", "{version}", "{code}", "{description}"}) {
    const auto first = pattern.find(ph);
    if (first == std::string::npos)
      throw ConfigError("serialization template missing placeholder " + std::string(ph));
    if (pattern.find(ph, first + 1) != std::string::npos)
      throw ConfigError("serialization template repeats placeholder " + std::string(ph));
  }
}

namespace {

// Minimal CSV: comma-separated, double quotes wrap fields containing commas
// or quotes, "" escapes a quote. No multi-line fields.
std::vector<std::string> split_csv_row(const std::string& line, std::size_t line_no) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      if (!cur.empty()) throw ParseError("unexpected quote inside field", line_no);
      quoted = true;
    } else if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (quoted) throw ParseError("unterminated quoted field", line_no);
  fields.push_back(cur);
  return fields;
}

std::string strip_cr(std::string s) {
  if (!s.empty() && s.back() == '\r') s.pop_back();
  return s;
}

bool is_ws(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; }

struct TemplateParts {
  // Literal segments between placeholders, with the placeholder order.
  std::vector<std::string> literals;      // size = placeholders + 1
  std::vector<std::string> placeholders;  // "system" | "version" | "code" | "description"
};

TemplateParts split_template(const SerializationTemplate& tmpl) {
  tmpl.validate();
  TemplateParts parts;
  const std::string& p = tmpl.pattern;
  std::size_t pos = 0;
  std::string literal;
  while (pos < p.size()) {
    if (p[pos] == '{') {
      const auto close = p.find('}', pos);
      const std::string name = p.substr(pos + 1, close - pos - 1);
      if (name == "system" || name == "version" || name == "code" || name == "description") {
        parts.literals.push_back(literal);
        literal.clear();
        parts.placeholders.push_back(name);
        pos = close + 1;
        continue;
      }
    }
    literal += p[pos++];
  }
  parts.literals.push_back(literal);
  return parts;
}

}  // namespace

std::vector<MedicalCode> parse_code_table(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read code table " + path);
  std::string line;
  if (!std::getline(in, line)) throw InputError(path + ": missing header row");
  line = strip_cr(line);
  const auto header = split_csv_row(line, 1);
  const bool has_chapter = header.size() == 5 && header[4] == "chapter";
  const bool header_ok =
      (header.size() == 4 || has_chapter) && header[0] == "system" && header[1] == "version" &&
      header[2] == "code" && header[3] == "description";
  if (!header_ok)
    throw ParseError("expected header system,version,code,description[,chapter]", 1);

  std::vector<MedicalCode> codes;
  std::map<std::tuple<CodeSystem, std::string, std::string>, std::size_t> seen;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    line = strip_cr(line);
    if (line.empty()) continue;
    const auto fields = split_csv_row(line, line_no);
    if (fields.size() != header.size())
      throw ParseError("expected " + std::to_string(header.size()) + " fields, got " +
                           std::to_string(fields.size()),
                       line_no);
    MedicalCode code;
    try {
      code.system = parse_code_system(fields[0]);
    } catch (const InputError& e) {
      throw ParseError(e.what(), line_no);
    }
    code.version = fields[1];
    code.code = fields[2];
    code.description = fields[3];
    if (has_chapter) code.chapter = fields[4];
    if (code.code.empty()) throw ParseError("empty code", line_no);
    if (code.description.empty()) throw ParseError("empty description", line_no);
    auto key = std::make_tuple(code.system, code.version, code.code);
    auto [it, inserted] = seen.emplace(key, line_no);
    if (!inserted)
      throw ParseError("duplicate key (" + fields[0] + ", " + code.version + ", " + code.code +
                           ") first seen at line " + std::to_string(it->second),
                       line_no);
    codes.push_back(std::move(code));
  }
  return codes;
}

std::string serialize(const MedicalCode& code, const SerializationTemplate& tmpl) {
  const TemplateParts parts = split_template(tmpl);
  std::string out;
  for (std::size_t i = 0; i < parts.placeholders.size(); ++i) {
    out += parts.literals[i];
    const std::string& ph = parts.placeholders[i];
    if (ph == "system") out += code_system_name(code.system);
    else if (ph == "version") out += code.version;
    else if (ph == "code") out += code.code;
    else out += code.description;
  }
  out += parts.literals.back();
  return out;
}

CodeKey deserialize_code_key(const std::string& serialized, const SerializationTemplate& tmpl) {
  const TemplateParts parts = split_template(tmpl);
  CodeKey key{};
  std::size_t pos = 0;
  auto fail = [&](const std::string& why) {
    throw ParseError("cannot parse serialized code: " + why, 1);
  };
  auto padded = [](const std::string& v) {
    return !v.empty() && (is_ws(v.front()) || is_ws(v.back()));
  };

  for (std::size_t i = 0; i < parts.placeholders.size(); ++i) {
    const std::string& lit = parts.literals[i];
    if (serialized.compare(pos, lit.size(), lit) != 0) fail("literal segment mismatch");
    pos += lit.size();

    // Field runs up to the next literal segment; an empty trailing literal
    // lets the last field (the description, in the default template) take
    // the rest of the line.
    const std::string& next_lit = parts.literals[i + 1];
    std::size_t end;
    if (next_lit.empty() && i + 1 == parts.placeholders.size()) {
      end = serialized.size();
    } else {
      if (next_lit.empty()) fail("template has adjacent placeholders");
      end = serialized.find(next_lit, pos);
      if (end == std::string::npos) fail("missing literal '" + next_lit + "'");
    }
    const std::string value = serialized.substr(pos, end - pos);
    if (value.empty()) fail("empty field");
    if (padded(value)) fail("whitespace-padded field");
    const std::string& ph = parts.placeholders[i];
    if (ph == "system") {
      try {
        key.system = parse_code_system(value);
      } catch (const InputError&) {
        fail("bad system '" + value + "'");
      }
    } else if (ph == "version") {
      key.version = value;
    } else if (ph == "code") {
      key.code = value;
    }
    pos = end;
  }
  const std::string& tail = parts.literals.back();
  if (serialized.compare(pos, std::string::npos, tail) != 0) fail("trailing literal mismatch");
  return key;
}

namespace {

struct ChapterRange {
  int lo, hi;
  const char* label;
};

// Classical ICD-9 chapter layout.
constexpr ChapterRange kIcd9Chapters[] = {
    {1, 139, "infectious and parasitic diseases"},
    {140, 239, "neoplasms"},
    {240, 279, "endocrine, nutritional, metabolic, immunity"},
    {280, 289, "blood and blood-forming organs"},
    {290, 319, "mental disorders"},
    {320, 389, "nervous system and sense organs"},
    {390, 459, "circulatory system"},
    {460, 519, "respiratory system"},
    {520, 579, "digestive system"},
    {580, 629, "genitourinary system"},
    {630, 679, "pregnancy and childbirth complications"},
    {680, 709, "skin and subcutaneous tissue"},
    {710, 739, "musculoskeletal and connective tissue"},
    {740, 759, "congenital anomalies"},
    {760, 779, "perinatal conditions"},
    {780, 799, "symptoms, signs, and ill-defined conditions"},
    {800, 999, "injury and poisoning"},
};

constexpr const char* kSupplementaryV = "supplementary classification (V)";
constexpr const char* kExternalE = "external causes (E)";
constexpr const char* kUnknown = "unknown";

}  // namespace

const std::vector<std::string>& icd9_chapter_labels() {
  static const std::vector<std::string> labels = [] {
    std::vector<std::string> out;
    for (const auto& r : kIcd9Chapters) out.push_back(r.label);
    out.push_back(kSupplementaryV);
    out.push_back(kExternalE);
    out.push_back(kUnknown);
    return out;
  }();
  return labels;
}

std::string chapter_of(const MedicalCode& code) {
  if (code.system != CodeSystem::icd_diagnosis)
    throw InputError("chapter_of: only ICD-diagnosis codes have chapters");
  if (code.version != "9") return code.chapter.empty() ? kUnknown : code.chapter;

  const std::string& c = code.code;
  if (c.empty()) return kUnknown;
  if (c[0] == 'V' || c[0] == 'v') return kSupplementaryV;
  if (c[0] == 'E' || c[0] == 'e') return kExternalE;

  // Numeric prefix before any dot.
  std::size_t i = 0;
  int prefix = 0;
  bool any_digit = false;
  while (i < c.size() && c[i] >= '0' && c[i] <= '9') {
    prefix = prefix * 10 + (c[i] - '0');
    any_digit = true;
    ++i;
  }
  if (!any_digit || (i < c.size() && c[i] != '.')) return kUnknown;
  for (const auto& r : kIcd9Chapters) {
    if (prefix >= r.lo && prefix <= r.hi) return r.label;
  }
  return kUnknown;
}

std::vector<std::string> build_ontology_corpus(const std::vector<MedicalCode>& codes,
                                               const SerializationTemplate& tmpl,
                                               std::uint64_t seed) {
  std::vector<std::string> docs;
  docs.reserve(codes.size());
  for (const auto& c : codes) docs.push_back(serialize(c, tmpl));
  Rng rng = Rng::stream(seed, "ontology-shuffle");
  for (std::size_t i = docs.size(); i > 1; --i) {
    const std::size_t j = rng.uniform_below(i);
    std::swap(docs[i - 1], docs[j]);
  }
  return docs;
}

}  // namespace cmbert
