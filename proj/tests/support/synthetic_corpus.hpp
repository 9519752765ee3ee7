#pragma once

// Synthetic clinical-style sentences for desk-scale training runs. Every
// content token is recoverable from its context by construction: conditions
// map bijectively to drugs, drugs to doses and frequencies, and the severity
// adjective is a deterministic function of (template, condition). A model
// that learns these associations can predict any masked position; sentences
// are distinct (template, condition) pairs, so a held-out split tests the
// same associations in unseen phrasings.

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "cmbert/rng.hpp"

namespace cmbert::testutil {

struct SynthCorpus {
  std::vector<std::string> sentences;  // distinct
  std::vector<std::string> lexicon;    // drugs + conditions (the priority terms)
};

namespace detail {

inline const std::vector<std::string>& synth_conditions() {
  static const std::vector<std::string> v = {
      "hypertension", "diabetes",       "pneumonia",    "sepsis",        "asthma",
      "copd",         "cellulitis",     "migraine",     "anemia",        "gout",
      "hypothyroidism", "depression",   "epilepsy",     "osteoporosis",  "bronchitis",
      "pancreatitis", "nephropathy",    "dermatitis",   "arthritis",     "glaucoma",
      "insomnia",     "tachycardia",    "neuropathy",   "esophagitis",   "hyperlipidemia",
      "gerd",         "cystitis",       "sinusitis",    "otitis",        "rhinitis",
      "psoriasis",    "eczema",         "fibromyalgia", "sciatica",      "vertigo",
      "syncope",      "hyponatremia",   "hypokalemia",  "obesity",       "cataract"};
  return v;
}

inline const std::vector<std::string>& synth_drugs() {
  static const std::vector<std::string> v = {
      "lisinopril",    "metformin",      "ceftriaxone",    "vancomycin",     "albuterol",
      "tiotropium",    "cephalexin",     "sumatriptan",    "ferrous",        "allopurinol",
      "levothyroxine", "sertraline",     "lamotrigine",    "alendronate",    "azithromycin",
      "pancrelipase",  "losartan",       "triamcinolone",  "naproxen",       "latanoprost",
      "trazodone",     "metoprolol",     "gabapentin",     "omeprazole",     "atorvastatin",
      "pantoprazole",  "nitrofurantoin", "amoxicillin",    "ofloxacin",      "fluticasone",
      "calcipotriene", "hydrocortisone", "duloxetine",     "cyclobenzaprine","meclizine",
      "midodrine",     "tolvaptan",      "spironolactone", "orlistat",       "acetazolamide"};
  return v;
}

inline const std::vector<std::string>& synth_doses() {
  static const std::vector<std::string> v = {
      "10",  "500", "1000", "1250", "90",  "18",  "250", "50",  "325", "300",
      "75",  "100", "200",  "70",   "600", "24",  "25",  "40",  "440", "5",
      "150", "12",  "800",  "20",   "80",  "400", "875", "775", "275", "110",
      "120", "130", "60",   "30",   "15",  "45",  "225", "625", "350", "375"};
  return v;
}

}  // namespace detail

inline SynthCorpus make_clinical_corpus(std::size_t n_sentences, std::uint64_t seed) {
  const auto& conditions = detail::synth_conditions();
  const auto& drugs = detail::synth_drugs();
  const auto& doses = detail::synth_doses();
  static const std::vector<std::string> freqs = {"daily", "nightly", "twice"};
  static const std::vector<std::string> adjectives = {"acute", "chronic", "mild", "severe"};
  static const std::vector<std::string> templates = {
      "patient with {adj} {cond} received {drug} {dose} mg {freq}",
      "started {drug} {dose} mg {freq} for {adj} {cond}",
      "continue {drug} {dose} mg {freq} given history of {adj} {cond}",
      "assessment notes {adj} {cond} plan includes {drug} {dose} mg {freq}",
      "discharged on {drug} {dose} mg {freq} after admission for {adj} {cond}",
      "clinic visit for {adj} {cond} refilled {drug} {dose} mg {freq}"};

  auto substitute = [](std::string text, const std::string& key, const std::string& value) {
    const auto pos = text.find(key);
    if (pos != std::string::npos) text.replace(pos, key.size(), value);
    return text;
  };

  std::vector<std::pair<std::size_t, std::size_t>> combos;  // (template, condition)
  for (std::size_t t = 0; t < templates.size(); ++t)
    for (std::size_t c = 0; c < conditions.size(); ++c) combos.emplace_back(t, c);

  Rng rng = Rng::stream(seed, "synthetic-corpus");
  for (std::size_t i = combos.size(); i > 1; --i)
    std::swap(combos[i - 1], combos[rng.uniform_below(i)]);
  n_sentences = std::min(n_sentences, combos.size());

  SynthCorpus corpus;
  corpus.sentences.reserve(n_sentences);
  for (std::size_t i = 0; i < n_sentences; ++i) {
    const auto [t, c] = combos[i];
    std::string s = templates[t];
    s = substitute(s, "{adj}", adjectives[(t * 7 + c * 3) % adjectives.size()]);
    s = substitute(s, "{cond}", conditions[c]);
    s = substitute(s, "{drug}", drugs[c]);
    s = substitute(s, "{dose}", doses[c]);
    s = substitute(s, "{freq}", freqs[c % freqs.size()]);
    corpus.sentences.push_back(std::move(s));
  }
  corpus.lexicon.insert(corpus.lexicon.end(), drugs.begin(), drugs.end());
  corpus.lexicon.insert(corpus.lexicon.end(), conditions.begin(), conditions.end());
  return corpus;
}

}  // namespace cmbert::testutil
