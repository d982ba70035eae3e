#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "spanev/corpus.hpp"

namespace spanev {

struct ArgumentDef {
  enum class Kind { labeled, span_only };

  std::string name;
  Kind kind = Kind::span_only;
  std::optional<std::string> required_group;
  std::vector<std::string> subtypes;  // non-empty iff kind == labeled

  bool operator==(const ArgumentDef&) const = default;
};

struct Schema {
  std::map<std::string, std::vector<ArgumentDef>> event_types;

  const std::vector<ArgumentDef>* find_event_type(const std::string& name) const;
  const ArgumentDef* find_arg(const std::string& event_type, const std::string& arg_name) const;
  // group id -> member argument names, for one event type
  std::map<std::string, std::vector<std::string>> required_groups(
      const std::string& event_type) const;

  bool operator==(const Schema&) const = default;
};

// Parses and validates a schema config (UTF-8 JSON with top-level
// "event_types"; each argument entry has name, kind, optional subtypes,
// optional required_group).
Schema load_schema(const std::string& config_text);
Schema load_schema_file(const std::string& path);

// The shipped default scheme: COVID (Assertion, Test Status) and Symptom
// (Assertion, Change, Severity labeled; Anatomy, Characteristics, Duration,
// Frequency span-only). Label sets are reconstructions and config-overridable.
const std::string& default_schema_json();
Schema default_schema();

struct Violation {
  std::string code;
  std::string message;
  bool operator==(const Violation&) const = default;
};

std::vector<Violation> validate_event(const Event& event, const Schema& schema);

struct SymptomVocabulary {
  std::set<std::string> entries;  // lowercased trigger strings
  int min_count = 1;

  bool contains(const std::string& lowercased) const { return entries.count(lowercased) > 0; }
};

// Entry set = lowercased trigger strings of `event_type` events occurring at
// least min_count times across the corpus. Build from the training partition
// only.
SymptomVocabulary build_symptom_vocabulary(const Corpus& corpus, int min_count,
                                           const std::string& event_type = "Symptom");

// Removes events of `event_type` whose trigger string is absent from the
// vocabulary; all other events pass through untouched.
AnnotatedDocument filter_symptoms(const AnnotatedDocument& doc, const SymptomVocabulary& vocab,
                                  const std::string& event_type = "Symptom");

// Truncates every trigger span of `event_type` events to its first token.
AnnotatedDocument truncate_covid_triggers(const AnnotatedDocument& doc,
                                          const std::string& event_type = "COVID");

struct NormalizationMap {
  std::map<std::string, std::string> mapping;  // lowercased raw -> canonical

  // Two-column TSV (raw, canonical). Canonical names must be fixed points.
  static NormalizationMap from_tsv(const std::string& text);
  static NormalizationMap load_file(const std::string& path);
  static NormalizationMap defaults();
};

// m[lowercase(raw)] when mapped, otherwise lowercase(raw).
std::string normalize_symptom(const std::string& raw, const NormalizationMap& m);

}  // namespace spanev
