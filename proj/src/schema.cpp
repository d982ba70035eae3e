#include "spanev/schema.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace spanev {

namespace {
using nlohmann::json;

bool has_whitespace(const std::string& s) {
  return s.find_first_of(" \t\r\n") != std::string::npos;
}
}  // namespace

const std::vector<ArgumentDef>* Schema::find_event_type(const std::string& name) const {
  auto it = event_types.find(name);
  return it == event_types.end() ? nullptr : &it->second;
}

const ArgumentDef* Schema::find_arg(const std::string& event_type,
                                    const std::string& arg_name) const {
  const auto* defs = find_event_type(event_type);
  if (!defs) return nullptr;
  for (const auto& def : *defs)
    if (def.name == arg_name) return &def;
  return nullptr;
}

std::map<std::string, std::vector<std::string>> Schema::required_groups(
    const std::string& event_type) const {
  std::map<std::string, std::vector<std::string>> groups;
  const auto* defs = find_event_type(event_type);
  if (!defs) return groups;
  for (const auto& def : *defs)
    if (def.required_group) groups[*def.required_group].push_back(def.name);
  return groups;
}

Schema load_schema(const std::string& config_text) {
  json root;
  try {
    root = json::parse(config_text);
  } catch (const json::exception& e) {
    throw InputError(std::string("schema config is not valid JSON: ") + e.what());
  }
  if (!root.is_object() || !root.contains("event_types") || !root["event_types"].is_object())
    throw InputError("schema config needs a top-level \"event_types\" object");

  Schema schema;
  for (const auto& [event_type, args] : root["event_types"].items()) {
    if (event_type.empty() || event_type.find(':') != std::string::npos ||
        event_type.find('\t') != std::string::npos)
      throw InputError("invalid event type name '" + event_type + "'");
    if (!args.is_array())
      throw InputError("event type '" + event_type + "' must map to an array of arguments");
    std::vector<ArgumentDef> defs;
    std::set<std::string> seen;
    for (const auto& entry : args) {
      ArgumentDef def;
      def.name = entry.value("name", "");
      if (def.name.empty() || def.name.find(':') != std::string::npos ||
          def.name.find('\t') != std::string::npos)
        throw InputError("invalid argument name in event type '" + event_type + "'");
      if (!seen.insert(def.name).second)
        throw InputError("duplicate argument name '" + def.name + "' in event type '" +
                         event_type + "'");
      std::string kind = entry.value("kind", "");
      if (kind == "labeled") {
        def.kind = ArgumentDef::Kind::labeled;
      } else if (kind == "span_only") {
        def.kind = ArgumentDef::Kind::span_only;
      } else {
        throw InputError("argument '" + def.name + "': unknown kind '" + kind + "'");
      }
      if (entry.contains("subtypes")) {
        for (const auto& s : entry["subtypes"]) {
          std::string subtype = s.get<std::string>();
          if (subtype.empty() || has_whitespace(subtype))
            throw InputError("argument '" + def.name + "': subtype names must be non-empty and " +
                             "whitespace-free");
          def.subtypes.push_back(subtype);
        }
      }
      if (def.kind == ArgumentDef::Kind::labeled && def.subtypes.empty())
        throw InputError("labeled argument '" + def.name + "' has an empty subtype list");
      if (def.kind == ArgumentDef::Kind::span_only && !def.subtypes.empty())
        throw InputError("span_only argument '" + def.name + "' must not declare subtypes");
      if (entry.contains("required_group"))
        def.required_group = entry["required_group"].get<std::string>();
      defs.push_back(std::move(def));
    }
    schema.event_types[event_type] = std::move(defs);
  }
  if (schema.event_types.empty()) throw InputError("schema declares no event types");
  return schema;
}

Schema load_schema_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read schema file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return load_schema(ss.str());
}

const std::string& default_schema_json() {
  static const std::string text = R"({
  "event_types": {
    "COVID": [
      {"name": "Assertion", "kind": "labeled", "required_group": "status",
       "subtypes": ["present", "absent", "possible", "hypothetical", "not_patient"]},
      {"name": "Test Status", "kind": "labeled", "required_group": "status",
       "subtypes": ["positive", "negative", "pending", "not_ordered", "conditional"]}
    ],
    "Symptom": [
      {"name": "Assertion", "kind": "labeled", "required_group": "assertion",
       "subtypes": ["present", "absent", "possible", "conditional", "hypothetical", "not_patient"]},
      {"name": "Change", "kind": "labeled",
       "subtypes": ["improving", "worsening", "no_change", "resolved"]},
      {"name": "Severity", "kind": "labeled",
       "subtypes": ["mild", "moderate", "severe"]},
      {"name": "Anatomy", "kind": "span_only"},
      {"name": "Characteristics", "kind": "span_only"},
      {"name": "Duration", "kind": "span_only"},
      {"name": "Frequency", "kind": "span_only"}
    ]
  }
}
)";
  return text;
}

Schema default_schema() { return load_schema(default_schema_json()); }

std::vector<Violation> validate_event(const Event& event, const Schema& schema) {
  std::vector<Violation> out;
  const auto* defs = schema.find_event_type(event.trigger.event_type);
  if (!defs) {
    out.push_back({"unknown_event_type",
                   "event type '" + event.trigger.event_type + "' is not in the schema"});
    return out;
  }

  auto find_def = [&](const std::string& name) -> const ArgumentDef* {
    for (const auto& def : *defs)
      if (def.name == name) return &def;
    return nullptr;
  };

  std::set<std::string> present_args;
  for (const auto& arg : event.labeled_args) {
    present_args.insert(arg.arg_type);
    const ArgumentDef* def = find_def(arg.arg_type);
    if (!def) {
      out.push_back({"unknown_argument", "argument '" + arg.arg_type + "' is not declared for '" +
                                             event.trigger.event_type + "'"});
      continue;
    }
    if (def->kind != ArgumentDef::Kind::labeled) {
      out.push_back({"wrong_argument_kind",
                     "argument '" + arg.arg_type + "' is span_only but carries a subtype"});
      continue;
    }
    if (std::find(def->subtypes.begin(), def->subtypes.end(), arg.subtype) ==
        def->subtypes.end())
      out.push_back({"unknown_subtype", "subtype '" + arg.subtype + "' is not in the '" +
                                            arg.arg_type + "' label set"});
  }
  for (const auto& arg : event.span_only_args) {
    present_args.insert(arg.arg_type);
    const ArgumentDef* def = find_def(arg.arg_type);
    if (!def) {
      out.push_back({"unknown_argument", "argument '" + arg.arg_type + "' is not declared for '" +
                                             event.trigger.event_type + "'"});
      continue;
    }
    if (def->kind != ArgumentDef::Kind::span_only)
      out.push_back({"wrong_argument_kind",
                     "argument '" + arg.arg_type + "' is labeled but carries no subtype"});
  }

  for (const auto& [group, members] : schema.required_groups(event.trigger.event_type)) {
    bool satisfied = false;
    for (const auto& member : members)
      if (present_args.count(member)) satisfied = true;
    if (!satisfied) {
      std::string names;
      for (size_t i = 0; i < members.size(); ++i) names += (i ? " or " : "") + members[i];
      out.push_back({"missing_required_group",
                     "event requires at least one of: " + names});
    }
  }
  return out;
}

SymptomVocabulary build_symptom_vocabulary(const Corpus& corpus, int min_count,
                                           const std::string& event_type) {
  std::map<std::string, int> counts;
  for (const auto& doc : corpus)
    for (const auto& ev : doc.events)
      if (ev.trigger.event_type == event_type)
        counts[span_text_lower(doc.document, ev.trigger.span)]++;
  SymptomVocabulary vocab;
  vocab.min_count = min_count;
  for (const auto& [text, count] : counts)
    if (count >= min_count) vocab.entries.insert(text);
  return vocab;
}

AnnotatedDocument filter_symptoms(const AnnotatedDocument& doc, const SymptomVocabulary& vocab,
                                  const std::string& event_type) {
  AnnotatedDocument out;
  out.document = doc.document;
  for (const auto& ev : doc.events) {
    if (ev.trigger.event_type == event_type &&
        !vocab.contains(span_text_lower(doc.document, ev.trigger.span)))
      continue;
    out.events.push_back(ev);
  }
  return out;
}

AnnotatedDocument truncate_covid_triggers(const AnnotatedDocument& doc,
                                          const std::string& event_type) {
  AnnotatedDocument out = doc;
  for (auto& ev : out.events)
    if (ev.trigger.event_type == event_type)
      ev.trigger.span.end = ev.trigger.span.start + 1;
  return out;
}

NormalizationMap NormalizationMap::from_tsv(const std::string& text) {
  NormalizationMap m;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    size_t tab = line.find('\t');
    if (tab == std::string::npos)
      throw InputError("normalization map line " + std::to_string(line_no) +
                       ": expected two tab-separated columns");
    std::string raw = to_lower(line.substr(0, tab));
    std::string canonical = to_lower(line.substr(tab + 1));
    if (raw.empty() || canonical.empty())
      throw InputError("normalization map line " + std::to_string(line_no) + ": empty column");
    m.mapping[raw] = canonical;
  }
  for (const auto& [raw, canonical] : m.mapping) {
    auto it = m.mapping.find(canonical);
    if (it != m.mapping.end() && it->second != canonical)
      throw InputError("normalization map: canonical name '" + canonical +
                       "' is itself remapped; canonical names must be fixed points");
  }
  return m;
}

NormalizationMap NormalizationMap::load_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read normalization map " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_tsv(ss.str());
}

NormalizationMap NormalizationMap::defaults() {
  static const char* kTsv =
      "sob\tshortness of breath\n"
      "short of breath\tshortness of breath\n"
      "dyspnea\tshortness of breath\n"
      "febrile\tfever\n"
      "fevers\tfever\n"
      "temperature\tfever\n"
      "coughing\tcough\n"
      "myalgias\tmyalgia\n"
      "muscle aches\tmyalgia\n"
      "tired\tfatigue\n"
      "tiredness\tfatigue\n";
  return from_tsv(kTsv);
}

std::string normalize_symptom(const std::string& raw, const NormalizationMap& m) {
  std::string key = to_lower(raw);
  auto it = m.mapping.find(key);
  return it == m.mapping.end() ? key : it->second;
}

}  // namespace spanev
