#include "spanev/synth.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "spanev/rng.hpp"
#include "spanev/schema.hpp"

namespace spanev {

using nlohmann::json;

SynthSpec SynthSpec::from_json(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::exception& e) {
    throw InputError(std::string("synth spec is not valid JSON: ") + e.what());
  }
  SynthSpec spec;
  for (const auto& [key, value] : root.items()) {
    if (key == "documents")
      spec.documents = value.get<int>();
    else if (key == "patients")
      spec.patients = value.get<int>();
    else if (key == "sentences_min")
      spec.sentences_min = value.get<int>();
    else if (key == "sentences_max")
      spec.sentences_max = value.get<int>();
    else if (key == "embedding_dim")
      spec.embedding_dim = value.get<int>();
    else if (key == "note_types")
      spec.note_types = value.get<std::vector<std::string>>();
    else if (key == "signal_symptoms")
      spec.signal_symptoms = value.get<std::vector<std::string>>();
    else if (key == "noise_symptoms")
      spec.noise_symptoms = value.get<std::vector<std::string>>();
    else if (key == "observation_fields")
      spec.observation_fields = value.get<std::vector<std::string>>();
    else if (key == "signal_present_rate_positive")
      spec.signal_present_rate_positive = value.get<double>();
    else if (key == "signal_present_rate_negative")
      spec.signal_present_rate_negative = value.get<double>();
    else if (key == "signal_denied_rate_negative")
      spec.signal_denied_rate_negative = value.get<double>();
    else if (key == "covid_sentence_rate")
      spec.covid_sentence_rate = value.get<double>();
    else if (key == "noise_symptom_rate")
      spec.noise_symptom_rate = value.get<double>();
    else
      throw InputError("unknown synth spec key '" + key + "'");
  }
  if (spec.documents < 1 || spec.patients < 1 || spec.sentences_min < 1 ||
      spec.sentences_max < spec.sentences_min || spec.embedding_dim < 1 ||
      spec.note_types.empty() || spec.signal_symptoms.empty())
    throw InputError("synth spec values out of range");
  return spec;
}

SynthSpec SynthSpec::load_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read synth spec " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

namespace {

// Accumulates one document as whitespace-joined words, one sentence per line,
// with the sentence-final period attached to the last word so the tokenizer
// splits it back off. Word positions map directly to token indices.
class DocBuilder {
 public:
  // Appends a sentence given as space-separated words (no trailing period).
  // Returns the sentence index.
  int add_sentence(const std::string& words) {
    if (!text_.empty()) text_ += "\n";
    text_ += words + ".";
    int count = 1;  // the trailing "." token
    for (char c : words)
      if (c == ' ') ++count;
    ++count;  // words = separators + 1
    sentence_sizes_.push_back(count);
    return static_cast<int>(sentence_sizes_.size()) - 1;
  }

  const std::string& text() const { return text_; }

 private:
  std::string text_;
  std::vector<int> sentence_sizes_;
};

int word_count(const std::string& phrase) {
  int count = 1;
  for (char c : phrase)
    if (c == ' ') ++count;
  return count;
}

TokenSpan span_at(int sentence, int start, int width) {
  return TokenSpan{sentence, start, start + width};
}

// Symptom sentence variants; every one carries the required Assertion.
Event symptom_sentence(DocBuilder& doc, const std::string& symptom, const std::string& assertion,
                       Rng& rng) {
  int sym_w = word_count(symptom);
  Event ev;
  if (assertion == "absent") {
    int s = doc.add_sentence("Denies " + symptom);
    ev.trigger = {"Symptom", span_at(s, 1, sym_w)};
    ev.labeled_args.push_back({"Assertion", span_at(s, 0, 1), "absent"});
    return ev;
  }
  if (assertion == "possible") {
    int s = doc.add_sentence("Possible " + symptom + " reported");
    ev.trigger = {"Symptom", span_at(s, 1, sym_w)};
    ev.labeled_args.push_back({"Assertion", span_at(s, 0, 1), "possible"});
    return ev;
  }

  // "present" with a rotating extra argument.
  switch (rng.next_int(6)) {
    case 0: {
      int s = doc.add_sentence("Patient reports " + symptom);
      ev.trigger = {"Symptom", span_at(s, 2, sym_w)};
      ev.labeled_args.push_back({"Assertion", span_at(s, 1, 1), "present"});
      break;
    }
    case 1: {
      int s = doc.add_sentence("Reports severe " + symptom);
      ev.trigger = {"Symptom", span_at(s, 2, sym_w)};
      ev.labeled_args.push_back({"Assertion", span_at(s, 0, 1), "present"});
      ev.labeled_args.push_back({"Severity", span_at(s, 1, 1), "severe"});
      break;
    }
    case 2: {
      int s = doc.add_sentence("Reports " + symptom + " for three days");
      ev.trigger = {"Symptom", span_at(s, 1, sym_w)};
      ev.labeled_args.push_back({"Assertion", span_at(s, 0, 1), "present"});
      ev.span_only_args.push_back({"Duration", span_at(s, 1 + sym_w, 3)});
      break;
    }
    case 3: {
      int s = doc.add_sentence("Reports " + symptom + " which is improving");
      ev.trigger = {"Symptom", span_at(s, 1, sym_w)};
      ev.labeled_args.push_back({"Assertion", span_at(s, 0, 1), "present"});
      ev.labeled_args.push_back({"Change", span_at(s, 3 + sym_w, 1), "improving"});
      break;
    }
    case 4: {
      int s = doc.add_sentence("Reports intermittent " + symptom);
      ev.trigger = {"Symptom", span_at(s, 2, sym_w)};
      ev.labeled_args.push_back({"Assertion", span_at(s, 0, 1), "present"});
      ev.span_only_args.push_back({"Frequency", span_at(s, 1, 1)});
      break;
    }
    default: {
      int s = doc.add_sentence("Reports " + symptom + " in the chest");
      ev.trigger = {"Symptom", span_at(s, 1, sym_w)};
      ev.labeled_args.push_back({"Assertion", span_at(s, 0, 1), "present"});
      ev.span_only_args.push_back({"Anatomy", span_at(s, 3 + sym_w, 1)});
      break;
    }
  }
  return ev;
}

Event covid_sentence(DocBuilder& doc, Rng& rng) {
  Event ev;
  switch (rng.next_int(5)) {
    case 0: {
      int s = doc.add_sentence("COVID-19 test returned positive");
      ev.trigger = {"COVID", span_at(s, 0, 1)};
      ev.labeled_args.push_back({"Test Status", span_at(s, 3, 1), "positive"});
      break;
    }
    case 1: {
      int s = doc.add_sentence("COVID-19 test negative today");
      ev.trigger = {"COVID", span_at(s, 0, 1)};
      ev.labeled_args.push_back({"Test Status", span_at(s, 2, 1), "negative"});
      break;
    }
    case 2: {
      int s = doc.add_sentence("COVID-19 test results pending");
      ev.trigger = {"COVID", span_at(s, 0, 1)};
      ev.labeled_args.push_back({"Test Status", span_at(s, 3, 1), "pending"});
      break;
    }
    case 3: {
      int s = doc.add_sentence("Concern for COVID-19 exposure");
      ev.trigger = {"COVID", span_at(s, 2, 1)};
      ev.labeled_args.push_back({"Assertion", span_at(s, 0, 1), "possible"});
      break;
    }
    default: {
      int s = doc.add_sentence("She is worried about COVID-19");
      ev.trigger = {"COVID", span_at(s, 4, 1)};
      ev.labeled_args.push_back({"Assertion", span_at(s, 2, 1), "hypothetical"});
      break;
    }
  }
  return ev;
}

const char* kFillers[4] = {"Vitals reviewed and stable", "Plan discussed with patient",
                           "Will follow up next week", "Medication list reconciled"};

std::string zero_pad(int value, int width) {
  std::string s = std::to_string(value);
  while (static_cast<int>(s.size()) < width) s = "0" + s;
  return s;
}

}  // namespace

SynthOutput make_synthetic_corpus(const SynthSpec& spec, uint64_t seed) {
  SynthOutput out;
  Rng rng(derive_seed(seed, "synth"));

  // Patient skeletons: tests at fixed-ish days; note days precede them.
  struct Patient {
    PatientTimeline timeline;
    std::vector<double> anchor_days;  // candidate note days
  };
  std::vector<Patient> patients(spec.patients);
  for (int p = 0; p < spec.patients; ++p) {
    Patient& pat = patients[p];
    pat.timeline.patient_id = "p" + zero_pad(p, 3);
    double base = 100.0 + rng.next_int(30);
    int scenario = rng.next_int(10);  // 0-3 positive, 4-7 negative, 8-9 untested
    if (scenario < 8) {
      int tests = 1 + rng.next_int(2);
      for (int t = 0; t < tests; ++t) {
        TestResult tr;
        tr.timestamp = base + 7.0 * t + rng.next_int(3);
        bool last = t == tests - 1;
        tr.positive = scenario < 4 && (last || rng.next_double() < 0.7);
        pat.timeline.tests.push_back(tr);
      }
    }
    if (pat.timeline.tests.empty()) {
      for (int k = 0; k < 3; ++k) pat.anchor_days.push_back(base + k * 3.0);
    } else {
      for (const TestResult& tr : pat.timeline.tests)
        for (int k = 0; k < 2; ++k)
          pat.anchor_days.push_back(tr.timestamp - 1.0 - rng.next_int(5));
    }
    for (const std::string& field : spec.observation_fields) {
      for (double day : pat.anchor_days) {
        Observation ob;
        ob.timestamp = day + 0.25;
        ob.field = field;
        ob.value = field == "temperature"        ? 36.5 + rng.next_gaussian() * 0.6
                   : field == "oxygen_saturation" ? 96.0 + rng.next_gaussian() * 2.0
                                                   : 75.0 + rng.next_gaussian() * 12.0;
        pat.timeline.observations.push_back(ob);
      }
    }
  }

  for (int d = 0; d < spec.documents; ++d) {
    int p = d % spec.patients;
    Patient& pat = patients[p];
    std::string doc_id = "note" + zero_pad(d, 4);
    double day = pat.anchor_days[rng.next_int(static_cast<int>(pat.anchor_days.size()))] +
                 0.1 * rng.next_int(5);
    const std::string& note_type =
        spec.note_types[rng.next_int(static_cast<int>(spec.note_types.size()))];

    // Content correlates with the nearest future test result (if any).
    const TestResult* next_test = nullptr;
    for (const TestResult& tr : pat.timeline.tests)
      if (tr.timestamp > day && (!next_test || tr.timestamp < next_test->timestamp))
        next_test = &tr;

    DocBuilder builder;
    std::vector<Event> events;
    int target_sentences =
        spec.sentences_min + rng.next_int(spec.sentences_max - spec.sentences_min + 1);

    for (const std::string& symptom : spec.signal_symptoms) {
      if (next_test && next_test->positive) {
        if (rng.next_double() < spec.signal_present_rate_positive)
          events.push_back(symptom_sentence(builder, symptom, "present", rng));
      } else if (next_test) {
        if (rng.next_double() < spec.signal_present_rate_negative)
          events.push_back(symptom_sentence(builder, symptom, "present", rng));
        else if (rng.next_double() < spec.signal_denied_rate_negative)
          events.push_back(symptom_sentence(builder, symptom, "absent", rng));
      } else if (rng.next_double() < 0.25) {
        events.push_back(symptom_sentence(builder, symptom, "possible", rng));
      }
    }
    for (int s = static_cast<int>(events.size()); s + 1 < target_sentences; ++s) {
      double roll = rng.next_double();
      if (roll < spec.covid_sentence_rate) {
        events.push_back(covid_sentence(builder, rng));
      } else if (roll < spec.covid_sentence_rate + spec.noise_symptom_rate &&
                 !spec.noise_symptoms.empty()) {
        const std::string& symptom =
            spec.noise_symptoms[rng.next_int(static_cast<int>(spec.noise_symptoms.size()))];
        const char* assertions[3] = {"present", "absent", "possible"};
        events.push_back(symptom_sentence(builder, symptom, assertions[rng.next_int(3)], rng));
      } else {
        builder.add_sentence(kFillers[rng.next_int(4)]);
      }
    }
    builder.add_sentence(kFillers[rng.next_int(4)]);

    AnnotatedDocument doc;
    doc.document.doc_id = doc_id;
    doc.document.note_type = note_type;
    doc.document.text = builder.text();
    doc.document.sentences = tokenize(doc.document.text);
    doc.events = std::move(events);
    out.corpus.push_back(std::move(doc));

    NoteRef note;
    note.timestamp = day;
    note.note_type = note_type;
    note.doc_id = doc_id;
    pat.timeline.notes.push_back(note);
    out.note_labels.emplace_back(doc_id, assign_note_label(pat.timeline, day));
  }

  for (Patient& pat : patients) {
    pat.timeline.sort_by_time();
    out.timelines.push_back(std::move(pat.timeline));
  }
  std::sort(out.timelines.begin(), out.timelines.end(),
            [](const PatientTimeline& a, const PatientTimeline& b) {
              return a.patient_id < b.patient_id;
            });
  std::sort(out.note_labels.begin(), out.note_labels.end());

  out.embeddings =
      hashed_embeddings_for(out.corpus, spec.embedding_dim, derive_seed(seed, "embeddings"));
  return out;
}

void write_synth_output(const SynthOutput& output, const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  write_corpus_dir(output.corpus, (fs::path(out_dir) / "corpus").string());
  save_embedding_file(output.embeddings, (fs::path(out_dir) / "embeddings.txt").string());

  std::ofstream timelines(fs::path(out_dir) / "timelines.jsonl", std::ios::binary);
  if (!timelines) throw InputError("cannot write timelines.jsonl under " + out_dir);
  timelines << timelines_to_jsonl(output.timelines);

  std::ofstream labels(fs::path(out_dir) / "labels.tsv", std::ios::binary);
  if (!labels) throw InputError("cannot write labels.tsv under " + out_dir);
  labels << "doc_id\tlabel\n";
  for (const auto& [doc_id, label] : output.note_labels)
    labels << doc_id << '\t' << to_string(label) << '\n';
}

}  // namespace spanev
