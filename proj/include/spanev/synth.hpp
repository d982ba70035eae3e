#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "spanev/corpus.hpp"
#include "spanev/encoder.hpp"
#include "spanev/prediction.hpp"

namespace spanev {

// Knobs for the synthetic desk-scale corpus generator (stand-in for private
// clinical data). Symptom mentions correlate with upcoming test results;
// structured observations are pure noise.
struct SynthSpec {
  int documents = 30;
  int patients = 12;
  int sentences_min = 3;
  int sentences_max = 7;
  int embedding_dim = 16;
  std::vector<std::string> note_types = {"telephone", "progress",  "ed",
                                         "nursing",   "icu",       "medicine"};
  std::vector<std::string> signal_symptoms = {"fever", "cough", "myalgia"};
  std::vector<std::string> noise_symptoms = {"headache", "nausea",     "fatigue",
                                             "chills",   "dizziness",  "sore throat",
                                             "wheezing", "congestion", "diarrhea"};
  std::vector<std::string> observation_fields = {"temperature", "oxygen_saturation",
                                                 "heart_rate"};
  double signal_present_rate_positive = 0.85;  // mention rate before a positive test
  double signal_present_rate_negative = 0.10;
  double signal_denied_rate_negative = 0.40;
  double covid_sentence_rate = 0.25;
  double noise_symptom_rate = 0.35;

  static SynthSpec from_json(const std::string& text);
  static SynthSpec load_file(const std::string& path);
};

struct SynthOutput {
  Corpus corpus;
  EmbeddingMap embeddings;
  std::vector<PatientTimeline> timelines;
  std::vector<std::pair<std::string, NoteLabel>> note_labels;  // (doc_id, embedded label)
};

// Deterministic given (spec, seed). Every generated event is schema-valid
// under the default schema, and every embedded note label agrees with
// assign_note_label applied to the generated timeline.
SynthOutput make_synthetic_corpus(const SynthSpec& spec, uint64_t seed);

// Writes corpus/<id>.{txt,ann}, embeddings.txt, timelines.jsonl, labels.tsv.
void write_synth_output(const SynthOutput& output, const std::string& out_dir);

}  // namespace spanev
