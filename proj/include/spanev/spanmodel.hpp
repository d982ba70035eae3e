#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "spanev/ad.hpp"
#include "spanev/encoder.hpp"
#include "spanev/schema.hpp"
#include "spanev/scoring.hpp"

namespace spanev {

struct SpanSet {
  int sentence_index = 0;
  int max_width = 1;  // M
  std::vector<TokenSpan> spans;  // every span of width 1..M, ordered by (start, end)

  int count() const { return static_cast<int>(spans.size()); }
  // Index of a span in `spans`, or -1 when absent (e.g. wider than M).
  int index_of(const TokenSpan& s) const;
};

SpanSet enumerate_spans(int token_count, int max_width, int sentence_index = 0);

// Softmax with max-subtraction; the input must be non-empty and finite.
std::vector<double> attention_weights(const std::vector<double>& scores);

// Keeps the K spans with the largest score, ties broken by span order
// (start asc, end asc) = index order. Returns ascending indices.
std::vector<int> prune_top_k(const std::vector<double>& span_scores, int k);

// Replaces every labeled argument's span with its event's trigger span;
// span-only arguments are untouched. Idempotent.
std::vector<Event> substitute_trigger_spans(const std::vector<Event>& events);
AnnotatedDocument substitute_trigger_spans(const AnnotatedDocument& doc);

// Label sets per classifier category, derived from the schema. Category 0 is
// the trigger; categories 1..T are the labeled argument types (sorted by
// name, label set = union over event types); the last category covers all
// span-only argument types. The null label sits at index 0 of every set.
struct LabelSets {
  static constexpr const char* kNull = "null";

  std::vector<std::string> trigger_labels;
  std::vector<std::string> labeled_types;
  std::map<std::string, std::vector<std::string>> labeled_labels;
  std::vector<std::string> span_only_types;
  std::vector<std::string> span_only_labels;

  static LabelSets from_schema(const Schema& schema);

  int categories() const { return static_cast<int>(labeled_types.size()) + 2; }
  int role_classifiers() const { return categories() - 1; }
  // Name of category c: "trigger", a labeled argument type, or "span_only".
  std::string category_name(int c) const;
  const std::vector<std::string>& category_labels(int c) const;
  int label_index(int c, const std::string& label) const;  // -1 when absent
};

struct ModelConfig {
  int max_span_width = 8;  // M
  double top_k_ratio = 0.4;  // K = ceil(ratio * n)
  int top_k_fixed = 0;       // overrides the ratio when > 0
  int hidden = 64;           // v_h
  int span_hidden = 64;      // v_s
  int role_hidden = 64;      // v_r
  int encoder_layers = 1;
  int embedding_dim = 16;
  double learning_rate = 0.1;
  double momentum = 0.0;
  int epochs = 100;
  int batch_size = 1;
  uint64_t seed = 0;
  int symptom_min_count = 1;
  bool substitute_spans = true;
  int eval_every = 0;  // dev F1 every N epochs; 0 disables

  static ModelConfig from_json(const std::string& text);
  static ModelConfig load_file(const std::string& path);
  std::string to_json() const;
  bool operator==(const ModelConfig&) const = default;
};

// Value-only products of one sentence pass. role_scores[d][i][j] holds the
// (negative, positive) score pair for the i-th pruned trigger span and the
// j-th pruned span of role d's category.
struct SentencePrediction {
  SpanSet spans;
  std::vector<std::vector<std::vector<double>>> span_scores;  // [category][span][label]
  std::vector<std::vector<int>> pruned;                       // [category] -> span indices
  std::vector<std::vector<std::vector<std::array<double, 2>>>> role_scores;
  std::vector<Event> events;
};

std::vector<Event> decode_events(const SentencePrediction& prediction, const LabelSets& labels,
                                 const Schema& schema, std::vector<std::string>* warnings);

struct EpochMetrics {
  int epoch = 0;
  double loss = 0.0;
  double dev_trigger_f1 = -1.0;  // negative when not evaluated
  double dev_labeled_f1 = -1.0;
};

struct TrainMetrics {
  std::vector<EpochMetrics> epochs;
};

class SpanEventModel {
 public:
  SpanEventModel(Schema schema, ModelConfig config);

  const Schema& schema() const { return schema_; }
  const LabelSets& labels() const { return labels_; }
  const ModelConfig& config() const { return config_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

  int top_k(int token_count) const;

  struct SentenceForward {
    SpanSet spans;
    std::vector<std::vector<ad::Tape::NodeId>> g;       // [category][span]
    std::vector<std::vector<ad::Tape::NodeId>> scores;  // [category][span] logits
    std::vector<std::vector<int>> pruned;
    std::vector<std::vector<std::vector<ad::Tape::NodeId>>> role;  // [d][i][j]
  };
  SentenceForward forward(ad::Tape& tape, const ParamNodes& nodes, ad::Tape::NodeId embeddings,
                          int sentence_index) const;

  struct SentenceTargets {
    std::vector<std::vector<int>> span_labels;  // [category][span]
    // Gold (trigger span index, argument span index) pairs per role.
    std::vector<std::set<std::pair<int, int>>> role_pairs;
  };
  SentenceTargets build_targets(const std::vector<Event>& events, const SpanSet& spans,
                                std::vector<std::string>* warnings) const;

  // Summed cross entropy over all span classifiers (every span) and all role
  // classifiers (pruned pairs; gold pairs pruned away are not charged).
  ad::Tape::NodeId loss_on_tape(ad::Tape& tape, const SentenceForward& fwd,
                                const SentenceTargets& targets) const;

  SentencePrediction predict_sentence(const Mat& embeddings, int sentence_index,
                                      std::vector<std::string>* warnings = nullptr) const;
  AnnotatedDocument extract_document(const Document& document, const EmbeddingTable& table,
                                     std::vector<std::string>* warnings = nullptr) const;

  // Deterministic given config().seed. The corpus must already be prepared
  // (validated, truncated, filtered, substituted). Aborts on non-finite loss.
  TrainMetrics train(const Corpus& corpus, const EmbeddingMap& embeddings,
                     const Corpus* dev = nullptr, const EmbeddingMap* dev_embeddings = nullptr,
                     std::ostream* log = nullptr);

  void save(const std::string& path) const;
  static SpanEventModel load(const std::string& path);

 private:
  int category_of_labeled(const std::string& arg_type) const;

  Schema schema_;
  ModelConfig config_;
  LabelSets labels_;
  ParamStore params_;
};

// validate (errors on violations), truncate COVID triggers, build the symptom
// vocabulary at config.symptom_min_count, filter, and (unless
// config.substitute_spans is off) substitute trigger spans.
Corpus prepare_training_corpus(const Corpus& corpus, const Schema& schema,
                               const ModelConfig& config,
                               SymptomVocabulary* vocab_out = nullptr,
                               std::vector<std::string>* warnings = nullptr);

// Evaluation-side preparation: truncation and vocabulary filtering with a
// training-set vocabulary, no span substitution.
Corpus prepare_eval_corpus(const Corpus& corpus, const SymptomVocabulary& vocab);

}  // namespace spanev
