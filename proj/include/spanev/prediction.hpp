#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "spanev/corpus.hpp"
#include "spanev/schema.hpp"

namespace spanev {

// Timestamps are fractional days since 1970-01-01. The JSON loaders accept
// plain numbers (days) or "YYYY-MM-DD[THH:MM[:SS]]" strings.
double parse_timestamp(const std::string& value);

struct TestResult {
  double timestamp = 0.0;
  bool positive = false;
  bool operator==(const TestResult&) const = default;
};

struct NoteRef {
  double timestamp = 0.0;
  std::string note_type;
  std::string doc_id;
  bool operator==(const NoteRef&) const = default;
};

struct Observation {
  double timestamp = 0.0;
  std::string field;
  double value = 0.0;
  bool operator==(const Observation&) const = default;
};

struct PatientTimeline {
  std::string patient_id;
  std::vector<TestResult> tests;
  std::vector<Observation> observations;
  std::vector<NoteRef> notes;

  void sort_by_time();
  bool operator==(const PatientTimeline&) const = default;
};

std::vector<PatientTimeline> load_timelines(const std::string& path);
std::vector<PatientTimeline> parse_timelines(const std::string& jsonl);
std::string timelines_to_jsonl(const std::vector<PatientTimeline>& timelines);

enum class NoteLabel { none, positive, negative };
const char* to_string(NoteLabel label);

// Considers tests strictly after the note timestamp: any future positive test
// wins; otherwise any future test means negative; no future tests means none.
NoteLabel assign_note_label(const PatientTimeline& timeline, double note_timestamp,
                            bool include_tests_at_note_time = false);

struct SampleOptions {
  double window_days = 7.0;
  // Window is (test - window_days, test) when false; default includes the
  // boundary note exactly window_days before the test. A note at the test
  // instant is always excluded.
  bool include_window_boundary = true;
};

struct Sample {
  std::string patient_id;
  double test_timestamp = 0.0;
  bool label_positive = false;
  std::vector<NoteRef> notes;  // in-window notes of the requested type
};

// One sample per test that has at least one note of `note_type` in the
// preceding window. Output is invariant to input ordering.
std::vector<Sample> build_samples(const std::vector<PatientTimeline>& timelines,
                                  const std::string& note_type,
                                  const SampleOptions& options = {});

struct AggregationSpec {
  enum class Agg { min, max };
  std::map<std::string, Agg> fields;

  static AggregationSpec from_json(const std::string& text);
  static AggregationSpec load_file(const std::string& path);
};

struct FeaturizeOptions {
  std::string symptom_event_type = "Symptom";
  std::string assertion_arg = "Assertion";
  std::string present_subtype = "present";
  SampleOptions window;
};

struct SampleFeatureVector {
  std::string patient_id;
  double test_timestamp = 0.0;
  bool label_positive = false;
  // Normalized symptoms asserted present in any in-window note; absent = 0.
  std::map<std::string, double> symptom_features;
  // Aggregated structured fields; NaN marks a missing value.
  std::map<std::string, double> structured_features;
};

SampleFeatureVector featurize(const PatientTimeline& timeline, const Sample& sample,
                              const std::map<std::string, const AnnotatedDocument*>& extracted,
                              const NormalizationMap& normalization, const AggregationSpec& agg,
                              const FeaturizeOptions& options = {});

enum class FeatureSet { all, structured, notes };
FeatureSet feature_set_from_string(const std::string& s);

struct FeatureMatrix {
  std::vector<std::string> feature_names;  // "sx:..." then "ehr:..." columns
  std::vector<std::vector<double>> rows;   // NaN marks missing structured cells
  std::vector<int> labels;                 // 1 positive, 0 negative
  std::vector<std::string> patients;

  int feature_count() const { return static_cast<int>(feature_names.size()); }
  int sample_count() const { return static_cast<int>(rows.size()); }
};

FeatureMatrix build_feature_matrix(const std::vector<SampleFeatureVector>& samples,
                                   FeatureSet set);

// Replaces NaNs with the per-column mean of observed *training* values; a
// column observed nowhere in training imputes 0 with a warning. Returns the
// imputation constants. Evaluation rows never influence the constants.
std::vector<double> impute(FeatureMatrix& train, FeatureMatrix& eval,
                           std::vector<std::string>* warnings = nullptr);

struct ForestConfig {
  int trees = 100;
  int max_depth = 8;
  int min_samples_split = 2;

  static ForestConfig from_json(const std::string& text);
  static ForestConfig load_file(const std::string& path);
};

// Bagged Gini decision trees with sqrt(F) feature subsampling per split.
class RandomForest {
 public:
  static RandomForest fit(const FeatureMatrix& train, const ForestConfig& config, uint64_t seed);

  // Fraction of trees voting positive.
  double predict_proba(const std::vector<double>& row) const;
  std::vector<double> predict_proba(const FeatureMatrix& eval) const;

  int tree_count() const { return static_cast<int>(trees_.size()); }

 private:
  struct Node {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    int vote = 0;
  };
  using Tree = std::vector<Node>;
  std::vector<Tree> trees_;
};

struct RocPoint {
  double threshold = 0.0;
  double tpr = 0.0;
  double fpr = 0.0;
};

struct RocCurve {
  std::vector<RocPoint> points;  // descending-threshold sweep from (0,0) to (1,1)
  double auc = 0.0;
};

// AUC equals the Mann-Whitney pairwise concordance (ties at half weight).
// Both classes must be present.
RocCurve roc_auc(const std::vector<double>& scores, const std::vector<int>& labels);

// Minimum FPR among operating points with TPR >= target (step convention).
double fpr_at_tpr(const RocCurve& curve, double target_tpr = 0.80);

struct TTestResult {
  double t = 0.0;
  double df = 0.0;
  double p = 1.0;
};

// Welch's unequal-variance two-sided t-test. Groups of size >= 2. With zero
// variance in both groups: p = 1 for equal means, p = 0 otherwise.
TTestResult two_sided_ttest(const std::vector<double>& a, const std::vector<double>& b);

// Regularized incomplete beta function I_x(a, b) (continued fraction).
double reg_incomplete_beta(double a, double b, double x);

struct HoldoutConfig {
  int repetitions = 1000;
  double train_fraction = 0.8;  // split by patient
  double target_tpr = 0.80;
  int max_redraws = 100;
  int threads = 1;
  ForestConfig forest;
  uint64_t seed = 0;
};

struct HoldoutResult {
  std::vector<double> auc;
  std::vector<double> fpr;
  double auc_mean = 0.0, auc_sd = 0.0;
  double fpr_mean = 0.0, fpr_sd = 0.0;
  long redraws = 0;

  std::string to_tsv() const;  // columns: metric, mean, sd, n
};

// Repeated hold-out: every repetition draws a fresh patient-level split,
// imputes from its training side, fits a forest, and evaluates AUC and
// FPR@TPR. Bit-reproducible from the seed; repetitions whose splits are
// single-class are redrawn (capped) and logged.
HoldoutResult repeated_holdout(const FeatureMatrix& samples, const HoldoutConfig& config,
                               std::vector<std::string>* log = nullptr);

struct FeatureImportance {
  std::string feature;
  double importance = 0.0;  // mean AUC drop when the column is shuffled
};

// Permutation importance on an (imputed) evaluation matrix; deterministic
// given the seed. reps must be positive.
std::vector<FeatureImportance> permutation_importance(const RandomForest& forest,
                                                      const FeatureMatrix& eval, int reps,
                                                      uint64_t seed);

std::string importance_to_tsv(const std::vector<FeatureImportance>& scores);

}  // namespace spanev
