#include "spanev/prediction.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "spanev/rng.hpp"

namespace spanev {

using nlohmann::json;

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

bool leap(int y) { return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0; }

long days_from_civil(int y, int m, int d) {
  // Howard Hinnant's algorithm; days since 1970-01-01.
  y -= m <= 2;
  long era = (y >= 0 ? y : y - 399) / 400;
  unsigned yoe = static_cast<unsigned>(y - era * 400);
  unsigned doy = (153u * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<long>(doe) - 719468;
}

}  // namespace

double parse_timestamp(const std::string& value) {
  int y, mo, d, h = 0, mi = 0, s = 0;
  int n = std::sscanf(value.c_str(), "%d-%d-%dT%d:%d:%d", &y, &mo, &d, &h, &mi, &s);
  if (n < 3) {
    // Fall back to a plain number of days.
    char* end = nullptr;
    double v = std::strtod(value.c_str(), &end);
    if (end == value.c_str() || (end && *end != '\0'))
      throw InputError("cannot parse timestamp '" + value + "'");
    return v;
  }
  if (mo < 1 || mo > 12 || d < 1 || d > 31 || h < 0 || h > 23 || mi < 0 || mi > 59 || s < 0 ||
      s > 60 || (d > 29 && mo == 2) || (d == 29 && mo == 2 && !leap(y)))
    throw InputError("invalid date/time '" + value + "'");
  return static_cast<double>(days_from_civil(y, mo, d)) + (h * 3600.0 + mi * 60.0 + s) / 86400.0;
}

namespace {

double timestamp_from_json(const json& v, const std::string& where) {
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) return parse_timestamp(v.get<std::string>());
  throw InputError(where + ": timestamp must be a number (days) or a date string");
}

}  // namespace

void PatientTimeline::sort_by_time() {
  std::stable_sort(tests.begin(), tests.end(),
                   [](const TestResult& a, const TestResult& b) { return a.timestamp < b.timestamp; });
  std::stable_sort(notes.begin(), notes.end(), [](const NoteRef& a, const NoteRef& b) {
    return a.timestamp != b.timestamp ? a.timestamp < b.timestamp : a.doc_id < b.doc_id;
  });
  std::stable_sort(observations.begin(), observations.end(),
                   [](const Observation& a, const Observation& b) {
                     return a.timestamp != b.timestamp ? a.timestamp < b.timestamp
                                                       : a.field < b.field;
                   });
}

std::vector<PatientTimeline> parse_timelines(const std::string& jsonl) {
  std::vector<PatientTimeline> out;
  std::istringstream in(jsonl);
  std::string line;
  int line_no = 0;
  std::set<std::string> seen;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    json root;
    try {
      root = json::parse(line);
    } catch (const json::exception& e) {
      throw InputError("timeline line " + std::to_string(line_no) + ": " + e.what());
    }
    std::string where = "timeline line " + std::to_string(line_no);
    PatientTimeline tl;
    tl.patient_id = root.value("patient_id", "");
    if (tl.patient_id.empty()) throw InputError(where + ": missing patient_id");
    if (!seen.insert(tl.patient_id).second)
      throw InputError(where + ": duplicate patient_id '" + tl.patient_id + "'");
    for (const auto& t : root.value("tests", json::array())) {
      TestResult tr;
      tr.timestamp = timestamp_from_json(t.at("timestamp"), where);
      std::string result = t.value("result", "");
      if (result == "positive")
        tr.positive = true;
      else if (result == "negative")
        tr.positive = false;
      else
        throw InputError(where + ": test result must be positive or negative");
      tl.tests.push_back(tr);
    }
    for (const auto& n : root.value("notes", json::array())) {
      NoteRef nr;
      nr.timestamp = timestamp_from_json(n.at("timestamp"), where);
      nr.note_type = n.value("note_type", "");
      nr.doc_id = n.value("doc_id", "");
      if (nr.doc_id.empty()) throw InputError(where + ": note without doc_id");
      tl.notes.push_back(nr);
    }
    for (const auto& o : root.value("observations", json::array())) {
      Observation ob;
      ob.timestamp = timestamp_from_json(o.at("timestamp"), where);
      ob.field = o.value("field", "");
      if (ob.field.empty()) throw InputError(where + ": observation without field");
      ob.value = o.at("value").get<double>();
      tl.observations.push_back(ob);
    }
    tl.sort_by_time();
    out.push_back(std::move(tl));
  }
  std::sort(out.begin(), out.end(), [](const PatientTimeline& a, const PatientTimeline& b) {
    return a.patient_id < b.patient_id;
  });
  return out;
}

std::vector<PatientTimeline> load_timelines(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read timeline file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_timelines(ss.str());
}

std::string timelines_to_jsonl(const std::vector<PatientTimeline>& timelines) {
  std::ostringstream out;
  for (const auto& tl : timelines) {
    json root;
    root["patient_id"] = tl.patient_id;
    json tests = json::array();
    for (const auto& t : tl.tests)
      tests.push_back({{"timestamp", t.timestamp}, {"result", t.positive ? "positive" : "negative"}});
    json notes = json::array();
    for (const auto& n : tl.notes)
      notes.push_back(
          {{"timestamp", n.timestamp}, {"note_type", n.note_type}, {"doc_id", n.doc_id}});
    json obs = json::array();
    for (const auto& o : tl.observations)
      obs.push_back({{"timestamp", o.timestamp}, {"field", o.field}, {"value", o.value}});
    root["tests"] = tests;
    root["notes"] = notes;
    root["observations"] = obs;
    out << root.dump() << "\n";
  }
  return out.str();
}

const char* to_string(NoteLabel label) {
  switch (label) {
    case NoteLabel::none:
      return "none";
    case NoteLabel::positive:
      return "positive";
    case NoteLabel::negative:
      return "negative";
  }
  return "none";
}

NoteLabel assign_note_label(const PatientTimeline& timeline, double note_timestamp,
                            bool include_tests_at_note_time) {
  bool any_future = false;
  for (const TestResult& t : timeline.tests) {
    bool future = include_tests_at_note_time ? t.timestamp >= note_timestamp
                                             : t.timestamp > note_timestamp;
    if (!future) continue;
    if (t.positive) return NoteLabel::positive;
    any_future = true;
  }
  return any_future ? NoteLabel::negative : NoteLabel::none;
}

namespace {

bool in_window(double event_ts, double anchor_ts, const SampleOptions& options) {
  double delta = anchor_ts - event_ts;
  if (delta <= 0.0) return false;
  return options.include_window_boundary ? delta <= options.window_days
                                         : delta < options.window_days;
}

}  // namespace

std::vector<Sample> build_samples(const std::vector<PatientTimeline>& timelines,
                                  const std::string& note_type, const SampleOptions& options) {
  if (options.window_days < 1.0) throw InputError("window_days must be >= 1");
  std::vector<Sample> out;
  for (const PatientTimeline& tl : timelines) {
    PatientTimeline sorted = tl;
    sorted.sort_by_time();
    for (const TestResult& test : sorted.tests) {
      Sample sample;
      sample.patient_id = sorted.patient_id;
      sample.test_timestamp = test.timestamp;
      sample.label_positive = test.positive;
      for (const NoteRef& note : sorted.notes) {
        if (note.note_type != note_type) continue;
        if (in_window(note.timestamp, test.timestamp, options)) sample.notes.push_back(note);
      }
      if (!sample.notes.empty()) out.push_back(std::move(sample));
    }
  }
  std::stable_sort(out.begin(), out.end(), [](const Sample& a, const Sample& b) {
    if (a.patient_id != b.patient_id) return a.patient_id < b.patient_id;
    if (a.test_timestamp != b.test_timestamp) return a.test_timestamp < b.test_timestamp;
    return a.label_positive < b.label_positive;
  });
  return out;
}

AggregationSpec AggregationSpec::from_json(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::exception& e) {
    throw InputError(std::string("aggregation spec is not valid JSON: ") + e.what());
  }
  if (!root.is_object()) throw InputError("aggregation spec must map field names to min/max");
  AggregationSpec spec;
  for (const auto& [field, agg] : root.items()) {
    std::string a = agg.get<std::string>();
    if (a == "min")
      spec.fields[field] = Agg::min;
    else if (a == "max")
      spec.fields[field] = Agg::max;
    else
      throw InputError("aggregation for '" + field + "' must be min or max");
  }
  return spec;
}

AggregationSpec AggregationSpec::load_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read aggregation spec " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

SampleFeatureVector featurize(const PatientTimeline& timeline, const Sample& sample,
                              const std::map<std::string, const AnnotatedDocument*>& extracted,
                              const NormalizationMap& normalization, const AggregationSpec& agg,
                              const FeaturizeOptions& options) {
  SampleFeatureVector out;
  out.patient_id = sample.patient_id;
  out.test_timestamp = sample.test_timestamp;
  out.label_positive = sample.label_positive;

  for (const NoteRef& note : sample.notes) {
    auto it = extracted.find(note.doc_id);
    if (it == extracted.end())
      throw InputError("no extracted events for note document '" + note.doc_id + "'");
    const AnnotatedDocument& doc = *it->second;
    for (const Event& ev : doc.events) {
      if (ev.trigger.event_type != options.symptom_event_type) continue;
      bool present = false;
      for (const LabeledArg& arg : ev.labeled_args)
        if (arg.arg_type == options.assertion_arg && arg.subtype == options.present_subtype)
          present = true;
      if (!present) continue;
      std::string name =
          normalize_symptom(span_text(doc.document, ev.trigger.span), normalization);
      out.symptom_features[name] = 1.0;
    }
  }

  for (const auto& [field, how] : agg.fields) {
    double best = kNaN;
    for (const Observation& obs : timeline.observations) {
      if (obs.field != field) continue;
      if (!in_window(obs.timestamp, sample.test_timestamp, options.window)) continue;
      if (std::isnan(best))
        best = obs.value;
      else
        best = how == AggregationSpec::Agg::min ? std::min(best, obs.value)
                                                : std::max(best, obs.value);
    }
    out.structured_features[field] = best;
  }
  return out;
}

FeatureSet feature_set_from_string(const std::string& s) {
  if (s == "all") return FeatureSet::all;
  if (s == "structured") return FeatureSet::structured;
  if (s == "notes") return FeatureSet::notes;
  throw InputError("unknown feature set '" + s + "' (use all, structured, or notes)");
}

FeatureMatrix build_feature_matrix(const std::vector<SampleFeatureVector>& samples,
                                   FeatureSet set) {
  std::set<std::string> symptom_names, structured_names;
  for (const auto& s : samples) {
    for (const auto& [name, v] : s.symptom_features) symptom_names.insert(name);
    for (const auto& [name, v] : s.structured_features) structured_names.insert(name);
  }

  FeatureMatrix m;
  if (set != FeatureSet::structured)
    for (const auto& name : symptom_names) m.feature_names.push_back("sx:" + name);
  if (set != FeatureSet::notes)
    for (const auto& name : structured_names) m.feature_names.push_back("ehr:" + name);

  for (const auto& s : samples) {
    std::vector<double> row;
    row.reserve(m.feature_names.size());
    if (set != FeatureSet::structured)
      for (const auto& name : symptom_names) {
        auto it = s.symptom_features.find(name);
        row.push_back(it == s.symptom_features.end() ? 0.0 : it->second);
      }
    if (set != FeatureSet::notes)
      for (const auto& name : structured_names) {
        auto it = s.structured_features.find(name);
        row.push_back(it == s.structured_features.end() ? kNaN : it->second);
      }
    m.rows.push_back(std::move(row));
    m.labels.push_back(s.label_positive ? 1 : 0);
    m.patients.push_back(s.patient_id);
  }
  return m;
}

std::vector<double> impute(FeatureMatrix& train, FeatureMatrix& eval,
                           std::vector<std::string>* warnings) {
  if (train.rows.empty()) throw InputError("imputation needs a non-empty training split");
  int features = train.feature_count();
  std::vector<double> constants(features, 0.0);
  for (int f = 0; f < features; ++f) {
    double sum = 0.0;
    long count = 0;
    for (const auto& row : train.rows) {
      if (std::isnan(row[f])) continue;
      sum += row[f];
      ++count;
    }
    if (count == 0) {
      constants[f] = 0.0;
      if (warnings)
        warnings->push_back("feature '" + train.feature_names[f] +
                            "' observed nowhere in training; imputing 0");
    } else {
      constants[f] = sum / count;
    }
  }
  for (auto& row : train.rows)
    for (int f = 0; f < features; ++f)
      if (std::isnan(row[f])) row[f] = constants[f];
  for (auto& row : eval.rows)
    for (int f = 0; f < features; ++f)
      if (std::isnan(row[f])) row[f] = constants[f];
  return constants;
}

ForestConfig ForestConfig::from_json(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::exception& e) {
    throw InputError(std::string("forest config is not valid JSON: ") + e.what());
  }
  ForestConfig cfg;
  for (const auto& [key, value] : root.items()) {
    if (key == "trees")
      cfg.trees = value.get<int>();
    else if (key == "max_depth")
      cfg.max_depth = value.get<int>();
    else if (key == "min_samples_split")
      cfg.min_samples_split = value.get<int>();
    else
      throw InputError("unknown forest config key '" + key + "'");
  }
  if (cfg.trees < 1 || cfg.max_depth < 1 || cfg.min_samples_split < 2)
    throw InputError("forest config values out of range");
  return cfg;
}

ForestConfig ForestConfig::load_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read forest config " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

RandomForest RandomForest::fit(const FeatureMatrix& train, const ForestConfig& config,
                               uint64_t seed) {
  long pos = std::count(train.labels.begin(), train.labels.end(), 1);
  if (pos == 0 || pos == static_cast<long>(train.labels.size()))
    throw InputError("forest training data has a single class");
  int n = train.sample_count();
  int features = train.feature_count();
  int mtry = std::max(1, static_cast<int>(std::floor(std::sqrt(static_cast<double>(features)))));

  RandomForest forest;
  forest.trees_.resize(config.trees);
  for (int t = 0; t < config.trees; ++t) {
    Rng rng(derive_seed(seed, "tree", static_cast<uint64_t>(t)));
    std::vector<int> rows(n);
    for (int i = 0; i < n; ++i) rows[i] = rng.next_int(n);

    Tree& tree = forest.trees_[t];
    // Recursive splitter; nodes appended depth-first, left child before right.
    auto build = [&](auto&& self, std::vector<int> idx, int depth) -> int {
      long node_pos = 0;
      for (int i : idx) node_pos += train.labels[i];
      long total = static_cast<long>(idx.size());

      auto make_leaf = [&]() {
        Node leaf;
        leaf.vote = node_pos * 2 > total ? 1 : 0;
        tree.push_back(leaf);
        return static_cast<int>(tree.size()) - 1;
      };
      if (node_pos == 0 || node_pos == total || depth >= config.max_depth ||
          total < config.min_samples_split)
        return make_leaf();

      // Sample mtry distinct features, evaluated in ascending order.
      std::vector<int> pool(features);
      std::iota(pool.begin(), pool.end(), 0);
      for (int k = 0; k < mtry; ++k) {
        int j = k + rng.next_int(features - k);
        std::swap(pool[k], pool[j]);
      }
      std::vector<int> chosen(pool.begin(), pool.begin() + mtry);
      std::sort(chosen.begin(), chosen.end());

      double best_impurity = std::numeric_limits<double>::infinity();
      int best_feature = -1;
      double best_threshold = 0.0;
      for (int f : chosen) {
        std::vector<std::pair<double, int>> vals;
        vals.reserve(idx.size());
        for (int i : idx) vals.emplace_back(train.rows[i][f], train.labels[i]);
        std::sort(vals.begin(), vals.end());
        long left_pos = 0, left_n = 0;
        for (size_t i = 0; i + 1 < vals.size(); ++i) {
          left_pos += vals[i].second;
          ++left_n;
          if (vals[i].first == vals[i + 1].first) continue;
          long right_n = total - left_n;
          long right_pos = node_pos - left_pos;
          double lp = static_cast<double>(left_pos) / left_n;
          double rp = static_cast<double>(right_pos) / right_n;
          double impurity = (left_n * (1.0 - lp * lp - (1.0 - lp) * (1.0 - lp)) +
                             right_n * (1.0 - rp * rp - (1.0 - rp) * (1.0 - rp))) /
                            total;
          if (impurity < best_impurity) {
            best_impurity = impurity;
            best_feature = f;
            best_threshold = (vals[i].first + vals[i + 1].first) / 2.0;
          }
        }
      }
      if (best_feature < 0) return make_leaf();

      std::vector<int> left_idx, right_idx;
      for (int i : idx) {
        if (train.rows[i][best_feature] <= best_threshold)
          left_idx.push_back(i);
        else
          right_idx.push_back(i);
      }
      if (left_idx.empty() || right_idx.empty()) return make_leaf();

      int node_id = static_cast<int>(tree.size());
      tree.push_back(Node{});
      tree[node_id].feature = best_feature;
      tree[node_id].threshold = best_threshold;
      int left = self(self, std::move(left_idx), depth + 1);
      int right = self(self, std::move(right_idx), depth + 1);
      tree[node_id].left = left;
      tree[node_id].right = right;
      return node_id;
    };
    build(build, rows, 0);
  }
  return forest;
}

double RandomForest::predict_proba(const std::vector<double>& row) const {
  long votes = 0;
  for (const Tree& tree : trees_) {
    int node = 0;
    while (tree[node].feature >= 0)
      node = row[tree[node].feature] <= tree[node].threshold ? tree[node].left : tree[node].right;
    votes += tree[node].vote;
  }
  return static_cast<double>(votes) / trees_.size();
}

std::vector<double> RandomForest::predict_proba(const FeatureMatrix& eval) const {
  std::vector<double> out;
  out.reserve(eval.rows.size());
  for (const auto& row : eval.rows) out.push_back(predict_proba(row));
  return out;
}

RocCurve roc_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size())
    throw InputError("roc_auc: scores and labels differ in length");
  long pos = std::count(labels.begin(), labels.end(), 1);
  long neg = static_cast<long>(labels.size()) - pos;
  if (pos == 0 || neg == 0) throw InputError("roc_auc needs both classes present");
  for (double s : scores)
    if (!std::isfinite(s)) throw InputError("roc_auc: non-finite score");

  std::vector<int> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return scores[a] > scores[b]; });

  RocCurve curve;
  curve.points.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
  long tp = 0, fp = 0;
  double area2 = 0.0;  // twice the area, in integer counts
  size_t i = 0;
  while (i < order.size()) {
    size_t j = i;
    long dtp = 0, dfp = 0;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      if (labels[order[j]] == 1)
        ++dtp;
      else
        ++dfp;
      ++j;
    }
    area2 += static_cast<double>(dfp) * (2 * tp + dtp);
    tp += dtp;
    fp += dfp;
    curve.points.push_back({scores[order[i]], static_cast<double>(tp) / pos,
                            static_cast<double>(fp) / neg});
    i = j;
  }
  curve.auc = area2 / (2.0 * pos * neg);
  return curve;
}

double fpr_at_tpr(const RocCurve& curve, double target_tpr) {
  double best = 1.0;
  for (const RocPoint& p : curve.points)
    if (p.tpr >= target_tpr) best = std::min(best, p.fpr);
  return best;
}

namespace {

// Continued-fraction evaluation of the incomplete beta (Lentz).
double betacf(double a, double b, double x) {
  constexpr int kMaxIter = 300;
  constexpr double kEps = 3e-14, kFpMin = 1e-300;
  double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0, d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kFpMin) d = kFpMin;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kFpMin) d = kFpMin;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kFpMin) d = kFpMin;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) break;
  }
  return h;
}

}  // namespace

double reg_incomplete_beta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  double ln_bt = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) +
                 b * std::log1p(-x);
  double bt = std::exp(ln_bt);
  if (x < (a + 1.0) / (a + b + 2.0)) return bt * betacf(a, b, x) / a;
  return 1.0 - bt * betacf(b, a, 1.0 - x) / b;
}

TTestResult two_sided_ttest(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() < 2 || b.size() < 2)
    throw InputError("two_sided_ttest needs at least two values per group");
  auto mean_var = [](const std::vector<double>& v) {
    double mean = std::accumulate(v.begin(), v.end(), 0.0) / v.size();
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return std::make_pair(mean, ss / (v.size() - 1));
  };
  auto [ma, va] = mean_var(a);
  auto [mb, vb] = mean_var(b);
  double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());

  TTestResult result;
  double se2 = va / na + vb / nb;
  if (se2 == 0.0) {
    result.t = ma == mb ? 0.0 : (ma > mb ? std::numeric_limits<double>::infinity()
                                         : -std::numeric_limits<double>::infinity());
    result.df = na + nb - 2.0;
    result.p = ma == mb ? 1.0 : 0.0;
    return result;
  }
  result.t = (ma - mb) / std::sqrt(se2);
  double num = se2 * se2;
  double den = (va / na) * (va / na) / (na - 1.0) + (vb / nb) * (vb / nb) / (nb - 1.0);
  result.df = num / den;
  result.p = reg_incomplete_beta(result.df / 2.0, 0.5,
                                 result.df / (result.df + result.t * result.t));
  return result;
}

namespace {

std::pair<double, double> mean_sd(const std::vector<double>& v) {
  if (v.empty()) return {0.0, 0.0};
  double mean = std::accumulate(v.begin(), v.end(), 0.0) / v.size();
  if (v.size() == 1) return {mean, 0.0};
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / (v.size() - 1))};
}

FeatureMatrix take_rows(const FeatureMatrix& m, const std::vector<int>& rows) {
  FeatureMatrix out;
  out.feature_names = m.feature_names;
  for (int r : rows) {
    out.rows.push_back(m.rows[r]);
    out.labels.push_back(m.labels[r]);
    out.patients.push_back(m.patients[r]);
  }
  return out;
}

bool two_classes(const std::vector<int>& labels) {
  long pos = std::count(labels.begin(), labels.end(), 1);
  return pos > 0 && pos < static_cast<long>(labels.size());
}

}  // namespace

HoldoutResult repeated_holdout(const FeatureMatrix& samples, const HoldoutConfig& config,
                               std::vector<std::string>* log) {
  if (config.repetitions < 1) throw InputError("repetitions must be positive");
  if (samples.rows.empty()) throw InputError("no samples");
  std::vector<std::string> patients;
  {
    std::set<std::string> distinct(samples.patients.begin(), samples.patients.end());
    patients.assign(distinct.begin(), distinct.end());
  }
  if (patients.size() < 2) throw InputError("repeated_holdout needs at least two patients");
  std::map<std::string, std::vector<int>> rows_by_patient;
  for (int r = 0; r < samples.sample_count(); ++r)
    rows_by_patient[samples.patients[r]].push_back(r);

  HoldoutResult result;
  result.auc.assign(config.repetitions, 0.0);
  result.fpr.assign(config.repetitions, 0.0);
  std::vector<std::vector<std::string>> rep_logs(config.repetitions);
  std::vector<long> rep_redraws(config.repetitions, 0);

  auto run_rep = [&](int rep) {
    for (int attempt = 0;; ++attempt) {
      if (attempt > config.max_redraws)
        throw InputError("repetition " + std::to_string(rep) + ": no two-class split after " +
                         std::to_string(config.max_redraws) + " redraws");
      Rng rng(derive_seed(config.seed, "holdout-split",
                          static_cast<uint64_t>(rep) * 1009u + attempt));
      std::vector<std::string> shuffled = patients;
      rng.shuffle(shuffled);
      int train_patients = static_cast<int>(config.train_fraction * patients.size());
      train_patients = std::max(1, std::min(train_patients, static_cast<int>(patients.size()) - 1));

      std::vector<int> train_rows, eval_rows;
      for (size_t p = 0; p < shuffled.size(); ++p) {
        const auto& rows = rows_by_patient[shuffled[p]];
        auto& target = p < static_cast<size_t>(train_patients) ? train_rows : eval_rows;
        target.insert(target.end(), rows.begin(), rows.end());
      }
      std::sort(train_rows.begin(), train_rows.end());
      std::sort(eval_rows.begin(), eval_rows.end());

      FeatureMatrix train = take_rows(samples, train_rows);
      FeatureMatrix eval = take_rows(samples, eval_rows);
      if (!two_classes(train.labels) || !two_classes(eval.labels)) {
        rep_redraws[rep]++;
        rep_logs[rep].push_back("repetition " + std::to_string(rep) + ": single-class split on " +
                                "attempt " + std::to_string(attempt) + "; redrawing");
        continue;
      }

      impute(train, eval);
      RandomForest forest =
          RandomForest::fit(train, config.forest, derive_seed(config.seed, "forest", rep));
      RocCurve curve = roc_auc(forest.predict_proba(eval), eval.labels);
      result.auc[rep] = curve.auc;
      result.fpr[rep] = fpr_at_tpr(curve, config.target_tpr);
      return;
    }
  };

  int threads = std::max(1, config.threads);
  if (threads == 1) {
    for (int rep = 0; rep < config.repetitions; ++rep) run_rep(rep);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(threads);
    for (int w = 0; w < threads; ++w) {
      pool.emplace_back([&, w]() {
        try {
          for (int rep = w; rep < config.repetitions; rep += threads) run_rep(rep);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& t : pool) t.join();
    for (const auto& e : errors)
      if (e) std::rethrow_exception(e);
  }

  for (int rep = 0; rep < config.repetitions; ++rep) {
    result.redraws += rep_redraws[rep];
    if (log)
      for (auto& line : rep_logs[rep]) log->push_back(std::move(line));
  }
  auto [am, asd] = mean_sd(result.auc);
  auto [fm, fsd] = mean_sd(result.fpr);
  result.auc_mean = am;
  result.auc_sd = asd;
  result.fpr_mean = fm;
  result.fpr_sd = fsd;
  return result;
}

std::string HoldoutResult::to_tsv() const {
  std::ostringstream out;
  char buf[128];
  out << "metric\tmean\tsd\tn\n";
  std::snprintf(buf, sizeof(buf), "auc\t%.6f\t%.6f\t%zu\n", auc_mean, auc_sd, auc.size());
  out << buf;
  std::snprintf(buf, sizeof(buf), "fpr_at_tpr\t%.6f\t%.6f\t%zu\n", fpr_mean, fpr_sd, fpr.size());
  out << buf;
  return out.str();
}

std::vector<FeatureImportance> permutation_importance(const RandomForest& forest,
                                                      const FeatureMatrix& eval, int reps,
                                                      uint64_t seed) {
  if (reps < 1) throw InputError("permutation_importance needs reps >= 1");
  for (const auto& row : eval.rows)
    for (double v : row)
      if (std::isnan(v)) throw InputError("permutation_importance expects an imputed matrix");

  double base = roc_auc(forest.predict_proba(eval), eval.labels).auc;
  std::vector<FeatureImportance> out;
  for (int f = 0; f < eval.feature_count(); ++f) {
    double drop_sum = 0.0;
    for (int rep = 0; rep < reps; ++rep) {
      FeatureMatrix shuffled = eval;
      std::vector<double> column;
      column.reserve(eval.rows.size());
      for (const auto& row : eval.rows) column.push_back(row[f]);
      Rng rng(derive_seed(seed, "perm-" + std::to_string(f), static_cast<uint64_t>(rep)));
      rng.shuffle(column);
      for (size_t r = 0; r < shuffled.rows.size(); ++r) shuffled.rows[r][f] = column[r];
      drop_sum += base - roc_auc(forest.predict_proba(shuffled), shuffled.labels).auc;
    }
    out.push_back({eval.feature_names[f], drop_sum / reps});
  }
  std::stable_sort(out.begin(), out.end(), [](const FeatureImportance& a, const FeatureImportance& b) {
    if (a.importance != b.importance) return a.importance > b.importance;
    return a.feature < b.feature;
  });
  return out;
}

std::string importance_to_tsv(const std::vector<FeatureImportance>& scores) {
  std::ostringstream out;
  out << "# feature importance = permutation importance (mean AUC drop when the feature column "
         "is shuffled); this is a substitute for SHAP-style attribution, not SHAP values\n";
  out << "feature\timportance\n";
  char buf[64];
  for (const auto& s : scores) {
    std::snprintf(buf, sizeof(buf), "\t%.6f\n", s.importance);
    out << s.feature << buf;
  }
  return out.str();
}

}  // namespace spanev
