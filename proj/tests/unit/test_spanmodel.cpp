#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "spanev/rng.hpp"
#include "spanev/spanmodel.hpp"
#include "spanev/synth.hpp"

using namespace spanev;

namespace {

ModelConfig tiny_config(uint64_t seed) {
  ModelConfig cfg;
  cfg.max_span_width = 2;
  cfg.hidden = 3;
  cfg.span_hidden = 4;
  cfg.role_hidden = 3;
  cfg.embedding_dim = 2;
  cfg.seed = seed;
  cfg.epochs = 0;
  return cfg;
}

Mat random_mat(int rows, int cols, uint64_t seed) {
  Rng rng(seed);
  Mat m(rows, cols);
  for (double& v : m.a) v = rng.uniform(-1.0, 1.0);
  return m;
}

double logsumexp(const std::vector<double>& v) {
  double mx = v[0];
  for (double x : v) mx = std::max(mx, x);
  double s = 0;
  for (double x : v) s += std::exp(x - mx);
  return std::log(s) + mx;
}

}  // namespace

TEST_CASE("enumerate_spans closed form") {
  CHECK(enumerate_spans(5, 3).count() == 12);  // 5+4+3
  CHECK(enumerate_spans(1, 5).count() == 1);
  CHECK(enumerate_spans(0, 3).count() == 0);
  SpanSet s = enumerate_spans(4, 2, 7);
  for (size_t i = 1; i < s.spans.size(); ++i) CHECK(s.spans[i - 1] < s.spans[i]);
  for (const auto& span : s.spans) {
    CHECK(span.sentence_index == 7);
    CHECK(span.width() >= 1);
    CHECK(span.width() <= 2);
  }
  CHECK(s.index_of(TokenSpan{7, 1, 3}) >= 0);
  CHECK(s.index_of(TokenSpan{7, 0, 3}) == -1);  // wider than M
}

TEST_CASE("attention_weights: closed forms and errors") {
  CHECK(attention_weights({2.5}) == std::vector<double>{1.0});

  auto equal = attention_weights({0.7, 0.7});
  CHECK(equal[0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(equal[1] == doctest::Approx(0.5).epsilon(1e-12));

  auto thirds = attention_weights({std::log(2.0), 0.0});
  CHECK(thirds[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(thirds[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));

  CHECK_THROWS(attention_weights({}));
  CHECK_THROWS(attention_weights({1.0, std::numeric_limits<double>::infinity()}));

  // Shift invariance; weights sum to 1.
  auto w1 = attention_weights({0.3, -1.2, 2.0});
  auto w2 = attention_weights({100.3, 98.8, 102.0});
  double sum = 0;
  for (size_t i = 0; i < w1.size(); ++i) {
    CHECK(w1[i] == doctest::Approx(w2[i]).epsilon(1e-12));
    sum += w1[i];
  }
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("prune_top_k: identity, unique max, and full-sort oracle") {
  CHECK(prune_top_k({0.5, 0.1, 0.9}, 5) == std::vector<int>{0, 1, 2});
  CHECK(prune_top_k({0.5, 0.1, 0.9}, 1) == std::vector<int>{2});
  CHECK(prune_top_k({0.5, 0.5, 0.5}, 2) == std::vector<int>{0, 1});  // ties by span order

  Rng rng(99);
  for (int trial = 0; trial < 50; ++trial) {
    int m = 1 + rng.next_int(20);
    int k = 1 + rng.next_int(m + 3);
    std::vector<double> scores(m);
    for (double& s : scores) s = rng.uniform(-1, 1) < 0 ? 0.25 : rng.uniform(-1, 1);
    auto got = prune_top_k(scores, k);

    // Exhaustive sort oracle.
    std::vector<int> order(m);
    for (int i = 0; i < m; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      if (scores[a] != scores[b]) return scores[a] > scores[b];
      return a < b;
    });
    order.resize(std::min(k, m));
    std::sort(order.begin(), order.end());
    CHECK(got == order);
  }
}

TEST_CASE("substitute_trigger_spans") {
  Event ev;
  ev.trigger = {"Symptom", {0, 5, 6}};
  ev.labeled_args.push_back({"Assertion", {0, 0, 2}, "present"});
  ev.span_only_args.push_back({"Anatomy", {0, 3, 4}});
  auto out = substitute_trigger_spans(std::vector<Event>{ev});
  CHECK(out[0].labeled_args[0].span == TokenSpan{0, 5, 6});
  CHECK(out[0].span_only_args[0].span == TokenSpan{0, 3, 4});
  CHECK(substitute_trigger_spans(out) == out);  // idempotent
}

TEST_CASE("LabelSets derived from the default schema") {
  LabelSets labels = LabelSets::from_schema(default_schema());
  CHECK(labels.categories() == 6);
  CHECK(labels.role_classifiers() == 5);
  CHECK(labels.trigger_labels == std::vector<std::string>{"null", "COVID", "Symptom"});
  CHECK(labels.labeled_types ==
        std::vector<std::string>{"Assertion", "Change", "Severity", "Test Status"});
  CHECK(labels.labeled_labels.at("Severity") ==
        std::vector<std::string>{"null", "mild", "moderate", "severe"});
  // Assertion uses the union, which equals the larger Symptom set.
  CHECK(labels.labeled_labels.at("Assertion").size() == 7);
  CHECK(labels.span_only_labels ==
        std::vector<std::string>{"null", "Anatomy", "Characteristics", "Duration", "Frequency"});
  CHECK(labels.category_name(0) == "trigger");
  CHECK(labels.category_name(5) == "span_only");
}

TEST_CASE("zero head parameters: uniform posteriors and closed-form loss") {
  SpanEventModel model(default_schema(), tiny_config(4));
  for (auto& [name, tensor] : model.params().tensors)
    if (name.rfind("enc.", 0) != 0) tensor.fill(0.0);

  int n = 3;
  Mat emb = random_mat(n, 2, 5);
  ad::Tape tape;
  ParamNodes nodes = register_params(tape, model.params());
  auto fwd = model.forward(tape, nodes, tape.leaf(emb), 0);

  // All span scores are exactly zero (uniform posterior over each label set).
  for (int c = 0; c < model.labels().categories(); ++c)
    for (int i = 0; i < fwd.spans.count(); ++i)
      for (double v : tape.val(fwd.scores[c][i]).a) CHECK(v == 0.0);
  // Role scores are (0, 0): pairing probability one half.
  for (const auto& per_trigger : fwd.role)
    for (const auto& per_arg : per_trigger)
      for (auto node : per_arg) {
        CHECK(tape.val(node)(0, 0) == 0.0);
        CHECK(tape.val(node)(0, 1) == 0.0);
      }

  // Summed cross entropy has a closed form: ln|L_c| per span and classifier,
  // ln 2 per pruned role pair.
  SpanEventModel::SentenceTargets targets = model.build_targets({}, fwd.spans, nullptr);
  auto loss = model.loss_on_tape(tape, fwd, targets);
  double expected = 0.0;
  for (int c = 0; c < model.labels().categories(); ++c)
    expected +=
        fwd.spans.count() * std::log(double(model.labels().category_labels(c).size()));
  for (int d = 0; d < model.labels().role_classifiers(); ++d)
    expected += double(fwd.pruned[0].size() * fwd.pruned[d + 1].size()) * std::log(2.0);
  CHECK(tape.val(loss)(0, 0) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("span representations and scores match a direct summation oracle") {
  SpanEventModel model(default_schema(), tiny_config(11));
  int n = 4;
  Mat emb = random_mat(n, 2, 21);

  ad::Tape tape;
  ParamNodes nodes = register_params(tape, model.params());
  auto fwd = model.forward(tape, nodes, tape.leaf(emb), 0);

  // Independent H: run the plain encoder on the same tensors.
  EncoderParams enc;
  enc.config = {2, 3, 1};
  enc.store = model.params();
  Mat h = encode(emb, enc);

  const LabelSets& labels = model.labels();
  for (int c = 0; c < labels.categories(); ++c) {
    const Mat& att = model.params().at("att." + labels.category_name(c));
    std::vector<double> alpha(n, 0.0);
    for (int t = 0; t < n; ++t)
      for (int j = 0; j < h.cols; ++j) alpha[t] += h(t, j) * att(0, j);

    for (int i = 0; i < fwd.spans.count(); ++i) {
      const TokenSpan& span = fwd.spans.spans[i];
      std::vector<double> scores(alpha.begin() + span.start, alpha.begin() + span.end);
      std::vector<double> weights = attention_weights(scores);
      std::vector<double> g(h.cols, 0.0);
      for (int t = span.start; t < span.end; ++t)
        for (int j = 0; j < h.cols; ++j) g[j] += weights[t - span.start] * h(t, j);
      const Mat& got = tape.val(fwd.g[c][i]);
      for (int j = 0; j < h.cols; ++j) CHECK(std::fabs(got(0, j) - g[j]) <= 1e-12);

      // Score oracle: w_out * relu(g * W1^T + b1).
      const Mat& w1 = model.params().at("span." + labels.category_name(c) + ".W1");
      const Mat& b1 = model.params().at("span." + labels.category_name(c) + ".b1");
      const Mat& wout = model.params().at("span." + labels.category_name(c) + ".Wout");
      std::vector<double> hidden(w1.rows, 0.0);
      for (int r = 0; r < w1.rows; ++r) {
        double s = b1(0, r);
        for (int j = 0; j < w1.cols; ++j) s += g[j] * w1(r, j);
        hidden[r] = s > 0 ? s : 0;
      }
      const Mat& phi = tape.val(fwd.scores[c][i]);
      REQUIRE(phi.cols == wout.rows);
      for (int l = 0; l < wout.rows; ++l) {
        double s = 0;
        for (int r = 0; r < wout.cols; ++r) s += wout(l, r) * hidden[r];
        CHECK(std::fabs(phi(0, l) - s) <= 1e-10);
      }
    }
  }

  // Severity classifier emits 4 scores (null + 3 subtypes).
  int severity_cat = 3;  // trigger, Assertion, Change, Severity, ...
  CHECK(labels.category_name(severity_cat) == "Severity");
  CHECK(tape.val(fwd.scores[severity_cat][0]).cols == 4);

  // Role scores have length 2 and match the concat oracle.
  for (int d = 0; d < labels.role_classifiers(); ++d) {
    const Mat& w1 = model.params().at("role." + labels.category_name(d + 1) + ".W1");
    const Mat& b1 = model.params().at("role." + labels.category_name(d + 1) + ".b1");
    const Mat& wout = model.params().at("role." + labels.category_name(d + 1) + ".Wout");
    for (size_t ti = 0; ti < fwd.pruned[0].size(); ++ti) {
      for (size_t aj = 0; aj < fwd.pruned[d + 1].size(); ++aj) {
        const Mat& gt = tape.val(fwd.g[0][fwd.pruned[0][ti]]);
        const Mat& ga = tape.val(fwd.g[d + 1][fwd.pruned[d + 1][aj]]);
        std::vector<double> pair;
        for (int j = 0; j < gt.cols; ++j) pair.push_back(gt(0, j));
        for (int j = 0; j < ga.cols; ++j) pair.push_back(ga(0, j));
        std::vector<double> hidden(w1.rows, 0.0);
        for (int r = 0; r < w1.rows; ++r) {
          double s = b1(0, r);
          for (size_t j = 0; j < pair.size(); ++j) s += pair[j] * w1(r, static_cast<int>(j));
          hidden[r] = s > 0 ? s : 0;
        }
        const Mat& psi = tape.val(fwd.role[d][ti][aj]);
        REQUIRE(psi.cols == 2);
        for (int l = 0; l < 2; ++l) {
          double s = 0;
          for (int r = 0; r < wout.cols; ++r) s += wout(l, r) * hidden[r];
          CHECK(std::fabs(psi(0, l) - s) <= 1e-10);
        }
      }
    }
  }
}

TEST_CASE("training loss equals an explicit summation oracle") {
  SpanEventModel model(default_schema(), tiny_config(31));
  int n = 4;
  Mat emb = random_mat(n, 2, 41);

  // A gold event: Symptom trigger [1,2), Assertion present on the trigger
  // span (post substitution), Anatomy at [2,3).
  Event ev;
  ev.trigger = {"Symptom", {0, 1, 2}};
  ev.labeled_args.push_back({"Assertion", {0, 1, 2}, "present"});
  ev.span_only_args.push_back({"Anatomy", {0, 2, 3}});

  ad::Tape tape;
  ParamNodes nodes = register_params(tape, model.params());
  auto fwd = model.forward(tape, nodes, tape.leaf(emb), 0);
  auto targets = model.build_targets({ev}, fwd.spans, nullptr);
  auto loss = model.loss_on_tape(tape, fwd, targets);

  double expected = 0.0;
  for (int c = 0; c < model.labels().categories(); ++c) {
    for (int i = 0; i < fwd.spans.count(); ++i) {
      const Mat& phi = tape.val(fwd.scores[c][i]);
      std::vector<double> logits(phi.a.begin(), phi.a.end());
      expected += logsumexp(logits) - logits[targets.span_labels[c][i]];
    }
  }
  for (int d = 0; d < model.labels().role_classifiers(); ++d) {
    for (size_t ti = 0; ti < fwd.pruned[0].size(); ++ti) {
      for (size_t aj = 0; aj < fwd.pruned[d + 1].size(); ++aj) {
        const Mat& psi = tape.val(fwd.role[d][ti][aj]);
        int target =
            targets.role_pairs[d].count({fwd.pruned[0][ti], fwd.pruned[d + 1][aj]}) ? 1 : 0;
        expected += logsumexp({psi(0, 0), psi(0, 1)}) - psi(0, target);
      }
    }
  }
  CHECK(std::fabs(tape.val(loss)(0, 0) - expected) <= 1e-10);
}

TEST_CASE("build_targets: labels land on the right spans") {
  SpanEventModel model(default_schema(), tiny_config(51));
  SpanSet spans = enumerate_spans(4, 2, 0);

  Event ev;
  ev.trigger = {"COVID", {0, 0, 1}};
  ev.labeled_args.push_back({"Test Status", {0, 0, 1}, "positive"});
  auto targets = model.build_targets({ev}, spans, nullptr);

  int trig_idx = spans.index_of({0, 0, 1});
  CHECK(targets.span_labels[0][trig_idx] == model.labels().label_index(0, "COVID"));
  int ts_cat = 4;  // trigger, Assertion, Change, Severity, Test Status
  CHECK(model.labels().category_name(ts_cat) == "Test Status");
  CHECK(targets.span_labels[ts_cat][trig_idx] ==
        model.labels().label_index(ts_cat, "positive"));
  CHECK(targets.role_pairs[ts_cat - 1].count({trig_idx, trig_idx}) == 1);

  // A span wider than max_span_width is reported, not silently dropped.
  Event wide;
  wide.trigger = {"Symptom", {0, 0, 4}};
  std::vector<std::string> warnings;
  model.build_targets({wide}, spans, &warnings);
  CHECK_FALSE(warnings.empty());
}

TEST_CASE("decode: no non-null triggers means no events") {
  SpanEventModel model(default_schema(), tiny_config(61));
  Mat emb = random_mat(3, 2, 71);
  for (auto& [name, tensor] : model.params().tensors)
    if (name.rfind("span.", 0) == 0 && name.find("Wout") != std::string::npos) tensor.fill(0.0);
  // Zero output weights make every argmax land on the null label (index 0).
  SentencePrediction pred = model.predict_sentence(emb, 0);
  CHECK(pred.events.empty());
}

TEST_CASE("decode: argument attaches to the higher-scoring trigger only") {
  LabelSets labels = LabelSets::from_schema(default_schema());
  Schema schema = default_schema();

  SentencePrediction pred;
  pred.spans = enumerate_spans(3, 1, 0);  // spans [0,1) [1,2) [2,3)
  int categories = labels.categories();
  pred.span_scores.assign(categories, {});
  pred.pruned.assign(categories, {});
  pred.role_scores.assign(labels.role_classifiers(), {});
  for (int c = 0; c < categories; ++c) {
    int lc = static_cast<int>(labels.category_labels(c).size());
    pred.span_scores[c].assign(3, std::vector<double>(lc, 0.0));
  }
  int symptom = labels.label_index(0, "Symptom");
  pred.span_scores[0][0][symptom] = 5.0;  // trigger at [0,1)
  pred.span_scores[0][1][symptom] = 5.0;  // trigger at [1,2)
  pred.pruned[0] = {0, 1};

  int assertion_cat = 1;
  int present = labels.label_index(assertion_cat, "present");
  pred.span_scores[assertion_cat][2][present] = 4.0;  // Assertion span [2,3)
  pred.pruned[assertion_cat] = {2};

  // Role scores: both triggers positive, the second with the larger margin.
  pred.role_scores[0].resize(2);
  pred.role_scores[0][0] = {{{0.1, 0.3}}};  // margin 0.2
  pred.role_scores[0][1] = {{{0.1, 0.9}}};  // margin 0.8
  for (int d = 1; d < labels.role_classifiers(); ++d)
    pred.role_scores[d].assign(2, {});

  std::vector<std::string> warnings;
  auto events = decode_events(pred, labels, schema, &warnings);

  // Exhaustive assignment oracle over the two candidate triggers.
  double best_margin = -1;
  int best_trigger = -1;
  for (int t = 0; t < 2; ++t) {
    double margin = pred.role_scores[0][t][0][1] - pred.role_scores[0][t][0][0];
    if (margin > 0 && margin > best_margin) {
      best_margin = margin;
      best_trigger = t;
    }
  }
  CHECK(best_trigger == 1);

  // The [1,2) trigger keeps the argument and survives validation; the other
  // Symptom event has no Assertion and is dropped.
  REQUIRE(events.size() == 1);
  CHECK(events[0].trigger.span == TokenSpan{0, 1, 2});
  REQUIRE(events[0].labeled_args.size() == 1);
  CHECK(events[0].labeled_args[0].subtype == "present");
  CHECK_FALSE(warnings.empty());  // the dropped event is reported
}

TEST_CASE("decode: emitted events always satisfy the schema") {
  SpanEventModel model(default_schema(), tiny_config(81));
  Schema schema = default_schema();
  for (uint64_t seed = 0; seed < 10; ++seed) {
    Mat emb = random_mat(5, 2, 1000 + seed);
    SentencePrediction pred = model.predict_sentence(emb, 0);
    for (const Event& ev : pred.events) CHECK(validate_event(ev, schema).empty());
  }
}

TEST_CASE("model gradients match finite differences end to end") {
  SpanEventModel model(default_schema(), tiny_config(91));
  int n = 3;
  Mat emb = random_mat(n, 2, 91);
  Event ev;
  ev.trigger = {"Symptom", {0, 0, 1}};
  ev.labeled_args.push_back({"Assertion", {0, 0, 1}, "present"});

  auto loss_value = [&]() {
    ad::Tape tape;
    ParamNodes nodes = register_params(tape, model.params());
    auto fwd = model.forward(tape, nodes, tape.leaf(emb), 0);
    auto targets = model.build_targets({ev}, fwd.spans, nullptr);
    return tape.val(model.loss_on_tape(tape, fwd, targets))(0, 0);
  };

  ad::Tape tape;
  ParamNodes nodes = register_params(tape, model.params());
  auto fwd = model.forward(tape, nodes, tape.leaf(emb), 0);
  auto targets = model.build_targets({ev}, fwd.spans, nullptr);
  tape.backward(model.loss_on_tape(tape, fwd, targets));

  double step = 1e-5;
  long failures = 0;
  for (auto& [name, tensor] : model.params().tensors) {
    const Mat& analytic = tape.grad(nodes.at(name));
    for (size_t k = 0; k < tensor.size(); ++k) {
      double saved = tensor.a[k];
      tensor.a[k] = saved + step;
      double up = loss_value();
      tensor.a[k] = saved - step;
      double down = loss_value();
      tensor.a[k] = saved;
      double fd = (up - down) / (2 * step);
      double an = analytic.a[k];
      if (std::fabs(fd - an) > 1e-6 + 1e-4 * std::max(std::fabs(fd), std::fabs(an))) ++failures;
    }
  }
  CHECK(failures == 0);
}

namespace {

// A tiny aligned corpus + embeddings for training tests.
std::pair<Corpus, EmbeddingMap> tiny_training_setup(int docs, uint64_t seed) {
  SynthSpec spec;
  spec.documents = docs;
  spec.patients = std::max(2, docs / 2);
  spec.sentences_min = 2;
  spec.sentences_max = 3;
  spec.embedding_dim = 4;
  SynthOutput synth = make_synthetic_corpus(spec, seed);
  return {synth.corpus, synth.embeddings};
}

}  // namespace

TEST_CASE("train: zero learning rate leaves parameters unchanged") {
  auto [corpus, embeddings] = tiny_training_setup(2, 7);
  ModelConfig cfg = tiny_config(3);
  cfg.embedding_dim = 4;
  cfg.epochs = 2;
  cfg.learning_rate = 0.0;
  SpanEventModel model(default_schema(), cfg);
  Corpus prepared = prepare_training_corpus(corpus, default_schema(), cfg);
  ParamStore before = model.params();
  model.train(prepared, embeddings);
  CHECK(model.params().tensors == before.tensors);
}

TEST_CASE("train: deterministic given the seed; loss decreases") {
  auto [corpus, embeddings] = tiny_training_setup(2, 17);
  ModelConfig cfg = tiny_config(5);
  cfg.embedding_dim = 4;
  cfg.hidden = 4;
  cfg.epochs = 12;
  cfg.learning_rate = 0.02;
  Corpus prepared = prepare_training_corpus(corpus, default_schema(), cfg);

  SpanEventModel a(default_schema(), cfg);
  TrainMetrics ma = a.train(prepared, embeddings);
  SpanEventModel b(default_schema(), cfg);
  TrainMetrics mb = b.train(prepared, embeddings);

  CHECK(a.params().tensors == b.params().tensors);
  REQUIRE(ma.epochs.size() == 12);
  CHECK(ma.epochs.back().loss < ma.epochs.front().loss);
  for (size_t e = 0; e < ma.epochs.size(); ++e) CHECK(ma.epochs[e].loss == mb.epochs[e].loss);
}

TEST_CASE("checkpoint: save/load round-trip, byte-identical re-save") {
  namespace fs = std::filesystem;
  SpanEventModel model(default_schema(), tiny_config(23));
  fs::path p1 = fs::temp_directory_path() / "spanev_ckpt1.bin";
  fs::path p2 = fs::temp_directory_path() / "spanev_ckpt2.bin";
  model.save(p1.string());
  SpanEventModel loaded = SpanEventModel::load(p1.string());
  CHECK(loaded.params().tensors == model.params().tensors);
  CHECK(loaded.config() == model.config());
  CHECK(loaded.schema() == model.schema());
  loaded.save(p2.string());

  std::ifstream f1(p1, std::ios::binary), f2(p2, std::ios::binary);
  std::string c1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
  std::string c2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
  CHECK(c1 == c2);
  fs::remove(p1);
  fs::remove(p2);

  CHECK_THROWS_AS(SpanEventModel::load("/nonexistent/model.bin"), InputError);
}

TEST_CASE("prepare_training_corpus applies the full pipeline") {
  Corpus corpus;
  AnnotatedDocument doc;
  doc.document.doc_id = "d";
  doc.document.text = "COVID-19 test positive. Denies cough.";
  doc.document.sentences = tokenize(doc.document.text);
  Event covid;
  covid.trigger = {"COVID", {0, 0, 3}};  // wide trigger, must truncate
  covid.labeled_args.push_back({"Test Status", {0, 2, 3}, "positive"});
  Event symptom;
  symptom.trigger = {"Symptom", {1, 1, 2}};
  symptom.labeled_args.push_back({"Assertion", {1, 0, 1}, "absent"});
  doc.events = {covid, symptom};
  corpus.push_back(doc);

  ModelConfig cfg;
  cfg.symptom_min_count = 1;
  SymptomVocabulary vocab;
  Corpus prepared = prepare_training_corpus(corpus, default_schema(), cfg, &vocab);
  REQUIRE(prepared.size() == 1);
  CHECK(prepared[0].events[0].trigger.span == TokenSpan{0, 0, 1});
  // Substitution moved the labeled arg onto the trigger span.
  CHECK(prepared[0].events[0].labeled_args[0].span == TokenSpan{0, 0, 1});
  CHECK(prepared[0].events[1].labeled_args[0].span == TokenSpan{1, 1, 2});
  CHECK(vocab.contains("cough"));

  // An invalid corpus is refused.
  corpus[0].events[0].labeled_args[0].subtype = "bogus";
  CHECK_THROWS_AS(prepare_training_corpus(corpus, default_schema(), cfg), InputError);
}

TEST_CASE("model config json round trip and unknown keys") {
  ModelConfig cfg;
  cfg.hidden = 24;
  cfg.top_k_fixed = 3;
  cfg.substitute_spans = false;
  ModelConfig back = ModelConfig::from_json(cfg.to_json());
  CHECK(back == cfg);
  CHECK_THROWS_AS(ModelConfig::from_json(R"({"hiden": 3})"), InputError);
  CHECK_THROWS_AS(ModelConfig::from_json(R"({"hidden": 0})"), InputError);
}

TEST_CASE("top_k policy: ratio and fixed override") {
  ModelConfig cfg = tiny_config(1);
  cfg.top_k_ratio = 0.4;
  SpanEventModel model(default_schema(), cfg);
  CHECK(model.top_k(10) == 4);
  CHECK(model.top_k(1) == 1);
  cfg.top_k_fixed = 7;
  SpanEventModel fixed(default_schema(), cfg);
  CHECK(fixed.top_k(10) == 7);
}
