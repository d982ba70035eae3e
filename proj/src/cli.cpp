#include "spanev/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "spanev/corpus.hpp"
#include "spanev/prediction.hpp"
#include "spanev/rng.hpp"
#include "spanev/schema.hpp"
#include "spanev/scoring.hpp"
#include "spanev/spanmodel.hpp"
#include "spanev/synth.hpp"

namespace spanev {

namespace {

namespace fs = std::filesystem;

void print_warnings(const std::vector<std::string>& warnings) {
  for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
}

void write_data(const std::string& out_path, const std::string& data) {
  if (out_path.empty()) {
    std::cout << data;
    return;
  }
  std::ofstream out(out_path, std::ios::binary);
  if (!out) throw InputError("cannot write " + out_path);
  out << data;
}

Schema schema_from_flag(const std::string& path) {
  return path.empty() ? default_schema() : load_schema_file(path);
}

struct ScoreArgs {
  std::string gold, pred, mode = "exact", out, format = "tsv";
  bool args_follow_mode = false;
};

int cmd_score(const ScoreArgs& a, bool agreement) {
  std::vector<std::string> warnings;
  Corpus gold = load_corpus_dir(a.gold, &warnings);
  Corpus pred = load_corpus_dir(a.pred, &warnings);
  print_warnings(warnings);

  ScoreOptions options;
  options.args_follow_trigger_mode = a.args_follow_mode;
  TriggerMatchMode mode =
      agreement ? TriggerMatchMode::exact : trigger_match_mode_from_string(a.mode);
  ScoreReport report = agreement ? agreement_report(gold, pred)
                                 : score_documents(gold, pred, mode, options);
  print_warnings(report.warnings);
  if (a.format == "text")
    write_data(a.out, report.to_text());
  else
    write_data(a.out, report.to_tsv());
  return 0;
}

struct TrainArgs {
  std::string corpus, embeddings, schema, config, dev, dev_embeddings, out, metrics_out;
  bool hashed = false;
  bool no_substitution = false;
  std::optional<uint64_t> seed;
  std::optional<int> epochs;
};

int cmd_train(const TrainArgs& a) {
  Schema schema = schema_from_flag(a.schema);
  ModelConfig config = a.config.empty() ? ModelConfig() : ModelConfig::load_file(a.config);
  if (a.seed) config.seed = *a.seed;
  if (a.epochs) config.epochs = *a.epochs;
  if (a.no_substitution) config.substitute_spans = false;

  std::vector<std::string> warnings;
  Corpus corpus = load_corpus_dir(a.corpus, &warnings);

  EmbeddingMap embeddings;
  if (a.hashed) {
    embeddings = hashed_embeddings_for(corpus, config.embedding_dim,
                                       derive_seed(config.seed, "hashed-embeddings"));
  } else if (!a.embeddings.empty()) {
    embeddings = load_embedding_file(a.embeddings);
    if (!embeddings.empty()) {
      int dim = embeddings.begin()->second.dim;
      if (dim != config.embedding_dim) {
        std::cerr << "note: embedding file dimension " << dim
                  << " overrides config embedding_dim " << config.embedding_dim << "\n";
        config.embedding_dim = dim;
      }
    }
  } else {
    throw InputError("train needs --embeddings FILE or --hashed");
  }

  SymptomVocabulary vocab;
  Corpus prepared = prepare_training_corpus(corpus, schema, config, &vocab, &warnings);

  Corpus dev;
  EmbeddingMap dev_embeddings;
  bool have_dev = !a.dev.empty();
  if (have_dev) {
    dev = prepare_eval_corpus(load_corpus_dir(a.dev, &warnings), vocab);
    if (a.hashed)
      dev_embeddings = hashed_embeddings_for(dev, config.embedding_dim,
                                             derive_seed(config.seed, "hashed-embeddings"));
    else if (!a.dev_embeddings.empty())
      dev_embeddings = load_embedding_file(a.dev_embeddings);
    else
      throw InputError("--dev needs --dev-embeddings FILE (or --hashed)");
    if (config.eval_every == 0) config.eval_every = 10;
  }
  print_warnings(warnings);

  SpanEventModel model(schema, config);
  TrainMetrics metrics = model.train(prepared, embeddings, have_dev ? &dev : nullptr,
                                     have_dev ? &dev_embeddings : nullptr, &std::cerr);
  model.save(a.out);
  std::cerr << "saved checkpoint to " << a.out << "\n";

  if (!a.metrics_out.empty()) {
    std::ostringstream ss;
    ss << "epoch\tloss\tdev_trigger_f1\tdev_labeled_f1\n";
    for (const auto& em : metrics.epochs) {
      ss << em.epoch << '\t' << em.loss << '\t';
      if (em.dev_trigger_f1 >= 0.0)
        ss << em.dev_trigger_f1 << '\t' << em.dev_labeled_f1 << '\n';
      else
        ss << "-\t-\n";
    }
    write_data(a.metrics_out, ss.str());
  }
  return 0;
}

struct ExtractArgs {
  std::string corpus, model, embeddings, out;
  bool hashed = false;
  uint64_t seed = 0;
};

int cmd_extract(const ExtractArgs& a) {
  SpanEventModel model = SpanEventModel::load(a.model);
  Corpus corpus = load_text_dir(a.corpus);

  EmbeddingMap embeddings;
  if (a.hashed)
    embeddings = hashed_embeddings_for(corpus, model.config().embedding_dim,
                                       derive_seed(a.seed, "hashed-embeddings"));
  else if (!a.embeddings.empty())
    embeddings = load_embedding_file(a.embeddings);
  else
    throw InputError("extract needs --embeddings FILE or --hashed");
  check_embeddings(embeddings, corpus);

  std::vector<std::string> warnings;
  Corpus predicted;
  for (const auto& doc : corpus)
    predicted.push_back(
        model.extract_document(doc.document, embeddings.at(doc.document.doc_id), &warnings));
  print_warnings(warnings);
  write_corpus_dir(predicted, a.out);
  std::cerr << "wrote " << predicted.size() << " annotated documents to " << a.out << "\n";
  return 0;
}

struct PredictArgs {
  std::string timelines, events, note_type, norm, agg, forest_config, out;
  std::string features = "all";
  int reps = 1000;
  int importance_reps = 20;
  int threads = 1;
  uint64_t seed = 0;
  double window_days = 7.0;
};

int cmd_predict(const PredictArgs& a) {
  std::vector<PatientTimeline> timelines = load_timelines(a.timelines);
  std::vector<std::string> warnings;
  Corpus events = load_corpus_dir(a.events, &warnings);
  print_warnings(warnings);

  std::map<std::string, const AnnotatedDocument*> extracted;
  for (const auto& doc : events) extracted[doc.document.doc_id] = &doc;
  std::map<std::string, const PatientTimeline*> by_patient;
  for (const auto& tl : timelines) by_patient[tl.patient_id] = &tl;

  NormalizationMap norm =
      a.norm.empty() ? NormalizationMap::defaults() : NormalizationMap::load_file(a.norm);
  AggregationSpec agg;
  if (a.agg.empty()) {
    agg.fields["temperature"] = AggregationSpec::Agg::max;
    agg.fields["oxygen_saturation"] = AggregationSpec::Agg::min;
    agg.fields["heart_rate"] = AggregationSpec::Agg::max;
  } else {
    agg = AggregationSpec::load_file(a.agg);
  }

  FeaturizeOptions fopt;
  fopt.window.window_days = a.window_days;
  std::vector<Sample> samples = build_samples(timelines, a.note_type, fopt.window);
  if (samples.empty())
    throw InputError("no samples: no test has an in-window '" + a.note_type + "' note");
  std::cerr << "built " << samples.size() << " samples for note type '" << a.note_type << "'\n";

  std::vector<SampleFeatureVector> features;
  for (const Sample& s : samples)
    features.push_back(featurize(*by_patient.at(s.patient_id), s, extracted, norm, agg, fopt));
  FeatureMatrix matrix = build_feature_matrix(features, feature_set_from_string(a.features));

  HoldoutConfig config;
  config.repetitions = a.reps;
  config.seed = a.seed;
  config.threads = a.threads;
  if (!a.forest_config.empty()) config.forest = ForestConfig::load_file(a.forest_config);

  std::vector<std::string> log;
  HoldoutResult result = repeated_holdout(matrix, config, &log);
  print_warnings(log);
  write_data(a.out + ".metrics.tsv", result.to_tsv());

  // One extra seed-derived split supplies the ROC dump and the permutation
  // importances (the substitute for per-feature attribution plots).
  HoldoutConfig final_cfg = config;
  final_cfg.seed = derive_seed(a.seed, "final-split");
  {
    FeatureMatrix train = matrix, eval;
    std::vector<std::string> patients;
    for (const auto& tl : timelines) patients.push_back(tl.patient_id);
    Rng rng(final_cfg.seed);
    rng.shuffle(patients);
    size_t ntrain = std::max<size_t>(1, static_cast<size_t>(0.8 * patients.size()));
    std::set<std::string> train_pat(patients.begin(), patients.begin() + ntrain);
    FeatureMatrix tr, ev;
    tr.feature_names = ev.feature_names = matrix.feature_names;
    for (int r = 0; r < matrix.sample_count(); ++r) {
      FeatureMatrix& target = train_pat.count(matrix.patients[r]) ? tr : ev;
      target.rows.push_back(matrix.rows[r]);
      target.labels.push_back(matrix.labels[r]);
      target.patients.push_back(matrix.patients[r]);
    }
    auto two_class = [](const std::vector<int>& labels) {
      long pos = std::count(labels.begin(), labels.end(), 1);
      return pos > 0 && pos < static_cast<long>(labels.size());
    };
    if (tr.rows.empty() || ev.rows.empty() || !two_class(tr.labels) || !two_class(ev.labels)) {
      std::cerr << "note: final split degenerate; skipping ROC/importance dumps\n";
    } else {
      impute(tr, ev, &log);
      RandomForest forest =
          RandomForest::fit(tr, final_cfg.forest, derive_seed(final_cfg.seed, "forest"));
      RocCurve curve = roc_auc(forest.predict_proba(ev), ev.labels);
      std::ostringstream roc;
      roc << "# ROC of one seed-derived hold-out split (plotting aid)\n";
      roc << "threshold\ttpr\tfpr\n";
      for (const auto& p : curve.points)
        roc << p.threshold << '\t' << p.tpr << '\t' << p.fpr << '\n';
      write_data(a.out + ".roc.tsv", roc.str());
      write_data(a.out + ".importance.tsv",
                 importance_to_tsv(
                     permutation_importance(forest, ev, a.importance_reps, final_cfg.seed)));
    }
  }
  std::cerr << "auc mean " << result.auc_mean << " sd " << result.auc_sd << " over "
            << result.auc.size() << " repetitions\n";
  return 0;
}

struct ValidateArgs {
  std::string corpus, schema;
};

int cmd_validate(const ValidateArgs& a) {
  Schema schema = schema_from_flag(a.schema);
  std::vector<std::string> warnings;
  Corpus corpus = load_corpus_dir(a.corpus, &warnings);
  print_warnings(warnings);

  long total = 0;
  for (const auto& doc : corpus) {
    for (const auto& ev : doc.events) {
      for (const auto& v : validate_event(ev, schema)) {
        std::cout << doc.document.doc_id << "\t" << ev.trigger.event_type << "\t" << v.code
                  << "\t" << v.message << "\n";
        ++total;
      }
    }
  }
  std::cerr << corpus.size() << " documents checked, " << total << " violations\n";
  return total == 0 ? 0 : 1;
}

struct SynthArgs {
  std::string out, spec;
  uint64_t seed = 0;
  std::optional<int> docs, patients, dim;
  std::vector<std::string> note_types;
};

int cmd_synth(const SynthArgs& a) {
  SynthSpec spec = a.spec.empty() ? SynthSpec() : SynthSpec::load_file(a.spec);
  if (a.docs) spec.documents = *a.docs;
  if (a.patients) spec.patients = *a.patients;
  if (a.dim) spec.embedding_dim = *a.dim;
  if (!a.note_types.empty()) spec.note_types = a.note_types;

  SynthOutput output = make_synthetic_corpus(spec, a.seed);
  write_synth_output(output, a.out);

  long events = 0;
  for (const auto& doc : output.corpus) events += static_cast<long>(doc.events.size());
  std::cerr << "generated " << output.corpus.size() << " documents, " << events << " events, "
            << output.timelines.size() << " patients under " << a.out << "\n";
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"span-based clinical event extraction, scoring, and prediction toolkit"};
  app.require_subcommand(1);

  ScoreArgs score_args;
  CLI::App* score = app.add_subcommand("score", "score predictions against gold standoff");
  score->add_option("--gold", score_args.gold, "gold corpus directory")->required();
  score->add_option("--pred", score_args.pred, "predicted corpus directory")->required();
  score->add_option("--mode", score_args.mode, "trigger match mode: exact or any-overlap");
  score->add_flag("--args-follow-mode", score_args.args_follow_mode,
                  "score argument slots over overlap-matched events too");
  score->add_option("--out", score_args.out, "report path (stdout when omitted)");
  score->add_option("--format", score_args.format, "tsv or text");

  ScoreArgs agree_args;
  CLI::App* agree = app.add_subcommand("agree", "annotator agreement between two corpora");
  agree->add_option("--a", agree_args.gold, "first annotator directory")->required();
  agree->add_option("--b", agree_args.pred, "second annotator directory")->required();
  agree->add_option("--out", agree_args.out, "report path (stdout when omitted)");
  agree->add_option("--format", agree_args.format, "tsv or text");

  ValidateArgs validate_args;
  CLI::App* validate = app.add_subcommand("validate", "parse a corpus and schema-check events");
  validate->add_option("--corpus", validate_args.corpus, "corpus directory")->required();
  validate->add_option("--schema", validate_args.schema, "schema config (default built-in)");

  TrainArgs train_args;
  CLI::App* train = app.add_subcommand("train", "train the span-based extractor");
  train->add_option("--corpus", train_args.corpus, "training corpus directory")->required();
  train->add_option("--embeddings", train_args.embeddings, "embedding file");
  train->add_flag("--hashed", train_args.hashed, "use hashed stand-in embeddings");
  train->add_option("--schema", train_args.schema, "schema config (default built-in)");
  train->add_option("--config", train_args.config, "model config JSON");
  train->add_option("--seed", train_args.seed, "seed (overrides config)");
  train->add_option("--epochs", train_args.epochs, "epochs (overrides config)");
  train->add_flag("--no-substitution", train_args.no_substitution,
                  "disable trigger-span substitution for labeled arguments");
  train->add_option("--dev", train_args.dev, "dev corpus directory for periodic F1");
  train->add_option("--dev-embeddings", train_args.dev_embeddings, "dev embedding file");
  train->add_option("--metrics-out", train_args.metrics_out, "per-epoch metrics TSV");
  train->add_option("--out", train_args.out, "checkpoint path")->required();

  ExtractArgs extract_args;
  CLI::App* extract = app.add_subcommand("extract", "run a trained model over notes");
  extract->add_option("--corpus", extract_args.corpus, "directory of .txt notes")->required();
  extract->add_option("--model", extract_args.model, "checkpoint path")->required();
  extract->add_option("--embeddings", extract_args.embeddings, "embedding file");
  extract->add_flag("--hashed", extract_args.hashed, "use hashed stand-in embeddings");
  extract->add_option("--seed", extract_args.seed, "seed for hashed embeddings");
  extract->add_option("--out", extract_args.out, "output corpus directory")->required();

  PredictArgs predict_args;
  CLI::App* predict = app.add_subcommand("predict", "test-positivity prediction harness");
  predict->add_option("--timelines", predict_args.timelines, "patient timeline JSONL")->required();
  predict->add_option("--events", predict_args.events, "extracted corpus directory")->required();
  predict->add_option("--note-type", predict_args.note_type, "note type to pair with tests")
      ->required();
  predict->add_option("--norm", predict_args.norm, "symptom normalization TSV");
  predict->add_option("--agg", predict_args.agg, "aggregation spec JSON");
  predict->add_option("--features", predict_args.features, "all, structured, or notes");
  predict->add_option("--forest-config", predict_args.forest_config, "forest config JSON");
  predict->add_option("--reps", predict_args.reps, "hold-out repetitions");
  predict->add_option("--importance-reps", predict_args.importance_reps,
                      "permutation importance repetitions");
  predict->add_option("--threads", predict_args.threads, "worker threads");
  predict->add_option("--seed", predict_args.seed, "master seed");
  predict->add_option("--window-days", predict_args.window_days, "note window length");
  predict->add_option("--out", predict_args.out, "output prefix")->required();

  SynthArgs synth_args;
  CLI::App* synth = app.add_subcommand("gen-synth", "generate a synthetic desk-scale corpus");
  synth->add_option("--out", synth_args.out, "output directory")->required();
  synth->add_option("--seed", synth_args.seed, "seed");
  synth->add_option("--spec", synth_args.spec, "synth spec JSON");
  synth->add_option("--docs", synth_args.docs, "document count");
  synth->add_option("--patients", synth_args.patients, "patient count");
  synth->add_option("--dim", synth_args.dim, "embedding dimension");
  synth->add_option("--note-types", synth_args.note_types, "note types to draw from");

  std::vector<const char*> argv;
  argv.push_back("spanev");
  for (const auto& a : args) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*score) return cmd_score(score_args, /*agreement=*/false);
    if (*agree) return cmd_score(agree_args, /*agreement=*/true);
    if (*validate) return cmd_validate(validate_args);
    if (*train) return cmd_train(train_args);
    if (*extract) return cmd_extract(extract_args);
    if (*predict) return cmd_predict(predict_args);
    if (*synth) return cmd_synth(synth_args);
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}

}  // namespace spanev
