#include "spanev/spanmodel.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "json.hpp"
#include "spanev/rng.hpp"

namespace spanev {

using nlohmann::json;

int SpanSet::index_of(const TokenSpan& s) const {
  if (s.sentence_index != sentence_index) return -1;
  for (size_t i = 0; i < spans.size(); ++i)
    if (spans[i].start == s.start && spans[i].end == s.end) return static_cast<int>(i);
  return -1;
}

SpanSet enumerate_spans(int token_count, int max_width, int sentence_index) {
  SpanSet out;
  out.sentence_index = sentence_index;
  out.max_width = max_width;
  for (int start = 0; start < token_count; ++start)
    for (int width = 1; width <= max_width && start + width <= token_count; ++width)
      out.spans.push_back(TokenSpan{sentence_index, start, start + width});
  std::sort(out.spans.begin(), out.spans.end());
  return out;
}

std::vector<double> attention_weights(const std::vector<double>& scores) {
  if (scores.empty()) throw std::invalid_argument("attention_weights: empty span");
  for (double s : scores)
    if (!std::isfinite(s)) throw std::invalid_argument("attention_weights: non-finite score");
  double mx = *std::max_element(scores.begin(), scores.end());
  std::vector<double> out(scores.size());
  double denom = 0.0;
  for (size_t i = 0; i < scores.size(); ++i) {
    out[i] = std::exp(scores[i] - mx);
    denom += out[i];
  }
  for (double& w : out) w /= denom;
  return out;
}

std::vector<int> prune_top_k(const std::vector<double>& span_scores, int k) {
  std::vector<int> order(span_scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    if (span_scores[a] != span_scores[b]) return span_scores[a] > span_scores[b];
    return a < b;
  });
  if (k < static_cast<int>(order.size())) order.resize(k);
  std::sort(order.begin(), order.end());
  return order;
}

std::vector<Event> substitute_trigger_spans(const std::vector<Event>& events) {
  std::vector<Event> out = events;
  for (Event& ev : out)
    for (LabeledArg& arg : ev.labeled_args) arg.span = ev.trigger.span;
  return out;
}

AnnotatedDocument substitute_trigger_spans(const AnnotatedDocument& doc) {
  AnnotatedDocument out = doc;
  out.events = substitute_trigger_spans(doc.events);
  return out;
}

LabelSets LabelSets::from_schema(const Schema& schema) {
  LabelSets out;
  auto check_name = [](const std::string& name) {
    if (name == kNull)
      throw InputError("the name 'null' is reserved for the model's null label");
  };

  out.trigger_labels.push_back(kNull);
  for (const auto& [event_type, defs] : schema.event_types) {
    check_name(event_type);
    out.trigger_labels.push_back(event_type);
  }

  std::set<std::string> labeled_seen, span_only_seen;
  for (const auto& [event_type, defs] : schema.event_types) {
    for (const auto& def : defs) {
      check_name(def.name);
      if (def.kind == ArgumentDef::Kind::labeled)
        labeled_seen.insert(def.name);
      else
        span_only_seen.insert(def.name);
    }
  }
  out.labeled_types.assign(labeled_seen.begin(), labeled_seen.end());
  out.span_only_types.assign(span_only_seen.begin(), span_only_seen.end());

  for (const auto& type : out.labeled_types) {
    std::vector<std::string> labels{kNull};
    for (const auto& [event_type, defs] : schema.event_types)
      for (const auto& def : defs)
        if (def.name == type && def.kind == ArgumentDef::Kind::labeled)
          for (const auto& subtype : def.subtypes) {
            check_name(subtype);
            if (std::find(labels.begin(), labels.end(), subtype) == labels.end())
              labels.push_back(subtype);
          }
    out.labeled_labels[type] = std::move(labels);
  }

  out.span_only_labels.push_back(kNull);
  for (const auto& type : out.span_only_types) out.span_only_labels.push_back(type);
  return out;
}

std::string LabelSets::category_name(int c) const {
  if (c == 0) return "trigger";
  if (c <= static_cast<int>(labeled_types.size())) return labeled_types[c - 1];
  return "span_only";
}

const std::vector<std::string>& LabelSets::category_labels(int c) const {
  if (c == 0) return trigger_labels;
  if (c <= static_cast<int>(labeled_types.size())) return labeled_labels.at(labeled_types[c - 1]);
  return span_only_labels;
}

int LabelSets::label_index(int c, const std::string& label) const {
  const auto& labels = category_labels(c);
  for (size_t i = 0; i < labels.size(); ++i)
    if (labels[i] == label) return static_cast<int>(i);
  return -1;
}

namespace {

void apply_config_key(ModelConfig& cfg, const std::string& key, const json& value) {
  if (key == "max_span_width")
    cfg.max_span_width = value.get<int>();
  else if (key == "top_k_ratio")
    cfg.top_k_ratio = value.get<double>();
  else if (key == "top_k_fixed")
    cfg.top_k_fixed = value.get<int>();
  else if (key == "hidden")
    cfg.hidden = value.get<int>();
  else if (key == "span_hidden")
    cfg.span_hidden = value.get<int>();
  else if (key == "role_hidden")
    cfg.role_hidden = value.get<int>();
  else if (key == "encoder_layers")
    cfg.encoder_layers = value.get<int>();
  else if (key == "embedding_dim")
    cfg.embedding_dim = value.get<int>();
  else if (key == "learning_rate")
    cfg.learning_rate = value.get<double>();
  else if (key == "momentum")
    cfg.momentum = value.get<double>();
  else if (key == "epochs")
    cfg.epochs = value.get<int>();
  else if (key == "batch_size")
    cfg.batch_size = value.get<int>();
  else if (key == "seed")
    cfg.seed = value.get<uint64_t>();
  else if (key == "symptom_min_count")
    cfg.symptom_min_count = value.get<int>();
  else if (key == "substitute_spans")
    cfg.substitute_spans = value.get<bool>();
  else if (key == "eval_every")
    cfg.eval_every = value.get<int>();
  else
    throw InputError("unknown model config key '" + key + "'");
}

}  // namespace

ModelConfig ModelConfig::from_json(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::exception& e) {
    throw InputError(std::string("model config is not valid JSON: ") + e.what());
  }
  if (!root.is_object()) throw InputError("model config must be a JSON object");
  ModelConfig cfg;
  try {
    for (const auto& [key, value] : root.items()) apply_config_key(cfg, key, value);
  } catch (const json::exception& e) {
    throw InputError(std::string("model config: ") + e.what());
  }
  if (cfg.max_span_width < 1 || cfg.hidden < 1 || cfg.span_hidden < 1 || cfg.role_hidden < 1 ||
      cfg.encoder_layers < 1 || cfg.embedding_dim < 1 || cfg.epochs < 0 || cfg.batch_size < 1 ||
      cfg.top_k_ratio <= 0.0 || cfg.top_k_fixed < 0)
    throw InputError("model config: dimensions and counts must be positive");
  return cfg;
}

ModelConfig ModelConfig::load_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read model config " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

std::string ModelConfig::to_json() const {
  json root;
  root["max_span_width"] = max_span_width;
  root["top_k_ratio"] = top_k_ratio;
  root["top_k_fixed"] = top_k_fixed;
  root["hidden"] = hidden;
  root["span_hidden"] = span_hidden;
  root["role_hidden"] = role_hidden;
  root["encoder_layers"] = encoder_layers;
  root["embedding_dim"] = embedding_dim;
  root["learning_rate"] = learning_rate;
  root["momentum"] = momentum;
  root["epochs"] = epochs;
  root["batch_size"] = batch_size;
  root["seed"] = seed;
  root["symptom_min_count"] = symptom_min_count;
  root["substitute_spans"] = substitute_spans;
  root["eval_every"] = eval_every;
  return root.dump(2) + "\n";
}

SpanEventModel::SpanEventModel(Schema schema, ModelConfig config)
    : schema_(std::move(schema)), config_(config), labels_(LabelSets::from_schema(schema_)) {
  EncoderConfig enc{config_.embedding_dim, config_.hidden, config_.encoder_layers};
  add_encoder_params(params_, enc, config_.seed);

  int width = 2 * config_.hidden;
  double att_range = 1.0 / std::sqrt(static_cast<double>(width));
  double span_range = 1.0 / std::sqrt(static_cast<double>(config_.span_hidden));
  double role_range = 1.0 / std::sqrt(static_cast<double>(config_.role_hidden));

  for (int c = 0; c < labels_.categories(); ++c) {
    std::string name = labels_.category_name(c);
    int label_count = static_cast<int>(labels_.category_labels(c).size());
    params_.add("att." + name, 1, width, att_range, config_.seed);
    params_.add("span." + name + ".W1", config_.span_hidden, width, att_range, config_.seed);
    params_.add("span." + name + ".b1", 1, config_.span_hidden, span_range, config_.seed);
    params_.add("span." + name + ".Wout", label_count, config_.span_hidden, span_range,
                config_.seed);
  }
  for (int d = 0; d < labels_.role_classifiers(); ++d) {
    std::string name = labels_.category_name(d + 1);
    double in_range = 1.0 / std::sqrt(static_cast<double>(2 * width));
    params_.add("role." + name + ".W1", config_.role_hidden, 2 * width, in_range, config_.seed);
    params_.add("role." + name + ".b1", 1, config_.role_hidden, role_range, config_.seed);
    params_.add("role." + name + ".Wout", 2, config_.role_hidden, role_range, config_.seed);
  }
}

int SpanEventModel::top_k(int token_count) const {
  if (config_.top_k_fixed > 0) return config_.top_k_fixed;
  int k = static_cast<int>(std::ceil(config_.top_k_ratio * token_count));
  return std::max(1, k);
}

int SpanEventModel::category_of_labeled(const std::string& arg_type) const {
  for (size_t i = 0; i < labels_.labeled_types.size(); ++i)
    if (labels_.labeled_types[i] == arg_type) return static_cast<int>(i) + 1;
  return -1;
}

SpanEventModel::SentenceForward SpanEventModel::forward(ad::Tape& tape, const ParamNodes& nodes,
                                                        ad::Tape::NodeId embeddings,
                                                        int sentence_index) const {
  SentenceForward fwd;
  int n = tape.val(embeddings).rows;
  EncoderConfig enc{config_.embedding_dim, config_.hidden, config_.encoder_layers};
  ad::Tape::NodeId h = encode_on_tape(tape, nodes, enc, embeddings);

  fwd.spans = enumerate_spans(n, config_.max_span_width, sentence_index);
  int m = fwd.spans.count();
  int categories = labels_.categories();
  int k = top_k(n);

  fwd.g.resize(categories);
  fwd.scores.resize(categories);
  fwd.pruned.resize(categories);
  for (int c = 0; c < categories; ++c) {
    std::string name = labels_.category_name(c);
    ad::Tape::NodeId alpha = tape.matmul_nt(h, nodes.at("att." + name));
    ad::Tape::NodeId w1 = nodes.at("span." + name + ".W1");
    ad::Tape::NodeId b1 = nodes.at("span." + name + ".b1");
    ad::Tape::NodeId wout = nodes.at("span." + name + ".Wout");
    fwd.g[c].resize(m);
    fwd.scores[c].resize(m);
    std::vector<double> prune_score(m);
    for (int i = 0; i < m; ++i) {
      const TokenSpan& span = fwd.spans.spans[i];
      fwd.g[c][i] = tape.span_attention(h, alpha, span.start, span.end);
      ad::Tape::NodeId hidden = tape.relu(tape.add(tape.matmul_nt(fwd.g[c][i], w1), b1));
      fwd.scores[c][i] = tape.matmul_nt(hidden, wout);
      const Mat& logits = tape.val(fwd.scores[c][i]);
      double best = -1e300;
      for (int l = 1; l < logits.cols; ++l) best = std::max(best, logits(0, l));
      prune_score[i] = best;
    }
    fwd.pruned[c] = prune_top_k(prune_score, k);
  }

  fwd.role.resize(labels_.role_classifiers());
  for (int d = 0; d < labels_.role_classifiers(); ++d) {
    int cat = d + 1;
    std::string name = labels_.category_name(cat);
    ad::Tape::NodeId w1 = nodes.at("role." + name + ".W1");
    ad::Tape::NodeId b1 = nodes.at("role." + name + ".b1");
    ad::Tape::NodeId wout = nodes.at("role." + name + ".Wout");
    fwd.role[d].resize(fwd.pruned[0].size());
    for (size_t ti = 0; ti < fwd.pruned[0].size(); ++ti) {
      fwd.role[d][ti].resize(fwd.pruned[cat].size());
      for (size_t aj = 0; aj < fwd.pruned[cat].size(); ++aj) {
        ad::Tape::NodeId pair =
            tape.concat_cols(fwd.g[0][fwd.pruned[0][ti]], fwd.g[cat][fwd.pruned[cat][aj]]);
        ad::Tape::NodeId hidden = tape.relu(tape.add(tape.matmul_nt(pair, w1), b1));
        fwd.role[d][ti][aj] = tape.matmul_nt(hidden, wout);
      }
    }
  }
  return fwd;
}

SpanEventModel::SentenceTargets SpanEventModel::build_targets(
    const std::vector<Event>& events, const SpanSet& spans,
    std::vector<std::string>* warnings) const {
  SentenceTargets targets;
  int categories = labels_.categories();
  targets.span_labels.assign(categories, std::vector<int>(spans.count(), 0));
  targets.role_pairs.resize(labels_.role_classifiers());

  auto warn = [&](const std::string& msg) {
    if (warnings) warnings->push_back(msg);
  };

  auto set_label = [&](int c, int span_idx, int label) {
    int& slot = targets.span_labels[c][span_idx];
    if (slot != 0 && slot != label) {
      warn("conflicting gold labels for one span in classifier '" + labels_.category_name(c) +
           "'; keeping the first");
      return;
    }
    slot = label;
  };

  for (const Event& ev : events) {
    int trig_label = labels_.label_index(0, ev.trigger.event_type);
    if (trig_label < 0) {
      warn("event type '" + ev.trigger.event_type + "' is outside the schema; skipped");
      continue;
    }
    int ti = spans.index_of(ev.trigger.span);
    if (ti < 0)
      warn("trigger span wider than max_span_width; the event cannot be represented");
    else
      set_label(0, ti, trig_label);

    for (const LabeledArg& arg : ev.labeled_args) {
      int c = category_of_labeled(arg.arg_type);
      if (c < 0) {
        warn("labeled argument type '" + arg.arg_type + "' is outside the schema; skipped");
        continue;
      }
      int label = labels_.label_index(c, arg.subtype);
      if (label < 0) {
        warn("subtype '" + arg.subtype + "' is outside the '" + arg.arg_type +
             "' label set; skipped");
        continue;
      }
      int si = spans.index_of(arg.span);
      if (si < 0) {
        warn("argument span wider than max_span_width; skipped");
        continue;
      }
      set_label(c, si, label);
      if (ti >= 0) targets.role_pairs[c - 1].insert({ti, si});
    }

    for (const SpanOnlyArg& arg : ev.span_only_args) {
      int c = categories - 1;
      int label = labels_.label_index(c, arg.arg_type);
      if (label < 0) {
        warn("span-only argument type '" + arg.arg_type + "' is outside the schema; skipped");
        continue;
      }
      int si = spans.index_of(arg.span);
      if (si < 0) {
        warn("argument span wider than max_span_width; skipped");
        continue;
      }
      set_label(c, si, label);
      if (ti >= 0) targets.role_pairs[c - 1].insert({ti, si});
    }
  }
  return targets;
}

ad::Tape::NodeId SpanEventModel::loss_on_tape(ad::Tape& tape, const SentenceForward& fwd,
                                              const SentenceTargets& targets) const {
  std::vector<ad::Tape::NodeId> terms;
  for (int c = 0; c < labels_.categories(); ++c)
    for (int i = 0; i < fwd.spans.count(); ++i)
      terms.push_back(tape.cross_entropy_logits(fwd.scores[c][i], targets.span_labels[c][i]));

  for (int d = 0; d < labels_.role_classifiers(); ++d) {
    int cat = d + 1;
    for (size_t ti = 0; ti < fwd.pruned[0].size(); ++ti) {
      for (size_t aj = 0; aj < fwd.pruned[cat].size(); ++aj) {
        bool gold = targets.role_pairs[d].count(
                        {fwd.pruned[0][ti], fwd.pruned[cat][aj]}) > 0;
        terms.push_back(tape.cross_entropy_logits(fwd.role[d][ti][aj], gold ? 1 : 0));
      }
    }
  }
  return tape.add_all(terms);
}

SentencePrediction SpanEventModel::predict_sentence(const Mat& embeddings, int sentence_index,
                                                    std::vector<std::string>* warnings) const {
  SentencePrediction pred;
  pred.spans.sentence_index = sentence_index;
  pred.spans.max_width = config_.max_span_width;
  if (embeddings.rows == 0) return pred;
  if (!embeddings.all_finite()) throw InputError("embeddings contain non-finite values");
  if (embeddings.cols != config_.embedding_dim)
    throw InputError("embedding dimension " + std::to_string(embeddings.cols) +
                     " does not match model embedding_dim " +
                     std::to_string(config_.embedding_dim));

  ad::Tape tape;
  ParamNodes nodes = register_params(tape, params_);
  ad::Tape::NodeId emb = tape.leaf(embeddings);
  SentenceForward fwd = forward(tape, nodes, emb, sentence_index);

  pred.spans = fwd.spans;
  pred.pruned = fwd.pruned;
  pred.span_scores.resize(labels_.categories());
  for (int c = 0; c < labels_.categories(); ++c) {
    pred.span_scores[c].resize(fwd.spans.count());
    for (int i = 0; i < fwd.spans.count(); ++i) {
      const Mat& logits = tape.val(fwd.scores[c][i]);
      pred.span_scores[c][i].assign(logits.a.begin(), logits.a.end());
    }
  }
  pred.role_scores.resize(labels_.role_classifiers());
  for (int d = 0; d < labels_.role_classifiers(); ++d) {
    pred.role_scores[d].resize(fwd.role[d].size());
    for (size_t ti = 0; ti < fwd.role[d].size(); ++ti) {
      pred.role_scores[d][ti].resize(fwd.role[d][ti].size());
      for (size_t aj = 0; aj < fwd.role[d][ti].size(); ++aj) {
        const Mat& v = tape.val(fwd.role[d][ti][aj]);
        pred.role_scores[d][ti][aj] = {v(0, 0), v(0, 1)};
      }
    }
  }
  pred.events = decode_events(pred, labels_, schema_, warnings);
  return pred;
}

std::vector<Event> decode_events(const SentencePrediction& prediction, const LabelSets& labels,
                                 const Schema& schema, std::vector<std::string>* warnings) {
  auto warn = [&](const std::string& msg) {
    if (warnings) warnings->push_back(msg);
  };
  if (prediction.span_scores.empty()) return {};

  auto argmax = [](const std::vector<double>& v) {
    int best = 0;
    for (size_t i = 1; i < v.size(); ++i)
      if (v[i] > v[best]) best = static_cast<int>(i);
    return best;
  };

  // Every span with a non-null trigger label becomes a candidate event.
  std::vector<Event> events;
  std::map<int, size_t> event_by_span;  // trigger span index -> position in events
  for (int i = 0; i < prediction.spans.count(); ++i) {
    int label = argmax(prediction.span_scores[0][i]);
    if (label == 0) continue;
    Event ev;
    ev.trigger = Trigger{labels.trigger_labels[label], prediction.spans.spans[i]};
    event_by_span[i] = events.size();
    events.push_back(std::move(ev));
  }

  // Pruned-list position of each trigger span that decoded non-null.
  std::vector<std::pair<size_t, int>> trigger_slots;  // (pruned position, span index)
  for (size_t ti = 0; ti < prediction.pruned[0].size(); ++ti) {
    int span_idx = prediction.pruned[0][ti];
    if (event_by_span.count(span_idx)) trigger_slots.emplace_back(ti, span_idx);
  }

  int categories = static_cast<int>(prediction.span_scores.size());
  for (int c = 1; c < categories; ++c) {
    bool span_only = c == categories - 1;
    for (size_t aj = 0; aj < prediction.pruned[c].size(); ++aj) {
      int span_idx = prediction.pruned[c][aj];
      int label = argmax(prediction.span_scores[c][span_idx]);
      if (label == 0) continue;

      // Attach to the positively-scored trigger with the largest margin.
      int best_span = -1;
      double best_margin = 0.0;
      for (const auto& [ti, trig_span] : trigger_slots) {
        const auto& score = prediction.role_scores[c - 1][ti][aj];
        double margin = score[1] - score[0];
        if (margin > 0.0 && (best_span < 0 || margin > best_margin)) {
          best_span = trig_span;
          best_margin = margin;
        }
      }
      if (best_span < 0) continue;

      Event& ev = events[event_by_span[best_span]];
      const std::string& event_type = ev.trigger.event_type;
      if (span_only) {
        const std::string& arg_type = labels.span_only_labels[label];
        const ArgumentDef* def = schema.find_arg(event_type, arg_type);
        if (!def || def->kind != ArgumentDef::Kind::span_only) {
          warn("dropping '" + arg_type + "' argument incompatible with event type '" +
               event_type + "'");
          continue;
        }
        ev.span_only_args.push_back(SpanOnlyArg{arg_type, prediction.spans.spans[span_idx]});
      } else {
        const std::string& arg_type = labels.labeled_types[c - 1];
        const std::string& subtype = labels.labeled_labels.at(arg_type)[label];
        const ArgumentDef* def = schema.find_arg(event_type, arg_type);
        if (!def || def->kind != ArgumentDef::Kind::labeled ||
            std::find(def->subtypes.begin(), def->subtypes.end(), subtype) ==
                def->subtypes.end()) {
          warn("dropping '" + arg_type + "=" + subtype +
               "' argument incompatible with event type '" + event_type + "'");
          continue;
        }
        ev.labeled_args.push_back(
            LabeledArg{arg_type, prediction.spans.spans[span_idx], subtype});
      }
    }
  }

  std::vector<Event> valid;
  for (const Event& ev : events) {
    std::vector<Violation> violations = validate_event(ev, schema);
    if (violations.empty()) {
      valid.push_back(ev);
    } else {
      warn("dropping decoded " + ev.trigger.event_type + " event: " + violations[0].message);
    }
  }
  return valid;
}

AnnotatedDocument SpanEventModel::extract_document(const Document& document,
                                                   const EmbeddingTable& table,
                                                   std::vector<std::string>* warnings) const {
  if (table.sentences.size() != document.sentences.size())
    throw InputError("document " + document.doc_id + ": embedding sentence count mismatch");
  AnnotatedDocument out;
  out.document = document;
  for (size_t s = 0; s < document.sentences.size(); ++s) {
    if (document.sentences[s].empty()) continue;
    SentencePrediction pred =
        predict_sentence(table.sentences[s], static_cast<int>(s), warnings);
    out.events.insert(out.events.end(), pred.events.begin(), pred.events.end());
  }
  return out;
}

TrainMetrics SpanEventModel::train(const Corpus& corpus, const EmbeddingMap& embeddings,
                                   const Corpus* dev, const EmbeddingMap* dev_embeddings,
                                   std::ostream* log) {
  check_embeddings(embeddings, corpus);
  if (dev && dev_embeddings) check_embeddings(*dev_embeddings, *dev);

  struct Unit {
    int doc = 0;
    int sentence = 0;
    const Mat* emb = nullptr;
    SentenceTargets targets;
    SpanSet spans;
  };
  std::vector<Unit> units;
  std::vector<std::string> target_warnings;
  for (size_t d = 0; d < corpus.size(); ++d) {
    const AnnotatedDocument& doc = corpus[d];
    const EmbeddingTable& table = embeddings.at(doc.document.doc_id);
    for (size_t s = 0; s < doc.document.sentences.size(); ++s) {
      if (doc.document.sentences[s].empty()) continue;
      Unit unit;
      unit.doc = static_cast<int>(d);
      unit.sentence = static_cast<int>(s);
      unit.emb = &table.sentences[s];
      unit.spans = enumerate_spans(static_cast<int>(doc.document.sentences[s].size()),
                                   config_.max_span_width, static_cast<int>(s));
      std::vector<Event> sentence_events;
      for (const Event& ev : doc.events)
        if (ev.trigger.span.sentence_index == static_cast<int>(s)) sentence_events.push_back(ev);
      unit.targets = build_targets(sentence_events, unit.spans, &target_warnings);
      units.push_back(std::move(unit));
    }
  }
  if (log)
    for (const auto& w : target_warnings) *log << "warning: " << w << "\n";

  std::map<std::string, Mat> velocity;
  if (config_.momentum != 0.0)
    for (const auto& [name, tensor] : params_.tensors)
      velocity[name] = Mat(tensor.rows, tensor.cols);

  TrainMetrics metrics;
  ad::Tape tape;
  std::vector<int> order(units.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 1; epoch <= config_.epochs; ++epoch) {
    Rng shuffle_rng(derive_seed(config_.seed, "epoch-order", static_cast<uint64_t>(epoch)));
    shuffle_rng.shuffle(order);

    double epoch_loss = 0.0;
    size_t pos = 0;
    while (pos < order.size()) {
      size_t batch_end = std::min(order.size(), pos + static_cast<size_t>(config_.batch_size));
      std::map<std::string, Mat> grad_acc;
      for (const auto& [name, tensor] : params_.tensors)
        grad_acc[name] = Mat(tensor.rows, tensor.cols);

      int batch_count = static_cast<int>(batch_end - pos);
      for (size_t b = pos; b < batch_end; ++b) {
        const Unit& unit = units[order[b]];
        tape.reset();
        ParamNodes nodes = register_params(tape, params_);
        ad::Tape::NodeId emb = tape.leaf(*unit.emb);
        SentenceForward fwd = forward(tape, nodes, emb, unit.sentence);
        ad::Tape::NodeId loss = loss_on_tape(tape, fwd, unit.targets);
        double value = tape.val(loss)(0, 0);
        if (!std::isfinite(value))
          throw std::runtime_error("non-finite training loss at epoch " + std::to_string(epoch) +
                                   ", document " + corpus[unit.doc].document.doc_id +
                                   ", sentence " + std::to_string(unit.sentence));
        epoch_loss += value;
        tape.backward(loss);
        for (const auto& [name, node] : nodes) {
          const Mat& g = tape.grad(node);
          Mat& acc = grad_acc[name];
          for (size_t k = 0; k < acc.size(); ++k) acc.a[k] += g.a[k];
        }
      }

      for (auto& [name, tensor] : params_.tensors) {
        const Mat& g = grad_acc[name];
        double scale = config_.learning_rate / batch_count;
        if (config_.momentum != 0.0) {
          Mat& v = velocity[name];
          for (size_t k = 0; k < tensor.size(); ++k) {
            v.a[k] = config_.momentum * v.a[k] - scale * g.a[k];
            tensor.a[k] += v.a[k];
          }
        } else {
          for (size_t k = 0; k < tensor.size(); ++k) tensor.a[k] -= scale * g.a[k];
        }
      }
      pos = batch_end;
    }

    EpochMetrics em;
    em.epoch = epoch;
    em.loss = epoch_loss;

    if (dev && dev_embeddings && config_.eval_every > 0 && epoch % config_.eval_every == 0) {
      Corpus predicted;
      for (const auto& doc : *dev)
        predicted.push_back(
            extract_document(doc.document, dev_embeddings->at(doc.document.doc_id)));
      ScoreReport report = score_documents(*dev, predicted, TriggerMatchMode::exact);
      SlotCounts trig;
      for (const auto& [key, counts] : report.slots)
        if (key.kind == SlotKey::Kind::trigger) trig.add(counts);
      SlotCounts lab = report.labeled_micro_counts();
      em.dev_trigger_f1 = prf(trig.tp, trig.fp, trig.fn).f1;
      em.dev_labeled_f1 = prf(lab.tp, lab.fp, lab.fn).f1;
    }

    if (log) {
      *log << "epoch " << epoch << " loss " << epoch_loss;
      if (em.dev_trigger_f1 >= 0.0)
        *log << " dev_trigger_f1 " << em.dev_trigger_f1 << " dev_labeled_f1 "
             << em.dev_labeled_f1;
      *log << "\n";
    }
    metrics.epochs.push_back(em);
  }
  return metrics;
}

namespace {

void write_u32(std::ostream& out, uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  out.write(reinterpret_cast<const char*>(b), 4);
}

void write_u64(std::ostream& out, uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  out.write(reinterpret_cast<const char*>(b), 8);
}

void write_string(std::ostream& out, const std::string& s) {
  write_u64(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

uint32_t read_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw InputError("checkpoint truncated");
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(b[i]) << (8 * i);
  return v;
}

uint64_t read_u64(std::istream& in) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  if (!in) throw InputError("checkpoint truncated");
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(b[i]) << (8 * i);
  return v;
}

std::string read_string(std::istream& in) {
  uint64_t len = read_u64(in);
  if (len > (1ULL << 32)) throw InputError("checkpoint corrupt: absurd string length");
  std::string s(len, '\0');
  in.read(s.data(), static_cast<std::streamsize>(len));
  if (!in) throw InputError("checkpoint truncated");
  return s;
}

const char kMagic[4] = {'S', 'E', 'V', 'C'};
constexpr uint32_t kVersion = 1;

std::string schema_to_json(const Schema& schema) {
  json root;
  json types = json::object();
  for (const auto& [event_type, defs] : schema.event_types) {
    json args = json::array();
    for (const auto& def : defs) {
      json entry;
      entry["name"] = def.name;
      entry["kind"] = def.kind == ArgumentDef::Kind::labeled ? "labeled" : "span_only";
      if (!def.subtypes.empty()) entry["subtypes"] = def.subtypes;
      if (def.required_group) entry["required_group"] = *def.required_group;
      args.push_back(entry);
    }
    types[event_type] = args;
  }
  root["event_types"] = types;
  return root.dump(2) + "\n";
}

}  // namespace

void SpanEventModel::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write checkpoint " + path);
  out.write(kMagic, 4);
  write_u32(out, kVersion);
  write_string(out, schema_to_json(schema_));
  write_string(out, config_.to_json());
  write_u64(out, params_.tensors.size());
  for (const auto& [name, tensor] : params_.tensors) {
    write_string(out, name);
    write_u64(out, static_cast<uint64_t>(tensor.rows));
    write_u64(out, static_cast<uint64_t>(tensor.cols));
    for (double v : tensor.a) {
      uint64_t bits;
      std::memcpy(&bits, &v, 8);
      write_u64(out, bits);
    }
  }
  if (!out) throw InputError("failed writing checkpoint " + path);
}

SpanEventModel SpanEventModel::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read checkpoint " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0)
    throw InputError(path + " is not a model checkpoint");
  uint32_t version = read_u32(in);
  if (version != kVersion)
    throw InputError("unsupported checkpoint version " + std::to_string(version));

  Schema schema = load_schema(read_string(in));
  ModelConfig config = ModelConfig::from_json(read_string(in));
  SpanEventModel model(schema, config);

  uint64_t count = read_u64(in);
  if (count != model.params_.tensors.size())
    throw InputError("checkpoint tensor count does not match the configuration");
  for (uint64_t i = 0; i < count; ++i) {
    std::string name = read_string(in);
    int rows = static_cast<int>(read_u64(in));
    int cols = static_cast<int>(read_u64(in));
    if (!model.params_.has(name))
      throw InputError("checkpoint holds unexpected tensor '" + name + "'");
    Mat& tensor = model.params_.at(name);
    if (tensor.rows != rows || tensor.cols != cols)
      throw InputError("checkpoint tensor '" + name + "' has the wrong shape");
    for (double& v : tensor.a) {
      uint64_t bits = read_u64(in);
      std::memcpy(&v, &bits, 8);
    }
  }
  return model;
}

Corpus prepare_training_corpus(const Corpus& corpus, const Schema& schema,
                               const ModelConfig& config, SymptomVocabulary* vocab_out,
                               std::vector<std::string>* warnings) {
  std::vector<std::string> problems;
  for (const auto& doc : corpus)
    for (const auto& ev : doc.events)
      for (const auto& v : validate_event(ev, schema))
        problems.push_back(doc.document.doc_id + ": " + v.message);
  if (!problems.empty()) {
    std::string msg = "corpus fails schema validation (" + std::to_string(problems.size()) +
                      " violations); first: " + problems[0];
    throw InputError(msg);
  }

  Corpus out;
  out.reserve(corpus.size());
  for (const auto& doc : corpus) out.push_back(truncate_covid_triggers(doc));

  SymptomVocabulary vocab = build_symptom_vocabulary(out, config.symptom_min_count);
  if (warnings)
    warnings->push_back("symptom vocabulary holds " + std::to_string(vocab.entries.size()) +
                        " entries at min_count " + std::to_string(config.symptom_min_count));
  for (auto& doc : out) doc = filter_symptoms(doc, vocab);
  if (config.substitute_spans)
    for (auto& doc : out) doc = substitute_trigger_spans(doc);
  if (vocab_out) *vocab_out = std::move(vocab);
  return out;
}

Corpus prepare_eval_corpus(const Corpus& corpus, const SymptomVocabulary& vocab) {
  Corpus out;
  out.reserve(corpus.size());
  for (const auto& doc : corpus)
    out.push_back(filter_symptoms(truncate_covid_triggers(doc), vocab));
  return out;
}

}  // namespace spanev
