#include "spanev/scoring.hpp"

#include <algorithm>
#include <cstdio>
#include <set>
#include <sstream>

namespace spanev {

TriggerMatchMode trigger_match_mode_from_string(const std::string& s) {
  if (s == "exact") return TriggerMatchMode::exact;
  if (s == "any-overlap" || s == "any_overlap") return TriggerMatchMode::any_overlap;
  throw InputError("unknown trigger match mode '" + s + "' (use exact or any-overlap)");
}

Prf prf(long tp, long fp, long fn) {
  Prf out;
  out.precision = (tp + fp) > 0 ? static_cast<double>(tp) / (tp + fp) : 0.0;
  out.recall = (tp + fn) > 0 ? static_cast<double>(tp) / (tp + fn) : 0.0;
  out.f1 = (out.precision + out.recall) > 0.0
               ? 2.0 * out.precision * out.recall / (out.precision + out.recall)
               : 0.0;
  return out;
}

std::string SlotKey::name() const {
  switch (kind) {
    case Kind::trigger:
      return event_type + "/trigger";
    case Kind::labeled:
      return event_type + "/" + arg_type + "/" + subtype;
    case Kind::span_only:
      return event_type + "/" + arg_type;
  }
  return event_type;
}

bool triggers_equivalent(const Trigger& a, const Trigger& b, TriggerMatchMode mode) {
  if (a.event_type != b.event_type) return false;
  if (a.span.sentence_index != b.span.sentence_index) return false;
  if (mode == TriggerMatchMode::exact)
    return a.span.start == b.span.start && a.span.end == b.span.end;
  return a.span.start < b.span.end && b.span.start < a.span.end;
}

std::vector<Event> merge_duplicate_triggers(const std::vector<Event>& events,
                                            std::vector<std::string>* warnings,
                                            const std::string& where) {
  std::vector<Event> out;
  std::map<std::tuple<std::string, int, int, int>, size_t> index;
  for (const Event& ev : events) {
    auto key = std::make_tuple(ev.trigger.event_type, ev.trigger.span.sentence_index,
                               ev.trigger.span.start, ev.trigger.span.end);
    auto it = index.find(key);
    if (it == index.end()) {
      index[key] = out.size();
      out.push_back(ev);
    } else {
      Event& target = out[it->second];
      target.labeled_args.insert(target.labeled_args.end(), ev.labeled_args.begin(),
                                 ev.labeled_args.end());
      target.span_only_args.insert(target.span_only_args.end(), ev.span_only_args.begin(),
                                   ev.span_only_args.end());
      if (warnings)
        warnings->push_back((where.empty() ? std::string() : where + ": ") +
                            "duplicate " + ev.trigger.event_type +
                            " trigger merged before alignment");
    }
  }
  return out;
}

namespace {

int overlap_size(const TokenSpan& a, const TokenSpan& b) {
  return std::max(0, std::min(a.end, b.end) - std::max(a.start, b.start));
}

}  // namespace

Alignment align_events(const std::vector<Event>& gold, const std::vector<Event>& pred,
                       TriggerMatchMode mode) {
  Alignment out;
  std::vector<bool> gold_used(gold.size(), false), pred_used(pred.size(), false);

  if (mode == TriggerMatchMode::exact) {
    for (size_t g = 0; g < gold.size(); ++g) {
      for (size_t p = 0; p < pred.size(); ++p) {
        if (pred_used[p]) continue;
        if (triggers_equivalent(gold[g].trigger, pred[p].trigger, mode)) {
          out.pairs.emplace_back(static_cast<int>(g), static_cast<int>(p));
          gold_used[g] = pred_used[p] = true;
          break;
        }
      }
    }
  } else {
    struct Cand {
      int overlap, g, p;
    };
    std::vector<Cand> cands;
    for (size_t g = 0; g < gold.size(); ++g)
      for (size_t p = 0; p < pred.size(); ++p)
        if (triggers_equivalent(gold[g].trigger, pred[p].trigger, mode))
          cands.push_back({overlap_size(gold[g].trigger.span, pred[p].trigger.span),
                           static_cast<int>(g), static_cast<int>(p)});
    std::stable_sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
      if (a.overlap != b.overlap) return a.overlap > b.overlap;
      if (a.g != b.g) return a.g < b.g;
      return a.p < b.p;
    });
    for (const Cand& c : cands) {
      if (gold_used[c.g] || pred_used[c.p]) continue;
      out.pairs.emplace_back(c.g, c.p);
      gold_used[c.g] = pred_used[c.p] = true;
    }
  }

  for (size_t g = 0; g < gold.size(); ++g)
    if (!gold_used[g]) out.unmatched_gold.push_back(static_cast<int>(g));
  for (size_t p = 0; p < pred.size(); ++p)
    if (!pred_used[p]) out.unmatched_pred.push_back(static_cast<int>(p));
  return out;
}

namespace {

void count_unpaired_args(const Event& ev, bool gold_side, SlotTable& table) {
  for (const auto& arg : ev.labeled_args) {
    SlotKey key{ev.trigger.event_type, SlotKey::Kind::labeled, arg.arg_type, arg.subtype};
    if (gold_side)
      table[key].fn += 1;
    else
      table[key].fp += 1;
  }
  std::map<std::string, std::set<int>> tokens;
  for (const auto& arg : ev.span_only_args)
    for (int t = arg.span.start; t < arg.span.end; ++t) tokens[arg.arg_type].insert(t);
  for (const auto& [arg_type, toks] : tokens) {
    SlotKey key{ev.trigger.event_type, SlotKey::Kind::span_only, arg_type, ""};
    if (gold_side)
      table[key].fn += static_cast<long>(toks.size());
    else
      table[key].fp += static_cast<long>(toks.size());
  }
}

void count_paired_args(const Event& g, const Event& p, SlotTable& table) {
  const std::string& event_type = g.trigger.event_type;

  // Labeled arguments: per (type, subtype) multiset intersection; spans are
  // not compared.
  std::map<std::pair<std::string, std::string>, long> gcnt, pcnt;
  for (const auto& arg : g.labeled_args) gcnt[{arg.arg_type, arg.subtype}]++;
  for (const auto& arg : p.labeled_args) pcnt[{arg.arg_type, arg.subtype}]++;
  std::set<std::pair<std::string, std::string>> keys;
  for (const auto& [k, v] : gcnt) keys.insert(k);
  for (const auto& [k, v] : pcnt) keys.insert(k);
  for (const auto& k : keys) {
    long gv = gcnt.count(k) ? gcnt[k] : 0;
    long pv = pcnt.count(k) ? pcnt[k] : 0;
    long match = std::min(gv, pv);
    SlotKey key{event_type, SlotKey::Kind::labeled, k.first, k.second};
    table[key].tp += match;
    table[key].fn += gv - match;
    table[key].fp += pv - match;
  }

  // Span-only arguments: token sets pooled per argument type.
  std::map<std::string, std::set<int>> gtok, ptok;
  for (const auto& arg : g.span_only_args)
    for (int t = arg.span.start; t < arg.span.end; ++t) gtok[arg.arg_type].insert(t);
  for (const auto& arg : p.span_only_args)
    for (int t = arg.span.start; t < arg.span.end; ++t) ptok[arg.arg_type].insert(t);
  std::set<std::string> arg_types;
  for (const auto& [k, v] : gtok) arg_types.insert(k);
  for (const auto& [k, v] : ptok) arg_types.insert(k);
  for (const auto& arg_type : arg_types) {
    const std::set<int>& gs = gtok[arg_type];
    const std::set<int>& ps = ptok[arg_type];
    long inter = 0;
    for (int t : gs)
      if (ps.count(t)) ++inter;
    SlotKey key{event_type, SlotKey::Kind::span_only, arg_type, ""};
    table[key].tp += inter;
    table[key].fn += static_cast<long>(gs.size()) - inter;
    table[key].fp += static_cast<long>(ps.size()) - inter;
  }
}

void score_document_pair(const AnnotatedDocument& gold_doc, const AnnotatedDocument& pred_doc,
                         TriggerMatchMode mode, const ScoreOptions& options, SlotTable& table,
                         std::vector<std::string>* warnings) {
  std::vector<Event> gold =
      merge_duplicate_triggers(gold_doc.events, warnings, gold_doc.document.doc_id + " (gold)");
  std::vector<Event> pred =
      merge_duplicate_triggers(pred_doc.events, warnings, pred_doc.document.doc_id + " (pred)");

  Alignment trig_align = align_events(gold, pred, mode);
  for (const auto& [g, p] : trig_align.pairs)
    table[{gold[g].trigger.event_type, SlotKey::Kind::trigger, "", ""}].tp += 1;
  for (int g : trig_align.unmatched_gold)
    table[{gold[g].trigger.event_type, SlotKey::Kind::trigger, "", ""}].fn += 1;
  for (int p : trig_align.unmatched_pred)
    table[{pred[p].trigger.event_type, SlotKey::Kind::trigger, "", ""}].fp += 1;

  // Argument slots default to exact-trigger pairing even when triggers are
  // scored with any_overlap.
  Alignment arg_align =
      (mode == TriggerMatchMode::exact || options.args_follow_trigger_mode)
          ? trig_align
          : align_events(gold, pred, TriggerMatchMode::exact);

  std::vector<bool> gold_paired(gold.size(), false), pred_paired(pred.size(), false);
  for (const auto& [g, p] : arg_align.pairs) {
    gold_paired[g] = pred_paired[p] = true;
    count_paired_args(gold[g], pred[p], table);
  }
  for (size_t g = 0; g < gold.size(); ++g)
    if (!gold_paired[g]) count_unpaired_args(gold[g], /*gold_side=*/true, table);
  for (size_t p = 0; p < pred.size(); ++p)
    if (!pred_paired[p]) count_unpaired_args(pred[p], /*gold_side=*/false, table);
}

}  // namespace

ScoreReport score_documents(const Corpus& gold, const Corpus& pred, TriggerMatchMode mode,
                            const ScoreOptions& options) {
  std::map<std::string, const AnnotatedDocument*> gold_by_id, pred_by_id;
  for (const auto& doc : gold) gold_by_id[doc.document.doc_id] = &doc;
  for (const auto& doc : pred) pred_by_id[doc.document.doc_id] = &doc;
  if (gold_by_id.size() != gold.size() || pred_by_id.size() != pred.size())
    throw InputError("duplicate document ids within a corpus");
  for (const auto& [id, doc] : gold_by_id)
    if (!pred_by_id.count(id)) throw InputError("document '" + id + "' missing from predictions");
  for (const auto& [id, doc] : pred_by_id)
    if (!gold_by_id.count(id)) throw InputError("document '" + id + "' missing from gold");

  ScoreReport report;
  for (const auto& [id, gdoc] : gold_by_id)
    score_document_pair(*gdoc, *pred_by_id[id], mode, options, report.slots, &report.warnings);
  return report;
}

ScoreReport agreement_report(const Corpus& annot_a, const Corpus& annot_b) {
  return score_documents(annot_a, annot_b, TriggerMatchMode::exact);
}

SlotCounts ScoreReport::labeled_micro_counts() const {
  SlotCounts total;
  for (const auto& [key, counts] : slots)
    if (key.kind == SlotKey::Kind::labeled) total.add(counts);
  return total;
}

SlotCounts ScoreReport::trigger_counts(const std::string& event_type) const {
  SlotCounts total;
  auto it = slots.find({event_type, SlotKey::Kind::trigger, "", ""});
  if (it != slots.end()) total = it->second;
  return total;
}

std::vector<ScoreRow> ScoreReport::rows() const {
  std::vector<ScoreRow> out;
  std::set<std::string> event_types;
  for (const auto& [key, counts] : slots) event_types.insert(key.event_type);

  auto push = [&out](const std::string& name, const SlotCounts& c) {
    out.push_back({name, c, prf(c.tp, c.fp, c.fn)});
  };

  for (const auto& event_type : event_types) {
    SlotCounts overall;
    for (const auto& [key, counts] : slots)
      if (key.event_type == event_type) overall.add(counts);
    push(event_type, overall);

    auto trig = slots.find({event_type, SlotKey::Kind::trigger, "", ""});
    if (trig != slots.end()) push(trig->first.name(), trig->second);

    std::map<std::string, SlotCounts> labeled_micro;
    for (const auto& [key, counts] : slots)
      if (key.event_type == event_type && key.kind == SlotKey::Kind::labeled)
        labeled_micro[key.arg_type].add(counts);
    for (const auto& [arg_type, micro] : labeled_micro) {
      push(event_type + "/" + arg_type, micro);
      for (const auto& [key, counts] : slots)
        if (key.event_type == event_type && key.kind == SlotKey::Kind::labeled &&
            key.arg_type == arg_type)
          push(key.name(), counts);
    }

    for (const auto& [key, counts] : slots)
      if (key.event_type == event_type && key.kind == SlotKey::Kind::span_only)
        push(key.name() + "[tokens]", counts);
  }
  return out;
}

std::string ScoreReport::to_tsv() const {
  std::ostringstream ss;
  ss << "slot\ttp\tfp\tfn\tP\tR\tF1\n";
  char buf[64];
  for (const ScoreRow& row : rows()) {
    ss << row.slot << '\t' << row.counts.tp << '\t' << row.counts.fp << '\t' << row.counts.fn;
    std::snprintf(buf, sizeof(buf), "\t%.6f\t%.6f\t%.6f", row.metrics.precision,
                  row.metrics.recall, row.metrics.f1);
    ss << buf << '\n';
  }
  return ss.str();
}

std::string ScoreReport::to_text() const {
  std::ostringstream ss;
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%-40s %8s %8s %8s %8s %8s %8s\n", "slot", "tp", "fp", "fn",
                "P", "R", "F1");
  ss << buf;
  for (const ScoreRow& row : rows()) {
    std::snprintf(buf, sizeof(buf), "%-40s %8ld %8ld %8ld %8.4f %8.4f %8.4f\n", row.slot.c_str(),
                  row.counts.tp, row.counts.fp, row.counts.fn, row.metrics.precision,
                  row.metrics.recall, row.metrics.f1);
    ss << buf;
  }
  return ss.str();
}

}  // namespace spanev
