#pragma once

#include <compare>
#include <map>
#include <string>
#include <vector>

#include "spanev/corpus.hpp"

namespace spanev {

enum class TriggerMatchMode { exact, any_overlap };

TriggerMatchMode trigger_match_mode_from_string(const std::string& s);

struct Prf {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// Zero denominators yield 0 (not 1) throughout.
Prf prf(long tp, long fp, long fn);

struct SlotKey {
  enum class Kind { trigger, labeled, span_only };

  std::string event_type;
  Kind kind = Kind::trigger;
  std::string arg_type;  // empty for trigger slots
  std::string subtype;   // labeled slots only

  std::string name() const;
  auto operator<=>(const SlotKey&) const = default;
};

struct SlotCounts {
  long tp = 0;
  long fp = 0;
  long fn = 0;

  void add(const SlotCounts& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
  }
  bool operator==(const SlotCounts&) const = default;
};

using SlotTable = std::map<SlotKey, SlotCounts>;

struct ScoreRow {
  std::string slot;  // printable slot name
  SlotCounts counts;
  Prf metrics;
};

struct ScoreReport {
  SlotTable slots;  // raw per-slot counts (labeled slots at subtype granularity)
  std::vector<std::string> warnings;

  // Rows in fixed order: per event type, the overall row, trigger row, then
  // per labeled argument the micro row followed by its subtype rows, then
  // span-only rows (token-level counts).
  std::vector<ScoreRow> rows() const;

  // Columns: slot, tp, fp, fn, P, R, F1 (tab-separated, one header line).
  std::string to_tsv() const;
  std::string to_text() const;

  // Summed counts over every labeled slot (all event types and subtypes).
  SlotCounts labeled_micro_counts() const;
  SlotCounts trigger_counts(const std::string& event_type) const;
};

// Exact: same event type, sentence, start, end. Any-overlap: same event type,
// same sentence, at least one shared token index.
bool triggers_equivalent(const Trigger& a, const Trigger& b, TriggerMatchMode mode);

struct Alignment {
  std::vector<std::pair<int, int>> pairs;  // (gold index, pred index)
  std::vector<int> unmatched_gold;
  std::vector<int> unmatched_pred;
};

// Events with identical triggers are merged (arguments concatenated) before
// alignment; the merge is recorded in *warnings. One-to-one matching; in
// any_overlap mode pairs are chosen greedily by (overlap size desc, gold
// order, pred order).
std::vector<Event> merge_duplicate_triggers(const std::vector<Event>& events,
                                            std::vector<std::string>* warnings,
                                            const std::string& where = "");
Alignment align_events(const std::vector<Event>& gold, const std::vector<Event>& pred,
                       TriggerMatchMode mode);

struct ScoreOptions {
  // When scoring with any_overlap triggers, argument rows are still computed
  // from an exact-trigger alignment unless this opts in to the overlap pairs.
  bool args_follow_trigger_mode = false;
};

// The slot-filling scorer. Trigger slots count matched/unmatched events;
// labeled-argument slots compare (type, subtype) multisets of aligned events,
// ignoring argument spans; span-only slots pool token indices per argument
// type and count token-level overlap. Arguments of unaligned events count
// wholly as fn (gold side) or fp (pred side).
ScoreReport score_documents(const Corpus& gold, const Corpus& pred, TriggerMatchMode mode,
                            const ScoreOptions& options = {});

// Agreement between two annotators = score_documents(a, b, exact). F1 is
// symmetric under swapping the annotators.
ScoreReport agreement_report(const Corpus& annot_a, const Corpus& annot_b);

}  // namespace spanev
