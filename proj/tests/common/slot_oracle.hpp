#pragma once

// Test-only brute-force slot enumerator, written independently of the
// scoring module: plain string keys, repeated-scan matching, no shared
// helpers. Used to cross-check score_documents count for count.

#include <map>
#include <set>
#include <string>
#include <vector>

#include "spanev/corpus.hpp"

namespace oracle {

struct Counts {
  long tp = 0;
  long fp = 0;
  long fn = 0;
  bool operator==(const Counts&) const = default;
};

using Table = std::map<std::string, Counts>;

struct FlatEvent {
  std::string type;
  int sent = 0, start = 0, end = 0;
  std::vector<std::pair<std::string, std::string>> labeled;       // (arg type, subtype)
  std::vector<std::pair<std::string, std::pair<int, int>>> spans;  // (arg type, [start,end))
};

inline std::vector<FlatEvent> flatten(const std::vector<spanev::Event>& events) {
  std::vector<FlatEvent> out;
  for (const auto& ev : events) {
    FlatEvent f;
    f.type = ev.trigger.event_type;
    f.sent = ev.trigger.span.sentence_index;
    f.start = ev.trigger.span.start;
    f.end = ev.trigger.span.end;
    for (const auto& a : ev.labeled_args) f.labeled.emplace_back(a.arg_type, a.subtype);
    for (const auto& a : ev.span_only_args)
      f.spans.emplace_back(a.arg_type, std::make_pair(a.span.start, a.span.end));
    out.push_back(std::move(f));
  }
  return out;
}

inline std::vector<FlatEvent> merge_dups(const std::vector<FlatEvent>& events) {
  std::vector<FlatEvent> out;
  for (const auto& ev : events) {
    bool merged = false;
    for (auto& prev : out) {
      if (prev.type == ev.type && prev.sent == ev.sent && prev.start == ev.start &&
          prev.end == ev.end) {
        prev.labeled.insert(prev.labeled.end(), ev.labeled.begin(), ev.labeled.end());
        prev.spans.insert(prev.spans.end(), ev.spans.begin(), ev.spans.end());
        merged = true;
        break;
      }
    }
    if (!merged) out.push_back(ev);
  }
  return out;
}

inline bool overlaps(const FlatEvent& a, const FlatEvent& b) {
  return a.type == b.type && a.sent == b.sent && a.start < b.end && b.start < a.end;
}

inline bool exact_equal(const FlatEvent& a, const FlatEvent& b) {
  return a.type == b.type && a.sent == b.sent && a.start == b.start && a.end == b.end;
}

// Exact matching: first unused pred with an identical trigger, gold order.
inline std::vector<std::pair<int, int>> match_exact(const std::vector<FlatEvent>& gold,
                                                    const std::vector<FlatEvent>& pred) {
  std::vector<std::pair<int, int>> pairs;
  std::vector<bool> used(pred.size(), false);
  for (size_t g = 0; g < gold.size(); ++g) {
    for (size_t p = 0; p < pred.size(); ++p) {
      if (used[p] || !exact_equal(gold[g], pred[p])) continue;
      pairs.emplace_back(static_cast<int>(g), static_cast<int>(p));
      used[p] = true;
      break;
    }
  }
  return pairs;
}

// Greedy overlap matching by repeated full scans: at every step take the
// still-available pair with the largest overlap, breaking ties by gold order
// then pred order.
inline std::vector<std::pair<int, int>> match_overlap(const std::vector<FlatEvent>& gold,
                                                      const std::vector<FlatEvent>& pred) {
  std::vector<std::pair<int, int>> pairs;
  std::vector<bool> gused(gold.size(), false), pused(pred.size(), false);
  while (true) {
    int best_ov = 0, best_g = -1, best_p = -1;
    for (size_t g = 0; g < gold.size(); ++g) {
      if (gused[g]) continue;
      for (size_t p = 0; p < pred.size(); ++p) {
        if (pused[p] || !overlaps(gold[g], pred[p])) continue;
        int lo = gold[g].start > pred[p].start ? gold[g].start : pred[p].start;
        int hi = gold[g].end < pred[p].end ? gold[g].end : pred[p].end;
        int ov = hi - lo;
        if (ov > best_ov) {
          best_ov = ov;
          best_g = static_cast<int>(g);
          best_p = static_cast<int>(p);
        }
      }
    }
    if (best_g < 0) break;
    pairs.emplace_back(best_g, best_p);
    gused[best_g] = pused[best_p] = true;
  }
  return pairs;
}

inline void count_args_oneside(const FlatEvent& ev, bool is_gold, Table& table) {
  for (const auto& [arg, subtype] : ev.labeled) {
    Counts& c = table[ev.type + "/" + arg + "/" + subtype];
    (is_gold ? c.fn : c.fp) += 1;
  }
  std::map<std::string, std::set<int>> tokens;
  for (const auto& [arg, range] : ev.spans)
    for (int t = range.first; t < range.second; ++t) tokens[arg].insert(t);
  for (const auto& [arg, toks] : tokens) {
    Counts& c = table[ev.type + "/" + arg];
    (is_gold ? c.fn : c.fp) += static_cast<long>(toks.size());
  }
}

inline void count_args_pair(const FlatEvent& g, const FlatEvent& p, Table& table) {
  // Labeled: multiset intersection per (arg, subtype).
  std::map<std::pair<std::string, std::string>, long> gc, pc;
  for (const auto& it : g.labeled) gc[it]++;
  for (const auto& it : p.labeled) pc[it]++;
  std::set<std::pair<std::string, std::string>> keys;
  for (const auto& [k, v] : gc) keys.insert(k);
  for (const auto& [k, v] : pc) keys.insert(k);
  for (const auto& k : keys) {
    long gv = gc.count(k) ? gc[k] : 0;
    long pv = pc.count(k) ? pc[k] : 0;
    long m = gv < pv ? gv : pv;
    Counts& c = table[g.type + "/" + k.first + "/" + k.second];
    c.tp += m;
    c.fn += gv - m;
    c.fp += pv - m;
  }
  // Span-only: pooled token sets per arg type.
  std::map<std::string, std::set<int>> gt, pt;
  for (const auto& [arg, range] : g.spans)
    for (int t = range.first; t < range.second; ++t) gt[arg].insert(t);
  for (const auto& [arg, range] : p.spans)
    for (int t = range.first; t < range.second; ++t) pt[arg].insert(t);
  std::set<std::string> args;
  for (const auto& [k, v] : gt) args.insert(k);
  for (const auto& [k, v] : pt) args.insert(k);
  for (const auto& arg : args) {
    long inter = 0;
    for (int t : gt[arg])
      if (pt[arg].count(t)) ++inter;
    Counts& c = table[g.type + "/" + arg];
    c.tp += inter;
    c.fn += static_cast<long>(gt[arg].size()) - inter;
    c.fp += static_cast<long>(pt[arg].size()) - inter;
  }
}

inline Table score(const spanev::Corpus& gold_corpus, const spanev::Corpus& pred_corpus,
                   bool any_overlap, bool args_follow_mode) {
  std::map<std::string, const spanev::AnnotatedDocument*> gold_by_id, pred_by_id;
  for (const auto& d : gold_corpus) gold_by_id[d.document.doc_id] = &d;
  for (const auto& d : pred_corpus) pred_by_id[d.document.doc_id] = &d;

  Table table;
  for (const auto& [id, gdoc] : gold_by_id) {
    std::vector<FlatEvent> gold = merge_dups(flatten(gdoc->events));
    std::vector<FlatEvent> pred = merge_dups(flatten(pred_by_id.at(id)->events));

    auto trig_pairs = any_overlap ? match_overlap(gold, pred) : match_exact(gold, pred);
    std::vector<bool> gmatched(gold.size(), false), pmatched(pred.size(), false);
    for (const auto& [g, p] : trig_pairs) {
      table[gold[g].type + "/trigger"].tp += 1;
      gmatched[g] = pmatched[p] = true;
    }
    for (size_t g = 0; g < gold.size(); ++g)
      if (!gmatched[g]) table[gold[g].type + "/trigger"].fn += 1;
    for (size_t p = 0; p < pred.size(); ++p)
      if (!pmatched[p]) table[pred[p].type + "/trigger"].fp += 1;

    auto arg_pairs =
        (!any_overlap || args_follow_mode) ? trig_pairs : match_exact(gold, pred);
    std::vector<bool> gpaired(gold.size(), false), ppaired(pred.size(), false);
    for (const auto& [g, p] : arg_pairs) {
      gpaired[g] = ppaired[p] = true;
      count_args_pair(gold[g], pred[p], table);
    }
    for (size_t g = 0; g < gold.size(); ++g)
      if (!gpaired[g]) count_args_oneside(gold[g], true, table);
    for (size_t p = 0; p < pred.size(); ++p)
      if (!ppaired[p]) count_args_oneside(pred[p], false, table);
  }
  return table;
}

}  // namespace oracle
