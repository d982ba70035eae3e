#pragma once

// Seeded random corpora for scorer stress tests: short sentences so trigger
// spans collide and overlap often.

#include <algorithm>
#include <string>
#include <vector>

#include "spanev/corpus.hpp"
#include "spanev/rng.hpp"

namespace testgen {

inline spanev::Document random_text_document(spanev::Rng& rng, const std::string& doc_id) {
  spanev::Document doc;
  doc.doc_id = doc_id;
  std::string text;
  int sentences = 1 + rng.next_int(2);
  for (int s = 0; s < sentences; ++s) {
    int tokens = 4 + rng.next_int(5);
    for (int t = 0; t < tokens; ++t)
      text += "w" + std::to_string(t) + (t + 1 == tokens ? "." : " ");
    if (s + 1 < sentences) text += "\n";
  }
  doc.text = text;
  doc.sentences = spanev::tokenize(text);
  return doc;
}

inline std::vector<spanev::Event> random_events_for(const spanev::Document& doc,
                                                    spanev::Rng& rng, int max_events) {
  using namespace spanev;
  const std::vector<std::string> types = {"COVID", "Symptom"};
  const std::vector<std::string> labeled_types = {"Assertion", "Severity"};
  const std::vector<std::string> subtypes = {"present", "absent", "mild"};
  const std::vector<std::string> span_only_types = {"Anatomy", "Frequency"};

  std::vector<Event> events;
  int count = rng.next_int(max_events + 1);
  for (int e = 0; e < count; ++e) {
    int s = rng.next_int(doc.sentence_count());
    int n = static_cast<int>(doc.sentences[s].size());
    auto random_span = [&]() {
      int start = rng.next_int(n);
      int width = 1 + rng.next_int(std::min(3, n - start));
      return TokenSpan{s, start, start + width};
    };
    Event ev;
    ev.trigger = {types[rng.next_int(2)], random_span()};
    int labeled = rng.next_int(3);
    for (int a = 0; a < labeled; ++a)
      ev.labeled_args.push_back(
          {labeled_types[rng.next_int(2)], random_span(), subtypes[rng.next_int(3)]});
    int spans = rng.next_int(3);
    for (int a = 0; a < spans; ++a)
      ev.span_only_args.push_back({span_only_types[rng.next_int(2)], random_span()});
    events.push_back(std::move(ev));
  }
  return events;
}

// A gold/pred pair over shared documents. Pred events are fresh random draws
// over the same text, so exact matches, overlaps, and misses all occur.
inline std::pair<spanev::Corpus, spanev::Corpus> random_corpus_pair(uint64_t seed, int max_docs,
                                                                    int max_events) {
  spanev::Rng rng(seed);
  spanev::Corpus gold, pred;
  int docs = 1 + rng.next_int(max_docs);
  for (int d = 0; d < docs; ++d) {
    spanev::AnnotatedDocument g, p;
    g.document = random_text_document(rng, "doc" + std::to_string(d));
    p.document = g.document;
    g.events = random_events_for(g.document, rng, max_events);
    p.events = random_events_for(p.document, rng, max_events);
    gold.push_back(std::move(g));
    pred.push_back(std::move(p));
  }
  return {std::move(gold), std::move(pred)};
}

}  // namespace testgen
