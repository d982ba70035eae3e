#include "spanev/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <tuple>

namespace spanev {

namespace {

bool is_space(char c) {
  unsigned char u = static_cast<unsigned char>(c);
  return u == ' ' || u == '\t' || u == '\n' || u == '\r' || u == '\v' || u == '\f';
}

bool is_punct(char c) {
  unsigned char u = static_cast<unsigned char>(c);
  return u < 128 && std::ispunct(u);
}

bool is_sentence_final(const std::string& tok) {
  return tok == "." || tok == "!" || tok == "?";
}

}  // namespace

std::string to_lower(const std::string& s) {
  std::string out = s;
  for (char& c : out) {
    unsigned char u = static_cast<unsigned char>(c);
    if (u < 128) c = static_cast<char>(std::tolower(u));
  }
  return out;
}

std::set<std::string> TokenizerOptions::default_abbreviations() {
  return {"dr.", "mr.", "mrs.", "ms.", "st.",  "vs.",  "etc.", "e.g.",
          "i.e.", "pt.", "hx.", "dx.", "tx.",  "appt.", "approx.", "no."};
}

std::vector<std::vector<Token>> tokenize(const std::string& text, const TokenizerOptions& options) {
  std::vector<std::vector<Token>> sentences;
  std::vector<Token> current;

  auto flush_sentence = [&]() {
    if (!current.empty()) {
      sentences.push_back(std::move(current));
      current.clear();
    }
  };

  auto emit = [&](int start, int end) {
    Token t;
    t.text = text.substr(start, end - start);
    t.char_start = start;
    t.char_end = end;
    t.sentence_index = static_cast<int>(sentences.size());
    t.token_index = static_cast<int>(current.size());
    bool final_punct = is_sentence_final(t.text);
    current.push_back(std::move(t));
    if (final_punct) flush_sentence();
  };

  size_t i = 0;
  size_t n = text.size();
  while (i < n) {
    if (is_space(text[i])) {
      if (text[i] == '\n') flush_sentence();
      ++i;
      continue;
    }
    size_t start = i;
    while (i < n && !is_space(text[i])) ++i;
    size_t end = i;

    std::string chunk = text.substr(start, end - start);
    if (options.abbreviations.count(to_lower(chunk))) {
      emit(static_cast<int>(start), static_cast<int>(end));
      continue;
    }

    size_t lo = start, hi = end;
    while (lo < hi && is_punct(text[lo]) && hi - lo > 1) {
      emit(static_cast<int>(lo), static_cast<int>(lo + 1));
      ++lo;
    }
    size_t core_end = hi;
    while (core_end > lo + 1 && is_punct(text[core_end - 1])) --core_end;
    if (core_end > lo) emit(static_cast<int>(lo), static_cast<int>(core_end));
    for (size_t p = core_end; p < hi; ++p) emit(static_cast<int>(p), static_cast<int>(p + 1));
  }
  flush_sentence();
  return sentences;
}

std::string span_text(const Document& doc, const TokenSpan& span) {
  std::string out;
  for (int t = span.start; t < span.end; ++t) {
    if (t > span.start) out += ' ';
    out += doc.sentences[span.sentence_index][t].text;
  }
  return out;
}

std::string span_text_lower(const Document& doc, const TokenSpan& span) {
  return to_lower(span_text(doc, span));
}

namespace {

struct TextBound {
  std::string id;
  std::string type;
  int char_start = 0;
  int char_end = 0;
  TokenSpan span;
  int line_no = 0;
};

struct RawEvent {
  std::string id;
  std::string event_type;
  std::string trigger_tid;
  std::vector<std::pair<std::string, std::string>> args;  // (arg type, tid)
  int line_no = 0;
};

struct RawAttr {
  std::string id;
  std::string arg_type;  // name with the trailing "Val" stripped
  std::string tid;
  std::string subtype;
  int line_no = 0;
  bool used = false;
};

bool valid_ann_id(const std::string& s, char prefix) {
  if (s.size() < 2 || s[0] != prefix) return false;
  if (s[1] == '0') return false;
  return std::all_of(s.begin() + 1, s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

[[noreturn]] void parse_fail(int line_no, const std::string& msg) {
  throw ParseError("ann line " + std::to_string(line_no) + ": " + msg);
}

// Maps a character range to the covered token span, snapping outward to whole
// tokens. Errors if the range covers no token or crosses a sentence boundary.
TokenSpan char_range_to_span(const Document& doc, const std::string& id, int cs, int ce,
                             std::vector<std::string>* warnings) {
  if (cs < 0 || ce > static_cast<int>(doc.text.size()) || cs >= ce)
    throw ParseError("annotation " + id + ": character range [" + std::to_string(cs) + "," +
                     std::to_string(ce) + ") is invalid for this document");
  const Token* first = nullptr;
  const Token* last = nullptr;
  for (const auto& sent : doc.sentences) {
    for (const auto& tok : sent) {
      if (tok.char_start < ce && cs < tok.char_end) {
        if (!first) first = &tok;
        last = &tok;
      }
    }
  }
  if (!first)
    throw ParseError("annotation " + id + ": character range covers no tokens");
  if (first->sentence_index != last->sentence_index)
    throw ParseError("annotation " + id + ": character range crosses a sentence boundary");
  bool cut_first = cs > first->char_start && cs < first->char_end;
  bool cut_last = ce > last->char_start && ce < last->char_end;
  if ((cut_first || cut_last) && warnings)
    warnings->push_back("annotation " + id + ": span partially covers a token; snapped to [" +
                        std::to_string(first->char_start) + "," + std::to_string(last->char_end) +
                        ")");
  return TokenSpan{first->sentence_index, first->token_index, last->token_index + 1};
}

}  // namespace

AnnotatedDocument parse_standoff(const std::string& txt, const std::string& ann,
                                 const std::string& doc_id, std::vector<std::string>* warnings,
                                 const TokenizerOptions& options) {
  AnnotatedDocument out;
  out.document.doc_id = doc_id;
  out.document.text = txt;
  out.document.sentences = tokenize(txt, options);

  std::map<std::string, TextBound> tbs;
  std::vector<RawEvent> raw_events;
  std::vector<RawAttr> raw_attrs;

  std::istringstream in(ann);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;

    size_t tab1 = line.find('\t');
    if (tab1 == std::string::npos) parse_fail(line_no, "expected a tab after the annotation id");
    std::string id = line.substr(0, tab1);
    std::string rest = line.substr(tab1 + 1);

    if (valid_ann_id(id, 'T')) {
      size_t tab2 = rest.find('\t');
      if (tab2 == std::string::npos) parse_fail(line_no, "text-bound line needs a second tab");
      std::string header = rest.substr(0, tab2);
      std::string covered = rest.substr(tab2 + 1);
      size_t sp2 = header.rfind(' ');
      if (sp2 == std::string::npos) parse_fail(line_no, "expected '<Type> <start> <end>'");
      size_t sp1 = header.rfind(' ', sp2 - 1);
      if (sp1 == std::string::npos) parse_fail(line_no, "expected '<Type> <start> <end>'");
      TextBound tb;
      tb.id = id;
      tb.type = header.substr(0, sp1);
      tb.line_no = line_no;
      if (tb.type.empty()) parse_fail(line_no, "empty annotation type");
      try {
        tb.char_start = std::stoi(header.substr(sp1 + 1, sp2 - sp1 - 1));
        tb.char_end = std::stoi(header.substr(sp2 + 1));
      } catch (const std::exception&) {
        parse_fail(line_no, "character offsets are not integers");
      }
      if (tbs.count(id)) parse_fail(line_no, "duplicate annotation id " + id);
      tb.span = char_range_to_span(out.document, id, tb.char_start, tb.char_end, warnings);
      std::string actual = txt.substr(tb.char_start, tb.char_end - tb.char_start);
      if (warnings && covered != actual)
        warnings->push_back("annotation " + id + ": covered-text field does not match document text");
      tbs[id] = std::move(tb);
    } else if (valid_ann_id(id, 'E')) {
      RawEvent ev;
      ev.id = id;
      ev.line_no = line_no;
      std::istringstream args(rest);
      std::string piece, pending;
      bool first = true;
      while (std::getline(args, piece, ' ')) {
        if (piece.empty()) parse_fail(line_no, "stray space in event line");
        size_t colon = piece.find(':');
        if (colon == std::string::npos) {
          // Type names may contain spaces; accumulate until the ':' chunk.
          pending += pending.empty() ? piece : " " + piece;
          continue;
        }
        std::string name = pending.empty() ? piece.substr(0, colon)
                                           : pending + " " + piece.substr(0, colon);
        std::string tid = piece.substr(colon + 1);
        pending.clear();
        if (name.empty() || !valid_ann_id(tid, 'T'))
          parse_fail(line_no, "malformed '<Type>:T<i>' entry");
        if (first) {
          ev.event_type = name;
          ev.trigger_tid = tid;
          first = false;
        } else {
          ev.args.emplace_back(name, tid);
        }
      }
      if (!pending.empty()) parse_fail(line_no, "trailing junk in event line");
      if (first) parse_fail(line_no, "event line has no trigger");
      raw_events.push_back(std::move(ev));
    } else if (valid_ann_id(id, 'A')) {
      size_t sp2 = rest.rfind(' ');
      if (sp2 == std::string::npos) parse_fail(line_no, "expected '<ArgType>Val T<i> <subtype>'");
      size_t sp1 = rest.rfind(' ', sp2 - 1);
      if (sp1 == std::string::npos) parse_fail(line_no, "expected '<ArgType>Val T<i> <subtype>'");
      RawAttr at;
      at.id = id;
      at.line_no = line_no;
      std::string name = rest.substr(0, sp1);
      at.tid = rest.substr(sp1 + 1, sp2 - sp1 - 1);
      at.subtype = rest.substr(sp2 + 1);
      if (name.size() <= 3 || name.substr(name.size() - 3) != "Val")
        parse_fail(line_no, "attribute name must end in 'Val'");
      at.arg_type = name.substr(0, name.size() - 3);
      if (!valid_ann_id(at.tid, 'T'))
        parse_fail(line_no, "attribute target is not a T id");
      if (at.subtype.empty()) parse_fail(line_no, "attribute has no value");
      raw_attrs.push_back(std::move(at));
    } else {
      parse_fail(line_no, "unrecognized annotation id '" + id + "'");
    }
  }

  // Resolve attribute references and reject duplicates.
  std::map<std::pair<std::string, std::string>, RawAttr*> attr_index;
  for (auto& at : raw_attrs) {
    if (!tbs.count(at.tid))
      throw ParseError("attribute " + at.id + " references unknown annotation " + at.tid);
    auto key = std::make_pair(at.arg_type, at.tid);
    if (attr_index.count(key))
      parse_fail(at.line_no, "duplicate attribute " + at.arg_type + "Val on " + at.tid);
    attr_index[key] = &at;
  }

  std::set<std::string> referenced_tids;
  for (const auto& ev : raw_events) {
    auto trig_it = tbs.find(ev.trigger_tid);
    if (trig_it == tbs.end())
      throw ParseError("event " + ev.id + " references unknown annotation " + ev.trigger_tid);
    const TextBound& trig = trig_it->second;
    if (trig.type != ev.event_type)
      throw ParseError("event " + ev.id + ": trigger " + trig.id + " has type '" + trig.type +
                       "' but the event type is '" + ev.event_type + "'");
    referenced_tids.insert(ev.trigger_tid);

    Event event;
    event.trigger = Trigger{ev.event_type, trig.span};
    for (const auto& [arg_type, tid] : ev.args) {
      auto it = tbs.find(tid);
      if (it == tbs.end())
        throw ParseError("event " + ev.id + " references unknown annotation " + tid);
      referenced_tids.insert(tid);
      const TextBound& tb = it->second;
      if (tb.span.sentence_index != trig.span.sentence_index)
        throw ParseError("event " + ev.id + ": argument " + tid +
                         " lies in a different sentence than the trigger");
      auto attr = attr_index.find(std::make_pair(arg_type, tid));
      if (attr != attr_index.end()) {
        attr->second->used = true;
        event.labeled_args.push_back(LabeledArg{arg_type, tb.span, attr->second->subtype});
      } else {
        event.span_only_args.push_back(SpanOnlyArg{arg_type, tb.span});
      }
    }
    out.events.push_back(std::move(event));
  }

  if (warnings) {
    for (const auto& at : raw_attrs)
      if (!at.used)
        warnings->push_back("attribute " + at.id + " (" + at.arg_type + "Val on " + at.tid +
                            ") is not attached to any event argument");
    for (const auto& [tid, tb] : tbs)
      if (!referenced_tids.count(tid))
        warnings->push_back("text-bound annotation " + tid + " is not referenced by any event");
  }
  return out;
}

StandoffFile serialize_standoff(const AnnotatedDocument& doc) {
  StandoffFile out;
  out.txt = doc.document.text;

  // T annotations are shared across events when (type, range, subtype) agree;
  // a labeled and a span-only use of the same range must not share a T, or the
  // attribute would leak onto the span-only use at parse time.
  using TKey = std::tuple<std::string, int, int, std::optional<std::string>>;
  std::map<TKey, int> t_ids;
  std::vector<std::string> t_lines, e_lines, a_lines;
  int next_a = 1;

  auto char_range = [&](const TokenSpan& s) {
    const Token& first = doc.document.sentences[s.sentence_index][s.start];
    const Token& last = doc.document.sentences[s.sentence_index][s.end - 1];
    return std::make_pair(first.char_start, last.char_end);
  };

  auto get_t = [&](const std::string& type, const TokenSpan& span,
                   const std::optional<std::string>& subtype) {
    auto [cs, ce] = char_range(span);
    TKey key{type, cs, ce, subtype};
    auto it = t_ids.find(key);
    if (it != t_ids.end()) return it->second;
    int id = static_cast<int>(t_ids.size()) + 1;
    t_ids[key] = id;
    t_lines.push_back("T" + std::to_string(id) + "\t" + type + " " + std::to_string(cs) + " " +
                      std::to_string(ce) + "\t" + doc.document.text.substr(cs, ce - cs));
    if (subtype) {
      a_lines.push_back("A" + std::to_string(next_a++) + "\t" + type + "Val T" +
                        std::to_string(id) + " " + *subtype);
    }
    return id;
  };

  int next_e = 1;
  for (const Event& ev : doc.events) {
    int trig = get_t(ev.trigger.event_type, ev.trigger.span, std::nullopt);
    std::string line = "E" + std::to_string(next_e++) + "\t" + ev.trigger.event_type + ":T" +
                       std::to_string(trig);
    for (const LabeledArg& arg : ev.labeled_args) {
      int tid = get_t(arg.arg_type, arg.span, arg.subtype);
      line += " " + arg.arg_type + ":T" + std::to_string(tid);
    }
    for (const SpanOnlyArg& arg : ev.span_only_args) {
      int tid = get_t(arg.arg_type, arg.span, std::nullopt);
      line += " " + arg.arg_type + ":T" + std::to_string(tid);
    }
    e_lines.push_back(std::move(line));
  }

  std::string ann;
  for (const auto& l : t_lines) ann += l + "\n";
  for (const auto& l : e_lines) ann += l + "\n";
  for (const auto& l : a_lines) ann += l + "\n";
  out.ann = std::move(ann);
  return out;
}

namespace {

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw InputError("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

Corpus load_corpus_dir(const std::string& dir, std::vector<std::string>* warnings) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw InputError("not a directory: " + dir);
  std::vector<fs::path> txts;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".txt")
      txts.push_back(entry.path());
  std::sort(txts.begin(), txts.end());
  Corpus corpus;
  for (const auto& txt_path : txts) {
    fs::path ann_path = txt_path;
    ann_path.replace_extension(".ann");
    if (!fs::exists(ann_path)) throw InputError("missing annotation file " + ann_path.string());
    std::string doc_id = txt_path.stem().string();
    try {
      corpus.push_back(
          parse_standoff(read_file(txt_path), read_file(ann_path), doc_id, warnings));
    } catch (const ParseError& e) {
      throw ParseError(doc_id + ": " + e.what());
    }
  }
  return corpus;
}

Corpus load_text_dir(const std::string& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw InputError("not a directory: " + dir);
  std::vector<fs::path> txts;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".txt")
      txts.push_back(entry.path());
  std::sort(txts.begin(), txts.end());
  Corpus corpus;
  for (const auto& txt_path : txts) {
    AnnotatedDocument doc;
    doc.document.doc_id = txt_path.stem().string();
    doc.document.text = read_file(txt_path);
    doc.document.sentences = tokenize(doc.document.text);
    corpus.push_back(std::move(doc));
  }
  return corpus;
}

void write_corpus_dir(const Corpus& corpus, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  for (const auto& doc : corpus) {
    StandoffFile f = serialize_standoff(doc);
    std::ofstream txt(fs::path(dir) / (doc.document.doc_id + ".txt"), std::ios::binary);
    txt << f.txt;
    std::ofstream ann(fs::path(dir) / (doc.document.doc_id + ".ann"), std::ios::binary);
    ann << f.ann;
  }
}

}  // namespace spanev
