#pragma once

#include <compare>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace spanev {

// Raised for malformed user input (files, configs, command lines). The CLI
// maps it to exit code 1; anything else is an internal error (exit 2).
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public InputError {
 public:
  using InputError::InputError;
};

struct Token {
  std::string text;
  int char_start = 0;  // inclusive byte offset into the document text
  int char_end = 0;    // exclusive
  int sentence_index = 0;
  int token_index = 0;  // position within the sentence

  bool operator==(const Token&) const = default;
};

struct TokenSpan {
  int sentence_index = 0;
  int start = 0;  // inclusive token index
  int end = 0;    // exclusive

  int width() const { return end - start; }
  bool operator==(const TokenSpan&) const = default;
  auto operator<=>(const TokenSpan&) const = default;
};

struct LabeledArg {
  std::string arg_type;
  TokenSpan span;
  std::string subtype;
  bool operator==(const LabeledArg&) const = default;
};

struct SpanOnlyArg {
  std::string arg_type;
  TokenSpan span;
  bool operator==(const SpanOnlyArg&) const = default;
};

struct Trigger {
  std::string event_type;
  TokenSpan span;
  bool operator==(const Trigger&) const = default;
};

struct Event {
  Trigger trigger;
  std::vector<LabeledArg> labeled_args;
  std::vector<SpanOnlyArg> span_only_args;
  bool operator==(const Event&) const = default;
};

struct Document {
  std::string doc_id;
  std::string note_type = "unknown";
  std::string text;
  std::vector<std::vector<Token>> sentences;

  int sentence_count() const { return static_cast<int>(sentences.size()); }
  const Token& token(const TokenSpan& s, int offset) const {
    return sentences[s.sentence_index][s.start + offset];
  }
  bool operator==(const Document&) const = default;
};

struct AnnotatedDocument {
  Document document;
  std::vector<Event> events;
  bool operator==(const AnnotatedDocument&) const = default;
};

using Corpus = std::vector<AnnotatedDocument>;

struct TokenizerOptions {
  // Lowercased abbreviations that keep their trailing period and do not end a
  // sentence ("dr." stays one token).
  std::set<std::string> abbreviations = default_abbreviations();

  static std::set<std::string> default_abbreviations();
};

// Rule-based, offset-exact tokenizer: whitespace split, then leading/trailing
// punctuation peeled into single-character tokens. Sentences end at '.', '!',
// '?' tokens and at newlines. Deterministic; empty text yields no sentences.
std::vector<std::vector<Token>> tokenize(const std::string& text,
                                         const TokenizerOptions& options = {});

struct StandoffFile {
  std::string txt;
  std::string ann;
};

// Standoff grammar (tab-separated exactly as shown):
//   T<k>\t<Type> <char_start> <char_end>\t<covered text>
//   E<k>\t<EventType>:T<i>( <ArgType>:T<j>)*
//   A<k>\t<ArgType>Val T<i> <subtype>
AnnotatedDocument parse_standoff(const std::string& txt, const std::string& ann,
                                 const std::string& doc_id = "",
                                 std::vector<std::string>* warnings = nullptr,
                                 const TokenizerOptions& options = {});

StandoffFile serialize_standoff(const AnnotatedDocument& doc);

// Covered text of a span: token texts joined with single spaces.
std::string span_text(const Document& doc, const TokenSpan& span);
// Same, lowercased (ASCII).
std::string span_text_lower(const Document& doc, const TokenSpan& span);

std::string to_lower(const std::string& s);

// Loads every <id>.txt/<id>.ann pair in a directory, sorted by id.
Corpus load_corpus_dir(const std::string& dir, std::vector<std::string>* warnings = nullptr);
// Loads only <id>.txt files (no annotations) into empty AnnotatedDocuments.
Corpus load_text_dir(const std::string& dir);
void write_corpus_dir(const Corpus& corpus, const std::string& dir);

}  // namespace spanev
