#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace lamer {

// Raised by file loaders on malformed input; the message names the file,
// line number, and offending field.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Document {
  std::string id;
  std::string title;  // empty when absent
  std::string text;
};

struct Query {
  std::string id;
  std::string text;
};

using TokenSequence = std::vector<std::string>;

// Lowercases ASCII letters and splits on ASCII non-alphanumerics. Bytes >=
// 0x80 count as token characters so UTF-8 words survive intact. No stemming,
// no stopword removal.
TokenSequence tokenize(std::string_view text);

// First min(len, cap) tokens, order preserved.
TokenSequence truncate(TokenSequence tokens, std::size_t cap);

// Prefix of `text` spanning at most `cap` tokens, original bytes preserved
// up to the end of the last kept token.
std::string_view truncate_text(std::string_view text, std::size_t cap);

// Text a document contributes to the index: title + single space + text when
// a title is present and prepend_title is set.
std::string indexed_text(const Document& doc, bool prepend_title = true);

// JSONL corpus: {"id": str, "title": str?, "text": str} per line.
// Rejects duplicate ids, empty ids, and ids containing whitespace (doc ids
// travel through whitespace-delimited TREC formats).
std::vector<Document> load_corpus(const std::string& path);

void save_corpus(const std::vector<Document>& docs, const std::string& path);

// TSV queries: query_id<TAB>text, one per line. Blank lines are skipped.
std::vector<Query> load_queries(const std::string& path);

// Immutable corpus with id lookup; safe to share across threads.
class DocumentStore {
 public:
  DocumentStore() = default;
  explicit DocumentStore(std::vector<Document> docs);

  // Movable, not copyable: the id map holds views into the stored documents.
  DocumentStore(const DocumentStore&) = delete;
  DocumentStore& operator=(const DocumentStore&) = delete;
  DocumentStore(DocumentStore&&) = default;
  DocumentStore& operator=(DocumentStore&&) = default;

  std::size_t size() const { return docs_.size(); }
  const Document& by_ordinal(std::size_t ordinal) const { return docs_.at(ordinal); }
  const Document* by_id(std::string_view id) const;
  const std::vector<Document>& documents() const { return docs_; }

 private:
  std::vector<Document> docs_;
  std::unordered_map<std::string_view, std::size_t> by_id_;
};

}  // namespace lamer
