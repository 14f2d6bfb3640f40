#include "lamer/corpus.hpp"

#include <fstream>
#include <unordered_set>

#include <json.hpp>

namespace lamer {

namespace {

inline bool is_token_byte(unsigned char c) {
  return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') ||
         (c >= 'A' && c <= 'Z') || c >= 0x80;
}

inline char lower_ascii(unsigned char c) {
  return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a')
                                : static_cast<char>(c);
}

bool contains_whitespace(std::string_view s) {
  for (unsigned char c : s)
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v')
      return true;
  return false;
}

}  // namespace

TokenSequence tokenize(std::string_view text) {
  TokenSequence tokens;
  std::string current;
  for (unsigned char c : text) {
    if (is_token_byte(c)) {
      current.push_back(lower_ascii(c));
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

TokenSequence truncate(TokenSequence tokens, std::size_t cap) {
  if (tokens.size() > cap) tokens.resize(cap);
  return tokens;
}

std::string_view truncate_text(std::string_view text, std::size_t cap) {
  if (cap == 0) return text.substr(0, 0);
  std::size_t count = 0;
  bool in_token = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (is_token_byte(static_cast<unsigned char>(text[i]))) {
      if (!in_token) {
        in_token = true;
        ++count;
      }
    } else if (in_token) {
      in_token = false;
      if (count == cap) return text.substr(0, i);
    }
  }
  return text;
}

std::string indexed_text(const Document& doc, bool prepend_title) {
  if (prepend_title && !doc.title.empty()) return doc.title + " " + doc.text;
  return doc.text;
}

std::vector<Document> load_corpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path + ": cannot open file");
  std::vector<Document> docs;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path + " line " + std::to_string(line_no) + ": " + e.what());
    }
    if (!obj.is_object() || !obj.contains("id") || !obj["id"].is_string())
      throw ParseError(path + " line " + std::to_string(line_no) +
                       ": missing or non-string \"id\" field");
    if (!obj.contains("text") || !obj["text"].is_string())
      throw ParseError(path + " line " + std::to_string(line_no) +
                       ": missing or non-string \"text\" field");
    Document doc;
    doc.id = obj["id"].get<std::string>();
    doc.text = obj["text"].get<std::string>();
    if (obj.contains("title")) {
      if (!obj["title"].is_string())
        throw ParseError(path + " line " + std::to_string(line_no) +
                         ": non-string \"title\" field");
      doc.title = obj["title"].get<std::string>();
    }
    if (doc.id.empty())
      throw ParseError(path + " line " + std::to_string(line_no) + ": empty doc id");
    if (contains_whitespace(doc.id))
      throw ParseError(path + " line " + std::to_string(line_no) +
                       ": doc id \"" + doc.id + "\" contains whitespace");
    if (!seen.insert(doc.id).second)
      throw ParseError(path + " line " + std::to_string(line_no) +
                       ": duplicate doc id \"" + doc.id + "\"");
    docs.push_back(std::move(doc));
  }
  return docs;
}

void save_corpus(const std::vector<Document>& docs, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError(path + ": cannot open file for writing");
  for (const auto& doc : docs) {
    nlohmann::json obj;
    obj["id"] = doc.id;
    if (!doc.title.empty()) obj["title"] = doc.title;
    obj["text"] = doc.text;
    out << obj.dump() << "\n";
  }
  if (!out) throw ParseError(path + ": write failed");
}

std::vector<Query> load_queries(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path + ": cannot open file");
  std::vector<Query> queries;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto first_tab = line.find('\t');
    if (first_tab == std::string::npos || line.find('\t', first_tab + 1) != std::string::npos)
      throw ParseError(path + " line " + std::to_string(line_no) +
                       ": expected exactly two TAB-separated columns");
    Query q;
    q.id = line.substr(0, first_tab);
    q.text = line.substr(first_tab + 1);
    if (q.id.empty())
      throw ParseError(path + " line " + std::to_string(line_no) + ": empty query id");
    if (contains_whitespace(q.id))
      throw ParseError(path + " line " + std::to_string(line_no) +
                       ": query id \"" + q.id + "\" contains whitespace");
    if (!seen.insert(q.id).second)
      throw ParseError(path + " line " + std::to_string(line_no) +
                       ": duplicate query id \"" + q.id + "\"");
    queries.push_back(std::move(q));
  }
  return queries;
}

DocumentStore::DocumentStore(std::vector<Document> docs) : docs_(std::move(docs)) {
  by_id_.reserve(docs_.size());
  for (std::size_t i = 0; i < docs_.size(); ++i) {
    if (!by_id_.emplace(docs_[i].id, i).second)
      throw std::invalid_argument("duplicate doc id \"" + docs_[i].id + "\"");
  }
}

const Document* DocumentStore::by_id(std::string_view id) const {
  auto it = by_id_.find(id);
  return it == by_id_.end() ? nullptr : &docs_[it->second];
}

}  // namespace lamer
