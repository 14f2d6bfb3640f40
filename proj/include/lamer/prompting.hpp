#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "lamer/bm25.hpp"
#include "lamer/corpus.hpp"
#include "lamer/eval.hpp"

namespace lamer {

struct PromptTemplate {
  std::string task_key;
  std::string head;  // contains the {q} placeholder
  std::string tail;
};

// The seven bundled task templates: dl, scifact, arguana, covid, fiqa,
// dbpedia, news.
const std::map<std::string, PromptTemplate>& builtin_templates();

// Override file: [key] sections with head= and tail= lines; # comments.
std::map<std::string, PromptTemplate> load_templates(const std::string& path);

// Layout: head with {q} substituted, newline, candidates as "i.{text}" lines
// starting at 1, newline, tail. Zero demos: head, newline, tail. Newlines
// inside candidate text become spaces so each candidate stays on one line.
std::string render_prompt(const PromptTemplate& tmpl, const Query& query,
                          const std::vector<Document>& demos);

enum class DemoScheme { top_consecutive, sample_top_n, sample_collection, oracle };

std::string_view to_string(DemoScheme s);
DemoScheme demo_scheme_from_string(std::string_view s);

struct DemoSelection {
  DemoScheme scheme = DemoScheme::top_consecutive;
  std::size_t window = 10;        // demo count M
  std::size_t start_index = 0;    // top_consecutive
  std::size_t sample_top_n = 100; // sample_top_n pool depth
  std::uint64_t seed = 0;         // sampled schemes
};

// Raised for oracle selection when a query has no gold documents.
class DemoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Returns min(window, available) documents with text truncated to
// demo_token_cap. Sampled schemes draw without replacement, deterministic in
// (seed, query_id). Oracle takes gold docs at or above the qrels threshold,
// highest grade first, doc_id tiebreak.
std::vector<Document> select_demos(const RankedList& ranked, const DemoSelection& sel,
                                   const DocumentStore& store,
                                   std::size_t demo_token_cap, const Qrels* qrels,
                                   const std::string& query_id);

}  // namespace lamer
