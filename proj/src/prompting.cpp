#include "lamer/prompting.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <random>

#include "lamer/detail/fnv.hpp"

namespace lamer {

const std::map<std::string, PromptTemplate>& builtin_templates() {
  static const std::map<std::string, PromptTemplate> templates = {
      {"dl",
       {"dl",
        "Give a question \"{q}\" and its possible answering passages (most of "
        "these passages are wrong) enumerated as:",
        "please write a correct answering passage."}},
      {"scifact",
       {"scifact",
        "Give a question \"{q}\" and its possible scientific paper passages (most "
        "of these passages are wrong) enumerated as:",
        "please write a correct scientific paper passage."}},
      {"arguana",
       {"arguana",
        "Give a question \"{q}\" and its possible counter-argument passages (most "
        "of these passages are wrong) enumerated as:",
        "please write a correct counter-argument passage."}},
      {"covid",
       {"covid",
        "Give a question \"{q}\" and its possible scientific paper passages (most "
        "of these passages are wrong) enumerated as:",
        "please write a correct scientific paper passage."}},
      {"fiqa",
       {"fiqa",
        "Give a question \"{q}\" and its possible answering financial article "
        "passages (most of these passages are wrong) enumerated as:",
        "please write a correct answering financial article passage."}},
      {"dbpedia",
       {"dbpedia",
        "Give a question \"{q}\" and its possible answering passages (most of "
        "these passages are wrong) enumerated as:",
        "please write a correct answering passage."}},
      {"news",
       {"news",
        "Give a question \"{q}\" and its possible relevant passages (most of "
        "these passages are wrong) enumerated as:",
        "please write a correct relevant passage."}},
  };
  return templates;
}

std::map<std::string, PromptTemplate> load_templates(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path + ": cannot open file");
  std::map<std::string, PromptTemplate> templates;
  std::string line, current;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (line.front() == '[' && line.back() == ']') {
      current = line.substr(1, line.size() - 2);
      if (current.empty())
        throw ParseError(path + " line " + std::to_string(line_no) + ": empty key");
      templates[current].task_key = current;
      continue;
    }
    if (current.empty())
      throw ParseError(path + " line " + std::to_string(line_no) +
                       ": content before any [key] section");
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ParseError(path + " line " + std::to_string(line_no) +
                       ": expected head= or tail=");
    const std::string field = line.substr(0, eq);
    const std::string value = line.substr(eq + 1);
    if (field == "head")
      templates[current].head = value;
    else if (field == "tail")
      templates[current].tail = value;
    else
      throw ParseError(path + " line " + std::to_string(line_no) +
                       ": unknown field \"" + field + "\"");
  }
  for (const auto& [key, tmpl] : templates)
    if (tmpl.head.empty() || tmpl.tail.empty())
      throw ParseError(path + ": template \"" + key + "\" missing head or tail");
  return templates;
}

namespace {

std::string substitute_query(const std::string& head, const std::string& query_text) {
  std::string out = head;
  const std::string placeholder = "{q}";
  for (auto pos = out.find(placeholder); pos != std::string::npos;
       pos = out.find(placeholder, pos + query_text.size()))
    out.replace(pos, placeholder.size(), query_text);
  return out;
}

std::string single_line(std::string_view text) {
  std::string out(text);
  std::replace(out.begin(), out.end(), '\n', ' ');
  std::replace(out.begin(), out.end(), '\r', ' ');
  return out;
}

}  // namespace

std::string render_prompt(const PromptTemplate& tmpl, const Query& query,
                          const std::vector<Document>& demos) {
  std::string out = substitute_query(tmpl.head, query.text);
  out += "\n";
  for (std::size_t i = 0; i < demos.size(); ++i) {
    out += std::to_string(i + 1);
    out += ".";
    out += single_line(demos[i].text);
    out += "\n";
  }
  out += tmpl.tail;
  return out;
}

std::string_view to_string(DemoScheme s) {
  switch (s) {
    case DemoScheme::top_consecutive: return "top_consecutive";
    case DemoScheme::sample_top_n: return "sample_top_n";
    case DemoScheme::sample_collection: return "sample_collection";
    case DemoScheme::oracle: return "oracle";
  }
  return "top_consecutive";
}

DemoScheme demo_scheme_from_string(std::string_view s) {
  if (s == "top_consecutive") return DemoScheme::top_consecutive;
  if (s == "sample_top_n") return DemoScheme::sample_top_n;
  if (s == "sample_collection") return DemoScheme::sample_collection;
  if (s == "oracle") return DemoScheme::oracle;
  throw std::invalid_argument("unknown demo scheme \"" + std::string(s) + "\"");
}

namespace {

std::mt19937_64 query_rng(std::uint64_t seed, const std::string& query_id) {
  // Derived per query so batch results do not depend on execution order.
  return std::mt19937_64(seed ^ detail::fnv1a(query_id));
}

// First `count` elements of a seeded shuffle of [0, pool).
std::vector<std::size_t> sample_without_replacement(std::size_t pool,
                                                    std::size_t count,
                                                    std::mt19937_64& rng) {
  count = std::min(count, pool);
  std::vector<std::size_t> indices(pool);
  std::iota(indices.begin(), indices.end(), 0);
  for (std::size_t i = 0; i < count; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, pool - 1);
    std::swap(indices[i], indices[pick(rng)]);
  }
  indices.resize(count);
  return indices;
}

Document demo_from_store(const DocumentStore& store, const std::string& doc_id,
                         std::size_t cap) {
  const Document* doc = store.by_id(doc_id);
  if (!doc)
    throw std::invalid_argument("doc id \"" + doc_id + "\" not in document store");
  Document out;
  out.id = doc->id;
  out.text = std::string(truncate_text(indexed_text(*doc), cap));
  return out;
}

}  // namespace

std::vector<Document> select_demos(const RankedList& ranked, const DemoSelection& sel,
                                   const DocumentStore& store,
                                   std::size_t demo_token_cap, const Qrels* qrels,
                                   const std::string& query_id) {
  std::vector<Document> demos;
  if (sel.window == 0) return demos;

  switch (sel.scheme) {
    case DemoScheme::top_consecutive: {
      for (std::size_t i = sel.start_index;
           i < ranked.entries.size() && demos.size() < sel.window; ++i)
        demos.push_back(
            demo_from_store(store, ranked.entries[i].doc_id, demo_token_cap));
      break;
    }
    case DemoScheme::sample_top_n: {
      const std::size_t pool = std::min(sel.sample_top_n, ranked.entries.size());
      auto rng = query_rng(sel.seed, query_id);
      for (std::size_t i : sample_without_replacement(pool, sel.window, rng))
        demos.push_back(
            demo_from_store(store, ranked.entries[i].doc_id, demo_token_cap));
      break;
    }
    case DemoScheme::sample_collection: {
      auto rng = query_rng(sel.seed, query_id);
      for (std::size_t i : sample_without_replacement(store.size(), sel.window, rng))
        demos.push_back(
            demo_from_store(store, store.by_ordinal(i).id, demo_token_cap));
      break;
    }
    case DemoScheme::oracle: {
      if (!qrels)
        throw DemoError("oracle demo selection requires qrels");
      const auto* judged = qrels->judgments_for(query_id);
      const int threshold = qrels->binarization_threshold();
      std::vector<std::pair<int, std::string>> gold;  // (grade, doc_id)
      if (judged) {
        for (const auto& [doc_id, grade] : *judged)
          if (grade >= threshold && store.by_id(doc_id)) gold.emplace_back(grade, doc_id);
      }
      if (gold.empty())
        throw DemoError("no gold documents for query \"" + query_id + "\"");
      std::sort(gold.begin(), gold.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;  // highest grade first
        return a.second < b.second;
      });
      for (std::size_t i = 0; i < gold.size() && demos.size() < sel.window; ++i)
        demos.push_back(demo_from_store(store, gold[i].second, demo_token_cap));
      break;
    }
  }
  return demos;
}

}  // namespace lamer
