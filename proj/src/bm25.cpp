#include "lamer/bm25.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <map>
#include <stdexcept>

#include "lamer/kernels.hpp"

namespace lamer {

std::string_view to_string(IdfVariant v) {
  return v == IdfVariant::paper ? "paper" : "lucene";
}

IdfVariant idf_variant_from_string(std::string_view s) {
  if (s == "paper") return IdfVariant::paper;
  if (s == "lucene") return IdfVariant::lucene;
  throw std::invalid_argument("unknown idf variant \"" + std::string(s) +
                              "\" (expected \"paper\" or \"lucene\")");
}

double idf(const InvertedIndex& idx, std::string_view term, IdfVariant variant) {
  const double n = static_cast<double>(idx.doc_frequency(term));
  const double N = static_cast<double>(idx.collection_size());
  const double ratio = (N - n + 0.5) / (n + 0.5);
  return variant == IdfVariant::paper ? std::log(ratio) : std::log(1.0 + ratio);
}

namespace {

double length_norm(const Bm25Params& p, double len, double avgdl) {
  const double rel_len = avgdl > 0.0 ? len / avgdl : 0.0;
  return p.k1 * (1.0 - p.b + p.b * rel_len);
}

// Query-term multiset -> (term, multiplicity), insertion order.
std::vector<std::pair<std::string_view, std::uint32_t>> term_counts(
    const TokenSequence& query) {
  std::vector<std::pair<std::string_view, std::uint32_t>> counts;
  for (const std::string& token : query) {
    auto it = std::find_if(counts.begin(), counts.end(),
                           [&](const auto& c) { return c.first == token; });
    if (it == counts.end())
      counts.emplace_back(token, 1);
    else
      ++it->second;
  }
  return counts;
}

}  // namespace

double score_document(const InvertedIndex& idx, const Bm25Params& params,
                      const TokenSequence& query, std::uint32_t doc_ordinal) {
  const double norm =
      length_norm(params, idx.doc(doc_ordinal).length, idx.avg_doc_length());
  double score = 0.0;
  for (const auto& [term, qtf] : term_counts(query)) {
    const PostingList* list = idx.postings(term);
    if (!list) continue;
    const std::uint32_t tf = list->tf_for(doc_ordinal);
    if (tf == 0) continue;
    const double tfd = static_cast<double>(tf);
    score += qtf * idf(idx, term, params.idf_variant) * (tfd * (params.k1 + 1.0)) /
             (tfd + norm);
  }
  return score;
}

Bm25Scorer::Bm25Scorer(const InvertedIndex& idx, Bm25Params params)
    : idx_(&idx), params_(params) {
  norms_.reserve(idx.collection_size());
  for (const DocEntry& entry : idx.doc_table())
    norms_.push_back(length_norm(params_, entry.length, idx.avg_doc_length()));
}

RankedList Bm25Scorer::retrieve_tokens(const TokenSequence& query, std::size_t k,
                                       Workspace& ws) const {
  RankedList result;
  result.k_requested = k;
  if (k == 0 || idx_->collection_size() == 0 || query.empty()) return result;

  const std::size_t n_docs = idx_->collection_size();
  if (ws.acc.size() < n_docs) {
    ws.acc.assign(n_docs, 0.0);
    ws.mark.assign(n_docs, 0);
    ws.epoch = 0;
  }
  ws.touched.clear();
  ++ws.epoch;
  if (ws.epoch == 0) {  // wrapped; reset marks
    std::fill(ws.mark.begin(), ws.mark.end(), 0);
    ws.epoch = 1;
  }

  const auto score_fn = kernels::active_kernel();
  for (const auto& [term, qtf] : term_counts(query)) {
    const PostingList* list = idx_->postings(term);
    if (!list) continue;
    const double weight =
        qtf * idf(*idx_, term, params_.idf_variant) * (params_.k1 + 1.0);
    score_fn(list->docs.data(), list->tfs.data(), list->size(), norms_.data(),
             weight, ws.acc.data());
    for (const std::uint32_t doc : list->docs) {
      if (ws.mark[doc] != ws.epoch) {
        ws.mark[doc] = ws.epoch;
        ws.touched.push_back(doc);
      }
    }
  }

  // Worse-first ordering for the bounded heap: lower score, then higher id.
  const auto worse = [&](std::uint32_t a, std::uint32_t b) {
    if (ws.acc[a] != ws.acc[b]) return ws.acc[a] < ws.acc[b];
    return idx_->doc(a).doc_id > idx_->doc(b).doc_id;
  };
  const auto heap_cmp = [&](std::uint32_t a, std::uint32_t b) { return worse(b, a); };

  std::vector<std::uint32_t> heap;
  heap.reserve(std::min(k, ws.touched.size()) + 1);
  for (const std::uint32_t doc : ws.touched) {
    if (heap.size() < k) {
      heap.push_back(doc);
      std::push_heap(heap.begin(), heap.end(), heap_cmp);
    } else if (worse(heap.front(), doc)) {
      std::pop_heap(heap.begin(), heap.end(), heap_cmp);
      heap.back() = doc;
      std::push_heap(heap.begin(), heap.end(), heap_cmp);
    }
  }
  std::sort_heap(heap.begin(), heap.end(), heap_cmp);  // best first

  result.entries.reserve(heap.size());
  for (const std::uint32_t doc : heap)
    result.entries.push_back({idx_->doc(doc).doc_id, ws.acc[doc]});

  for (const std::uint32_t doc : ws.touched) ws.acc[doc] = 0.0;
  return result;
}

RankedList Bm25Scorer::retrieve(std::string_view query_text, std::size_t k,
                                Workspace& ws) const {
  return retrieve_tokens(truncate(tokenize(query_text), idx_->truncation_cap()), k,
                         ws);
}

RankedList Bm25Scorer::retrieve(std::string_view query_text, std::size_t k) const {
  Workspace ws;
  return retrieve(query_text, k, ws);
}

RankedList retrieve(const InvertedIndex& idx, const Bm25Params& params,
                    std::string_view query_text, std::size_t k) {
  return Bm25Scorer(idx, params).retrieve(query_text, k);
}

void write_trec_ranking(std::ostream& out, const std::string& query_id,
                        const RankedList& ranking, const std::string& run_tag) {
  const auto flags = out.flags();
  const auto precision = out.precision();
  out << std::fixed << std::setprecision(6);
  std::size_t rank = 1;
  for (const ScoredDoc& entry : ranking.entries) {
    out << query_id << " Q0 " << entry.doc_id << " " << rank << " " << entry.score
        << " " << run_tag << "\n";
    ++rank;
  }
  out.flags(flags);
  out.precision(precision);
}

QpsReport measure_qps(const Bm25Scorer& scorer, const std::vector<Query>& queries,
                      std::size_t k) {
  QpsReport report;
  report.queries = queries.size();
  if (queries.empty()) return report;
  Bm25Scorer::Workspace ws;
  const auto start = std::chrono::steady_clock::now();
  for (const Query& q : queries) {
    volatile std::size_t sink = scorer.retrieve(q.text, k, ws).entries.size();
    (void)sink;
  }
  const auto stop = std::chrono::steady_clock::now();
  report.seconds = std::chrono::duration<double>(stop - start).count();
  if (report.seconds > 0.0) report.qps = queries.size() / report.seconds;
  report.mean_latency_ms = report.seconds * 1000.0 / queries.size();
  return report;
}

}  // namespace lamer
