#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "lamer/corpus.hpp"
#include "lamer/index.hpp"

namespace lamer {

enum class IdfVariant { paper, lucene };

std::string_view to_string(IdfVariant v);
IdfVariant idf_variant_from_string(std::string_view s);

struct Bm25Params {
  double k1 = 0.9;
  double b = 0.4;
  IdfVariant idf_variant = IdfVariant::paper;
};

struct ScoredDoc {
  std::string doc_id;
  double score;
};

// Descending by score, ties ascending by doc_id. Holds only documents with
// at least one matching query term, at most k_requested of them.
struct RankedList {
  std::vector<ScoredDoc> entries;
  std::size_t k_requested = 0;
};

// paper:  ln((N - n + 0.5) / (n + 0.5)), may be negative.
// lucene: ln(1 + (N - n + 0.5) / (n + 0.5)), always positive.
double idf(const InvertedIndex& idx, std::string_view term, IdfVariant variant);

// Direct evaluation of one document against a tokenized query. Terms
// contribute once per occurrence in the query.
double score_document(const InvertedIndex& idx, const Bm25Params& params,
                      const TokenSequence& query, std::uint32_t doc_ordinal);

class Bm25Scorer {
 public:
  Bm25Scorer(const InvertedIndex& idx, Bm25Params params);

  // Reusable per-thread scratch; one per concurrent caller.
  struct Workspace {
    std::vector<double> acc;
    std::vector<std::uint32_t> mark;
    std::vector<std::uint32_t> touched;
    std::uint32_t epoch = 0;
  };

  // Scores an already-tokenized query; no truncation applied.
  RankedList retrieve_tokens(const TokenSequence& query, std::size_t k,
                             Workspace& ws) const;

  // Tokenizes and truncates the query text at the index cap, then scores.
  RankedList retrieve(std::string_view query_text, std::size_t k, Workspace& ws) const;
  RankedList retrieve(std::string_view query_text, std::size_t k) const;

  const Bm25Params& params() const { return params_; }
  const InvertedIndex& index() const { return *idx_; }

 private:
  const InvertedIndex* idx_;
  Bm25Params params_;
  std::vector<double> norms_;  // k1 * (1 - b + b * len/avgdl) per ordinal
};

// One-shot convenience form.
RankedList retrieve(const InvertedIndex& idx, const Bm25Params& params,
                    std::string_view query_text, std::size_t k);

// TREC run line: query_id Q0 doc_id rank score run_tag (rank from 1, score
// with 6 decimal places).
void write_trec_ranking(std::ostream& out, const std::string& query_id,
                        const RankedList& ranking, const std::string& run_tag);

struct QpsReport {
  std::size_t queries = 0;
  double seconds = 0.0;
  double qps = 0.0;
  double mean_latency_ms = 0.0;
};

QpsReport measure_qps(const Bm25Scorer& scorer, const std::vector<Query>& queries,
                      std::size_t k);

}  // namespace lamer
