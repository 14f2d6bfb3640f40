#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "lamer/corpus.hpp"

namespace lamer {

// Graded relevance judgments, TREC qrels convention.
class Qrels {
 public:
  // Lines: query_id 0 doc_id grade (whitespace-separated; column 2 ignored).
  static Qrels load(const std::string& path);

  // Throws on duplicate (query, doc) pairs or negative grades.
  void add(const std::string& query_id, const std::string& doc_id, int grade);

  int grade(const std::string& query_id, const std::string& doc_id) const;
  bool has_query(const std::string& query_id) const;
  const std::map<std::string, int>* judgments_for(const std::string& query_id) const;
  std::vector<std::string> query_ids() const;  // sorted

  // Binarization for MAP/Recall: grade >= 2 when any judgment reaches 2
  // (graded sets, TREC DL convention), else grade >= 1. Overridable.
  int binarization_threshold() const;
  void set_binarization_threshold(int threshold);

  std::size_t relevant_count(const std::string& query_id) const;  // >= threshold
  bool has_graded_relevant(const std::string& query_id) const;    // any grade > 0

 private:
  std::map<std::string, std::map<std::string, int>> judgments_;
  int max_grade_ = 0;
  std::optional<int> threshold_override_;
};

// TREC run: query_id Q0 doc_id rank score run_tag.
struct TrecRun {
  struct Entry {
    std::string doc_id;
    double score;
  };
  std::vector<std::string> query_order;  // first-appearance order
  std::map<std::string, std::vector<Entry>> per_query;
  std::string run_tag;

  // Validates contiguous ranks from 1 and no duplicate docs per query.
  static TrecRun load(const std::string& path);
};

// DCG gain 2^grade - 1, discount log2(rank + 1); IDCG over the query's
// grades sorted descending. 0 when the query has no graded-relevant doc.
double ndcg_at_k(const std::vector<std::string>& ranking, const Qrels& qrels,
                 const std::string& query_id, std::size_t k = 10);

// Binarized at the qrels threshold, evaluated over the full ranking depth.
double average_precision(const std::vector<std::string>& ranking, const Qrels& qrels,
                         const std::string& query_id);

double recall_at_k(const std::vector<std::string>& ranking, const Qrels& qrels,
                   const std::string& query_id, std::size_t k = 1000);

struct QueryMetrics {
  double ap = 0.0;
  double ndcg10 = 0.0;
  double recall1000 = 0.0;
  std::size_t relevant = 0;         // binarized count
  bool has_graded_relevant = false;
};

struct MetricsReport {
  std::map<std::string, QueryMetrics> per_query;
  double map = 0.0;             // mean over queries with relevant docs
  double mean_ndcg10 = 0.0;     // mean over all qrels queries (0 for unjudged runs)
  double mean_recall1000 = 0.0; // mean over queries with relevant docs
  std::size_t queries_in_qrels = 0;
  std::size_t queries_with_relevant = 0;
  std::size_t queries_without_relevant = 0;
  int binarization_threshold = 1;
};

// Pure function of (run, qrels). Queries in the qrels but missing from the
// run score 0; queries in the run but not judged are ignored.
MetricsReport evaluate_run(const TrecRun& run, const Qrels& qrels);

void print_metrics_table(std::ostream& out, const MetricsReport& report);
void write_metrics_json(std::ostream& out, const MetricsReport& report,
                        const std::string& run_tag);

}  // namespace lamer
