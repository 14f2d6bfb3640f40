#include "lamer/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

namespace lamer {

Qrels Qrels::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path + ": cannot open file");
  Qrels qrels;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream fields(line);
    std::string query_id, iteration, doc_id, grade_str, extra;
    if (!(fields >> query_id)) continue;  // blank line
    if (!(fields >> iteration >> doc_id >> grade_str) || (fields >> extra))
      throw ParseError(path + " line " + std::to_string(line_no) +
                       ": expected \"query_id 0 doc_id grade\"");
    int grade = 0;
    try {
      std::size_t consumed = 0;
      grade = std::stoi(grade_str, &consumed);
      if (consumed != grade_str.size()) throw std::invalid_argument(grade_str);
    } catch (const std::exception&) {
      throw ParseError(path + " line " + std::to_string(line_no) +
                       ": non-integer grade \"" + grade_str + "\"");
    }
    try {
      qrels.add(query_id, doc_id, grade);
    } catch (const std::exception& e) {
      throw ParseError(path + " line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return qrels;
}

void Qrels::add(const std::string& query_id, const std::string& doc_id, int grade) {
  if (grade < 0)
    throw std::invalid_argument("negative grade for (" + query_id + ", " + doc_id + ")");
  auto [it, inserted] = judgments_[query_id].emplace(doc_id, grade);
  if (!inserted)
    throw std::invalid_argument("duplicate judgment for (" + query_id + ", " +
                                doc_id + ")");
  max_grade_ = std::max(max_grade_, grade);
}

int Qrels::grade(const std::string& query_id, const std::string& doc_id) const {
  auto qit = judgments_.find(query_id);
  if (qit == judgments_.end()) return 0;
  auto dit = qit->second.find(doc_id);
  return dit == qit->second.end() ? 0 : dit->second;
}

bool Qrels::has_query(const std::string& query_id) const {
  return judgments_.count(query_id) > 0;
}

const std::map<std::string, int>* Qrels::judgments_for(
    const std::string& query_id) const {
  auto it = judgments_.find(query_id);
  return it == judgments_.end() ? nullptr : &it->second;
}

std::vector<std::string> Qrels::query_ids() const {
  std::vector<std::string> ids;
  ids.reserve(judgments_.size());
  for (const auto& [qid, docs] : judgments_) ids.push_back(qid);
  return ids;
}

int Qrels::binarization_threshold() const {
  if (threshold_override_) return *threshold_override_;
  return max_grade_ >= 2 ? 2 : 1;
}

void Qrels::set_binarization_threshold(int threshold) {
  threshold_override_ = threshold;
}

std::size_t Qrels::relevant_count(const std::string& query_id) const {
  auto it = judgments_.find(query_id);
  if (it == judgments_.end()) return 0;
  const int threshold = binarization_threshold();
  std::size_t count = 0;
  for (const auto& [doc, grade] : it->second)
    if (grade >= threshold) ++count;
  return count;
}

bool Qrels::has_graded_relevant(const std::string& query_id) const {
  auto it = judgments_.find(query_id);
  if (it == judgments_.end()) return false;
  for (const auto& [doc, grade] : it->second)
    if (grade > 0) return true;
  return false;
}

TrecRun TrecRun::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path + ": cannot open file");
  TrecRun run;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream fields(line);
    std::string query_id, q0, doc_id, rank_str, score_str, tag, extra;
    if (!(fields >> query_id)) continue;
    if (!(fields >> q0 >> doc_id >> rank_str >> score_str >> tag) || (fields >> extra))
      throw ParseError(path + " line " + std::to_string(line_no) +
                       ": expected 6 columns");
    std::size_t rank = 0;
    double score = 0.0;
    try {
      rank = std::stoull(rank_str);
      score = std::stod(score_str);
    } catch (const std::exception&) {
      throw ParseError(path + " line " + std::to_string(line_no) +
                       ": bad rank or score");
    }
    auto [it, inserted] = run.per_query.emplace(query_id, std::vector<Entry>{});
    if (inserted) run.query_order.push_back(query_id);
    if (rank != it->second.size() + 1)
      throw ParseError(path + " line " + std::to_string(line_no) + ": rank " +
                       rank_str + " not contiguous from 1 for query " + query_id);
    for (const Entry& prev : it->second)
      if (prev.doc_id == doc_id)
        throw ParseError(path + " line " + std::to_string(line_no) +
                         ": duplicate doc \"" + doc_id + "\" for query " + query_id);
    it->second.push_back({doc_id, score});
    run.run_tag = tag;
  }
  return run;
}

double ndcg_at_k(const std::vector<std::string>& ranking, const Qrels& qrels,
                 const std::string& query_id, std::size_t k) {
  const std::map<std::string, int>* judged = qrels.judgments_for(query_id);
  if (!judged || !qrels.has_graded_relevant(query_id)) return 0.0;

  double dcg = 0.0;
  for (std::size_t i = 0; i < ranking.size() && i < k; ++i) {
    const int grade = qrels.grade(query_id, ranking[i]);
    if (grade > 0)
      dcg += (std::pow(2.0, grade) - 1.0) / std::log2(static_cast<double>(i) + 2.0);
  }

  std::vector<int> grades;
  grades.reserve(judged->size());
  for (const auto& [doc, grade] : *judged)
    if (grade > 0) grades.push_back(grade);
  std::sort(grades.rbegin(), grades.rend());
  double idcg = 0.0;
  for (std::size_t i = 0; i < grades.size() && i < k; ++i)
    idcg += (std::pow(2.0, grades[i]) - 1.0) / std::log2(static_cast<double>(i) + 2.0);

  return idcg > 0.0 ? dcg / idcg : 0.0;
}

double average_precision(const std::vector<std::string>& ranking, const Qrels& qrels,
                         const std::string& query_id) {
  const std::size_t relevant_total = qrels.relevant_count(query_id);
  if (relevant_total == 0) return 0.0;
  const int threshold = qrels.binarization_threshold();
  double sum = 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < ranking.size(); ++i) {
    if (qrels.grade(query_id, ranking[i]) >= threshold) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(i + 1);
    }
  }
  return sum / static_cast<double>(relevant_total);
}

double recall_at_k(const std::vector<std::string>& ranking, const Qrels& qrels,
                   const std::string& query_id, std::size_t k) {
  const std::size_t relevant_total = qrels.relevant_count(query_id);
  if (relevant_total == 0) return 0.0;
  const int threshold = qrels.binarization_threshold();
  std::size_t hits = 0;
  for (std::size_t i = 0; i < ranking.size() && i < k; ++i)
    if (qrels.grade(query_id, ranking[i]) >= threshold) ++hits;
  return static_cast<double>(hits) / static_cast<double>(relevant_total);
}

MetricsReport evaluate_run(const TrecRun& run, const Qrels& qrels) {
  MetricsReport report;
  report.binarization_threshold = qrels.binarization_threshold();
  double ap_sum = 0.0, ndcg_sum = 0.0, recall_sum = 0.0;
  for (const std::string& qid : qrels.query_ids()) {
    std::vector<std::string> ranking;
    auto it = run.per_query.find(qid);
    if (it != run.per_query.end()) {
      ranking.reserve(it->second.size());
      for (const TrecRun::Entry& e : it->second) ranking.push_back(e.doc_id);
    }
    QueryMetrics qm;
    qm.relevant = qrels.relevant_count(qid);
    qm.has_graded_relevant = qrels.has_graded_relevant(qid);
    qm.ndcg10 = ndcg_at_k(ranking, qrels, qid, 10);
    qm.ap = average_precision(ranking, qrels, qid);
    qm.recall1000 = recall_at_k(ranking, qrels, qid, 1000);
    ++report.queries_in_qrels;
    ndcg_sum += qm.ndcg10;
    if (qm.relevant > 0) {
      ++report.queries_with_relevant;
      ap_sum += qm.ap;
      recall_sum += qm.recall1000;
    } else {
      ++report.queries_without_relevant;
    }
    report.per_query.emplace(qid, qm);
  }
  if (report.queries_in_qrels > 0)
    report.mean_ndcg10 = ndcg_sum / static_cast<double>(report.queries_in_qrels);
  if (report.queries_with_relevant > 0) {
    report.map = ap_sum / static_cast<double>(report.queries_with_relevant);
    report.mean_recall1000 =
        recall_sum / static_cast<double>(report.queries_with_relevant);
  }
  return report;
}

void print_metrics_table(std::ostream& out, const MetricsReport& report) {
  out << std::fixed << std::setprecision(4);
  out << "MAP      " << report.map << "\n";
  out << "nDCG@10  " << report.mean_ndcg10 << "\n";
  out << "R@1k     " << report.mean_recall1000 << "\n";
  out << "queries: " << report.queries_in_qrels << " judged, "
      << report.queries_with_relevant << " with relevant docs, "
      << report.queries_without_relevant << " without (excluded from MAP/R@1k)\n";
}

void write_metrics_json(std::ostream& out, const MetricsReport& report,
                        const std::string& run_tag) {
  nlohmann::json j;
  j["run_tag"] = run_tag;
  j["binarization_threshold"] = report.binarization_threshold;
  j["aggregate"] = {
      {"map", report.map},
      {"ndcg_cut_10", report.mean_ndcg10},
      {"recall_1000", report.mean_recall1000},
      {"queries_in_qrels", report.queries_in_qrels},
      {"queries_with_relevant", report.queries_with_relevant},
      {"queries_without_relevant", report.queries_without_relevant},
  };
  nlohmann::json per_query = nlohmann::json::object();
  for (const auto& [qid, qm] : report.per_query) {
    per_query[qid] = {{"ap", qm.ap},
                      {"ndcg_cut_10", qm.ndcg10},
                      {"recall_1000", qm.recall1000},
                      {"relevant", qm.relevant}};
  }
  j["per_query"] = per_query;
  out << j.dump(2) << "\n";
}

}  // namespace lamer
