#pragma once

#include <map>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include "lamer/bm25.hpp"
#include "lamer/corpus.hpp"
#include "lamer/eval.hpp"
#include "lamer/index.hpp"
#include "lamer/llm.hpp"
#include "lamer/prompting.hpp"

namespace lamer {

enum class PipelineMode { lamer, oracle, second_round, baseline_bm25 };

std::string_view to_string(PipelineMode m);
PipelineMode pipeline_mode_from_string(std::string_view s);

struct LamerConfig {
  std::size_t M = 10;  // demo count; mirrored into demo_selection.window
  std::size_t N = 5;   // answer count; mirrored into generation.num_answers
  std::size_t K = 1000;
  PipelineMode mode = PipelineMode::lamer;
  DemoSelection demo_selection;
  Bm25Params bm25;
  GenerationConfig generation;
  std::string template_key = "dl";
  std::string separator = " ";
  std::string run_tag = "lamer";
  // Queries are truncated at the index cap for scoring only; set this to
  // also truncate the query text inserted into prompts.
  bool truncate_prompt_query = false;
};

struct AugmentedQuery {
  Query query;
  AnswerSet answers;
  std::string augmented_text;  // q a1 q a2 ... q aN
};

// Interleaves the query text before every answer, joined by the separator.
AugmentedQuery augment(const Query& query, const AnswerSet& answers,
                       const std::string& separator);

struct QueryReport {
  std::string query_id;
  bool fallback = false;
  std::string fallback_reason;
  std::size_t llm_calls = 0;
  std::size_t answers_used = 0;
  std::size_t prompt_tokens = 0;
  std::size_t answer_tokens = 0;
  std::size_t augmented_tokens = 0;
  double first_pass_ms = 0.0;
  double generation_ms = 0.0;
  double final_pass_ms = 0.0;
  double total_ms = 0.0;
};

struct RunResult {
  std::vector<std::pair<std::string, RankedList>> rankings;  // input query order
  std::vector<QueryReport> reports;
  std::string run_tag;
};

class Pipeline {
 public:
  // templates empty -> bundled defaults. qrels required for oracle mode.
  Pipeline(const InvertedIndex& idx, const DocumentStore& store, LamerConfig cfg,
           GenerationBackend& backend, const Qrels* qrels = nullptr,
           std::map<std::string, PromptTemplate> templates = {});

  RankedList run_query(const Query& query, QueryReport* report = nullptr);
  RankedList run_query(const Query& query, Bm25Scorer::Workspace& ws,
                       QueryReport* report = nullptr);

  // Processes queries concurrently up to generation.concurrency; output
  // preserves input order. Per-query failures fall back to plain BM25 and
  // are recorded, never aborting the batch.
  RunResult run_batch(const std::vector<Query>& queries);

  const LamerConfig& config() const { return cfg_; }

 private:
  RankedList run_one(const Query& query, Bm25Scorer::Workspace& ws,
                     QueryReport& report);
  RankedList lamer_pass(const Query& query, const RankedList& candidates,
                        Bm25Scorer::Workspace& ws, QueryReport& report);

  const InvertedIndex* idx_;
  const DocumentStore* store_;
  LamerConfig cfg_;
  GenerationBackend* backend_;
  const Qrels* qrels_;
  std::map<std::string, PromptTemplate> templates_;
  Bm25Scorer scorer_;
  PromptTemplate template_;
};

void write_trec_run_file(std::ostream& out, const RunResult& result);
void write_run_report_json(std::ostream& out, const RunResult& result);

// Text embedding provider for dense fusion.
class TextEncoder {
 public:
  virtual ~TextEncoder() = default;
  virtual std::vector<double> encode(const std::string& text) const = 0;
  virtual std::size_t dimension() const = 0;
};

// Deterministic token-hashing encoder: each token adds 1 to the bucket its
// hash selects. A toy provider, sufficient to exercise the fusion formula.
class HashingEncoder : public TextEncoder {
 public:
  explicit HashingEncoder(std::size_t dimension, std::uint64_t seed = 0);
  std::vector<double> encode(const std::string& text) const override;
  std::size_t dimension() const override { return dim_; }

 private:
  std::size_t dim_;
  std::uint64_t seed_;
};

// Mean over answers of (enc(q) + enc(a_l)) / 2. Throws on encoder dimension
// mismatch.
std::vector<double> fuse_dense(const Query& query, const AnswerSet& answers,
                               const TextEncoder& encoder);

}  // namespace lamer
