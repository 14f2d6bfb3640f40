#include "lamer/pipeline.hpp"

#include <atomic>
#include <chrono>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "lamer/detail/fnv.hpp"

namespace lamer {

std::string_view to_string(PipelineMode m) {
  switch (m) {
    case PipelineMode::lamer: return "lamer";
    case PipelineMode::oracle: return "oracle";
    case PipelineMode::second_round: return "second_round";
    case PipelineMode::baseline_bm25: return "baseline_bm25";
  }
  return "lamer";
}

PipelineMode pipeline_mode_from_string(std::string_view s) {
  if (s == "lamer") return PipelineMode::lamer;
  if (s == "oracle") return PipelineMode::oracle;
  if (s == "second_round") return PipelineMode::second_round;
  if (s == "baseline_bm25") return PipelineMode::baseline_bm25;
  throw std::invalid_argument("unknown pipeline mode \"" + std::string(s) + "\"");
}

AugmentedQuery augment(const Query& query, const AnswerSet& answers,
                       const std::string& separator) {
  if (answers.answers.empty())
    throw std::invalid_argument("augment requires at least one answer");
  AugmentedQuery aq;
  aq.query = query;
  aq.answers = answers;
  for (std::size_t i = 0; i < answers.answers.size(); ++i) {
    if (i > 0) aq.augmented_text += separator;
    aq.augmented_text += query.text;
    aq.augmented_text += separator;
    aq.augmented_text += answers.answers[i];
  }
  return aq;
}

namespace {

double ms_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                   start)
      .count();
}

}  // namespace

Pipeline::Pipeline(const InvertedIndex& idx, const DocumentStore& store,
                   LamerConfig cfg, GenerationBackend& backend, const Qrels* qrels,
                   std::map<std::string, PromptTemplate> templates)
    : idx_(&idx),
      store_(&store),
      cfg_(std::move(cfg)),
      backend_(&backend),
      qrels_(qrels),
      templates_(templates.empty() ? builtin_templates() : std::move(templates)),
      scorer_(idx, cfg_.bm25) {
  cfg_.demo_selection.window = cfg_.M;
  cfg_.generation.num_answers = cfg_.N;
  if (cfg_.mode == PipelineMode::oracle)
    cfg_.demo_selection.scheme = DemoScheme::oracle;
  if (cfg_.demo_selection.scheme == DemoScheme::oracle && !qrels_)
    throw std::invalid_argument("oracle demo selection requires qrels");
  auto it = templates_.find(cfg_.template_key);
  if (it == templates_.end())
    throw std::invalid_argument("unknown template key \"" + cfg_.template_key + "\"");
  template_ = it->second;
}

RankedList Pipeline::run_query(const Query& query, QueryReport* report) {
  Bm25Scorer::Workspace ws;
  return run_query(query, ws, report);
}

RankedList Pipeline::run_query(const Query& query, Bm25Scorer::Workspace& ws,
                               QueryReport* report) {
  QueryReport local;
  QueryReport& rep = report ? *report : local;
  rep.query_id = query.id;
  const auto start = std::chrono::steady_clock::now();
  RankedList result = run_one(query, ws, rep);
  rep.total_ms = ms_since(start);
  return result;
}

RankedList Pipeline::run_one(const Query& query, Bm25Scorer::Workspace& ws,
                             QueryReport& report) {
  if (cfg_.mode == PipelineMode::baseline_bm25) {
    const auto start = std::chrono::steady_clock::now();
    RankedList result = scorer_.retrieve(query.text, cfg_.K, ws);
    report.final_pass_ms = ms_since(start);
    return result;
  }

  // First-pass depth covers whatever the demo scheme needs to see.
  std::size_t depth = 0;
  switch (cfg_.demo_selection.scheme) {
    case DemoScheme::top_consecutive:
      depth = cfg_.demo_selection.start_index + cfg_.demo_selection.window;
      break;
    case DemoScheme::sample_top_n:
      depth = cfg_.demo_selection.sample_top_n;
      break;
    case DemoScheme::sample_collection:
      depth = 0;
      break;
    case DemoScheme::oracle:
      depth = cfg_.demo_selection.window;  // fallback candidates
      break;
  }

  RankedList candidates;
  if (depth > 0) {
    const auto start = std::chrono::steady_clock::now();
    candidates = scorer_.retrieve(query.text, depth, ws);
    report.first_pass_ms = ms_since(start);
  }

  RankedList result = lamer_pass(query, candidates, ws, report);
  if (cfg_.mode == PipelineMode::second_round && !report.fallback) {
    // Rerun demo selection, generation, and augmentation with the first
    // round's final ranking as the candidate source.
    result = lamer_pass(query, result, ws, report);
  }
  return result;
}

RankedList Pipeline::lamer_pass(const Query& query, const RankedList& candidates,
                                Bm25Scorer::Workspace& ws, QueryReport& report) {
  std::vector<Document> demos;
  try {
    demos = select_demos(candidates, cfg_.demo_selection, *store_,
                         idx_->truncation_cap(), qrels_, query.id);
  } catch (const DemoError& e) {
    // Documented oracle behavior: report it, continue with top candidates.
    report.fallback_reason = e.what();
    DemoSelection fallback = cfg_.demo_selection;
    fallback.scheme = DemoScheme::top_consecutive;
    fallback.start_index = 0;
    RankedList top = candidates;
    if (top.entries.empty())
      top = scorer_.retrieve(query.text, cfg_.demo_selection.window, ws);
    demos = select_demos(top, fallback, *store_, idx_->truncation_cap(), qrels_,
                         query.id);
  }

  Query prompt_query = query;
  if (cfg_.truncate_prompt_query)
    prompt_query.text =
        std::string(truncate_text(query.text, idx_->truncation_cap()));
  const std::string prompt = render_prompt(template_, prompt_query, demos);
  report.prompt_tokens = tokenize(prompt).size();

  const auto gen_start = std::chrono::steady_clock::now();
  GenerationOutcome outcome = generate(*backend_, prompt, cfg_.generation);
  report.generation_ms += ms_since(gen_start);
  report.llm_calls += outcome.backend_calls;

  if (outcome.answers.answers.empty()) {
    report.fallback = true;
    report.fallback_reason = "generation failed";
    for (const std::string& failure : outcome.failures) {
      report.fallback_reason += "; ";
      report.fallback_reason += failure;
    }
    const auto start = std::chrono::steady_clock::now();
    RankedList result = scorer_.retrieve(query.text, cfg_.K, ws);
    report.final_pass_ms += ms_since(start);
    return result;
  }

  report.answers_used = outcome.answers.answers.size();
  for (const std::string& answer : outcome.answers.answers)
    report.answer_tokens += tokenize(answer).size();

  const AugmentedQuery aq = augment(query, outcome.answers, cfg_.separator);
  // The augmented query is scored untruncated; capping it at the document
  // cap would discard most of the augmentation.
  const TokenSequence tokens = tokenize(aq.augmented_text);
  report.augmented_tokens = tokens.size();
  const auto start = std::chrono::steady_clock::now();
  RankedList result = scorer_.retrieve_tokens(tokens, cfg_.K, ws);
  report.final_pass_ms += ms_since(start);
  return result;
}

RunResult Pipeline::run_batch(const std::vector<Query>& queries) {
  RunResult result;
  result.run_tag = cfg_.run_tag;
  result.rankings.resize(queries.size());
  result.reports.resize(queries.size());

  const std::size_t workers =
      std::max<std::size_t>(1, std::min(cfg_.generation.concurrency, queries.size()));
  std::atomic<std::size_t> next{0};

  auto work = [&]() {
    Bm25Scorer::Workspace ws;
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= queries.size()) return;
      QueryReport& report = result.reports[i];
      try {
        result.rankings[i] = {queries[i].id, run_query(queries[i], ws, &report)};
      } catch (const std::exception& e) {
        // Degrade to plain BM25 rather than aborting the batch.
        report.query_id = queries[i].id;
        report.fallback = true;
        report.fallback_reason = e.what();
        result.rankings[i] = {queries[i].id,
                              scorer_.retrieve(queries[i].text, cfg_.K, ws)};
      }
    }
  };

  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
    for (std::thread& t : pool) t.join();
  }
  return result;
}

void write_trec_run_file(std::ostream& out, const RunResult& result) {
  for (const auto& [query_id, ranking] : result.rankings)
    write_trec_ranking(out, query_id, ranking, result.run_tag);
}

void write_run_report_json(std::ostream& out, const RunResult& result) {
  nlohmann::json j;
  j["run_tag"] = result.run_tag;
  std::size_t fallbacks = 0, llm_calls = 0;
  nlohmann::json queries = nlohmann::json::array();
  for (const QueryReport& r : result.reports) {
    if (r.fallback) ++fallbacks;
    llm_calls += r.llm_calls;
    queries.push_back({{"query_id", r.query_id},
                       {"fallback", r.fallback},
                       {"fallback_reason", r.fallback_reason},
                       {"llm_calls", r.llm_calls},
                       {"answers_used", r.answers_used},
                       {"prompt_tokens", r.prompt_tokens},
                       {"answer_tokens", r.answer_tokens},
                       {"augmented_tokens", r.augmented_tokens},
                       {"first_pass_ms", r.first_pass_ms},
                       {"generation_ms", r.generation_ms},
                       {"final_pass_ms", r.final_pass_ms},
                       {"total_ms", r.total_ms}});
  }
  j["queries"] = queries;
  j["total_queries"] = result.reports.size();
  j["fallbacks"] = fallbacks;
  j["llm_calls"] = llm_calls;
  out << j.dump(2) << "\n";
}

HashingEncoder::HashingEncoder(std::size_t dimension, std::uint64_t seed)
    : dim_(dimension), seed_(seed) {
  if (dimension == 0) throw std::invalid_argument("encoder dimension must be > 0");
}

std::vector<double> HashingEncoder::encode(const std::string& text) const {
  std::vector<double> vec(dim_, 0.0);
  for (const std::string& token : tokenize(text))
    vec[detail::fnv1a(token, seed_ ^ 0xcbf29ce484222325ULL) % dim_] += 1.0;
  return vec;
}

std::vector<double> fuse_dense(const Query& query, const AnswerSet& answers,
                               const TextEncoder& encoder) {
  if (answers.answers.empty())
    throw std::invalid_argument("fuse_dense requires at least one answer");
  const std::vector<double> query_vec = encoder.encode(query.text);
  if (query_vec.size() != encoder.dimension())
    throw std::invalid_argument("encoder returned wrong dimension for query");
  std::vector<double> fused(query_vec.size(), 0.0);
  for (const std::string& answer : answers.answers) {
    const std::vector<double> answer_vec = encoder.encode(answer);
    if (answer_vec.size() != query_vec.size())
      throw std::invalid_argument("encoder dimension mismatch between texts");
    for (std::size_t i = 0; i < fused.size(); ++i)
      fused[i] += (query_vec[i] + answer_vec[i]) / 2.0;
  }
  const double n = static_cast<double>(answers.answers.size());
  for (double& v : fused) v /= n;
  return fused;
}

}  // namespace lamer
