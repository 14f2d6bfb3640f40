// Command-line driver: index, search, run, eval, stats.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "lamer/bm25.hpp"
#include "lamer/corpus.hpp"
#include "lamer/eval.hpp"
#include "lamer/index.hpp"
#include "lamer/kernels.hpp"
#include "lamer/llm.hpp"
#include "lamer/pipeline.hpp"
#include "lamer/prompting.hpp"

namespace {

using namespace lamer;

void write_text_atomic(const std::string& path, const std::string& data) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error(tmp + ": cannot open for writing");
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    if (!out) throw std::runtime_error(tmp + ": write failed");
  }
  std::filesystem::rename(tmp, path);
}

std::string env_or(const char* name, const std::string& fallback) {
  const char* v = std::getenv(name);
  return v ? std::string(v) : fallback;
}

int cmd_index(const std::string& corpus_path, const std::string& out_dir,
              std::size_t cap, bool prepend_title) {
  const std::vector<Document> docs = load_corpus(corpus_path);
  const InvertedIndex idx = InvertedIndex::build(docs, cap, prepend_title);
  idx.save(out_dir);
  const IndexStatsReport st = index_stats(idx, out_dir);
  std::cout << "indexed " << st.collection_size << " documents, " << st.term_count
            << " terms, " << st.total_tokens << " tokens, " << st.disk_bytes
            << " bytes on disk\n";
  return 0;
}

int cmd_search(const std::string& index_dir, const std::string& queries_path,
               const Bm25Params& params, std::size_t k, const std::string& out_path,
               const std::string& run_tag) {
  const InvertedIndex idx = InvertedIndex::load(index_dir);
  const std::vector<Query> queries = load_queries(queries_path);
  const Bm25Scorer scorer(idx, params);
  Bm25Scorer::Workspace ws;
  std::ostringstream out;
  for (const Query& q : queries)
    write_trec_ranking(out, q.id, scorer.retrieve(q.text, k, ws), run_tag);
  write_text_atomic(out_path, out.str());
  std::cout << "wrote " << out_path << " (" << queries.size() << " queries)\n";
  return 0;
}

int cmd_eval(const std::string& run_path, const std::string& qrels_path,
             const std::string& json_path, std::optional<int> threshold,
             bool per_query) {
  const TrecRun run = TrecRun::load(run_path);
  Qrels qrels = Qrels::load(qrels_path);
  if (threshold) qrels.set_binarization_threshold(*threshold);
  const MetricsReport report = evaluate_run(run, qrels);
  print_metrics_table(std::cout, report);
  if (per_query) {
    std::cout << std::fixed << std::setprecision(4);
    for (const auto& [qid, qm] : report.per_query)
      std::cout << qid << "  ap=" << qm.ap << "  ndcg@10=" << qm.ndcg10
                << "  r@1k=" << qm.recall1000 << "\n";
  }
  if (!json_path.empty()) {
    std::ostringstream out;
    write_metrics_json(out, report, run.run_tag);
    write_text_atomic(json_path, out.str());
  }
  return 0;
}

int cmd_stats(const std::string& index_dir, const std::string& queries_path,
              std::size_t k, const std::string& json_path) {
  const InvertedIndex idx = InvertedIndex::load(index_dir);
  const IndexStatsReport st = index_stats(idx, index_dir);
  std::cout << "documents      " << st.collection_size << "\n";
  std::cout << "terms          " << st.term_count << "\n";
  std::cout << "postings       " << st.total_postings << "\n";
  std::cout << "total tokens   " << st.total_tokens << "\n";
  std::cout << "avg doc len    " << st.avg_doc_length << "\n";
  {
    std::ostringstream gb;
    gb << std::fixed << std::setprecision(3)
       << static_cast<double>(st.disk_bytes) / (1024.0 * 1024.0 * 1024.0);
    std::cout << "index size     " << st.disk_bytes << " bytes (" << gb.str()
              << " GB)\n";
  }
  std::cout << "scoring kernel " << kernels::active_kernel_name() << "\n";

  nlohmann::json j;
  j["documents"] = st.collection_size;
  j["terms"] = st.term_count;
  j["postings"] = st.total_postings;
  j["total_tokens"] = st.total_tokens;
  j["avg_doc_length"] = st.avg_doc_length;
  j["index_bytes"] = st.disk_bytes;
  j["kernel"] = kernels::active_kernel_name();

  if (!queries_path.empty()) {
    const std::vector<Query> queries = load_queries(queries_path);
    const Bm25Scorer scorer(idx, Bm25Params{});
    const QpsReport qps = measure_qps(scorer, queries, k);
    std::cout << "queries        " << qps.queries << "\n";
    std::cout << "qps            " << qps.qps << "\n";
    std::cout << "mean latency   " << qps.mean_latency_ms << " ms\n";
    j["queries"] = qps.queries;
    j["qps"] = qps.qps;
    j["mean_latency_ms"] = qps.mean_latency_ms;
  }
  if (!json_path.empty()) write_text_atomic(json_path, j.dump(2) + "\n");
  return 0;
}

// ---- run subcommand ------------------------------------------------------

struct RunManifest {
  std::string corpus, queries, qrels, index_dir, output_dir;
  std::string mode = "lamer";
  std::size_t M = 10, N = 5, K = 1000;
  std::uint64_t seed = 0;
  std::string demo_scheme = "top_consecutive";
  std::size_t demo_start_index = 0;
  std::size_t demo_sample_top_n = 100;
  Bm25Params bm25;
  std::string backend = "http";
  std::string base_url, model = "gpt-3.5-turbo";
  double temperature = 0.7;
  std::size_t max_answer_tokens = 128;
  std::size_t timeout_s = 60;
  std::size_t max_retries = 3;
  std::size_t retry_backoff_ms = 250;
  std::size_t concurrency = 4;
  std::vector<std::string> fixed_answers;
  std::string template_key = "dl";
  std::string templates_file;
  std::string cache_dir;
  std::string separator = " ";
  std::string run_tag = "lamer";
  bool truncate_prompt_query = false;
};

RunManifest load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(path + ": cannot open manifest");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
  RunManifest m;
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key) && !j[key].is_null()) field = j[key].get<std::decay_t<decltype(field)>>();
  };
  get("corpus", m.corpus);
  get("queries", m.queries);
  get("qrels", m.qrels);
  get("index_dir", m.index_dir);
  get("output_dir", m.output_dir);
  get("mode", m.mode);
  get("M", m.M);
  get("N", m.N);
  get("K", m.K);
  get("seed", m.seed);
  if (j.contains("demo")) {
    const auto& d = j["demo"];
    if (d.contains("scheme")) m.demo_scheme = d["scheme"].get<std::string>();
    if (d.contains("start_index")) m.demo_start_index = d["start_index"].get<std::size_t>();
    if (d.contains("sample_top_n")) m.demo_sample_top_n = d["sample_top_n"].get<std::size_t>();
  }
  if (j.contains("bm25")) {
    const auto& b = j["bm25"];
    if (b.contains("k1")) m.bm25.k1 = b["k1"].get<double>();
    if (b.contains("b")) m.bm25.b = b["b"].get<double>();
    if (b.contains("idf_variant"))
      m.bm25.idf_variant = idf_variant_from_string(b["idf_variant"].get<std::string>());
  }
  if (j.contains("generation")) {
    const auto& g = j["generation"];
    auto gget = [&](const char* key, auto& field) {
      if (g.contains(key) && !g[key].is_null())
        field = g[key].get<std::decay_t<decltype(field)>>();
    };
    gget("backend", m.backend);
    gget("base_url", m.base_url);
    gget("model", m.model);
    gget("temperature", m.temperature);
    gget("max_answer_tokens", m.max_answer_tokens);
    gget("timeout_s", m.timeout_s);
    gget("max_retries", m.max_retries);
    gget("retry_backoff_ms", m.retry_backoff_ms);
    gget("concurrency", m.concurrency);
    gget("fixed_answers", m.fixed_answers);
  }
  get("template_key", m.template_key);
  get("templates_file", m.templates_file);
  get("cache_dir", m.cache_dir);
  get("separator", m.separator);
  get("run_tag", m.run_tag);
  get("truncate_prompt_query", m.truncate_prompt_query);
  return m;
}

nlohmann::json manifest_to_json(const RunManifest& m) {
  nlohmann::json j;
  j["corpus"] = m.corpus;
  j["queries"] = m.queries;
  j["qrels"] = m.qrels;
  j["index_dir"] = m.index_dir;
  j["output_dir"] = m.output_dir;
  j["mode"] = m.mode;
  j["M"] = m.M;
  j["N"] = m.N;
  j["K"] = m.K;
  j["seed"] = m.seed;
  j["demo"] = {{"scheme", m.demo_scheme},
               {"start_index", m.demo_start_index},
               {"sample_top_n", m.demo_sample_top_n}};
  j["bm25"] = {{"k1", m.bm25.k1},
               {"b", m.bm25.b},
               {"idf_variant", std::string(to_string(m.bm25.idf_variant))}};
  j["generation"] = {{"backend", m.backend},
                     {"base_url", m.base_url},
                     {"model", m.model},
                     {"temperature", m.temperature},
                     {"max_answer_tokens", m.max_answer_tokens},
                     {"timeout_s", m.timeout_s},
                     {"max_retries", m.max_retries},
                     {"retry_backoff_ms", m.retry_backoff_ms},
                     {"concurrency", m.concurrency},
                     {"fixed_answers", m.fixed_answers}};
  j["template_key"] = m.template_key;
  j["templates_file"] = m.templates_file;
  j["cache_dir"] = m.cache_dir;
  j["separator"] = m.separator;
  j["run_tag"] = m.run_tag;
  j["truncate_prompt_query"] = m.truncate_prompt_query;
  return j;
}

std::unique_ptr<GenerationBackend> make_backend(const RunManifest& m) {
  std::unique_ptr<GenerationBackend> backend;
  if (m.backend == "http") {
    const std::string base_url =
        m.base_url.empty() ? env_or("LAMER_BASE_URL", "https://api.openai.com/v1")
                           : m.base_url;
    backend = make_http_backend(base_url, env_or("LAMER_API_KEY", ""));
  } else if (m.backend == "echo") {
    backend = make_stub_backend(StubMode::echo_top_candidate);
  } else if (m.backend == "fixed_lexicon") {
    backend = make_stub_backend(StubMode::fixed_lexicon, m.fixed_answers);
  } else if (m.backend == "keyed_hash") {
    backend = make_stub_backend(StubMode::keyed_hash);
  } else if (m.backend == "failing") {
    backend = make_failing_backend();
  } else {
    throw std::runtime_error("unknown generation backend \"" + m.backend + "\"");
  }
  if (!m.cache_dir.empty())
    backend = make_caching_backend(std::move(backend), m.cache_dir);
  return backend;
}

int cmd_run(const RunManifest& m) {
  auto require = [&](const std::string& value, const char* field) {
    if (value.empty())
      throw std::runtime_error(std::string("manifest field \"") + field +
                               "\" is required");
    return value;
  };
  require(m.queries, "queries");
  require(m.index_dir, "index_dir");
  require(m.output_dir, "output_dir");

  const InvertedIndex idx = InvertedIndex::load(m.index_dir);
  const std::vector<Query> queries = load_queries(m.queries);

  const PipelineMode mode = pipeline_mode_from_string(m.mode);
  DocumentStore store;
  if (mode != PipelineMode::baseline_bm25)
    store = DocumentStore(load_corpus(require(m.corpus, "corpus")));

  Qrels qrels;
  bool have_qrels = false;
  if (!m.qrels.empty()) {
    qrels = Qrels::load(m.qrels);
    have_qrels = true;
  }

  LamerConfig cfg;
  cfg.M = m.M;
  cfg.N = m.N;
  cfg.K = m.K;
  cfg.mode = mode;
  cfg.demo_selection.scheme = demo_scheme_from_string(m.demo_scheme);
  cfg.demo_selection.start_index = m.demo_start_index;
  cfg.demo_selection.sample_top_n = m.demo_sample_top_n;
  cfg.demo_selection.seed = m.seed;
  cfg.bm25 = m.bm25;
  cfg.generation.model_name = m.model;
  cfg.generation.temperature = m.temperature;
  cfg.generation.max_answer_tokens = m.max_answer_tokens;
  cfg.generation.timeout = std::chrono::seconds(m.timeout_s);
  cfg.generation.max_retries = m.max_retries;
  cfg.generation.retry_backoff = std::chrono::milliseconds(m.retry_backoff_ms);
  cfg.generation.concurrency = m.concurrency;
  cfg.template_key = m.template_key;
  cfg.separator = m.separator;
  cfg.run_tag = m.run_tag;
  cfg.truncate_prompt_query = m.truncate_prompt_query;

  std::map<std::string, PromptTemplate> templates;
  if (!m.templates_file.empty()) templates = load_templates(m.templates_file);

  std::unique_ptr<GenerationBackend> backend = make_backend(m);

  std::filesystem::create_directories(m.output_dir);
  const std::filesystem::path out_dir(m.output_dir);

  RunResult result;
  if (mode == PipelineMode::baseline_bm25) {
    // Plain first-pass retrieval; identical to `search` output.
    const Bm25Scorer scorer(idx, cfg.bm25);
    Bm25Scorer::Workspace ws;
    result.run_tag = cfg.run_tag;
    for (const Query& q : queries) {
      QueryReport report;
      report.query_id = q.id;
      result.rankings.emplace_back(q.id, scorer.retrieve(q.text, cfg.K, ws));
      result.reports.push_back(report);
    }
  } else {
    Pipeline pipeline(idx, store, cfg, *backend, have_qrels ? &qrels : nullptr,
                      templates);
    result = pipeline.run_batch(queries);
  }

  std::ostringstream run_out;
  write_trec_run_file(run_out, result);
  write_text_atomic((out_dir / "run.trec").string(), run_out.str());

  std::ostringstream report_out;
  write_run_report_json(report_out, result);
  write_text_atomic((out_dir / "report.json").string(), report_out.str());

  write_text_atomic((out_dir / "manifest.json").string(),
                    manifest_to_json(m).dump(2) + "\n");

  std::size_t fallbacks = 0;
  for (const QueryReport& r : result.reports)
    if (r.fallback) ++fallbacks;
  std::cout << "wrote " << (out_dir / "run.trec").string() << " ("
            << queries.size() << " queries, " << fallbacks << " fallbacks)\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Zero-shot BM25 retrieval with LLM answer augmentation"};
  app.require_subcommand(1);

  // index
  auto* index_cmd = app.add_subcommand("index", "Build an inverted index from a JSONL corpus");
  std::string corpus_path, out_dir;
  std::size_t cap = 128;
  bool no_title = false;
  index_cmd->add_option("--corpus", corpus_path, "Corpus JSONL file")->required();
  index_cmd->add_option("--out", out_dir, "Output index directory")->required();
  index_cmd->add_option("--cap", cap, "Truncation cap in tokens (default 128)");
  index_cmd->add_flag("--no-title", no_title, "Do not prepend titles to document text");

  // search
  auto* search_cmd = app.add_subcommand("search", "BM25 top-K retrieval to a TREC run file");
  std::string index_dir, queries_path, out_run, run_tag = "bm25", idf_name = "paper";
  std::size_t k = 1000;
  Bm25Params params;
  search_cmd->add_option("--index", index_dir, "Index directory")->required();
  search_cmd->add_option("--queries", queries_path, "Queries TSV file")->required();
  search_cmd->add_option("--out", out_run, "Output run file")->required();
  search_cmd->add_option("--k", k, "Retrieval depth (default 1000)");
  search_cmd->add_option("--k1", params.k1, "BM25 k1 (default 0.9)");
  search_cmd->add_option("--b", params.b, "BM25 b (default 0.4)");
  search_cmd->add_option("--idf", idf_name, "IDF variant: paper or lucene");
  search_cmd->add_option("--tag", run_tag, "Run tag (default bm25)");

  // run
  auto* run_cmd = app.add_subcommand("run", "Full retrieval pipeline from a manifest");
  std::string manifest_path;
  RunManifest overrides;
  run_cmd->add_option("--manifest", manifest_path, "Manifest JSON file");
  std::string ov_mode, ov_backend, ov_base_url, ov_model, ov_template, ov_cache,
      ov_out, ov_tag, ov_corpus, ov_queries, ov_qrels, ov_index, ov_idf, ov_scheme;
  std::optional<std::size_t> ov_M, ov_N, ov_K, ov_start, ov_topn, ov_concurrency;
  std::optional<std::uint64_t> ov_seed;
  run_cmd->add_option("--corpus", ov_corpus, "Corpus JSONL (overrides manifest)");
  run_cmd->add_option("--queries", ov_queries, "Queries TSV (overrides manifest)");
  run_cmd->add_option("--qrels", ov_qrels, "Qrels file (overrides manifest)");
  run_cmd->add_option("--index", ov_index, "Index directory (overrides manifest)");
  run_cmd->add_option("--out-dir", ov_out, "Output directory (overrides manifest)");
  run_cmd->add_option("--mode", ov_mode, "lamer | oracle | second_round | baseline_bm25");
  run_cmd->add_option("--M", ov_M, "Demo-passage count");
  run_cmd->add_option("--N", ov_N, "Generated answer count");
  run_cmd->add_option("--K", ov_K, "Final retrieval depth");
  run_cmd->add_option("--seed", ov_seed, "Seed for sampled demo schemes");
  run_cmd->add_option("--demo-scheme", ov_scheme,
                      "top_consecutive | sample_top_n | sample_collection | oracle");
  run_cmd->add_option("--demo-start", ov_start, "Start index for top_consecutive");
  run_cmd->add_option("--demo-top-n", ov_topn, "Pool depth for sample_top_n");
  run_cmd->add_option("--backend", ov_backend,
                      "http | echo | fixed_lexicon | keyed_hash | failing");
  run_cmd->add_option("--base-url", ov_base_url, "Chat-completions API root");
  run_cmd->add_option("--model", ov_model, "Model name");
  run_cmd->add_option("--template", ov_template, "Prompt template key");
  run_cmd->add_option("--cache-dir", ov_cache, "LLM response cache directory");
  run_cmd->add_option("--concurrency", ov_concurrency, "Concurrent in-flight queries");
  run_cmd->add_option("--idf", ov_idf, "IDF variant: paper or lucene");
  run_cmd->add_option("--tag", ov_tag, "Run tag");

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "Score a TREC run against qrels");
  std::string eval_run, eval_qrels, eval_json;
  std::optional<int> eval_threshold;
  bool eval_per_query = false;
  eval_cmd->add_option("--run", eval_run, "TREC run file")->required();
  eval_cmd->add_option("--qrels", eval_qrels, "Qrels file")->required();
  eval_cmd->add_option("--json", eval_json, "Also write metrics JSON here");
  eval_cmd->add_option("--threshold", eval_threshold,
                       "Binarization threshold override for MAP/R@1k");
  eval_cmd->add_flag("--per-query", eval_per_query, "Print per-query metrics");

  // stats
  auto* stats_cmd = app.add_subcommand("stats", "Index size and retrieval throughput");
  std::string stats_index, stats_queries, stats_json;
  std::size_t stats_k = 1000;
  stats_cmd->add_option("--index", stats_index, "Index directory")->required();
  stats_cmd->add_option("--queries", stats_queries, "Optional queries TSV for QPS");
  stats_cmd->add_option("--k", stats_k, "Retrieval depth for QPS (default 1000)");
  stats_cmd->add_option("--json", stats_json, "Also write the report as JSON here");

  CLI11_PARSE(app, argc, argv);

  try {
    if (index_cmd->parsed())
      return cmd_index(corpus_path, out_dir, cap, !no_title);
    if (search_cmd->parsed()) {
      params.idf_variant = idf_variant_from_string(idf_name);
      return cmd_search(index_dir, queries_path, params, k, out_run, run_tag);
    }
    if (run_cmd->parsed()) {
      RunManifest m;
      if (!manifest_path.empty()) {
        m = load_manifest(manifest_path);
      }
      if (!ov_corpus.empty()) m.corpus = ov_corpus;
      if (!ov_queries.empty()) m.queries = ov_queries;
      if (!ov_qrels.empty()) m.qrels = ov_qrels;
      if (!ov_index.empty()) m.index_dir = ov_index;
      if (!ov_out.empty()) m.output_dir = ov_out;
      if (!ov_mode.empty()) m.mode = ov_mode;
      if (ov_M) m.M = *ov_M;
      if (ov_N) m.N = *ov_N;
      if (ov_K) m.K = *ov_K;
      if (ov_seed) m.seed = *ov_seed;
      if (!ov_scheme.empty()) m.demo_scheme = ov_scheme;
      if (ov_start) m.demo_start_index = *ov_start;
      if (ov_topn) m.demo_sample_top_n = *ov_topn;
      if (!ov_backend.empty()) m.backend = ov_backend;
      if (!ov_base_url.empty()) m.base_url = ov_base_url;
      if (!ov_model.empty()) m.model = ov_model;
      if (!ov_template.empty()) m.template_key = ov_template;
      if (!ov_cache.empty()) m.cache_dir = ov_cache;
      if (ov_concurrency) m.concurrency = *ov_concurrency;
      if (!ov_idf.empty()) m.bm25.idf_variant = idf_variant_from_string(ov_idf);
      if (!ov_tag.empty()) m.run_tag = ov_tag;
      return cmd_run(m);
    }
    if (eval_cmd->parsed())
      return cmd_eval(eval_run, eval_qrels, eval_json, eval_threshold, eval_per_query);
    if (stats_cmd->parsed())
      return cmd_stats(stats_index, stats_queries, stats_k, stats_json);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
