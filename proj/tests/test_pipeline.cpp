#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "lamer/pipeline.hpp"
#include "test_support.hpp"

using namespace lamer;
using testsupport::TempDir;

TEST_CASE("augment interleaves query and answers") {
  const Query q{"qid", "q0"};
  SUBCASE("two answers") {
    const AugmentedQuery aq = augment(q, {{"a1", "a2"}}, " ");
    CHECK(aq.augmented_text == "q0 a1 q0 a2");
  }
  SUBCASE("single answer") {
    CHECK(augment(q, {{"x"}}, " ").augmented_text == "q0 x");
  }
  SUBCASE("custom separator") {
    CHECK(augment(q, {{"a1", "a2"}}, " | ").augmented_text == "q0 | a1 | q0 | a2");
  }
  SUBCASE("no answers is a contract violation") {
    CHECK_THROWS_AS(augment(q, {{}}, " "), std::invalid_argument);
  }
}

TEST_CASE("interleave pattern recovers the parts for collision-free fixtures") {
  std::mt19937_64 rng(5);
  for (int round = 0; round < 30; ++round) {
    std::uniform_int_distribution<std::size_t> n_dist(1, 6);
    const std::size_t n = n_dist(rng);
    std::vector<std::string> answers;
    for (std::size_t i = 0; i < n; ++i)
      answers.push_back("ans" + std::to_string(rng() % 1000) + "x" + std::to_string(i));
    const Query q{"qid", "query" + std::to_string(rng() % 100)};
    const AugmentedQuery aq = augment(q, {answers}, " ");

    // split on the separator and match (q, a1, q, a2, ..., q, aN)
    std::istringstream parts(aq.augmented_text);
    std::string part;
    std::vector<std::string> tokens;
    while (std::getline(parts, part, ' ')) tokens.push_back(part);
    REQUIRE(tokens.size() == 2 * n);
    for (std::size_t i = 0; i < n; ++i) {
      CHECK(tokens[2 * i] == q.text);
      CHECK(tokens[2 * i + 1] == answers[i]);
    }
  }
}

TEST_CASE("augmented score decomposes per the concatenated token multiset") {
  std::mt19937_64 rng(6);
  const auto docs = testsupport::random_corpus(rng, 80, 20);
  const auto idx = InvertedIndex::build(docs, 128);
  const Bm25Params params;

  for (int round = 0; round < 10; ++round) {
    const Query q{"q", testsupport::random_query(rng, 20)};
    AnswerSet answers;
    std::uniform_int_distribution<std::size_t> n_dist(1, 4);
    const std::size_t n = n_dist(rng);
    for (std::size_t i = 0; i < n; ++i) answers.answers.push_back(testsupport::random_query(rng, 20));
    const AugmentedQuery aq = augment(q, answers, " ");

    for (std::uint32_t d = 0; d < std::min<std::size_t>(docs.size(), 20); ++d) {
      const double whole = score_document(idx, params, tokenize(aq.augmented_text), d);
      double parts = static_cast<double>(n) * score_document(idx, params, tokenize(q.text), d);
      for (const auto& answer : answers.answers)
        parts += score_document(idx, params, tokenize(answer), d);
      CHECK(whole == doctest::Approx(parts).epsilon(1e-9));
    }
  }
}

TEST_CASE("answers equal to the query leave the argmax unchanged") {
  std::mt19937_64 rng(61);
  const auto docs = testsupport::random_corpus(rng, 100, 20);
  const auto idx = InvertedIndex::build(docs, 128);
  const Bm25Scorer scorer(idx, Bm25Params{});
  Bm25Scorer::Workspace ws;
  for (int i = 0; i < 10; ++i) {
    const Query q{"q", testsupport::random_query(rng, 20)};
    const RankedList plain = scorer.retrieve(q.text, docs.size(), ws);
    const AugmentedQuery aq = augment(q, {{q.text}}, " ");
    const RankedList doubled = scorer.retrieve_tokens(tokenize(aq.augmented_text),
                                                      docs.size(), ws);
    REQUIRE(doubled.entries.size() == plain.entries.size());
    for (std::size_t j = 0; j < plain.entries.size(); ++j) {
      CHECK(doubled.entries[j].doc_id == plain.entries[j].doc_id);
      CHECK(doubled.entries[j].score ==
            doctest::Approx(2.0 * plain.entries[j].score).epsilon(1e-9));
    }
  }
}

namespace {

struct PipelineFixture {
  std::vector<Document> docs;
  DocumentStore store;
  InvertedIndex idx;
  std::vector<Query> queries;

  static PipelineFixture make() {
    PipelineFixture f;
    std::mt19937_64 rng(99);
    f.docs = testsupport::random_corpus(rng, 60, 25);
    for (int i = 0; i < 6; ++i)
      f.queries.push_back({"q" + std::to_string(i), testsupport::random_query(rng, 25)});
    f.store = DocumentStore(f.docs);
    f.idx = InvertedIndex::build(f.docs, 128);
    return f;
  }
};

LamerConfig stub_config() {
  LamerConfig cfg;
  cfg.M = 5;
  cfg.N = 3;
  cfg.K = 50;
  cfg.generation.max_retries = 1;
  cfg.generation.retry_backoff = std::chrono::milliseconds(1);
  return cfg;
}

}  // namespace

TEST_CASE("baseline mode equals plain retrieval") {
  auto f = PipelineFixture::make();
  LamerConfig cfg = stub_config();
  cfg.mode = PipelineMode::baseline_bm25;
  auto backend = make_stub_backend(StubMode::keyed_hash);
  Pipeline pipeline(f.idx, f.store, cfg, *backend);
  const Bm25Scorer scorer(f.idx, cfg.bm25);
  for (const Query& q : f.queries) {
    const RankedList got = pipeline.run_query(q);
    const RankedList expected = scorer.retrieve(q.text, cfg.K);
    REQUIRE(got.entries.size() == expected.entries.size());
    for (std::size_t i = 0; i < got.entries.size(); ++i) {
      CHECK(got.entries[i].doc_id == expected.entries[i].doc_id);
      CHECK(got.entries[i].score == expected.entries[i].score);
    }
  }
}

TEST_CASE("M=0 produces an enumeration-free prompt and a full-depth list") {
  auto f = PipelineFixture::make();
  LamerConfig cfg = stub_config();
  cfg.M = 0;
  auto backend = make_stub_backend(StubMode::keyed_hash);
  Pipeline pipeline(f.idx, f.store, cfg, *backend);
  QueryReport report;
  const RankedList got = pipeline.run_query(f.queries[0], &report);
  CHECK_FALSE(report.fallback);
  CHECK(report.answers_used == 3);
  CHECK_FALSE(got.entries.empty());
  CHECK(got.k_requested == cfg.K);
}

TEST_CASE("M=0 and M>0 runs are identical with a candidates-ignoring backend") {
  auto f = PipelineFixture::make();
  auto backend = make_stub_backend(StubMode::keyed_hash);

  LamerConfig cfg0 = stub_config();
  cfg0.M = 0;
  LamerConfig cfg5 = stub_config();
  cfg5.M = 5;

  Pipeline p0(f.idx, f.store, cfg0, *backend);
  Pipeline p5(f.idx, f.store, cfg5, *backend);
  const RunResult r0 = p0.run_batch(f.queries);
  const RunResult r5 = p5.run_batch(f.queries);

  std::ostringstream out0, out5;
  write_trec_run_file(out0, r0);
  write_trec_run_file(out5, r5);
  CHECK(out0.str() == out5.str());
}

TEST_CASE("generation failure falls back to plain BM25 and is recorded") {
  auto f = PipelineFixture::make();
  LamerConfig cfg = stub_config();
  auto backend = make_failing_backend();
  Pipeline pipeline(f.idx, f.store, cfg, *backend);
  const Bm25Scorer scorer(f.idx, cfg.bm25);

  QueryReport report;
  const RankedList got = pipeline.run_query(f.queries[0], &report);
  CHECK(report.fallback);
  CHECK(report.fallback_reason.find("generation failed") != std::string::npos);
  const RankedList expected = scorer.retrieve(f.queries[0].text, cfg.K);
  REQUIRE(got.entries.size() == expected.entries.size());
  for (std::size_t i = 0; i < got.entries.size(); ++i)
    CHECK(got.entries[i].doc_id == expected.entries[i].doc_id);

  const RunResult batch = pipeline.run_batch(f.queries);
  for (const QueryReport& r : batch.reports) CHECK(r.fallback);
}

TEST_CASE("oracle mode uses gold demos; zero-gold queries fall back to top candidates") {
  auto f = PipelineFixture::make();
  Qrels qrels;
  // Gold docs only for q0; give q1 a judged-but-irrelevant row.
  qrels.add(f.queries[0].id, f.docs[0].id, 1);
  qrels.add(f.queries[0].id, f.docs[1].id, 1);
  qrels.add(f.queries[1].id, f.docs[2].id, 0);

  LamerConfig cfg = stub_config();
  cfg.mode = PipelineMode::oracle;
  auto backend = make_stub_backend(StubMode::keyed_hash);
  Pipeline pipeline(f.idx, f.store, cfg, *backend, &qrels);

  QueryReport r0;
  pipeline.run_query(f.queries[0], &r0);
  CHECK_FALSE(r0.fallback);
  CHECK(r0.fallback_reason.empty());

  QueryReport r1;
  pipeline.run_query(f.queries[1], &r1);
  CHECK_FALSE(r1.fallback);  // still ran the LLM path
  CHECK(r1.fallback_reason.find("no gold documents") != std::string::npos);

  SUBCASE("oracle without qrels is rejected at construction") {
    CHECK_THROWS_AS(Pipeline(f.idx, f.store, cfg, *backend, nullptr),
                    std::invalid_argument);
  }
}

TEST_CASE("second round runs the augmentation stage twice") {
  auto f = PipelineFixture::make();
  LamerConfig cfg = stub_config();
  cfg.mode = PipelineMode::second_round;
  auto backend = make_stub_backend(StubMode::echo_top_candidate);
  Pipeline pipeline(f.idx, f.store, cfg, *backend);
  QueryReport report;
  const RankedList got = pipeline.run_query(f.queries[0], &report);
  CHECK(got.k_requested == cfg.K);
  // N samples per round, two rounds
  CHECK(report.llm_calls == 2 * cfg.N);
}

TEST_CASE("run_batch preserves input order and parallel runs are deterministic") {
  auto f = PipelineFixture::make();
  LamerConfig cfg = stub_config();
  auto backend = make_stub_backend(StubMode::keyed_hash);

  cfg.generation.concurrency = 1;
  Pipeline serial(f.idx, f.store, cfg, *backend);
  const RunResult a = serial.run_batch(f.queries);

  cfg.generation.concurrency = 4;
  Pipeline parallel(f.idx, f.store, cfg, *backend);
  const RunResult b = parallel.run_batch(f.queries);

  REQUIRE(a.rankings.size() == f.queries.size());
  for (std::size_t i = 0; i < f.queries.size(); ++i)
    CHECK(a.rankings[i].first == f.queries[i].id);

  std::ostringstream sa, sb;
  write_trec_run_file(sa, a);
  write_trec_run_file(sb, b);
  CHECK(sa.str() == sb.str());
}

TEST_CASE("echo backend lifts the gold document's score above baseline") {
  // Each query's gold doc is BM25-top-1 (its unique terms), and the echo stub
  // feeds exactly that doc's text back as every answer.
  // Every term appears in fewer than half the docs, keeping paper IDF
  // positive so the gold doc's self-match contributes positively.
  std::vector<Document> docs;
  for (int i = 0; i < 20; ++i) {
    std::string text = "uniq" + std::to_string(i) + "a uniq" + std::to_string(i) +
                       "b shared" + std::to_string(i % 4) + " extra" +
                       std::to_string(i % 5) + " pad" + std::to_string(i);
    docs.push_back({"doc" + std::to_string(i), "", text});
  }
  const DocumentStore store(docs);
  const auto idx = InvertedIndex::build(docs, 128);

  LamerConfig cfg = stub_config();
  cfg.M = 3;
  auto backend = make_stub_backend(StubMode::echo_top_candidate);
  Pipeline pipeline(idx, store, cfg, *backend);
  const Bm25Scorer scorer(idx, cfg.bm25);

  for (int i = 0; i < 20; i += 5) {
    const Query q{"q" + std::to_string(i),
                  "uniq" + std::to_string(i) + "a uniq" + std::to_string(i) + "b"};
    const std::string gold = "doc" + std::to_string(i);
    const RankedList baseline = scorer.retrieve(q.text, cfg.K);
    REQUIRE(baseline.entries[0].doc_id == gold);

    const RankedList final = pipeline.run_query(q);
    REQUIRE_FALSE(final.entries.empty());
    CHECK(final.entries[0].doc_id == gold);

    double base_score = 0.0, final_score = 0.0;
    for (const auto& e : baseline.entries)
      if (e.doc_id == gold) base_score = e.score;
    for (const auto& e : final.entries)
      if (e.doc_id == gold) final_score = e.score;
    CHECK(final_score > base_score);
  }
}

TEST_CASE("fuse_dense implements the fusion formula") {
  const HashingEncoder encoder(16);
  const Query q{"q", "what is bm25"};

  SUBCASE("answers equal to the query return enc(q) exactly") {
    const AnswerSet answers{{q.text, q.text, q.text}};
    const auto fused = fuse_dense(q, answers, encoder);
    const auto direct = encoder.encode(q.text);
    REQUIRE(fused.size() == direct.size());
    for (std::size_t i = 0; i < fused.size(); ++i) CHECK(fused[i] == direct[i]);
  }

  SUBCASE("N=1 gives the midpoint") {
    const AnswerSet answers{{"retrieval ranking"}};
    const auto fused = fuse_dense(q, answers, encoder);
    const auto eq = encoder.encode(q.text);
    const auto ea = encoder.encode("retrieval ranking");
    for (std::size_t i = 0; i < fused.size(); ++i)
      CHECK(fused[i] == doctest::Approx((eq[i] + ea[i]) / 2.0).epsilon(1e-12));
  }

  SUBCASE("two answers match an independent recomputation") {
    const AnswerSet answers{{"first answer text", "second answer about ranking"}};
    const auto fused = fuse_dense(q, answers, encoder);
    const auto eq = encoder.encode(q.text);
    const auto e1 = encoder.encode(answers.answers[0]);
    const auto e2 = encoder.encode(answers.answers[1]);
    for (std::size_t i = 0; i < fused.size(); ++i) {
      const double expected = ((eq[i] + e1[i]) / 2.0 + (eq[i] + e2[i]) / 2.0) / 2.0;
      CHECK(std::abs(fused[i] - expected) <= 1e-9);
    }
  }

  SUBCASE("dimension mismatch is rejected") {
    struct BrokenEncoder : TextEncoder {
      std::vector<double> encode(const std::string& text) const override {
        return std::vector<double>(text.size() % 3 + 1, 1.0);
      }
      std::size_t dimension() const override { return 2; }
    };
    CHECK_THROWS_AS(fuse_dense(q, {{"a", "bb"}}, BrokenEncoder{}),
                    std::invalid_argument);
  }
}

TEST_CASE("run report json carries stage timings and fallback flags") {
  auto f = PipelineFixture::make();
  LamerConfig cfg = stub_config();
  auto backend = make_stub_backend(StubMode::keyed_hash);
  Pipeline pipeline(f.idx, f.store, cfg, *backend);
  const RunResult result = pipeline.run_batch(f.queries);
  std::ostringstream out;
  write_run_report_json(out, result);
  CHECK(out.str().find("\"llm_calls\"") != std::string::npos);
  CHECK(out.str().find("\"final_pass_ms\"") != std::string::npos);
  CHECK(out.str().find("\"fallback\"") != std::string::npos);
  CHECK(out.str().find("\"augmented_tokens\"") != std::string::npos);
}
