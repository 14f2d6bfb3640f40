#include <doctest.h>

#include <cmath>
#include <random>

#include "lamer/bm25.hpp"
#include "test_support.hpp"

using namespace lamer;

TEST_CASE("idf variants") {
  const auto idx = InvertedIndex::build(testsupport::toy_corpus(), 128);
  // N=3; mat has n=1, cat has n=2
  CHECK(idf(idx, "mat", IdfVariant::paper) ==
        doctest::Approx(std::log(2.5 / 1.5)).epsilon(1e-12));
  CHECK(idf(idx, "cat", IdfVariant::paper) ==
        doctest::Approx(std::log(1.5 / 2.5)).epsilon(1e-12));
  CHECK(idf(idx, "cat", IdfVariant::paper) < 0.0);  // negative allowed
  CHECK(idf(idx, "mat", IdfVariant::lucene) ==
        doctest::Approx(std::log(1.0 + 5.0 / 3.0)).epsilon(1e-12));
  CHECK(idf(idx, "mat", IdfVariant::lucene) > 0.0);
}

TEST_CASE("hand-derived score: toy corpus, q=mat, d1") {
  const auto idx = InvertedIndex::build(testsupport::toy_corpus(), 128);
  const Bm25Params params;  // k1=0.9 b=0.4 paper
  REQUIRE(params.k1 == 0.9);
  REQUIRE(params.b == 0.4);
  // len(d1) == avgdl == 3 so the denominator collapses to 1 + k1 and the
  // saturated-TF factor is exactly 1; the score is the bare IDF.
  const double got = score_document(idx, params, {"mat"}, 0);
  CHECK(std::abs(got - std::log(5.0 / 3.0)) <= 1e-9);
}

TEST_CASE("score is additive over the query-term multiset") {
  const auto idx = InvertedIndex::build(testsupport::toy_corpus(), 128);
  const Bm25Params params;
  for (std::uint32_t d = 0; d < 3; ++d) {
    const double once = score_document(idx, params, {"cat"}, d);
    const double twice = score_document(idx, params, {"cat", "cat"}, d);
    CHECK(twice == doctest::Approx(2.0 * once).epsilon(1e-12));
  }
  CHECK(score_document(idx, params, {"zzz", "qqq"}, 0) == 0.0);
}

TEST_CASE("toy retrieval, q=cat, paper IDF") {
  const auto idx = InvertedIndex::build(testsupport::toy_corpus(), 128);
  const Bm25Params params;
  const RankedList got = retrieve(idx, params, "cat", 10);

  // Oracle-verified: with the "paper" IDF variant, idf(cat) = ln(1.5/2.5) < 0, and the
  // higher TF of d3 saturates harder, driving its score lower. Descending
  // order therefore puts d1 first.
  const auto oracle = testsupport::oracle_bm25(testsupport::toy_corpus(), "cat",
                                               128, params);
  REQUIRE(oracle.size() == 2);
  CHECK(oracle[0].doc_id == "d1");
  CHECK(oracle[1].doc_id == "d3");

  REQUIRE(got.entries.size() == 2);
  CHECK(got.entries[0].doc_id == "d1");
  CHECK(got.entries[1].doc_id == "d3");
  CHECK(got.entries[0].score < 0.0);
  CHECK(got.entries[1].score < 0.0);
  for (std::size_t i = 0; i < 2; ++i)
    CHECK(std::abs(got.entries[i].score - oracle[i].score) <= 1e-9);

  // Under the lucene IDF both scores are positive and d3 ranks first.
  Bm25Params lucene = params;
  lucene.idf_variant = IdfVariant::lucene;
  const RankedList lu = retrieve(idx, lucene, "cat", 10);
  REQUIRE(lu.entries.size() == 2);
  CHECK(lu.entries[0].doc_id == "d3");
  CHECK(lu.entries[0].score > 0.0);
}

TEST_CASE("OOV and empty queries return empty lists") {
  const auto idx = InvertedIndex::build(testsupport::toy_corpus(), 128);
  const Bm25Params params;
  CHECK(retrieve(idx, params, "zzz", 10).entries.empty());
  CHECK(retrieve(idx, params, "", 10).entries.empty());
  CHECK(retrieve(idx, params, "...!!!", 10).entries.empty());
}

TEST_CASE("empty index returns empty lists") {
  const auto idx = InvertedIndex::build({}, 128);
  CHECK(retrieve(idx, Bm25Params{}, "anything", 10).entries.empty());
}

TEST_CASE("oracle equivalence on random corpora") {
  std::mt19937_64 rng(2024);
  const Bm25Params paper;
  Bm25Params lucene;
  lucene.idf_variant = IdfVariant::lucene;

  for (int round = 0; round < 25; ++round) {
    const auto docs = testsupport::random_corpus(rng);
    const auto idx = InvertedIndex::build(docs, 128);
    const Bm25Params& params = round % 2 == 0 ? paper : lucene;
    const Bm25Scorer scorer(idx, params);
    Bm25Scorer::Workspace ws;
    for (int qi = 0; qi < 5; ++qi) {
      const std::string q = testsupport::random_query(rng);
      const RankedList got = scorer.retrieve(q, docs.size(), ws);
      const auto expected = testsupport::oracle_bm25(docs, q, 128, params);
      REQUIRE(got.entries.size() == expected.size());
      for (std::size_t i = 0; i < expected.size(); ++i) {
        REQUIRE(got.entries[i].doc_id == expected[i].doc_id);
        REQUIRE(std::abs(got.entries[i].score - expected[i].score) <= 1e-9);
      }
    }
  }
}

TEST_CASE("K=1 returns the argmax of full scoring") {
  std::mt19937_64 rng(31);
  const auto docs = testsupport::random_corpus(rng, 120, 30);
  const auto idx = InvertedIndex::build(docs, 128);
  const Bm25Scorer scorer(idx, Bm25Params{});
  Bm25Scorer::Workspace ws;
  for (int qi = 0; qi < 10; ++qi) {
    const std::string q = testsupport::random_query(rng, 30);
    const auto oracle = testsupport::oracle_bm25(docs, q, 128, Bm25Params{});
    const RankedList top1 = scorer.retrieve(q, 1, ws);
    if (oracle.empty()) {
      CHECK(top1.entries.empty());
    } else {
      REQUIRE(top1.entries.size() == 1);
      CHECK(top1.entries[0].doc_id == oracle[0].doc_id);
    }
  }
}

TEST_CASE("K-prefix property") {
  std::mt19937_64 rng(32);
  const auto docs = testsupport::random_corpus(rng, 150, 25);
  const auto idx = InvertedIndex::build(docs, 128);
  const Bm25Scorer scorer(idx, Bm25Params{});
  Bm25Scorer::Workspace ws;
  for (int qi = 0; qi < 10; ++qi) {
    const std::string q = testsupport::random_query(rng, 25);
    const RankedList full = scorer.retrieve(q, docs.size(), ws);
    for (const std::size_t k : {std::size_t{1}, std::size_t{5}, std::size_t{20}}) {
      const RankedList prefix = scorer.retrieve(q, k, ws);
      REQUIRE(prefix.entries.size() == std::min(k, full.entries.size()));
      for (std::size_t i = 0; i < prefix.entries.size(); ++i) {
        CHECK(prefix.entries[i].doc_id == full.entries[i].doc_id);
        CHECK(prefix.entries[i].score == full.entries[i].score);
      }
    }
  }
}

TEST_CASE("TF monotonicity while IDF positive") {
  // Equal-length docs; "hot" appears 1..4 times in the first four and never
  // in the other six, keeping its document frequency below N/2 so the "paper"-variant
  // IDF stays positive.
  std::vector<Document> docs;
  for (int i = 0; i < 4; ++i) {
    std::string text;
    for (int t = 0; t < 8; ++t)
      text += (t <= i ? "hot " : "pad" + std::to_string(t) + std::to_string(i) + " ");
    docs.push_back({"d" + std::to_string(i), "", text});
  }
  for (int i = 4; i < 10; ++i) {
    std::string text;
    for (int t = 0; t < 8; ++t)
      text += "fill" + std::to_string(t) + std::to_string(i) + " ";
    docs.push_back({"d" + std::to_string(i), "", text});
  }
  const auto idx = InvertedIndex::build(docs, 128);
  const Bm25Params params;
  REQUIRE(idf(idx, "hot", params.idf_variant) > 0.0);
  double prev = 0.0;
  for (std::uint32_t d = 0; d < 4; ++d) {
    const double score = score_document(idx, params, {"hot"}, d);
    CHECK(score > prev);
    prev = score;
  }
}

TEST_CASE("ties break ascending by doc_id") {
  // Identical documents score identically for any query.
  std::vector<Document> docs = {{"zz", "", "same text here"},
                                {"aa", "", "same text here"},
                                {"mm", "", "same text here"}};
  const auto idx = InvertedIndex::build(docs, 128);
  const RankedList got = retrieve(idx, Bm25Params{}, "same", 10);
  REQUIRE(got.entries.size() == 3);
  CHECK(got.entries[0].doc_id == "aa");
  CHECK(got.entries[1].doc_id == "mm");
  CHECK(got.entries[2].doc_id == "zz");
}

TEST_CASE("query text is truncated at the index cap") {
  std::vector<Document> docs = {{"d1", "", "alpha beta"}, {"d2", "", "gamma delta"}};
  const auto idx = InvertedIndex::build(docs, 2);
  // Cap 2: only the first two query tokens survive, so "gamma" never matches.
  const RankedList got = retrieve(idx, Bm25Params{}, "alpha beta gamma", 10);
  REQUIRE(got.entries.size() == 1);
  CHECK(got.entries[0].doc_id == "d1");
}

TEST_CASE("trec run line format") {
  RankedList ranking;
  ranking.entries = {{"docA", 1.23456789}, {"docB", -0.5}};
  std::ostringstream out;
  write_trec_ranking(out, "q7", ranking, "tagx");
  CHECK(out.str() == "q7 Q0 docA 1 1.234568 tagx\nq7 Q0 docB 2 -0.500000 tagx\n");
}

TEST_CASE("measure_qps returns positive throughput") {
  const auto idx = InvertedIndex::build(testsupport::toy_corpus(), 128);
  const Bm25Scorer scorer(idx, Bm25Params{});
  const std::vector<Query> queries = {{"q1", "cat"}, {"q2", "dog sat"}};
  const QpsReport report = measure_qps(scorer, queries, 10);
  CHECK(report.queries == 2);
  CHECK(report.qps > 0.0);
  CHECK(measure_qps(scorer, {}, 10).qps == 0.0);
}
