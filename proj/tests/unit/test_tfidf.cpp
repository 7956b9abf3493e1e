#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include <json.hpp>

#include "oracles.hpp"
#include "tader/error.hpp"
#include "tader/rng.hpp"
#include "tader/tfidf.hpp"

using namespace tader;

TEST_CASE("fit computes natural-log idf") {
  const std::vector<TokenSeq> docs{{"a", "b"}, {"a"}};
  const auto model = TfidfModel::fit(docs);
  CHECK(model.vocab_size() == 2);
  CHECK(model.doc_count() == 2);
  CHECK(model.idf(static_cast<std::size_t>(model.column("a"))) == 0.0);
  CHECK(model.idf(static_cast<std::size_t>(model.column("b"))) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(model.column("zzz") == -1);

  const auto single = TfidfModel::fit(std::vector<TokenSeq>{{"x", "y", "x"}});
  for (double v : single.idf_values()) CHECK(v == 0.0);
}

TEST_CASE("fit rejects empty corpora") {
  CHECK_THROWS_AS(TfidfModel::fit(std::vector<TokenSeq>{}), ValidationError);
  CHECK_THROWS_AS(TfidfModel::fit(std::vector<TokenSeq>{{}, {}}), ValidationError);
}

TEST_CASE("vectorize uses max-normalized tf") {
  const std::vector<TokenSeq> docs{{"a", "b"}, {"a"}};
  const auto model = TfidfModel::fit(docs);
  const auto v = model.vectorize({"a", "a", "b"});
  CHECK(v.at(static_cast<std::size_t>(model.column("a"))) == 0.0);
  CHECK(v.at(static_cast<std::size_t>(model.column("b"))) == doctest::Approx(0.5 * std::log(2.0)).epsilon(1e-15));
  CHECK(v.nnz() == 1);
  CHECK(model.vectorize({}).empty());
  CHECK(model.vectorize({"unknown"}).empty());
  const auto rep = model.vectorize({"b", "b", "b"});
  CHECK(rep.at(static_cast<std::size_t>(model.column("b"))) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
}

TEST_CASE("columns are dense and the dump lists vocab and idf") {
  const auto model = TfidfModel::fit(std::vector<TokenSeq>{{"pear", "apple"}, {"fig"}, {"apple"}});
  for (std::size_t i = 0; i < model.vocab_size(); ++i) {
    CHECK(model.column(model.terms()[i]) == static_cast<std::ptrdiff_t>(i));
  }
  const auto j = nlohmann::json::parse(model.to_json());
  CHECK(j["doc_count"] == 3);
  CHECK(j["vocab"].size() == 3);
  CHECK(j["idf"].size() == 3);
}

TEST_CASE("vectorize weights never exceed idf") {
  tader::Rng rng(1);
  const char* alphabet[] = {"a", "b", "c", "d", "e", "f"};
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<TokenSeq> docs(1 + rng.below(6));
    for (auto& d : docs) {
      for (std::size_t i = 0, n = rng.below(8); i < n; ++i) d.push_back(alphabet[rng.below(6)]);
    }
    if (std::all_of(docs.begin(), docs.end(), [](const auto& d) { return d.empty(); })) docs[0].push_back("a");
    const auto model = TfidfModel::fit(docs);
    for (const auto& d : docs) {
      const auto v = model.vectorize(d);
      for (std::size_t i = 0; i < v.nnz(); ++i) {
        CHECK(v.weights[i] > 0.0);
        CHECK(v.weights[i] <= model.idf(v.indices[i]) + 1e-15);
        if (i > 0) CHECK(v.indices[i - 1] < v.indices[i]);
      }
    }
  }
}

TEST_CASE("distance examples") {
  const auto e1 = SparseVec::from_entries({{0, 1.0}});
  const auto e2 = SparseVec::from_entries({{1, 1.0}});
  CHECK(distance(e1, e2, Metric::cosine).value == 0.0);
  CHECK(distance(e1, e2, Metric::euclidean).value == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));
  CHECK(distance(e1, e2, Metric::manhattan).value == 2.0);
  CHECK(distance(e1, e2, Metric::chebyshev).value == 1.0);

  const auto v34 = SparseVec::from_entries({{0, 3.0}, {1, 4.0}});
  const SparseVec zero;
  CHECK(distance(v34, zero, Metric::euclidean).value == 5.0);
  CHECK(distance(v34, zero, Metric::manhattan).value == 7.0);
  CHECK(distance(v34, zero, Metric::chebyshev).value == 4.0);

  CHECK(distance(v34, v34, Metric::cosine).value == doctest::Approx(1.0).epsilon(1e-15));
  for (Metric m : {Metric::euclidean, Metric::manhattan, Metric::chebyshev}) CHECK(distance(v34, v34, m).value == 0.0);

  const auto degenerate = distance(zero, zero, Metric::cosine);
  CHECK(degenerate.value == 0.0);
  CHECK(degenerate.degenerate);
  CHECK(distance(v34, zero, Metric::cosine).degenerate);
  CHECK_FALSE(distance(v34, e1, Metric::cosine).degenerate);
}

TEST_CASE("distance agrees with dense formulas") {
  tader::Rng rng(8);
  for (int t = 0; t < 500; ++t) {
    auto random_vec = [&] {
      std::vector<std::pair<std::size_t, double>> e;
      for (std::size_t i = 0; i < 12; ++i) {
        if (rng.uniform() < 0.4) e.emplace_back(i, rng.uniform(0.0, 3.0));
      }
      return SparseVec::from_entries(e);
    };
    const auto u = random_vec();
    const auto v = random_vec();
    for (Metric m : {Metric::cosine, Metric::euclidean, Metric::manhattan, Metric::chebyshev}) {
      CHECK(distance(u, v, m).value ==
            doctest::Approx(test::oracle_distance(test::densify(u, 12), test::densify(v, 12), m)).epsilon(1e-12));
    }
    const double cheb = distance(u, v, Metric::chebyshev).value;
    const double euc = distance(u, v, Metric::euclidean).value;
    const double man = distance(u, v, Metric::manhattan).value;
    CHECK(cheb <= euc + 1e-12);
    CHECK(euc <= man + 1e-12);
  }
}

TEST_CASE("sparse vector construction") {
  const auto v = SparseVec::from_entries({{5, 1.0}, {2, 2.0}, {5, 0.5}, {3, 0.0}, {7, 1.0}, {7, -1.0}});
  CHECK(v.indices == std::vector<std::size_t>{2, 5});
  CHECK(v.weights == std::vector<double>{2.0, 1.5});
  CHECK(v.at(3) == 0.0);
}

TEST_CASE("metric names and scores") {
  for (Metric m : {Metric::cosine, Metric::euclidean, Metric::manhattan, Metric::chebyshev}) {
    CHECK(parse_metric(to_string(m)) == m);
  }
  CHECK_THROWS_AS(parse_metric("hamming"), ValidationError);
  CHECK(distance_to_score(Metric::cosine, 0.7) == 0.7);
  CHECK(distance_to_score(Metric::manhattan, 3.0) == -3.0);
}
