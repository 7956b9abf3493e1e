#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <set>

#include <json.hpp>

#include "oracles.hpp"
#include "tader/error.hpp"
#include "tader/metrics.hpp"
#include "test_support.hpp"

using namespace tader;
using test::issue;

TEST_CASE("metric examples") {
  const std::vector<QueryResult> perfect{{"q1", {"a", "b"}, {"a"}}, {"q2", {"c"}, {"c"}}};
  CHECK(accuracy_at_k(perfect, 1) == 1.0);
  CHECK(mrr_at_k(perfect, 1) == 1.0);

  const std::vector<QueryResult> half{{"q1", {"x", "a"}, {"a"}}, {"q2", {"x", "y"}, {"c"}}};
  CHECK(accuracy_at_k(half, 2) == 0.5);

  const std::vector<QueryResult> ranks{{"q1", {"x", "a", "y"}, {"a"}}, {"q2", {"x", "y", "z", "c", "w"}, {"c"}}};
  CHECK(mrr_at_k(ranks, 5) == 0.375);

  const std::vector<QueryResult> partial{{"q", {"r1", "x", "r2", "y", "z"}, {"r1", "r2", "r3", "r4"}}};
  CHECK(recall_at_k(partial, 5) == 0.5);

  const std::vector<QueryResult> all_in{{"q", {"a", "b", "c"}, {"a", "c"}}};
  CHECK(recall_at_k(all_in, 3) == 1.0);
}

TEST_CASE("metric errors") {
  const std::vector<QueryResult> none;
  for (auto fn : {accuracy_at_k, mrr_at_k, recall_at_k}) {
    try {
      fn(none, 1);
      FAIL("expected an error");
    } catch (const ValidationError& e) {
      CHECK(std::string(e.what()) == "no evaluable queries");
    }
  }
  const std::vector<QueryResult> one{{"q", {"a"}, {"a"}}};
  CHECK_THROWS_AS(accuracy_at_k(one, 0), ValidationError);
}

TEST_CASE("metrics agree with set-operation oracles and are monotone in K") {
  Rng rng(31);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<QueryResult> results(1 + rng.below(20));
    for (auto& r : results) {
      std::vector<std::string> universe;
      for (int i = 0; i < 10; ++i) universe.push_back(fmt::format("k{}", i));
      rng.shuffle(std::span<std::string>(universe));
      r.ranked.assign(universe.begin(), universe.begin() + static_cast<std::ptrdiff_t>(rng.below(8)));
      std::set<std::string> rel;
      for (std::size_t i = 0, n = 1 + rng.below(4); i < n; ++i) rel.insert(fmt::format("k{}", rng.below(10)));
      r.relevant.assign(rel.begin(), rel.end());
    }
    double prev_acc = 0, prev_mrr = 0, prev_rec = 0;
    for (std::size_t k = 1; k <= 8; ++k) {
      const auto o = test::oracle_metrics(results, k);
      const double acc = accuracy_at_k(results, k);
      const double mrr = mrr_at_k(results, k);
      const double rec = recall_at_k(results, k);
      CHECK(acc == doctest::Approx(o.accuracy).epsilon(1e-12));
      CHECK(mrr == doctest::Approx(o.mrr).epsilon(1e-12));
      CHECK(rec == doctest::Approx(o.recall).epsilon(1e-12));
      CHECK(acc >= prev_acc);
      CHECK(mrr >= prev_mrr);
      CHECK(rec >= prev_rec);
      prev_acc = acc;
      prev_mrr = mrr;
      prev_rec = rec;
    }
    CHECK(accuracy_at_k(results, 1) == mrr_at_k(results, 1));
  }
}

TEST_CASE("the 28 feature combinations") {
  const auto combos = enumerate_feature_combos();
  CHECK(combos.size() == 28);
  std::vector<std::string> names;
  for (const auto& c : combos) {
    CHECK(c.has_text());
    names.push_back(c.name());
  }
  const std::vector<std::string> expected{
      "T",     "D",     "S",      "TD",     "TS",     "TDS",     "DS",     "TC2",   "DC2",   "SC2",
      "TDC2",  "TSC2",  "TDSC2",  "DSC2",   "TCU",    "DCU",     "SCU",    "TDCU",  "TSCU",  "TDSCU",
      "DSCU",  "TC2CU", "DC2CU",  "SC2CU",  "TDC2CU", "TSC2CU",  "TDSC2CU", "DSC2CU"};
  CHECK(names == expected);
  CHECK(std::set<std::string>(names.begin(), names.end()).size() == 28);
}

TEST_CASE("evaluate on a tiny corpus is computable by hand") {
  const auto corpus = IssueSet::build({issue("A", 0, "pump valve"), issue("B", 1, "engine rotor"),
                                       issue("C", 2, "pump valve leak", {"A"}), issue("D", 3, "rotor"),
                                       issue("E", 4, "gear shaft", {"F"}), issue("F", 5, "gear shaft broken")});
  const auto split = chronological_split(corpus, 2);
  BaselineScorer scorer(split.train, FeatureSet::parse("T"), Metric::cosine);
  scorer.index(corpus);
  EvalOptions options;
  options.dataset = "tiny";
  const auto report = evaluate(corpus, split.test, scorer, options);
  // Links are symmetric: F reaches back to E, while E's link to F points forward.
  CHECK(report.queries == 2);
  CHECK(report.excluded == 2);
  CHECK(report.dropped_forward_links == 1);
  REQUIRE(report.metrics.size() == 4);
  for (const auto& m : report.metrics) {
    CHECK(m.accuracy == 1.0);
    CHECK(m.mrr == 1.0);
    CHECK(m.recall == 1.0);
  }
  CHECK(report.features == "T");
  CHECK(report.scorer == "tfidf-cosine");
  CHECK(report.filter == "none");

  const auto j = nlohmann::json::parse(report.to_json());
  CHECK(j["queries"] == 2);
  CHECK(j["metrics"].size() == 4);
  CHECK(EvalReport::csv_header() == "dataset,features,scorer,filter,K,accuracy,mrr,recall,queries,excluded\n");
  const auto rows = report.csv_rows();
  CHECK(std::count(rows.begin(), rows.end(), '\n') == 4);
  CHECK(rows.starts_with("tiny,T,tfidf-cosine,none,1,1.000000,1.000000,1.000000,2,2\n"));

  const auto no_links = IssueSet::build({issue("A", 0, "x"), issue("B", 5, "y")});
  const auto s2 = chronological_split(no_links, 1);
  BaselineScorer s2_scorer(s2.train, FeatureSet::parse("T"), Metric::cosine);
  CHECK_THROWS_AS(evaluate(no_links, s2.test, s2_scorer, options), ValidationError);
}

TEST_CASE("report invariants on random corpora") {
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    const auto corpus = test::random_issues(120, seed, 0.04);
    const auto split = chronological_split(corpus, 120);
    BaselineScorer scorer(split.train, FeatureSet::parse("TD"), Metric::cosine);
    scorer.index(corpus);
    EvalOptions options;
    options.filter = seed % 2 ? TimeFilter::months(1) : TimeFilter::none();
    const auto report = evaluate(corpus, split.test, scorer, options);
    CHECK(report.queries + report.excluded == split.test.size());
    CHECK(report.metrics[0].accuracy == report.metrics[0].mrr);
    for (std::size_t i = 0; i < report.metrics.size(); ++i) {
      const auto& m = report.metrics[i];
      for (double v : {m.accuracy, m.mrr, m.recall}) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
      }
      if (i > 0) {
        CHECK(m.accuracy >= report.metrics[i - 1].accuracy);
        CHECK(m.mrr >= report.metrics[i - 1].mrr);
        CHECK(m.recall >= report.metrics[i - 1].recall);
      }
    }
  }
}
