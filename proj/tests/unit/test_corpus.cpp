#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <set>

#include "tader/corpus.hpp"
#include "tader/error.hpp"
#include "test_support.hpp"

using namespace tader;
using tader::test::day;
using tader::test::issue;

TEST_CASE("timestamps parse in the accepted ISO-8601 shapes") {
  const Timestamp ref = parse_timestamp("2012-03-01T10:20:30Z");
  CHECK(parse_timestamp("2012-03-01 10:20:30Z") == ref);
  CHECK(parse_timestamp("2012-03-01T10:20:30") == ref);
  CHECK(parse_timestamp("2012-03-01T10:20:30.999+0000") == ref);
  CHECK(parse_timestamp("2012-03-01T12:20:30+02:00") == ref);
  CHECK(parse_timestamp("2012-03-01T05:20:30-05") == ref);
  CHECK(parse_timestamp("2012-03-01T15:50:30+0530") == ref);
  CHECK(format_timestamp(ref) == "2012-03-01T10:20:30Z");
  CHECK(format_timestamp(parse_timestamp("2000-02-29T23:59:59Z")) == "2000-02-29T23:59:59Z");

  CHECK_THROWS_AS(parse_timestamp(""), ParseError);
  CHECK_THROWS_AS(parse_timestamp("2012-13-01T00:00:00Z"), ParseError);
  CHECK_THROWS_AS(parse_timestamp("2011-02-29T00:00:00Z"), ParseError);
  CHECK_THROWS_AS(parse_timestamp("2012-03-01T25:00:00Z"), ParseError);
  CHECK_THROWS_AS(parse_timestamp("2012-03-01T10:20:30+5"), ParseError);
  CHECK_THROWS_AS(parse_timestamp("yesterday"), ParseError);
}

TEST_CASE("build sorts by created then key and symmetrizes links") {
  auto set = IssueSet::build({issue("B", 1, "", {"A"}), issue("C", 0), issue("A", 1)});
  REQUIRE(set.size() == 3);
  CHECK(set[0].key == "C");
  CHECK(set[1].key == "A");
  CHECK(set[2].key == "B");
  CHECK(set.find("A")->links == std::vector<std::string>{"B"});
  CHECK(set.find("B")->links == std::vector<std::string>{"A"});
  CHECK(set.linked("A", "B"));
  CHECK(set.linked("B", "A"));
  CHECK_FALSE(set.linked("A", "C"));
  CHECK(set.link_count() == 1);
  CHECK(set.day_zero() == day(0));
}

TEST_CASE("symmetrization equals the union of directed edges") {
  tader::Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Issue> issues;
    std::set<std::pair<std::string, std::string>> directed;
    const int n = 2 + static_cast<int>(rng.below(8));
    for (int i = 0; i < n; ++i) issues.push_back(issue(fmt::format("K{}", i), static_cast<double>(rng.below(5))));
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        if (i != j && rng.uniform() < 0.25) {
          issues[i].links.push_back(issues[j].key);
          directed.emplace(issues[i].key, issues[j].key);
        }
      }
    }
    const auto set = IssueSet::build(issues);
    std::set<std::pair<std::string, std::string>> expected;
    for (const auto& [a, b] : directed) {
      expected.emplace(a, b);
      expected.emplace(b, a);
    }
    std::set<std::pair<std::string, std::string>> got;
    for (const auto& x : set.issues()) {
      CHECK(std::is_sorted(x.links.begin(), x.links.end()));
      for (const auto& y : x.links) got.emplace(x.key, y);
    }
    CHECK(got == expected);
    CHECK(set.link_count() == expected.size() / 2);
  }
}

TEST_CASE("build drops self and dangling links and rejects bad records") {
  auto set = IssueSet::build({issue("A", 0, "", {"A", "ZZZ"}), issue("B", 1)});
  CHECK(set.find("A")->links.empty());
  CHECK(set.dangling_links() == 2);

  CHECK_THROWS_AS(IssueSet::build({issue("A", 0), issue("A", 1)}), ValidationError);
  CHECK_THROWS_AS(IssueSet::build({issue("", 0)}), ValidationError);
  Issue bad = issue("X", 5);
  bad.updated = day(4);
  CHECK_THROWS_AS(IssueSet::build({bad}), ValidationError);
}

TEST_CASE("load_issues reads JSON lines with defaults") {
  tader::test::TempDir dir;
  const auto path = dir.file("issues.jsonl",
                             R"({"key":"A","title":"First","created":"2020-01-01T00:00:00Z","links":["B"]})"
                             "\n\n"
                             R"({"key":"B","title":"Second","description":"d","summary":"s",)"
                             R"("created":"2020-01-02T00:00:00Z","updated":"2020-01-05T00:00:00Z"})"
                             "\n");
  const auto set = load_issues(path);
  REQUIRE(set.size() == 2);
  const Issue& a = *set.find("A");
  CHECK(a.description.empty());
  CHECK(a.summary.empty());
  CHECK(a.updated == a.created);
  CHECK(set.find("B")->links == std::vector<std::string>{"A"});
  CHECK(set.link_count() == 1);

  SUBCASE("singleton file") {
    const auto one = load_issues(dir.file("one.jsonl", R"({"key":"X","title":"t","created":"2020-01-01"})"
                                                       "\n"));
    CHECK(one.size() == 1);
    CHECK(one.link_count() == 0);
  }

  SUBCASE("round trip through write_issues is bit-identical") {
    const auto out = dir.path() / "copy.jsonl";
    write_issues(set, out);
    const auto again = load_issues(out);
    REQUIRE(again.size() == set.size());
    for (std::size_t i = 0; i < set.size(); ++i) {
      CHECK(again[i].key == set[i].key);
      CHECK(again[i].title == set[i].title);
      CHECK(again[i].description == set[i].description);
      CHECK(again[i].summary == set[i].summary);
      CHECK(again[i].created == set[i].created);
      CHECK(again[i].updated == set[i].updated);
      CHECK(again[i].links == set[i].links);
    }
    const auto out2 = dir.path() / "copy2.jsonl";
    write_issues(again, out2);
    CHECK(tader::test::slurp(out) == tader::test::slurp(out2));
  }
}

TEST_CASE("load_issues errors name the line or the key") {
  tader::test::TempDir dir;
  auto message = [&](const std::string& content) {
    try {
      load_issues(dir.file("bad.jsonl", content));
    } catch (const Error& e) {
      return std::string(e.what());
    }
    return std::string("no error");
  };
  CHECK(message("{\"key\":\"A\",\"title\":\"t\",\"created\":\"2020-01-01\"}\n{oops\n").find(":2:") !=
        std::string::npos);
  CHECK(message("{\"title\":\"t\",\"created\":\"2020-01-01\"}\n").find(":1:") != std::string::npos);
  CHECK(message("{\"key\":\"A\",\"title\":\"t\",\"created\":\"bad\"}\n").find(":1:") != std::string::npos);
  const std::string dup = "{\"key\":\"A\",\"title\":\"t\",\"created\":\"2020-01-01\"}\n"
                          "{\"key\":\"A\",\"title\":\"u\",\"created\":\"2020-01-02\"}\n";
  const auto m = message(dup);
  CHECK(m.find("duplicate key A") != std::string::npos);
  CHECK(m.find(":2:") != std::string::npos);
  CHECK_THROWS_AS(load_issues(dir.path() / "missing.jsonl"), Error);
}

TEST_CASE("chronological split uses floored day indices") {
  std::vector<Issue> issues;
  for (int d = 0; d < 10; ++d) issues.push_back(issue(fmt::format("I{}", d), d + 0.5));
  const auto set = IssueSet::build(issues);
  CHECK(day_index(set.day_zero(), day(0.5)) == 0);
  CHECK(day_index(set.day_zero(), day(1.49)) == 0);
  CHECK(day_index(set.day_zero(), day(1.5)) == 1);
  CHECK(day_index(set.day_zero(), day(0.4)) == -1);

  const auto s = chronological_split(set, 4);
  CHECK(s.train.size() == 4);
  CHECK(s.test.size() == 6);
  CHECK(s.test[0].key == "I4");

  const auto none = chronological_split(set, 0);
  CHECK(none.train.empty());
  CHECK(none.test.size() == 10);
  CHECK(chronological_split(set, 100).test.empty());
  CHECK_THROWS_AS(chronological_split(set, -1), ValidationError);
}

TEST_CASE("split is a partition on random corpora") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto set = tader::test::random_issues(60, seed);
    const auto s = chronological_split(set, static_cast<std::int64_t>(seed * 10));
    CHECK(s.train.size() + s.test.size() == set.size());
    std::set<std::string> keys;
    for (const auto& i : s.train.issues()) keys.insert(i.key);
    for (const auto& i : s.test.issues()) keys.insert(i.key);
    CHECK(keys.size() == set.size());
    for (const auto& i : s.train.issues()) CHECK(day_index(set.day_zero(), i.created) < static_cast<std::int64_t>(seed * 10));
    for (const auto& i : s.test.issues()) CHECK(day_index(set.day_zero(), i.created) >= static_cast<std::int64_t>(seed * 10));
  }
}

TEST_CASE("time gaps") {
  Issue x = issue("X", 0);
  Issue y = issue("Y", 0);
  CHECK(time_gap_cc(x, y) == 0.0);
  x.created = parse_timestamp("2020-01-10T00:00:00Z");
  y.created = parse_timestamp("2020-01-01T00:00:00Z");
  CHECK(time_gap_cc(x, y) == doctest::Approx(9.0).epsilon(1e-15));
  CHECK(time_gap_cc(y, x) == time_gap_cc(x, y));

  Issue q = issue("Q", 100);
  Issue c = issue("C", 90);
  c.updated = day(97.5);
  CHECK(time_gap_cu(q, c) == doctest::Approx(2.5).epsilon(1e-12));
  c.updated = q.created;
  CHECK(time_gap_cu(q, c) == 0.0);
  c.updated = day(97.5);
  q.updated = day(140);
  CHECK(time_gap_cu(c, q) != doctest::Approx(time_gap_cu(q, c)));
}

TEST_CASE("time_gap_cc is a pseudometric") {
  tader::Rng rng(5);
  for (int t = 0; t < 500; ++t) {
    Issue a = issue("A", rng.uniform(0, 1000));
    Issue b = issue("B", rng.uniform(0, 1000));
    Issue c = issue("C", rng.uniform(0, 1000));
    CHECK(time_gap_cc(a, b) == time_gap_cc(b, a));
    CHECK(time_gap_cc(a, a) == 0.0);
    CHECK(time_gap_cc(a, c) <= time_gap_cc(a, b) + time_gap_cc(b, c) + 1e-12);
  }
}

TEST_CASE("training pairs: positives, balanced negatives, determinism") {
  const auto set = tader::test::random_issues(40, 3, 0.08);
  const auto pairs = generate_training_pairs(set, {1.0, 7});
  const std::size_t positives = set.link_count();
  REQUIRE(positives > 0);
  std::size_t pos = 0;
  std::size_t neg = 0;
  std::set<std::pair<std::string, std::string>> seen;
  for (const auto& p : pairs) {
    CHECK(p.a != p.b);
    CHECK(set.index_of(p.a).value() < set.index_of(p.b).value());
    CHECK(seen.emplace(p.a, p.b).second);
    CHECK((p.label == 1) == set.linked(p.a, p.b));
    (p.label == 1 ? pos : neg) += 1;
  }
  CHECK(pos == positives);
  CHECK(neg == positives);
  CHECK(std::is_partitioned(pairs.begin(), pairs.end(), [](const LabeledPair& p) { return p.label == 1; }));

  const auto again = generate_training_pairs(set, {1.0, 7});
  CHECK(std::equal(pairs.begin(), pairs.end(), again.begin(), again.end(), [](const auto& x, const auto& y) {
    return x.a == y.a && x.b == y.b && x.label == y.label;
  }));
  const auto other = generate_training_pairs(set, {1.0, 8});
  CHECK_FALSE(std::equal(pairs.begin(), pairs.end(), other.begin(), other.end(), [](const auto& x, const auto& y) {
    return x.a == y.a && x.b == y.b && x.label == y.label;
  }));

  CHECK(generate_training_pairs(set, {0.5, 1}).size() == positives + static_cast<std::size_t>(std::llround(0.5 * positives)));
  const std::size_t all_pairs = set.size() * (set.size() - 1) / 2;
  CHECK(generate_training_pairs(set, {1e6, 1}).size() == all_pairs);
}

TEST_CASE("lonely negative pool keeps one side link-free") {
  const auto set = tader::test::random_issues(50, 9, 0.02);
  const auto pairs = generate_training_pairs(set, {2.0, 1, NegativePool::lonely});
  std::size_t neg = 0;
  for (const auto& p : pairs) {
    if (p.label == 1) continue;
    ++neg;
    CHECK((set.find(p.a)->links.empty() || set.find(p.b)->links.empty()));
  }
  CHECK(neg > 0);
}

TEST_CASE("pair generation without links fails") {
  const auto set = IssueSet::build({issue("A", 0), issue("B", 1)});
  try {
    generate_training_pairs(set);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()) == "no links in training split");
  }
}
