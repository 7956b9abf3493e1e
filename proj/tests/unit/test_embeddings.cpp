#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <unordered_set>

#include "tader/embeddings.hpp"
#include "tader/error.hpp"
#include "test_support.hpp"

using namespace tader;

namespace {

std::vector<float> row(const EmbeddingTable& t, std::string_view token) {
  const auto r = t.row(t.id(token).value());
  return {r.begin(), r.end()};
}

}  // namespace

TEST_CASE("load_vectors reads the text format with or without header") {
  test::TempDir dir;
  const auto plain = load_vectors(dir.file("v.txt", "hello 0.1 0.2\nworld 0.3 0.4\n"), 2);
  CHECK(plain.size() == 2);
  CHECK(plain.dim() == 2);
  CHECK(row(plain, "hello") == std::vector<float>{0.1f, 0.2f});
  CHECK(row(plain, "world") == std::vector<float>{0.3f, 0.4f});

  const auto headed = load_vectors(dir.file("h.txt", "2 2\nhello 0.1 0.2\nworld 0.3 0.4"), 2);
  CHECK(headed.tokens() == plain.tokens());
  CHECK(row(headed, "world") == row(plain, "world"));
}

TEST_CASE("load_vectors reports dimension mismatches by line") {
  test::TempDir dir;
  auto message = [](const std::filesystem::path& p, std::size_t dim) {
    try {
      load_vectors(p, dim);
    } catch (const ParseError& e) {
      return std::string(e.what());
    }
    return std::string("no error");
  };
  CHECK(message(dir.file("a.txt", "hello 0.1 0.2\nworld 0.3 0.4\n"), 3).find(":1:") != std::string::npos);
  CHECK(message(dir.file("b.txt", "hello 0.1 0.2\nworld 0.3\n"), 2).find(":2:") != std::string::npos);
  CHECK(message(dir.file("c.txt", "2 3\nhello 0.1 0.2\n"), 2) != "no error");
  CHECK(message(dir.file("d.txt", "hello 0.1 abc\n"), 2).find(":1:") != std::string::npos);
  CHECK_THROWS_AS(load_vectors(dir.path() / "missing.txt", 2), ParseError);
}

TEST_CASE("duplicate tokens: last wins with a warning") {
  test::TempDir dir;
  VectorLoadOptions raw;
  raw.stem_vocab = false;
  const auto t = load_vectors(dir.file("d.txt", "cat 1 1\ndog 2 2\ncat 3 3\n"), 2, raw);
  CHECK(t.size() == 2);
  CHECK(row(t, "cat") == std::vector<float>{3.0f, 3.0f});
  CHECK(t.warnings().size() == 1);
}

TEST_CASE("stemmed vocabulary keeps the first surface form per stem") {
  test::TempDir dir;
  const auto t = load_vectors(dir.file("s.txt", "running 1 1\nrun 2 2\nponies 3 3\n"), 2);
  CHECK(t.contains("run"));
  CHECK(t.contains("poni"));
  CHECK_FALSE(t.contains("running"));
  CHECK(row(t, "run") == std::vector<float>{1.0f, 1.0f});

  std::unordered_set<std::string> keep{"poni"};
  VectorLoadOptions opts;
  opts.keep = &keep;
  const auto kept = load_vectors(dir.path() / "s.txt", 2, opts);
  CHECK(kept.size() == 1);
  CHECK(kept.contains("poni"));
}

TEST_CASE("table rejects bad vectors and keeps pad and oov at zero") {
  EmbeddingTable t(3);
  CHECK_THROWS_AS(t.set("x", std::vector<double>{1.0, 2.0}), ValidationError);
  CHECK_THROWS_AS(t.set("x", std::vector<double>{1.0, NAN, 2.0}), ValidationError);
  t.set("x", std::vector<double>{1.0, 2.0, 3.0});
  for (std::size_t id : {EmbeddingTable::kPadId, EmbeddingTable::kOovId}) {
    for (float v : t.row(id)) CHECK(v == 0.0f);
  }
  CHECK(t.id("x").value() > EmbeddingTable::kOovId);
}

TEST_CASE("encode pads, truncates and counts oov tokens") {
  EmbeddingTable t(2);
  t.set("a", std::vector<double>{1, 2});
  t.set("b", std::vector<double>{3, 4});
  t.set("c", std::vector<double>{5, 6});

  const auto empty = encode({}, t, 4);
  CHECK(empty.matrix.rows() == 4);
  CHECK(empty.matrix.cols() == 2);
  CHECK(empty.true_len == 0);
  CHECK(empty.matrix.isZero(0));

  const auto three = encode({"a", "b", "c"}, t, 5);
  CHECK(three.true_len == 3);
  CHECK(three.matrix(0, 0) == 1);
  CHECK(three.matrix(1, 1) == 4);
  CHECK(three.matrix(2, 0) == 5);
  CHECK(three.matrix.bottomRows(2).isZero(0));
  CHECK(three.oov_count == 0);

  const TokenSeq ten{"a", "b", "zz", "c", "a", "b", "c", "a", "b", "c"};
  const auto cut = encode(ten, t, 5);
  CHECK(cut.true_len == 5);
  CHECK(cut.oov_count == 1);
  CHECK(cut.matrix.row(2).isZero(0));
  CHECK(cut.matrix(4, 0) == 1);
}
