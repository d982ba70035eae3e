#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "spanev/corpus.hpp"
#include "spanev/encoder.hpp"
#include "spanev/rng.hpp"

using namespace spanev;

namespace {

Mat random_mat(int rows, int cols, uint64_t seed) {
  Rng rng(seed);
  Mat m(rows, cols);
  for (double& v : m.a) v = rng.uniform(-1.0, 1.0);
  return m;
}

std::vector<Token> fake_sentence(const std::vector<std::string>& words) {
  std::vector<Token> out;
  int pos = 0;
  for (size_t i = 0; i < words.size(); ++i) {
    Token t;
    t.text = words[i];
    t.char_start = pos;
    t.char_end = pos + static_cast<int>(words[i].size());
    t.token_index = static_cast<int>(i);
    pos = t.char_end + 1;
    out.push_back(t);
  }
  return out;
}

}  // namespace

TEST_CASE("encode: all-zero parameters give all-zero hidden states") {
  EncoderParams p = EncoderParams::init(3, 4, 1, 7);
  for (auto& [name, tensor] : p.store.tensors) tensor.fill(0.0);
  Mat emb = random_mat(5, 3, 99);
  Mat h = encode(emb, p);
  REQUIRE(h.rows == 5);
  REQUIRE(h.cols == 8);
  for (double v : h.a) CHECK(v == 0.0);
}

TEST_CASE("encode: output shape and (-1, 1) bound") {
  EncoderParams p = EncoderParams::init(4, 6, 1, 13);
  Mat one = random_mat(1, 4, 5);
  Mat h = encode(one, p);
  CHECK(h.rows == 1);
  CHECK(h.cols == 12);

  Mat many = random_mat(9, 4, 6);
  Mat hm = encode(many, p);
  for (double v : hm.a) {
    CHECK(v > -1.0);
    CHECK(v < 1.0);
  }
}

TEST_CASE("encode: stacked layers change the output and keep shapes") {
  EncoderParams one = EncoderParams::init(4, 5, 1, 21);
  EncoderParams two = EncoderParams::init(4, 5, 2, 21);
  Mat emb = random_mat(6, 4, 77);
  Mat h1 = encode(emb, one);
  Mat h2 = encode(emb, two);
  CHECK(h1.rows == h2.rows);
  CHECK(h1.cols == h2.cols);
  CHECK_FALSE(h1 == h2);
}

TEST_CASE("encode: non-finite input is rejected") {
  EncoderParams p = EncoderParams::init(2, 3, 1, 1);
  Mat emb(2, 2);
  emb(1, 1) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(encode(emb, p), InputError);
}

TEST_CASE("encode: reversal symmetry with swapped directions") {
  int d = 3, vh = 4, n = 6;
  EncoderParams p = EncoderParams::init(d, vh, 1, 31);
  EncoderParams swapped = p;
  for (const char* gate : {"i", "f", "o", "g"}) {
    for (const char* kind : {"W", "U", "b"}) {
      std::string f = std::string("enc.l0.f.") + kind + gate;
      std::string b = std::string("enc.l0.b.") + kind + gate;
      std::swap(swapped.store.at(f), swapped.store.at(b));
    }
  }
  Mat emb = random_mat(n, d, 41);
  Mat reversed(n, d);
  for (int t = 0; t < n; ++t)
    for (int j = 0; j < d; ++j) reversed(t, j) = emb(n - 1 - t, j);

  Mat h = encode(emb, p);
  Mat hr = encode(reversed, swapped);
  // Row-reversed and half-swapped: h[t] = [f, b] becomes hr[n-1-t] = [b, f].
  for (int t = 0; t < n; ++t) {
    for (int j = 0; j < vh; ++j) {
      CHECK(h(t, j) == doctest::Approx(hr(n - 1 - t, vh + j)).epsilon(1e-12));
      CHECK(h(t, vh + j) == doctest::Approx(hr(n - 1 - t, j)).epsilon(1e-12));
    }
  }
}

TEST_CASE("encoder gradients match finite differences (random small case)") {
  // n=3, d=2, v_h=2 as the spec's worked example size, plus two more seeds.
  for (uint64_t seed : {1u, 2u, 3u, 4u, 5u}) {
    int n = 3, d = 2, vh = 2;
    EncoderParams p = EncoderParams::init(d, vh, 1, seed);
    Mat emb = random_mat(n, d, seed + 100);
    // Reduce H to a scalar via the bilinear form u * H * v.
    Mat u = random_mat(1, n, seed + 200);
    Mat v = random_mat(2 * vh, 1, seed + 300);

    auto loss_value = [&]() {
      ad::Tape tape;
      ParamNodes nodes = register_params(tape, p.store);
      auto h = encode_on_tape(tape, nodes, p.config, tape.leaf(emb));
      auto out = tape.matmul(tape.matmul(tape.leaf(u), h), tape.leaf(v));
      return tape.val(out)(0, 0);
    };

    ad::Tape tape;
    ParamNodes nodes = register_params(tape, p.store);
    auto emb_node = tape.leaf(emb);
    auto h = encode_on_tape(tape, nodes, p.config, emb_node);
    auto out = tape.matmul(tape.matmul(tape.leaf(u), h), tape.leaf(v));
    tape.backward(out);

    double step = 1e-5;
    long failures = 0;
    for (auto& [name, tensor] : p.store.tensors) {
      const Mat& analytic = tape.grad(nodes.at(name));
      for (size_t k = 0; k < tensor.size(); ++k) {
        double saved = tensor.a[k];
        tensor.a[k] = saved + step;
        double up = loss_value();
        tensor.a[k] = saved - step;
        double down = loss_value();
        tensor.a[k] = saved;
        double fd = (up - down) / (2 * step);
        double an = analytic.a[k];
        if (std::fabs(fd - an) > 1e-6 + 1e-4 * std::max(std::fabs(fd), std::fabs(an)))
          ++failures;
      }
    }
    CHECK(failures == 0);

    // Input gradients too ("exact gradients ... and inputs").
    const Mat& demb = tape.grad(emb_node);
    for (size_t k = 0; k < emb.size(); ++k) {
      double saved = emb.a[k];
      emb.a[k] = saved + step;
      double up = loss_value();
      emb.a[k] = saved - step;
      double down = loss_value();
      emb.a[k] = saved;
      double fd = (up - down) / (2 * step);
      CHECK(std::fabs(fd - demb.a[k]) <=
            1e-6 + 1e-4 * std::max(std::fabs(fd), std::fabs(demb.a[k])));
    }
  }
}

TEST_CASE("hashed_embeddings: deterministic, seed-sensitive, bounded") {
  auto sentence = fake_sentence({"Cough", "and", "fever"});
  Mat a = hashed_embeddings(sentence, 8, 42);
  Mat b = hashed_embeddings(sentence, 8, 42);
  CHECK(a == b);

  Mat c = hashed_embeddings(sentence, 8, 43);
  CHECK_FALSE(a == c);

  // Case-insensitive: "Cough" and "cough" rows agree.
  auto lower = fake_sentence({"cough"});
  Mat d = hashed_embeddings(lower, 8, 42);
  for (int j = 0; j < 8; ++j) CHECK(a(0, j) == d(0, j));

  for (double v : a.a) {
    CHECK(v >= -1.0);
    CHECK(v <= 1.0);
  }

  CHECK(hashed_embeddings({}, 8, 42).rows == 0);
  CHECK(hashed_embeddings({}, 8, 42).cols == 8);
}

TEST_CASE("embedding file: round-trip is bit exact, errors are detected") {
  namespace fs = std::filesystem;
  EmbeddingMap m;
  EmbeddingTable t;
  t.dim = 4;
  t.sentences.push_back(random_mat(3, 4, 1));
  t.sentences.push_back(random_mat(2, 4, 2));
  m["docA"] = t;
  EmbeddingTable t2;
  t2.dim = 4;
  t2.sentences.push_back(random_mat(1, 4, 3));
  m["docB"] = t2;

  fs::path path = fs::temp_directory_path() / "spanev_emb_test.txt";
  save_embedding_file(m, path.string());
  EmbeddingMap back = load_embedding_file(path.string());
  REQUIRE(back.count("docA"));
  REQUIRE(back.count("docB"));
  CHECK(back["docA"].sentences[0] == m["docA"].sentences[0]);
  CHECK(back["docA"].sentences[1] == m["docA"].sentences[1]);
  CHECK(back["docB"].sentences[0] == m["docB"].sentences[0]);
  fs::remove(path);

  // Row-count mismatch inside a block.
  CHECK_THROWS_AS(parse_embedding_text("doc 0 3 4\n1 2 3 4\n1 2 3 4\n"), InputError);
  // Dimension mismatch across blocks.
  CHECK_THROWS_AS(parse_embedding_text("doc 0 1 4\n1 2 3 4\ndoc 1 1 3\n1 2 3\n"), InputError);
  // Comments and blank lines are fine.
  EmbeddingMap ok = parse_embedding_text("# comment\n\ndoc 0 1 2\n0.5 -0.25\n");
  CHECK(ok["doc"].sentences[0](0, 1) == -0.25);
}

TEST_CASE("check_embeddings verifies token counts against the corpus") {
  Corpus corpus;
  AnnotatedDocument doc;
  doc.document.doc_id = "d";
  doc.document.text = "one two.\nthree.";
  doc.document.sentences = tokenize(doc.document.text);
  corpus.push_back(doc);

  EmbeddingMap good = hashed_embeddings_for(corpus, 4, 9);
  CHECK_NOTHROW(check_embeddings(good, corpus));

  EmbeddingMap bad = good;
  bad["d"].sentences[0] = Mat(1, 4);  // wrong token count
  CHECK_THROWS_AS(check_embeddings(bad, corpus), InputError);

  EmbeddingMap missing;
  CHECK_THROWS_AS(check_embeddings(missing, corpus), InputError);
}
