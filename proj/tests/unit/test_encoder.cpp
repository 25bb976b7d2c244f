#include <doctest.h>

#include <array>
#include <cstring>

#include "dsch/encoder.hpp"
#include "dsch/gradcheck.hpp"
#include "support.hpp"

using namespace dsch;

TEST_CASE("init_model: shapes, Glorot bounds, zero biases") {
  const HashModel m = init_model(512, 32, 7);
  CHECK(m.w1.rows() == 512);
  CHECK(m.w1.cols() == 1000);
  CHECK(m.w2.rows() == 1000);
  CHECK(m.w2.cols() == 32);
  CHECK(m.b1.isZero(0.0));
  CHECK(m.b2.isZero(0.0));
  CHECK(m.w1.cwiseAbs().maxCoeff() <= std::sqrt(6.0 / (512 + 1000)));
  CHECK(m.w2.cwiseAbs().maxCoeff() <= std::sqrt(6.0 / (1000 + 32)));
  CHECK(m.all_finite());
}

TEST_CASE("init_model: determinism and contract") {
  CHECK(init_model(512, 32, 7) == init_model(512, 32, 7));
  CHECK_FALSE(init_model(512, 32, 7) == init_model(512, 32, 8));
  CHECK_THROWS_AS((void)init_model(0, 16, 1), ContractError);
  CHECK_THROWS_AS((void)init_model(4, 0, 1), ContractError);
}

TEST_CASE("encode_relaxed: zero weights give zero codes") {
  HashModel m = init_model(4, 3, 1);
  for (Matrix* p : m.parameters()) p->setZero();
  const CodeMatrix h = encode_relaxed(m, test::random_matrix(5, 4, 2));
  CHECK(h.isZero(0.0));
}

TEST_CASE("encode_relaxed: shape contract and saturation") {
  HashModel m = init_model(4, 2, 3);
  CHECK(encode_relaxed(m, test::random_matrix(3, 4, 4)).rows() == 3);
  CHECK(encode_relaxed(m, test::random_matrix(3, 4, 4)).cols() == 2);
  CHECK_THROWS_AS((void)encode_relaxed(m, test::random_matrix(3, 5, 4)), ShapeError);

  // Pre-activation of exactly 20: no hidden contribution, bias 20.
  m.w2.setZero();
  m.b2.setConstant(20.0);
  const CodeMatrix h = encode_relaxed(m, test::random_matrix(2, 4, 5));
  CHECK((1.0 - h.array()).maxCoeff() < 1e-12);
  CHECK((h.array() <= 1.0).all());
}

TEST_CASE("encode_binary: sign with zero mapped to +1") {
  HashModel m = init_model(1, 3, 9);
  m.w1.setZero();
  m.w2.setZero();
  m.b2 << 0.3, -0.2, 0.0;
  const BinaryCodes b = encode_binary(m, Matrix::Ones(1, 1));
  CHECK(b.code(0, 0) == +1);
  CHECK(b.code(0, 1) == -1);
  CHECK(b.code(0, 2) == +1);
}

TEST_CASE("packing: alternating code is 0b01010101, bit 0 = code 0") {
  Matrix v(1, 8);
  v << 1, -1, 1, -1, 1, -1, 1, -1;
  const BinaryCodes b = BinaryCodes::from_values(v);
  const auto bytes = b.row_bytes(0);
  REQUIRE(bytes.size() == 1);
  CHECK(bytes[0] == 0b01010101);
  CHECK(b.to_signs() == v);
}

TEST_CASE("packing: set_row_bytes masks padding bits") {
  BinaryCodes b(1, 5);
  const std::array<std::uint8_t, 1> raw{0xFF};
  b.set_row_bytes(0, raw);
  CHECK(b.row_bytes(0)[0] == 0x1F);
  CHECK(b.row_words(0)[0] == 0x1Full);
}

TEST_CASE("packing: multi-word rows round-trip") {
  const Matrix v = test::random_matrix(9, 130, 17);
  const BinaryCodes b = BinaryCodes::from_values(v);
  CHECK(b.words_per_row() == 3);
  const Matrix s = b.to_signs();
  for (Index i = 0; i < v.rows(); ++i)
    for (Index j = 0; j < v.cols(); ++j) CHECK(s(i, j) == (v(i, j) >= 0.0 ? 1.0 : -1.0));
  BinaryCodes copy(9, 130);
  for (std::size_t i = 0; i < 9; ++i) copy.set_row_bytes(i, b.row_bytes(i));
  CHECK(copy == b);
}

TEST_CASE("sign(encode_relaxed) equals encode_binary away from zero logits") {
  for (std::uint64_t s = 0; s < 5; ++s) {
    HashModel m = init_model(6, 16, s);
    const Matrix x = test::random_matrix(20, 6, 50 + s, 2.0);
    fit_standardization(m, x);
    const Matrix logits = encode_logits(m, x);
    const CodeMatrix h = encode_relaxed(m, x);
    const BinaryCodes b = encode_binary(m, x);
    for (Index i = 0; i < h.rows(); ++i) {
      for (Index j = 0; j < h.cols(); ++j) {
        if (std::abs(logits(i, j)) <= 1e-12) continue;
        CHECK(b.code(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) == (h(i, j) > 0 ? 1 : -1));
      }
    }
  }
}

TEST_CASE("encode_relaxed is deterministic and matches the taped path bitwise") {
  HashModel m = init_model(5, 8, 21);
  const Matrix x = test::random_matrix(12, 5, 22);
  fit_standardization(m, x);
  const CodeMatrix h1 = encode_relaxed(m, x);
  const CodeMatrix h2 = encode_relaxed(m, x);
  CHECK(std::memcmp(h1.data(), h2.data(), sizeof(double) * static_cast<std::size_t>(h1.size())) == 0);

  ad::Tape t;
  const TapedModel tm = TapedModel::bind(t, m);
  const ad::Var h3 = encode_relaxed(tm, t.constant(standardize(m, x)));
  CHECK(std::memcmp(h1.data(), h3.value().data(), sizeof(double) * static_cast<std::size_t>(h1.size())) == 0);
}

TEST_CASE("standardization: zero mean, unit variance, constant columns untouched") {
  Matrix x = test::random_matrix(50, 3, 31, 4.0);
  x.col(2).setConstant(7.0);
  HashModel m = init_model(3, 2, 1);
  fit_standardization(m, x);
  const Matrix z = standardize(m, x);
  CHECK(std::abs(z.col(0).mean()) < 1e-12);
  CHECK(std::abs(z.col(0).squaredNorm() / 50.0 - 1.0) < 1e-12);
  CHECK(m.feature_scale(2) == 1.0);
  CHECK(z.col(2).isZero(0.0));
}

TEST_CASE("gradient of mean(H) passes finite differences for every parameter") {
  HashModel m = init_model(4, 2, 41);
  m.b1 = test::random_matrix(1, kHiddenUnits, 42, 0.1);
  m.b2 = test::random_matrix(1, 2, 43, 0.1);
  const Matrix x = test::random_matrix(3, 4, 44);
  const std::array<Matrix, 4> params{m.w1, m.b1, m.w2, m.b2};
  const TapedFunction f = [&](ad::Tape& t, std::span<const ad::Var> p) {
    const TapedModel tm{p[0], p[1], p[2], p[3]};
    const ad::Var h = encode_relaxed(tm, t.constant(x));
    return ad::scale(ad::sum(h), 1.0 / static_cast<double>(h.value().size()));
  };
  const GradCheckResult r = finite_diff_check(f, params);
  CHECK(r.max_rel_error < 1e-4);
}
