#include <doctest.h>

#include <cstring>

#include "dsch/gradcheck.hpp"
#include "dsch/tape.hpp"
#include "support.hpp"

using namespace dsch;

namespace {

Matrix row(std::initializer_list<double> v) {
  Matrix m(1, static_cast<Index>(v.size()));
  Index j = 0;
  for (double x : v) m(0, j++) = x;
  return m;
}

}  // namespace

TEST_CASE("backward: x*x at 3 has gradient 6") {
  ad::Tape t;
  const ad::Var x = t.parameter(Matrix::Constant(1, 1, 3.0));
  const ad::Var y = ad::hadamard(x, x);
  CHECK(y.scalar() == 9.0);
  const ad::Gradients g = t.backward(y);
  CHECK(g[x](0, 0) == 6.0);
}

TEST_CASE("backward: cosine gradient at orthogonal unit vectors") {
  ad::Tape t;
  const ad::Var x = t.parameter(row({1, 0}));
  const ad::Var y = t.parameter(row({0, 1}));
  const ad::Var c = ad::cosine_sim(x, y);
  CHECK(c.scalar() == doctest::Approx(0.0));
  const ad::Gradients g = t.backward(c);
  // d cos / dx = y/(|x||y|) - cos * x/|x|^2 = (0, 1).
  CHECK(g[x](0, 0) == doctest::Approx(0.0));
  CHECK(g[x](0, 1) == doctest::Approx(1.0));
  CHECK(g[y](0, 0) == doctest::Approx(1.0));
  CHECK(g[y](0, 1) == doctest::Approx(0.0));
}

TEST_CASE("backward: untouched and constant-only leaves get zero gradient") {
  ad::Tape t;
  const ad::Var used = t.parameter(Matrix::Constant(2, 2, 1.5));
  const ad::Var unused = t.parameter(Matrix::Constant(3, 1, 2.0));
  const ad::Var k = t.constant(Matrix::Constant(2, 2, 4.0));
  const ad::Var out = ad::sum(ad::hadamard(k, k));
  const ad::Gradients g = t.backward(out);
  CHECK(g.size() == 2);
  CHECK(g[used].isZero(0.0));
  CHECK(g[unused].isZero(0.0));
  CHECK(g[unused].rows() == 3);
}

TEST_CASE("backward: non-scalar output is a contract error") {
  ad::Tape t;
  const ad::Var x = t.parameter(Matrix::Ones(2, 2));
  CHECK_THROWS_AS((void)t.backward(x), ContractError);
}

TEST_CASE("tape is topologically ordered") {
  ad::Tape t;
  const ad::Var a = t.parameter(test::random_matrix(3, 4, 1));
  const ad::Var b = t.parameter(test::random_matrix(4, 2, 2));
  const ad::Var c = ad::tanh(ad::matmul(a, b));
  (void)ad::log_sum_exp(ad::vstack(c, ad::relu(c)));
  for (int id = 0; id < static_cast<int>(t.size()); ++id) {
    for (int in : t.inputs(id))
      if (in >= 0) CHECK(in < id);
  }
}

TEST_CASE("finite_diff_check: quadratic, constant") {
  const Matrix theta = test::random_matrix(5, 3, 11);
  const double quad = finite_diff_check([](ad::Tape&, const ad::Var& x) { return ad::sum(ad::hadamard(x, x)); }, theta);
  CHECK(quad < 1e-8);
  const double constant = finite_diff_check(
      [](ad::Tape& t, const ad::Var&) { return ad::sum(t.constant(Matrix::Constant(2, 2, 3.0))); }, theta);
  CHECK(constant == 0.0);
}

TEST_CASE("finite_diff_check reports a wrong gradient") {
  // A function whose taped value is fine but whose gradient is ignored by
  // construction (the parameter only enters through an unrecorded copy).
  const Matrix theta = test::random_matrix(2, 2, 3);
  const double err = finite_diff_check(
      [](ad::Tape& t, const ad::Var& x) { return ad::sum(t.constant(x.value().array().square().matrix())); }, theta);
  CHECK(err > 1e-2);
}

TEST_CASE("every differentiable op passes finite differences") {
  struct Case {
    const char* name;
    std::vector<Matrix> params;
    TapedFunction f;
  };
  const Matrix wfix = test::random_matrix(6, 5, 98);
  std::vector<Case> cases;
  cases.push_back({"matmul",
                   {test::random_matrix(6, 4, 1), test::random_matrix(4, 5, 2)},
                   [&](ad::Tape&, std::span<const ad::Var> p) {
                     return ad::weighted_sum(ad::matmul(p[0], p[1]), wfix);
                   }});
  cases.push_back({"transpose+sub",
                   {test::random_matrix(5, 6, 3), test::random_matrix(6, 5, 4)},
                   [&](ad::Tape&, std::span<const ad::Var> p) {
                     return ad::weighted_sum(ad::transpose(p[0]) - p[1], wfix);
                   }});
  cases.push_back({"add+hadamard+scale",
                   {test::random_matrix(6, 5, 5), test::random_matrix(6, 5, 6)},
                   [&](ad::Tape&, std::span<const ad::Var> p) {
                     return ad::weighted_sum(2.5 * ad::hadamard(p[0] + p[1], p[0]), wfix);
                   }});
  cases.push_back({"row broadcast + constant",
                   {test::random_matrix(6, 5, 7), test::random_matrix(1, 5, 8)},
                   [&](ad::Tape&, std::span<const ad::Var> p) {
                     return ad::weighted_sum(ad::add_constant(ad::add_row_broadcast(p[0], p[1]), wfix), wfix);
                   }});
  cases.push_back({"relu (away from kink)",
                   {(test::random_matrix(6, 5, 9).array() + 0.0).unaryExpr([](double v) {
                      return std::abs(v) < 0.05 ? v + 0.2 : v;
                    }).matrix()},
                   [&](ad::Tape&, std::span<const ad::Var> p) { return ad::weighted_sum(ad::relu(p[0]), wfix); }});
  cases.push_back({"tanh",
                   {test::random_matrix(6, 5, 10)},
                   [&](ad::Tape&, std::span<const ad::Var> p) { return ad::weighted_sum(ad::tanh(p[0]), wfix); }});
  cases.push_back({"row_normalize",
                   {test::random_matrix(6, 5, 12)},
                   [&](ad::Tape&, std::span<const ad::Var> p) {
                     return ad::weighted_sum(ad::row_normalize(p[0]), wfix);
                   }});
  cases.push_back({"vstack",
                   {test::random_matrix(2, 5, 13), test::random_matrix(4, 5, 14)},
                   [&](ad::Tape&, std::span<const ad::Var> p) {
                     return ad::weighted_sum(ad::vstack(p[0], p[1]), wfix);
                   }});
  cases.push_back({"log_sum_exp",
                   {test::random_matrix(6, 5, 15, 3.0)},
                   [&](ad::Tape&, std::span<const ad::Var> p) { return ad::log_sum_exp(p[0]); }});
  cases.push_back({"log_softmax_rows",
                   {test::random_matrix(6, 5, 16, 2.0)},
                   [&](ad::Tape&, std::span<const ad::Var> p) {
                     return ad::weighted_sum(ad::log_softmax_rows(p[0]), wfix);
                   }});
  cases.push_back({"cosine_sim",
                   {test::random_matrix(1, 5, 17), test::random_matrix(1, 5, 18)},
                   [&](ad::Tape&, std::span<const ad::Var> p) { return ad::cosine_sim(p[0], p[1]); }});
  cases.push_back({"sum of 64-dim chain",
                   {test::random_matrix(8, 8, 19, 0.3)},
                   [&](ad::Tape&, std::span<const ad::Var> p) {
                     return ad::sum(ad::tanh(ad::matmul(p[0], ad::transpose(p[0]))));
                   }});
  for (const Case& c : cases) {
    CAPTURE(c.name);
    const GradCheckResult r = finite_diff_check(c.f, c.params);
    CHECK(r.max_rel_error < 1e-4);
  }
}

TEST_CASE("row_normalize rejects a zero row") {
  ad::Tape t;
  Matrix m = Matrix::Ones(2, 3);
  m.row(1).setZero();
  const ad::Var x = t.parameter(m);
  CHECK_THROWS_AS((void)ad::row_normalize(x), DegenerateInputError);
}

TEST_CASE("backward is bit-deterministic") {
  auto run = [] {
    ad::Tape t;
    const ad::Var a = t.parameter(test::random_matrix(7, 6, 21));
    const ad::Var b = t.parameter(test::random_matrix(6, 3, 22));
    const ad::Var z = ad::row_normalize(ad::tanh(ad::matmul(a, b)));
    const ad::Var out = ad::log_sum_exp(ad::matmul(z, ad::transpose(z)));
    return t.backward(out).all();
  };
  const auto g1 = run();
  const auto g2 = run();
  REQUIRE(g1.size() == g2.size());
  for (std::size_t k = 0; k < g1.size(); ++k) {
    CHECK(std::memcmp(g1[k].data(), g2[k].data(), sizeof(double) * static_cast<std::size_t>(g1[k].size())) == 0);
  }
}

TEST_CASE("parameter_ref views caller storage") {
  Matrix theta = test::random_matrix(2, 2, 30);
  ad::Tape t;
  const ad::Var x = t.parameter_ref(theta);
  CHECK(x.value().data() == theta.data());
  const ad::Gradients g = t.backward(ad::sum(ad::hadamard(x, x)));
  CHECK((g[x] - 2.0 * theta).cwiseAbs().maxCoeff() < 1e-15);
}
