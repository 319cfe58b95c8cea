#include <doctest.h>

#include <cmath>

#include "sstk/grad_check.hpp"
#include "sstk/ops.hpp"
#include "test_util.hpp"

using namespace sstk;

TEST_SUITE_BEGIN("numerics");

TEST_CASE("rms_norm matches the closed form") {
  Tensor x = Tensor::from_data({2}, {3, 4});
  Tensor gain = Tensor::constant({2}, 1.0);
  Tensor out = rms_norm(x, gain, 0.0);
  CHECK(out.at(0) == doctest::Approx(0.8485281374238570).epsilon(1e-12));
  CHECK(out.at(1) == doctest::Approx(1.1313708498984760).epsilon(1e-12));

  Tensor zero = Tensor::from_data({2}, {0, 0});
  Tensor z = rms_norm(zero, gain, 1e-6);
  CHECK(z.at(0) == 0.0);
  CHECK(z.at(1) == 0.0);

  // Constant vectors normalize to sign(c) with eps = 0.
  for (double c : {2.5, -0.75, 1e-3}) {
    Tensor cv = Tensor::constant({5}, c);
    Tensor g5 = Tensor::constant({5}, 1.0);
    Tensor o = rms_norm(cv, g5, 0.0);
    for (Index i = 0; i < 5; ++i) CHECK(o.at(i) == doctest::Approx(c > 0 ? 1.0 : -1.0));
  }

  CHECK_THROWS_AS(rms_norm(x, Tensor::constant({3}, 1.0), 1e-6), ShapeError);
}

TEST_CASE("softmax_rows examples and row-sum property") {
  Tensor a = softmax_rows(Tensor::from_data({2}, {0, 0}));
  CHECK(a.at(0) == doctest::Approx(0.5).epsilon(1e-15));

  Tensor b = softmax_rows(Tensor::from_data({2}, {std::log(2.0), 0}));
  CHECK(b.at(0) == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
  CHECK(b.at(1) == doctest::Approx(1.0 / 3.0).epsilon(1e-14));

  // Shift invariance and unit row sums for |x| <= 50.
  Rng rng(11);
  for (int s = 0; s < 10; ++s) {
    Tensor x = Tensor::zeros({4, 6});
    for (Index i = 0; i < x.numel(); ++i) x.at(i) = (rng.uniform() * 2 - 1) * 50.0;
    Tensor shifted = x.clone();
    for (Index r = 0; r < 4; ++r) {
      double c = (rng.uniform() * 2 - 1) * 10.0;
      for (Index j = 0; j < 6; ++j) shifted.at(r, j) += c;
    }
    Tensor sx = softmax_rows(x);
    Tensor ss = softmax_rows(shifted);
    for (Index r = 0; r < 4; ++r) {
      double sum = 0;
      for (Index j = 0; j < 6; ++j) {
        CHECK(sx.at(r, j) >= 0.0);
        sum += sx.at(r, j);
        CHECK(std::abs(sx.at(r, j) - ss.at(r, j)) < 1e-12);
      }
      CHECK(std::abs(sum - 1.0) < 1e-12);
    }
  }

  CHECK_THROWS_AS(Tensor::zeros({2, 0}), ShapeError);  // empty last dimension
}

TEST_CASE("causal attention basics") {
  Rng rng(3);
  Tensor q1 = Tensor::randn({1, 4}, rng);
  Tensor k1 = Tensor::randn({1, 4}, rng);
  Tensor v1 = Tensor::randn({1, 4}, rng);
  Tensor o1 = causal_attention(q1, k1, v1, 0.5);
  CHECK(test::bit_equal(o1, v1));  // single-element softmax is 1

  Tensor q = Tensor::zeros({2, 4});
  Tensor k = Tensor::zeros({2, 4});
  Tensor v = Tensor::randn({2, 4}, rng);
  Tensor o = causal_attention(q, k, v, 1.0);
  for (Index j = 0; j < 4; ++j)
    CHECK(o.at(1, j) == doctest::Approx(0.5 * (v.at(0, j) + v.at(1, j))).epsilon(1e-15));

  // Perturbing v[2] cannot reach earlier outputs.
  Tensor q3 = Tensor::randn({3, 4}, rng);
  Tensor k3 = Tensor::randn({3, 4}, rng);
  Tensor v3 = Tensor::randn({3, 4}, rng);
  Tensor base = causal_attention(q3, k3, v3, 0.5);
  Tensor v3b = v3.clone();
  v3b.at(2, 1) += 10.0;
  Tensor pert = causal_attention(q3, k3, v3b, 0.5);
  for (Index i = 0; i < 2; ++i)
    for (Index j = 0; j < 4; ++j) CHECK(base.at(i, j) == pert.at(i, j));
}

TEST_CASE("grad_check reference cases") {
  Tensor x = Tensor::from_data({3}, {1, 2, 3});
  auto sum_sq = [](const Tensor& t) {
    return sum_all(mul(t, t));
  };
  CHECK(grad_check(sum_sq, x, 1e-5) < 1e-6);

  // Two-logit cross-entropy head.
  Rng rng(5);
  Tensor logits_in = Tensor::randn({4, 2}, rng);
  std::vector<int> targets{0, 1, 1, 0};
  auto ce = [&targets](const Tensor& t) { return cross_entropy(t, targets); };
  CHECK(grad_check(ce, logits_in, 1e-5) < 1e-5);

  // Constant function: both gradients identically zero.
  auto constf = [](const Tensor&) { return Tensor::scalar(4.25); };
  CHECK(grad_check(constf, x, 1e-5) == 0.0);

  CHECK_THROWS_AS(grad_check(sum_sq, x, 0.5), ArgumentError);
}

TEST_CASE("primitive gradients agree with central differences") {
  Rng rng(17);
  const double h = 1e-5;
  const double tol = 1e-6;

  Tensor a = Tensor::randn({3, 4}, rng);
  Tensor b = Tensor::randn({3, 4}, rng);
  auto check_both = [&](auto f, const Tensor& x, const Tensor& y) {
    CHECK(grad_check([&](const Tensor&) { return f(); }, x, h) < tol);
    CHECK(grad_check([&](const Tensor&) { return f(); }, y, h) < tol);
  };

  check_both([&] { return sum_all(mul(add(a, b), sub(a, b))); }, a, b);

  Tensor m1 = Tensor::randn({3, 4}, rng);
  Tensor m2 = Tensor::randn({4, 5}, rng);
  check_both([&] { return mean_all(matmul(m1, m2)); }, m1, m2);

  Tensor n2 = Tensor::randn({5, 4}, rng);
  check_both([&] { return mean_all(gelu(matmul_nt(m1, n2))); }, m1, n2);

  // Weight the softmax so the objective is not the constant row count.
  Tensor xg = Tensor::randn({4, 6}, rng);
  Tensor gg = Tensor::randn({6}, rng, 0.5);
  Tensor sw = Tensor::randn({4, 6}, rng);
  check_both([&] { return sum_all(mul(softmax_rows(rms_norm(xg, gg, 1e-6)), sw)); }, xg, gg);

  Tensor row = Tensor::randn({6}, rng);
  check_both([&] { return sum_all(gelu(add_row(xg, row))); }, xg, row);

  Tensor sc = Tensor::randn({6, 4}, rng);
  CHECK(grad_check([&](const Tensor&) {
          return mean_all(concat_cols({slice_rows(sc, 1, 3), slice_cols(slice_rows(sc, 3, 3), 1, 2),
                                       gather_rows(sc, {5, 0, 2})}));
        }, sc, h) < tol);
  CHECK(grad_check([&](const Tensor&) {
          return mean_all(mul(concat_rows({slice_rows(sc, 4, 2), gather_rows(sc, {1, 1})}),
                              concat_rows({slice_rows(sc, 4, 2), gather_rows(sc, {1, 1})})));
        }, sc, h) < tol);

  Tensor base = Tensor::randn({5, 3}, rng);
  Tensor geo = Tensor::randn({2, 3}, rng);
  std::vector<uint8_t> mask{0, 1, 0, 1, 0};
  check_both([&] { return mean_all(mul(scatter_add_rows(base, geo, mask),
                                       scatter_add_rows(base, geo, mask))); },
             base, geo);

  Tensor q = Tensor::randn({4, 6}, rng);
  Tensor k = Tensor::randn({4, 6}, rng);
  Tensor v = Tensor::randn({4, 6}, rng);
  for (bool causal : {true, false}) {
    auto att = [&] { return mean_all(mul(attention(q, k, v, 0.41, causal),
                                         attention(q, k, v, 0.41, causal))); };
    CHECK(grad_check([&](const Tensor&) { return att(); }, q, h) < tol);
    CHECK(grad_check([&](const Tensor&) { return att(); }, k, h) < tol);
    CHECK(grad_check([&](const Tensor&) { return att(); }, v, h) < tol);
  }
}

TEST_CASE("composite chain gradient fidelity over 20 seeds") {
  // rms_norm -> linear -> gelu -> attention -> cross-entropy, the chain every
  // forward pass in this artifact is built from.
  for (uint64_t seed = 1; seed <= 20; ++seed) {
    Rng rng(seed);
    Tensor x = Tensor::randn({4, 6}, rng);
    Tensor gain = Tensor::constant({6}, 1.0);
    Tensor w = Tensor::randn({6, 6}, rng, 0.4);
    Tensor bias = Tensor::randn({6}, rng, 0.2);
    Tensor wq = Tensor::randn({6, 6}, rng, 0.4);
    Tensor wk = Tensor::randn({6, 6}, rng, 0.4);
    Tensor head = Tensor::randn({6, 3}, rng, 0.5);
    std::vector<int> targets{2, 0, 1, 2};
    auto f = [&] {
      Tensor nrm = rms_norm(x, gain, 1e-6);
      Tensor hmid = gelu(add_row(matmul(nrm, w), bias));
      Tensor att = causal_attention(matmul(hmid, wq), matmul(hmid, wk), hmid, 0.408);
      return cross_entropy(matmul(att, head), targets);
    };
    for (const Tensor* p : {&x, &w, &bias, &wq, &head, &gain})
      CHECK(grad_check([&](const Tensor&) { return f(); }, *p, 1e-5) < 1e-5);
  }
}

TEST_CASE("operations are deterministic") {
  Rng rng(23);
  Tensor a = Tensor::randn({8, 8}, rng);
  Tensor b = Tensor::randn({8, 8}, rng);
  CHECK(test::bit_equal(matmul(a, b), matmul(a, b)));
  CHECK(test::bit_equal(softmax_rows(a), softmax_rows(a)));
  CHECK(test::bit_equal(gelu(a), gelu(a)));
  CHECK(test::bit_equal(attention(a, b, a, 0.3, true), attention(a, b, a, 0.3, true)));
}

TEST_CASE("rng streams are reproducible and splittable") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
  // Same (seed, counter) resumes identically mid-stream.
  Rng c(42, 50);
  Rng d(42);
  for (int i = 0; i < 50; ++i) (void)d.next_u64();
  for (int i = 0; i < 20; ++i) CHECK(c.next_u64() == d.next_u64());
  // uniform_int covers its range inclusively.
  Rng e(9);
  bool lo = false, hi = false;
  for (int i = 0; i < 200; ++i) {
    int64_t x = e.uniform_int(3, 6);
    CHECK(x >= 3);
    CHECK(x <= 6);
    lo = lo || x == 3;
    hi = hi || x == 6;
  }
  CHECK(lo);
  CHECK(hi);
}

TEST_CASE("backward accumulates across calls for batch gradients") {
  Tensor x = Tensor::from_data({2}, {1.0, 2.0});
  x.set_requires_grad(true);
  backward(scale(sum_all(mul(x, x)), 0.5));
  backward(scale(sum_all(mul(x, x)), 0.5));
  CHECK(x.grad()(0) == doctest::Approx(2.0));  // d/dx of sum(x^2) accumulated twice, halved
  CHECK(x.grad()(1) == doctest::Approx(4.0));
  x.zero_grad();
  x.set_requires_grad(false);
}

TEST_SUITE_END();
