#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "pgn/checkpoint.hpp"
#include "pgn/gradcheck.hpp"
#include "pgn/ops.hpp"
#include "pgn/tensor.hpp"
#include "test_util.hpp"

using namespace pgn;
using testutil::thrown_code;

TEST_CASE("matmul: identity, hand-computed product, inner-extent mismatch") {
  auto eye = Tensor<float>::from({2, 2}, {1, 0, 0, 1});
  auto a = Tensor<float>::from({2, 2}, {1, 2, 3, 4});
  auto r = ops::matmul(eye, a);
  CHECK(r.data() == std::vector<float>{1, 2, 3, 4});

  auto b = Tensor<float>::from({2, 2}, {5, 6, 7, 8});
  auto c = ops::matmul(a, b);
  CHECK(c.data() == std::vector<float>{19, 22, 43, 50});

  auto bad = Tensor<float>::zeros({2, 3});
  CHECK(thrown_code([&] { ops::matmul(bad, bad); }) == ErrorCode::ShapeMismatch);
}

TEST_CASE("softmax: uniform input, overflow-safe saturation, fixed values") {
  auto u = ops::softmax(Tensor<float>::zeros({4}));
  for (float v : u.data()) CHECK(v == doctest::Approx(0.25).epsilon(1e-6));

  auto sat = ops::softmax(Tensor<float>::from({2}, {1000.0f, 0.0f}));
  CHECK(sat.data()[0] == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(sat.data()[1] == doctest::Approx(0.0).epsilon(1e-6));
  CHECK(std::isfinite(sat.data()[0]));

  // e^x / sum(e^x) evaluated in 64-bit
  auto p = ops::softmax(Tensor<float>::from({3}, {1, 2, 3}));
  CHECK(p.data()[0] == doctest::Approx(0.09003057).epsilon(1e-4));
  CHECK(p.data()[1] == doctest::Approx(0.24472847).epsilon(1e-4));
  CHECK(p.data()[2] == doctest::Approx(0.66524096).epsilon(1e-4));
}

TEST_CASE("softmax rows sum to one across random tensors") {
  Rng rng(99);
  for (int trial = 0; trial < 50; ++trial) {
    const int64_t rows = 1 + static_cast<int64_t>(rng.below(6));
    const int64_t n = 1 + static_cast<int64_t>(rng.below(32));
    auto x = Tensor<float>::from({rows, n},
                                 testutil::rand_vec(static_cast<size_t>(rows * n), rng, -30, 30));
    auto y = ops::softmax(x);
    for (int64_t r = 0; r < rows; ++r) {
      double sum = 0;
      for (int64_t j = 0; j < n; ++j) sum += y.data()[static_cast<size_t>(r * n + j)];
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
    }
  }
}

TEST_CASE("relu and constant-row layer norm") {
  auto r = ops::relu(Tensor<float>::from({2}, {-1, 2}));
  CHECK(r.data() == std::vector<float>{0, 2});

  // constant vector: zero variance handled by epsilon, output all zeros
  auto gamma = Tensor<float>::filled({5}, 1.0f);
  auto beta = Tensor<float>::zeros({5});
  auto y = ops::layer_norm(Tensor<float>::filled({5}, 3.25f), gamma, beta);
  for (float v : y.data()) CHECK(v == doctest::Approx(0.0).epsilon(1e-6));
}

TEST_CASE("conv2d: sliding-window sums against a hand computation") {
  std::vector<float> img(9);
  for (int i = 0; i < 9; ++i) img[static_cast<size_t>(i)] = static_cast<float>(i);
  auto x = Tensor<float>::from({1, 1, 3, 3}, std::move(img));
  auto w = Tensor<float>::filled({1, 1, 2, 2}, 1.0f);
  auto bias = Tensor<float>::zeros({1});
  auto y = ops::conv2d(x, w, bias, 1, 0);
  CHECK(y.shape() == std::vector<int64_t>{1, 1, 2, 2});
  CHECK(y.data() == std::vector<float>{8, 12, 20, 24});
}

TEST_CASE("backward: sum gives ones, elementwise product gives the partner") {
  auto x = Tensor<float>::from({2, 3}, {1, 2, 3, 4, 5, 6}, true);
  auto loss = ops::sum_all(x);
  backward(loss);
  CHECK(x.grad() == std::vector<float>(6, 1.0f));

  auto a = Tensor<float>::from({3}, {1, 2, 3}, true);
  auto b = Tensor<float>::from({3}, {4, 5, 6}, true);
  auto l2 = ops::sum_all(ops::mul(a, b));
  backward(l2);
  CHECK(a.grad() == b.data());
  CHECK(b.grad() == a.data());
}

TEST_CASE("backward requires a scalar loss") {
  auto x = Tensor<float>::from({2}, {1, 2}, true);
  auto y = ops::relu(x);
  CHECK(thrown_code([&] { backward(y); }) == ErrorCode::NotScalar);
}

TEST_CASE("a tensor used twice accumulates both contributions") {
  auto x = Tensor<float>::from({3}, {1.5f, -2.0f, 0.5f}, true);
  auto loss = ops::sum_all(ops::mul(x, x));
  backward(loss);
  for (int i = 0; i < 3; ++i)
    CHECK(x.grad()[static_cast<size_t>(i)] == 2.0f * x.data()[static_cast<size_t>(i)]);

  // diamond graph holds one node per tensor
  auto g = build_graph(loss);
  CHECK(g.order.size() == 3);  // x, mul, sum
}

TEST_CASE("calling backward twice without zeroing doubles every grad exactly") {
  Rng rng(17);
  auto x = Tensor<float>::from({4, 4}, testutil::rand_vec(16, rng), true);
  auto w = Tensor<float>::from({4, 4}, testutil::rand_vec(16, rng), true);
  auto make_loss = [&] { return ops::sum_all(ops::gelu(ops::matmul(x, w))); };
  auto l1 = make_loss();
  backward(l1);
  const auto gx = x.grad();
  const auto gw = w.grad();
  auto l2 = make_loss();
  backward(l2);
  for (size_t i = 0; i < gx.size(); ++i) CHECK(x.grad()[i] == 2.0f * gx[i]);
  for (size_t i = 0; i < gw.size(); ++i) CHECK(w.grad()[i] == 2.0f * gw[i]);
}

TEST_CASE("gradients flow through frozen parameters to upstream trainables") {
  Rng rng(5);
  Parameter<float> frozen("w", Tensor<float>::from({3, 3}, testutil::rand_vec(9, rng)), true);
  CHECK_FALSE(frozen.tensor.requires_grad());
  auto f = [&](Tensor<float> x) {
    return ops::sum_all(ops::gelu(ops::matmul(x, frozen.tensor)));
  };
  auto x = Tensor<float>::from({2, 3}, testutil::rand_vec(6, rng, 0.3, 1.2));
  // finite differences perturb only the trainable input
  CHECK(grad_check(f, x, 1e-3f) < 1e-2);
  CHECK_FALSE(frozen.tensor.has_grad());
}

TEST_CASE("grad_check: quadratic form is tight") {
  Rng rng(21);
  auto x = Tensor<float>::from({6}, testutil::rand_vec(6, rng, 0.5, 1.5));
  auto f = [](Tensor<float> t) {
    return ops::scale(ops::sum_all(ops::mul(t, t)), 0.5f);
  };
  CHECK(grad_check(f, x, 1e-3f) < 1e-4);
}

TEST_CASE("grad_check: softmax cross-entropy on random logits") {
  Rng rng(33);
  auto logits = Tensor<float>::from({4, 5}, testutil::rand_vec(20, rng, -1.5, 1.5));
  std::vector<int> labels = {0, 3, 2, 4};
  auto f = [&](Tensor<float> t) { return ops::cross_entropy_with_logits(t, labels); };
  CHECK(grad_check(f, logits, 1e-3f) < 1e-2);
}

TEST_CASE("composite net gradients agree with finite differences in 64-bit") {
  Rng rng(55);
  auto w1 = Tensor<double>::from({5, 7}, testutil::rand_vec_d(35, rng), true);
  auto w2 = Tensor<double>::from({7, 3}, testutil::rand_vec_d(21, rng), true);
  auto gamma = Tensor<double>::filled({7}, 1.0, true);
  auto beta = Tensor<double>::zeros({7}, true);
  std::vector<int> labels = {1, 0};
  auto x = Tensor<double>::from({2, 5}, testutil::rand_vec_d(10, rng));
  auto loss_fn = [&] {
    auto h = ops::layer_norm(ops::gelu(ops::matmul(x, w1)), gamma, beta);
    return ops::cross_entropy_with_logits(ops::matmul(h, w2), labels);
  };
  Parameter<double> p1("w1", w1), p2("w2", w2), p3("g", gamma), p4("b", beta);
  Rng pick(1);
  auto stats = grad_check_params<double>(loss_fn, {&p1, &p2, &p3, &p4}, 1e-5, 0, pick);
  CHECK(stats.max_rel < 1e-6);
}

TEST_CASE("identical seeds give bit-identical op chains") {
  auto run = [](uint64_t seed) {
    Rng rng(seed);
    auto x = ops::randn<float>({8, 8}, 0.5, rng);
    auto w = ops::randn<float>({8, 8}, 0.5, rng);
    auto y = ops::softmax(ops::matmul(ops::gelu(x), w));
    return y.data();
  };
  CHECK(run(1234) == run(1234));
  CHECK(run(1234) != run(1235));
}

TEST_CASE("tensor invariants: shape coverage and grad sizing") {
  CHECK(thrown_code([] { Tensor<float>::from({2, 3}, {1, 2, 3}); }) == ErrorCode::ShapeMismatch);
  auto x = Tensor<float>::zeros({3, 2}, true);
  CHECK(x.numel() == 6);
  auto loss = ops::sum_all(x);
  backward(loss);
  CHECK(x.grad().size() == x.data().size());
}

TEST_CASE("debug mode rejects non-finite op outputs") {
  set_nan_checks(true);
  auto x = Tensor<float>::filled({2}, 1.0f);
  CHECK(thrown_code([&] { ops::scale(x, std::numeric_limits<float>::infinity()); }) ==
        ErrorCode::Internal);
  set_nan_checks(false);
}

TEST_CASE("layout ops backpropagate exactly (64-bit finite differences)") {
  Rng rng(77);
  auto x = Tensor<double>::from({2, 3, 4}, testutil::rand_vec_d(24, rng));
  auto f = [](Tensor<double> t) {
    auto p = ops::permute(t, {1, 0, 2});           // [3,2,4]
    auto r = ops::reshape(p, {6, 4});              // [6,4]
    auto s = ops::slice_last(r, 1, 2);             // [6,2]
    auto c = ops::concat<double>({s, s}, 1);       // [6,4]
    auto m = ops::select_mid(ops::reshape(c, {2, 3, 4}), 1);  // [2,4]
    return ops::sum_all(ops::mul(m, m));
  };
  CHECK(grad_check(f, x, 1e-6) < 1e-8);
}

TEST_CASE("embedding lookup accumulates grads into repeated rows") {
  auto table = Tensor<float>::from({3, 2}, {1, 2, 3, 4, 5, 6}, true);
  auto out = ops::embedding_lookup(table, {2, 0, 2});
  CHECK(out.data() == std::vector<float>{5, 6, 1, 2, 5, 6});
  auto loss = ops::sum_all(out);
  backward(loss);
  CHECK(table.grad() == std::vector<float>{1, 1, 0, 0, 2, 2});
  CHECK(thrown_code([&] { ops::embedding_lookup(table, {3}); }) == ErrorCode::IndexOutOfRange);
}

TEST_CASE("checkpoint round-trips byte-identically and rejects corruption") {
  Rng rng(101);
  Parameter<float> a("model.a", Tensor<float>::from({2, 3}, testutil::rand_vec(6, rng)), false);
  Parameter<float> b("model.b", Tensor<float>::from({4}, testutil::rand_vec(4, rng)), true);
  ParamStore<float> store;
  store.add(&a);
  store.add(&b);

  const std::string bytes = encode_checkpoint(snapshot_params(store));
  Checkpoint cp = decode_checkpoint(bytes);
  CHECK(encode_checkpoint(cp) == bytes);
  CHECK(cp.at("model.b").frozen);
  CHECK(cp.at("model.a").shape == std::vector<int64_t>{2, 3});

  std::string bad_magic = bytes;
  bad_magic[0] = 'X';
  CHECK(thrown_code([&] { decode_checkpoint(bad_magic); }) == ErrorCode::BadCheckpoint);

  std::string bad_version = bytes;
  bad_version[4] = 2;
  CHECK(thrown_code([&] { decode_checkpoint(bad_version); }) == ErrorCode::BadCheckpoint);

  CHECK(thrown_code([&] { decode_checkpoint(bytes.substr(0, bytes.size() - 3)); }) ==
        ErrorCode::BadCheckpoint);
}
