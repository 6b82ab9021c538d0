#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "helpers.hpp"
#include "relvm/adam.hpp"
#include "relvm/nn.hpp"
#include "relvm/rng.hpp"

using namespace relvm;
using relvm::testing::compare_grads;
using relvm::testing::finite_diff_grad;
using relvm::testing::kl_quadrature_1d;

namespace {

ParamMap random_lstm(std::size_t in, std::size_t h, std::uint64_t seed) {
  ParamMap p;
  RngStream rng(seed, 0);
  register_lstm_params(p, "lstm", in, h, rng);
  return p;
}

}  // namespace

TEST_CASE("rng determinism and stream separation") {
  RngStream a(42, 1), b(42, 1), c(42, 2);
  for (int i = 0; i < 16; ++i) REQUIRE(a.next_u64() == b.next_u64());
  RngStream a2(42, 1);
  bool any_diff = false;
  for (int i = 0; i < 16; ++i) any_diff |= (a2.next_u64() != c.next_u64());
  REQUIRE(any_diff);

  RngStream u(7, 0);
  for (int i = 0; i < 1000; ++i) {
    const double x = u.uniform();
    REQUIRE(x >= 0.0);
    REQUIRE(x < 1.0);
  }
}

TEST_CASE("rng normal matches standard moments") {
  RngStream rng(123, 5);
  const std::size_t n = 100000;
  double s = 0.0, s2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = rng.normal();
    s += x;
    s2 += x * x;
  }
  const double mean = s / n;
  const double var = s2 / n - mean * mean;
  REQUIRE(std::abs(mean) < 4.0 / std::sqrt(static_cast<double>(n)));
  // Var(x^2) = 2 for standard normal, so SE(var) ~ sqrt(2/n).
  REQUIRE(std::abs(var - 1.0) < 4.0 * std::sqrt(2.0 / n));
}

TEST_CASE("lstm_step zero parameters give zero state") {
  ParamMap p;
  RngStream rng(0, 0);
  register_lstm_params(p, "lstm", 3, 4, rng);
  p.at("lstm.wx").fill(0.0);
  p.at("lstm.wh").fill(0.0);
  p.at("lstm.b").fill(0.0);

  LstmState prev(4);
  Array input = Array::of({0.5, -1.0, 2.0});
  LstmState next = lstm_step(input, prev, p, "lstm");
  for (double x : next.hidden.v) REQUIRE(x == 0.0);
  for (double x : next.cell.v) REQUIRE(x == 0.0);
}

TEST_CASE("lstm_step saturated gates carry the previous cell") {
  // One unit; forget gate driven to ~1, input gate to ~0 via biases.
  ParamMap p;
  p.add("lstm.wx", Array({4, 1}));
  p.add("lstm.wh", Array({4, 1}));
  Array b({4});
  b.v[0] = -40.0;  // input gate ~ 0
  b.v[1] = 40.0;   // forget gate ~ 1
  p.add("lstm.b", std::move(b));

  LstmState prev(1);
  prev.cell.v[0] = 0.7;
  LstmState next = lstm_step(Array::of({0.3}), prev, p, "lstm");
  REQUIRE(next.cell.v[0] == Catch::Approx(0.7).margin(1e-12));
  REQUIRE(next.hidden.v[0] == Catch::Approx(0.5 * std::tanh(0.7)).margin(1e-12));
}

TEST_CASE("lstm_step rejects dimension mismatch") {
  ParamMap p = random_lstm(3, 4, 9);
  LstmState prev(4);
  REQUIRE_THROWS_AS(lstm_step(Array::of({1.0, 2.0}), prev, p, "lstm"), RejectedInput);
}

TEST_CASE("lstm gradients match finite differences") {
  const std::size_t in = 2, H = 3;
  ParamMap p = random_lstm(in, H, 17);
  RngStream rng(31, 2);
  const Array x1 = rng.normal_array(in), x2 = rng.normal_array(in);
  const Array wh_ = rng.normal_array(H), wc_ = rng.normal_array(H);

  // Two chained steps so the h_prev/c_prev paths are exercised.
  auto loss = [&](const ParamMap& q) {
    LstmState s(H);
    s = lstm_step(x1, s, q, "lstm");
    s = lstm_step(x2, s, q, "lstm");
    return dot(wh_, s.hidden) + dot(wc_, s.cell);
  };

  ParamMap grads = p.zeros_like();
  LstmCache c1, c2;
  LstmState s(H);
  s = lstm_step(x1, s, p, "lstm", &c1);
  s = lstm_step(x2, s, p, "lstm", &c2);
  Array d_h = wh_, d_c = wc_;
  Array d_x2({in}), d_h1({H}), d_c1({H});
  lstm_step_backward(c2, p, "lstm", d_h, d_c, grads, d_x2, d_h1, d_c1);
  Array d_x1({in}), d_h0({H}), d_c0({H});
  lstm_step_backward(c1, p, "lstm", d_h1, d_c1, grads, d_x1, d_h0, d_c0);

  auto r = compare_grads(grads, finite_diff_grad(loss, p));
  INFO("worst " << r.worst);
  REQUIRE(r.max_rel_err < 1e-4);

  // Input gradient for the second step.
  ParamMap xin;
  xin.add("x2", x2);
  auto loss_x = [&](const ParamMap& q) {
    LstmState t(H);
    t = lstm_step(x1, t, p, "lstm");
    t = lstm_step(q.at("x2"), t, p, "lstm");
    return dot(wh_, t.hidden) + dot(wc_, t.cell);
  };
  ParamMap fd_x = finite_diff_grad(loss_x, xin);
  for (std::size_t k = 0; k < in; ++k)
    REQUIRE(relvm::testing::rel_err(d_x2.v[k], fd_x.at("x2").v[k]) < 1e-4);
}

TEST_CASE("bilstm zero parameters give zero encoding") {
  ParamMap p;
  RngStream rng(0, 0);
  register_lstm_params(p, "enc.fwd", 2, 5, rng);
  register_lstm_params(p, "enc.bwd", 2, 5, rng);
  p.fill(0.0);
  std::vector<Array> seq = {Array::of({1.0, 2.0}), Array::of({-1.0, 0.5})};
  Array out = bilstm_encode(seq, p, "enc");
  REQUIRE(out.size() == 10);
  for (double x : out.v) REQUIRE(x == 0.0);
}

TEST_CASE("bilstm output length is 2H") {
  ParamMap p;
  RngStream rng(1, 0);
  register_lstm_params(p, "enc.fwd", 3, 256, rng);
  register_lstm_params(p, "enc.bwd", 3, 256, rng);
  std::vector<Array> seq = {Array::of({0.1, 0.2, 0.3})};
  REQUIRE(bilstm_encode(seq, p, "enc").size() == 512);
}

TEST_CASE("bilstm swap symmetry") {
  const std::size_t in = 3, H = 4;
  RngStream rng(77, 0);
  ParamMap p1, p2;
  register_lstm_params(p1, "enc.fwd", in, H, rng);
  register_lstm_params(p1, "enc.bwd", in, H, rng);
  // p2 swaps the two directions' parameter sets.
  p2.add("enc.fwd.wx", p1.at("enc.bwd.wx"));
  p2.add("enc.fwd.wh", p1.at("enc.bwd.wh"));
  p2.add("enc.fwd.b", p1.at("enc.bwd.b"));
  p2.add("enc.bwd.wx", p1.at("enc.fwd.wx"));
  p2.add("enc.bwd.wh", p1.at("enc.fwd.wh"));
  p2.add("enc.bwd.b", p1.at("enc.fwd.b"));

  std::vector<Array> seq;
  for (int t = 0; t < 5; ++t) seq.push_back(rng.normal_array(in));
  std::vector<Array> rev(seq.rbegin(), seq.rend());

  Array a = bilstm_encode(seq, p1, "enc");
  Array b = bilstm_encode(rev, p2, "enc");
  for (std::size_t k = 0; k < H; ++k) {
    REQUIRE(a.v[k] == Catch::Approx(b.v[H + k]).margin(1e-14));
    REQUIRE(a.v[H + k] == Catch::Approx(b.v[k]).margin(1e-14));
  }
}

TEST_CASE("bilstm rejects empty sequence") {
  ParamMap p = random_lstm(2, 3, 5);
  std::vector<Array> empty;
  REQUIRE_THROWS_AS(bilstm_encode(empty, p, "lstm"), RejectedInput);
}

TEST_CASE("bilstm gradients match finite differences") {
  const std::size_t in = 2, H = 3, T = 4;
  ParamMap p;
  RngStream rng(5, 1);
  register_lstm_params(p, "enc.fwd", in, H, rng);
  register_lstm_params(p, "enc.bwd", in, H, rng);
  std::vector<Array> seq;
  for (std::size_t t = 0; t < T; ++t) seq.push_back(rng.normal_array(in));
  const Array w = rng.normal_array(2 * H);

  auto loss = [&](const ParamMap& q) { return dot(w, bilstm_encode(seq, q, "enc")); };

  BilstmCache cache;
  bilstm_encode(seq, p, "enc", &cache);
  ParamMap grads = p.zeros_like();
  std::vector<Array> d_seq(T, Array({in}));
  bilstm_encode_backward(cache, p, "enc", w, grads, d_seq);

  auto r = compare_grads(grads, finite_diff_grad(loss, p));
  INFO("worst " << r.worst);
  REQUIRE(r.max_rel_err < 1e-4);

  // Sequence-input gradients.
  ParamMap xin;
  xin.add("x1", seq[1]);
  auto loss_x = [&](const ParamMap& q) {
    std::vector<Array> s = seq;
    s[1] = q.at("x1");
    return dot(w, bilstm_encode(s, p, "enc"));
  };
  ParamMap fd = finite_diff_grad(loss_x, xin);
  for (std::size_t k = 0; k < in; ++k)
    REQUIRE(relvm::testing::rel_err(d_seq[1].v[k], fd.at("x1").v[k]) < 1e-4);
}

TEST_CASE("gaussian_reparameterize basics") {
  GaussianParams p(Array::of({0.3, -0.2}), Array::of({0.5, -1.0}));
  Array zero({2});
  Array s = gaussian_reparameterize(p, zero);
  REQUIRE(s.v[0] == 0.3);
  REQUIRE(s.v[1] == -0.2);

  GaussianParams std2 = GaussianParams::standard(2);
  Array noise = Array::of({1.0, -1.0});
  Array t = gaussian_reparameterize(std2, noise);
  REQUIRE(t.v[0] == 1.0);
  REQUIRE(t.v[1] == -1.0);

  REQUIRE_THROWS_AS(gaussian_reparameterize(p, Array::of({1.0})), RejectedInput);
}

TEST_CASE("gaussian_reparameterize empirical mean") {
  GaussianParams p(Array::of({0.3, -0.2}), Array::of({0.5, -1.0}));
  const std::size_t n = 100000;
  RngStream rng(2024, 3);
  Array sum({2});
  for (std::size_t i = 0; i < n; ++i) {
    Array s = gaussian_reparameterize(p, rng.normal_array(2));
    for (int k = 0; k < 2; ++k) sum.v[k] += s.v[k];
  }
  for (int k = 0; k < 2; ++k) {
    const double se = std::exp(0.5 * p.log_variance.v[k]) / std::sqrt(static_cast<double>(n));
    REQUIRE(std::abs(sum.v[k] / n - p.mean.v[k]) < 4.0 * se);
  }
}

TEST_CASE("gaussian_kl_to_standard against quadrature") {
  REQUIRE(gaussian_kl_to_standard(GaussianParams::standard(3)) == 0.0);

  GaussianParams m1(Array::of({1.0}), Array::of({0.0}));
  REQUIRE(gaussian_kl_to_standard(m1) == Catch::Approx(kl_quadrature_1d(1.0, 0.0)).margin(1e-9));
  REQUIRE(gaussian_kl_to_standard(m1) == Catch::Approx(0.5).margin(1e-9));

  GaussianParams v1(Array::of({0.0}), Array::of({1.0}));
  REQUIRE(gaussian_kl_to_standard(v1) == Catch::Approx(kl_quadrature_1d(0.0, 1.0)).margin(1e-9));
  REQUIRE(gaussian_kl_to_standard(v1) ==
          Catch::Approx((std::exp(1.0) - 2.0) / 2.0).margin(1e-9));

  RngStream rng(99, 0);
  for (int i = 0; i < 20; ++i) {
    const double mu = rng.normal() * 2.0;
    const double lv = rng.normal();
    GaussianParams g(Array::of({mu}), Array::of({lv}));
    const double kl = gaussian_kl_to_standard(g);
    REQUIRE(kl >= 0.0);
    REQUIRE(kl == Catch::Approx(kl_quadrature_1d(mu, lv)).margin(1e-6));
  }
}

TEST_CASE("gaussian_kl gradient") {
  ParamMap p;
  RngStream rng(11, 0);
  p.add("mean", rng.normal_array(3));
  p.add("lv", rng.normal_array(3));
  auto loss = [&](const ParamMap& q) {
    return gaussian_kl_to_standard(GaussianParams(q.at("mean"), q.at("lv")));
  };
  ParamMap g = p.zeros_like();
  gaussian_kl_backward(GaussianParams(p.at("mean"), p.at("lv")), 1.0, g.at("mean"), g.at("lv"));
  auto r = compare_grads(g, finite_diff_grad(loss, p));
  REQUIRE(r.max_rel_err < 1e-4);
}

TEST_CASE("categorical_log_prob values and invariants") {
  Array uniform = Array::of({0.0, 0.0, 0.0, 0.0});
  for (std::size_t k = 0; k < 4; ++k)
    REQUIRE(categorical_log_prob(uniform, k) == Catch::Approx(std::log(0.25)).margin(1e-12));

  RngStream rng(3, 7);
  Array logits = rng.normal_array(6);
  const double base = categorical_log_prob(logits, 2);
  Array shifted = logits;
  for (double& x : shifted.v) x += 123.456;
  REQUIRE(categorical_log_prob(shifted, 2) == Catch::Approx(base).margin(1e-9));

  Array spike = Array::of({10.0, 0.0, 0.0});
  REQUIRE(categorical_log_prob(spike, 0) ==
          Catch::Approx(-std::log1p(2.0 * std::exp(-10.0))).margin(1e-12));

  // Probabilities over all indices sum to 1.
  for (int trial = 0; trial < 10; ++trial) {
    Array l = rng.normal_array(8);
    for (double& x : l.v) x *= 5.0;
    double s = 0.0;
    for (std::size_t k = 0; k < l.size(); ++k) s += std::exp(categorical_log_prob(l, k));
    REQUIRE(s == Catch::Approx(1.0).margin(1e-12));
  }

  REQUIRE_THROWS_AS(categorical_log_prob(spike, 3), RejectedInput);
}

TEST_CASE("categorical_log_prob gradient") {
  RngStream rng(8, 1);
  ParamMap p;
  p.add("logits", rng.normal_array(5));
  auto loss = [&](const ParamMap& q) { return categorical_log_prob(q.at("logits"), 3); };
  ParamMap g = p.zeros_like();
  categorical_log_prob_backward(p.at("logits"), 3, 1.0, g.at("logits"));
  auto r = compare_grads(g, finite_diff_grad(loss, p));
  REQUIRE(r.max_rel_err < 1e-4);
}

TEST_CASE("feedforward identity and gaussian head") {
  ParamMap p;
  Array w1({3, 3});
  for (int k = 0; k < 3; ++k) w1.at(k, k) = 1.0;
  p.add("ff.w1", w1);
  p.add("ff.b1", Array({3}));
  Array w2({3, 3});
  for (int k = 0; k < 3; ++k) w2.at(k, k) = 1.0;
  p.add("ff.w2", w2);
  p.add("ff.b2", Array({3}));

  Array x = Array::of({0.5, -2.0, 3.0});
  Array y = feedforward(x, p, "ff", 2, Activation::None);
  for (int k = 0; k < 3; ++k) REQUIRE(y.v[k] == x.v[k]);

  // Zero final layer -> standard-normal head.
  ParamMap ph;
  RngStream rng(4, 4);
  register_ff_params(ph, "h", {3, 5, 4}, rng);
  ph.at("h.w2").fill(0.0);
  ph.at("h.b2").fill(0.0);
  GaussianParams g = gaussian_head(feedforward(x, ph, "h", 2, Activation::Relu));
  for (double m : g.mean.v) REQUIRE(m == 0.0);
  for (double lv : g.log_variance.v) REQUIRE(lv == 0.0);
}

TEST_CASE("feedforward gradient with relu") {
  ParamMap p;
  RngStream rng(21, 9);
  register_ff_params(p, "ff", {4, 6, 3}, rng);
  const Array x = rng.normal_array(4);
  const Array w = rng.normal_array(3);

  auto loss = [&](const ParamMap& q) {
    return dot(w, feedforward(x, q, "ff", 2, Activation::Relu));
  };

  FfCache cache;
  feedforward(x, p, "ff", 2, Activation::Relu, &cache);
  ParamMap grads = p.zeros_like();
  feedforward_backward(w, p, "ff", 2, Activation::Relu, cache, grads);

  auto r = compare_grads(grads, finite_diff_grad(loss, p));
  INFO("worst " << r.worst);
  REQUIRE(r.max_rel_err < 1e-4);
}

TEST_CASE("feedforward rejects dimension mismatch") {
  ParamMap p;
  RngStream rng(2, 2);
  register_ff_params(p, "ff", {4, 6, 3}, rng);
  REQUIRE_THROWS_AS(feedforward(Array::of({1.0, 2.0}), p, "ff", 2, Activation::Relu),
                    RejectedInput);
}

TEST_CASE("adam zero gradients leave parameters unchanged") {
  ParamMap p;
  RngStream rng(6, 6);
  p.add("w", rng.normal_array(5));
  ParamMap before = p;
  AdamState st(p, 0.01);
  ParamMap g = p.zeros_like();
  adam_update(p, g, st);
  adam_update(p, g, st);
  REQUIRE(p == before);
  REQUIRE(st.step == 2);
}

TEST_CASE("adam first step magnitude equals learning rate") {
  ParamMap p;
  p.add("w", Array::of({1.0, -2.0, 0.5}));
  AdamState st(p, 0.01);
  ParamMap g;
  g.add("w", Array::of({0.3, -0.7, 2.0}));
  ParamMap before = p;
  adam_update(p, g, st);
  for (int k = 0; k < 3; ++k) {
    const double delta = p.at("w").v[k] - before.at("w").v[k];
    // Bias-corrected signal-to-noise is 1 on the first step.
    REQUIRE(std::abs(delta) == Catch::Approx(0.01).epsilon(1e-6));
    REQUIRE(delta * g.at("w").v[k] < 0.0);
  }
}

TEST_CASE("adam is deterministic") {
  auto run = [] {
    ParamMap p;
    RngStream rng(13, 13);
    p.add("w", rng.normal_array(8));
    AdamState st(p, 0.05);
    for (int i = 0; i < 50; ++i) {
      ParamMap g = p.zeros_like();
      for (std::size_t k = 0; k < 8; ++k) g.at("w").v[k] = p.at("w").v[k] * 0.1 + 0.01 * k;
      adam_update(p, g, st);
    }
    return p;
  };
  REQUIRE(run() == run());
}

TEST_CASE("adam rejects non-finite gradients naming the parameter") {
  ParamMap p;
  p.add("dec.wx", Array::of({1.0, 2.0}));
  AdamState st(p, 0.01);
  ParamMap g;
  g.add("dec.wx", Array::of({0.0, std::nan("")}));
  try {
    adam_update(p, g, st);
    FAIL("expected TrainingDivergence");
  } catch (const TrainingDivergence& e) {
    REQUIRE(std::string(e.what()).find("dec.wx") != std::string::npos);
  }
}
