#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "relvm/array.hpp"
#include "relvm/gaussian.hpp"
#include "relvm/params.hpp"

namespace relvm {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// ---------------------------------------------------------------------------
// LSTM cell.
//
// Parameters live in a ParamMap under <prefix>.wx (4H x in), <prefix>.wh
// (4H x H) and <prefix>.b (4H). Gate order inside the fused 4H axis is
// i, f, g, o:
//   i = sigmoid(.)   input gate
//   f = sigmoid(.)   forget gate
//   g = tanh(.)      candidate
//   o = sigmoid(.)   output gate
//   c' = f*c + i*g ; h' = o*tanh(c')
// This layout is part of the checkpoint contract.
// ---------------------------------------------------------------------------

struct LstmState {
  Array hidden;
  Array cell;
  LstmState() = default;
  LstmState(std::size_t h) : hidden({h}), cell({h}) {}
};

struct LstmCache {
  Array input;
  Array h_prev, c_prev;
  Array i, f, g, o, c;  // post-activation gates and new cell
};

inline void register_lstm_params(ParamMap& p, const std::string& prefix,
                                 std::size_t in_dim, std::size_t hidden, RngStream& rng) {
  p.add(prefix + ".wx", init_matrix(4 * hidden, in_dim, rng));
  p.add(prefix + ".wh", init_matrix(4 * hidden, hidden, rng));
  Array b({4 * hidden});
  for (std::size_t k = hidden; k < 2 * hidden; ++k) b.v[k] = 1.0;  // forget bias
  p.add(prefix + ".b", std::move(b));
}

inline LstmState lstm_step(const Array& input, const LstmState& prev, const ParamMap& params,
                           const std::string& prefix, LstmCache* cache = nullptr) {
  const Array& wx = params.at(prefix + ".wx");
  const Array& wh = params.at(prefix + ".wh");
  const Array& b = params.at(prefix + ".b");
  const std::size_t H = wh.shape[1];
  require_input(input.size() == wx.shape[1], "lstm_step: input dimension mismatch");
  require_input(prev.hidden.size() == H && prev.cell.size() == H,
                "lstm_step: state dimension mismatch");

  Array pre({4 * H});
  matvec(wx, input.data(), pre.data());
  {
    Array tmp({4 * H});
    matvec(wh, prev.hidden.data(), tmp.data());
    for (std::size_t k = 0; k < 4 * H; ++k) pre.v[k] += tmp.v[k] + b.v[k];
  }

  LstmState next(H);
  Array gi({H}), gf({H}), gg({H}), go({H});
  for (std::size_t k = 0; k < H; ++k) {
    gi.v[k] = sigmoid(pre.v[k]);
    gf.v[k] = sigmoid(pre.v[H + k]);
    gg.v[k] = std::tanh(pre.v[2 * H + k]);
    go.v[k] = sigmoid(pre.v[3 * H + k]);
    next.cell.v[k] = gf.v[k] * prev.cell.v[k] + gi.v[k] * gg.v[k];
    next.hidden.v[k] = go.v[k] * std::tanh(next.cell.v[k]);
  }
  if (cache) {
    cache->input = input;
    cache->h_prev = prev.hidden;
    cache->c_prev = prev.cell;
    cache->i = std::move(gi);
    cache->f = std::move(gf);
    cache->g = std::move(gg);
    cache->o = std::move(go);
    cache->c = next.cell;
  }
  return next;
}

// Accumulates parameter gradients into `grads` and returns gradients for the
// step inputs. d_h/d_c are the gradients arriving at this step's outputs.
inline void lstm_step_backward(const LstmCache& cache, const ParamMap& params,
                               const std::string& prefix, const Array& d_h, const Array& d_c,
                               ParamMap& grads, Array& d_input, Array& d_h_prev,
                               Array& d_c_prev) {
  const Array& wx = params.at(prefix + ".wx");
  const Array& wh = params.at(prefix + ".wh");
  const std::size_t H = wh.shape[1];

  Array d_pre({4 * H});
  for (std::size_t k = 0; k < H; ++k) {
    const double tc = std::tanh(cache.c.v[k]);
    const double dout = d_h.v[k];
    const double dcell = d_c.v[k] + dout * cache.o.v[k] * (1.0 - tc * tc);
    const double di = dcell * cache.g.v[k];
    const double df = dcell * cache.c_prev.v[k];
    const double dg = dcell * cache.i.v[k];
    const double doo = dout * tc;
    d_c_prev.v[k] += dcell * cache.f.v[k];
    d_pre.v[k] = di * cache.i.v[k] * (1.0 - cache.i.v[k]);
    d_pre.v[H + k] = df * cache.f.v[k] * (1.0 - cache.f.v[k]);
    d_pre.v[2 * H + k] = dg * (1.0 - cache.g.v[k] * cache.g.v[k]);
    d_pre.v[3 * H + k] = doo * cache.o.v[k] * (1.0 - cache.o.v[k]);
  }

  matvec_t_acc(wx, d_pre.data(), d_input.data());
  matvec_t_acc(wh, d_pre.data(), d_h_prev.data());
  outer_acc(d_pre.data(), cache.input.data(), grads.at(prefix + ".wx"));
  outer_acc(d_pre.data(), cache.h_prev.data(), grads.at(prefix + ".wh"));
  axpy(1.0, d_pre.data(), grads.at(prefix + ".b").data(), 4 * H);
}

// ---------------------------------------------------------------------------
// Feedforward stack: `depth` affine layers with ReLU between them (never
// after the last). Parameters: <prefix>.w1/.b1 ... .w<depth>/.b<depth>.
// ---------------------------------------------------------------------------

enum class Activation { Relu, None };

struct FfCache {
  std::vector<Array> inputs;  // activation entering each layer
  std::vector<Array> pre;     // affine outputs per layer
};

inline void register_ff_params(ParamMap& p, const std::string& prefix,
                               const std::vector<std::size_t>& dims, RngStream& rng) {
  for (std::size_t l = 1; l < dims.size(); ++l) {
    p.add(prefix + ".w" + std::to_string(l), init_matrix(dims[l], dims[l - 1], rng));
    p.add(prefix + ".b" + std::to_string(l), Array({dims[l]}));
  }
}

inline Array feedforward(const Array& input, const ParamMap& params, const std::string& prefix,
                         std::size_t depth, Activation act, FfCache* cache = nullptr) {
  Array a = input;
  for (std::size_t l = 1; l <= depth; ++l) {
    const Array& w = params.at(prefix + ".w" + std::to_string(l));
    const Array& b = params.at(prefix + ".b" + std::to_string(l));
    require_input(a.size() == w.shape[1], "feedforward: dimension mismatch at layer " +
                                              std::to_string(l));
    Array s({w.shape[0]});
    matvec(w, a.data(), s.data());
    for (std::size_t k = 0; k < s.size(); ++k) s.v[k] += b.v[k];
    if (cache) {
      cache->inputs.push_back(a);
      cache->pre.push_back(s);
    }
    if (l < depth && act == Activation::Relu)
      for (double& x : s.v) x = x > 0.0 ? x : 0.0;
    a = std::move(s);
  }
  return a;
}

inline Array feedforward_backward(const Array& d_out, const ParamMap& params,
                                  const std::string& prefix, std::size_t depth, Activation act,
                                  const FfCache& cache, ParamMap& grads) {
  Array d = d_out;
  for (std::size_t l = depth; l >= 1; --l) {
    const Array& w = params.at(prefix + ".w" + std::to_string(l));
    if (l < depth && act == Activation::Relu)
      for (std::size_t k = 0; k < d.size(); ++k)
        if (cache.pre[l - 1].v[k] <= 0.0) d.v[k] = 0.0;
    outer_acc(d.data(), cache.inputs[l - 1].data(), grads.at(prefix + ".w" + std::to_string(l)));
    axpy(1.0, d.data(), grads.at(prefix + ".b" + std::to_string(l)).data(), d.size());
    Array d_in({w.shape[1]});
    matvec_t_acc(w, d.data(), d_in.data());
    d = std::move(d_in);
  }
  return d;
}

// Splits a 2d-long head output into (mean, log_variance), clamping the
// log-variance to [kLogVarMin, kLogVarMax].
inline GaussianParams gaussian_head(const Array& raw) {
  require_input(raw.size() % 2 == 0, "gaussian_head: output length must be even");
  const std::size_t d = raw.size() / 2;
  Array mean({d}), lv({d});
  for (std::size_t k = 0; k < d; ++k) {
    mean.v[k] = raw.v[k];
    double x = raw.v[d + k];
    lv.v[k] = x < kLogVarMin ? kLogVarMin : (x > kLogVarMax ? kLogVarMax : x);
  }
  return GaussianParams(std::move(mean), std::move(lv));
}

// d_raw from (d_mean, d_log_var); the clamp has zero slope outside its range.
inline Array gaussian_head_backward(const Array& raw, const Array& d_mean,
                                    const Array& d_log_var) {
  const std::size_t d = raw.size() / 2;
  Array d_raw({2 * d});
  for (std::size_t k = 0; k < d; ++k) {
    d_raw.v[k] = d_mean.v[k];
    const double x = raw.v[d + k];
    d_raw.v[d + k] = (x > kLogVarMin && x < kLogVarMax) ? d_log_var.v[k] : 0.0;
  }
  return d_raw;
}

// ---------------------------------------------------------------------------
// Bidirectional LSTM encoder: concat[forward final hidden at T; backward
// final hidden at position 1]. Prefixes <prefix>.fwd.* and <prefix>.bwd.*.
// ---------------------------------------------------------------------------

struct BilstmCache {
  std::vector<LstmCache> fwd, bwd;
};

inline Array bilstm_encode(const std::vector<Array>& sequence, const ParamMap& params,
                           const std::string& prefix, BilstmCache* cache = nullptr) {
  require_input(!sequence.empty(), "bilstm_encode: empty sequence");
  const std::size_t H = params.at(prefix + ".fwd.wh").shape[1];
  const std::size_t T = sequence.size();

  LstmState fwd(H), bwd(H);
  if (cache) {
    cache->fwd.resize(T);
    cache->bwd.resize(T);
  }
  for (std::size_t t = 0; t < T; ++t)
    fwd = lstm_step(sequence[t], fwd, params, prefix + ".fwd",
                    cache ? &cache->fwd[t] : nullptr);
  for (std::size_t t = T; t-- > 0;)
    bwd = lstm_step(sequence[t], bwd, params, prefix + ".bwd",
                    cache ? &cache->bwd[t] : nullptr);

  Array out({2 * H});
  for (std::size_t k = 0; k < H; ++k) {
    out.v[k] = fwd.hidden.v[k];
    out.v[H + k] = bwd.hidden.v[k];
  }
  return out;
}

// d_sequence must hold T zero arrays shaped like the inputs.
inline void bilstm_encode_backward(const BilstmCache& cache, const ParamMap& params,
                                   const std::string& prefix, const Array& d_out,
                                   ParamMap& grads, std::vector<Array>& d_sequence) {
  const std::size_t H = params.at(prefix + ".fwd.wh").shape[1];
  const std::size_t T = cache.fwd.size();

  Array d_h({H}), d_c({H});
  for (std::size_t k = 0; k < H; ++k) d_h.v[k] = d_out.v[k];
  for (std::size_t t = T; t-- > 0;) {
    Array d_h_prev({H}), d_c_prev({H});
    lstm_step_backward(cache.fwd[t], params, prefix + ".fwd", d_h, d_c, grads, d_sequence[t],
                       d_h_prev, d_c_prev);
    d_h = std::move(d_h_prev);
    d_c = std::move(d_c_prev);
  }

  d_h.fill(0.0);
  d_c.fill(0.0);
  for (std::size_t k = 0; k < H; ++k) d_h.v[k] = d_out.v[H + k];
  for (std::size_t t = 0; t < T; ++t) {
    Array d_h_prev({H}), d_c_prev({H});
    lstm_step_backward(cache.bwd[t], params, prefix + ".bwd", d_h, d_c, grads, d_sequence[t],
                       d_h_prev, d_c_prev);
    d_h = std::move(d_h_prev);
    d_c = std::move(d_c_prev);
  }
}

// ---------------------------------------------------------------------------
// Categorical log-probability with max-subtracted log-softmax.
// ---------------------------------------------------------------------------

inline double categorical_log_prob(const Array& logits, std::size_t index) {
  require_input(index < logits.size(), "categorical_log_prob: index out of range");
  double mx = logits.v[0];
  for (double x : logits.v) mx = std::max(mx, x);
  double z = 0.0;
  for (double x : logits.v) z += std::exp(x - mx);
  return logits.v[index] - mx - std::log(z);
}

inline Array softmax(const Array& logits) {
  double mx = logits.v[0];
  for (double x : logits.v) mx = std::max(mx, x);
  Array p({logits.size()});
  double z = 0.0;
  for (std::size_t k = 0; k < logits.size(); ++k) {
    p.v[k] = std::exp(logits.v[k] - mx);
    z += p.v[k];
  }
  for (double& x : p.v) x /= z;
  return p;
}

// d_logits += d * (onehot(index) - softmax(logits))
inline void categorical_log_prob_backward(const Array& logits, std::size_t index, double d,
                                          Array& d_logits) {
  Array p = softmax(logits);
  for (std::size_t k = 0; k < logits.size(); ++k)
    d_logits.v[k] += d * ((k == index ? 1.0 : 0.0) - p.v[k]);
}

}  // namespace relvm
