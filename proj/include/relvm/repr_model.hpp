#pragma once

#include <functional>
#include <vector>

#include "relvm/adam.hpp"
#include "relvm/corpus.hpp"
#include "relvm/nn.hpp"
#include "relvm/rng.hpp"

namespace relvm {

// ---------------------------------------------------------------------------
// Representation model: p(c|x,y) with latents u ~ N(0,I) and
// z ~ p(z|x,y,u), decoded autoregressively. q(u|x,y,c) is a BiLSTM encoder
// feeding a feedforward Gaussian head.
//
// Parameter names (fixed checkpoint layout):
//   tok_emb (V,d)        token embeddings, shared between decoder input and
//                        output projection
//   ent_emb (K,d)        entity-input embeddings (types or identifiers)
//   prior.w1/.b1/.w2/.b2 feedforward 4d -> H -> 2d (mean, log-variance of z)
//   dec.wx/.wh/.b        decoder LSTM, input [z; e(prev)] of size 2d,
//                        gates fused as i,f,g,o
//   dec.w_out (d,H)      hidden-to-embedding projection; logits are
//                        (w_out h) . e(v)
//   inf.fwd.*, inf.bwd.* inference BiLSTM over token embeddings
//   inf.w1/.b1/.w2/.b2   feedforward (3d+2H) -> H -> 2d (mean, log-var of u)
// ---------------------------------------------------------------------------

struct ReprModelConfig {
  std::size_t hidden = 128;  // H
  std::size_t dim = 300;     // d: embeddings and both latents
  std::size_t vocab_size = 0;
  std::size_t entity_count = 0;
  EntityMode mode = EntityMode::Types;
  double token_dropout = 0.5;
  std::size_t anneal_iters = 10000;
  bool kl_annealing = true;
  std::size_t total_iters = 400000;
  std::size_t minibatch = 192;
  double learning_rate = 1e-4;
  std::size_t log_interval = 100;
  std::size_t checkpoint_interval = 0;  // 0 = final only

  void validate() const {
    require_input(hidden > 0 && dim > 0 && vocab_size > 0 && entity_count > 0,
                  "repr config: sizes must be positive");
    require_input(token_dropout >= 0.0 && token_dropout <= 1.0,
                  "repr config: dropout rate must lie in [0,1]");
    require_input(minibatch > 0 && total_iters > 0, "repr config: bad training sizes");
  }
};

inline ParamMap init_repr_params(const ReprModelConfig& cfg, RngStream rng) {
  cfg.validate();
  const std::size_t H = cfg.hidden, d = cfg.dim;
  ParamMap p;
  p.add("tok_emb", init_embedding(cfg.vocab_size, d, rng));
  p.add("ent_emb", init_embedding(cfg.entity_count, d, rng));
  register_ff_params(p, "prior", {4 * d, H, 2 * d}, rng);
  register_lstm_params(p, "dec", 2 * d, H, rng);
  p.add("dec.w_out", init_matrix(d, H, rng));
  register_lstm_params(p, "inf.fwd", d, H, rng);
  register_lstm_params(p, "inf.bwd", d, H, rng);
  register_ff_params(p, "inf", {3 * d + 2 * H, H, 2 * d}, rng);
  return p;
}

// [e(x); e(y); e(x) * e(y); extra]
inline Array entity_pair_features(std::size_t x, std::size_t y, const Array& extra,
                                  const ParamMap& params) {
  const Array& emb = params.at("ent_emb");
  const std::size_t K = emb.shape[0], d = emb.shape[1];
  require_input(x < K && y < K, "entity_pair_features: unknown entity id");
  Array out({3 * d + extra.size()});
  const double* ex = emb.data() + x * d;
  const double* ey = emb.data() + y * d;
  for (std::size_t k = 0; k < d; ++k) {
    out.v[k] = ex[k];
    out.v[d + k] = ey[k];
    out.v[2 * d + k] = ex[k] * ey[k];
  }
  for (std::size_t k = 0; k < extra.size(); ++k) out.v[3 * d + k] = extra.v[k];
  return out;
}

// Routes d_feats back onto the two embedding rows; returns d_extra.
inline Array entity_pair_features_backward(std::size_t x, std::size_t y, const Array& d_feats,
                                           const ParamMap& params, ParamMap& grads) {
  const Array& emb = params.at("ent_emb");
  const std::size_t d = emb.shape[1];
  Array& g = grads.at("ent_emb");
  const double* ex = emb.data() + x * d;
  const double* ey = emb.data() + y * d;
  for (std::size_t k = 0; k < d; ++k) {
    g.v[x * d + k] += d_feats.v[k] + d_feats.v[2 * d + k] * ey[k];
    g.v[y * d + k] += d_feats.v[d + k] + d_feats.v[2 * d + k] * ex[k];
  }
  Array d_extra({d_feats.size() - 3 * d});
  for (std::size_t k = 0; k < d_extra.size(); ++k) d_extra.v[k] = d_feats.v[3 * d + k];
  return d_extra;
}

// ---------------------------------------------------------------------------
// Prior network p(z|x,y,u).
// ---------------------------------------------------------------------------

struct PriorCache {
  std::size_t x = 0, y = 0;
  Array feats;
  FfCache ff;
  Array raw;
};

inline GaussianParams prior_latent_params(std::size_t x, std::size_t y, const Array& u,
                                          const ParamMap& params, PriorCache* cache = nullptr) {
  Array feats = entity_pair_features(x, y, u, params);
  FfCache ff;
  Array raw = feedforward(feats, params, "prior", 2, Activation::Relu, cache ? &ff : nullptr);
  if (cache) {
    cache->x = x;
    cache->y = y;
    cache->feats = feats;
    cache->ff = std::move(ff);
    cache->raw = raw;
  }
  return gaussian_head(raw);
}

// Returns d_u.
inline Array prior_backward(const PriorCache& cache, const ParamMap& params,
                            const Array& d_mean, const Array& d_log_var, ParamMap& grads) {
  Array d_raw = gaussian_head_backward(cache.raw, d_mean, d_log_var);
  Array d_feats =
      feedforward_backward(d_raw, params, "prior", 2, Activation::Relu, cache.ff, grads);
  return entity_pair_features_backward(cache.x, cache.y, d_feats, params, grads);
}

// ---------------------------------------------------------------------------
// Inference network q(u|x,y,c).
// ---------------------------------------------------------------------------

struct InferenceCache {
  std::size_t x = 0, y = 0;
  std::vector<std::size_t> token_ids;
  std::vector<Array> embeds;
  BilstmCache bilstm;
  Array feats;
  FfCache ff;
  Array raw;
};

inline GaussianParams inference_latent_params(std::size_t x, std::size_t y, const Context& c,
                                              const ParamMap& params,
                                              InferenceCache* cache = nullptr) {
  require_input(!c.token_ids.empty(), "inference_latent_params: empty context");
  const Array& emb = params.at("tok_emb");
  const std::size_t d = emb.shape[1];
  std::vector<Array> embeds;
  embeds.reserve(c.token_ids.size());
  for (std::size_t id : c.token_ids) {
    require_input(id < emb.shape[0], "inference_latent_params: token id out of range");
    Array e({d});
    std::copy(emb.data() + id * d, emb.data() + (id + 1) * d, e.data());
    embeds.push_back(std::move(e));
  }
  Array h_q = bilstm_encode(embeds, params, "inf", cache ? &cache->bilstm : nullptr);
  Array feats = entity_pair_features(x, y, h_q, params);
  FfCache ff;
  Array raw = feedforward(feats, params, "inf", 2, Activation::Relu, cache ? &ff : nullptr);
  if (cache) {
    cache->x = x;
    cache->y = y;
    cache->token_ids = c.token_ids;
    cache->embeds = std::move(embeds);
    cache->feats = feats;
    cache->ff = std::move(ff);
    cache->raw = raw;
  }
  return gaussian_head(raw);
}

inline void inference_backward(const InferenceCache& cache, const ParamMap& params,
                               const Array& d_mean, const Array& d_log_var, ParamMap& grads) {
  Array d_raw = gaussian_head_backward(cache.raw, d_mean, d_log_var);
  Array d_feats =
      feedforward_backward(d_raw, params, "inf", 2, Activation::Relu, cache.ff, grads);
  Array d_hq = entity_pair_features_backward(cache.x, cache.y, d_feats, params, grads);

  const std::size_t d = params.at("tok_emb").shape[1];
  std::vector<Array> d_embeds(cache.token_ids.size(), Array({d}));
  bilstm_encode_backward(cache.bilstm, params, "inf", d_hq, grads, d_embeds);
  Array& g_emb = grads.at("tok_emb");
  for (std::size_t t = 0; t < cache.token_ids.size(); ++t)
    axpy(1.0, d_embeds[t].data(), g_emb.data() + cache.token_ids[t] * d, d);
}

// ---------------------------------------------------------------------------
// Decoder log-likelihood. The latent z is concatenated with the previous
// token's embedding at every step; the first step sees a zero previous
// embedding. keep[t] == 0 replaces e(c_{t-1}) by the zero vector (token
// dropout).
// ---------------------------------------------------------------------------

struct DecoderCache {
  std::vector<std::size_t> token_ids;
  Array z;
  std::vector<std::uint8_t> keep;
  std::vector<LstmCache> lstm;
  std::vector<Array> hidden;
  std::vector<Array> proj;   // w_out h_t
  std::vector<Array> probs;  // softmax over the vocabulary
};

inline std::vector<std::uint8_t> draw_keep_mask(std::size_t T, double dropout_rate,
                                                RngStream& rng) {
  std::vector<std::uint8_t> keep(T, 1);
  keep[0] = 0;  // no previous token at the first step
  for (std::size_t t = 1; t < T; ++t) keep[t] = rng.bernoulli(dropout_rate) ? 0 : 1;
  return keep;
}

inline double decoder_log_prob_masked(const Context& c, const Array& z, const ParamMap& params,
                                      const std::vector<std::uint8_t>& keep,
                                      DecoderCache* cache = nullptr) {
  const Array& emb = params.at("tok_emb");
  const Array& w_out = params.at("dec.w_out");
  const std::size_t d = emb.shape[1];
  const std::size_t V = emb.shape[0];
  const std::size_t H = params.at("dec.wh").shape[1];
  const std::size_t T = c.token_ids.size();
  require_input(z.size() == d, "decoder_log_prob: z dimension mismatch");
  require_input(keep.size() == T, "decoder_log_prob: mask length mismatch");

  if (cache) {
    cache->token_ids = c.token_ids;
    cache->z = z;
    cache->keep = keep;
    cache->lstm.resize(T);
    cache->hidden.resize(T);
    cache->proj.resize(T);
    cache->probs.resize(T);
  }

  LstmState state(H);
  Array input({2 * d});
  double total = 0.0;
  for (std::size_t t = 0; t < T; ++t) {
    std::copy(z.data(), z.data() + d, input.data());
    if (t > 0 && keep[t]) {
      const double* prev = emb.data() + c.token_ids[t - 1] * d;
      std::copy(prev, prev + d, input.data() + d);
    } else {
      std::fill(input.data() + d, input.data() + 2 * d, 0.0);
    }
    state = lstm_step(input, state, params, "dec", cache ? &cache->lstm[t] : nullptr);

    Array proj({d});
    matvec(w_out, state.hidden.data(), proj.data());
    Array logits({V});
    matvec(emb, proj.data(), logits.data());
    total += categorical_log_prob(logits, c.token_ids[t]);
    if (cache) {
      cache->hidden[t] = state.hidden;
      cache->proj[t] = proj;
      cache->probs[t] = softmax(logits);
    }
  }
  return total;
}

inline double decoder_log_prob(const Context& c, const Array& z, const ParamMap& params,
                               double dropout_rate, RngStream& rng,
                               DecoderCache* cache = nullptr) {
  auto keep = draw_keep_mask(c.token_ids.size(), dropout_rate, rng);
  return decoder_log_prob_masked(c, z, params, keep, cache);
}

// Gradient of (weight * log prob); returns d_z.
inline Array decoder_backward(const DecoderCache& cache, const ParamMap& params, double weight,
                              ParamMap& grads) {
  const Array& emb = params.at("tok_emb");
  const Array& w_out = params.at("dec.w_out");
  const std::size_t d = emb.shape[1];
  const std::size_t V = emb.shape[0];
  const std::size_t H = params.at("dec.wh").shape[1];
  const std::size_t T = cache.token_ids.size();

  Array d_z({d});
  Array d_h({H}), d_c({H});
  Array& g_emb = grads.at("tok_emb");
  Array& g_wout = grads.at("dec.w_out");

  for (std::size_t t = T; t-- > 0;) {
    // d logits = weight * (onehot - probs)
    Array d_logits({V});
    const Array& p = cache.probs[t];
    for (std::size_t vtok = 0; vtok < V; ++vtok) d_logits.v[vtok] = -weight * p.v[vtok];
    d_logits.v[cache.token_ids[t]] += weight;

    // logits = emb . proj
    Array d_proj({d});
    matvec_t_acc(emb, d_logits.data(), d_proj.data());
    outer_acc(d_logits.data(), cache.proj[t].data(), g_emb);

    // proj = w_out h
    matvec_t_acc(w_out, d_proj.data(), d_h.data());
    outer_acc(d_proj.data(), cache.hidden[t].data(), g_wout);

    Array d_input({2 * d});
    Array d_h_prev({H}), d_c_prev({H});
    lstm_step_backward(cache.lstm[t], params, "dec", d_h, d_c, grads, d_input, d_h_prev,
                       d_c_prev);
    d_h = std::move(d_h_prev);
    d_c = std::move(d_c_prev);

    axpy(1.0, d_input.data(), d_z.data(), d);
    if (t > 0 && cache.keep[t])
      axpy(1.0, d_input.data() + d, g_emb.data() + cache.token_ids[t - 1] * d, d);
  }
  return d_z;
}

// ---------------------------------------------------------------------------
// ELBO with a single sample of (u, z). Only q(u) contributes a KL term.
// ---------------------------------------------------------------------------

inline double kl_anneal_weight(std::size_t iteration, std::size_t anneal_iters) {
  require_input(anneal_iters > 0, "kl_anneal_weight: anneal_iters must be positive");
  const double w = static_cast<double>(iteration) / static_cast<double>(anneal_iters);
  return w < 1.0 ? w : 1.0;
}

struct NoiseBundle {
  Array eps_u;
  Array eps_z;
  std::vector<std::uint8_t> keep;
};

inline NoiseBundle draw_noise(std::size_t T, std::size_t dim, double dropout_rate,
                              RngStream& rng) {
  NoiseBundle n;
  n.eps_u = rng.normal_array(dim);
  n.eps_z = rng.normal_array(dim);
  n.keep = draw_keep_mask(T, dropout_rate, rng);
  return n;
}

struct ElboParts {
  double objective = 0.0;
  double reconstruction = 0.0;
  double kl = 0.0;
};

struct ElboCache {
  InferenceCache inf;
  GaussianParams q;
  Array u;
  PriorCache prior;
  GaussianParams p;
  Array z;
  DecoderCache dec;
  NoiseBundle noise;
};

inline ElboParts elbo_forward(std::size_t x, std::size_t y, const Context& c,
                              const ParamMap& params, const NoiseBundle& noise,
                              double anneal_weight, ElboCache* cache = nullptr) {
  InferenceCache inf_cache;
  GaussianParams q =
      inference_latent_params(x, y, c, params, cache ? &inf_cache : nullptr);
  Array u = gaussian_reparameterize(q, noise.eps_u);
  PriorCache prior_cache;
  GaussianParams p = prior_latent_params(x, y, u, params, cache ? &prior_cache : nullptr);
  Array z = gaussian_reparameterize(p, noise.eps_z);
  DecoderCache dec_cache;
  const double recon =
      decoder_log_prob_masked(c, z, params, noise.keep, cache ? &dec_cache : nullptr);
  const double kl = gaussian_kl_to_standard(q);

  ElboParts parts;
  parts.reconstruction = recon;
  parts.kl = kl;
  parts.objective = recon - anneal_weight * kl;
  if (cache) {
    cache->inf = std::move(inf_cache);
    cache->q = q;
    cache->u = u;
    cache->prior = std::move(prior_cache);
    cache->p = p;
    cache->z = z;
    cache->dec = std::move(dec_cache);
    cache->noise = noise;
  }
  return parts;
}

// Gradient of the objective (ascent direction) accumulated into `grads`.
inline void elbo_backward(const ElboCache& cache, const ParamMap& params, double anneal_weight,
                          ParamMap& grads) {
  Array d_z = decoder_backward(cache.dec, params, 1.0, grads);

  const std::size_t d = d_z.size();
  Array d_mean_p({d}), d_lv_p({d});
  gaussian_reparameterize_backward(cache.p, cache.noise.eps_z, d_z, d_mean_p, d_lv_p);
  Array d_u = prior_backward(cache.prior, params, d_mean_p, d_lv_p, grads);

  Array d_mean_q({d}), d_lv_q({d});
  gaussian_reparameterize_backward(cache.q, cache.noise.eps_u, d_u, d_mean_q, d_lv_q);
  gaussian_kl_backward(cache.q, -anneal_weight, d_mean_q, d_lv_q);
  inference_backward(cache.inf, params, d_mean_q, d_lv_q, grads);
}

inline ElboParts elbo(std::size_t x, std::size_t y, const Context& c, const ParamMap& params,
                      double dropout_rate, RngStream& rng, double anneal_weight,
                      ElboCache* cache = nullptr) {
  const std::size_t d = params.at("tok_emb").shape[1];
  NoiseBundle noise = draw_noise(c.token_ids.size(), d, dropout_rate, rng);
  return elbo_forward(x, y, c, params, noise, anneal_weight, cache);
}

// ---------------------------------------------------------------------------
// Sampling helpers.
// ---------------------------------------------------------------------------

struct LatentSample {
  Array u;
  Array z;
};

inline LatentSample sample_prior_z(std::size_t x, std::size_t y, const ParamMap& params,
                                   RngStream& rng, PriorCache* cache = nullptr) {
  const std::size_t d = params.at("ent_emb").shape[1];
  LatentSample s;
  s.u = rng.normal_array(d);
  GaussianParams p = prior_latent_params(x, y, s.u, params, cache);
  s.z = gaussian_reparameterize(p, rng.normal_array(d));
  return s;
}

// n posterior draws: u_i ~ q(u|x,y,c), z_i ~ p(z|x,y,u_i).
inline std::vector<Array> posterior_z_samples(std::size_t x, std::size_t y, const Context& c,
                                              std::size_t n, const ParamMap& params,
                                              RngStream& rng) {
  require_input(n >= 1, "posterior_z_samples: n must be at least 1");
  GaussianParams q = inference_latent_params(x, y, c, params);
  const std::size_t d = q.dim();
  std::vector<Array> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Array u = gaussian_reparameterize(q, rng.normal_array(d));
    GaussianParams p = prior_latent_params(x, y, u, params);
    out.push_back(gaussian_reparameterize(p, rng.normal_array(d)));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Unsupervised training.
// ---------------------------------------------------------------------------

struct TrainRecord {
  std::size_t iteration = 0;
  double reconstruction = 0.0;
  double kl = 0.0;
  double anneal_weight = 0.0;
  double grad_norm = 0.0;
};

using TrainLog = std::vector<TrainRecord>;

struct ReprTrainResult {
  ParamMap params;
  TrainLog log;
};

inline ReprTrainResult train_repr(
    const std::vector<MaskedExample>& examples, const ReprModelConfig& cfg, RngStream rng,
    const std::function<void(std::size_t, const ParamMap&)>& checkpoint_hook = nullptr) {
  cfg.validate();
  require_input(!examples.empty(), "train_repr: no training examples");

  ReprTrainResult result;
  result.params = init_repr_params(cfg, rng.fork(0));
  RngStream data_rng = rng.fork(1);
  RngStream noise_rng = rng.fork(2);
  AdamState adam(result.params, cfg.learning_rate);

  for (std::size_t iter = 0; iter < cfg.total_iters; ++iter) {
    const double weight =
        cfg.kl_annealing ? kl_anneal_weight(iter, cfg.anneal_iters) : 1.0;
    ParamMap grads = result.params.zeros_like();
    double sum_recon = 0.0, sum_kl = 0.0;
    for (std::size_t b = 0; b < cfg.minibatch; ++b) {
      const auto& ex = examples[data_rng.uniform_int(examples.size())];
      ElboCache cache;
      ElboParts parts = elbo(ex.x, ex.y, ex.context, result.params, cfg.token_dropout,
                             noise_rng, weight, &cache);
      if (!std::isfinite(parts.objective))
        throw TrainingDivergence("train_repr: non-finite objective at iteration " +
                                 std::to_string(iter));
      sum_recon += parts.reconstruction;
      sum_kl += parts.kl;
      elbo_backward(cache, result.params, weight, grads);
    }
    // Mean gradient of the negative objective.
    grads.scale(-1.0 / static_cast<double>(cfg.minibatch));

    if (iter % cfg.log_interval == 0 || iter + 1 == cfg.total_iters) {
      TrainRecord rec;
      rec.iteration = iter;
      rec.reconstruction = sum_recon / static_cast<double>(cfg.minibatch);
      rec.kl = sum_kl / static_cast<double>(cfg.minibatch);
      rec.anneal_weight = weight;
      rec.grad_norm = grads.l2_norm();
      result.log.push_back(rec);
    }

    adam_update(result.params, grads, adam);

    if (checkpoint_hook && cfg.checkpoint_interval > 0 &&
        (iter + 1) % cfg.checkpoint_interval == 0)
      checkpoint_hook(iter + 1, result.params);
  }
  return result;
}

}  // namespace relvm
