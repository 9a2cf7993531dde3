#pragma once

// Desk-scale transcription network: token embedding plus either stacked
// bidirectional gated recurrence or stacked windowed self-attention with
// half-width w (f(t) then depends only on tokens within layers*w).

#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <vector>

#include "nert/errors.hpp"
#include "nert/gru.hpp"
#include "nert/params.hpp"

namespace nert {

enum class EncoderArch { Recurrent, Attention };

struct EncoderConfig {
  EncoderArch arch = EncoderArch::Recurrent;
  int vocab = 0;
  int dim = 32;    // odd dims give the forward direction the extra unit
  int layers = 2;
  int window = 20;  // attention context half-width, in frames
};

struct EncoderCache {
  // layer_in[l] is the input sequence of layer l; layer_in[layers] = output
  std::vector<std::vector<Eigen::VectorXd>> layer_in;
  // recurrent
  std::vector<std::vector<GruCache>> fwd_steps, bwd_steps;
  // attention
  std::vector<std::vector<Eigen::VectorXd>> q, k, v, ctx, weights, out;
};

class Encoder {
 public:
  Encoder(ParamStore& store, const EncoderConfig& cfg) : cfg_(cfg) {
    emb_ = &store.add("enc.emb", cfg.vocab, cfg.dim);
    if (cfg.arch == EncoderArch::Recurrent) {
      for (int l = 0; l < cfg.layers; ++l) {
        fwd_.emplace_back(store, "enc.l" + std::to_string(l) + ".fwd", cfg.dim, half_f());
        bwd_.emplace_back(store, "enc.l" + std::to_string(l) + ".bwd", cfg.dim, half_b());
      }
    } else {
      for (int l = 0; l < cfg.layers; ++l) {
        const std::string p = "enc.l" + std::to_string(l);
        attn_.push_back({&store.add(p + ".Wq", cfg.dim, cfg.dim),
                         &store.add(p + ".Wk", cfg.dim, cfg.dim),
                         &store.add(p + ".Wv", cfg.dim, cfg.dim),
                         &store.add(p + ".Wo", cfg.dim, cfg.dim),
                         &store.add(p + ".bo", cfg.dim, 1)});
      }
    }
  }

  const EncoderConfig& config() const { return cfg_; }

  std::vector<Eigen::VectorXd> forward(const std::vector<int>& tokens,
                                       EncoderCache* cache = nullptr) const {
    const int T = static_cast<int>(tokens.size());
    if (T < 1) throw ContractViolation("encoder: empty input");
    std::vector<Eigen::VectorXd> x(T);
    for (int t = 0; t < T; ++t) {
      if (tokens[t] < 0 || tokens[t] >= cfg_.vocab)
        throw ContractViolation("encoder: token id out of vocabulary");
      x[t] = emb_->value.row(tokens[t]).transpose();
    }
    if (cache) {
      *cache = EncoderCache{};
      cache->layer_in.push_back(x);
    }
    for (int l = 0; l < cfg_.layers; ++l) {
      x = cfg_.arch == EncoderArch::Recurrent ? recurrent_layer(l, x, cache)
                                              : attention_layer(l, x, cache);
      if (cache) cache->layer_in.push_back(x);
    }
    return x;
  }

  // d_out: gradient w.r.t. the final frame vectors. Accumulates all
  // parameter gradients including the embedding rows.
  void backward(const std::vector<int>& tokens, const EncoderCache& cache,
                std::vector<Eigen::VectorXd> d_out) const {
    for (int l = cfg_.layers - 1; l >= 0; --l) {
      d_out = cfg_.arch == EncoderArch::Recurrent
                  ? recurrent_layer_bwd(l, cache, d_out)
                  : attention_layer_bwd(l, cache, d_out);
    }
    for (std::size_t t = 0; t < tokens.size(); ++t)
      emb_->grad.row(tokens[t]) += d_out[t].transpose();
  }

 private:
  struct AttnLayer {
    Tensor *Wq, *Wk, *Wv, *Wo, *bo;
  };

  int half_f() const { return (cfg_.dim + 1) / 2; }
  int half_b() const { return cfg_.dim / 2; }

  std::vector<Eigen::VectorXd> recurrent_layer(int l,
                                               const std::vector<Eigen::VectorXd>& x,
                                               EncoderCache* cache) const {
    const int T = static_cast<int>(x.size());
    std::vector<GruCache> fk(T), bk(T);
    std::vector<Eigen::VectorXd> hf(T), hb(T), y(T);
    Eigen::VectorXd h = Eigen::VectorXd::Zero(half_f());
    for (int t = 0; t < T; ++t) {
      h = fwd_[l].forward(x[t], h, cache ? &fk[t] : nullptr);
      hf[t] = h;
    }
    h = Eigen::VectorXd::Zero(half_b());
    for (int t = T - 1; t >= 0; --t) {
      h = bwd_[l].forward(x[t], h, cache ? &bk[t] : nullptr);
      hb[t] = h;
    }
    for (int t = 0; t < T; ++t) {
      y[t].resize(cfg_.dim);
      y[t] << hf[t], hb[t];
    }
    if (cache) {
      cache->fwd_steps.push_back(std::move(fk));
      cache->bwd_steps.push_back(std::move(bk));
    }
    return y;
  }

  std::vector<Eigen::VectorXd> recurrent_layer_bwd(
      int l, const EncoderCache& cache,
      const std::vector<Eigen::VectorXd>& dy) const {
    const int T = static_cast<int>(dy.size());
    std::vector<Eigen::VectorXd> dx(T, Eigen::VectorXd::Zero(cfg_.dim));
    Eigen::VectorXd dh = Eigen::VectorXd::Zero(half_f());
    for (int t = T - 1; t >= 0; --t) {
      dh += dy[t].head(half_f());
      dh = fwd_[l].backward(cache.fwd_steps[l][t], dh, dx[t]);
    }
    dh = Eigen::VectorXd::Zero(half_b());
    for (int t = 0; t < T; ++t) {
      dh += dy[t].tail(half_b());
      dh = bwd_[l].backward(cache.bwd_steps[l][t], dh, dx[t]);
    }
    return dx;
  }

  std::vector<Eigen::VectorXd> attention_layer(int l,
                                               const std::vector<Eigen::VectorXd>& x,
                                               EncoderCache* cache) const {
    const int T = static_cast<int>(x.size());
    const AttnLayer& a = attn_[l];
    const double scale = 1.0 / std::sqrt(static_cast<double>(cfg_.dim));
    std::vector<Eigen::VectorXd> q(T), k(T), v(T), ctx(T), w(T), y(T);
    for (int t = 0; t < T; ++t) {
      q[t] = a.Wq->value * x[t];
      k[t] = a.Wk->value * x[t];
      v[t] = a.Wv->value * x[t];
    }
    for (int t = 0; t < T; ++t) {
      const int lo = std::max(0, t - cfg_.window);
      const int hi = std::min(T - 1, t + cfg_.window);
      Eigen::VectorXd e(hi - lo + 1);
      for (int s = lo; s <= hi; ++s) e[s - lo] = q[t].dot(k[s]) * scale;
      const double m = e.maxCoeff();
      Eigen::VectorXd attn = (e.array() - m).exp();
      attn /= attn.sum();
      Eigen::VectorXd c = Eigen::VectorXd::Zero(cfg_.dim);
      for (int s = lo; s <= hi; ++s) c += attn[s - lo] * v[s];
      ctx[t] = c;
      w[t] = attn;
      y[t] = (a.Wo->value * c + a.bo->value).array().tanh().matrix();
    }
    if (cache) {
      cache->q.push_back(q);
      cache->k.push_back(k);
      cache->v.push_back(v);
      cache->ctx.push_back(ctx);
      cache->weights.push_back(w);
      cache->out.push_back(y);
    }
    return y;
  }

  std::vector<Eigen::VectorXd> attention_layer_bwd(
      int l, const EncoderCache& cache,
      const std::vector<Eigen::VectorXd>& dy) const {
    const int T = static_cast<int>(dy.size());
    const AttnLayer& a = attn_[l];
    const double scale = 1.0 / std::sqrt(static_cast<double>(cfg_.dim));
    const auto& x = cache.layer_in[l];
    const auto& q = cache.q[l];
    const auto& k = cache.k[l];
    const auto& v = cache.v[l];
    const auto& ctx = cache.ctx[l];
    const auto& w = cache.weights[l];
    const auto& y = cache.out[l];
    std::vector<Eigen::VectorXd> dq(T, Eigen::VectorXd::Zero(cfg_.dim));
    std::vector<Eigen::VectorXd> dk(T, Eigen::VectorXd::Zero(cfg_.dim));
    std::vector<Eigen::VectorXd> dv(T, Eigen::VectorXd::Zero(cfg_.dim));
    std::vector<Eigen::VectorXd> dx(T, Eigen::VectorXd::Zero(cfg_.dim));
    for (int t = 0; t < T; ++t) {
      const int lo = std::max(0, t - cfg_.window);
      const int hi = std::min(T - 1, t + cfg_.window);
      const Eigen::VectorXd dpre =
          (dy[t].array() * (1.0 - y[t].array().square())).matrix();
      a.Wo->grad += dpre * ctx[t].transpose();
      a.bo->grad += dpre;
      const Eigen::VectorXd dctx = a.Wo->value.transpose() * dpre;
      Eigen::VectorXd da(hi - lo + 1);
      for (int s = lo; s <= hi; ++s) {
        da[s - lo] = dctx.dot(v[s]);
        dv[s] += w[t][s - lo] * dctx;
      }
      // softmax jacobian
      const double dot = w[t].dot(da);
      for (int s = lo; s <= hi; ++s) {
        const double de = w[t][s - lo] * (da[s - lo] - dot);
        dq[t] += de * scale * k[s];
        dk[s] += de * scale * q[t];
      }
    }
    for (int t = 0; t < T; ++t) {
      a.Wq->grad += dq[t] * x[t].transpose();
      a.Wk->grad += dk[t] * x[t].transpose();
      a.Wv->grad += dv[t] * x[t].transpose();
      dx[t] += a.Wq->value.transpose() * dq[t] +
               a.Wk->value.transpose() * dk[t] +
               a.Wv->value.transpose() * dv[t];
    }
    return dx;
  }

  EncoderConfig cfg_;
  Tensor* emb_;
  std::vector<GruCell> fwd_, bwd_;
  std::vector<AttnLayer> attn_;
};

}  // namespace nert
