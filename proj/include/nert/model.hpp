#pragma once

// Transducer model pieces at desk scale: prediction network, joint network,
// lattice construction, and the chained reverse-mode gradients that connect
// the alignment-loss gradients back to every parameter. Also the
// hard-attention seq-to-seq variant (explicit eow token, state updated on
// every emission).

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nert/decoder.hpp"
#include "nert/encoder.hpp"
#include "nert/errors.hpp"
#include "nert/gru.hpp"
#include "nert/lattice.hpp"
#include "nert/params.hpp"

namespace nert {

struct ModelConfig {
  EncoderArch arch = EncoderArch::Recurrent;
  int hidden = 32;  // d, shared by encoder frames and prediction output
  int embed = 32;   // seq-to-seq label embedding width
  int layers = 2;
  int window = 20;
  int vocab_in = 0;
  int vocab_out = 0;  // real labels; blank/eow id == vocab_out
  std::uint64_t seed = 12345;

  nlohmann::json to_json() const {
    return {{"arch", arch == EncoderArch::Recurrent ? "recurrent" : "attention"},
            {"hidden", hidden},
            {"embed", embed},
            {"layers", layers},
            {"window", window},
            {"vocab_in", vocab_in},
            {"vocab_out", vocab_out},
            {"seed", seed}};
  }
  static ModelConfig from_json(const nlohmann::json& j) {
    ModelConfig c;
    const std::string a = j.value("arch", "recurrent");
    if (a == "recurrent")
      c.arch = EncoderArch::Recurrent;
    else if (a == "attention")
      c.arch = EncoderArch::Attention;
    else
      throw ParseError("unknown encoder arch: " + a);
    c.hidden = j.value("hidden", 32);
    c.embed = j.value("embed", 32);
    c.layers = j.value("layers", 2);
    c.window = j.value("window", 20);
    c.vocab_in = j.at("vocab_in").get<int>();
    c.vocab_out = j.at("vocab_out").get<int>();
    c.seed = j.value("seed", std::uint64_t{12345});
    return c;
  }
};

namespace detail {

inline Eigen::VectorXd log_softmax(const Eigen::VectorXd& logits) {
  const double m = logits.maxCoeff();
  const double lse = m + std::log((logits.array() - m).exp().sum());
  return logits.array() - lse;
}

}  // namespace detail

// Uni-directional label-history recurrence. Blank is never an input; the
// reserved start token occupies embedding row vocab_out.
class PredictionNet {
 public:
  PredictionNet(ParamStore& store, int vocab_out, int dim)
      : vocab_out_(vocab_out), cell_(store, "pred.cell", dim, dim) {
    emb_ = &store.add("pred.emb", vocab_out + 1, dim);
  }

  int start_token() const { return vocab_out_; }

  // g(0) from the initial state and the start token.
  Eigen::VectorXd initial_g(GruCache* cache = nullptr) const {
    const Eigen::VectorXd h0 = Eigen::VectorXd::Zero(cell_.hidden_dim());
    return cell_.forward(emb_->value.row(vocab_out_).transpose(), h0, cache);
  }

  Eigen::VectorXd step(const Eigen::VectorXd& g, int label,
                       GruCache* cache = nullptr) const {
    if (label < 0 || label >= vocab_out_)
      throw ContractViolation("predict_step: label must be a real label, not blank");
    return cell_.forward(emb_->value.row(label).transpose(), g, cache);
  }

  // g(0..U) for a target sequence, with step caches for BPTT.
  std::vector<Eigen::VectorXd> forward_targets(const std::vector<int>& targets,
                                               std::vector<GruCache>* caches) const {
    const int U = static_cast<int>(targets.size());
    std::vector<Eigen::VectorXd> g(U + 1);
    if (caches) caches->resize(U + 1);
    g[0] = initial_g(caches ? &(*caches)[0] : nullptr);
    for (int u = 0; u < U; ++u)
      g[u + 1] = step(g[u], targets[u], caches ? &(*caches)[u + 1] : nullptr);
    return g;
  }

  void backward(const std::vector<int>& targets,
                const std::vector<GruCache>& caches,
                const std::vector<Eigen::VectorXd>& d_g) const {
    const int U = static_cast<int>(targets.size());
    Eigen::VectorXd carry = Eigen::VectorXd::Zero(cell_.hidden_dim());
    for (int u = U; u >= 0; --u) {
      Eigen::VectorXd dh = d_g[u] + carry;
      Eigen::VectorXd dx = Eigen::VectorXd::Zero(cell_.input_dim());
      carry = cell_.backward(caches[u], dh, dx);
      const int row = (u == 0) ? vocab_out_ : targets[u - 1];
      emb_->grad.row(row) += dx.transpose();
    }
  }

 private:
  int vocab_out_;
  Tensor* emb_;
  GruCell cell_;
};

// joint(t,u) = W tanh(f(t) + g(u)) + b, log-softmaxed over vocab+blank.
class Joint {
 public:
  Joint(ParamStore& store, int dim, int out) : out_(out) {
    W_ = &store.add("joint.W", out, dim);
    b_ = &store.add("joint.b", out, 1);
  }

  Eigen::VectorXd logprobs(const Eigen::VectorXd& f, const Eigen::VectorXd& g) const {
    if (f.size() != g.size()) throw ContractViolation("joint: dimension mismatch");
    const Eigen::VectorXd z = (f + g).array().tanh().matrix();
    return detail::log_softmax(W_->value * z + b_->value);
  }

  // Rows of G are g(u); returns rows of log-probabilities.
  Eigen::MatrixXd logprob_rows(const Eigen::VectorXd& f, const Eigen::MatrixXd& G,
                               Eigen::MatrixXd* z_rows = nullptr) const {
    Eigen::MatrixXd Z = (G.rowwise() + f.transpose()).array().tanh();
    Eigen::MatrixXd logits =
        (Z * W_->value.transpose()).rowwise() + b_->value.col(0).transpose();
    for (Eigen::Index r = 0; r < logits.rows(); ++r) {
      const double m = logits.row(r).maxCoeff();
      const double lse = m + std::log((logits.row(r).array() - m).exp().sum());
      logits.row(r).array() -= lse;
    }
    if (z_rows) *z_rows = std::move(Z);
    return logits;
  }

  // d_logprob rows -> gradient pieces. Accumulates into dF/dG rows.
  void backward_rows(const Eigen::MatrixXd& d_lp, const Eigen::MatrixXd& lp,
                     const Eigen::MatrixXd& Z, Eigen::VectorXd& d_f,
                     Eigen::MatrixXd& d_G_rows) const {
    // log-softmax backward: dlogits = dlp - softmax * rowsum(dlp)
    Eigen::MatrixXd d_logits = d_lp;
    for (Eigen::Index r = 0; r < d_lp.rows(); ++r) {
      const double s = d_lp.row(r).sum();
      if (s != 0.0) d_logits.row(r) -= s * lp.row(r).array().exp().matrix();
    }
    W_->grad += d_logits.transpose() * Z;
    b_->grad += d_logits.colwise().sum().transpose();
    const Eigen::MatrixXd dZ = d_logits * W_->value;
    const Eigen::MatrixXd dA = dZ.array() * (1.0 - Z.array().square());
    d_f += dA.colwise().sum().transpose();
    d_G_rows += dA;
  }

  int out_dim() const { return out_; }

 private:
  int out_;
  Tensor *W_, *b_;
};

class RnntModel {
 public:
  explicit RnntModel(const ModelConfig& cfg)
      : cfg_(cfg),
        encoder_(params_, EncoderConfig{cfg.arch, cfg.vocab_in, cfg.hidden,
                                        cfg.layers, cfg.window}),
        pred_(params_, cfg.vocab_out, cfg.hidden),
        joint_(params_, cfg.hidden, cfg.vocab_out + 1) {
    params_.init_uniform(cfg.seed);
  }

  const ModelConfig& config() const { return cfg_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }
  const Encoder& encoder() const { return encoder_; }
  const PredictionNet& prediction() const { return pred_; }
  const Joint& joint() const { return joint_; }

  std::vector<Eigen::VectorXd> encode(const std::vector<int>& tokens) const {
    return encoder_.forward(tokens);
  }

  // Full lattice: label(t,u) = log P(y_{u+1}|t,u), blank(t,u) = log P(blank|t,u).
  Lattice build_lattice(const std::vector<int>& tokens,
                        const std::vector<int>& targets) const {
    check_targets(targets);
    const auto F = encoder_.forward(tokens);
    const Eigen::MatrixXd G = g_rows(targets, nullptr);
    const int T = static_cast<int>(F.size());
    const int U = static_cast<int>(targets.size());
    Lattice lat;
    lat.label.resize(T, U);
    lat.blank.resize(T, U + 1);
    for (int t = 0; t < T; ++t) {
      const Eigen::MatrixXd lp = joint_.logprob_rows(F[t], G);
      for (int u = 0; u <= U; ++u) {
        lat.blank(t, u) = lp(u, cfg_.vocab_out);
        if (u < U) lat.label(t, u) = lp(u, targets[u]);
      }
    }
    return lat;
  }

  // Negative log-likelihood in the chosen mode, no gradients.
  double loss(const std::vector<int>& tokens, const std::vector<int>& targets,
              const LossMode& mode) const {
    return run(tokens, targets, mode, false);
  }

  // NLL plus accumulated parameter gradients.
  double accumulate_gradients(const std::vector<int>& tokens,
                              const std::vector<int>& targets,
                              const LossMode& mode) {
    return run(tokens, targets, mode, true);
  }

  void save_checkpoint(const std::string& path) const { params_.save(path); }
  void load_checkpoint(const std::string& path) { params_.load(path); }

 private:
  void check_targets(const std::vector<int>& targets) const {
    for (int y : targets)
      if (y < 0 || y >= cfg_.vocab_out)
        throw ContractViolation("targets must be real labels");
  }

  Eigen::MatrixXd g_rows(const std::vector<int>& targets,
                         std::vector<GruCache>* caches) const {
    const auto g = pred_.forward_targets(targets, caches);
    Eigen::MatrixXd G(g.size(), cfg_.hidden);
    for (std::size_t u = 0; u < g.size(); ++u) G.row(u) = g[u].transpose();
    return G;
  }

  // The loss modes touch different subsets of lattice cells; restrict the
  // joint evaluation to those (fixed alignment visits only T+U cells).
  double run(const std::vector<int>& tokens, const std::vector<int>& targets,
             const LossMode& mode, bool with_grad) const {
    check_targets(targets);
    EncoderCache enc_cache;
    const auto F = encoder_.forward(tokens, with_grad ? &enc_cache : nullptr);
    std::vector<GruCache> pred_caches;
    const Eigen::MatrixXd G = g_rows(targets, with_grad ? &pred_caches : nullptr);
    const int T = static_cast<int>(F.size());
    const int U = static_cast<int>(targets.size());

    ConstraintMask scratch;
    const ConstraintMask* mask = nullptr;
    if (const auto* f = std::get_if<ModeFixed>(&mode)) {
      scratch = build_constraint_mask(f->path, 0, 0);
      mask = &scratch;
    } else if (const auto* c = std::get_if<ModeConstrained>(&mode)) {
      scratch = build_constraint_mask(c->path, c->delta_t, c->delta_u);
      mask = &scratch;
    }
    if (mask && (mask->blank.rows() != T || mask->blank.cols() != U + 1))
      throw ContractViolation("alignment path does not match (T, U)");

    // active target rows per frame
    std::vector<std::vector<int>> active(T);
    for (int t = 0; t < T; ++t) {
      for (int u = 0; u <= U; ++u) {
        const bool need = !mask || mask->blank(t, u) || (u < U && mask->label(t, u));
        if (need) active[t].push_back(u);
      }
    }

    Lattice lat;
    lat.label = Eigen::MatrixXd::Constant(T, U, kLogZero);
    lat.blank = Eigen::MatrixXd::Constant(T, U + 1, kLogZero);
    std::vector<Eigen::MatrixXd> lp_cache(T), z_cache(T);
    for (int t = 0; t < T; ++t) {
      const auto& rows = active[t];
      Eigen::MatrixXd Gsub(rows.size(), cfg_.hidden);
      for (std::size_t i = 0; i < rows.size(); ++i) Gsub.row(i) = G.row(rows[i]);
      Eigen::MatrixXd Z;
      const Eigen::MatrixXd lp = joint_.logprob_rows(F[t], Gsub, with_grad ? &Z : nullptr);
      for (std::size_t i = 0; i < rows.size(); ++i) {
        const int u = rows[i];
        lat.blank(t, u) = lp(i, cfg_.vocab_out);
        if (u < U) lat.label(t, u) = lp(i, targets[u]);
      }
      if (with_grad) {
        lp_cache[t] = lp;
        z_cache[t] = std::move(Z);
      }
    }

    const LatticeGradients lg = loss_gradients(lat, mode);
    if (!with_grad) return lg.nll;

    std::vector<Eigen::VectorXd> dF(T, Eigen::VectorXd::Zero(cfg_.hidden));
    Eigen::MatrixXd dG = Eigen::MatrixXd::Zero(U + 1, cfg_.hidden);
    const int K = cfg_.vocab_out + 1;
    for (int t = 0; t < T; ++t) {
      const auto& rows = active[t];
      Eigen::MatrixXd d_lp = Eigen::MatrixXd::Zero(rows.size(), K);
      bool any = false;
      for (std::size_t i = 0; i < rows.size(); ++i) {
        const int u = rows[i];
        const double db = lg.d_blank(t, u);
        if (db != 0.0) {
          d_lp(i, cfg_.vocab_out) += db;
          any = true;
        }
        if (u < U) {
          const double dl = lg.d_label(t, u);
          if (dl != 0.0) {
            d_lp(i, targets[u]) += dl;
            any = true;
          }
        }
      }
      if (!any) continue;
      Eigen::MatrixXd dGsub = Eigen::MatrixXd::Zero(rows.size(), cfg_.hidden);
      joint_.backward_rows(d_lp, lp_cache[t], z_cache[t], dF[t], dGsub);
      for (std::size_t i = 0; i < rows.size(); ++i)
        dG.row(rows[i]) += dGsub.row(i);
    }

    std::vector<Eigen::VectorXd> d_g(U + 1);
    for (int u = 0; u <= U; ++u) d_g[u] = dG.row(u).transpose();
    pred_.backward(targets, pred_caches, d_g);
    encoder_.backward(tokens, enc_cache, dF);
    return lg.nll;
  }

  ModelConfig cfg_;
  ParamStore params_;
  Encoder encoder_;
  PredictionNet pred_;
  Joint joint_;
};

// Decode-time adapter: blank leaves the prediction state untouched.
class RnntScorer : public Scorer {
 public:
  RnntScorer(const RnntModel& model, std::vector<Eigen::VectorXd> frames)
      : model_(model), frames_(std::move(frames)) {}

  int num_labels() const override { return model_.config().vocab_out; }

  ScorerState initial_state() const override {
    return ScorerState{model_.prediction().initial_g(), -1};
  }

  Eigen::VectorXd logprobs(const ScorerState& s, int frame) const override {
    return model_.joint().logprobs(frames_.at(frame - 1), s.h);
  }

  ScorerState advance(const ScorerState& s, int token, int) const override {
    if (token == num_labels()) return s;  // blank: state untouched
    return ScorerState{model_.prediction().step(s.h, token), token};
  }

 private:
  const RnntModel& model_;
  std::vector<Eigen::VectorXd> frames_;
};

// --- hard-attention seq-to-seq variant --------------------------------------

// The recurrence consumes concat(emb[last token], enc[t]) at every trellis
// step; unlike the transducer, the explicit eow token updates the state too.
class Seq2SeqModel {
 public:
  explicit Seq2SeqModel(const ModelConfig& cfg)
      : cfg_(cfg),
        encoder_(params_, EncoderConfig{cfg.arch, cfg.vocab_in, cfg.hidden,
                                        cfg.layers, cfg.window}),
        cell_(params_, "s2s.cell", cfg.embed + cfg.hidden, cfg.hidden) {
    emb_ = &params_.add("s2s.emb", cfg.vocab_out + 1, cfg.embed);  // row vocab_out = eow
    Wp_ = &params_.add("s2s.Wp", cfg.vocab_out + 1, cfg.hidden);
    bp_ = &params_.add("s2s.bp", cfg.vocab_out + 1, 1);
    params_.init_uniform(cfg.seed + 1);
  }

  const ModelConfig& config() const { return cfg_; }
  ParamStore& params() { return params_; }
  const Encoder& encoder() const { return encoder_; }
  int eow() const { return cfg_.vocab_out; }

  std::vector<Eigen::VectorXd> encode(const std::vector<int>& tokens) const {
    return encoder_.forward(tokens);
  }

  // One recurrent step: input (last emitted token, current frame vector).
  Eigen::VectorXd step_logprobs(const Eigen::VectorXd& h, int last,
                                const Eigen::VectorXd& enc_t,
                                Eigen::VectorXd* h_out,
                                GruCache* cache = nullptr) const {
    Eigen::VectorXd x(cfg_.embed + cfg_.hidden);
    x << emb_->value.row(last).transpose(), enc_t;
    Eigen::VectorXd h_new = cell_.forward(x, h, cache);
    if (h_out) *h_out = h_new;
    return detail::log_softmax(Wp_->value * h_new + bp_->value);
  }

  double loss_fixed(const std::vector<int>& tokens, const std::vector<int>& targets,
                    const AlignmentPath& path) const {
    return run(tokens, targets, path, false);
  }

  double accumulate_gradients(const std::vector<int>& tokens,
                              const std::vector<int>& targets,
                              const AlignmentPath& path) {
    return run(tokens, targets, path, true);
  }

  void save_checkpoint(const std::string& path) const { params_.save(path); }
  void load_checkpoint(const std::string& path) { params_.load(path); }

 private:
  double run(const std::vector<int>& tokens, const std::vector<int>& targets,
             const AlignmentPath& path, bool with_grad) const {
    const int T = static_cast<int>(tokens.size());
    const int U = static_cast<int>(targets.size());
    path.validate(T, U);
    EncoderCache enc_cache;
    const auto F = encoder_.forward(tokens, with_grad ? &enc_cache : nullptr);

    const int steps = T + U;
    std::vector<GruCache> caches(steps);
    std::vector<Eigen::VectorXd> lps(steps);
    std::vector<int> emitted(steps), frame_of(steps), last_of(steps);
    Eigen::VectorXd h = Eigen::VectorXd::Zero(cfg_.hidden);
    int t = 0, u = 0, last = eow();
    double total = 0.0;
    for (int i = 0; i < steps; ++i) {
      const Eigen::VectorXd lp =
          step_logprobs(h, last, F[t], &h, with_grad ? &caches[i] : nullptr);
      const int k = (path.moves[i] == Move::Label) ? targets[u] : eow();
      total += lp[k];
      emitted[i] = k;
      frame_of[i] = t;
      last_of[i] = last;
      if (with_grad) lps[i] = lp;
      if (path.moves[i] == Move::Label) {
        last = targets[u++];
      } else {
        last = eow();
        ++t;
      }
    }
    const double nll = -total;
    if (!with_grad) return nll;

    std::vector<Eigen::VectorXd> dF(T, Eigen::VectorXd::Zero(cfg_.hidden));
    Eigen::VectorXd carry = Eigen::VectorXd::Zero(cfg_.hidden);
    for (int i = steps - 1; i >= 0; --i) {
      // d(-lp[k])/dlogits = softmax - onehot(k)
      Eigen::VectorXd d_logits = lps[i].array().exp().matrix();
      d_logits[emitted[i]] -= 1.0;
      Wp_->grad += d_logits * caches_h(caches[i]).transpose();
      bp_->grad += d_logits;
      Eigen::VectorXd dh = Wp_->value.transpose() * d_logits + carry;
      Eigen::VectorXd dx = Eigen::VectorXd::Zero(cfg_.embed + cfg_.hidden);
      carry = cell_.backward(caches[i], dh, dx);
      emb_->grad.row(last_of[i]) += dx.head(cfg_.embed).transpose();
      dF[frame_of[i]] += dx.tail(cfg_.hidden);
    }
    encoder_.backward(tokens, enc_cache, dF);
    return nll;
  }

  // h' recomputed from the cache pieces (the cell does not store it)
  static Eigen::VectorXd caches_h(const GruCache& k) {
    return (k.z * k.h_prev.array() + (1.0 - k.z) * k.c).matrix();
  }

  ModelConfig cfg_;
  ParamStore params_;
  Encoder encoder_;
  GruCell cell_;
  Tensor *emb_, *Wp_, *bp_;
};

// Decode-time adapter for the seq-to-seq variant. Every token, including
// eow (which doubles as the blank id here), updates the state.
class Seq2SeqScorer : public Scorer {
 public:
  Seq2SeqScorer(const Seq2SeqModel& model, std::vector<Eigen::VectorXd> frames)
      : model_(model), frames_(std::move(frames)) {}

  int num_labels() const override { return model_.config().vocab_out; }

  ScorerState initial_state() const override {
    return ScorerState{Eigen::VectorXd::Zero(model_.config().hidden),
                       model_.eow()};
  }

  Eigen::VectorXd logprobs(const ScorerState& s, int frame) const override {
    return model_.step_logprobs(s.h, s.last, frames_.at(frame - 1), nullptr);
  }

  ScorerState advance(const ScorerState& s, int token, int frame) const override {
    Eigen::VectorXd h_new;
    model_.step_logprobs(s.h, s.last, frames_.at(frame - 1), &h_new);
    return ScorerState{std::move(h_new), token};
  }

 private:
  const Seq2SeqModel& model_;
  std::vector<Eigen::VectorXd> frames_;
};

}  // namespace nert
