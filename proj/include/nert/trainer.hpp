#pragma once

// Segment-resampled minibatch training for both model families, evaluation by
// full-sequence decoding, and pseudo-labeling of unlabeled corpora.

#include <cmath>
#include <iomanip>
#include <memory>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include "nert/corpus.hpp"
#include "nert/decoder.hpp"
#include "nert/errors.hpp"
#include "nert/metrics.hpp"
#include "nert/model.hpp"
#include "nert/params.hpp"

namespace nert {

enum class TrainLossKind { Unconstrained, Fixed, Constrained, Seq2Seq };

inline std::string to_string(TrainLossKind k) {
  switch (k) {
    case TrainLossKind::Unconstrained: return "unconstrained";
    case TrainLossKind::Fixed: return "fixed";
    case TrainLossKind::Constrained: return "constrained";
    case TrainLossKind::Seq2Seq: return "seq2seq";
  }
  throw ContractViolation("unknown loss kind");
}

inline TrainLossKind loss_kind_from_string(const std::string& s) {
  if (s == "unconstrained") return TrainLossKind::Unconstrained;
  if (s == "fixed") return TrainLossKind::Fixed;
  if (s == "constrained") return TrainLossKind::Constrained;
  if (s == "seq2seq") return TrainLossKind::Seq2Seq;
  throw ParseError("unknown loss mode: " + s);
}

struct TrainConfig {
  TrainLossKind kind = TrainLossKind::Fixed;
  int delta = 0;  // constrained-mode relaxation, both axes
  int seg_min = 40;
  int seg_max = 60;
  int epochs = 20;
  int batch = 8;
  int evals = 4;              // evaluation points spread over the run
  int eval_train_subset = 50; // train sequences decoded per evaluation
  double lr = 1e-2;
  std::uint64_t seed = 1;
  DecodeConfig decode;

  void validate() const {
    if (epochs < 0 || batch < 1 || evals < 0 || eval_train_subset < 0)
      throw ContractViolation("train config: bad counts");
    if (seg_min < 1 || seg_min > seg_max)
      throw ContractViolation("train config: need 1 <= seg_min <= seg_max");
    if (delta < 0) throw ContractViolation("train config: delta >= 0");
    if (delta > 0 && kind != TrainLossKind::Constrained)
      throw ContractViolation("train config: delta only applies to constrained mode");
    decode.validate();
  }
};

struct CurvePoint {
  long step = 0;
  double nll = 0;
  double train_f1 = 0;
  double test_f1 = 0;
};

struct TrainingCurve {
  std::vector<CurvePoint> points;
};

inline std::string curve_to_csv(const TrainingCurve& curve) {
  std::ostringstream os;
  os << "step,nll,train_f1,test_f1\n";
  os << std::setprecision(12);
  for (const CurvePoint& p : curve.points)
    os << p.step << "," << p.nll << "," << p.train_f1 << "," << p.test_f1 << "\n";
  return os.str();
}

struct TrainResult {
  TrainingCurve curve;
  double final_train_f1 = 0;
  double final_test_f1 = 0;
};

namespace detail {

template <typename ModelT>
std::unique_ptr<Scorer> make_scorer(const ModelT& model, const std::vector<int>& tokens) {
  if constexpr (std::is_same_v<ModelT, Seq2SeqModel>)
    return std::make_unique<Seq2SeqScorer>(model, model.encode(tokens));
  else
    return std::make_unique<RnntScorer>(model, model.encode(tokens));
}

template <typename ModelT>
double grad_step(ModelT& model, const TrainConfig& cfg, const std::vector<int>& tokens,
                 const std::vector<int>& targets, const AlignmentPath& path) {
  if constexpr (std::is_same_v<ModelT, Seq2SeqModel>) {
    return model.accumulate_gradients(tokens, targets, path);
  } else {
    switch (cfg.kind) {
      case TrainLossKind::Unconstrained:
        return model.accumulate_gradients(tokens, targets, ModeUnconstrained{});
      case TrainLossKind::Fixed:
        return model.accumulate_gradients(tokens, targets, ModeFixed{path});
      case TrainLossKind::Constrained:
        return model.accumulate_gradients(tokens, targets,
                                          ModeConstrained{path, cfg.delta, cfg.delta});
      default:
        throw ContractViolation("seq2seq kind requires a Seq2SeqModel");
    }
  }
}

inline std::vector<Span> predicted_spans(const SpanExtraction& ext) {
  std::vector<Span> out;
  for (const FrameSpan& s : ext.spans)
    out.push_back(Span{s.ontology, s.label, s.start_frame - 1, s.end_frame - 1});
  return out;
}

}  // namespace detail

// Micro-averaged F1 of greedy-best decodes over full sequences.
template <typename ModelT, typename MatchFn>
double evaluate_f1(const ModelT& model, const std::vector<LabeledSequence>& corpus,
                   const OntologySchema& schema, const DecodeConfig& decode,
                   MatchFn match, std::size_t limit = 0) {
  SpanMatchResult agg;
  std::size_t n = corpus.size();
  if (limit > 0) n = std::min(n, limit);
  for (std::size_t i = 0; i < n; ++i) {
    const LabeledSequence& seq = corpus[i];
    const int T = static_cast<int>(seq.tokens.size());
    auto scorer = detail::make_scorer(model, seq.tokens);
    const auto hyps = beam_search(*scorer, T, decode);
    if (hyps.empty()) continue;
    const auto ext = extract_spans(hyps[0], schema, T);
    agg += match(detail::predicted_spans(ext), seq.spans);
  }
  return agg.totals().f1();
}

template <typename ModelT>
double evaluate_local_f1(const ModelT& model, const std::vector<LabeledSequence>& corpus,
                         const OntologySchema& schema, const DecodeConfig& decode,
                         std::size_t limit = 0) {
  return evaluate_f1(model, corpus, schema, decode,
                     [](const std::vector<Span>& p, const std::vector<Span>& g) {
                       return local_f1(p, g);
                     },
                     limit);
}

template <typename ModelT>
double evaluate_global_f1(const ModelT& model, const std::vector<LabeledSequence>& corpus,
                          const OntologySchema& schema, const DecodeConfig& decode,
                          std::size_t limit = 0) {
  return evaluate_f1(model, corpus, schema, decode,
                     [](const std::vector<Span>& p, const std::vector<Span>& g) {
                       return global_f1(p, g);
                     },
                     limit);
}

// Epochs of segment-resampled minibatch Adam under the configured loss.
// `pseudo` sequences join every epoch alongside the full labeled set.
template <typename ModelT>
TrainResult train(ModelT& model, const TrainConfig& cfg, const OntologySchema& schema,
                  const std::vector<LabeledSequence>& labeled,
                  const std::vector<LabeledSequence>& test,
                  const std::vector<LabeledSequence>& pseudo = {}) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  Adam opt;
  opt.lr = cfg.lr;

  std::vector<const LabeledSequence*> pool;
  for (const LabeledSequence& s : labeled) pool.push_back(&s);
  for (const LabeledSequence& s : pseudo) pool.push_back(&s);

  TrainResult result;
  if (pool.empty() || cfg.epochs == 0) {
    result.final_train_f1 = evaluate_local_f1(model, labeled, schema, cfg.decode,
                                              static_cast<std::size_t>(cfg.eval_train_subset));
    result.final_test_f1 = evaluate_local_f1(model, test, schema, cfg.decode);
    return result;
  }

  const int eval_stride =
      cfg.evals > 0 ? std::max(1, cfg.epochs / cfg.evals) : cfg.epochs + 1;
  long step = 0;
  double nll_sum = 0;
  long nll_count = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::vector<std::size_t> order(pool.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t at = 0; at < order.size(); at += static_cast<std::size_t>(cfg.batch)) {
      model.params().zero_grads();
      int count = 0;
      for (std::size_t b = at;
           b < std::min(order.size(), at + static_cast<std::size_t>(cfg.batch)); ++b) {
        const LabeledSequence seg =
            random_segment(*pool[order[b]], cfg.seg_min, cfg.seg_max, rng);
        const GoldAlignment ga = spans_to_alignment(seg, schema);
        double nll;
        try {
          nll = detail::grad_step(model, cfg, seg.tokens, ga.targets, ga.path);
        } catch (const ContractViolation& e) {
          throw NumericalError(std::string(e.what()) + " at step " + std::to_string(step));
        }
        if (!std::isfinite(nll))
          throw NumericalError("non-finite loss at step " + std::to_string(step));
        nll_sum += nll;
        ++count;
      }
      model.params().scale_grads(1.0 / count);
      opt.step(model.params());
      nll_count += count;
      ++step;
    }
    const bool last = epoch + 1 == cfg.epochs;
    if (last || (cfg.evals > 0 && (epoch + 1) % eval_stride == 0)) {
      CurvePoint p;
      p.step = step;
      p.nll = nll_count > 0 ? nll_sum / nll_count : 0.0;
      p.train_f1 = evaluate_local_f1(model, labeled, schema, cfg.decode,
                                     static_cast<std::size_t>(cfg.eval_train_subset));
      p.test_f1 = evaluate_local_f1(model, test, schema, cfg.decode);
      result.curve.points.push_back(p);
      nll_sum = 0;
      nll_count = 0;
      if (last) {
        result.final_train_f1 = p.train_f1;
        result.final_test_f1 = p.test_f1;
      }
    }
  }
  return result;
}

// --- pseudo-labeling ---------------------------------------------------------

struct PseudoLabelResult {
  std::vector<LabeledSequence> corpus;
  int skipped = 0;  // sequences whose decode failed
};

template <typename ModelT>
PseudoLabelResult pseudo_label(const ModelT& model,
                               const std::vector<LabeledSequence>& unlabeled,
                               const OntologySchema& schema,
                               const DecodeConfig& decode) {
  PseudoLabelResult out;
  for (const LabeledSequence& seq : unlabeled) {
    try {
      const int T = static_cast<int>(seq.tokens.size());
      auto scorer = detail::make_scorer(model, seq.tokens);
      const auto hyps = beam_search(*scorer, T, decode);
      if (hyps.empty()) {
        ++out.skipped;
        continue;
      }
      const auto ext = extract_spans(hyps[0], schema, T);
      LabeledSequence labeled;
      labeled.id = "pseudo:" + seq.id;
      labeled.tokens = seq.tokens;
      labeled.spans = detail::predicted_spans(ext);
      std::sort(labeled.spans.begin(), labeled.spans.end(),
                [](const Span& a, const Span& b) {
                  if (a.start != b.start) return a.start < b.start;
                  return a.end > b.end;
                });
      spans_to_alignment(labeled, schema);  // drop decodes that cannot be trained on
      out.corpus.push_back(std::move(labeled));
    } catch (const std::exception&) {
      ++out.skipped;
    }
  }
  return out;
}

}  // namespace nert
