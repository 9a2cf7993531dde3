#pragma once

// Frame-synchronous beam search: breadth-first over input frames, expansion
// waves within a frame (a hypothesis moves to the next frame exactly when it
// takes blank), pruning against the best score seen in the frame. Spans are
// reconstructed from begin-labels and end-markers afterwards.

#include <Eigen/Dense>
#include <algorithm>
#include <limits>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nert/errors.hpp"
#include "nert/logmath.hpp"
#include "nert/schema.hpp"

namespace nert {

struct ScorerState {
  Eigen::VectorXd h;   // prediction-network (or fused) hidden state
  int last = -1;       // last emitted token, for models that feed it back
};

// Per-(state, frame) label-distribution provider. Frames are 1-based.
// Blank id == num_labels().
class Scorer {
 public:
  virtual ~Scorer() = default;
  virtual int num_labels() const = 0;
  virtual ScorerState initial_state() const = 0;
  virtual Eigen::VectorXd logprobs(const ScorerState& s, int frame) const = 0;
  virtual ScorerState advance(const ScorerState& s, int token, int frame) const = 0;
};

struct Hypothesis {
  std::vector<int> labels;       // emitted label ids, blank excluded
  std::vector<int> emit_frames;  // 1-based frame per label, non-decreasing
  double score = 0.0;
  ScorerState state;
};

enum class MergeMode { None, Max, LogSumExp };

struct DecodeConfig {
  double beam = std::numeric_limits<double>::infinity();
  int max_expansion = 5;  // labels allowed per frame
  int max_hyps = 8;
  int max_wave = 64;  // width cap inside a frame's expansion waves
  MergeMode merge = MergeMode::LogSumExp;

  void validate() const {
    if (beam < 0 || max_expansion < 1 || max_hyps < 1 || max_wave < 1)
      throw ContractViolation(
          "decode config: beam >= 0, max_expansion >= 1, max_hyps >= 1, max_wave >= 1");
  }
};

namespace detail {

// score desc, then shorter label sequence, then lexicographic ids, then
// frames; full order so golden outputs are deterministic.
inline bool hyp_better(const Hypothesis& a, const Hypothesis& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.labels.size() != b.labels.size()) return a.labels.size() < b.labels.size();
  if (a.labels != b.labels) return a.labels < b.labels;
  return a.emit_frames < b.emit_frames;
}

inline void check_normalized(const Eigen::VectorXd& lp) {
  double s = kLogZero;
  for (Eigen::Index i = 0; i < lp.size(); ++i) s = log_add(s, lp[i]);
  if (std::abs(s) > 1e-6)
    throw ContractViolation("scorer distribution is not normalized");
}

}  // namespace detail

inline std::vector<Hypothesis> beam_search(const Scorer& scorer, int T,
                                           const DecodeConfig& cfg) {
  cfg.validate();
  if (T < 1) throw ContractViolation("beam_search: T >= 1 required");
  const int blank = scorer.num_labels();

  std::vector<Hypothesis> active;
  active.push_back(Hypothesis{{}, {}, 0.0, scorer.initial_state()});

  for (int t = 1; t <= T; ++t) {
    std::vector<Hypothesis> blanked;  // moved on to frame t+1
    std::vector<Hypothesis> wave = std::move(active);
    active.clear();
    // wave e holds hypotheses that emitted e labels at this frame; blank is
    // always offered, labels only while under the expansion budget
    for (int e = 0; e <= cfg.max_expansion && !wave.empty(); ++e) {
      std::vector<Hypothesis> next_wave;
      for (Hypothesis& hyp : wave) {
        const Eigen::VectorXd lp = scorer.logprobs(hyp.state, t);
        detail::check_normalized(lp);
        Hypothesis moved = hyp;
        moved.score += lp[blank];
        moved.state = scorer.advance(hyp.state, blank, t);
        blanked.push_back(std::move(moved));
        if (e < cfg.max_expansion) {
          for (int k = 0; k < blank; ++k) {
            if (lp[k] == kLogZero) continue;
            Hypothesis ext = hyp;
            ext.score += lp[k];
            ext.labels.push_back(k);
            ext.emit_frames.push_back(t);
            ext.state = scorer.advance(hyp.state, k, t);
            next_wave.push_back(std::move(ext));
          }
        }
      }
      double best = kLogZero;
      for (const Hypothesis& h : blanked) best = std::max(best, h.score);
      for (const Hypothesis& h : next_wave) best = std::max(best, h.score);
      auto prune = [&](std::vector<Hypothesis>& v) {
        std::erase_if(v, [&](const Hypothesis& h) { return h.score < best - cfg.beam; });
      };
      prune(blanked);
      prune(next_wave);
      if (static_cast<int>(next_wave.size()) > cfg.max_wave) {
        std::sort(next_wave.begin(), next_wave.end(), detail::hyp_better);
        next_wave.resize(static_cast<std::size_t>(cfg.max_wave));
      }
      wave = std::move(next_wave);
    }

    // recombine identical label histories
    std::sort(blanked.begin(), blanked.end(), [](const Hypothesis& a, const Hypothesis& b) {
      if (a.labels != b.labels) return a.labels < b.labels;
      return detail::hyp_better(a, b);
    });
    std::vector<Hypothesis> merged;
    for (Hypothesis& h : blanked) {
      if (cfg.merge != MergeMode::None && !merged.empty() &&
          merged.back().labels == h.labels) {
        if (cfg.merge == MergeMode::LogSumExp)
          merged.back().score = log_add(merged.back().score, h.score);
        // Max: keep the first (better) one
      } else {
        merged.push_back(std::move(h));
      }
    }
    std::sort(merged.begin(), merged.end(), detail::hyp_better);
    if (static_cast<int>(merged.size()) > cfg.max_hyps)
      merged.resize(static_cast<std::size_t>(cfg.max_hyps));
    active = std::move(merged);
  }
  std::sort(active.begin(), active.end(), detail::hyp_better);
  return active;
}

// --- span reconstruction ---------------------------------------------------

struct FrameSpan {
  int ontology = -1;
  int label = -1;      // begin-label id
  int start_frame = 0; // 1-based, inclusive
  int end_frame = 0;
  bool truncated = false;  // closed at T because no end-marker arrived
};

struct SpanExtraction {
  std::vector<FrameSpan> spans;
  int spurious_markers = 0;  // end-markers with no open span of that ontology
};

// Begin-labels open a span at their emission frame; the matching end-marker
// (most recently opened span of the same ontology) closes it.
inline SpanExtraction extract_spans(const Hypothesis& hyp,
                                    const OntologySchema& schema, int T) {
  SpanExtraction out;
  std::vector<std::vector<std::size_t>> open(schema.ontologies.size());
  for (std::size_t i = 0; i < hyp.labels.size(); ++i) {
    const int id = hyp.labels[i];
    const int frame = hyp.emit_frames[i];
    const int ont = schema.ontology_of(id);
    if (schema.is_begin(id)) {
      out.spans.push_back(FrameSpan{ont, id, frame, -1, false});
      open[ont].push_back(out.spans.size() - 1);
    } else {
      if (open[ont].empty()) {
        ++out.spurious_markers;
        continue;
      }
      out.spans[open[ont].back()].end_frame = frame;
      open[ont].pop_back();
    }
  }
  for (const auto& stack : open)
    for (std::size_t idx : stack) {
      out.spans[idx].end_frame = T;
      out.spans[idx].truncated = true;
    }
  return out;
}

// One JSON object per decoded sequence (JSON-lines decode output).
inline nlohmann::json decode_record(const std::string& source_id,
                                    const Hypothesis& hyp,
                                    const SpanExtraction& ext,
                                    const OntologySchema& schema) {
  nlohmann::json spans = nlohmann::json::array();
  for (const FrameSpan& s : ext.spans)
    spans.push_back({{"ontology", schema.ontologies[s.ontology].name},
                     {"label", schema.label_name(s.label)},
                     {"label_id", s.label},
                     {"start_frame", s.start_frame},
                     {"end_frame", s.end_frame},
                     {"truncated", s.truncated}});
  return {{"source_id", source_id},
          {"score", hyp.score},
          {"labels", hyp.labels},
          {"emit_frames", hyp.emit_frames},
          {"spans", spans},
          {"spurious_markers", ext.spurious_markers}};
}

}  // namespace nert
