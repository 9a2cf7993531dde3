#pragma once

// Scripted training-regime studies on synthetic data, each deterministic in
// its config: loss-mode comparison, constraint-width sweep, semi-supervised
// fold-in, segment-length generalization, and architecture parity. A run
// produces per-arm training curves (CSV text), a numeric report (JSON), and
// a pass/fail verdict against pinned directional checks.

#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nert/corpus.hpp"
#include "nert/model.hpp"
#include "nert/trainer.hpp"

namespace nert {

struct ExperimentConfig {
  std::uint64_t seed = 1;
  int labels_per_ontology = 2;
  int labeled = 200;
  int unlabeled = 0;
  int test = 100;
  GenConfig gen;            // size/seed filled per corpus
  ModelConfig model;        // vocab sizes filled from schema/inventory
  TrainConfig train;        // kind/delta filled per arm
  std::vector<int> deltas = {0, 2, 4, 8, 16, 32};
  int long_seg_min = 280;   // long arm of the segment-length study
  int long_seg_max = 320;

  // Pinned desk-scale protocol per study.
  static ExperimentConfig defaults(const std::string& name) {
    ExperimentConfig c;
    c.gen.min_len = 20;
    c.gen.mean_len = 60;
    c.gen.max_len = 150;
    c.gen.spans_per_100 = 8.0;
    c.model.hidden = 16;
    c.model.embed = 16;
    c.train.seg_min = 40;
    c.train.seg_max = 60;
    c.train.decode.beam = 10.0;  // finite beam keeps full-sequence evals fast
    c.train.epochs = 20;
    c.train.evals = 4;
    c.train.eval_train_subset = 30;
    if (name == "loss-comparison") {
      c.labeled = 500;
    } else if (name == "delta-sweep") {
      c.labeled = 120;
      c.test = 60;
      c.train.epochs = 20;
      c.train.evals = 2;
    } else if (name == "semi-supervised") {
      c.labeled = 100;
      c.unlabeled = 200;
      c.train.epochs = 25;
      c.train.evals = 2;
      c.train.eval_train_subset = 20;
    } else if (name == "short-vs-long") {
      c.labeled = 60;
      c.test = 40;
      c.gen.min_len = 340;
      c.gen.mean_len = 400;
      c.gen.max_len = 600;
      c.gen.spans_per_100 = 4.0;
      c.gen.max_span_len = 80;  // spans wider than a short segment
      c.train.epochs = 60;
      c.train.evals = 2;
      c.train.eval_train_subset = 10;
    } else if (name == "seq2seq-parity") {
      c.labeled = 450;
      c.test = 80;
      c.gen.mean_len = 45;
      c.gen.max_len = 60;
      c.gen.nesting_rate = 0.0;  // flat, multi-token spans: the regime both
      c.gen.single_token_rate = 0.0;  // architectures model equally well
      c.train.epochs = 60;
      c.train.evals = 2;
    } else {
      throw ContractViolation("unknown experiment: " + name);
    }
    return c;
  }

  nlohmann::json to_json() const {
    return {{"seed", seed},
            {"labels_per_ontology", labels_per_ontology},
            {"labeled", labeled},
            {"unlabeled", unlabeled},
            {"test", test},
            {"gen",
             {{"min_len", gen.min_len},
              {"mean_len", gen.mean_len},
              {"max_len", gen.max_len},
              {"spans_per_100", gen.spans_per_100},
              {"nesting_rate", gen.nesting_rate},
              {"single_token_rate", gen.single_token_rate},
              {"max_span_len", gen.max_span_len},
              {"common_words", gen.common_words}}},
            {"model", model.to_json()},
            {"train",
             {{"seg_min", train.seg_min},
              {"seg_max", train.seg_max},
              {"epochs", train.epochs},
              {"batch", train.batch},
              {"evals", train.evals},
              {"eval_train_subset", train.eval_train_subset},
              {"lr", train.lr}}},
            {"deltas", deltas},
            {"long_seg_min", long_seg_min},
            {"long_seg_max", long_seg_max}};
  }

  // Overrides applied on top of the named defaults; unknown keys rejected.
  static ExperimentConfig from_json(const std::string& name, const nlohmann::json& j) {
    ExperimentConfig c = defaults(name);
    for (const auto& [key, val] : j.items()) {
      if (key == "seed") c.seed = val.get<std::uint64_t>();
      else if (key == "labels_per_ontology") c.labels_per_ontology = val.get<int>();
      else if (key == "labeled") c.labeled = val.get<int>();
      else if (key == "unlabeled") c.unlabeled = val.get<int>();
      else if (key == "test") c.test = val.get<int>();
      else if (key == "deltas") c.deltas = val.get<std::vector<int>>();
      else if (key == "long_seg_min") c.long_seg_min = val.get<int>();
      else if (key == "long_seg_max") c.long_seg_max = val.get<int>();
      else if (key == "gen") {
        c.gen.min_len = val.value("min_len", c.gen.min_len);
        c.gen.mean_len = val.value("mean_len", c.gen.mean_len);
        c.gen.max_len = val.value("max_len", c.gen.max_len);
        c.gen.spans_per_100 = val.value("spans_per_100", c.gen.spans_per_100);
        c.gen.nesting_rate = val.value("nesting_rate", c.gen.nesting_rate);
        c.gen.single_token_rate = val.value("single_token_rate", c.gen.single_token_rate);
        c.gen.max_span_len = val.value("max_span_len", c.gen.max_span_len);
        c.gen.common_words = val.value("common_words", c.gen.common_words);
      } else if (key == "model") {
        c.model.hidden = val.value("hidden", c.model.hidden);
        c.model.embed = val.value("embed", c.model.embed);
        c.model.layers = val.value("layers", c.model.layers);
        c.model.window = val.value("window", c.model.window);
      } else if (key == "train") {
        c.train.seg_min = val.value("seg_min", c.train.seg_min);
        c.train.seg_max = val.value("seg_max", c.train.seg_max);
        c.train.epochs = val.value("epochs", c.train.epochs);
        c.train.batch = val.value("batch", c.train.batch);
        c.train.evals = val.value("evals", c.train.evals);
        c.train.eval_train_subset = val.value("eval_train_subset", c.train.eval_train_subset);
        c.train.lr = val.value("lr", c.train.lr);
      } else {
        throw ParseError("unknown experiment config key: " + key);
      }
    }
    return c;
  }
};

struct ExperimentCheck {
  std::string name;
  double value = 0;
  double threshold = 0;
  bool passed = false;
};

struct ExperimentResult {
  std::string name;
  std::vector<ExperimentCheck> checks;
  bool passed = true;
  std::map<std::string, std::string> csv;  // filename -> contents
  nlohmann::json report;
};

namespace detail {

struct ExperimentRun {
  const ExperimentConfig& cfg;
  OntologySchema schema;
  WordInventory inv;
  std::vector<LabeledSequence> labeled, unlabeled, test;

  explicit ExperimentRun(const ExperimentConfig& c)
      : cfg(c),
        schema(OntologySchema::standard(c.labels_per_ontology)),
        inv(schema, c.gen.common_words) {
    labeled = corpus(c.labeled, 1);
    unlabeled = corpus(c.unlabeled, 2);
    test = corpus(c.test, 3);
  }

  std::vector<LabeledSequence> corpus(int size, std::uint64_t salt) const {
    GenConfig g = cfg.gen;
    g.size = size;
    g.seed = cfg.seed * 1000003 + salt;
    return generate_corpus(schema, g);
  }

  ModelConfig model_config(EncoderArch arch = EncoderArch::Recurrent) const {
    ModelConfig mc = cfg.model;
    mc.arch = arch;
    mc.vocab_in = inv.vocab_size();
    mc.vocab_out = schema.vocab_size();
    mc.seed = cfg.seed * 999983 + 7;
    return mc;
  }

  TrainConfig train_config(TrainLossKind kind, int delta = 0) const {
    TrainConfig tc = cfg.train;
    tc.kind = kind;
    tc.delta = delta;
    tc.seed = cfg.seed * 1000033 + 11;
    return tc;
  }
};

inline void add_check(ExperimentResult& out, const std::string& name, double value,
                      double threshold, bool passed) {
  out.checks.push_back(ExperimentCheck{name, value, threshold, passed});
  out.passed = out.passed && passed;
}

inline void finish_report(ExperimentResult& out, const ExperimentConfig& cfg) {
  nlohmann::json checks = nlohmann::json::array();
  for (const ExperimentCheck& c : out.checks)
    checks.push_back({{"name", c.name},
                      {"value", c.value},
                      {"threshold", c.threshold},
                      {"passed", c.passed}});
  out.report["format"] = "nert-experiment";
  out.report["version"] = 1;
  out.report["name"] = out.name;
  out.report["config"] = cfg.to_json();
  out.report["checks"] = checks;
  out.report["passed"] = out.passed;
}

inline ExperimentResult run_loss_comparison(const ExperimentConfig& cfg) {
  ExperimentResult out;
  out.name = "loss-comparison";
  ExperimentRun run(cfg);
  nlohmann::json f1;
  std::map<std::string, double> final_f1;
  for (TrainLossKind kind : {TrainLossKind::Fixed, TrainLossKind::Unconstrained}) {
    RnntModel model(run.model_config());
    const TrainResult r = train(model, run.train_config(kind), run.schema,
                                run.labeled, run.test);
    const std::string name = to_string(kind);
    out.csv["curve_" + name + ".csv"] = curve_to_csv(r.curve);
    final_f1[name] = r.final_test_f1;
    f1[name] = r.final_test_f1;
  }
  const double margin = final_f1["fixed"] - final_f1["unconstrained"];
  add_check(out, "fixed minus unconstrained test F1 margin", margin, 0.02,
            margin >= 0.02);
  out.report["test_f1"] = f1;
  finish_report(out, cfg);
  return out;
}

inline ExperimentResult run_delta_sweep(const ExperimentConfig& cfg) {
  ExperimentResult out;
  out.name = "delta-sweep";
  ExperimentRun run(cfg);
  auto arm = [&](TrainLossKind kind, int delta, const std::string& name) {
    RnntModel model(run.model_config());
    const TrainResult r = train(model, run.train_config(kind, delta), run.schema,
                                run.labeled, run.test);
    out.csv["curve_" + name + ".csv"] = curve_to_csv(r.curve);
    return r.final_test_f1;
  };
  const double fixed = arm(TrainLossKind::Fixed, 0, "fixed");
  const double unconstrained = arm(TrainLossKind::Unconstrained, 0, "unconstrained");
  nlohmann::json sweep = nlohmann::json::array();
  double first_f1 = 0, last_f1 = 0;
  for (std::size_t i = 0; i < cfg.deltas.size(); ++i) {
    const int d = cfg.deltas[i];
    const double v = arm(TrainLossKind::Constrained, d, "delta_" + std::to_string(d));
    sweep.push_back({{"delta", d}, {"test_f1", v}});
    if (i == 0) first_f1 = v;
    if (i + 1 == cfg.deltas.size()) last_f1 = v;
  }
  const double lo_gap = std::abs(first_f1 - fixed);
  const double hi_gap = std::abs(last_f1 - unconstrained);
  add_check(out, "smallest delta matches fixed-mode F1", lo_gap, 0.01, lo_gap <= 0.01);
  add_check(out, "largest delta matches unconstrained-mode F1", hi_gap, 0.02,
            hi_gap <= 0.02);
  out.report["test_f1"] = {{"fixed", fixed}, {"unconstrained", unconstrained}};
  out.report["sweep"] = sweep;
  finish_report(out, cfg);
  return out;
}

inline ExperimentResult run_semi_supervised(const ExperimentConfig& cfg) {
  ExperimentResult out;
  out.name = "semi-supervised";
  ExperimentRun run(cfg);
  // Gains are measured in global (label-only) F1: the alignment-free loss
  // learns which entities occur long before it localizes them, so the
  // location-exact metric cannot register its improvement.
  std::map<std::string, double> margin;
  nlohmann::json detail;
  std::map<std::string, double> base_global;
  // one pseudo-labeler for both arms: the stronger of the two base models
  RnntModel labeler(run.model_config());
  for (TrainLossKind kind : {TrainLossKind::Unconstrained, TrainLossKind::Fixed}) {
    const std::string name = to_string(kind);
    RnntModel model(run.model_config());
    const TrainResult rb = train(model, run.train_config(kind), run.schema,
                                 run.labeled, run.test);
    out.csv["curve_" + name + "_base.csv"] = curve_to_csv(rb.curve);
    base_global[name] =
        evaluate_global_f1(model, run.test, run.schema, cfg.train.decode);
    detail[name] = {{"base_test_f1", rb.final_test_f1},
                    {"base_test_global_f1", base_global[name]}};
    if (kind == TrainLossKind::Fixed) labeler = std::move(model);
  }
  const PseudoLabelResult pl =
      pseudo_label(labeler, run.unlabeled, run.schema, cfg.train.decode);
  for (TrainLossKind kind : {TrainLossKind::Unconstrained, TrainLossKind::Fixed}) {
    const std::string name = to_string(kind);
    RnntModel semi(run.model_config());
    const TrainResult rs = train(semi, run.train_config(kind), run.schema,
                                 run.labeled, run.test, pl.corpus);
    out.csv["curve_" + name + "_semi.csv"] = curve_to_csv(rs.curve);
    const double semi_global =
        evaluate_global_f1(semi, run.test, run.schema, cfg.train.decode);
    margin[name] = semi_global - base_global[name];
    detail[name]["semi_test_f1"] = rs.final_test_f1;
    detail[name]["semi_test_global_f1"] = semi_global;
    detail[name]["pseudo_kept"] = pl.corpus.size();
    detail[name]["pseudo_skipped"] = pl.skipped;
  }
  const double diff = margin["unconstrained"] - margin["fixed"];
  add_check(out, "semi-supervised global F1 gain, unconstrained minus fixed", diff,
            0.0, diff > 0.0);
  out.report["detail"] = detail;
  finish_report(out, cfg);
  return out;
}

inline ExperimentResult run_short_vs_long(const ExperimentConfig& cfg) {
  ExperimentResult out;
  out.name = "short-vs-long";
  ExperimentRun run(cfg);
  // deterministic segmented view of the test set, one cut per sequence
  auto segmented = [&](int lo, int hi) {
    std::mt19937_64 rng(cfg.seed * 1000211 + 17);
    std::vector<LabeledSequence> segs;
    for (const LabeledSequence& s : run.test)
      segs.push_back(random_segment(s, lo, hi, rng));
    return segs;
  };
  nlohmann::json detail;
  std::map<std::string, double> gap;
  const std::pair<std::string, std::pair<int, int>> arms[] = {
      {"short", {cfg.train.seg_min, cfg.train.seg_max}},
      {"long", {cfg.long_seg_min, cfg.long_seg_max}}};
  for (const auto& [name, range] : arms) {
    TrainConfig tc = run.train_config(TrainLossKind::Fixed);
    tc.seg_min = range.first;
    tc.seg_max = range.second;
    RnntModel model(run.model_config());
    const TrainResult r = train(model, tc, run.schema, run.labeled, run.test);
    out.csv["curve_" + name + ".csv"] = curve_to_csv(r.curve);
    const double f1_full = r.final_test_f1;
    const double f1_seg = evaluate_local_f1(
        model, segmented(range.first, range.second), run.schema, tc.decode);
    gap[name] = f1_full - f1_seg;
    detail[name] = {{"test_f1_unsegmented", f1_full},
                    {"test_f1_segmented", f1_seg},
                    {"gap", gap[name]}};
  }
  const double diff = gap["long"] - gap["short"];
  add_check(out, "short-trained generalization gap exceeds long-trained by", diff,
            0.02, diff >= 0.02);
  out.report["detail"] = detail;
  finish_report(out, cfg);
  return out;
}

inline ExperimentResult run_seq2seq_parity(const ExperimentConfig& cfg) {
  ExperimentResult out;
  out.name = "seq2seq-parity";
  ExperimentRun run(cfg);
  RnntModel rnnt(run.model_config());
  const TrainResult ra = train(rnnt, run.train_config(TrainLossKind::Fixed),
                               run.schema, run.labeled, run.test);
  out.csv["curve_rnnt_fixed.csv"] = curve_to_csv(ra.curve);
  Seq2SeqModel s2s(run.model_config());
  const TrainResult rb = train(s2s, run.train_config(TrainLossKind::Seq2Seq),
                               run.schema, run.labeled, run.test);
  out.csv["curve_seq2seq.csv"] = curve_to_csv(rb.curve);
  const double diff = std::abs(ra.final_test_f1 - rb.final_test_f1);
  add_check(out, "absolute test F1 difference between architectures", diff, 0.02,
            diff <= 0.02);
  out.report["test_f1"] = {{"rnnt_fixed", ra.final_test_f1},
                           {"seq2seq", rb.final_test_f1}};
  finish_report(out, cfg);
  return out;
}

}  // namespace detail

inline ExperimentResult run_experiment(const std::string& name,
                                       const ExperimentConfig& cfg) {
  if (name == "loss-comparison") return detail::run_loss_comparison(cfg);
  if (name == "delta-sweep") return detail::run_delta_sweep(cfg);
  if (name == "semi-supervised") return detail::run_semi_supervised(cfg);
  if (name == "short-vs-long") return detail::run_short_vs_long(cfg);
  if (name == "seq2seq-parity") return detail::run_seq2seq_parity(cfg);
  throw ContractViolation("unknown experiment: " + name);
}

}  // namespace nert
