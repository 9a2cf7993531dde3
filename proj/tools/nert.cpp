// Command-line front end: data generation, training, decoding, evaluation,
// pseudo-labeling, scripted experiments, and the self-verification suite.
//
// Every run takes its settings from an optional JSON config (--config),
// writes machine artifacts only into --out, and drops the fully resolved
// config beside them so any output can be regenerated from its snapshot.
//
// Exit codes: 0 ok, 2 usage, 3 config error, 4 data error, 5 numerical
// failure, 6 criterion failure.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "nert/corpus.hpp"
#include "nert/decoder.hpp"
#include "nert/experiments.hpp"
#include "nert/metrics.hpp"
#include "nert/model.hpp"
#include "nert/trainer.hpp"
#include "nert/verify.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kOk = 0;
constexpr int kUsage = 2;
constexpr int kConfigError = 3;
constexpr int kDataError = 4;
constexpr int kNumericalError = 5;
constexpr int kCriterionFailure = 6;

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

json load_config(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream is(path);
  if (!is) throw nert::ParseError("cannot open config: " + path);
  json j;
  try {
    is >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config " + path + ": " + e.what());
  }
  if (!j.is_object()) throw ConfigError("config must be a JSON object: " + path);
  return j;
}

// paths inside a config are taken relative to the config file itself
std::string resolve(const std::string& path, const std::string& config_path) {
  if (path.empty() || fs::path(path).is_absolute() || config_path.empty())
    return path;
  return (fs::path(config_path).parent_path() / path).string();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path);
  if (!os) throw nert::ParseError("cannot open for write: " + path.string());
  os << text;
}

fs::path prepare_out(const std::string& out) {
  if (out.empty()) throw ConfigError("--out is required for this subcommand");
  fs::create_directories(out);
  return fs::path(out);
}

nert::DecodeConfig decode_from_json(const json& j) {
  nert::DecodeConfig d;
  d.beam = j.value("beam", d.beam);
  d.max_expansion = j.value("max_expansion", d.max_expansion);
  d.max_hyps = j.value("max_hyps", d.max_hyps);
  d.max_wave = j.value("max_wave", d.max_wave);
  const std::string merge = j.value("merge", "logsumexp");
  if (merge == "none") d.merge = nert::MergeMode::None;
  else if (merge == "max") d.merge = nert::MergeMode::Max;
  else if (merge == "logsumexp") d.merge = nert::MergeMode::LogSumExp;
  else throw ConfigError("unknown merge mode: " + merge);
  return d;
}

json decode_to_json(const nert::DecodeConfig& d) {
  const char* merge = d.merge == nert::MergeMode::None
                          ? "none"
                          : d.merge == nert::MergeMode::Max ? "max" : "logsumexp";
  return {{"beam", d.beam},
          {"max_expansion", d.max_expansion},
          {"max_hyps", d.max_hyps},
          {"max_wave", d.max_wave},
          {"merge", merge}};
}

nert::TrainConfig train_from_json(const json& j) {
  nert::TrainConfig t;
  t.kind = nert::loss_kind_from_string(j.value("kind", "fixed"));
  t.delta = j.value("delta", t.delta);
  t.seg_min = j.value("seg_min", t.seg_min);
  t.seg_max = j.value("seg_max", t.seg_max);
  t.epochs = j.value("epochs", t.epochs);
  t.batch = j.value("batch", t.batch);
  t.evals = j.value("evals", t.evals);
  t.eval_train_subset = j.value("eval_train_subset", t.eval_train_subset);
  t.lr = j.value("lr", t.lr);
  t.seed = j.value("seed", t.seed);
  if (j.contains("decode")) t.decode = decode_from_json(j.at("decode"));
  return t;
}

json train_to_json(const nert::TrainConfig& t) {
  return {{"kind", nert::to_string(t.kind)},
          {"delta", t.delta},
          {"seg_min", t.seg_min},
          {"seg_max", t.seg_max},
          {"epochs", t.epochs},
          {"batch", t.batch},
          {"evals", t.evals},
          {"eval_train_subset", t.eval_train_subset},
          {"lr", t.lr},
          {"seed", t.seed},
          {"decode", decode_to_json(t.decode)}};
}

// A trained model on disk: its config (with a family tag) plus a checkpoint.
struct LoadedModel {
  std::unique_ptr<nert::RnntModel> rnnt;
  std::unique_ptr<nert::Seq2SeqModel> s2s;

  template <typename Fn>
  auto visit(Fn&& fn) const {
    return rnnt ? fn(*rnnt) : fn(*s2s);
  }
};

LoadedModel load_model(const json& cfg, const std::string& config_path) {
  const std::string mc_path = resolve(cfg.at("model_config").get<std::string>(),
                                      config_path);
  const std::string ckpt = resolve(cfg.at("checkpoint").get<std::string>(),
                                   config_path);
  std::ifstream is(mc_path);
  if (!is) throw nert::ParseError("cannot open: " + mc_path);
  json mj;
  is >> mj;
  const nert::ModelConfig mc = nert::ModelConfig::from_json(mj);
  LoadedModel m;
  if (mj.value("family", "rnnt") == "seq2seq") {
    m.s2s = std::make_unique<nert::Seq2SeqModel>(mc);
    m.s2s->load_checkpoint(ckpt);
  } else {
    m.rnnt = std::make_unique<nert::RnntModel>(mc);
    m.rnnt->load_checkpoint(ckpt);
  }
  return m;
}

// --- subcommands -------------------------------------------------------------

int cmd_gen_data(const std::string& config_path, const std::string& out,
                 std::uint64_t seed, bool have_seed, int size, bool have_size) {
  const json cfg = load_config(config_path);
  nert::GenConfig gc;
  gc.size = cfg.value("size", 100);
  gc.min_len = cfg.value("min_len", gc.min_len);
  gc.mean_len = cfg.value("mean_len", gc.mean_len);
  gc.max_len = cfg.value("max_len", gc.max_len);
  gc.spans_per_100 = cfg.value("spans_per_100", gc.spans_per_100);
  gc.nesting_rate = cfg.value("nesting_rate", gc.nesting_rate);
  gc.single_token_rate = cfg.value("single_token_rate", gc.single_token_rate);
  gc.max_span_len = cfg.value("max_span_len", gc.max_span_len);
  gc.common_words = cfg.value("common_words", gc.common_words);
  gc.seed = cfg.value("seed", gc.seed);
  if (have_seed) gc.seed = seed;
  if (have_size) gc.size = size;
  const int labels = cfg.value("labels_per_ontology", 2);

  const nert::OntologySchema schema = nert::OntologySchema::standard(labels);
  const auto corpus = nert::generate_corpus(schema, gc);

  const fs::path dir = prepare_out(out);
  schema.save((dir / "schema.json").string());
  nert::save_corpus(corpus, (dir / "corpus.jsonl").string());
  const json resolved = {{"subcommand", "gen-data"},
                         {"labels_per_ontology", labels},
                         {"size", gc.size},
                         {"min_len", gc.min_len},
                         {"mean_len", gc.mean_len},
                         {"max_len", gc.max_len},
                         {"spans_per_100", gc.spans_per_100},
                         {"nesting_rate", gc.nesting_rate},
                         {"single_token_rate", gc.single_token_rate},
                         {"max_span_len", gc.max_span_len},
                         {"common_words", gc.common_words},
                         {"seed", gc.seed}};
  write_text(dir / "config.json", resolved.dump(2) + "\n");
  std::cerr << "wrote " << corpus.size() << " sequences to " << dir / "corpus.jsonl"
            << "\n";
  return kOk;
}

int cmd_train(const std::string& config_path, const std::string& out,
              std::uint64_t seed, bool have_seed) {
  const json cfg = load_config(config_path);
  const nert::OntologySchema schema = nert::OntologySchema::load(
      resolve(cfg.at("schema").get<std::string>(), config_path));
  const auto labeled = nert::load_corpus(
      resolve(cfg.at("labeled").get<std::string>(), config_path));
  std::vector<nert::LabeledSequence> test, pseudo;
  if (cfg.contains("test"))
    test = nert::load_corpus(resolve(cfg.at("test").get<std::string>(), config_path));
  if (cfg.contains("pseudo"))
    pseudo =
        nert::load_corpus(resolve(cfg.at("pseudo").get<std::string>(), config_path));

  const int common_words = cfg.value("common_words", 50);
  const nert::WordInventory inv(schema, common_words);
  nert::ModelConfig mc;
  std::string family = "rnnt";
  if (cfg.contains("model")) {
    json mj = cfg.at("model");
    family = mj.value("family", "rnnt");
    mj.erase("family");
    mj["vocab_in"] = inv.vocab_size();
    mj["vocab_out"] = schema.vocab_size();
    mc = nert::ModelConfig::from_json(mj);
  } else {
    mc.vocab_in = inv.vocab_size();
    mc.vocab_out = schema.vocab_size();
  }
  nert::TrainConfig tc =
      cfg.contains("train") ? train_from_json(cfg.at("train")) : nert::TrainConfig{};
  if (have_seed) {
    tc.seed = seed;
    mc.seed = seed * 999983 + 7;
  }
  if (tc.kind == nert::TrainLossKind::Seq2Seq && family == "rnnt") family = "seq2seq";
  if (family != "rnnt" && family != "seq2seq")
    throw ConfigError("unknown model family: " + family);
  if ((family == "seq2seq") != (tc.kind == nert::TrainLossKind::Seq2Seq))
    throw ConfigError("seq2seq family and seq2seq loss kind go together");

  const fs::path dir = prepare_out(out);
  nert::TrainResult result;
  json mc_json;
  if (family == "seq2seq") {
    nert::Seq2SeqModel model(mc);
    result = nert::train(model, tc, schema, labeled, test, pseudo);
    model.save_checkpoint((dir / "model.ckpt").string());
    mc_json = model.config().to_json();
  } else {
    nert::RnntModel model(mc);
    result = nert::train(model, tc, schema, labeled, test, pseudo);
    model.save_checkpoint((dir / "model.ckpt").string());
    mc_json = model.config().to_json();
  }
  mc_json["family"] = family;
  write_text(dir / "model.json", mc_json.dump(2) + "\n");
  write_text(dir / "curve.csv", nert::curve_to_csv(result.curve));
  const json resolved = {{"subcommand", "train"},
                         {"schema", cfg.at("schema")},
                         {"labeled", cfg.at("labeled")},
                         {"test", cfg.value("test", "")},
                         {"pseudo", cfg.value("pseudo", "")},
                         {"common_words", common_words},
                         {"model", mc_json},
                         {"train", train_to_json(tc)}};
  write_text(dir / "config.json", resolved.dump(2) + "\n");
  std::cerr << "final train F1 " << result.final_train_f1 << ", test F1 "
            << result.final_test_f1 << "\n";
  return kOk;
}

struct DecodeInputs {
  nert::OntologySchema schema;
  std::vector<nert::LabeledSequence> corpus;
  LoadedModel model;
  nert::DecodeConfig decode;
};

DecodeInputs decode_inputs(const json& cfg, const std::string& config_path) {
  DecodeInputs in;
  in.schema = nert::OntologySchema::load(
      resolve(cfg.at("schema").get<std::string>(), config_path));
  in.corpus =
      nert::load_corpus(resolve(cfg.at("corpus").get<std::string>(), config_path));
  in.model = load_model(cfg, config_path);
  if (cfg.contains("decode")) in.decode = decode_from_json(cfg.at("decode"));
  return in;
}

json decode_resolved(const char* sub, const json& cfg, const nert::DecodeConfig& d) {
  return {{"subcommand", sub},
          {"schema", cfg.at("schema")},
          {"corpus", cfg.at("corpus")},
          {"model_config", cfg.at("model_config")},
          {"checkpoint", cfg.at("checkpoint")},
          {"decode", decode_to_json(d)}};
}

int cmd_decode(const std::string& config_path, const std::string& out) {
  const json cfg = load_config(config_path);
  DecodeInputs in = decode_inputs(cfg, config_path);
  const fs::path dir = prepare_out(out);
  std::ofstream os(dir / "decodes.jsonl");
  for (const nert::LabeledSequence& seq : in.corpus) {
    const int T = static_cast<int>(seq.tokens.size());
    in.model.visit([&](const auto& model) {
      const auto scorer = nert::detail::make_scorer(model, seq.tokens);
      const auto hyps = nert::beam_search(*scorer, T, in.decode);
      if (hyps.empty()) return;
      const auto ext = nert::extract_spans(hyps[0], in.schema, T);
      os << nert::decode_record(seq.id, hyps[0], ext, in.schema).dump() << "\n";
    });
  }
  write_text(dir / "config.json",
             decode_resolved("decode", cfg, in.decode).dump(2) + "\n");
  return kOk;
}

int cmd_eval(const std::string& config_path, const std::string& out) {
  const json cfg = load_config(config_path);
  DecodeInputs in = decode_inputs(cfg, config_path);
  const std::string avg_name = cfg.value("averaging", "micro");
  if (avg_name != "micro" && avg_name != "macro")
    throw ConfigError("averaging must be micro or macro");
  const nert::Averaging avg =
      avg_name == "macro" ? nert::Averaging::Macro : nert::Averaging::Micro;

  nert::SpanMatchResult local_agg, global_agg;
  for (const nert::LabeledSequence& seq : in.corpus) {
    const int T = static_cast<int>(seq.tokens.size());
    in.model.visit([&](const auto& model) {
      const auto scorer = nert::detail::make_scorer(model, seq.tokens);
      const auto hyps = nert::beam_search(*scorer, T, in.decode);
      std::vector<nert::Span> pred;
      if (!hyps.empty())
        pred = nert::detail::predicted_spans(nert::extract_spans(hyps[0], in.schema, T));
      local_agg += nert::local_f1(pred, seq.spans);
      global_agg += nert::global_f1(pred, seq.spans);
    });
  }
  const nert::Report local = nert::per_ontology_report(local_agg, in.schema, avg);
  const nert::Report global = nert::per_ontology_report(global_agg, in.schema, avg);

  const fs::path dir = prepare_out(out);
  write_text(dir / "report.csv", nert::report_to_csv(local));
  json rj = {{"format", "nert-eval"},
             {"version", 1},
             {"averaging", avg_name},
             {"local", nert::report_to_json(local)},
             {"global", nert::report_to_json(global)}};
  write_text(dir / "report.json", rj.dump(2) + "\n");
  json resolved = decode_resolved("eval", cfg, in.decode);
  resolved["averaging"] = avg_name;
  write_text(dir / "config.json", resolved.dump(2) + "\n");
  std::cerr << "local F1 " << local.rows[0].f1 << ", global F1 " << global.rows[0].f1
            << "\n";
  return kOk;
}

int cmd_pseudo_label(const std::string& config_path, const std::string& out) {
  const json cfg = load_config(config_path);
  DecodeInputs in = decode_inputs(cfg, config_path);
  const nert::PseudoLabelResult result = in.model.visit([&](const auto& model) {
    return nert::pseudo_label(model, in.corpus, in.schema, in.decode);
  });
  const fs::path dir = prepare_out(out);
  nert::save_corpus(result.corpus, (dir / "pseudo.jsonl").string());
  write_text(dir / "config.json",
             decode_resolved("pseudo-label", cfg, in.decode).dump(2) + "\n");
  std::cerr << "kept " << result.corpus.size() << ", skipped " << result.skipped
            << "\n";
  return kOk;
}

int cmd_experiment(const std::string& name, const std::string& config_path,
                   const std::string& out, std::uint64_t seed, bool have_seed) {
  const json overrides = load_config(config_path);
  nert::ExperimentConfig cfg;
  try {
    cfg = nert::ExperimentConfig::from_json(name, overrides);
  } catch (const nert::ParseError& e) {
    throw ConfigError(e.what());
  }
  if (have_seed) cfg.seed = seed;

  const nert::ExperimentResult result = nert::run_experiment(name, cfg);
  const fs::path dir = prepare_out(out);
  for (const auto& [file, text] : result.csv) write_text(dir / file, text);
  write_text(dir / "report.json", result.report.dump(2) + "\n");
  json resolved = cfg.to_json();
  resolved["subcommand"] = "experiment";
  resolved["name"] = name;
  write_text(dir / "config.json", resolved.dump(2) + "\n");

  for (const nert::ExperimentCheck& c : result.checks)
    std::cerr << (c.passed ? "pass" : "FAIL") << ": " << c.name << " (value "
              << c.value << ", threshold " << c.threshold << ")\n";
  if (!result.passed) {
    std::cerr << "experiment " << name << " failed its criteria\n";
    return kCriterionFailure;
  }
  std::cerr << "experiment " << name << " passed\n";
  return kOk;
}

int cmd_verify() {
  bool all = true;
  for (const nert::CheckResult& c : nert::run_verification()) {
    std::printf("%-45s %s  (%s)\n", c.name.c_str(), c.passed ? "PASS" : "FAIL",
                c.detail.c_str());
    all = all && c.passed;
  }
  return all ? kOk : kCriterionFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"nested-entity transducer toolkit"};
  app.require_subcommand(1);

  std::string config, out, experiment_name;
  std::uint64_t seed = 0;
  bool have_seed = false;
  int size = 0;
  bool have_size = false;

  auto add_common = [&](CLI::App* sub, bool needs_out = true) {
    sub->add_option("--config", config, "JSON config file");
    if (needs_out) sub->add_option("--out", out, "output directory")->required();
    sub->add_option("--seed", seed, "seed override")
        ->each([&](const std::string&) { have_seed = true; });
    return sub;
  };

  CLI::App* gen = add_common(app.add_subcommand("gen-data", "generate a synthetic corpus"));
  gen->add_option("--size", size, "number of sequences")
      ->each([&](const std::string&) { have_size = true; });
  add_common(app.add_subcommand("train", "train a model"));
  add_common(app.add_subcommand("decode", "decode a corpus"));
  add_common(app.add_subcommand("eval", "decode and score against gold spans"));
  add_common(app.add_subcommand("pseudo-label", "label a corpus with a trained model"));
  CLI::App* exp =
      add_common(app.add_subcommand("experiment", "run a scripted study"));
  exp->add_option("name", experiment_name,
                  "loss-comparison | delta-sweep | semi-supervised | "
                  "short-vs-long | seq2seq-parity")
      ->required();
  app.add_subcommand("verify", "run the oracle self-checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return e.get_exit_code() == 0 ? kOk : kUsage;
  }

  try {
    if (app.got_subcommand("gen-data"))
      return cmd_gen_data(config, out, seed, have_seed, size, have_size);
    if (app.got_subcommand("train")) return cmd_train(config, out, seed, have_seed);
    if (app.got_subcommand("decode")) return cmd_decode(config, out);
    if (app.got_subcommand("eval")) return cmd_eval(config, out);
    if (app.got_subcommand("pseudo-label")) return cmd_pseudo_label(config, out);
    if (app.got_subcommand("experiment"))
      return cmd_experiment(experiment_name, config, out, seed, have_seed);
    if (app.got_subcommand("verify")) return cmd_verify();
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const nert::ContractViolation& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const json::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const nert::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kNumericalError;
  } catch (const nert::NoAdmissiblePath& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kNumericalError;
  } catch (const std::exception& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kDataError;
  }
  return kUsage;
}
