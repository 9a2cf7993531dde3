#include <catch2/catch_amalgamated.hpp>

#include "nert/experiments.hpp"

using namespace nert;

namespace {

ExperimentConfig tiny(const std::string& name) {
  ExperimentConfig cfg = ExperimentConfig::defaults(name);
  cfg.labeled = 6;
  cfg.unlabeled = cfg.unlabeled > 0 ? 4 : 0;
  cfg.test = 4;
  cfg.model.hidden = 8;
  cfg.model.embed = 8;
  cfg.train.epochs = 2;
  cfg.train.evals = 1;
  cfg.train.eval_train_subset = 4;
  cfg.deltas = {0, 2};
  if (name == "short-vs-long") {
    cfg.gen.min_len = 340;  // keep the long-segment arm satisfiable
    cfg.labeled = 3;
    cfg.test = 2;
  }
  return cfg;
}

}  // namespace

TEST_CASE("unknown experiment names are rejected") {
  CHECK_THROWS_AS(ExperimentConfig::defaults("nope"), ContractViolation);
  CHECK_THROWS_AS(run_experiment("nope", ExperimentConfig::defaults("loss-comparison")),
                  ContractViolation);
  CHECK_THROWS_AS(
      ExperimentConfig::from_json("loss-comparison", {{"not_a_key", 1}}),
      ParseError);
}

TEST_CASE("config overrides apply on top of the named defaults") {
  const auto cfg = ExperimentConfig::from_json(
      "loss-comparison",
      {{"labeled", 12}, {"train", {{"epochs", 3}}}, {"gen", {{"mean_len", 42.0}}}});
  CHECK(cfg.labeled == 12);
  CHECK(cfg.test == ExperimentConfig::defaults("loss-comparison").test);
  CHECK(cfg.train.epochs == 3);
  CHECK(cfg.gen.mean_len == 42.0);
}

TEST_CASE("every study produces curves, a versioned report, and a verdict") {
  for (const std::string name : {"loss-comparison", "delta-sweep", "semi-supervised",
                                 "short-vs-long", "seq2seq-parity"}) {
    INFO(name);
    const ExperimentResult r = run_experiment(name, tiny(name));
    CHECK(r.name == name);
    CHECK(!r.csv.empty());
    for (const auto& [file, text] : r.csv) {
      CHECK(file.rfind("curve_", 0) == 0);
      CHECK(text.rfind("step,nll,train_f1,test_f1\n", 0) == 0);
    }
    CHECK(r.report.at("format") == "nert-experiment");
    CHECK(r.report.at("version") == 1);
    CHECK(r.report.at("name") == name);
    CHECK(!r.checks.empty());
    CHECK(r.report.at("passed").is_boolean());
  }
}

TEST_CASE("experiment runs are deterministic in their config") {
  const ExperimentConfig cfg = tiny("loss-comparison");
  const ExperimentResult a = run_experiment("loss-comparison", cfg);
  const ExperimentResult b = run_experiment("loss-comparison", cfg);
  REQUIRE(a.csv.size() == b.csv.size());
  for (const auto& [file, text] : a.csv) CHECK(b.csv.at(file) == text);
  CHECK(a.report == b.report);
}

TEST_CASE("the seed steers every arm of a study") {
  ExperimentConfig cfg = tiny("loss-comparison");
  const ExperimentResult a = run_experiment("loss-comparison", cfg);
  cfg.seed = 2;
  const ExperimentResult b = run_experiment("loss-comparison", cfg);
  bool any_difference = false;
  for (const auto& [file, text] : a.csv)
    any_difference = any_difference || b.csv.at(file) != text;
  CHECK(any_difference);
}
