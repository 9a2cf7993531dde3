#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <limits>

#include "nert/trainer.hpp"

using namespace nert;

namespace {

ModelConfig small_model(const OntologySchema& schema, const WordInventory& inv,
                        int hidden = 16) {
  ModelConfig mc;
  mc.hidden = hidden;
  mc.embed = hidden;
  mc.layers = 2;
  mc.vocab_in = inv.vocab_size();
  mc.vocab_out = schema.vocab_size();
  mc.seed = 424242;
  return mc;
}

struct Fixture {
  OntologySchema schema = OntologySchema::standard(2);
  WordInventory inv{schema};
  std::vector<LabeledSequence> corpus;

  explicit Fixture(int size, double mean_len = 40, std::uint64_t seed = 11) {
    GenConfig gc;
    gc.size = size;
    gc.min_len = 20;
    gc.mean_len = mean_len;
    gc.max_len = 120;
    gc.spans_per_100 = 8.0;
    gc.seed = seed;
    corpus = generate_corpus(schema, gc);
  }
};

bool same_curve(const TrainingCurve& a, const TrainingCurve& b) {
  if (a.points.size() != b.points.size()) return false;
  for (std::size_t i = 0; i < a.points.size(); ++i) {
    const CurvePoint &p = a.points[i], &q = b.points[i];
    if (p.step != q.step || p.nll != q.nll || p.train_f1 != q.train_f1 ||
        p.test_f1 != q.test_f1)
      return false;
  }
  return true;
}

}  // namespace

TEST_CASE("zero epochs: untouched model, empty curve") {
  Fixture fx(3);
  RnntModel model(small_model(fx.schema, fx.inv, 8));
  const auto before = model.params().tensors().front().value;
  TrainConfig tc;
  tc.epochs = 0;
  tc.seg_min = 20;
  tc.seg_max = 120;
  const TrainResult r = train(model, tc, fx.schema, fx.corpus, {});
  CHECK(r.curve.points.empty());
  CHECK((model.params().tensors().front().value - before).norm() == 0.0);
}

TEST_CASE("config validation") {
  TrainConfig tc;
  tc.delta = 2;  // without constrained mode
  CHECK_THROWS_AS(tc.validate(), ContractViolation);
  tc = TrainConfig{};
  tc.seg_min = 10;
  tc.seg_max = 5;
  CHECK_THROWS_AS(tc.validate(), ContractViolation);
  tc = TrainConfig{};
  tc.batch = 0;
  CHECK_THROWS_AS(tc.validate(), ContractViolation);
}

TEST_CASE("single-sequence overfit: NLL decreases monotonically over 50 steps") {
  Fixture fx(1, 30);
  RnntModel model(small_model(fx.schema, fx.inv, 8));
  TrainConfig tc;
  tc.kind = TrainLossKind::Fixed;
  tc.epochs = 50;
  tc.batch = 1;
  tc.evals = 50;
  tc.eval_train_subset = 0;  // curve tracks nll only
  tc.seg_min = 120;          // whole sequence every step
  tc.seg_max = 120;
  tc.lr = 1e-3;
  tc.seed = 3;
  const TrainResult r = train(model, tc, fx.schema, fx.corpus, {});
  REQUIRE(r.curve.points.size() == 50);
  for (std::size_t i = 1; i < r.curve.points.size(); ++i)
    CHECK(r.curve.points[i].nll < r.curve.points[i - 1].nll + 1e-9);
}

TEST_CASE("fixed and constrained(0) trace identical curves") {
  Fixture fx(10);
  TrainConfig tc;
  tc.epochs = 4;
  tc.evals = 4;
  tc.eval_train_subset = 5;
  tc.seg_min = 20;
  tc.seg_max = 40;
  tc.seed = 7;
  tc.kind = TrainLossKind::Fixed;
  RnntModel a(small_model(fx.schema, fx.inv, 8));
  const TrainResult ra = train(a, tc, fx.schema, fx.corpus, {});
  tc.kind = TrainLossKind::Constrained;
  tc.delta = 0;
  RnntModel b(small_model(fx.schema, fx.inv, 8));
  const TrainResult rb = train(b, tc, fx.schema, fx.corpus, {});
  CHECK(same_curve(ra.curve, rb.curve));
}

TEST_CASE("constrained with a huge delta traces the unconstrained curve") {
  Fixture fx(8);
  TrainConfig tc;
  tc.epochs = 3;
  tc.evals = 3;
  tc.eval_train_subset = 4;
  tc.seg_min = 20;
  tc.seg_max = 40;
  tc.seed = 13;
  tc.kind = TrainLossKind::Unconstrained;
  RnntModel a(small_model(fx.schema, fx.inv, 8));
  const TrainResult ra = train(a, tc, fx.schema, fx.corpus, {});
  tc.kind = TrainLossKind::Constrained;
  tc.delta = 200;  // exceeds every (T, U) in the fixture
  RnntModel b(small_model(fx.schema, fx.inv, 8));
  const TrainResult rb = train(b, tc, fx.schema, fx.corpus, {});
  CHECK(same_curve(ra.curve, rb.curve));
}

TEST_CASE("training is deterministic in config and seed") {
  Fixture fx(10);
  TrainConfig tc;
  tc.epochs = 3;
  tc.evals = 2;
  tc.eval_train_subset = 5;
  tc.seg_min = 20;
  tc.seg_max = 40;
  tc.seed = 21;
  RnntModel a(small_model(fx.schema, fx.inv, 8));
  RnntModel b(small_model(fx.schema, fx.inv, 8));
  const TrainResult ra = train(a, tc, fx.schema, fx.corpus, {});
  const TrainResult rb = train(b, tc, fx.schema, fx.corpus, {});
  CHECK(same_curve(ra.curve, rb.curve));
  CHECK(curve_to_csv(ra.curve) == curve_to_csv(rb.curve));
}

TEST_CASE("divergence aborts with the failing step index") {
  Fixture fx(4);
  RnntModel model(small_model(fx.schema, fx.inv, 8));
  model.params().tensors().front().value(0, 0) =
      std::numeric_limits<double>::quiet_NaN();
  TrainConfig tc;
  tc.epochs = 1;
  tc.seg_min = 20;
  tc.seg_max = 40;
  try {
    train(model, tc, fx.schema, fx.corpus, {});
    FAIL("expected a numerical error");
  } catch (const NumericalError& e) {
    CHECK(std::string(e.what()).find("step 0") != std::string::npos);
  }
}

TEST_CASE("pseudo-labeling") {
  Fixture fx(6, 30);
  RnntModel model(small_model(fx.schema, fx.inv, 8));
  DecodeConfig dc;
  SECTION("empty unlabeled set gives an empty result") {
    const PseudoLabelResult r = pseudo_label(model, {}, fx.schema, dc);
    CHECK(r.corpus.empty());
    CHECK(r.skipped == 0);
  }
  SECTION("output is marked, well-formed, and round-trips through the corpus format") {
    const PseudoLabelResult r = pseudo_label(model, fx.corpus, fx.schema, dc);
    REQUIRE(r.corpus.size() + static_cast<std::size_t>(r.skipped) == fx.corpus.size());
    for (std::size_t i = 0; i < r.corpus.size(); ++i) {
      CHECK(r.corpus[i].id.rfind("pseudo:", 0) == 0);
      for (const Span& s : r.corpus[i].spans) {
        CHECK(s.start >= 0);
        CHECK(s.start <= s.end);
        CHECK(s.end < static_cast<int>(r.corpus[i].tokens.size()));
        CHECK(fx.schema.is_begin(s.label));
      }
    }
    const std::string path = "pseudo_test.jsonl";
    save_corpus(r.corpus, path);
    CHECK(load_corpus(path) == r.corpus);
    std::remove(path.c_str());
  }
  SECTION("pseudo-labeling is deterministic") {
    const PseudoLabelResult a = pseudo_label(model, fx.corpus, fx.schema, dc);
    const PseudoLabelResult b = pseudo_label(model, fx.corpus, fx.schema, dc);
    CHECK(a.corpus == b.corpus);
  }
}

TEST_CASE("pseudo fold-in extends, never replaces, the labeled pool") {
  Fixture fx(9);
  Fixture extra(5, 40, 99);
  TrainConfig tc;
  tc.epochs = 1;
  tc.evals = 0;
  tc.batch = 1;  // steps per epoch = pool size
  tc.seg_min = 20;
  tc.seg_max = 40;
  RnntModel a(small_model(fx.schema, fx.inv, 8));
  const TrainResult ra = train(a, tc, fx.schema, fx.corpus, {});
  RnntModel b(small_model(fx.schema, fx.inv, 8));
  const TrainResult rb = train(b, tc, fx.schema, fx.corpus, {}, extra.corpus);
  REQUIRE(!ra.curve.points.empty());
  REQUIRE(!rb.curve.points.empty());
  CHECK(rb.curve.points.back().step ==
        ra.curve.points.back().step + static_cast<long>(extra.corpus.size()));
}

TEST_CASE("a short fixed-alignment run learns the trigger-word corpus") {
  Fixture fx(30, 40, 55);
  RnntModel model(small_model(fx.schema, fx.inv, 16));
  TrainConfig tc;
  tc.kind = TrainLossKind::Fixed;
  tc.epochs = 150;
  tc.evals = 1;
  tc.eval_train_subset = 30;
  tc.seg_min = 20;
  tc.seg_max = 60;
  tc.seed = 17;
  const double before =
      evaluate_local_f1(model, fx.corpus, fx.schema, tc.decode, 30);
  const TrainResult r = train(model, tc, fx.schema, fx.corpus, {});
  CHECK(r.final_train_f1 > before + 0.3);
  CHECK(r.final_train_f1 > 0.5);
}
