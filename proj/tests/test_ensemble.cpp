#include <doctest.h>

#include "test_util.hpp"

#include "molprop/ensemble.hpp"
#include "molprop/serialize.hpp"
#include "molprop/train.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

using namespace molprop;
using namespace testutil;

namespace {

EnsembleSpec random_spec(Rng& rng, int m) {
  EnsembleSpec spec;
  Real sum = 0;
  for (int i = 0; i < m; ++i) {
    const Real w = rng.uniform(0.1, 2.0);
    spec.entries.push_back({"ckpt" + std::to_string(i), w});
    sum += w;
  }
  spec.normalizer = sum;  // same accumulation order as validate_spec
  return spec;
}

EnsembleSpec submission_spec() {
  EnsembleSpec spec;
  int k = 0;
  for (Real w : submission_graphormer_weights()) {
    spec.entries.push_back({"graphormer" + std::to_string(k++), w});
  }
  k = 0;
  for (Real w : submission_expc_weights()) {
    spec.entries.push_back({"expc" + std::to_string(k++), w});
  }
  spec.normalizer = kSubmissionNormalizer;
  return spec;
}

Vec oracle_predict(const Mat& preds, const EnsembleSpec& spec) {
  Vec out = Vec::Zero(preds.cols());
  for (Eigen::Index j = 0; j < preds.cols(); ++j) {
    Real acc = 0;
    for (std::size_t i = 0; i < spec.entries.size(); ++i) {
      acc += spec.entries[i].weight * preds(static_cast<Eigen::Index>(i), j);
    }
    out(j) = acc / spec.normalizer;
  }
  return out;
}

}  // namespace

TEST_CASE("validate_spec enforces positivity and the weight-sum identity") {
  EnsembleSpec ok;
  ok.entries = {{"a", 0.5}, {"b", 0.5}};
  ok.normalizer = 1.0;
  CHECK(&validate_spec(ok) == &ok);

  CHECK_NOTHROW(validate_spec(submission_spec()));

  SUBCASE("no entries") {
    EnsembleSpec empty;
    empty.normalizer = 1.0;
    CHECK_THROWS_AS(validate_spec(empty), ConfigError);
  }
  SUBCASE("nonpositive weight") {
    EnsembleSpec bad = ok;
    bad.entries[1].weight = 0.0;
    CHECK_THROWS_AS(validate_spec(bad), ConfigError);
    bad.entries[1].weight = -0.1;
    CHECK_THROWS_AS(validate_spec(bad), ConfigError);
  }
  SUBCASE("normalizer off the weight sum") {
    EnsembleSpec bad = ok;
    bad.normalizer = 0.9;
    CHECK_THROWS_AS(validate_spec(bad), ConfigError);
    bad.normalizer = 1.0 + 1e-11;
    CHECK_THROWS_AS(validate_spec(bad), ConfigError);
    bad.normalizer = 1.0 + 1e-13;  // inside the 1e-12 gate
    CHECK_NOTHROW(validate_spec(bad));
  }
}

TEST_CASE("ensemble_predict matches a loop oracle") {
  Rng rng(71);
  for (int trial = 0; trial < 100; ++trial) {
    const int m = static_cast<int>(rng.uniform_int(1, 20));
    const int n = static_cast<int>(rng.uniform_int(1, 12));
    const EnsembleSpec spec = random_spec(rng, m);
    const Mat preds = random_mat(rng, m, n, -10.0, 10.0);
    CHECK(max_abs_diff(Mat(ensemble_predict(preds, spec)), Mat(oracle_predict(preds, spec))) <=
          1e-12);
  }

  SUBCASE("submission weights against the oracle") {
    const EnsembleSpec spec = submission_spec();
    const Mat preds = random_mat(rng, 18, 40, -10.0, 10.0);
    CHECK(max_abs_diff(Mat(ensemble_predict(preds, spec)), Mat(oracle_predict(preds, spec))) <=
          1e-12);
  }
  SUBCASE("row count mismatch") {
    const EnsembleSpec spec = random_spec(rng, 3);
    CHECK_THROWS_AS(ensemble_predict(random_mat(rng, 4, 5), spec), ShapeError);
  }
}

TEST_CASE("hand-checked weighted average") {
  EnsembleSpec spec;
  spec.entries = {{"a", 1.0}, {"b", 3.0}};
  spec.normalizer = 4.0;
  Mat preds(2, 1);
  preds << 0.0, 4.0;
  const Vec out = ensemble_predict(preds, spec);
  CHECK(out(0) == 3.0);
}

TEST_CASE("a constant input comes back out") {
  Rng rng(72);

  SUBCASE("dyadic weights reproduce the constant bit for bit") {
    EnsembleSpec spec;
    spec.entries = {{"a", 0.5}, {"b", 0.25}, {"c", 0.25}};
    spec.normalizer = 1.0;
    for (int trial = 0; trial < 100; ++trial) {
      const Real v = rng.uniform(-50.0, 50.0);
      const Vec out = ensemble_predict(Mat::Constant(3, 4, v), spec);
      for (Eigen::Index j = 0; j < 4; ++j) CHECK(out(j) == v);
    }
  }
  SUBCASE("the submission weights land within a few ulps") {
    // 0.05/0.08/0.03 are not dyadic, so the weighted sum and the final
    // division each round; the round trip is exact in value up to ~3 ulps.
    const EnsembleSpec spec = submission_spec();
    for (int trial = 0; trial < 100; ++trial) {
      const Real v = rng.uniform(-50.0, 50.0);
      const Vec out = ensemble_predict(Mat::Constant(18, 3, v), spec);
      for (Eigen::Index j = 0; j < 3; ++j) {
        CHECK(std::abs(out(j) - v) <= 1e-15 * std::abs(v));
      }
    }
  }
}

TEST_CASE("output stays inside the prediction envelope") {
  Rng rng(73);
  for (int trial = 0; trial < 1000; ++trial) {
    const int m = static_cast<int>(rng.uniform_int(1, 12));
    const int n = static_cast<int>(rng.uniform_int(1, 6));
    const EnsembleSpec spec = random_spec(rng, m);
    const Mat preds = random_mat(rng, m, n, -100.0, 100.0);
    const Vec out = ensemble_predict(preds, spec);
    for (Eigen::Index j = 0; j < n; ++j) {
      CHECK(out(j) >= preds.col(j).minCoeff() - 1e-12);
      CHECK(out(j) <= preds.col(j).maxCoeff() + 1e-12);
    }
  }
}

TEST_CASE("entry order and joint rescaling do not matter") {
  Rng rng(74);
  const EnsembleSpec spec = random_spec(rng, 9);
  const Mat preds = random_mat(rng, 9, 5, -10.0, 10.0);
  const Vec base = ensemble_predict(preds, spec);

  SUBCASE("permuting entries with their rows") {
    std::vector<int> perm = random_permutation(9, rng);
    EnsembleSpec shuffled;
    shuffled.normalizer = spec.normalizer;
    Mat rows(9, 5);
    for (int i = 0; i < 9; ++i) {
      shuffled.entries.push_back(spec.entries[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])]);
      rows.row(i) = preds.row(perm[static_cast<std::size_t>(i)]);
    }
    // the weight sum moves by a rounding error when reordered; keep it valid
    Real sum = 0;
    for (const auto& e : shuffled.entries) sum += e.weight;
    shuffled.normalizer = sum;
    const Vec out = ensemble_predict(rows, shuffled);
    for (Eigen::Index j = 0; j < 5; ++j) {
      CHECK(std::abs(out(j) - base(j)) <= 1e-13 * std::max<Real>(1.0, std::abs(base(j))));
    }
  }
  SUBCASE("doubling all weights and the normalizer is exact") {
    EnsembleSpec doubled = spec;
    for (auto& e : doubled.entries) e.weight *= 2.0;
    doubled.normalizer *= 2.0;
    CHECK(same_bits(Mat(ensemble_predict(preds, doubled)), Mat(base)));
  }
  SUBCASE("linear in the predictions") {
    CHECK(same_bits(Mat(ensemble_predict(Mat(2.0 * preds), spec)), Mat(Vec(2.0 * base))));
    const Mat other = random_mat(rng, 9, 5, -10.0, 10.0);
    const Vec lhs = ensemble_predict(Mat(preds + other), spec);
    const Vec rhs = base + ensemble_predict(other, spec);
    CHECK(max_abs_diff(Mat(lhs), Mat(rhs)) <= 1e-12);
  }
}

TEST_CASE("spec files round trip and the shipped spec is valid") {
  const auto dir = scratch_dir("ensemble_spec");
  Rng rng(75);
  const EnsembleSpec spec = random_spec(rng, 7);
  const std::string path = (dir / "spec.json").string();
  write_ensemble_spec(path, spec);
  const EnsembleSpec back = load_ensemble_spec(path);
  REQUIRE(back.entries.size() == spec.entries.size());
  CHECK(back.normalizer == spec.normalizer);
  for (std::size_t i = 0; i < spec.entries.size(); ++i) {
    CHECK(back.entries[i].checkpoint == spec.entries[i].checkpoint);
    CHECK(back.entries[i].weight == spec.entries[i].weight);
  }

  SUBCASE("shipped submission spec") {
    const auto shipped = std::filesystem::path(__FILE__).parent_path().parent_path() /
                         "configs" / "ensemble_paper.json";
    REQUIRE(std::filesystem::exists(shipped));
    const EnsembleSpec sub = load_ensemble_spec(shipped.string());
    CHECK(sub.normalizer == kSubmissionNormalizer);
    REQUIRE(sub.entries.size() == 18);
    const auto gw = submission_graphormer_weights();
    const auto ew = submission_expc_weights();
    for (std::size_t i = 0; i < 10; ++i) {
      CHECK(sub.entries[i].weight == gw[i]);
      CHECK(sub.entries[i].checkpoint.find("graphormer") != std::string::npos);
    }
    for (std::size_t i = 0; i < 8; ++i) {
      CHECK(sub.entries[10 + i].weight == ew[i]);
      CHECK(sub.entries[10 + i].checkpoint.find("expc") != std::string::npos);
    }
  }
  SUBCASE("unreadable and malformed files") {
    CHECK_THROWS_AS(load_ensemble_spec((dir / "nope.json").string()), DataError);
    std::ofstream bad(dir / "bad.json");
    bad << "{ not json";
    bad.close();
    CHECK_THROWS_AS(load_ensemble_spec((dir / "bad.json").string()), DataError);
  }
}

TEST_CASE("run_inference composes checkpoint loading, prediction, and averaging") {
  const auto dir = scratch_dir("ensemble_infer");
  const Dataset ds = small_corpus(8, 761, 3, 7);

  const GraphormerConfig gcfg = graphormer_mini_config();
  const ExpCConfig ecfg = expc_mini_config();
  Rng rng(762);
  ParameterStore gstore = graphormer_init(gcfg, ds.schema, 11);
  gstore.at("head_w") = init_normal(rng, gcfg.d_model, 1, 0.5);
  ParameterStore estore = expc_init(ecfg, ds.schema, 12);
  estore.at("head_w") = init_normal(rng, ecfg.d_model, 1, 0.5);

  const std::string gpath = (dir / "g.ckpt").string();
  const std::string epath = (dir / "e.ckpt").string();
  save_checkpoint(gpath, checkpoint_meta_graphormer(gcfg, ds.schema, 11), gstore);
  save_checkpoint(epath, checkpoint_meta_expc(ecfg, ds.schema, 12), estore);

  const auto gfeats = featurize_all(ds.graphs, ds.schema, gcfg.rbf(), gcfg.spatial, 1);
  const auto efeats = featurize_all(ds.graphs, ds.schema, make_rbf_config(), SpatialMode::kHop, 1);
  GraphRefs grefs, erefs;
  for (const auto& f : gfeats) grefs.push_back(&f);
  for (const auto& f : efeats) erefs.push_back(&f);
  const Vec gp = predict_graphormer(gcfg, gstore, grefs, 4);
  const Vec ep = predict_expc(ecfg, estore, erefs, 4);

  EnsembleSpec spec;
  spec.entries = {{gpath, 0.25}, {epath, 0.75}};
  spec.normalizer = 1.0;

  const InferenceResult res = run_inference(spec, ds, 4, 1);
  REQUIRE(res.ids.size() == ds.graphs.size());
  for (std::size_t i = 0; i < ds.graphs.size(); ++i) CHECK(res.ids[i] == ds.graphs[i].id);

  Mat preds(2, gp.size());
  preds.row(0) = gp.transpose();
  preds.row(1) = ep.transpose();
  CHECK(max_abs_diff(Mat(res.pred), Mat(ensemble_predict(preds, spec))) <= 1e-12);

  SUBCASE("a one-entry spec is just that model") {
    EnsembleSpec solo;
    solo.entries = {{gpath, 1.0}};
    solo.normalizer = 1.0;
    CHECK(same_bits(Mat(run_inference(solo, ds, 4, 1).pred), Mat(gp)));
  }
  SUBCASE("duplicating an entry at half weight changes nothing") {
    EnsembleSpec dup;
    dup.entries = {{gpath, 0.5}, {gpath, 0.5}};
    dup.normalizer = 1.0;
    CHECK(same_bits(Mat(run_inference(dup, ds, 4, 1).pred), Mat(gp)));
  }
  SUBCASE("batch size does not leak into predictions") {
    // tolerance, not bitwise: Eigen's GEMM blocking depends on batch shape
    const InferenceResult r2 = run_inference(spec, ds, 2, 1);
    const InferenceResult r32 = run_inference(spec, ds, 32, 1);
    CHECK(max_abs_diff(Mat(r2.pred), Mat(res.pred)) <= 1e-12);
    CHECK(max_abs_diff(Mat(r32.pred), Mat(res.pred)) <= 1e-12);
  }
  SUBCASE("empty dataset gives empty output") {
    Dataset empty;
    empty.schema = ds.schema;
    const InferenceResult r = run_inference(spec, empty, 4, 1);
    CHECK(r.ids.empty());
    CHECK(r.pred.size() == 0);
  }
  SUBCASE("missing checkpoint names the entry") {
    EnsembleSpec bad = spec;
    bad.entries[0].checkpoint = (dir / "missing.ckpt").string();
    try {
      run_inference(bad, ds, 4, 1);
      FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
      CHECK(std::string(e.what()).find("entry 0") != std::string::npos);
    }
  }
  SUBCASE("schema mismatch is an entry error") {
    DatasetSchema other = ds.schema;
    other.atom_vocab.push_back(5);
    // a model initialized for a different schema cannot score this dataset
    ParameterStore wrong = expc_init(ecfg, other, 3);
    const std::string wpath = (dir / "wrong.ckpt").string();
    save_checkpoint(wpath, checkpoint_meta_expc(ecfg, other, 3), wrong);
    EnsembleSpec bad;
    bad.entries = {{wpath, 1.0}};
    bad.normalizer = 1.0;
    CHECK_THROWS_AS(run_inference(bad, ds, 4, 1), ConfigError);
  }
  SUBCASE("numerical failures are not relabeled") {
    ParameterStore broken = gstore;
    broken.at("l0.w1")(0, 0) = std::numeric_limits<Real>::infinity();
    const std::string bpath = (dir / "broken.ckpt").string();
    save_checkpoint(bpath, checkpoint_meta_graphormer(gcfg, ds.schema, 11), broken);
    EnsembleSpec bad;
    bad.entries = {{bpath, 1.0}};
    bad.normalizer = 1.0;
    CHECK_THROWS_AS(run_inference(bad, ds, 4, 1), NumericalError);
  }
}
