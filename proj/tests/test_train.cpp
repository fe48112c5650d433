#include <doctest.h>

#include "test_util.hpp"

#include "molprop/train.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <string>
#include <vector>

using namespace molprop;
using namespace testutil;

namespace {

GraphRefs refs_of(const std::vector<FeaturizedGraph>& feats) {
  GraphRefs refs;
  for (const FeaturizedGraph& fg : feats) refs.push_back(&fg);
  return refs;
}

}  // namespace

TEST_CASE("mae matches the definition and mae_loss differentiates to signs") {
  Vec pred(4), target(4);
  pred << 1.0, -2.0, 0.5, 3.0;
  target << 0.5, -2.5, 1.5, 3.0;
  CHECK(mae(pred, target) == doctest::Approx((0.5 + 0.5 + 1.0 + 0.0) / 4.0).epsilon(1e-15));

  ad::Tape t;
  ad::Value p = t.leaf(Mat(pred));
  ad::Value loss = mae_loss(p, target);
  CHECK(loss.scalar() == doctest::Approx(0.5).epsilon(1e-15));
  t.backward(loss);
  Vec want(4);
  want << 0.25, 0.25, -0.25, 0.0;  // sign(err)/n, zero at the tie
  CHECK(max_abs_diff(Mat(p.grad()), Mat(want)) == 0.0);
}

TEST_CASE("warmup/decay schedule hits its anchors exactly") {
  const GraphormerTrainConfig cfg = graphormer_paper_train_config();
  REQUIRE(cfg.peak_lr == 2e-4);
  REQUIRE(cfg.warmup_steps == 10000);
  REQUIRE(cfg.max_steps == 1500000);

  CHECK(lr_linear_warmup_decay(0, cfg) == 0.0);
  CHECK(lr_linear_warmup_decay(10000, cfg) == 2e-4);       // peak, bit for bit
  CHECK(lr_linear_warmup_decay(5000, cfg) == 1e-4);        // 2e-4 * 0.5 is exact
  CHECK(lr_linear_warmup_decay(1500000, cfg) == 0.0);
  CHECK(lr_linear_warmup_decay(755000, cfg) ==
        cfg.peak_lr * (Real(1500000 - 755000) / Real(1500000 - 10000)));

  CHECK(lr_linear_warmup_decay(400, cfg) < lr_linear_warmup_decay(800, cfg));
  CHECK(lr_linear_warmup_decay(20000, cfg) > lr_linear_warmup_decay(1400000, cfg));

  CHECK_THROWS_AS(lr_linear_warmup_decay(-1, cfg), ConfigError);
  CHECK_THROWS_AS(lr_linear_warmup_decay(1500001, cfg), ConfigError);
}

TEST_CASE("step decay multiplies down every 20 epochs") {
  const ExpCTrainConfig cfg = expc_paper_train_config();
  REQUIRE(cfg.peak_lr == 1e-4);
  REQUIRE(cfg.lr_decay_rate == 0.75);
  REQUIRE(cfg.lr_decay_step == 20);

  CHECK(lr_step_decay(0, cfg) == 1e-4);
  CHECK(lr_step_decay(19, cfg) == 1e-4);
  const Real lr20 = lr_step_decay(20, cfg);
  CHECK(lr20 == cfg.peak_lr * 0.75);  // the rule itself, exact
  // the decimal literal 7.5e-5 rounds differently in the last bit; the
  // product is within one ulp of it
  CHECK(lr20 == doctest::Approx(7.5e-5).epsilon(1e-15));
  CHECK(lr_step_decay(39, cfg) == lr20);
  CHECK(lr_step_decay(40, cfg) == lr20 * 0.75);
  CHECK(lr_step_decay(45, cfg) == (cfg.peak_lr * 0.75) * 0.75);
  CHECK_THROWS_AS(lr_step_decay(-1, cfg), ConfigError);
}

TEST_CASE("adam_step reproduces a scalar reference over ten steps") {
  Rng rng(611);
  ParameterStore params;
  params.add("a", random_mat(rng, 3, 4));
  params.add("b", random_mat(rng, 2, 2));
  std::vector<Mat> ref = {params.at("a"), params.at("b")};
  std::vector<Mat> ref_m = {Mat::Zero(3, 4), Mat::Zero(2, 2)};
  std::vector<Mat> ref_v = {Mat::Zero(3, 4), Mat::Zero(2, 2)};

  AdamState state = adam_init(params);
  const Real lr = 3e-3, b1 = 0.9, b2 = 0.999, eps = 1e-8;
  for (int step = 1; step <= 10; ++step) {
    std::vector<Mat> grads = {random_mat(rng, 3, 4), random_mat(rng, 2, 2)};
    adam_step(params, grads, state, lr, b1, b2, eps);

    const Real bc1 = 1.0 - std::pow(b1, static_cast<Real>(step));
    const Real bc2 = 1.0 - std::pow(b2, static_cast<Real>(step));
    for (std::size_t k = 0; k < ref.size(); ++k) {
      for (Eigen::Index i = 0; i < ref[k].rows(); ++i) {
        for (Eigen::Index j = 0; j < ref[k].cols(); ++j) {
          Real& m = ref_m[k](i, j);
          Real& v = ref_v[k](i, j);
          const Real g = grads[k](i, j);
          m = b1 * m + (1.0 - b1) * g;
          v = b2 * v + (1.0 - b2) * g * g;
          ref[k](i, j) -= lr * (m / bc1) / (std::sqrt(v / bc2) + eps);
        }
      }
    }
  }
  CHECK(state.step == 10);
  CHECK(max_abs_diff(params.at("a"), ref[0]) <= 1e-12);
  CHECK(max_abs_diff(params.at("b"), ref[1]) <= 1e-12);
}

TEST_CASE("gradient clipping caps the global norm at the threshold") {
  Rng rng(612);
  std::vector<Mat> grads = {random_mat(rng, 4, 4, -3.0, 3.0), random_mat(rng, 2, 8, -3.0, 3.0)};
  Real ss = 0;
  for (const Mat& g : grads) {
    for (Eigen::Index i = 0; i < g.rows(); ++i) {
      for (Eigen::Index j = 0; j < g.cols(); ++j) ss += g(i, j) * g(i, j);
    }
  }
  const Real pre = std::sqrt(ss);
  REQUIRE(pre > 5.0);

  SUBCASE("above the threshold") {
    auto clipped = grads;
    const Real reported = clip_grad_norm(clipped, 5.0);
    CHECK(reported == doctest::Approx(pre).epsilon(1e-12));
    Real ss2 = 0;
    for (const Mat& g : clipped) ss2 += g.squaredNorm();
    CHECK(std::sqrt(ss2) == doctest::Approx(5.0).epsilon(1e-9));
  }
  SUBCASE("below the threshold nothing moves") {
    auto small = grads;
    for (Mat& g : small) g *= 1e-3;
    auto copy = small;
    const Real reported = clip_grad_norm(small, 5.0);
    CHECK(reported == doctest::Approx(pre * 1e-3).epsilon(1e-12));
    for (std::size_t i = 0; i < small.size(); ++i) CHECK(same_bits(small[i], copy[i]));
  }
  SUBCASE("non-positive threshold disables clipping") {
    auto copy = grads;
    const Real reported = clip_grad_norm(copy, 0.0);
    CHECK(reported == doctest::Approx(pre).epsilon(1e-12));
    for (std::size_t i = 0; i < copy.size(); ++i) CHECK(same_bits(copy[i], grads[i]));
  }
}

TEST_CASE("kfold_split partitions ids into balanced folds") {
  std::vector<std::string> ids;
  for (int i = 0; i < 37; ++i) ids.push_back("mol" + std::to_string(i));

  const FoldPlan plan = kfold_split(ids, 8, 42);
  REQUIRE(plan.n_folds == 8);
  std::set<std::string> seen;
  std::vector<int> sizes(8, 0);
  for (int f = 0; f < 8; ++f) {
    for (const std::string& id : plan.ids_in_fold(f)) {
      CHECK(seen.insert(id).second);
      CHECK(plan.fold_of(id) == f);
      ++sizes[static_cast<std::size_t>(f)];
    }
    CHECK(plan.ids_in_fold(f).size() + plan.ids_not_in_fold(f).size() == ids.size());
  }
  CHECK(seen.size() == ids.size());
  const auto [lo, hi] = std::minmax_element(sizes.begin(), sizes.end());
  CHECK(*hi - *lo <= 1);

  const FoldPlan again = kfold_split(ids, 8, 42);
  CHECK(again.ids == plan.ids);
  const FoldPlan other = kfold_split(ids, 8, 43);
  CHECK(other.ids != plan.ids);

  CHECK_THROWS_AS(kfold_split(ids, 0, 1), ConfigError);
}

TEST_CASE("fit_expc is bit-deterministic in the seed") {
  const ExpCConfig cfg = expc_mini_config();
  ExpCTrainConfig tcfg = expc_mini_train_config();
  tcfg.max_epochs = 8;
  tcfg.eval_interval = 4;
  tcfg.batch_size = 4;

  const Dataset ds = small_corpus(12, 913, 3, 7);
  const auto feats = featurize_all(ds.graphs, ds.schema, make_rbf_config(8), SpatialMode::kHop, 1);
  const GraphRefs refs = refs_of(feats);

  const FitResult a = fit_expc(cfg, tcfg, ds.schema, refs, {}, 77);
  const FitResult b = fit_expc(cfg, tcfg, ds.schema, refs, {}, 77);
  const FitResult c = fit_expc(cfg, tcfg, ds.schema, refs, {}, 78);
  REQUIRE(a.params.count() == b.params.count());
  bool all_same = true, any_diff_c = false;
  for (std::size_t i = 0; i < a.params.count(); ++i) {
    all_same = all_same && same_bits(a.params.tensor(i), b.params.tensor(i));
    any_diff_c = any_diff_c || !same_bits(a.params.tensor(i), c.params.tensor(i));
  }
  CHECK(all_same);
  CHECK(any_diff_c);
  CHECK(a.final_train_mae == b.final_train_mae);
}

TEST_CASE("fit_graphormer is bit-deterministic with augmentation on") {
  const GraphormerConfig cfg = graphormer_mini_config();
  GraphormerTrainConfig tcfg = graphormer_mini_train_config();
  tcfg.max_steps = 30;
  tcfg.warmup_steps = 10;
  tcfg.eval_interval = 10;
  tcfg.batch_size = 4;

  const Dataset ds = small_corpus(8, 914, 3, 6);
  const auto feats = featurize_all(ds.graphs, ds.schema, cfg.rbf(), cfg.spatial, 1);
  const GraphRefs refs = refs_of(feats);

  const FitResult a = fit_graphormer(cfg, tcfg, ds.schema, refs, {}, 5, true);
  const FitResult b = fit_graphormer(cfg, tcfg, ds.schema, refs, {}, 5, true);
  bool all_same = true;
  for (std::size_t i = 0; i < a.params.count(); ++i) {
    all_same = all_same && same_bits(a.params.tensor(i), b.params.tensor(i));
  }
  CHECK(all_same);
  CHECK(a.steps_run == 30);

  SUBCASE("augmentation changes the trajectory") {
    const FitResult na = fit_graphormer(cfg, tcfg, ds.schema, refs, {}, 5, false);
    bool any_diff = false;
    for (std::size_t i = 0; i < a.params.count(); ++i) {
      any_diff = any_diff || !same_bits(a.params.tensor(i), na.params.tensor(i));
    }
    CHECK(any_diff);
  }
}

TEST_CASE("max_steps zero returns the untouched initial parameters") {
  const GraphormerConfig cfg = graphormer_mini_config();
  GraphormerTrainConfig tcfg = graphormer_mini_train_config();
  tcfg.max_steps = 0;
  tcfg.warmup_steps = 0;

  const Dataset ds = small_corpus(4, 915);
  const auto feats = featurize_all(ds.graphs, ds.schema, cfg.rbf(), cfg.spatial, 1);
  const FitResult res = fit_graphormer(cfg, tcfg, ds.schema, refs_of(feats), {}, 33, true);
  CHECK(res.steps_run == 0);
  const ParameterStore init = graphormer_init(cfg, ds.schema, 33);
  REQUIRE(res.params.count() == init.count());
  for (std::size_t i = 0; i < init.count(); ++i) {
    CHECK(same_bits(res.params.tensor(i), init.tensor(i)));
  }
  CHECK(!res.history.empty());
}

TEST_CASE("metrics stream emits one json record per evaluation") {
  const ExpCConfig cfg = expc_mini_config();
  ExpCTrainConfig tcfg = expc_mini_train_config();
  tcfg.max_epochs = 6;
  tcfg.eval_interval = 2;
  tcfg.batch_size = 4;

  const Dataset ds = small_corpus(10, 916, 3, 7);
  const auto feats = featurize_all(ds.graphs, ds.schema, make_rbf_config(8), SpatialMode::kHop, 1);
  GraphRefs train, val;
  for (std::size_t i = 0; i < feats.size(); ++i) {
    (i < 8 ? train : val).push_back(&feats[i]);
  }

  std::ostringstream out;
  const FitResult res = fit_expc(cfg, tcfg, ds.schema, train, val, 3, &out);

  std::istringstream lines(out.str());
  std::string line;
  int n_lines = 0;
  Real min_val = std::numeric_limits<Real>::infinity();
  while (std::getline(lines, line)) {
    const auto j = nlohmann::json::parse(line);
    CHECK(j.contains("step"));
    CHECK(j.contains("lr"));
    CHECK(j.contains("train_mae"));
    REQUIRE(j.contains("val_mae"));
    min_val = std::min(min_val, j.at("val_mae").get<Real>());
    ++n_lines;
  }
  CHECK(n_lines == static_cast<int>(res.history.size()));
  REQUIRE(res.best_val_mae.has_value());
  CHECK(*res.best_val_mae == min_val);

  SUBCASE("no validation set means no val_mae and no best checkpoint claim") {
    std::ostringstream out2;
    const FitResult all = fit_expc(cfg, tcfg, ds.schema, train, {}, 3, &out2);
    CHECK(!all.best_val_mae.has_value());
    CHECK(out2.str().find("val_mae") == std::string::npos);
  }
}

TEST_CASE("diverging training raises NumericalError with the step") {
  const ExpCConfig cfg = expc_mini_config();
  ExpCTrainConfig tcfg = expc_mini_train_config();
  tcfg.max_epochs = 50;
  tcfg.batch_size = 4;
  tcfg.peak_lr = 1e18;  // guaranteed blowup

  const Dataset ds = small_corpus(8, 917);
  const auto feats = featurize_all(ds.graphs, ds.schema, make_rbf_config(8), SpatialMode::kHop, 1);
  try {
    fit_expc(cfg, tcfg, ds.schema, refs_of(feats), {}, 1);
    FAIL("expected NumericalError");
  } catch (const NumericalError& e) {
    CHECK(std::string(e.what()).find("step") != std::string::npos);
  }
}

TEST_CASE("evaluate_mae agrees with predict plus mae") {
  const ExpCConfig cfg = expc_mini_config();
  const Dataset ds = small_corpus(9, 918);
  const auto feats = featurize_all(ds.graphs, ds.schema, make_rbf_config(8), SpatialMode::kHop, 1);
  const GraphRefs refs = refs_of(feats);
  Rng rng(919);
  ParameterStore store = expc_init(cfg, ds.schema, 4);
  store.at("head_w") = init_normal(rng, cfg.d_model, 1, 0.5);

  const Vec pred = predict_expc(cfg, store, refs, 4);
  Vec targets(static_cast<Eigen::Index>(feats.size()));
  for (std::size_t i = 0; i < feats.size(); ++i) {
    targets(static_cast<Eigen::Index>(i)) = *feats[i].target;
  }
  CHECK(evaluate_mae_expc(cfg, store, refs, 4) == mae(pred, targets));

  // batch size must not change eval-mode predictions
  CHECK(same_bits(predict_expc(cfg, store, refs, 2), pred));
  CHECK(same_bits(predict_expc(cfg, store, refs, 100), pred));
}
