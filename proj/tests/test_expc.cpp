#include <doctest.h>

#include "test_util.hpp"

#include "molprop/expc.hpp"
#include "molprop/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <vector>

using namespace molprop;
using namespace testutil;

namespace {

using Refs = std::vector<const FeaturizedGraph*>;

Real predict_one(const ExpCConfig& cfg, const ParameterStore& store, const FeaturizedGraph& fg) {
  ad::Tape t;
  const BoundParams bound = bind(t, store);
  return expc_forward(t, cfg, bound, Refs{&fg}, false, 0).data()(0, 0);
}

ParameterStore warmed_init(const ExpCConfig& cfg, const DatasetSchema& schema,
                           std::uint64_t seed) {
  ParameterStore store = expc_init(cfg, schema, seed);
  Rng rng(seed ^ 0x5EED);
  store.at("head_w") = init_normal(rng, cfg.d_model, 1, 0.5);
  store.at("head_b")(0, 0) = -0.2;
  return store;
}

// the layer recomputed with explicit per-node loops
Mat layer_oracle(const Mat& h, const IVec& src, const IVec& dst, const Mat& edges, const Mat& w1,
                 const Mat& w2, const Mat& m1, const Mat& m1_b, const Mat& m2, const Mat& m2_b) {
  const Eigen::Index n = h.rows();
  const Eigen::Index dp = w1.cols();
  Mat gates = edges * w1;
  Mat hp = h * w2;
  for (Eigen::Index i = 0; i < gates.rows(); ++i) {
    for (Eigen::Index j = 0; j < dp; ++j) gates(i, j) = std::max(gates(i, j), 0.0);
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < dp; ++j) hp(i, j) = std::max(hp(i, j), 0.0);
  }

  Mat pre = hp;
  // receiver-major, sender-minor accumulation order
  std::vector<Eigen::Index> ord(static_cast<std::size_t>(src.size()));
  for (std::size_t i = 0; i < ord.size(); ++i) ord[i] = static_cast<Eigen::Index>(i);
  std::sort(ord.begin(), ord.end(), [&](Eigen::Index a, Eigen::Index b) {
    if (dst(a) != dst(b)) return dst(a) < dst(b);
    return src(a) < src(b);
  });
  for (Eigen::Index k : ord) {
    for (Eigen::Index j = 0; j < dp; ++j) {
      pre(dst(k), j) += gates(k, j) * hp(src(k), j);
    }
  }
  Mat mid = pre * m1;
  mid.rowwise() += m1_b.row(0);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < mid.cols(); ++j) mid(i, j) = std::max(mid(i, j), 0.0);
  }
  Mat out = mid * m2;
  out.rowwise() += m2_b.row(0);
  return out;
}

// single-graph reference built from the plain layer plus the virtual node
Real forward_reference(const ExpCConfig& cfg, const ParameterStore& store,
                       const DatasetSchema& schema, const FeaturizedGraph& fg) {
  const Eigen::Index n = fg.n_atoms;
  const Eigen::Index d = cfg.d_model;
  const Eigen::Index virt = n;

  Mat h = Mat::Zero(n + 1, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (std::size_t f = 0; f < schema.atom_vocab.size(); ++f) {
      h.row(i) += store.at("atom_emb." + std::to_string(f))
                      .row(fg.node_feat(i, static_cast<Eigen::Index>(f)));
    }
  }
  h.row(virt) = store.at("virt_init").row(0);

  const Eigen::Index n_arcs = fg.n_arcs() + 2 * n;
  IVec src(n_arcs), dst(n_arcs);
  Mat edges = Mat::Zero(n_arcs, d);
  for (int a = 0; a < fg.n_arcs(); ++a) {
    src(a) = fg.arc_src(a);
    dst(a) = fg.arc_dst(a);
    for (std::size_t f = 0; f < schema.bond_vocab.size(); ++f) {
      edges.row(a) += store.at("bond_emb." + std::to_string(f))
                          .row(fg.arc_feat(a, static_cast<Eigen::Index>(f)));
    }
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Index k = fg.n_arcs() + 2 * i;
    src(k) = virt;
    dst(k) = i;
    src(k + 1) = i;
    dst(k + 1) = virt;
    edges.row(k) = store.at("virt_edge").row(0);
    edges.row(k + 1) = store.at("virt_edge").row(0);
  }

  std::vector<Vec> states;
  for (int l = 0; l < cfg.n_layers; ++l) {
    const std::string pre = "l" + std::to_string(l) + ".";
    h = expc_layer(h, src, dst, edges, store.at(pre + "w1"), store.at(pre + "w2"),
                   store.at(pre + "m1"), store.at(pre + "m1_b"), store.at(pre + "m2"),
                   store.at(pre + "m2_b"));
    states.push_back(h.row(virt).transpose());
  }
  const Vec readout = virtual_readout(states);
  return readout.dot(store.at("head_w").col(0)) + store.at("head_b")(0, 0);
}

}  // namespace

TEST_CASE("parameter count matches the closed form across configurations") {
  Rng rng(505);
  for (int trial = 0; trial < 12; ++trial) {
    ExpCConfig cfg;
    cfg.n_layers = static_cast<int>(rng.uniform_int(1, 4));
    cfg.d_model = static_cast<int>(rng.uniform_int(2, 12));
    cfg.d_expand = cfg.d_model * static_cast<int>(rng.uniform_int(1, 3));
    DatasetSchema schema;
    const int na = static_cast<int>(rng.uniform_int(1, 3));
    const int nb = static_cast<int>(rng.uniform_int(1, 3));
    for (int f = 0; f < na; ++f) {
      schema.atom_vocab.push_back(static_cast<int>(rng.uniform_int(2, 20)));
    }
    for (int f = 0; f < nb; ++f) {
      schema.bond_vocab.push_back(static_cast<int>(rng.uniform_int(2, 10)));
    }
    const ParameterStore store = expc_init(cfg, schema, 100 + trial);
    CHECK(store.total_scalars() == expc_param_count(cfg, schema));
  }

  const Dataset ds = small_corpus(2, 1);
  const ExpCConfig mini = expc_mini_config();
  CHECK(expc_init(mini, ds.schema, 0).total_scalars() == expc_param_count(mini, ds.schema));
}

TEST_CASE("expc_layer matches a loop oracle") {
  Rng rng(606);
  for (int trial = 0; trial < 100; ++trial) {
    const Eigen::Index n = rng.uniform_int(1, 8);
    const Eigen::Index d = rng.uniform_int(1, 6);
    const Eigen::Index dp = rng.uniform_int(d, 8);

    // distinct (src, dst) pairs so the summation order is unambiguous
    std::set<std::pair<Eigen::Index, Eigen::Index>> pairs;
    const Eigen::Index want_arcs = std::min(rng.uniform_int(0, 2 * n), n * n);
    while (static_cast<Eigen::Index>(pairs.size()) < want_arcs) {
      pairs.insert({rng.uniform_int(0, n - 1), rng.uniform_int(0, n - 1)});
    }
    IVec src(static_cast<Eigen::Index>(pairs.size()));
    IVec dst(static_cast<Eigen::Index>(pairs.size()));
    Eigen::Index k = 0;
    for (const auto& [s, r] : pairs) {
      src(k) = s;
      dst(k) = r;
      ++k;
    }

    const Mat h = random_mat(rng, n, d);
    const Mat edges = random_mat(rng, src.size(), d);
    const Mat w1 = random_mat(rng, d, dp);
    const Mat w2 = random_mat(rng, d, dp);
    const Mat m1 = random_mat(rng, dp, dp);
    const Mat m1_b = random_mat(rng, 1, dp);
    const Mat m2 = random_mat(rng, dp, d);
    const Mat m2_b = random_mat(rng, 1, d);

    const Mat got = expc_layer(h, src, dst, edges, w1, w2, m1, m1_b, m2, m2_b);
    const Mat want = layer_oracle(h, src, dst, edges, w1, w2, m1, m1_b, m2, m2_b);
    CHECK(max_abs_diff(got, want) <= 1e-12);
  }
}

TEST_CASE("expc_forward matches the plain-layer reference") {
  const ExpCConfig cfg = expc_mini_config();
  Dataset ds = small_corpus(12, 707, 3, 9);

  MolecularGraph lone;  // no bonds: aggregation sees only the virtual wires
  lone.id = "lone";
  lone.atom_features = IMat::Zero(1, static_cast<Eigen::Index>(ds.schema.atom_vocab.size()));
  lone.bond_features = IMat::Zero(0, static_cast<Eigen::Index>(ds.schema.bond_vocab.size()));
  lone.coords = Coords::Zero(1, 3);
  ds.graphs.push_back(lone);

  const ParameterStore store = warmed_init(cfg, ds.schema, 14);
  for (const MolecularGraph& g : ds.graphs) {
    const auto fg = featurize_molecule(g, ds.schema, make_rbf_config(8), SpatialMode::kHop);
    const Real got = predict_one(cfg, store, fg);
    const Real want = forward_reference(cfg, store, ds.schema, fg);
    CHECK(std::abs(got - want) <= 1e-12);
  }
}

TEST_CASE("predictions are exactly zero at initialization") {
  const ExpCConfig cfg = expc_mini_config();
  const Dataset ds = small_corpus(4, 808);
  const ParameterStore store = expc_init(cfg, ds.schema, 15);
  for (const MolecularGraph& g : ds.graphs) {
    const auto fg = featurize_molecule(g, ds.schema, make_rbf_config(8), SpatialMode::kHop);
    CHECK(predict_one(cfg, store, fg) == 0.0);
  }
}

TEST_CASE("arc listing order does not change the output at all") {
  const ExpCConfig cfg = expc_mini_config();
  const Dataset ds = small_corpus(8, 909, 4, 10);
  const ParameterStore store = warmed_init(cfg, ds.schema, 16);
  Rng rng(910);
  for (const MolecularGraph& g : ds.graphs) {
    const auto fg = featurize_molecule(g, ds.schema, make_rbf_config(8), SpatialMode::kHop);
    FeaturizedGraph shuffled = fg;
    std::vector<int> order(static_cast<std::size_t>(fg.n_arcs()));
    for (int i = 0; i < fg.n_arcs(); ++i) order[static_cast<std::size_t>(i)] = i;
    rng.shuffle(order);
    for (int i = 0; i < fg.n_arcs(); ++i) {
      const int o = order[static_cast<std::size_t>(i)];
      shuffled.arc_src(i) = fg.arc_src(o);
      shuffled.arc_dst(i) = fg.arc_dst(o);
      shuffled.arc_feat.row(i) = fg.arc_feat.row(o);
      shuffled.bond_dist(i) = fg.bond_dist(o);
    }
    CHECK(predict_one(cfg, store, fg) == predict_one(cfg, store, shuffled));
  }
}

TEST_CASE("predictions are invariant under atom relabeling") {
  const ExpCConfig cfg = expc_mini_config();
  const Dataset ds = small_corpus(20, 111, 3, 10);
  const ParameterStore store = warmed_init(cfg, ds.schema, 17);
  Rng rng(112);
  for (const MolecularGraph& g : ds.graphs) {
    const MolecularGraph pg = permute_graph(g, random_permutation(g.n_atoms(), rng));
    const auto fa = featurize_molecule(g, ds.schema, make_rbf_config(8), SpatialMode::kHop);
    const auto fb = featurize_molecule(pg, ds.schema, make_rbf_config(8), SpatialMode::kHop);
    CHECK(std::abs(predict_one(cfg, store, fa) - predict_one(cfg, store, fb)) <= 1e-9);
  }
}

TEST_CASE("batch predictions match single-graph predictions") {
  const ExpCConfig cfg = expc_mini_config();
  const Dataset ds = small_corpus(6, 212, 3, 9);
  const auto feats = featurize_all(ds.graphs, ds.schema, make_rbf_config(8), SpatialMode::kHop, 1);
  const ParameterStore store = warmed_init(cfg, ds.schema, 18);

  Refs refs;
  for (const auto& fg : feats) refs.push_back(&fg);
  ad::Tape t;
  const BoundParams bound = bind(t, store);
  const Mat batched = expc_forward(t, cfg, bound, refs, false, 0).data();
  REQUIRE(batched.rows() == Eigen::Index(feats.size()));
  for (std::size_t i = 0; i < feats.size(); ++i) {
    // graphs do not interact, but concatenation changes nothing numerically
    CHECK(batched(static_cast<Eigen::Index>(i), 0) == predict_one(cfg, store, feats[i]));
  }
}

TEST_CASE("forward is deterministic") {
  ExpCConfig cfg = expc_mini_config();
  cfg.dropout = 0.25;
  const Dataset ds = small_corpus(5, 313);
  const auto feats = featurize_all(ds.graphs, ds.schema, make_rbf_config(8), SpatialMode::kHop, 1);
  const ParameterStore store = warmed_init(cfg, ds.schema, 19);
  Refs refs;
  for (const auto& fg : feats) refs.push_back(&fg);
  auto run = [&](bool train, std::uint64_t seed) {
    ad::Tape t;
    const BoundParams bound = bind(t, store);
    return Vec(expc_forward(t, cfg, bound, refs, train, seed).data().col(0));
  };
  CHECK(same_bits(run(false, 1), run(false, 2)));
  CHECK(same_bits(run(true, 7), run(true, 7)));
  CHECK(!same_bits(run(true, 7), run(true, 8)));
}

TEST_CASE("configuration errors and numerical failures are reported") {
  SUBCASE("expanded width must not shrink") {
    ExpCConfig bad = expc_mini_config();
    bad.d_expand = bad.d_model - 1;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
  }
  SUBCASE("non-finite parameters raise NumericalError") {
    const ExpCConfig cfg = expc_mini_config();
    const Dataset ds = small_corpus(2, 414);
    const auto feats =
        featurize_all(ds.graphs, ds.schema, make_rbf_config(8), SpatialMode::kHop, 1);
    ParameterStore store = warmed_init(cfg, ds.schema, 20);
    store.at("l0.m1")(0, 0) = std::numeric_limits<Real>::quiet_NaN();
    ad::Tape t;
    const BoundParams bound = bind(t, store);
    CHECK_THROWS_AS(expc_forward(t, cfg, bound, Refs{&feats[0]}, false, 0), NumericalError);
  }
}

TEST_CASE("mini expc passes a full-model gradient check") {
  const ExpCConfig cfg = expc_mini_config();
  const Dataset ds = small_corpus(3, 515, 3, 6);
  const auto feats = featurize_all(ds.graphs, ds.schema, make_rbf_config(8), SpatialMode::kHop, 1);
  Refs refs;
  Vec targets(static_cast<Eigen::Index>(feats.size()));
  for (std::size_t i = 0; i < feats.size(); ++i) {
    refs.push_back(&feats[i]);
    targets(static_cast<Eigen::Index>(i)) = *feats[i].target;
  }
  const ParameterStore store = warmed_init(cfg, ds.schema, 21);
  std::vector<Mat> tensors;
  for (std::size_t i = 0; i < store.count(); ++i) tensors.push_back(store.tensor(i));

  const auto res = ad::grad_check(
      [&](ad::Tape& t, const std::vector<ad::Value>& leaves) {
        const BoundParams bound = bind_values(store, leaves);
        ad::Value pred = expc_forward(t, cfg, bound, refs, false, 0);
        return ad::mean_all(ad::abs_val(ad::sub(pred, ad::constant(t, targets))));
      },
      tensors);
  INFO("max rel err ", res.max_rel_err, " at ", res.worst);
  CHECK(res.pass(1e-4));
}
