// Command-line front end: dataset utilities, featurization, training,
// evaluation, gradient checking, ensembling, and manifest replay.

#include "molprop/cache.hpp"
#include "molprop/dataset.hpp"
#include "molprop/ensemble.hpp"
#include "molprop/errors.hpp"
#include "molprop/expc.hpp"
#include "molprop/featurize.hpp"
#include "molprop/grad_check.hpp"
#include "molprop/graphormer.hpp"
#include "molprop/manifest.hpp"
#include "molprop/params.hpp"
#include "molprop/serialize.hpp"
#include "molprop/synthetic.hpp"
#include "molprop/train.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <unordered_set>

namespace fs = std::filesystem;
using namespace molprop;

namespace {

int run_cli(std::vector<std::string> args);  // for `replay`

int env_workers() {
  const char* v = std::getenv("MOLPROP_WORKERS");
  if (!v) return 1;
  const int n = std::atoi(v);
  return n >= 1 ? n : 1;
}

GraphRefs refs_of(const std::vector<FeaturizedGraph>& feats) {
  GraphRefs refs;
  refs.reserve(feats.size());
  for (const FeaturizedGraph& fg : feats) refs.push_back(&fg);
  return refs;
}

void write_predictions(const std::string& path, const std::vector<std::string>& ids,
                       const Vec& pred) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError(0, "cannot open for writing: " + path);
  out << std::setprecision(17);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    out << ids[i] << '\t' << pred(static_cast<Eigen::Index>(i)) << '\n';
  }
}

// Start/finish manifest bracketing for a command that owns an output dir.
class ManifestScope {
 public:
  ManifestScope(std::string dir, RunManifest m) : m_(std::move(m)) {
    fs::create_directories(dir);
    path_ = (fs::path(dir) / "manifest.json").string();
    begin();
  }
  ManifestScope(std::string manifest_path, RunManifest m, int)
      : path_(std::move(manifest_path)), m_(std::move(m)) {
    begin();
  }

  void finish(const std::vector<std::string>& outputs) {
    m_.outputs = outputs;
    for (const std::string& p : outputs) {
      if (fs::exists(p)) m_.hashes[p] = file_hash_hex(p);
    }
    m_.status = "completed";
    m_.finished_at = timestamp_utc();
    write_manifest(path_, m_);
  }

 private:
  void begin() {
    for (const std::string& p : m_.inputs) {
      if (fs::exists(p)) m_.hashes[p] = file_hash_hex(p);
    }
    m_.status = "started";
    m_.started_at = timestamp_utc();
    write_manifest(path_, m_);
  }

  std::string path_;
  RunManifest m_;
};

// ---- dataset gen -------------------------------------------------------------

struct GenOpts {
  std::string out;
  int count = 64;
  int min_atoms = 4;
  int max_atoms = 12;
  std::uint64_t seed = 1234;
};

void cmd_dataset_gen(const GenOpts& o) {
  SyntheticConfig cfg;
  cfg.n_molecules = o.count;
  cfg.min_atoms = o.min_atoms;
  cfg.max_atoms = o.max_atoms;
  cfg.seed = o.seed;

  RunManifest m;
  m.command = "dataset gen";
  m.argv = {"dataset", "gen", "--out", o.out, "--count", std::to_string(o.count),
            "--min-atoms", std::to_string(o.min_atoms), "--max-atoms",
            std::to_string(o.max_atoms), "--seed", std::to_string(o.seed)};
  m.config = {{"count", o.count}, {"min_atoms", o.min_atoms}, {"max_atoms", o.max_atoms}};
  m.seed = o.seed;
  m.outputs = {o.out};
  ManifestScope scope(o.out + ".manifest.json", m, 0);

  const Dataset ds = make_synthetic_dataset(cfg);
  write_dataset(o.out, ds);
  scope.finish({o.out});
  std::cout << "wrote " << ds.graphs.size() << " molecules to " << o.out << "\n";
}

// ---- dataset validate ----------------------------------------------------------

void cmd_dataset_validate(const std::string& data) {
  std::size_t count = 0;
  for_each_molecule(data, [&](const DatasetSchema&, MolecularGraph&&) { ++count; });
  std::cout << data << ": " << count << " molecules, all valid\n";
}

// ---- featurize -----------------------------------------------------------------

struct FeaturizeOpts {
  std::string data;
  std::string out;
  std::string spatial_mode = "euclidean-rbf";
  int rbf_kernels = 256;
  int workers = 0;  // 0 = resolve from environment
};

void cmd_featurize(const FeaturizeOpts& o) {
  const int workers = o.workers > 0 ? o.workers : env_workers();
  const SpatialMode mode = spatial_mode_from_string(o.spatial_mode);
  const RbfConfig rbf = make_rbf_config(o.rbf_kernels);

  RunManifest m;
  m.command = "featurize";
  m.argv = {"featurize",      "--data",         o.data, "--out", o.out, "--spatial-mode",
            o.spatial_mode,   "--rbf-kernels",  std::to_string(o.rbf_kernels),
            "--workers",      std::to_string(workers)};
  m.config = {{"spatial_mode", o.spatial_mode},
              {"rbf_kernels", o.rbf_kernels},
              {"workers", workers}};
  m.inputs = {o.data};
  ManifestScope scope(o.out, m);

  const Dataset ds = load_dataset(o.data);
  const std::vector<FeaturizedGraph> feats =
      featurize_all(ds.graphs, ds.schema, rbf, mode, workers);
  FeatureCacheMeta meta;
  meta.schema = ds.schema;
  meta.rbf = rbf;
  meta.mode = mode;
  const std::string cache_path = (fs::path(o.out) / "features.bin").string();
  write_feature_cache(cache_path, meta, feats);
  scope.finish({cache_path});
  std::cout << "featurized " << feats.size() << " molecules into " << cache_path << "\n";
}

// ---- train ---------------------------------------------------------------------

struct TrainOpts {
  std::string model;
  std::string profile = "mini";
  std::string data;
  std::string out;
  int fold = -1;  // -1 trains on everything ("All" runs)
  int folds = 8;
  std::uint64_t seed = 0;
  std::uint64_t kfold_seed = 0;
  std::string spatial_mode = "euclidean-rbf";
  bool no_augment = false;
  bool compute_ack = false;
};

void cmd_train(const TrainOpts& o) {
  if (o.profile == "paper" && !o.compute_ack) {
    throw ConfigError(
        "the paper profile needs V100-scale resources; pass --i-have-the-compute to proceed");
  }

  const Dataset ds = load_dataset(o.data);
  std::vector<std::string> ids;
  ids.reserve(ds.graphs.size());
  for (const MolecularGraph& g : ds.graphs) ids.push_back(g.id);

  nlohmann::json cfg_snapshot;
  cfg_snapshot["model"] = o.model;
  cfg_snapshot["profile"] = o.profile;
  cfg_snapshot["fold"] = o.fold;
  cfg_snapshot["folds"] = o.folds;
  cfg_snapshot["kfold_seed"] = o.kfold_seed;
  cfg_snapshot["augment"] = !o.no_augment;
  cfg_snapshot["spatial_mode"] = o.spatial_mode;

  RunManifest m;
  m.command = "train";
  m.argv = {"train", "--model", o.model, "--profile", o.profile, "--data", o.data,
            "--out", o.out, "--fold", std::to_string(o.fold), "--folds",
            std::to_string(o.folds), "--seed", std::to_string(o.seed), "--kfold-seed",
            std::to_string(o.kfold_seed), "--spatial-mode", o.spatial_mode};
  if (o.no_augment) m.argv.push_back("--no-augment");
  if (o.compute_ack) m.argv.push_back("--i-have-the-compute");
  m.seed = o.seed;
  m.inputs = {o.data};

  // Fold selection over molecule ids.
  std::unordered_set<std::string> val_ids;
  if (o.fold >= 0) {
    const FoldPlan plan = kfold_split(ids, o.folds, o.kfold_seed);
    if (o.fold >= plan.n_folds) {
      throw ConfigError("fold " + std::to_string(o.fold) + " out of range for " +
                        std::to_string(plan.n_folds) + " folds");
    }
    for (const std::string& id : plan.ids_in_fold(o.fold)) val_ids.insert(id);
  }

  const std::string ckpt_path = (fs::path(o.out) / "checkpoint.ckpt").string();
  const std::string metrics_path = (fs::path(o.out) / "metrics.jsonl").string();

  if (o.model == "graphormer") {
    GraphormerConfig cfg =
        o.profile == "paper" ? graphormer_paper_config() : graphormer_mini_config();
    cfg.spatial = spatial_mode_from_string(o.spatial_mode);
    const GraphormerTrainConfig tcfg =
        o.profile == "paper" ? graphormer_paper_train_config() : graphormer_mini_train_config();
    cfg_snapshot["model_config"] = cfg;
    cfg_snapshot["train_config"] = tcfg;
    m.config = cfg_snapshot;
    ManifestScope scope(o.out, m);

    const std::vector<FeaturizedGraph> feats =
        featurize_all(ds.graphs, ds.schema, cfg.rbf(), cfg.spatial, env_workers());
    GraphRefs train, val;
    for (const FeaturizedGraph& fg : feats) {
      (val_ids.count(fg.id) ? val : train).push_back(&fg);
    }
    std::ofstream metrics(metrics_path, std::ios::trunc);
    const FitResult fit = fit_graphormer(cfg, tcfg, ds.schema, train, val, o.seed,
                                         !o.no_augment, LaplaceParams{}, &metrics);
    save_checkpoint(ckpt_path, checkpoint_meta_graphormer(cfg, ds.schema, o.seed), fit.params);
    scope.finish({ckpt_path, metrics_path});
    std::cout << "final train MAE " << fit.final_train_mae;
    if (fit.best_val_mae) std::cout << ", best val MAE " << *fit.best_val_mae;
    std::cout << "\n";
  } else if (o.model == "expc") {
    const ExpCConfig cfg = o.profile == "paper" ? expc_paper_config() : expc_mini_config();
    const ExpCTrainConfig tcfg =
        o.profile == "paper" ? expc_paper_train_config() : expc_mini_train_config();
    cfg_snapshot["model_config"] = cfg;
    cfg_snapshot["train_config"] = tcfg;
    m.config = cfg_snapshot;
    ManifestScope scope(o.out, m);

    const std::vector<FeaturizedGraph> feats =
        featurize_all(ds.graphs, ds.schema, make_rbf_config(), SpatialMode::kHop, env_workers());
    GraphRefs train, val;
    for (const FeaturizedGraph& fg : feats) {
      (val_ids.count(fg.id) ? val : train).push_back(&fg);
    }
    std::ofstream metrics(metrics_path, std::ios::trunc);
    const FitResult fit = fit_expc(cfg, tcfg, ds.schema, train, val, o.seed, &metrics);
    save_checkpoint(ckpt_path, checkpoint_meta_expc(cfg, ds.schema, o.seed), fit.params);
    scope.finish({ckpt_path, metrics_path});
    std::cout << "final train MAE " << fit.final_train_mae;
    if (fit.best_val_mae) std::cout << ", best val MAE " << *fit.best_val_mae;
    std::cout << "\n";
  } else {
    throw ConfigError("unknown model '" + o.model + "'");
  }
}

// ---- eval ----------------------------------------------------------------------

struct EvalOpts {
  std::string checkpoint;
  std::string data;
  std::string out;
  int batch_size = 32;
};

void cmd_eval(const EvalOpts& o) {
  RunManifest m;
  m.command = "eval";
  m.argv = {"eval", "--checkpoint", o.checkpoint, "--data", o.data, "--out", o.out,
            "--batch-size", std::to_string(o.batch_size)};
  m.config = {{"batch_size", o.batch_size}};
  m.inputs = {o.checkpoint, o.data};
  ManifestScope scope(o.out, m);

  const Dataset ds = load_dataset(o.data);
  auto [meta_str, params] = load_checkpoint(o.checkpoint);
  const nlohmann::json meta = nlohmann::json::parse(meta_str);
  const DatasetSchema ckpt_schema = meta.at("schema").get<DatasetSchema>();
  if (!(ckpt_schema == ds.schema)) {
    throw ConfigError("checkpoint schema does not match dataset " + o.data);
  }
  const std::string model = meta.at("model").get<std::string>();

  std::vector<std::string> ids;
  for (const MolecularGraph& g : ds.graphs) ids.push_back(g.id);
  Vec pred;
  if (model == "graphormer") {
    const GraphormerConfig cfg = meta.at("config").get<GraphormerConfig>();
    const std::vector<FeaturizedGraph> feats =
        featurize_all(ds.graphs, ds.schema, cfg.rbf(), cfg.spatial, env_workers());
    pred = predict_graphormer(cfg, params, refs_of(feats), o.batch_size);
  } else if (model == "expc") {
    const ExpCConfig cfg = meta.at("config").get<ExpCConfig>();
    const std::vector<FeaturizedGraph> feats =
        featurize_all(ds.graphs, ds.schema, make_rbf_config(), SpatialMode::kHop, env_workers());
    pred = predict_expc(cfg, params, refs_of(feats), o.batch_size);
  } else {
    throw ConfigError("unknown model kind '" + model + "' in checkpoint");
  }

  const std::string pred_path = (fs::path(o.out) / "predictions.tsv").string();
  write_predictions(pred_path, ids, pred);

  Vec targets(static_cast<Eigen::Index>(ds.graphs.size()));
  bool have_targets = true;
  for (std::size_t i = 0; i < ds.graphs.size(); ++i) {
    if (!ds.graphs[i].target) {
      have_targets = false;
      break;
    }
    targets(static_cast<Eigen::Index>(i)) = *ds.graphs[i].target;
  }
  std::vector<std::string> outputs = {pred_path};
  if (have_targets && !ds.graphs.empty()) {
    const Real m_val = mae(pred, targets);
    const std::string metrics_path = (fs::path(o.out) / "metrics.json").string();
    std::ofstream mo(metrics_path, std::ios::trunc);
    mo << nlohmann::json{{"mae", m_val}}.dump() << '\n';
    outputs.push_back(metrics_path);
    std::cout << std::setprecision(17) << "MAE " << m_val << "\n";
  } else {
    std::cout << "no targets in dataset; wrote predictions only\n";
  }
  scope.finish(outputs);
}

// ---- gradcheck -------------------------------------------------------------------

struct GradcheckOpts {
  std::string model;
  std::string profile = "mini";
  std::string out;
  Real tolerance = 1e-4;
  std::uint64_t seed = 7;
};

int cmd_gradcheck(const GradcheckOpts& o) {
  if (o.profile != "mini") {
    throw ConfigError("gradcheck supports only the mini profile");
  }
  SyntheticConfig scfg;
  scfg.n_molecules = 4;
  scfg.min_atoms = 3;
  scfg.max_atoms = 6;
  scfg.seed = o.seed;
  const Dataset ds = make_synthetic_dataset(scfg);

  ad::GradCheckResult res;
  if (o.model == "graphormer") {
    const GraphormerConfig cfg = graphormer_mini_config();
    const std::vector<FeaturizedGraph> feats =
        featurize_all(ds.graphs, ds.schema, cfg.rbf(), cfg.spatial, 1);
    const GraphRefs refs = refs_of(feats);
    Vec tgt(static_cast<Eigen::Index>(ds.graphs.size()));
    for (std::size_t i = 0; i < ds.graphs.size(); ++i) {
      tgt(static_cast<Eigen::Index>(i)) = *ds.graphs[i].target;
    }
    const ParameterStore params = graphormer_init(cfg, ds.schema, o.seed);
    std::vector<Mat> tensors;
    for (std::size_t i = 0; i < params.count(); ++i) tensors.push_back(params.tensor(i));
    res = ad::grad_check(
        [&](ad::Tape& tape, const std::vector<ad::Value>& leaves) {
          const BoundParams bound = bind_values(params, leaves);
          return mae_loss(graphormer_forward(tape, cfg, bound, refs, false, 0), tgt);
        },
        tensors);
  } else if (o.model == "expc") {
    const ExpCConfig cfg = expc_mini_config();
    const std::vector<FeaturizedGraph> feats =
        featurize_all(ds.graphs, ds.schema, make_rbf_config(), SpatialMode::kHop, 1);
    const GraphRefs refs = refs_of(feats);
    Vec tgt(static_cast<Eigen::Index>(ds.graphs.size()));
    for (std::size_t i = 0; i < ds.graphs.size(); ++i) {
      tgt(static_cast<Eigen::Index>(i)) = *ds.graphs[i].target;
    }
    const ParameterStore params = expc_init(cfg, ds.schema, o.seed);
    std::vector<Mat> tensors;
    for (std::size_t i = 0; i < params.count(); ++i) tensors.push_back(params.tensor(i));
    res = ad::grad_check(
        [&](ad::Tape& tape, const std::vector<ad::Value>& leaves) {
          const BoundParams bound = bind_values(params, leaves);
          return mae_loss(expc_forward(tape, cfg, bound, refs, false, 0), tgt);
        },
        tensors);
  } else {
    throw ConfigError("unknown model '" + o.model + "'");
  }

  std::cout << std::setprecision(17) << "max relative error " << res.max_rel_err << " over "
            << res.n_checked << " coordinates (worst: " << res.worst << ")\n";
  if (!res.deterministic) {
    throw NumericalError("loss is not deterministic across evaluations");
  }

  if (!o.out.empty()) {
    RunManifest m;
    m.command = "gradcheck";
    m.argv = {"gradcheck", "--model", o.model, "--tolerance", std::to_string(o.tolerance),
              "--seed", std::to_string(o.seed), "--out", o.out};
    m.config = {{"model", o.model}, {"tolerance", o.tolerance}};
    m.seed = o.seed;
    ManifestScope scope(o.out, m);
    scope.finish({});
  }
  if (res.max_rel_err > o.tolerance) {
    std::cerr << "gradient check FAILED: " << res.max_rel_err << " > " << o.tolerance << "\n";
    return 3;
  }
  return 0;
}

// ---- ensemble --------------------------------------------------------------------

struct EnsembleOpts {
  std::string spec;
  std::string data;
  std::string out;
  int batch_size = 32;
  int workers = 0;
};

void cmd_ensemble(const EnsembleOpts& o) {
  RunManifest m;
  m.command = "ensemble";
  m.argv = {"ensemble", "--spec", o.spec, "--data", o.data, "--out", o.out,
            "--batch-size", std::to_string(o.batch_size)};
  m.config = {{"batch_size", o.batch_size}};
  m.inputs = {o.spec, o.data};
  const EnsembleSpec spec = load_ensemble_spec(o.spec);
  for (const EnsembleEntry& e : spec.entries) m.inputs.push_back(e.checkpoint);
  ManifestScope scope(o.out, m);

  const Dataset ds = load_dataset(o.data);
  const int workers = o.workers > 0 ? o.workers : env_workers();
  const InferenceResult res = run_inference(spec, ds, o.batch_size, workers);
  const std::string pred_path = (fs::path(o.out) / "predictions.tsv").string();
  write_predictions(pred_path, res.ids, res.pred);
  scope.finish({pred_path});
  std::cout << "wrote " << res.ids.size() << " ensemble predictions to " << pred_path << "\n";
}

// ---- replay ----------------------------------------------------------------------

int cmd_replay(const std::string& manifest_path) {
  const RunManifest m = load_manifest(manifest_path);
  if (m.argv.empty()) throw DataError(0, "manifest has no argv to replay");
  std::cout << "replaying:";
  for (const std::string& a : m.argv) std::cout << ' ' << a;
  std::cout << "\n";
  return run_cli(m.argv);
}

// ---- wiring ----------------------------------------------------------------------

int run_cli(std::vector<std::string> args) {
  CLI::App app{"molecular property regression: Graphormer and ExpC reference stack"};
  app.require_subcommand(1);
  int pending_exit = 0;

  // dataset gen / validate
  CLI::App* dataset = app.add_subcommand("dataset", "dataset utilities");
  dataset->require_subcommand(1);
  GenOpts gen;
  CLI::App* dgen = dataset->add_subcommand("gen", "generate a synthetic molecule corpus");
  dgen->add_option("--out", gen.out, "output JSONL path")->required();
  dgen->add_option("--count", gen.count, "number of molecules");
  dgen->add_option("--min-atoms", gen.min_atoms, "minimum atoms per molecule");
  dgen->add_option("--max-atoms", gen.max_atoms, "maximum atoms per molecule");
  dgen->add_option("--seed", gen.seed, "generator seed");
  dgen->callback([&] { cmd_dataset_gen(gen); });

  std::string validate_data;
  CLI::App* dval = dataset->add_subcommand("validate", "validate a dataset file");
  dval->add_option("--data", validate_data, "dataset JSONL path")->required();
  dval->callback([&] { cmd_dataset_validate(validate_data); });

  // featurize
  FeaturizeOpts fo;
  CLI::App* feat = app.add_subcommand("featurize", "precompute model-ready features");
  feat->add_option("--data", fo.data, "dataset JSONL path")->required();
  feat->add_option("--out", fo.out, "output directory")->required();
  feat->add_option("--spatial-mode", fo.spatial_mode, "euclidean-rbf or hop");
  feat->add_option("--rbf-kernels", fo.rbf_kernels, "RBF kernel count");
  feat->add_option("--workers", fo.workers, "worker threads (default: MOLPROP_WORKERS or 1)");
  feat->callback([&] { cmd_featurize(fo); });

  // train
  TrainOpts to;
  CLI::App* train = app.add_subcommand("train", "fit a model");
  train->add_option("--model", to.model, "graphormer or expc")->required();
  train->add_option("--profile", to.profile, "paper or mini");
  train->add_option("--data", to.data, "dataset JSONL path")->required();
  train->add_option("--out", to.out, "output directory")->required();
  train->add_option("--fold", to.fold, "validation fold index; -1 trains on all data");
  train->add_option("--folds", to.folds, "fold count");
  train->add_option("--seed", to.seed, "training seed");
  train->add_option("--kfold-seed", to.kfold_seed, "fold assignment seed");
  train->add_option("--spatial-mode", to.spatial_mode, "euclidean-rbf or hop (graphormer)");
  train->add_flag("--no-augment", to.no_augment, "disable bond-distance augmentation");
  train->add_flag("--i-have-the-compute", to.compute_ack,
                  "acknowledge the paper profile's hardware requirements");
  train->callback([&] { cmd_train(to); });

  // eval
  EvalOpts eo;
  CLI::App* ev = app.add_subcommand("eval", "evaluate a checkpoint");
  ev->add_option("--checkpoint", eo.checkpoint, "checkpoint path")->required();
  ev->add_option("--data", eo.data, "dataset JSONL path")->required();
  ev->add_option("--out", eo.out, "output directory")->required();
  ev->add_option("--batch-size", eo.batch_size, "evaluation batch size");
  ev->callback([&] { cmd_eval(eo); });

  // gradcheck
  GradcheckOpts go;
  CLI::App* gc = app.add_subcommand("gradcheck", "finite-difference gradient check");
  gc->add_option("--model", go.model, "graphormer or expc")->required();
  gc->add_option("--profile", go.profile, "only mini is supported");
  gc->add_option("--tolerance", go.tolerance, "max relative error allowed");
  gc->add_option("--seed", go.seed, "corpus and init seed");
  gc->add_option("--out", go.out, "optional manifest directory");
  gc->callback([&] { pending_exit = cmd_gradcheck(go); });

  // ensemble
  EnsembleOpts en;
  CLI::App* ens = app.add_subcommand("ensemble", "weighted-average inference");
  ens->add_option("--spec", en.spec, "ensemble spec JSON")->required();
  ens->add_option("--data", en.data, "dataset JSONL path")->required();
  ens->add_option("--out", en.out, "output directory")->required();
  ens->add_option("--batch-size", en.batch_size, "per-model batch size");
  ens->add_option("--workers", en.workers, "featurization workers");
  ens->callback([&] { cmd_ensemble(en); });

  // replay
  std::string replay_manifest;
  CLI::App* rp = app.add_subcommand("replay", "re-run a command from its manifest");
  rp->add_option("--manifest", replay_manifest, "manifest.json path")->required();
  rp->callback([&] { pending_exit = cmd_replay(replay_manifest); });

  std::reverse(args.begin(), args.end());
  try {
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;  // help/version exit cleanly
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 3;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return pending_exit;
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run_cli(std::move(args));
}
