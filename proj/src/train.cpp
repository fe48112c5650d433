#include "molprop/train.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <unordered_set>

namespace molprop {

void GraphormerTrainConfig::validate() const {
  if (max_steps < 0) throw ConfigError("train: max_steps must be >= 0");
  if (warmup_steps < 0) throw ConfigError("train: warmup_steps must be >= 0");
  if (max_steps > 0) {  // with zero steps the schedule is never evaluated
    if (warmup_steps < 1) throw ConfigError("train: warmup_steps must be >= 1");
    if (warmup_steps >= max_steps) {
      throw ConfigError("train: warmup_steps must be < max_steps");
    }
  }
  if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
  if (!(peak_lr > 0)) throw ConfigError("train: peak_lr must be positive");
  if (!(adam_eps > 0)) throw ConfigError("train: adam_eps must be positive");
  for (Real b : {adam_beta1, adam_beta2}) {
    if (!(b >= 0 && b < 1)) throw ConfigError("train: adam betas must lie in [0, 1)");
  }
  if (eval_interval < 1) throw ConfigError("train: eval_interval must be >= 1");
}

void ExpCTrainConfig::validate() const {
  if (max_epochs < 0) throw ConfigError("train: max_epochs must be >= 0");
  if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
  if (!(peak_lr > 0)) throw ConfigError("train: peak_lr must be positive");
  if (!(adam_eps > 0)) throw ConfigError("train: adam_eps must be positive");
  for (Real b : {adam_beta1, adam_beta2}) {
    if (!(b >= 0 && b < 1)) throw ConfigError("train: adam betas must lie in [0, 1)");
  }
  if (!(lr_decay_rate > 0 && lr_decay_rate <= 1)) {
    throw ConfigError("train: lr_decay_rate must lie in (0, 1]");
  }
  if (lr_decay_step < 1) throw ConfigError("train: lr_decay_step must be >= 1");
  if (eval_interval < 1) throw ConfigError("train: eval_interval must be >= 1");
}

GraphormerTrainConfig graphormer_paper_train_config() { return GraphormerTrainConfig{}; }

GraphormerTrainConfig graphormer_mini_train_config() {
  GraphormerTrainConfig cfg;
  cfg.max_steps = 2000;
  cfg.peak_lr = 3e-3;
  cfg.batch_size = 32;
  cfg.warmup_steps = 100;
  cfg.eval_interval = 250;
  return cfg;
}

ExpCTrainConfig expc_paper_train_config() { return ExpCTrainConfig{}; }

ExpCTrainConfig expc_mini_train_config() {
  ExpCTrainConfig cfg;
  cfg.max_epochs = 200;
  cfg.batch_size = 8;
  cfg.peak_lr = 3e-3;
  cfg.lr_decay_step = 100;
  cfg.eval_interval = 20;
  return cfg;
}

Real mae(const Vec& pred, const Vec& target) {
  if (pred.size() != target.size()) {
    throw ShapeError("mae: " + std::to_string(pred.size()) + " predictions vs " +
                     std::to_string(target.size()) + " targets");
  }
  if (pred.size() == 0) throw ShapeError("mae: empty batch");
  return (pred - target).cwiseAbs().mean();
}

ad::Value mae_loss(ad::Value pred, const Vec& target) {
  if (pred.cols() != 1 || pred.rows() != target.size()) {
    throw ShapeError("mae_loss: predictions must be " + std::to_string(target.size()) +
                     "x1, got " + std::to_string(pred.rows()) + "x" +
                     std::to_string(pred.cols()));
  }
  if (target.size() == 0) throw ShapeError("mae_loss: empty batch");
  ad::Value tgt = ad::constant(*pred.tape, target);
  return ad::mean_all(ad::abs_val(ad::sub(pred, tgt)));
}

Real lr_linear_warmup_decay(std::int64_t step, const GraphormerTrainConfig& cfg) {
  if (step < 0 || step > cfg.max_steps) {
    throw ConfigError("lr_linear_warmup_decay: step " + std::to_string(step) +
                      " outside [0, " + std::to_string(cfg.max_steps) + "]");
  }
  if (step <= cfg.warmup_steps) {
    return cfg.peak_lr * (static_cast<Real>(step) / static_cast<Real>(cfg.warmup_steps));
  }
  return cfg.peak_lr * (static_cast<Real>(cfg.max_steps - step) /
                        static_cast<Real>(cfg.max_steps - cfg.warmup_steps));
}

Real lr_step_decay(std::int64_t epoch, const ExpCTrainConfig& cfg) {
  if (epoch < 0) throw ConfigError("lr_step_decay: negative epoch");
  const std::int64_t k = epoch / cfg.lr_decay_step;
  Real factor = 1.0;
  for (std::int64_t i = 0; i < k; ++i) factor *= cfg.lr_decay_rate;
  return cfg.peak_lr * factor;
}

AdamState adam_init(const ParameterStore& params) {
  AdamState st;
  st.m.reserve(params.count());
  st.v.reserve(params.count());
  for (std::size_t i = 0; i < params.count(); ++i) {
    const Mat& t = params.tensor(i);
    st.m.push_back(Mat::Zero(t.rows(), t.cols()));
    st.v.push_back(Mat::Zero(t.rows(), t.cols()));
  }
  return st;
}

void adam_step(ParameterStore& params, const std::vector<Mat>& grads, AdamState& state, Real lr,
               Real beta1, Real beta2, Real eps) {
  if (grads.size() != params.count() || state.m.size() != params.count()) {
    throw ShapeError("adam_step: gradient/state tensor count mismatch");
  }
  ++state.step;
  const Real bc1 = Real(1) - std::pow(beta1, static_cast<Real>(state.step));
  const Real bc2 = Real(1) - std::pow(beta2, static_cast<Real>(state.step));
  for (std::size_t i = 0; i < params.count(); ++i) {
    Mat& p = params.tensor(i);
    const Mat& g = grads[i];
    if (g.rows() != p.rows() || g.cols() != p.cols()) {
      throw ShapeError("adam_step: gradient shape mismatch for " + params.names()[i]);
    }
    if (!g.allFinite()) {
      throw NumericalError("adam_step: non-finite gradient in " + params.names()[i]);
    }
    Mat& m = state.m[i];
    Mat& v = state.v[i];
    m = beta1 * m + (Real(1) - beta1) * g;
    v = beta2 * v + (Real(1) - beta2) * g.cwiseProduct(g);
    p.array() -= lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + eps);
  }
}

Real clip_grad_norm(std::vector<Mat>& grads, Real max_norm) {
  Real ss = 0;
  for (const Mat& g : grads) {
    if (!g.allFinite()) throw NumericalError("clip_grad_norm: non-finite gradient");
    ss += g.squaredNorm();
  }
  const Real norm = std::sqrt(ss);
  if (!std::isfinite(norm)) throw NumericalError("clip_grad_norm: non-finite norm");
  if (max_norm > 0 && norm > max_norm) {
    const Real s = max_norm / norm;
    for (Mat& g : grads) g *= s;
  }
  return norm;
}

int FoldPlan::fold_of(const std::string& id) const {
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] == id) return fold[i];
  }
  throw ConfigError("fold_of: unknown id " + id);
}

std::vector<std::string> FoldPlan::ids_in_fold(int f) const {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (fold[i] == f) out.push_back(ids[i]);
  }
  return out;
}

std::vector<std::string> FoldPlan::ids_not_in_fold(int f) const {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (fold[i] != f) out.push_back(ids[i]);
  }
  return out;
}

FoldPlan kfold_split(const std::vector<std::string>& ids, int n_folds, std::uint64_t seed) {
  if (n_folds < 1) throw ConfigError("kfold_split: n_folds must be >= 1");
  if (static_cast<std::size_t>(n_folds) > ids.size()) {
    throw ConfigError("kfold_split: " + std::to_string(n_folds) + " folds for " +
                      std::to_string(ids.size()) + " ids");
  }
  std::unordered_set<std::string> seen;
  for (const std::string& id : ids) {
    if (!seen.insert(id).second) throw ValidationError("duplicate_id", "repeated id: " + id);
  }
  FoldPlan plan;
  plan.n_folds = n_folds;
  plan.ids = ids;
  Rng rng(seed);
  rng.shuffle(plan.ids);
  plan.fold.resize(plan.ids.size());
  for (std::size_t i = 0; i < plan.ids.size(); ++i) {
    plan.fold[i] = static_cast<int>(i % static_cast<std::size_t>(n_folds));
  }
  return plan;
}

namespace {

Vec targets_of(const GraphRefs& data, const char* who) {
  Vec t(static_cast<Eigen::Index>(data.size()));
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (!data[i]->target.has_value()) {
      throw ValidationError("missing_target",
                            std::string(who) + ": molecule '" + data[i]->id + "' has no target");
    }
    t(static_cast<Eigen::Index>(i)) = *data[i]->target;
  }
  return t;
}

std::string batch_id_list(const GraphRefs& batch) {
  std::string s;
  for (const FeaturizedGraph* fg : batch) {
    if (!s.empty()) s += ", ";
    s += fg->id;
  }
  return s;
}

// Divergence can overflow the gradients (or just their squared-norm sum)
// while the loss itself is still finite; report it with the step index
// rather than from inside the clipper.
void check_grads_finite(const std::vector<Mat>& grads, std::int64_t step, const GraphRefs& batch) {
  Real ss = 0;
  for (const Mat& g : grads) {
    if (g.allFinite()) {
      ss += g.squaredNorm();
      if (std::isfinite(ss)) continue;
    }
    throw NumericalError("fit: non-finite gradient at step " + std::to_string(step) +
                         "; batch ids: " + batch_id_list(batch));
  }
}

template <class ForwardFn>
Vec predict_batched(const GraphRefs& data, int batch_size, ForwardFn&& fwd) {
  if (batch_size < 1) throw ConfigError("predict: batch_size must be >= 1");
  Vec out(static_cast<Eigen::Index>(data.size()));
  for (std::size_t start = 0; start < data.size(); start += static_cast<std::size_t>(batch_size)) {
    const std::size_t stop = std::min(data.size(), start + static_cast<std::size_t>(batch_size));
    GraphRefs chunk(data.begin() + static_cast<std::ptrdiff_t>(start),
                    data.begin() + static_cast<std::ptrdiff_t>(stop));
    const Mat pred = fwd(chunk);
    for (std::size_t i = start; i < stop; ++i) {
      out(static_cast<Eigen::Index>(i)) = pred(static_cast<Eigen::Index>(i - start), 0);
    }
  }
  return out;
}

void emit_metric(std::ostream* out, const MetricPoint& mp) {
  if (!out) return;
  nlohmann::json j;
  j["step"] = mp.step;
  j["lr"] = mp.lr;
  j["train_mae"] = mp.train_mae;
  if (mp.val_mae) j["val_mae"] = *mp.val_mae;
  *out << j.dump() << '\n';
}

}  // namespace

Vec predict_graphormer(const GraphormerConfig& cfg, const ParameterStore& params,
                       const GraphRefs& data, int batch_size) {
  return predict_batched(data, batch_size, [&](const GraphRefs& chunk) {
    ad::Tape tape;
    BoundParams bound = bind(tape, params);
    return graphormer_forward(tape, cfg, bound, chunk, false, 0).data();
  });
}

Vec predict_expc(const ExpCConfig& cfg, const ParameterStore& params, const GraphRefs& data,
                 int batch_size) {
  return predict_batched(data, batch_size, [&](const GraphRefs& chunk) {
    ad::Tape tape;
    BoundParams bound = bind(tape, params);
    return expc_forward(tape, cfg, bound, chunk, false, 0).data();
  });
}

Real evaluate_mae_graphormer(const GraphormerConfig& cfg, const ParameterStore& params,
                             const GraphRefs& data, int batch_size) {
  return mae(predict_graphormer(cfg, params, data, batch_size), targets_of(data, "evaluate"));
}

Real evaluate_mae_expc(const ExpCConfig& cfg, const ParameterStore& params, const GraphRefs& data,
                       int batch_size) {
  return mae(predict_expc(cfg, params, data, batch_size), targets_of(data, "evaluate"));
}

FitResult fit_graphormer(const GraphormerConfig& cfg, const GraphormerTrainConfig& tcfg,
                         const DatasetSchema& schema, const GraphRefs& train,
                         const GraphRefs& val, std::uint64_t seed, bool augment,
                         const LaplaceParams& laplace, std::ostream* metrics_out) {
  cfg.validate();
  tcfg.validate();
  if (train.empty()) throw ValidationError("empty_train", "fit: no training molecules");
  (void)targets_of(train, "fit");
  if (!val.empty()) (void)targets_of(val, "fit");

  ParameterStore params = graphormer_init(cfg, schema, seed);
  AdamState opt = adam_init(params);
  FitResult res;
  ParameterStore best = params;
  Real best_val = std::numeric_limits<Real>::infinity();
  bool has_best = false;
  Real last_lr = 0.0;

  auto run_eval = [&](std::int64_t at_step) {
    MetricPoint mp;
    mp.step = at_step;
    mp.lr = last_lr;
    mp.train_mae = evaluate_mae_graphormer(cfg, params, train, tcfg.batch_size);
    if (!val.empty()) {
      const Real vm = evaluate_mae_graphormer(cfg, params, val, tcfg.batch_size);
      mp.val_mae = vm;
      if (vm < best_val) {
        best_val = vm;
        best = params;
        has_best = true;
      }
    }
    res.history.push_back(mp);
    emit_metric(metrics_out, mp);
  };

  std::vector<std::size_t> order(train.size());
  std::vector<FeaturizedGraph> epoch_graphs;
  std::size_t cursor = train.size();  // triggers a fresh epoch immediately
  std::int64_t epoch = -1;
  std::int64_t step = 0;

  while (step < tcfg.max_steps) {
    if (cursor >= order.size()) {
      ++epoch;
      std::iota(order.begin(), order.end(), std::size_t(0));
      Rng erng(mix_seed({seed, 0xE9ull, static_cast<std::uint64_t>(epoch)}));
      erng.shuffle(order);
      if (augment) {
        epoch_graphs.clear();
        epoch_graphs.reserve(train.size());
        for (const FeaturizedGraph* fg : train) {
          FeaturizedGraph copy = *fg;
          Rng arng(mix_seed({seed, fnv1a64(fg->id), static_cast<std::uint64_t>(epoch)}));
          copy.bond_dist = laplace_augment(copy.bond_dist, laplace, arng);
          epoch_graphs.push_back(std::move(copy));
        }
      }
      cursor = 0;
    }

    GraphRefs batch;
    batch.reserve(static_cast<std::size_t>(tcfg.batch_size));
    while (static_cast<int>(batch.size()) < tcfg.batch_size && cursor < order.size()) {
      const std::size_t i = order[cursor++];
      batch.push_back(augment ? &epoch_graphs[i] : train[i]);
    }
    const Vec tgt = targets_of(batch, "fit");

    ++step;
    ad::Tape tape;
    BoundParams bound = bind(tape, params);
    ad::Value pred = graphormer_forward(
        tape, cfg, bound, batch, true, mix_seed({seed, 0xD6ull, static_cast<std::uint64_t>(step)}));
    ad::Value loss = mae_loss(pred, tgt);
    if (!std::isfinite(loss.scalar())) {
      throw NumericalError("fit: non-finite loss at step " + std::to_string(step) +
                           "; batch ids: " + batch_id_list(batch));
    }
    tape.backward(loss);
    std::vector<Mat> grads;
    grads.reserve(bound.v.size());
    for (const ad::Value& v : bound.v) grads.push_back(v.grad());
    check_grads_finite(grads, step, batch);
    clip_grad_norm(grads, tcfg.grad_clip_norm);
    last_lr = lr_linear_warmup_decay(step, tcfg);
    adam_step(params, grads, opt, last_lr, tcfg.adam_beta1, tcfg.adam_beta2, tcfg.adam_eps);

    if (step % tcfg.eval_interval == 0) run_eval(step);
  }
  if (res.history.empty() || res.history.back().step != step) run_eval(step);

  res.steps_run = step;
  res.final_train_mae = res.history.back().train_mae;
  if (has_best) {
    res.best_val_mae = best_val;
    res.params = std::move(best);
  } else {
    res.params = std::move(params);
  }
  return res;
}

FitResult fit_expc(const ExpCConfig& cfg, const ExpCTrainConfig& tcfg,
                   const DatasetSchema& schema, const GraphRefs& train, const GraphRefs& val,
                   std::uint64_t seed, std::ostream* metrics_out) {
  cfg.validate();
  tcfg.validate();
  if (train.empty()) throw ValidationError("empty_train", "fit: no training molecules");
  (void)targets_of(train, "fit");
  if (!val.empty()) (void)targets_of(val, "fit");

  ParameterStore params = expc_init(cfg, schema, seed);
  AdamState opt = adam_init(params);
  FitResult res;
  ParameterStore best = params;
  Real best_val = std::numeric_limits<Real>::infinity();
  bool has_best = false;
  Real last_lr = 0.0;

  auto run_eval = [&](std::int64_t at_epoch) {
    MetricPoint mp;
    mp.step = at_epoch;
    mp.lr = last_lr;
    mp.train_mae = evaluate_mae_expc(cfg, params, train, tcfg.batch_size);
    if (!val.empty()) {
      const Real vm = evaluate_mae_expc(cfg, params, val, tcfg.batch_size);
      mp.val_mae = vm;
      if (vm < best_val) {
        best_val = vm;
        best = params;
        has_best = true;
      }
    }
    res.history.push_back(mp);
    emit_metric(metrics_out, mp);
  };

  std::vector<std::size_t> order(train.size());
  std::int64_t steps = 0;
  std::int64_t epochs_done = 0;
  for (int epoch = 0; epoch < tcfg.max_epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t(0));
    Rng erng(mix_seed({seed, 0xE9ull, static_cast<std::uint64_t>(epoch)}));
    erng.shuffle(order);
    const Real lr = lr_step_decay(epoch, tcfg);
    last_lr = lr;

    std::size_t cursor = 0;
    while (cursor < order.size()) {
      GraphRefs batch;
      batch.reserve(static_cast<std::size_t>(tcfg.batch_size));
      while (static_cast<int>(batch.size()) < tcfg.batch_size && cursor < order.size()) {
        batch.push_back(train[order[cursor++]]);
      }
      const Vec tgt = targets_of(batch, "fit");
      ++steps;
      ad::Tape tape;
      BoundParams bound = bind(tape, params);
      ad::Value pred = expc_forward(
          tape, cfg, bound, batch, true,
          mix_seed({seed, 0xD6ull, static_cast<std::uint64_t>(steps)}));
      ad::Value loss = mae_loss(pred, tgt);
      if (!std::isfinite(loss.scalar())) {
        throw NumericalError("fit: non-finite loss at step " + std::to_string(steps) +
                             " (epoch " + std::to_string(epoch) +
                             "); batch ids: " + batch_id_list(batch));
      }
      tape.backward(loss);
      std::vector<Mat> grads;
      grads.reserve(bound.v.size());
      for (const ad::Value& v : bound.v) grads.push_back(v.grad());
      check_grads_finite(grads, steps, batch);
      clip_grad_norm(grads, tcfg.grad_clip_norm);
      adam_step(params, grads, opt, lr, tcfg.adam_beta1, tcfg.adam_beta2, tcfg.adam_eps);
    }
    epochs_done = epoch + 1;
    if (epochs_done % tcfg.eval_interval == 0) run_eval(epochs_done);
  }
  if (res.history.empty() || res.history.back().step != epochs_done) run_eval(epochs_done);

  res.steps_run = steps;
  res.final_train_mae = res.history.back().train_mae;
  if (has_best) {
    res.best_val_mae = best_val;
    res.params = std::move(best);
  } else {
    res.params = std::move(params);
  }
  return res;
}

}  // namespace molprop
