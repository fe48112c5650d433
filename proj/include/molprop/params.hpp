#pragma once

#include "molprop/errors.hpp"
#include "molprop/rng.hpp"
#include "molprop/tape.hpp"
#include "molprop/types.hpp"

#include <cstdint>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace molprop {

/// Named model parameters with stable insertion order. Order matters: the
/// optimizer walks tensors positionally and checkpoints must round-trip
/// bit for bit.
class ParameterStore {
 public:
  Mat& add(const std::string& name, Mat init);
  Mat& at(const std::string& name);
  const Mat& at(const std::string& name) const;
  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  std::size_t index_of(const std::string& name) const;

  const std::vector<std::string>& names() const { return order_; }
  std::size_t count() const { return order_.size(); }
  Mat& tensor(std::size_t i) { return tensors_[i]; }
  const Mat& tensor(std::size_t i) const { return tensors_[i]; }
  std::int64_t total_scalars() const;

 private:
  std::vector<std::string> order_;
  std::vector<Mat> tensors_;
  std::unordered_map<std::string, std::size_t> index_;
};

// initializers
Mat init_uniform_fanin(Rng& rng, Eigen::Index rows, Eigen::Index cols);  // U(+-1/sqrt(rows))
Mat init_normal(Rng& rng, Eigen::Index rows, Eigen::Index cols, Real stddev = 0.02);

/// Parameters lifted onto a tape as leaves, one Value per tensor in store
/// order. After backward, v[i].grad() is the gradient of tensor i.
struct BoundParams {
  const ParameterStore* store = nullptr;
  std::vector<ad::Value> v;

  ad::Value at(const std::string& name) const { return v[store->index_of(name)]; }
};

BoundParams bind(ad::Tape& tape, const ParameterStore& store);

/// Same binding but over caller-supplied tensors (grad_check feeds perturbed
/// copies through here). `tensors` must match the store's order and count.
BoundParams bind_values(const ParameterStore& store, std::vector<ad::Value> tensors);

/// Binary checkpoint: magic, JSON metadata blob, then named f64 tensors in
/// store order. A human-readable sidecar (path + ".txt") lists the contents.
void save_checkpoint(const std::string& path, const std::string& meta_json,
                     const ParameterStore& store);
std::pair<std::string, ParameterStore> load_checkpoint(const std::string& path);

}  // namespace molprop
