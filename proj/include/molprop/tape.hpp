#pragma once

#include "molprop/errors.hpp"
#include "molprop/types.hpp"

#include <cstdint>
#include <functional>
#include <vector>

namespace molprop::ad {

class Tape;

/// Lightweight handle to a node on a tape. The node's data is immutable once
/// created; its grad is filled by Tape::backward.
struct Value {
  Tape* tape = nullptr;
  int id = -1;

  const Mat& data() const;
  const Mat& grad() const;
  Eigen::Index rows() const { return data().rows(); }
  Eigen::Index cols() const { return data().cols(); }
  Real scalar() const;
};

/// Reverse-mode computation record over dense real matrices. Nodes are
/// appended in forward order, which is a topological order by construction;
/// backward walks the record once in reverse.
class Tape {
 public:
  /// Backward rule: receives the tape and the node's own index; reads
  /// grad(self) and accumulates into the parents' grads.
  using BackwardFn = std::function<void(Tape&, int)>;

  Value leaf(Mat data);
  Value make_node(Mat data, BackwardFn back);

  Mat& data(int id) { return nodes_[static_cast<std::size_t>(id)].data; }
  Mat& grad(int id) { return nodes_[static_cast<std::size_t>(id)].grad; }
  int size() const { return static_cast<int>(nodes_.size()); }

  /// Seeds d(loss)/d(loss) = 1 and propagates through every recorded node
  /// exactly once. The loss must be scalar (1x1). Single use per tape.
  void backward(const Value& loss);

 private:
  struct Node {
    Mat data;
    Mat grad;
    BackwardFn back;
  };
  std::vector<Node> nodes_;
  bool backward_done_ = false;
};

// ---- forward op set -------------------------------------------------------
// Each op validates shapes (ShapeError reports both operand shapes) and
// registers its backward rule on the tape.

Value constant(Tape& t, Mat m);

Value matmul(Value a, Value b);
Value add(Value a, Value b);                 // same shape
Value sub(Value a, Value b);
Value mul(Value a, Value b);                 // element-wise
Value neg(Value a);
Value add_rowvec(Value a, Value v);          // v is 1 x cols, broadcast over rows
Value scale(Value a, Real c);
Value add_const(Value a, Real c);
Value relu(Value a);
Value abs_val(Value a);                      // subgradient 0 at 0
Value transpose(Value a);
Value softmax_rows(Value a);                 // stable via row-max subtraction
Value layer_norm_rows(Value x, Value gamma, Value beta, Real eps = 1e-5);
Value dropout(Value x, Real p, bool train, std::uint64_t seed);
Value embedding_lookup(Value table, const IVec& idx);
inline Value gather_rows(Value a, const IVec& idx) { return embedding_lookup(a, idx); }
Value scatter_sum_rows(Value x, const IVec& dst, Eigen::Index n_rows);
Value scatter_entries(Value vals, const IVec& ri, const IVec& ci, Eigen::Index rows,
                      Eigen::Index cols);
Value sum_all(Value a);
Value mean_all(Value a);
Value sum_axis(Value a, int axis);           // 0: 1 x m column sums; 1: n x 1 row sums
Value concat_rows(Value a, Value b);
Value concat_cols(Value a, Value b);
Value slice_rows(Value a, Eigen::Index r0, Eigen::Index n);
Value slice_cols(Value a, Eigen::Index c0, Eigen::Index n);
Value reshape(Value a, Eigen::Index rows, Eigen::Index cols);  // row-major order
Value broadcast_scalar(Value s, Eigen::Index rows, Eigen::Index cols);

}  // namespace molprop::ad
