#include "molprop/tape.hpp"

#include "molprop/rng.hpp"

#include <memory>
#include <string>
#include <utility>

namespace molprop::ad {

namespace {

std::string shape_str(const Mat& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

void require_same_tape(const Value& a, const Value& b, const char* op) {
  if (a.tape == nullptr || b.tape == nullptr || a.tape != b.tape) {
    throw ShapeError(std::string(op) + ": operands live on different tapes");
  }
}

void require_same_shape(const Value& a, const Value& b, const char* op) {
  require_same_tape(a, b, op);
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.data()) + " vs " +
                     shape_str(b.data()));
  }
}

}  // namespace

const Mat& Value::data() const { return tape->data(id); }
const Mat& Value::grad() const { return tape->grad(id); }

Real Value::scalar() const {
  const Mat& m = data();
  if (m.rows() != 1 || m.cols() != 1) {
    throw ShapeError("scalar(): value has shape " + shape_str(m));
  }
  return m(0, 0);
}

Value Tape::leaf(Mat data) { return make_node(std::move(data), BackwardFn()); }

Value Tape::make_node(Mat data, BackwardFn back) {
  Node n;
  n.grad = Mat::Zero(data.rows(), data.cols());
  n.data = std::move(data);
  n.back = std::move(back);
  nodes_.push_back(std::move(n));
  return Value{this, static_cast<int>(nodes_.size()) - 1};
}

void Tape::backward(const Value& loss) {
  if (loss.tape != this) throw ShapeError("backward: loss lives on a different tape");
  if (backward_done_) throw ShapeError("backward: tape already differentiated");
  const Mat& lm = data(loss.id);
  if (lm.rows() != 1 || lm.cols() != 1) {
    throw ShapeError("backward: loss must be 1x1, got " + shape_str(lm));
  }
  backward_done_ = true;
  grad(loss.id)(0, 0) = 1.0;
  for (int i = loss.id; i >= 0; --i) {
    Node& n = nodes_[static_cast<std::size_t>(i)];
    if (n.back) n.back(*this, i);
  }
}

Value constant(Tape& t, Mat m) { return t.leaf(std::move(m)); }

Value matmul(Value a, Value b) {
  require_same_tape(a, b, "matmul");
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: inner dims differ, " + shape_str(a.data()) + " * " +
                     shape_str(b.data()));
  }
  Mat out = a.data() * b.data();
  const int ai = a.id, bi = b.id;
  return a.tape->make_node(std::move(out), [ai, bi](Tape& t, int self) {
    t.grad(ai).noalias() += t.grad(self) * t.data(bi).transpose();
    t.grad(bi).noalias() += t.data(ai).transpose() * t.grad(self);
  });
}

Value add(Value a, Value b) {
  require_same_shape(a, b, "add");
  Mat out = a.data() + b.data();
  const int ai = a.id, bi = b.id;
  return a.tape->make_node(std::move(out), [ai, bi](Tape& t, int self) {
    t.grad(ai) += t.grad(self);
    t.grad(bi) += t.grad(self);
  });
}

Value sub(Value a, Value b) {
  require_same_shape(a, b, "sub");
  Mat out = a.data() - b.data();
  const int ai = a.id, bi = b.id;
  return a.tape->make_node(std::move(out), [ai, bi](Tape& t, int self) {
    t.grad(ai) += t.grad(self);
    t.grad(bi) -= t.grad(self);
  });
}

Value mul(Value a, Value b) {
  require_same_shape(a, b, "mul");
  Mat out = a.data().cwiseProduct(b.data());
  const int ai = a.id, bi = b.id;
  return a.tape->make_node(std::move(out), [ai, bi](Tape& t, int self) {
    t.grad(ai).array() += t.grad(self).array() * t.data(bi).array();
    t.grad(bi).array() += t.grad(self).array() * t.data(ai).array();
  });
}

Value neg(Value a) {
  Mat out = -a.data();
  const int ai = a.id;
  return a.tape->make_node(std::move(out),
                           [ai](Tape& t, int self) { t.grad(ai) -= t.grad(self); });
}

Value add_rowvec(Value a, Value v) {
  require_same_tape(a, v, "add_rowvec");
  if (v.rows() != 1 || v.cols() != a.cols()) {
    throw ShapeError("add_rowvec: expected 1x" + std::to_string(a.cols()) + " vector, got " +
                     shape_str(v.data()));
  }
  Mat out = a.data();
  out.rowwise() += v.data().row(0);
  const int ai = a.id, vi = v.id;
  return a.tape->make_node(std::move(out), [ai, vi](Tape& t, int self) {
    t.grad(ai) += t.grad(self);
    t.grad(vi).row(0) += t.grad(self).colwise().sum();
  });
}

Value scale(Value a, Real c) {
  Mat out = a.data() * c;
  const int ai = a.id;
  return a.tape->make_node(std::move(out),
                           [ai, c](Tape& t, int self) { t.grad(ai) += c * t.grad(self); });
}

Value add_const(Value a, Real c) {
  Mat out = a.data().array() + c;
  const int ai = a.id;
  return a.tape->make_node(std::move(out),
                           [ai](Tape& t, int self) { t.grad(ai) += t.grad(self); });
}

Value relu(Value a) {
  Mat out = a.data().cwiseMax(Real(0));
  const int ai = a.id;
  return a.tape->make_node(std::move(out), [ai](Tape& t, int self) {
    t.grad(ai).array() +=
        t.grad(self).array() * (t.data(ai).array() > Real(0)).cast<Real>();
  });
}

Value abs_val(Value a) {
  Mat out = a.data().cwiseAbs();
  const int ai = a.id;
  return a.tape->make_node(std::move(out), [ai](Tape& t, int self) {
    // sign() is 0 at 0, which is the subgradient we want at the kink
    t.grad(ai).array() += t.grad(self).array() * t.data(ai).array().sign();
  });
}

Value transpose(Value a) {
  Mat out = a.data().transpose();
  const int ai = a.id;
  return a.tape->make_node(std::move(out), [ai](Tape& t, int self) {
    t.grad(ai) += t.grad(self).transpose();
  });
}

Value softmax_rows(Value a) {
  if (a.cols() < 1) throw ShapeError("softmax_rows: empty rows, " + shape_str(a.data()));
  const Mat& x = a.data();
  Mat out(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const Real mx = x.row(r).maxCoeff();
    // scalar exp: Eigen's packet exp clamps instead of underflowing, which
    // would give masked (-1e30) logits a denormal weight instead of zero
    out.row(r) = (x.row(r).array() - mx).unaryExpr([](Real v) { return std::exp(v); });
    out.row(r) /= out.row(r).sum();
  }
  const int ai = a.id;
  return a.tape->make_node(std::move(out), [ai](Tape& t, int self) {
    const Mat& y = t.data(self);
    const Mat& g = t.grad(self);
    Mat& ga = t.grad(ai);
    for (Eigen::Index r = 0; r < y.rows(); ++r) {
      const Real dot = (g.row(r).array() * y.row(r).array()).sum();
      ga.row(r).array() += y.row(r).array() * (g.row(r).array() - dot);
    }
  });
}

Value layer_norm_rows(Value x, Value gamma, Value beta, Real eps) {
  require_same_tape(x, gamma, "layer_norm_rows");
  require_same_tape(x, beta, "layer_norm_rows");
  const Eigen::Index m = x.cols();
  if (gamma.rows() != 1 || gamma.cols() != m || beta.rows() != 1 || beta.cols() != m) {
    throw ShapeError("layer_norm_rows: gamma/beta must be 1x" + std::to_string(m) + ", got " +
                     shape_str(gamma.data()) + " and " + shape_str(beta.data()));
  }
  if (m < 1) throw ShapeError("layer_norm_rows: empty rows");
  const Mat& xd = x.data();
  auto xhat = std::make_shared<Mat>(xd.rows(), m);
  auto inv_std = std::make_shared<Vec>(xd.rows());
  Mat out(xd.rows(), m);
  for (Eigen::Index r = 0; r < xd.rows(); ++r) {
    const Real mu = xd.row(r).mean();
    const Real var = (xd.row(r).array() - mu).square().mean();
    const Real inv = Real(1) / std::sqrt(var + eps);
    (*inv_std)(r) = inv;
    xhat->row(r) = (xd.row(r).array() - mu) * inv;
    out.row(r) = xhat->row(r).cwiseProduct(gamma.data().row(0)) + beta.data().row(0);
  }
  const int xi = x.id, gi = gamma.id, bi = beta.id;
  return x.tape->make_node(std::move(out), [xi, gi, bi, xhat, inv_std](Tape& t, int self) {
    const Mat& g = t.grad(self);
    const Mat& gam = t.data(gi);
    t.grad(gi).row(0) += g.cwiseProduct(*xhat).colwise().sum();
    t.grad(bi).row(0) += g.colwise().sum();
    Mat& gx = t.grad(xi);
    const Eigen::Index m = g.cols();
    for (Eigen::Index r = 0; r < g.rows(); ++r) {
      const Eigen::Array<Real, 1, Eigen::Dynamic> gg = g.row(r).array() * gam.row(0).array();
      const Real m1 = gg.sum() / Real(m);
      const Real m2 = (gg * xhat->row(r).array()).sum() / Real(m);
      gx.row(r).array() += (*inv_std)(r) * (gg - m1 - xhat->row(r).array() * m2);
    }
  });
}

Value dropout(Value x, Real p, bool train, std::uint64_t seed) {
  if (!(p >= Real(0) && p < Real(1))) {
    throw ConfigError("dropout: probability must lie in [0, 1), got " + std::to_string(p));
  }
  if (!train || p == Real(0)) return x;
  Rng rng(seed);
  const Real keep_scale = Real(1) / (Real(1) - p);
  auto mask = std::make_shared<Mat>(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < mask->rows(); ++r) {
    for (Eigen::Index c = 0; c < mask->cols(); ++c) {
      (*mask)(r, c) = rng.uniform01() >= p ? keep_scale : Real(0);
    }
  }
  Mat out = x.data().cwiseProduct(*mask);
  const int xi = x.id;
  return x.tape->make_node(std::move(out), [xi, mask](Tape& t, int self) {
    t.grad(xi).array() += t.grad(self).array() * mask->array();
  });
}

Value embedding_lookup(Value table, const IVec& idx) {
  const Eigen::Index n_rows = table.rows();
  for (Eigen::Index i = 0; i < idx.size(); ++i) {
    if (idx(i) < 0 || idx(i) >= n_rows) {
      throw ShapeError("embedding_lookup: index " + std::to_string(idx(i)) +
                       " out of range for " + std::to_string(n_rows) + " rows");
    }
  }
  Mat out(idx.size(), table.cols());
  for (Eigen::Index i = 0; i < idx.size(); ++i) out.row(i) = table.data().row(idx(i));
  auto ids = std::make_shared<IVec>(idx);
  const int ti = table.id;
  return table.tape->make_node(std::move(out), [ti, ids](Tape& t, int self) {
    const Mat& g = t.grad(self);
    Mat& gt = t.grad(ti);
    for (Eigen::Index i = 0; i < ids->size(); ++i) gt.row((*ids)(i)) += g.row(i);
  });
}

Value scatter_sum_rows(Value x, const IVec& dst, Eigen::Index n_rows) {
  if (dst.size() != x.rows()) {
    throw ShapeError("scatter_sum_rows: " + std::to_string(dst.size()) + " indices for " +
                     std::to_string(x.rows()) + " rows");
  }
  for (Eigen::Index i = 0; i < dst.size(); ++i) {
    if (dst(i) < 0 || dst(i) >= n_rows) {
      throw ShapeError("scatter_sum_rows: destination " + std::to_string(dst(i)) +
                       " out of range for " + std::to_string(n_rows) + " rows");
    }
  }
  Mat out = Mat::Zero(n_rows, x.cols());
  for (Eigen::Index i = 0; i < dst.size(); ++i) out.row(dst(i)) += x.data().row(i);
  auto ids = std::make_shared<IVec>(dst);
  const int xi = x.id;
  return x.tape->make_node(std::move(out), [xi, ids](Tape& t, int self) {
    const Mat& g = t.grad(self);
    Mat& gx = t.grad(xi);
    for (Eigen::Index i = 0; i < ids->size(); ++i) gx.row(i) += g.row((*ids)(i));
  });
}

Value scatter_entries(Value vals, const IVec& ri, const IVec& ci, Eigen::Index rows,
                      Eigen::Index cols) {
  if (vals.cols() != 1 || vals.rows() != ri.size() || ri.size() != ci.size()) {
    throw ShapeError("scatter_entries: values must be kx1 with matching index vectors, got " +
                     shape_str(vals.data()) + " with " + std::to_string(ri.size()) + "/" +
                     std::to_string(ci.size()) + " indices");
  }
  for (Eigen::Index i = 0; i < ri.size(); ++i) {
    if (ri(i) < 0 || ri(i) >= rows || ci(i) < 0 || ci(i) >= cols) {
      throw ShapeError("scatter_entries: position (" + std::to_string(ri(i)) + ", " +
                       std::to_string(ci(i)) + ") outside " + std::to_string(rows) + "x" +
                       std::to_string(cols));
    }
  }
  Mat out = Mat::Zero(rows, cols);
  for (Eigen::Index i = 0; i < ri.size(); ++i) out(ri(i), ci(i)) += vals.data()(i, 0);
  auto rs = std::make_shared<IVec>(ri);
  auto cs = std::make_shared<IVec>(ci);
  const int vi = vals.id;
  return vals.tape->make_node(std::move(out), [vi, rs, cs](Tape& t, int self) {
    const Mat& g = t.grad(self);
    Mat& gv = t.grad(vi);
    for (Eigen::Index i = 0; i < rs->size(); ++i) gv(i, 0) += g((*rs)(i), (*cs)(i));
  });
}

Value sum_all(Value a) {
  Mat out(1, 1);
  out(0, 0) = a.data().sum();
  const int ai = a.id;
  return a.tape->make_node(std::move(out), [ai](Tape& t, int self) {
    t.grad(ai).array() += t.grad(self)(0, 0);
  });
}

Value mean_all(Value a) {
  const Eigen::Index n = a.rows() * a.cols();
  if (n == 0) throw ShapeError("mean_all: empty matrix");
  Mat out(1, 1);
  out(0, 0) = a.data().sum() / Real(n);
  const int ai = a.id;
  return a.tape->make_node(std::move(out), [ai, n](Tape& t, int self) {
    t.grad(ai).array() += t.grad(self)(0, 0) / Real(n);
  });
}

Value sum_axis(Value a, int axis) {
  if (axis != 0 && axis != 1) throw ShapeError("sum_axis: axis must be 0 or 1");
  const int ai = a.id;
  if (axis == 0) {
    Mat out = a.data().colwise().sum();
    return a.tape->make_node(std::move(out), [ai](Tape& t, int self) {
      t.grad(ai).rowwise() += t.grad(self).row(0);
    });
  }
  Mat out = a.data().rowwise().sum();
  return a.tape->make_node(std::move(out), [ai](Tape& t, int self) {
    t.grad(ai).colwise() += t.grad(self).col(0);
  });
}

Value concat_rows(Value a, Value b) {
  require_same_tape(a, b, "concat_rows");
  if (a.cols() != b.cols()) {
    throw ShapeError("concat_rows: column counts differ, " + shape_str(a.data()) + " vs " +
                     shape_str(b.data()));
  }
  Mat out(a.rows() + b.rows(), a.cols());
  out.topRows(a.rows()) = a.data();
  out.bottomRows(b.rows()) = b.data();
  const int ai = a.id, bi = b.id;
  const Eigen::Index na = a.rows(), nb = b.rows();
  return a.tape->make_node(std::move(out), [ai, bi, na, nb](Tape& t, int self) {
    t.grad(ai) += t.grad(self).topRows(na);
    t.grad(bi) += t.grad(self).bottomRows(nb);
  });
}

Value concat_cols(Value a, Value b) {
  require_same_tape(a, b, "concat_cols");
  if (a.rows() != b.rows()) {
    throw ShapeError("concat_cols: row counts differ, " + shape_str(a.data()) + " vs " +
                     shape_str(b.data()));
  }
  Mat out(a.rows(), a.cols() + b.cols());
  out.leftCols(a.cols()) = a.data();
  out.rightCols(b.cols()) = b.data();
  const int ai = a.id, bi = b.id;
  const Eigen::Index ca = a.cols(), cb = b.cols();
  return a.tape->make_node(std::move(out), [ai, bi, ca, cb](Tape& t, int self) {
    t.grad(ai) += t.grad(self).leftCols(ca);
    t.grad(bi) += t.grad(self).rightCols(cb);
  });
}

Value slice_rows(Value a, Eigen::Index r0, Eigen::Index n) {
  if (r0 < 0 || n < 0 || r0 + n > a.rows()) {
    throw ShapeError("slice_rows: [" + std::to_string(r0) + ", " + std::to_string(r0 + n) +
                     ") outside " + shape_str(a.data()));
  }
  Mat out = a.data().middleRows(r0, n);
  const int ai = a.id;
  return a.tape->make_node(std::move(out), [ai, r0, n](Tape& t, int self) {
    t.grad(ai).middleRows(r0, n) += t.grad(self);
  });
}

Value slice_cols(Value a, Eigen::Index c0, Eigen::Index n) {
  if (c0 < 0 || n < 0 || c0 + n > a.cols()) {
    throw ShapeError("slice_cols: [" + std::to_string(c0) + ", " + std::to_string(c0 + n) +
                     ") outside " + shape_str(a.data()));
  }
  Mat out = a.data().middleCols(c0, n);
  const int ai = a.id;
  return a.tape->make_node(std::move(out), [ai, c0, n](Tape& t, int self) {
    t.grad(ai).middleCols(c0, n) += t.grad(self);
  });
}

Value reshape(Value a, Eigen::Index rows, Eigen::Index cols) {
  if (rows * cols != a.rows() * a.cols()) {
    throw ShapeError("reshape: cannot view " + shape_str(a.data()) + " as " +
                     std::to_string(rows) + "x" + std::to_string(cols));
  }
  // Mat is row-major, so a flat remap preserves row-major element order.
  Mat out = Eigen::Map<const Mat>(a.data().data(), rows, cols);
  const int ai = a.id;
  return a.tape->make_node(std::move(out), [ai](Tape& t, int self) {
    Mat& ga = t.grad(ai);
    ga += Eigen::Map<const Mat>(t.grad(self).data(), ga.rows(), ga.cols());
  });
}

Value broadcast_scalar(Value s, Eigen::Index rows, Eigen::Index cols) {
  if (s.rows() != 1 || s.cols() != 1) {
    throw ShapeError("broadcast_scalar: source must be 1x1, got " + shape_str(s.data()));
  }
  Mat out = Mat::Constant(rows, cols, s.data()(0, 0));
  const int si = s.id;
  return s.tape->make_node(std::move(out), [si](Tape& t, int self) {
    t.grad(si)(0, 0) += t.grad(self).sum();
  });
}

}  // namespace molprop::ad
