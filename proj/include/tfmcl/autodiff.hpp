#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <utility>
#include <vector>

#include "tfmcl/errors.hpp"
#include "tfmcl/signal.hpp"

namespace tfmcl {

// Reverse-mode tape over dense Eigen matrices. Every node stores its value;
// backward() allocates gradients for the whole tape, seeds d(loss)/d(loss)=1
// and replays the recorded pull closures in reverse order. Scalars are 1x1
// matrices throughout so one node type covers everything.
template <typename Scalar>
class Tape {
 public:
  using Mat = MatX<Scalar>;

  struct Var {
    int id = -1;
  };

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  int size() const { return static_cast<int>(nodes_.size()); }

  Var leaf(Mat value) {
    Node n;
    n.value = std::move(value);
    return push(std::move(n));
  }

  const Mat& value(Var v) const { return node(v).value; }
  const Mat& grad(Var v) const {
    require(node(v).grad.size() > 0, "tape: backward() has not run");
    return node(v).grad;
  }

  void backward(Var loss) {
    const Node& ln = node(loss);
    require(ln.value.rows() == 1 && ln.value.cols() == 1,
            "tape: backward target must be a 1x1 scalar");
    for (auto& n : nodes_) n.grad = Mat::Zero(n.value.rows(), n.value.cols());
    nodes_[static_cast<std::size_t>(loss.id)].grad(0, 0) = Scalar(1);
    for (int i = loss.id; i >= 0; --i) {
      auto& n = nodes_[static_cast<std::size_t>(i)];
      if (n.pull) n.pull(*this);
    }
  }

  // ---- primitive operations ----

  Var matmul(Var a, Var b) {
    require(value(a).cols() == value(b).rows(), "matmul: inner dims disagree");
    Node n;
    n.value = value(a) * value(b);
    n.pull = [a, b, out = next_id()](Tape& t) {
      const Mat& g = t.node_grad(out);
      t.node_grad(a) += g * t.value(b).transpose();
      t.node_grad(b) += t.value(a).transpose() * g;
    };
    return push(std::move(n));
  }

  Var add(Var a, Var b) {
    same_shape(a, b, "add");
    Node n;
    n.value = value(a) + value(b);
    n.pull = [a, b, out = next_id()](Tape& t) {
      t.node_grad(a) += t.node_grad(out);
      t.node_grad(b) += t.node_grad(out);
    };
    return push(std::move(n));
  }

  Var sub(Var a, Var b) {
    same_shape(a, b, "sub");
    Node n;
    n.value = value(a) - value(b);
    n.pull = [a, b, out = next_id()](Tape& t) {
      t.node_grad(a) += t.node_grad(out);
      t.node_grad(b) -= t.node_grad(out);
    };
    return push(std::move(n));
  }

  // Broadcast-add a 1 x C row vector to every row.
  Var add_rowvec(Var a, Var v) {
    require(value(v).rows() == 1 && value(v).cols() == value(a).cols(),
            "add_rowvec: v must be 1 x cols(a)");
    Node n;
    n.value = value(a).rowwise() + value(v).row(0);
    n.pull = [a, v, out = next_id()](Tape& t) {
      const Mat& g = t.node_grad(out);
      t.node_grad(a) += g;
      t.node_grad(v) += g.colwise().sum();
    };
    return push(std::move(n));
  }

  // Broadcast-add an R x 1 column vector to every column.
  Var add_colvec(Var a, Var v) {
    require(value(v).cols() == 1 && value(v).rows() == value(a).rows(),
            "add_colvec: v must be rows(a) x 1");
    Node n;
    n.value = value(a).colwise() + value(v).col(0);
    n.pull = [a, v, out = next_id()](Tape& t) {
      const Mat& g = t.node_grad(out);
      t.node_grad(a) += g;
      t.node_grad(v) += g.rowwise().sum();
    };
    return push(std::move(n));
  }

  Var scale(Var a, Scalar c) {
    Node n;
    n.value = value(a) * c;
    n.pull = [a, c, out = next_id()](Tape& t) {
      t.node_grad(a) += t.node_grad(out) * c;
    };
    return push(std::move(n));
  }

  Var add_const(Var a, const Mat& c) {
    require(c.rows() == value(a).rows() && c.cols() == value(a).cols(),
            "add_const: shape mismatch");
    Node n;
    n.value = value(a) + c;
    n.pull = [a, out = next_id()](Tape& t) {
      t.node_grad(a) += t.node_grad(out);
    };
    return push(std::move(n));
  }

  Var hadamard(Var a, Var b) {
    same_shape(a, b, "hadamard");
    Node n;
    n.value = value(a).cwiseProduct(value(b));
    n.pull = [a, b, out = next_id()](Tape& t) {
      const Mat& g = t.node_grad(out);
      t.node_grad(a) += g.cwiseProduct(t.value(b));
      t.node_grad(b) += g.cwiseProduct(t.value(a));
    };
    return push(std::move(n));
  }

  Var hadamard_const(Var a, const Mat& c) {
    require(c.rows() == value(a).rows() && c.cols() == value(a).cols(),
            "hadamard_const: shape mismatch");
    Node n;
    n.value = value(a).cwiseProduct(c);
    n.pull = [a, c, out = next_id()](Tape& t) {
      t.node_grad(a) += t.node_grad(out).cwiseProduct(c);
    };
    return push(std::move(n));
  }

  Var transpose(Var a) {
    Node n;
    n.value = value(a).transpose();
    n.pull = [a, out = next_id()](Tape& t) {
      t.node_grad(a) += t.node_grad(out).transpose();
    };
    return push(std::move(n));
  }

  Var relu(Var a) {
    Node n;
    n.value = value(a).cwiseMax(Scalar(0));
    n.pull = [a, out = next_id()](Tape& t) {
      t.node_grad(a).array() +=
          t.node_grad(out).array() *
          (t.value(a).array() > Scalar(0)).template cast<Scalar>();
    };
    return push(std::move(n));
  }

  Var exp_elem(Var a) {
    Node n;
    n.value = value(a).array().exp().matrix();
    n.pull = [a, out = next_id()](Tape& t) {
      t.node_grad(a).array() +=
          t.node_grad(out).array() * t.value(out).array();
    };
    return push(std::move(n));
  }

  Var log_elem(Var a) {
    require((value(a).array() > Scalar(0)).all(),
            "log: requires strictly positive input");
    Node n;
    n.value = value(a).array().log().matrix();
    n.pull = [a, out = next_id()](Tape& t) {
      t.node_grad(a).array() +=
          t.node_grad(out).array() / t.value(a).array();
    };
    return push(std::move(n));
  }

  Var reciprocal(Var a) {
    require((value(a).array() != Scalar(0)).all(), "reciprocal: zero input");
    Node n;
    n.value = value(a).array().inverse().matrix();
    n.pull = [a, out = next_id()](Tape& t) {
      // d(1/x) = -y^2 dx with y = 1/x
      t.node_grad(a).array() -= t.node_grad(out).array() *
                                t.value(out).array() * t.value(out).array();
    };
    return push(std::move(n));
  }

  // Reorder / duplicate rows: out.row(i) = a.row(rows[i]).
  Var gather_rows(Var a, std::vector<int> rows) {
    const Mat& av = value(a);
    for (int r : rows)
      require(r >= 0 && r < av.rows(), "gather_rows: index out of range");
    Node n;
    n.value.resize(static_cast<Eigen::Index>(rows.size()), av.cols());
    for (std::size_t i = 0; i < rows.size(); ++i)
      n.value.row(static_cast<Eigen::Index>(i)) = av.row(rows[i]);
    n.pull = [a, rows = std::move(rows), out = next_id()](Tape& t) {
      const Mat& g = t.node_grad(out);
      Mat& ga = t.node_grad(a);
      for (std::size_t i = 0; i < rows.size(); ++i)
        ga.row(rows[i]) += g.row(static_cast<Eigen::Index>(i));
    };
    return push(std::move(n));
  }

  // Arbitrary re-indexing: out has shape (out_rows, out_cols) and its
  // row-major element p takes a's row-major element src[p]. Used for im2col
  // and reshape-style plumbing so convolutions reduce to one matmul.
  Var gather_linear(Var a, std::vector<int> src, int out_rows, int out_cols) {
    const Mat& av = value(a);
    const int a_cols = static_cast<int>(av.cols());
    require(static_cast<int>(src.size()) == out_rows * out_cols,
            "gather_linear: index count != output size");
    for (int q : src)
      require(q >= 0 && q < av.rows() * av.cols(),
              "gather_linear: index out of range");
    Node n;
    n.value.resize(out_rows, out_cols);
    for (int p = 0; p < out_rows * out_cols; ++p) {
      const int q = src[static_cast<std::size_t>(p)];
      n.value(p / out_cols, p % out_cols) = av(q / a_cols, q % a_cols);
    }
    n.pull = [a, src = std::move(src), out_cols, a_cols,
              out = next_id()](Tape& t) {
      const Mat& g = t.node_grad(out);
      Mat& ga = t.node_grad(a);
      for (int p = 0; p < static_cast<int>(src.size()); ++p) {
        const int q = src[static_cast<std::size_t>(p)];
        ga(q / a_cols, q % a_cols) += g(p / out_cols, p % out_cols);
      }
    };
    return push(std::move(n));
  }

  Var concat_rows(const std::vector<Var>& parts) {
    require(!parts.empty(), "concat_rows: no parts");
    const Eigen::Index cols = value(parts[0]).cols();
    Eigen::Index rows = 0;
    for (Var p : parts) {
      require(value(p).cols() == cols, "concat_rows: column mismatch");
      rows += value(p).rows();
    }
    Node n;
    n.value.resize(rows, cols);
    Eigen::Index at = 0;
    for (Var p : parts) {
      n.value.middleRows(at, value(p).rows()) = value(p);
      at += value(p).rows();
    }
    n.pull = [parts, out = next_id()](Tape& t) {
      const Mat& g = t.node_grad(out);
      Eigen::Index at = 0;
      for (Var p : parts) {
        const Eigen::Index r = t.value(p).rows();
        t.node_grad(p) += g.middleRows(at, r);
        at += r;
      }
    };
    return push(std::move(n));
  }

  // Rows scaled to unit Euclidean norm. A zero row is a degenerate input:
  // its direction is undefined, so this throws instead of returning zeros.
  Var row_l2_normalize(Var a) {
    const Mat& av = value(a);
    Node n;
    n.value.resizeLike(av);
    for (Eigen::Index r = 0; r < av.rows(); ++r) {
      const Scalar nrm = av.row(r).norm();
      if (nrm == Scalar(0))
        throw DegenerateInput("row_l2_normalize: zero-norm row " +
                              std::to_string(r));
      n.value.row(r) = av.row(r) / nrm;
    }
    n.pull = [a, out = next_id()](Tape& t) {
      const Mat& g = t.node_grad(out);
      const Mat& av = t.value(a);
      const Mat& y = t.value(out);
      Mat& ga = t.node_grad(a);
      for (Eigen::Index r = 0; r < av.rows(); ++r) {
        const Scalar nrm = av.row(r).norm();
        const Scalar gy = g.row(r).dot(y.row(r));
        ga.row(r) += (g.row(r) - gy * y.row(r)) / nrm;
      }
    };
    return push(std::move(n));
  }

  Var row_softmax(Var a) {
    const Mat& av = value(a);
    Node n;
    n.value.resizeLike(av);
    for (Eigen::Index r = 0; r < av.rows(); ++r) {
      const Scalar m = av.row(r).maxCoeff();
      VecX<Scalar> e = (av.row(r).array() - m).exp();
      n.value.row(r) = e.transpose() / e.sum();
    }
    n.pull = [a, out = next_id()](Tape& t) {
      const Mat& g = t.node_grad(out);
      const Mat& y = t.value(out);
      Mat& ga = t.node_grad(a);
      for (Eigen::Index r = 0; r < y.rows(); ++r) {
        const Scalar dot = g.row(r).dot(y.row(r));
        ga.row(r) += (g.row(r).array() - dot).matrix().cwiseProduct(y.row(r));
      }
    };
    return push(std::move(n));
  }

  // Per-row log-sum-exp, shifted by the (detached) row max. The shift cancels
  // exactly in the result, so detaching it does not perturb gradients.
  Var row_logsumexp(Var a) {
    const Mat& av = value(a);
    Node n;
    n.value.resize(av.rows(), 1);
    for (Eigen::Index r = 0; r < av.rows(); ++r) {
      const Scalar m = av.row(r).maxCoeff();
      n.value(r, 0) = m + std::log((av.row(r).array() - m).exp().sum());
    }
    n.pull = [a, out = next_id()](Tape& t) {
      const Mat& g = t.node_grad(out);
      const Mat& av = t.value(a);
      const Mat& lse = t.value(out);
      Mat& ga = t.node_grad(a);
      for (Eigen::Index r = 0; r < av.rows(); ++r)
        ga.row(r).array() +=
            g(r, 0) * (av.row(r).array() - lse(r, 0)).exp();
    };
    return push(std::move(n));
  }

  // Per-row layer norm with learned gain/bias (each 1 x C).
  Var layer_norm_rows(Var x, Var gain, Var bias, Scalar eps) {
    const Mat& xv = value(x);
    const Eigen::Index c = xv.cols();
    require(value(gain).rows() == 1 && value(gain).cols() == c,
            "layer_norm_rows: gain must be 1 x cols(x)");
    require(value(bias).rows() == 1 && value(bias).cols() == c,
            "layer_norm_rows: bias must be 1 x cols(x)");
    Node n;
    n.value.resizeLike(xv);
    for (Eigen::Index r = 0; r < xv.rows(); ++r) {
      const Scalar mu = xv.row(r).mean();
      const Scalar var = (xv.row(r).array() - mu).square().mean();
      const Scalar s = std::sqrt(var + eps);
      n.value.row(r) =
          (((xv.row(r).array() - mu) / s) * value(gain).row(0).array() +
           value(bias).row(0).array())
              .matrix();
    }
    n.pull = [x, gain, bias, eps, out = next_id()](Tape& t) {
      const Mat& g = t.node_grad(out);
      const Mat& xv = t.value(x);
      const auto gv = t.value(gain).row(0).array();
      for (Eigen::Index r = 0; r < xv.rows(); ++r) {
        const Scalar mu = xv.row(r).mean();
        const Scalar var = (xv.row(r).array() - mu).square().mean();
        const Scalar s = std::sqrt(var + eps);
        Eigen::Array<Scalar, 1, Eigen::Dynamic> xhat =
            (xv.row(r).array() - mu) / s;
        Eigen::Array<Scalar, 1, Eigen::Dynamic> dxhat = g.row(r).array() * gv;
        const Scalar mean_dxhat = dxhat.mean();
        const Scalar mean_dxhat_xhat = (dxhat * xhat).mean();
        t.node_grad(x).row(r).array() +=
            (dxhat - mean_dxhat - xhat * mean_dxhat_xhat) / s;
        t.node_grad(gain).row(0).array() += g.row(r).array() * xhat;
        t.node_grad(bias).row(0).array() += g.row(r).array();
      }
    };
    return push(std::move(n));
  }

  // Column means: R x C -> 1 x C.
  Var mean_rows(Var a) {
    const Mat& av = value(a);
    Node n;
    n.value = av.colwise().mean();
    n.pull = [a, out = next_id()](Tape& t) {
      const Mat& g = t.node_grad(out);
      const auto r = t.value(a).rows();
      t.node_grad(a) +=
          (Mat::Ones(r, 1) * g) / static_cast<Scalar>(r);
    };
    return push(std::move(n));
  }

  // Row sums: R x C -> R x 1.
  Var rowwise_sum(Var a) {
    Node n;
    n.value = value(a).rowwise().sum();
    n.pull = [a, out = next_id()](Tape& t) {
      t.node_grad(a).colwise() += t.node_grad(out).col(0);
    };
    return push(std::move(n));
  }

  Var sum_all(Var a) {
    Node n;
    n.value = Mat::Constant(1, 1, value(a).sum());
    n.pull = [a, out = next_id()](Tape& t) {
      t.node_grad(a).array() += t.node_grad(out)(0, 0);
    };
    return push(std::move(n));
  }

  Var mean_all(Var a) {
    const Mat& av = value(a);
    Node n;
    n.value = Mat::Constant(1, 1, av.mean());
    n.pull = [a, count = static_cast<Scalar>(av.size()),
              out = next_id()](Tape& t) {
      t.node_grad(a).array() += t.node_grad(out)(0, 0) / count;
    };
    return push(std::move(n));
  }

 private:
  struct Node {
    Mat value;
    Mat grad;
    std::function<void(Tape&)> pull;
  };

  int next_id() const { return static_cast<int>(nodes_.size()); }

  void same_shape(Var a, Var b, const char* op) const {
    require(value(a).rows() == value(b).rows() &&
                value(a).cols() == value(b).cols(),
            std::string(op) + ": shape mismatch");
  }

  Var push(Node n) {
    if (!n.value.allFinite())
      throw NumericError("tape: non-finite value at node " +
                         std::to_string(nodes_.size()));
    nodes_.push_back(std::move(n));
    return Var{static_cast<int>(nodes_.size()) - 1};
  }

  const Node& node(Var v) const {
    require(v.id >= 0 && v.id < size(), "tape: invalid var");
    return nodes_[static_cast<std::size_t>(v.id)];
  }

  Mat& node_grad(Var v) { return nodes_[static_cast<std::size_t>(v.id)].grad; }
  Mat& node_grad(int id) { return nodes_[static_cast<std::size_t>(id)].grad; }
  const Mat& value(int id) const {
    return nodes_[static_cast<std::size_t>(id)].value;
  }

  std::vector<Node> nodes_;
};

}  // namespace tfmcl
