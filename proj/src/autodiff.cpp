#include "hetnav/autodiff.hpp"

#include <cmath>
#include <cstddef>

#ifdef HETNAV_WITH_BLAS
#include <cblas.h>
#endif

namespace hetnav::ad {

void matmul_accumulate(bool trans_a, bool trans_b, double alpha,
                       const Tensor& a, const Tensor& b, double beta,
                       Tensor& out) {
  const int m = trans_a ? a.cols : a.rows;
  const int k = trans_a ? a.rows : a.cols;
  const int kb = trans_b ? b.cols : b.rows;
  const int n = trans_b ? b.rows : b.cols;
  if (k != kb || out.rows != m || out.cols != n) {
    throw std::invalid_argument("matmul_accumulate: shape mismatch");
  }
  if (m == 0 || n == 0) return;
#ifdef HETNAV_WITH_BLAS
  cblas_dgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans,
              trans_b ? CblasTrans : CblasNoTrans, m, n, k, alpha,
              a.data.data(), a.cols, b.data.data(), b.cols, beta,
              out.data.data(), out.cols);
#else
  if (beta == 0.0) {
    std::fill(out.data.begin(), out.data.end(), 0.0);
  } else if (beta != 1.0) {
    for (double& x : out.data) x *= beta;
  }
  for (int i = 0; i < m; ++i) {
    for (int p = 0; p < k; ++p) {
      const double av = trans_a ? a.at(p, i) : a.at(i, p);
      if (av == 0.0) continue;
      const double s = alpha * av;
      for (int j = 0; j < n; ++j) {
        out.at(i, j) += s * (trans_b ? b.at(j, p) : b.at(p, j));
      }
    }
  }
#endif
}

NodeId Tape::input(Tensor value) {
  return push(Node{Op::Input, {}, std::move(value)});
}

NodeId Tape::matmul(NodeId a, NodeId b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  if (ta.cols != tb.rows) throw std::invalid_argument("matmul: inner dims differ");
  Tensor out(ta.rows, tb.cols);
  matmul_accumulate(false, false, 1.0, ta, tb, 0.0, out);
  return push(Node{Op::Matmul, {a, b}, std::move(out)});
}

NodeId Tape::affine(NodeId x, NodeId w, NodeId b) {
  const Tensor& tx = value(x);
  const Tensor& tw = value(w);
  const Tensor& tb = value(b);
  if (tx.cols != tw.rows || tb.rows != 1 || tb.cols != tw.cols) {
    throw std::invalid_argument("affine: shape mismatch");
  }
  Tensor out(tx.rows, tw.cols);
  for (int i = 0; i < out.rows; ++i) {
    for (int j = 0; j < out.cols; ++j) out.at(i, j) = tb.at(0, j);
  }
  matmul_accumulate(false, false, 1.0, tx, tw, 1.0, out);
  return push(Node{Op::Affine, {x, w, b}, std::move(out)});
}

NodeId Tape::relu(NodeId x) {
  Tensor out = value(x);
  for (double& v : out.data) v = v > 0.0 ? v : 0.0;
  return push(Node{Op::Relu, {x}, std::move(out)});
}

NodeId Tape::add(NodeId x, NodeId y) {
  const Tensor& tx = value(x);
  const Tensor& ty = value(y);
  if (!tx.same_shape(ty)) throw std::invalid_argument("add: shape mismatch");
  Tensor out = tx;
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] += ty.data[i];
  return push(Node{Op::Add, {x, y}, std::move(out)});
}

NodeId Tape::sub(NodeId x, NodeId y) {
  const Tensor& tx = value(x);
  const Tensor& ty = value(y);
  if (!tx.same_shape(ty)) throw std::invalid_argument("sub: shape mismatch");
  Tensor out = tx;
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] -= ty.data[i];
  return push(Node{Op::Sub, {x, y}, std::move(out)});
}

NodeId Tape::mul(NodeId x, NodeId y) {
  const Tensor& tx = value(x);
  const Tensor& ty = value(y);
  if (!tx.same_shape(ty)) throw std::invalid_argument("mul: shape mismatch");
  Tensor out = tx;
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] *= ty.data[i];
  return push(Node{Op::Mul, {x, y}, std::move(out)});
}

NodeId Tape::scale(NodeId x, double s) {
  Tensor out = value(x);
  for (double& v : out.data) v *= s;
  Node node{Op::Scale, {x}, std::move(out)};
  node.scalar = s;
  return push(std::move(node));
}

NodeId Tape::sum_rows(NodeId x) {
  const Tensor& tx = value(x);
  Tensor out(1, tx.cols);
  for (int i = 0; i < tx.rows; ++i) {
    for (int j = 0; j < tx.cols; ++j) out.at(0, j) += tx.at(i, j);
  }
  return push(Node{Op::SumRows, {x}, std::move(out)});
}

NodeId Tape::sum_all(NodeId x) {
  const Tensor& tx = value(x);
  Tensor out(1, 1);
  double s = 0.0;
  for (double v : tx.data) s += v;
  out.at(0, 0) = s;
  return push(Node{Op::SumAll, {x}, std::move(out)});
}

NodeId Tape::concat_rows(const std::vector<NodeId>& xs) {
  if (xs.empty()) throw std::invalid_argument("concat_rows: empty list");
  const int cols = value(xs[0]).cols;
  int rows = 0;
  for (NodeId id : xs) {
    if (value(id).cols != cols) {
      throw std::invalid_argument("concat_rows: column mismatch");
    }
    rows += value(id).rows;
  }
  Tensor out(rows, cols);
  int at = 0;
  for (NodeId id : xs) {
    const Tensor& t = value(id);
    std::copy(t.data.begin(), t.data.end(),
              out.data.begin() + static_cast<std::ptrdiff_t>(at) * cols);
    at += t.rows;
  }
  return push(Node{Op::ConcatRows, xs, std::move(out)});
}

NodeId Tape::row_gather(NodeId x, std::vector<int> rows) {
  const Tensor& tx = value(x);
  Tensor out(static_cast<int>(rows.size()), tx.cols);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] < 0 || rows[i] >= tx.rows) {
      throw std::invalid_argument("row_gather: row index out of range");
    }
    std::copy_n(tx.data.begin() + static_cast<std::ptrdiff_t>(rows[i]) * tx.cols,
                tx.cols, out.data.begin() + static_cast<std::ptrdiff_t>(i) * tx.cols);
  }
  Node node{Op::RowGather, {x}, std::move(out)};
  node.indices = std::move(rows);
  return push(std::move(node));
}

NodeId Tape::segment_sum(NodeId x, std::vector<int> segments, int n_segments) {
  const Tensor& tx = value(x);
  if (static_cast<int>(segments.size()) != tx.rows) {
    throw std::invalid_argument("segment_sum: one segment id per row required");
  }
  Tensor out(n_segments, tx.cols);
  for (int i = 0; i < tx.rows; ++i) {
    if (segments[i] < 0 || segments[i] >= n_segments) {
      throw std::invalid_argument("segment_sum: segment id out of range");
    }
    for (int j = 0; j < tx.cols; ++j) {
      out.at(segments[i], j) += tx.at(i, j);
    }
  }
  Node node{Op::SegmentSum, {x}, std::move(out)};
  node.indices = std::move(segments);
  return push(std::move(node));
}

NodeId Tape::row_scale(NodeId x, std::vector<double> factors) {
  const Tensor& tx = value(x);
  if (static_cast<int>(factors.size()) != tx.rows) {
    throw std::invalid_argument("row_scale: one factor per row required");
  }
  Tensor out = tx;
  for (int i = 0; i < tx.rows; ++i) {
    for (int j = 0; j < tx.cols; ++j) out.at(i, j) *= factors[i];
  }
  Node node{Op::RowScale, {x}, std::move(out)};
  node.factors = std::move(factors);
  return push(std::move(node));
}

std::vector<Tensor> Tape::gradients(NodeId loss,
                                    const std::vector<NodeId>& wrt) const {
  check(loss);
  const Tensor& loss_value = nodes_[loss].value;
  if (loss_value.rows != 1 || loss_value.cols != 1) {
    throw std::invalid_argument("gradients: loss must be a 1x1 tensor");
  }

  std::vector<Tensor> adjoint(nodes_.size());
  std::vector<bool> live(nodes_.size(), false);
  auto ensure = [&](NodeId id) -> Tensor& {
    if (!live[id]) {
      adjoint[id] =
          Tensor(nodes_[id].value.rows, nodes_[id].value.cols);
      live[id] = true;
    }
    return adjoint[id];
  };

  ensure(loss).at(0, 0) = 1.0;

  for (NodeId id = loss; id >= 0; --id) {
    if (!live[id]) continue;
    const Node& node = nodes_[id];
    const Tensor& dy = adjoint[id];
    switch (node.op) {
      case Op::Input:
        break;
      case Op::Matmul: {
        const Tensor& a = nodes_[node.parents[0]].value;
        const Tensor& b = nodes_[node.parents[1]].value;
        matmul_accumulate(false, true, 1.0, dy, b, 1.0, ensure(node.parents[0]));
        matmul_accumulate(true, false, 1.0, a, dy, 1.0, ensure(node.parents[1]));
        break;
      }
      case Op::Affine: {
        const Tensor& x = nodes_[node.parents[0]].value;
        const Tensor& w = nodes_[node.parents[1]].value;
        matmul_accumulate(false, true, 1.0, dy, w, 1.0, ensure(node.parents[0]));
        matmul_accumulate(true, false, 1.0, x, dy, 1.0, ensure(node.parents[1]));
        Tensor& db = ensure(node.parents[2]);
        for (int i = 0; i < dy.rows; ++i) {
          for (int j = 0; j < dy.cols; ++j) db.at(0, j) += dy.at(i, j);
        }
        break;
      }
      case Op::Relu: {
        // Subgradient 0 at 0.
        const Tensor& x = nodes_[node.parents[0]].value;
        Tensor& dx = ensure(node.parents[0]);
        for (std::size_t i = 0; i < dy.size(); ++i) {
          if (x.data[i] > 0.0) dx.data[i] += dy.data[i];
        }
        break;
      }
      case Op::Add: {
        Tensor& dx = ensure(node.parents[0]);
        for (std::size_t i = 0; i < dy.size(); ++i) dx.data[i] += dy.data[i];
        Tensor& dz = ensure(node.parents[1]);
        for (std::size_t i = 0; i < dy.size(); ++i) dz.data[i] += dy.data[i];
        break;
      }
      case Op::Sub: {
        Tensor& dx = ensure(node.parents[0]);
        for (std::size_t i = 0; i < dy.size(); ++i) dx.data[i] += dy.data[i];
        Tensor& dz = ensure(node.parents[1]);
        for (std::size_t i = 0; i < dy.size(); ++i) dz.data[i] -= dy.data[i];
        break;
      }
      case Op::Mul: {
        const Tensor& x = nodes_[node.parents[0]].value;
        const Tensor& y = nodes_[node.parents[1]].value;
        Tensor& dx = ensure(node.parents[0]);
        for (std::size_t i = 0; i < dy.size(); ++i) {
          dx.data[i] += dy.data[i] * y.data[i];
        }
        Tensor& dz = ensure(node.parents[1]);
        for (std::size_t i = 0; i < dy.size(); ++i) {
          dz.data[i] += dy.data[i] * x.data[i];
        }
        break;
      }
      case Op::Scale: {
        Tensor& dx = ensure(node.parents[0]);
        for (std::size_t i = 0; i < dy.size(); ++i) {
          dx.data[i] += node.scalar * dy.data[i];
        }
        break;
      }
      case Op::SumRows: {
        Tensor& dx = ensure(node.parents[0]);
        for (int i = 0; i < dx.rows; ++i) {
          for (int j = 0; j < dx.cols; ++j) dx.at(i, j) += dy.at(0, j);
        }
        break;
      }
      case Op::SumAll: {
        Tensor& dx = ensure(node.parents[0]);
        const double g = dy.at(0, 0);
        for (double& v : dx.data) v += g;
        break;
      }
      case Op::ConcatRows: {
        int at = 0;
        for (NodeId parent : node.parents) {
          Tensor& dx = ensure(parent);
          for (int i = 0; i < dx.rows; ++i) {
            for (int j = 0; j < dx.cols; ++j) dx.at(i, j) += dy.at(at + i, j);
          }
          at += dx.rows;
        }
        break;
      }
      case Op::RowGather: {
        Tensor& dx = ensure(node.parents[0]);
        for (std::size_t i = 0; i < node.indices.size(); ++i) {
          for (int j = 0; j < dy.cols; ++j) {
            dx.at(node.indices[i], j) += dy.at(static_cast<int>(i), j);
          }
        }
        break;
      }
      case Op::SegmentSum: {
        Tensor& dx = ensure(node.parents[0]);
        for (int i = 0; i < dx.rows; ++i) {
          for (int j = 0; j < dx.cols; ++j) {
            dx.at(i, j) += dy.at(node.indices[i], j);
          }
        }
        break;
      }
      case Op::RowScale: {
        Tensor& dx = ensure(node.parents[0]);
        for (int i = 0; i < dx.rows; ++i) {
          for (int j = 0; j < dx.cols; ++j) {
            dx.at(i, j) += node.factors[i] * dy.at(i, j);
          }
        }
        break;
      }
    }
  }

  std::vector<Tensor> out;
  out.reserve(wrt.size());
  for (NodeId id : wrt) {
    check(id);
    if (live[id]) {
      out.push_back(adjoint[id]);
    } else {
      out.push_back(Tensor(nodes_[id].value.rows, nodes_[id].value.cols));
    }
  }
  return out;
}

void adam_step(std::vector<Tensor*> params, const std::vector<Tensor>& grads,
               AdamState& state) {
  if (params.size() != grads.size()) {
    throw std::invalid_argument("adam_step: params/grads size mismatch");
  }
  if (state.m.empty()) {
    for (const Tensor* p : params) {
      state.m.push_back(Tensor(p->rows, p->cols));
      state.v.push_back(Tensor(p->rows, p->cols));
    }
  }
  if (state.m.size() != params.size()) {
    throw std::invalid_argument("adam_step: state does not match param count");
  }

  state.t += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));

  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = *params[i];
    const Tensor& g = grads[i];
    if (!p.same_shape(g) || !p.same_shape(state.m[i])) {
      throw std::invalid_argument("adam_step: shape mismatch");
    }
    Tensor& m = state.m[i];
    Tensor& v = state.v[i];
    for (std::size_t k = 0; k < p.size(); ++k) {
      m.data[k] = state.beta1 * m.data[k] + (1.0 - state.beta1) * g.data[k];
      v.data[k] = state.beta2 * v.data[k] + (1.0 - state.beta2) * g.data[k] * g.data[k];
      const double m_hat = m.data[k] / bc1;
      const double v_hat = v.data[k] / bc2;
      p.data[k] -= state.lr * m_hat / (std::sqrt(v_hat) + state.eps);
    }
  }
}

}  // namespace hetnav::ad
