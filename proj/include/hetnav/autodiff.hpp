#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

namespace hetnav::ad {

/// Dense row-major matrix of 64-bit reals. All network math runs in double
/// so finite-difference checks stay clean.
struct Tensor {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Tensor() = default;
  Tensor(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, 0.0) {
    if (r < 0 || c < 0) throw std::invalid_argument("Tensor: negative shape");
  }

  static Tensor zeros(int r, int c) { return Tensor(r, c); }

  double& at(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
  double at(int r, int c) const {
    return data[static_cast<std::size_t>(r) * cols + c];
  }
  std::size_t size() const { return data.size(); }
  bool same_shape(const Tensor& o) const {
    return rows == o.rows && cols == o.cols;
  }
};

/// y = A * B with optional transposes on the stored operands; the workhorse
/// behind every dense layer. Dispatches to BLAS when built with it.
void matmul_accumulate(bool trans_a, bool trans_b, double alpha,
                       const Tensor& a, const Tensor& b, double beta,
                       Tensor& out);

using NodeId = int;

/// Append-only record of one forward pass. Node ids are tape positions, so
/// parents always precede children and reverse iteration is a valid
/// reverse-topological order. One tape per forward pass; tapes are never
/// reused across passes.
class Tape {
 public:
  /// Leaf node holding an input or parameter value.
  NodeId input(Tensor value);

  NodeId matmul(NodeId a, NodeId b);
  /// x * W + b with b (1 x n) broadcast over rows.
  NodeId affine(NodeId x, NodeId w, NodeId b);
  NodeId relu(NodeId x);
  NodeId add(NodeId x, NodeId y);
  NodeId sub(NodeId x, NodeId y);
  /// Elementwise product.
  NodeId mul(NodeId x, NodeId y);
  NodeId scale(NodeId x, double s);
  /// Column sums: (r x c) -> (1 x c).
  NodeId sum_rows(NodeId x);
  /// Total sum: (r x c) -> (1 x 1).
  NodeId sum_all(NodeId x);
  /// Vertical stack of equal-width blocks.
  NodeId concat_rows(const std::vector<NodeId>& xs);
  /// out[i, :] = x[rows[i], :]; rows may repeat.
  NodeId row_gather(NodeId x, std::vector<int> rows);
  /// out[s, :] = sum over i with segments[i] == s of x[i, :].
  NodeId segment_sum(NodeId x, std::vector<int> segments, int n_segments);
  /// out[i, :] = factors[i] * x[i, :].
  NodeId row_scale(NodeId x, std::vector<double> factors);

  const Tensor& value(NodeId id) const { return nodes_[check(id)].value; }
  std::size_t size() const { return nodes_.size(); }

  /// Reverse accumulation from a scalar loss node. Returns the gradient of
  /// the loss w.r.t. each requested node (zeros when the loss does not
  /// depend on it).
  std::vector<Tensor> gradients(NodeId loss, const std::vector<NodeId>& wrt) const;

 private:
  enum class Op {
    Input,
    Matmul,
    Affine,
    Relu,
    Add,
    Sub,
    Mul,
    Scale,
    SumRows,
    SumAll,
    ConcatRows,
    RowGather,
    SegmentSum,
    RowScale,
  };

  struct Node {
    Op op;
    std::vector<NodeId> parents;
    Tensor value;
    double scalar = 0.0;        // Scale
    std::vector<int> indices;   // RowGather rows / SegmentSum segment ids
    std::vector<double> factors;  // RowScale
  };

  NodeId check(NodeId id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= nodes_.size()) {
      throw std::invalid_argument("Tape: node id out of range");
    }
    return id;
  }
  NodeId push(Node node) {
    nodes_.push_back(std::move(node));
    return static_cast<NodeId>(nodes_.size() - 1);
  }

  std::vector<Node> nodes_;
};

/// Adam with bias correction; moments are allocated on first use to match
/// the parameter shapes.
struct AdamState {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long long t = 0;
  std::vector<Tensor> m;
  std::vector<Tensor> v;
};

void adam_step(std::vector<Tensor*> params, const std::vector<Tensor>& grads,
               AdamState& state);

}  // namespace hetnav::ad
