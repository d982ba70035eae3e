#pragma once

#include <vector>

#include "spanev/mat.hpp"

namespace spanev::ad {

// Reverse-mode automatic differentiation over Mat values. A Tape owns every
// node created during one forward pass; backward() fills exact gradients for
// all of them. Rebuild the tape (reset + forward) for each pass.
class Tape {
 public:
  using NodeId = int;

  NodeId leaf(Mat value);

  NodeId matmul(NodeId a, NodeId b);     // a * b
  NodeId matmul_nt(NodeId a, NodeId b);  // a * b^T
  NodeId add(NodeId a, NodeId b);
  NodeId add3(NodeId a, NodeId b, NodeId c) { return add(add(a, b), c); }
  NodeId sub(NodeId a, NodeId b);
  NodeId hadamard(NodeId a, NodeId b);
  NodeId scale(NodeId a, double s);
  NodeId sigmoid(NodeId a);
  NodeId tanh(NodeId a);
  NodeId relu(NodeId a);
  NodeId row(NodeId a, int i);                    // 1 x cols view of row i
  NodeId concat_cols(NodeId a, NodeId b);         // [a b], equal row counts
  NodeId stack_rows(const std::vector<NodeId>& rows);

  // softmax(alpha[start:end)) acting as weights over rows start..end of h.
  // Returns the 1 x cols weighted sum. Weights use max-subtraction.
  NodeId span_attention(NodeId h, NodeId alpha, int start, int end);

  // logsumexp(logits) - logits[target]; logits is 1 x L, result 1 x 1.
  NodeId cross_entropy_logits(NodeId logits, int target);

  NodeId add_all(const std::vector<NodeId>& scalars);  // sum of 1 x 1 nodes

  void backward(NodeId loss);

  const Mat& val(NodeId id) const { return nodes_[id].val; }
  const Mat& grad(NodeId id) const { return nodes_[id].grad; }

  void reset() { nodes_.clear(); }
  size_t size() const { return nodes_.size(); }

 private:
  enum class Op {
    kLeaf,
    kMatMul,
    kMatMulNT,
    kAdd,
    kSub,
    kHadamard,
    kScale,
    kSigmoid,
    kTanh,
    kRelu,
    kRow,
    kConcatCols,
    kStackRows,
    kSpanAttention,
    kCrossEntropy,
    kAddAll,
  };

  struct Node {
    Op op = Op::kLeaf;
    int p0 = -1, p1 = -1;
    int i0 = 0, i1 = 0;
    double s = 0.0;
    std::vector<int> parents;  // kStackRows / kAddAll only
    Mat val;
    Mat grad;
    Mat aux;  // attention weights / softmax probabilities
  };

  NodeId push(Node n) {
    nodes_.push_back(std::move(n));
    return static_cast<NodeId>(nodes_.size() - 1);
  }

  std::vector<Node> nodes_;
};

}  // namespace spanev::ad
