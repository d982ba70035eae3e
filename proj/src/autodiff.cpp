#include "spanev/ad.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <stdexcept>

namespace spanev::ad {

Tape::NodeId Tape::leaf(Mat value) {
  Node n;
  n.op = Op::kLeaf;
  n.val = std::move(value);
  return push(std::move(n));
}

Tape::NodeId Tape::matmul(NodeId a, NodeId b) {
  Node n;
  n.op = Op::kMatMul;
  n.p0 = a;
  n.p1 = b;
  matmul_into(nodes_[a].val, nodes_[b].val, n.val);
  return push(std::move(n));
}

Tape::NodeId Tape::matmul_nt(NodeId a, NodeId b) {
  Node n;
  n.op = Op::kMatMulNT;
  n.p0 = a;
  n.p1 = b;
  matmul_nt_into(nodes_[a].val, nodes_[b].val, n.val);
  return push(std::move(n));
}

Tape::NodeId Tape::add(NodeId a, NodeId b) {
  const Mat& va = nodes_[a].val;
  const Mat& vb = nodes_[b].val;
  assert(va.same_shape(vb));
  Node n;
  n.op = Op::kAdd;
  n.p0 = a;
  n.p1 = b;
  n.val = va;
  for (size_t i = 0; i < n.val.size(); ++i) n.val.a[i] += vb.a[i];
  return push(std::move(n));
}

Tape::NodeId Tape::sub(NodeId a, NodeId b) {
  const Mat& va = nodes_[a].val;
  const Mat& vb = nodes_[b].val;
  assert(va.same_shape(vb));
  Node n;
  n.op = Op::kSub;
  n.p0 = a;
  n.p1 = b;
  n.val = va;
  for (size_t i = 0; i < n.val.size(); ++i) n.val.a[i] -= vb.a[i];
  return push(std::move(n));
}

Tape::NodeId Tape::hadamard(NodeId a, NodeId b) {
  const Mat& va = nodes_[a].val;
  const Mat& vb = nodes_[b].val;
  assert(va.same_shape(vb));
  Node n;
  n.op = Op::kHadamard;
  n.p0 = a;
  n.p1 = b;
  n.val = va;
  for (size_t i = 0; i < n.val.size(); ++i) n.val.a[i] *= vb.a[i];
  return push(std::move(n));
}

Tape::NodeId Tape::scale(NodeId a, double s) {
  Node n;
  n.op = Op::kScale;
  n.p0 = a;
  n.s = s;
  n.val = nodes_[a].val;
  for (double& v : n.val.a) v *= s;
  return push(std::move(n));
}

Tape::NodeId Tape::sigmoid(NodeId a) {
  Node n;
  n.op = Op::kSigmoid;
  n.p0 = a;
  n.val = nodes_[a].val;
  for (double& v : n.val.a) v = 1.0 / (1.0 + std::exp(-v));
  return push(std::move(n));
}

Tape::NodeId Tape::tanh(NodeId a) {
  Node n;
  n.op = Op::kTanh;
  n.p0 = a;
  n.val = nodes_[a].val;
  for (double& v : n.val.a) v = std::tanh(v);
  return push(std::move(n));
}

Tape::NodeId Tape::relu(NodeId a) {
  Node n;
  n.op = Op::kRelu;
  n.p0 = a;
  n.val = nodes_[a].val;
  for (double& v : n.val.a) v = v > 0.0 ? v : 0.0;
  return push(std::move(n));
}

Tape::NodeId Tape::row(NodeId a, int i) {
  const Mat& va = nodes_[a].val;
  assert(i >= 0 && i < va.rows);
  Node n;
  n.op = Op::kRow;
  n.p0 = a;
  n.i0 = i;
  n.val.resize(1, va.cols);
  for (int j = 0; j < va.cols; ++j) n.val(0, j) = va(i, j);
  return push(std::move(n));
}

Tape::NodeId Tape::concat_cols(NodeId a, NodeId b) {
  const Mat& va = nodes_[a].val;
  const Mat& vb = nodes_[b].val;
  assert(va.rows == vb.rows);
  Node n;
  n.op = Op::kConcatCols;
  n.p0 = a;
  n.p1 = b;
  n.i0 = va.cols;
  n.val.resize(va.rows, va.cols + vb.cols);
  for (int i = 0; i < va.rows; ++i) {
    for (int j = 0; j < va.cols; ++j) n.val(i, j) = va(i, j);
    for (int j = 0; j < vb.cols; ++j) n.val(i, va.cols + j) = vb(i, j);
  }
  return push(std::move(n));
}

Tape::NodeId Tape::stack_rows(const std::vector<NodeId>& rows) {
  assert(!rows.empty());
  int cols = nodes_[rows[0]].val.cols;
  Node n;
  n.op = Op::kStackRows;
  n.parents = rows;
  n.val.resize(static_cast<int>(rows.size()), cols);
  for (size_t r = 0; r < rows.size(); ++r) {
    const Mat& v = nodes_[rows[r]].val;
    assert(v.rows == 1 && v.cols == cols);
    for (int j = 0; j < cols; ++j) n.val(static_cast<int>(r), j) = v(0, j);
  }
  return push(std::move(n));
}

Tape::NodeId Tape::span_attention(NodeId h, NodeId alpha, int start, int end) {
  const Mat& vh = nodes_[h].val;
  const Mat& va = nodes_[alpha].val;
  assert(va.cols == 1 && va.rows == vh.rows);
  assert(start >= 0 && start < end && end <= vh.rows);
  int w = end - start;
  Node n;
  n.op = Op::kSpanAttention;
  n.p0 = h;
  n.p1 = alpha;
  n.i0 = start;
  n.i1 = end;
  n.aux.resize(1, w);
  double mx = va(start, 0);
  for (int t = start + 1; t < end; ++t) mx = std::max(mx, va(t, 0));
  double denom = 0.0;
  for (int t = 0; t < w; ++t) {
    double e = std::exp(va(start + t, 0) - mx);
    n.aux(0, t) = e;
    denom += e;
  }
  for (int t = 0; t < w; ++t) n.aux(0, t) /= denom;
  n.val.resize(1, vh.cols);
  for (int t = 0; t < w; ++t) {
    double wt = n.aux(0, t);
    for (int j = 0; j < vh.cols; ++j) n.val(0, j) += wt * vh(start + t, j);
  }
  return push(std::move(n));
}

Tape::NodeId Tape::cross_entropy_logits(NodeId logits, int target) {
  const Mat& z = nodes_[logits].val;
  assert(z.rows == 1);
  assert(target >= 0 && target < z.cols);
  Node n;
  n.op = Op::kCrossEntropy;
  n.p0 = logits;
  n.i0 = target;
  double mx = z(0, 0);
  for (int j = 1; j < z.cols; ++j) mx = std::max(mx, z(0, j));
  double denom = 0.0;
  n.aux.resize(1, z.cols);
  for (int j = 0; j < z.cols; ++j) {
    double e = std::exp(z(0, j) - mx);
    n.aux(0, j) = e;
    denom += e;
  }
  for (int j = 0; j < z.cols; ++j) n.aux(0, j) /= denom;
  n.val.resize(1, 1);
  n.val(0, 0) = std::log(denom) + mx - z(0, target);
  return push(std::move(n));
}

Tape::NodeId Tape::add_all(const std::vector<NodeId>& scalars) {
  Node n;
  n.op = Op::kAddAll;
  n.parents = scalars;
  n.val.resize(1, 1);
  for (NodeId id : scalars) {
    assert(nodes_[id].val.rows == 1 && nodes_[id].val.cols == 1);
    n.val(0, 0) += nodes_[id].val(0, 0);
  }
  return push(std::move(n));
}

void Tape::backward(NodeId loss) {
  if (nodes_[loss].val.rows != 1 || nodes_[loss].val.cols != 1)
    throw std::logic_error("backward() requires a scalar loss node");
  for (NodeId i = 0; i <= loss; ++i) {
    nodes_[i].grad.resize(nodes_[i].val.rows, nodes_[i].val.cols);
  }
  nodes_[loss].grad(0, 0) = 1.0;

  for (NodeId i = loss; i >= 0; --i) {
    Node& n = nodes_[i];
    const Mat& g = n.grad;
    switch (n.op) {
      case Op::kLeaf:
        break;
      case Op::kMatMul: {
        // dA += dC * B^T; dB += A^T * dC
        Mat tmp;
        matmul_nt_into(g, nodes_[n.p1].val, tmp);
        Mat& da = nodes_[n.p0].grad;
        for (size_t k = 0; k < da.size(); ++k) da.a[k] += tmp.a[k];
        matmul_tn_acc(nodes_[n.p0].val, g, nodes_[n.p1].grad);
        break;
      }
      case Op::kMatMulNT: {
        // C = A * B^T: dA += dC * B; dB += dC^T * A
        Mat tmp;
        matmul_into(g, nodes_[n.p1].val, tmp);
        Mat& da = nodes_[n.p0].grad;
        for (size_t k = 0; k < da.size(); ++k) da.a[k] += tmp.a[k];
        matmul_tn_acc(g, nodes_[n.p0].val, nodes_[n.p1].grad);
        break;
      }
      case Op::kAdd: {
        Mat& da = nodes_[n.p0].grad;
        Mat& db = nodes_[n.p1].grad;
        for (size_t k = 0; k < g.size(); ++k) {
          da.a[k] += g.a[k];
          db.a[k] += g.a[k];
        }
        break;
      }
      case Op::kSub: {
        Mat& da = nodes_[n.p0].grad;
        Mat& db = nodes_[n.p1].grad;
        for (size_t k = 0; k < g.size(); ++k) {
          da.a[k] += g.a[k];
          db.a[k] -= g.a[k];
        }
        break;
      }
      case Op::kHadamard: {
        Mat& da = nodes_[n.p0].grad;
        Mat& db = nodes_[n.p1].grad;
        const Mat& va = nodes_[n.p0].val;
        const Mat& vb = nodes_[n.p1].val;
        for (size_t k = 0; k < g.size(); ++k) {
          da.a[k] += g.a[k] * vb.a[k];
          db.a[k] += g.a[k] * va.a[k];
        }
        break;
      }
      case Op::kScale: {
        Mat& da = nodes_[n.p0].grad;
        for (size_t k = 0; k < g.size(); ++k) da.a[k] += g.a[k] * n.s;
        break;
      }
      case Op::kSigmoid: {
        Mat& da = nodes_[n.p0].grad;
        for (size_t k = 0; k < g.size(); ++k) {
          double y = n.val.a[k];
          da.a[k] += g.a[k] * y * (1.0 - y);
        }
        break;
      }
      case Op::kTanh: {
        Mat& da = nodes_[n.p0].grad;
        for (size_t k = 0; k < g.size(); ++k) {
          double y = n.val.a[k];
          da.a[k] += g.a[k] * (1.0 - y * y);
        }
        break;
      }
      case Op::kRelu: {
        Mat& da = nodes_[n.p0].grad;
        const Mat& va = nodes_[n.p0].val;
        for (size_t k = 0; k < g.size(); ++k)
          if (va.a[k] > 0.0) da.a[k] += g.a[k];
        break;
      }
      case Op::kRow: {
        Mat& da = nodes_[n.p0].grad;
        for (int j = 0; j < g.cols; ++j) da(n.i0, j) += g(0, j);
        break;
      }
      case Op::kConcatCols: {
        Mat& da = nodes_[n.p0].grad;
        Mat& db = nodes_[n.p1].grad;
        for (int r = 0; r < g.rows; ++r) {
          for (int j = 0; j < n.i0; ++j) da(r, j) += g(r, j);
          for (int j = 0; j < db.cols; ++j) db(r, j) += g(r, n.i0 + j);
        }
        break;
      }
      case Op::kStackRows: {
        for (size_t r = 0; r < n.parents.size(); ++r) {
          Mat& dp = nodes_[n.parents[r]].grad;
          for (int j = 0; j < g.cols; ++j) dp(0, j) += g(static_cast<int>(r), j);
        }
        break;
      }
      case Op::kSpanAttention: {
        Mat& dh = nodes_[n.p0].grad;
        Mat& dalpha = nodes_[n.p1].grad;
        const Mat& vh = nodes_[n.p0].val;
        int start = n.i0, end = n.i1, w = end - start;
        // s_t = <h_t, dout>; dalpha_t = w_t * (s_t - sum_k w_k s_k)
        double sbar = 0.0;
        std::vector<double> s(w, 0.0);
        for (int t = 0; t < w; ++t) {
          double wt = n.aux(0, t);
          double dot = 0.0;
          for (int j = 0; j < g.cols; ++j) {
            dot += vh(start + t, j) * g(0, j);
            dh(start + t, j) += wt * g(0, j);
          }
          s[t] = dot;
          sbar += wt * dot;
        }
        for (int t = 0; t < w; ++t) dalpha(start + t, 0) += n.aux(0, t) * (s[t] - sbar);
        break;
      }
      case Op::kCrossEntropy: {
        Mat& dz = nodes_[n.p0].grad;
        double go = g(0, 0);
        for (int j = 0; j < dz.cols; ++j) {
          double p = n.aux(0, j);
          dz(0, j) += go * (p - (j == n.i0 ? 1.0 : 0.0));
        }
        break;
      }
      case Op::kAddAll: {
        double go = g(0, 0);
        for (NodeId p : n.parents) nodes_[p].grad(0, 0) += go;
        break;
      }
    }
  }
}

}  // namespace spanev::ad
