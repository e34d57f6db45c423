#pragma once

// Reverse-mode automatic differentiation over scalar computation graphs.
//
// A Graph is an append-only arena of immutable nodes. Every node records its
// forward value and the local derivative with respect to each parent, and a
// parent must already exist when its child is created, so graphs are acyclic
// by construction. `detach` produces a node with the same value and no
// parents: adjoint flow stops there.
//
// Gradients live beside the nodes and are written by `backward`. A second
// backward on the same graph requires an explicit `zero_grad` first.
//
// Graphs are single-threaded; distinct graphs share nothing and may be used
// from different threads.

#include <cstdint>
#include <span>
#include <vector>

namespace lpo::ad {

class Graph;

/// Handle to a node inside a Graph. Cheap to copy; valid while the graph lives.
class Var {
 public:
  Var() = default;

  double value() const;
  Graph& graph() const { return *graph_; }
  std::uint32_t index() const { return index_; }
  bool valid() const { return graph_ != nullptr; }

 private:
  friend class Graph;
  Var(Graph* g, std::uint32_t i) : graph_(g), index_(i) {}

  Graph* graph_ = nullptr;
  std::uint32_t index_ = 0;
};

struct Edge {
  std::uint32_t parent;
  double local;  // d(child)/d(parent)
};

class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;
  Graph(Graph&&) = delete;
  Graph& operator=(Graph&&) = delete;

  /// Input or parameter node.
  Var leaf(double value);

  /// Low-level constructor used by the operator set. Every parent must be an
  /// existing node of this graph.
  Var add_node(double value, std::span<const Edge> edges, bool detached = false);

  double value(Var v) const;
  bool detached(Var v) const;
  std::size_t size() const { return nodes_.size(); }
  std::span<const Edge> edges(Var v) const;

  /// Accumulates d(root)/d(node) into every node reachable from `root`.
  void backward(Var root);

  /// Gradient written by the last backward pass (0 if unreachable).
  double grad(Var v) const;

  void zero_grad();

 private:
  struct Node {
    double value;
    std::uint32_t first_edge;
    std::uint32_t edge_count;
    bool detached;
  };

  void check_owned(Var v) const;

  std::vector<Node> nodes_;
  std::vector<Edge> edges_;
  std::vector<double> grads_;
  bool has_grads_ = false;
};

// ---- operator set -------------------------------------------------------

Var operator+(Var a, Var b);
Var operator-(Var a, Var b);
Var operator*(Var a, Var b);
Var operator-(Var a);
Var operator+(Var a, double c);
Var operator-(Var a, double c);
Var operator-(double c, Var a);
Var operator*(double c, Var a);
Var operator*(Var a, double c);
Var operator/(Var a, double c);

/// |u|, subgradient 0 at u = 0.
Var abs(Var u);
/// max(0, u), subgradient 0 at u = 0.
Var max0(Var u);
/// Natural log; throws DomainError for u <= 0.
Var log(Var u);
Var exp(Var u);
Var sigmoid(Var u);
Var log_sigmoid(Var u);
/// sgn(u) as a constant: value in {-1, 0, 1}, no gradient.
Var sgn_const(Var u);
/// Same value, no adjoint flow back to `u`.
Var detach(Var u);

/// Left fold a[0] + a[1] + ... in index order. Requires at least one term.
Var sum(std::span<const Var> terms);
/// sum_i a[i] * b[i] + bias, accumulated in index order.
Var dot(std::span<const Var> a, std::span<const Var> b, Var bias);

}  // namespace lpo::ad
