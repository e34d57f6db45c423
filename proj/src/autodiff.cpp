#include "lpo/autodiff.hpp"

#include <array>
#include <cmath>
#include <string>

#include "lpo/errors.hpp"
#include "lpo/scalar_math.hpp"

namespace lpo::ad {

double Var::value() const { return graph_->value(*this); }

Var Graph::leaf(double value) { return add_node(value, {}); }

Var Graph::add_node(double value, std::span<const Edge> edges, bool detached) {
  const auto index = static_cast<std::uint32_t>(nodes_.size());
  for (const Edge& e : edges) {
    if (e.parent >= index) {
      throw GraphError("parent " + std::to_string(e.parent) +
                       " does not precede node " + std::to_string(index));
    }
  }
  nodes_.push_back(Node{value, static_cast<std::uint32_t>(edges_.size()),
                        static_cast<std::uint32_t>(edges.size()), detached});
  edges_.insert(edges_.end(), edges.begin(), edges.end());
  return Var(this, index);
}

void Graph::check_owned(Var v) const {
  if (v.graph_ != this || v.index_ >= nodes_.size()) {
    throw GraphError("variable does not belong to this graph");
  }
}

double Graph::value(Var v) const {
  check_owned(v);
  return nodes_[v.index_].value;
}

bool Graph::detached(Var v) const {
  check_owned(v);
  return nodes_[v.index_].detached;
}

std::span<const Edge> Graph::edges(Var v) const {
  check_owned(v);
  const Node& n = nodes_[v.index_];
  return {edges_.data() + n.first_edge, n.edge_count};
}

void Graph::backward(Var root) {
  check_owned(root);
  if (has_grads_) {
    throw GraphError("backward called again without zero_grad");
  }
  grads_.assign(nodes_.size(), 0.0);
  grads_[root.index_] = 1.0;
  for (std::uint32_t i = root.index_ + 1; i-- > 0;) {
    const double g = grads_[i];
    if (g == 0.0) continue;
    const Node& n = nodes_[i];
    for (std::uint32_t k = 0; k < n.edge_count; ++k) {
      const Edge& e = edges_[n.first_edge + k];
      if (e.parent >= i) throw GraphError("cycle detected in graph");
      grads_[e.parent] += g * e.local;
    }
  }
  has_grads_ = true;
}

double Graph::grad(Var v) const {
  check_owned(v);
  if (!has_grads_) return 0.0;
  return grads_[v.index_];
}

void Graph::zero_grad() {
  grads_.clear();
  has_grads_ = false;
}

namespace {

Graph& same_graph(Var a, Var b) {
  if (&a.graph() != &b.graph()) {
    throw GraphError("operands belong to different graphs");
  }
  return a.graph();
}

Var unary(Var u, double value, double local) {
  const std::array<Edge, 1> e{{{u.index(), local}}};
  return u.graph().add_node(value, e);
}

}  // namespace

Var operator+(Var a, Var b) {
  Graph& g = same_graph(a, b);
  const std::array<Edge, 2> e{{{a.index(), 1.0}, {b.index(), 1.0}}};
  return g.add_node(a.value() + b.value(), e);
}

Var operator-(Var a, Var b) {
  Graph& g = same_graph(a, b);
  const std::array<Edge, 2> e{{{a.index(), 1.0}, {b.index(), -1.0}}};
  return g.add_node(a.value() - b.value(), e);
}

Var operator*(Var a, Var b) {
  Graph& g = same_graph(a, b);
  const double av = a.value();
  const double bv = b.value();
  const std::array<Edge, 2> e{{{a.index(), bv}, {b.index(), av}}};
  return g.add_node(av * bv, e);
}

Var operator-(Var a) { return unary(a, -a.value(), -1.0); }
Var operator+(Var a, double c) { return unary(a, a.value() + c, 1.0); }
Var operator-(Var a, double c) { return unary(a, a.value() - c, 1.0); }
Var operator-(double c, Var a) { return unary(a, c - a.value(), -1.0); }
Var operator*(double c, Var a) { return unary(a, c * a.value(), c); }
Var operator*(Var a, double c) { return unary(a, a.value() * c, c); }
Var operator/(Var a, double c) { return unary(a, a.value() / c, 1.0 / c); }

Var abs(Var u) {
  const double v = u.value();
  return unary(u, std::fabs(v), sign_of(v));
}

Var max0(Var u) {
  const double v = u.value();
  return unary(u, v > 0.0 ? v : 0.0, v > 0.0 ? 1.0 : 0.0);
}

Var log(Var u) {
  const double v = u.value();
  if (!(v > 0.0)) {
    throw DomainError("log of non-positive value " + std::to_string(v));
  }
  return unary(u, std::log(v), 1.0 / v);
}

Var exp(Var u) {
  const double e = std::exp(u.value());
  return unary(u, e, e);
}

Var sigmoid(Var u) {
  const double s = lpo::sigmoid(u.value());
  return unary(u, s, s * (1.0 - s));
}

Var log_sigmoid(Var u) {
  const double v = u.value();
  return unary(u, lpo::log_sigmoid(v), lpo::sigmoid(-v));
}

Var sgn_const(Var u) { return u.graph().add_node(sign_of(u.value()), {}); }

Var detach(Var u) { return u.graph().add_node(u.value(), {}, true); }

Var sum(std::span<const Var> terms) {
  if (terms.empty()) throw GraphError("sum of zero terms");
  Graph& g = terms.front().graph();
  std::vector<Edge> e;
  e.reserve(terms.size());
  double acc = 0.0;
  for (const Var& t : terms) {
    if (&t.graph() != &g) throw GraphError("operands belong to different graphs");
    acc += t.value();
    e.push_back({t.index(), 1.0});
  }
  return g.add_node(acc, e);
}

Var dot(std::span<const Var> a, std::span<const Var> b, Var bias) {
  if (a.size() != b.size()) throw GraphError("dot operands differ in length");
  Graph& g = bias.graph();
  std::vector<Edge> e;
  e.reserve(2 * a.size() + 1);
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (&a[i].graph() != &g || &b[i].graph() != &g) {
      throw GraphError("operands belong to different graphs");
    }
    const double av = a[i].value();
    const double bv = b[i].value();
    acc += av * bv;
    e.push_back({a[i].index(), bv});
    e.push_back({b[i].index(), av});
  }
  acc += bias.value();
  e.push_back({bias.index(), 1.0});
  return g.add_node(acc, e);
}

}  // namespace lpo::ad
