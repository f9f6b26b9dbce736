#include "dgstgcn/autodiff.hpp"

#include <unordered_set>

namespace dgstgcn {

namespace {
thread_local bool grad_mode_enabled = true;
}

bool GradMode::enabled() { return grad_mode_enabled; }
void GradMode::set_enabled(bool on) { grad_mode_enabled = on; }

template <typename Scalar>
Var<Scalar> make_result(Tensor<Scalar> value, std::vector<Var<Scalar>> parents,
                        typename Node<Scalar>::Pullback pullback) {
  auto node = std::make_shared<Node<Scalar>>();
  node->value = std::move(value);
  if (GradMode::enabled()) {
    for (const auto &p : parents)
      if (p.requires_grad()) node->requires_grad = true;
  }
  if (node->requires_grad) {
    node->parents.reserve(parents.size());
    for (auto &p : parents) node->parents.push_back(p.node());
    node->pullback = std::move(pullback);
  }
  return Var<Scalar>(std::move(node));
}

namespace {

template <typename Scalar>
std::vector<Node<Scalar> *> topological_order(Node<Scalar> *root) {
  // Iterative post-order DFS; parents come before children in the result.
  std::vector<Node<Scalar> *> order;
  std::unordered_set<Node<Scalar> *> visited;
  std::vector<std::pair<Node<Scalar> *, std::size_t>> stack{{root, 0}};
  visited.insert(root);
  while (!stack.empty()) {
    auto &[node, next] = stack.back();
    if (next < node->parents.size()) {
      Node<Scalar> *parent = node->parents[next++].get();
      if (parent && parent->requires_grad && visited.insert(parent).second) stack.emplace_back(parent, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  return order;
}

} // namespace

template <typename Scalar>
void backward(const Var<Scalar> &root, const Tensor<Scalar> &seed) {
  if (!root.requires_grad()) return;
  Node<Scalar> *r = root.node().get();
  if (seed.shape() != r->value.shape())
    throw DimensionError("backward seed " + shape_string(seed.shape()) + " for output " +
                         shape_string(r->value.shape()));
  r->grad_buffer().data() += seed.data();

  auto order = topological_order(r);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<Scalar> *node = *it;
    if (node->pullback && node->has_grad()) node->pullback(*node);
  }
  // Release the graph; leaves (no pullback) keep their accumulated gradient.
  for (Node<Scalar> *node : order) {
    if (node->pullback) {
      node->pullback = nullptr;
      node->parents.clear();
      node->grad = Tensor<Scalar>();
    }
  }
}

template <typename Scalar>
void backward(const Var<Scalar> &root) {
  if (root.value().size() != 1)
    throw DimensionError("backward() without seed needs a single-element output, got " +
                         shape_string(root.shape()));
  backward(root, Tensor<Scalar>(root.shape(), Scalar(1)));
}

#define DGSTGCN_INSTANTIATE(S)                                                                                 \
  template Var<S> make_result<S>(Tensor<S>, std::vector<Var<S>>, typename Node<S>::Pullback);                \
  template void backward<S>(const Var<S> &);                                                                 \
  template void backward<S>(const Var<S> &, const Tensor<S> &);

DGSTGCN_INSTANTIATE(float)
DGSTGCN_INSTANTIATE(double)
#undef DGSTGCN_INSTANTIATE

} // namespace dgstgcn
