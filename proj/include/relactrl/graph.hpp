#ifndef RELACTRL_GRAPH_HPP
#define RELACTRL_GRAPH_HPP

#include <deque>
#include <functional>
#include <memory>
#include <vector>

#include "relactrl/tensor.hpp"

namespace relactrl {

// Reverse-mode autodiff over a small primitive set. Values are evaluated
// eagerly as nodes are recorded; backward() replays the tape once from a
// scalar root. A Graph is confined to one logical execution -- concurrent
// gradient evaluations each use their own Graph.
class Graph {
  public:
    using NodeId = size_t;

    NodeId leaf(Tensor value);

    const Tensor& value(NodeId id) const { return nodes_[id].value; }
    const std::vector<int64_t>& shape(NodeId id) const { return nodes_[id].value.shape; }

    NodeId add(NodeId a, NodeId b);
    NodeId sub(NodeId a, NodeId b);
    NodeId mul(NodeId a, NodeId b);  // elementwise
    NodeId scale(NodeId a, double k);
    NodeId matmul(NodeId a, NodeId b);        // [m x k] . [k x n]
    NodeId transpose(NodeId a);               // 2-D only
    NodeId softmax_rows(NodeId a);            // row-stabilized
    NodeId layer_norm_rows(NodeId a, double eps = 1e-6);
    NodeId gelu(NodeId a);                    // exact erf form
    NodeId row_mul(NodeId x, NodeId v);       // x [r x c] scaled per-row by v [c]
    NodeId row_add(NodeId x, NodeId v);
    NodeId sum(NodeId a);                     // -> scalar [1]
    NodeId reshape(NodeId a, std::vector<int64_t> new_shape);

    // out[i] = in[index[i]]. The map is shared so specs can reuse one
    // allocation across calls; for bijective maps scatter_add is the inverse.
    NodeId gather(NodeId a, std::shared_ptr<const std::vector<size_t>> index,
                  std::vector<int64_t> out_shape);
    // out[index[i]] += in[i].
    NodeId scatter_add(NodeId a, std::shared_ptr<const std::vector<size_t>> index,
                       std::vector<int64_t> out_shape);

    // Accumulates adjoints for every node reachable from `root` (a scalar).
    void backward(NodeId root);
    const Tensor& grad(NodeId id) const;
    bool has_grad(NodeId id) const;

    size_t size() const { return nodes_.size(); }

  private:
    struct Node {
        Tensor value;
        std::vector<NodeId> inputs;
        // Called with this node's adjoint; pushes contributions into inputs.
        std::function<void(Graph&, const Node&, const Tensor&)> backward_fn;
    };

    NodeId record(Tensor value, std::vector<NodeId> inputs,
                  std::function<void(Graph&, const Node&, const Tensor&)> backward_fn);
    void accumulate(NodeId id, const Tensor& g);

    // deque: value() references stay valid while new nodes are recorded
    std::deque<Node> nodes_;
    std::deque<Tensor> grads_;  // empty shape means "no adjoint yet"
};

// Scalar-valued differentiable function of one tensor: given a graph and the
// leaf holding x, build and return the scalar output node.
using ScalarFn = std::function<Graph::NodeId(Graph&, Graph::NodeId)>;

// Max over coordinates of |analytic - central difference| relative to
// max(|analytic|, |central|, 1e-8). Throws if any evaluation goes non-finite.
double grad_check(const ScalarFn& f, const Tensor& x, double eps = 1e-5);

}  // namespace relactrl

#endif
