#include "relactrl/graph.hpp"

#include <cmath>
#include <stdexcept>

namespace relactrl {

namespace {

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (!a.same_shape(b)) {
        throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                                    shape_to_string(a.shape) + " vs " + shape_to_string(b.shape));
    }
}

void check_matrix(const Tensor& t, const char* op) {
    if (t.rank() != 2) {
        throw std::invalid_argument(std::string(op) + ": expected a 2-D tensor, got " +
                                    shape_to_string(t.shape));
    }
}

}  // namespace

Graph::NodeId Graph::record(Tensor value, std::vector<NodeId> inputs,
                            std::function<void(Graph&, const Node&, const Tensor&)> backward_fn) {
    for (NodeId in : inputs) {
        if (in >= nodes_.size()) {
            throw std::logic_error("graph node refers to an input recorded after it");
        }
    }
    nodes_.push_back(Node{std::move(value), std::move(inputs), std::move(backward_fn)});
    grads_.emplace_back();
    return nodes_.size() - 1;
}

Graph::NodeId Graph::leaf(Tensor value) {
    return record(std::move(value), {}, nullptr);
}

void Graph::accumulate(NodeId id, const Tensor& g) {
    Tensor& slot = grads_[id];
    if (slot.shape.empty()) {
        slot = g;
        return;
    }
    for (size_t i = 0; i < slot.data.size(); ++i) slot.data[i] += g.data[i];
}

bool Graph::has_grad(NodeId id) const { return !grads_[id].shape.empty(); }

const Tensor& Graph::grad(NodeId id) const {
    if (!has_grad(id)) throw std::logic_error("grad requested before backward reached this node");
    return grads_[id];
}

Graph::NodeId Graph::add(NodeId a, NodeId b) {
    const Tensor& ta = value(a);
    const Tensor& tb = value(b);
    check_same_shape(ta, tb, "add");
    Tensor out = ta;
    for (size_t i = 0; i < out.data.size(); ++i) out.data[i] += tb.data[i];
    return record(std::move(out), {a, b}, [](Graph& g, const Node& n, const Tensor& go) {
        g.accumulate(n.inputs[0], go);
        g.accumulate(n.inputs[1], go);
    });
}

Graph::NodeId Graph::sub(NodeId a, NodeId b) {
    const Tensor& ta = value(a);
    const Tensor& tb = value(b);
    check_same_shape(ta, tb, "sub");
    Tensor out = ta;
    for (size_t i = 0; i < out.data.size(); ++i) out.data[i] -= tb.data[i];
    return record(std::move(out), {a, b}, [](Graph& g, const Node& n, const Tensor& go) {
        g.accumulate(n.inputs[0], go);
        Tensor neg = go;
        for (double& v : neg.data) v = -v;
        g.accumulate(n.inputs[1], neg);
    });
}

Graph::NodeId Graph::mul(NodeId a, NodeId b) {
    const Tensor& ta = value(a);
    const Tensor& tb = value(b);
    check_same_shape(ta, tb, "mul");
    Tensor out = ta;
    for (size_t i = 0; i < out.data.size(); ++i) out.data[i] *= tb.data[i];
    return record(std::move(out), {a, b}, [](Graph& g, const Node& n, const Tensor& go) {
        const Tensor& va = g.value(n.inputs[0]);
        const Tensor& vb = g.value(n.inputs[1]);
        Tensor ga = go;
        Tensor gb = go;
        for (size_t i = 0; i < go.data.size(); ++i) {
            ga.data[i] = go.data[i] * vb.data[i];
            gb.data[i] = go.data[i] * va.data[i];
        }
        g.accumulate(n.inputs[0], ga);
        g.accumulate(n.inputs[1], gb);
    });
}

Graph::NodeId Graph::scale(NodeId a, double k) {
    Tensor out = value(a);
    for (double& v : out.data) v *= k;
    return record(std::move(out), {a}, [k](Graph& g, const Node& n, const Tensor& go) {
        Tensor ga = go;
        for (double& v : ga.data) v *= k;
        g.accumulate(n.inputs[0], ga);
    });
}

Graph::NodeId Graph::matmul(NodeId a, NodeId b) {
    const Tensor& ta = value(a);
    const Tensor& tb = value(b);
    check_matrix(ta, "matmul");
    check_matrix(tb, "matmul");
    if (ta.shape[1] != tb.shape[0]) {
        throw std::invalid_argument("matmul: inner extents differ, " + shape_to_string(ta.shape) +
                                    " vs " + shape_to_string(tb.shape));
    }
    const int64_t m = ta.shape[0], k = ta.shape[1], n = tb.shape[1];
    Tensor out({m, n}, 0.0);
    for (int64_t i = 0; i < m; ++i) {
        for (int64_t p = 0; p < k; ++p) {
            const double av = ta.data[size_t(i * k + p)];
            if (av == 0.0) continue;
            const double* brow = &tb.data[size_t(p * n)];
            double* orow = &out.data[size_t(i * n)];
            for (int64_t j = 0; j < n; ++j) orow[j] += av * brow[j];
        }
    }
    return record(std::move(out), {a, b}, [m, k, n](Graph& g, const Node& nd, const Tensor& go) {
        const Tensor& va = g.value(nd.inputs[0]);
        const Tensor& vb = g.value(nd.inputs[1]);
        Tensor ga({m, k}, 0.0);
        Tensor gb({k, n}, 0.0);
        // dA = G . B^T
        for (int64_t i = 0; i < m; ++i)
            for (int64_t j = 0; j < n; ++j) {
                const double gv = go.data[size_t(i * n + j)];
                if (gv == 0.0) continue;
                for (int64_t p = 0; p < k; ++p)
                    ga.data[size_t(i * k + p)] += gv * vb.data[size_t(p * n + j)];
            }
        // dB = A^T . G
        for (int64_t i = 0; i < m; ++i)
            for (int64_t p = 0; p < k; ++p) {
                const double av = va.data[size_t(i * k + p)];
                if (av == 0.0) continue;
                for (int64_t j = 0; j < n; ++j)
                    gb.data[size_t(p * n + j)] += av * go.data[size_t(i * n + j)];
            }
        g.accumulate(nd.inputs[0], ga);
        g.accumulate(nd.inputs[1], gb);
    });
}

Graph::NodeId Graph::transpose(NodeId a) {
    const Tensor& ta = value(a);
    check_matrix(ta, "transpose");
    const int64_t r = ta.shape[0], c = ta.shape[1];
    Tensor out({c, r}, 0.0);
    for (int64_t i = 0; i < r; ++i)
        for (int64_t j = 0; j < c; ++j) out.data[size_t(j * r + i)] = ta.data[size_t(i * c + j)];
    return record(std::move(out), {a}, [r, c](Graph& g, const Node& n, const Tensor& go) {
        Tensor ga({r, c}, 0.0);
        for (int64_t j = 0; j < c; ++j)
            for (int64_t i = 0; i < r; ++i) ga.data[size_t(i * c + j)] = go.data[size_t(j * r + i)];
        g.accumulate(n.inputs[0], ga);
    });
}

Graph::NodeId Graph::softmax_rows(NodeId a) {
    const Tensor& ta = value(a);
    check_matrix(ta, "softmax_rows");
    require_finite(ta, "softmax_rows");
    const int64_t r = ta.shape[0], c = ta.shape[1];
    Tensor out = ta;
    for (int64_t i = 0; i < r; ++i) {
        double* row = &out.data[size_t(i * c)];
        double mx = row[0];
        for (int64_t j = 1; j < c; ++j) mx = std::max(mx, row[j]);
        double s = 0.0;
        for (int64_t j = 0; j < c; ++j) {
            row[j] = std::exp(row[j] - mx);
            s += row[j];
        }
        for (int64_t j = 0; j < c; ++j) row[j] /= s;
    }
    return record(std::move(out), {a}, [r, c](Graph& g, const Node& n, const Tensor& go) {
        const Tensor& y = n.value;
        Tensor ga({r, c}, 0.0);
        for (int64_t i = 0; i < r; ++i) {
            double dot = 0.0;
            for (int64_t j = 0; j < c; ++j)
                dot += go.data[size_t(i * c + j)] * y.data[size_t(i * c + j)];
            for (int64_t j = 0; j < c; ++j)
                ga.data[size_t(i * c + j)] =
                    y.data[size_t(i * c + j)] * (go.data[size_t(i * c + j)] - dot);
        }
        g.accumulate(n.inputs[0], ga);
    });
}

Graph::NodeId Graph::layer_norm_rows(NodeId a, double eps) {
    const Tensor& ta = value(a);
    check_matrix(ta, "layer_norm_rows");
    const int64_t r = ta.shape[0], c = ta.shape[1];
    Tensor out({r, c}, 0.0);
    std::vector<double> inv_sigma(static_cast<size_t>(r), 0.0);
    for (int64_t i = 0; i < r; ++i) {
        const double* row = &ta.data[size_t(i * c)];
        double mean = 0.0;
        for (int64_t j = 0; j < c; ++j) mean += row[j];
        mean /= double(c);
        double var = 0.0;
        for (int64_t j = 0; j < c; ++j) var += (row[j] - mean) * (row[j] - mean);
        var /= double(c);
        const double is = 1.0 / std::sqrt(var + eps);
        inv_sigma[size_t(i)] = is;
        for (int64_t j = 0; j < c; ++j) out.data[size_t(i * c + j)] = (row[j] - mean) * is;
    }
    return record(std::move(out), {a},
                  [r, c, inv_sigma](Graph& g, const Node& n, const Tensor& go) {
                      const Tensor& y = n.value;
                      Tensor ga({r, c}, 0.0);
                      for (int64_t i = 0; i < r; ++i) {
                          double gmean = 0.0, gydot = 0.0;
                          for (int64_t j = 0; j < c; ++j) {
                              gmean += go.data[size_t(i * c + j)];
                              gydot += go.data[size_t(i * c + j)] * y.data[size_t(i * c + j)];
                          }
                          gmean /= double(c);
                          gydot /= double(c);
                          const double is = inv_sigma[size_t(i)];
                          for (int64_t j = 0; j < c; ++j) {
                              ga.data[size_t(i * c + j)] =
                                  is * (go.data[size_t(i * c + j)] - gmean -
                                        y.data[size_t(i * c + j)] * gydot);
                          }
                      }
                      g.accumulate(n.inputs[0], ga);
                  });
}

Graph::NodeId Graph::gelu(NodeId a) {
    const Tensor& ta = value(a);
    Tensor out = ta;
    for (double& v : out.data) v = 0.5 * v * (1.0 + std::erf(v * M_SQRT1_2));
    return record(std::move(out), {a}, [](Graph& g, const Node& n, const Tensor& go) {
        const Tensor& x = g.value(n.inputs[0]);
        Tensor ga = go;
        constexpr double inv_sqrt_2pi = 0.3989422804014327;
        for (size_t i = 0; i < ga.data.size(); ++i) {
            const double v = x.data[i];
            const double phi = 0.5 * (1.0 + std::erf(v * M_SQRT1_2));
            const double pdf = inv_sqrt_2pi * std::exp(-0.5 * v * v);
            ga.data[i] = go.data[i] * (phi + v * pdf);
        }
        g.accumulate(n.inputs[0], ga);
    });
}

Graph::NodeId Graph::row_mul(NodeId x, NodeId v) {
    const Tensor& tx = value(x);
    const Tensor& tv = value(v);
    check_matrix(tx, "row_mul");
    if (tv.numel() != tx.shape[1]) {
        throw std::invalid_argument("row_mul: vector length " + std::to_string(tv.numel()) +
                                    " does not match row width of " + shape_to_string(tx.shape));
    }
    const int64_t r = tx.shape[0], c = tx.shape[1];
    Tensor out = tx;
    for (int64_t i = 0; i < r; ++i)
        for (int64_t j = 0; j < c; ++j) out.data[size_t(i * c + j)] *= tv.data[size_t(j)];
    return record(std::move(out), {x, v}, [r, c](Graph& g, const Node& n, const Tensor& go) {
        const Tensor& vx = g.value(n.inputs[0]);
        const Tensor& vv = g.value(n.inputs[1]);
        Tensor gx = go;
        Tensor gv(vv.shape, 0.0);
        for (int64_t i = 0; i < r; ++i)
            for (int64_t j = 0; j < c; ++j) {
                gx.data[size_t(i * c + j)] = go.data[size_t(i * c + j)] * vv.data[size_t(j)];
                gv.data[size_t(j)] += go.data[size_t(i * c + j)] * vx.data[size_t(i * c + j)];
            }
        g.accumulate(n.inputs[0], gx);
        g.accumulate(n.inputs[1], gv);
    });
}

Graph::NodeId Graph::row_add(NodeId x, NodeId v) {
    const Tensor& tx = value(x);
    const Tensor& tv = value(v);
    check_matrix(tx, "row_add");
    if (tv.numel() != tx.shape[1]) {
        throw std::invalid_argument("row_add: vector length " + std::to_string(tv.numel()) +
                                    " does not match row width of " + shape_to_string(tx.shape));
    }
    const int64_t r = tx.shape[0], c = tx.shape[1];
    Tensor out = tx;
    for (int64_t i = 0; i < r; ++i)
        for (int64_t j = 0; j < c; ++j) out.data[size_t(i * c + j)] += tv.data[size_t(j)];
    return record(std::move(out), {x, v}, [r, c](Graph& g, const Node& n, const Tensor& go) {
        g.accumulate(n.inputs[0], go);
        Tensor gv(g.value(n.inputs[1]).shape, 0.0);
        for (int64_t i = 0; i < r; ++i)
            for (int64_t j = 0; j < c; ++j) gv.data[size_t(j)] += go.data[size_t(i * c + j)];
        g.accumulate(n.inputs[1], gv);
    });
}

Graph::NodeId Graph::sum(NodeId a) {
    const Tensor& ta = value(a);
    double s = 0.0;
    for (double v : ta.data) s += v;
    Tensor out({1}, std::vector<double>{s});
    return record(std::move(out), {a}, [](Graph& g, const Node& n, const Tensor& go) {
        Tensor ga(g.value(n.inputs[0]).shape, go.data[0]);
        g.accumulate(n.inputs[0], ga);
    });
}

Graph::NodeId Graph::reshape(NodeId a, std::vector<int64_t> new_shape) {
    const Tensor& ta = value(a);
    if (shape_numel(new_shape) != ta.numel()) {
        throw std::invalid_argument("reshape: element count mismatch " +
                                    shape_to_string(ta.shape) + " -> " +
                                    shape_to_string(new_shape));
    }
    Tensor out(new_shape, ta.data);
    return record(std::move(out), {a}, [](Graph& g, const Node& n, const Tensor& go) {
        Tensor ga(g.value(n.inputs[0]).shape, go.data);
        g.accumulate(n.inputs[0], ga);
    });
}

Graph::NodeId Graph::gather(NodeId a, std::shared_ptr<const std::vector<size_t>> index,
                            std::vector<int64_t> out_shape) {
    const Tensor& ta = value(a);
    const int64_t out_n = shape_numel(out_shape);
    if (static_cast<int64_t>(index->size()) != out_n) {
        throw std::invalid_argument("gather: index length does not match output shape");
    }
    Tensor out(std::move(out_shape), 0.0);
    for (size_t i = 0; i < index->size(); ++i) {
        const size_t src = (*index)[i];
        if (src >= ta.data.size()) throw std::invalid_argument("gather: index out of range");
        out.data[i] = ta.data[src];
    }
    return record(std::move(out), {a}, [index](Graph& g, const Node& n, const Tensor& go) {
        Tensor ga(g.value(n.inputs[0]).shape, 0.0);
        for (size_t i = 0; i < index->size(); ++i) ga.data[(*index)[i]] += go.data[i];
        g.accumulate(n.inputs[0], ga);
    });
}

Graph::NodeId Graph::scatter_add(NodeId a, std::shared_ptr<const std::vector<size_t>> index,
                                 std::vector<int64_t> out_shape) {
    const Tensor& ta = value(a);
    if (static_cast<int64_t>(index->size()) != ta.numel()) {
        throw std::invalid_argument("scatter_add: index length does not match input shape");
    }
    Tensor out(std::move(out_shape), 0.0);
    for (size_t i = 0; i < index->size(); ++i) {
        const size_t dst = (*index)[i];
        if (dst >= out.data.size()) throw std::invalid_argument("scatter_add: index out of range");
        out.data[dst] += ta.data[i];
    }
    return record(std::move(out), {a}, [index](Graph& g, const Node& n, const Tensor& go) {
        Tensor ga(g.value(n.inputs[0]).shape, 0.0);
        for (size_t i = 0; i < index->size(); ++i) ga.data[i] = go.data[(*index)[i]];
        g.accumulate(n.inputs[0], ga);
    });
}

void Graph::backward(NodeId root) {
    if (value(root).numel() != 1) {
        throw std::invalid_argument("backward: root must be a scalar, got " +
                                    shape_to_string(value(root).shape));
    }
    for (auto& g : grads_) g = Tensor();
    grads_[root] = Tensor(value(root).shape, 1.0);
    for (size_t i = root + 1; i-- > 0;) {
        const Node& n = nodes_[i];
        if (!n.backward_fn || !has_grad(i)) continue;
        n.backward_fn(*this, n, grads_[i]);
    }
}

double grad_check(const ScalarFn& f, const Tensor& x, double eps) {
    if (!(eps > 0.0 && eps <= 1e-2)) {
        throw std::invalid_argument("grad_check: eps must be in (0, 1e-2]");
    }
    require_finite(x, "grad_check input");

    Graph g;
    Graph::NodeId xid = g.leaf(x);
    Graph::NodeId out = f(g, xid);
    require_finite(g.value(out), "grad_check forward value");
    g.backward(out);
    Tensor analytic = g.has_grad(xid) ? g.grad(xid) : Tensor(x.shape, 0.0);
    require_finite(analytic, "grad_check analytic gradient");

    auto eval = [&](const Tensor& point) {
        Graph h;
        Graph::NodeId pid = h.leaf(point);
        Graph::NodeId o = f(h, pid);
        const Tensor& v = h.value(o);
        if (v.numel() != 1) throw std::invalid_argument("grad_check: f must return a scalar");
        if (!v.all_finite()) {
            throw std::runtime_error("grad_check: non-finite intermediate while differencing");
        }
        return v.data[0];
    };

    double worst = 0.0;
    Tensor probe = x;
    for (size_t i = 0; i < x.data.size(); ++i) {
        const double keep = probe.data[i];
        probe.data[i] = keep + eps;
        const double fp = eval(probe);
        probe.data[i] = keep - eps;
        const double fm = eval(probe);
        probe.data[i] = keep;
        const double central = (fp - fm) / (2.0 * eps);
        const double denom = std::max({std::fabs(analytic.data[i]), std::fabs(central), 1e-8});
        worst = std::max(worst, std::fabs(analytic.data[i] - central) / denom);
    }
    return worst;
}

}  // namespace relactrl
