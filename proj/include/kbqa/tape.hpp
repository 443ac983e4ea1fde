#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "kbqa/tensor.hpp"

namespace kbqa::ad {

class Tape;

// Handle to a node on a tape. Cheap to copy; valid while the tape lives.
struct Var {
    Tape* tape = nullptr;
    int32_t id = -1;

    bool valid() const { return tape != nullptr && id >= 0; }
    const Tensor& value() const;
};

// Directed edges of a local graph in parallel-array form: edge i runs
// src[i] -> dst[i] carrying relation rel[i]. All ids are dense local ids.
struct EdgeArray {
    std::vector<int32_t> src;
    std::vector<int32_t> rel;
    std::vector<int32_t> dst;

    size_t size() const { return dst.size(); }
    void push(int32_t s, int32_t r, int32_t d) {
        src.push_back(s);
        rel.push_back(r);
        dst.push_back(d);
    }
};

// Which argument weights the KL sum. target_weighted evaluates
// sum_i t_i ln(t_i / p_i) so gradients reach the prediction wherever the
// target has mass; paper_literal evaluates sum_i p_i ln(p_i / t_i).
enum class KlOrder { target_weighted, paper_literal };

// Recorded computation for one forward pass. Ops append nodes; backward()
// walks them in reverse creation order, which is a topological order because
// ops only ever reference earlier nodes.
class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    // Value that never receives gradients.
    Var constant(Tensor value);

    // Parameter leaf. Gradients accumulate into *grad_sink, which must match
    // the value's shape and outlive the tape. A null sink makes a constant.
    Var leaf(const Tensor& value, Tensor* grad_sink);

    const Tensor& value(int32_t id) const { return nodes_[static_cast<size_t>(id)].value; }
    bool wants_grad(int32_t id) const { return nodes_[static_cast<size_t>(id)].requires_grad; }

    // Gradient buffer for a node, allocated (zeroed) on first touch. For
    // leaves this is the external sink.
    Tensor& grad(int32_t id);

    // Seeds d(loss)/d(loss) = seed and propagates. loss must be scalar.
    void backward(Var loss, double seed = 1.0);

    size_t node_count() const { return nodes_.size(); }

    // Used by op implementations.
    Var emplace(Tensor value, bool requires_grad,
                std::function<void(Tape&, int32_t)> backprop);

private:
    struct Node {
        Tensor value;
        Tensor grad;
        Tensor* grad_sink = nullptr;
        bool requires_grad = false;
        bool grad_touched = false;
        std::function<void(Tape&, int32_t)> backprop;
    };

    std::vector<Node> nodes_;
};

inline const Tensor& Var::value() const { return tape->value(id); }

// ---- primitives ------------------------------------------------------------
// Each op validates shapes (mismatches raise NumericError naming both) and
// records its adjoint; gradients accumulate additively.

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b); // elementwise
Var scale(Var a, double c);
Var matmul(Var a, Var b); // (m,k)x(k,n), (m,k)x(k)->(m), (k)x(k,n)->(n)
Var rowwise_add(Var m, Var v); // each row of m plus v
Var rowwise_mul(Var m, Var v); // each row of m times v
Var concat(Var a, Var b);      // 1-D: end-to-end; 2-D: by columns
Var sigmoid(Var a);
Var tanh(Var a);
Var relu(Var a);
Var softmax(Var a); // 1-D, max-shifted
Var sum(Var a);     // -> scalar
Var row(Var m, int64_t r);                // 2-D -> 1-D slice
Var stack_rows(const std::vector<Var>& rows); // 1-D vars -> 2-D

// Rows of `table` selected by index; gradients scatter back into the table.
Var embedding_rows(Var table, std::vector<int32_t> ids);

// out[dst] += rel_rows[rel] over edges. `edges` must outlive the tape.
Var edge_scatter(Var rel_rows, const EdgeArray& edges, int64_t out_rows);

// out[dst] += src_weights[src] * rel_rows[rel] over edges.
Var edge_scatter_weighted(Var src_weights, Var rel_rows, const EdgeArray& edges,
                          int64_t out_rows);

// Divergences between 1-D distributions (entries >= 0, sums within 1e-5 of
// 1). Both arguments are mixed with uniform mass eps before evaluation:
// x' = (1-eps)x + eps/len. KL needs eps > 0 to stay finite on sparse inputs;
// JS is finite for eps = 0 (0 ln 0 = 0 and the mixture covers both supports),
// which keeps the closed-form identities exact. Pass eps > 0 whenever
// gradients must stay bounded.
Var kl_div(Var pred, Var target, KlOrder order = KlOrder::target_weighted,
           double eps = 1e-8);
Var js_div(Var p, Var q, double eps = 0.0);

} // namespace kbqa::ad
