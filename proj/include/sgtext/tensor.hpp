#pragma once

#include <functional>
#include <initializer_list>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "sgtext/common.hpp"

namespace sgtext {

// Dense row-major matrix. Vectors are 1xN or Nx1, scalars 1x1.
struct Tensor {
    int rows = 0;
    int cols = 0;
    std::vector<Real> v;

    Tensor() = default;
    Tensor(int r, int c) : rows(r), cols(c), v(size_t(r) * size_t(c), Real(0)) {}

    Real& at(int i, int j) { return v[size_t(i) * size_t(cols) + size_t(j)]; }
    Real at(int i, int j) const { return v[size_t(i) * size_t(cols) + size_t(j)]; }
    size_t size() const { return v.size(); }
    bool same_shape(const Tensor& o) const { return rows == o.rows && cols == o.cols; }

    static Tensor full(int r, int c, Real x);
    static Tensor from_rows(std::initializer_list<std::initializer_list<Real>> rows);
    static Tensor identity(int n);

    bool all_finite() const;
    bool bitwise_equal(const Tensor& o) const;
    Real max_abs_diff(const Tensor& o) const;
};

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor softmax_rows(const Tensor& a);
Tensor leaky_relu(const Tensor& a, Real slope);
// Mean over rows of -log(prob_rows[i, targets[i]]).
Real cross_entropy(const Tensor& prob_rows, const std::vector<int>& targets);

// Uniform on [-sqrt(6/(rows+cols)), sqrt(6/(rows+cols))], deterministic in seed.
Tensor glorot_init(int rows, int cols, uint64_t seed);

// Eager reverse-mode tape. Each op records its inputs' node ids and a closure
// that scatters the output gradient back. backward(node) seeds d(node)=1 and
// walks the tape in reverse; node must be scalar.
class Tape {
public:
    int constant(Tensor value);  // no gradient tracked
    int leaf(Tensor value);      // gradient tracked

    int matmul(int a, int b);
    int transpose(int a);
    int add(int a, int b);
    int mul(int a, int b);  // elementwise
    int scale(int a, Real s);
    int add_row_bias(int a, int bias);  // bias is 1 x cols, broadcast over rows
    int leaky_relu(int a, Real slope);
    int softmax_rows(int a);
    int layer_norm_rows(int x, int gain, int bias, Real eps = Real(1e-5));
    // prob_rows already softmaxed; returns 1x1 mean NLL node.
    int cross_entropy(int prob_rows, std::vector<int> targets);
    int concat_rows(int a, int b);
    int gather_rows(int a, std::vector<int> row_indices);

    void backward(int node);

    const Tensor& value(int node) const { return nodes_[size_t(node)].val; }
    const Tensor& grad(int node) const { return nodes_[size_t(node)].grad; }
    Tensor& grad_ref(int node) { return nodes_[size_t(node)].grad; }
    Real scalar(int node) const;
    int size() const { return int(nodes_.size()); }

private:
    struct Node {
        Tensor val;
        Tensor grad;
        bool needs_grad = false;
        std::function<void(Tape&, int)> backprop;
    };

    int push(Tensor val, bool needs_grad, std::function<void(Tape&, int)> backprop);

    std::vector<Node> nodes_;
};

struct AdamConfig {
    Real lr = Real(1e-5);
    Real beta1 = Real(0.9);
    Real beta2 = Real(0.999);
    Real eps = Real(1e-8);
};

// Named parameters with accumulated gradients and per-entry Adam state.
// Iteration order is the name order (std::map), which fixes checkpoint layout.
class ParamStore {
public:
    struct Entry {
        Tensor value;
        Tensor grad;
        Tensor m;
        Tensor v;
        long step = 0;
    };

    Tensor& create(const std::string& name, int rows, int cols);
    Tensor& create(const std::string& name, Tensor init);
    bool has(const std::string& name) const { return entries_.count(name) != 0; }
    Entry& entry(const std::string& name);
    const Entry& entry(const std::string& name) const;
    Tensor& value(const std::string& name) { return entry(name).value; }
    const Tensor& value(const std::string& name) const { return entry(name).value; }
    std::vector<std::string> names() const;
    size_t count() const { return entries_.size(); }

    void zero_grads();
    // Clears Adam moments and step counters for selected parameters.
    void reset_moments(const std::function<bool(const std::string&)>& select);
    // Applies one Adam update using accumulated grads, then zeroes those grads.
    void adam_step(const AdamConfig& cfg);
    void adam_step(const AdamConfig& cfg, const std::function<bool(const std::string&)>& select);

    // Writes path_prefix.json (shapes, offsets) and path_prefix.bin (raw
    // little-endian scalars: value, m, v per tensor). Round-trips bit-exactly.
    void save(const std::string& path_prefix) const;
    static ParamStore load(const std::string& path_prefix);
    bool bitwise_equal(const ParamStore& o) const;  // values only

private:
    std::map<std::string, Entry> entries_;
};

// Binds store parameters to tape leaves on first use; accumulate_grads() adds
// tape gradients back into the store after backward().
class TapeParams {
public:
    TapeParams(Tape& tape, ParamStore& store) : tape_(tape), store_(store) {}

    int operator()(const std::string& name);
    void accumulate_grads();

private:
    Tape& tape_;
    ParamStore& store_;
    std::map<std::string, int> bound_;
};

struct GradCheckReport {
    Real max_rel_error = 0;
    std::string worst_param;
    int worst_index = -1;
    Real analytic = 0;
    Real numeric = 0;
    int checked = 0;
};

// Central-difference check of every parameter entry in the store.
// eval(true) must rebuild the graph, run backward, and accumulate grads into
// the store; eval(false) must just return the objective. The relative error
// denominator is floored at 1e-3 so near-zero gradients compare absolutely.
GradCheckReport grad_check(ParamStore& store, const std::function<Real(bool)>& eval,
                           Real h = Real(1e-5));

}  // namespace sgtext
