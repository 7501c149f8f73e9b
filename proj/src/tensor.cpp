#include "sgtext/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace sgtext {

Tensor Tensor::full(int r, int c, Real x) {
    Tensor t(r, c);
    std::fill(t.v.begin(), t.v.end(), x);
    return t;
}

Tensor Tensor::from_rows(std::initializer_list<std::initializer_list<Real>> rows) {
    int r = int(rows.size());
    int c = r > 0 ? int(rows.begin()->size()) : 0;
    Tensor t(r, c);
    int i = 0;
    for (const auto& row : rows) {
        if (int(row.size()) != c) throw std::invalid_argument("ragged initializer");
        int j = 0;
        for (Real x : row) t.at(i, j++) = x;
        ++i;
    }
    return t;
}

Tensor Tensor::identity(int n) {
    Tensor t(n, n);
    for (int i = 0; i < n; ++i) t.at(i, i) = 1;
    return t;
}

bool Tensor::all_finite() const {
    for (Real x : v) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}

bool Tensor::bitwise_equal(const Tensor& o) const {
    if (!same_shape(o)) return false;
    return std::memcmp(v.data(), o.v.data(), v.size() * sizeof(Real)) == 0;
}

Real Tensor::max_abs_diff(const Tensor& o) const {
    if (!same_shape(o)) throw std::invalid_argument("shape mismatch in max_abs_diff");
    Real m = 0;
    for (size_t i = 0; i < v.size(); ++i) m = std::max(m, std::abs(v[i] - o.v[i]));
    return m;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.cols != b.rows) throw std::invalid_argument("matmul shape mismatch");
    Tensor out(a.rows, b.cols);
    for (int i = 0; i < a.rows; ++i) {
        for (int k = 0; k < a.cols; ++k) {
            Real aik = a.at(i, k);
            if (aik == 0) continue;
            const Real* brow = &b.v[size_t(k) * size_t(b.cols)];
            Real* orow = &out.v[size_t(i) * size_t(out.cols)];
            for (int j = 0; j < b.cols; ++j) orow[j] += aik * brow[j];
        }
    }
    return out;
}

Tensor transpose(const Tensor& a) {
    Tensor out(a.cols, a.rows);
    for (int i = 0; i < a.rows; ++i) {
        for (int j = 0; j < a.cols; ++j) out.at(j, i) = a.at(i, j);
    }
    return out;
}

Tensor softmax_rows(const Tensor& a) {
    Tensor out(a.rows, a.cols);
    for (int i = 0; i < a.rows; ++i) {
        Real mx = -std::numeric_limits<Real>::infinity();
        for (int j = 0; j < a.cols; ++j) mx = std::max(mx, a.at(i, j));
        Real sum = 0;
        for (int j = 0; j < a.cols; ++j) {
            Real e = std::exp(a.at(i, j) - mx);
            out.at(i, j) = e;
            sum += e;
        }
        for (int j = 0; j < a.cols; ++j) out.at(i, j) /= sum;
    }
    return out;
}

Tensor leaky_relu(const Tensor& a, Real slope) {
    if (!(slope > 0 && slope < 1)) throw std::invalid_argument("leaky_relu slope must be in (0,1)");
    Tensor out = a;
    for (Real& x : out.v) {
        if (x < 0) x *= slope;
    }
    return out;
}

Real cross_entropy(const Tensor& prob_rows, const std::vector<int>& targets) {
    if (int(targets.size()) != prob_rows.rows) {
        throw std::invalid_argument("cross_entropy target count mismatch");
    }
    Real sum = 0;
    for (int i = 0; i < prob_rows.rows; ++i) {
        int t = targets[size_t(i)];
        if (t < 0 || t >= prob_rows.cols) throw std::out_of_range("cross_entropy target out of range");
        sum += -std::log(prob_rows.at(i, t));
    }
    return sum / Real(prob_rows.rows);
}

Tensor glorot_init(int rows, int cols, uint64_t seed) {
    if (rows < 1 || cols < 1) throw std::invalid_argument("glorot_init needs positive shape");
    Real bound = std::sqrt(Real(6) / Real(rows + cols));
    Rng rng(seed);
    Tensor t(rows, cols);
    for (Real& x : t.v) x = Real(rng.uniform(-double(bound), double(bound)));
    return t;
}

// ---------------------------------------------------------------------------
// Tape

int Tape::push(Tensor val, bool needs_grad, std::function<void(Tape&, int)> backprop) {
    Node n;
    n.val = std::move(val);
    n.needs_grad = needs_grad;
    n.backprop = std::move(backprop);
    nodes_.push_back(std::move(n));
    return int(nodes_.size()) - 1;
}

int Tape::constant(Tensor value) { return push(std::move(value), false, nullptr); }

int Tape::leaf(Tensor value) { return push(std::move(value), true, nullptr); }

int Tape::matmul(int a, int b) {
    const Tensor& A = value(a);
    const Tensor& B = value(b);
    Tensor out = sgtext::matmul(A, B);
    bool ng = nodes_[size_t(a)].needs_grad || nodes_[size_t(b)].needs_grad;
    return push(std::move(out), ng, [a, b](Tape& t, int self) {
        const Tensor& g = t.grad(self);
        if (t.nodes_[size_t(a)].needs_grad) {
            Tensor ga = sgtext::matmul(g, sgtext::transpose(t.value(b)));
            Tensor& acc = t.grad_ref(a);
            for (size_t i = 0; i < acc.v.size(); ++i) acc.v[i] += ga.v[i];
        }
        if (t.nodes_[size_t(b)].needs_grad) {
            Tensor gb = sgtext::matmul(sgtext::transpose(t.value(a)), g);
            Tensor& acc = t.grad_ref(b);
            for (size_t i = 0; i < acc.v.size(); ++i) acc.v[i] += gb.v[i];
        }
    });
}

int Tape::transpose(int a) {
    Tensor out = sgtext::transpose(value(a));
    bool ng = nodes_[size_t(a)].needs_grad;
    return push(std::move(out), ng, [a](Tape& t, int self) {
        if (!t.nodes_[size_t(a)].needs_grad) return;
        Tensor g = sgtext::transpose(t.grad(self));
        Tensor& acc = t.grad_ref(a);
        for (size_t i = 0; i < acc.v.size(); ++i) acc.v[i] += g.v[i];
    });
}

int Tape::add(int a, int b) {
    const Tensor& A = value(a);
    const Tensor& B = value(b);
    if (!A.same_shape(B)) throw std::invalid_argument("add shape mismatch");
    Tensor out = A;
    for (size_t i = 0; i < out.v.size(); ++i) out.v[i] += B.v[i];
    bool ng = nodes_[size_t(a)].needs_grad || nodes_[size_t(b)].needs_grad;
    return push(std::move(out), ng, [a, b](Tape& t, int self) {
        const Tensor& g = t.grad(self);
        for (int p : {a, b}) {
            if (!t.nodes_[size_t(p)].needs_grad) continue;
            Tensor& acc = t.grad_ref(p);
            for (size_t i = 0; i < acc.v.size(); ++i) acc.v[i] += g.v[i];
        }
    });
}

int Tape::mul(int a, int b) {
    const Tensor& A = value(a);
    const Tensor& B = value(b);
    if (!A.same_shape(B)) throw std::invalid_argument("mul shape mismatch");
    Tensor out = A;
    for (size_t i = 0; i < out.v.size(); ++i) out.v[i] *= B.v[i];
    bool ng = nodes_[size_t(a)].needs_grad || nodes_[size_t(b)].needs_grad;
    return push(std::move(out), ng, [a, b](Tape& t, int self) {
        const Tensor& g = t.grad(self);
        if (t.nodes_[size_t(a)].needs_grad) {
            Tensor& acc = t.grad_ref(a);
            const Tensor& B2 = t.value(b);
            for (size_t i = 0; i < acc.v.size(); ++i) acc.v[i] += g.v[i] * B2.v[i];
        }
        if (t.nodes_[size_t(b)].needs_grad) {
            Tensor& acc = t.grad_ref(b);
            const Tensor& A2 = t.value(a);
            for (size_t i = 0; i < acc.v.size(); ++i) acc.v[i] += g.v[i] * A2.v[i];
        }
    });
}

int Tape::scale(int a, Real s) {
    Tensor out = value(a);
    for (Real& x : out.v) x *= s;
    bool ng = nodes_[size_t(a)].needs_grad;
    return push(std::move(out), ng, [a, s](Tape& t, int self) {
        if (!t.nodes_[size_t(a)].needs_grad) return;
        const Tensor& g = t.grad(self);
        Tensor& acc = t.grad_ref(a);
        for (size_t i = 0; i < acc.v.size(); ++i) acc.v[i] += s * g.v[i];
    });
}

int Tape::add_row_bias(int a, int bias) {
    const Tensor& A = value(a);
    const Tensor& B = value(bias);
    if (B.rows != 1 || B.cols != A.cols) throw std::invalid_argument("row bias shape mismatch");
    Tensor out = A;
    for (int i = 0; i < out.rows; ++i) {
        for (int j = 0; j < out.cols; ++j) out.at(i, j) += B.at(0, j);
    }
    bool ng = nodes_[size_t(a)].needs_grad || nodes_[size_t(bias)].needs_grad;
    return push(std::move(out), ng, [a, bias](Tape& t, int self) {
        const Tensor& g = t.grad(self);
        if (t.nodes_[size_t(a)].needs_grad) {
            Tensor& acc = t.grad_ref(a);
            for (size_t i = 0; i < acc.v.size(); ++i) acc.v[i] += g.v[i];
        }
        if (t.nodes_[size_t(bias)].needs_grad) {
            Tensor& acc = t.grad_ref(bias);
            for (int i = 0; i < g.rows; ++i) {
                for (int j = 0; j < g.cols; ++j) acc.at(0, j) += g.at(i, j);
            }
        }
    });
}

int Tape::leaky_relu(int a, Real slope) {
    Tensor out = sgtext::leaky_relu(value(a), slope);
    bool ng = nodes_[size_t(a)].needs_grad;
    return push(std::move(out), ng, [a, slope](Tape& t, int self) {
        if (!t.nodes_[size_t(a)].needs_grad) return;
        const Tensor& g = t.grad(self);
        const Tensor& in = t.value(a);
        Tensor& acc = t.grad_ref(a);
        for (size_t i = 0; i < acc.v.size(); ++i) {
            acc.v[i] += g.v[i] * (in.v[i] >= 0 ? Real(1) : slope);
        }
    });
}

int Tape::softmax_rows(int a) {
    Tensor out = sgtext::softmax_rows(value(a));
    bool ng = nodes_[size_t(a)].needs_grad;
    return push(std::move(out), ng, [a](Tape& t, int self) {
        if (!t.nodes_[size_t(a)].needs_grad) return;
        const Tensor& g = t.grad(self);
        const Tensor& y = t.value(self);
        Tensor& acc = t.grad_ref(a);
        for (int i = 0; i < y.rows; ++i) {
            Real dot = 0;
            for (int j = 0; j < y.cols; ++j) dot += g.at(i, j) * y.at(i, j);
            for (int j = 0; j < y.cols; ++j) {
                acc.at(i, j) += y.at(i, j) * (g.at(i, j) - dot);
            }
        }
    });
}

int Tape::layer_norm_rows(int x, int gain, int bias, Real eps) {
    const Tensor& X = value(x);
    const Tensor& G = value(gain);
    const Tensor& B = value(bias);
    if (G.rows != 1 || G.cols != X.cols || B.rows != 1 || B.cols != X.cols) {
        throw std::invalid_argument("layer_norm gain/bias shape mismatch");
    }
    int d = X.cols;
    Tensor out(X.rows, d);
    Tensor xhat(X.rows, d);
    std::vector<Real> inv_std(size_t(X.rows));
    for (int i = 0; i < X.rows; ++i) {
        Real mean = 0;
        for (int j = 0; j < d; ++j) mean += X.at(i, j);
        mean /= Real(d);
        Real var = 0;
        for (int j = 0; j < d; ++j) {
            Real c = X.at(i, j) - mean;
            var += c * c;
        }
        var /= Real(d);
        Real is = Real(1) / std::sqrt(var + eps);
        inv_std[size_t(i)] = is;
        for (int j = 0; j < d; ++j) {
            Real h = (X.at(i, j) - mean) * is;
            xhat.at(i, j) = h;
            out.at(i, j) = G.at(0, j) * h + B.at(0, j);
        }
    }
    bool ng = nodes_[size_t(x)].needs_grad || nodes_[size_t(gain)].needs_grad ||
              nodes_[size_t(bias)].needs_grad;
    return push(std::move(out), ng,
                [x, gain, bias, xhat = std::move(xhat), inv_std = std::move(inv_std)](Tape& t, int self) {
        const Tensor& g = t.grad(self);
        const Tensor& G = t.value(gain);
        int d = g.cols;
        if (t.nodes_[size_t(gain)].needs_grad) {
            Tensor& acc = t.grad_ref(gain);
            for (int i = 0; i < g.rows; ++i) {
                for (int j = 0; j < d; ++j) acc.at(0, j) += g.at(i, j) * xhat.at(i, j);
            }
        }
        if (t.nodes_[size_t(bias)].needs_grad) {
            Tensor& acc = t.grad_ref(bias);
            for (int i = 0; i < g.rows; ++i) {
                for (int j = 0; j < d; ++j) acc.at(0, j) += g.at(i, j);
            }
        }
        if (t.nodes_[size_t(x)].needs_grad) {
            Tensor& acc = t.grad_ref(x);
            for (int i = 0; i < g.rows; ++i) {
                Real mean_dy = 0, mean_dy_xhat = 0;
                for (int j = 0; j < d; ++j) {
                    Real dy = g.at(i, j) * G.at(0, j);
                    mean_dy += dy;
                    mean_dy_xhat += dy * xhat.at(i, j);
                }
                mean_dy /= Real(d);
                mean_dy_xhat /= Real(d);
                for (int j = 0; j < d; ++j) {
                    Real dy = g.at(i, j) * G.at(0, j);
                    acc.at(i, j) += inv_std[size_t(i)] *
                                    (dy - mean_dy - xhat.at(i, j) * mean_dy_xhat);
                }
            }
        }
    });
}

int Tape::cross_entropy(int prob_rows, std::vector<int> targets) {
    const Tensor& P = value(prob_rows);
    Real loss = sgtext::cross_entropy(P, targets);
    Tensor out(1, 1);
    out.at(0, 0) = loss;
    bool ng = nodes_[size_t(prob_rows)].needs_grad;
    return push(std::move(out), ng, [prob_rows, targets = std::move(targets)](Tape& t, int self) {
        if (!t.nodes_[size_t(prob_rows)].needs_grad) return;
        Real g = t.grad(self).at(0, 0);
        const Tensor& P2 = t.value(prob_rows);
        Tensor& acc = t.grad_ref(prob_rows);
        Real inv_n = Real(1) / Real(P2.rows);
        for (int i = 0; i < P2.rows; ++i) {
            int tc = targets[size_t(i)];
            acc.at(i, tc) += g * (-inv_n / P2.at(i, tc));
        }
    });
}

int Tape::concat_rows(int a, int b) {
    const Tensor& A = value(a);
    const Tensor& B = value(b);
    if (A.cols != B.cols) throw std::invalid_argument("concat_rows width mismatch");
    Tensor out(A.rows + B.rows, A.cols);
    std::copy(A.v.begin(), A.v.end(), out.v.begin());
    std::copy(B.v.begin(), B.v.end(), out.v.begin() + A.v.size());
    bool ng = nodes_[size_t(a)].needs_grad || nodes_[size_t(b)].needs_grad;
    int arows = A.rows;
    return push(std::move(out), ng, [a, b, arows](Tape& t, int self) {
        const Tensor& g = t.grad(self);
        if (t.nodes_[size_t(a)].needs_grad) {
            Tensor& acc = t.grad_ref(a);
            for (size_t i = 0; i < acc.v.size(); ++i) acc.v[i] += g.v[i];
        }
        if (t.nodes_[size_t(b)].needs_grad) {
            Tensor& acc = t.grad_ref(b);
            size_t off = size_t(arows) * size_t(g.cols);
            for (size_t i = 0; i < acc.v.size(); ++i) acc.v[i] += g.v[off + i];
        }
    });
}

int Tape::gather_rows(int a, std::vector<int> row_indices) {
    const Tensor& A = value(a);
    Tensor out(int(row_indices.size()), A.cols);
    for (int i = 0; i < out.rows; ++i) {
        int r = row_indices[size_t(i)];
        if (r < 0 || r >= A.rows) throw std::out_of_range("gather_rows index out of range");
        for (int j = 0; j < A.cols; ++j) out.at(i, j) = A.at(r, j);
    }
    bool ng = nodes_[size_t(a)].needs_grad;
    return push(std::move(out), ng, [a, idx = std::move(row_indices)](Tape& t, int self) {
        if (!t.nodes_[size_t(a)].needs_grad) return;
        const Tensor& g = t.grad(self);
        Tensor& acc = t.grad_ref(a);
        for (int i = 0; i < g.rows; ++i) {
            int r = idx[size_t(i)];
            for (int j = 0; j < g.cols; ++j) acc.at(r, j) += g.at(i, j);
        }
    });
}

void Tape::backward(int node) {
    for (size_t i = 0; i <= size_t(node); ++i) {
        nodes_[i].grad = Tensor(nodes_[i].val.rows, nodes_[i].val.cols);
    }
    Tensor& seed = nodes_[size_t(node)].grad;
    if (seed.size() != 1) throw std::invalid_argument("backward expects a scalar node");
    seed.at(0, 0) = 1;
    for (int i = node; i >= 0; --i) {
        if (nodes_[size_t(i)].backprop && nodes_[size_t(i)].needs_grad) {
            nodes_[size_t(i)].backprop(*this, i);
        }
    }
}

Real Tape::scalar(int node) const {
    const Tensor& t = value(node);
    if (t.size() != 1) throw std::invalid_argument("scalar() on non-scalar node");
    return t.at(0, 0);
}

// ---------------------------------------------------------------------------
// ParamStore

Tensor& ParamStore::create(const std::string& name, int rows, int cols) {
    return create(name, Tensor(rows, cols));
}

Tensor& ParamStore::create(const std::string& name, Tensor init) {
    if (entries_.count(name)) throw std::invalid_argument("parameter exists: " + name);
    Entry e;
    e.grad = Tensor(init.rows, init.cols);
    e.m = Tensor(init.rows, init.cols);
    e.v = Tensor(init.rows, init.cols);
    e.value = std::move(init);
    auto [it, ok] = entries_.emplace(name, std::move(e));
    (void)ok;
    return it->second.value;
}

ParamStore::Entry& ParamStore::entry(const std::string& name) {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw std::out_of_range("no parameter: " + name);
    return it->second;
}

const ParamStore::Entry& ParamStore::entry(const std::string& name) const {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw std::out_of_range("no parameter: " + name);
    return it->second;
}

std::vector<std::string> ParamStore::names() const {
    std::vector<std::string> out;
    out.reserve(entries_.size());
    for (const auto& [k, _] : entries_) out.push_back(k);
    return out;
}

void ParamStore::zero_grads() {
    for (auto& [_, e] : entries_) std::fill(e.grad.v.begin(), e.grad.v.end(), Real(0));
}

void ParamStore::reset_moments(const std::function<bool(const std::string&)>& select) {
    for (auto& [name, e] : entries_) {
        if (!select(name)) continue;
        std::fill(e.m.v.begin(), e.m.v.end(), Real(0));
        std::fill(e.v.v.begin(), e.v.v.end(), Real(0));
        e.step = 0;
    }
}

void ParamStore::adam_step(const AdamConfig& cfg) {
    adam_step(cfg, [](const std::string&) { return true; });
}

void ParamStore::adam_step(const AdamConfig& cfg,
                           const std::function<bool(const std::string&)>& select) {
    for (auto& [name, e] : entries_) {
        if (!select(name)) continue;
        e.step += 1;
        Real bc1 = Real(1) - std::pow(cfg.beta1, Real(e.step));
        Real bc2 = Real(1) - std::pow(cfg.beta2, Real(e.step));
        for (size_t i = 0; i < e.value.v.size(); ++i) {
            Real g = e.grad.v[i];
            e.m.v[i] = cfg.beta1 * e.m.v[i] + (Real(1) - cfg.beta1) * g;
            e.v.v[i] = cfg.beta2 * e.v.v[i] + (Real(1) - cfg.beta2) * g * g;
            Real mhat = e.m.v[i] / bc1;
            Real vhat = e.v.v[i] / bc2;
            e.value.v[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
        }
        std::fill(e.grad.v.begin(), e.grad.v.end(), Real(0));
    }
}

void ParamStore::save(const std::string& path_prefix) const {
    nlohmann::ordered_json manifest;
    manifest["format"] = "sgtext-params-v1";
    manifest["scalar_bytes"] = int(sizeof(Real));
    nlohmann::ordered_json tensors = nlohmann::ordered_json::array();
    std::ofstream bin(path_prefix + ".bin", std::ios::binary);
    if (!bin) throw std::runtime_error("cannot write " + path_prefix + ".bin");
    uint64_t offset = 0;
    auto dump = [&](const Tensor& t) {
        bin.write(reinterpret_cast<const char*>(t.v.data()),
                  std::streamsize(t.v.size() * sizeof(Real)));
        offset += t.v.size() * sizeof(Real);
    };
    for (const auto& [name, e] : entries_) {
        nlohmann::ordered_json rec;
        rec["name"] = name;
        rec["rows"] = e.value.rows;
        rec["cols"] = e.value.cols;
        rec["step"] = e.step;
        rec["offset"] = offset;
        dump(e.value);
        dump(e.m);
        dump(e.v);
        tensors.push_back(rec);
    }
    manifest["tensors"] = tensors;
    std::ofstream js(path_prefix + ".json");
    if (!js) throw std::runtime_error("cannot write " + path_prefix + ".json");
    js << manifest.dump(2) << "\n";
}

ParamStore ParamStore::load(const std::string& path_prefix) {
    std::ifstream js(path_prefix + ".json");
    if (!js) throw std::runtime_error("cannot read " + path_prefix + ".json");
    nlohmann::json manifest = nlohmann::json::parse(js);
    if (manifest.at("scalar_bytes").get<int>() != int(sizeof(Real))) {
        throw std::runtime_error("checkpoint scalar width mismatch");
    }
    std::ifstream bin(path_prefix + ".bin", std::ios::binary);
    if (!bin) throw std::runtime_error("cannot read " + path_prefix + ".bin");
    ParamStore store;
    for (const auto& rec : manifest.at("tensors")) {
        std::string name = rec.at("name").get<std::string>();
        int rows = rec.at("rows").get<int>();
        int cols = rec.at("cols").get<int>();
        Entry e;
        e.value = Tensor(rows, cols);
        e.grad = Tensor(rows, cols);
        e.m = Tensor(rows, cols);
        e.v = Tensor(rows, cols);
        e.step = rec.at("step").get<long>();
        bin.seekg(std::streamoff(rec.at("offset").get<uint64_t>()));
        auto slurp = [&](Tensor& t) {
            bin.read(reinterpret_cast<char*>(t.v.data()), std::streamsize(t.v.size() * sizeof(Real)));
        };
        slurp(e.value);
        slurp(e.m);
        slurp(e.v);
        if (!bin) throw std::runtime_error("truncated checkpoint: " + name);
        store.entries_.emplace(name, std::move(e));
    }
    return store;
}

bool ParamStore::bitwise_equal(const ParamStore& o) const {
    if (entries_.size() != o.entries_.size()) return false;
    for (const auto& [name, e] : entries_) {
        auto it = o.entries_.find(name);
        if (it == o.entries_.end()) return false;
        if (!e.value.bitwise_equal(it->second.value)) return false;
    }
    return true;
}

// ---------------------------------------------------------------------------
// TapeParams

int TapeParams::operator()(const std::string& name) {
    auto it = bound_.find(name);
    if (it != bound_.end()) return it->second;
    int id = tape_.leaf(store_.value(name));
    bound_.emplace(name, id);
    return id;
}

void TapeParams::accumulate_grads() {
    for (const auto& [name, id] : bound_) {
        const Tensor& g = tape_.grad(id);
        Tensor& acc = store_.entry(name).grad;
        if (g.size() == 0) continue;  // backward not run through this leaf
        for (size_t i = 0; i < acc.v.size(); ++i) acc.v[i] += g.v[i];
    }
}

// ---------------------------------------------------------------------------
// grad_check

GradCheckReport grad_check(ParamStore& store, const std::function<Real(bool)>& eval, Real h) {
    if (!(h > 0)) throw std::invalid_argument("grad_check step must be positive");
    store.zero_grads();
    Real base = eval(true);
    if (!std::isfinite(base)) throw std::runtime_error("grad_check: non-finite objective");

    std::map<std::string, Tensor> analytic;
    for (const auto& name : store.names()) analytic.emplace(name, store.entry(name).grad);

    GradCheckReport rep;
    for (const auto& name : store.names()) {
        Tensor& value = store.entry(name).value;
        const Tensor& ana = analytic.at(name);
        for (size_t i = 0; i < value.v.size(); ++i) {
            Real keep = value.v[i];
            value.v[i] = keep + h;
            Real up = eval(false);
            value.v[i] = keep - h;
            Real down = eval(false);
            value.v[i] = keep;
            if (!std::isfinite(up) || !std::isfinite(down)) {
                throw std::runtime_error("grad_check: non-finite objective near " + name);
            }
            Real num = (up - down) / (2 * h);
            Real a = ana.v[i];
            Real denom = std::max({std::abs(a), std::abs(num), Real(1e-3)});
            Real rel = std::abs(a - num) / denom;
            if (rel > rep.max_rel_error) {
                rep.max_rel_error = rel;
                rep.worst_param = name;
                rep.worst_index = int(i);
                rep.analytic = a;
                rep.numeric = num;
            }
            rep.checked += 1;
        }
    }
    store.zero_grads();
    return rep;
}

}  // namespace sgtext
