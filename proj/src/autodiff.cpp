#include "sad/autodiff.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "sad/error.hpp"

namespace sad::ad {

namespace {

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapM = Eigen::Map<Mat<T>>;
template <typename T>
using CMapM = Eigen::Map<const Mat<T>>;

template <typename T>
MapM<T> as_mat(Tensor<T>& t) {
    return MapM<T>(t.data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols()));
}

template <typename T>
CMapM<T> as_mat(const Tensor<T>& t) {
    return CMapM<T>(t.data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols()));
}

std::string shape_str(const std::vector<std::size_t>& s) {
    std::string out = "[";
    for (std::size_t i = 0; i < s.size(); ++i) {
        out += std::to_string(s[i]);
        if (i + 1 < s.size()) {
            out += ",";
        }
    }
    return out + "]";
}

[[noreturn]] void shape_error(const char* op, const std::vector<std::size_t>& a,
                              const std::vector<std::size_t>& b) {
    throw Error(Errc::shape_mismatch, std::string(op) + " " + shape_str(a) + " vs " + shape_str(b));
}

template <typename T>
Tape<T>& same_tape(Var<T> a, Var<T> b) {
    if (a.tape == nullptr || a.tape != b.tape) {
        throw Error(Errc::invalid_argument, "vars belong to different tapes");
    }
    return *a.tape;
}

}  // namespace

// ---------------------------------------------------------------- Tensor

template <typename T>
Tensor<T>::Tensor(std::vector<std::size_t> shape, T fill) : shape_(std::move(shape)) {
    std::size_t n = 1;
    for (std::size_t d : shape_) {
        if (d == 0) {
            throw Error(Errc::shape_mismatch, "tensor dimensions must be positive");
        }
        n *= d;
    }
    data_.assign(n, fill);
}

template <typename T>
Tensor<T>::Tensor(std::vector<std::size_t> shape, std::vector<T> data)
    : shape_(std::move(shape)), data_(data.begin(), data.end()) {
    std::size_t n = 1;
    for (std::size_t d : shape_) {
        if (d == 0) {
            throw Error(Errc::shape_mismatch, "tensor dimensions must be positive");
        }
        n *= d;
    }
    if (n != data_.size()) {
        throw Error(Errc::shape_mismatch, "data length " + std::to_string(data_.size()) +
                                              " does not match shape " + shape_str(shape_));
    }
}

template <typename T>
void Tensor<T>::fill(T v) {
    std::fill(data_.begin(), data_.end(), v);
}

template <typename T>
bool Tensor<T>::all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](T v) { return std::isfinite(v); });
}

// ---------------------------------------------------------------- Tape

template <typename T>
const Tensor<T>& Var<T>::value() const {
    return tape->value(id);
}

template <typename T>
Var<T> Tape<T>::leaf(Tensor<T> value, bool requires_grad) {
    Node node;
    node.value = std::move(value);
    node.requires_grad = requires_grad;
    nodes_.push_back(std::move(node));
    return Var<T>{this, static_cast<int>(nodes_.size() - 1)};
}

template <typename T>
Var<T> Tape<T>::leaf_ref(const Tensor<T>& value, bool requires_grad) {
    Node node;
    node.external = &value;
    node.requires_grad = requires_grad;
    nodes_.push_back(std::move(node));
    return Var<T>{this, static_cast<int>(nodes_.size() - 1)};
}

template <typename T>
Tensor<T>& Tape<T>::grad(int id) {
    Node& node = nodes_[static_cast<std::size_t>(id)];
    const Tensor<T>& v = value(id);
    if (node.grad.size() != v.size()) {
        node.grad = Tensor<T>(v.shape(), T{0});
    }
    return node.grad;
}

template <typename T>
Var<T> Tape<T>::record(Tensor<T> value, std::vector<int> inputs, std::function<void(Tape&, int)> back) {
    Node node;
    node.value = std::move(value);
    if (grad_enabled_) {
        node.requires_grad = std::any_of(inputs.begin(), inputs.end(), [this](int i) {
            return nodes_[static_cast<std::size_t>(i)].requires_grad;
        });
    }
    if (node.requires_grad) {
        node.inputs = std::move(inputs);
        node.back = std::move(back);
    }
    nodes_.push_back(std::move(node));
    return Var<T>{this, static_cast<int>(nodes_.size() - 1)};
}

template <typename T>
void Tape<T>::backward(Var<T> loss) {
    if (loss.tape != this) {
        throw Error(Errc::invalid_argument, "loss belongs to another tape");
    }
    if (value(loss.id).size() != 1) {
        throw Error(Errc::shape_mismatch, "backward needs a scalar loss");
    }
    grad(loss.id)[0] = T{1};
    for (int i = loss.id; i >= 0; --i) {
        Node& node = nodes_[static_cast<std::size_t>(i)];
        if (node.back && node.grad.size() == value(i).size()) {
            node.back(*this, i);
        }
    }
}

// ---------------------------------------------------------------- primitives

template <typename T>
Var<T> matmul(Var<T> a, Var<T> b) {
    Tape<T>& tape = same_tape(a, b);
    const Tensor<T>& av = a.value();
    const Tensor<T>& bv = b.value();
    if (av.cols() != bv.rows()) {
        shape_error("matmul", av.shape(), bv.shape());
    }
    Tensor<T> out = Tensor<T>::matrix(av.rows(), bv.cols());
    as_mat(out).noalias() = as_mat(av) * as_mat(bv);
    const int ia = a.id;
    const int ib = b.id;
    return tape.record(std::move(out), {ia, ib}, [ia, ib](Tape<T>& t, int self) {
        const Tensor<T>& g = t.grad(self);
        if (t.requires_grad(ia)) {
            as_mat(t.grad(ia)).noalias() += as_mat(g) * as_mat(t.value(ib)).transpose();
        }
        if (t.requires_grad(ib)) {
            as_mat(t.grad(ib)).noalias() += as_mat(t.value(ia)).transpose() * as_mat(g);
        }
    });
}

template <typename T>
Var<T> matmul_nt(Var<T> a, Var<T> b) {
    Tape<T>& tape = same_tape(a, b);
    const Tensor<T>& av = a.value();
    const Tensor<T>& bv = b.value();
    if (av.cols() != bv.cols()) {
        shape_error("matmul_nt", av.shape(), bv.shape());
    }
    Tensor<T> out = Tensor<T>::matrix(av.rows(), bv.rows());
    as_mat(out).noalias() = as_mat(av) * as_mat(bv).transpose();
    const int ia = a.id;
    const int ib = b.id;
    return tape.record(std::move(out), {ia, ib}, [ia, ib](Tape<T>& t, int self) {
        const Tensor<T>& g = t.grad(self);
        if (t.requires_grad(ia)) {
            as_mat(t.grad(ia)).noalias() += as_mat(g) * as_mat(t.value(ib));
        }
        if (t.requires_grad(ib)) {
            as_mat(t.grad(ib)).noalias() += as_mat(g).transpose() * as_mat(t.value(ia));
        }
    });
}

template <typename T>
Var<T> add(Var<T> a, Var<T> b) {
    Tape<T>& tape = same_tape(a, b);
    const Tensor<T>& av = a.value();
    const Tensor<T>& bv = b.value();
    if (av.shape() != bv.shape()) {
        shape_error("add", av.shape(), bv.shape());
    }
    Tensor<T> out = av;
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] += bv[i];
    }
    const int ia = a.id;
    const int ib = b.id;
    return tape.record(std::move(out), {ia, ib}, [ia, ib](Tape<T>& t, int self) {
        const Tensor<T>& g = t.grad(self);
        for (int in : {ia, ib}) {
            if (t.requires_grad(in)) {
                Tensor<T>& gi = t.grad(in);
                for (std::size_t i = 0; i < g.size(); ++i) {
                    gi[i] += g[i];
                }
            }
        }
    });
}

template <typename T>
Var<T> add_row(Var<T> x, Var<T> row) {
    Tape<T>& tape = same_tape(x, row);
    const Tensor<T>& xv = x.value();
    const Tensor<T>& rv = row.value();
    if (rv.size() != xv.cols()) {
        shape_error("add_row", xv.shape(), rv.shape());
    }
    Tensor<T> out = xv;
    const std::size_t n = xv.rows();
    const std::size_t m = xv.cols();
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < m; ++c) {
            out[r * m + c] += rv[c];
        }
    }
    const int ix = x.id;
    const int ir = row.id;
    return tape.record(std::move(out), {ix, ir}, [ix, ir, n, m](Tape<T>& t, int self) {
        const Tensor<T>& g = t.grad(self);
        if (t.requires_grad(ix)) {
            Tensor<T>& gx = t.grad(ix);
            for (std::size_t i = 0; i < g.size(); ++i) {
                gx[i] += g[i];
            }
        }
        if (t.requires_grad(ir)) {
            Tensor<T>& gr = t.grad(ir);
            for (std::size_t r = 0; r < n; ++r) {
                for (std::size_t c = 0; c < m; ++c) {
                    gr[c] += g[r * m + c];
                }
            }
        }
    });
}

template <typename T>
Var<T> scale(Var<T> x, T factor) {
    Tensor<T> out = x.value();
    for (T& v : out.values()) {
        v *= factor;
    }
    const int ix = x.id;
    return x.tape->record(std::move(out), {ix}, [ix, factor](Tape<T>& t, int self) {
        const Tensor<T>& g = t.grad(self);
        Tensor<T>& gx = t.grad(ix);
        for (std::size_t i = 0; i < g.size(); ++i) {
            gx[i] += factor * g[i];
        }
    });
}

template <typename T>
Var<T> layernorm(Var<T> x, Var<T> gain, Var<T> bias, T eps) {
    Tape<T>& tape = same_tape(x, gain);
    same_tape(x, bias);
    const Tensor<T>& xv = x.value();
    const std::size_t n = xv.rows();
    const std::size_t m = xv.cols();
    if (gain.value().size() != m || bias.value().size() != m) {
        shape_error("layernorm", xv.shape(), gain.value().shape());
    }
    const Tensor<T>& gv = gain.value();
    const Tensor<T>& bv = bias.value();
    Tensor<T> out = Tensor<T>::matrix(n, m);
    // normalized values and inverse std are kept for the backward pass
    std::vector<T> xhat(n * m);
    std::vector<T> rstd(n);
    for (std::size_t r = 0; r < n; ++r) {
        const T* row = xv.data() + r * m;
        T mean = 0;
        for (std::size_t c = 0; c < m; ++c) {
            mean += row[c];
        }
        mean /= static_cast<T>(m);
        T var = 0;
        for (std::size_t c = 0; c < m; ++c) {
            const T d = row[c] - mean;
            var += d * d;
        }
        var /= static_cast<T>(m);
        const T rs = T{1} / std::sqrt(var + eps);
        rstd[r] = rs;
        for (std::size_t c = 0; c < m; ++c) {
            const T h = (row[c] - mean) * rs;
            xhat[r * m + c] = h;
            out[r * m + c] = h * gv[c] + bv[c];
        }
    }
    const int ix = x.id;
    const int ig = gain.id;
    const int ib = bias.id;
    return tape.record(std::move(out), {ix, ig, ib},
                       [ix, ig, ib, n, m, xhat = std::move(xhat), rstd = std::move(rstd)](Tape<T>& t, int self) {
                           const Tensor<T>& g = t.grad(self);
                           const Tensor<T>& gv = t.value(ig);
                           if (t.requires_grad(ig) || t.requires_grad(ib)) {
                               Tensor<T>& gg = t.grad(ig);
                               Tensor<T>& gb = t.grad(ib);
                               for (std::size_t r = 0; r < n; ++r) {
                                   for (std::size_t c = 0; c < m; ++c) {
                                       gg[c] += g[r * m + c] * xhat[r * m + c];
                                       gb[c] += g[r * m + c];
                                   }
                               }
                           }
                           if (!t.requires_grad(ix)) {
                               return;
                           }
                           Tensor<T>& gx = t.grad(ix);
                           const T inv_m = T{1} / static_cast<T>(m);
                           for (std::size_t r = 0; r < n; ++r) {
                               T sum_dh = 0;
                               T sum_dh_h = 0;
                               for (std::size_t c = 0; c < m; ++c) {
                                   const T dh = g[r * m + c] * gv[c];
                                   sum_dh += dh;
                                   sum_dh_h += dh * xhat[r * m + c];
                               }
                               for (std::size_t c = 0; c < m; ++c) {
                                   const T dh = g[r * m + c] * gv[c];
                                   gx[r * m + c] +=
                                       rstd[r] * (dh - inv_m * sum_dh - xhat[r * m + c] * inv_m * sum_dh_h);
                               }
                           }
                       });
}

namespace {

// Softmax over the first `width(r)` entries of each row; the rest are zero.
template <typename T, typename Width>
Var<T> softmax_prefix(Var<T> x, Width width) {
    const Tensor<T>& xv = x.value();
    const std::size_t n = xv.rows();
    const std::size_t m = xv.cols();
    Tensor<T> out = Tensor<T>::matrix(n, m);
    for (std::size_t r = 0; r < n; ++r) {
        const auto w = static_cast<Eigen::Index>(width(r));
        if (w == 0) {
            continue;
        }
        Eigen::Map<const Eigen::Array<T, Eigen::Dynamic, 1>> in(xv.data() + r * m, w);
        Eigen::Map<Eigen::Array<T, Eigen::Dynamic, 1>> y(out.data() + r * m, w);
        const T mx = in.maxCoeff();
        if (mx == -std::numeric_limits<T>::infinity()) {
            continue;
        }
        y = (in - mx).exp();
        y /= y.sum();
    }
    const int ix = x.id;
    return x.tape->record(std::move(out), {ix}, [ix, n, m, width](Tape<T>& t, int self) {
        const Tensor<T>& g = t.grad(self);
        const Tensor<T>& y = t.value(self);
        Tensor<T>& gx = t.grad(ix);
        for (std::size_t r = 0; r < n; ++r) {
            const std::size_t w = width(r);
            T dot = 0;
            for (std::size_t c = 0; c < w; ++c) {
                dot += g[r * m + c] * y[r * m + c];
            }
            for (std::size_t c = 0; c < w; ++c) {
                gx[r * m + c] += y[r * m + c] * (g[r * m + c] - dot);
            }
        }
    });
}

}  // namespace

template <typename T>
Var<T> softmax_rows(Var<T> x) {
    const std::size_t m = x.value().cols();
    return softmax_prefix(x, [m](std::size_t) { return m; });
}

template <typename T>
Var<T> causal_softmax_rows(Var<T> x) {
    const std::size_t m = x.value().cols();
    return softmax_prefix(x, [m](std::size_t r) { return std::min(r + 1, m); });
}

template <typename T>
Var<T> gelu(Var<T> x) {
    static constexpr T k0 = static_cast<T>(0.7978845608028654);  // sqrt(2/pi)
    static constexpr T k1 = static_cast<T>(0.044715);
    const Tensor<T>& xv = x.value();
    using Arr = Eigen::Array<T, Eigen::Dynamic, 1>;
    const auto n = static_cast<Eigen::Index>(xv.size());
    Eigen::Map<const Arr> v(xv.data(), n);
    // tanh term is kept for the backward pass
    Arr th = (k0 * (v + k1 * v.cube())).tanh();
    Tensor<T> out(xv.shape());
    Eigen::Map<Arr>(out.data(), n) = T{0.5} * v * (T{1} + th);
    const int ix = x.id;
    return x.tape->record(std::move(out), {ix}, [ix, n, th = std::move(th)](Tape<T>& t, int self) {
        const Tensor<T>& g = t.grad(self);
        Eigen::Map<const Arr> v(t.value(ix).data(), n);
        Eigen::Map<const Arr> gy(g.data(), n);
        Eigen::Map<Arr> gx(t.grad(ix).data(), n);
        const Arr du = k0 * (T{1} + T{3} * k1 * v.square());
        gx += gy * (T{0.5} * (T{1} + th) + T{0.5} * v * (T{1} - th.square()) * du);
    });
}

template <typename T>
Var<T> gather_rows(Var<T> table, std::span<const int> rows) {
    const Tensor<T>& tv = table.value();
    const std::size_t m = tv.cols();
    const std::size_t nrows = tv.rows();
    if (rows.empty()) {
        throw Error(Errc::shape_mismatch, "gather_rows needs at least one index");
    }
    Tensor<T> out = Tensor<T>::matrix(rows.size(), m);
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r] < 0 || static_cast<std::size_t>(rows[r]) >= nrows) {
            throw Error(Errc::shape_mismatch, "gather index out of range");
        }
        std::copy_n(tv.data() + static_cast<std::size_t>(rows[r]) * m, m, out.data() + r * m);
    }
    const int it = table.id;
    std::vector<int> idx(rows.begin(), rows.end());
    return table.tape->record(std::move(out), {it}, [it, m, idx = std::move(idx)](Tape<T>& t, int self) {
        const Tensor<T>& g = t.grad(self);
        Tensor<T>& gt = t.grad(it);
        for (std::size_t r = 0; r < idx.size(); ++r) {
            T* dst = gt.data() + static_cast<std::size_t>(idx[r]) * m;
            const T* src = g.data() + r * m;
            for (std::size_t c = 0; c < m; ++c) {
                dst[c] += src[c];
            }
        }
    });
}

template <typename T>
Var<T> embed(Var<T> table, std::span<const int> ids) {
    return gather_rows(table, ids);
}

template <typename T>
Var<T> slice_cols(Var<T> x, std::size_t begin, std::size_t count) {
    const Tensor<T>& xv = x.value();
    const std::size_t n = xv.rows();
    const std::size_t m = xv.cols();
    if (count == 0 || begin + count > m) {
        throw Error(Errc::shape_mismatch, "slice_cols out of range");
    }
    Tensor<T> out = Tensor<T>::matrix(n, count);
    for (std::size_t r = 0; r < n; ++r) {
        std::copy_n(xv.data() + r * m + begin, count, out.data() + r * count);
    }
    const int ix = x.id;
    return x.tape->record(std::move(out), {ix}, [ix, n, m, begin, count](Tape<T>& t, int self) {
        const Tensor<T>& g = t.grad(self);
        Tensor<T>& gx = t.grad(ix);
        for (std::size_t r = 0; r < n; ++r) {
            for (std::size_t c = 0; c < count; ++c) {
                gx[r * m + begin + c] += g[r * count + c];
            }
        }
    });
}

template <typename T>
Var<T> concat_cols(std::span<const Var<T>> parts) {
    if (parts.empty()) {
        throw Error(Errc::shape_mismatch, "concat_cols needs at least one input");
    }
    Tape<T>& tape = *parts[0].tape;
    const std::size_t n = parts[0].value().rows();
    std::size_t total = 0;
    std::vector<int> ids;
    std::vector<std::size_t> widths;
    for (const Var<T>& p : parts) {
        same_tape(parts[0], p);
        if (p.value().rows() != n) {
            shape_error("concat_cols", parts[0].value().shape(), p.value().shape());
        }
        ids.push_back(p.id);
        widths.push_back(p.value().cols());
        total += p.value().cols();
    }
    Tensor<T> out = Tensor<T>::matrix(n, total);
    std::size_t off = 0;
    for (const Var<T>& p : parts) {
        const Tensor<T>& pv = p.value();
        const std::size_t w = pv.cols();
        for (std::size_t r = 0; r < n; ++r) {
            std::copy_n(pv.data() + r * w, w, out.data() + r * total + off);
        }
        off += w;
    }
    std::vector<int> inputs = ids;
    return tape.record(std::move(out), std::move(inputs),
                       [ids, widths, n, total](Tape<T>& t, int self) {
                           const Tensor<T>& g = t.grad(self);
                           std::size_t off = 0;
                           for (std::size_t k = 0; k < ids.size(); ++k) {
                               const std::size_t w = widths[k];
                               if (t.requires_grad(ids[k])) {
                                   Tensor<T>& gk = t.grad(ids[k]);
                                   for (std::size_t r = 0; r < n; ++r) {
                                       for (std::size_t c = 0; c < w; ++c) {
                                           gk[r * w + c] += g[r * total + off + c];
                                       }
                                   }
                               }
                               off += w;
                           }
                       });
}

template <typename T>
Var<T> mask_fill(Var<T> x, std::span<const unsigned char> mask, T fill) {
    const Tensor<T>& xv = x.value();
    if (mask.size() != xv.size()) {
        throw Error(Errc::shape_mismatch, "mask size differs from tensor size");
    }
    Tensor<T> out = xv;
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (mask[i] != 0) {
            out[i] = fill;
        }
    }
    const int ix = x.id;
    std::vector<unsigned char> masked(mask.begin(), mask.end());
    return x.tape->record(std::move(out), {ix}, [ix, masked = std::move(masked)](Tape<T>& t, int self) {
        const Tensor<T>& g = t.grad(self);
        Tensor<T>& gx = t.grad(ix);
        for (std::size_t i = 0; i < g.size(); ++i) {
            if (masked[i] == 0) {
                gx[i] += g[i];
            }
        }
    });
}

template <typename T>
Var<T> causal_mask(Var<T> x) {
    const std::size_t n = x.value().rows();
    const std::size_t m = x.value().cols();
    std::vector<unsigned char> mask(n * m, 0);
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = r + 1; c < m; ++c) {
            mask[r * m + c] = 1;
        }
    }
    return mask_fill(x, std::span<const unsigned char>(mask), -std::numeric_limits<T>::infinity());
}

template <typename T>
Var<T> sum(Var<T> x) {
    const Tensor<T>& xv = x.value();
    T total = std::accumulate(xv.storage().begin(), xv.storage().end(), T{0});
    const int ix = x.id;
    return x.tape->record(Tensor<T>({1}, std::vector<T>{total}), {ix}, [ix](Tape<T>& t, int self) {
        const T g = t.grad(self)[0];
        for (T& v : t.grad(ix).values()) {
            v += g;
        }
    });
}

template <typename T>
Var<T> cross_entropy_rows(Var<T> logits, int label, T weight) {
    const Tensor<T>& lv = logits.value();
    const std::size_t n = lv.rows();
    const std::size_t m = lv.cols();
    if (label < 0 || static_cast<std::size_t>(label) >= m) {
        throw Error(Errc::invalid_action, "label out of range");
    }
    std::vector<T> probs(n * m);
    T total = 0;
    for (std::size_t r = 0; r < n; ++r) {
        const T* row = lv.data() + r * m;
        T mx = row[0];
        for (std::size_t c = 1; c < m; ++c) {
            mx = std::max(mx, row[c]);
        }
        T z = 0;
        for (std::size_t c = 0; c < m; ++c) {
            z += std::exp(row[c] - mx);
        }
        const T logz = mx + std::log(z);
        total += logz - row[label];
        for (std::size_t c = 0; c < m; ++c) {
            probs[r * m + c] = std::exp(row[c] - logz);
        }
    }
    const T loss = weight * total / static_cast<T>(n);
    const int il = logits.id;
    return logits.tape->record(Tensor<T>({1}, std::vector<T>{loss}), {il},
                               [il, n, m, label, weight, probs = std::move(probs)](Tape<T>& t, int self) {
                                   const T g = t.grad(self)[0] * weight / static_cast<T>(n);
                                   Tensor<T>& gl = t.grad(il);
                                   for (std::size_t r = 0; r < n; ++r) {
                                       for (std::size_t c = 0; c < m; ++c) {
                                           const T onehot = c == static_cast<std::size_t>(label) ? T{1} : T{0};
                                           gl[r * m + c] += g * (probs[r * m + c] - onehot);
                                       }
                                   }
                               });
}

#define SAD_INSTANTIATE_AD(T)                                                              \
    template class Tensor<T>;                                                              \
    template struct Var<T>;                                                                \
    template class Tape<T>;                                                                \
    template Var<T> matmul(Var<T>, Var<T>);                                                \
    template Var<T> matmul_nt(Var<T>, Var<T>);                                             \
    template Var<T> add(Var<T>, Var<T>);                                                   \
    template Var<T> add_row(Var<T>, Var<T>);                                               \
    template Var<T> scale(Var<T>, T);                                                      \
    template Var<T> layernorm(Var<T>, Var<T>, Var<T>, T);                                  \
    template Var<T> softmax_rows(Var<T>);                                                  \
    template Var<T> causal_softmax_rows(Var<T>);                                           \
    template Var<T> gelu(Var<T>);                                                          \
    template Var<T> gather_rows(Var<T>, std::span<const int>);                             \
    template Var<T> embed(Var<T>, std::span<const int>);                                   \
    template Var<T> slice_cols(Var<T>, std::size_t, std::size_t);                          \
    template Var<T> concat_cols(std::span<const Var<T>>);                                  \
    template Var<T> mask_fill(Var<T>, std::span<const unsigned char>, T);                  \
    template Var<T> causal_mask(Var<T>);                                                   \
    template Var<T> sum(Var<T>);                                                           \
    template Var<T> cross_entropy_rows(Var<T>, int, T);

SAD_INSTANTIATE_AD(float)
SAD_INSTANTIATE_AD(double)

#undef SAD_INSTANTIATE_AD

}  // namespace sad::ad
