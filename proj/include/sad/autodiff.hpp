#pragma once

// Minimal reverse-mode differentiation over dense row-major tensors.
//
// A Tape records primitives in execution order; backward() walks the record
// in reverse. Element width is a template parameter: double is the reference
// path used by gradient checks, float the training path. Both instantiate the
// same code.

#include <cstddef>
#include <functional>
#include <new>
#include <span>
#include <vector>

namespace sad::ad {

// Vectorized kernels peel unaligned leading elements, so the summation order
// depends on the buffer address. A fixed alignment keeps results bitwise
// reproducible across allocations.
template <typename T>
struct AlignedAllocator {
    using value_type = T;
    static constexpr std::align_val_t kAlign{64};

    AlignedAllocator() = default;
    template <typename U>
    AlignedAllocator(const AlignedAllocator<U>&) noexcept {}

    T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlign)); }
    void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, kAlign); }

    template <typename U>
    bool operator==(const AlignedAllocator<U>&) const noexcept {
        return true;
    }
};

template <typename T>
using Storage = std::vector<T, AlignedAllocator<T>>;

template <typename T>
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> shape, T fill = T{0});
    Tensor(std::vector<std::size_t> shape, std::vector<T> data);

    static Tensor matrix(std::size_t rows, std::size_t cols, T fill = T{0}) {
        return Tensor({rows, cols}, fill);
    }

    const std::vector<std::size_t>& shape() const noexcept { return shape_; }
    std::size_t size() const noexcept { return data_.size(); }
    std::size_t rank() const noexcept { return shape_.size(); }
    // Rank-1 tensors are viewed as a single row.
    std::size_t rows() const noexcept { return shape_.size() >= 2 ? shape_[0] : 1; }
    std::size_t cols() const noexcept { return shape_.empty() ? 0 : shape_.back(); }

    T* data() noexcept { return data_.data(); }
    const T* data() const noexcept { return data_.data(); }
    std::span<T> values() noexcept { return data_; }
    std::span<const T> values() const noexcept { return data_; }
    Storage<T>& storage() noexcept { return data_; }
    const Storage<T>& storage() const noexcept { return data_; }

    T& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols() + c]; }
    T operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols() + c]; }
    T& operator[](std::size_t i) noexcept { return data_[i]; }
    T operator[](std::size_t i) const noexcept { return data_[i]; }

    void fill(T v);
    bool all_finite() const noexcept;

    template <typename U>
    Tensor<U> cast() const {
        std::vector<U> out(data_.begin(), data_.end());
        return Tensor<U>(shape_, std::move(out));
    }

private:
    std::vector<std::size_t> shape_;
    Storage<T> data_;
};

template <typename T>
class Tape;

/// Handle to a node recorded on a Tape.
template <typename T>
struct Var {
    Tape<T>* tape = nullptr;
    int id = -1;

    const Tensor<T>& value() const;
};

template <typename T>
class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var<T> leaf(Tensor<T> value, bool requires_grad);
    /// Leaf that reads `value` in place; it must outlive the tape.
    Var<T> leaf_ref(const Tensor<T>& value, bool requires_grad);

    const Tensor<T>& value(int id) const {
        const Node& n = nodes_[static_cast<std::size_t>(id)];
        return n.external != nullptr ? *n.external : n.value;
    }
    /// Gradient buffer of a node, zero-allocated on first access.
    Tensor<T>& grad(int id);
    bool requires_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].requires_grad; }
    std::size_t size() const noexcept { return nodes_.size(); }

    /// When disabled, ops compute values only and record no backward closures.
    void set_grad_enabled(bool enabled) noexcept { grad_enabled_ = enabled; }
    bool grad_enabled() const noexcept { return grad_enabled_; }

    /// Seeds d(loss)/d(loss) = 1 and propagates in reverse recording order.
    void backward(Var<T> loss);

    // Used by primitives.
    Var<T> record(Tensor<T> value, std::vector<int> inputs, std::function<void(Tape&, int)> back);

private:
    struct Node {
        Tensor<T> value;
        const Tensor<T>* external = nullptr;
        Tensor<T> grad;
        std::vector<int> inputs;
        std::function<void(Tape&, int)> back;
        bool requires_grad = false;
    };
    std::vector<Node> nodes_;
    bool grad_enabled_ = true;
};

// Primitives. All matrix ops take rank-2 (or rank-1 as one row) inputs and
// throw Error(shape_mismatch) on incompatible shapes.

/// a[n,k] * b[k,m]
template <typename T> Var<T> matmul(Var<T> a, Var<T> b);
/// a[n,k] * b[m,k]^T
template <typename T> Var<T> matmul_nt(Var<T> a, Var<T> b);
template <typename T> Var<T> add(Var<T> a, Var<T> b);
/// Adds a length-cols row vector to every row of x.
template <typename T> Var<T> add_row(Var<T> x, Var<T> row);
template <typename T> Var<T> scale(Var<T> x, T factor);
/// Row-wise normalization followed by elementwise gain and bias.
template <typename T> Var<T> layernorm(Var<T> x, Var<T> gain, Var<T> bias, T eps);
template <typename T> Var<T> softmax_rows(Var<T> x);
/// softmax_rows(causal_mask(x)) without materializing the mask.
template <typename T> Var<T> causal_softmax_rows(Var<T> x);
/// GELU, tanh approximation.
template <typename T> Var<T> gelu(Var<T> x);
/// Selects rows of table by index.
template <typename T> Var<T> gather_rows(Var<T> table, std::span<const int> rows);
/// Alias of gather_rows for embedding lookups.
template <typename T> Var<T> embed(Var<T> table, std::span<const int> ids);
template <typename T> Var<T> slice_cols(Var<T> x, std::size_t begin, std::size_t count);
template <typename T> Var<T> concat_cols(std::span<const Var<T>> parts);
/// Replaces entries where mask != 0 with fill; gradient is zero there.
template <typename T> Var<T> mask_fill(Var<T> x, std::span<const unsigned char> mask, T fill);
/// mask_fill with the strictly-upper triangle set to -inf.
template <typename T> Var<T> causal_mask(Var<T> x);
template <typename T> Var<T> sum(Var<T> x);
/// weight * mean over rows of -log softmax(row)[label].
template <typename T> Var<T> cross_entropy_rows(Var<T> logits, int label, T weight);

}  // namespace sad::ad
