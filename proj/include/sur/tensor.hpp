#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace sur {

using Shape = std::vector<std::size_t>;

std::string shape_string(const Shape& shape);
std::size_t shape_numel(const Shape& shape);

// Dense row-major tensor of doubles. Copies share storage (handle semantics),
// which is what lets the tape write gradients back into parameters held
// elsewhere. Use clone() for an independent copy.
class Tensor {
public:
    Tensor();
    Tensor(Shape shape, std::vector<double> data, bool requires_grad = false);

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor scalar(double value, bool requires_grad = false);
    static Tensor vector(std::vector<double> values, bool requires_grad = false);
    static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values,
                         bool requires_grad = false);

    const Shape& shape() const;
    std::size_t rank() const { return shape().size(); }
    std::size_t dim(std::size_t axis) const { return shape().at(axis); }
    std::size_t numel() const;

    std::span<const double> data() const;
    // In-place writes are reserved for parameter updates and construction.
    std::span<double> mutable_data();

    double item() const;
    double operator[](std::size_t flat) const { return data()[flat]; }
    double at(std::size_t row, std::size_t col) const;

    bool requires_grad() const;
    void set_requires_grad(bool on);

    bool has_grad() const;
    std::span<const double> grad() const;
    void zero_grad();
    void clear_grad();

    // Fresh storage, no gradient tracking.
    Tensor detach() const;
    Tensor clone() const;

    bool same_storage(const Tensor& other) const { return impl_ == other.impl_; }

private:
    struct Impl;
    std::shared_ptr<Impl> impl_;

    friend class Tape;
    friend std::span<double> grad_buffer(const Tensor& t);
};

// Returns the gradient accumulator for t, allocating zeros on first use.
std::span<double> grad_buffer(const Tensor& t);

// Ordered record of differentiable operations. Ops append a node when given a
// tape and at least one input tracks gradients; backward replays the nodes in
// reverse so each is visited exactly once.
class Tape {
public:
    using BackwardFn = std::function<void(std::span<const double> grad_out)>;

    void record(const Tensor& output, BackwardFn backward);

    std::size_t size() const { return nodes_.size(); }
    bool contains(const Tensor& t) const;
    bool consumed() const { return consumed_; }

    void backward(const Tensor& loss);
    // Drops all nodes and allows the tape to be reused.
    void reset();

private:
    struct Node {
        Tensor output;
        BackwardFn backward;
    };
    std::vector<Node> nodes_;
    bool consumed_ = false;
};

// Free-function form: populates grad on every tracked tensor reachable from loss.
void backward(const Tensor& loss, Tape& tape);

// ---- operations -----------------------------------------------------------
// Every op takes an optional tape; with no tape the result is untracked.

Tensor matmul(const Tensor& a, const Tensor& b, Tape* tape = nullptr);
Tensor transpose(const Tensor& a, Tape* tape = nullptr);
Tensor add(const Tensor& a, const Tensor& b, Tape* tape = nullptr);
Tensor sub(const Tensor& a, const Tensor& b, Tape* tape = nullptr);
Tensor scale(const Tensor& a, double factor, Tape* tape = nullptr);
// a [m x n] plus bias [n] added to every row.
Tensor add_row(const Tensor& a, const Tensor& bias, Tape* tape = nullptr);
Tensor tanh(const Tensor& a, Tape* tape = nullptr);
Tensor row_softmax(const Tensor& x, Tape* tape = nullptr);
// KL(softmax(p/tau) || softmax(q/tau)) for 1-D logit vectors.
Tensor kl_div(const Tensor& p_logits, const Tensor& q_logits, double tau, Tape* tape = nullptr);
Tensor mse(const Tensor& a, const Tensor& b, Tape* tape = nullptr);
Tensor mean_rows(const Tensor& x, Tape* tape = nullptr);
Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t count, Tape* tape = nullptr);
Tensor concat(const std::vector<Tensor>& parts, Tape* tape = nullptr);
Tensor reshape(const Tensor& a, Shape shape, Tape* tape = nullptr);
Tensor sum(const Tensor& a, Tape* tape = nullptr);

// y = x W + b with x [m x in], W [in x out], b [out].
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias, Tape* tape = nullptr);

}  // namespace sur
