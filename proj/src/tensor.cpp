#include "sur/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <sstream>
#include <utility>

#include "sur/error.hpp"

namespace sur {

struct Tensor::Impl {
    Shape shape;
    std::vector<double> data;
    bool requires_grad = false;
    std::optional<std::vector<double>> grad;
};

std::string shape_string(const Shape& shape) {
    std::ostringstream out;
    out << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) out << 'x';
        out << shape[i];
    }
    out << ']';
    return out.str();
}

std::size_t shape_numel(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

Tensor::Tensor() : Tensor(Shape{}, std::vector<double>{0.0}) {}

Tensor::Tensor(Shape shape, std::vector<double> data, bool requires_grad)
    : impl_(std::make_shared<Impl>()) {
    for (std::size_t d : shape) {
        if (d == 0) fail(ErrorKind::Dimension, "tensor dimensions must be positive, got " + shape_string(shape));
    }
    if (shape_numel(shape) != data.size()) {
        fail(ErrorKind::Dimension, "shape " + shape_string(shape) + " needs " +
                                       std::to_string(shape_numel(shape)) + " elements, got " +
                                       std::to_string(data.size()));
    }
    impl_->shape = std::move(shape);
    impl_->data = std::move(data);
    impl_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    const std::size_t n = shape_numel(shape);
    return Tensor(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
    return Tensor(Shape{}, std::vector<double>{value}, requires_grad);
}

Tensor Tensor::vector(std::vector<double> values, bool requires_grad) {
    const std::size_t n = values.size();
    return Tensor(Shape{n}, std::move(values), requires_grad);
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> values, bool requires_grad) {
    return Tensor(Shape{rows, cols}, std::move(values), requires_grad);
}

const Shape& Tensor::shape() const { return impl_->shape; }
std::size_t Tensor::numel() const { return impl_->data.size(); }
std::span<const double> Tensor::data() const { return impl_->data; }
std::span<double> Tensor::mutable_data() { return impl_->data; }

double Tensor::item() const {
    if (numel() != 1) fail(ErrorKind::Contract, "item() on tensor of shape " + shape_string(shape()));
    return impl_->data[0];
}

double Tensor::at(std::size_t row, std::size_t col) const {
    return impl_->data.at(row * impl_->shape.at(1) + col);
}

bool Tensor::requires_grad() const { return impl_->requires_grad; }
void Tensor::set_requires_grad(bool on) { impl_->requires_grad = on; }
bool Tensor::has_grad() const { return impl_->grad.has_value(); }

std::span<const double> Tensor::grad() const {
    if (!impl_->grad) fail(ErrorKind::Tape, "tensor has no gradient");
    return *impl_->grad;
}

void Tensor::zero_grad() {
    if (impl_->grad) std::fill(impl_->grad->begin(), impl_->grad->end(), 0.0);
}

void Tensor::clear_grad() { impl_->grad.reset(); }

Tensor Tensor::detach() const { return Tensor(impl_->shape, impl_->data, false); }

Tensor Tensor::clone() const { return Tensor(impl_->shape, impl_->data, impl_->requires_grad); }

std::span<double> grad_buffer(const Tensor& t) {
    auto& g = t.impl_->grad;
    if (!g) g.emplace(t.impl_->data.size(), 0.0);
    return *g;
}

// ---- tape -----------------------------------------------------------------

void Tape::record(const Tensor& output, BackwardFn backward) {
    if (consumed_) fail(ErrorKind::Tape, "cannot record on a tape after backward; reset it first");
    nodes_.push_back(Node{output, std::move(backward)});
}

bool Tape::contains(const Tensor& t) const {
    return std::any_of(nodes_.rbegin(), nodes_.rend(),
                       [&](const Node& n) { return n.output.same_storage(t); });
}

void Tape::backward(const Tensor& loss) {
    if (loss.numel() != 1) fail(ErrorKind::Contract, "backward needs a scalar loss, got " + shape_string(loss.shape()));
    if (consumed_) fail(ErrorKind::Tape, "backward already ran on this tape");
    if (!contains(loss)) fail(ErrorKind::Tape, "loss was not produced on this tape");
    grad_buffer(loss)[0] = 1.0;
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
        if (!it->output.has_grad()) continue;  // not reachable from loss
        it->backward(it->output.grad());
    }
    consumed_ = true;
}

void Tape::reset() {
    nodes_.clear();
    consumed_ = false;
}

void backward(const Tensor& loss, Tape& tape) { tape.backward(loss); }

// ---- ops ------------------------------------------------------------------

namespace {

bool tracking(Tape* tape, std::initializer_list<const Tensor*> inputs) {
    if (!tape) return false;
    return std::any_of(inputs.begin(), inputs.end(), [](const Tensor* t) { return t->requires_grad(); });
}

void require_rank(const Tensor& t, std::size_t rank, const char* op) {
    if (t.rank() != rank) {
        fail(ErrorKind::Dimension, std::string(op) + " expects rank " + std::to_string(rank) + ", got " +
                                       shape_string(t.shape()));
    }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape()) {
        fail(ErrorKind::Dimension,
             std::string(op) + " shape mismatch: " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
    }
}

void require_finite(const Tensor& t, const char* op) {
    for (double v : t.data()) {
        if (!std::isfinite(v)) fail(ErrorKind::Numeric, std::string(op) + " received a non-finite value");
    }
}

// c[m x n] += a[m x k] * b[k x n]
void gemm_acc(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
            const double av = a[i * k + p];
            if (av == 0.0) continue;
            const double* brow = b + p * n;
            double* crow = c + i * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

// Stable softmax of `logits / tau` into out, returns log-sum-exp of the scaled logits.
double softmax_into(std::span<const double> logits, double tau, std::vector<double>& out) {
    out.resize(logits.size());
    double mx = -INFINITY;
    for (double v : logits) mx = std::max(mx, v / tau);
    double total = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] / tau - mx);
        total += out[i];
    }
    for (double& v : out) v /= total;
    return mx + std::log(total);
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b, Tape* tape) {
    require_rank(a, 2, "matmul");
    require_rank(b, 2, "matmul");
    const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    if (b.dim(0) != k) {
        fail(ErrorKind::Dimension,
             "matmul inner dimensions disagree: " + shape_string(a.shape()) + " x " + shape_string(b.shape()));
    }
    std::vector<double> out(m * n, 0.0);
    gemm_acc(a.data().data(), b.data().data(), out.data(), m, k, n);
    const bool track = tracking(tape, {&a, &b});
    Tensor result(Shape{m, n}, std::move(out), track);
    if (track) {
        tape->record(result, [a, b, m, k, n](std::span<const double> g) {
            if (a.requires_grad()) {
                auto ga = grad_buffer(a);
                const auto bd = b.data();
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t p = 0; p < k; ++p) {
                        double acc = 0.0;
                        for (std::size_t j = 0; j < n; ++j) acc += g[i * n + j] * bd[p * n + j];
                        ga[i * k + p] += acc;
                    }
            }
            if (b.requires_grad()) {
                auto gb = grad_buffer(b);
                const auto ad = a.data();
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t p = 0; p < k; ++p) {
                        const double av = ad[i * k + p];
                        for (std::size_t j = 0; j < n; ++j) gb[p * n + j] += av * g[i * n + j];
                    }
            }
        });
    }
    return result;
}

Tensor transpose(const Tensor& a, Tape* tape) {
    require_rank(a, 2, "transpose");
    const std::size_t m = a.dim(0), n = a.dim(1);
    std::vector<double> out(m * n);
    const auto ad = a.data();
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out[j * m + i] = ad[i * n + j];
    const bool track = tracking(tape, {&a});
    Tensor result(Shape{n, m}, std::move(out), track);
    if (track) {
        tape->record(result, [a, m, n](std::span<const double> g) {
            auto ga = grad_buffer(a);
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += g[j * m + i];
        });
    }
    return result;
}

namespace {

Tensor add_scaled(const Tensor& a, const Tensor& b, double sign, Tape* tape, const char* op) {
    require_same_shape(a, b, op);
    std::vector<double> out(a.numel());
    const auto ad = a.data(), bd = b.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = ad[i] + sign * bd[i];
    const bool track = tracking(tape, {&a, &b});
    Tensor result(a.shape(), std::move(out), track);
    if (track) {
        tape->record(result, [a, b, sign](std::span<const double> g) {
            if (a.requires_grad()) {
                auto ga = grad_buffer(a);
                for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
            }
            if (b.requires_grad()) {
                auto gb = grad_buffer(b);
                for (std::size_t i = 0; i < g.size(); ++i) gb[i] += sign * g[i];
            }
        });
    }
    return result;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b, Tape* tape) { return add_scaled(a, b, 1.0, tape, "add"); }
Tensor sub(const Tensor& a, const Tensor& b, Tape* tape) { return add_scaled(a, b, -1.0, tape, "sub"); }

Tensor scale(const Tensor& a, double factor, Tape* tape) {
    std::vector<double> out(a.numel());
    const auto ad = a.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = factor * ad[i];
    const bool track = tracking(tape, {&a});
    Tensor result(a.shape(), std::move(out), track);
    if (track) {
        tape->record(result, [a, factor](std::span<const double> g) {
            auto ga = grad_buffer(a);
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += factor * g[i];
        });
    }
    return result;
}

Tensor add_row(const Tensor& a, const Tensor& bias, Tape* tape) {
    require_rank(a, 2, "add_row");
    require_rank(bias, 1, "add_row");
    const std::size_t m = a.dim(0), n = a.dim(1);
    if (bias.dim(0) != n) {
        fail(ErrorKind::Dimension,
             "add_row bias " + shape_string(bias.shape()) + " does not match " + shape_string(a.shape()));
    }
    std::vector<double> out(a.data().begin(), a.data().end());
    const auto bd = bias.data();
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out[i * n + j] += bd[j];
    const bool track = tracking(tape, {&a, &bias});
    Tensor result(a.shape(), std::move(out), track);
    if (track) {
        tape->record(result, [a, bias, m, n](std::span<const double> g) {
            if (a.requires_grad()) {
                auto ga = grad_buffer(a);
                for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
            }
            if (bias.requires_grad()) {
                auto gb = grad_buffer(bias);
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t j = 0; j < n; ++j) gb[j] += g[i * n + j];
            }
        });
    }
    return result;
}

Tensor tanh(const Tensor& a, Tape* tape) {
    std::vector<double> out(a.numel());
    const auto ad = a.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(ad[i]);
    const bool track = tracking(tape, {&a});
    Tensor result(a.shape(), std::move(out), track);
    if (track) {
        tape->record(result, [a, result_data = result.data()](std::span<const double> g) {
            auto ga = grad_buffer(a);
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * (1.0 - result_data[i] * result_data[i]);
        });
    }
    return result;
}

Tensor row_softmax(const Tensor& x, Tape* tape) {
    require_rank(x, 2, "row_softmax");
    require_finite(x, "row_softmax");
    const std::size_t m = x.dim(0), n = x.dim(1);
    std::vector<double> out(m * n);
    std::vector<double> row;
    const auto xd = x.data();
    for (std::size_t i = 0; i < m; ++i) {
        softmax_into(xd.subspan(i * n, n), 1.0, row);
        std::copy(row.begin(), row.end(), out.begin() + static_cast<std::ptrdiff_t>(i * n));
    }
    const bool track = tracking(tape, {&x});
    Tensor result(x.shape(), std::move(out), track);
    if (track) {
        tape->record(result, [x, y = result.data(), m, n](std::span<const double> g) {
            auto gx = grad_buffer(x);
            for (std::size_t i = 0; i < m; ++i) {
                double dot = 0.0;
                for (std::size_t j = 0; j < n; ++j) dot += g[i * n + j] * y[i * n + j];
                for (std::size_t j = 0; j < n; ++j) gx[i * n + j] += y[i * n + j] * (g[i * n + j] - dot);
            }
        });
    }
    return result;
}

Tensor kl_div(const Tensor& p_logits, const Tensor& q_logits, double tau, Tape* tape) {
    require_rank(p_logits, 1, "kl_div");
    require_rank(q_logits, 1, "kl_div");
    if (p_logits.dim(0) != q_logits.dim(0)) {
        fail(ErrorKind::Dimension, "kl_div length mismatch: " + shape_string(p_logits.shape()) + " vs " +
                                       shape_string(q_logits.shape()));
    }
    if (!(tau > 0.0) || !std::isfinite(tau)) fail(ErrorKind::Contract, "kl_div temperature must be positive");
    require_finite(p_logits, "kl_div");
    require_finite(q_logits, "kl_div");

    const std::size_t n = p_logits.dim(0);
    std::vector<double> p, q;
    const double lse_p = softmax_into(p_logits.data(), tau, p);
    const double lse_q = softmax_into(q_logits.data(), tau, q);
    // log p_i - log q_i computed from logits to avoid log(0) on underflowed probabilities.
    std::vector<double> log_ratio(n);
    double kl = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        log_ratio[i] = (p_logits[i] / tau - lse_p) - (q_logits[i] / tau - lse_q);
        kl += p[i] * log_ratio[i];
    }
    const bool track = tracking(tape, {&p_logits, &q_logits});
    Tensor result = Tensor::scalar(kl, track);
    if (track) {
        tape->record(result, [p_logits, q_logits, tau, p, q, log_ratio, kl](std::span<const double> g) {
            const double up = g[0] / tau;
            if (p_logits.requires_grad()) {
                auto gp = grad_buffer(p_logits);
                for (std::size_t i = 0; i < p.size(); ++i) gp[i] += up * p[i] * (log_ratio[i] - kl);
            }
            if (q_logits.requires_grad()) {
                auto gq = grad_buffer(q_logits);
                for (std::size_t i = 0; i < q.size(); ++i) gq[i] += up * (q[i] - p[i]);
            }
        });
    }
    return result;
}

Tensor mse(const Tensor& a, const Tensor& b, Tape* tape) {
    require_same_shape(a, b, "mse");
    const auto ad = a.data(), bd = b.data();
    const double count = static_cast<double>(a.numel());
    double acc = 0.0;
    for (std::size_t i = 0; i < ad.size(); ++i) {
        const double d = ad[i] - bd[i];
        acc += d * d;
    }
    const bool track = tracking(tape, {&a, &b});
    Tensor result = Tensor::scalar(acc / count, track);
    if (track) {
        tape->record(result, [a, b, count](std::span<const double> g) {
            const auto ad = a.data(), bd = b.data();
            const double k = 2.0 * g[0] / count;
            if (a.requires_grad()) {
                auto ga = grad_buffer(a);
                for (std::size_t i = 0; i < ad.size(); ++i) ga[i] += k * (ad[i] - bd[i]);
            }
            if (b.requires_grad()) {
                auto gb = grad_buffer(b);
                for (std::size_t i = 0; i < ad.size(); ++i) gb[i] -= k * (ad[i] - bd[i]);
            }
        });
    }
    return result;
}

Tensor mean_rows(const Tensor& x, Tape* tape) {
    require_rank(x, 2, "mean_rows");
    const std::size_t m = x.dim(0), n = x.dim(1);
    std::vector<double> out(n, 0.0);
    const auto xd = x.data();
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out[j] += xd[i * n + j];
    for (double& v : out) v /= static_cast<double>(m);
    const bool track = tracking(tape, {&x});
    Tensor result(Shape{n}, std::move(out), track);
    if (track) {
        tape->record(result, [x, m, n](std::span<const double> g) {
            auto gx = grad_buffer(x);
            const double inv = 1.0 / static_cast<double>(m);
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < n; ++j) gx[i * n + j] += g[j] * inv;
        });
    }
    return result;
}

Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t count, Tape* tape) {
    require_rank(x, 2, "slice_rows");
    const std::size_t m = x.dim(0), n = x.dim(1);
    if (count == 0) fail(ErrorKind::EmptyInput, "slice_rows with zero rows");
    if (begin + count > m) {
        fail(ErrorKind::Range, "slice_rows [" + std::to_string(begin) + ", " + std::to_string(begin + count) +
                                   ") out of " + shape_string(x.shape()));
    }
    const auto xd = x.data();
    std::vector<double> out(xd.begin() + static_cast<std::ptrdiff_t>(begin * n),
                            xd.begin() + static_cast<std::ptrdiff_t>((begin + count) * n));
    const bool track = tracking(tape, {&x});
    Tensor result(Shape{count, n}, std::move(out), track);
    if (track) {
        tape->record(result, [x, begin, n](std::span<const double> g) {
            auto gx = grad_buffer(x);
            for (std::size_t i = 0; i < g.size(); ++i) gx[begin * n + i] += g[i];
        });
    }
    return result;
}

Tensor concat(const std::vector<Tensor>& parts, Tape* tape) {
    if (parts.empty()) fail(ErrorKind::EmptyInput, "concat of no tensors");
    std::vector<double> out;
    bool track = false;
    for (const auto& p : parts) {
        require_rank(p, 1, "concat");
        out.insert(out.end(), p.data().begin(), p.data().end());
        track = track || (tape && p.requires_grad());
    }
    const std::size_t n = out.size();
    Tensor result(Shape{n}, std::move(out), track);
    if (track) {
        tape->record(result, [parts](std::span<const double> g) {
            std::size_t offset = 0;
            for (const auto& p : parts) {
                if (p.requires_grad()) {
                    auto gp = grad_buffer(p);
                    for (std::size_t i = 0; i < gp.size(); ++i) gp[i] += g[offset + i];
                }
                offset += p.numel();
            }
        });
    }
    return result;
}

Tensor reshape(const Tensor& a, Shape shape, Tape* tape) {
    if (shape_numel(shape) != a.numel()) {
        fail(ErrorKind::Dimension, "cannot reshape " + shape_string(a.shape()) + " to " + shape_string(shape));
    }
    const bool track = tracking(tape, {&a});
    Tensor result(std::move(shape), std::vector<double>(a.data().begin(), a.data().end()), track);
    if (track) {
        tape->record(result, [a](std::span<const double> g) {
            auto ga = grad_buffer(a);
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
        });
    }
    return result;
}

Tensor sum(const Tensor& a, Tape* tape) {
    double acc = 0.0;
    for (double v : a.data()) acc += v;
    const bool track = tracking(tape, {&a});
    Tensor result = Tensor::scalar(acc, track);
    if (track) {
        tape->record(result, [a](std::span<const double> g) {
            auto ga = grad_buffer(a);
            for (double& v : ga) v += g[0];
        });
    }
    return result;
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias, Tape* tape) {
    return add_row(matmul(x, weight, tape), bias, tape);
}

}  // namespace sur
