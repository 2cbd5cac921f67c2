#include "sur/optim.hpp"

#include <cmath>

#include "sur/error.hpp"

namespace sur {

void Sgd::step(std::vector<Tensor>& params) {
    for (auto& p : params) {
        if (!p.has_grad()) continue;
        auto data = p.mutable_data();
        const auto g = p.grad();
        for (std::size_t i = 0; i < data.size(); ++i) data[i] -= lr_ * g[i];
    }
}

void Adam::step(std::vector<Tensor>& params) {
    if (m_.empty()) {
        for (const auto& p : params) {
            m_.emplace_back(p.numel(), 0.0);
            v_.emplace_back(p.numel(), 0.0);
        }
    }
    if (m_.size() != params.size()) fail(ErrorKind::Contract, "Adam parameter list changed between steps");
    ++step_count_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(step_count_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(step_count_));
    for (std::size_t k = 0; k < params.size(); ++k) {
        auto& p = params[k];
        if (!p.has_grad()) continue;
        auto data = p.mutable_data();
        const auto g = p.grad();
        auto& m = m_[k];
        auto& v = v_[k];
        for (std::size_t i = 0; i < data.size(); ++i) {
            m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
            v[i] = beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i];
            data[i] -= lr_ * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps_);
        }
    }
}

std::unique_ptr<Optimizer> make_optimizer(const std::string& name, double learning_rate) {
    if (name == "sgd") return std::make_unique<Sgd>(learning_rate);
    if (name == "adam") return std::make_unique<Adam>(learning_rate);
    fail(ErrorKind::Config, "unknown optimizer '" + name + "' (expected sgd or adam)");
}

double grad_norm(const std::vector<Tensor>& params) {
    double acc = 0.0;
    for (const auto& p : params) {
        if (!p.has_grad()) continue;
        for (double g : p.grad()) acc += g * g;
    }
    return std::sqrt(acc);
}

}  // namespace sur
