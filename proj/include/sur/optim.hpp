#pragma once

#include <memory>
#include <string>
#include <vector>

#include "sur/tensor.hpp"

namespace sur {

// Updates parameters in place from their accumulated gradients. Parameters
// without a gradient are left untouched.
class Optimizer {
public:
    virtual ~Optimizer() = default;
    virtual void step(std::vector<Tensor>& params) = 0;
};

class Sgd final : public Optimizer {
public:
    explicit Sgd(double learning_rate) : lr_(learning_rate) {}
    void step(std::vector<Tensor>& params) override;

private:
    double lr_;
};

class Adam final : public Optimizer {
public:
    explicit Adam(double learning_rate, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(eps) {}
    void step(std::vector<Tensor>& params) override;

private:
    double lr_, beta1_, beta2_, eps_;
    long step_count_ = 0;
    std::vector<std::vector<double>> m_, v_;
};

// "sgd" or "adam".
std::unique_ptr<Optimizer> make_optimizer(const std::string& name, double learning_rate);

double grad_norm(const std::vector<Tensor>& params);

}  // namespace sur
