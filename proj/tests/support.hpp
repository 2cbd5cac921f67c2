#pragma once

#include <filesystem>
#include <functional>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "sur/rng.hpp"
#include "sur/tensor.hpp"

namespace sur::test {

namespace fs = std::filesystem;

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    TempDir();
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const fs::path& path() const { return path_; }
    fs::path operator/(const std::string& rel) const { return path_ / rel; }

private:
    fs::path path_;
};

Tensor random_tensor(Shape shape, Rng& rng, double scale = 1.0, bool requires_grad = false);

// Central differences of f with respect to every element of t (perturbed in place).
std::vector<double> numeric_grad(Tensor t, const std::function<double()>& f, double step = 1e-5);

// ||a - b|| / max(||a||, ||b||, floor). The floor keeps gradients that are zero by
// construction from comparing rounding noise against rounding noise.
double relative_error(std::span<const double> a, std::span<const double> b, double floor = 1e-300);

// Runs the CLI, capturing output; returns the exit code.
int run_cli(const std::vector<std::string>& args, std::string* out = nullptr, std::string* err = nullptr);

// Corpus, encoders, cleaning, knowledge cache at `layer` and a pretrained denoiser.
struct Fixture {
    fs::path data, encoders, denoiser;
};
Fixture build_fixture(const fs::path& root, std::size_t records = 64, std::size_t pretrain_steps = 3000,
                      std::size_t layer = 10, const std::string& profile = "13b-toy");

// Relative path -> sha256 for every regular file under dir.
std::map<std::string, std::string> hash_tree(const fs::path& dir);

}  // namespace sur::test

namespace sur::test {

// A differentiable op applied to fixed random inputs, for gradient checking.
struct OpCase {
    std::string name;
    std::vector<Tensor> inputs;
    std::function<Tensor(const std::vector<Tensor>&, Tape*)> forward;
};

std::vector<OpCase> op_cases(std::uint64_t seed);

// Largest per-input relative error between tape gradients and central differences
// of a random linear probe of the op's output.
double op_gradient_error(const OpCase& c, double step = 1e-5);

// Largest per-tensor relative error over all adapter parameters for the weighted
// loss composite on a one-record batch (nonzero g, eta 0.5, unit weights).
struct CompositeCheck {
    double max_error = 0.0;
    std::string worst_tensor;
    std::size_t checked = 0;
};
CompositeCheck composite_gradient_error(std::uint64_t seed, double step = 1e-5);

}  // namespace sur::test

namespace sur::test {

// Welch statistic, Welch-Satterthwaite df and two-sided p computed from the
// textbook formulas in long double, with the Student t tail from Boost.Math.
struct WelchOracle {
    long double t = 0, df = 0, p = 1;
};
WelchOracle welch_oracle(std::span<const double> xs, std::span<const double> ys);

// Regularized incomplete beta from Boost.Math.
double incomplete_beta_oracle(double a, double b, double x);

}  // namespace sur::test
