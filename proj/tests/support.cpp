#include "support.hpp"

#include <cmath>
#include <cstdlib>
#include <sstream>
#include <stdexcept>

#include "sur/cli.hpp"
#include "sur/hash.hpp"

namespace sur::test {

TempDir::TempDir() {
    std::string tmpl = (fs::temp_directory_path() / "sur-test-XXXXXX").string();
    if (!mkdtemp(tmpl.data())) throw std::runtime_error("mkdtemp failed");
    path_ = tmpl;
}

TempDir::~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
}

Tensor random_tensor(Shape shape, Rng& rng, double scale, bool requires_grad) {
    std::vector<double> v(shape_numel(shape));
    for (auto& x : v) x = scale * rng.normal();
    return Tensor(std::move(shape), std::move(v), requires_grad);
}

std::vector<double> numeric_grad(Tensor t, const std::function<double()>& f, double step) {
    auto data = t.mutable_data();
    std::vector<double> g(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
        const double saved = data[i];
        data[i] = saved + step;
        const double up = f();
        data[i] = saved - step;
        const double down = f();
        data[i] = saved;
        g[i] = (up - down) / (2.0 * step);
    }
    return g;
}

double relative_error(std::span<const double> a, std::span<const double> b, double floor) {
    double diff = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        diff += (a[i] - b[i]) * (a[i] - b[i]);
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    const double denom = std::max({std::sqrt(na), std::sqrt(nb), floor});
    return std::sqrt(diff) / denom;
}

int run_cli(const std::vector<std::string>& args, std::string* out, std::string* err) {
    std::ostringstream o, e;
    const int code = dispatch(args, o, e);
    if (out) *out = o.str();
    if (err) *err = e.str();
    return code;
}

Fixture build_fixture(const fs::path& root, std::size_t records, std::size_t pretrain_steps, std::size_t layer,
                      const std::string& profile) {
    Fixture f{root / "data", root / "encoders", root / "denoiser"};
    const auto must = [](const std::vector<std::string>& args) {
        std::string err;
        if (run_cli(args, nullptr, &err) != 0) throw std::runtime_error("fixture step failed: " + err);
    };
    must({"synth", "--seed", "0", "--n", std::to_string(records), "--out", f.data.string()});
    must({"init-encoders", "--seed", "0", "--profile", profile, "--out", f.encoders.string()});
    must({"clean", "--data", f.data.string(), "--encoders", f.encoders.string()});
    must({"embed", "--data", f.data.string(), "--encoders", f.encoders.string(), "--layer", std::to_string(layer)});
    must({"init-denoiser", "--data", f.data.string(), "--encoders", f.encoders.string(), "--out", f.denoiser.string(),
          "--steps", std::to_string(pretrain_steps)});
    return f;
}

std::map<std::string, std::string> hash_tree(const fs::path& dir) {
    std::map<std::string, std::string> out;
    for (const auto& entry : fs::recursive_directory_iterator(dir)) {
        if (entry.is_regular_file()) out[fs::relative(entry.path(), dir).generic_string()] = sha256_file(entry.path());
    }
    return out;
}

}  // namespace sur::test
