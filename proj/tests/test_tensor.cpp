#include <doctest.h>

#include <cmath>
#include <fstream>

#include "support.hpp"
#include "sur/error.hpp"
#include "sur/hash.hpp"
#include "sur/tns_io.hpp"

using namespace sur;
using namespace sur::test;

namespace {

template <typename F>
ErrorKind kind_of(F&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.kind();
    }
    FAIL("expected an error");
    return ErrorKind::Contract;
}

// KL(softmax(p/tau) || softmax(q/tau)) by direct summation in long double.
long double kl_oracle(const Tensor& p, const Tensor& q, double tau) {
    const auto softmax = [&](const Tensor& x) {
        long double m = -INFINITY;
        for (double v : x.data()) m = std::max<long double>(m, v / tau);
        std::vector<long double> e;
        long double s = 0;
        for (double v : x.data()) {
            e.push_back(std::exp(v / tau - m));
            s += e.back();
        }
        for (auto& v : e) v /= s;
        return e;
    };
    const auto a = softmax(p), b = softmax(q);
    long double kl = 0;
    for (std::size_t i = 0; i < a.size(); ++i) kl += a[i] * std::log(a[i] / b[i]);
    return kl;
}

}  // namespace

TEST_CASE("every op's tape gradient matches central differences") {
    for (const auto& c : op_cases(0)) {
        CAPTURE(c.name);
        CHECK(op_gradient_error(c) < 1e-6);
    }
}

TEST_CASE("matmul against hand values") {
    const Tensor a = Tensor::matrix(2, 2, {1, 2, 3, 4});
    const Tensor b = Tensor::matrix(2, 1, {5, 6});
    const Tensor c = matmul(a, b);
    CHECK(c.shape() == Shape{2, 1});
    CHECK(c[0] == 17);
    CHECK(c[1] == 39);
    CHECK(kind_of([&] { matmul(a, Tensor::matrix(3, 1, {1, 2, 3})); }) == ErrorKind::Dimension);
}

TEST_CASE("row_softmax rows sum to one and reject non-finite input") {
    Rng rng(3);
    const Tensor s = row_softmax(random_tensor({4, 7}, rng, 5.0));
    for (std::size_t r = 0; r < 4; ++r) {
        double total = 0;
        for (std::size_t c = 0; c < 7; ++c) total += s.at(r, c);
        CHECK(std::abs(total - 1.0) < 1e-12);
    }
    CHECK(kind_of([] { row_softmax(Tensor::matrix(1, 2, {1.0, NAN})); }) == ErrorKind::Numeric);
}

TEST_CASE("kl_div contract") {
    Rng rng(11);
    for (int i = 0; i < 200; ++i) {
        const std::size_t n = 2 + rng.uniform_index(10);
        const Tensor p = random_tensor({n}, rng, 3.0), q = random_tensor({n}, rng, 3.0);
        const double tau = 0.5 + rng.uniform() * 2.0;
        const double kl = kl_div(p, q, tau).item();
        CHECK(kl >= -1e-12);
        CHECK(std::abs(kl - static_cast<double>(kl_oracle(p, q, tau))) < 1e-12);
        std::vector<double> shifted(p.data().begin(), p.data().end());
        for (auto& v : shifted) v += 4.25;
        CHECK(std::abs(kl_div(p, Tensor::vector(shifted), tau).item()) < 1e-12);
    }
    CHECK(kind_of([] { kl_div(Tensor::vector({1, 2}), Tensor::vector({1, 2}), 0.0); }) == ErrorKind::Contract);
    CHECK(kind_of([] { kl_div(Tensor::vector({1, 2}), Tensor::vector({1, 2, 3}), 1.0); }) == ErrorKind::Dimension);
}

TEST_CASE("backward preconditions") {
    Tape tape;
    const Tensor x = Tensor::vector({1, 2, 3}, true);
    const Tensor y = scale(x, 2.0, &tape);
    CHECK(kind_of([&] { tape.backward(y); }) == ErrorKind::Contract);
    const Tensor loss = sum(y, &tape);
    tape.backward(loss);
    CHECK(x.grad()[0] == 2.0);
    CHECK(kind_of([&] { tape.backward(loss); }) == ErrorKind::Tape);

    Tape other;
    const Tensor detached = sum(x.detach());
    CHECK(kind_of([&] { other.backward(detached); }) == ErrorKind::Tape);
}

TEST_CASE("gradients accumulate across uses of a leaf") {
    Tape tape;
    const Tensor x = Tensor::vector({1.5, -2.0}, true);
    backward(sum(add(x, x, &tape), &tape), tape);
    CHECK(x.grad()[0] == 2.0);
    CHECK(x.grad()[1] == 2.0);
}

TEST_CASE("untracked inputs produce untracked results") {
    Tape tape;
    const Tensor a = Tensor::vector({1, 2});
    add(a, a, &tape);
    CHECK(tape.size() == 0);
}

TEST_CASE("slice_rows bounds") {
    const Tensor x = Tensor::matrix(3, 2, {1, 2, 3, 4, 5, 6});
    CHECK(kind_of([&] { slice_rows(x, 0, 0); }) == ErrorKind::EmptyInput);
    CHECK(kind_of([&] { slice_rows(x, 2, 2); }) == ErrorKind::Range);
    CHECK(slice_rows(x, 1, 2).at(1, 1) == 6);
}

TEST_CASE("tns round trip and format errors") {
    TempDir dir;
    Rng rng(5);
    const Tensor t = tns::round_to_f32(random_tensor({3, 4}, rng));
    tns::write(dir / "a.tns", t);
    const Tensor back = tns::read(dir / "a.tns");
    CHECK(back.shape() == t.shape());
    for (std::size_t i = 0; i < t.numel(); ++i) CHECK(back[i] == t[i]);

    std::vector<std::uint8_t> bytes = tns::encode(t);
    bytes[0] = 'X';
    CHECK(kind_of([&] { tns::decode(bytes, "mem"); }) == ErrorKind::Format);
    bytes = tns::encode(t);
    bytes[4] = 2;
    CHECK(kind_of([&] { tns::decode(bytes, "mem"); }) == ErrorKind::Format);
    bytes = tns::encode(t);
    bytes.pop_back();
    CHECK(kind_of([&] { tns::decode(bytes, "mem"); }) == ErrorKind::Format);
}

TEST_CASE("sha256 known vector") {
    CHECK(sha256_hex(std::string("abc")) == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("rng streams are reproducible") {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) CHECK(a.normal() == b.normal());
    Rng c(1);
    double mean = 0;
    for (int i = 0; i < 20000; ++i) mean += c.uniform();
    CHECK(std::abs(mean / 20000 - 0.5) < 0.01);
}
