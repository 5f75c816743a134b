#include "doctest.h"

#include <cmath>
#include <filesystem>

#include "moesurv/error.hpp"
#include "moesurv/parameters.hpp"

using namespace moesurv;
using namespace moesurv::ad;

TEST_CASE("adam leaves parameters with zero gradient unchanged") {
    ParameterStore store;
    Parameter& p = store.add("p", Matrix::Constant(2, 2, 1.5));
    adam_step(store, AdamOptions{});
    CHECK(p.value == Matrix::Constant(2, 2, 1.5));
}

TEST_CASE("first adam step moves by lr against the gradient sign") {
    ParameterStore store;
    Parameter& p = store.add("p", Matrix::Constant(1, 1, 2.0));
    p.grad(0, 0) = 1.0;
    AdamOptions opt;
    opt.lr = 0.01;
    adam_step(store, opt);
    // m_hat = g, v_hat = g^2 at t = 1, so the step is lr * g / (|g| + eps).
    const double expected = 2.0 - 0.01 * 1.0 / (1.0 + 1e-8);
    CHECK(std::abs(p.value(0, 0) - expected) < 1e-15);
    CHECK(std::abs(p.value(0, 0) - 1.99) < 1e-9);
    CHECK(p.grad(0, 0) == 0.0);
    CHECK(store.step_count() == 1);
}

TEST_CASE("duplicate parameter names are rejected") {
    ParameterStore store;
    store.add("w", Matrix::Zero(1, 1));
    CHECK_THROWS_AS(store.add("w", Matrix::Zero(1, 1)), ConfigError);
}

TEST_CASE("checkpoint round trip") {
    ParameterStore store;
    Parameter& w = store.add("w", Matrix::Random(3, 2));
    w.first_moment = Matrix::Random(3, 2);
    w.second_moment = Matrix::Random(3, 2).cwiseAbs();
    store.add("b", Matrix::Random(1, 2));
    store.set_step_count(17);
    const auto path = std::filesystem::temp_directory_path() / "moesurv_ckpt_test.bin";
    save_checkpoint(path, store, "a = 1\n");
    const Checkpoint back = load_checkpoint(path);
    CHECK(back.config_text == "a = 1\n");
    CHECK(back.store.step_count() == 17);
    CHECK(back.store.at("w").value == w.value);
    CHECK(back.store.at("w").first_moment == w.first_moment);
    CHECK(back.store.at("w").second_moment == w.second_moment);
    CHECK(back.store.at("b").value == store.at("b").value);
    std::filesystem::remove(path);
}
