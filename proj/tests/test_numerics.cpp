#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "camnet/adam.hpp"
#include "camnet/param.hpp"
#include "camnet/resize.hpp"
#include "camnet/rng.hpp"
#include "camnet/tape.hpp"

using namespace camnet;

namespace {

Tensor random_tensor(std::vector<int> shape, uint64_t seed, double scale = 1.0) {
    Tensor t(std::move(shape));
    Rng rng(seed);
    for (float& v : t.data) v = static_cast<float>(rng.gaussian() * scale);
    return t;
}

// Gradient check: forward runs in float32, so central differences use
// h = 1e-2 (the fp32 noise/truncation sweet spot) and errors are normalized
// by max(|a|+|n|, 0.5); the threshold stays at the 1e-3 contract.
constexpr double kFdStep = 1e-2;

bool grad_close(double analytic, double numeric) {
    return std::fabs(analytic - numeric) / std::max(std::fabs(analytic) + std::fabs(numeric), 0.5) <
           1e-3;
}

// Scalar loss: fixed random projection of an op's output, so every output
// element contributes to the checked gradient.
Node* project_node(Tape& tape, Node* x, uint64_t seed) {
    Rng rng(seed);
    Tensor w = x->value;
    for (float& v : w.data) v = static_cast<float>(rng.gaussian());
    return tape.inner(x, std::move(w));
}

}  // namespace

TEST_CASE("conv2d 1x1 scalar multiply") {
    Tape tape;
    Node* x = tape.leaf(Tensor({1, 1, 1, 1}, {2.0f}));
    Param w("w", Tensor({1, 1, 1, 1}, {3.0f}));
    Param b("b", Tensor({1}, {0.0f}));
    Node* y = tape.conv2d(x, w, b, 1, 0);
    CHECK(y->value.data[0] == doctest::Approx(6.0f));
}

TEST_CASE("conv2d weight-normalized with unit-norm v, g=1 equals plain conv") {
    Tensor v = random_tensor({2, 3, 3, 3}, 11);
    // normalize each output channel, set g = 1
    Param plain("w", v);
    Param wn("w", v);
    wn.enable_weight_norm();
    for (int o = 0; o < 2; ++o) {
        double n = 0;
        for (int i = 0; i < 27; ++i) n += static_cast<double>(v.data[o * 27 + i]) * v.data[o * 27 + i];
        n = std::sqrt(n);
        for (int i = 0; i < 27; ++i) {
            plain.value.data[o * 27 + i] = static_cast<float>(v.data[o * 27 + i] / n);
            wn.wn_v.data[o * 27 + i] = static_cast<float>(v.data[o * 27 + i] / n);
        }
        wn.wn_g.data[o] = 1.0f;
    }
    Param bias("b", Tensor({2}));
    Tensor x = random_tensor({1, 3, 5, 5}, 12);
    Tape t1, t2;
    Node* y1 = t1.conv2d(t1.leaf(x), plain, bias, 1, 1);
    Node* y2 = t2.conv2d(t2.leaf(x), wn, bias, 1, 1);
    for (size_t i = 0; i < y1->value.data.size(); ++i)
        CHECK(y1->value.data[i] == doctest::Approx(y2->value.data[i]).epsilon(1e-5));
}

TEST_CASE("conv2d 3x3 averaging kernel: mean output, 1/9 input gradient") {
    Tape tape;
    Tensor xin = random_tensor({1, 1, 3, 3}, 21);
    Node* x = tape.leaf(xin, /*requires_grad=*/true);
    Tensor k({1, 1, 3, 3});
    k.fill(1.0f / 9.0f);
    Param w("w", k);
    Param b("b", Tensor({1}));
    Node* y = tape.conv2d(x, w, b, 1, 0);
    double mean = 0;
    for (float v : xin.data) mean += v / 9.0;
    CHECK(y->value.data[0] == doctest::Approx(mean).epsilon(1e-5));
    Node* loss = tape.mean_all(y);
    tape.backward(loss);
    for (float g : x->grad.data) CHECK(g == doctest::Approx(1.0f / 9.0f));
}

TEST_CASE("conv2d shape errors") {
    Tape tape;
    Node* x = tape.leaf(Tensor({1, 2, 4, 4}));
    Param w("w", Tensor({1, 3, 3, 3}));
    Param b("b", Tensor({1}));
    CHECK_THROWS_AS(tape.conv2d(x, w, b, 1, 1), ShapeError);
}

TEST_CASE("dense identity and sum") {
    Tape tape;
    Node* x = tape.leaf(Tensor({1, 2}, {3.0f, 4.0f}));
    Param id("w", Tensor({2, 2}, {1, 0, 0, 1}));
    Param b2("b", Tensor({2}));
    Node* y = tape.dense(x, id, b2);
    CHECK(y->value.data[0] == doctest::Approx(3.0f));
    CHECK(y->value.data[1] == doctest::Approx(4.0f));

    Param sum("w", Tensor({1, 2}, {1, 1}));
    Param b1("b", Tensor({1}));
    Node* s = tape.dense(x, sum, b1);
    CHECK(s->value.data[0] == doctest::Approx(7.0f));
}

TEST_CASE("dense matches naive triple-loop matmul oracle") {
    Tensor x = random_tensor({5, 3}, 31);
    Tensor w = random_tensor({4, 3}, 32);
    Param wp("w", w);
    Param bp("b", random_tensor({4}, 33));
    Tape tape;
    Node* y = tape.dense(tape.leaf(x), wp, bp);
    for (int n = 0; n < 5; ++n)
        for (int o = 0; o < 4; ++o) {
            double acc = bp.value.data[o];
            for (int f = 0; f < 3; ++f) acc += static_cast<double>(x.data[n * 3 + f]) * w.data[o * 3 + f];
            CHECK(y->value.data[n * 4 + o] == doctest::Approx(acc).epsilon(1e-5));
        }
}

TEST_CASE("leaky_relu examples and gradient") {
    Tape tape;
    Node* x = tape.leaf(Tensor({1, 3}, {-1.0f, 0.0f, 2.0f}), true);
    Node* y = tape.leaky_relu(x, 0.2f);
    CHECK(y->value.data[0] == doctest::Approx(-0.2f));
    CHECK(y->value.data[1] == doctest::Approx(0.0f));
    CHECK(y->value.data[2] == doctest::Approx(2.0f));

    // slope -> 1 would be identity; slope must stay below 1, check 0.999
    Tape t2;
    Node* x2 = t2.leaf(Tensor({1, 2}, {-3.0f, 5.0f}));
    Node* y2 = t2.leaky_relu(x2, 0.999f);
    CHECK(y2->value.data[0] == doctest::Approx(-2.997f));

    // gradient at [-1, 2] is [slope, 1], matching central differences
    Tape t3;
    Node* x3 = t3.leaf(Tensor({1, 2}, {-1.0f, 2.0f}), true);
    Node* y3 = t3.leaky_relu(x3, 0.2f);
    t3.backward(t3.mean_all(t3.scale(y3, 2.0f)));
    CHECK(x3->grad.data[0] == doctest::Approx(0.2f));
    CHECK(x3->grad.data[1] == doctest::Approx(1.0f));
    for (size_t i = 0; i < 2; ++i) {
        double fd = finite_difference(
            [&](const Tensor& t) {
                Tape tt;
                Node* yy = tt.leaky_relu(tt.leaf(t), 0.2f);
                return static_cast<double>(yy->value.data[0] + yy->value.data[1]);
            },
            x3->value, i);
        CHECK(std::fabs(fd - x3->grad.data[i]) < 1e-3);
    }
}

TEST_CASE("resize: box_down2 block mean, up2-down2 identity, bicubic constant") {
    Tensor x({1, 1, 2, 2}, {0, 0, 4, 4});
    Tensor d = box_down2(x);
    CHECK(d.data[0] == doctest::Approx(2.0f));

    Tensor r = random_tensor({1, 2, 3, 3}, 41);
    Tensor round = box_down2(nearest_up2(r));
    for (size_t i = 0; i < r.data.size(); ++i) CHECK(round.data[i] == doctest::Approx(r.data[i]));

    Tensor c({1, 1, 4, 4});
    c.fill(0.7f);
    Tensor bc = bicubic_to(c, 7, 3);
    for (float v : bc.data) CHECK(v == doctest::Approx(0.7f).epsilon(1e-5));

    Tensor odd({1, 1, 3, 3});
    CHECK_THROWS_AS(box_down2(odd), ShapeError);
}

TEST_CASE("adam: zero gradient leaves parameters unchanged") {
    Param p("p", random_tensor({4}, 51));
    Tensor before = p.value;
    std::vector<ParamSlot> slots;
    append_slots(p, slots);
    Adam opt;
    opt.step(slots, 0.1f, 0.9f, 0.999f, 1e-8f, 1);
    for (size_t i = 0; i < 4; ++i) CHECK(p.value.data[i] == before.data[i]);
}

TEST_CASE("adam: single scalar, g=1, t=1 steps by about -lr") {
    Param p("p", Tensor({1}, {0.5f}));
    p.grad.data[0] = 1.0f;
    std::vector<ParamSlot> slots;
    append_slots(p, slots);
    Adam opt;
    opt.step(slots, 0.01f, 0.9f, 0.999f, 1e-8f, 1);
    // bias-corrected m-hat = v-hat = 1, so step = -lr/(1+eps)
    CHECK(p.value.data[0] == doctest::Approx(0.5f - 0.01f).epsilon(1e-5));
    CHECK(p.grad.data[0] == 0.0f);  // zeroed afterward
}

TEST_CASE("adam: constant gradient walks a scalar downhill over 100 steps") {
    Param p("p", Tensor({1}, {3.0f}));
    std::vector<ParamSlot> slots;
    append_slots(p, slots);
    Adam opt;
    for (int t = 1; t <= 100; ++t) {
        p.grad.data[0] = 1.0f;  // d(x*g)/dx with g = 1
        opt.step(slots, 0.05f, 0.9f, 0.999f, 1e-8f, t);
    }
    // each step is about -lr once moments settle
    CHECK(p.value.data[0] == doctest::Approx(3.0f - 100 * 0.05f).epsilon(0.05));
}

TEST_CASE("adam: non-finite gradient is reported with the parameter name") {
    Param p("offender", Tensor({1}, {0.0f}));
    p.grad.data[0] = std::numeric_limits<float>::quiet_NaN();
    std::vector<ParamSlot> slots;
    append_slots(p, slots);
    Adam opt;
    CHECK_THROWS_WITH_AS(opt.step(slots, 0.01f, 0.9f, 0.999f, 1e-8f, 1),
                         doctest::Contains("offender"), TrainError);
}

TEST_CASE("weight-normalized effective weight has per-channel norm g") {
    for (uint64_t seed = 0; seed < 5; ++seed) {
        Param p("w", random_tensor({3, 2, 3, 3}, 100 + seed));
        p.enable_weight_norm();
        Rng rng(200 + seed);
        for (float& v : p.wn_g.data) v = static_cast<float>(1.0 + rng.uniform());
        for (float& v : p.wn_v.data) v = static_cast<float>(rng.gaussian() * 3.0);
        p.refresh();
        for (int o = 0; o < 3; ++o) {
            double n = 0;
            for (int i = 0; i < 18; ++i)
                n += static_cast<double>(p.value.data[o * 18 + i]) * p.value.data[o * 18 + i];
            CHECK(std::sqrt(n) == doctest::Approx(p.wn_g.data[o]).epsilon(1e-6));
        }
    }
}

// Finite-difference sweep over every differentiable op, 20 seeds each.
TEST_CASE("gradient check: conv2d (plain and weight-normalized)") {
    for (uint64_t seed = 0; seed < 20; ++seed) {
        bool wn = seed % 2 == 1;
        Tensor xin = random_tensor({2, 3, 4, 4}, 1000 + seed, 0.5);
        Tensor win = random_tensor({2, 3, 3, 3}, 2000 + seed, 0.5);
        Tensor bin = random_tensor({2}, 3000 + seed, 0.1);

        auto run = [&](const Tensor& x, const Tensor& w, const Tensor& b, const Tensor* g,
                       Tensor* dx, Tensor* dw, Tensor* db, Tensor* dg) {
            Tape tape;
            Param wp("w", w);
            if (wn) {
                wp.enable_weight_norm();
                wp.wn_v = w;
                if (g) wp.wn_g = *g;
            }
            Param bp("b", b);
            Node* xn = tape.leaf(x, true);
            Node* y = tape.conv2d(xn, wp, bp, 1, 1);
            Node* loss = project_node(tape, y, 4000 + seed);
            double out = loss->value.data[0];
            tape.backward(loss);
            if (dx) *dx = xn->grad;
            if (dw) *dw = wn ? wp.wn_v_grad : wp.grad;
            if (db) *db = bp.grad;
            if (dg && wn) *dg = wp.wn_g_grad;
            return out;
        };

        Tensor gin;
        if (wn) {
            Param tmp("w", win);
            tmp.enable_weight_norm();
            gin = tmp.wn_g;
        }
        Tensor dx, dw, db, dg;
        run(xin, win, bin, wn ? &gin : nullptr, &dx, &dw, &db, wn ? &dg : nullptr);

        Rng pick(5000 + seed);
        for (int rep = 0; rep < 4; ++rep) {
            size_t ix = pick.next_u64() % xin.data.size();
            double fd = finite_difference(
                [&](const Tensor& t) { return run(t, win, bin, wn ? &gin : nullptr, nullptr, nullptr, nullptr, nullptr); },
                xin, ix, kFdStep);
            CHECK(grad_close(dx.data[ix], fd));

            size_t iw = pick.next_u64() % win.data.size();
            double fdw = finite_difference(
                [&](const Tensor& t) { return run(xin, t, bin, wn ? &gin : nullptr, nullptr, nullptr, nullptr, nullptr); },
                win, iw, kFdStep);
            CHECK(grad_close(dw.data[iw], fdw));
        }
        size_t ib = pick.next_u64() % 2;
        double fdb = finite_difference(
            [&](const Tensor& t) { return run(xin, win, t, wn ? &gin : nullptr, nullptr, nullptr, nullptr, nullptr); },
            bin, ib, kFdStep);
        CHECK(grad_close(db.data[ib], fdb));
        if (wn) {
            size_t ig = pick.next_u64() % 2;
            double fdg = finite_difference(
                [&](const Tensor& t) { return run(xin, win, bin, &t, nullptr, nullptr, nullptr, nullptr); },
                gin, ig, kFdStep);
            CHECK(grad_close(dg.data[ig], fdg));
        }
    }
}

TEST_CASE("gradient check: dense, activations, resamplers, reductions") {
    for (uint64_t seed = 0; seed < 20; ++seed) {
        // chain touching dense, leaky_relu, up2, down2, concat, affine,
        // unit-norm and both reductions; checked against central differences
        Tensor xin = random_tensor({2, 2, 4, 4}, 7000 + seed, 0.6);
        Tensor zin = random_tensor({2, 3}, 7100 + seed, 0.6);
        Param dw("dw", random_tensor({4, 3}, 7200 + seed, 0.5));
        Param db("db", random_tensor({4}, 7300 + seed, 0.2));

        auto run = [&](const Tensor& x, const Tensor& z, Tensor* dx, Tensor* dz) {
            Tape tape;
            Node* xn = tape.leaf(x, true);
            Node* zn = tape.leaf(z, true);
            Node* h = tape.dense(zn, dw, db);
            // keep gamma near 1 so the unit-norm op stays well conditioned
            // for the finite-difference probe
            Node* gamma = tape.add_scalar(tape.scale(tape.slice_cols(h, 0, 2), 0.2f), 1.0f);
            Node* delta = tape.scale(tape.slice_cols(h, 2, 4), 0.2f);
            // smooth ops only; the kinked ones (leaky_relu, mean_abs) get
            // dedicated checks away from their kinks
            Node* up = tape.nearest_up2(xn);
            Node* down = tape.box_down2(up);
            Node* cat = tape.concat_channels({down, xn});
            Node* slim = tape.box_down2(cat);
            Node* aff = tape.channel_affine(xn, gamma, delta);
            Node* nrm = tape.channel_unit_norm(aff);
            Node* l1 = tape.per_sample_sum_sq(tape.axpy(nrm, 0.5f, xn), 0.1f);
            Node* l2 = tape.per_sample_sum_sq(slim, 0.25f);
            Node* loss = tape.mean_all(tape.add(l1, l2));
            double out = loss->value.data[0];
            tape.backward(loss);
            if (dx) *dx = xn->grad;
            if (dz) *dz = zn->grad;
            return out;
        };
        Tensor dx, dz;
        run(xin, zin, &dx, &dz);
        Rng pick(7500 + seed);
        for (int rep = 0; rep < 5; ++rep) {
            size_t ix = pick.next_u64() % xin.data.size();
            double fd = finite_difference(
                [&](const Tensor& t) { return run(t, zin, nullptr, nullptr); }, xin, ix, kFdStep);
            CHECK(grad_close(dx.data[ix], fd));
        }
        for (int rep = 0; rep < 3; ++rep) {
            size_t iz = pick.next_u64() % zin.data.size();
            double fd = finite_difference(
                [&](const Tensor& t) { return run(xin, t, nullptr, nullptr); }, zin, iz, kFdStep);
            CHECK(grad_close(dz.data[iz], fd));
        }
    }
}

TEST_CASE("gradient check: per_sample_mean_abs away from the kink") {
    for (uint64_t seed = 0; seed < 20; ++seed) {
        Tensor xin = random_tensor({2, 2, 3, 3}, 8000 + seed);
        for (float& v : xin.data)
            if (std::fabs(v) < 0.1f) v = v < 0 ? -0.1f : 0.1f;
        Tape tape;
        Node* xn = tape.leaf(xin, true);
        Node* loss = tape.mean_all(tape.per_sample_mean_abs(xn));
        tape.backward(loss);
        Rng pick(8100 + seed);
        for (int rep = 0; rep < 3; ++rep) {
            size_t i = pick.next_u64() % xin.data.size();
            double fd = finite_difference(
                [&](const Tensor& t) {
                    Tape tt;
                    return tt.mean_all(tt.per_sample_mean_abs(tt.leaf(t)))->value.data[0];
                },
                xin, i, kFdStep);
            CHECK(grad_close(xn->grad.data[i], fd));
        }
    }
}

TEST_CASE("ops are deterministic functions of their inputs") {
    Tensor x = random_tensor({2, 3, 4, 4}, 99);
    Param w("w", random_tensor({4, 3, 3, 3}, 98));
    w.enable_weight_norm();
    Param b("b", random_tensor({4}, 97));
    Tape t1, t2;
    Node* y1 = t1.conv2d(t1.leaf(x), w, b, 1, 1);
    Node* y2 = t2.conv2d(t2.leaf(x), w, b, 1, 1);
    CHECK(y1->value.data == y2->value.data);
}
