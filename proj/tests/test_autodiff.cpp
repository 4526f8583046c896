#include <cmath>
#include <functional>
#include <vector>

#include "doctest.h"
#include "nfvs/autodiff.hpp"
#include "nfvs/errors.hpp"
#include "nfvs/rng.hpp"
#include "nfvs/vs_control.hpp"

using namespace nfvs;
using autodiff::Graph;
using Var = autodiff::Var<double>;

namespace {

std::vector<double> random_vec(Rng& rng, int n, double lo = -1.0, double hi = 1.0) {
    std::vector<double> v(static_cast<std::size_t>(n));
    for (double& x : v) x = rng.uniform(lo, hi);
    return v;
}

// Central finite differences on every component of the probe input. The
// builder reconstructs the graph from scratch for each evaluation; the probe
// leaf is the only differentiable node.
using Builder = std::function<Var*(Graph<double>&, Var*)>;

void fd_verify(const Builder& build, const std::vector<double>& probe,
               std::initializer_list<int> dims, double eps = 1e-6, double tol = 1e-7) {
    auto eval = [&](const std::vector<double>& vals, std::vector<double>* grad) {
        Graph<double> g;
        Var* x = g.leaf(vals.data(), dims, true);
        Var* loss = build(g, x);
        REQUIRE(loss->numel == 1);
        if (grad) {
            g.backward(loss);
            *grad = x->g;
        }
        return loss->value();
    };

    std::vector<double> analytic;
    eval(probe, &analytic);
    std::vector<double> work = probe;
    for (std::size_t i = 0; i < probe.size(); ++i) {
        work[i] = probe[i] + eps;
        const double hi = eval(work, nullptr);
        work[i] = probe[i] - eps;
        const double lo = eval(work, nullptr);
        work[i] = probe[i];
        const double fd = (hi - lo) / (2.0 * eps);
        const double err = std::abs(fd - analytic[i]) / std::max(1.0, std::abs(fd));
        CAPTURE(i);
        CAPTURE(fd);
        CAPTURE(analytic[i]);
        CHECK(err < tol);
    }
}

}  // namespace

TEST_CASE("conv2d gradients match finite differences for data, weights, and bias") {
    Rng rng(42, 1);
    const auto img = random_vec(rng, 5 * 4 * 2);
    const auto w = random_vec(rng, 3 * 3 * 2 * 3);
    const auto b = random_vec(rng, 3);

    kernels::ConvShape s;
    s.ih = 5; s.iw = 4; s.ci = 2; s.co = 3; s.k = 3; s.stride = 2; s.pad = 1;
    const auto seed = random_vec(rng, s.oh() * s.ow() * s.co);

    fd_verify([&](Graph<double>& g, Var* x) {
        Var* wv = g.leaf(w.data(), {3, 3, 2, 3});
        Var* bv = g.leaf(b.data(), {3});
        return g.dot_const(g.conv2d(x, wv, bv, 2, 1), seed);
    }, img, {5, 4, 2});

    fd_verify([&](Graph<double>& g, Var* wv) {
        Var* x = g.leaf(img.data(), {5, 4, 2});
        Var* bv = g.leaf(b.data(), {3});
        return g.dot_const(g.conv2d(x, wv, bv, 2, 1), seed);
    }, w, {3, 3, 2, 3});

    fd_verify([&](Graph<double>& g, Var* bv) {
        Var* x = g.leaf(img.data(), {5, 4, 2});
        Var* wv = g.leaf(w.data(), {3, 3, 2, 3});
        return g.dot_const(g.conv2d(x, wv, bv, 2, 1), seed);
    }, b, {3});
}

TEST_CASE("linear gradients match finite differences") {
    Rng rng(43, 1);
    const auto x = random_vec(rng, 6);
    const auto w = random_vec(rng, 6 * 4);
    const auto b = random_vec(rng, 4);
    const auto seed = random_vec(rng, 4);

    fd_verify([&](Graph<double>& g, Var* xv) {
        return g.dot_const(g.linear(xv, g.leaf(w.data(), {6, 4}), g.leaf(b.data(), {4})), seed);
    }, x, {6});
    fd_verify([&](Graph<double>& g, Var* wv) {
        return g.dot_const(g.linear(g.leaf(x.data(), {6}), wv, g.leaf(b.data(), {4})), seed);
    }, w, {6, 4});
    fd_verify([&](Graph<double>& g, Var* bv) {
        return g.dot_const(g.linear(g.leaf(x.data(), {6}), g.leaf(w.data(), {6, 4}), bv), seed);
    }, b, {4});
}

TEST_CASE("elementwise op gradients match finite differences") {
    Rng rng(44, 1);
    // Inputs kept away from the relu and clamp kinks so central differences
    // see a smooth function.
    std::vector<double> x(12);
    for (std::size_t i = 0; i < x.size(); ++i)
        x[i] = (i % 2 ? 0.2 : -0.3) + 0.01 * static_cast<double>(i);
    const auto seed = random_vec(rng, 12);
    const auto other = random_vec(rng, 12);

    fd_verify([&](Graph<double>& g, Var* v) { return g.dot_const(g.relu(v), seed); }, x, {12});
    fd_verify([&](Graph<double>& g, Var* v) {
        return g.dot_const(g.tanh_scale(v, 1.5), seed);
    }, x, {12});
    fd_verify([&](Graph<double>& g, Var* v) {
        return g.dot_const(g.scale(v, -2.25), seed);
    }, x, {12});
    fd_verify([&](Graph<double>& g, Var* v) {
        return g.dot_const(g.add(v, g.leaf(other.data(), {12})), seed);
    }, x, {12});
    fd_verify([&](Graph<double>& g, Var* v) {
        return g.dot_const(g.sub(g.leaf(other.data(), {12}), v), seed);
    }, x, {12});
    const auto seed24 = random_vec(rng, 24);
    fd_verify([&](Graph<double>& g, Var* v) {
        return g.dot_const(g.concat(v, g.leaf(other.data(), {12})), seed24);
    }, x, {12});

    // clamp01 needs values strictly inside and outside the interval.
    std::vector<double> c = {0.2, 0.8, -0.4, 1.7, 0.5, 0.01, 0.99, -2.0, 3.0, 0.6, 0.3, 0.7};
    fd_verify([&](Graph<double>& g, Var* v) { return g.dot_const(g.clamp01(v), seed); }, c, {12});
}

TEST_CASE("upsample2x doubles both extents and its gradient matches finite differences") {
    Rng rng(45, 1);
    const auto x = random_vec(rng, 2 * 2 * 1);

    Graph<double> g;
    Var* v = g.leaf(x.data(), {2, 2, 1}, true);
    Var* up = g.upsample2x(v);
    REQUIRE(up->dim(0) == 4);
    REQUIRE(up->dim(1) == 4);
    // Hand-computed nearest-neighbor expansion of [[a, b], [c, d]].
    const double a = x[0], b = x[1], cc = x[2], d = x[3];
    const double expect[16] = {a, a, b, b, a, a, b, b, cc, cc, d, d, cc, cc, d, d};
    for (int i = 0; i < 16; ++i) CHECK(up->x[i] == expect[i]);

    const auto seed = random_vec(rng, 16);
    fd_verify([&](Graph<double>& g2, Var* w) { return g2.dot_const(g2.upsample2x(w), seed); },
              x, {2, 2, 1});
}

TEST_CASE("dense matrix op gradients match finite differences") {
    Rng rng(46, 1);
    const auto a = random_vec(rng, 3 * 4);
    const auto b = random_vec(rng, 4 * 2);
    const auto v = random_vec(rng, 4);
    const auto seed6 = random_vec(rng, 6);
    const auto seed3 = random_vec(rng, 3);
    const auto seed12 = random_vec(rng, 12);

    fd_verify([&](Graph<double>& g, Var* av) {
        return g.dot_const(g.matmul(av, g.leaf(b.data(), {4, 2})), seed6);
    }, a, {3, 4});
    fd_verify([&](Graph<double>& g, Var* bv) {
        return g.dot_const(g.matmul(g.leaf(a.data(), {3, 4}), bv), seed6);
    }, b, {4, 2});
    fd_verify([&](Graph<double>& g, Var* av) {
        return g.dot_const(g.matvec(av, g.leaf(v.data(), {4})), seed3);
    }, a, {3, 4});
    fd_verify([&](Graph<double>& g, Var* vv) {
        return g.dot_const(g.matvec(g.leaf(a.data(), {3, 4}), vv), seed3);
    }, v, {4});
    fd_verify([&](Graph<double>& g, Var* av) {
        return g.dot_const(g.transpose(av), seed12);
    }, a, {3, 4});
}

TEST_CASE("matrix inverse: forward identity and backward finite differences") {
    Rng rng(47, 1);
    // Diagonally dominant so the matrix is comfortably invertible.
    std::vector<double> a = random_vec(rng, 16, -0.3, 0.3);
    for (int i = 0; i < 4; ++i) a[static_cast<std::size_t>(5 * i)] += 2.0;

    Graph<double> g;
    Var* av = g.leaf(a.data(), {4, 4}, true);
    Var* inv = g.inverse(av);
    Var* prod = g.matmul(av, inv);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j)
            CHECK(prod->x[4 * i + j] == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-12));

    const auto seed = random_vec(rng, 16);
    fd_verify([&](Graph<double>& g2, Var* w) {
        Var* s = g2.add_diag(w, 0.7);
        return g2.dot_const(g2.inverse(s), seed);
    }, a, {4, 4}, 1e-6, 1e-6);

    std::vector<double> singular(9, 1.0);
    Graph<double> g3;
    CHECK_THROWS_AS(g3.inverse(g3.leaf(singular.data(), {3, 3}, true)), SingularMatrix);
}

TEST_CASE("interaction node reproduces the analytic interaction matrix") {
    Rng rng(48, 1);
    const int points = 4;
    std::vector<double> m(2 * points);
    for (double& x : m) x = rng.uniform(-0.8, 0.8);
    std::vector<double> z = {0.3, 0.45, 0.5, 0.62};

    Graph<double> g;
    Var* mv = g.leaf(m.data(), {2 * points}, true);
    Var* L = g.interaction(mv, z);

    Eigen::VectorXd s = Eigen::Map<const Eigen::VectorXd>(m.data(), 2 * points);
    Eigen::VectorXd zv = Eigen::Map<const Eigen::VectorXd>(z.data(), points);
    const Eigen::MatrixXd want = interaction_matrix(s, zv);
    REQUIRE(L->dim(0) == 2 * points);
    REQUIRE(L->dim(1) == 6);
    for (int r = 0; r < 2 * points; ++r)
        for (int c = 0; c < 6; ++c)
            CHECK(L->x[6 * r + c] == doctest::Approx(want(r, c)).epsilon(1e-14));

    const auto seed = random_vec(rng, 2 * points * 6);
    fd_verify([&](Graph<double>& g2, Var* w) {
        return g2.dot_const(g2.interaction(w, z), seed);
    }, m, {2 * points});
}

TEST_CASE("interaction node with differentiation disabled detaches the features") {
    std::vector<double> m = {0.1, -0.2, 0.3, 0.4};
    std::vector<double> z = {0.4, 0.5};
    Graph<double> g;
    Var* mv = g.leaf(m.data(), {4}, true);
    Var* L = g.interaction(mv, z, false);
    Var* loss = g.dot_const(L, std::vector<double>(24, 1.0));
    g.backward(loss);
    for (int i = 0; i < 4; ++i) CHECK(mv->g[static_cast<std::size_t>(i)] == 0.0);
}

TEST_CASE("l1_sum and hinge_sum: values, kink conventions, and smooth-region gradients") {
    std::vector<double> x = {0.5, -0.25, 0.0, 1.5, -2.0};
    Graph<double> g;
    Var* xv = g.leaf(x.data(), {5}, true);
    Var* l1 = g.l1_sum(xv);
    CHECK(l1->value() == doctest::Approx(4.25).epsilon(1e-15));
    g.backward(l1);
    CHECK(xv->g[0] == 1.0);
    CHECK(xv->g[1] == -1.0);
    CHECK(xv->g[2] == 0.0);  // subgradient at the kink
    CHECK(xv->g[3] == 1.0);
    CHECK(xv->g[4] == -1.0);

    Graph<double> g2;
    Var* yv = g2.leaf(x.data(), {5}, true);
    Var* hinge = g2.hinge_sum(yv, 1.0);
    CHECK(hinge->value() == doctest::Approx(1.5).epsilon(1e-15));
    g2.backward(hinge);
    CHECK(yv->g[0] == 0.0);
    CHECK(yv->g[1] == 0.0);
    CHECK(yv->g[2] == 0.0);
    CHECK(yv->g[3] == 1.0);
    CHECK(yv->g[4] == -1.0);

    // Exactly on the hinge: flat-side subgradient.
    std::vector<double> edge = {1.0, -1.0};
    Graph<double> g3;
    Var* ev = g3.leaf(edge.data(), {2}, true);
    Var* h = g3.hinge_sum(ev, 1.0);
    CHECK(h->value() == 0.0);
    g3.backward(h);
    CHECK(ev->g[0] == 0.0);
    CHECK(ev->g[1] == 0.0);

    Rng rng(49, 1);
    std::vector<double> smooth = {0.4, -0.7, 1.9, -1.4, 0.2, 2.4};
    fd_verify([&](Graph<double>& g4, Var* v) { return g4.l1_sum(v); }, smooth, {6});
    fd_verify([&](Graph<double>& g4, Var* v) { return g4.hinge_sum(v, 1.0); }, smooth, {6});
}

TEST_CASE("weighted_sum combines scalar terms and routes gradients by weight") {
    std::vector<double> x = {2.0, -3.0};
    Graph<double> g;
    Var* xv = g.leaf(x.data(), {2}, true);
    Var* a = g.dot_const(xv, {1.0, 0.0});
    Var* b = g.dot_const(xv, {0.0, 1.0});
    Var* total = g.weighted_sum({{a, 0.5}, {b, 2.0}});
    CHECK(total->value() == doctest::Approx(0.5 * 2.0 + 2.0 * -3.0).epsilon(1e-15));
    g.backward(total);
    CHECK(xv->g[0] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(xv->g[1] == doctest::Approx(2.0).epsilon(1e-15));

    // Zero weight removes the term's gradient entirely.
    Graph<double> g2;
    Var* yv = g2.leaf(x.data(), {2}, true);
    Var* c = g2.dot_const(yv, {1.0, 1.0});
    Var* d = g2.l1_sum(yv);
    Var* t = g2.weighted_sum({{c, 0.0}, {d, 1.0}});
    g2.backward(t);
    CHECK(yv->g[0] == 1.0);   // only the l1 path contributes
    CHECK(yv->g[1] == -1.0);
}

TEST_CASE("loss equal to the sum of inputs has an all-ones gradient") {
    std::vector<double> w(17, 0.25);
    Graph<double> g;
    Var* wv = g.leaf(w.data(), {17}, true);
    Var* loss = g.dot_const(wv, std::vector<double>(17, 1.0));
    g.backward(loss);
    for (double gi : wv->g) CHECK(gi == 1.0);
}

TEST_CASE("reshape and add_diag pass values and gradients through") {
    Rng rng(50, 1);
    const auto x = random_vec(rng, 12);
    const auto seed = random_vec(rng, 12);
    fd_verify([&](Graph<double>& g, Var* v) {
        return g.dot_const(g.reshape(v, {3, 2, 2}), seed);
    }, x, {12});

    const auto sq = random_vec(rng, 9);
    const auto seed9 = random_vec(rng, 9);
    fd_verify([&](Graph<double>& g, Var* v) {
        return g.dot_const(g.add_diag(v, 1.3), seed9);
    }, sq, {3, 3});

    Graph<double> g;
    Var* a = g.leaf(sq.data(), {3, 3}, true);
    Var* shifted = g.add_diag(a, 2.0);
    for (int i = 0; i < 3; ++i)
        CHECK(shifted->x[4 * i] == doctest::Approx(sq[static_cast<std::size_t>(4 * i)] + 2.0));
}

TEST_CASE("backward misuse is reported") {
    std::vector<double> x = {1.0, 2.0};
    Graph<double> g;
    Var* xv = g.leaf(x.data(), {2}, true);
    Var* vec = g.relu(xv);
    CHECK_THROWS_AS(g.backward(vec), ShapeMismatch);  // recorded, but not a scalar
    Graph<double> g2;
    Var* lone = g2.leaf(x.data(), {1}, true);
    CHECK_THROWS_AS(g2.backward(lone), GraphNotRecorded);  // nothing recorded

    // Ops over constants only record nothing; backward has no tape to replay.
    Graph<double> g3;
    Var* c = g3.leaf(x.data(), {2}, false);
    Var* s = g3.l1_sum(c);
    CHECK_THROWS_AS(g3.backward(s), GraphNotRecorded);

    // A node from another graph is rejected.
    Graph<double> g4;
    Var* yv = g4.leaf(x.data(), {2}, true);
    Var* loss4 = g4.l1_sum(yv);
    Graph<double> g5;
    Var* zv = g5.leaf(x.data(), {2}, true);
    Var* loss5 = g5.l1_sum(zv);
    CHECK_THROWS_AS(g4.backward(loss5), GraphNotRecorded);
    g4.backward(loss4);
    CHECK_THROWS_AS(g4.backward(loss4), GraphNotRecorded);  // tape already replayed
}

TEST_CASE("shape mismatches are rejected") {
    Graph<double> g;
    std::vector<double> a(6, 1.0), b(4, 1.0);
    Var* av = g.leaf(a.data(), {6}, true);
    Var* bv = g.leaf(b.data(), {4}, true);
    CHECK_THROWS_AS(g.add(av, bv), ShapeMismatch);
    CHECK_THROWS_AS(g.sub(av, bv), ShapeMismatch);
    CHECK_THROWS_AS(g.matmul(g.leaf(a.data(), {2, 3}), g.leaf(b.data(), {2, 2})), ShapeMismatch);
    CHECK_THROWS_AS(g.matvec(g.leaf(a.data(), {2, 3}), bv), ShapeMismatch);
    CHECK_THROWS_AS(g.reshape(av, {5}), ShapeMismatch);
    CHECK_THROWS_AS(g.inverse(g.leaf(a.data(), {2, 3})), ShapeMismatch);
    CHECK_THROWS_AS(g.dot_const(av, {1.0}), ShapeMismatch);
    std::vector<double> z = {0.5, 0.5};
    CHECK_THROWS_AS(g.interaction(av, z), ShapeMismatch);
}

TEST_CASE("forward evaluation is deterministic") {
    Rng rng(51, 1);
    const auto img = random_vec(rng, 8 * 8 * 1, 0.0, 1.0);
    const auto w = random_vec(rng, 3 * 3 * 1 * 2);
    auto run = [&] {
        Graph<double> g;
        Var* x = g.leaf(img.data(), {8, 8, 1});
        Var* wv = g.leaf(w.data(), {3, 3, 1, 2});
        Var* y = g.conv2d(x, wv, nullptr, 2, 1);
        return std::vector<double>(y->x, y->x + y->numel);
    };
    const auto r1 = run();
    const auto r2 = run();
    CHECK(r1 == r2);
}
