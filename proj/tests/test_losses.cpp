#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "firzen/model/losses.hpp"
#include "testutil.hpp"

using namespace firzen;

namespace {

double cosine(const Mat& a, std::size_t ra, const Mat& b, std::size_t rb) {
    double na = row_norm(a, ra), nb = row_norm(b, rb);
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot_rows(a, ra, b, rb) / (na * nb);
}

}  // namespace

TEST_CASE("cosine matrix matches the entrywise oracle") {
    Rng rng(3);
    Mat a = rng.xavier_uniform(4, 5), b = rng.xavier_uniform(6, 5);
    ad::Tape tape;
    ad::Var c = cosine_matrix(tape, tape.constant(a), tape.constant(b));
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 6; ++j)
            CHECK(tape.val(c)(i, j) == doctest::Approx(cosine(a, i, b, j)).epsilon(1e-12));
}

TEST_CASE("virtual interaction graph is the sampled cosine submatrix") {
    Rng rng(5);
    Mat xu = rng.xavier_uniform(8, 4), xi = rng.xavier_uniform(9, 4);
    std::vector<std::size_t> rows{1, 4, 7}, cols{0, 2, 5, 8};
    ad::Tape tape;
    ad::Var g = virtual_interaction_graph(tape, tape.constant(xu), tape.constant(xi), rows, cols);
    REQUIRE(tape.val(g).rows() == 3);
    REQUIRE(tape.val(g).cols() == 4);
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < cols.size(); ++j)
            CHECK(tape.val(g)(i, j) == doctest::Approx(cosine(xu, rows[i], xi, cols[j])));
}

TEST_CASE("augmented graph rows sum to one when gamma is zero") {
    Csr inter = Csr::from_triplets(4, 5, {{0, 1, 1.0}, {0, 3, 1.0}, {2, 2, 1.0}});
    Mat sample = interaction_submatrix(inter, {0, 1, 2}, {0, 1, 2, 3});
    CHECK(sample(0, 1) == 1.0);
    CHECK(sample(1, 0) == 0.0);

    Rng rng_a(7), rng_b(7), rng_c(8);
    Rng feat(1);
    Mat bu = feat.xavier_uniform(4, 3), bi = feat.xavier_uniform(5, 3);
    ad::Tape tape;
    ad::Var vu = tape.constant(bu), vi = tape.constant(bi);
    ad::Var a = augment_objective_graph(tape, sample, vu, vi, {0, 1, 2}, {0, 1, 2, 3}, 0.2, 0.0,
                                        rng_a);
    for (std::size_t r = 0; r < 3; ++r) {
        double s = 0.0;
        for (std::size_t c = 0; c < 4; ++c) s += tape.val(a)(r, c);
        CHECK(s == doctest::Approx(1.0));
    }

    // deterministic in the rng seed, and gamma adds exactly the cosine term
    ad::Var a2 = augment_objective_graph(tape, sample, vu, vi, {0, 1, 2}, {0, 1, 2, 3}, 0.2, 0.0,
                                         rng_b);
    CHECK(tape.val(a) == tape.val(a2));
    ad::Var a3 = augment_objective_graph(tape, sample, vu, vi, {0, 1, 2}, {0, 1, 2, 3}, 0.2, 0.5,
                                         rng_c);
    Rng rng_d(8);
    ad::Var a4 = augment_objective_graph(tape, sample, vu, vi, {0, 1, 2}, {0, 1, 2, 3}, 0.2, 0.0,
                                         rng_d);
    for (std::size_t r = 0; r < 3; ++r)
        for (std::size_t c = 0; c < 4; ++c) {
            double phi = cosine(bu, r, bi, c);
            CHECK(tape.val(a3)(r, c) == doctest::Approx(tape.val(a4)(r, c) + 0.5 * phi));
        }
}

TEST_CASE("discriminator output matches the composed definition in eval mode") {
    Rng rng(11);
    Mat x = rng.xavier_uniform(3, 4);
    Mat w = rng.xavier_uniform(4, 1);
    double b = 0.3, gain = 1.7, bias = -0.2, mean = 0.1, var = 2.0, slope = 0.01;

    ad::Tape tape;
    Rng drop(1);
    auto d = discriminator_forward(tape, tape.constant(x), tape.constant(w),
                                   tape.constant(Mat(1, 1, b)), tape.constant(Mat(1, 1, gain)),
                                   tape.constant(Mat(1, 1, bias)), slope, 0.5, false, mean, var,
                                   drop);
    for (std::size_t i = 0; i < 3; ++i) {
        double z = dot_rows(x, i, transpose(w), 0) + b;
        double a = z > 0 ? z : slope * z;
        double h = gain * (a - mean) / std::sqrt(var + 1e-5) + bias;
        CHECK(d.drop_mask(i, 0) == 1.0);  // no dropout outside training
        CHECK(tape.val(d.scores)(i, 0) == doctest::Approx(1.0 / (1.0 + std::exp(-h))));
    }
}

TEST_CASE("training mode uses batch statistics of the activations") {
    Rng rng(13);
    Mat x = rng.xavier_uniform(16, 4);
    Mat w = rng.xavier_uniform(4, 1);
    ad::Tape tape;
    Rng drop(2);
    auto d = discriminator_forward(tape, tape.constant(x), tape.constant(w),
                                   tape.constant(Mat(1, 1)), tape.constant(Mat(1, 1, 1.0)),
                                   tape.constant(Mat(1, 1)), 0.01, 0.0, true, 99.0, 99.0, drop);
    // recompute the statistics directly from the activations
    double mean = 0.0, var = 0.0;
    std::vector<double> acts;
    for (std::size_t i = 0; i < 16; ++i) {
        double z = dot_rows(x, i, transpose(w), 0);
        acts.push_back(z > 0 ? z : 0.01 * z);
        mean += acts.back();
    }
    mean /= 16.0;
    for (double a : acts) var += (a - mean) * (a - mean);
    var /= 16.0;
    CHECK(d.batch_mean == doctest::Approx(mean));
    CHECK(d.batch_var == doctest::Approx(var));
}

TEST_CASE("closed-form input gradient norm matches finite differences of D") {
    Rng rng(17);
    Mat x = rng.xavier_uniform(3, 5);
    Mat w = rng.xavier_uniform(5, 1);
    double b = -0.1, gain = 1.3, bias = 0.4, mean = 0.05, var = 1.5, slope = 0.01;

    auto score = [&](const Mat& input, std::size_t row) {
        ad::Tape tape;
        Rng drop(1);
        auto d = discriminator_forward(tape, tape.constant(input), tape.constant(w),
                                       tape.constant(Mat(1, 1, b)), tape.constant(Mat(1, 1, gain)),
                                       tape.constant(Mat(1, 1, bias)), slope, 0.0, false, mean,
                                       var, drop);
        return tape.val(d.scores)(row, 0);
    };

    ad::Tape tape;
    Rng drop(1);
    ad::Var vw = tape.constant(w), vg = tape.constant(Mat(1, 1, gain));
    auto d = discriminator_forward(tape, tape.constant(x), vw, tape.constant(Mat(1, 1, b)), vg,
                                   tape.constant(Mat(1, 1, bias)), slope, 0.0, false, mean, var,
                                   drop);
    ad::Var norm = discriminator_input_grad_norm(tape, d, vw, vg, slope);

    const double h = 1e-6;
    for (std::size_t i = 0; i < 3; ++i) {
        double sq = 0.0;
        for (std::size_t j = 0; j < 5; ++j) {
            Mat xp = x, xm = x;
            xp(i, j) += h;
            xm(i, j) -= h;
            double g = (score(xp, i) - score(xm, i)) / (2.0 * h);
            sq += g * g;
        }
        CHECK(tape.val(norm)(i, 0) == doctest::Approx(std::sqrt(sq)).epsilon(1e-5));
    }
}

TEST_CASE("adversarial loss reports means and its gradient checks out in eval mode") {
    Rng rng(19);
    Mat fake = rng.xavier_uniform(6, 4), real = rng.xavier_uniform(6, 4);
    Mat w0 = rng.xavier_uniform(4, 1);
    TrainingConfig cfg;
    cfg.xi = 10.0;
    cfg.dropout = 0.0;

    auto run = [&](const Mat& w, const Mat& gain, ad::Tape& tape, ad::Var& vw, ad::Var& vgain,
                   bool as_params) {
        vw = as_params ? tape.param(w) : tape.constant(w);
        vgain = as_params ? tape.param(gain) : tape.constant(gain);
        Rng noise(77);
        return adversarial_loss(tape, tape.constant(fake), tape.constant(real), vw,
                                tape.constant(Mat(1, 1, 0.1)), vgain,
                                tape.constant(Mat(1, 1, -0.3)), cfg, false, 0.0, 1.0, noise);
    };

    {
        ad::Tape tape;
        ad::Var a, g;
        auto out = run(w0, Mat(1, 1, 1.2), tape, a, g, false);
        // reported means are the plain averages of the score columns
        CHECK(out.mean_fake >= 0.0);
        CHECK(out.mean_real <= 1.0);
        double base = out.mean_fake - out.mean_real;
        CHECK(tape.val(out.loss)(0, 0) >= base - 1e-12);  // penalty is nonnegative
    }

    auto f = [&](const std::vector<Mat>& p) {
        ad::Tape tape;
        ad::Var a, g;
        auto out = run(p[0], p[1], tape, a, g, false);
        return tape.val(out.loss)(0, 0);
    };
    auto fd = testutil::finite_diff(f, {w0, Mat(1, 1, 1.2)});
    ad::Tape tape;
    ad::Var vw, vgain;
    auto out = run(w0, Mat(1, 1, 1.2), tape, vw, vgain, true);
    tape.backward(out.loss);
    CHECK(testutil::max_rel_err(tape.grad(vw), fd[0]) < 1e-4);
    CHECK(testutil::max_rel_err(tape.grad(vgain), fd[1]) < 1e-4);
}

TEST_CASE("contrastive loss of a perfectly aligned single user is ln 2") {
    Mat u(1, 3);
    u(0, 0) = 0.6;
    u(0, 1) = -0.2;
    u(0, 2) = 0.9;
    ad::Tape tape;
    ad::Var vu = tape.constant(u);
    ad::Var loss = contrastive_loss(tape, vu, {vu}, 1.0);
    CHECK(tape.val(loss)(0, 0) == doctest::Approx(std::log(2.0)));
}

TEST_CASE("contrastive loss matches a brute-force oracle and its gradients") {
    Rng rng(23);
    Mat breve = rng.xavier_uniform(5, 4), xt = rng.xavier_uniform(5, 4),
        xi = rng.xavier_uniform(5, 4);
    double T = 0.7;

    auto oracle = [&](const Mat& bu, const Mat& xm) {
        double total = 0.0;
        for (std::size_t u = 0; u < 5; ++u) {
            double denom = 0.0;
            for (std::size_t v = 0; v < 5; ++v)
                denom += std::exp(cosine(bu, v, xm, u) / T) + std::exp(cosine(xm, v, xm, u) / T);
            total -= cosine(bu, u, xm, u) / T - std::log(denom);
        }
        return total;
    };

    ad::Tape tape;
    ad::Var vb = tape.param(breve), vt = tape.param(xt), vi = tape.constant(xi);
    ad::Var loss = contrastive_loss(tape, vb, {vt, vi}, T);
    CHECK(tape.val(loss)(0, 0) == doctest::Approx(oracle(breve, xt) + oracle(breve, xi)));

    auto f = [&](const std::vector<Mat>& p) {
        ad::Tape t2;
        return t2.val(contrastive_loss(t2, t2.constant(p[0]), {t2.constant(p[1]), t2.constant(xi)},
                                       T))(0, 0);
    };
    auto fd = testutil::finite_diff(f, {breve, xt});
    tape.backward(loss);
    CHECK(testutil::max_rel_err(tape.grad(vb), fd[0]) < 1e-4);
    CHECK(testutil::max_rel_err(tape.grad(vt), fd[1]) < 1e-4);
}

TEST_CASE("kg triplet loss is n ln 2 when corrupted tails equal the true tails") {
    Rng rng(29);
    Mat ents = rng.xavier_uniform(6, 3), rels = rng.xavier_uniform(2, 3);
    std::vector<Mat> rw{rng.xavier_uniform(3, 3), rng.xavier_uniform(3, 3)};
    std::vector<KgQuad> quads{{0, 0, 1, 1}, {2, 1, 3, 3}, {4, 0, 5, 5}};
    ad::Tape tape;
    std::vector<ad::Var> vrw{tape.constant(rw[0]), tape.constant(rw[1])};
    ad::Var loss =
        kg_triplet_loss(tape, tape.constant(ents), tape.constant(rels), vrw, quads);
    CHECK(tape.val(loss)(0, 0) == doctest::Approx(3.0 * std::log(2.0)));
}

TEST_CASE("kg triplet loss gradient matches finite differences") {
    Rng rng(31);
    Mat ents = rng.xavier_uniform(6, 3), rels = rng.xavier_uniform(2, 3);
    std::vector<Mat> rw{rng.xavier_uniform(3, 3), rng.xavier_uniform(3, 3)};
    std::vector<KgQuad> quads{{0, 0, 1, 2}, {2, 1, 3, 5}, {4, 0, 5, 1}, {1, 1, 0, 4}};

    auto f = [&](const std::vector<Mat>& p) {
        ad::Tape t2;
        std::vector<ad::Var> vrw{t2.constant(p[2]), t2.constant(rw[1])};
        return t2.val(
            kg_triplet_loss(t2, t2.constant(p[0]), t2.constant(p[1]), vrw, quads))(0, 0);
    };
    auto fd = testutil::finite_diff(f, {ents, rels, rw[0]});

    ad::Tape tape;
    ad::Var ve = tape.param(ents), vr = tape.param(rels), v0 = tape.param(rw[0]);
    std::vector<ad::Var> vrw{v0, tape.constant(rw[1])};
    tape.backward(kg_triplet_loss(tape, ve, vr, vrw, quads));
    CHECK(testutil::max_rel_err(tape.grad(ve), fd[0]) < 1e-4);
    CHECK(testutil::max_rel_err(tape.grad(vr), fd[1]) < 1e-4);
    CHECK(testutil::max_rel_err(tape.grad(v0), fd[2]) < 1e-4);
}

TEST_CASE("bpr loss is n ln 2 at equal scores and its gradient checks out") {
    Rng rng(37);
    Mat users = rng.xavier_uniform(4, 3), items = rng.xavier_uniform(6, 3);
    {
        std::vector<BprTriplet> same{{0, 2, 2}, {1, 4, 4}};
        ad::Tape tape;
        ad::Var loss = bpr_loss(tape, tape.constant(users), tape.constant(items), same);
        CHECK(tape.val(loss)(0, 0) == doctest::Approx(2.0 * std::log(2.0)));
    }
    std::vector<BprTriplet> trip{{0, 1, 2}, {1, 0, 3}, {3, 5, 4}};
    auto f = [&](const std::vector<Mat>& p) {
        ad::Tape t2;
        return t2.val(bpr_loss(t2, t2.constant(p[0]), t2.constant(p[1]), trip))(0, 0);
    };
    auto fd = testutil::finite_diff(f, {users, items});
    ad::Tape tape;
    ad::Var vu = tape.param(users), vi = tape.param(items);
    tape.backward(bpr_loss(tape, vu, vi, trip));
    CHECK(testutil::max_rel_err(tape.grad(vu), fd[0]) < 1e-4);
    CHECK(testutil::max_rel_err(tape.grad(vi), fd[1]) < 1e-4);
}

TEST_CASE("l2 penalty sums squares of the selected trainable parameters only") {
    Rng rng(41);
    Mat a = rng.xavier_uniform(2, 3), b = rng.xavier_uniform(3, 1);
    ad::Tape tape;
    ParamVars pv;
    pv.vars.emplace("alpha", tape.param(a));
    pv.vars.emplace("beta", tape.param(b));
    pv.vars.emplace("frozen", tape.constant(a));
    ad::Var pen = l2_penalty(tape, pv, [](const std::string& n) { return n != "beta"; });
    double expect = 0.0;
    for (double v : a.raw()) expect += v * v;
    CHECK(tape.val(pen)(0, 0) == doctest::Approx(expect));
}
