#include "doctest.h"

#include <cmath>

#include "analogion/errors.hpp"
#include "analogion/objective.hpp"

using namespace analogion;

namespace {

WordVector vec(std::initializer_list<double> xs) {
  WordVector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

double brute_cos(const WordVector& x, const WordVector& y) {
  double dot = 0, nx = 0, ny = 0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    dot += x[i] * y[i];
    nx += x[i] * x[i];
    ny += y[i] * y[i];
  }
  return dot / std::sqrt(nx * ny);
}

WordVector random_vec(Rng& rng, int n) {
  WordVector v(n);
  for (int i = 0; i < n; ++i) v[i] = rng.normal();
  return v;
}

AnalogyQuad quad(std::string a, std::string b, std::string c, std::string d, bool label) {
  return AnalogyQuad{"q", std::move(a), std::move(b), std::move(c), std::move(d), label, Source::SAT, {}, {}};
}

// Relative error with an absolute floor for near-zero entries.
double rel_err(double a, double b) { return std::abs(a - b) / std::max(1e-6, std::max(std::abs(a), std::abs(b))); }

}  // namespace

TEST_CASE("offset_score") {
  SUBCASE("parallel offsets") {
    CHECK(offset_score(vec({1, 0}), vec({0, 0}), vec({2, 1}), vec({1, 1}), OffsetVariant::AB).value ==
          doctest::Approx(1.0));
  }
  SUBCASE("orthogonal offsets") {
    CHECK(offset_score(vec({1, 0}), vec({0, 0}), vec({1, 1}), vec({1, 0}), OffsetVariant::AB).value ==
          doctest::Approx(0.0));
  }
  SUBCASE("matches brute-force cosine on random 5-d quads") {
    Rng rng(5);
    for (int t = 0; t < 100; ++t) {
      const auto a = random_vec(rng, 5), b = random_vec(rng, 5), c = random_vec(rng, 5), d = random_vec(rng, 5);
      CHECK(std::abs(offset_score(a, b, c, d, OffsetVariant::AB).value - brute_cos(a - b, c - d)) < 1e-12);
      CHECK(std::abs(offset_score(a, b, c, d, OffsetVariant::AC).value - brute_cos(a - c, b - d)) < 1e-12);
    }
  }
  SUBCASE("AC on a quad equals AB on permutation 5") {
    Rng rng(6);
    for (int t = 0; t < 100; ++t) {
      const auto a = random_vec(rng, 4), b = random_vec(rng, 4), c = random_vec(rng, 4), d = random_vec(rng, 4);
      // permutation 5 maps (a, b, c, d) to (a, c, b, d)
      CHECK(std::abs(offset_score(a, b, c, d, OffsetVariant::AC).value -
                     offset_score(a, c, b, d, OffsetVariant::AB).value) < 1e-12);
    }
  }
  SUBCASE("zero difference is degenerate") {
    const auto s = offset_score(vec({1, 2}), vec({1, 2}), vec({0, 1}), vec({1, 0}), OffsetVariant::AB);
    CHECK(s.value == 0.0);
    CHECK(s.degenerate);
  }
}

TEST_CASE("cosine_embedding_loss") {
  const auto x = vec({0.3, -1.2, 2.0});
  SUBCASE("examples") {
    CHECK(cosine_embedding_loss(x, x, PairLabel{1}, 0.0).loss == doctest::Approx(0.0));
    CHECK(cosine_embedding_loss(vec({1, 0}), vec({0, 3}), PairLabel{-1}, 0.0).loss == 0.0);
    CHECK(cosine_embedding_loss(x, x, PairLabel{-1}, 0.0).loss == doctest::Approx(1.0));
  }
  SUBCASE("zero vector") {
    const auto l = cosine_embedding_loss(WordVector::Zero(3), x, PairLabel{1}, 0.0);
    CHECK(l.loss == 1.0);
    CHECK(l.degenerate);
  }
  SUBCASE("range, zero set and scale invariance") {
    Rng rng(8);
    for (int t = 0; t < 500; ++t) {
      const auto a = random_vec(rng, 4), b = random_vec(rng, 4);
      const double lambda = 0.01 + 10.0 * rng.uniform();
      for (int y : {1, -1}) {
        const double l = cosine_embedding_loss(a, b, PairLabel{y}, 0.0).loss;
        CHECK(l >= 0.0);
        CHECK(l <= 2.0);
        CHECK(std::abs(cosine_embedding_loss(lambda * a, b, PairLabel{y}, 0.0).loss - l) < 1e-12);
        if (y < 0) CHECK((l == 0.0) == (brute_cos(a, b) <= 0.0));
      }
    }
  }
  SUBCASE("gradient matches central differences away from the kink") {
    Rng rng(9);
    int checked = 0;
    while (checked < 100) {
      const auto x1 = random_vec(rng, 6), x2 = random_vec(rng, 6);
      const int y = rng.uniform_index(2) ? 1 : -1;
      const double margin = y > 0 ? 0.0 : 0.4 * rng.uniform() - 0.2;
      if (y < 0 && std::abs(brute_cos(x1, x2) - margin) < 1e-3) continue;
      const auto g = cosine_embedding_loss_grad(x1, x2, PairLabel{y}, margin);
      const double h = 1e-6;
      for (int i = 0; i < 6; ++i) {
        WordVector p = x1, m = x1;
        p[i] += h;
        m[i] -= h;
        const double fd =
            (cosine_embedding_loss(p, x2, PairLabel{y}, margin).loss - cosine_embedding_loss(m, x2, PairLabel{y}, margin).loss) /
            (2 * h);
        CHECK(rel_err(fd, g.d_x1[i]) < 1e-4);
        WordVector p2 = x2, m2 = x2;
        p2[i] += h;
        m2[i] -= h;
        const double fd2 =
            (cosine_embedding_loss(x1, p2, PairLabel{y}, margin).loss - cosine_embedding_loss(x1, m2, PairLabel{y}, margin).loss) /
            (2 * h);
        CHECK(rel_err(fd2, g.d_x2[i]) < 1e-4);
      }
      ++checked;
    }
  }
  SUBCASE("hinge subgradient at the kink is zero") {
    const auto g = cosine_embedding_loss_grad(vec({1, 0}), vec({0, 1}), PairLabel{-1}, 0.0);
    CHECK(g.d_x1.isZero(0.0));
    CHECK(g.d_x2.isZero(0.0));
  }
  SUBCASE("margin bounds") {
    LossConfig ok{0.5, OffsetVariant::AB};
    CHECK_NOTHROW(ok.validate());
    LossConfig bad{1.5, OffsetVariant::AB};
    CHECK_THROWS_AS(bad.validate(), ConfigError);
  }
}

TEST_CASE("batch_objective") {
  auto toy = make_contextual_backend("toy:dim=3,seed=2,context=0.5");
  SUBCASE("empty batch") { CHECK_THROWS_AS(batch_objective({}, *toy, ObjectiveKind::offset_ab), ValidationError); }
  SUBCASE("duplicated batch has the single-quad loss") {
    const auto q = quad("sun", "planet", "nucleus", "electron", true);
    const auto one = batch_objective({&q}, *toy, ObjectiveKind::offset_ab);
    const auto two = batch_objective({&q, &q}, *toy, ObjectiveKind::offset_ab);
    CHECK(std::abs(one.loss - two.loss) < 1e-15);
    CHECK((one.gradient - two.gradient).norm() < 1e-12);
  }
  SUBCASE("satisfied positive has zero loss and zero gradient") {
    // Identical pairs give identical offsets: cos = 1.
    const auto q = quad("sun", "planet", "sun", "planet", true);
    const auto r = batch_objective({&q}, *toy, ObjectiveKind::offset_ab);
    CHECK(r.loss == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(r.gradient.norm() < 1e-9);
  }
  SUBCASE("parameter gradients match central differences") {
    const std::vector<AnalogyQuad> quads{quad("sun", "planet", "nucleus", "electron", true),
                                         quad("road", "traveler", "life", "person", false),
                                         quad("electromagnetism", "coil", "solar system", "orbit", true)};
    std::vector<const AnalogyQuad*> batch;
    for (const auto& q : quads) batch.push_back(&q);
    for (auto kind : {ObjectiveKind::offset_ab, ObjectiveKind::offset_ac}) {
      auto backend = make_contextual_backend("toy:dim=3,seed=4,context=0.5", true);
      const auto r = batch_objective(batch, *backend, kind);
      auto& params = backend->parameters();
      for (Eigen::Index i = 0; i < params.size(); ++i) {
        const double keep = params[i];
        const double h = 1e-6;
        params[i] = keep + h;
        const double up = batch_objective(batch, *backend, kind).loss;
        params[i] = keep - h;
        const double down = batch_objective(batch, *backend, kind).loss;
        params[i] = keep;
        CHECK(rel_err((up - down) / (2 * h), r.gradient[i]) < 1e-4);
      }
    }
  }
  SUBCASE("classifier gradients match central differences") {
    auto backend = make_contextual_backend("toy:dim=3,seed=4,context=0.5", false, true);
    Rng rng(3);
    for (Eigen::Index i = 0; i < backend->parameters().size(); ++i) backend->parameters()[i] += 0.3 * rng.normal();
    const auto q1 = quad("sun", "planet", "nucleus", "electron", true);
    const auto q2 = quad("road", "traveler", "life", "person", false);
    const std::vector<const AnalogyQuad*> batch{&q1, &q2};
    const auto r = batch_objective(batch, *backend, ObjectiveKind::simple_classifier);
    auto& params = backend->parameters();
    for (Eigen::Index i = 0; i < params.size(); ++i) {
      const double keep = params[i];
      const double h = 1e-6;
      params[i] = keep + h;
      const double up = batch_objective(batch, *backend, ObjectiveKind::simple_classifier).loss;
      params[i] = keep - h;
      const double down = batch_objective(batch, *backend, ObjectiveKind::simple_classifier).loss;
      params[i] = keep;
      CHECK(rel_err((up - down) / (2 * h), r.gradient[i]) < 1e-4);
    }
  }
  SUBCASE("frozen groups get no gradient") {
    auto backend = make_contextual_backend("toy:dim=3,seed=4", true);
    backend->set_trainable("backbone", false);
    const auto q = quad("sun", "planet", "nucleus", "electron", true);
    const auto r = batch_objective({&q}, *backend, ObjectiveKind::offset_ab);
    const auto* g = backend->group("backbone");
    CHECK(r.gradient.segment(static_cast<Eigen::Index>(g->offset), static_cast<Eigen::Index>(g->size)).isZero(0.0));
    CHECK(r.gradient.norm() > 0.0);
  }
}

TEST_CASE("concat_classifier_score") {
  auto stub = make_contextual_backend("stub:dim=4,seed=7", false, true);
  const auto q = quad("sun", "planet", "nucleus", "electron", true);
  SUBCASE("zero head gives one half") { CHECK(concat_classifier_score(*stub, q) == 0.5); }
  SUBCASE("fixed head matches a hand-computed forward pass") {
    const auto* g = stub->group("head");
    REQUIRE(g != nullptr);
    auto& p = stub->parameters();
    // Column-major 2x4 head then 2 biases.
    const double H[2][4] = {{0.5, -1.0, 0.25, 2.0}, {-0.75, 0.5, 1.5, -0.5}};
    for (int r = 0; r < 2; ++r)
      for (int c = 0; c < 4; ++c) p[static_cast<Eigen::Index>(g->offset) + c * 2 + r] = H[r][c];
    p[static_cast<Eigen::Index>(g->offset) + 8] = 0.1;
    p[static_cast<Eigen::Index>(g->offset) + 9] = -0.2;
    const auto cls = HashedTokenFeatures(7, 4).features("[CLS]");
    double l0 = 0.1, l1 = -0.2;
    for (int c = 0; c < 4; ++c) {
      l0 += H[0][c] * cls[c];
      l1 += H[1][c] * cls[c];
    }
    const double expected = 1.0 / (1.0 + std::exp(l0 - l1));
    const double s = concat_classifier_score(*stub, q);
    CHECK(std::abs(s - expected) < 1e-12);
    CHECK(s >= 0.0);
    CHECK(s <= 1.0);
  }
  SUBCASE("length limit is an error") {
    auto small = make_contextual_backend("stub:dim=4,maxlen=8", false, true);
    const auto long_quad = quad("solar system", "planet", "nucleus", "electron", true);
    CHECK_THROWS_AS(concat_classifier_score(*small, long_quad), SequenceTooLongError);
  }
}
