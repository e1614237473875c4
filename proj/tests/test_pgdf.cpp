#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "shadowcert/pgdf.hpp"

using namespace shadowcert;

namespace {

PgdfObstacle square_obstacle(double sigma_scale) {
  SymMatrix s = SymMatrix::identity(3) * sigma_scale;
  return PgdfObstacle("sq", {GaussianFace(HomoVec(1.0, 0.0, -1.0), s),
                             GaussianFace(HomoVec(-1.0, 0.0, -1.0), s),
                             GaussianFace(HomoVec(0.0, 1.0, -1.0), s),
                             GaussianFace(HomoVec(0.0, -1.0, -1.0), s)});
}

}  // namespace

TEST_CASE("sample_obstacle with zero covariance reproduces the means") {
  PgdfObstacle o = square_obstacle(0.0);
  RngStream rng(5);
  SampledObstacle s = sample_obstacle(o, rng);
  REQUIRE(s.normals.size() == 4);
  for (size_t f = 0; f < 4; ++f) CHECK(s.normals[f].coords == o.faces[f].mu.coords);
  // and the sampled polytope is exactly the mean square
  CHECK(point_in_polytope(Point(0.0, 0.0), s.normals));
  CHECK(point_in_polytope(Point(1.0, 1.0), s.normals));
  CHECK_FALSE(point_in_polytope(Point(1.0000001, 0.0), s.normals));
}

TEST_CASE("sample_obstacle replays under a fixed seed") {
  PgdfObstacle o = square_obstacle(0.01);
  RngStream r1(77), r2(77);
  SampledObstacle a = sample_obstacle(o, r1), b = sample_obstacle(o, r2);
  for (size_t f = 0; f < 4; ++f) REQUIRE(a.normals[f].coords == b.normals[f].coords);
}

TEST_CASE("face sample means satisfy a CLT bound") {
  PgdfObstacle o = square_obstacle(0.04);
  ObstacleSampler sampler(o);
  RngStream rng(1234);
  const int n = 100000;
  std::vector<Vec> sums(4, Vec(3));
  for (int t = 0; t < n; ++t) {
    SampledObstacle s = sampler.sample(rng);
    for (size_t f = 0; f < 4; ++f) sums[f] = sums[f] + s.normals[f].coords;
  }
  double tol = 4.0 * std::sqrt(0.04 / n);
  for (size_t f = 0; f < 4; ++f)
    for (int i = 0; i < 3; ++i)
      CHECK(sums[f][i] / n == Catch::Approx(o.faces[f].mu[i]).margin(tol));
}

TEST_CASE("joint covariance coupling is honored by the sampler") {
  // Two faces, perfectly correlated first coordinates.
  SymMatrix s(3);
  s.at(0, 0) = 0.04;
  PgdfObstacle o("j", {GaussianFace(HomoVec(1.0, 0.0, -1.0), s),
                       GaussianFace(HomoVec(-1.0, 0.0, -1.0), s)});
  JointCovariance jc;
  jc.dim = 6;
  jc.entries.assign(36, 0.0);
  jc.entries[0 * 6 + 0] = 0.04;
  jc.entries[3 * 6 + 3] = 0.04;
  jc.entries[0 * 6 + 3] = 0.04;
  jc.entries[3 * 6 + 0] = 0.04;
  o.joint = jc;
  o.validate();
  RngStream rng(9);
  for (int t = 0; t < 200; ++t) {
    SampledObstacle smp = sample_obstacle(o, rng);
    double d0 = smp.normals[0][0] - 1.0;
    double d1 = smp.normals[1][0] - (-1.0);
    REQUIRE(d0 == Catch::Approx(d1).margin(1e-12));
  }
}

TEST_CASE("halfspace_in_cone closed form") {
  SymMatrix iso = SymMatrix::identity(3) * 0.01;
  GaussianFace face(HomoVec(1.0, 0.0, -1.0), iso);

  SECTION("the mean is in its own cone at any radius") {
    CHECK(halfspace_in_cone(face.mu, face, 0.0));
    CHECK(halfspace_in_cone(HomoVec(2.0, 0.0, -2.0), face, 0.0));  // positive scaling
  }

  SECTION("the antipodal direction clamps lambda and evaluates at the origin") {
    GaussianFace f1(HomoVec(1.0, 0.0, -1.0), SymMatrix::identity(3));
    // lambda* = -1 clamps to 0; value = mu^T mu = 2 > q
    CHECK_FALSE(halfspace_in_cone(HomoVec(-1.0, 0.0, 1.0), f1, 1.9));
    CHECK(halfspace_in_cone(HomoVec(-1.0, 0.0, 1.0), f1, 2.1));
  }

  SECTION("worked example against numeric minimization over lambda") {
    HomoVec n(1.1, 0.05, -0.95);
    CHECK(halfspace_in_cone(n, face, 7.8147));
    // independent oracle: dense scan over lambda
    double best = 1e300;
    for (int i = 1; i <= 1000000; ++i) {
      double lam = 3.0 * i / 1000000.0;
      Vec d = n.coords * lam - face.mu.coords;
      best = std::min(best, d.norm2() * 100.0);
    }
    CHECK(best == Catch::Approx(1.3002364066193863).epsilon(1e-6));
    CHECK((best <= 7.8147) == halfspace_in_cone(n, face, 7.8147));
    CHECK_FALSE(halfspace_in_cone(n, face, 1.29));
  }

  SECTION("singular covariance needs the null component to match") {
    SymMatrix off(3);
    off.at(2, 2) = 0.01;  // uncertainty only in the offset coordinate
    GaussianFace f(HomoVec(0.0, 1.0, -1.0), off);
    CHECK(halfspace_in_cone(HomoVec(0.0, 1.0, -0.9), f, 110.0));
    CHECK_FALSE(halfspace_in_cone(HomoVec(0.0, 1.0, -2.2), f, 110.0));
    // spatial tilt cannot be matched by any lambda
    CHECK_FALSE(halfspace_in_cone(HomoVec(0.1, 1.0, -1.0), f, 110.0));
    // positive rescaling of a reachable halfspace stays reachable
    CHECK(halfspace_in_cone(HomoVec(0.0, 3.0, -2.7), f, 110.0));
  }
}

TEST_CASE("coverage link: cone containment frequency is at least 1 - eps") {
  PgdfObstacle o = square_obstacle(0.0016);
  const GaussianFace& face = o.faces[2];
  FaceConeTester tester(face);
  for (double eps : {0.5, 0.1, 0.05, 0.01}) {
    double q = chi2_quantile(1.0 - eps, 3);
    RngStream rng(5000 + static_cast<uint64_t>(eps * 1000));
    const int n = 100000;
    int in = 0;
    for (int t = 0; t < n; ++t)
      if (tester.contains(sample_gaussian(face.mu, face.sigma, rng), q)) ++in;
    double freq = static_cast<double>(in) / n;
    INFO("eps = " << eps << " freq = " << freq);
    CHECK(freq >= 1.0 - eps);
  }
}

TEST_CASE("fit_face conjugate posterior") {
  SymMatrix broad = SymMatrix::identity(3) * 0.25;
  GaussianFace prior(HomoVec(0.9, 0.05, -0.8), broad);

  SECTION("empty cloud returns the prior unchanged") {
    FacePointCloud cloud{{}, 0.1, prior};
    GaussianFace post = fit_face(cloud);
    CHECK(post.mu.coords == prior.mu.coords);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) CHECK(post.sigma.at(i, j) == prior.sigma.at(i, j));
  }

  SECTION("noiseless points on the plane x = 1 recover (1, 0, -1)") {
    FacePointCloud cloud;
    cloud.noise_sd = 0.01;
    cloud.prior = prior;
    for (int i = 0; i < 10000; ++i) cloud.points.push_back(Point(1.0, -3.0 + 6.0 * i / 9999.0));
    GaussianFace post = fit_face(cloud);
    // angular error of the direction against (1, 0, -1)/sqrt(2)
    Vec target{1.0, 0.0, -1.0};
    double cosang = post.mu.coords.dot(target) / (post.mu.coords.norm() * target.norm());
    CHECK(std::acos(std::min(1.0, cosang)) < 1e-3);
    CHECK(post.sigma.trace() <= prior.sigma.trace());
  }

  SECTION("posterior precision adds prior and data precision") {
    // Gauge is coordinate 0 (|0.9| largest); free coordinates are 1, 2.
    FacePointCloud cloud;
    cloud.noise_sd = 0.3;
    cloud.prior = prior;
    RngStream rng(42);
    for (int i = 0; i < 50; ++i)
      cloud.points.push_back(Point(rng.normal(), rng.normal()));
    GaussianFace post = fit_face(cloud);

    // Independent computation of both sides on the free block.
    double s0_inv[2][2] = {{1.0 / 0.25, 0.0}, {0.0, 1.0 / 0.25}};
    double data[2][2] = {};
    for (const Point& p : cloud.points) {
      double phi[2] = {p[1], 1.0};  // free coords of (x, y, 1) are (y, 1)
      for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) data[i][j] += phi[i] * phi[j] / (0.3 * 0.3);
    }
    // invert the posterior free-block covariance
    double a = post.sigma.at(1, 1), b = post.sigma.at(1, 2), d = post.sigma.at(2, 2);
    double det = a * d - b * b;
    double prec[2][2] = {{d / det, -b / det}, {-b / det, a / det}};
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j)
        CHECK(prec[i][j] == Catch::Approx(s0_inv[i][j] + data[i][j]).epsilon(1e-9));
  }

  SECTION("doubling the noise never shrinks posterior variances") {
    FacePointCloud cloud;
    cloud.prior = prior;
    RngStream rng(43);
    for (int i = 0; i < 200; ++i)
      cloud.points.push_back(Point(1.0 + 0.05 * rng.normal(), 4.0 * rng.uniform() - 2.0));
    cloud.noise_sd = 0.05;
    GaussianFace tight = fit_face(cloud);
    cloud.noise_sd = 0.1;
    GaussianFace loose = fit_face(cloud);
    for (int i = 0; i < 3; ++i)
      CHECK(loose.sigma.at(i, i) >= tight.sigma.at(i, i) - 1e-12);
  }

  SECTION("independent conjugate-posterior oracle") {
    // Small case computed by the textbook formula directly in the test.
    GaussianFace pr(HomoVec(0.0, 1.0, -0.5), SymMatrix::diagonal(Vec{0.09, 0.04, 0.16}));
    FacePointCloud cloud;
    cloud.noise_sd = 0.2;
    cloud.prior = pr;
    cloud.points = {Point(0.3, 1.1), Point(-0.4, 0.9), Point(1.2, 1.05), Point(0.1, 0.95)};
    GaussianFace post = fit_face(cloud);

    // Gauge g = 1 (|1.0| largest); free = (0, 2). Diagonal prior, so the
    // conditional prior equals the marginal. theta = (n_0, n_2), target
    // y_j = -1.0 * x_h[1] = -y_j with design rows (x_j, 1).
    double p0[2][2] = {{1.0 / 0.09, 0.0}, {0.0, 1.0 / 0.16}};
    double m0[2] = {0.0, -0.5};
    double prec[2][2] = {{p0[0][0], 0.0}, {0.0, p0[1][1]}};
    double rhs[2] = {p0[0][0] * m0[0], p0[1][1] * m0[1]};
    for (const Point& p : cloud.points) {
      double phi[2] = {p[0], 1.0};
      double y = -p[1];
      for (int i = 0; i < 2; ++i) {
        rhs[i] += phi[i] * y / 0.04;
        for (int j = 0; j < 2; ++j) prec[i][j] += phi[i] * phi[j] / 0.04;
      }
    }
    double det = prec[0][0] * prec[1][1] - prec[0][1] * prec[1][0];
    double cov[2][2] = {{prec[1][1] / det, -prec[0][1] / det},
                        {-prec[1][0] / det, prec[0][0] / det}};
    double mean[2] = {cov[0][0] * rhs[0] + cov[0][1] * rhs[1],
                      cov[1][0] * rhs[0] + cov[1][1] * rhs[1]};
    CHECK(post.mu[0] == Catch::Approx(mean[0]).epsilon(1e-9));
    CHECK(post.mu[1] == 1.0);
    CHECK(post.mu[2] == Catch::Approx(mean[1]).epsilon(1e-9));
    CHECK(post.sigma.at(0, 0) == Catch::Approx(cov[0][0]).epsilon(1e-9));
    CHECK(post.sigma.at(0, 2) == Catch::Approx(cov[0][1]).epsilon(1e-9).margin(1e-12));
    CHECK(post.sigma.at(2, 2) == Catch::Approx(cov[1][1]).epsilon(1e-9));
    CHECK(post.sigma.at(1, 1) == 0.0);
  }

  SECTION("rejects nonpositive noise") {
    FacePointCloud cloud{{Point(0.0, 0.0)}, 0.0, prior};
    CHECK_THROWS_AS(fit_face(cloud), std::invalid_argument);
  }
}
