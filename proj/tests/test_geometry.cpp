#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "errors.hpp"
#include "geometry.hpp"
#include "randcore.hpp"

using namespace grassmix;

namespace {

Matrix random_symmetric(int m, RngHandle& rng) {
    Matrix a(m, m);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) a(i, j) = rng.normal();
    return 0.5 * (a + a.transpose());
}

} // namespace

TEST_CASE("encode lays out the upper triangle row-major") {
    Matrix p(2, 2);
    p << 1.5, -0.25, -0.25, 0.75;
    ConwayCoord c = encode(p);
    REQUIRE(c.coords.size() == 3);
    CHECK(c.coords[0] == 1.5);
    CHECK(c.coords[1] == -0.25);
    CHECK(c.coords[2] == 0.75);

    CHECK(encode(Matrix::Zero(2, 2)).coords.isZero(0.0));

    ConwayCoord id = encode(Matrix::Identity(2, 2));
    CHECK(id.coords[0] == 1.0);
    CHECK(id.coords[1] == 0.0);
    CHECK(id.coords[2] == 1.0);
}

TEST_CASE("encode rejects non-symmetric input") {
    Matrix p(2, 2);
    p << 1.0, 0.2, 0.1, 1.0;
    CHECK_THROWS_AS(encode(p), ValidationError);
}

TEST_CASE("decode inverts encode") {
    ConwayCoord c;
    c.ambient = 2;
    c.coords.resize(3);
    c.coords << 1.0, 0.0, 1.0;
    CHECK((decode(c) - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff() == 0.0);

    c.coords << 2.0, -3.0, 5.0;
    Matrix q = decode(c);
    CHECK(q(0, 0) == 2.0);
    CHECK(q(0, 1) == -3.0);
    CHECK(q(1, 0) == -3.0);
    CHECK(q(1, 1) == 5.0);

    ConwayCoord bad;
    bad.coords.resize(4); // not triangular
    CHECK_THROWS_AS(decode(bad), ValidationError);
}

TEST_CASE("encode/decode round trips bit-exactly on random symmetric matrices") {
    RngHandle rng(11);
    for (int trial = 0; trial < 1000; ++trial) {
        int m = 2 + rng.uniform_int(6);
        Matrix p = random_symmetric(m, rng);
        Matrix back = decode(encode(p));
        CHECK((back - p).cwiseAbs().maxCoeff() == 0.0);
        ConwayCoord c;
        c.ambient = m;
        c.coords = rng.standard_normal_vector(conway_length(m));
        ConwayCoord c2 = encode(decode(c));
        CHECK((c2.coords - c.coords).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("nearest_subspace is a fixed point on exact projections") {
    RngHandle rng(12);
    for (int trial = 0; trial < 50; ++trial) {
        int m = 3 + rng.uniform_int(4);
        int d = 1 + rng.uniform_int(m - 1);
        Matrix u = rng.uniform_stiefel(m, d);
        Matrix p = u * u.transpose();
        SubspacePoint s = nearest_subspace(encode(p), 1, m - 1);
        CHECK(s.dim == d);
        CHECK((s.projection - p).cwiseAbs().maxCoeff() < 1e-10);
        s.validate();
    }
}

TEST_CASE("nearest_subspace rounds the trace and keeps top eigenvectors") {
    Matrix q = Matrix::Zero(2, 2);
    q(0, 0) = 0.9;
    q(1, 1) = 0.1;
    SubspacePoint s = nearest_subspace(encode(q), 1, 1);
    CHECK(s.dim == 1);
    Matrix expected = Matrix::Zero(2, 2);
    expected(0, 0) = 1.0;
    CHECK((s.projection - expected).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("nearest_subspace tie-break on equal eigenvalues takes leading axes") {
    Matrix q = 0.6 * Matrix::Identity(3, 3);
    SubspacePoint s = nearest_subspace(encode(q), 1, 2);
    CHECK(s.dim == 2); // trace 1.8 rounds to 2
    Matrix expected = Matrix::Zero(3, 3);
    expected(0, 0) = 1.0;
    expected(1, 1) = 1.0;
    CHECK((s.projection - expected).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("nearest_subspace clamps the dimension") {
    Matrix q = 0.9 * Matrix::Identity(4, 4); // trace 3.6 -> 4, clamped
    SubspacePoint s = nearest_subspace(encode(q), 1, 3);
    CHECK(s.dim == 3);
    Matrix low = Matrix::Zero(3, 3); // trace 0 -> 0, clamped up
    SubspacePoint s2 = nearest_subspace(encode(low), 1, 2);
    CHECK(s2.dim == 1);
    CHECK_THROWS_AS(nearest_subspace(encode(q), 0, 3), ValidationError);
    CHECK_THROWS_AS(nearest_subspace(encode(q), 1, 4), ValidationError);
}

TEST_CASE("principal angles of identical and orthogonal lines") {
    Matrix e1(2, 1), e2(2, 1);
    e1 << 1.0, 0.0;
    e2 << 0.0, 1.0;
    SubspacePoint a = SubspacePoint::from_basis(e1);
    SubspacePoint b = SubspacePoint::from_basis(e2);

    Vector same = principal_angles(a, a);
    CHECK(same.size() == 1);
    CHECK(same[0] == doctest::Approx(0.0).epsilon(1e-12));

    Vector ortho = principal_angles(a, b);
    CHECK(ortho[0] == doctest::Approx(M_PI / 2).epsilon(1e-12));
}

TEST_CASE("projective distance examples") {
    Matrix e1(2, 1), e2(2, 1);
    e1 << 1.0, 0.0;
    e2 << 0.0, 1.0;
    SubspacePoint a = SubspacePoint::from_basis(e1);
    SubspacePoint b = SubspacePoint::from_basis(e2);
    CHECK(projective_distance(a, a) == doctest::Approx(0.0));
    CHECK(projective_distance(a, b) == doctest::Approx(1.0).epsilon(1e-12));

    // A line inside a plane in R^3.
    Matrix line(3, 1);
    line << 1.0, 0.0, 0.0;
    Matrix plane(3, 2);
    plane << 1.0, 0.0, 0.0, 1.0, 0.0, 0.0;
    CHECK(projective_distance(SubspacePoint::from_basis(line), SubspacePoint::from_basis(plane)) ==
          doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-12));
}

TEST_CASE("projective distance equals the sin-angle form for equal dimensions") {
    RngHandle rng(13);
    for (int m = 2; m <= 8; ++m) {
        for (int trial = 0; trial < 1000; ++trial) {
            int d = 1 + rng.uniform_int(m - 1);
            SubspacePoint a = SubspacePoint::from_basis(rng.uniform_stiefel(m, d));
            SubspacePoint b = SubspacePoint::from_basis(rng.uniform_stiefel(m, d));
            Vector angles = principal_angles(a, b);
            double via_angles = std::sqrt(angles.array().sin().square().sum());
            CHECK(std::fabs(projective_distance(a, b) - via_angles) < 1e-8);
        }
    }
}

TEST_CASE("every projection sits on the constant Frobenius shell") {
    RngHandle rng(14);
    for (int m = 2; m <= 8; ++m) {
        for (int trial = 0; trial < 50; ++trial) {
            int d = 1 + rng.uniform_int(m - 1);
            Matrix u = rng.uniform_stiefel(m, d);
            Matrix p = u * u.transpose();
            double shell = (p - 0.5 * Matrix::Identity(m, m)).norm();
            CHECK(std::fabs(shell - std::sqrt(m) / 2.0) < 1e-10);
        }
    }
}

TEST_CASE("orthogonal complement maximizes the projective distance") {
    RngHandle rng(15);
    const int m = 5, d = 2;
    Matrix u = rng.uniform_stiefel(m, d);
    SubspacePoint a = SubspacePoint::from_basis(u);

    // Complement basis via the full orthogonal factor.
    Eigen::HouseholderQR<Matrix> qr(u);
    Matrix full = qr.householderQ() * Matrix::Identity(m, m);
    SubspacePoint comp = SubspacePoint::from_basis(full.rightCols(m - d));
    double comp_dist = projective_distance(a, comp);

    for (int trial = 0; trial < 1000; ++trial) {
        SubspacePoint v = SubspacePoint::from_basis(rng.uniform_stiefel(m, m - d));
        CHECK(projective_distance(a, v) <= comp_dist + 1e-9);
    }
}

TEST_CASE("nearest_subspace at fixed dimension beats random projections") {
    RngHandle rng(16);
    for (int m : {3, 5}) {
        for (int trial = 0; trial < 40; ++trial) {
            Matrix q = random_symmetric(m, rng);
            SubspacePoint s = nearest_subspace(encode(q), 1, m - 1);
            double best = (q - s.projection).norm();
            for (int rival = 0; rival < 300; ++rival) {
                Matrix u = rng.uniform_stiefel(m, s.dim);
                double alt = (q - u * u.transpose()).norm();
                CHECK(best <= alt + 1e-9);
            }
        }
    }
}

TEST_CASE("basis_from_projection recovers an orthonormal basis") {
    Matrix p = Matrix::Zero(3, 3);
    p(0, 0) = 1.0;
    Matrix b = basis_from_projection(p, 1);
    CHECK(b.rows() == 3);
    CHECK(b.cols() == 1);
    CHECK(b(0, 0) == doctest::Approx(1.0));
    CHECK(std::fabs(b(1, 0)) < 1e-12);

    Matrix p2 = Matrix::Zero(3, 3);
    p2(0, 0) = 1.0;
    p2(1, 1) = 1.0;
    Matrix b2 = basis_from_projection(p2, 2);
    CHECK((b2 * b2.transpose() - p2).cwiseAbs().maxCoeff() < 1e-8);

    RngHandle rng(17);
    for (int trial = 0; trial < 100; ++trial) {
        int m = 3 + rng.uniform_int(4);
        int d = 1 + rng.uniform_int(m - 1);
        Matrix u = rng.uniform_stiefel(m, d);
        Matrix proj = u * u.transpose();
        Matrix rec = basis_from_projection(proj, d);
        CHECK((rec * rec.transpose() - proj).cwiseAbs().maxCoeff() < 1e-8);
    }

    CHECK_THROWS_AS(basis_from_projection(p2, 1), ValidationError); // trace mismatch
    Matrix not_proj = 0.5 * Matrix::Identity(2, 2);
    CHECK_THROWS_AS(basis_from_projection(not_proj, 1), ValidationError);
}

TEST_CASE("sphere spec constants") {
    for (int m : {2, 3, 5}) {
        SphereSpec sph = SphereSpec::standard(m);
        CHECK(sph.radius == doctest::Approx(std::sqrt(m * (m + 1) / 8.0)));
        Matrix back = decode(sph.center);
        CHECK((back - 0.5 * Matrix::Identity(m, m)).cwiseAbs().maxCoeff() == 0.0);

        SphereSpec alt = SphereSpec::identity_centered(m);
        CHECK((decode(alt.center) - Matrix::Identity(m, m)).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("subspace invariant validation catches corruption") {
    Matrix u(3, 1);
    u << 1.0, 0.0, 0.0;
    SubspacePoint s = SubspacePoint::from_basis(u);
    s.validate();
    s.projection(0, 1) = 0.5;
    CHECK_THROWS_AS(s.validate(), ValidationError);

    Matrix skew(3, 2);
    skew << 1.0, 1.0, 0.0, 1.0, 0.0, 0.0;
    CHECK_THROWS_AS(SubspacePoint::from_basis(skew), ValidationError);
}
