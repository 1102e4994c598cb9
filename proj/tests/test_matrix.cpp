#include "oracles.hpp"
#include "tipvol/matrix.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace tipvol;

namespace {

DenseMatrix random_matrix(Index r, Index c, std::mt19937_64& rng) {
    std::normal_distribution<double> nd;
    DenseMatrix m(r, c);
    for (Index i = 0; i < r; ++i)
        for (Index j = 0; j < c; ++j) m(i, j) = nd(rng);
    return m;
}

DenseMatrix random_symmetric(Index n, std::mt19937_64& rng) {
    DenseMatrix a = random_matrix(n, n, rng);
    return 0.5 * (a + a.transpose());
}

oracle::Mat to_nested(const DenseMatrix& m) {
    oracle::Mat out = oracle::zeros(static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols()));
    for (Index i = 0; i < m.rows(); ++i)
        for (Index j = 0; j < m.cols(); ++j) out[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = m(i, j);
    return out;
}

} // namespace

TEST(SymEig, MatchesPowerIterationOn8x8) {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        const DenseMatrix a = random_symmetric(8, rng);
        const auto eig = sym_eig(a, 8);
        const auto ref = oracle::power_eigenvalues(to_nested(a), 8);
        for (Index k = 0; k < 8; ++k) EXPECT_NEAR(eig.values(k), ref[static_cast<std::size_t>(k)], 1e-10) << "trial " << trial;
    }
}

TEST(SymEig, RecoversPlantedSpectrum) {
    std::mt19937_64 rng(3);
    const DenseMatrix q = random_matrix(6, 6, rng).householderQr().householderQ();
    Vector d(6);
    d << 5.0, 3.0, 1.0, -0.5, -2.0, -7.0;
    const DenseMatrix a = q * d.asDiagonal() * q.transpose();
    const auto eig = sym_eig(a, 6);
    Vector sorted = d;
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    EXPECT_LT((eig.values - sorted).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(SymEig, VectorsAreOrthonormalEigenvectors) {
    std::mt19937_64 rng(5);
    const DenseMatrix a = random_symmetric(10, rng);
    const auto eig = sym_eig(a, 4);
    ASSERT_EQ(eig.vectors.cols(), 4);
    const DenseMatrix gram = eig.vectors.transpose() * eig.vectors;
    EXPECT_LT((gram - DenseMatrix::Identity(4, 4)).cwiseAbs().maxCoeff(), 1e-12);
    for (Index k = 0; k < 4; ++k) {
        const Vector resid = a * eig.vectors.col(k) - eig.values(k) * eig.vectors.col(k);
        EXPECT_LT(resid.norm(), 1e-11);
    }
    for (Index k = 1; k < 4; ++k) EXPECT_GE(eig.values(k - 1), eig.values(k));
}

TEST(SymEig, RejectsBadInput) {
    DenseMatrix rect(2, 3);
    rect.setOnes();
    EXPECT_THROW(sym_eig(rect, 1), Error);

    DenseMatrix asym(2, 2);
    asym << 1.0, 2.0, 0.0, 1.0;
    try {
        sym_eig(asym, 1);
        FAIL() << "asymmetric input accepted";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::numerical);
    }

    DenseMatrix sym(2, 2);
    sym << 1.0, 0.5, 0.5, 1.0;
    EXPECT_THROW(sym_eig(sym, 3), Error);
}

TEST(SymEig, ReportsNonConvergence) {
    std::mt19937_64 rng(9);
    const DenseMatrix a = random_symmetric(6, rng);
    EXPECT_THROW(sym_eig(a, 2, JacobiOptions{1e-14, 0}), Error);
    EXPECT_NO_THROW(sym_eig(a, 2, JacobiOptions{1e-14, 100}));
}

TEST(SymEig, ZeroMatrix) {
    const auto eig = sym_eig(DenseMatrix::Zero(3, 3), 3);
    EXPECT_EQ(eig.values.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Projection, IdempotentAndSymmetric) {
    std::mt19937_64 rng(21);
    for (Index p : {1, 3, 6}) {
        const DenseMatrix b = random_matrix(20, p, rng);
        const DenseMatrix proj = projection_matrix(b);
        EXPECT_LT((proj * proj - proj).cwiseAbs().maxCoeff(), 1e-10);
        EXPECT_LT((proj - proj.transpose()).cwiseAbs().maxCoeff(), 1e-10);
        EXPECT_NEAR(proj.trace(), static_cast<double>(p), 1e-10);
        EXPECT_LT((proj * b - b).cwiseAbs().maxCoeff(), 1e-10);
    }
}

TEST(Projection, RankDeficientBasisIsNumericalError) {
    DenseMatrix b(5, 2);
    b.col(0) << 1, 2, 3, 4, 5;
    b.col(1) = 2.0 * b.col(0);
    try {
        projection_matrix(b);
        FAIL() << "rank-deficient basis accepted";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::numerical);
        EXPECT_NE(std::string(e.what()).find("cond"), std::string::npos);
    }
}

TEST(LeastSquares, MatchesNormalEquationsOracle) {
    std::mt19937_64 rng(31);
    const DenseMatrix b = random_matrix(40, 5, rng);
    const DenseMatrix y = random_matrix(40, 2, rng);
    const DenseMatrix c = least_squares(b, y);
    const auto nb = to_nested(b);
    for (Index j = 0; j < 2; ++j) {
        std::vector<double> yj(40);
        for (Index i = 0; i < 40; ++i) yj[static_cast<std::size_t>(i)] = y(i, j);
        const auto ref = oracle::normal_equations(nb, yj);
        for (Index k = 0; k < 5; ++k) EXPECT_NEAR(c(k, j), ref[static_cast<std::size_t>(k)], 1e-10);
    }
}

TEST(LeastSquares, RowMismatchThrows) {
    EXPECT_THROW(least_squares(DenseMatrix::Ones(4, 2), DenseMatrix::Ones(3, 1)), Error);
}

TEST(TruncatedSvd, ReconstructsAndIsOrthonormal) {
    std::mt19937_64 rng(41);
    const DenseMatrix m = random_matrix(12, 7, rng);
    const auto svd = truncated_svd(m, 7);
    EXPECT_LT((svd.left * svd.values.asDiagonal() * svd.right.transpose() - m).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_LT((svd.left.transpose() * svd.left - DenseMatrix::Identity(7, 7)).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_LT((svd.right.transpose() * svd.right - DenseMatrix::Identity(7, 7)).cwiseAbs().maxCoeff(), 1e-10);

    const auto wide = truncated_svd(DenseMatrix(m.transpose()), 3);
    EXPECT_LT((wide.values - svd.values.head(3)).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(TruncatedSvd, DominatesRandomCandidates) {
    std::mt19937_64 rng(43);
    const DenseMatrix m = random_matrix(15, 10, rng);
    for (Index r : {1, 2, 3}) {
        const auto svd = truncated_svd(m, r);
        const double best = (m - svd.left * svd.values.asDiagonal() * svd.right.transpose()).norm();
        std::normal_distribution<double> nd;
        for (int c = 0; c < 500; ++c) {
            // Half the candidates are small perturbations of the optimum.
            DenseMatrix cand;
            if (c % 2 == 0) {
                cand = random_matrix(15, r, rng) * random_matrix(r, 10, rng);
            } else {
                const DenseMatrix u = svd.left + 1e-3 * random_matrix(15, r, rng);
                const DenseMatrix v = svd.right + 1e-3 * random_matrix(10, r, rng);
                cand = u * svd.values.asDiagonal() * v.transpose();
            }
            EXPECT_LE(best, (m - cand).norm() + 1e-12);
        }
    }
}

TEST(TruncatedSvd, DropsNullDirections) {
    DenseMatrix m = DenseMatrix::Zero(5, 4);
    m(0, 0) = 2.0;
    const auto svd = truncated_svd(m, 3);
    EXPECT_EQ(svd.values.size(), 1);
    EXPECT_NEAR(svd.values(0), 2.0, 1e-14);
}

TEST(SingularValues, MatchEigen) {
    std::mt19937_64 rng(47);
    const DenseMatrix m = random_matrix(9, 6, rng);
    const Vector s = singular_values(m);
    Eigen::JacobiSVD<Eigen::MatrixXd> ref(m);
    EXPECT_LT((s - ref.singularValues()).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(PseudoInverse, SingularPsd) {
    DenseMatrix g(3, 3);
    g << 2, 2, 0, 2, 2, 0, 0, 0, 1;
    const DenseMatrix p = psd_pseudo_inverse(g);
    EXPECT_LT((g * p * g - g).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((p * g * p - p).cwiseAbs().maxCoeff(), 1e-12);
}
