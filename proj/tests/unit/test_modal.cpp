#include <gtest/gtest.h>

#include <random>
#include <unsupported/Eigen/MatrixFunctions>

#include "fixtures.hpp"

using namespace modalnadir;

namespace {

double biorthonormality_error(const ModalBasis& b) {
    return (b.w.transpose() * b.v - CMat::Identity(b.size(), b.size())).cwiseAbs().maxCoeff();
}

double residual(const Mat& a, const ModalBasis& b) {
    return (a.cast<Complex>() * b.v - b.v * b.lambda.asDiagonal()).cwiseAbs().maxCoeff();
}

Mat random_stable(std::mt19937& rng, int n) {
    std::normal_distribution<double> g(0.0, 1.0);
    Mat a(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) a(i, j) = g(rng);
    return a - (a.cwiseAbs().rowwise().sum().maxCoeff() + 0.5) * Mat::Identity(n, n);
}

StateLayout three_machine_layout() { return StateLayout(fx::three_machine()); }

}  // namespace

TEST(Eigen, DiagonalMatrix) {
    const Mat a = Vec((Vec(3) << -1.0, -2.0, -5.0).finished()).asDiagonal();
    const ModalBasis b = eigendecompose(a);
    std::vector<double> lam;
    for (Eigen::Index i = 0; i < 3; ++i) {
        EXPECT_EQ(b.lambda(i).imag(), 0.0);
        lam.push_back(b.lambda(i).real());
        EXPECT_NEAR(b.v.col(i).cwiseAbs().maxCoeff(), 1.0, 1e-14);
    }
    std::sort(lam.begin(), lam.end());
    EXPECT_EQ(lam, (std::vector<double>{-5.0, -2.0, -1.0}));
    EXPECT_LT(biorthonormality_error(b), 1e-14);
}

TEST(Eigen, CompanionMatrix) {
    const Mat a = (Mat(2, 2) << 0, 1, -2, -3).finished();
    const ModalBasis b = eigendecompose(a);
    std::vector<double> lam{b.lambda(0).real(), b.lambda(1).real()};
    std::sort(lam.begin(), lam.end());
    EXPECT_NEAR(lam[0], -2.0, 1e-12);
    EXPECT_NEAR(lam[1], -1.0, 1e-12);
    EXPECT_LT(biorthonormality_error(b), 1e-12);
    EXPECT_LT(residual(a, b), 1e-12);
}

TEST(Eigen, RandomMatricesAreBiorthonormal) {
    std::mt19937 rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        const Mat a = random_stable(rng, 4 + trial);
        const ModalBasis b = eigendecompose(a);
        EXPECT_LT(biorthonormality_error(b), 1e-9) << trial;
        EXPECT_LT(residual(a, b), 1e-9 * a.norm()) << trial;
        // conjugate partners
        for (Eigen::Index i = 0; i < b.size(); ++i)
            EXPECT_NEAR(std::abs(b.lambda(b.partner[static_cast<std::size_t>(i)]) - std::conj(b.lambda(i))), 0.0, 1e-10);
    }
}

TEST(Eigen, RepeatedEigenvaluesGetIndependentVectors) {
    std::mt19937 rng(5);
    const Mat t = random_stable(rng, 5) + 20.0 * Mat::Identity(5, 5);
    const Vec d = (Vec(5) << -6.5, -6.5, -6.5, -1.0, -0.3).finished();
    const Mat a = t * d.asDiagonal() * t.inverse();
    const ModalBasis b = eigendecompose(a);
    EXPECT_LT(biorthonormality_error(b), 1e-8);
    EXPECT_LT(residual(a, b), 1e-8);
}

TEST(Eigen, DefectiveMatrixIsRejected) {
    const Mat a = (Mat(3, 3) << -1, 1, 0, 0, -1, 0, 0, 0, -2).finished();
    EXPECT_THROW((void)eigendecompose(a), NumericalError);
}

TEST(Participation, RowsSumToOne) {
    std::mt19937 rng(2);
    const Mat a = random_stable(rng, 12);
    const Mat p = participation_factors(eigendecompose(a));
    for (Eigen::Index i = 0; i < p.rows(); ++i) EXPECT_NEAR(p.row(i).sum(), 1.0, 1e-10);
    EXPECT_GE(p.minCoeff(), 0.0);
}

TEST(Participation, DecoupledStatesParticipateOnlyInTheirMode) {
    const Mat a = Vec((Vec(3) << -1.0, -2.0, -3.0).finished()).asDiagonal();
    const ModalBasis b = eigendecompose(a);
    const Mat p = participation_factors(b);
    for (Eigen::Index i = 0; i < 3; ++i) EXPECT_NEAR(p.row(i).maxCoeff(), 1.0, 1e-14);
}

TEST(ModalResponse, AllModesReproduceTheMatrixExponential) {
    std::mt19937 rng(9);
    const Mat a = random_stable(rng, 8);
    const ModalBasis b = eigendecompose(a);
    const Vec dx0 = Vec::LinSpaced(8, -1.0, 1.0);
    const std::vector<double> times{0.0, 0.1, 0.5, 1.0, 3.0};
    const Mat resp = modal_response(b, dx0, all_modes(b), times);
    for (std::size_t c = 0; c < times.size(); ++c) {
        const Vec oracle = Mat(a * times[c]).exp() * dx0;
        EXPECT_LT(max_abs(resp.col(static_cast<Eigen::Index>(c)) - oracle), 1e-8) << times[c];
    }
}

TEST(ModalResponse, ZeroDeviationGivesZero) {
    std::mt19937 rng(4);
    const ModalBasis b = eigendecompose(random_stable(rng, 6));
    EXPECT_EQ(modal_response(b, Vec::Zero(6), all_modes(b), {0.0, 2.0}).cwiseAbs().maxCoeff(), 0.0);
}

TEST(ModalResponse, HalfAConjugatePairIsRejected) {
    const Mat a = (Mat(2, 2) << -0.1, 2, -2, -0.1).finished();
    const ModalBasis b = eigendecompose(a);
    ModeSet half;
    half.modes = {0};
    half.max_governor_pf = {0.0};
    EXPECT_THROW((void)modal_response(b, Vec::Ones(2), half, {1.0}), NumericalError);
}

TEST(Selection, ThresholdMustBeBelowOne) {
    const Mat a = Vec((Vec(3) << -1.0, -2.0, -3.0).finished()).asDiagonal();
    const ModalBasis b = eigendecompose(a);
    const StateLayout layout = three_machine_layout();
    ModeSelectionOptions opt;
    opt.pf_threshold = 1.0;
    EXPECT_THROW((void)select_modes(b, participation_factors(b), layout, opt), InputError);
}

TEST(Selection, InvariantToEigenvectorScaling) {
    const auto op = prepare_operating_point(fx::ieee39(), 0.5);
    const ModalStudy m = modal_study(op.model, op.state, {});
    ModalBasis scaled = m.basis;
    std::mt19937 rng(1);
    std::uniform_real_distribution<double> u(0.1, 10.0);
    for (Eigen::Index i = 0; i < scaled.size(); ++i) {
        const auto p = scaled.partner[static_cast<std::size_t>(i)];
        if (p < i) continue;
        const Complex c = std::polar(u(rng), u(rng));
        const Complex ci = scaled.is_real(i) ? Complex(c.real()) : c;
        scaled.v.col(i) *= ci;
        scaled.w.col(i) /= ci;
        if (p != i) {
            scaled.v.col(p) *= std::conj(ci);
            scaled.w.col(p) /= std::conj(ci);
        }
    }
    const Mat pf = participation_factors(scaled);
    EXPECT_LT((pf - m.pf).cwiseAbs().maxCoeff(), 1e-9);
    const CoiScreen screen = coi_screen(scaled, reference_deviation(op.model.layout(), m.droops), op.model.layout(), m.weights);
    EXPECT_EQ(select_modes(scaled, pf, op.model.layout(), {}, screen).modes, m.modes.modes);
}

TEST(Selection, FixtureKeepsOneRealModeAndOnePair) {
    const auto op = prepare_operating_point(fx::ieee39(), 0.5);
    const ModalStudy m = modal_study(op.model, op.state, {});
    int real = 0, complex = 0;
    for (auto i : m.modes.modes) (m.basis.is_real(i) ? real : complex)++;
    EXPECT_EQ(real, 1);
    EXPECT_EQ(complex, 2);
    for (auto i : m.modes.modes) EXPECT_LE(std::abs(m.basis.lambda(i)), 10.0);
}

TEST(Selection, EmptySelectionIsAnError) {
    const auto op = prepare_operating_point(fx::ieee39(), 0.5);
    const ModalStudy m = modal_study(op.model, op.state, {});
    ModeSelectionOptions opt;
    opt.slow_cutoff = 1e-3;
    EXPECT_THROW((void)select_modes(m.basis, m.pf, op.model.layout(), opt), NumericalError);
}
