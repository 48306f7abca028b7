#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "mma/experiments.hpp"
#include "mma/modal.hpp"
#include "mma/oscillation.hpp"

using namespace mma;

namespace {

modal::LinearModel kundur_model() { return modal::linearize(scenario::build_system(exp::bundled("kundur2area_heavy"))); }

}  // namespace

TEST_CASE("eigen-triplets satisfy their defining equations") {
    for (const char* name : {"kundur2area_heavy", "ieee39_mma"}) {
        const auto lin = modal::linearize(scenario::build_system(exp::bundled(name)));
        const auto dec = modal::decompose(lin);
        const MatrixXc a = lin.a.cast<Complex>();
        const double scale = lin.a.norm();
        const MatrixXc r = a * dec.u_right - dec.u_right * dec.lambda.asDiagonal();
        const MatrixXc l = dec.v_left.transpose() * a - dec.lambda.asDiagonal() * dec.v_left.transpose();
        CHECK_MESSAGE(r.norm() / scale < 1e-8, name);
        CHECK_MESSAGE(l.norm() / scale < 1e-8, name);
        const MatrixXc id = dec.v_left.transpose() * dec.u_right;
        CHECK((id - MatrixXc::Identity(id.rows(), id.cols())).norm() < 1e-8);
    }
}

TEST_CASE("participation factors of a mode sum to one") {
    const auto dec = modal::decompose(kundur_model());
    const auto i = modal::least_damped_mode(dec, 0.3, 0.9);
    const auto p = modal::participation_factors(dec, i);
    CHECK(p.maxCoeff() == doctest::Approx(1.0));
    const auto info = modal::mode_info(dec, i);
    CHECK(info.frequency > 0.5);
    CHECK(info.frequency < 0.7);
}

TEST_CASE("impulse response equals the modal sum") {
    dyn::PileParams p;
    const auto lin = modal::linearize(modal::pile_test_system(p, 0.5));
    const auto dec = modal::decompose(lin);
    // Impulse response from x(0) = B.
    const double dt = 1e-4;
    VectorXd x = lin.b.col(0);
    double worst = 0.0;
    for (int k = 0; k <= 100000; ++k) {
        const double t = k * dt;
        if (k % 1000 == 0) {
            for (Eigen::Index o = 0; o < lin.c.rows(); ++o) {
                Complex m{0.0, 0.0};
                for (Eigen::Index i = 0; i < dec.lambda.size(); ++i) m += dec.phi(o, i) * dec.psi(i, 0) * std::exp(dec.lambda[i] * t);
                const double y = lin.c.row(o).dot(x);
                worst = std::max(worst, std::abs(y - m.real()));
            }
        }
        const VectorXd k1 = lin.a * x, k2 = lin.a * (x + 0.5 * dt * k1), k3 = lin.a * (x + 0.5 * dt * k2),
                       k4 = lin.a * (x + dt * k3);
        x += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    CHECK(worst < 1e-6);
}

TEST_CASE("pile calibration hits the targets") {
    const auto cal = modal::calibrate_pile(1.37, 0.2797);
    CHECK(cal.converged);
    CHECK(cal.frequency == doctest::Approx(1.37).epsilon(1e-4));
    CHECK(cal.damping_ratio == doctest::Approx(0.2797).epsilon(1e-4));
}

TEST_CASE("pile eigenvalues ignore a uniform phase-reference shift") {
    dyn::PileParams p;
    const auto sys = modal::pile_test_system(p, 0.5);
    const auto lin = modal::linearize(sys);
    auto shifted = sys;
    const auto off = static_cast<Eigen::Index>(sys.pile_offset());
    shifted.x0[off + 1] += 0.3;  // theta_pll
    shifted.fixed[0].voltage *= std::polar(1.0, 0.3);
    const auto lin2 = modal::linearize(shifted);
    auto spectrum = [](const MatrixXd& a) {
        Eigen::EigenSolver<MatrixXd> es(a);
        std::vector<double> re, mag;
        for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
            re.push_back(es.eigenvalues()[i].real());
            mag.push_back(std::abs(es.eigenvalues()[i]));
        }
        std::sort(re.begin(), re.end());
        std::sort(mag.begin(), mag.end());
        return std::pair{re, mag};
    };
    const auto [ra, ma] = spectrum(lin.a);
    const auto [rb, mb] = spectrum(lin2.a);
    for (std::size_t i = 0; i < ra.size(); ++i) {
        CHECK(ra[i] == doctest::Approx(rb[i]).epsilon(1e-5));
        CHECK(ma[i] == doctest::Approx(mb[i]).epsilon(1e-5));
    }
}

TEST_CASE("serial and parallel sweeps agree") {
    const auto base = exp::bundled("kundur2area_base");
    auto build = [&](double v) { return scenario::build_system(exp::with_overrides(base, {{"pile.base_load", v}})); };
    auto pick = [&](const modal::ModalDecomposition& d) { return scenario::select_mode(d, base.mode); };
    const std::vector<double> values = {0.5, 2.0, 4.0, 8.0};
    const auto s = modal::mode_sweep(build, values, pick, modal::Execution::Serial);
    const auto p = modal::mode_sweep(build, values, pick, modal::Execution::Parallel);
    REQUIRE(s.size() == p.size());
    for (std::size_t i = 0; i < s.size(); ++i) CHECK(s[i].mode.eigenvalue == p[i].mode.eigenvalue);
    CHECK(s.back().mode.damping_ratio < s.front().mode.damping_ratio);
}

TEST_CASE("mac is one for proportional shapes and zero for orthogonal ones") {
    VectorXc a(3), b(3);
    a << Complex(1, 1), Complex(0, 2), Complex(-1, 0);
    b = a * Complex(0.0, -3.0);
    CHECK(modal::mac(a, b) == doctest::Approx(1.0));
    VectorXc c(3), d(3);
    c << 1, 0, 0;
    d << 0, 1, 0;
    CHECK(modal::mac(c, d) == doctest::Approx(0.0));
}
