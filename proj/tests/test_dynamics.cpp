#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "ionsim/dynamics.hpp"

using namespace ionsim;

namespace {

TransmonParams paper_params(double ng = 0.0) {
    TransmonParams p;
    p.ec = two_pi * 0.220;
    p.ej = 110 * p.ec;
    p.ng = ng;
    return p;
}

const double kG = two_pi * 0.120;

DrivenTransmon paper_system(int dim_t = 15) {
    return DrivenTransmon::from_spectrum(diagonalize_transmon(paper_params()), dim_t);
}

}  // namespace

TEST_CASE("effective drive: zero at t = 0, steady amplitude, full-form limit") {
    DriveProtocol p = DriveProtocol::for_target_nbar(100, two_pi * 0.00795, two_pi * 7.515,
                                                     two_pi * 7.5, kG, 300);
    CHECK(effective_drive_envelope(p, 0.0) == doctest::Approx(0.0).epsilon(1e-12));
    p.form = DriveProtocol::Form::full;
    CHECK(std::abs(effective_drive_envelope(p, 0.0)) < 1e-12);

    // long-time amplitude of the simplified form is 2 g eps_d / kappa
    p.form = DriveProtocol::Form::simplified;
    double t_late = 40 / p.kappa;
    double peak = 0;
    for (int k = 0; k < 400; ++k) {
        double t = t_late + k * 1e-4;
        peak = std::max(peak, std::abs(effective_drive_envelope(p, t)));
    }
    CHECK(peak == doctest::Approx(2 * kG * std::sqrt(100.0)).epsilon(1e-3));
    CHECK(p.eps_t_infinity() == doctest::Approx(2 * kG * std::sqrt(100.0)).epsilon(1e-12));

    // at w_d = w_r the full form collapses onto the simplified one
    DriveProtocol q = DriveProtocol::for_target_nbar(50, two_pi * 0.00795, two_pi * 7.5,
                                                     two_pi * 7.5, kG, 300);
    double num = 0, den = 0;
    for (int k = 0; k < 4000; ++k) {
        double t = 5 + k * 0.013;  // mid-ramp through many carrier periods
        q.form = DriveProtocol::Form::full;
        double full = effective_drive_envelope(q, t);
        q.form = DriveProtocol::Form::simplified;
        double simp = effective_drive_envelope(q, t);
        num += (full - simp) * (full - simp);
        den += simp * simp;
    }
    CHECK(std::sqrt(num / den) < 0.02);
}

TEST_CASE("undriven evolution keeps the population constant") {
    DrivenTransmon sys = paper_system(10);
    DriveProtocol p;
    p.epsilon_d = 0;
    p.kappa = two_pi * 0.01;
    p.omega_d = two_pi * 7.515;
    p.omega_r = two_pi * 7.5;
    p.g = kG;
    p.t_final = 10.0;
    TrajectoryRecord rec = evolve_driven_transmon(sys, p, 3, 256, 20);
    for (double pop : rec.population) CHECK(pop == doctest::Approx(3.0).epsilon(1e-10));
}

TEST_CASE("negative detuning ramp ionizes the excited state at nbar ~ 82" *
          doctest::timeout(1200)) {
    DrivenTransmon sys = paper_system();
    DriveProtocol p = DriveProtocol::for_target_nbar(100, two_pi * 0.00795, two_pi * 7.515,
                                                     two_pi * 7.5, kG, 0);
    TrajectoryRecord excited = evolve_driven_transmon(sys, p, 1, 256, 300);
    for (std::size_t k = 0; k < excited.times.size(); ++k) {
        if (excited.nbar[k] < 70) CHECK(excited.population[k] < 2.0);
        if (excited.nbar[k] > 90) CHECK(excited.population[k] > 2.5);
    }

    TrajectoryRecord ground = evolve_driven_transmon(sys, p, 0, 256, 300);
    for (std::size_t k = 0; k < ground.times.size(); ++k)
        if (ground.nbar[k] < 30) CHECK(ground.population[k] < 0.5);
}

TEST_CASE("positive detuning ramp: rapid rise near nbar ~ 6.4" * doctest::timeout(1200)) {
    DrivenTransmon sys = paper_system();
    DriveProtocol p = DriveProtocol::for_target_nbar(30, two_pi * 0.01198, two_pi * 5.267,
                                                     two_pi * 5.3, kG, 0);
    TrajectoryRecord rec = evolve_driven_transmon(sys, p, 1, 256, 300);
    double pop_at_5 = 0, pop_at_9 = 0;
    for (std::size_t k = 0; k < rec.times.size(); ++k) {
        if (rec.nbar[k] < 5.0) pop_at_5 = rec.population[k];
        if (rec.nbar[k] < 9.0) pop_at_9 = rec.population[k];
    }
    CHECK(pop_at_5 < 2.0);
    CHECK(pop_at_9 > pop_at_5 + 1.0);  // sharp growth across the 6.4 crossing
}

TEST_CASE("instantaneous Floquet projections resolve the identity" * doctest::timeout(600)) {
    DrivenTransmon sys = paper_system(12);
    DriveProtocol p = DriveProtocol::for_target_nbar(20, two_pi * 0.05, two_pi * 5.267,
                                                     two_pi * 5.3, kG, 0);
    std::vector<int> all(12);
    for (int b = 0; b < 12; ++b) all[b] = b;
    TrajectoryRecord rec = evolve_driven_transmon(sys, p, 1, 256, 8, all);
    CHECK(rec.completeness_defect < 1e-6);
}

TEST_CASE("adiabaticity at the paper kappa matches the Landau-Zener split" *
          doctest::timeout(1800)) {
    DrivenTransmon sys = paper_system();
    double wd = two_pi * 7.515;
    double kappa = two_pi * 0.00795;

    std::vector<AdiabaticityPoint> scan =
        adiabaticity_scan(sys, wd, kG, 100.0, {kappa}, 1, 7, 256);
    REQUIRE(scan.size() == 1);
    CHECK(scan[0].p_adiabatic + scan[0].p_diabatic > 0.95);

    FloquetBranchSet set = track_floquet_branches(sys, wd, kG, 2 * kG * std::sqrt(100.0),
                                                  two_pi * 0.010);
    auto crossings = find_avoided_crossings(set, sys, 1, 7);
    REQUIRE(!crossings.empty());
    LandauZener lz = landau_zener(crossings.front(), 2 * kG * std::sqrt(100.0), kappa);
    CHECK(std::abs(scan[0].p_diabatic - lz.p_lz) < 0.05);
    CHECK(std::abs(scan[0].p_adiabatic - (1 - lz.p_lz)) < 0.05);
}

TEST_CASE("open system: no drive and negligible decay keeps populations frozen") {
    CoupledModelParams p;
    p.transmon = paper_params();
    p.omega_r = two_pi * 5.3;
    p.g = kG;
    p.dim_t = 3;
    p.dim_r = 5;
    DriveProtocol d;
    d.epsilon_d = 0;
    d.kappa = two_pi * 1e-9;
    d.omega_d = two_pi * 5.267;
    d.omega_r = p.omega_r;
    d.g = kG;
    d.t_final = 5.0;
    OpenEvolutionResult res = evolve_open_coupled(p, d, 1, 4, 42, 10, 256);
    for (int r = 0; r < res.branch_population.rows(); ++r) {
        CHECK(res.branch_population(r, 1) == doctest::Approx(1.0).epsilon(1e-6));
        CHECK(res.branch_population(r, 0) == doctest::Approx(0.0).scale(1).epsilon(1e-6));
    }
}

TEST_CASE("trajectory average reproduces the dense master equation" * doctest::timeout(900)) {
    CoupledModelParams p;
    p.transmon = paper_params();
    p.omega_r = two_pi * 5.3;
    p.g = kG;
    p.dim_t = 3;
    p.dim_r = 5;
    DriveProtocol d = DriveProtocol::for_target_nbar(1.2, two_pi * 0.25, two_pi * 5.267,
                                                     two_pi * 5.3, kG, 0);
    d.t_final = 3 / d.kappa;

    OpenEvolutionResult mc = evolve_open_coupled(p, d, 1, 256, 2024, 30, 256);
    OpenEvolutionResult me = evolve_open_master(p, d, 1, 30, 256);
    REQUIRE(me.times.size() >= mc.times.size());
    for (std::size_t r = 0; r < mc.times.size(); ++r) {
        CHECK(mc.times[r] == doctest::Approx(me.times[r]).epsilon(1e-12));
        for (int b = 0; b < 3; ++b) {
            double tol = std::max(4 * mc.branch_stderr(static_cast<int>(r), b), 0.01);
            CHECK(std::abs(mc.branch_population(static_cast<int>(r), b) -
                           me.branch_population(static_cast<int>(r), b)) < tol);
        }
    }
}

TEST_CASE("doubling the trajectory count is statistically consistent") {
    CoupledModelParams p;
    p.transmon = paper_params();
    p.omega_r = two_pi * 5.3;
    p.g = kG;
    p.dim_t = 3;
    p.dim_r = 5;
    DriveProtocol d = DriveProtocol::for_target_nbar(1.0, two_pi * 0.25, two_pi * 5.267,
                                                     two_pi * 5.3, kG, 0);
    d.t_final = 2 / d.kappa;
    OpenEvolutionResult a = evolve_open_coupled(p, d, 1, 120, 7, 12, 256);
    OpenEvolutionResult b = evolve_open_coupled(p, d, 1, 240, 8, 12, 256);
    int last = static_cast<int>(a.times.size()) - 1;
    for (int br = 0; br < 3; ++br) {
        double sigma = std::hypot(a.branch_stderr(last, br), b.branch_stderr(last, br));
        CHECK(std::abs(a.branch_population(last, br) - b.branch_population(last, br)) <
              std::max(3 * sigma, 0.01));
    }
}

TEST_CASE("identical seeds give bit-identical averages regardless of workers") {
    CoupledModelParams p;
    p.transmon = paper_params();
    p.omega_r = two_pi * 5.3;
    p.g = kG;
    p.dim_t = 3;
    p.dim_r = 5;
    DriveProtocol d = DriveProtocol::for_target_nbar(1.0, two_pi * 0.25, two_pi * 5.267,
                                                     two_pi * 5.3, kG, 0);
    d.t_final = 1 / d.kappa;
    OpenEvolutionResult a = evolve_open_coupled(p, d, 1, 16, 99, 8, 256, 1);
    OpenEvolutionResult b = evolve_open_coupled(p, d, 1, 16, 99, 8, 256, 2);
    CHECK((a.branch_population - b.branch_population).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("overfilled Fock truncation trips the warning") {
    CoupledModelParams p;
    p.transmon = paper_params();
    p.omega_r = two_pi * 5.3;
    p.g = kG;
    p.dim_t = 3;
    p.dim_r = 4;
    DriveProtocol d = DriveProtocol::for_target_nbar(6.0, two_pi * 0.25, two_pi * 5.3,
                                                     two_pi * 5.3, kG, 0);
    d.t_final = 2 / d.kappa;
    OpenEvolutionResult res = evolve_open_coupled(p, d, 0, 8, 3, 10, 256);
    CHECK(res.truncation_warning);
}
