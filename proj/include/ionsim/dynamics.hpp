#ifndef IONSIM_DYNAMICS_HPP
#define IONSIM_DYNAMICS_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "ionsim/coupled.hpp"
#include "ionsim/floquet.hpp"

namespace ionsim {

struct DriveProtocol {
    double epsilon_d = 0;  // resonator drive amplitude
    double omega_d = 0;    // drive frequency
    double omega_r = 0;    // resonator frequency
    double kappa = 0;      // resonator linewidth
    double g = 0;          // transmon-resonator coupling
    double t_final = 0;
    enum class Form { simplified, full } form = Form::simplified;

    std::string validate() const;
    double nbar_infinity() const { return (epsilon_d / kappa) * (epsilon_d / kappa); }
    // steady-state transmon drive amplitude 2 g eps_d / kappa
    double eps_t_infinity() const { return 2 * g * epsilon_d / kappa; }
    // slow envelope of the simplified form (no carrier)
    double eps_t(double t) const { return eps_t_infinity() * (1 - std::exp(-kappa * t / 2)); }
    double nbar(double t) const { return std::pow(eps_t(t) / (2 * g), 2); }

    static DriveProtocol for_target_nbar(double nbar, double kappa, double omega_d,
                                         double omega_r, double g, double t_final);
};

// Instantaneous effective transmon drive E_t(t), carrier included. The
// simplified form is (2 g eps_d/kappa)(1 - e^{-kappa t/2}) cos(w_d t); the
// full form keeps both sidebands and the decaying transient.
double effective_drive_envelope(const DriveProtocol& p, double t);

struct TrajectoryRecord {
    std::vector<double> times;
    std::vector<double> nbar;        // instantaneous photon-number equivalent
    std::vector<double> population;  // <N_t>(t)
    std::vector<int> watched;        // branch labels of the projection columns
    Eigen::MatrixXd projections;     // records x watched, |<phi_b[eps(t)]|psi>|^2
    double completeness_defect = 0;  // max |1 - sum_b projections| over records
};

// Unitary Schroedinger evolution of the driven transmon with the ramped
// envelope; projections are taken onto the instantaneous Floquet modes at
// the frozen amplitude and drive phase of each record.
TrajectoryRecord evolve_driven_transmon(const DrivenTransmon& sys, const DriveProtocol& p,
                                        int initial_level, int steps_per_period = 512,
                                        int records = 200, std::vector<int> watched = {});

struct AdiabaticityPoint {
    double kappa = 0;
    double p_adiabatic = 0;  // stays in the initial branch
    double p_diabatic = 0;   // jumps to the partner branch
};

// Final-branch probabilities after ramping to target_nbar over t_f ~ 10/kappa.
std::vector<AdiabaticityPoint> adiabaticity_scan(const DrivenTransmon& sys, double omega_d,
                                                 double g, double target_nbar,
                                                 const std::vector<double>& kappa_grid,
                                                 int initial_level, int partner_level,
                                                 int steps_per_period = 512);

struct OpenEvolutionResult {
    std::vector<double> times;
    Eigen::MatrixXd branch_population;  // records x branches, trajectory mean
    Eigen::MatrixXd branch_stderr;      // standard error over trajectories
    std::vector<double> nbar;           // mean <a'a>(t)
    double max_top_fock_weight = 0;     // truncation monitor
    bool truncation_warning = false;    // top Fock occupancy exceeded 1%
};

// Stochastic-wavefunction (jump) unraveling of the driven dissipative
// transmon-resonator model at reduced truncation, averaged over n_traj
// trajectories with per-trajectory RNG streams derived from (seed, index).
OpenEvolutionResult evolve_open_coupled(const CoupledModelParams& p, const DriveProtocol& drive,
                                        int initial_branch, int n_traj, std::uint64_t seed,
                                        int records = 120, int steps_per_period = 512,
                                        int workers = 0);

// Dense Lindblad master-equation reference for small truncations;
// independent integration path used as the oracle for the jump unraveling.
OpenEvolutionResult evolve_open_master(const CoupledModelParams& p, const DriveProtocol& drive,
                                       int initial_branch, int records = 120,
                                       int steps_per_period = 512);

}  // namespace ionsim

#endif
