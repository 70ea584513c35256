#ifndef IONSIM_FLOQUET_HPP
#define IONSIM_FLOQUET_HPP

#include <Eigen/Dense>
#include <complex>
#include <vector>

#include "ionsim/transmon.hpp"

namespace ionsim {

// Bare transmon truncated to the levels kept in the driven problem.
struct DrivenTransmon {
    Eigen::VectorXd energies;       // absolute eigenvalues, well bottom at -E_J
    Eigen::MatrixXd charge_matrix;  // <i|n_t|j>
    double ej = 0;

    int dim() const { return static_cast<int>(energies.size()); }
    static DrivenTransmon from_spectrum(const TransmonSpectrum& spec, int dim_t);
};

struct PropagatorResult {
    Eigen::MatrixXcd u;                      // U(t0 + T, t0)
    std::vector<Eigen::MatrixXcd> snapshots; // U(t0 + k T/K, t0), k = 0..K-1
    double unitarity_defect = 0;
};

// One-period propagator of H(t) = H_t + eps cos(w_d t) n_t via a
// fourth-order Magnus scheme with exact matrix exponentials per step.
PropagatorResult one_period_propagator(const DrivenTransmon& sys, double omega_d, double epsilon_t,
                                       int steps_per_period = 512, double t0 = 0.0,
                                       int snapshots = 31);

struct FloquetMode {
    double quasienergy = 0;        // folded into [-w_d/2, w_d/2)
    Eigen::VectorXcd mode;         // |phi(t0)>
    double avg_population = 0;     // Eq.-(13)-style period average
    double ipr = 0;
    double avg_energy = 0;         // period-averaged H_t, 0 at the well bottom
};

struct TrackEvent {
    int branch, grid_index;
    double best_overlap, second_overlap;
};

struct FloquetBranchSet {
    std::vector<double> eps_grid;
    std::vector<std::vector<FloquetMode>> branches;  // [branch][grid point]
    std::vector<TrackEvent> ambiguities;
    double omega_d = 0;
    double g = 0;
    int steps_per_period = 512;

    double nbar(std::size_t grid_index) const {
        double e = eps_grid[grid_index];
        return (e / (2 * g)) * (e / (2 * g));
    }
};

// Track Floquet modes from eps = 0 upward in steps of delta_eps, matching
// modes between neighboring amplitudes by |<new|old>|^2.
FloquetBranchSet track_floquet_branches(const DrivenTransmon& sys, double omega_d, double g,
                                        double eps_max, double delta_eps,
                                        int steps_per_period = 512, int samples_per_period = 31);

// Observables of a single mode given the propagator snapshots.
double period_avg_population(const std::vector<Eigen::MatrixXcd>& snapshots,
                             const Eigen::VectorXcd& mode);
double ipr(const Eigen::VectorXcd& mode);
double floquet_time_avg_energy(const std::vector<Eigen::MatrixXcd>& snapshots,
                               const Eigen::VectorXcd& mode, const DrivenTransmon& sys);

struct FloquetCritical {
    double value = 0;          // nbar_r
    bool reached = false;
    double max_explored = 0;
};

// Smallest nbar_r where the period-averaged population of branch `state`
// reaches 2 (ground) or 3 (excited).
FloquetCritical floquet_critical_photon(const FloquetBranchSet& set, int state);

struct AvoidedCrossing {
    int branch_i = 0, branch_j = 0;
    double eps_ac = 0;       // drive amplitude at the gap minimum
    double gap = 0;          // minimum quasienergy gap
    double slope = 0;        // asymptotic gap slope s: gap^2 ~ gap_min^2 + s^2 (eps-eps_ac)^2
    double curvature = 0;    // |d^2 eps_j / d eps_t^2| at the crossing
    double nbar = 0;         // equivalent photon number
};

// All local minima of the fold-aware quasienergy gap between two tracked
// branches, each refined by a golden-section search on fresh propagators
// and characterized by a hyperbola fit on the surrounding grid points.
std::vector<AvoidedCrossing> find_avoided_crossings(const FloquetBranchSet& set,
                                                    const DrivenTransmon& sys, int bi, int bj,
                                                    bool refine = true);

struct LandauZener {
    double speed = 0;
    double p_lz = 0;  // diabatic transition probability
};

// Landau-Zener probability for ramping eps_t(t) = eps_target (1 - e^{-kt/2})
// through the crossing.
LandauZener landau_zener(const AvoidedCrossing& crossing, double eps_target, double kappa);

// Second-order ac-Stark shift of `level` from the replica picture.
double shirley_ac_stark(const TransmonSpectrum& spec, double omega_d, double nbar_r, double g,
                        int level);

}  // namespace ionsim

#endif
