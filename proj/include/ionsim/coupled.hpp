#ifndef IONSIM_COUPLED_HPP
#define IONSIM_COUPLED_HPP

#include <Eigen/Dense>
#include <complex>
#include <cstdint>
#include <vector>

#include "ionsim/transmon.hpp"

namespace ionsim {

struct CoupledModelParams {
    TransmonParams transmon;
    double omega_r = 0;
    double g = 0;
    int dim_t = 15;
    int dim_r = 250;
    std::size_t memory_cap_bytes = std::size_t{6} * 1024 * 1024 * 1024;

    std::string validate() const;
    int dim() const { return dim_t * dim_r; }
};

// H_tr = w_r a'a + H_t - i g (n_t - n_g)(a - a') in the (bare transmon
// eigenbasis) x (Fock) product basis, transmon-major indexing.
Eigen::MatrixXcd build_coupled_hamiltonian(const CoupledModelParams& p,
                                           const TransmonSpectrum& spec);

// Same spectrum in the gauge a -> ia, where the coupling becomes
// +g (n_t - n_g)(a + a') and the matrix is real symmetric. Eigenvalues
// coincide with the complex form; eigenvectors map by |m> -> i^m |m>.
Eigen::MatrixXd build_coupled_hamiltonian_real(const CoupledModelParams& p,
                                               const TransmonSpectrum& spec);

struct CoupledEigensystem {
    Eigen::VectorXd eigenvalues;
    Eigen::MatrixXd eigenvectors;  // real-gauge, one column per state
    Eigen::VectorXd nbar;          // <a'a> per eigenstate
    Eigen::VectorXd nt;            // sum_j j |<j,m|state>|^2 per eigenstate
    CoupledModelParams params;
    TransmonSpectrum spectrum;
};

CoupledEigensystem diagonalize_coupled(const CoupledModelParams& p, const TransmonSpectrum& spec);

struct BranchRecord {
    int eigenstate = -1;
    double eigenvalue = 0;
    double nt = 0;
    double nr = 0;
    double modular_energy = 0;
    double overlap = 0;  // C value that won this state its slot
};

struct BranchTie {
    int branch, step;
    double overlap_gap;
};

struct DressedBranchSet {
    std::vector<std::vector<BranchRecord>> branches;  // [transmon label][recursion step]
    std::vector<BranchTie> ties;
    double omega_r = 0;
    double ground_energy = 0;  // dressed ground eigenvalue, modular reference
};

// Overlap recursion: seed each branch on the low-energy eigenstate closest
// to |i_t, 0>, then repeatedly add the unassigned eigenstate maximizing
// |<lambda|a'|tip>|^2, all branches advancing one photon per step. Layer
// conflicts are resolved by maximizing the summed overlap; near-ties are
// recorded and broken toward the lower eigenvalue.
DressedBranchSet assign_branches(const CoupledEigensystem& sys);

// Fill per-record N_t, N_r and the modular energy folded into
// [-w_r/2, w_r/2) relative to the dressed ground state.
void branch_observables(const CoupledEigensystem& sys, DressedBranchSet& set);

struct CriticalResult {
    double value = 0;
    bool reached = false;
    double max_explored = 0;
};

// Smallest N_r at which branch N_t crosses 2 (ground) or 3 (excited),
// linearly interpolated between adjacent records.
CriticalResult quantum_critical_photon(const DressedBranchSet& set, int state);

struct GateChargeStats {
    double mean = 0, p10 = 0, p90 = 0;
    std::vector<double> ng_values;
    std::vector<CriticalResult> samples;
    int sentinel_count = 0;
};

GateChargeStats gate_charge_statistics(const CoupledModelParams& p, int state, int n_samples,
                                       std::uint64_t seed, int workers = 0);

struct ExcitationLattice {
    Eigen::VectorXd site_energies;  // w_{0,i} - i w_r
    Eigen::VectorXd hoppings;       // g_{i+1,i} sqrt(N - i)
    int i_star = 0;
};

ExcitationLattice excitation_lattice(const TransmonSpectrum& spec, double omega_r, double g,
                                     int total_excitations);

struct ModularCrossing {
    int branch_i, branch_j;
    int step;
    double nr;      // photon number of branch_i at the gap minimum
    double gap;     // fold-aware modular energy gap
};

// Local minima of the fold-aware modular-energy distance between two
// branches, quadratically refined in N_r.
std::vector<ModularCrossing> find_modular_crossings(const DressedBranchSet& set, int bi, int bj);

// Map a real-gauge product-space eigenvector to the -ig(n-ng)(a-a') gauge:
// Fock component m picks up a phase i^m.
Eigen::VectorXcd to_complex_gauge(const Eigen::VectorXd& real_gauge_state, int dim_t, int dim_r);

}  // namespace ionsim

#endif
