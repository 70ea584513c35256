#ifndef IONSIM_TRANSMON_HPP
#define IONSIM_TRANSMON_HPP

#include <Eigen/Dense>

#include "ionsim/common.hpp"

namespace ionsim {

struct TransmonParams {
    double ej = 0;              // Josephson energy, angular units
    double ec = 0;              // charging energy, angular units
    double ng = 0;              // gate charge in [0, 1)
    int charge_cutoff = 40;     // charge basis spans -cutoff..+cutoff

    // Throws std::invalid_argument on hard violations; returns a warning
    // string (possibly empty) for soft ones such as leaving the transmon
    // regime e_j/e_c < 20.
    std::string validate() const;
};

// Spectral data of the bare transmon in the charge basis.
struct TransmonSpectrum {
    Eigen::VectorXd energies;       // ascending eigenvalues
    Eigen::MatrixXd eigenvectors;   // charge-basis amplitudes, one column per level
    Eigen::MatrixXd charge_matrix;  // <i|n_t|j> in the eigenbasis
    TransmonParams params;
    int converged_levels = 0;       // levels checked against the enlarged cutoff

    int dim() const { return static_cast<int>(energies.size()); }
    // Transition frequency omega_{ij} = E_j - E_i.
    double omega(int i, int j) const { return energies[j] - energies[i]; }
    double qubit_frequency() const { return energies[1] - energies[0]; }
};

struct DerivedScales {
    double omega_p = 0;         // plasma frequency sqrt(8 E_J E_C)
    double impedance = 0;       // z = sqrt(8 E_C / E_J), the effective Planck constant
    double anharmonicity = 0;   // omega_01 - omega_12, positive in the transmon regime
    double well_depth_ratio = 0;  // 2 E_J / omega_p
    int bound_state_count = 0;  // eigenstates below the top of the cosine well
};

// Build and diagonalize H_t = 4 E_C (n - n_g)^2 - E_J cos(phi) in the
// charge basis. Eigenvector phases are fixed by making the largest
// charge-basis component positive. Levels 0..20 are checked against a
// cutoff enlarged by 10; unconverged levels raise TruncationError.
TransmonSpectrum diagonalize_transmon(const TransmonParams& params);

// Max-min of E_level over n_g sampled uniformly on [0, 0.5].
double charge_dispersion(const TransmonParams& params, int level, int n_samples = 51);

DerivedScales derived_scales(const TransmonParams& params);

}  // namespace ionsim

#endif
