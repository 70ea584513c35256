#ifndef IONSIM_DISPERSIVE_HPP
#define IONSIM_DISPERSIVE_HPP

#include <Eigen/Dense>
#include <complex>

#include "ionsim/transmon.hpp"

namespace ionsim {

struct CouplingContext {
    TransmonSpectrum spectrum;
    double omega_r = 0;  // resonator (or drive) frequency
    double g = 0;        // coupling strength

    std::string validate() const;
    // g_ij = g <i|(n_t - n_g)|j>; the gate-charge offset only moves the
    // diagonal, which never enters the chi sums.
    double g_element(int i, int j) const {
        double n = spectrum.charge_matrix(i, j);
        if (i == j) n -= spectrum.params.ng;
        return g * n;
    }
    double detuning() const { return spectrum.qubit_frequency() - omega_r; }
};

// Dispersive shift of `level` from the no-RWA second-order sum. The sum
// over intermediate levels stops once a term moves the running total by
// less than 1e-6 relative, with a hard cap at 3x the bound-state count.
double chi_shift(const CouplingContext& ctx, int level);

// Kerr-oscillator estimate of the same shift, kept only for comparison.
double kerr_chi_estimate(const CouplingContext& ctx, int level);

struct JcCritical {
    double value = 0;
    int k = -1, l = -1;  // limiting transition
};

// Smallest per-transition critical photon number |(w_kl - w_r)/2g_kl|^2
// over all transitions touching `state`, counter-rotating ones included.
JcCritical jc_critical_photon(const CouplingContext& ctx, int state);

// Second-order Schrieffer-Wolff data: chi/eta/lambda matrices and the
// transmon-side pieces of the generators S and T.
struct SWMatrixElements {
    Eigen::MatrixXd chi, eta, lambda;
    Eigen::MatrixXd s_t;                      // S_t_{ij} = g_ij / (w_ij - w_r)
    Eigen::MatrixXd a2, b2, c2, d2;           // T = A2 + B2 a'a + C2 aa + D2 a'a'
    int dim_t = 0;
};

SWMatrixElements sw_matrix_elements(const CouplingContext& ctx, int dim_t);

// |i, n_r> dressed by e^{-S} e^{-T} on a dim_t x dim_r product space.
// Requires dim_r >= n_r + 6 so the two-photon terms in T act inside the
// truncation.
Eigen::VectorXcd sw_dressed_state(const CouplingContext& ctx, const SWMatrixElements& sw, int i,
                                  int n_r, int dim_r);

namespace detail {
// y = exp(A) v by scaling-and-squaring applied to the vector.
Eigen::VectorXcd expm_apply(const Eigen::MatrixXcd& a, Eigen::VectorXcd v);
}  // namespace detail

}  // namespace ionsim

#endif
