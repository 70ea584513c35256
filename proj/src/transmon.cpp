#include "ionsim/transmon.hpp"

#include <cmath>
#include <iostream>
#include <limits>

namespace ionsim {

std::string TransmonParams::validate() const {
    if (ej <= 0) throw std::invalid_argument("E_J must be positive");
    if (ec <= 0) throw std::invalid_argument("E_C must be positive");
    if (ng < 0 || ng >= 1) throw std::invalid_argument("n_g must lie in [0, 1)");
    if (charge_cutoff < 10) throw std::invalid_argument("charge cutoff must be >= 10");
    if (ej / ec < 20)
        return "E_J/E_C = " + std::to_string(ej / ec) + " is below the transmon regime";
    return {};
}

namespace {

// Charge-basis Hamiltonian: diagonal 4 E_C (n - n_g)^2, off-diagonal -E_J/2.
Eigen::MatrixXd charge_hamiltonian(const TransmonParams& p, int cutoff) {
    const int dim = 2 * cutoff + 1;
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(dim, dim);
    for (int k = 0; k < dim; ++k) {
        double n = k - cutoff;
        h(k, k) = 4.0 * p.ec * (n - p.ng) * (n - p.ng);
        if (k + 1 < dim) {
            h(k, k + 1) = -p.ej / 2;
            h(k + 1, k) = -p.ej / 2;
        }
    }
    return h;
}

Eigen::VectorXd eigenvalues_at_cutoff(const TransmonParams& p, int cutoff) {
    Eigen::MatrixXd h = charge_hamiltonian(p, cutoff);
    return detail::eigh_inplace(h);
}

}  // namespace

TransmonSpectrum diagonalize_transmon(const TransmonParams& params) {
    std::string warning = params.validate();
    if (!warning.empty()) std::cerr << "warning: " << warning << "\n";

    const int cutoff = params.charge_cutoff;
    Eigen::MatrixXd h = charge_hamiltonian(params, cutoff);
    Eigen::VectorXd energies = detail::eigh_inplace(h);

    // Deterministic phases: largest-magnitude charge component positive.
    for (int c = 0; c < h.cols(); ++c) {
        Eigen::Index imax;
        h.col(c).cwiseAbs().maxCoeff(&imax);
        if (h(imax, c) < 0) h.col(c) = -h.col(c);
    }

    // Convergence of the low-lying levels against an enlarged cutoff.
    const int checked = std::min<int>(21, energies.size());
    Eigen::VectorXd ref = eigenvalues_at_cutoff(params, cutoff + 10);
    const double scale = params.ej;
    for (int l = 0; l < checked; ++l) {
        double drift = std::abs(energies[l] - ref[l]) / std::max(std::abs(ref[l]), scale);
        if (drift > 1e-9) throw TruncationError(l, drift);
    }

    TransmonSpectrum spec;
    spec.params = params;
    spec.converged_levels = checked;
    spec.energies = std::move(energies);
    Eigen::VectorXd charge_diag(2 * cutoff + 1);
    for (int k = 0; k <= 2 * cutoff; ++k) charge_diag[k] = k - cutoff;
    spec.charge_matrix = h.transpose() * charge_diag.asDiagonal() * h;
    spec.eigenvectors = std::move(h);
    return spec;
}

double charge_dispersion(const TransmonParams& params, int level, int n_samples) {
    if (n_samples < 2) throw std::invalid_argument("need at least two n_g samples");
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    TransmonParams p = params;
    for (int s = 0; s < n_samples; ++s) {
        p.ng = 0.5 * s / (n_samples - 1);
        Eigen::VectorXd ev = eigenvalues_at_cutoff(p, p.charge_cutoff);
        if (level >= ev.size()) throw TruncationError(level, 1.0);
        // reuse the production convergence guard for the requested level
        Eigen::VectorXd ref = eigenvalues_at_cutoff(p, p.charge_cutoff + 10);
        double drift = std::abs(ev[level] - ref[level]) / std::max(std::abs(ref[level]), p.ej);
        if (drift > 1e-9) throw TruncationError(level, drift);
        lo = std::min(lo, ev[level]);
        hi = std::max(hi, ev[level]);
    }
    return hi - lo;
}

DerivedScales derived_scales(const TransmonParams& params) {
    TransmonSpectrum spec = diagonalize_transmon(params);
    DerivedScales s;
    s.omega_p = std::sqrt(8.0 * params.ej * params.ec);
    s.impedance = std::sqrt(8.0 * params.ec / params.ej);
    s.anharmonicity = (spec.energies[1] - spec.energies[0]) - (spec.energies[2] - spec.energies[1]);
    s.well_depth_ratio = 2.0 * params.ej / s.omega_p;
    // Count states inside the cosine well: E below the separatrix energy
    // +E_J, i.e. less than 2 E_J above the potential minimum -E_J.
    s.bound_state_count = 0;
    for (int i = 0; i < spec.dim(); ++i)
        if (spec.energies[i] < params.ej) ++s.bound_state_count;
    return s;
}

}  // namespace ionsim
