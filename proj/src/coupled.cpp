#include "ionsim/coupled.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace ionsim {

namespace {

constexpr double kTieTol = 1e-8;

// Apply a' (transmon-major product basis) to a real-gauge state.
Eigen::VectorXd apply_adag(const Eigen::VectorXd& v, int dim_t, int dim_r) {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(v.size());
    for (int i = 0; i < dim_t; ++i)
        for (int m = 0; m + 1 < dim_r; ++m)
            out[i * dim_r + m + 1] = std::sqrt(m + 1.0) * v[i * dim_r + m];
    return out;
}

// Conflict resolution for one photon layer: repeatedly give the globally
// best (branch, eigenstate) pair its match, then re-resolve the rest.
std::vector<int> greedy_layer(const Eigen::MatrixXd& score, const std::vector<char>& taken) {
    const int nb = static_cast<int>(score.rows());
    std::vector<int> pick(nb, -1);
    std::vector<char> used(taken.begin(), taken.end());
    std::vector<char> done(nb, 0);
    for (int round = 0; round < nb; ++round) {
        int best_b = -1, best_c = -1;
        double best = -1;
        for (int b = 0; b < nb; ++b) {
            if (done[b]) continue;
            for (int c = 0; c < score.cols(); ++c) {
                if (used[c]) continue;
                if (score(b, c) > best) {
                    best = score(b, c);
                    best_b = b;
                    best_c = c;
                }
            }
        }
        pick[best_b] = best_c;
        done[best_b] = 1;
        used[best_c] = 1;
    }
    return pick;
}

}  // namespace

std::string CoupledModelParams::validate() const {
    std::string warn = transmon.validate();
    if (omega_r <= 0) throw std::invalid_argument("omega_r must be positive");
    if (g < 0) throw std::invalid_argument("g must be non-negative");
    if (dim_t < 2 || dim_r < 1) throw std::invalid_argument("product dimensions too small");
    std::size_t need = sizeof(double) * 3u * static_cast<std::size_t>(dim()) * dim();
    if (need > memory_cap_bytes)
        throw std::invalid_argument("requested truncation exceeds the memory cap");
    // Semiclassical well area 16 E_J over 2*pi*hbar_eff states.
    int bound_estimate =
        static_cast<int>(16.0 / (two_pi * std::sqrt(8 * transmon.ec / transmon.ej)));
    if (warn.empty() && dim_t < bound_estimate + 6)
        warn = "dim_t = " + std::to_string(dim_t) + " keeps fewer than 6 levels above the well";
    return warn;
}

Eigen::MatrixXcd build_coupled_hamiltonian(const CoupledModelParams& p,
                                           const TransmonSpectrum& spec) {
    p.validate();
    const int dt = p.dim_t, dr = p.dim_r, dim = p.dim();
    Eigen::MatrixXcd h = Eigen::MatrixXcd::Zero(dim, dim);
    auto idx = [dr](int i, int m) { return i * dr + m; };
    for (int i = 0; i < dt; ++i)
        for (int m = 0; m < dr; ++m)
            h(idx(i, m), idx(i, m)) = spec.energies[i] + p.omega_r * m;
    const std::complex<double> minus_i(0, -1);
    for (int i = 0; i < dt; ++i)
        for (int j = 0; j < dt; ++j) {
            double c = p.g * (spec.charge_matrix(i, j) - (i == j ? p.transmon.ng : 0.0));
            if (c == 0) continue;
            for (int m = 0; m + 1 < dr; ++m) {
                double amp = std::sqrt(m + 1.0);
                // -i g (n - ng) a   : lowers m+1 -> m
                h(idx(i, m), idx(j, m + 1)) += minus_i * c * amp;
                // +i g (n - ng) a'  : raises m -> m+1
                h(idx(i, m + 1), idx(j, m)) += -minus_i * c * amp;
            }
        }
    return h;
}

Eigen::MatrixXd build_coupled_hamiltonian_real(const CoupledModelParams& p,
                                               const TransmonSpectrum& spec) {
    p.validate();
    const int dt = p.dim_t, dr = p.dim_r, dim = p.dim();
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(dim, dim);
    auto idx = [dr](int i, int m) { return i * dr + m; };
    for (int i = 0; i < dt; ++i)
        for (int m = 0; m < dr; ++m)
            h(idx(i, m), idx(i, m)) = spec.energies[i] + p.omega_r * m;
    for (int i = 0; i < dt; ++i)
        for (int j = 0; j < dt; ++j) {
            double c = p.g * (spec.charge_matrix(i, j) - (i == j ? p.transmon.ng : 0.0));
            if (c == 0) continue;
            for (int m = 0; m + 1 < dr; ++m) {
                double amp = std::sqrt(m + 1.0) * c;
                h(idx(i, m), idx(j, m + 1)) += amp;
                h(idx(i, m + 1), idx(j, m)) += amp;
            }
        }
    return h;
}

Eigen::VectorXcd to_complex_gauge(const Eigen::VectorXd& v, int dim_t, int dim_r) {
    static const std::complex<double> phases[4] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
    Eigen::VectorXcd out(v.size());
    for (int i = 0; i < dim_t; ++i)
        for (int m = 0; m < dim_r; ++m)
            out[i * dim_r + m] = phases[m % 4] * v[i * dim_r + m];
    return out;
}

CoupledEigensystem diagonalize_coupled(const CoupledModelParams& p, const TransmonSpectrum& spec) {
    CoupledEigensystem sys;
    sys.params = p;
    sys.spectrum = spec;
    Eigen::MatrixXd h = build_coupled_hamiltonian_real(p, spec);
    sys.eigenvalues = detail::eigh_inplace(h);
    sys.eigenvectors = std::move(h);
    const int dim = p.dim();
    sys.nbar.resize(dim);
    sys.nt.resize(dim);
    Eigen::VectorXd m_of(dim), i_of(dim);
    for (int i = 0; i < p.dim_t; ++i)
        for (int m = 0; m < p.dim_r; ++m) {
            m_of[i * p.dim_r + m] = m;
            i_of[i * p.dim_r + m] = i;
        }
    for (int c = 0; c < dim; ++c) {
        auto col = sys.eigenvectors.col(c);
        sys.nbar[c] = col.cwiseAbs2().dot(m_of);
        sys.nt[c] = col.cwiseAbs2().dot(i_of);
    }
    return sys;
}

DressedBranchSet assign_branches(const CoupledEigensystem& sys) {
    const auto& p = sys.params;
    const int dt = p.dim_t, dr = p.dim_r, dim = p.dim();

    DressedBranchSet set;
    set.omega_r = p.omega_r;
    set.branches.assign(dt, {});
    std::vector<char> taken(dim, 0);

    // Seeds: low-energy eigenstates (<a'a> < 1) with largest |<lambda|i,0>|^2.
    // Candidates scan in ascending eigenvalue order, so keeping the incumbent
    // on a near-tie breaks toward the lower eigenvalue.
    std::vector<int> tips(dt, -1);
    for (int i = 0; i < dt; ++i) {
        int best = -1;
        double best_ov = -1;
        for (int lam = 0; lam < dim; ++lam) {
            if (taken[lam] || sys.nbar[lam] >= 1.0) continue;
            double ov = sys.eigenvectors(i * dr + 0, lam);
            ov *= ov;
            if (ov > best_ov + kTieTol) {
                best_ov = ov;
                best = lam;
            } else if (ov > best_ov - kTieTol && best_ov > 1e-6) {
                set.ties.push_back({i, 0, std::abs(ov - best_ov)});
            }
        }
        tips[i] = best;
        taken[best] = 1;
        set.branches[i].push_back({best, sys.eigenvalues[best], 0, 0, 0, best_ov});
    }
    set.ground_energy = sys.eigenvalues[set.branches[0][0].eigenstate];

    // Parallel recursion, one photon per step, reserving a 10% top margin.
    const int steps = static_cast<int>(dr - std::ceil(0.1 * dr));
    Eigen::MatrixXd raised(dim, dt);  // a' applied to each branch tip
    Eigen::MatrixXd overlap_cols(dim, dt);
    for (int step = 1; step < steps; ++step) {
        for (int b = 0; b < dt; ++b)
            raised.col(b) = apply_adag(sys.eigenvectors.col(tips[b]), dt, dr);
        overlap_cols.noalias() = sys.eigenvectors.transpose() * raised;
        // Independent argmax per branch; fall back to a conflict-free joint
        // assignment when two branches want the same eigenstate.
        std::vector<int> pick(dt, -1);
        bool conflict = false;
        for (int b = 0; b < dt; ++b) {
            double best = -1;
            int arg = -1;
            for (int lam = 0; lam < dim; ++lam) {
                if (taken[lam]) continue;
                double ov = overlap_cols(lam, b) * overlap_cols(lam, b);
                if (ov > best + kTieTol) {
                    best = ov;
                    arg = lam;
                } else if (ov > best - kTieTol && best > 1e-6) {
                    set.ties.push_back({b, step, std::abs(ov - best)});
                }
            }
            pick[b] = arg;
        }
        for (int b = 0; b < dt && !conflict; ++b)
            for (int b2 = b + 1; b2 < dt; ++b2)
                if (pick[b] == pick[b2]) conflict = true;
        if (conflict) {
            Eigen::MatrixXd masked = overlap_cols.cwiseAbs2().transpose();
            for (int lam = 0; lam < dim; ++lam)
                if (taken[lam]) masked.col(lam).setConstant(-1);
            pick = greedy_layer(masked, taken);
        }
        for (int b = 0; b < dt; ++b) {
            tips[b] = pick[b];
            taken[pick[b]] = 1;
            double c = overlap_cols(pick[b], b) * overlap_cols(pick[b], b);
            set.branches[b].push_back({pick[b], sys.eigenvalues[pick[b]], 0, 0, 0, c});
        }
    }
    branch_observables(sys, set);
    return set;
}

void branch_observables(const CoupledEigensystem& sys, DressedBranchSet& set) {
    for (auto& branch : set.branches)
        for (auto& rec : branch) {
            rec.nt = sys.nt[rec.eigenstate];
            rec.nr = sys.nbar[rec.eigenstate];
            rec.modular_energy = fold_modular(rec.eigenvalue - set.ground_energy, set.omega_r);
        }
}

CriticalResult quantum_critical_photon(const DressedBranchSet& set, int state) {
    if (state != 0 && state != 1) throw std::invalid_argument("state must be 0 or 1");
    const double threshold = (state == 0) ? 2.0 : 3.0;
    const auto& branch = set.branches[state];
    CriticalResult res;
    res.max_explored = branch.empty() ? 0 : branch.back().nr;
    for (std::size_t k = 1; k < branch.size(); ++k) {
        if (branch[k].nt >= threshold) {
            const auto& a = branch[k - 1];
            const auto& b = branch[k];
            double t = (threshold - a.nt) / (b.nt - a.nt);
            res.value = a.nr + t * (b.nr - a.nr);
            res.reached = true;
            return res;
        }
    }
    return res;
}

GateChargeStats gate_charge_statistics(const CoupledModelParams& p, int state, int n_samples,
                                       std::uint64_t seed, int workers) {
    if (n_samples < 1) throw std::invalid_argument("n_samples must be >= 1");
    GateChargeStats stats;
    stats.ng_values.resize(n_samples);
    stats.samples.resize(n_samples);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uniform(0.0, 0.5);
    for (int s = 0; s < n_samples; ++s) stats.ng_values[s] = uniform(rng);

    detail::parallel_for(n_samples, workers, [&](std::size_t s) {
        CoupledModelParams q = p;
        q.transmon.ng = stats.ng_values[s];
        TransmonSpectrum spec = diagonalize_transmon(q.transmon);
        CoupledEigensystem sys = diagonalize_coupled(q, spec);
        DressedBranchSet set = assign_branches(sys);
        stats.samples[s] = quantum_critical_photon(set, state);
    });

    std::vector<double> ok;
    for (const auto& r : stats.samples)
        if (r.reached)
            ok.push_back(r.value);
        else
            ++stats.sentinel_count;
    if (!ok.empty()) {
        stats.mean = std::accumulate(ok.begin(), ok.end(), 0.0) / ok.size();
        std::sort(ok.begin(), ok.end());
        auto nearest_rank = [&](double q) {
            int r = static_cast<int>(std::ceil(q * ok.size()));
            r = std::clamp(r, 1, static_cast<int>(ok.size()));
            return ok[r - 1];
        };
        stats.p10 = nearest_rank(0.10);
        stats.p90 = nearest_rank(0.90);
    }
    return stats;
}

ExcitationLattice excitation_lattice(const TransmonSpectrum& spec, double omega_r, double g,
                                     int total_excitations) {
    const int n = total_excitations;
    if (n + 1 > spec.dim()) throw std::invalid_argument("not enough transmon levels");
    ExcitationLattice lat;
    lat.site_energies.resize(n + 1);
    lat.hoppings.resize(n);
    for (int i = 0; i <= n; ++i)
        lat.site_energies[i] = (spec.energies[i] - spec.energies[0]) - i * omega_r;
    for (int i = 0; i < n; ++i)
        lat.hoppings[i] = g * spec.charge_matrix(i + 1, i) * std::sqrt(static_cast<double>(n - i));
    double alpha = (spec.energies[1] - spec.energies[0]) - (spec.energies[2] - spec.energies[1]);
    lat.i_star = static_cast<int>(std::lround((spec.qubit_frequency() - omega_r) / alpha));
    if (lat.i_star < 0) lat.i_star = 0;
    return lat;
}

std::vector<ModularCrossing> find_modular_crossings(const DressedBranchSet& set, int bi, int bj) {
    const auto& a = set.branches[bi];
    const auto& b = set.branches[bj];
    const std::size_t n = std::min(a.size(), b.size());
    std::vector<double> gap(n);
    for (std::size_t k = 0; k < n; ++k)
        gap[k] = fold_distance(a[k].modular_energy, b[k].modular_energy, set.omega_r);
    std::vector<ModularCrossing> out;
    for (std::size_t k = 1; k + 1 < n; ++k) {
        if (gap[k] <= gap[k - 1] && gap[k] < gap[k + 1]) {
            // quadratic refinement of the minimum position in N_r
            double y0 = gap[k - 1], y1 = gap[k], y2 = gap[k + 1];
            double denom = y0 - 2 * y1 + y2;
            double t = denom > 0 ? 0.5 * (y0 - y2) / denom : 0.0;
            t = std::clamp(t, -1.0, 1.0);
            double nr = a[k].nr + t * (t > 0 ? a[k + 1].nr - a[k].nr : a[k].nr - a[k - 1].nr);
            out.push_back({bi, bj, static_cast<int>(k), nr, y1});
        }
    }
    std::sort(out.begin(), out.end(),
              [](const ModularCrossing& x, const ModularCrossing& y) { return x.gap < y.gap; });
    return out;
}

}  // namespace ionsim
