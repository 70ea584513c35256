#include "ionsim/floquet.hpp"

#include <algorithm>
#include <cmath>

namespace ionsim {

namespace {

// Gauss-Legendre nodes for the fourth-order Magnus step.
constexpr double kNode1 = 0.5 - 0.28867513459481288225;  // 1/2 - sqrt(3)/6
constexpr double kNode2 = 0.5 + 0.28867513459481288225;

Eigen::MatrixXcd exp_minus_i_hermitian(const Eigen::MatrixXcd& m) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(m);
    Eigen::VectorXcd phases(m.rows());
    for (int k = 0; k < m.rows(); ++k)
        phases[k] = std::polar(1.0, -es.eigenvalues()[k]);
    return es.eigenvectors() * phases.asDiagonal() * es.eigenvectors().adjoint();
}

void fix_mode_phase(Eigen::VectorXcd& v) {
    Eigen::Index imax;
    v.cwiseAbs().maxCoeff(&imax);
    std::complex<double> ph = v[imax] / std::abs(v[imax]);
    v /= ph;
}

// Greedy unique matching of new modes to previous branch modes.
std::vector<int> match_modes(const Eigen::MatrixXd& overlap) {
    const int n = static_cast<int>(overlap.rows());
    std::vector<int> pick(n, -1);
    std::vector<char> used(n, 0), done(n, 0);
    for (int round = 0; round < n; ++round) {
        int bb = -1, cc = -1;
        double best = -1;
        for (int b = 0; b < n; ++b) {
            if (done[b]) continue;
            for (int c = 0; c < n; ++c) {
                if (used[c]) continue;
                if (overlap(b, c) > best) {
                    best = overlap(b, c);
                    bb = b;
                    cc = c;
                }
            }
        }
        pick[bb] = cc;
        done[bb] = 1;
        used[cc] = 1;
    }
    return pick;
}

struct EigenModes {
    Eigen::VectorXd quasienergies;
    Eigen::MatrixXcd modes;
};

EigenModes propagator_modes(const Eigen::MatrixXcd& u, double omega_d) {
    const double period = two_pi / omega_d;
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(u);
    EigenModes out;
    out.quasienergies.resize(u.rows());
    out.modes = es.eigenvectors();
    for (int k = 0; k < u.rows(); ++k) {
        out.quasienergies[k] = -std::arg(es.eigenvalues()[k]) / period;
        Eigen::VectorXcd col = out.modes.col(k);
        col.normalize();
        fix_mode_phase(col);
        out.modes.col(k) = col;
    }
    return out;
}

}  // namespace

DrivenTransmon DrivenTransmon::from_spectrum(const TransmonSpectrum& spec, int dim_t) {
    if (dim_t > spec.dim()) throw std::invalid_argument("dim_t exceeds spectrum size");
    DrivenTransmon sys;
    sys.energies = spec.energies.head(dim_t);
    sys.charge_matrix = spec.charge_matrix.topLeftCorner(dim_t, dim_t);
    sys.ej = spec.params.ej;
    return sys;
}

PropagatorResult one_period_propagator(const DrivenTransmon& sys, double omega_d,
                                       double epsilon_t, int steps_per_period, double t0,
                                       int snapshots) {
    if (steps_per_period < 16) throw std::invalid_argument("too few steps per period");
    const int d = sys.dim();
    const double period = two_pi / omega_d;
    const double h = period / steps_per_period;

    // [D, N]_{ij} = (E_i - E_j) N_ij enters the Magnus commutator term.
    Eigen::MatrixXd comm_dn(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j)
            comm_dn(i, j) = (sys.energies[i] - sys.energies[j]) * sys.charge_matrix(i, j);

    PropagatorResult result;
    result.u = Eigen::MatrixXcd::Identity(d, d);
    result.snapshots.reserve(snapshots);
    std::vector<int> snap_steps(snapshots);
    for (int k = 0; k < snapshots; ++k)
        snap_steps[k] = static_cast<int>(std::llround(static_cast<double>(k) * steps_per_period /
                                                      snapshots));
    int next_snap = 0;

    Eigen::MatrixXcd m(d, d);
    for (int s = 0; s < steps_per_period; ++s) {
        while (next_snap < snapshots && snap_steps[next_snap] == s) {
            result.snapshots.push_back(result.u);
            ++next_snap;
        }
        const double t = t0 + s * h;
        const double c1 = epsilon_t * std::cos(omega_d * (t + kNode1 * h));
        const double c2 = epsilon_t * std::cos(omega_d * (t + kNode2 * h));
        // M = (h/2)(H1 + H2) + i (sqrt(3) h^2/12)(c2 - c1) [D, N]; U_step = exp(-i M)
        m = ((h / 2) * (c1 + c2)) * sys.charge_matrix.cast<std::complex<double>>();
        m += (std::complex<double>(0, 1) * (std::sqrt(3.0) * h * h / 12 * (c2 - c1))) * comm_dn;
        for (int i = 0; i < d; ++i) m(i, i) += h * sys.energies[i];
        result.u = exp_minus_i_hermitian(m) * result.u;
    }
    result.unitarity_defect =
        (result.u.adjoint() * result.u - Eigen::MatrixXcd::Identity(d, d)).cwiseAbs().maxCoeff();
    if (result.unitarity_defect > 1e-9)
        throw IntegrationError("propagator lost unitarity", result.unitarity_defect);
    return result;
}

double period_avg_population(const std::vector<Eigen::MatrixXcd>& snapshots,
                             const Eigen::VectorXcd& mode) {
    double acc = 0;
    for (const auto& u : snapshots) {
        Eigen::VectorXcd phi = u * mode;
        for (int j = 0; j < phi.size(); ++j) acc += j * std::norm(phi[j]);
    }
    return acc / snapshots.size();
}

double ipr(const Eigen::VectorXcd& mode) {
    double acc = 0;
    for (int j = 0; j < mode.size(); ++j) acc += std::norm(mode[j]) * std::norm(mode[j]);
    return acc;
}

double floquet_time_avg_energy(const std::vector<Eigen::MatrixXcd>& snapshots,
                               const Eigen::VectorXcd& mode, const DrivenTransmon& sys) {
    double acc = 0;
    for (const auto& u : snapshots) {
        Eigen::VectorXcd phi = u * mode;
        for (int j = 0; j < phi.size(); ++j) acc += sys.energies[j] * std::norm(phi[j]);
    }
    return acc / snapshots.size() + sys.ej;  // zero at the cosine well bottom
}

FloquetBranchSet track_floquet_branches(const DrivenTransmon& sys, double omega_d, double g,
                                        double eps_max, double delta_eps, int steps_per_period,
                                        int samples_per_period) {
    if (delta_eps <= 0) throw std::invalid_argument("delta_eps must be positive");
    const int d = sys.dim();
    const int npts = static_cast<int>(std::ceil(eps_max / delta_eps)) + 1;

    FloquetBranchSet set;
    set.omega_d = omega_d;
    set.g = g;
    set.steps_per_period = steps_per_period;
    set.eps_grid.resize(npts);
    set.branches.assign(d, std::vector<FloquetMode>(npts));

    Eigen::MatrixXcd prev_modes = Eigen::MatrixXcd::Identity(d, d);
    for (int k = 0; k < npts; ++k) {
        const double eps = k * delta_eps;
        set.eps_grid[k] = eps;
        PropagatorResult prop =
            one_period_propagator(sys, omega_d, eps, steps_per_period, 0.0, samples_per_period);
        EigenModes em = propagator_modes(prop.u, omega_d);

        Eigen::MatrixXd overlap = (prev_modes.adjoint() * em.modes).cwiseAbs2();
        std::vector<int> pick = match_modes(overlap);
        for (int b = 0; b < d; ++b) {
            double best = overlap(b, pick[b]);
            double second = 0;
            for (int c = 0; c < d; ++c)
                if (c != pick[b]) second = std::max(second, overlap(b, c));
            if (best < 0.5 && k > 0) set.ambiguities.push_back({b, k, best, second});
            FloquetMode& fm = set.branches[b][k];
            fm.quasienergy = fold_modular(em.quasienergies[pick[b]], omega_d);
            fm.mode = em.modes.col(pick[b]);
            fm.avg_population = period_avg_population(prop.snapshots, fm.mode);
            fm.ipr = ipr(fm.mode);
            fm.avg_energy = floquet_time_avg_energy(prop.snapshots, fm.mode, sys);
        }
        for (int b = 0; b < d; ++b) prev_modes.col(b) = set.branches[b][k].mode;
    }
    return set;
}

FloquetCritical floquet_critical_photon(const FloquetBranchSet& set, int state) {
    if (state != 0 && state != 1) throw std::invalid_argument("state must be 0 or 1");
    const double threshold = (state == 0) ? 2.0 : 3.0;
    const auto& br = set.branches[state];
    FloquetCritical res;
    res.max_explored = set.nbar(set.eps_grid.size() - 1);
    for (std::size_t k = 1; k < br.size(); ++k) {
        if (br[k].avg_population >= threshold) {
            double n0 = set.nbar(k - 1), n1 = set.nbar(k);
            double p0 = br[k - 1].avg_population, p1 = br[k].avg_population;
            res.value = n0 + (threshold - p0) * (n1 - n0) / (p1 - p0);
            res.reached = true;
            return res;
        }
    }
    return res;
}

namespace {

// Fold-aware gap between two tracked branches at grid point k.
double branch_gap(const FloquetBranchSet& set, int bi, int bj, std::size_t k) {
    return fold_distance(set.branches[bi][k].quasienergy, set.branches[bj][k].quasienergy,
                         set.omega_d);
}

// Gap at an off-grid amplitude: fresh propagator, modes matched by overlap
// with the tracked branch modes at the nearest grid point.
double gap_at(const FloquetBranchSet& set, const DrivenTransmon& sys, int bi, int bj,
              double eps) {
    std::size_t k = std::min<std::size_t>(
        set.eps_grid.size() - 1,
        static_cast<std::size_t>(std::llround(eps / (set.eps_grid[1] - set.eps_grid[0]))));
    PropagatorResult prop = one_period_propagator(sys, set.omega_d, eps, set.steps_per_period, 0, 1);
    EigenModes em = propagator_modes(prop.u, set.omega_d);
    auto best_for = [&](int b) {
        int arg = 0;
        double best = -1;
        for (int c = 0; c < em.modes.cols(); ++c) {
            double ov = std::norm(set.branches[b][k].mode.dot(em.modes.col(c)));
            if (ov > best) {
                best = ov;
                arg = c;
            }
        }
        return arg;
    };
    double qi = em.quasienergies[best_for(bi)];
    double qj = em.quasienergies[best_for(bj)];
    return fold_distance(qi, qj, set.omega_d);
}

}  // namespace

std::vector<AvoidedCrossing> find_avoided_crossings(const FloquetBranchSet& set,
                                                    const DrivenTransmon& sys, int bi, int bj,
                                                    bool refine) {
    const std::size_t n = set.eps_grid.size();
    std::vector<AvoidedCrossing> out;
    std::vector<double> gap(n);
    for (std::size_t k = 0; k < n; ++k) gap[k] = branch_gap(set, bi, bj, k);

    for (std::size_t k = 1; k + 1 < n; ++k) {
        if (!(gap[k] <= gap[k - 1] && gap[k] < gap[k + 1])) continue;
        AvoidedCrossing ac;
        ac.branch_i = bi;
        ac.branch_j = bj;
        ac.eps_ac = set.eps_grid[k];
        ac.gap = gap[k];

        // hyperbola fit gap^2 = a x^2 + b x + c on surrounding grid points
        const std::size_t lo = k >= 5 ? k - 5 : 0;
        const std::size_t hi = std::min(n - 1, k + 5);
        Eigen::MatrixXd m(hi - lo + 1, 3);
        Eigen::VectorXd y(hi - lo + 1);
        for (std::size_t t = lo; t <= hi; ++t) {
            double x = set.eps_grid[t] - set.eps_grid[k];
            m(t - lo, 0) = x * x;
            m(t - lo, 1) = x;
            m(t - lo, 2) = 1;
            y[t - lo] = gap[t] * gap[t];
        }
        Eigen::Vector3d coef = m.colPivHouseholderQr().solve(y);
        if (coef[0] > 0) {
            double x0 = -coef[1] / (2 * coef[0]);
            double d2 = coef[2] - coef[1] * coef[1] / (4 * coef[0]);
            ac.eps_ac = set.eps_grid[k] + x0;
            ac.slope = std::sqrt(coef[0]);
            if (d2 > 0) ac.gap = std::sqrt(d2);
        }
        if (refine) {
            // golden-section minimization of the true gap around the fit
            double a = set.eps_grid[k > 0 ? k - 1 : 0];
            double b = set.eps_grid[std::min(n - 1, k + 1)];
            const double gr = 0.6180339887498949;
            double c = b - gr * (b - a), dd = a + gr * (b - a);
            double fc = gap_at(set, sys, bi, bj, c), fd = gap_at(set, sys, bi, bj, dd);
            for (int it = 0; it < 24; ++it) {
                if (fc < fd) {
                    b = dd;
                    dd = c;
                    fd = fc;
                    c = b - gr * (b - a);
                    fc = gap_at(set, sys, bi, bj, c);
                } else {
                    a = c;
                    c = dd;
                    fc = fd;
                    dd = a + gr * (b - a);
                    fd = gap_at(set, sys, bi, bj, dd);
                }
            }
            ac.eps_ac = (a + b) / 2;
            ac.gap = gap_at(set, sys, bi, bj, ac.eps_ac);
        }
        if (ac.gap > 0 && ac.slope > 0) ac.curvature = ac.slope * ac.slope / (2 * ac.gap);
        ac.nbar = std::pow(ac.eps_ac / (2 * set.g), 2);
        out.push_back(ac);
    }
    std::sort(out.begin(), out.end(),
              [](const AvoidedCrossing& a, const AvoidedCrossing& b) { return a.gap < b.gap; });
    return out;
}

LandauZener landau_zener(const AvoidedCrossing& crossing, double eps_target, double kappa) {
    if (crossing.slope <= 0 || crossing.gap <= 0)
        throw IntegrationError("avoided crossing unresolved on this grid", crossing.gap);
    if (eps_target <= crossing.eps_ac)
        throw std::invalid_argument("drive target never reaches the crossing");
    LandauZener lz;
    // d eps_t/dt of the ramp eps_target (1 - e^{-kappa t/2}) at the crossing
    double ramp_rate = kappa / 2 * (eps_target - crossing.eps_ac);
    lz.speed = crossing.slope * ramp_rate;
    lz.p_lz = std::exp(-two_pi / 2 * crossing.gap * crossing.gap / (2 * lz.speed));
    return lz;
}

double shirley_ac_stark(const TransmonSpectrum& spec, double omega_d, double nbar_r, double g,
                        int level) {
    DerivedScales s = derived_scales(spec.params);
    const int cap = std::min(spec.dim(), 3 * s.bound_state_count);
    if (level >= cap) throw std::invalid_argument("level outside the converged range");
    double sum = 0;
    for (int j = 0; j < cap; ++j) {
        if (j == level) continue;
        double wij = spec.omega(level, j);
        double den = omega_d * omega_d - wij * wij;
        if (std::abs(den) < 1e-6 * omega_d * omega_d)
            throw ResonanceError(level, j, den);
        double gij = g * spec.charge_matrix(level, j);
        sum += wij * gij * gij / den;
    }
    return 2 * nbar_r * sum;
}

}  // namespace ionsim
