#include "ionsim/dynamics.hpp"

#include <cmath>
#include <complex>
#include <random>

namespace ionsim {

namespace {

using Cplx = std::complex<double>;
constexpr double kNode1 = 0.5 - 0.28867513459481288225;
constexpr double kNode2 = 0.5 + 0.28867513459481288225;

// real matrix times complex vector without forming a complex copy
Eigen::VectorXcd real_apply(const Eigen::MatrixXd& m, const Eigen::VectorXcd& v) {
    Eigen::VectorXd re = m * v.real();
    Eigen::VectorXd im = m * v.imag();
    Eigen::VectorXcd out(v.size());
    out.real() = re;
    out.imag() = im;
    return out;
}

Eigen::MatrixXcd exp_minus_i_hermitian(const Eigen::MatrixXcd& m) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(m);
    Eigen::VectorXcd phases(m.rows());
    for (int k = 0; k < m.rows(); ++k) phases[k] = std::polar(1.0, -es.eigenvalues()[k]);
    return es.eigenvectors() * phases.asDiagonal() * es.eigenvectors().adjoint();
}

// One fourth-order Magnus step for H(t) = D + f(t) N applied to a vector.
template <class DriveFn>
void magnus_step(const Eigen::VectorXd& energies, const Eigen::MatrixXd& n_matrix,
                 const Eigen::MatrixXd& comm_dn, const DriveFn& f, double t, double h,
                 Eigen::VectorXcd& psi) {
    const double c1 = f(t + kNode1 * h);
    const double c2 = f(t + kNode2 * h);
    Eigen::MatrixXcd m = ((h / 2) * (c1 + c2)) * n_matrix.cast<Cplx>();
    m += (Cplx(0, 1) * (std::sqrt(3.0) * h * h / 12 * (c2 - c1))) * comm_dn;
    for (int i = 0; i < energies.size(); ++i) m(i, i) += h * energies[i];
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(m);
    Eigen::VectorXcd proj = es.eigenvectors().adjoint() * psi;
    for (int k = 0; k < proj.size(); ++k) proj[k] *= std::polar(1.0, -es.eigenvalues()[k]);
    psi = es.eigenvectors() * proj;
}

// Floquet modes at a frozen amplitude and period start phase, labeled by an
// amplitude track from zero at that same phase. The tracking step matches
// the production 10 MHz increment so crossings resolve the same way.
Eigen::MatrixXcd labeled_modes(const DrivenTransmon& sys, double omega_d, double eps,
                               double t0, int steps_per_period,
                               double delta_eps = two_pi * 0.010) {
    const int d = sys.dim();
    const int points = std::max(2, static_cast<int>(std::ceil(eps / delta_eps)));
    Eigen::MatrixXcd prev = Eigen::MatrixXcd::Identity(d, d);
    for (int k = 1; k <= points; ++k) {
        double e = eps * k / points;
        PropagatorResult prop = one_period_propagator(sys, omega_d, e, steps_per_period, t0, 1);
        Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(prop.u);
        Eigen::MatrixXcd modes = es.eigenvectors();
        for (int c = 0; c < d; ++c) modes.col(c).normalize();
        Eigen::MatrixXd overlap = (prev.adjoint() * modes).cwiseAbs2();
        Eigen::MatrixXcd ordered = Eigen::MatrixXcd::Zero(d, d);
        std::vector<char> used(d, 0), done(d, 0);
        for (int round = 0; round < d; ++round) {
            int bb = -1, cc = -1;
            double best = -1;
            for (int b = 0; b < d; ++b) {
                if (done[b]) continue;
                for (int c = 0; c < d; ++c) {
                    if (used[c]) continue;
                    if (overlap(b, c) > best) {
                        best = overlap(b, c);
                        bb = b;
                        cc = c;
                    }
                }
            }
            ordered.col(bb) = modes.col(cc);
            done[bb] = 1;
            used[cc] = 1;
        }
        prev = ordered;
    }
    return prev;
}

}  // namespace

std::string DriveProtocol::validate() const {
    if (kappa <= 0) throw std::invalid_argument("kappa must be positive");
    if (t_final <= 0) throw std::invalid_argument("t_final must be positive");
    if (omega_d <= 0 || omega_r <= 0) throw std::invalid_argument("frequencies must be positive");
    return {};
}

DriveProtocol DriveProtocol::for_target_nbar(double nbar, double kappa, double omega_d,
                                             double omega_r, double g, double t_final) {
    DriveProtocol p;
    p.kappa = kappa;
    p.omega_d = omega_d;
    p.omega_r = omega_r;
    p.g = g;
    p.epsilon_d = kappa * std::sqrt(nbar);
    p.t_final = t_final > 0 ? t_final : 10 / kappa;
    return p;
}

double effective_drive_envelope(const DriveProtocol& p, double t) {
    if (p.form == DriveProtocol::Form::simplified)
        return p.eps_t(t) * std::cos(p.omega_d * t);
    // Full form: E_t(t) = 2 g Im[alpha(t)] with the closed-form displaced
    // amplitude; both sidebands and the e^{-kappa t/2} transient included.
    const Cplx i_(0, 1);
    double wm = p.omega_r - p.omega_d;
    double wp = p.omega_r + p.omega_d;
    Cplx decay = std::exp(-(i_ * p.omega_r + p.kappa / 2) * t);
    Cplx alpha = p.epsilon_d / 2.0 *
                 ((std::exp(-i_ * p.omega_d * t) - decay) / Cplx(wm, -p.kappa / 2) -
                  (std::exp(i_ * p.omega_d * t) - decay) / Cplx(wp, -p.kappa / 2));
    return 2 * p.g * alpha.imag();
}

TrajectoryRecord evolve_driven_transmon(const DrivenTransmon& sys, const DriveProtocol& p,
                                        int initial_level, int steps_per_period, int records,
                                        std::vector<int> watched) {
    p.validate();
    if (initial_level < 0 || initial_level >= sys.dim())
        throw std::invalid_argument("initial level outside the kept transmon space");
    const int d = sys.dim();
    const double period = two_pi / p.omega_d;
    const double h = period / steps_per_period;
    const std::int64_t nsteps = static_cast<std::int64_t>(std::ceil(p.t_final / h));
    const std::int64_t stride = std::max<std::int64_t>(1, nsteps / std::max(records, 1));

    Eigen::MatrixXd comm_dn(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j)
            comm_dn(i, j) = (sys.energies[i] - sys.energies[j]) * sys.charge_matrix(i, j);

    auto drive = [&](double t) { return effective_drive_envelope(p, t); };

    TrajectoryRecord rec;
    rec.watched = watched;
    std::vector<std::array<double, 3>> rows;  // t, nbar, <N_t>
    std::vector<Eigen::VectorXd> proj_rows;

    Eigen::VectorXcd psi = Eigen::VectorXcd::Zero(d);
    psi[initial_level] = 1.0;

    auto record_at = [&](double t) {
        double pop = 0;
        for (int j = 0; j < d; ++j) pop += j * std::norm(psi[j]);
        rows.push_back({t, p.nbar(t), pop});
        if (!watched.empty()) {
            Eigen::MatrixXcd modes =
                labeled_modes(sys, p.omega_d, p.eps_t(t), t, steps_per_period);
            Eigen::VectorXd pr(static_cast<int>(watched.size()));
            double total = 0;
            for (int c = 0; c < d; ++c) total += std::norm(modes.col(c).dot(psi));
            for (std::size_t w = 0; w < watched.size(); ++w)
                pr[static_cast<int>(w)] = std::norm(modes.col(watched[w]).dot(psi));
            proj_rows.push_back(pr);
            rec.completeness_defect = std::max(rec.completeness_defect, std::abs(1.0 - total));
        }
    };

    double t = 0;
    record_at(0.0);
    for (std::int64_t s = 0; s < nsteps; ++s) {
        magnus_step(sys.energies, sys.charge_matrix, comm_dn, drive, t, h, psi);
        t += h;
        if ((s + 1) % stride == 0 || s + 1 == nsteps) record_at(t);
    }
    double norm_defect = std::abs(psi.norm() - 1.0);
    if (norm_defect > 1e-6) throw IntegrationError("state norm drifted", norm_defect);

    rec.times.reserve(rows.size());
    for (const auto& r : rows) {
        rec.times.push_back(r[0]);
        rec.nbar.push_back(r[1]);
        rec.population.push_back(r[2]);
    }
    if (!watched.empty()) {
        rec.projections.resize(static_cast<int>(proj_rows.size()), static_cast<int>(watched.size()));
        for (std::size_t r = 0; r < proj_rows.size(); ++r)
            rec.projections.row(static_cast<int>(r)) = proj_rows[r];
    }
    return rec;
}

std::vector<AdiabaticityPoint> adiabaticity_scan(const DrivenTransmon& sys, double omega_d,
                                                 double g, double target_nbar,
                                                 const std::vector<double>& kappa_grid,
                                                 int initial_level, int partner_level,
                                                 int steps_per_period) {
    std::vector<AdiabaticityPoint> out(kappa_grid.size());
    detail::parallel_for(kappa_grid.size(), 0, [&](std::size_t k) {
        double kappa = kappa_grid[k];
        DriveProtocol p =
            DriveProtocol::for_target_nbar(target_nbar, kappa, omega_d, omega_d, g, 10 / kappa);
        TrajectoryRecord rec = evolve_driven_transmon(sys, p, initial_level, steps_per_period, 1,
                                                      {initial_level, partner_level});
        out[k].kappa = kappa;
        out[k].p_adiabatic = rec.projections(rec.projections.rows() - 1, 0);
        out[k].p_diabatic = rec.projections(rec.projections.rows() - 1, 1);
    });
    return out;
}

namespace {

// Shared fixture for the open-system solvers, real gauge throughout.
struct OpenSystem {
    Eigen::MatrixXd h0;       // static coupled Hamiltonian, diagonal shifted
    Eigen::MatrixXd drive_op; // a + a'
    Eigen::VectorXd nr_diag;  // photon number per basis state
    Eigen::VectorXd nt_diag;  // transmon index per basis state
    Eigen::MatrixXd branch_vectors;  // eigenvectors, column-blocked per branch
    std::vector<std::pair<int, int>> branch_blocks;  // (offset, count) per branch
    Eigen::VectorXd initial;
    int dim_t, dim_r;
    double shift;
};

OpenSystem build_open_system(const CoupledModelParams& p, int initial_branch) {
    TransmonSpectrum spec = diagonalize_transmon(p.transmon);
    CoupledEigensystem sys = diagonalize_coupled(p, spec);
    DressedBranchSet set = assign_branches(sys);

    OpenSystem os;
    os.dim_t = p.dim_t;
    os.dim_r = p.dim_r;
    const int dim = p.dim();
    os.h0 = build_coupled_hamiltonian_real(p, spec);
    os.shift = 0.5 * (os.h0.diagonal().maxCoeff() + os.h0.diagonal().minCoeff());
    os.h0.diagonal().array() -= os.shift;

    os.drive_op = Eigen::MatrixXd::Zero(dim, dim);
    for (int i = 0; i < p.dim_t; ++i)
        for (int m = 0; m + 1 < p.dim_r; ++m) {
            double amp = std::sqrt(m + 1.0);
            os.drive_op(i * p.dim_r + m, i * p.dim_r + m + 1) = amp;
            os.drive_op(i * p.dim_r + m + 1, i * p.dim_r + m) = amp;
        }
    os.nr_diag.resize(dim);
    os.nt_diag.resize(dim);
    for (int i = 0; i < p.dim_t; ++i)
        for (int m = 0; m < p.dim_r; ++m) {
            os.nr_diag[i * p.dim_r + m] = m;
            os.nt_diag[i * p.dim_r + m] = i;
        }

    int total = 0;
    for (const auto& br : set.branches) total += static_cast<int>(br.size());
    os.branch_vectors.resize(dim, total);
    int off = 0;
    for (const auto& br : set.branches) {
        os.branch_blocks.push_back({off, static_cast<int>(br.size())});
        for (const auto& r : br) os.branch_vectors.col(off++) = sys.eigenvectors.col(r.eigenstate);
    }
    os.initial = sys.eigenvectors.col(set.branches[initial_branch][0].eigenstate);
    return os;
}

// d psi = -i (H(t) - i kappa/2 a'a) psi dt, classic RK4.
void rk4_step(const OpenSystem& os, double drive_value, double drive_mid, double drive_end,
              double kappa, double h, Eigen::VectorXcd& psi) {
    auto rhs = [&](const Eigen::VectorXcd& v, double dval) -> Eigen::VectorXcd {
        Eigen::VectorXcd hv = real_apply(os.h0, v) + dval * real_apply(os.drive_op, v);
        Eigen::VectorXcd out = Cplx(0, -1) * hv;
        out -= (kappa / 2) * os.nr_diag.cast<Cplx>().cwiseProduct(v);
        return out;
    };
    Eigen::VectorXcd k1 = rhs(psi, drive_value);
    Eigen::VectorXcd k2 = rhs(psi + (h / 2) * k1, drive_mid);
    Eigen::VectorXcd k3 = rhs(psi + (h / 2) * k2, drive_mid);
    Eigen::VectorXcd k4 = rhs(psi + h * k3, drive_end);
    psi += (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4);
}

}  // namespace

OpenEvolutionResult evolve_open_coupled(const CoupledModelParams& p, const DriveProtocol& drive,
                                        int initial_branch, int n_traj, std::uint64_t seed,
                                        int records, int steps_per_period, int workers) {
    drive.validate();
    // resonator drive -i eps_d sin(w_d t)(a - a'), real gauge eps_d sin(w_d t)(a + a')
    auto resonator_drive = [&drive](double t) {
        return drive.epsilon_d * std::sin(drive.omega_d * t);
    };
    OpenSystem os = build_open_system(p, initial_branch);
    const int dim = p.dim();
    const double period = two_pi / drive.omega_d;
    const double h = period / steps_per_period;
    const std::int64_t nsteps = static_cast<std::int64_t>(std::ceil(drive.t_final / h));
    const std::int64_t stride = std::max<std::int64_t>(1, nsteps / records);
    const int nb = static_cast<int>(os.branch_blocks.size());

    std::vector<std::int64_t> rec_steps;
    for (std::int64_t s = 0; s <= nsteps; s += stride) rec_steps.push_back(s);
    const int nrec = static_cast<int>(rec_steps.size());

    std::vector<Eigen::MatrixXd> traj_pop(n_traj);
    std::vector<Eigen::VectorXd> traj_nbar(n_traj);
    std::vector<double> traj_top(n_traj, 0.0);

    detail::parallel_for(n_traj, workers, [&](std::size_t traj) {
        std::mt19937_64 rng(detail::substream_seed(seed, traj));
        std::uniform_real_distribution<double> uni(0.0, 1.0);
        Eigen::VectorXcd psi = os.initial.cast<Cplx>();
        double jump_threshold = uni(rng);
        Eigen::MatrixXd pops(nrec, nb);
        Eigen::VectorXd nbars(nrec);
        double top = 0;
        int next_rec = 0;
        auto record = [&]() {
            Eigen::VectorXcd unit = psi / psi.norm();
            Eigen::VectorXd w = unit.cwiseAbs2();
            Eigen::VectorXd pre = os.branch_vectors.transpose() * unit.real();
            Eigen::VectorXd pim = os.branch_vectors.transpose() * unit.imag();
            Eigen::VectorXd amp2 = pre.cwiseAbs2() + pim.cwiseAbs2();
            for (int b = 0; b < nb; ++b) {
                auto [off, count] = os.branch_blocks[b];
                pops(next_rec, b) = amp2.segment(off, count).sum();
            }
            nbars[next_rec] = w.dot(os.nr_diag);
            double tw = 0;
            for (int i = 0; i < os.dim_t; ++i) tw += w[i * os.dim_r + os.dim_r - 1];
            top = std::max(top, tw);
            ++next_rec;
        };
        record();
        double t = 0;
        for (std::int64_t s = 0; s < nsteps; ++s) {
            rk4_step(os, resonator_drive(t), resonator_drive(t + h / 2), resonator_drive(t + h),
                     drive.kappa, h, psi);
            t += h;
            if (psi.squaredNorm() <= jump_threshold) {
                // apply a (photon loss) and restart the clock
                Eigen::VectorXcd lowered = Eigen::VectorXcd::Zero(dim);
                for (int i = 0; i < os.dim_t; ++i)
                    for (int m = 0; m + 1 < os.dim_r; ++m)
                        lowered[i * os.dim_r + m] =
                            std::sqrt(m + 1.0) * psi[i * os.dim_r + m + 1];
                double nrm = lowered.norm();
                if (nrm > 1e-150)
                    psi = lowered / nrm;
                else
                    psi /= psi.norm();  // no photon to lose; renormalize and go on
                jump_threshold = uni(rng);
            }
            if (next_rec < nrec && s + 1 == rec_steps[next_rec]) record();
        }
        traj_pop[traj] = std::move(pops);
        traj_nbar[traj] = std::move(nbars);
        traj_top[traj] = top;
    });

    OpenEvolutionResult out;
    out.times.resize(nrec);
    for (int r = 0; r < nrec; ++r) out.times[r] = rec_steps[r] * h;
    out.branch_population = Eigen::MatrixXd::Zero(nrec, nb);
    out.branch_stderr = Eigen::MatrixXd::Zero(nrec, nb);
    out.nbar.assign(nrec, 0.0);
    for (int traj = 0; traj < n_traj; ++traj) {
        out.branch_population += traj_pop[traj];
        for (int r = 0; r < nrec; ++r) out.nbar[r] += traj_nbar[traj][r];
    }
    out.branch_population /= n_traj;
    for (int r = 0; r < nrec; ++r) out.nbar[r] /= n_traj;
    if (n_traj > 1) {
        for (int traj = 0; traj < n_traj; ++traj) {
            Eigen::MatrixXd d = traj_pop[traj] - out.branch_population;
            out.branch_stderr += d.cwiseProduct(d);
        }
        out.branch_stderr =
            (out.branch_stderr / (n_traj * (n_traj - 1.0))).cwiseSqrt();
    }
    for (double tw : traj_top) out.max_top_fock_weight = std::max(out.max_top_fock_weight, tw);
    out.truncation_warning = out.max_top_fock_weight > 0.01;
    return out;
}

OpenEvolutionResult evolve_open_master(const CoupledModelParams& p, const DriveProtocol& drive,
                                       int initial_branch, int records, int steps_per_period) {
    drive.validate();
    OpenSystem os = build_open_system(p, initial_branch);
    const int dim = p.dim();
    const double period = two_pi / drive.omega_d;
    const double h = period / steps_per_period;
    const std::int64_t nsteps = static_cast<std::int64_t>(std::ceil(drive.t_final / h));
    const std::int64_t stride = std::max<std::int64_t>(1, nsteps / records);
    const int nb = static_cast<int>(os.branch_blocks.size());

    // complex copies fixed once; this path only runs at small truncations
    Eigen::MatrixXcd a_c = Eigen::MatrixXcd::Zero(dim, dim);
    for (int i = 0; i < os.dim_t; ++i)
        for (int m = 0; m + 1 < os.dim_r; ++m)
            a_c(i * os.dim_r + m, i * os.dim_r + m + 1) = std::sqrt(m + 1.0);
    Eigen::MatrixXcd h0_c = os.h0.cast<Cplx>();
    Eigen::MatrixXcd drive_c = os.drive_op.cast<Cplx>();
    Eigen::VectorXcd nr_c = os.nr_diag.cast<Cplx>();

    auto rhs = [&](const Eigen::MatrixXcd& rho, double dval) -> Eigen::MatrixXcd {
        Eigen::MatrixXcd hmat = h0_c + dval * drive_c;
        Eigen::MatrixXcd out = Cplx(0, -1) * (hmat * rho - rho * hmat);
        out += drive.kappa * (a_c * rho * a_c.adjoint());
        Eigen::MatrixXcd nr_rho = nr_c.asDiagonal() * rho;
        out -= drive.kappa / 2 * (nr_rho + nr_rho.adjoint());
        return out;
    };

    auto resonator_drive = [&drive](double t) {
        return drive.epsilon_d * std::sin(drive.omega_d * t);
    };
    OpenEvolutionResult out;
    out.branch_population = Eigen::MatrixXd::Zero(static_cast<int>(nsteps / stride) + 2, nb);
    Eigen::MatrixXcd rho = (os.initial * os.initial.transpose()).cast<Cplx>();
    int next_rec = 0;
    auto record = [&](double t) {
        out.times.push_back(t);
        for (int b = 0; b < nb; ++b) {
            auto [off, count] = os.branch_blocks[b];
            double pop = 0;
            for (int c = 0; c < count; ++c) {
                Eigen::VectorXcd v = os.branch_vectors.col(off + c).cast<Cplx>();
                pop += (v.adjoint() * rho * v)(0).real();
            }
            out.branch_population(next_rec, b) = pop;
        }
            double nb_mean = 0;
        for (int k = 0; k < dim; ++k) nb_mean += os.nr_diag[k] * rho(k, k).real();
        out.nbar.push_back(nb_mean);
        ++next_rec;
    };
    record(0.0);
    double t = 0;
    for (std::int64_t s = 0; s < nsteps; ++s) {
        double d0 = resonator_drive(t);
        double dm = resonator_drive(t + h / 2);
        double d1 = resonator_drive(t + h);
        Eigen::MatrixXcd k1 = rhs(rho, d0);
        Eigen::MatrixXcd k2 = rhs(rho + (h / 2) * k1, dm);
        Eigen::MatrixXcd k3 = rhs(rho + (h / 2) * k2, dm);
        Eigen::MatrixXcd k4 = rhs(rho + h * k3, d1);
        rho += (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4);
        t += h;
        if ((s + 1) % stride == 0 || s + 1 == nsteps) record(t);
    }
    out.branch_population.conservativeResize(next_rec, nb);
    return out;
}

}  // namespace ionsim
