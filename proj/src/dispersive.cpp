#include "ionsim/dispersive.hpp"

#include <cmath>
#include <iostream>

namespace ionsim {

namespace {

constexpr double kResonanceTol = 1e-6;   // relative to omega_r
constexpr double kSumTol = 1e-6;

void check_denominator(double den, double omega_r, int i, int j) {
    if (std::abs(den) < kResonanceTol * omega_r) throw ResonanceError(i, j, den);
}

int level_cap(const CouplingContext& ctx) {
    DerivedScales s = derived_scales(ctx.spectrum.params);
    return std::min(ctx.spectrum.dim(), 3 * s.bound_state_count);
}

}  // namespace

std::string CouplingContext::validate() const {
    if (omega_r <= 0) throw std::invalid_argument("omega_r must be positive");
    if (g <= 0) throw std::invalid_argument("g must be positive");
    double ratio = std::abs(g / detuning());
    if (ratio >= 0.5)
        return "|g/Delta| = " + std::to_string(ratio) + " is outside the dispersive regime";
    return {};
}

double chi_shift(const CouplingContext& ctx, int level) {
    const int cap = level_cap(ctx);
    if (level >= cap) throw std::invalid_argument("level outside the converged range");
    double sum = 0;
    double last_term = 0;
    for (int j = 0; j < cap; ++j) {
        if (j == level) continue;
        double gij = ctx.g_element(level, j);
        double wij = ctx.spectrum.omega(level, j);
        double d1 = ctx.omega_r - wij;
        double d2 = ctx.omega_r + wij;
        check_denominator(d1, ctx.omega_r, level, j);
        check_denominator(d2, ctx.omega_r, level, j);
        last_term = gij * gij * (1.0 / d1 - 1.0 / d2);
        sum += last_term;
    }
    // The sum always runs to the hard cap; the convergence criterion is
    // verified rather than used for early exit.
    if (std::abs(last_term) > kSumTol * std::abs(sum)) throw TruncationError(cap, last_term / sum);
    return sum;
}

double kerr_chi_estimate(const CouplingContext& ctx, int level) {
    const TransmonParams& p = ctx.spectrum.params;
    double n_zpf = std::pow(p.ej / (32 * p.ec), 0.25);
    double delta = ctx.detuning();
    double d1 = -delta + level * p.ec;
    double d2 = -delta + (level - 1) * p.ec;
    check_denominator(d1, ctx.omega_r, level, level + 1);
    check_denominator(d2, ctx.omega_r, level, level - 1);
    return ctx.g * ctx.g * n_zpf * n_zpf * ((level + 1) / d1 - level / d2);
}

JcCritical jc_critical_photon(const CouplingContext& ctx, int state) {
    const int cap = level_cap(ctx);
    if (state >= cap) throw std::invalid_argument("state outside the converged range");
    JcCritical best;
    best.value = std::numeric_limits<double>::infinity();
    for (int k = 0; k < cap; ++k) {
        for (int l = 0; l < cap; ++l) {
            if (k == l || (k != state && l != state)) continue;
            double gkl = ctx.g_element(k, l);
            if (std::abs(gkl) < 1e-12 * ctx.g) continue;
            double wkl = ctx.spectrum.omega(k, l);
            double value = std::pow((wkl - ctx.omega_r) / (2 * gkl), 2);
            if (value < best.value) best = {value, k, l};
        }
    }
    return best;
}

SWMatrixElements sw_matrix_elements(const CouplingContext& ctx, int dim_t) {
    if (dim_t > ctx.spectrum.dim()) throw std::invalid_argument("dim_t exceeds spectrum size");
    const double wr = ctx.omega_r;
    SWMatrixElements sw;
    sw.dim_t = dim_t;

    // Intermediate sums run over the full converged range, not just the
    // modeled dim_t levels, so the diagonal matches chi_shift exactly.
    const int kmax = level_cap(ctx);
    Eigen::MatrixXd gm(dim_t, dim_t);   // g_ij including the -n_g diagonal offset
    Eigen::MatrixXd w(dim_t, dim_t);    // w_ij = E_j - E_i
    for (int i = 0; i < dim_t; ++i)
        for (int j = 0; j < dim_t; ++j) {
            gm(i, j) = ctx.g_element(i, j);
            w(i, j) = ctx.spectrum.omega(i, j);
        }

    sw.s_t.resize(dim_t, dim_t);
    for (int i = 0; i < dim_t; ++i)
        for (int j = 0; j < dim_t; ++j) {
            double den = w(i, j) - wr;
            check_denominator(den, wr, i, j);
            sw.s_t(i, j) = gm(i, j) / den;
        }

    sw.chi.setZero(dim_t, dim_t);
    sw.eta.setZero(dim_t, dim_t);
    sw.lambda.setZero(dim_t, dim_t);
    for (int i = 0; i < dim_t; ++i)
        for (int j = 0; j < dim_t; ++j)
            for (int k = 0; k < kmax; ++k) {
                double gg = ctx.g_element(i, k) * ctx.g_element(k, j);
                if (gg == 0) continue;
                double wik = ctx.spectrum.omega(i, k), wjk = ctx.spectrum.omega(j, k);
                check_denominator(wr - wik, wr, i, k);
                check_denominator(wr + wik, wr, i, k);
                check_denominator(wr - wjk, wr, j, k);
                check_denominator(wr + wjk, wr, j, k);
                double wkj = ctx.spectrum.omega(k, j), wki = ctx.spectrum.omega(k, i);
                sw.chi(i, j) += gg * (wik / (wr * wr - wik * wik) + wjk / (wr * wr - wjk * wjk));
                sw.eta(i, j) += 0.5 * gg * (1.0 / (wr - wkj) - 1.0 / (wr + wki));
                sw.lambda(i, j) -= 0.5 * gg * (1.0 / (wr - wkj) + 1.0 / (wr - wki));
            }

    // Second-order generator pieces; S_t^dag = S_t^T for real matrix elements.
    // Work with the bare operator N = gm / g to keep the g factors explicit.
    const Eigen::MatrixXd& st = sw.s_t;
    Eigen::MatrixXd nmat = gm / ctx.g;
    Eigen::MatrixXd m1 = nmat * st + st.transpose() * nmat;
    Eigen::MatrixXd m2 = nmat * (st.transpose() - st) - (st.transpose() - st) * nmat;
    Eigen::MatrixXd m3 = st.transpose() * nmat - nmat * st.transpose();
    Eigen::MatrixXd m4 = nmat * st - st * nmat;
    sw.a2.setZero(dim_t, dim_t);
    sw.b2.setZero(dim_t, dim_t);
    sw.c2.resize(dim_t, dim_t);
    sw.d2.resize(dim_t, dim_t);
    for (int i = 0; i < dim_t; ++i)
        for (int j = 0; j < dim_t; ++j) {
            if (i != j) {
                sw.a2(i, j) = -ctx.g / 2 * m1(i, j) / w(i, j);
                sw.b2(i, j) = ctx.g / 2 * m2(i, j) / w(i, j);
            }
            double dc = w(i, j) + 2 * wr;
            double dd = w(i, j) - 2 * wr;
            check_denominator(dc, wr, i, j);
            check_denominator(dd, wr, i, j);
            sw.c2(i, j) = ctx.g / 2 * m3(i, j) / dc;
            sw.d2(i, j) = ctx.g / 2 * m4(i, j) / dd;
        }
    return sw;
}

namespace detail {

Eigen::VectorXcd expm_apply(const Eigen::MatrixXcd& a, Eigen::VectorXcd v) {
    double norm = a.cwiseAbs().rowwise().sum().maxCoeff();  // infinity norm
    int squarings = 0;
    while (norm > 0.5 && squarings < 40) {
        norm /= 2;
        ++squarings;
    }
    const double scale = std::ldexp(1.0, -squarings);
    const std::int64_t reps = std::int64_t{1} << squarings;
    for (std::int64_t r = 0; r < reps; ++r) {
        Eigen::VectorXcd term = v;
        Eigen::VectorXcd acc = v;
        for (int k = 1; k < 40; ++k) {
            term = (a * term) * (scale / k);
            acc += term;
            if (term.norm() < 1e-16 * acc.norm()) break;
        }
        v = acc;
    }
    return v;
}

}  // namespace detail

Eigen::VectorXcd sw_dressed_state(const CouplingContext& ctx, const SWMatrixElements& sw, int i,
                                  int n_r, int dim_r) {
    const int dim_t = sw.dim_t;
    if (n_r < 2) throw std::invalid_argument("n_r must be >= 2 for the two-photon terms in T");
    if (dim_r < n_r + 6) throw std::invalid_argument("dim_r must keep >= 6 Fock states above n_r");
    const int dim = dim_t * dim_r;
    using Cplx = std::complex<double>;

    Eigen::MatrixXcd s_full = Eigen::MatrixXcd::Zero(dim, dim);
    Eigen::MatrixXcd t_full = Eigen::MatrixXcd::Zero(dim, dim);
    auto idx = [dim_r](int it, int m) { return it * dim_r + m; };
    for (int a = 0; a < dim_t; ++a)
        for (int b = 0; b < dim_t; ++b) {
            for (int m = 0; m + 1 < dim_r; ++m) {
                double amp = std::sqrt(m + 1.0);
                // S = -i (S_t a'  +  a S_t^T)
                s_full(idx(a, m + 1), idx(b, m)) += Cplx(0, -1) * sw.s_t(a, b) * amp;
                s_full(idx(a, m), idx(b, m + 1)) += Cplx(0, -1) * sw.s_t(b, a) * amp;
            }
            for (int m = 0; m < dim_r; ++m) {
                t_full(idx(a, m), idx(b, m)) += sw.a2(a, b) + sw.b2(a, b) * m;
                if (m + 2 < dim_r) {
                    double amp = std::sqrt((m + 1.0) * (m + 2.0));
                    t_full(idx(a, m), idx(b, m + 2)) += sw.c2(a, b) * amp;
                    t_full(idx(a, m + 2), idx(b, m)) += sw.d2(a, b) * amp;
                }
            }
        }

    Eigen::VectorXcd v = Eigen::VectorXcd::Zero(dim);
    v[idx(i, n_r)] = 1.0;
    v = detail::expm_apply(-t_full, std::move(v));
    v = detail::expm_apply(-s_full, std::move(v));
    return v;
}

}  // namespace ionsim
