#include "ionsim/pendulum.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <utility>

namespace ionsim {

namespace {

// Yoshida composition weights over the second-order drift-kick-drift core.
std::vector<double> splitting_weights(int order) {
    switch (order) {
        case 2:
            return {1.0};
        case 4: {
            double w1 = 1.0 / (2.0 - std::cbrt(2.0));
            double w0 = 1.0 - 2.0 * w1;
            return {w1, w0, w1};
        }
        case 6: {
            // Yoshida's solution A
            double w1 = -0.117767998417887e1;
            double w2 = 0.235573213359357e0;
            double w3 = 0.784513610477560e0;
            double w0 = 1.0 - 2.0 * (w1 + w2 + w3);
            return {w3, w2, w1, w0, w1, w2, w3};
        }
        default:
            throw std::invalid_argument("splitting order must be 2, 4 or 6");
    }
}

struct Integrator {
    double omega, eps;
    std::vector<double> weights;

    // drift: phi advances under n plus the exact drive impulse; kick: n
    // under the pendulum torque at frozen phi.
    inline void leapfrog(double& phi, double& n, double& t, double h) const {
        double t_half = t + h / 2;
        phi += n * (h / 2) + eps / omega * (std::sin(omega * t_half) - std::sin(omega * t));
        n -= h * std::sin(phi);
        phi += n * (h / 2) + eps / omega * (std::sin(omega * (t + h)) - std::sin(omega * t_half));
        t += h;
    }

    inline void step(double& phi, double& n, double& t, double h) const {
        for (double w : weights) leapfrog(phi, n, t, w * h);
    }
};

}  // namespace

std::string ClassicalParams::validate() const {
    if (omega_d_tilde <= 0) throw std::invalid_argument("omega_d_tilde must be positive");
    if (epsilon_tilde < 0) throw std::invalid_argument("epsilon_tilde must be non-negative");
    if (hbar_eff <= 0) throw std::invalid_argument("hbar_eff must be positive");
    if (periods < 1 || steps_per_period < 4) throw std::invalid_argument("grid too coarse");
    return {};
}

void propagate(const ClassicalParams& p, double& phi, double& n, double& t, long nsteps,
               double h) {
    Integrator integ{p.omega_d_tilde, p.epsilon_tilde, splitting_weights(p.splitting_order)};
    for (long s = 0; s < nsteps; ++s) integ.step(phi, n, t, h);
}

OrbitRecord integrate_orbit(const ClassicalParams& p, double n0) {
    p.validate();
    Integrator integ{p.omega_d_tilde, p.epsilon_tilde, splitting_weights(p.splitting_order)};
    const double h = p.period() / p.steps_per_period;

    OrbitRecord rec;
    rec.n0 = n0;
    rec.phi.reserve(p.periods + 1);
    rec.n.reserve(p.periods + 1);
    const bool keep_fine = p.fine_samples_per_period > 0;
    const int fine_every =
        keep_fine ? std::max(1, p.steps_per_period / p.fine_samples_per_period) : 0;

    double phi = 0, n = n0, t = 0;
    rec.phi.push_back(phi);
    rec.n.push_back(n);
    for (int period = 0; period < p.periods; ++period) {
        for (int s = 0; s < p.steps_per_period; ++s) {
            integ.step(phi, n, t, h);
            if (std::abs(phi) >= two_pi / 2) {
                rec.status = OrbitStatus::wandered;
                return rec;
            }
            if (keep_fine && s % fine_every == 0) {
                rec.fine_phi.push_back(phi);
                rec.fine_n.push_back(n);
            }
        }
        rec.phi.push_back(phi);
        rec.n.push_back(n);
    }
    return rec;
}

void orbit_area(OrbitRecord& rec, double distance_threshold) {
    if (rec.status == OrbitStatus::wandered) return;
    const std::size_t n_pts = rec.phi.size();
    const double d2 = distance_threshold * distance_threshold;

    std::vector<char> used(n_pts, 0);
    std::vector<int> chain;
    chain.reserve(n_pts);
    chain.push_back(0);
    used[0] = 1;
    int current = 0;
    for (;;) {
        int nearest = -1;
        double best = d2;
        for (std::size_t k = 0; k < n_pts; ++k) {
            if (used[k]) continue;
            double dp = rec.phi[k] - rec.phi[current];
            double dn = rec.n[k] - rec.n[current];
            double dist2 = dp * dp + dn * dn;
            if (dist2 <= best) {
                best = dist2;
                nearest = static_cast<int>(k);
            }
        }
        if (nearest < 0) break;
        chain.push_back(nearest);
        used[nearest] = 1;
        current = nearest;
    }
    rec.ordered_points = static_cast<int>(chain.size());

    double dp = rec.phi[chain.back()] - rec.phi[0];
    double dn = rec.n[chain.back()] - rec.n[0];
    bool closed = dp * dp + dn * dn <= d2;
    if (!closed) {
        rec.status = OrbitStatus::not_closed;
        return;
    }
    if (chain.size() <= n_pts / 2) {
        rec.status = OrbitStatus::too_few_ordered;
        return;
    }
    double area = 0;
    for (std::size_t k = 0; k < chain.size(); ++k) {
        int a = chain[k];
        int b = chain[(k + 1) % chain.size()];
        area += rec.phi[a] * (rec.n[b] - rec.n[a]);
    }
    rec.status = OrbitStatus::regular;
    rec.area = std::abs(area);
}

std::vector<CenterPoint> track_main_center(double omega_d_tilde, double eps_max, double eps_step,
                                           int periods, double wander_threshold,
                                           int steps_per_period) {
    std::vector<CenterPoint> path;
    path.push_back({0.0, 0.0, 0.0});
    ClassicalParams p;
    p.omega_d_tilde = omega_d_tilde;
    p.periods = periods;
    p.steps_per_period = steps_per_period;
    for (double eps = eps_step; eps <= eps_max + 1e-12; eps += eps_step) {
        p.epsilon_tilde = eps;
        const CenterPoint& prev = path.back();
        Integrator integ{p.omega_d_tilde, p.epsilon_tilde, splitting_weights(p.splitting_order)};
        const double h = p.period() / p.steps_per_period;
        double phi = prev.phi, n = prev.n, t = 0;
        double sum_phi = 0, sum_n = 0;
        for (int period = 0; period < periods; ++period) {
            for (int s = 0; s < p.steps_per_period; ++s) integ.step(phi, n, t, h);
            double dp = phi - prev.phi, dn = n - prev.n;
            if (dp * dp + dn * dn > wander_threshold * wander_threshold) return path;
            sum_phi += phi;
            sum_n += n;
        }
        path.push_back({eps, sum_phi / periods, sum_n / periods});
    }
    return path;
}

double pendulum_frequency(double m) {
    return two_pi / 4 / std::comp_ellint_1(std::sqrt(m));
}

double pendulum_orbit_area(double m) {
    double k = std::sqrt(m);
    return 16 * (std::comp_ellint_2(k) - (1 - m) * std::comp_ellint_1(k));
}

std::optional<double> resonant_section_coordinate(double omega_d_tilde) {
    if (omega_d_tilde >= 1.0 || omega_d_tilde <= 0.0) return std::nullopt;
    // solve pendulum_frequency(m) = omega_d_tilde by bisection
    double lo = 1e-12, hi = 1 - 1e-12;
    for (int it = 0; it < 200; ++it) {
        double mid = (lo + hi) / 2;
        if (pendulum_frequency(mid) > omega_d_tilde)
            lo = mid;
        else
            hi = mid;
    }
    double m = (lo + hi) / 2;
    return 2 * std::sqrt(m);  // n at phi = 0 for energy H = 2m - 1
}

std::vector<CenterPoint> track_secondary_center(double omega_d_tilde, double eps_max,
                                                double eps_step, int steps_per_period) {
    std::vector<CenterPoint> path;
    std::optional<double> seed = resonant_section_coordinate(omega_d_tilde);
    if (!seed) return path;

    ClassicalParams p;
    p.omega_d_tilde = omega_d_tilde;
    p.steps_per_period = steps_per_period;
    auto strobe_map = [&](double phi, double n) {
        double t = 0;
        propagate(p, phi, n, t, p.steps_per_period, p.period() / p.steps_per_period);
        return std::pair<double, double>(phi, n);
    };

    double cphi = 0, cn = *seed;
    for (double eps = eps_step; eps <= eps_max + 1e-12; eps += eps_step) {
        p.epsilon_tilde = eps;
        // Newton iteration for the period-one fixed point of the strobe map
        double x = cphi, y = cn;
        bool ok = false;
        for (int it = 0; it < 30; ++it) {
            auto [fx, fy] = strobe_map(x, y);
            double rx = fx - x, ry = fy - y;
            if (std::hypot(rx, ry) < 1e-11) {
                ok = true;
                break;
            }
            const double delta = 1e-6;
            auto [axp, ayp] = strobe_map(x + delta, y);
            auto [bxp, byp] = strobe_map(x, y + delta);
            double j11 = (axp - fx) / delta - 1, j12 = (bxp - fx) / delta;
            double j21 = (ayp - fy) / delta, j22 = (byp - fy) / delta - 1;
            double det = j11 * j22 - j12 * j21;
            if (std::abs(det) < 1e-14) break;
            x -= (j22 * rx - j12 * ry) / det;
            y -= (-j21 * rx + j11 * ry) / det;
            if (std::abs(x) > two_pi / 2 || std::abs(y) > 3) break;
        }
        if (!ok) break;
        cphi = x;
        cn = y;
        path.push_back({eps, cphi, cn});
    }
    return path;
}

namespace {

bool interpolate_center(const std::vector<CenterPoint>& path, double eps, double& cphi,
                        double& cn) {
    if (path.empty() || eps > path.back().eps + 1e-12) return false;
    for (std::size_t k = 1; k < path.size(); ++k) {
        if (eps <= path[k].eps + 1e-12) {
            double t = (eps - path[k - 1].eps) / (path[k].eps - path[k - 1].eps);
            cphi = path[k - 1].phi + t * (path[k].phi - path[k - 1].phi);
            cn = path[k - 1].n + t * (path[k].n - path[k - 1].n);
            return true;
        }
    }
    cphi = path[0].phi;
    cn = path[0].n;
    return true;
}

}  // namespace

ChristmasTree christmas_tree(double omega_d_tilde, double hbar_eff, const TreeConfig& config) {
    ChristmasTree tree;
    tree.config = config;
    tree.omega_d_tilde = omega_d_tilde;
    tree.hbar_eff = hbar_eff;

    for (double n0 = config.n0_min; n0 <= config.n0_max + 1e-12; n0 += config.n0_step)
        tree.n0_grid.push_back(n0);
    for (double eps = 0; eps <= config.eps_max + 1e-12; eps += config.eps_step)
        tree.eps_grid.push_back(eps);

    tree.main_center = track_main_center(omega_d_tilde, config.eps_max, config.center_eps_step,
                                         config.center_periods, 1.0, config.steps_per_period);
    tree.secondary_center = track_secondary_center(omega_d_tilde, config.eps_max,
                                                   config.center_eps_step,
                                                   config.steps_per_period);

    const int rows = static_cast<int>(tree.eps_grid.size());
    const int cols = static_cast<int>(tree.n0_grid.size());
    tree.cells.assign(rows, std::vector<TreeCell>(cols));

    detail::parallel_for(rows, config.workers, [&](std::size_t row) {
        ClassicalParams p;
        p.omega_d_tilde = omega_d_tilde;
        p.epsilon_tilde = tree.eps_grid[row];
        p.hbar_eff = hbar_eff;
        p.periods = config.periods;
        p.steps_per_period = config.steps_per_period;
        double cphi = 0, cn = 0;
        bool has_center = interpolate_center(tree.main_center, p.epsilon_tilde, cphi, cn);
        for (int col = 0; col < cols; ++col) {
            OrbitRecord rec = integrate_orbit(p, tree.n0_grid[col]);
            if (rec.status != OrbitStatus::wandered) {
                double r_c = has_center
                                 ? std::hypot(0.0 - cphi, tree.n0_grid[col] - cn)
                                 : 0.0;
                orbit_area(rec, config.ordering.threshold(r_c, has_center));
            }
            tree.cells[row][col] = {rec.status, static_cast<float>(rec.area)};
        }
    });

    // Bohr-Sommerfeld lines: per state, per row, per side, the innermost
    // adjacent regular pair straddling the target area.
    tree.bs.assign(config.max_states,
                   std::vector<std::array<BsPoint, 2>>(rows, {BsPoint{}, BsPoint{}}));
    for (int row = 0; row < rows; ++row) {
        double cphi = 0, cn = 0;
        if (!interpolate_center(tree.main_center, tree.eps_grid[row], cphi, cn)) continue;
        int center_col = static_cast<int>(std::lround((cn - config.n0_min) / config.n0_step));
        center_col = std::clamp(center_col, 0, cols - 1);
        for (int state = 0; state < config.max_states; ++state) {
            double target = two_pi * hbar_eff * (state + 0.5);
            double band_outer = target + two_pi * hbar_eff / 2;
            for (int side = 0; side < 2; ++side) {
                int dir = side == 0 ? -1 : 1;
                BsPoint& bp = tree.bs[state][row][side];
                for (int col = center_col; col + dir >= 0 && col + dir < cols; col += dir) {
                    const TreeCell& a = tree.cells[row][col];
                    const TreeCell& b = tree.cells[row][col + dir];
                    if (a.status != OrbitStatus::regular || b.status != OrbitStatus::regular)
                        continue;
                    auto cross = [&](double value, double& where) {
                        if ((a.area - value) * (b.area - value) > 0) return false;
                        double t = (value - a.area) / (b.area - a.area);
                        where = tree.n0_grid[col] + t * dir * config.n0_step;
                        return true;
                    };
                    if (!bp.exists && cross(target, bp.line)) bp.exists = true;
                    if (!bp.band_outer_exists && cross(band_outer, bp.band_outer))
                        bp.band_outer_exists = true;
                    if (bp.exists && bp.band_outer_exists) break;
                }
            }
        }
    }
    return tree;
}

namespace {

// Failure components touching the first or last column (the separatrix
// band at phi = 0) form the outer chaotic sea.
std::vector<std::vector<int>> label_failure_components(const ChristmasTree& tree,
                                                       std::vector<char>& component_is_sea) {
    const int rows = static_cast<int>(tree.eps_grid.size());
    const int cols = static_cast<int>(tree.n0_grid.size());
    std::vector<std::vector<int>> label(rows, std::vector<int>(cols, -1));
    int next = 0;
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) {
            if (tree.cells[r][c].status == OrbitStatus::regular || label[r][c] >= 0) continue;
            int id = next++;
            bool sea = false;
            std::deque<std::pair<int, int>> queue{{r, c}};
            label[r][c] = id;
            while (!queue.empty()) {
                auto [rr, cc] = queue.front();
                queue.pop_front();
                if (cc == 0 || cc == cols - 1) sea = true;
                const int dr[4] = {1, -1, 0, 0}, dc[4] = {0, 0, 1, -1};
                for (int k = 0; k < 4; ++k) {
                    int nr = rr + dr[k], nc = cc + dc[k];
                    if (nr < 0 || nr >= rows || nc < 0 || nc >= cols) continue;
                    if (label[nr][nc] >= 0 ||
                        tree.cells[nr][nc].status == OrbitStatus::regular)
                        continue;
                    label[nr][nc] = id;
                    queue.push_back({nr, nc});
                }
            }
            component_is_sea.push_back(sea);
        }
    return label;
}

}  // namespace

ClassicalCritical classical_critical_photon(const ChristmasTree& tree, int state,
                                            double area_threshold_fraction, double amp_to_nbar) {
    if (state >= static_cast<int>(tree.bs.size()))
        throw std::invalid_argument("state beyond the tracked Bohr-Sommerfeld lines");
    const int rows = static_cast<int>(tree.eps_grid.size());
    const int cols = static_cast<int>(tree.n0_grid.size());
    std::vector<char> is_sea;
    std::vector<std::vector<int>> label = label_failure_components(tree, is_sea);

    ClassicalCritical out;
    out.max_explored_nbar = amp_to_nbar * tree.eps_grid.back() * tree.eps_grid.back();
    const double area_threshold = area_threshold_fraction * two_pi * tree.hbar_eff;

    auto col_of = [&](double n0) {
        int c = static_cast<int>(std::lround((n0 - tree.config.n0_min) / tree.config.n0_step));
        return std::clamp(c, 0, cols - 1);
    };

    auto characterize = [&](int row, double last_position, int side) {
        CriticalEvent ev;
        ev.eps = tree.eps_grid[row];
        ev.nbar = amp_to_nbar * ev.eps * ev.eps;
        ev.side = side;
        // failure cell the line ran into: nearest failure around the last
        // known position in the collision row
        int c0 = col_of(last_position);
        int fail_col = -1;
        for (int off = 0; off < cols; ++off) {
            for (int sgn : {1, -1}) {
                int c = c0 + sgn * off;
                if (c < 0 || c >= cols) continue;
                if (tree.cells[row][c].status != OrbitStatus::regular) {
                    fail_col = c;
                    break;
                }
            }
            if (fail_col >= 0) break;
        }
        if (fail_col < 0) return ev;  // no failure nearby; leave untagged
        ev.chaos = is_sea[label[row][fail_col]];
        // resonance strength: area jump across the bounded gap
        int lo = fail_col, hi = fail_col;
        while (lo - 1 >= 0 && tree.cells[row][lo - 1].status != OrbitStatus::regular) --lo;
        while (hi + 1 < cols && tree.cells[row][hi + 1].status != OrbitStatus::regular) ++hi;
        if (lo - 1 >= 0 && hi + 1 < cols) {
            double inner = tree.cells[row][lo - 1].area;
            double outer = tree.cells[row][hi + 1].area;
            ev.resonance_area = std::abs(outer - inner);
        }
        return ev;
    };

    for (int side = 0; side < 2; ++side) {
        bool existed = false;
        double last_pos = 0;
        bool band_existed = false;
        double band_last = 0;
        for (int row = 0; row < rows; ++row) {
            const BsPoint& bp = tree.bs[state][row][side];
            if (existed && !bp.exists) out.events.push_back(characterize(row, last_pos, side));
            if (band_existed && !bp.band_outer_exists)
                out.band_events.push_back(characterize(row, band_last, side));
            existed = bp.exists;
            if (bp.exists) last_pos = bp.line;
            band_existed = bp.band_outer_exists;
            if (bp.band_outer_exists) band_last = bp.band_outer;
        }
    }
    std::sort(out.events.begin(), out.events.end(),
              [](const CriticalEvent& a, const CriticalEvent& b) { return a.nbar < b.nbar; });
    std::sort(out.band_events.begin(), out.band_events.end(),
              [](const CriticalEvent& a, const CriticalEvent& b) { return a.nbar < b.nbar; });

    auto headline = [&](const std::vector<CriticalEvent>& events, double& value, bool& found) {
        for (const auto& ev : events) {
            if (ev.chaos || ev.resonance_area >= area_threshold) {
                value = ev.nbar;
                found = true;
                return;
            }
        }
    };
    headline(out.events, out.headline_nbar, out.headline_found);
    headline(out.band_events, out.lower_bound_nbar, out.lower_bound_found);
    return out;
}

double orbit_time_avg_energy(const OrbitRecord& rec) {
    if (rec.fine_phi.empty()) throw std::invalid_argument("record carries no fine samples");
    double acc = 0;
    for (std::size_t k = 0; k < rec.fine_phi.size(); ++k)
        acc += rec.fine_n[k] * rec.fine_n[k] / 2 - std::cos(rec.fine_phi[k]);
    return acc / rec.fine_phi.size() + 1.0;
}

}  // namespace ionsim
