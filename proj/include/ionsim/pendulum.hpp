#ifndef IONSIM_PENDULUM_HPP
#define IONSIM_PENDULUM_HPP

#include <algorithm>
#include <array>
#include <optional>
#include <string>
#include <vector>

#include "ionsim/common.hpp"

namespace ionsim {

// Dimensionless driven pendulum H = n^2/2 - cos(phi) + eps cos(wd t) n,
// time measured in units of the inverse plasma frequency.
struct ClassicalParams {
    double omega_d_tilde = 1.0;
    double epsilon_tilde = 0.0;
    double hbar_eff = 0.27;
    int periods = 1000;             // stroboscopic samples
    int steps_per_period = 64;      // outer splitting steps per drive period
    int splitting_order = 6;        // 2, 4 or 6
    int fine_samples_per_period = 0;  // keep intermediate samples when > 0

    std::string validate() const;
    double period() const { return two_pi / omega_d_tilde; }
};

enum class OrbitStatus { regular, not_closed, too_few_ordered, wandered };

struct OrbitRecord {
    double n0 = 0;                    // initial condition (phi = 0, n0)
    std::vector<double> phi, n;       // stroboscopic section points
    std::vector<double> fine_phi, fine_n;  // optional dense samples
    OrbitStatus status = OrbitStatus::regular;
    double area = 0;                  // filled by orbit_area on success
    int ordered_points = 0;
};

// Integrate from (phi = 0, n0) for `periods` drive periods with an explicit
// symplectic splitting (drift exact including the drive impulse, kick exact).
// Sets status = wandered when |phi| reaches pi (phase slip).
OrbitRecord integrate_orbit(const ClassicalParams& p, double n0);

// Raw trajectory propagation used by the record builder and by tests;
// advances (phi, n, t) in place by nsteps outer steps of size h (h < 0 runs
// backward in time).
void propagate(const ClassicalParams& p, double& phi, double& n, double& t, long nsteps, double h);

// Nearest-neighbor chaining thresholds from the section geometry.
struct OrderingRule {
    double arc_factor = 0.65;  // 2 pi m / N
    double d_min = 0.10;
    double d_max = 0.80;

    double threshold(double r_c, bool main_region_exists) const {
        if (!main_region_exists) return d_max;
        return std::clamp(arc_factor * r_c, d_min, d_max);
    }
};

// Order the stroboscopic points by nearest-neighbor chaining and evaluate
// the enclosed area with the discrete Green's-theorem sum. On failure the
// record keeps its point data and carries the failure reason.
void orbit_area(OrbitRecord& rec, double distance_threshold);

struct CenterPoint {
    double eps = 0;
    double phi = 0, n = 0;
};

// Center of the main regular region versus drive amplitude: start at the
// origin, integrate from the previous center and move to the orbit's center
// of mass; stops when the orbit wanders off.
std::vector<CenterPoint> track_main_center(double omega_d_tilde, double eps_max,
                                           double eps_step = 0.01, int periods = 1500,
                                           double wander_threshold = 1.0,
                                           int steps_per_period = 64);

// Stable period-one point of the 1:1 resonance (present for wd_tilde < 1),
// tracked by a Newton iteration on the stroboscopic map.
std::vector<CenterPoint> track_secondary_center(double omega_d_tilde, double eps_max,
                                                double eps_step = 0.01,
                                                int steps_per_period = 64);

// Energy-dependent libration frequency of the undriven pendulum and the
// phase-space area enclosed at parameter m = (H + 1)/2.
double pendulum_frequency(double m);
double pendulum_orbit_area(double m);
// Section coordinate n at phi = 0 of the undriven 1:1-resonant orbit.
std::optional<double> resonant_section_coordinate(double omega_d_tilde);

struct TreeConfig {
    double n0_min = -2.0, n0_max = 2.0;
    double n0_step = 1.0 / 300;
    double eps_max = 1.0;
    double eps_step = 0.0015323;  // 10 MHz at the paper's plasma frequency
    int periods = 1000;
    int steps_per_period = 64;
    int center_periods = 1500;
    double center_eps_step = 0.01;
    OrderingRule ordering;
    int max_states = 10;  // Bohr-Sommerfeld lines tracked
    int workers = 0;
};

struct TreeCell {
    OrbitStatus status = OrbitStatus::regular;
    float area = 0;
};

// One side of a Bohr-Sommerfeld line at one amplitude row.
struct BsPoint {
    bool exists = false;
    double line = 0;        // n0 with interpolated area = 2 pi hbar (i + 1/2)
    bool band_outer_exists = false;
    double band_outer = 0;  // area = target + pi hbar (quantum fluctuation edge)
};

struct ChristmasTree {
    TreeConfig config;
    double omega_d_tilde = 0, hbar_eff = 0;
    std::vector<double> n0_grid, eps_grid;
    std::vector<std::vector<TreeCell>> cells;  // [eps row][n0 column]
    std::vector<CenterPoint> main_center, secondary_center;
    // bs[state][row][side]; side 0 below the center, side 1 above
    std::vector<std::vector<std::array<BsPoint, 2>>> bs;
};

ChristmasTree christmas_tree(double omega_d_tilde, double hbar_eff, const TreeConfig& config);

struct CriticalEvent {
    double nbar = 0;          // converted with nbar = (omega_p eps / 2g)^2
    double eps = 0;
    bool chaos = false;       // failure component reaches the separatrix band
    double resonance_area = 0;  // area jump across the gap when bounded
    int side = 0;
};

struct ClassicalCritical {
    std::vector<CriticalEvent> events;        // all line collisions, ascending eps
    std::vector<CriticalEvent> band_events;   // outer fluctuation-band collisions
    bool headline_found = false;
    double headline_nbar = 0;     // first chaos or strong-resonance collision
    double lower_bound_nbar = 0;  // same filter applied to the band edge
    bool lower_bound_found = false;
    double max_explored_nbar = 0;
};

// Collisions of the state's Bohr-Sommerfeld line with failure regions,
// tagged chaos/resonance and filtered by the resonance-area threshold.
// amp_to_nbar = (omega_p / 2g)^2 converts eps^2 to photon number.
ClassicalCritical classical_critical_photon(const ChristmasTree& tree, int state,
                                            double area_threshold_fraction,
                                            double amp_to_nbar);

// Time average of n^2/2 - cos(phi) + 1 over the fine samples: the orbit
// energy in units of E_J with the well bottom at zero.
double orbit_time_avg_energy(const OrbitRecord& rec);

}  // namespace ionsim

#endif
