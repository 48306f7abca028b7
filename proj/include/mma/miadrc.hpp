#pragma once

// Multi-index active disturbance rejection control on the exciter input:
// tracking differentiator, extended state observer and nonlinear state
// feedback per generator, plus the zero-dynamics damping analysis.

#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "mma/core.hpp"
#include "mma/devices.hpp"

namespace mma::miadrc {

/// y = c1 du_t + c2 domega + c3 dP_e. domega is the rotor-speed deviation
/// in rad/s, the same unit as the machine state.
struct MultiIndexCoeffs {
    double c1 = 1.0;
    double c2 = -0.1;
    double c3 = 0.5;

    void validate() const;
};

struct MiadrcGains {
    double h = 0.001;       // controller period, s
    double c = 0.5;         // feedback damping factor
    double r0 = 0.01;       // fhan speed factor
    double r_ref = 0.0;     // tracking-differentiator set point
    double w_c = 100.0 * kPi;
    double beta1 = 3.0 * 100.0 * kPi;
    double beta2 = 3.0 * (100.0 * kPi) * (100.0 * kPi);
    double beta3 = (100.0 * kPi) * (100.0 * kPi) * (100.0 * kPi);
    double b = 4600.0;
    int eso_substeps = 1;   // observer sub-steps per period; 1 is the plain Euler form

    /// Bandwidth parameterisation: beta = (3 w, 3 w^2, w^3).
    void set_bandwidth(double w);
    void validate() const;
};

struct MiadrcState {
    double v1 = 0.0, v2 = 0.0;
    double chi1 = 0.0, chi2 = 0.0, chi3 = 0.0;
    double u = 0.0;  // feedback output before division by b
    bool enabled = false;
};

/// Han's discrete time-optimal synthesis function.
double fhan(double x1, double x2, double r, double h);

/// Operating-point references for the multi-index output.
struct Equilibrium {
    double u_t = 1.0;
    double omega = kTwoPi * 60.0;
    double p_e = 0.0;
};

double multi_index_output(double du_t, double domega, double dp_e, const MultiIndexCoeffs& c);
double multi_index_output(const dyn::GeneratorState& x, const dyn::GeneratorAlgebraic& alg, const Equilibrium& eq,
                          const MultiIndexCoeffs& c);

/// Close switch S1: seed the observer with the current measurement so the
/// first estimates start from the measured output rather than zero.
void engage(MiadrcState& s, double y);
void disengage(MiadrcState& s);

/// One controller period: TD, ESO, NSF. Returns u_e = u / b, or 0 when
/// the controller is disabled (state untouched).
double controller_step(MiadrcState& s, const MiadrcGains& g, double y);

/// Operating-point partial derivatives of machine `gen` (pile held at its
/// current injection). k3 and k4 are the signed partials of
/// T'd0 dE'q/dt with respect to E'q and delta.
struct KConstants {
    double k1 = 0.0;  // dP_e/d delta
    double k2 = 0.0;  // dP_e/dE'q
    double k3 = 0.0;  // d(T'd0 dE'q/dt)/dE'q
    double k4 = 0.0;  // d(T'd0 dE'q/dt)/d delta
    double du_dd = 0.0;  // du_t/d delta
    double du_de = 0.0;  // du_t/dE'q
};
KConstants k_constants(const dyn::PowerSystem& sys, std::size_t gen, const VectorXd& x);

/// Input gain (c1 du_t/dE'q + c3 dP_e/dE'q) K_A / (T'd0 T_A), with the
/// partials taken analytically from the reduced network.
double compute_b(const dyn::PowerSystem& sys, std::size_t gen, const VectorXd& x, const MultiIndexCoeffs& c);

struct ZeroDynamicsReport {
    MatrixXd a1;
    KConstants k;
    double w = 0.0;
    double d_e = 0.0;
    double k_e = 0.0;
    VectorXc eigenvalues;
};

/// Zero-dynamics matrix and the equivalent damping/synchronising
/// coefficients of the controller path at angular frequency w.
/// The damping expression uses the loop convention (K3 + T'd0 s) with
/// K3 = -k3.
ZeroDynamicsReport zero_dynamics(const dyn::GeneratorParams& p, const KConstants& k, double w,
                                 const MultiIndexCoeffs& c);

/// Closed-form D_e and K_e for given loop constants (K3 in the loop
/// convention, positive for a normal field circuit).
struct TorqueCoefficients {
    double d_e = 0.0;
    double k_e = 0.0;
};
TorqueCoefficients torque_coefficients(double k1, double k2, double k3_loop, double k_a, double t_a, double t_d0p,
                                       double w, const MultiIndexCoeffs& c);

nlohmann::json zero_dynamics_to_json(const ZeroDynamicsReport& r);

/// Online forced-oscillation detector driving switch S1. A window counts
/// as an attack when its dominant Prony mode inside the band is nearly
/// undamped and large enough.
struct GateConfig {
    double window = 3.0;         // s
    double period = 0.5;         // s between evaluations
    double zeta_max = 0.02;
    double min_amplitude = 0.05; // pu
    double f_lo = 0.1, f_hi = 3.0;
    double sample_dt = 0.05;     // decimated analysis step, s
    int order = 6;
    int confirm = 2;             // consecutive positive windows to close S1
    int release = 0;             // consecutive negative windows to open S1; 0 latches it closed

    void validate() const;
};

/// Single-window test on uniformly sampled data.
bool detection_gate(std::span<const double> window, double dt, const GateConfig& cfg);

/// Debounced switch state over successive windows.
class DetectionGate {
public:
    explicit DetectionGate(GateConfig cfg);
    /// Feed the latest window; returns the switch state after this window.
    bool update(std::span<const double> window, double dt);
    bool closed() const { return closed_; }
    const GateConfig& config() const { return cfg_; }

private:
    GateConfig cfg_;
    bool closed_ = false;
    int hits_ = 0;
    int misses_ = 0;
};

}  // namespace mma::miadrc
