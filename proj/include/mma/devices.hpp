#pragma once

// Device models (third-order machine with static exciter, charging-pile
// converter) and the algebraic network interface that couples them.

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mma/core.hpp"
#include "mma/netmodel.hpp"

namespace mma::dyn {

struct GeneratorParams {
    std::string name;
    int bus = 0;
    double t_j = 10.0;     // inertia constant 2H, s
    double d = 0.0;        // damping, per rad/s of speed deviation
    double t_d0p = 6.0;    // d-axis transient open-circuit time constant, s
    double x_d = 1.0;
    double x_dp = 0.3;
    double x_q = 0.9;      // carried for reporting; the network interface uses x_dp
    double k_a = 50.0;
    double t_a = 0.05;
    double omega0 = kTwoPi * 60.0;
    double p_m0 = 0.0;     // set at initialisation
    double u_ref = 1.0;    // set at initialisation

    void validate() const;
};

struct GeneratorState {
    double delta = 0.0;  // rad
    double omega = 0.0;  // rad/s
    double e_qp = 1.0;
    double e_f = 1.0;
};

struct GeneratorAlgebraic {
    double i_d = 0.0;
    double i_q = 0.0;
    double u_t = 0.0;
    double p_e = 0.0;
};

/// Aggregated charging-pile converter. Quantities are on the pile's own
/// rating `s_rated` (system pu); currents are drawn from the grid.
struct PileParams {
    double kp1 = 0.25, ki1 = 1.0;   // active-power PI
    double kp2 = 0.25, ki2 = 1.0;   // reactive-power PI
    double kp3 = 5.0225, ki3 = 80.52;  // PLL PI, calibrated to the 1.37 Hz pile mode
    double tau1 = 0.02, tau2 = 0.02;
    double q_ref = 0.0;
    double x_filter = 0.1;          // grid-side series reactance on pile base
    double s_rated = 1.0;           // rating in system pu

    void validate() const;
};

struct PileState {
    double x_pll = 0.0;
    double theta_pll = 0.0;
    double x1 = 0.0;
    double i_d = 0.0;
    double x2 = 0.0;
    double i_q = 0.0;
};

/// PLL-frame quantities at the pile terminal, pile base.
struct PileAlgebraic {
    double u_gd = 0.0;
    double u_gq = 0.0;
    double p_e = 0.0;
    double q_e = 0.0;
};

/// Park transform onto the PLL frame: X e^{-j theta} = x_q - j x_d.
PileAlgebraic pile_measure(const PileState& s, Complex terminal_voltage);

/// Third-order machine plus first-order static exciter. `u_e` is the
/// supplementary exciter input (zero without defence).
GeneratorState generator_derivatives(const GeneratorState& x, const GeneratorParams& p,
                                     const GeneratorAlgebraic& alg, double u_e);

/// Six-state pile model. `p_ref` is on the pile base.
PileState pile_derivatives(const PileState& x, const PileParams& p, double p_ref, Complex grid_voltage);

/// A bus whose voltage is held fixed (stiff source, no machine dynamics).
struct FixedSource {
    int bus = 0;
    Complex voltage{1.0, 0.0};
};

struct PileSite {
    PileParams params;
    int bus = 0;            // network bus the filter connects to
    int terminal_node = 0;  // node label of the pile terminal (behind the filter)
};

/// Immutable assembled system: reduced network among source nodes and the
/// pile terminal, device parameters and the power-flow equilibrium.
struct PowerSystem {
    std::string name;
    std::vector<GeneratorParams> gens;
    std::vector<FixedSource> fixed;
    std::optional<PileSite> pile;

    net::AdmittanceMatrix y_red;  // order: gen internal nodes, fixed sources, pile terminal
    net::PowerFlowSolution power_flow;
    net::Network network;         // including the pile terminal node and filter branch

    VectorXd x0;                  // equilibrium state
    double p_ref0 = 0.0;          // pile power command at equilibrium, system pu

    std::size_t n_gen() const { return gens.size(); }
    std::size_t n_states() const { return 4 * gens.size() + (pile ? 6 : 0); }
    std::size_t gen_offset(std::size_t i) const { return 4 * i; }
    std::size_t pile_offset() const { return 4 * gens.size(); }
    std::vector<std::string> state_labels() const;
    std::size_t gen_index(const std::string& name) const;

    // Partitions of y_red, cached at assembly.
    MatrixXc y_ss, y_sp, y_ps;
    Complex y_pp{0.0, 0.0};
};

struct NetworkSolution {
    std::vector<GeneratorAlgebraic> gens;
    Complex v_pile{0.0, 0.0};
    PileAlgebraic pile;
    std::vector<Complex> gen_current;  // injections at internal nodes
};

GeneratorState gen_state(std::span<const double> x, std::size_t i);
PileState pile_state(std::span<const double> x, std::size_t offset);

/// Solve the linear nodal equations with E'q at angle delta behind x'_d
/// at every machine, fixed sources, and the pile current drawn at its node.
NetworkSolution network_interface(const PowerSystem& sys, std::span<const double> x);

/// Lower-level form used by tests: explicit source voltages and pile
/// current injection (system pu, into the network).
struct ReducedSolve {
    VectorXc source_current;
    Complex v_pile;
};
ReducedSolve solve_reduced(const PowerSystem& sys, const VectorXc& source_voltage, Complex pile_injection);

/// Full state derivative. `p_ref_sys` is the pile command in system pu and
/// `u_e` holds one supplementary input per generator (may be empty).
void system_derivatives(const PowerSystem& sys, std::span<const double> x, double p_ref_sys,
                        std::span<const double> u_e, std::span<double> dx);

struct PileSpec {
    PileParams params;
    int bus = 0;
    double base_p = 0.0;  // system pu drawn by the pile at equilibrium
};

struct AssemblyOptions {
    net::PowerFlowOptions pf{1e-11, 50};
};

/// Power flow, load conversion to constant admittance, internal-node
/// insertion behind x'_d, Kron reduction and equilibrium initialisation.
/// Slack-bus machines absorb the power-flow balance; buses listed in
/// `fixed_sources` are kept as stiff voltage sources instead of machines.
PowerSystem assemble(const net::Network& network, std::vector<GeneratorParams> gens,
                     const std::optional<PileSpec>& pile, std::span<const int> fixed_sources = {},
                     const AssemblyOptions& opts = {});

}  // namespace mma::dyn
