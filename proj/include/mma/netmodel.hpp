#pragma once

// Static network: buses, branches, loads; nodal admittance assembly,
// Newton-Raphson power flow and Kron reduction.

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "mma/core.hpp"

namespace mma::net {

enum class BusKind { Slack, PV, PQ };

struct Bus {
    int id = 0;
    BusKind kind = BusKind::PQ;
    double v_mag = 1.0;   // setpoint for slack/PV, initial guess otherwise
    double v_ang = 0.0;   // rad, only meaningful for the slack bus
    double p_inj = 0.0;   // scheduled generation, pu
    double q_inj = 0.0;
    Complex shunt{0.0, 0.0};  // fixed shunt admittance, pu
};

struct Branch {
    int from = 0;
    int to = 0;
    Complex series_z{0.0, 0.0};
    double charging_b = 0.0;  // total line charging
    double tap = 1.0;         // off-nominal ratio on the from side
};

struct Load {
    int bus = 0;
    double p = 0.0;
    double q = 0.0;
};

struct Network {
    std::string name;
    double base_mva = 100.0;
    std::vector<Bus> buses;
    std::vector<Branch> branches;
    std::vector<Load> loads;

    std::size_t index_of(int bus_id) const;
    bool has_bus(int bus_id) const;
    const Bus& bus(int bus_id) const;
    /// Sum of loads attached to a bus.
    Complex load_at(int bus_id) const;
};

/// Dense complex nodal admittance matrix; row/column i belongs to node labels[i].
struct AdmittanceMatrix {
    MatrixXc y;
    std::vector<int> labels;

    std::size_t size() const { return labels.size(); }
    std::size_t index_of(int label) const;
};

struct PowerFlowOptions {
    double tol = 1e-8;
    int max_iter = 50;
};

struct PowerFlowSolution {
    std::vector<int> bus_ids;
    VectorXc v;          // complex bus voltages
    VectorXc s_injected; // net complex injection S = V * conj(Y V) at each bus
    double mismatch = 0.0;
    int iterations = 0;

    Complex voltage(int bus_id) const;
    Complex injection(int bus_id) const;
};

/// Standard nodal assembly: off-diagonal Y[i][j] = -1/z_ij (scaled by taps),
/// diagonals carry series, charging and bus shunt terms.
AdmittanceMatrix build_ybus(std::span<const Bus> buses, std::span<const Branch> branches);

/// Newton-Raphson from a flat start. Loads are subtracted from scheduled
/// bus injections. Throws ConvergenceError with the final mismatch.
PowerFlowSolution solve_power_flow(const Network& network, const PowerFlowOptions& opts = {});
PowerFlowSolution solve_power_flow(std::span<const Bus> buses, std::span<const Branch> branches,
                                   double tol, int max_iter);

/// y_red = y_kk - y_ke * inv(y_ee) * y_ek, kept nodes in the order given.
AdmittanceMatrix kron_reduce(const AdmittanceMatrix& y, std::span<const int> keep_nodes);

/// Currents drawn at each bus by the loads when converted to constant
/// admittance at the solved voltages: y = conj(S) / |V|^2.
Complex load_admittance(Complex s_load, Complex v);

// JSON (de)serialisation. Bus angles are in radians; impedances as [re, im].
Network network_from_json(const nlohmann::json& j);
nlohmann::json network_to_json(const Network& net);

/// Validate structural invariants (single slack, unique ids, valid branches).
void validate(const Network& net);

}  // namespace mma::net
