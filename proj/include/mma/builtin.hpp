#pragma once

// Benchmark systems shipped with the toolkit: network tables plus the
// matching machine data on the system MVA base.

#include <string>
#include <vector>

#include "mma/devices.hpp"
#include "mma/netmodel.hpp"

namespace mma::data {

/// Two-area four-machine system, 100 MVA base. Bus 9 carries the area-2
/// load (17.67 pu in the textbook data; scenarios override it).
net::Network kundur_two_area();
std::vector<dyn::GeneratorParams> kundur_machines();

/// New England 39-bus system, 100 MVA base. Machine G1 is the aggregated
/// external system at bus 39, G2 sits on the slack bus 31.
net::Network ieee39();
std::vector<dyn::GeneratorParams> ieee39_machines();

std::vector<std::string> builtin_network_names();
net::Network builtin_network(const std::string& name);
std::vector<dyn::GeneratorParams> builtin_machines(const std::string& name);

}  // namespace mma::data
