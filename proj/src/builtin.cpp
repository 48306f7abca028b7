#include "mma/builtin.hpp"

#include <array>

namespace mma::data {

namespace {

net::Bus make_bus(int id, net::BusKind kind, double v = 1.0, double p = 0.0) {
    net::Bus b;
    b.id = id;
    b.kind = kind;
    b.v_mag = v;
    b.p_inj = p;
    return b;
}

dyn::GeneratorParams machine(std::string name, int bus, double h, double x_d, double x_dp, double x_q,
                             double t_d0p) {
    dyn::GeneratorParams g;
    g.name = std::move(name);
    g.bus = bus;
    g.t_j = 2.0 * h;
    g.x_d = x_d;
    g.x_dp = x_dp;
    g.x_q = x_q;
    g.t_d0p = t_d0p;
    return g;
}

}  // namespace

net::Network kundur_two_area() {
    using net::BusKind;
    net::Network n;
    n.name = "kundur2area";
    n.base_mva = 100.0;
    n.buses = {
        make_bus(1, BusKind::PV, 1.03, 7.0),   make_bus(2, BusKind::PV, 1.01, 7.0),
        make_bus(3, BusKind::Slack, 1.03, 7.19), make_bus(4, BusKind::PV, 1.01, 7.0),
        make_bus(5, BusKind::PQ),  make_bus(6, BusKind::PQ),  make_bus(7, BusKind::PQ),
        make_bus(8, BusKind::PQ),  make_bus(9, BusKind::PQ),  make_bus(10, BusKind::PQ),
        make_bus(11, BusKind::PQ),
    };
    for (auto& b : n.buses) {
        if (b.id == 7) b.shunt = Complex(0.0, 2.0);
        if (b.id == 9) b.shunt = Complex(0.0, 3.5);
    }

    // 230 kV lines: r, x, b per km on 100 MVA.
    constexpr double r_km = 0.0001, x_km = 0.001, b_km = 0.00175;
    auto line = [&](int f, int t, double km) {
        net::Branch br;
        br.from = f;
        br.to = t;
        br.series_z = Complex(r_km * km, x_km * km);
        br.charging_b = b_km * km;
        n.branches.push_back(br);
    };
    line(5, 6, 25.0);
    line(6, 7, 10.0);
    line(7, 8, 110.0);
    line(7, 8, 110.0);
    line(8, 9, 110.0);
    line(8, 9, 110.0);
    line(9, 10, 10.0);
    line(10, 11, 25.0);
    for (auto [f, t] : std::array<std::pair<int, int>, 4>{{{1, 5}, {2, 6}, {3, 11}, {4, 10}}}) {
        net::Branch tr;
        tr.from = f;
        tr.to = t;
        tr.series_z = Complex(0.0, 0.15 / 9.0);
        n.branches.push_back(tr);
    }
    n.loads = {{7, 9.67, 1.0}, {9, 17.67, 1.0}};
    net::validate(n);
    return n;
}

std::vector<dyn::GeneratorParams> kundur_machines() {
    // 900 MVA machine data converted to the 100 MVA system base.
    std::vector<dyn::GeneratorParams> g = {
        machine("G1", 1, 58.5, 0.2, 0.3 / 9.0, 1.7 / 9.0, 8.0),
        machine("G2", 2, 58.5, 0.2, 0.3 / 9.0, 1.7 / 9.0, 8.0),
        machine("G3", 3, 55.575, 0.2, 0.3 / 9.0, 1.7 / 9.0, 8.0),
        machine("G4", 4, 55.575, 0.2, 0.3 / 9.0, 1.7 / 9.0, 8.0),
    };
    // Damping lumps damper windings and the absent stabiliser; exciter
    // values place the inter-area mode near 0.6 Hz with light damping.
    for (auto& m : g) {
        m.d = 172.0;
        m.k_a = 75.0;
        m.t_a = 0.3;
    }
    return g;
}

net::Network ieee39() {
    using net::BusKind;
    struct BusRow {
        int id;
        double pd, qd;
    };
    static constexpr BusRow bus_rows[] = {
        {1, 97.6, 44.2},  {2, 0, 0},         {3, 322, 2.4},     {4, 500, 184},     {5, 0, 0},
        {6, 0, 0},        {7, 233.8, 84},    {8, 522, 176.6},   {9, 6.5, -66.6},   {10, 0, 0},
        {11, 0, 0},       {12, 8.53, 88},    {13, 0, 0},        {14, 0, 0},        {15, 320, 153},
        {16, 329, 32.3},  {17, 0, 0},        {18, 158, 30},     {19, 0, 0},        {20, 680, 103},
        {21, 274, 115},   {22, 0, 0},        {23, 247.5, 84.6}, {24, 308.6, -92.2}, {25, 224, 47.2},
        {26, 139, 17},    {27, 281, 75.5},   {28, 206, 27.6},   {29, 283.5, 26.9}, {30, 0, 0},
        {31, 9.2, 4.6},   {32, 0, 0},        {33, 0, 0},        {34, 0, 0},        {35, 0, 0},
        {36, 0, 0},       {37, 0, 0},        {38, 0, 0},        {39, 1104, 250},
    };
    struct GenRow {
        int bus;
        double pg, vg;
    };
    static constexpr GenRow gen_rows[] = {
        {30, 250, 1.0499}, {31, 677.871, 0.982}, {32, 650, 0.9841}, {33, 632, 0.9972}, {34, 508, 1.0123},
        {35, 650, 1.0494}, {36, 560, 1.0636},    {37, 540, 1.0275}, {38, 830, 1.0265}, {39, 1000, 1.03},
    };
    struct BranchRow {
        int f, t;
        double r, x, b, tap;
    };
    static constexpr BranchRow branch_rows[] = {
        {1, 2, 0.0035, 0.0411, 0.6987, 0},   {1, 39, 0.001, 0.025, 0.75, 0},
        {2, 3, 0.0013, 0.0151, 0.2572, 0},   {2, 25, 0.007, 0.0086, 0.146, 0},
        {2, 30, 0, 0.0181, 0, 1.025},        {3, 4, 0.0013, 0.0213, 0.2214, 0},
        {3, 18, 0.0011, 0.0133, 0.2138, 0},  {4, 5, 0.0008, 0.0128, 0.1342, 0},
        {4, 14, 0.0008, 0.0129, 0.1382, 0},  {5, 6, 0.0002, 0.0026, 0.0434, 0},
        {5, 8, 0.0008, 0.0112, 0.1476, 0},   {6, 7, 0.0006, 0.0092, 0.113, 0},
        {6, 11, 0.0007, 0.0082, 0.1389, 0},  {6, 31, 0, 0.025, 0, 1.07},
        {7, 8, 0.0004, 0.0046, 0.078, 0},    {8, 9, 0.0023, 0.0363, 0.3804, 0},
        {9, 39, 0.001, 0.025, 1.2, 0},       {10, 11, 0.0004, 0.0043, 0.0729, 0},
        {10, 13, 0.0004, 0.0043, 0.0729, 0}, {10, 32, 0, 0.02, 0, 1.07},
        {12, 11, 0.0016, 0.0435, 0, 1.006},  {12, 13, 0.0016, 0.0435, 0, 1.006},
        {13, 14, 0.0009, 0.0101, 0.1723, 0}, {14, 15, 0.0018, 0.0217, 0.366, 0},
        {15, 16, 0.0009, 0.0094, 0.171, 0},  {16, 17, 0.0007, 0.0089, 0.1342, 0},
        {16, 19, 0.0016, 0.0195, 0.304, 0},  {16, 21, 0.0008, 0.0135, 0.2548, 0},
        {16, 24, 0.0003, 0.0059, 0.068, 0},  {17, 18, 0.0007, 0.0082, 0.1319, 0},
        {17, 27, 0.0013, 0.0173, 0.3216, 0}, {19, 20, 0.0007, 0.0138, 0, 1.06},
        {19, 33, 0.0007, 0.0142, 0, 1.07},   {20, 34, 0.0009, 0.018, 0, 1.009},
        {21, 22, 0.0008, 0.014, 0.2565, 0},  {22, 23, 0.0006, 0.0096, 0.1846, 0},
        {22, 35, 0, 0.0143, 0, 1.025},       {23, 24, 0.0022, 0.035, 0.361, 0},
        {23, 36, 0.0005, 0.0272, 0, 1.0},    {25, 26, 0.0032, 0.0323, 0.531, 0},
        {25, 37, 0.0006, 0.0232, 0, 1.025},  {26, 27, 0.0014, 0.0147, 0.2396, 0},
        {26, 28, 0.0043, 0.0474, 0.7802, 0}, {26, 29, 0.0057, 0.0625, 1.029, 0},
        {28, 29, 0.0014, 0.0151, 0.249, 0},  {29, 38, 0.0008, 0.0156, 0, 1.025},
    };

    net::Network n;
    n.name = "ieee39";
    n.base_mva = 100.0;
    for (const auto& r : bus_rows) {
        net::Bus b = make_bus(r.id, BusKind::PQ);
        for (const auto& g : gen_rows) {
            if (g.bus == r.id) {
                b.kind = r.id == 31 ? BusKind::Slack : BusKind::PV;
                b.v_mag = g.vg;
                b.p_inj = g.pg / n.base_mva;
            }
        }
        n.buses.push_back(b);
        if (r.pd != 0.0 || r.qd != 0.0) n.loads.push_back({r.id, r.pd / n.base_mva, r.qd / n.base_mva});
    }
    for (const auto& r : branch_rows) {
        net::Branch br;
        br.from = r.f;
        br.to = r.t;
        br.series_z = Complex(r.r, r.x);
        br.charging_b = r.b;
        br.tap = r.tap == 0.0 ? 1.0 : r.tap;
        n.branches.push_back(br);
    }
    net::validate(n);
    return n;
}

std::vector<dyn::GeneratorParams> ieee39_machines() {
    std::vector<dyn::GeneratorParams> g = {
        machine("G1", 39, 500.0, 0.02, 0.006, 0.019, 7.0),
        machine("G2", 31, 30.3, 0.295, 0.0697, 0.282, 6.56),
        machine("G3", 32, 35.8, 0.2495, 0.0531, 0.237, 5.7),
        machine("G4", 33, 28.6, 0.262, 0.0436, 0.258, 5.69),
        machine("G5", 34, 26.0, 0.67, 0.132, 0.62, 5.4),
        machine("G6", 35, 34.8, 0.254, 0.05, 0.241, 7.3),
        machine("G7", 36, 26.4, 0.295, 0.049, 0.292, 5.66),
        machine("G8", 37, 24.3, 0.29, 0.057, 0.28, 6.7),
        machine("G9", 38, 34.5, 0.2106, 0.057, 0.205, 4.79),
        machine("G10", 30, 42.0, 0.1, 0.031, 0.069, 10.2),
    };
    // Damping proportional to inertia.
    for (auto& m : g) {
        m.d = 80.0 * m.t_j / 60.0;
        m.k_a = 400.0;
        m.t_a = 0.05;
    }
    return g;
}

std::vector<std::string> builtin_network_names() { return {"kundur2area", "ieee39"}; }

net::Network builtin_network(const std::string& name) {
    if (name == "kundur2area") return kundur_two_area();
    if (name == "ieee39") return ieee39();
    throw InputError("unknown built-in network '" + name + "' (available: kundur2area, ieee39)");
}

std::vector<dyn::GeneratorParams> builtin_machines(const std::string& name) {
    if (name == "kundur2area") return kundur_machines();
    if (name == "ieee39") return ieee39_machines();
    throw InputError("no machine data for network '" + name + "'");
}

}  // namespace mma::data
