#pragma once

// Linearisation about the power-flow equilibrium, eigen-decomposition with
// biorthonormal left/right eigenvectors, and parameter sweeps with mode
// tracking.

#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "mma/core.hpp"
#include "mma/devices.hpp"

namespace mma::modal {

struct LinearModel {
    MatrixXd a, b, c, d;
    std::vector<std::string> state_labels;
    std::vector<std::string> output_labels;

    void validate() const;
    Eigen::Index output_index(const std::string& label) const;
};

struct LinearizeOptions {
    double step = 1e-6;
    double equilibrium_tol = 1e-6;
};

/// A, B, C, D by central differences of the assembled derivative function.
/// The single input is the pile power command (system pu); outputs are
/// every machine's Pe, omega and ut followed by the pile's Pe.
LinearModel linearize(const dyn::PowerSystem& sys, const LinearizeOptions& opts = {});

/// Output values at state x for the channels listed by linearize.
VectorXd system_outputs(const dyn::PowerSystem& sys, const VectorXd& x);

struct ModalDecomposition {
    VectorXc lambda;
    MatrixXc u_right;  // columns are right eigenvectors
    MatrixXc v_left;   // columns are left eigenvectors, v_left^T u_right = I
    MatrixXc psi;      // v_left^T B
    MatrixXc phi;      // C u_right
    std::vector<std::string> state_labels;
    std::vector<std::string> output_labels;

    std::size_t size() const { return static_cast<std::size_t>(lambda.size()); }
    double frequency_hz(std::size_t i) const;
    double damping_ratio(std::size_t i) const;
};

/// Eigen-triplets sorted by |frequency| (positive-frequency member of a pair
/// first). Throws NumericalError when the eigenvector matrix is too badly
/// conditioned to be considered diagonalisable.
ModalDecomposition decompose(const LinearModel& model, double max_condition = 1e10);

/// |u_ki v_ki| normalised to a maximum of one.
VectorXd participation_factors(const ModalDecomposition& dec, std::size_t mode);

struct ModeInfo {
    std::size_t index = 0;
    Complex eigenvalue{0.0, 0.0};
    double frequency = 0.0;      // Hz
    double damping_ratio = 0.0;
    VectorXc shape;              // right eigenvector over rotor-speed states
    std::vector<std::string> shape_labels;
    VectorXd participation;      // over all states
    std::vector<std::string> state_labels;
};

ModeInfo mode_info(const ModalDecomposition& dec, std::size_t mode);
nlohmann::json mode_to_json(const ModeInfo& m);

/// Oscillatory modes (positive frequency member) with frequency inside [f_lo, f_hi].
std::vector<std::size_t> oscillatory_modes(const ModalDecomposition& dec, double f_lo, double f_hi);

/// Least damped oscillatory mode inside the band. Throws when none exist.
std::size_t least_damped_mode(const ModalDecomposition& dec, double f_lo, double f_hi);

/// Oscillatory mode in the band where `state_label` participates most.
std::size_t dominant_mode_of(const ModalDecomposition& dec, const std::string& state_label, double f_lo,
                             double f_hi);

/// Modal assurance criterion between two complex vectors.
double mac(const VectorXc& a, const VectorXc& b);

enum class Execution { Serial, Parallel };

/// Re-linearise and decompose for each value, then follow the mode picked
/// at the first point by eigenvector correlation. `build` must be safe to
/// call concurrently for distinct values.
struct SweepPoint {
    double value = 0.0;
    ModeInfo mode;
    double correlation = 1.0;
};
std::vector<SweepPoint> mode_sweep(const std::function<dyn::PowerSystem(double)>& build,
                                   const std::vector<double>& values,
                                   const std::function<std::size_t(const ModalDecomposition&)>& pick_initial,
                                   Execution exec = Execution::Parallel, double mac_threshold = 0.7);

/// Single pile behind its filter against a stiff unit-voltage source.
dyn::PowerSystem pile_test_system(const dyn::PileParams& params, double base_p);

struct CalibrationResult {
    double kp3 = 0.0;
    double ki3 = 0.0;
    double frequency = 0.0;
    double damping_ratio = 0.0;
    int iterations = 0;
    bool converged = false;
};

/// Solve for the PLL gains placing the pile's PLL mode at the targets.
/// Other parameters are taken from `base`; the operating point is `base_p`.
CalibrationResult calibrate_pile(double target_freq_hz, double target_damping, const dyn::PileParams& base = {},
                                 double base_p = 0.5);

}  // namespace mma::modal
