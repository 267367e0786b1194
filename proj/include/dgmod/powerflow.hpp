#pragma once

#include <Eigen/Dense>
#include <complex>
#include <vector>

#include "dgmod/feeder.hpp"

namespace dgmod {

/// Nodal complex power injections in per unit; loads are negative.
struct InjectionState {
    Eigen::VectorXd p;
    Eigen::VectorXd q;
};

struct VoltageState {
    Eigen::VectorXd v;  // magnitudes, p.u.
};

struct AcOptions {
    double tol = 1e-10;       // infinity norm of the power mismatch
    int max_iter = 100;
    double max_injection = 1.0;
    double v_lo = 0.5;        // sanity band for accepted solutions
    double v_hi = 1.5;
};

/// Linear voltage model: v = R p + X q + 1 v0.
VoltageState ldf_voltage(const FeederModel& feeder, const SensitivityMatrices& sens,
                         const InjectionState& inj);

struct AcSolution {
    VoltageState v;
    std::vector<std::complex<double>> voltage;  // index = bus id, [0] is the reference
    int iterations = 0;
    double mismatch = 0.0;
};

/// Backward/forward sweep power flow on the radial feeder. Converged when
/// the power-mismatch residual of the voltage profile drops below tol.
AcSolution ac_power_flow_full(const FeederModel& feeder, const InjectionState& inj,
                              const AcOptions& opts = {});
VoltageState ac_power_flow(const FeederModel& feeder, const InjectionState& inj,
                           const AcOptions& opts = {});

/// Infinity norm of s_calc - s over non-reference buses, where s_calc is the
/// complex power injected at each bus by the given voltage profile.
double power_mismatch(const FeederModel& feeder, const InjectionState& inj,
                      const std::vector<std::complex<double>>& voltage);

}  // namespace dgmod
