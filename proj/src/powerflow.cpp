#include "dgmod/powerflow.hpp"

#include <cmath>

namespace dgmod {

namespace {

void check_injection(const FeederModel& feeder, const InjectionState& inj, double max_injection) {
    if (inj.p.size() != feeder.size() || inj.q.size() != feeder.size())
        throw DimensionMismatch("injection vectors do not match the bus count");
    if (!inj.p.allFinite() || !inj.q.allFinite())
        throw ConfigError("non-finite injection entries");
    const double m = std::max(inj.p.cwiseAbs().maxCoeff(), inj.q.cwiseAbs().maxCoeff());
    if (m > max_injection)
        throw ConfigError("injection magnitude exceeds the configured bound");
}

// branch currents computed from a voltage profile by Ohm's law
std::vector<std::complex<double>> ohm_currents(const FeederModel& feeder,
                                               const std::vector<std::complex<double>>& voltage) {
    const int L = feeder.size();
    std::vector<std::complex<double>> flow(L + 1);
    for (int l = 1; l <= L; ++l) {
        const std::complex<double> z(feeder.resistance()(l - 1), feeder.reactance()(l - 1));
        flow[l] = (voltage[feeder.from_bus(l)] - voltage[feeder.to_bus(l)]) / z;
    }
    return flow;
}

}  // namespace

VoltageState ldf_voltage(const FeederModel& feeder, const SensitivityMatrices& sens,
                         const InjectionState& inj) {
    check_injection(feeder, inj, 1.0);
    if (sens.R.rows() != feeder.size() || sens.X.rows() != feeder.size())
        throw DimensionMismatch("sensitivity matrices do not match the bus count");
    VoltageState out;
    out.v = sens.R * inj.p + sens.X * inj.q + Eigen::VectorXd::Constant(feeder.size(), feeder.v0());
    return out;
}

double power_mismatch(const FeederModel& feeder, const InjectionState& inj,
                      const std::vector<std::complex<double>>& voltage) {
    const int N = feeder.size();
    const auto flow = ohm_currents(feeder, voltage);
    double worst = 0.0;
    for (int n = 1; n <= N; ++n) {
        std::complex<double> into_children(0.0, 0.0);
        for (int c : feeder.children(n)) into_children += flow[feeder.parent_line(c)];
        const std::complex<double> injected = into_children - flow[feeder.parent_line(n)];
        const std::complex<double> s_calc = voltage[n] * std::conj(injected);
        worst = std::max(worst, std::abs(s_calc - std::complex<double>(inj.p(n - 1), inj.q(n - 1))));
    }
    return worst;
}

AcSolution ac_power_flow_full(const FeederModel& feeder, const InjectionState& inj,
                              const AcOptions& opts) {
    if (!(opts.tol > 0.0)) throw ConfigError("ac solver tolerance must be positive");
    check_injection(feeder, inj, opts.max_injection);

    const int N = feeder.size();
    const auto& topo = feeder.topo_order();
    AcSolution sol;
    sol.voltage.assign(N + 1, std::complex<double>(feeder.v0(), 0.0));

    std::vector<std::complex<double>> flow(N + 1);
    for (int iter = 1; iter <= opts.max_iter; ++iter) {
        // backward: accumulate branch currents from the leaves, with nodal
        // currents taken at the present voltage profile
        for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
            const int n = *it;
            const std::complex<double> s(inj.p(n - 1), inj.q(n - 1));
            std::complex<double> j = -std::conj(s / sol.voltage[n]);
            for (int c : feeder.children(n)) j += flow[feeder.parent_line(c)];
            flow[feeder.parent_line(n)] = j;
        }
        // forward: drop voltages from the reference down
        for (int n : topo) {
            const int l = feeder.parent_line(n);
            const std::complex<double> z(feeder.resistance()(l - 1), feeder.reactance()(l - 1));
            sol.voltage[n] = sol.voltage[feeder.parent(n)] - z * flow[l];
        }
        for (int n = 1; n <= N; ++n) {
            const double m = std::abs(sol.voltage[n]);
            if (!(m > opts.v_lo && m < opts.v_hi))
                throw DivergedVoltage("bus " + feeder.label(n) + " left the sanity band");
        }
        sol.iterations = iter;
        sol.mismatch = power_mismatch(feeder, inj, sol.voltage);
        if (sol.mismatch <= opts.tol) {
            sol.v.v.resize(N);
            for (int n = 1; n <= N; ++n) sol.v.v(n - 1) = std::abs(sol.voltage[n]);
            return sol;
        }
    }
    throw NoConvergence("backward/forward sweep did not reach tol in " +
                        std::to_string(opts.max_iter) + " iterations");
}

VoltageState ac_power_flow(const FeederModel& feeder, const InjectionState& inj,
                           const AcOptions& opts) {
    return ac_power_flow_full(feeder, inj, opts).v;
}

}  // namespace dgmod
