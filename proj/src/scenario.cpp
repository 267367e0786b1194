#include "dgmod/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "dgmod/csv.hpp"
#include "dgmod/rng.hpp"

namespace dgmod {

LoadSeries synth_loads(const FeederModel& feeder, const SparseChangeConfig& cfg, int T) {
    if (T < 2) throw InvalidConfig("need at least two time steps");
    if (cfg.change_prob < 0.0 || cfg.change_prob > 1.0)
        throw InvalidConfig("change_prob must lie in [0, 1]");
    if (!(cfg.pf_lo > 0.0) || cfg.pf_hi > 1.0 || cfg.pf_lo > cfg.pf_hi)
        throw InvalidConfig("power-factor range must be inside (0, 1]");
    if (cfg.mag_lo < 0.0 || cfg.mag_lo > cfg.mag_hi || cfg.base_lo < 0.0 ||
        cfg.base_lo > cfg.base_hi)
        throw InvalidConfig("magnitude bounds must be ordered and non-negative");

    const int N = feeder.size();
    Rng rng(cfg.seed);
    LoadSeries s;
    s.p.resize(T + 1, N);
    s.q.resize(T + 1, N);

    // base operating point: loads, with per-node power factor
    for (int n = 0; n < N; ++n) {
        const double p0 = -rng.uniform(cfg.base_lo, cfg.base_hi);
        const double pf = rng.uniform(cfg.pf_lo, cfg.pf_hi);
        s.p(0, n) = p0;
        s.q(0, n) = p0 * std::tan(std::acos(pf));
    }
    for (int t = 1; t <= T; ++t) {
        s.p.row(t) = s.p.row(t - 1);
        s.q.row(t) = s.q.row(t - 1);
        for (int n = 0; n < N; ++n) {
            if (!rng.bernoulli(cfg.change_prob)) continue;
            const double mag = rng.uniform(cfg.mag_lo, cfg.mag_hi);
            const double pf = rng.uniform(cfg.pf_lo, cfg.pf_hi);
            double dp = rng.sign() * mag;
            double dq = rng.sign() * mag * std::tan(std::acos(pf));
            // reflect a jump that would leave the configured injection band
            if (std::abs(s.p(t, n) + dp) > cfg.max_injection) dp = -dp;
            if (std::abs(s.q(t, n) + dq) > cfg.max_injection) dq = -dq;
            s.p(t, n) += dp;
            s.q(t, n) += dq;
        }
    }
    return s;
}

ObservabilityPartition make_partition(const FeederModel& feeder, const PartitionSpec& spec) {
    const int N = feeder.size();
    ObservabilityPartition part;
    std::set<int> obs;

    switch (spec.kind) {
        case PartitionSpec::Kind::LeafOnly:
            for (int n = 1; n <= N; ++n)
                if (feeder.is_leaf(n)) obs.insert(n);
            break;
        case PartitionSpec::Kind::Fraction: {
            if (!(spec.fraction > 0.0) || spec.fraction > 1.0)
                throw InvalidConfig("fraction must lie in (0, 1]");
            const int want = static_cast<int>(std::ceil(spec.fraction * N));
            std::vector<int> pool(N);
            for (int n = 0; n < N; ++n) pool[n] = n + 1;
            Rng rng(spec.seed);
            for (int k = 0; k < want; ++k) {
                const auto pick = k + static_cast<int>(rng.below(pool.size() - k));
                std::swap(pool[k], pool[pick]);
                obs.insert(pool[k]);
            }
            break;
        }
        case PartitionSpec::Kind::Explicit:
            for (const auto& label : spec.observed_labels) {
                const int n = feeder.bus(label);
                if (n == 0) throw InvalidConfig("reference bus cannot be in the observed set");
                obs.insert(n);
            }
            break;
    }
    if (obs.empty()) throw EmptyObservedSet("observed set is empty");

    part.observed.assign(obs.begin(), obs.end());
    for (int n = 1; n <= N; ++n)
        if (!obs.count(n)) part.unobserved.push_back(n);

    std::set<int> vobs = obs;
    for (const auto& label : spec.voltage_observed_labels) {
        const int n = feeder.bus(label);
        if (n == 0) throw InvalidConfig("reference bus has no metered voltage row");
        vobs.insert(n);
    }
    part.voltage_observed.assign(vobs.begin(), vobs.end());
    return part;
}

Eigen::MatrixXd voltage_series(const FeederModel& feeder, const LoadSeries& loads, TruthMode mode,
                               const AcOptions& ac) {
    const int N = feeder.size();
    if (loads.p.cols() != N || loads.q.cols() != N || loads.p.rows() != loads.q.rows())
        throw DimensionMismatch("load series does not match the feeder");
    const int samples = loads.samples();
    Eigen::MatrixXd v(samples, N);
    SensitivityMatrices sens;
    if (mode == TruthMode::Ldf) sens = sensitivity_matrices(feeder);
    for (int t = 0; t < samples; ++t) {
        InjectionState inj{loads.p.row(t).transpose(), loads.q.row(t).transpose()};
        if (mode == TruthMode::Ldf)
            v.row(t) = ldf_voltage(feeder, sens, inj).v.transpose();
        else
            v.row(t) = ac_power_flow(feeder, inj, ac).v.transpose();
    }
    return v;
}

DifferenceDataset make_differences(const LoadSeries& loads, const Eigen::MatrixXd& v_samples,
                                   ObservabilityPartition partition, double noise_sigma,
                                   std::uint64_t noise_seed) {
    if (v_samples.rows() != loads.samples() || v_samples.cols() != loads.p.cols())
        throw DimensionMismatch("voltage samples do not match the load series");
    const int T = loads.steps();
    const int N = static_cast<int>(loads.p.cols());

    Eigen::MatrixXd v = v_samples;
    if (noise_sigma > 0.0) {
        Rng rng(noise_seed);
        for (int t = 0; t < v.rows(); ++t)
            for (int n = 0; n < N; ++n) v(t, n) += noise_sigma * rng.normal();
    }

    DifferenceDataset d;
    d.dv = v.bottomRows(T) - v.topRows(T);
    d.dp = loads.p.bottomRows(T) - loads.p.topRows(T);
    d.dq = loads.q.bottomRows(T) - loads.q.topRows(T);
    d.partition = std::move(partition);
    return d;
}

DifferenceDataset generate_dataset(const FeederModel& feeder, const LoadSeries& loads,
                                   ObservabilityPartition partition, TruthMode mode,
                                   double noise_sigma, std::uint64_t noise_seed,
                                   const AcOptions& ac) {
    return make_differences(loads, voltage_series(feeder, loads, mode, ac), std::move(partition),
                            noise_sigma, noise_seed);
}

namespace {

Eigen::MatrixXd reorder_to_feeder(const FeederModel& feeder, const CsvTable& table,
                                  const std::string& what) {
    const int N = feeder.size();
    if (static_cast<int>(table.labels.size()) != N)
        throw UnknownBusLabel(what + ": expected one column per non-reference bus, got " +
                              std::to_string(table.labels.size()));
    std::vector<int> col_of_bus(N, -1);
    for (std::size_t c = 0; c < table.labels.size(); ++c) {
        const int n = feeder.bus(table.labels[c]);  // throws UnknownBusLabel
        if (n == 0) throw UnknownBusLabel(what + ": reference bus cannot carry a series column");
        if (col_of_bus[n - 1] != -1)
            throw UnknownBusLabel(what + ": duplicate column for bus " + table.labels[c]);
        col_of_bus[n - 1] = static_cast<int>(c);
    }
    Eigen::MatrixXd out(table.values.rows(), N);
    for (int n = 0; n < N; ++n) out.col(n) = table.values.col(col_of_bus[n]);
    return out;
}

}  // namespace

IngestedSeries ingest_csv(const FeederModel& feeder, const std::filesystem::path& p_path,
                          const std::filesystem::path& q_path,
                          const std::filesystem::path& v_path) {
    IngestedSeries s;
    s.loads.p = reorder_to_feeder(feeder, read_csv(p_path), "p series");
    s.loads.q = reorder_to_feeder(feeder, read_csv(q_path), "q series");
    s.v_samples = reorder_to_feeder(feeder, read_csv(v_path), "v series");
    if (s.loads.p.rows() != s.loads.q.rows() || s.loads.p.rows() != s.v_samples.rows())
        throw RaggedRows("p, q and v series disagree on the number of samples");
    if (s.loads.p.rows() < 2) throw InvalidConfig("series needs at least two samples");
    return s;
}

}  // namespace dgmod
