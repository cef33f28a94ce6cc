#pragma once

// Asymptotic predictions for the mean gap, the mean drift and the expected
// empirical variance on every time scale, plus the Monte Carlo harness that
// checks them.

#include "tsync/linalg.hpp"
#include "tsync/model.hpp"
#include "tsync/moments.hpp"
#include "tsync/rng.hpp"
#include "tsync/spectral.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <functional>
#include <limits>
#include <mutex>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace tsync
{
    enum class RegimeLabel : std::uint8_t
    {
        sub_critical,
        critical,
        super_critical,
    };

    inline std::string_view to_string(RegimeLabel r) noexcept
    {
        switch (r)
        {
        case RegimeLabel::sub_critical:
            return "sub-critical";
        case RegimeLabel::critical:
            return "critical";
        case RegimeLabel::super_critical:
            return "super-critical";
        }
        return "unknown";
    }

    inline constexpr double default_regime_epsilon = 0.01;

    /// Limit of the expected mean gap μ1 - μ2 for large N and t.
    inline double predict_l12_limit(const ModelParams& p) noexcept
    {
        return (p.v1 - p.v2) / (p.alpha12 + p.alpha21);
    }

    /// Common asymptotic speed μi(t)/t of both mass centres.
    inline double predict_mean_drift(const ModelParams& p) noexcept
    {
        return (p.alpha12 * p.v2 + p.alpha21 * p.v1) / (p.alpha12 + p.alpha21);
    }

    /// Warning text for equal velocities, empty otherwise.
    inline std::optional<std::string> degenerate_warning(const ModelParams& p)
    {
        if (!p.degenerate())
            return std::nullopt;
        return std::string("v1 == v2: degenerate case, variance predictions are identically zero");
    }

    /// Expected empirical variance at time t with N particles:
    /// h·(1 - exp(-κ2·t/N))·N. Reduces to h·κ2·t for t ≪ N, to
    /// h·(1 - e^{-κ2 s})·N for t = sN, and to h·N for t ≫ N.
    inline double predict_variance(double t, double total, const ModelParams& p, double c1)
    {
        if (!(t >= 0.0))
            throw std::invalid_argument("t must be nonnegative");
        if (!(total >= 2.0))
            throw std::invalid_argument("N must be at least 2");
        if (p.degenerate())
            return 0.0;
        const double k2 = kappa2(p, c1);
        return h_of(p, c1) * (-std::expm1(-k2 * t / total)) * total;
    }

    inline double subcritical_line(double t, const ModelParams& p, double c1)
    {
        return h_of(p, c1) * kappa2(p, c1) * t;
    }

    inline double critical_curve(double s, double total, const ModelParams& p, double c1)
    {
        return h_of(p, c1) * (-std::expm1(-kappa2(p, c1) * s)) * total;
    }

    inline double plateau_line(double total, const ModelParams& p, double c1) { return h_of(p, c1) * total; }

    struct RegimeClass
    {
        RegimeLabel label = RegimeLabel::critical;
        double s = 0.0; // t/N
    };

    /// Labels a (t, N) pair by x = κ2·t/N: sub-critical below ε,
    /// super-critical above 1/ε, critical in between.
    inline RegimeClass classify_regime(double t, double total, double k2, double epsilon = default_regime_epsilon)
    {
        if (!(epsilon > 0.0 && epsilon < 1.0))
            throw std::invalid_argument("epsilon must lie in (0, 1)");
        const double s = t / total;
        const double x = k2 * s;
        if (x < epsilon)
            return {RegimeLabel::sub_critical, s};
        if (x > 1.0 / epsilon)
            return {RegimeLabel::super_critical, s};
        return {RegimeLabel::critical, s};
    }

    struct RegimePrediction
    {
        double l12_limit = 0.0;
        double mean_drift_rate = 0.0;
        double h = 0.0;
        double kappa2 = 0.0;
        double c1 = 0.5;
        ModelParams params;

        double variance_at(double t, double total) const { return predict_variance(t, total, params, c1); }

        RegimeClass regime_at(double t, double total, double epsilon = default_regime_epsilon) const
        {
            return classify_regime(t, total, kappa2, epsilon);
        }
    };

    inline RegimePrediction predict(const ModelParams& p, double c1)
    {
        RegimePrediction r;
        r.params = p;
        r.c1 = c1;
        r.l12_limit = predict_l12_limit(p);
        r.mean_drift_rate = predict_mean_drift(p);
        r.kappa2 = kappa2(p, c1);
        r.h = p.degenerate() ? 0.0 : h_of(p, c1);
        return r;
    }

    // ---------------------------------------------------------------------
    // Ensemble harness

    /// Worker count: TSYNC_THREADS if set to a positive integer, otherwise
    /// std::thread::hardware_concurrency() (at least 1).
    inline unsigned thread_count_from_env()
    {
        if (const char* env = std::getenv("TSYNC_THREADS"))
        {
            char* end = nullptr;
            const long v = std::strtol(env, &end, 10);
            if (end != env && *end == '\0' && v > 0)
                return static_cast<unsigned>(v);
        }
        return std::max(1u, std::thread::hardware_concurrency());
    }

    /// Calls fn(i) for i in [0, count) on up to `threads` workers. Work items
    /// are independent; the first exception is rethrown after all workers stop.
    inline void parallel_for(std::size_t count, unsigned threads, const std::function<void(std::size_t)>& fn)
    {
        const auto workers = static_cast<std::size_t>(std::max(1u, threads));
        if (workers == 1 || count <= 1)
        {
            for (std::size_t i = 0; i < count; ++i)
                fn(i);
            return;
        }
        std::atomic<std::size_t> next{0};
        std::atomic<bool> failed{false};
        std::exception_ptr error;
        std::mutex error_mutex;
        {
            std::vector<std::jthread> pool;
            for (std::size_t w = 0; w < std::min(workers, count); ++w)
                pool.emplace_back([&] {
                    for (;;)
                    {
                        const std::size_t i = next.fetch_add(1);
                        if (i >= count || failed.load())
                            return;
                        try
                        {
                            fn(i);
                        }
                        catch (...)
                        {
                            std::lock_guard lock(error_mutex);
                            if (!error)
                                error = std::current_exception();
                            failed = true;
                        }
                    }
                });
        }
        if (error)
            std::rethrow_exception(error);
    }

    struct ExperimentConfig
    {
        ModelParams params;
        std::vector<double> t_grid;
        std::size_t ensemble_size = 1;
        std::uint64_t seed = 0;
        InitSpec init;
        double record_interval = 0.0;
        std::uint64_t max_events = std::uint64_t{1} << 40;
        unsigned threads = 0; // 0: thread_count_from_env()
        double epsilon = default_regime_epsilon;

        void validate() const
        {
            params.validate();
            if (ensemble_size < 1)
                throw std::invalid_argument("ensemble size must be at least 1");
            if (t_grid.empty())
                throw std::invalid_argument("t_grid is empty");
            if (!(t_grid.front() >= 0.0))
                throw std::invalid_argument("t_grid must start at a nonnegative time");
            for (std::size_t i = 1; i < t_grid.size(); ++i)
                if (!(t_grid[i] > t_grid[i - 1]))
                    throw std::invalid_argument("t_grid must be strictly increasing");
            if (!(record_interval >= 0.0))
                throw std::invalid_argument("record_interval must be nonnegative");
        }

        /// t_grid, plus every multiple of record_interval up to the last grid
        /// time when record_interval > 0.
        std::vector<double> report_times() const
        {
            if (!(record_interval > 0.0) || t_grid.empty())
                return t_grid;
            std::vector<double> out = t_grid;
            for (std::uint64_t k = 0;; ++k)
            {
                const double t = static_cast<double>(k) * record_interval;
                if (t > t_grid.back())
                    break;
                out.push_back(t);
            }
            std::sort(out.begin(), out.end());
            out.erase(std::unique(out.begin(), out.end()), out.end());
            return out;
        }
    };

    struct EnsembleRow
    {
        double t = 0.0;
        std::size_t total = 0;
        RegimeClass regime;
        double mean_var1 = 0.0;
        double stderr1 = 0.0;
        double mean_var2 = 0.0;
        double stderr2 = 0.0;
        double mean_gap = 0.0;
        double gap_stderr = 0.0;
        double mean_pos1 = 0.0;
        double mean_pos2 = 0.0;
        double prediction = 0.0;
        double rel_err = std::numeric_limits<double>::quiet_NaN();
        bool pass = false;
    };

    struct EnsembleReport
    {
        ModelParams params;
        std::size_t ensemble_size = 0;
        std::vector<EnsembleRow> rows;
    };

    struct SampleMoments
    {
        double mean = 0.0;
        double stderr_ = 0.0;
    };

    /// Mean and standard error of the mean, with compensated accumulation in
    /// index order so the result does not depend on how samples were produced.
    inline SampleMoments sample_moments(std::span<const double> xs)
    {
        const double m = static_cast<double>(xs.size());
        SampleMoments out;
        if (xs.empty())
            return out;
        out.mean = compensated_sum(xs) / m;
        if (xs.size() < 2)
            return out;
        CompensatedSum ss;
        for (double x : xs)
            ss.add((x - out.mean) * (x - out.mean));
        out.stderr_ = std::sqrt(ss.value() / (m - 1.0) / m);
        return out;
    }

    /// Simulates one trajectory through the grid, returning the statistics at
    /// each report time. Trajectory `index` always uses stream (seed, index).
    inline std::vector<EmpiricalStats> run_trajectory(const ExperimentConfig& cfg, std::size_t index)
    {
        Stream rng(cfg.seed, index);
        SystemState state = make_initial_state(cfg.params, cfg.init, rng);
        const std::vector<double> times = cfg.report_times();
        std::vector<EmpiricalStats> out;
        out.reserve(times.size());
        SimulateOptions opt;
        opt.max_events = cfg.max_events;
        for (double t : times)
        {
            SimulationResult res = simulate_until(std::move(state), cfg.params, rng, t, opt);
            out.push_back(res.trajectory.back().stats);
            state = std::move(res.state);
        }
        return out;
    }

    inline EnsembleReport run_ensemble(const ExperimentConfig& cfg)
    {
        cfg.validate();
        const std::size_t m = cfg.ensemble_size;
        const std::vector<double> times = cfg.report_times();
        const std::size_t nt = times.size();
        std::vector<std::vector<EmpiricalStats>> per_traj(m);
        parallel_for(m, cfg.threads ? cfg.threads : thread_count_from_env(),
                     [&](std::size_t i) { per_traj[i] = run_trajectory(cfg, i); });

        EnsembleReport report;
        report.params = cfg.params;
        report.ensemble_size = m;
        const double total = static_cast<double>(cfg.params.total());
        const RegimePrediction theory = predict(cfg.params, cfg.params.c1());
        std::vector<double> buf(m);
        auto column = [&](std::size_t k, auto field) {
            for (std::size_t i = 0; i < m; ++i)
                buf[i] = field(per_traj[i][k]);
            return sample_moments(buf);
        };
        for (std::size_t k = 0; k < nt; ++k)
        {
            EnsembleRow row;
            row.t = times[k];
            row.total = cfg.params.total();
            row.regime = theory.regime_at(row.t, total, cfg.epsilon);
            const auto v1 = column(k, [](const EmpiricalStats& s) { return s.var1; });
            const auto v2 = column(k, [](const EmpiricalStats& s) { return s.var2; });
            const auto gp = column(k, [](const EmpiricalStats& s) { return s.gap; });
            row.mean_var1 = v1.mean;
            row.stderr1 = v1.stderr_;
            row.mean_var2 = v2.mean;
            row.stderr2 = v2.stderr_;
            row.mean_gap = gp.mean;
            row.gap_stderr = gp.stderr_;
            row.mean_pos1 = column(k, [](const EmpiricalStats& s) { return s.mean1; }).mean;
            row.mean_pos2 = column(k, [](const EmpiricalStats& s) { return s.mean2; }).mean;
            row.prediction = theory.variance_at(row.t, total);
            if (row.prediction > 0.0)
                row.rel_err = std::max(std::abs(row.mean_var1 - row.prediction),
                                       std::abs(row.mean_var2 - row.prediction)) /
                              row.prediction;
            report.rows.push_back(row);
        }
        return report;
    }

    struct ComparisonSummary
    {
        std::size_t rows_total = 0;
        std::size_t rows_passed = 0;
        bool all_pass() const noexcept { return rows_passed == rows_total; }
    };

    /// |mean - prediction| <= max(tol_rel·prediction, tol_sigma·stderr).
    inline bool within_tolerance(double mean, double stderr_, double prediction, double tol_rel,
                                 double tol_sigma) noexcept
    {
        const double allowed = std::max(tol_rel * std::abs(prediction), tol_sigma * stderr_);
        return std::abs(mean - prediction) <= allowed;
    }

    /// Marks each row: both per-type variance means must sit within tolerance
    /// of the shared prediction. Rows with zero prediction only get the
    /// tol_sigma·stderr allowance.
    inline ComparisonSummary compare_to_theory(EnsembleReport& report, double tol_rel, double tol_sigma)
    {
        ComparisonSummary s;
        for (EnsembleRow& row : report.rows)
        {
            const double rel = row.prediction > 0.0 ? tol_rel : 0.0;
            row.pass = within_tolerance(row.mean_var1, row.stderr1, row.prediction, rel, tol_sigma) &&
                       within_tolerance(row.mean_var2, row.stderr2, row.prediction, rel, tol_sigma);
            ++s.rows_total;
            if (row.pass)
                ++s.rows_passed;
        }
        return s;
    }

    /// Least-squares slope of y against x.
    inline double fit_slope(std::span<const double> x, std::span<const double> y)
    {
        if (x.size() != y.size() || x.size() < 2)
            throw std::invalid_argument("slope fit needs two or more paired points");
        const double n = static_cast<double>(x.size());
        const double mx = compensated_sum(x) / n;
        const double my = compensated_sum(y) / n;
        CompensatedSum sxy;
        CompensatedSum sxx;
        for (std::size_t i = 0; i < x.size(); ++i)
        {
            sxy.add((x[i] - mx) * (y[i] - my));
            sxx.add((x[i] - mx) * (x[i] - mx));
        }
        return sxy.value() / sxx.value();
    }

    // ---------------------------------------------------------------------
    // Embedded-chain ensembles, for direct comparison with the recursions.

    struct EmbeddedCheckpoint
    {
        std::uint64_t n = 0;
        SampleMoments d1;
        SampleMoments d2;
        SampleMoments r;   // (X1 - X2)²
        SampleMoments gap; // X1 - X2
    };

    /// Runs M copies of the embedded chain from `init` and averages D1, D2,
    /// (X1-X2)² and X1-X2 at the given step counts.
    inline std::vector<EmbeddedCheckpoint> run_embedded_ensemble(const ModelParams& p, const InitSpec& init,
                                                                 std::uint64_t seed, std::size_t m,
                                                                 std::vector<std::uint64_t> checkpoints,
                                                                 unsigned threads = 0)
    {
        p.validate();
        if (m < 1)
            throw std::invalid_argument("ensemble size must be at least 1");
        std::sort(checkpoints.begin(), checkpoints.end());
        checkpoints.erase(std::unique(checkpoints.begin(), checkpoints.end()), checkpoints.end());
        const std::size_t nc = checkpoints.size();

        std::vector<EmpiricalStats> stats(m * nc);
        parallel_for(m, threads ? threads : thread_count_from_env(), [&](std::size_t i) {
            Stream rng(seed, i);
            SystemState s = make_initial_state(p, init, rng);
            std::uint64_t steps = 0;
            for (std::size_t c = 0; c < nc; ++c)
            {
                while (steps < checkpoints[c])
                {
                    s = embedded_step(std::move(s), p, rng).first;
                    ++steps;
                }
                stats[i * nc + c] = empirical_stats(s);
            }
        });

        std::vector<EmbeddedCheckpoint> out;
        std::vector<double> buf(m);
        auto column = [&](std::size_t c, auto field) {
            for (std::size_t i = 0; i < m; ++i)
                buf[i] = field(stats[i * nc + c]);
            return sample_moments(buf);
        };
        for (std::size_t c = 0; c < nc; ++c)
        {
            EmbeddedCheckpoint cp;
            cp.n = checkpoints[c];
            cp.d1 = column(c, [](const EmpiricalStats& s) { return s.var1; });
            cp.d2 = column(c, [](const EmpiricalStats& s) { return s.var2; });
            cp.r = column(c, [](const EmpiricalStats& s) { return s.gap_sq; });
            cp.gap = column(c, [](const EmpiricalStats& s) { return s.gap; });
            out.push_back(cp);
        }
        return out;
    }
} // namespace tsync
