#pragma once

// Command implementations behind the tsync CLI. Each returns the serialized
// text and an exit code so the same paths are testable without a process.

#include "tsync/config.hpp"
#include "tsync/model.hpp"
#include "tsync/moments.hpp"
#include "tsync/regimes.hpp"
#include "tsync/spectral.hpp"

#include "json.hpp"

#include <cmath>
#include <cstdio>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace tsync
{
    /// 0 success / all rows pass, 1 verification failure, 2 configuration error.
    enum ExitCode : int
    {
        exit_ok = 0,
        exit_verify_failed = 1,
        exit_config_error = 2,
    };

    struct CommandOutput
    {
        std::string text;
        int exit_code = exit_ok;
        std::vector<std::string> warnings;
    };

    /// Round-trip representation (17 significant digits); "nan"/"inf" spelled out.
    inline std::string format_double(double x)
    {
        if (std::isnan(x))
            return "nan";
        if (std::isinf(x))
            return x > 0 ? "inf" : "-inf";
        char buf[40];
        std::snprintf(buf, sizeof buf, "%.17g", x);
        return buf;
    }

    inline nlohmann::json json_number(double x)
    {
        if (!std::isfinite(x))
            return nullptr;
        return x;
    }

    namespace detail
    {
        struct Table
        {
            std::vector<std::string> header;
            std::vector<std::vector<nlohmann::json>> rows; // numbers, strings or booleans

            std::string to_csv() const
            {
                std::string out;
                for (std::size_t i = 0; i < header.size(); ++i)
                    out += (i ? "," : "") + header[i];
                out += "\n";
                for (const auto& row : rows)
                {
                    for (std::size_t i = 0; i < row.size(); ++i)
                    {
                        if (i)
                            out += ",";
                        const auto& v = row[i];
                        if (v.is_boolean())
                            out += v.get<bool>() ? "true" : "false";
                        else if (v.is_number_unsigned())
                            out += std::to_string(v.get<std::uint64_t>());
                        else if (v.is_number())
                            out += format_double(v.get<double>());
                        else if (v.is_string())
                            out += v.get<std::string>();
                        else
                            out += "nan";
                    }
                    out += "\n";
                }
                return out;
            }

            nlohmann::json to_json_rows() const
            {
                nlohmann::json arr = nlohmann::json::array();
                for (const auto& row : rows)
                {
                    nlohmann::json obj = nlohmann::json::object();
                    for (std::size_t i = 0; i < row.size(); ++i)
                    {
                        const auto& v = row[i];
                        obj[header[i]] = (v.is_number_float() && !std::isfinite(v.get<double>())) ? nlohmann::json() : v;
                    }
                    arr.push_back(std::move(obj));
                }
                return arr;
            }
        };

        inline nlohmann::json nan_or(double x) { return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(NAN); }

        inline void collect_warnings(const RunConfig& cfg, CommandOutput& out)
        {
            if (auto w = degenerate_warning(cfg.params()))
                out.warnings.push_back(*w);
        }
    } // namespace detail

    // ---------------------------------------------------------------------

    /// All spectral constants for the configured rates, velocities and c1,
    /// plus the finite-N eigenvalues of A for the configured populations.
    inline CommandOutput cmd_spectral(const RunConfig& cfg)
    {
        CommandOutput out;
        detail::collect_warnings(cfg, out);
        const ModelParams& p = cfg.params();
        const SpectralSummary s = summarize_spectrum(p, cfg.c1);
        const MomentSystem sys = build_moment_system(p, 0.0, cfg.closure);
        const FiniteNSpectrum fin = finite_n_spectrum(sys, p);
        const double total = static_cast<double>(p.total());

        std::vector<std::pair<std::string, double>> scalars{
            {"lambda1", s.lambda1},
            {"lambda2", s.lambda2},
            {"lambda3", s.lambda3},
            {"Z", s.big_z},
            {"kappa2", s.kappa2},
            {"delta", s.delta},
            {"b1", s.b1},
            {"b2", s.b2},
            {"b3", s.b3},
            {"h", s.h},
            {"xi1", s.xi1},
            {"xi2", s.xi2},
            {"xi3", s.xi3},
            {"c1", cfg.c1},
            {"N", total},
            {"gamma", sys.gamma},
            {"sigma1", fin.sigma[0]},
            {"sigma2", fin.sigma[1]},
            {"sigma3", fin.sigma[2]},
            {"b2_numeric", total * total * (1.0 - fin.sigma[1])},
        };
        std::vector<std::pair<std::string, Vec3>> vectors{
            {"e1", s.e1}, {"e2", s.e2}, {"e3", s.e3}, {"phi", s.phi}, {"psi", s.psi},
        };

        if (cfg.format == OutputFormat::json)
        {
            nlohmann::ordered_json j;
            for (const auto& [k, v] : scalars)
                j[k] = json_number(v);
            for (const auto& [k, v] : vectors)
                j[k] = {v[0], v[1], v[2]};
            out.text = j.dump(2) + "\n";
        }
        else
        {
            out.text = "name,value\n";
            for (const auto& [k, v] : scalars)
                out.text += k + "," + format_double(v) + "\n";
            for (const auto& [k, v] : vectors)
                for (std::size_t i = 0; i < 3; ++i)
                    out.text += k + "_" + std::to_string(i) + "," + format_double(v[i]) + "\n";
        }
        return out;
    }

    /// Moment recursions from the configured initial configuration (for a
    /// random init, the configuration drawn for trajectory 0).
    inline CommandOutput cmd_moments(const RunConfig& cfg)
    {
        CommandOutput out;
        detail::collect_warnings(cfg, out);
        const ModelParams& p = cfg.params();
        Stream rng(cfg.experiment.seed, 0);
        const SystemState init = make_initial_state(p, cfg.experiment.init, rng);
        const auto rows = moment_table(p, empirical_stats(init), cfg.steps, cfg.stride, cfg.closure);
        const double gamma = gamma_of(p);

        detail::Table t;
        t.header = {"n", "t_equiv", "mu1", "mu2", "l12", "S", "d1", "d2", "r", "l12_closed"};
        for (const auto& r : rows)
            t.rows.push_back({r.n, static_cast<double>(r.n) * gamma, r.mean.mu1, r.mean.mu2, r.mean.l12, r.mean.s,
                              r.w.d1, r.w.d2, r.w.r, r.l12_closed});
        out.text = cfg.format == OutputFormat::json ? t.to_json_rows().dump(2) + "\n" : t.to_csv();
        return out;
    }

    /// Theory curves over the t-grid: unified prediction plus the three
    /// asymptotic lines, ready for external plotting.
    inline CommandOutput cmd_predict(const RunConfig& cfg)
    {
        CommandOutput out;
        detail::collect_warnings(cfg, out);
        const ModelParams& p = cfg.params();
        const RegimePrediction theory = predict(p, cfg.c1);
        const double total = static_cast<double>(p.total());
        const bool degenerate = p.degenerate();

        detail::Table t;
        t.header = {"t", "N", "regime", "s", "prediction", "subcritical", "critical", "plateau", "l12_limit",
                    "mean_drift"};
        for (double time : cfg.experiment.t_grid)
        {
            const RegimeClass rc = theory.regime_at(time, total, cfg.experiment.epsilon);
            t.rows.push_back({time, static_cast<std::uint64_t>(p.total()), std::string(to_string(rc.label)), rc.s,
                              theory.variance_at(time, total),
                              degenerate ? 0.0 : subcritical_line(time, p, cfg.c1),
                              degenerate ? 0.0 : critical_curve(rc.s, total, p, cfg.c1),
                              degenerate ? 0.0 : plateau_line(total, p, cfg.c1), theory.l12_limit,
                              theory.mean_drift_rate});
        }
        out.text = cfg.format == OutputFormat::json ? t.to_json_rows().dump(2) + "\n" : t.to_csv();
        return out;
    }

    inline constexpr std::array<std::string_view, 12> report_columns{
        "t", "N", "regime", "mean_var1", "stderr1", "mean_var2", "stderr2", "mean_gap", "gap_stderr",
        "prediction", "rel_err", "pass"};

    inline std::string serialize_report(const EnsembleReport& report, OutputFormat format)
    {
        detail::Table t;
        for (auto c : report_columns)
            t.header.emplace_back(c);
        for (const auto& r : report.rows)
            t.rows.push_back({r.t, static_cast<std::uint64_t>(r.total), std::string(to_string(r.regime.label)),
                              r.mean_var1, r.stderr1, r.mean_var2, r.stderr2, r.mean_gap, r.gap_stderr,
                              r.prediction, detail::nan_or(r.rel_err), r.pass});
        if (format == OutputFormat::json)
        {
            nlohmann::ordered_json j;
            j["rows"] = t.to_json_rows();
            bool all = true;
            for (const auto& r : report.rows)
                all = all && r.pass;
            j["all_pass"] = all;
            return j.dump(2) + "\n";
        }
        return t.to_csv();
    }

    /// Ensemble run; pass flags computed with the configured tolerances.
    /// `simulate` exits 0 whenever the run completes, `verify` only if every
    /// row passes.
    inline CommandOutput cmd_ensemble(const RunConfig& cfg)
    {
        CommandOutput out;
        detail::collect_warnings(cfg, out);
        EnsembleReport report = run_ensemble(cfg.experiment);
        const ComparisonSummary summary = compare_to_theory(report, cfg.tol_rel, cfg.tol_sigma);
        out.text = serialize_report(report, cfg.format);
        if (cfg.command == Command::verify && !summary.all_pass())
            out.exit_code = exit_verify_failed;
        return out;
    }

    inline CommandOutput run_command(const RunConfig& cfg)
    {
        switch (cfg.command)
        {
        case Command::spectral:
            return cmd_spectral(cfg);
        case Command::moments:
            return cmd_moments(cfg);
        case Command::predict:
            return cmd_predict(cfg);
        case Command::simulate:
        case Command::verify:
            return cmd_ensemble(cfg);
        }
        return {};
    }
} // namespace tsync
