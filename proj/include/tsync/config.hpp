#pragma once

// Run configuration: a flat `key = value` text format with optional
// [section] headers, overridable from the command line.
//
// Grammar (one item per line):
//   line    := blank | comment | section | entry
//   comment := ('#' | ';') any*
//   section := '[' name ']'            name in {model, experiment, output}
//   entry   := key '=' value           value runs to end of line (trimmed);
//                                      a trailing " #..." comment is stripped
// Keys are unique; a key given under a section must belong to that section,
// keys before the first header may be any known key.

#include "tsync/model.hpp"
#include "tsync/moments.hpp"
#include "tsync/regimes.hpp"

#include <array>
#include <cctype>
#include <charconv>
#include <cstdint>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace tsync
{
    enum class Command : std::uint8_t
    {
        simulate,
        moments,
        spectral,
        predict,
        verify,
    };

    inline std::optional<Command> parse_command(std::string_view s) noexcept
    {
        if (s == "simulate")
            return Command::simulate;
        if (s == "moments")
            return Command::moments;
        if (s == "spectral")
            return Command::spectral;
        if (s == "predict")
            return Command::predict;
        if (s == "verify")
            return Command::verify;
        return std::nullopt;
    }

    enum class OutputFormat : std::uint8_t
    {
        csv,
        json,
    };

    /// Configuration problem tied to a key and, for file input, a line number
    /// (0 when the value came from a flag or a default).
    class ConfigError : public std::runtime_error
    {
    public:
        ConfigError(std::string key, int line, const std::string& what)
            : std::runtime_error(format(key, line, what)), key_(std::move(key)), line_(line)
        {
        }

        const std::string& key() const noexcept { return key_; }
        int line() const noexcept { return line_; }

    private:
        static std::string format(const std::string& key, int line, const std::string& what)
        {
            std::string msg = "config";
            if (line > 0)
                msg += " line " + std::to_string(line);
            if (!key.empty())
                msg += " key '" + key + "'";
            return msg + ": " + what;
        }

        std::string key_;
        int line_ = 0;
    };

    struct KeySpec
    {
        std::string_view key;
        std::string_view section;
        std::string_view fallback;
        std::string_view units;
        std::string_view help;
    };

    // Every accepted key. The defaults here are the ones applied and printed by --help.
    inline constexpr std::array<KeySpec, 24> config_keys{{
        {"alpha12", "model", "1", "1/time", "jump rate of a type-1 particle onto type 2"},
        {"alpha21", "model", "1", "1/time", "jump rate of a type-2 particle onto type 1"},
        {"v1", "model", "0", "coordinate/time", "drift velocity of type 1"},
        {"v2", "model", "1", "coordinate/time", "drift velocity of type 2"},
        {"n1", "model", "(unset)", "particles", "type-1 population (use with n2, excludes N/c1)"},
        {"n2", "model", "(unset)", "particles", "type-2 population (use with n1, excludes N/c1)"},
        {"N", "model", "100", "particles", "total population, split as n1 = floor(c1*N)"},
        {"c1", "model", "0.5", "fraction", "type-1 fraction in (0,1)"},
        {"t_grid", "experiment", "1", "time", "record times: list 'a, b, c' or range 'start:stop:step'"},
        {"ensemble", "experiment", "100", "trajectories", "Monte Carlo ensemble size M"},
        {"seed", "experiment", "0", "-", "master seed (64-bit unsigned)"},
        {"init", "experiment", "zero", "-", "zero | uniform(a,b) | gaussian(mean,sd) | list"},
        {"positions1", "experiment", "(empty)", "coordinate", "type-1 positions for init=list"},
        {"positions2", "experiment", "(empty)", "coordinate", "type-2 positions for init=list"},
        {"record_interval", "experiment", "0", "time", "extra report rows every interval up to the last t_grid time (0: grid only)"},
        {"max_events", "experiment", "1099511627776", "jumps", "per-trajectory jump budget"},
        {"steps", "experiment", "100", "embedded steps", "moment recursion horizon"},
        {"stride", "experiment", "1", "embedded steps", "moment table row spacing"},
        {"closure", "experiment", "exact", "-", "moment forcing vectors: exact | displayed"},
        {"tol_rel", "experiment", "0.15", "fraction", "verify: relative tolerance"},
        {"tol_sigma", "experiment", "4", "standard errors", "verify: statistical tolerance"},
        {"epsilon", "experiment", "0.01", "-", "regime classification threshold"},
        {"format", "output", "csv", "-", "csv | json"},
        {"out", "output", "(stdout)", "path", "output file"},
    }};

    inline constexpr KeySpec verbosity_key{"verbosity", "output", "1", "level", "0 quiet, 1 warnings, 2 run summary and timing on stderr"};

    inline const KeySpec* find_key(std::string_view key) noexcept
    {
        for (const auto& k : config_keys)
            if (k.key == key)
                return &k;
        if (key == verbosity_key.key)
            return &verbosity_key;
        return nullptr;
    }

    struct ConfigEntry
    {
        std::string value;
        int line = 0; // 0: command-line flag
    };

    using ConfigMap = std::map<std::string, ConfigEntry, std::less<>>;

    namespace detail
    {
        inline std::string_view trim(std::string_view s) noexcept
        {
            while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front())))
                s.remove_prefix(1);
            while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back())))
                s.remove_suffix(1);
            return s;
        }

        inline std::vector<std::string_view> split_list(std::string_view s)
        {
            std::vector<std::string_view> out;
            std::size_t start = 0;
            for (std::size_t i = 0; i <= s.size(); ++i)
            {
                if (i == s.size() || s[i] == ',' || std::isspace(static_cast<unsigned char>(s[i])))
                {
                    const auto piece = trim(s.substr(start, i - start));
                    if (!piece.empty())
                        out.push_back(piece);
                    start = i + 1;
                }
            }
            return out;
        }
    } // namespace detail

    /// Parses the text format into raw entries. Throws ConfigError on syntax
    /// errors, unknown keys, duplicates and misplaced keys.
    inline ConfigMap parse_config_text(std::string_view text)
    {
        ConfigMap out;
        std::string section;
        int line_no = 0;
        std::size_t pos = 0;
        while (pos <= text.size())
        {
            const std::size_t nl = text.find('\n', pos);
            std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
            pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
            ++line_no;

            line = detail::trim(line);
            if (line.empty() || line.front() == '#' || line.front() == ';')
                continue;
            if (line.front() == '[')
            {
                if (line.back() != ']')
                    throw ConfigError("", line_no, "unterminated section header");
                section = std::string(detail::trim(line.substr(1, line.size() - 2)));
                if (section != "model" && section != "experiment" && section != "output")
                    throw ConfigError("", line_no, "unknown section [" + section + "]");
                continue;
            }
            const std::size_t eq = line.find('=');
            if (eq == std::string_view::npos)
                throw ConfigError("", line_no, "expected 'key = value'");
            const std::string key(detail::trim(line.substr(0, eq)));
            std::string_view value = line.substr(eq + 1);
            if (const std::size_t hash = value.find(" #"); hash != std::string_view::npos)
                value = value.substr(0, hash);
            value = detail::trim(value);

            const KeySpec* spec = find_key(key);
            if (spec == nullptr)
                throw ConfigError(key, line_no, "unknown key");
            if (!section.empty() && spec->section != section)
                throw ConfigError(key, line_no, "key belongs to section [" + std::string(spec->section) + "]");
            if (out.contains(key))
                throw ConfigError(key, line_no, "duplicate key (first at line " + std::to_string(out[key].line) + ")");
            out[key] = ConfigEntry{std::string(value), line_no};
        }
        return out;
    }

    /// Applies command-line overrides on top of file entries.
    inline void apply_overrides(ConfigMap& cfg, const std::vector<std::pair<std::string, std::string>>& overrides)
    {
        for (const auto& [key, value] : overrides)
        {
            if (find_key(key) == nullptr)
                throw ConfigError(key, 0, "unknown key");
            cfg[key] = ConfigEntry{value, 0};
        }
    }

    struct RunConfig
    {
        Command command = Command::simulate;
        ExperimentConfig experiment;
        double c1 = 0.5; // fraction used by spectral constants (n1/N when populations are explicit)
        std::uint64_t steps = 100;
        std::uint64_t stride = 1;
        Closure closure = Closure::exact;
        double tol_rel = 0.15;
        double tol_sigma = 4.0;
        OutputFormat format = OutputFormat::csv;
        std::string out_path; // empty: stdout
        int verbosity = 1;

        const ModelParams& params() const noexcept { return experiment.params; }
    };

    namespace detail
    {
        inline double to_double(const std::string& key, const ConfigEntry& e)
        {
            const std::string_view s = trim(e.value);
            double v = 0.0;
            const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
            if (res.ec != std::errc() || res.ptr != s.data() + s.size())
                throw ConfigError(key, e.line, "expected a number, got '" + e.value + "'");
            return v;
        }

        inline std::uint64_t to_u64(const std::string& key, const ConfigEntry& e)
        {
            const std::string_view s = trim(e.value);
            std::uint64_t v = 0;
            const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
            if (res.ec != std::errc() || res.ptr != s.data() + s.size())
                throw ConfigError(key, e.line, "expected a nonnegative integer, got '" + e.value + "'");
            return v;
        }

        inline std::vector<double> to_list(const std::string& key, const ConfigEntry& e)
        {
            std::vector<double> out;
            for (auto piece : split_list(e.value))
                out.push_back(to_double(key, ConfigEntry{std::string(piece), e.line}));
            return out;
        }

        inline std::vector<double> to_grid(const std::string& key, const ConfigEntry& e)
        {
            const std::string_view s = trim(e.value);
            if (s.find(':') == std::string_view::npos)
                return to_list(key, e);
            std::vector<double> parts;
            std::size_t start = 0;
            for (std::size_t i = 0; i <= s.size(); ++i)
                if (i == s.size() || s[i] == ':')
                {
                    parts.push_back(to_double(key, ConfigEntry{std::string(s.substr(start, i - start)), e.line}));
                    start = i + 1;
                }
            if (parts.size() != 3 || !(parts[2] > 0.0) || !(parts[1] >= parts[0]))
                throw ConfigError(key, e.line, "range must be 'start:stop:step' with step > 0 and stop >= start");
            std::vector<double> out;
            const auto count = static_cast<std::uint64_t>(std::floor((parts[1] - parts[0]) / parts[2] * (1.0 + 1e-12)));
            for (std::uint64_t k = 0; k <= count; ++k)
                out.push_back(parts[0] + static_cast<double>(k) * parts[2]);
            return out;
        }

        inline InitSpec to_init(const std::string& key, const ConfigEntry& e, const ConfigMap& cfg)
        {
            const std::string_view s = trim(e.value);
            auto args = [&](std::string_view name) {
                const std::string_view inner = s.substr(name.size());
                if (inner.size() < 2 || inner.front() != '(' || inner.back() != ')')
                    throw ConfigError(key, e.line, "expected " + std::string(name) + "(x,y)");
                auto vals = to_list(key, ConfigEntry{std::string(inner.substr(1, inner.size() - 2)), e.line});
                if (vals.size() != 2)
                    throw ConfigError(key, e.line, "expected two arguments");
                return vals;
            };
            if (s == "zero")
                return InitSpec::zeros();
            if (s.starts_with("uniform"))
            {
                const auto v = args("uniform");
                if (!(v[1] >= v[0]))
                    throw ConfigError(key, e.line, "uniform(a,b) needs a <= b");
                return InitSpec::uniform(v[0], v[1]);
            }
            if (s.starts_with("gaussian"))
            {
                const auto v = args("gaussian");
                if (!(v[1] >= 0.0))
                    throw ConfigError(key, e.line, "gaussian(mean,sd) needs sd >= 0");
                return InitSpec::gaussian(v[0], v[1]);
            }
            if (s == "list")
            {
                const auto p1 = cfg.find("positions1");
                const auto p2 = cfg.find("positions2");
                if (p1 == cfg.end() || p2 == cfg.end())
                    throw ConfigError(key, e.line, "init = list needs positions1 and positions2");
                return InitSpec::explicit_positions(to_list("positions1", p1->second),
                                                    to_list("positions2", p2->second));
            }
            throw ConfigError(key, e.line, "unknown initial condition '" + e.value + "'");
        }
    } // namespace detail

    /// Validates raw entries and produces a RunConfig with every default applied.
    inline RunConfig build_run_config(Command command, const ConfigMap& cfg)
    {
        using namespace detail;
        RunConfig rc;
        rc.command = command;
        auto get = [&](std::string_view key) -> const ConfigEntry* {
            const auto it = cfg.find(key);
            return it == cfg.end() ? nullptr : &it->second;
        };
        auto num = [&](std::string_view key, double fallback) {
            const ConfigEntry* e = get(key);
            return e ? to_double(std::string(key), *e) : fallback;
        };
        auto u64 = [&](std::string_view key, std::uint64_t fallback) {
            const ConfigEntry* e = get(key);
            return e ? to_u64(std::string(key), *e) : fallback;
        };
        auto line_of = [&](std::string_view key) {
            const ConfigEntry* e = get(key);
            return e ? e->line : 0;
        };

        ModelParams& p = rc.experiment.params;
        p.alpha12 = num("alpha12", 1.0);
        p.alpha21 = num("alpha21", 1.0);
        p.v1 = num("v1", 0.0);
        p.v2 = num("v2", 1.0);

        const bool explicit_pop = get("n1") || get("n2");
        const bool fraction_pop = get("N") || get("c1");
        if (explicit_pop && fraction_pop)
        {
            const std::string a = get("n1") ? "n1" : "n2";
            const std::string b = get("N") ? "N" : "c1";
            throw ConfigError(a, std::max(line_of(a), line_of(b)),
                              "population given both as '" + a + "' and '" + b + "'; use either n1,n2 or N,c1");
        }
        if (explicit_pop)
        {
            if (!get("n1") || !get("n2"))
                throw ConfigError(get("n1") ? "n2" : "n1", line_of(get("n1") ? "n1" : "n2"),
                                  "n1 and n2 must be given together");
            p.n1 = u64("n1", 0);
            p.n2 = u64("n2", 0);
            if (p.n1 < 1 || p.n2 < 1)
                throw ConfigError(p.n1 < 1 ? "n1" : "n2", line_of(p.n1 < 1 ? "n1" : "n2"), "must be at least 1");
            rc.c1 = p.c1();
        }
        else
        {
            const std::uint64_t total = u64("N", 100);
            const double c1 = num("c1", 0.5);
            try
            {
                const auto [n1, n2] = split_population(total, c1);
                p.n1 = n1;
                p.n2 = n2;
            }
            catch (const std::invalid_argument& ex)
            {
                throw ConfigError(get("c1") ? "c1" : "N", line_of(get("c1") ? "c1" : "N"), ex.what());
            }
            rc.c1 = c1;
        }
        try
        {
            p.validate();
        }
        catch (const std::invalid_argument& ex)
        {
            throw ConfigError("", 0, ex.what());
        }

        ExperimentConfig& x = rc.experiment;
        x.t_grid = get("t_grid") ? to_grid("t_grid", *get("t_grid")) : std::vector<double>{1.0};
        x.ensemble_size = u64("ensemble", 100);
        x.seed = u64("seed", 0);
        x.init = get("init") ? to_init("init", *get("init"), cfg) : InitSpec::zeros();
        x.record_interval = num("record_interval", 0.0);
        x.max_events = u64("max_events", std::uint64_t{1} << 40);
        x.epsilon = num("epsilon", default_regime_epsilon);
        if (!(x.epsilon > 0.0 && x.epsilon < 1.0))
            throw ConfigError("epsilon", line_of("epsilon"), "must lie in (0, 1)");
        if (x.ensemble_size < 1)
            throw ConfigError("ensemble", line_of("ensemble"), "must be at least 1");
        if (x.record_interval < 0.0)
            throw ConfigError("record_interval", line_of("record_interval"), "must be nonnegative");
        if (x.init.kind == InitSpec::Kind::list &&
            (x.init.list1.size() != p.n1 || x.init.list2.size() != p.n2))
            throw ConfigError("positions1", line_of("positions1"), "init lists must have n1 and n2 entries");
        try
        {
            x.validate();
        }
        catch (const std::invalid_argument& ex)
        {
            throw ConfigError("t_grid", line_of("t_grid"), ex.what());
        }

        rc.steps = u64("steps", 100);
        rc.stride = u64("stride", 1);
        if (rc.stride < 1)
            throw ConfigError("stride", line_of("stride"), "must be at least 1");
        if (const ConfigEntry* e = get("closure"))
        {
            const auto c = parse_closure(trim(e->value));
            if (!c)
                throw ConfigError("closure", e->line, "expected 'exact' or 'displayed'");
            rc.closure = *c;
        }
        rc.tol_rel = num("tol_rel", 0.15);
        rc.tol_sigma = num("tol_sigma", 4.0);
        if (rc.tol_rel < 0.0 || rc.tol_sigma < 0.0)
            throw ConfigError(rc.tol_rel < 0.0 ? "tol_rel" : "tol_sigma", 0, "tolerances must be nonnegative");

        if (const ConfigEntry* e = get("format"))
        {
            const auto f = trim(e->value);
            if (f == "csv")
                rc.format = OutputFormat::csv;
            else if (f == "json")
                rc.format = OutputFormat::json;
            else
                throw ConfigError("format", e->line, "expected 'csv' or 'json'");
        }
        if (const ConfigEntry* e = get("out"))
            rc.out_path = std::string(trim(e->value));
        rc.verbosity = static_cast<int>(u64("verbosity", 1));
        return rc;
    }

    /// File text plus flag overrides (flags win).
    inline RunConfig parse_config(Command command, std::string_view file_text,
                                  const std::vector<std::pair<std::string, std::string>>& overrides)
    {
        ConfigMap cfg = parse_config_text(file_text);
        apply_overrides(cfg, overrides);
        return build_run_config(command, cfg);
    }

    /// Key reference table for --help.
    inline std::string describe_config_keys()
    {
        std::ostringstream os;
        os << "Config keys ([section] key = default  (units)  description):\n";
        std::string_view section;
        auto emit = [&](const KeySpec& k) {
            if (k.section != section)
            {
                section = k.section;
                os << "  [" << section << "]\n";
            }
            os << "    " << k.key << " = " << k.fallback << "  (" << k.units << ")  " << k.help << "\n";
        };
        for (const auto& k : config_keys)
            emit(k);
        emit(verbosity_key);
        return os.str();
    }
} // namespace tsync
