// tsync: simulate the two-type synchronization particle system, evaluate its
// moment recursions and spectral constants, and check regime predictions.

#include "tsync/commands.hpp"

#include "CLI11.hpp"

#include <chrono>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace
{
    std::string read_file(const std::string& path)
    {
        std::ifstream in(path, std::ios::binary);
        if (!in)
            throw tsync::ConfigError("", 0, "cannot open config file '" + path + "'");
        std::ostringstream os;
        os << in.rdbuf();
        return os.str();
    }
} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"tsync - two-type time synchronization particle system"};
    app.footer(tsync::describe_config_keys() +
               "\nExit codes: 0 success (verify: all rows pass), 1 verification or run failure, "
               "2 configuration error.\nThreads: TSYNC_THREADS (default: hardware concurrency).");

    std::string command;
    std::string config_path;
    app.add_option("command", command, "simulate | moments | spectral | predict | verify")
        ->required()
        ->check(CLI::IsMember({"simulate", "moments", "spectral", "predict", "verify"}));
    app.add_option("--config", config_path, "config file (key = value with [model]/[experiment]/[output])");

    // Flag name -> config key. Flags override the file.
    const std::vector<std::pair<std::string, std::string>> flag_keys{
        {"--seed", "seed"},       {"--out", "out"},         {"--format", "format"},
        {"--ensemble", "ensemble"}, {"--t-grid", "t_grid"}, {"--n", "N"},
        {"--c1", "c1"},           {"--n1", "n1"},           {"--n2", "n2"},
        {"--alpha12", "alpha12"}, {"--alpha21", "alpha21"}, {"--v1", "v1"},
        {"--v2", "v2"},           {"--init", "init"},       {"--steps", "steps"},
        {"--stride", "stride"},   {"--closure", "closure"}, {"--tol-rel", "tol_rel"},
        {"--tol-sigma", "tol_sigma"}, {"--epsilon", "epsilon"}, {"--verbosity", "verbosity"},
    };
    std::vector<std::string> flag_values(flag_keys.size());
    for (std::size_t i = 0; i < flag_keys.size(); ++i)
        app.add_option(flag_keys[i].first, flag_values[i], "overrides config key '" + flag_keys[i].second + "'");
    std::vector<std::string> sets;
    app.add_option("--set", sets, "override any config key: --set key=value (repeatable)");

    try
    {
        app.parse(argc, argv);
    }
    catch (const CLI::ParseError& e)
    {
        const int code = app.exit(e);
        return code == 0 ? 0 : tsync::exit_config_error;
    }

    tsync::RunConfig cfg;
    try
    {
        std::vector<std::pair<std::string, std::string>> overrides;
        for (const auto& s : sets)
        {
            const auto eq = s.find('=');
            if (eq == std::string::npos)
                throw tsync::ConfigError(s, 0, "--set expects key=value");
            overrides.emplace_back(s.substr(0, eq), s.substr(eq + 1));
        }
        for (std::size_t i = 0; i < flag_keys.size(); ++i)
            if (app.count(flag_keys[i].first) > 0)
                overrides.emplace_back(flag_keys[i].second, flag_values[i]);
        const std::string text = config_path.empty() ? std::string() : read_file(config_path);
        cfg = tsync::parse_config(*tsync::parse_command(command), text, overrides);
    }
    catch (const tsync::ConfigError& e)
    {
        std::cerr << "error: " << e.what() << "\n";
        return tsync::exit_config_error;
    }

    try
    {
        const auto started = std::chrono::steady_clock::now();
        if (cfg.verbosity >= 2)
            std::cerr << "tsync " << command << ": n1=" << cfg.params().n1 << " n2=" << cfg.params().n2
                      << " ensemble=" << cfg.experiment.ensemble_size << " seed=" << cfg.experiment.seed
                      << " threads=" << tsync::thread_count_from_env() << "\n";
        const tsync::CommandOutput out = tsync::run_command(cfg);
        if (cfg.verbosity >= 2)
            std::cerr << "tsync " << command << ": done in "
                      << std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count() << " s\n";
        if (cfg.verbosity >= 1)
            for (const auto& w : out.warnings)
                std::cerr << "warning: " << w << "\n";
        if (cfg.out_path.empty())
        {
            std::cout << out.text;
        }
        else
        {
            std::ofstream file(cfg.out_path, std::ios::binary);
            if (!file)
            {
                std::cerr << "error: cannot write '" << cfg.out_path << "'\n";
                return tsync::exit_config_error;
            }
            file << out.text;
        }
        return out.exit_code;
    }
    catch (const std::exception& e)
    {
        std::cerr << "error: " << e.what() << "\n";
        return tsync::exit_verify_failed;
    }
}
