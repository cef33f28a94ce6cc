// Expected empirical variance at t = N for growing N: a small ensemble
// against h(1 - e^{-κ2})N.
//
//   critical_scale [ensemble] [seed]

#include "tsync/regimes.hpp"

#include <cstdio>
#include <cstdlib>

int main(int argc, char** argv)
{
    const std::size_t ensemble = argc > 1 ? std::strtoull(argv[1], nullptr, 10) : 400;
    const std::uint64_t seed = argc > 2 ? std::strtoull(argv[2], nullptr, 10) : 1;

    std::printf("%6s %12s %12s %10s %9s\n", "N", "mean_var", "prediction", "stderr", "rel_err");
    for (std::size_t n : {20u, 40u, 80u, 160u})
    {
        tsync::ExperimentConfig cfg;
        cfg.params = tsync::make_params(1.0, 1.0, 0.0, 1.0, n, 0.5);
        cfg.t_grid = {static_cast<double>(n)};
        cfg.ensemble_size = ensemble;
        cfg.seed = seed;
        const tsync::EnsembleReport rep = tsync::run_ensemble(cfg);
        const tsync::EnsembleRow& row = rep.rows.front();
        const double mean = 0.5 * (row.mean_var1 + row.mean_var2);
        std::printf("%6zu %12.5f %12.5f %10.5f %9.4f\n", n, mean, row.prediction,
                    0.5 * (row.stderr1 + row.stderr2), row.rel_err);
    }
}
