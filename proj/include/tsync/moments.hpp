#pragma once

// Exact moment recursions of the embedded chain: expected empirical means
// (closed linear recursion) and the vector w = (d1, d2, r) of expected
// variances and expected squared gap, w(n+1) = A w(n) + f(n) + g.

#include "tsync/linalg.hpp"
#include "tsync/model.hpp"

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string_view>
#include <vector>

namespace tsync
{
    /// Which forcing vectors (q, g) accompany the shared matrix A.
    ///
    /// `displayed` takes q = (0,0,1) + γ(α12 - α12/N1, α21 - α21/N2, -(α12+α21))
    /// and g = γ²(v1-v2)²(α12γ, α21γ, 2) literally.
    ///
    /// `exact` is the conditional expectation of the one-step update. With
    /// G = X1 - X2 after the drift, E[G] = l + γ(v1-v2) and
    /// E[G²] = r + 2γ(v1-v2)l + 2γ²(v1-v2)², which gives
    ///   q = (γα12(1 - 1/N1), γα21(1 - 1/N2), A33),   g = 2γ²(v1-v2)²·q.
    /// Both share A and agree as N → ∞; only `exact` matches finite-N ensembles.
    enum class Closure : std::uint8_t
    {
        exact,
        displayed,
    };

    inline std::string_view to_string(Closure c) noexcept { return c == Closure::exact ? "exact" : "displayed"; }

    inline std::optional<Closure> parse_closure(std::string_view s) noexcept
    {
        if (s == "exact")
            return Closure::exact;
        if (s == "displayed")
            return Closure::displayed;
        return std::nullopt;
    }

    struct MeanState
    {
        std::uint64_t n = 0;
        double mu1 = 0.0;
        double mu2 = 0.0;
        double l12 = 0.0;
        double s = 0.0;
    };

    struct MomentVectorW
    {
        double d1 = 0.0;
        double d2 = 0.0;
        double r = 0.0;

        Vec3 as_vec() const noexcept { return {d1, d2, r}; }
        static MomentVectorW from_vec(const Vec3& v) noexcept { return {v[0], v[1], v[2]}; }
    };

    struct MomentSystem
    {
        double gamma = 0.0;
        double big_r = 0.0; // contraction factor of the mean gap, 1 - γ(α12+α21)
        Mat3 b1{};
        Mat3 b2{};
        Mat3 a{};
        Vec3 q{};
        Vec3 g{};
        double dv = 0.0;       // v1 - v2
        double c1_prime = 0.0; // l12(n) = c1_prime + c2_prime·R^n
        double c2_prime = 0.0;
        double l12_0 = 0.0;
        Closure closure = Closure::exact;
    };

    inline double gamma_of(const ModelParams& p) noexcept { return 1.0 / total_jump_rate(p); }

    inline MeanState make_mean_state(double mu1, double mu2, const ModelParams& p, std::uint64_t n = 0) noexcept
    {
        return {n, mu1, mu2, mu1 - mu2, p.alpha21 * mu1 + p.alpha12 * mu2};
    }

    inline MeanState mean_step(const MeanState& ms, const MomentSystem& sys, const ModelParams& p) noexcept
    {
        const double g = sys.gamma;
        const double mu1 = ms.mu1 + (p.alpha12 * (ms.mu2 - ms.mu1) + p.v1) * g + p.alpha12 * (p.v2 - p.v1) * g * g;
        const double mu2 = ms.mu2 + (p.alpha21 * (ms.mu1 - ms.mu2) + p.v2) * g + p.alpha21 * (p.v1 - p.v2) * g * g;
        return make_mean_state(mu1, mu2, p, ms.n + 1);
    }

    inline double r_power(const MomentSystem& sys, std::uint64_t n) noexcept
    {
        return std::pow(sys.big_r, static_cast<double>(n));
    }

    /// Expected mean gap after n embedded steps from gap l12_0.
    inline double l12_closed(std::uint64_t n, double l12_0, const MomentSystem& sys, const ModelParams& p)
    {
        const double rn = r_power(sys, n);
        return l12_0 * rn + ((p.v1 - p.v2) / (p.alpha12 + p.alpha21)) * (1.0 - rn) * sys.big_r;
    }

    /// Same value through the (C'1, C'2) form stored on the system.
    inline double l12_closed(std::uint64_t n, const MomentSystem& sys) noexcept
    {
        return sys.c1_prime + sys.c2_prime * r_power(sys, n);
    }

    /// S(n) = α21·μ1(n) + α12·μ2(n), which drifts linearly in n.
    inline double weighted_mean_closed(std::uint64_t n, double s0, const ModelParams& p)
    {
        return s0 + static_cast<double>(n) * gamma_of(p) * (p.alpha21 * p.v1 + p.alpha12 * p.v2);
    }

    inline MomentSystem build_moment_system(const ModelParams& p, double l12_0 = 0.0,
                                            Closure closure = Closure::exact)
    {
        p.validate();
        const double a12 = p.alpha12;
        const double a21 = p.alpha21;
        const double n1 = static_cast<double>(p.n1);
        const double n2 = static_cast<double>(p.n2);
        const double sum = a12 + a21;
        const double k = a12 / n1 + a21 / n2;

        MomentSystem sys;
        sys.closure = closure;
        sys.gamma = gamma_of(p);
        sys.big_r = 1.0 - sys.gamma * sum;
        sys.dv = p.v1 - p.v2;
        sys.b1 = Mat3{{{-a12, a12, a12}, {a21, -a21, a21}, {0.0, 0.0, -2.0 * sum}}};
        sys.b2 = Mat3{{{-a12 / n1, -a12 / n1, -a12 / n1}, {-a21 / n2, -a21 / n2, -a21 / n2}, {k, k, k}}};
        sys.a = identity3() + sys.gamma * (sys.b1 + sys.b2);

        const double g = sys.gamma;
        const double dv2 = sys.dv * sys.dv;
        if (closure == Closure::displayed)
        {
            sys.q = Vec3{0.0, 0.0, 1.0} + g * Vec3{a12 - a12 / n1, a21 - a21 / n2, -sum};
            sys.g = (g * g * dv2) * Vec3{a12 * g, a21 * g, 2.0};
        }
        else
        {
            sys.q = Vec3{g * a12 * (1.0 - 1.0 / n1), g * a21 * (1.0 - 1.0 / n2), sys.a[2][2]};
            sys.g = (2.0 * g * g * dv2) * sys.q;
        }

        sys.l12_0 = l12_0;
        sys.c1_prime = sys.dv * sys.big_r / sum;
        sys.c2_prime = l12_0 - sys.c1_prime;
        return sys;
    }

    /// Forcing term f(n) = 2γ(v1-v2)·l12(n)·q.
    inline Vec3 f_of(std::uint64_t n, double l12_0, const MomentSystem& sys, const ModelParams& p)
    {
        return (2.0 * sys.gamma * sys.dv * l12_closed(n, l12_0, sys, p)) * sys.q;
    }

    inline Vec3 f_of(std::uint64_t n, const MomentSystem& sys) noexcept
    {
        return (2.0 * sys.gamma * sys.dv * l12_closed(n, sys)) * sys.q;
    }

    inline MomentVectorW w_step(const MomentVectorW& w, std::uint64_t n, double l12_0, const MomentSystem& sys,
                                const ModelParams& p)
    {
        return MomentVectorW::from_vec(sys.a * w.as_vec() + f_of(n, l12_0, sys, p) + sys.g);
    }

    /// Moments of a concrete (deterministic) configuration: dᵢ = Sᵢ², r = gap².
    inline MomentVectorW initial_moments(const EmpiricalStats& st) noexcept { return {st.var1, st.var2, st.gap_sq}; }

    inline MomentVectorW initial_moments(const SystemState& s) { return initial_moments(empirical_stats(s)); }

    struct WSolution
    {
        MomentVectorW w;        // forward iteration, the reference value
        Vec3 homogeneous{};     // A^n w(0)
        Vec3 forced{};          // sum_{j=1..n} A^{j-1} f(n-j)
        Vec3 constant{};        // (1-A)^{-1}(1-A^n) g, or its summed form
        bool used_summed_constant = false;
        double condition = 0.0; // condition number of (1 - A)
        double decomposition_error = 0.0; // ||parts - w||_inf / max(||w||_inf, tiny)
    };

    /// Solves the variance recursion n steps ahead two ways: forward iteration
    /// and the three-term decomposition
    ///   A^n w(0) + Σ_{j=1..n} A^{j-1} f(n-j) + (1-A)^{-1}(1-A^n) g.
    /// The direct (1-A) solve becomes ill-conditioned like N² and is replaced
    /// by the summed form Σ A^{j-1} g when its residual exceeds 1e-6.
    inline WSolution w_solve(std::uint64_t n, const MomentVectorW& w0, double l12_0, const MomentSystem& sys,
                             const ModelParams& p)
    {
        WSolution out;

        MomentVectorW w = w0;
        for (std::uint64_t k = 0; k < n; ++k)
            w = w_step(w, k, l12_0, sys, p);
        out.w = w;

        // power holds A^{j-1} at the top of iteration j.
        Mat3 power = identity3();
        CompensatedVec3 forced;
        CompensatedVec3 summed_g;
        for (std::uint64_t j = 1; j <= n; ++j)
        {
            forced.add(power * f_of(n - j, l12_0, sys, p));
            summed_g.add(power * sys.g);
            power = power * sys.a;
        }
        out.homogeneous = power * w0.as_vec();
        out.forced = forced.value();

        const Mat3 one_minus_a = identity3() - sys.a;
        const Vec3 rhs = (identity3() - power) * sys.g;
        const Solve3Result solved = solve3(one_minus_a, rhs);
        out.condition = solved.condition;
        if (solved.singular || !(solved.residual <= 1e-6))
        {
            out.constant = summed_g.value();
            out.used_summed_constant = true;
        }
        else
        {
            out.constant = solved.x;
        }

        const Vec3 total = out.homogeneous + out.forced + out.constant;
        const double scale = std::max(norm_inf(w.as_vec()), 1e-300);
        out.decomposition_error = norm_inf(total - w.as_vec()) / scale;
        return out;
    }

    /// Rows of the combined mean/variance recursion, for tabulation.
    struct MomentRow
    {
        std::uint64_t n = 0;
        MeanState mean;
        MomentVectorW w;
        double l12_closed = 0.0;
    };

    /// Iterates both recursions from a concrete initial configuration and
    /// records every `stride`-th step up to `horizon` (the last step always).
    inline std::vector<MomentRow> moment_table(const ModelParams& p, const EmpiricalStats& init,
                                               std::uint64_t horizon, std::uint64_t stride = 1,
                                               Closure closure = Closure::exact)
    {
        if (stride == 0)
            throw std::invalid_argument("stride must be positive");
        const MomentSystem sys = build_moment_system(p, init.gap, closure);
        MeanState ms = make_mean_state(init.mean1, init.mean2, p);
        MomentVectorW w = initial_moments(init);
        std::vector<MomentRow> rows;
        rows.push_back({0, ms, w, l12_closed(0, init.gap, sys, p)});
        for (std::uint64_t k = 0; k < horizon; ++k)
        {
            w = w_step(w, k, init.gap, sys, p);
            ms = mean_step(ms, sys, p);
            const std::uint64_t n = k + 1;
            if (n % stride == 0 || n == horizon)
                rows.push_back({n, ms, w, l12_closed(n, init.gap, sys, p)});
        }
        return rows;
    }
} // namespace tsync
