#pragma once

// Spectral constants of the variance recursion. B1 is the N → ∞ limit of
// B = (A - I)/γ; its zero eigenvalue splits to -κ2/N at finite N, and that
// near-unit eigenvalue of A sets the critical time scale t ~ N.

#include "tsync/linalg.hpp"
#include "tsync/model.hpp"
#include "tsync/moments.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <stdexcept>

namespace tsync
{
    struct SpectralSummary
    {
        double lambda1 = 0.0;
        double lambda2 = 0.0;
        double lambda3 = 0.0;
        Vec3 e1{};
        Vec3 e2{};
        Vec3 e3{};
        Vec3 phi{};
        Vec3 psi{};
        double big_z = 0.0;
        double kappa2 = 0.0;
        double delta = 0.0;
        double b2 = 0.0;
        double b1 = 0.0; // derived: N(1 - σ1) → (α12+α21)/Δ
        double b3 = 0.0; // derived: N(1 - σ3) → 2(α12+α21)/Δ
        double h = 0.0;
        double xi1 = 0.0;
        double xi2 = 0.0;
        double xi3 = 0.0;
    };

    namespace detail
    {
        inline void require_fraction(double c1)
        {
            if (!(c1 > 0.0 && c1 < 1.0))
                throw std::invalid_argument("c1 must lie in (0, 1)");
        }
    } // namespace detail

    inline std::array<double, 3> eigs_B1(const ModelParams& p) noexcept
    {
        const double s = p.alpha12 + p.alpha21;
        return {-s, 0.0, -2.0 * s};
    }

    inline std::array<Vec3, 3> eigvecs_B1(const ModelParams& p) noexcept
    {
        const double a = p.alpha12;
        const double b = p.alpha21;
        return {Vec3{-a, b, 0.0}, Vec3{1.0, 1.0, 0.0}, Vec3{-a * a, -b * b, (a + b) * (a + b)}};
    }

    struct NullPair
    {
        Vec3 phi{};
        Vec3 psi{}; // row vector, normalized so psi·phi = 1
        double big_z = 0.0;
    };

    inline NullPair null_pair(const ModelParams& p) noexcept
    {
        const double a = p.alpha12;
        const double b = p.alpha21;
        NullPair np;
        np.big_z = (a + b) * (1.0 / a + 1.0 / b);
        np.phi = {1.0, 1.0, 0.0};
        np.psi = (1.0 / np.big_z) * Vec3{1.0 + b / a, 1.0 + a / b, 1.0};
        return np;
    }

    /// N·(B - B1) written with fractions: entries α12/c1, α21/c2 in place of
    /// N·α12/N1, N·α21/N2.
    inline Mat3 b2_scaled(const ModelParams& p, double c1)
    {
        detail::require_fraction(c1);
        const double c2 = 1.0 - c1;
        const double u = p.alpha12 / c1;
        const double w = p.alpha21 / c2;
        return Mat3{{{-u, -u, -u}, {-w, -w, -w}, {u + w, u + w, u + w}}};
    }

    inline double kappa2(const ModelParams& p, double c1)
    {
        detail::require_fraction(c1);
        const double c2 = 1.0 - c1;
        return 2.0 / null_pair(p).big_z * (p.alpha21 / c1 + p.alpha12 / c2);
    }

    /// Δ = c1·α12 + c2·α21, so that γ = 1/(NΔ).
    inline double delta_of(const ModelParams& p, double c1)
    {
        detail::require_fraction(c1);
        return c1 * p.alpha12 + (1.0 - c1) * p.alpha21;
    }

    /// First-order perturbation of the zero eigenvalue of B1: ψ'B_{2,k}φ / N = -κ2/N.
    inline double lambda2_first_order(const ModelParams& p, double total, double c1)
    {
        if (!(total >= 2.0))
            throw std::invalid_argument("N must be at least 2");
        return -kappa2(p, c1) / total;
    }

    inline double b2_of(const ModelParams& p, double c1) { return kappa2(p, c1) / delta_of(p, c1); }

    /// Plateau coefficient h: expected variance per particle at stationarity.
    inline double h_of(const ModelParams& p, double c1)
    {
        const double s = p.alpha12 + p.alpha21;
        const double dv = p.v1 - p.v2;
        return 2.0 * p.alpha12 * p.alpha21 * dv * dv / (kappa2(p, c1) * s * s * s);
    }

    /// Coefficients of (0,0,1)' in the basis e1, e2, e3 of eigvecs_B1.
    inline std::array<double, 3> xi_of(const ModelParams& p) noexcept
    {
        const double s = p.alpha12 + p.alpha21;
        const double s2 = s * s;
        return {(p.alpha21 - p.alpha12) / s2, p.alpha12 * p.alpha21 / s2, 1.0 / s2};
    }

    inline SpectralSummary summarize_spectrum(const ModelParams& p, double c1)
    {
        SpectralSummary out;
        const auto lam = eigs_B1(p);
        out.lambda1 = lam[0];
        out.lambda2 = lam[1];
        out.lambda3 = lam[2];
        const auto e = eigvecs_B1(p);
        out.e1 = e[0];
        out.e2 = e[1];
        out.e3 = e[2];
        const NullPair np = null_pair(p);
        out.phi = np.phi;
        out.psi = np.psi;
        out.big_z = np.big_z;
        out.kappa2 = kappa2(p, c1);
        out.delta = delta_of(p, c1);
        out.b2 = out.kappa2 / out.delta;
        out.b1 = (p.alpha12 + p.alpha21) / out.delta;
        out.b3 = 2.0 * (p.alpha12 + p.alpha21) / out.delta;
        out.h = h_of(p, c1);
        const auto xi = xi_of(p);
        out.xi1 = xi[0];
        out.xi2 = xi[1];
        out.xi3 = xi[2];
        return out;
    }

    // ---------------------------------------------------------------------
    // Numeric 3x3 eigenvalues, used as an independent cross-check.

    struct NumericEigs
    {
        std::array<std::complex<double>, 3> values{}; // ascending real part
        bool ill_conditioned = false;                 // near-multiple eigenvalue
        double max_residual = 0.0;                    // final Newton step / ||M||
    };

    /// Eigenvalues of a general real 3x3 matrix from its characteristic cubic.
    ///
    /// The matrix is first shifted by trace/3, so eigenvalues clustered around
    /// a large common value (A = I + γB) keep their relative separation. The
    /// cubic is solved in closed form (trigonometric branch for three real
    /// roots, Cardano otherwise) and each root is refined by Newton's method.
    inline NumericEigs eigs_3x3_numeric(const Mat3& m)
    {
        for (const auto& row : m)
            for (double x : row)
                if (!std::isfinite(x))
                    throw std::invalid_argument("matrix has non-finite entries");

        using cd = std::complex<double>;
        const double shift = (m[0][0] + m[1][1] + m[2][2]) / 3.0;
        Mat3 b = m;
        for (std::size_t i = 0; i < 3; ++i)
            b[i][i] -= shift;

        // λ³ + c2 λ² + c1 λ + c0
        const double c2 = -(b[0][0] + b[1][1] + b[2][2]);
        const double c1 = (b[0][0] * b[1][1] - b[0][1] * b[1][0]) + (b[0][0] * b[2][2] - b[0][2] * b[2][0]) +
                          (b[1][1] * b[2][2] - b[1][2] * b[2][1]);
        const double c0 = -det(b);

        const double p = c1 - c2 * c2 / 3.0;
        const double q = 2.0 * c2 * c2 * c2 / 27.0 - c2 * c1 / 3.0 + c0;
        const double offset = -c2 / 3.0;

        const double half_q = q / 2.0;
        const double third_p = p / 3.0;
        const double disc = half_q * half_q + third_p * third_p * third_p;
        const double disc_scale = half_q * half_q + std::abs(third_p * third_p * third_p);

        NumericEigs out;
        out.ill_conditioned = disc_scale == 0.0 || std::abs(disc) <= 1e-10 * disc_scale;

        std::array<cd, 3> roots{};
        if (disc_scale == 0.0)
        {
            roots = {cd(offset), cd(offset), cd(offset)};
        }
        else if (disc < 0.0)
        {
            const double r = 2.0 * std::sqrt(-third_p);
            const double arg = std::clamp(3.0 * q / (2.0 * p) * std::sqrt(-3.0 / p), -1.0, 1.0);
            const double phi = std::acos(arg) / 3.0;
            for (std::size_t k = 0; k < 3; ++k)
                roots[k] = cd(offset + r * std::cos(phi - 2.0 * std::numbers::pi * static_cast<double>(k) / 3.0));
        }
        else
        {
            const double sq = std::sqrt(disc);
            const double u = std::cbrt(-half_q + sq);
            const double v = std::cbrt(-half_q - sq);
            roots[0] = cd(offset + u + v);
            roots[1] = cd(offset - (u + v) / 2.0, std::sqrt(3.0) / 2.0 * (u - v));
            roots[2] = std::conj(roots[1]);
        }

        const double scale = std::max(norm_inf(m), 1e-300);
        auto poly = [&](cd x) { return ((x + c2) * x + c1) * x + c0; };
        auto dpoly = [&](cd x) { return (3.0 * x + 2.0 * c2) * x + c1; };
        for (cd& x : roots)
        {
            double last_step = 0.0;
            for (int it = 0; it < 60; ++it)
            {
                const cd d = dpoly(x);
                if (std::abs(d) == 0.0)
                    break;
                const cd step = poly(x) / d;
                const cd candidate = x - step;
                if (std::abs(poly(candidate)) > std::abs(poly(x)))
                    break;
                x = candidate;
                last_step = std::abs(step);
                if (last_step <= 1e-16 * std::max(std::abs(x), 1e-300))
                    break;
            }
            out.max_residual = std::max(out.max_residual, last_step / scale);
            // Real input: drop imaginary noise on roots the closed form found real.
            if (std::abs(x.imag()) <= 1e-14 * scale && disc <= 0.0)
                x = cd(x.real());
        }

        for (std::size_t k = 0; k < 3; ++k)
            out.values[k] = roots[k] + shift;
        std::sort(out.values.begin(), out.values.end(),
                  [](const cd& a, const cd& c) { return a.real() < c.real() || (a.real() == c.real() && a.imag() < c.imag()); });
        return out;
    }

    /// Right eigenvector of m for a real eigenvalue: the cross product of the
    /// two rows of (m - λI) that span the largest area.
    inline Vec3 eigvec_3x3_numeric(const Mat3& m, double lambda)
    {
        Mat3 s = m;
        for (std::size_t i = 0; i < 3; ++i)
            s[i][i] -= lambda;
        const std::array<Vec3, 3> candidates{cross(s[0], s[1]), cross(s[0], s[2]), cross(s[1], s[2])};
        const auto best = std::max_element(candidates.begin(), candidates.end(),
                                           [](const Vec3& a, const Vec3& b) { return norm2(a) < norm2(b); });
        return *best;
    }

    /// Finite-N counterparts of the B1 eigen-structure, from A numerically.
    struct FiniteNSpectrum
    {
        std::array<double, 3> sigma{};  // σ1, σ2, σ3 paired with λ1, λ2, λ3
        std::array<Vec3, 3> vectors{};  // eigenvectors scaled to best match e1, e2, e3
        std::array<double, 3> xi{};     // coefficients of q in that basis
    };

    inline FiniteNSpectrum finite_n_spectrum(const MomentSystem& sys, const ModelParams& p)
    {
        const NumericEigs ev = eigs_3x3_numeric(sys.a);
        // λ3 < λ1 < λ2 = 0, and A = I + γB keeps the order.
        FiniteNSpectrum out;
        out.sigma = {ev.values[1].real(), ev.values[2].real(), ev.values[0].real()};
        const auto limits = eigvecs_B1(p);
        for (std::size_t i = 0; i < 3; ++i)
        {
            const Vec3 v = eigvec_3x3_numeric(sys.a, out.sigma[i]);
            const double vv = dot(v, v);
            out.vectors[i] = (vv > 0.0 ? dot(limits[i], v) / vv : 0.0) * v;
        }
        const Solve3Result xi = solve3(from_columns(out.vectors[0], out.vectors[1], out.vectors[2]), sys.q);
        out.xi = xi.x;
        return out;
    }
} // namespace tsync
