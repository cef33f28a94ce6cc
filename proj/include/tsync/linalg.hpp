#pragma once

// Fixed-size 3x3 linear algebra used by the moment and spectral engines.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>

namespace tsync
{
    using Vec3 = std::array<double, 3>;
    using Mat3 = std::array<std::array<double, 3>, 3>;

    inline constexpr Mat3 identity3() noexcept
    {
        return Mat3{{{1.0, 0.0, 0.0}, {0.0, 1.0, 0.0}, {0.0, 0.0, 1.0}}};
    }

    inline constexpr Vec3 operator+(const Vec3& a, const Vec3& b) noexcept
    {
        return {a[0] + b[0], a[1] + b[1], a[2] + b[2]};
    }

    inline constexpr Vec3 operator-(const Vec3& a, const Vec3& b) noexcept
    {
        return {a[0] - b[0], a[1] - b[1], a[2] - b[2]};
    }

    inline constexpr Vec3 operator*(double s, const Vec3& a) noexcept
    {
        return {s * a[0], s * a[1], s * a[2]};
    }

    inline constexpr Mat3 operator+(const Mat3& a, const Mat3& b) noexcept
    {
        Mat3 r{};
        for (std::size_t i = 0; i < 3; ++i)
            for (std::size_t j = 0; j < 3; ++j)
                r[i][j] = a[i][j] + b[i][j];
        return r;
    }

    inline constexpr Mat3 operator-(const Mat3& a, const Mat3& b) noexcept
    {
        Mat3 r{};
        for (std::size_t i = 0; i < 3; ++i)
            for (std::size_t j = 0; j < 3; ++j)
                r[i][j] = a[i][j] - b[i][j];
        return r;
    }

    inline constexpr Mat3 operator*(double s, const Mat3& a) noexcept
    {
        Mat3 r{};
        for (std::size_t i = 0; i < 3; ++i)
            for (std::size_t j = 0; j < 3; ++j)
                r[i][j] = s * a[i][j];
        return r;
    }

    inline constexpr Vec3 operator*(const Mat3& m, const Vec3& v) noexcept
    {
        return {m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
                m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
                m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2]};
    }

    inline constexpr Mat3 operator*(const Mat3& a, const Mat3& b) noexcept
    {
        Mat3 r{};
        for (std::size_t i = 0; i < 3; ++i)
            for (std::size_t j = 0; j < 3; ++j)
                r[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j] + a[i][2] * b[2][j];
        return r;
    }

    // Row vector times matrix.
    inline constexpr Vec3 left_mul(const Vec3& row, const Mat3& m) noexcept
    {
        return {row[0] * m[0][0] + row[1] * m[1][0] + row[2] * m[2][0],
                row[0] * m[0][1] + row[1] * m[1][1] + row[2] * m[2][1],
                row[0] * m[0][2] + row[1] * m[1][2] + row[2] * m[2][2]};
    }

    inline constexpr double dot(const Vec3& a, const Vec3& b) noexcept
    {
        return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
    }

    inline constexpr Vec3 cross(const Vec3& a, const Vec3& b) noexcept
    {
        return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
    }

    inline double norm2(const Vec3& a) noexcept { return std::sqrt(dot(a, a)); }

    inline double norm_inf(const Vec3& a) noexcept
    {
        return std::max({std::abs(a[0]), std::abs(a[1]), std::abs(a[2])});
    }

    // Max absolute row sum.
    inline double norm_inf(const Mat3& m) noexcept
    {
        double best = 0.0;
        for (const auto& row : m)
            best = std::max(best, std::abs(row[0]) + std::abs(row[1]) + std::abs(row[2]));
        return best;
    }

    inline constexpr double det(const Mat3& m) noexcept
    {
        return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
               m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
               m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    }

    inline constexpr Mat3 transpose(const Mat3& m) noexcept
    {
        return Mat3{{{m[0][0], m[1][0], m[2][0]}, {m[0][1], m[1][1], m[2][1]}, {m[0][2], m[1][2], m[2][2]}}};
    }

    // Matrix whose columns are a, b, c.
    inline constexpr Mat3 from_columns(const Vec3& a, const Vec3& b, const Vec3& c) noexcept
    {
        return Mat3{{{a[0], b[0], c[0]}, {a[1], b[1], c[1]}, {a[2], b[2], c[2]}}};
    }

    inline constexpr Mat3 adjugate(const Mat3& m) noexcept
    {
        Mat3 r{};
        r[0][0] = m[1][1] * m[2][2] - m[1][2] * m[2][1];
        r[0][1] = m[0][2] * m[2][1] - m[0][1] * m[2][2];
        r[0][2] = m[0][1] * m[1][2] - m[0][2] * m[1][1];
        r[1][0] = m[1][2] * m[2][0] - m[1][0] * m[2][2];
        r[1][1] = m[0][0] * m[2][2] - m[0][2] * m[2][0];
        r[1][2] = m[0][2] * m[1][0] - m[0][0] * m[1][2];
        r[2][0] = m[1][0] * m[2][1] - m[1][1] * m[2][0];
        r[2][1] = m[0][1] * m[2][0] - m[0][0] * m[2][1];
        r[2][2] = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        return r;
    }

    struct Solve3Result
    {
        Vec3 x{};
        bool singular = false;
        double condition = std::numeric_limits<double>::infinity(); // infinity-norm estimate
        double residual = std::numeric_limits<double>::infinity();  // ||Mx - b||_inf / ||b||_inf
    };

    /// Solves m·x = b by Gaussian elimination with partial pivoting and one
    /// step of iterative refinement. Reports the infinity-norm condition number.
    inline Solve3Result solve3(const Mat3& m, const Vec3& b)
    {
        Solve3Result out;
        const double d = det(m);
        const double scale = norm_inf(m);
        if (d == 0.0 || !std::isfinite(d) || std::abs(d) <= 1e-300 * scale * scale * scale)
        {
            out.singular = true;
            return out;
        }

        auto eliminate = [](Mat3 a, Vec3 rhs) {
            std::array<std::size_t, 3> perm{0, 1, 2};
            for (std::size_t col = 0; col < 3; ++col)
            {
                std::size_t piv = col;
                for (std::size_t r = col + 1; r < 3; ++r)
                    if (std::abs(a[perm[r]][col]) > std::abs(a[perm[piv]][col]))
                        piv = r;
                std::swap(perm[col], perm[piv]);
                for (std::size_t r = col + 1; r < 3; ++r)
                {
                    const double f = a[perm[r]][col] / a[perm[col]][col];
                    for (std::size_t c = col; c < 3; ++c)
                        a[perm[r]][c] -= f * a[perm[col]][c];
                    rhs[perm[r]] -= f * rhs[perm[col]];
                }
            }
            Vec3 x{};
            for (std::size_t k = 3; k-- > 0;)
            {
                double s = rhs[perm[k]];
                for (std::size_t c = k + 1; c < 3; ++c)
                    s -= a[perm[k]][c] * x[c];
                x[k] = s / a[perm[k]][k];
            }
            return x;
        };

        Vec3 x = eliminate(m, b);
        const Vec3 r = b - m * x;
        x = x + eliminate(m, r);

        const Mat3 inv = (1.0 / d) * adjugate(m);
        out.x = x;
        out.condition = scale * norm_inf(inv);
        const double bn = norm_inf(b);
        out.residual = norm_inf(b - m * x) / (bn > 0.0 ? bn : 1.0);
        return out;
    }

    /// Neumaier-compensated running sum.
    class CompensatedSum
    {
    public:
        void add(double x) noexcept
        {
            const double t = sum_ + x;
            if (std::abs(sum_) >= std::abs(x))
                comp_ += (sum_ - t) + x;
            else
                comp_ += (x - t) + sum_;
            sum_ = t;
        }

        double value() const noexcept { return sum_ + comp_; }

    private:
        double sum_ = 0.0;
        double comp_ = 0.0;
    };

    inline double compensated_sum(std::span<const double> xs) noexcept
    {
        CompensatedSum acc;
        for (double x : xs)
            acc.add(x);
        return acc.value();
    }

    struct CompensatedVec3
    {
        std::array<CompensatedSum, 3> parts{};

        void add(const Vec3& v) noexcept
        {
            for (std::size_t i = 0; i < 3; ++i)
                parts[i].add(v[i]);
        }

        Vec3 value() const noexcept { return {parts[0].value(), parts[1].value(), parts[2].value()}; }
    };
} // namespace tsync
