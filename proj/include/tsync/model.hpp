#pragma once

// Two-type particle system on the line: type-i particles drift at speed v_i
// and a type-i particle jumps onto a uniformly chosen particle of the other
// type at rate alpha_ij. Simulated exactly, jump by jump.

#include "tsync/linalg.hpp"
#include "tsync/rng.hpp"

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace tsync
{
    struct ModelParams
    {
        double alpha12 = 1.0; // rate at which a type-1 particle jumps to type 2
        double alpha21 = 1.0; // rate at which a type-2 particle jumps to type 1
        double v1 = 0.0;
        double v2 = 1.0;
        std::size_t n1 = 1;
        std::size_t n2 = 1;

        std::size_t total() const noexcept { return n1 + n2; }

        /// Population fraction of type 1.
        double c1() const noexcept { return static_cast<double>(n1) / static_cast<double>(total()); }

        /// Equal velocities: the dynamics is well defined but there is no
        /// desynchronization to study.
        bool degenerate() const noexcept { return v1 == v2; }

        /// Throws std::invalid_argument on any broken invariant.
        void validate() const
        {
            if (!(alpha12 > 0.0) || !std::isfinite(alpha12))
                throw std::invalid_argument("alpha12 must be positive and finite");
            if (!(alpha21 > 0.0) || !std::isfinite(alpha21))
                throw std::invalid_argument("alpha21 must be positive and finite");
            if (!std::isfinite(v1) || !std::isfinite(v2))
                throw std::invalid_argument("velocities must be finite");
            if (n1 < 1 || n2 < 1)
                throw std::invalid_argument("each type needs at least one particle");
        }
    };

    /// Populations from a total N and a type-1 fraction c1:
    /// n1 = floor(c1·N), n2 = N - n1.
    inline std::pair<std::size_t, std::size_t> split_population(std::size_t total, double c1)
    {
        if (!(c1 > 0.0 && c1 < 1.0))
            throw std::invalid_argument("c1 must lie in (0, 1)");
        const auto n1 = static_cast<std::size_t>(std::floor(c1 * static_cast<double>(total)));
        if (n1 < 1 || n1 >= total)
            throw std::invalid_argument("N and c1 leave one type empty");
        return {n1, total - n1};
    }

    inline ModelParams make_params(double alpha12, double alpha21, double v1, double v2, std::size_t total,
                                   double c1)
    {
        const auto [n1, n2] = split_population(total, c1);
        ModelParams p{alpha12, alpha21, v1, v2, n1, n2};
        p.validate();
        return p;
    }

    enum class ParticleType : std::uint8_t
    {
        one = 1,
        two = 2,
    };

    inline constexpr ParticleType other(ParticleType t) noexcept
    {
        return t == ParticleType::one ? ParticleType::two : ParticleType::one;
    }

    struct JumpEvent
    {
        ParticleType jumper_type = ParticleType::one;
        std::size_t jumper_index = 0;
        ParticleType target_type = ParticleType::two;
        std::size_t target_index = 0;
        double waiting_time = 0.0;
    };

    struct EmpiricalStats
    {
        double mean1 = 0.0;
        double mean2 = 0.0;
        double var1 = 0.0;
        double var2 = 0.0;
        double gap = 0.0;
        double gap_sq = 0.0;
    };

    /// Mean and population variance (divide by n) using two passes.
    inline std::pair<double, double> mean_and_variance(std::span<const double> xs) noexcept
    {
        const double n = static_cast<double>(xs.size());
        CompensatedSum s;
        for (double x : xs)
            s.add(x);
        const double mean = s.value() / n;
        CompensatedSum ss;
        CompensatedSum sd;
        for (double x : xs)
        {
            const double d = x - mean;
            ss.add(d * d);
            sd.add(d);
        }
        // Corrected two-pass formula; the second term removes the rounding in `mean`.
        const double corr = sd.value();
        const double var = (ss.value() - corr * corr / n) / n;
        return {mean + corr / n, var > 0.0 ? var : 0.0};
    }

    /// Positions are held in a per-type drift frame: coordinate k of type i is
    /// base_i[k] + shift_i. Drift only moves shift_i, so it costs O(1)
    /// regardless of population size; a jump rewrites one base entry.
    class SystemState
    {
    public:
        SystemState() = default;

        SystemState(std::vector<double> pos1, std::vector<double> pos2, double time = 0.0)
            : base1_(std::move(pos1)), base2_(std::move(pos2)), time_(time)
        {
            if (base1_.empty() || base2_.empty())
                throw std::invalid_argument("each type needs at least one particle");
            if (!(time_ >= 0.0))
                throw std::invalid_argument("time must be nonnegative");
        }

        double time() const noexcept { return time_; }
        std::uint64_t jump_count() const noexcept { return jump_count_; }
        std::size_t n1() const noexcept { return base1_.size(); }
        std::size_t n2() const noexcept { return base2_.size(); }
        std::size_t count(ParticleType t) const noexcept { return t == ParticleType::one ? n1() : n2(); }

        double position(ParticleType t, std::size_t k) const
        {
            const auto& b = base(t);
            if (k >= b.size())
                throw std::out_of_range("particle index out of range");
            return b[k] + shift(t);
        }

        std::vector<double> positions(ParticleType t) const
        {
            std::vector<double> out(base(t));
            const double s = shift(t);
            for (double& x : out)
                x += s;
            return out;
        }

        bool matches(const ModelParams& p) const noexcept { return n1() == p.n1 && n2() == p.n2; }

        bool operator==(const SystemState& o) const noexcept
        {
            return time_ == o.time_ && jump_count_ == o.jump_count_ && positions(ParticleType::one) ==
                   o.positions(ParticleType::one) && positions(ParticleType::two) == o.positions(ParticleType::two);
        }

    private:
        friend SystemState advance_drift(SystemState, const ModelParams&, double);
        friend SystemState apply_jump(SystemState, const JumpEvent&);
        friend EmpiricalStats empirical_stats(const SystemState&);

        const std::vector<double>& base(ParticleType t) const noexcept
        {
            return t == ParticleType::one ? base1_ : base2_;
        }

        double shift(ParticleType t) const noexcept { return t == ParticleType::one ? shift1_ : shift2_; }

        std::vector<double> base1_;
        std::vector<double> base2_;
        double shift1_ = 0.0;
        double shift2_ = 0.0;
        double time_ = 0.0;
        std::uint64_t jump_count_ = 0;
    };

    /// Total rate of jumps in the system, n1·alpha12 + n2·alpha21.
    inline double total_jump_rate(const ModelParams& p) noexcept
    {
        return static_cast<double>(p.n1) * p.alpha12 + static_cast<double>(p.n2) * p.alpha21;
    }

    inline SystemState advance_drift(SystemState s, const ModelParams& p, double dt)
    {
        if (!(dt >= 0.0))
            throw std::invalid_argument("drift duration must be nonnegative");
        s.shift1_ += p.v1 * dt;
        s.shift2_ += p.v2 * dt;
        s.time_ += dt;
        return s;
    }

    inline JumpEvent sample_jump(const ModelParams& p, Stream& rng)
    {
        const double rate1 = static_cast<double>(p.n1) * p.alpha12;
        const double rate = total_jump_rate(p);
        JumpEvent ev;
        ev.waiting_time = rng.exponential(1.0 / rate);
        if (rng.uniform() * rate < rate1)
        {
            ev.jumper_type = ParticleType::one;
            ev.jumper_index = rng.below(p.n1);
            ev.target_type = ParticleType::two;
            ev.target_index = rng.below(p.n2);
        }
        else
        {
            ev.jumper_type = ParticleType::two;
            ev.jumper_index = rng.below(p.n2);
            ev.target_type = ParticleType::one;
            ev.target_index = rng.below(p.n1);
        }
        return ev;
    }

    inline SystemState apply_jump(SystemState s, const JumpEvent& ev)
    {
        if (ev.jumper_type == ev.target_type)
            throw std::invalid_argument("within-type jumps are not part of the model");
        const std::size_t nj = s.count(ev.jumper_type);
        const std::size_t nt = s.count(ev.target_type);
        if (ev.jumper_index >= nj || ev.target_index >= nt)
            throw std::out_of_range("jump event index out of range");

        if (ev.jumper_type == ParticleType::one)
            s.base1_[ev.jumper_index] = (s.base2_[ev.target_index] + s.shift2_) - s.shift1_;
        else
            s.base2_[ev.jumper_index] = (s.base1_[ev.target_index] + s.shift1_) - s.shift2_;
        ++s.jump_count_;
        return s;
    }

    /// One step of the embedded chain: wait, drift to the jump moment, jump.
    inline std::pair<SystemState, JumpEvent> embedded_step(SystemState s, const ModelParams& p, Stream& rng)
    {
        const JumpEvent ev = sample_jump(p, rng);
        s = advance_drift(std::move(s), p, ev.waiting_time);
        s = apply_jump(std::move(s), ev);
        return {std::move(s), ev};
    }

    inline EmpiricalStats empirical_stats(const SystemState& s)
    {
        EmpiricalStats st;
        const auto [m1, d1] = mean_and_variance(s.base1_);
        const auto [m2, d2] = mean_and_variance(s.base2_);
        st.mean1 = m1 + s.shift1_;
        st.mean2 = m2 + s.shift2_;
        st.var1 = d1;
        st.var2 = d2;
        st.gap = st.mean1 - st.mean2;
        st.gap_sq = st.gap * st.gap;
        return st;
    }

    struct TrajectoryPoint
    {
        double time = 0.0;
        EmpiricalStats stats;
    };

    struct SimulateOptions
    {
        /// Spacing of recorded points; 0 records only the final state.
        double record_interval = 0.0;
        /// Hard cap on jumps in one call (resource guard).
        std::uint64_t max_events = std::uint64_t{1} << 40;
    };

    class EventLimitExceeded : public std::runtime_error
    {
    public:
        using std::runtime_error::runtime_error;
    };

    struct SimulationResult
    {
        SystemState state;
        std::vector<TrajectoryPoint> trajectory;
    };

    /// Runs the chain until physical time t_end and drifts the final state to
    /// exactly t_end. A sampled clock that overshoots t_end is discarded, which
    /// is exact for exponential waiting times.
    ///
    /// With record_interval > 0 the trajectory holds the state at
    /// start, start + k·interval, ... and at t_end.
    inline SimulationResult simulate_until(SystemState s, const ModelParams& p, Stream& rng, double t_end,
                                           const SimulateOptions& opt = {})
    {
        if (!(t_end >= s.time()))
            throw std::invalid_argument("t_end precedes the current time");
        if (!s.matches(p))
            throw std::invalid_argument("state populations do not match parameters");
        if (opt.record_interval < 0.0)
            throw std::invalid_argument("record_interval must be nonnegative");

        SimulationResult out;
        const double start = s.time();
        std::uint64_t k_next = 0;
        auto next_record = [&]() { return start + static_cast<double>(k_next) * opt.record_interval; };
        auto record_through = [&](double until) {
            if (opt.record_interval <= 0.0)
                return;
            while (next_record() <= until && next_record() < t_end)
            {
                s = advance_drift(std::move(s), p, next_record() - s.time());
                out.trajectory.push_back({s.time(), empirical_stats(s)});
                ++k_next;
            }
        };

        std::uint64_t events = 0;
        for (;;)
        {
            const JumpEvent ev = sample_jump(p, rng);
            const double t_jump = s.time() + ev.waiting_time;
            if (t_jump > t_end)
                break;
            record_through(t_jump);
            if (++events > opt.max_events)
                throw EventLimitExceeded("maximum number of jump events exceeded");
            s = advance_drift(std::move(s), p, t_jump - s.time());
            s = apply_jump(std::move(s), ev);
        }
        record_through(t_end);
        s = advance_drift(std::move(s), p, t_end - s.time());
        if (out.trajectory.empty() || out.trajectory.back().time < s.time())
            out.trajectory.push_back({s.time(), empirical_stats(s)});
        out.state = std::move(s);
        return out;
    }

    // ---------------------------------------------------------------------
    // Initial configurations

    struct InitSpec
    {
        enum class Kind : std::uint8_t
        {
            zero,
            uniform,
            gaussian,
            list,
        };

        Kind kind = Kind::zero;
        double a = 0.0; // uniform lower bound / gaussian mean
        double b = 0.0; // uniform upper bound / gaussian sd
        std::vector<double> list1;
        std::vector<double> list2;

        static InitSpec zeros() { return {}; }
        static InitSpec uniform(double lo, double hi) { return {Kind::uniform, lo, hi, {}, {}}; }
        static InitSpec gaussian(double mean, double sd) { return {Kind::gaussian, mean, sd, {}, {}}; }
        static InitSpec explicit_positions(std::vector<double> p1, std::vector<double> p2)
        {
            return {Kind::list, 0.0, 0.0, std::move(p1), std::move(p2)};
        }

        /// Whether drawing a configuration consumes random numbers.
        bool random() const noexcept { return kind == Kind::uniform || kind == Kind::gaussian; }
    };

    /// Builds the time-0 state. Random kinds draw from `rng`, so a trajectory's
    /// initial configuration is part of its own stream.
    inline SystemState make_initial_state(const ModelParams& p, const InitSpec& init, Stream& rng)
    {
        std::vector<double> p1(p.n1, 0.0);
        std::vector<double> p2(p.n2, 0.0);
        switch (init.kind)
        {
        case InitSpec::Kind::zero:
            break;
        case InitSpec::Kind::uniform:
            if (!(init.b >= init.a))
                throw std::invalid_argument("uniform init needs a <= b");
            for (auto* v : {&p1, &p2})
                for (double& x : *v)
                    x = init.a + (init.b - init.a) * rng.uniform();
            break;
        case InitSpec::Kind::gaussian:
            if (!(init.b >= 0.0))
                throw std::invalid_argument("gaussian init needs sd >= 0");
            for (auto* v : {&p1, &p2})
                for (double& x : *v)
                    x = init.a + init.b * rng.normal();
            break;
        case InitSpec::Kind::list:
            if (init.list1.size() != p.n1 || init.list2.size() != p.n2)
                throw std::invalid_argument("explicit init lists must have n1 and n2 entries");
            p1 = init.list1;
            p2 = init.list2;
            break;
        }
        return SystemState(std::move(p1), std::move(p2));
    }

    inline SystemState make_initial_state(const ModelParams& p, const InitSpec& init = {})
    {
        if (init.random())
            throw std::invalid_argument("random initial condition needs a random stream");
        Stream unused(0);
        return make_initial_state(p, init, unused);
    }
} // namespace tsync
