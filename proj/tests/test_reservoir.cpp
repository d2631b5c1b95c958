#include "est/grad_check.hpp"
#include "est/ops.hpp"
#include "est/reservoir.hpp"

#include "test_util.hpp"

#include <cmath>
#include <complex>

namespace est {
namespace {

using testing::bit_equal;
using testing::expect_values;
using testing::random_tensor;

// Spectral radius by power iteration. When the dominant eigenvalues form a
// complex pair (or a +-r pair) the iterates rotate in a plane, so the last
// three iterates are fitted with x2 + c1 x1 + c0 x0 = 0 and the roots of
// l^2 + c1 l + c0 give the modulus.
double power_iteration_radius(const Tensor& a, int iterations = 20000) {
    const std::size_t n = a.rows();
    auto apply = [&](const std::vector<double>& x) {
        std::vector<double> y(n, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                y[i] += a.at(i, j) * x[j];
            }
        }
        return y;
    };
    auto dot = [](const std::vector<double>& p, const std::vector<double>& q) {
        double s = 0;
        for (std::size_t i = 0; i < p.size(); ++i) {
            s += p[i] * q[i];
        }
        return s;
    };
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i) {
        x[i] = 1.0 + 0.01 * static_cast<double>(i % 7);
    }
    for (int k = 0; k < iterations; ++k) {
        x = apply(x);
        const double norm = std::sqrt(dot(x, x));
        for (auto& v : x) {
            v /= norm;
        }
    }
    const auto x1 = apply(x);
    const auto x2 = apply(x1);
    const double g00 = dot(x, x), g01 = dot(x, x1), g11 = dot(x1, x1);
    const double det = g00 * g11 - g01 * g01;
    if (det < 1e-12 * g00 * g11) {
        return std::sqrt(g11 / g00);
    }
    // Normal equations for [c0, c1] minimising |x2 + c0 x + c1 x1|.
    const double r0 = -dot(x, x2), r1 = -dot(x1, x2);
    const double c0 = (r0 * g11 - r1 * g01) / det;
    const double c1 = (g00 * r1 - g01 * r0) / det;
    const std::complex<double> disc = std::sqrt(std::complex<double>(c1 * c1 - 4 * c0, 0));
    return std::max(std::abs((-c1 + disc) / 2.0), std::abs((-c1 - disc) / 2.0));
}

TEST(ReservoirInit, OneDimensionalMatrixIsPlusOrMinusOne) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto u = init_reservoir(1, 2, 0.05, seed);
        EXPECT_EQ(std::abs(u.w_hat.item()), 1.0) << "seed " << seed;
    }
}

TEST(ReservoirInit, SameSeedSameUnit) {
    const auto a = init_reservoir(20, 4, 0.2, 77);
    const auto b = init_reservoir(20, 4, 0.2, 77);
    const auto c = init_reservoir(20, 4, 0.2, 78);
    EXPECT_TRUE(bit_equal(a.w_hat, b.w_hat));
    EXPECT_TRUE(bit_equal(a.w_in, b.w_in));
    EXPECT_TRUE(bit_equal(a.score_w, b.score_w));
    EXPECT_FALSE(bit_equal(a.w_hat, c.w_hat));
}

TEST(ReservoirInit, RescaledToUnitSpectralRadius) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto u = init_reservoir(50, 4, 0.1, seed);
        EXPECT_NEAR(power_iteration_radius(u.w_hat), 1.0, 1e-4) << "seed " << seed;
        EXPECT_NEAR(spectral_radius(u.w_hat), 1.0, 1e-10);
    }
}

TEST(ReservoirInit, SparsityFollowsConnectivity) {
    const auto u = init_reservoir(100, 4, 0.2, 3);
    std::size_t nonzero = 0;
    for (double v : u.w_hat.data()) {
        nonzero += v != 0.0 ? 1 : 0;
    }
    const double frac = static_cast<double>(nonzero) / 10000.0;
    EXPECT_NEAR(frac, 0.2, 0.02);
}

TEST(ReservoirInit, TrainableTensorsAndInitialValues) {
    const auto u = init_reservoir(6, 3, 0.2, 1);
    EXPECT_EQ(u.rho.item(), 0.9);
    EXPECT_EQ(u.score_b.item(), 0.0);
    EXPECT_FALSE(u.w_hat.requires_grad());
    for (const auto& p : u.parameters()) {
        EXPECT_TRUE(p.requires_grad());
        EXPECT_FALSE(p.same_storage(u.w_hat));
    }
    const double bound = 1.0 / std::sqrt(3.0);
    for (double v : u.w_in.data()) {
        EXPECT_LE(std::abs(v), bound);
    }
}

TEST(ReservoirInit, RejectsBadConfiguration) {
    EXPECT_THROW(init_reservoir(4, 2, 0.0, 1), ConfigError);
    EXPECT_THROW(init_reservoir(4, 2, 1.5, 1), ConfigError);
    EXPECT_THROW(init_reservoir(0, 2, 0.2, 1), ConfigError);
}

TEST(UnitStep, ZeroLeakKeepsState) {
    const auto u = init_reservoir(5, 3, 0.3, 4);
    Rng rng = make_rng(4, "t");
    const Tensor s = random_tensor(1, 5, rng, false);
    const Tensor x = random_tensor(1, 3, rng, false);
    EXPECT_TRUE(bit_equal(unit_step(u, s, x, 0.0), s));
}

TEST(UnitStep, FullLeakFromZeroStateIsTanhOfDrive) {
    auto u = init_reservoir(4, 2, 0.5, 5);
    u.rho.mutable_data()[0] = 0.0;
    const Tensor x = Tensor::from(1, 2, {0.3, -0.8});
    std::vector<double> expected(4);
    for (std::size_t j = 0; j < 4; ++j) {
        expected[j] = std::tanh(0.3 * u.w_in.at(0, j) - 0.8 * u.w_in.at(1, j));
    }
    expect_values(unit_step(u, Tensor::zeros(1, 4), x, 1.0), expected, 1e-15);
}

TEST(UnitStep, HandComputedTwoDimensionalCase) {
    ReservoirUnit u;
    u.w_hat = Tensor::from(2, 2, {0.0, 1.0, -1.0, 0.0});
    u.rho = Tensor::scalar(0.5);
    u.w_in = Tensor::from(1, 2, {1.0, 2.0});
    u.score_w = Tensor::zeros(1, 1);
    u.score_b = Tensor::zeros(1, 1);
    const double s0 = 0.2, s1 = -0.4, x = 0.1, a = 0.5;
    // (w_hat s)_0 = s1, (w_hat s)_1 = -s0.
    const double c0 = std::tanh(x * 1.0 + 0.5 * s1);
    const double c1 = std::tanh(x * 2.0 - 0.5 * s0);
    expect_values(unit_step(u, Tensor::from(1, 2, {s0, s1}), Tensor::scalar(x), a),
                  {(1 - a) * s0 + a * c0, (1 - a) * s1 + a * c1}, 1e-15);
}

std::vector<ReservoirUnit> make_units(std::size_t m, std::size_t d_m, std::size_t d_a, std::uint64_t seed) {
    std::vector<ReservoirUnit> units;
    for (std::size_t i = 0; i < m; ++i) {
        units.push_back(init_reservoir(d_m, d_a, 0.2, seed + 100 * i));
    }
    return units;
}

TEST(LeakRates, EqualScoresGiveUniformRates) {
    auto units = make_units(4, 3, 2, 1);
    for (auto& u : units) {
        for (auto& w : u.score_w.mutable_data()) {
            w = 0.0;
        }
    }
    const auto r = adaptive_leak_rates(Tensor::from(4, 2, {1, 2, 3, 4, 5, 6, 7, 8}), units);
    ASSERT_EQ(r.size(), 4u);
    for (std::size_t i = 0; i < 4; ++i) {
        EXPECT_NEAR(r[i], 0.25, 1e-15);
    }
}

TEST(LeakRates, SingleUnitRateIsOne) {
    const auto units = make_units(1, 3, 2, 2);
    Rng rng = make_rng(2, "t");
    EXPECT_EQ(adaptive_leak_rates(random_tensor(1, 2, rng, false), units)[0], 1.0);
}

TEST(LeakRates, LogTwoScoreGapGivesTwoThirds) {
    auto units = make_units(2, 3, 2, 3);
    for (auto& u : units) {
        for (auto& w : u.score_w.mutable_data()) {
            w = 0.0;
        }
    }
    units[0].score_b.mutable_data()[0] = std::log(2.0);
    const auto r = adaptive_leak_rates(Tensor::zeros(2, 2), units);
    EXPECT_NEAR(r[0], 2.0 / 3.0, 1e-15);
    EXPECT_NEAR(r[1], 1.0 / 3.0, 1e-15);
}

TEST(LeakRates, SumToOneAndStayPositive) {
    Rng rng = make_rng(4, "t");
    for (int trial = 0; trial < 50; ++trial) {
        const auto units = make_units(5, 2, 3, static_cast<std::uint64_t>(trial));
        const auto r = adaptive_leak_rates(random_tensor(5, 3, rng, false, -5, 5), units);
        double total = 0;
        for (std::size_t i = 0; i < 5; ++i) {
            EXPECT_GT(r[i], 0.0);
            total += r[i];
        }
        EXPECT_NEAR(total, 1.0, 1e-12);
    }
}

TEST(MemoryStep, EqualsPerUnitStepsWithSharedRates) {
    const auto units = make_units(2, 4, 3, 5);
    Rng rng = make_rng(5, "t");
    const WorkingMemoryState mem{random_tensor(2, 4, rng, false)};
    const Tensor inputs = random_tensor(2, 3, rng, false);
    const auto next = memory_step(mem, inputs, units);
    const auto rates = adaptive_leak_rates(inputs, units);
    for (std::size_t i = 0; i < 2; ++i) {
        const auto s = unit_step(units[i], slice_rows(mem.states, i, 1), slice_rows(inputs, i, 1), rates[i]);
        for (std::size_t j = 0; j < 4; ++j) {
            EXPECT_EQ(next.states.at(i, j), s.at(0, j));
        }
    }
}

TEST(MemoryStep, StarvedUnitKeepsItsState) {
    auto units = make_units(3, 4, 2, 6);
    units[1].score_b.mutable_data()[0] = -1e4;
    Rng rng = make_rng(6, "t");
    const WorkingMemoryState mem{random_tensor(3, 4, rng, false)};
    const auto next = memory_step(mem, random_tensor(3, 2, rng, false), units);
    for (std::size_t j = 0; j < 4; ++j) {
        EXPECT_EQ(next.states.at(1, j), mem.states.at(1, j));
    }
}

TEST(MemoryStep, DeterministicAndLeavesPreviousStateAlone) {
    const auto units = make_units(2, 3, 2, 7);
    Rng rng = make_rng(7, "t");
    const WorkingMemoryState mem{random_tensor(2, 3, rng, false)};
    const Tensor copy = mem.states.clone();
    const Tensor inputs = random_tensor(2, 2, rng, false);
    const auto a = memory_step(mem, inputs, units);
    const auto b = memory_step(mem, inputs, units);
    EXPECT_TRUE(bit_equal(a.states, b.states));
    EXPECT_TRUE(bit_equal(mem.states, copy));
    EXPECT_FALSE(a.states.same_storage(mem.states));
}

TEST(MemoryStep, UnitCountMismatchThrows) {
    const auto units = make_units(2, 3, 2, 8);
    EXPECT_THROW(memory_step(WorkingMemoryState::zeros(3, 3), Tensor::zeros(3, 2), units), DimensionError);
    EXPECT_THROW(memory_step(WorkingMemoryState::zeros(2, 3), Tensor::zeros(3, 2), units), DimensionError);
}

TEST(MemoryStep, StepCostIsIndependentOfHistory) {
    const auto units = make_units(2, 5, 3, 9);
    Rng rng = make_rng(9, "t");
    Tape tape;
    TapeScope scope(tape);
    WorkingMemoryState mem = WorkingMemoryState::zeros(2, 5);
    std::vector<std::size_t> growth;
    for (int t = 0; t < 100; ++t) {
        const std::size_t before = tape.size();
        mem = memory_step(mem, random_tensor(2, 3, rng, false), units);
        growth.push_back(tape.size() - before);
    }
    // The first step starts from a constant state, so fewer ops are recorded.
    for (std::size_t t = 2; t < growth.size(); ++t) {
        EXPECT_EQ(growth[t], growth[1]);
    }
}

TEST(EchoStateProperty, TrajectoriesFromDifferentStartsConverge) {
    for (double rho : {0.0, 0.5, 0.9}) {
        for (std::uint64_t seed = 0; seed < 10; ++seed) {
            auto u = init_reservoir(50, 6, 0.2, seed);
            u.rho.mutable_data()[0] = rho;
            Rng rng = make_rng(seed, "esp");
            Tensor a = random_tensor(1, 50, rng, false);
            Tensor b = random_tensor(1, 50, rng, false);
            for (int t = 0; t < 200; ++t) {
                const Tensor x = random_tensor(1, 6, rng, false);
                a = unit_step(u, a, x, 0.3);
                b = unit_step(u, b, x, 0.3);
            }
            double dist = 0;
            for (std::size_t j = 0; j < 50; ++j) {
                dist += (a.at(0, j) - b.at(0, j)) * (a.at(0, j) - b.at(0, j));
            }
            EXPECT_LT(std::sqrt(dist), 1e-3) << "rho " << rho << " seed " << seed;
        }
    }
}

TEST(MemoryStep, ThreeStepGradientsMatchFiniteDifferences) {
    const auto units = make_units(2, 4, 3, 10);
    Rng rng = make_rng(10, "t");
    std::vector<Tensor> inputs;
    for (int t = 0; t < 3; ++t) {
        inputs.push_back(random_tensor(2, 3, rng));
    }
    const Tensor probe = random_tensor(2, 4, rng, false);
    std::vector<Tensor> params = inputs;
    for (const auto& u : units) {
        for (const auto& p : u.parameters()) {
            params.push_back(p);
        }
    }
    auto loss = [&] {
        WorkingMemoryState mem = WorkingMemoryState::zeros(2, 4);
        for (const auto& x : inputs) {
            mem = memory_step(mem, x, units);
        }
        return sum(mul(mem.states, probe));
    };
    EXPECT_LT(grad_check(loss, params), 1e-4);
}

TEST(MemoryStep, FixedMatrixNeverReceivesGradient) {
    const auto units = make_units(2, 3, 2, 11);
    Rng rng = make_rng(11, "t");
    Tape tape;
    Tensor loss;
    {
        TapeScope scope(tape);
        const auto next = memory_step(WorkingMemoryState{random_tensor(2, 3, rng, false)},
                                      random_tensor(2, 2, rng), units);
        loss = sum(next.states);
    }
    tape.backward(loss);
    for (const auto& u : units) {
        EXPECT_FALSE(u.w_hat.requires_grad());
        EXPECT_TRUE(u.w_hat.grad().empty());
        EXPECT_NE(u.rho.grad()[0], 0.0);
    }
}

} // namespace
} // namespace est
