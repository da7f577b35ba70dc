#include <catch2/catch_amalgamated.hpp>

#include "irsim/noma.hpp"
#include "irsim/presets.hpp"

using namespace irsim;

namespace {

std::vector<cplx> random_channels(int n, Rng& rng, double scale = 1.0) {
    std::vector<cplx> h(n);
    for (auto& e : h) e = cplx{rng.normal(), rng.normal()} * scale;
    return h;
}

}  // namespace

TEST_CASE("decoding order sorts gains ascending", "[noma]") {
    const DecodingOrder o = decoding_order({0.1, 0.5, 0.3});
    CHECK(o.pos == std::vector<int>{1, 3, 2});

    const DecodingOrder ties = decoding_order({0.7, 0.7, 0.7});
    CHECK(ties.pos == std::vector<int>{1, 2, 3});

    const DecodingOrder single = decoding_order({2.0});
    CHECK(single.pos == std::vector<int>{1});
    CHECK(single.is_permutation());
}

TEST_CASE("sinr and rate evaluate the closed form", "[noma]") {
    // |H1|^2 = 1, |H2|^2 = 4, p = (0.6, 0.4) * 0.1, sigma^2 = 1e-3.
    const std::vector<cplx> H{{1.0, 0.0}, {2.0, 0.0}};
    const PowerAllocation powers{{0.06, 0.04}, 0.1};
    const DecodingOrder order{{1, 2}};
    const double noise = 1e-3;

    const double t1 = sinr(0, H, powers, order, noise);
    const double t2 = sinr(1, H, powers, order, noise);
    CHECK(t1 == Catch::Approx(0.06 / (0.16 + 0.001)));
    CHECK(t2 == Catch::Approx(160.0));

    CHECK(rate(1, H, powers, order, noise) == Catch::Approx(std::log2(161.0)));
    CHECK(sum_rate(H, powers, order, noise) ==
          Catch::Approx(std::log2(1.0 + t1) + std::log2(161.0)));

    // Last-decoded robot sees an empty interference sum.
    CHECK(t2 == Catch::Approx(std::norm(H[1]) * powers.p[1] / noise));

    // Zero own power means zero SINR and zero rate.
    const PowerAllocation zero2{{0.06, 0.0}, 0.1};
    CHECK(sinr(1, H, zero2, order, noise) == 0.0);
    CHECK(rate(1, H, zero2, order, noise) == 0.0);

    CHECK_THROWS_AS(sinr(0, H, powers, order, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(sinr(0, H, powers, order, -1.0), std::invalid_argument);
}

TEST_CASE("rate of unit SINR is one bit", "[noma]") {
    const std::vector<cplx> H{{1.0, 0.0}};
    const PowerAllocation powers{{1e-3}, 1e-3};
    const DecodingOrder order{{1}};
    CHECK(rate(0, H, powers, order, 1e-3) == Catch::Approx(1.0));
}

TEST_CASE("last-decoded robot ignores other powers", "[noma]") {
    Rng rng(8);
    const auto H = random_channels(3, rng);
    std::vector<double> gains;
    for (const auto& h : H) gains.push_back(std::norm(h));
    const DecodingOrder order = decoding_order(gains);
    int last = 0;
    for (int i = 0; i < 3; ++i)
        if (order.of(i) == 3) last = i;

    const PowerAllocation a{{0.02, 0.05, 0.03}, 0.1};
    PowerAllocation b = a;
    for (int i = 0; i < 3; ++i)
        if (i != last) b.p[i] *= 0.11;
    CHECK(sinr(last, H, a, order, 1e-6) == sinr(last, H, b, order, 1e-6));
}

TEST_CASE("rates are monotone in powers", "[noma]") {
    Rng rng(9);
    for (int trial = 0; trial < 50; ++trial) {
        const auto H = random_channels(3, rng);
        std::vector<double> gains;
        for (const auto& h : H) gains.push_back(std::norm(h));
        const DecodingOrder order = decoding_order(gains);
        const PowerAllocation base{{0.03, 0.03, 0.04}, 0.1};

        for (int i = 0; i < 3; ++i) {
            PowerAllocation more = base;
            more.p[i] += 0.01;
            CHECK(rate(i, H, more, order, 1e-6) >= rate(i, H, base, order, 1e-6));
            for (int j = 0; j < 3; ++j) {
                if (order.of(j) <= order.of(i)) continue;
                PowerAllocation louder = base;
                louder.p[j] += 0.01;
                CHECK(rate(i, H, louder, order, 1e-6) <= rate(i, H, base, order, 1e-6));
            }
        }
    }
}

TEST_CASE("relabeling robots permutes rates", "[noma]") {
    Rng rng(10);
    for (int trial = 0; trial < 30; ++trial) {
        const auto H = random_channels(3, rng);
        const PowerAllocation powers{{0.02, 0.05, 0.03}, 0.1};
        std::vector<double> gains;
        for (const auto& h : H) gains.push_back(std::norm(h));
        const DecodingOrder order = decoding_order(gains);

        const std::vector<int> perm{2, 0, 1};
        std::vector<cplx> Hp(3);
        PowerAllocation pp{{0.0, 0.0, 0.0}, 0.1};
        for (int i = 0; i < 3; ++i) {
            Hp[perm[i]] = H[i];
            pp.p[perm[i]] = powers.p[i];
        }
        std::vector<double> gp;
        for (const auto& h : Hp) gp.push_back(std::norm(h));
        const DecodingOrder op = decoding_order(gp);

        for (int i = 0; i < 3; ++i)
            CHECK(rate(i, H, powers, order, 1e-6) ==
                  Catch::Approx(rate(perm[i], Hp, pp, op, 1e-6)).epsilon(1e-12));
        CHECK(sum_rate(H, powers, order, 1e-6) ==
              Catch::Approx(sum_rate(Hp, pp, op, 1e-6)).epsilon(1e-12));
    }
}

TEST_CASE("constraint audit", "[noma]") {
    const PhaseState phases = PhaseState::from_element_indices({0, 1, 2, 3}, 2);

    FeasibilitySnapshot snap;
    snap.phases = &phases;
    snap.effective = {{1.0, 0.0}, {2.0, 0.0}};
    snap.order = decoding_order({1.0, 4.0});
    snap.powers = {{0.06, 0.04}, 0.1};
    snap.rates = {0.5, 7.3};
    snap.qos_rate = 0.0;

    GridMap grid(4, 4, 0.1, 0.3);
    snap.grid = &grid;
    snap.cells = {{0, 0}, {3, 3}};

    SECTION("clean snapshot passes everything") {
        const FeasibilityReport rep = check_constraints(snap);
        CHECK(rep.all_ok());
        CHECK(rep.unit_modulus.slack == 0.0);
    }

    SECTION("unit modulus holds for any quantized phase state") {
        Rng rng(4);
        for (int trial = 0; trial < 100; ++trial) {
            std::vector<int> idx(6);
            for (auto& v : idx) v = rng.uniform_int(8);
            const PhaseState p = PhaseState::from_element_indices(idx, 3);
            FeasibilitySnapshot s = snap;
            s.phases = &p;
            CHECK(check_constraints(s).unit_modulus.ok);
        }
    }

    SECTION("overspent budget fails with measured slack") {
        snap.powers = {{0.06, 0.041}, 0.1};
        const FeasibilityReport rep = check_constraints(snap);
        CHECK_FALSE(rep.power_budget.ok);
        CHECK(rep.power_budget.slack == Catch::Approx(-0.001));
    }

    SECTION("order inconsistent with gains fails") {
        snap.effective = {{1.0, 0.0}, {2.0, 0.0}};  // gains 1, 4
        snap.order = DecodingOrder{{2, 1}};         // stronger robot decoded first
        const FeasibilityReport rep = check_constraints(snap);
        CHECK_FALSE(rep.gain_order.ok);

        snap.order = DecodingOrder{{1, 2}};
        CHECK(check_constraints(snap).gain_order.ok);
    }

    SECTION("QoS failure is reported per threshold") {
        snap.qos_rate = 1.0;
        const FeasibilityReport rep = check_constraints(snap);
        CHECK_FALSE(rep.qos.ok);
        CHECK(rep.qos.slack == Catch::Approx(-0.5));
        CHECK(rep.hard_ok());
    }

    SECTION("blocked cell fails the trajectory constraint") {
        grid.set_blocked({3, 3}, true);
        const FeasibilityReport rep = check_constraints(snap);
        CHECK_FALSE(rep.trajectory.ok);
    }
}

TEST_CASE("power candidate enumeration", "[noma]") {
    SECTION("single robot gets the whole budget") {
        const auto cands = power_candidates(1, 0.1, 1, DecodingOrder{{1}});
        REQUIRE(cands.size() == 1);
        CHECK(cands[0].p == std::vector<double>{0.1});
    }

    SECTION("two robots at quarter steps, later-decoded robot first in power") {
        const auto cands =
            power_candidates(2, 0.1, 4, DecodingOrder{{1, 2}}, PowerOrderMode::AsPaper, 4);
        // Positive quarter-step splits with p2 >= p1: (P/4, 3P/4) and (P/2, P/2).
        REQUIRE(cands.size() == 2);
        CHECK(cands[0].p[0] == Catch::Approx(0.025));
        CHECK(cands[0].p[1] == Catch::Approx(0.075));
        CHECK(cands[1].p[0] == Catch::Approx(0.05));
        CHECK(cands[1].p[1] == Catch::Approx(0.05));
    }

    SECTION("conventional mode reverses the ordering") {
        const auto cands =
            power_candidates(2, 0.1, 4, DecodingOrder{{1, 2}}, PowerOrderMode::Conventional, 4);
        REQUIRE(cands.size() == 2);
        CHECK(cands[0].p[0] == Catch::Approx(0.075));
        CHECK(cands[0].p[1] == Catch::Approx(0.025));
    }

    SECTION("v = 1 returns the split closest to equal") {
        const auto cands =
            power_candidates(3, 0.3, 1, DecodingOrder{{1, 2, 3}}, PowerOrderMode::AsPaper, 6);
        REQUIRE(cands.size() == 1);
        CHECK(cands[0].p[0] == Catch::Approx(0.1));
        CHECK(cands[0].p[1] == Catch::Approx(0.1));
        CHECK(cands[0].p[2] == Catch::Approx(0.1));
    }

    SECTION("every candidate respects ordering, positivity and the budget") {
        Rng rng(14);
        for (int trial = 0; trial < 40; ++trial) {
            const int n = 1 + rng.uniform_int(4);
            std::vector<double> gains;
            for (int i = 0; i < n; ++i) gains.push_back(rng.uniform() + 0.01);
            const DecodingOrder order = decoding_order(gains);
            const int v = 1 + rng.uniform_int(6);
            const auto cands = power_candidates(n, 0.1, v, order);
            REQUIRE(!cands.empty());
            CHECK(static_cast<int>(cands.size()) <= std::max(v, 1));
            for (const auto& c : cands) {
                CHECK(c.total() <= 0.1 * (1.0 + 1e-12));
                for (int i = 0; i < n; ++i) {
                    CHECK(c.p[i] > 0.0);
                    for (int j = 0; j < n; ++j)
                        if (order.of(j) < order.of(i)) CHECK(c.p[i] >= c.p[j] - 1e-15);
                }
            }
        }
    }

    SECTION("requesting more candidates than the quantized set yields all of it") {
        const auto cands =
            power_candidates(2, 0.1, 50, DecodingOrder{{1, 2}}, PowerOrderMode::AsPaper, 4);
        CHECK(cands.size() == 2);
    }
}

TEST_CASE("oma baseline", "[noma]") {
    SECTION("single robot coincides with NOMA") {
        const std::vector<cplx> H{{0.3, 0.4}};
        const PowerAllocation powers{{0.1}, 0.1};
        CHECK(oma_sum_rate(H, 0.1, 1e-6) ==
              Catch::Approx(sum_rate(H, powers, DecodingOrder{{1}}, 1e-6)));
    }

    SECTION("identical channels split the slot evenly") {
        const std::vector<cplx> H{{0.5, 0.0}, {0.5, 0.0}};
        const double r = oma_sum_rate(H, 0.1, 1e-6);
        CHECK(r == Catch::Approx(std::log2(1.0 + 0.25 * 0.1 / 1e-6)));
    }

    SECTION("NOMA with the best candidate beats OMA on most snapshots") {
        const WorldModel w = desk_world();
        const GridMap grid = build_grid(w);
        ChannelParams params;
        params.ref_loss = 0.01;
        params.exp_ap_robot = 3.0;
        params.noise_power = 1e-9;
        IrsConfig irs{8, 4, 2, 1, 0.0625};
        const double budget = 0.1;

        Rng rng(15);
        int wins = 0;
        const int snapshots = 1000;
        for (int s = 0; s < snapshots; ++s) {
            auto [c1, c2] = sample_endpoints(grid, rng);
            const auto real = sample_channel({grid.cell_center(c1), grid.cell_center(c2)}, w,
                                             params, irs, rng);
            std::vector<int> idx(4);
            for (auto& v : idx) v = rng.uniform_int(4);
            const PhaseState phases = PhaseState::from_subsurface_indices(idx, 2, irs);
            const auto H = effective_channels(real, phases);

            std::vector<double> gains;
            for (const auto& h : H) gains.push_back(std::norm(h));
            const DecodingOrder order = decoding_order(gains);

            double best = 0.0;
            for (const auto& cand :
                 power_candidates(2, budget, 8, order, PowerOrderMode::AsPaper, 16))
                best = std::max(best, sum_rate(H, cand, order, params.noise_power));
            if (best >= oma_sum_rate(H, budget, params.noise_power)) ++wins;
        }
        CHECK(wins >= 900);
    }
}
