#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include "irsim/channel.hpp"
#include "irsim/presets.hpp"

using namespace irsim;

namespace {

WorldModel open_room() {
    WorldModel w;
    w.room = {6.0, 4.0, 2.0};
    w.ap_pos = {0.1, 2.0, 1.8};
    w.irs_pos = {3.0, 2.0, 2.0};
    return w;
}

double wrap_angle(double a) {
    while (a <= -M_PI) a += 2.0 * M_PI;
    while (a > M_PI) a -= 2.0 * M_PI;
    return a;
}

}  // namespace

TEST_CASE("path loss", "[channel]") {
    ChannelParams p;
    p.ref_loss = 1e-3;
    p.exp_ap_robot = 2.0;
    CHECK(path_loss(1.0, LinkClass::ApRobot, p) == Catch::Approx(1e-3));
    CHECK(path_loss(10.0, LinkClass::ApRobot, p) == Catch::Approx(1e-5));
    CHECK_THROWS_AS(path_loss(0.0, LinkClass::ApRobot, p), std::domain_error);
    CHECK_THROWS_AS(path_loss(-1.0, LinkClass::ApRobot, p), std::domain_error);

    // Strictly decreasing in distance for positive exponents.
    double prev = path_loss(0.5, LinkClass::IrsRobot, p);
    for (double d = 1.0; d < 20.0; d += 0.5) {
        const double cur = path_loss(d, LinkClass::IrsRobot, p);
        CHECK(cur < prev);
        prev = cur;
    }
}

TEST_CASE("steering vectors", "[channel]") {
    const double lambda = 0.125;

    IrsConfig single{1, 1, 1, 1, lambda / 2.0};
    const auto v1 = los_component({1.0, 2.0, 3.0}, {0.0, 0.0, 0.0}, single, lambda);
    REQUIRE(v1.size() == 1);
    CHECK(std::abs(v1[0]) == Catch::Approx(1.0));

    // Boresight: direction orthogonal to the array plane, all entries equal.
    IrsConfig patch{8, 4, 2, 1, lambda / 2.0};
    const auto vb = los_component({0.0, 0.0, -3.0}, {0.0, 0.0, 0.0}, patch, lambda);
    for (const cplx& e : vb) {
        CHECK(std::abs(e) == Catch::Approx(1.0));
        CHECK(std::abs(e - vb[0]) < 1e-12);
    }

    // Two half-wavelength elements, endfire: entries differ by pi.
    IrsConfig pair{2, 1, 2, 1, lambda / 2.0};
    const auto ve = los_component({5.0, 0.0, 0.0}, {0.0, 0.0, 0.0}, pair, lambda);
    REQUIRE(ve.size() == 2);
    CHECK(std::abs(wrap_angle(std::arg(ve[0]) - std::arg(ve[1]))) == Catch::Approx(M_PI));

    CHECK_THROWS_AS(los_component({0, 0, 0}, {0, 0, 0}, pair, lambda), std::invalid_argument);
}

TEST_CASE("rician limits", "[channel]") {
    const WorldModel w = open_room();
    ChannelParams p;
    p.ref_loss = 1e-3;
    IrsConfig irs{4, 2, 2, 1, 0.0625};
    const std::vector<Vec3> pos{{4.0, 1.0, 0.3}};

    SECTION("large factor collapses onto the LoS component") {
        p.rician_ap_robot = {1e6, 1e6};
        Rng rng(11);
        const auto real = sample_channel(pos, w, p, irs, rng);
        const double d = distance(w.ap_pos, pos[0]);
        const double loss = path_loss(d, LinkClass::ApRobot, p);
        const cplx expected = loss * std::polar(1.0, -2.0 * M_PI * d / p.wavelength);
        CHECK(std::abs(real.direct[0] - expected) / std::abs(expected) < 1e-2);
    }

    SECTION("zero factor gives Rayleigh with mean power L^2") {
        p.rician_ap_robot = {0.0, 0.0};
        Rng rng(12);
        const double d = distance(w.ap_pos, pos[0]);
        const double loss = path_loss(d, LinkClass::ApRobot, p);
        double acc = 0.0;
        const int draws = 100000;
        for (int s = 0; s < draws; ++s) {
            const auto real = sample_channel(pos, w, p, irs, rng);
            acc += std::norm(real.direct[0]);
        }
        CHECK(acc / draws == Catch::Approx(loss * loss).epsilon(0.02));
    }

    SECTION("mean power equals L^2 for the LoS-dominant case too") {
        p.rician_ap_robot = {10.0, 0.0};
        Rng rng(13);
        const double d = distance(w.ap_pos, pos[0]);
        const double loss = path_loss(d, LinkClass::ApRobot, p);
        double acc = 0.0;
        const int draws = 100000;
        for (int s = 0; s < draws; ++s) {
            const auto real = sample_channel(pos, w, p, irs, rng);
            acc += std::norm(real.direct[0]);
        }
        CHECK(acc / draws == Catch::Approx(loss * loss).epsilon(0.02));
    }
}

TEST_CASE("sampling is deterministic per seed", "[channel]") {
    const WorldModel w = paper_world();
    ChannelParams p;
    IrsConfig irs{10, 5, 2, 1, 0.0625};
    const std::vector<Vec3> pos{{4.0, 1.0, 0.3}, {6.5, 5.5, 0.3}};

    Rng a(77), b(77);
    const auto ra = sample_channel(pos, w, p, irs, a);
    const auto rb = sample_channel(pos, w, p, irs, b);
    REQUIRE(ra.ap_irs == rb.ap_irs);
    REQUIRE(ra.direct == rb.direct);
    REQUIRE(ra.irs_robot == rb.irs_robot);
}

TEST_CASE("cascade cache matches recomputation", "[channel]") {
    const WorldModel w = paper_world();
    ChannelParams p;
    IrsConfig irs{10, 5, 2, 1, 0.0625};
    Rng rng(5);
    const auto real = sample_channel({{2.0, 3.0, 0.3}}, w, p, irs, rng);
    for (int k = 0; k < irs.elements; ++k)
        CHECK(real.cascade[0][k] == std::conj(real.ap_irs[k]) * real.irs_robot[0][k]);
}

TEST_CASE("effective channel composition", "[channel]") {
    SECTION("identity composition at K = 1") {
        ChannelRealization real;
        real.ap_irs = {1.0};
        real.direct = {0.0};
        real.irs_robot = {{1.0}};
        real.fill_cascade();
        const PhaseState ph = PhaseState::zeros(1, 2);
        CHECK(effective_channel(real, ph, 0) == cplx{1.0, 0.0});
    }

    SECTION("global pi shift negates H when the direct link vanishes") {
        Rng rng(3);
        ChannelRealization real;
        real.ap_irs.resize(4);
        real.irs_robot.resize(1);
        real.irs_robot[0].resize(4);
        for (int k = 0; k < 4; ++k) {
            real.ap_irs[k] = {rng.normal(), rng.normal()};
            real.irs_robot[0][k] = {rng.normal(), rng.normal()};
        }
        real.direct = {0.0};
        real.fill_cascade();

        const PhaseState base = PhaseState::from_element_indices({0, 1, 2, 3}, 2);
        const PhaseState flipped = PhaseState::from_element_indices({2, 3, 0, 1}, 2);
        const cplx h0 = effective_channel(real, base, 0);
        const cplx h1 = effective_channel(real, flipped, 0);
        CHECK(std::abs(h1 + h0) < 1e-12 * std::abs(h0));
        // |H| is invariant under any global codebook rotation.
        const PhaseState rot = PhaseState::from_element_indices({1, 2, 3, 0}, 2);
        CHECK(std::abs(effective_channel(real, rot, 0)) ==
              Catch::Approx(std::abs(h0)).epsilon(1e-12));
    }

    SECTION("matches the full matrix form") {
        const WorldModel w = paper_world();
        ChannelParams p;
        IrsConfig irs{4, 4, 1, 1, 0.0625};
        Rng rng(21);
        const auto real = sample_channel({{5.0, 2.4, 0.3}}, w, p, irs, rng);
        const PhaseState ph = PhaseState::from_element_indices({3, 0, 2, 1}, 2);

        // Oracle: (h)^H Phi g + h_bar with an explicit K x K diagonal matrix.
        const int K = 4;
        std::vector<std::vector<cplx>> Phi(K, std::vector<cplx>(K, 0.0));
        for (int k = 0; k < K; ++k) Phi[k][k] = std::polar(1.0, ph.theta(k));
        std::vector<cplx> row(K, 0.0);  // (h)^H Phi
        for (int c = 0; c < K; ++c)
            for (int k = 0; k < K; ++k) row[c] += std::conj(real.ap_irs[k]) * Phi[k][c];
        cplx expected = real.direct[0];
        for (int c = 0; c < K; ++c) expected += row[c] * real.irs_robot[0][c];

        const cplx got = effective_channel(real, ph, 0);
        CHECK(std::abs(got - expected) <= 1e-12 * std::abs(expected));
    }

    SECTION("dimension mismatch is rejected") {
        ChannelRealization real;
        real.ap_irs = {1.0, 1.0};
        real.direct = {0.0};
        real.irs_robot = {{1.0, 1.0}};
        real.fill_cascade();
        CHECK_THROWS_AS(effective_channel(real, PhaseState::zeros(1, 1), 0),
                        std::invalid_argument);
    }
}

TEST_CASE("brute force phase search", "[channel]") {
    SECTION("single element aligns the cascade with the direct link") {
        Rng rng(31);
        for (int trial = 0; trial < 20; ++trial) {
            ChannelRealization real;
            real.ap_irs = {cplx{rng.normal(), rng.normal()}};
            real.irs_robot = {{cplx{rng.normal(), rng.normal()}}};
            real.direct = {cplx{rng.normal(), rng.normal()}};
            real.fill_cascade();

            const PhaseState best = best_phase_bruteforce(real, 2, 0);
            const double target =
                wrap_angle(std::arg(real.direct[0]) - std::arg(real.cascade[0][0]));
            // Expected: codebook phase closest to the alignment angle.
            int expected = 0;
            double gap = 10.0;
            for (int n = 0; n < 4; ++n) {
                const double cand = std::abs(wrap_angle(PhaseState::codebook_phase(n, 2) - target));
                if (cand < gap) {
                    gap = cand;
                    expected = n;
                }
            }
            CHECK(best.theta(0) == Catch::Approx(PhaseState::codebook_phase(expected, 2)));
        }
    }

    SECTION("two cascaded terms co-phase within codebook granularity") {
        Rng rng(32);
        ChannelRealization real;
        real.ap_irs = {cplx{rng.normal(), rng.normal()}, cplx{rng.normal(), rng.normal()}};
        real.irs_robot = {{cplx{rng.normal(), rng.normal()}, cplx{rng.normal(), rng.normal()}}};
        real.direct = {0.0};
        real.fill_cascade();

        const int bits = 2;
        const PhaseState best = best_phase_bruteforce(real, bits, 0);
        const cplx t0 = std::polar(1.0, best.theta(0)) * real.cascade[0][0];
        const cplx t1 = std::polar(1.0, best.theta(1)) * real.cascade[0][1];
        const double step = 2.0 * M_PI / (1 << bits);
        CHECK(std::abs(wrap_angle(std::arg(t0) - std::arg(t1))) <= step + 1e-12);
    }

    SECTION("zero bits leaves the single all-zero state") {
        ChannelRealization real;
        real.ap_irs = {1.0};
        real.irs_robot = {{1.0}};
        real.direct = {1.0};
        real.fill_cascade();
        const PhaseState best = best_phase_bruteforce(real, 0, 0);
        CHECK(best.theta(0) == 0.0);
    }

    SECTION("enumeration bound enforced") {
        ChannelRealization real;
        real.ap_irs.assign(9, 1.0);
        real.irs_robot = {std::vector<cplx>(9, 1.0)};
        real.direct = {0.0};
        real.fill_cascade();
        CHECK_THROWS_AS(best_phase_bruteforce(real, 2, 0), std::invalid_argument);
    }
}

TEST_CASE("cell-keyed channel model is stationary", "[channel]") {
    const WorldModel w = desk_world();
    const GridMap grid = build_grid(w);
    ChannelParams p;
    IrsConfig irs{8, 4, 2, 1, 0.0625};

    ChannelModel m1(w, p, irs, 404);
    ChannelModel m2(w, p, irs, 404);

    const std::vector<Cell> cells{{5, 5}, {40, 30}};
    const auto r1 = m1.at_cells(cells, grid);
    // Visit other cells in between, then come back.
    (void)m1.at_cells({{6, 5}, {40, 31}}, grid);
    const auto r1again = m1.at_cells(cells, grid);
    const auto r2 = m2.at_cells(cells, grid);

    REQUIRE(r1.direct == r1again.direct);
    REQUIRE(r1.irs_robot == r1again.irs_robot);
    REQUIRE(r1.direct == r2.direct);
    REQUIRE(r1.ap_irs == r2.ap_irs);

    ChannelModel m3(w, p, irs, 405);
    const auto r3 = m3.at_cells(cells, grid);
    CHECK(r3.direct != r1.direct);

    // The direct draw at a cell is independent of the element count: schemes
    // with different K share the same direct-link randomness.
    ChannelModel small(w, p, IrsConfig{4, 2, 2, 1, 0.0625}, 404);
    ChannelModel none(w, p, IrsConfig{0, 0, 1, 1, 0.0625}, 404);
    CHECK(small.at_cells(cells, grid).direct == r1.direct);
    CHECK(none.at_cells(cells, grid).direct == r1.direct);
}

TEST_CASE("channel dump layout", "[channel]") {
    const WorldModel w = desk_world();
    ChannelParams p;
    IrsConfig irs{4, 2, 2, 1, 0.0625};
    Rng rng(44);
    const auto real = sample_channel({{2.0, 1.0, 0.3}, {4.0, 3.0, 0.3}}, w, p, irs, rng);

    std::ostringstream os;
    dump_channel_csv(real, os);
    std::istringstream is(os.str());
    std::string line;
    int rows = 0;
    REQUIRE(std::getline(is, line));
    CHECK(line == "link,robot,k,re,im");
    while (std::getline(is, line)) ++rows;
    // K ap_irs rows + per robot (1 direct + K reflected).
    CHECK(rows == 4 + 2 * (1 + 4));
}

TEST_CASE("no-IRS mode reduces to the direct link", "[channel]") {
    const WorldModel w = desk_world();
    const GridMap grid = build_grid(w);
    ChannelParams p;
    IrsConfig none{0, 0, 1, 1, 0.0625};

    ChannelModel m(w, p, none, 9);
    const auto real = m.at_cells({{10, 10}}, grid);
    REQUIRE(real.elements() == 0);
    const PhaseState ph = PhaseState::zeros(0, 2);
    CHECK(effective_channel(real, ph, 0) == real.direct[0]);
}
