#include <filesystem>
#include <fstream>

#include "claims.hpp"
#include "doctest.h"
#include "schemes.hpp"

using namespace mpsim;

namespace fs = std::filesystem;

TEST_CASE("shipped claims reproduce") {
    const auto summary = reproduce_all(MPSIM_FIXTURES_DIR);
    CHECK_MESSAGE(summary.all_passed(), summary.to_text());
    CHECK(summary.results.size() == 9);
}

TEST_CASE("claims cover every acceptance criterion once") {
    std::ifstream in(fs::path(MPSIM_FIXTURES_DIR) / "claims.txt");
    std::stringstream ss;
    ss << in.rdbuf();
    const auto claims = parse_claims(ss.str());
    std::vector<std::string> ids;
    for (const auto& c : claims) {
        ids.push_back(c.id);
        CHECK_FALSE(c.source.empty());
    }
    CHECK(ids == std::vector<std::string>{"AC1", "AC2", "AC3", "AC4", "AC5", "AC6", "AC7", "AC8", "AC9"});
}

TEST_CASE("dropping one mode switch breaks the table claim") {
    ReproduceOptions opts;
    opts.mutate_trace = [](std::vector<TraceEvent>& events) {
        for (auto it = events.begin(); it != events.end(); ++it) {
            if (it->kind == EventKind::ModeSwitchUserToKernel && it->cycle == 0) {
                // Keep the cycle start; drop a later kernel entry of the same cycle.
                for (auto jt = std::next(it); jt != events.end(); ++jt) {
                    if (jt->kind == EventKind::ModeSwitchUserToKernel && jt->cycle == 0) {
                        events.erase(jt);
                        return;
                    }
                }
                return;
            }
        }
    };
    const auto summary = reproduce_all(MPSIM_FIXTURES_DIR, opts);
    REQUIRE(!summary.results.empty());
    CHECK(summary.results[0].id == "AC1");
    CHECK_FALSE(summary.results[0].passed);
    CHECK_FALSE(summary.all_passed());
}

TEST_CASE("missing fixtures") {
    const auto dir = fs::temp_directory_path() / "mpsim_empty_fixtures";
    fs::remove_all(dir);
    fs::create_directories(dir);
    try {
        reproduce_all(dir);
        FAIL("expected MissingFixture");
    } catch (const SimError& e) {
        CHECK(e.code() == ErrorCode::MissingFixture);
    }
    {
        std::ofstream(dir / "claims.txt") << "AC1 table fixture=nope.scn monolithic=2/0\n";
    }
    CHECK_THROWS_AS(reproduce_all(dir), SimError);
    fs::remove_all(dir);
    CHECK_THROWS_AS(reproduce_all(dir), SimError);
}

TEST_CASE("manifest syntax") {
    CHECK_THROWS_AS(parse_claims("AC1 nonsense\n"), ParseError);
    CHECK_THROWS_AS(parse_claims("AC1 table source=\"open\n"), ParseError);
    CHECK_THROWS_AS(parse_claims("AC1 footprint\nAC1 footprint\n"), ParseError);
    const auto c = parse_claims("# x\nAC7 footprint bytes=4080 source=\"two words\"\n");
    REQUIRE(c.size() == 1);
    CHECK(c[0].source == "two words");
    CHECK(c[0].expected.at("bytes") == "4080");
}

TEST_CASE("random workload faults exactly as often as asked") {
    const auto sc = random_resolved_workload(8, 50);
    for (auto k : kAllSchemes) {
        const auto t = run_totals(run_scenario(k, sc).trace);
        CHECK(t.faults == 50);
        CHECK(t.completed == 50);
    }
    CHECK(parse_scenario(serialize_scenario(sc)) == sc);
}
