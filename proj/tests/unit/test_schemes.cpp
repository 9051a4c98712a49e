#include <string>

#include "doctest.h"
#include "schemes.hpp"

using namespace mpsim;

namespace {

// N distinct absent pages of one region, all served by one pager.
ScenarioFile n_faults(int n) {
    std::string text = "thread 1 asid=1\nthread 2 asid=1 role=pager\nassign 1 0 2\n";
    for (int i = 0; i < n; ++i) {
        text += "access 1 " + std::to_string(i * 4096) + " r\n";
        text += "access 1 " + std::to_string(i * 4096 + 8) + " w\n";  // hit
    }
    return parse_scenario(text);
}

struct Expected {
    SchemeKind scheme;
    std::uint32_t mode, ctx, ipc, invocations;
};

constexpr Expected kPerFault[] = {
    {SchemeKind::Monolithic, 2, 0, 0, 0},
    {SchemeKind::L4SinglePager, 4, 2, 2, 1},
    {SchemeKind::ProposedRegionDispatch, 4, 2, 2, 1},
    {SchemeKind::L4PlusL4Re, 6, 3, 3, 2},
};

ErrorCode run_error(SchemeKind k, std::string_view text, std::optional<std::uint64_t> seed = {}) {
    try {
        run_scenario(k, parse_scenario(text), seed);
    } catch (const SimError& e) {
        return e.code();
    }
    FAIL("no error");
    return ErrorCode::Io;
}

}  // namespace

TEST_CASE("single fault counts per scheme") {
    const auto sc = n_faults(1);
    for (const auto& e : kPerFault) {
        CAPTURE(to_string(e.scheme));
        const auto run = run_scenario(e.scheme, sc);
        REQUIRE(run.faults.size() == 1);
        CHECK(run.faults[0].completed);
        const auto m = cycle_metrics(run.trace, 0);
        CHECK(m == CycleMetrics{e.mode, e.ctx, e.ipc, e.invocations});
    }
}

TEST_CASE("totals grow linearly with the number of faults") {
    for (int n : {0, 1, 2, 7, 25}) {
        const auto sc = n_faults(n);
        for (const auto& e : kPerFault) {
            CAPTURE(n);
            CAPTURE(to_string(e.scheme));
            const auto t = run_totals(run_scenario(e.scheme, sc).trace);
            CHECK(t.faults == static_cast<std::size_t>(n));
            CHECK(t.completed == static_cast<std::size_t>(n));
            const auto un = static_cast<std::uint32_t>(n);
            CHECK(t.totals == CycleMetrics{e.mode * un, e.ctx * un, e.ipc * un, e.invocations * un});
        }
    }
}

TEST_CASE("every scheme maps the same pages") {
    const auto sc = n_faults(9);
    const auto ref = run_scenario(SchemeKind::Monolithic, sc).page_table_text();
    CHECK(ref.find("vaddr=0x00008000") != std::string::npos);
    for (auto k : kAllSchemes) CHECK(run_scenario(k, sc).page_table_text() == ref);
}

TEST_CASE("cycle metrics errors") {
    const auto run = run_scenario(SchemeKind::ProposedRegionDispatch, n_faults(1));
    CHECK_THROWS_AS(cycle_metrics(run.trace, 1), SimError);

    // A rejecting pager never answers, so the cycle stays open.
    const auto stuck = run_scenario(SchemeKind::ProposedRegionDispatch,
                                    parse_scenario("thread 1 asid=1\nthread 2 asid=1 role=pager\n"
                                                   "pager 2 policy=rejecting\nassign 1 0 2\n"
                                                   "access 1 0x1000 r\n"));
    try {
        cycle_metrics(stuck.trace, 0);
        FAIL("expected IncompleteCycle");
    } catch (const SimError& e) {
        CHECK(e.code() == ErrorCode::IncompleteCycle);
    }
    const auto t = run_totals(stuck.trace);
    CHECK(t.faults == 1);
    CHECK(t.completed == 0);
}

TEST_CASE("reduction ratios") {
    CHECK(reduction(4, 6).equals(1, 3));
    CHECK(reduction(2, 3).equals(1, 3));
    CHECK(reduction(6, 4).equals(-1, 2));
    CHECK_FALSE(reduction(0, 0).defined());
    CHECK(reduction(4, 6).percent() == doctest::Approx(33.333).epsilon(0.001));
}

TEST_CASE("overhead report") {
    const auto report = overhead_report(n_faults(1));
    REQUIRE(report.rows.size() == 4);
    CHECK(report.reductions.size() == 6);
    CHECK(report.totals(SchemeKind::L4PlusL4Re).totals.mode_switches == 6);
    const auto kv = report.to_kv();
    CHECK(kv.find("scheme.proposed.mode_switches=4\n") != std::string::npos);
    CHECK(kv.find("reduction.proposed.l4re.mode_switches=2/6\n") != std::string::npos);
    CHECK(kv.find("reduction.proposed.l4re.context_switches_pct=33.3\n") != std::string::npos);
    const auto table = report.to_table();
    CHECK(table.find("proposed vs l4re") != std::string::npos);
    CHECK(table.find("2/6 (33.3%)") != std::string::npos);

    const auto empty = overhead_report(n_faults(0));
    CHECK(empty.totals(SchemeKind::Monolithic).faults == 0);
    CHECK(empty.to_kv().find("reduction.proposed.l4re.mode_switches=n/a") != std::string::npos);
}

TEST_CASE("expectations are checked against the run") {
    auto sc = parse_scenario(
        "thread 1 asid=1\nthread 2 asid=1 role=pager\nassign 1 0 2\naccess 1 0x1000 r\n"
        "expect fault=0 scheme=proposed mode=4 ctx=2\n"
        "expect fault=0 scheme=l4re mode=4\n"
        "expect fault=3 verdict=DISPATCHED\n");
    CHECK(check_expectations(sc, run_scenario(SchemeKind::ProposedRegionDispatch, sc)).size() == 1);
    const auto l4re = check_expectations(sc, run_scenario(SchemeKind::L4PlusL4Re, sc));
    REQUIRE(l4re.size() == 2);
    CHECK(l4re[0].find("mode=6, expected 4") != std::string::npos);
}

TEST_CASE("scheme mismatches") {
    CHECK(run_error(SchemeKind::ProposedRegionDispatch,
                    "thread 1 asid=1\nthread 4 asid=1 role=region-mapper\n") == ErrorCode::SchemeMismatch);
    CHECK(run_error(SchemeKind::L4SinglePager,
                    "thread 1 asid=1\nthread 2 asid=1 role=pager\nthread 3 asid=1 role=pager\n"
                    "assign 1 0 2\nassign 1 1 3\n") == ErrorCode::SchemeMismatch);
    CHECK(run_error(SchemeKind::L4PlusL4Re,
                    "thread 1 asid=1\nthread 4 asid=1 role=region-mapper\naccess 4 0x1000 r\n") ==
          ErrorCode::SchemeMismatch);
}

TEST_CASE("single pager scheme can pick per thread") {
    const auto sc = parse_scenario(
        "thread 2 asid=1 role=pager\nthread 3 asid=1 role=pager\n"
        "thread 1 asid=1 pager=3\nassign 1 0 2\naccess 1 0x1000 r\n");
    const auto run = run_scenario(SchemeKind::L4SinglePager, sc);
    CHECK(run.faults.at(0).verdict->pager == Tid{3});
    const auto prop = run_scenario(SchemeKind::ProposedRegionDispatch, sc);
    CHECK(prop.faults.at(0).verdict->pager == Tid{2});
}

TEST_CASE("seeded runs") {
    const std::string text =
        "thread 1 asid=1\nthread 2 asid=1\nthread 3 asid=1 role=pager\nassign 1 0 3\n"
        "access 1 0x0000 r\naccess 1 0x1000 r\naccess 2 0x2000 r\naccess 2 0x3000 w\n";
    const auto sc = parse_scenario(text);
    for (auto k : kAllSchemes) {
        const auto a = run_scenario(k, sc, 5);
        const auto b = run_scenario(k, sc, 5);
        CHECK(a.trace.to_text() == b.trace.to_text());
        CHECK(run_totals(a.trace).completed == 4);
    }
    CHECK(run_error(SchemeKind::ProposedRegionDispatch, text + "serve\n", 5) ==
          ErrorCode::InvalidArgument);
}

TEST_CASE("accesses by a stopped thread") {
    CHECK(run_error(SchemeKind::ProposedRegionDispatch,
                    "thread 1 asid=1\naccess 1 0x1000 r\naccess 1 0x2000 r\n") == ErrorCode::NotRunnable);
}
