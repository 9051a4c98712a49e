#include <random>

#include "doctest.h"
#include "scenario.hpp"

using namespace mpsim;

namespace {

std::size_t parse_error_line(std::string_view text) {
    try {
        parse_scenario(text);
    } catch (const ParseError& e) {
        return e.line();
    }
    FAIL("no parse error");
    return 0;
}

ErrorCode semantic_code(std::string_view text) {
    try {
        parse_scenario(text);
    } catch (const ParseError&) {
        FAIL("parse error instead of a semantic one");
    } catch (const SimError& e) {
        return e.code();
    }
    FAIL("no error");
    return ErrorCode::Io;
}

constexpr std::string_view kBasic = R"(# comment
thread 1 asid=1
thread 2 asid=1 role=pager
pager 2 policy=zero-fill marker=page revoke_after=2
assign 1 3 2
access 1 0x00c01000 w
expect fault=0 scheme=proposed verdict=DISPATCHED mode=4 ctx=2
)";

}  // namespace

TEST_CASE("parse a small scenario") {
    const auto sc = parse_scenario(kBasic);
    REQUIRE(sc.threads.size() == 2);
    CHECK(sc.threads[1].role == Role::Pager);
    REQUIRE(sc.pagers.size() == 1);
    CHECK(sc.pagers[0].behavior.revoke_after == 2u);
    CHECK(sc.pagers[0].behavior.marker.kind == MarkerRule::Kind::PageNumber);
    REQUIRE(sc.script.size() == 2);
    CHECK(sc.script[0].kind == StepKind::Assign);
    CHECK(sc.script[0].rid == 3);
    CHECK(sc.script[1].vaddr == 0xc01000);
    CHECK(sc.script[1].access == AccessType::Write);
    REQUIRE(sc.expectations.size() == 1);
    CHECK(sc.expectations[0].scheme == SchemeKind::ProposedRegionDispatch);
    CHECK(sc.expectations[0].mode_switches == 4u);
    CHECK_FALSE(sc.expectations[0].ipc_messages.has_value());
    CHECK(sc.effective_layout() == LayoutConfig::standard());
}

TEST_CASE("parse errors carry the line number") {
    CHECK(parse_error_line("thread 1 asid=1\nbogus 1\n") == 2);
    CHECK(parse_error_line("thread 1 asid=1\naccess 1 0x1000 x\n") == 2);
    CHECK(parse_error_line("thread x asid=1\n") == 1);
    CHECK(parse_error_line("thread 1 asid=1 colour=red\n") == 1);
    CHECK(parse_error_line("thread 1 asid=1\n\n# c\nexpect scheme=proposed\n") == 4);
    CHECK(parse_error_line("thread 1 asid=1\nlayout regions=8\n") == 2);
}

TEST_CASE("semantic errors") {
    CHECK(semantic_code("") == ErrorCode::SemanticError);
    CHECK(semantic_code("# only a comment\n") == ErrorCode::SemanticError);
    CHECK(semantic_code("thread 1 asid=1\naccess 2 0x1000 r\n") == ErrorCode::SemanticError);
    CHECK(semantic_code("thread 1 asid=1\nthread 2 asid=1\nassign 1 0 2\n") == ErrorCode::SemanticError);
    CHECK(semantic_code("thread 1 asid=1\nthread 1 asid=1\n") == ErrorCode::SemanticError);
    CHECK(semantic_code("thread 1 asid=1\nthread 2 asid=1 role=pager\nassign 1 1020 2\n") ==
          ErrorCode::SemanticError);
    CHECK(semantic_code("thread 1 asid=1 role=region-mapper\nthread 2 asid=1 role=region-mapper\n") ==
          ErrorCode::SemanticError);
    CHECK(semantic_code("thread 2 asid=1 role=pager\npager 2 policy=reflecting\n") ==
          ErrorCode::SemanticError);
    CHECK(semantic_code("thread 2 asid=1 role=pager\nthread 3 asid=1 role=pager\n"
                        "dbrange 1 0 0x2000 2\ndbrange 1 0x1000 0x3000 3\n") ==
          ErrorCode::SemanticError);
}

TEST_CASE("serialize then parse gives the same scenario") {
    const auto sc = parse_scenario(kBasic);
    CHECK(parse_scenario(serialize_scenario(sc)) == sc);
    // Canonical text is a fixed point.
    CHECK(serialize_scenario(parse_scenario(serialize_scenario(sc))) == serialize_scenario(sc));
}

TEST_CASE("round trip on random scenarios") {
    std::mt19937_64 rng(21);
    for (int round = 0; round < 200; ++round) {
        ScenarioFile sc;
        if (rng() % 2) {
            sc.layout = LayoutConfig::small();
            if (rng() % 2) sc.layout->user_base = 0x10000;
        }
        if (rng() % 3 == 0) sc.frame_limit = 100 + rng() % 50;
        const auto cfg = sc.effective_layout();
        const std::uint32_t asids = 1 + rng() % 2;
        std::vector<ThreadDecl> pagers, apps;
        std::uint32_t tid = 1;
        for (std::uint32_t a = 1; a <= asids; ++a) {
            ThreadDecl p{Tid{tid++}, Asid{a}, Role::Pager, std::nullopt};
            sc.threads.push_back(p);
            pagers.push_back(p);
            PagerDecl decl{p.tid, {}};
            switch (rng() % 3) {
                case 0: decl.behavior.marker = {MarkerRule::Kind::PageNumber, 0}; break;
                case 1: decl.behavior.marker = {MarkerRule::Kind::Constant, static_cast<Marker>(rng() % 1000)}; break;
                default: break;
            }
            if (rng() % 2) decl.behavior.revoke_after = 1 + rng() % 5;
            if (rng() % 3 == 0) {
                decl.behavior.policy = PagerPolicy::FixedBacking;
                decl.behavior.backing[cfg.user_base + 0x1000 * a] = 5000 + a;
            }
            sc.pagers.push_back(decl);
            if (rng() % 2) {
                ThreadDecl rm{Tid{tid++}, Asid{a}, Role::RegionMapper, std::nullopt};
                sc.threads.push_back(rm);
                sc.db_ranges.push_back({Asid{a}, cfg.user_base, cfg.user_base + cfg.region_size, p.tid});
            }
            ThreadDecl app{Tid{tid++}, Asid{a}, Role::Applicant, std::nullopt};
            if (rng() % 2) app.pager = p.tid;
            sc.threads.push_back(app);
            apps.push_back(app);
            if (rng() % 3 == 0) sc.refusals.push_back({Asid{a}, static_cast<Rid>(rng() % cfg.region_count), p.tid});
        }
        for (int i = 0; i < 12; ++i) {
            Step s;
            const auto& app = apps[rng() % apps.size()];
            const auto& pager = pagers[raw(app.asid) - 1];
            switch (rng() % 7) {
                case 0: s.kind = StepKind::Assign; s.tid = pager.tid; s.asid = pager.asid;
                        s.rid = static_cast<Rid>(rng() % cfg.region_count); break;
                case 1: s.kind = StepKind::Access; break;
                case 2: s.kind = StepKind::Fault; break;
                case 3: s.kind = StepKind::Trap; break;
                case 4: s.kind = StepKind::Dispatch; s.tid = app.tid; s.asid = app.asid; break;
                case 5: s.kind = StepKind::Serve; break;
                default: s.kind = StepKind::Unmap; s.tid = pager.tid; s.asid = pager.asid;
                         s.vaddr = cfg.user_base + (rng() % 64) * kPageSize; s.revoke = rng() % 2; break;
            }
            if (s.kind == StepKind::Access || s.kind == StepKind::Fault || s.kind == StepKind::Trap) {
                s.tid = app.tid;
                s.asid = app.asid;
                s.vaddr = rng() % (Vaddr{1} << 32);
                s.access = rng() % 2 ? AccessType::Write : AccessType::Read;
            }
            sc.script.push_back(s);
        }
        for (int i = 0; i < 3; ++i) {
            Expectation e;
            e.fault = rng() % 5;
            if (rng() % 2) e.scheme = kAllSchemes[rng() % 4];
            if (rng() % 2) e.verdict = static_cast<VerdictCode>(rng() % 5);
            if (rng() % 2) e.mode_switches = rng() % 7;
            if (rng() % 2) e.context_switches = rng() % 4;
            if (rng() % 2) e.ipc_messages = rng() % 4;
            if (rng() % 2) e.pager_invocations = rng() % 3;
            sc.expectations.push_back(e);
        }
        const auto text = serialize_scenario(sc);
        const auto back = parse_scenario(text);
        CHECK_MESSAGE(back == sc, text);
        if (back != sc) break;
    }
}
