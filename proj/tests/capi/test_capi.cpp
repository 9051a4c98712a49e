#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <string>

#include "doctest.h"
#include "mpsim/mpsim.h"

namespace {

const char* kTable1 = MPSIM_FIXTURES_DIR "/table1.scn";

std::string take(char* s) {
    std::string out = s ? s : "";
    mpsim_free_string(s);
    return out;
}

}  // namespace

TEST_CASE("scheme names") {
    mpsim_scheme s{};
    CHECK(mpsim_scheme_parse("l4re", &s) == MPSIM_OK);
    CHECK(s == MPSIM_SCHEME_L4RE);
    CHECK(std::string(mpsim_scheme_name(MPSIM_SCHEME_PROPOSED)) == "proposed");
    CHECK(mpsim_scheme_parse("bogus", &s) == MPSIM_ERR_INVALID_ARGUMENT);
    CHECK(mpsim_scheme_parse(nullptr, &s) == MPSIM_ERR_INVALID_ARGUMENT);
}

TEST_CASE("region ids") {
    const auto std_layout = mpsim_layout_standard();
    uint32_t rid = 0;
    CHECK(mpsim_region_id_of(&std_layout, 0x00c01000, &rid) == MPSIM_OK);
    CHECK(rid == 3);
    CHECK(mpsim_region_id_of(&std_layout, 0xff000000, &rid) == MPSIM_WARN_KERNEL_RANGE);
    mpsim_layout bad{0, 0x3000, 2, 3};
    CHECK(mpsim_region_id_of(&bad, 0, &rid) == MPSIM_ERR_INVALID_ARGUMENT);
    CHECK(std::string(mpsim_last_error()).find("power of two") != std::string::npos);
}

TEST_CASE("run the single-fault scenario") {
    mpsim_scenario* sc = nullptr;
    REQUIRE(mpsim_scenario_load(kTable1, &sc) == MPSIM_OK);
    const unsigned want[4][2] = {{2, 0}, {4, 2}, {4, 2}, {6, 3}};
    for (int k = 0; k < 4; ++k) {
        mpsim_run* run = nullptr;
        REQUIRE(mpsim_run_scenario(sc, static_cast<mpsim_scheme>(k), nullptr, &run) == MPSIM_OK);
        CHECK(mpsim_run_fault_count(run) == 1);
        mpsim_cycle_metrics m{};
        CHECK(mpsim_run_cycle_metrics(run, 0, &m) == MPSIM_OK);
        CHECK(m.mode_switches == want[k][0]);
        CHECK(m.context_switches == want[k][1]);
        CHECK(mpsim_run_cycle_metrics(run, 5, &m) == MPSIM_ERR_INVALID_ARGUMENT);

        char* failures = nullptr;
        size_t count = 99;
        CHECK(mpsim_run_check(sc, run, &failures, &count) == MPSIM_OK);
        CHECK(count == 0);
        CHECK(take(failures).empty());

        char* trace = nullptr;
        CHECK(mpsim_run_trace_text(run, &trace) == MPSIM_OK);
        CHECK(take(trace).find("MODE_U2K tid=1 cycle=0") != std::string::npos);
        mpsim_run_free(run);
    }
    char* report = nullptr;
    CHECK(mpsim_report(sc, nullptr, MPSIM_REPORT_KV, &report) == MPSIM_OK);
    CHECK(take(report).find("reduction.proposed.l4re.mode_switches=2/6") != std::string::npos);
    mpsim_scenario_free(sc);
}

TEST_CASE("scenario errors") {
    mpsim_scenario* sc = nullptr;
    CHECK(mpsim_scenario_parse("thread 1 asid=1\nwat\n", &sc) == MPSIM_ERR_PARSE);
    CHECK(std::string(mpsim_last_error()).find("line 2") != std::string::npos);
    CHECK(mpsim_scenario_parse("", &sc) == MPSIM_ERR_SEMANTIC);
    CHECK(mpsim_scenario_load("/nonexistent/x.scn", &sc) < 0);
    CHECK(sc == nullptr);

    REQUIRE(mpsim_scenario_parse("thread 1 asid=1\nthread 9 asid=1 role=region-mapper\n", &sc) == MPSIM_OK);
    mpsim_run* run = nullptr;
    CHECK(mpsim_run_scenario(sc, MPSIM_SCHEME_PROPOSED, nullptr, &run) == MPSIM_ERR_SCHEME_MISMATCH);
    char* text = nullptr;
    CHECK(mpsim_scenario_serialize(sc, &text) == MPSIM_OK);
    CHECK(take(text).find("role=region-mapper") != std::string::npos);
    mpsim_scenario_free(sc);
}

TEST_CASE("machine: one fault served by hand") {
    mpsim_machine* m = nullptr;
    const auto small = mpsim_layout_small();
    REQUIRE(mpsim_machine_create(&small, &m) == MPSIM_OK);
    CHECK(mpsim_machine_add_thread(m, 1, 1, MPSIM_ROLE_APPLICANT) == MPSIM_OK);
    CHECK(mpsim_machine_add_thread(m, 2, 1, MPSIM_ROLE_PAGER) == MPSIM_OK);
    CHECK(mpsim_machine_add_thread(m, 2, 1, MPSIM_ROLE_PAGER) == MPSIM_ERR_INVALID_ARGUMENT);
    CHECK(mpsim_machine_assign(m, 1, 1, 2) == MPSIM_OK);
    CHECK(mpsim_machine_assign(m, 1, 8, 2) == MPSIM_ERR_BAD_REGION);

    uint32_t manager = 0;
    mpsim_contract contract{};
    CHECK(mpsim_machine_lookup(m, 1, 1, &manager, &contract) == MPSIM_OK);
    CHECK(manager == 2);
    CHECK(contract == MPSIM_CONTRACT_ASSIGNED);

    uint64_t frame = 0;
    CHECK(mpsim_machine_translate(m, 1, 0x4000, 0, &frame) == MPSIM_PAGE_FAULT);

    mpsim_verdict verdict{};
    uint32_t pager = 0;
    CHECK(mpsim_machine_handle_fault(m, 1, 0x4008, 1, &verdict, &pager) == MPSIM_OK);
    CHECK(verdict == MPSIM_VERDICT_DISPATCHED);
    CHECK(pager == 2);

    mpsim_fault_message msg{};
    CHECK(mpsim_machine_receive(m, 2, &msg) == MPSIM_OK);
    CHECK(msg.faulter == 1);
    CHECK(msg.vaddr == 0x4008);
    CHECK(msg.write == 1);

    const uint64_t f = 77;
    CHECK(mpsim_machine_pager_reply(m, 3, 1, &f, 0) == MPSIM_ERR_WRONG_PAGER);
    CHECK(mpsim_machine_pager_reply(m, 2, 1, &f, 5) == MPSIM_OK);
    CHECK(mpsim_machine_pager_reply(m, 2, 1, &f, 5) == MPSIM_ERR_NO_OUTSTANDING_FAULT);
    CHECK(mpsim_machine_translate(m, 1, 0x4000, 0, &frame) == MPSIM_OK);
    CHECK(frame == 77);
    CHECK(mpsim_machine_lookup(m, 1, 1, &manager, &contract) == MPSIM_OK);
    CHECK(contract == MPSIM_CONTRACT_ACCEPTED);

    CHECK(mpsim_machine_map(m, 1, 0x5000, 78, 0) == MPSIM_OK);
    CHECK(mpsim_machine_unmap(m, 1, 0x5000, 1) == MPSIM_WARN_REVOKE_INEFFECTIVE);
    CHECK(mpsim_machine_unmap(m, 1, 0x4000, 1) == MPSIM_OK);
    CHECK(mpsim_machine_lookup(m, 1, 1, &manager, &contract) == MPSIM_OK);
    CHECK(contract == MPSIM_CONTRACT_REVOKED);
    CHECK(mpsim_machine_unmap(m, 1, 0x4000, 0) == MPSIM_ERR_NOT_MAPPED);
    CHECK(mpsim_machine_map(m, 1, 0x6000, 1, 0x80000000u) == MPSIM_ERR_MARKER_OVERFLOW);

    char* trace = nullptr;
    CHECK(mpsim_machine_trace_text(m, &trace) == MPSIM_OK);
    const auto text = take(trace);
    CHECK(text.find("VERDICT tid=1 vaddr=0x00004008 access=W verdict=DISPATCHED pager=2 cycle=0") != std::string::npos);
    CHECK(text.find("UNMAP asid=1 vaddr=0x00004000 revoke=1") != std::string::npos);
    mpsim_machine_free(m);
}

TEST_CASE("machine: kernel-range fault is a warning status") {
    mpsim_machine* m = nullptr;
    REQUIRE(mpsim_machine_create(nullptr, &m) == MPSIM_OK);
    mpsim_machine_add_thread(m, 1, 1, MPSIM_ROLE_APPLICANT);
    mpsim_verdict verdict{};
    uint32_t pager = 0;
    CHECK(mpsim_machine_handle_fault(m, 1, 0xff000000, 0, &verdict, &pager) == MPSIM_WARN_KERNEL_RANGE);
    CHECK(verdict == MPSIM_VERDICT_KERNEL_RANGE);
    // The thread was stopped.
    CHECK(mpsim_machine_handle_fault(m, 1, 0x1000, 0, &verdict, &pager) == MPSIM_ERR_NOT_RUNNABLE);
    mpsim_machine_free(m);
}

TEST_CASE("reproduce through the C API") {
    char* summary = nullptr;
    int passed = 0;
    CHECK(mpsim_reproduce(MPSIM_FIXTURES_DIR, &summary, &passed) == MPSIM_OK);
    CHECK(passed == 1);
    CHECK(take(summary).find("9/9") != std::string::npos);
    CHECK(mpsim_reproduce("/nonexistent", &summary, &passed) == MPSIM_ERR_MISSING_FIXTURE);
}

TEST_CASE("status strings") {
    CHECK(std::string(mpsim_status_string(MPSIM_OK)) == "ok");
    CHECK(std::string(mpsim_status_string(MPSIM_ERR_WRONG_PAGER)) == "WrongPager");
    CHECK(std::string(mpsim_status_string(MPSIM_ERR_IO)) == "Io");
}
