// Command-line front end. Talks to the simulator only through the C API.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mpsim/mpsim.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitExpectation = 1;
constexpr int kExitError = 2;

struct ScenarioDeleter {
    void operator()(mpsim_scenario* s) const { mpsim_scenario_free(s); }
};
struct RunDeleter {
    void operator()(mpsim_run* r) const { mpsim_run_free(r); }
};
struct StringDeleter {
    void operator()(char* s) const { mpsim_free_string(s); }
};
using ScenarioPtr = std::unique_ptr<mpsim_scenario, ScenarioDeleter>;
using RunPtr = std::unique_ptr<mpsim_run, RunDeleter>;
using StringPtr = std::unique_ptr<char, StringDeleter>;

struct Failure {
    std::string message;
};

void check(mpsim_status s, const std::string& what) {
    if (s < 0) {
        throw Failure{what + ": " + mpsim_status_string(s) + ": " + mpsim_last_error()};
    }
}

std::string take(char* s) {
    StringPtr owned(s);
    return owned ? std::string(owned.get()) : std::string();
}

struct Options {
    std::string scheme = "all";
    std::string scenario;
    std::string trace;
    std::string report = "table";
    std::optional<std::uint64_t> seed;
    bool check = false;
    std::string fixtures;
};

std::string scheme_report(mpsim_run* run, mpsim_scheme scheme, bool kv) {
    std::ostringstream out;
    const std::string name = mpsim_scheme_name(scheme);
    const size_t faults = mpsim_run_fault_count(run);
    char line[160];
    if (!kv) {
        out << "scheme " << name << '\n';
        std::snprintf(line, sizeof line, "%-6s %14s %17s %13s %18s\n", "fault", "mode_switches",
                      "context_switches", "ipc_messages", "pager_invocations");
        out << line;
    }
    for (size_t i = 0; i < faults; ++i) {
        mpsim_cycle_metrics m{};
        const bool done = mpsim_run_cycle_metrics(run, i, &m) == MPSIM_OK;
        if (kv) {
            const std::string p = "scheme." + name + ".fault." + std::to_string(i) + ".";
            if (!done) {
                out << p << "status=incomplete\n";
                continue;
            }
            out << p << "mode_switches=" << m.mode_switches << '\n'
                << p << "context_switches=" << m.context_switches << '\n'
                << p << "ipc_messages=" << m.ipc_messages << '\n'
                << p << "pager_invocations=" << m.pager_invocations << '\n';
        } else if (!done) {
            std::snprintf(line, sizeof line, "%-6zu %14s\n", i, "incomplete");
            out << line;
        } else {
            std::snprintf(line, sizeof line, "%-6zu %14u %17u %13u %18u\n", i, m.mode_switches,
                          m.context_switches, m.ipc_messages, m.pager_invocations);
            out << line;
        }
    }
    mpsim_totals t{};
    check(mpsim_run_totals(run, &t), "totals");
    if (kv) {
        const std::string p = "scheme." + name + ".";
        out << p << "faults=" << t.faults << '\n'
            << p << "completed=" << t.completed << '\n'
            << p << "mode_switches=" << t.sum.mode_switches << '\n'
            << p << "context_switches=" << t.sum.context_switches << '\n'
            << p << "ipc_messages=" << t.sum.ipc_messages << '\n'
            << p << "pager_invocations=" << t.sum.pager_invocations << '\n';
    } else {
        std::snprintf(line, sizeof line, "%-6s %14u %17u %13u %18u\n", "total", t.sum.mode_switches,
                      t.sum.context_switches, t.sum.ipc_messages, t.sum.pager_invocations);
        out << line;
    }
    return out.str();
}

int simulate(const Options& opt) {
    std::vector<mpsim_scheme> schemes;
    if (opt.scheme == "all") {
        schemes = {MPSIM_SCHEME_MONOLITHIC, MPSIM_SCHEME_L4_SINGLE, MPSIM_SCHEME_PROPOSED,
                   MPSIM_SCHEME_L4RE};
    } else {
        mpsim_scheme s{};
        check(mpsim_scheme_parse(opt.scheme.c_str(), &s), "--scheme " + opt.scheme);
        schemes = {s};
    }
    const bool kv = opt.report == "kv";
    const uint64_t* seed = opt.seed ? &*opt.seed : nullptr;

    mpsim_scenario* raw = nullptr;
    check(mpsim_scenario_load(opt.scenario.c_str(), &raw), opt.scenario);
    ScenarioPtr scenario(raw);

    std::string traces;
    std::vector<std::string> failures;
    for (auto s : schemes) {
        mpsim_run* run_raw = nullptr;
        check(mpsim_run_scenario(scenario.get(), s, seed, &run_raw),
              std::string("scheme ") + mpsim_scheme_name(s));
        RunPtr run(run_raw);
        if (!opt.trace.empty()) {
            char* text = nullptr;
            check(mpsim_run_trace_text(run.get(), &text), "trace");
            if (schemes.size() > 1) traces += std::string("# scheme ") + mpsim_scheme_name(s) + '\n';
            traces += take(text);
        }
        if (opt.check) {
            char* text = nullptr;
            size_t count = 0;
            check(mpsim_run_check(scenario.get(), run.get(), &text, &count), "check");
            std::istringstream lines(take(text));
            for (std::string l; std::getline(lines, l);) failures.push_back(l);
        }
        if (schemes.size() == 1) std::cout << scheme_report(run.get(), s, kv);
    }
    if (schemes.size() > 1) {
        char* text = nullptr;
        check(mpsim_report(scenario.get(), seed, kv ? MPSIM_REPORT_KV : MPSIM_REPORT_TABLE, &text),
              "report");
        std::cout << take(text);
    }

    if (!opt.trace.empty()) {
        if (opt.trace == "-") {
            std::cout << traces;
        } else {
            std::ofstream out(opt.trace, std::ios::binary);
            out << traces;
            if (!out) throw Failure{"cannot write " + opt.trace};
        }
    }

    if (opt.check) {
        for (const auto& f : failures) std::cerr << "expectation failed: " << f << '\n';
        if (!failures.empty()) return kExitExpectation;
        std::cerr << "all expectations met\n";
    }
    return kExitOk;
}

int reproduce(const Options& opt) {
    char* summary = nullptr;
    int passed = 0;
    check(mpsim_reproduce(opt.fixtures.c_str(), &summary, &passed), "reproduce");
    std::cout << take(summary);
    return passed ? kExitOk : kExitExpectation;
}

}  // namespace

int main(int argc, char** argv) {
    Options opt;
    CLI::App app{"Page-fault dispatch simulator"};
    app.add_option("--scheme", opt.scheme, "Scheme to simulate")
        ->check(CLI::IsMember({"monolithic", "l4-single", "l4re", "proposed", "all"}));
    app.add_option("--scenario", opt.scenario, "Scenario file");
    app.add_option("--trace", opt.trace, "Write the event trace here (- for stdout)");
    app.add_option("--report", opt.report, "Report format")->check(CLI::IsMember({"table", "kv"}));
    app.add_option("--seed", opt.seed, "Interleave accesses with a seeded scheduler");
    app.add_flag("--check", opt.check, "Verify the scenario's expectations");

    auto* repro = app.add_subcommand("reproduce", "Check every listed result against the fixtures");
    repro->add_option("--fixtures", opt.fixtures, "Fixtures directory")->required();
    app.require_subcommand(0, 1);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitError;
    }

    try {
        if (repro->parsed()) return reproduce(opt);
        if (opt.scenario.empty()) {
            std::cerr << "--scenario is required\n" << app.help();
            return kExitError;
        }
        return simulate(opt);
    } catch (const Failure& f) {
        std::cerr << "mpsim: " << f.message << '\n';
        return kExitError;
    }
}
