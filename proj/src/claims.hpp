#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "scenario.hpp"
#include "trace.hpp"

namespace mpsim {

// One reproducible result: what is checked, where the number comes from, and
// the exact values a correct build produces.
struct ClaimEntry {
    std::string id;
    std::string kind;
    std::string source;
    std::string fixture;  // relative to the fixtures directory; empty if none
    std::map<std::string, std::string, std::less<>> expected;
};

// Manifest lines: `ID KIND key=value... source="..."`, with `fixture=` naming
// the scenario file. `#` starts a comment line.
std::vector<ClaimEntry> parse_claims(std::string_view text);

struct ClaimResult {
    std::string id;
    bool passed = false;
    std::string detail;
};

struct ReproduceOptions {
    // Applied to every trace before it is measured. Used to check that the
    // claims notice broken accounting.
    std::function<void(std::vector<TraceEvent>&)> mutate_trace;
};

struct ReproduceSummary {
    std::vector<ClaimResult> results;

    bool all_passed() const noexcept;
    std::string to_text() const;
};

// Runs every claim of `dir`/claims.txt. Throws SimError(MissingFixture) when
// the directory, the manifest or a referenced fixture is missing.
ReproduceSummary reproduce_all(const std::filesystem::path& dir,
                               const ReproduceOptions& options = {});

// Random workload of `faults` resolvable faults spread over two address
// spaces, each with two applicant threads and one pager per thread.
ScenarioFile random_resolved_workload(std::uint64_t seed, std::size_t faults);

}  // namespace mpsim
