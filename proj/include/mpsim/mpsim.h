#ifndef MPSIM_MPSIM_H
#define MPSIM_MPSIM_H

#include <stddef.h>
#include <stdint.h>

#if defined(MPSIM_BUILDING)
#define MPSIM_API __attribute__((visibility("default")))
#else
#define MPSIM_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Zero is success, positive values are outcomes worth noticing, negative
 * values are errors. After an error mpsim_last_error() describes it. */
typedef enum mpsim_status {
    MPSIM_OK = 0,
    MPSIM_WARN_REVOKE_INEFFECTIVE = 1,
    MPSIM_WARN_KERNEL_RANGE = 2,
    MPSIM_PAGE_FAULT = 3,

    MPSIM_ERR_INVALID_ARGUMENT = -1,
    MPSIM_ERR_DEADLOCK = -2,
    MPSIM_ERR_NOT_RUNNABLE = -3,
    MPSIM_ERR_UNKNOWN_RECEIVER = -4,
    MPSIM_ERR_MARKER_OVERFLOW = -5,
    MPSIM_ERR_BAD_ADDRESS = -6,
    MPSIM_ERR_NOT_MAPPED = -7,
    MPSIM_ERR_BAD_REGION = -8,
    MPSIM_ERR_NO_OUTSTANDING_FAULT = -9,
    MPSIM_ERR_WRONG_PAGER = -10,
    MPSIM_ERR_OUT_OF_FRAMES = -11,
    MPSIM_ERR_NO_DATABASE_ENTRY = -12,
    MPSIM_ERR_OVERLAPPING_RANGE = -13,
    MPSIM_ERR_SCHEME_MISMATCH = -14,
    MPSIM_ERR_INCOMPLETE_CYCLE = -15,
    MPSIM_ERR_PARSE = -16,
    MPSIM_ERR_SEMANTIC = -17,
    MPSIM_ERR_MISSING_FIXTURE = -18,
    MPSIM_ERR_LIVELOCK = -19,
    MPSIM_ERR_IO = -20,
    MPSIM_ERR_INTERNAL = -100
} mpsim_status;

typedef enum mpsim_scheme {
    MPSIM_SCHEME_MONOLITHIC = 0,
    MPSIM_SCHEME_L4_SINGLE = 1,
    MPSIM_SCHEME_PROPOSED = 2,
    MPSIM_SCHEME_L4RE = 3
} mpsim_scheme;

typedef enum mpsim_role {
    MPSIM_ROLE_APPLICANT = 0,
    MPSIM_ROLE_PAGER = 1
} mpsim_role;

typedef enum mpsim_contract {
    MPSIM_CONTRACT_UNASSIGNED = 0,
    MPSIM_CONTRACT_ASSIGNED = 1,
    MPSIM_CONTRACT_ACCEPTED = 2,
    MPSIM_CONTRACT_REVOKED = 3
} mpsim_contract;

typedef enum mpsim_verdict {
    MPSIM_VERDICT_DISPATCHED = 0,
    MPSIM_VERDICT_RESUMED_PRESENT = 1,
    MPSIM_VERDICT_KERNEL_RANGE = 2,
    MPSIM_VERDICT_NO_PAGER = 3,
    MPSIM_VERDICT_NOT_ACCEPTED = 4
} mpsim_verdict;

typedef enum mpsim_report_format {
    MPSIM_REPORT_TABLE = 0,
    MPSIM_REPORT_KV = 1
} mpsim_report_format;

typedef struct mpsim_layout {
    uint64_t user_base;
    uint64_t region_size;
    uint32_t region_count;
    uint32_t pages_per_region;
} mpsim_layout;

typedef struct mpsim_cycle_metrics {
    uint32_t mode_switches;
    uint32_t context_switches;
    uint32_t ipc_messages;
    uint32_t pager_invocations;
} mpsim_cycle_metrics;

typedef struct mpsim_totals {
    size_t faults;
    size_t completed;
    mpsim_cycle_metrics sum;
} mpsim_totals;

typedef struct mpsim_fault_message {
    uint32_t faulter;
    uint32_t asid;
    uint64_t vaddr;
    int write;
    uint32_t marker;
} mpsim_fault_message;

typedef struct mpsim_scenario mpsim_scenario;
typedef struct mpsim_run mpsim_run;
typedef struct mpsim_machine mpsim_machine;

MPSIM_API const char* mpsim_last_error(void);
MPSIM_API const char* mpsim_status_string(mpsim_status status);
/* Every char* handed out by the library is released with this. */
MPSIM_API void mpsim_free_string(char* text);

MPSIM_API const char* mpsim_scheme_name(mpsim_scheme scheme);
MPSIM_API mpsim_status mpsim_scheme_parse(const char* name, mpsim_scheme* out);

MPSIM_API mpsim_layout mpsim_layout_standard(void);
MPSIM_API mpsim_layout mpsim_layout_small(void);
/* MPSIM_WARN_KERNEL_RANGE when vaddr is outside the user regions. */
MPSIM_API mpsim_status mpsim_region_id_of(const mpsim_layout* layout, uint64_t vaddr,
                                          uint32_t* rid);

/* Scenarios */
MPSIM_API mpsim_status mpsim_scenario_parse(const char* text, mpsim_scenario** out);
MPSIM_API mpsim_status mpsim_scenario_load(const char* path, mpsim_scenario** out);
MPSIM_API mpsim_status mpsim_scenario_serialize(const mpsim_scenario* scenario, char** out);
MPSIM_API void mpsim_scenario_free(mpsim_scenario* scenario);

/* Runs. seed may be NULL for the scripted order. */
MPSIM_API mpsim_status mpsim_run_scenario(const mpsim_scenario* scenario, mpsim_scheme scheme,
                                          const uint64_t* seed, mpsim_run** out);
MPSIM_API void mpsim_run_free(mpsim_run* run);
MPSIM_API size_t mpsim_run_fault_count(const mpsim_run* run);
MPSIM_API mpsim_status mpsim_run_cycle_metrics(const mpsim_run* run, size_t fault,
                                               mpsim_cycle_metrics* out);
MPSIM_API mpsim_status mpsim_run_totals(const mpsim_run* run, mpsim_totals* out);
MPSIM_API mpsim_status mpsim_run_trace_text(const mpsim_run* run, char** out);
MPSIM_API mpsim_status mpsim_run_page_table_text(const mpsim_run* run, char** out);
MPSIM_API size_t mpsim_run_warning_count(const mpsim_run* run);
/* failures gets one line per failed expectation (empty string when all hold). */
MPSIM_API mpsim_status mpsim_run_check(const mpsim_scenario* scenario, const mpsim_run* run,
                                       char** failures, size_t* failure_count);

/* All four schemes over one scenario, with pairwise reductions. */
MPSIM_API mpsim_status mpsim_report(const mpsim_scenario* scenario, const uint64_t* seed,
                                    mpsim_report_format format, char** out);

/* Checks every claim listed in dir/claims.txt. */
MPSIM_API mpsim_status mpsim_reproduce(const char* fixtures_dir, char** summary, int* all_passed);

/* Machine: direct access to one region-dispatching kernel. */
MPSIM_API mpsim_status mpsim_machine_create(const mpsim_layout* layout, mpsim_machine** out);
MPSIM_API void mpsim_machine_free(mpsim_machine* machine);
MPSIM_API mpsim_status mpsim_machine_add_thread(mpsim_machine* machine, uint32_t tid,
                                                uint32_t asid, mpsim_role role);
MPSIM_API mpsim_status mpsim_machine_assign(mpsim_machine* machine, uint32_t asid, uint32_t rid,
                                            uint32_t pager);
MPSIM_API mpsim_status mpsim_machine_lookup(const mpsim_machine* machine, uint32_t asid,
                                            uint32_t rid, uint32_t* manager,
                                            mpsim_contract* contract);
MPSIM_API mpsim_status mpsim_machine_map(mpsim_machine* machine, uint32_t asid, uint64_t vaddr,
                                         uint64_t frame, uint32_t marker);
MPSIM_API mpsim_status mpsim_machine_unmap(mpsim_machine* machine, uint32_t asid, uint64_t vaddr,
                                           int revoke);
/* MPSIM_PAGE_FAULT when the access would fault. */
MPSIM_API mpsim_status mpsim_machine_translate(const mpsim_machine* machine, uint32_t asid,
                                               uint64_t vaddr, int write, uint64_t* frame);
MPSIM_API mpsim_status mpsim_machine_handle_fault(mpsim_machine* machine, uint32_t tid,
                                                  uint64_t vaddr, int write,
                                                  mpsim_verdict* verdict, uint32_t* pager);
MPSIM_API mpsim_status mpsim_machine_receive(mpsim_machine* machine, uint32_t pager,
                                             mpsim_fault_message* out);
/* map may be NULL to reply without mapping. */
MPSIM_API mpsim_status mpsim_machine_pager_reply(mpsim_machine* machine, uint32_t pager,
                                                 uint32_t faulter, const uint64_t* frame,
                                                 uint32_t marker);
MPSIM_API mpsim_status mpsim_machine_trace_text(const mpsim_machine* machine, char** out);

#ifdef __cplusplus
}
#endif

#endif
