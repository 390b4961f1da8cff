#ifndef MUTMOD_H
#define MUTMOD_H

#include <stddef.h>
#include <stdint.h>

#if defined(MUTMOD_BUILDING_LIBRARY)
#define MUTMOD_API __attribute__((visibility("default")))
#else
#define MUTMOD_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Status codes; nonzero values match the engine's error codes. */
typedef enum mutmod_status {
  MUTMOD_OK = 0,
  MUTMOD_MALFORMED_AGENT_ID = 1,
  MUTMOD_UNKNOWN_AGENT,
  MUTMOD_ORDER_EXCEEDED,
  MUTMOD_INVALID_SPEC,
  MUTMOD_CONFLICTING_SPEC,
  MUTMOD_UNKNOWN_VARIABLE,
  MUTMOD_VALUE_OUT_OF_DOMAIN,
  MUTMOD_TIMESTAMP_REGRESSION,
  MUTMOD_KIND_SOURCE_MISMATCH,
  MUTMOD_PAYLOAD_OUT_OF_DOMAIN,
  MUTMOD_MISSING_PAYLOAD_FIELD,
  MUTMOD_EMPTY_BINS,
  MUTMOD_NON_MONOTONIC_BINS,
  MUTMOD_INVALID_SCENE,
  MUTMOD_CYCLE_DETECTED,
  MUTMOD_ROW_NOT_NORMALIZED,
  MUTMOD_MISSING_CPT,
  MUTMOD_DUPLICATE_CPT,
  MUTMOD_UNKNOWN_NODE,
  MUTMOD_MISSING_ROW,
  MUTMOD_ZERO_PROBABILITY_EVIDENCE,
  MUTMOD_ALL_ZERO_WEIGHTS,
  MUTMOD_INVALID_ARGUMENT,
  MUTMOD_MISSING_FIELD,
  MUTMOD_UNKNOWN_VARIABLE_IN_CONDITION,
  MUTMOD_CONDITION_SYNTAX,
  MUTMOD_WRONG_MODE,
  MUTMOD_UNKNOWN_PROPOSAL,
  MUTMOD_ALREADY_RESOLVED,
  MUTMOD_EXPIRED,
  MUTMOD_NO_HUMAN_RECORDS,
  MUTMOD_MISSING_FEATURE,
  MUTMOD_PARSE_ERROR,
  MUTMOD_VALIDATION_ERROR,
  MUTMOD_IO_ERROR,
  MUTMOD_UNKNOWN_TYPE,
  MUTMOD_SCHEMA_VIOLATION,
  MUTMOD_BIND_FAILURE,
  MUTMOD_INTERNAL = 100
} mutmod_status;

typedef enum mutmod_mode {
  MUTMOD_MODE_SCENARIO = -1, /* use the scenario's configured mode */
  MUTMOD_MODE_WIZARD = 0,
  MUTMOD_MODE_MIXED = 1,
  MUTMOD_MODE_AUTONOMOUS = 2
} mutmod_mode;

typedef struct mutmod_scenario mutmod_scenario;
typedef struct mutmod_trace mutmod_trace;
typedef struct mutmod_report mutmod_report;
typedef struct mutmod_server mutmod_server;

typedef struct mutmod_latency {
  size_t events;
  double median_ms;
  double p99_ms;
  double max_ms;
} mutmod_latency;

typedef struct mutmod_counts {
  size_t created, pending, executed, rejected, expired, suppressed;
} mutmod_counts;

MUTMOD_API const char* mutmod_version(void);
MUTMOD_API const char* mutmod_status_name(mutmod_status status);
/* Message for the last failing call on this thread; "" if none. */
MUTMOD_API const char* mutmod_last_error(void);
MUTMOD_API void mutmod_string_free(char* s);

MUTMOD_API mutmod_status mutmod_scenario_load(const char* path, mutmod_scenario** out);
MUTMOD_API mutmod_status mutmod_scenario_parse(const char* text, mutmod_scenario** out);
MUTMOD_API size_t mutmod_scenario_expectation_count(const mutmod_scenario* scenario);
MUTMOD_API void mutmod_scenario_free(mutmod_scenario* scenario);

/* Replays the scenario on a virtual clock. */
MUTMOD_API mutmod_status mutmod_run(const mutmod_scenario* scenario, uint64_t seed, mutmod_mode mode,
                                    mutmod_trace** out);

MUTMOD_API mutmod_status mutmod_trace_import(const char* path, mutmod_trace** out);
MUTMOD_API mutmod_status mutmod_trace_export(const mutmod_trace* trace, const char* path);
MUTMOD_API mutmod_status mutmod_trace_digest(const mutmod_trace* trace, char** out);
MUTMOD_API mutmod_status mutmod_trace_document(const mutmod_trace* trace, char** out);
MUTMOD_API size_t mutmod_trace_record_count(const mutmod_trace* trace);
/* Proposal status totals derived from the trace's records. */
MUTMOD_API mutmod_status mutmod_trace_counts(const mutmod_trace* trace, mutmod_counts* out);
/* Per-entry wall latency; zero events for imported traces. */
MUTMOD_API mutmod_status mutmod_trace_latency(const mutmod_trace* trace, mutmod_latency* out);
MUTMOD_API void mutmod_trace_free(mutmod_trace* trace);

MUTMOD_API mutmod_status mutmod_check(const mutmod_trace* trace, const mutmod_scenario* scenario,
                                      mutmod_report** out);
MUTMOD_API size_t mutmod_report_count(const mutmod_report* report);
MUTMOD_API size_t mutmod_report_failures(const mutmod_report* report);
MUTMOD_API int mutmod_report_passed(const mutmod_report* report, size_t index);
/* "PASS t=2000 ..." style line; owned by the report. */
MUTMOD_API const char* mutmod_report_line(const mutmod_report* report, size_t index);
MUTMOD_API void mutmod_report_free(mutmod_report* report);

/* Fitted table as a JSON cpt record. `used`/`skipped` may be NULL. */
MUTMOD_API mutmod_status mutmod_fit_cpt(const mutmod_trace* trace, const char* node, const char* const* parents,
                                        size_t parent_count, double alpha, char** out_json, size_t* used,
                                        size_t* skipped);
MUTMOD_API mutmod_status mutmod_learn_policy(const mutmod_trace* trace, const char* const* features,
                                             size_t feature_count, double alpha, char** out_json);
/* state_json: object of node -> label. Returns the chosen action as JSON. */
MUTMOD_API mutmod_status mutmod_policy_select(const char* policy_json, const char* state_json,
                                              char** out_action_json);

/* port 0 picks a free port. pace != 0 replays the timeline on the wall clock. */
MUTMOD_API mutmod_status mutmod_serve_start(const mutmod_scenario* scenario, uint64_t seed, mutmod_mode mode,
                                            const char* address, uint16_t port, int pace, mutmod_server** out);
MUTMOD_API uint16_t mutmod_server_port(const mutmod_server* server);
/* 1 once every timeline entry has been applied, 0 on timeout. */
MUTMOD_API int mutmod_server_wait_timeline(mutmod_server* server, int64_t timeout_ms);
/* Blocks until SIGINT/SIGTERM; linger_ms >= 0 bounds the wait. */
MUTMOD_API void mutmod_server_wait_shutdown(mutmod_server* server, int64_t linger_ms);
/* Stops serving; the final trace is returned when out is non-NULL. */
MUTMOD_API mutmod_status mutmod_server_stop(mutmod_server* server, mutmod_trace** out);
MUTMOD_API void mutmod_server_free(mutmod_server* server);

#ifdef __cplusplus
}
#endif

#endif
