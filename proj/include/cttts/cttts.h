/* SPDX-License-Identifier: Apache-2.0 */
#ifndef CTTTS_CTTTS_H
#define CTTTS_CTTTS_H

#include <stddef.h>
#include <stdint.h>

#if defined(CTTTS_BUILDING_LIBRARY)
#define CTTTS_API __attribute__((visibility("default")))
#else
#define CTTTS_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum cttts_status {
    CTTTS_OK = 0,
    CTTTS_INVALID_ARGUMENT = 1, /* null handle or pointer */
    CTTTS_CONFIG = 2,           /* invalid configuration or input document */
    CTTTS_PARSE = 3,            /* malformed JSON */
    CTTTS_RUNTIME = 4,          /* computation failed on valid input */
    CTTTS_IO = 5,               /* file could not be written */
    CTTTS_NUMERIC = 6           /* unexpected internal error */
} cttts_status;

typedef struct cttts_instance cttts_instance;
typedef struct cttts_experiment cttts_experiment;
typedef struct cttts_string cttts_string;

CTTTS_API const char* cttts_version(void);

/* Message of the last failing call on this thread ("" if none). */
CTTTS_API const char* cttts_last_error(void);

/* Owned result strings (JSON documents). */
CTTTS_API const char* cttts_string_data(const cttts_string* s);
CTTTS_API size_t cttts_string_size(const cttts_string* s);
CTTTS_API void cttts_string_free(cttts_string* s);

/* Problem instances. */
CTTTS_API cttts_status cttts_instance_from_json(const char* json, cttts_instance** out);
CTTTS_API cttts_status cttts_instance_generate_gaussian(uint64_t seed, size_t contexts, size_t designs, size_t m,
                                                        cttts_instance** out);
CTTTS_API cttts_status cttts_instance_generate_weibull(uint64_t seed, double tau, cttts_instance** out);
CTTTS_API cttts_status cttts_instance_to_json(const cttts_instance* inst, cttts_string** out);
CTTTS_API size_t cttts_instance_num_contexts(const cttts_instance* inst);
CTTTS_API size_t cttts_instance_num_designs(const cttts_instance* inst);
CTTTS_API void cttts_instance_free(cttts_instance* inst);

/* Experiments. `base_dir` resolves relative paths inside the config (may be NULL). */
CTTTS_API cttts_status cttts_experiment_from_json(const char* json, const char* base_dir, cttts_experiment** out);
CTTTS_API cttts_status cttts_experiment_set_reps(cttts_experiment* exp, size_t reps);
CTTTS_API cttts_status cttts_experiment_set_budget(cttts_experiment* exp, size_t budget);
CTTTS_API cttts_status cttts_experiment_set_seed(cttts_experiment* exp, uint64_t seed);
CTTTS_API cttts_status cttts_experiment_set_parallelism(cttts_experiment* exp, size_t threads);
/* CSV output path from the config, or "" when none was given. */
CTTTS_API const char* cttts_experiment_out(const cttts_experiment* exp);
/* Runs all replications; writes the CSV to csv_path (required) and run
   metadata to meta_path (may be NULL). `summary` (may be NULL) receives a JSON
   summary. */
CTTTS_API cttts_status cttts_experiment_run(cttts_experiment* exp, const char* csv_path, const char* meta_path,
                                            cttts_string** summary);
CTTTS_API void cttts_experiment_free(cttts_experiment* exp);

/* JSON request/response operations. `options_json` and `base_dir` may be NULL. */
CTTTS_API cttts_status cttts_solve_allocation(const char* problem_json, const char* options_json,
                                              const char* base_dir, cttts_string** out);
CTTTS_API cttts_status cttts_rates(const char* request_json, cttts_string** out);
CTTTS_API cttts_status cttts_policy_prob(const char* request_json, cttts_string** out);

#ifdef __cplusplus
}
#endif

#endif
