/* C interface to the choquard solver library. */
#ifndef CHOQUARD_H
#define CHOQUARD_H

#include <stddef.h>

#if defined(CHQ_BUILDING_LIBRARY)
#define CHQ_API __attribute__((visibility("default")))
#else
#define CHQ_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum chq_status {
    CHQ_OK = 0,
    CHQ_INVALID_INPUT = 1,
    CHQ_NOT_CONVERGED = 2,
    CHQ_NUMERICAL_ERROR = 3,
    CHQ_IO_ERROR = 4,
    CHQ_INTERNAL_ERROR = 5
} chq_status;

typedef struct chq_context chq_context;

typedef struct chq_problem {
    int N;
    double mu, p, q, nu, a, b;
} chq_problem;

typedef struct chq_exponents {
    double gamma_p, gamma_q, two_star_mu, two_lower;
    int mass_class; /* 0 subcritical, 1 critical, 2 supercritical */
} chq_exponents;

typedef struct chq_sharp {
    double S, S_HL, bubble_level, C_Nmu, A_Nmu;
} chq_sharp;

CHQ_API const char* chq_version(void);

CHQ_API chq_status chq_context_create(chq_context** out);
CHQ_API void chq_context_destroy(chq_context* ctx);

/* Message of the last failed call on this context; empty when none. Valid until the next call. */
CHQ_API const char* chq_last_error(const chq_context* ctx);

CHQ_API chq_status chq_validate(chq_context* ctx, const chq_problem* problem);
CHQ_API chq_status chq_exponents_of(chq_context* ctx, const chq_problem* problem, chq_exponents* out);
CHQ_API chq_status chq_sharp_constants(chq_context* ctx, int N, double mu, chq_sharp* out);

/* Runs a command ("constants", "gn", "solve", "limit", "sweep-nu", "asymptotics", "bubble-check",
 * "nonexistence") on a JSON config. The JSON output (a record, report or {"error": ...}) is kept on the
 * context and returned by chq_output_json. The return value mirrors the CLI exit code. */
CHQ_API chq_status chq_run(chq_context* ctx, const char* command, const char* config_json);
CHQ_API const char* chq_output_json(const chq_context* ctx);

#ifdef __cplusplus
}
#endif

#endif
