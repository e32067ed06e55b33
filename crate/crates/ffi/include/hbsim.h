/* C interface to the hidden-basis simulator. */

#ifndef HBSIM_H
#define HBSIM_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Result of every fallible call.
 */
typedef enum HbStatus {
  /*
   The call succeeded.
   */
  HB_STATUS_OK = 0,
  /*
   A required pointer argument was null.
   */
  HB_STATUS_NULL_POINTER = 1,
  /*
   An argument failed validation; see the error message.
   */
  HB_STATUS_INVALID_ARGUMENT = 2,
  /*
   The computation reported a domain error; see the error message.
   */
  HB_STATUS_RUNTIME_ERROR = 3,
  /*
   A panic was caught at the boundary; see the error message.
   */
  HB_STATUS_PANIC = 4,
} HbStatus;

/*
 Opaque handle to a bounded phase reference.
 */
typedef struct HbReference HbReference;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message for the most recent failure on this thread, or null when the
 last call succeeded. The pointer stays valid until the next failing
 call on the same thread; do not free it.
 */
const char *hb_last_error_message(void);

/*
 Frees a string returned by this library. Null is ignored.

 # Safety
 `text` must be a pointer previously returned by this library's
 string-producing calls, and must not be used afterwards.
 */
void hb_string_free(char *text);

/*
 Creates the equal-modulus phase reference of size `t` at phase `theta`
 and stores the handle in `out`.

 # Safety
 `out` must point to writable memory for one pointer.
 */
enum HbStatus hb_reference_new(double theta, uint64_t t, struct HbReference **out);

/*
 Releases a reference handle. Null is ignored.

 # Safety
 `reference` must be a handle from this library, not yet freed.
 */
void hb_reference_free(struct HbReference *reference);

/*
 Reads the reference size `t`.

 # Safety
 `reference` and `out` must be valid, non-null pointers.
 */
enum HbStatus hb_reference_size(const struct HbReference *reference, uint64_t *out);

/*
 Runs a chain of `l` reference-consuming Hadamard gates on one qubit
 starting from the first basis state, using a copy of the handle's
 reference, and returns the fidelity report as JSON in `out_json`.

 # Safety
 `reference` and `out_json` must be valid, non-null pointers; the
 returned string must be released with `hb_string_free`.
 */
enum HbStatus hb_reference_run_chain(const struct HbReference *reference,
                                     uint64_t l,
                                     double alpha,
                                     char **out_json);

/*
 Runs one named experiment (`lift`, `prep`, `hadamard-chain`,
 `id-protocol`, `squash`, `forge`) with JSON parameters (null or empty
 for defaults). The JSON report lands in `out_json`; `out_pass`
 (optional) receives whether every assertion held.

 # Safety
 `out_json` must be valid and non-null; `params_json` and `out_pass`
 may be null; the returned string must be released with
 `hb_string_free`.
 */
enum HbStatus hb_run_experiment(const char *command,
                                const char *params_json,
                                char **out_json,
                                bool *out_pass);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HBSIM_H */
