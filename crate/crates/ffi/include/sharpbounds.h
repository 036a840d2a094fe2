/* C ABI for the sharpbounds library. Generated by cbindgen; do not edit. */

#ifndef SHARPBOUNDS_H
#define SHARPBOUNDS_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Which side of the sharp range is requested.
typedef enum SbDirection {
  SB_UPPER = 0,
  SB_LOWER = 1,
} SbDirection;

// Compound-event family of a query.
typedef enum SbQueryKind {
  SB_AT_LEAST = 0,
  SB_AT_MOST = 1,
  SB_EXACTLY = 2,
} SbQueryKind;

// Result code of every ABI call.
typedef enum SbStatus {
  SB_OK = 0,
  SB_ERR_NULL_ARGUMENT = 1,
  SB_ERR_UTF8 = 2,
  SB_ERR_PARSE = 3,
  SB_ERR_INVALID_ARGUMENT = 4,
  SB_ERR_ATOM_LIMIT = 5,
  SB_ERR_INFEASIBLE = 6,
  SB_ERR_INTERNAL = 7,
} SbStatus;

// Opaque bound result.
typedef struct SbBound SbBound;

// Opaque attainment certificate. Atom words are reported in the caller's
// original event order.
typedef struct SbCertificate SbCertificate;

// Opaque marginal-probability vector (sorted internally).
typedef struct SbMarginals SbMarginals;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message describing the most recent error on this thread. The pointer
// stays valid until the next failing call on the same thread.
const char *sb_last_error(void);

// Frees a string returned by this library. NULL is accepted.
// Safety: `s` must come from this library and not be freed twice.
void sb_string_free(char *s);

// Parses `len` rational strings (`"3/10"` or `"0.3"` forms) into a
// marginal vector handle.
//
// Safety: `values` must point to `len` valid NUL-terminated strings and `out` must be a valid location to store the handle.
enum SbStatus sb_marginals_parse(const char *const *values,
                                 size_t len,
                                 struct SbMarginals **out);

// Frees a marginals handle. NULL is accepted.
// Safety: `m` must come from `sb_marginals_parse` and not be freed twice.
void sb_marginals_free(struct SbMarginals *m);

// Number of events in the marginal vector (0 for NULL).
size_t sb_marginals_len(const struct SbMarginals *m);

// Computes the sharp bound for the query, producing an opaque result.
//
// Safety: `m` must be a live handle from `sb_marginals_parse`; `out` must be valid.
enum SbStatus sb_bound_compute(const struct SbMarginals *m,
                               enum SbQueryKind kind,
                               uint32_t k,
                               enum SbDirection direction,
                               struct SbBound **out);

// Frees a bound handle. NULL is accepted.
// Safety: `b` must come from `sb_bound_compute` and not be freed twice.
void sb_bound_free(struct SbBound *b);

// The bound value as a rational string (caller frees with sb_string_free).
//
// Safety: `b` must be a live handle from `sb_bound_compute`.
char *sb_bound_value(const struct SbBound *b);

// Stopping index selected by the bound's closed form.
//
// Safety: `b` must be a live handle from `sb_bound_compute`.
uint32_t sb_bound_r_star(const struct SbBound *b);

// Whether the min/max clamp in the closed form was active.
//
// Safety: `b` must be a live handle from `sb_bound_compute`.
bool sb_bound_saturated(const struct SbBound *b);

// Builds a distribution attaining the queried bound. Atom words use the
// caller's original event order (leftmost character = first marginal).
//
// Safety: `m` must be a live handle; `out` must be valid.
enum SbStatus sb_certificate_compute(const struct SbMarginals *m,
                                     enum SbQueryKind kind,
                                     uint32_t k,
                                     enum SbDirection direction,
                                     struct SbCertificate **out);

// Frees a certificate handle. NULL is accepted.
// Safety: `c` must come from `sb_certificate_compute` and not be freed twice.
void sb_certificate_free(struct SbCertificate *c);

// Number of positive atoms in the certificate distribution.
//
// Safety: `c` must be a live handle from `sb_certificate_compute`.
size_t sb_certificate_atom_count(const struct SbCertificate *c);

// Copies atom `index` out as a word string and a mass string (both caller
// freed with sb_string_free).
//
// Safety: `c` must be a live handle; the out pointers must be valid.
enum SbStatus sb_certificate_atom(const struct SbCertificate *c,
                                  size_t index,
                                  char **word_out,
                                  char **mass_out);

// The probability the certificate achieves, as a rational string.
//
// Safety: `c` must be a live handle from `sb_certificate_compute`.
char *sb_certificate_achieved(const struct SbCertificate *c);

// Structure tag of the certificate: "type_i", "type_ii", or "complemented".
//
// Safety: `c` must be a live handle from `sb_certificate_compute`.
char *sb_certificate_dist_type(const struct SbCertificate *c);

// Cross-checks a k-of-n query against the exact LP oracle. `atom_limit`
// caps the event count (pass 0 for the default of 12).
//
// Safety: `m` must be a live handle; `value_out` must be valid.
enum SbStatus sb_oracle_kofn(const struct SbMarginals *m,
                             enum SbQueryKind kind,
                             uint32_t k,
                             enum SbDirection direction,
                             uint32_t atom_limit,
                             char **value_out);

// Sharp bound for unions of mutually exclusive conjunctions. `probs`
// holds all probabilities group after group; `set_lens[i]` is the size of
// group i. With `dual` set, computes the intersection-form value instead.
// Both outputs are rational strings (`t_star_out` may be NULL if unwanted).
//
// Safety: `probs` must hold `sum(set_lens)` strings, `set_lens` must hold `n_sets` entries, and `bound_out` must be valid.
enum SbStatus sb_exclusive_bound(const char *const *probs,
                                 const size_t *set_lens,
                                 size_t n_sets,
                                 bool dual,
                                 char **bound_out,
                                 char **t_star_out);

// Runs the seeded verification campaign; writes the number of mismatches
// (0 means every check agreed).
//
// Safety: `mismatches_out` must be a valid location.
enum SbStatus sb_verify(uint32_t n_max,
                        uint32_t trials,
                        uint64_t seed,
                        uint32_t atom_limit,
                        uint64_t *mismatches_out);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* SHARPBOUNDS_H */
