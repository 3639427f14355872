#ifndef QIKDV_H
#define QIKDV_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

// Status codes mirror the CLI exit codes.
#define QIKDV_OK 0

#define QIKDV_VALIDATION 2

#define QIKDV_NUMERICAL 3

#define QIKDV_IO 4

// A caller-side contract violation (null pointer, bad enum value).
#define QIKDV_USAGE 5

// A panic crossed the boundary; the handle state is unspecified.
#define QIKDV_PANIC 6

// Equation selectors for [`qikdv_evolve`].
#define QIKDV_EQ_KDV 0

#define QIKDV_EQ_DEFORMED_UUXX 1

#define QIKDV_EQ_SCALED 2

// Deformation family selectors for [`qikdv_anomaly`].
#define QIKDV_DEF_UUXX 0

#define QIKDV_DEF_POWER_UX3 1

#define QIKDV_DEF_UD2N1 2

#define QIKDV_DEF_POWER 3

// Opaque periodic real field. Owned by the caller via create/free.
typedef struct QikdvField QikdvField;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Create a field of `n` samples on a periodic domain of the given length.
// Returns null (and sets the error message) on invalid input.
//
// # Safety
// `values` must point to `n` readable doubles.
struct QikdvField *qikdv_field_create(double length, uintptr_t n, const double *values);

// Analytic soliton profile sampler; eps selects the scaled-flow shape.
struct QikdvField *qikdv_soliton(double length, uintptr_t n, double c, double eps, double x0);

// # Safety
// `field` must be a pointer returned by a qikdv constructor, or null.
void qikdv_field_free(struct QikdvField *field);

// # Safety
// `field` must be a live handle.
uintptr_t qikdv_field_len(const struct QikdvField *field);

// # Safety
// `field` must be a live handle.
double qikdv_field_length(const struct QikdvField *field);

// Copy the samples into `out`, which must hold at least `n` doubles.
//
// # Safety
// `field` must be a live handle and `out` writable for `n` doubles.
int qikdv_field_values(const struct QikdvField *field, double *out, uintptr_t n);

// Evolve the field in place to `t_end`.
//
// # Safety
// `field` must be a live handle.
int qikdv_evolve(struct QikdvField *field,
                 int equation_kind,
                 double epsilon,
                 double dt,
                 double t_end);

// Zeroth anomalous charge of the field.
//
// # Safety
// `field` must be a live handle, `out` writable.
int qikdv_charge_q0(const struct QikdvField *field, double *out);

// Anomaly function of the deformed Hamiltonian; allocates a new field
// handle into `out`.
//
// # Safety
// `field` must be a live handle, `out` writable for one pointer.
int qikdv_anomaly(const struct QikdvField *field,
                  int family,
                  double epsilon,
                  struct QikdvField **out);

// Message for the most recent failure on this thread. Valid until the next
// failing call on the same thread.
const char *qikdv_last_error(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* QIKDV_H */
