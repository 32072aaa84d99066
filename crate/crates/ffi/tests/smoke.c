#include <math.h>
#include <stdio.h>
#include "edgecast.h"

static int check(EcStatus s, const char *what) {
    if (s != EC_STATUS_OK) {
        const char *m = ec_last_error_message();
        fprintf(stderr, "%s failed (%d): %s\n", what, (int)s, m ? m : "");
        return 1;
    }
    return 0;
}

int main(void) {
    EcLink link = {0.5e6, 10.0, 20.0, 1e-16, 0.1, 30.0, 2.0, EC_FADING_RAYLEIGH};
    EcConstraint c = {0.2, 1e-3, 0.1, 1};
    double rate = 0.0, bound = 0.0;
    if (check(ec_calibrated_rate(&link, &c, &rate), "calibrated_rate")) return 1;
    if (check(ec_dvp_bound(&link, &c, rate, &bound), "dvp_bound")) return 1;
    if (fabs(bound - 1e-3) > 1e-9) {
        fprintf(stderr, "bound %g\n", bound);
        return 1;
    }
    EcProblem *p = NULL;
    if (check(ec_problem_new(1e6, 1e-16, 0.1, 30.0, 2.0, EC_FADING_RAYLEIGH, 1e3, 1e2, &p), "problem_new")) return 1;
    for (int i = 0; i < 3; i++) {
        if (check(ec_problem_add_user(p, 15.0 + 2.0 * i, 10.0, &c), "add_user")) return 1;
    }
    EcAllocation *a = NULL;
    if (check(ec_allocate(p, EC_SCHEME_DOUBLE_BISECTION, &a), "allocate")) return 1;
    size_t n = 0;
    double bw[3], sustained[3], common = 0.0;
    ec_allocation_len(a, &n);
    ec_allocation_rate(a, &common);
    if (n != 3 || check(ec_allocation_copy(a, bw, sustained, 3), "allocation_copy")) return 1;
    printf("rate %.6g common %.6g bandwidths %.6g %.6g %.6g\n", rate, common, bw[0], bw[1], bw[2]);
    ec_allocation_free(a);
    ec_problem_free(p);
    if (ec_calibrated_rate(NULL, &c, &rate) != EC_STATUS_NULL_POINTER) return 1;
    printf("version %s\n", ec_version());
    return 0;
}
