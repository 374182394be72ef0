#include <stdio.h>
#include "skewprod.h"

int main(void) {
    SpSystem *sys = NULL;
    if (sp_system_new(1.1, 0.019, 0.5, &sys) != SP_STATUS_OK) {
        fprintf(stderr, "%s\n", sp_last_error());
        return 1;
    }
    double ys[4], slopes[4];
    size_t n = 0;
    if (sp_fixed_points(sys, 0.0, -0.86, 0.86, ys, slopes, 4, &n) != SP_STATUS_OK || n != 1) {
        return 2;
    }
    printf("%.6f\n", ys[0]);
    SpSystem *bad = NULL;
    if (sp_system_new(1.1, 0.019, 2.0, &bad) != SP_STATUS_INVALID_ARGUMENT || bad != NULL) {
        return 3;
    }
    sp_system_free(sys);
    return 0;
}
