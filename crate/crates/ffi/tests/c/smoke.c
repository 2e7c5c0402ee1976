/* Scenario 1 through the C interface. Exits 0 when the plan is verified. */
#include <math.h>
#include <stdio.h>
#include <string.h>

#include "stlsynth.h"

#define CHECK(call)                                                        \
    do {                                                                   \
        StlsynthCode c_ = (call);                                          \
        if (c_ != STLSYNTH_CODE_OK) {                                      \
            fprintf(stderr, "%s -> %d: %s\n", #call, (int)c_,              \
                    stlsynth_last_error() ? stlsynth_last_error() : "");   \
            return 1;                                                      \
        }                                                                  \
    } while (0)

int main(void) {
    StlsynthTrajectory *data = NULL, *init = NULL, *start = NULL;
    StlsynthFormula *phi = NULL;
    StlsynthResult *res = NULL;
    double u_ini[3] = {0.6058, 0.0, 0.0}, y_ini[3] = {-0.1636, 0.0, 0.0};
    double u[32];
    size_t n = 0, t_fail = 0;
    bool ok = false;

    CHECK(stlsynth_generate_data("car", 200, -2.0, 2.0, 7, &data));
    CHECK(stlsynth_trajectory_new(1, 1, 3, u_ini, y_ini, &init));
    CHECK(stlsynth_formula_parse("G[5,10] (abs(y1) >= 2 and abs(y1) <= 3)", 1, &phi));

    StlsynthOptions opt = stlsynth_options_default();
    opt.n_x_bound = 3;
    opt.u_lo = -2.0;
    opt.u_hi = 2.0;
    CHECK(stlsynth_synthesize(data, init, phi, &opt, &res));
    if (stlsynth_result_status(res) != STLSYNTH_STATUS_FEASIBLE || isnan(stlsynth_result_objective(res))) {
        fprintf(stderr, "not feasible\n");
        return 1;
    }
    if (stlsynth_result_inputs(res, u, 2, &n) != STLSYNTH_CODE_BUFFER_TOO_SMALL || n != 11) {
        fprintf(stderr, "small buffer not reported\n");
        return 1;
    }
    CHECK(stlsynth_result_inputs(res, u, 32, &n));
    CHECK(stlsynth_result_initialization(res, &start));
    CHECK(stlsynth_verify("car", start, u, n, phi, &ok, &t_fail));
    if (!ok || t_fail != SIZE_MAX) {
        fprintf(stderr, "closed loop violated at %zu\n", t_fail);
        return 1;
    }
    if (stlsynth_formula_parse("G[0,1] (y1 >", 1, &phi) != STLSYNTH_CODE_PARSE || strlen(stlsynth_last_error()) == 0) {
        fprintf(stderr, "parse error not reported\n");
        return 1;
    }
    printf("ok %s objective %.4f\n", stlsynth_version(), stlsynth_result_objective(res));
    stlsynth_result_free(res);
    stlsynth_formula_free(phi);
    stlsynth_trajectory_free(start);
    stlsynth_trajectory_free(init);
    stlsynth_trajectory_free(data);
    return 0;
}
