#include <math.h>
#include <stdio.h>
#include <stdlib.h>

#include "waitmarket.h"

static char *slurp(const char *path) {
    FILE *f = fopen(path, "rb");
    if (!f) return NULL;
    fseek(f, 0, SEEK_END);
    long n = ftell(f);
    fseek(f, 0, SEEK_SET);
    char *buf = malloc((size_t)n + 1);
    fread(buf, 1, (size_t)n, f);
    buf[n] = '\0';
    fclose(f);
    return buf;
}

int main(int argc, char **argv) {
    if (argc < 2) return 2;
    char *json = slurp(argv[1]);
    if (!json) return 2;
    WmEnvironment *env = NULL;
    if (wm_environment_from_json(json, 101, &env) != WM_STATUS_OK) {
        fprintf(stderr, "%s\n", wm_last_error());
        return 1;
    }
    WmCommitment *sol = NULL;
    double value = 0.0;
    if (wm_commitment_solve(env, &sol) != WM_STATUS_OK || wm_commitment_value(sol, &value) != WM_STATUS_OK) {
        fprintf(stderr, "%s\n", wm_last_error());
        return 1;
    }
    WmEquilibrium *eq = NULL;
    double price = 0.0;
    bool forever = true;
    if (wm_equilibrium_solve(env, &eq) != WM_STATUS_OK || wm_equilibrium_price(eq, &price, &forever) != WM_STATUS_OK) {
        fprintf(stderr, "%s\n", wm_last_error());
        return 1;
    }
    printf("%.10f %.6f %d\n", value, price, (int)forever);
    int ok = fabs(value - 0.6125) < 1e-6 && fabs(price - 1.805) < 1e-3 && !forever;
    wm_equilibrium_free(eq);
    wm_commitment_free(sol);
    wm_environment_free(env);
    free(json);
    return ok ? 0 : 1;
}
