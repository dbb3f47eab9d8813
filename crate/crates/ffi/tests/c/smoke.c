#include <stdio.h>
#include "typdiv.h"

int main(int argc, char **argv) {
    if (argc < 2) {
        return 1;
    }
    TypdivDistanceMatrix *m = NULL;
    if (typdiv_distance_matrix_load(argv[1], &m) != TYPDIV_STATUS_OK) {
        fprintf(stderr, "%s\n", typdiv_last_error_message());
        return 2;
    }
    const char *ids[] = {"dan", "nor"};
    TypdivMetric r;
    TypdivStatus status = typdiv_mpd(m, ids, 2, &r);
    typdiv_distance_matrix_free(m);
    if (status != TYPDIV_STATUS_OK) {
        fprintf(stderr, "%s\n", typdiv_last_error_message());
        return (int)status;
    }
    printf("mpd %.4f pairs %zu\n", r.value, r.count);
    return 0;
}
