#include <math.h>
#include <stdio.h>
#include "torus_cascade.h"

#define CHECK(call)                                                  \
    do {                                                             \
        tc_status st_ = (call);                                      \
        if (st_ != TC_STATUS_OK) {                                   \
            char msg_[512];                                          \
            tc_last_error_message(msg_, sizeof msg_, NULL);          \
            fprintf(stderr, "%s -> %d: %s\n", #call, st_, msg_);     \
            return 1;                                                \
        }                                                            \
    } while (0)

int main(void) {
    tc_family *fam = NULL;
    CHECK(tc_family_new(1, 0, 10, &fam));
    int64_t m[2];
    CHECK(tc_family_m(fam, 3, m));
    printf("m3 %lld %lld\n", (long long)m[0], (long long)m[1]);

    tc_cascade *c = NULL;
    CHECK(tc_cascade_new(fam, 2, TC_BETA_MODE_SCALED, 0.05, 0.5, &c));
    double t1;
    CHECK(tc_cascade_cycle_time(c, 1, &t1));
    double p[12], s[11];
    CHECK(tc_cascade_chain_state(c, t1, p, 12, s, 11));
    printf("T1 %.1f p2 %.12f p1 %.12f s1 %.12f\n", t1, p[2], p[1], s[1]);

    tc_family *big = NULL;
    tc_status st = tc_family_new(1, 0, 30, &big);
    char msg[512];
    tc_last_error_message(msg, sizeof msg, NULL);
    printf("K30 status %d overflow %d\n", st, st == TC_STATUS_OVERFLOW);

    tc_cascade_free(c);
    tc_family_free(fam);
    return 0;
}
