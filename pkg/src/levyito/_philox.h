#ifndef LEVYITO_PHILOX_H
#define LEVYITO_PHILOX_H

#include <stdint.h>

#define LEVYITO_PHILOX_M0 0xD2E7470EE14C6C93ULL
#define LEVYITO_PHILOX_M1 0xCA5A826395121157ULL
#define LEVYITO_PHILOX_W0 0x9E3779B97F4A7C15ULL
#define LEVYITO_PHILOX_W1 0xBB67AE8584CAA73BULL

static inline uint64_t levyito_mulhilo(uint64_t a, uint64_t b, uint64_t *hi) {
#if defined(__SIZEOF_INT128__)
    __uint128_t p = (__uint128_t)a * (__uint128_t)b;
    *hi = (uint64_t)(p >> 64);
    return (uint64_t)p;
#else
    uint64_t a_lo = a & 0xFFFFFFFFULL, a_hi = a >> 32;
    uint64_t b_lo = b & 0xFFFFFFFFULL, b_hi = b >> 32;
    uint64_t ll = a_lo * b_lo, lh = a_lo * b_hi, hl = a_hi * b_lo, hh = a_hi * b_hi;
    uint64_t mid = (ll >> 32) + (lh & 0xFFFFFFFFULL) + (hl & 0xFFFFFFFFULL);
    *hi = hh + (lh >> 32) + (hl >> 32) + (mid >> 32);
    return a * b;
#endif
}

/* Output `counter` of the stream keyed (k0, k1) with counter origin (0, sub, 0, 0). */
static inline uint64_t levyito_philox_at(uint64_t k0, uint64_t k1, uint64_t sub, uint64_t counter) {
    uint64_t c0 = (counter >> 2) + 1, c1 = sub, c2 = 0, c3 = 0;
    uint64_t hi0, hi1, lo0, lo1;
    int r;
    for (r = 0; r < 10; r++) {
        if (r) {
            k0 += LEVYITO_PHILOX_W0;
            k1 += LEVYITO_PHILOX_W1;
        }
        lo0 = levyito_mulhilo(LEVYITO_PHILOX_M0, c0, &hi0);
        lo1 = levyito_mulhilo(LEVYITO_PHILOX_M1, c2, &hi1);
        c0 = hi1 ^ c1 ^ k0;
        c1 = lo1;
        c2 = hi0 ^ c3 ^ k1;
        c3 = lo0;
    }
    switch (counter & 3) {
        case 0: return c0;
        case 1: return c1;
        case 2: return c2;
        default: return c3;
    }
}

#endif
