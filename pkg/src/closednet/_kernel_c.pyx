# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
# distutils: language = c++
"""Compiled replication kernel.

Mirror of ``_kernel_py.simulate``: identical RNG (xoshiro256**), identical
draw order and identical floating-point expressions, so outputs match the
pure-Python kernel exactly.
"""

import numpy as np

from libc.math cimport log, sqrt, pow, expm1, INFINITY
from libc.stdint cimport uint64_t, int64_t
from libcpp.vector cimport vector

cdef double TWO_M53 = 1.0 / 9007199254740992.0
cdef uint64_t GOLDEN = 0x9E3779B97F4A7C15ULL


cdef struct Rng:
    uint64_t s0
    uint64_t s1
    uint64_t s2
    uint64_t s3


cdef inline uint64_t mix64(uint64_t z) noexcept nogil:
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL
    return z ^ (z >> 31)


cdef inline uint64_t rotl(uint64_t x, int k) noexcept nogil:
    return (x << k) | (x >> (64 - k))


cdef void rng_seed(Rng* g, uint64_t seed) noexcept nogil:
    cdef uint64_t x = seed
    x += GOLDEN
    g.s0 = mix64(x)
    x += GOLDEN
    g.s1 = mix64(x)
    x += GOLDEN
    g.s2 = mix64(x)
    x += GOLDEN
    g.s3 = mix64(x)


cdef inline uint64_t rng_next(Rng* g) noexcept nogil:
    cdef uint64_t result = rotl(g.s1 * 5, 7) * 9
    cdef uint64_t t = g.s1 << 17
    g.s2 ^= g.s0
    g.s3 ^= g.s1
    g.s1 ^= g.s2
    g.s0 ^= g.s3
    g.s2 ^= t
    g.s3 = rotl(g.s3, 45)
    return result


cdef inline double rng_uniform(Rng* g) noexcept nogil:
    return (<double>(rng_next(g) >> 11) + 0.5) * TWO_M53


cdef inline double rng_exp(Rng* g) noexcept nogil:
    return -log(rng_uniform(g))


cdef double rng_normal(Rng* g) noexcept nogil:
    cdef double u, v, s
    while True:
        u = 2.0 * rng_uniform(g) - 1.0
        v = 2.0 * rng_uniform(g) - 1.0
        s = u * u + v * v
        if 0.0 < s and s < 1.0:
            return u * sqrt(-2.0 * log(s) / s)


cdef double rng_gamma(Rng* g, double shape) noexcept nogil:
    cdef double d, c, z, v, u, x
    if shape < 1.0:
        x = rng_gamma(g, shape + 1.0)
        return x * pow(rng_uniform(g), 1.0 / shape)
    d = shape - 1.0 / 3.0
    c = 1.0 / sqrt(9.0 * d)
    while True:
        z = rng_normal(g)
        v = 1.0 + c * z
        if v <= 0.0:
            continue
        v = v * v * v
        u = rng_uniform(g)
        if u < 1.0 - 0.0331 * z * z * z * z:
            return d * v
        if log(u) < 0.5 * z * z + d * (1.0 - v + log(v)):
            return d * v


cdef inline int choice_cum(Rng* g, const double* cum, int n) noexcept nogil:
    cdef double u = rng_uniform(g)
    cdef int idx
    for idx in range(n):
        if u < cum[idx]:
            return idx
    return n - 1


cdef struct Stream:
    int kind
    double mean
    double shape
    int64_t count
    int phase
    int nphase
    Rng rng
    const double* rates
    const double* trans_cum


cdef void stream_init(Stream* s, int kind, double mean, double shape, int nphase,
                      const double* rates, const double* trans_cum,
                      const double* init_cum, uint64_t seed) noexcept nogil:
    s.kind = kind
    s.mean = mean
    s.shape = shape
    s.count = 0
    s.nphase = nphase
    s.rates = rates
    s.trans_cum = trans_cum
    rng_seed(&s.rng, seed)
    s.phase = 0
    if kind == 3:
        s.phase = choice_cum(&s.rng, init_cum, nphase)


cdef double stream_next(Stream* s, double previous) noexcept nogil:
    cdef double gap
    s.count += 1
    if s.kind == 0:
        return previous + s.mean * rng_exp(&s.rng)
    if s.kind == 1:
        return previous + (s.mean / s.shape) * rng_gamma(&s.rng, s.shape)
    if s.kind == 2:
        return <double>s.count * s.mean
    gap = rng_exp(&s.rng) / s.rates[s.phase]
    s.phase = choice_cum(&s.rng, s.trans_cum + s.phase * s.nphase, s.nphase)
    return previous + gap


def _tables_arrays(tables):
    rates = np.ascontiguousarray(tables.rates, dtype=np.float64)
    trans = np.ascontiguousarray(tables.trans_cum, dtype=np.float64).ravel()
    init = np.ascontiguousarray(tables.init_cum, dtype=np.float64)
    return rates, trans, init


def stream_epochs(tables, seed, Py_ssize_t n):
    cdef double[::1] rates, trans, init
    rates, trans, init = _tables_arrays(tables)
    cdef Stream s
    stream_init(&s, tables.kind, tables.mean, tables.shape, <int>rates.shape[0],
                &rates[0], &trans[0], &init[0], <uint64_t>seed)
    out = np.empty(n)
    cdef double[::1] o = out
    cdef double prev = 0.0
    cdef Py_ssize_t m
    for m in range(n):
        prev = stream_next(&s, prev)
        o[m] = prev
    return out


cdef inline double iq_of(double level, double speed, double s) noexcept nogil:
    return level * (s + expm1(-speed * s) / speed)


def simulate(inp, strict=False):
    cdef int r = inp.r
    cdef int k = inp.k
    cdef int L = inp.L
    cdef int L1 = L + 1
    cdef int L2 = L + 2
    cdef double T = inp.horizon
    cdef double level = inp.q_level
    cdef double speed = inp.q_speed
    cdef int discipline = inp.discipline
    cdef bint keep_records = inp.keep_records
    cdef bint keep_driver = inp.keep_driver

    cdef double[::1] lam = np.ascontiguousarray(inp.lam, dtype=np.float64)
    cdef double[:, ::1] route_cum = np.ascontiguousarray(inp.route_cum, dtype=np.float64)
    cdef double[::1] grid = np.ascontiguousarray(inp.grid, dtype=np.float64)
    cdef int G = grid.shape[0]
    cdef int64_t[::1] sigma = np.ascontiguousarray(inp.N_i, dtype=np.int64).copy()
    cdef int64_t N = 0
    cdef int i, j, lv, g, src, jmin, last_pos, v, w
    for i in range(r):
        N += sigma[i]

    # keep the per-stream tables alive for the duration of the call
    keep = [_tables_arrays(tb) for tb in inp.streams]
    cdef vector[Stream] streams
    streams.resize(k)
    cdef double[::1] ra, tr, ini
    for j in range(k):
        ra, tr, ini = keep[j]
        tb = inp.streams[j]
        stream_init(&streams[j], tb.kind, tb.mean, tb.shape, <int>ra.shape[0],
                    &ra[0], &tr[0], &ini[0], <uint64_t>inp.stream_seeds[j])

    cdef Rng route
    rng_seed(&route, <uint64_t>inp.route_seed)

    cdef int64_t[:, ::1] qij = np.zeros((r, k), dtype=np.int64)
    cdef int64_t[:, ::1] aij = np.zeros((r, k), dtype=np.int64)
    cdef int64_t[::1] qlen = np.zeros(k, dtype=np.int64)
    cdef int64_t[::1] A = np.zeros(k, dtype=np.int64)
    cdef int64_t[::1] D = np.zeros(k, dtype=np.int64)
    cdef int64_t[::1] S = np.zeros(k, dtype=np.int64)
    cdef int64_t[:, ::1] up = np.zeros((k, L1), dtype=np.int64)
    cdef int64_t[:, ::1] down = np.zeros((k, L1), dtype=np.int64)
    cdef double[:, ::1] acc_time = np.zeros((k, L2))
    cdef double[:, ::1] acc_q = np.zeros((k, L2))
    cdef double[:, ::1] acc_pd = np.zeros((k, L2))
    cdef double[::1] last_change = np.zeros(k)
    cdef double[::1] last_iq = np.zeros(k)
    cdef double[::1] last_pd_change = np.zeros(k)
    cdef int64_t[::1] last_pd = np.zeros(k, dtype=np.int64)
    cdef int64_t[::1] has_pd = np.zeros(k, dtype=np.int64)
    cdef double[::1] next_ep = np.zeros(k)

    # ring buffers of server tags, one per client station
    cdef int64_t cap = N + 1
    cdef vector[int] buf
    buf.resize(k * cap)
    cdef vector[int64_t] head
    head.resize(k, 0)

    cdef vector[vector[double]] rec_t
    cdef vector[vector[int64_t]] rec_v
    cdef vector[vector[double]] drv_t
    cdef vector[vector[int64_t]] drv_d
    rec_t.resize(k)
    rec_v.resize(k)
    drv_t.resize(k)
    drv_d.resize(k)

    out_Q_a = np.zeros((G, k), dtype=np.int64)
    out_Qij_a = np.zeros((G, r, k), dtype=np.int64)
    out_sigma_a = np.zeros((G, r), dtype=np.int64)
    out_pd_a = np.zeros((G, k), dtype=np.int64)
    out_pd_has_a = np.zeros((G, k), dtype=np.uint8)
    out_occ_a = np.zeros((G, k, L2))
    out_occ_q_a = np.zeros((G, k, L2))
    out_pd_time_a = np.zeros((G, k, L2))
    cdef int64_t[:, ::1] out_Q = out_Q_a
    cdef int64_t[:, :, ::1] out_Qij = out_Qij_a
    cdef int64_t[:, ::1] out_sigma = out_sigma_a
    cdef int64_t[:, ::1] out_pd = out_pd_a
    cdef unsigned char[:, ::1] out_pd_has = out_pd_has_a
    cdef double[:, :, ::1] out_occ = out_occ_a
    cdef double[:, :, ::1] out_occ_q = out_occ_q_a
    cdef double[:, :, ::1] out_pd_time = out_pd_time_a

    for j in range(k):
        next_ep[j] = stream_next(&streams[j], 0.0)

    cdef double t = 0.0, te, ts, tc, R, u, acc, iq_t, tg, a, b, c
    cdef int64_t qpre, idx, pos, lastp
    cdef bint server_event
    cdef int64_t anomalies = 0, events = 0
    g = 0

    while True:
        R = 0.0
        last_pos = -1
        for i in range(r):
            R += lam[i] * <double>sigma[i]
            if sigma[i] > 0:
                last_pos = i
        jmin = 0
        tc = next_ep[0]
        for j in range(1, k):
            if next_ep[j] < tc:
                tc = next_ep[j]
                jmin = j
        if R > 0.0:
            ts = t + rng_exp(&route) / R
        else:
            ts = INFINITY
        if ts < tc:
            te = ts
            server_event = True
        else:
            te = tc
            server_event = False
            if ts == tc:
                anomalies += 1
        if te > T:
            break
        while g < G and grid[g] < te:
            _snapshot(g, grid[g], r, k, L1, L2, level, speed, sigma, qij, qlen,
                      last_pd, has_pd, acc_time, acc_q, acc_pd, last_change, last_iq,
                      last_pd_change, out_Q, out_Qij, out_sigma, out_pd, out_pd_has,
                      out_occ, out_occ_q, out_pd_time)
            g += 1
        events += 1

        if server_event:
            u = rng_uniform(&route) * R
            src = last_pos
            acc = 0.0
            for i in range(r):
                acc += lam[i] * <double>sigma[i]
                if u < acc:
                    src = i
                    break
            j = choice_cum(&route, &route_cum[src, 0], k)
            qpre = qlen[j]
            if qpre < L1:
                up[j, qpre] += 1
            iq_t = iq_of(level, speed, te)
            v = <int>(qpre if qpre < L1 else L1)
            acc_time[j, v] = acc_time[j, v] + (te - last_change[j])
            acc_q[j, v] = acc_q[j, v] + (iq_t - last_iq[j])
            last_change[j] = te
            last_iq[j] = iq_t
            sigma[src] -= 1
            qlen[j] = qpre + 1
            buf[j * cap + (head[j] + qpre) % cap] = src
            qij[src, j] += 1
            aij[src, j] += 1
            A[j] += 1
            if keep_driver:
                drv_t[j].push_back(te)
                drv_d[j].push_back(1)
        else:
            j = jmin
            S[j] += 1
            qpre = qlen[j]
            w = <int>(last_pd[j] if last_pd[j] < L1 else L1)
            acc_pd[j, w] = acc_pd[j, w] + (te - last_pd_change[j])
            last_pd_change[j] = te
            last_pd[j] = qpre
            has_pd[j] = 1
            if keep_records:
                rec_t[j].push_back(te)
                rec_v[j].push_back(qpre)
            if keep_driver:
                drv_t[j].push_back(te)
                drv_d[j].push_back(-1)
            if qpre > 0:
                if qpre < L1:
                    down[j, qpre] += 1
                iq_t = iq_of(level, speed, te)
                v = <int>(qpre if qpre < L1 else L1)
                acc_time[j, v] = acc_time[j, v] + (te - last_change[j])
                acc_q[j, v] = acc_q[j, v] + (iq_t - last_iq[j])
                last_change[j] = te
                last_iq[j] = iq_t
                if discipline == 0:
                    pos = head[j]
                    src = buf[j * cap + pos]
                    head[j] = (head[j] + 1) % cap
                elif discipline == 1:
                    src = buf[j * cap + (head[j] + qpre - 1) % cap]
                else:
                    idx = <int64_t>(rng_uniform(&route) * <double>qpre)
                    pos = (head[j] + idx) % cap
                    lastp = (head[j] + qpre - 1) % cap
                    src = buf[j * cap + pos]
                    buf[j * cap + pos] = buf[j * cap + lastp]
                qlen[j] = qpre - 1
                qij[src, j] -= 1
                sigma[src] += 1
                D[j] += 1
            next_ep[j] = stream_next(&streams[j], te)
        t = te

    while g < G:
        _snapshot(g, grid[g], r, k, L1, L2, level, speed, sigma, qij, qlen,
                  last_pd, has_pd, acc_time, acc_q, acc_pd, last_change, last_iq,
                  last_pd_change, out_Q, out_Qij, out_sigma, out_pd, out_pd_has,
                  out_occ, out_occ_q, out_pd_time)
        g += 1

    result = {
        "Q": out_Q_a, "Qij": out_Qij_a, "sigma": out_sigma_a,
        "predep": out_pd_a, "predep_has": out_pd_has_a.astype(bool),
        "occ_time": out_occ_a, "occ_q": out_occ_q_a, "predep_time": out_pd_time_a,
        "up": np.asarray(up), "down": np.asarray(down),
        "final_Q": np.asarray(qlen), "A": np.asarray(A), "D": np.asarray(D),
        "S": np.asarray(S), "Aij": np.asarray(aij),
        "anomalies": int(anomalies), "events": int(events),
        "records": None, "driver": None,
    }
    if keep_records:
        result["records"] = [
            (np.array(rec_t[j], dtype=float), np.array(rec_v[j], dtype=np.int64)) for j in range(k)
        ]
    if keep_driver:
        result["driver"] = [
            (np.array(drv_t[j], dtype=float), np.array(drv_d[j], dtype=np.int64)) for j in range(k)
        ]
    return result


cdef void _snapshot(int g, double tg, int r, int k, int L1, int L2, double level, double speed,
                    int64_t[::1] sigma, int64_t[:, ::1] qij, int64_t[::1] qlen,
                    int64_t[::1] last_pd, int64_t[::1] has_pd,
                    double[:, ::1] acc_time, double[:, ::1] acc_q, double[:, ::1] acc_pd,
                    double[::1] last_change, double[::1] last_iq, double[::1] last_pd_change,
                    int64_t[:, ::1] out_Q, int64_t[:, :, ::1] out_Qij, int64_t[:, ::1] out_sigma,
                    int64_t[:, ::1] out_pd, unsigned char[:, ::1] out_pd_has,
                    double[:, :, ::1] out_occ, double[:, :, ::1] out_occ_q,
                    double[:, :, ::1] out_pd_time) noexcept:
    cdef double iq_t = iq_of(level, speed, tg)
    cdef int i, j, lv, v, w
    cdef double a, b, c
    for i in range(r):
        out_sigma[g, i] = sigma[i]
        for j in range(k):
            out_Qij[g, i, j] = qij[i, j]
    for j in range(k):
        out_Q[g, j] = qlen[j]
        out_pd[g, j] = last_pd[j]
        out_pd_has[g, j] = <unsigned char>has_pd[j]
        v = <int>(qlen[j] if qlen[j] < L1 else L1)
        w = <int>(last_pd[j] if last_pd[j] < L1 else L1)
        for lv in range(L2):
            a = acc_time[j, lv]
            b = acc_q[j, lv]
            c = acc_pd[j, lv]
            if lv == v:
                a = a + (tg - last_change[j])
                b = b + (iq_t - last_iq[j])
            if lv == w:
                c = c + (tg - last_pd_change[j])
            out_occ[g, j, lv] = a
            out_occ_q[g, j, lv] = b
            out_pd_time[g, j, lv] = c
