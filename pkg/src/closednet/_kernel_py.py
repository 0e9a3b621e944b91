"""Pure-Python replication kernel.

Reference implementation of the event loop; ``_kernel_c.pyx`` performs the
same floating-point operations in the same order so both produce identical
trajectories for identical inputs.
"""

from __future__ import annotations

import math
from collections import deque

import numpy as np

from .pointproc import GapSampler
from .rng import Xoshiro256

FIFO, LIFO, RANDOM = 0, 1, 2


def stream_epochs(tables, seed: int, n: int) -> np.ndarray:
    s = GapSampler(tables, seed)
    out = np.empty(n)
    prev = 0.0
    for m in range(n):
        prev = s.next_epoch(prev)
        out[m] = prev
    return out


def simulate(inp, strict: bool = False) -> dict:
    r, k = inp.r, inp.k
    L = inp.L
    L1, L2 = L + 1, L + 2
    lam = [float(x) for x in inp.lam]
    route_cum = [[float(x) for x in row] for row in inp.route_cum]
    grid = [float(x) for x in inp.grid]
    G = len(grid)
    T = float(inp.horizon)
    level, speed = float(inp.q_level), float(inp.q_speed)
    discipline = inp.discipline
    N = int(sum(inp.N_i))

    sigma = [int(x) for x in inp.N_i]
    qij = [[0] * k for _ in range(r)]
    aij = [[0] * k for _ in range(r)]
    qlen = [0] * k
    queues = [deque() if discipline == FIFO else [] for _ in range(k)]
    A = [0] * k
    D = [0] * k
    S = [0] * k
    up = [[0] * L1 for _ in range(k)]
    down = [[0] * L1 for _ in range(k)]

    acc_time = [[0.0] * L2 for _ in range(k)]
    acc_q = [[0.0] * L2 for _ in range(k)]
    acc_pd = [[0.0] * L2 for _ in range(k)]
    last_change = [0.0] * k
    last_iq = [0.0] * k
    last_pd_change = [0.0] * k
    last_pd = [0] * k
    has_pd = [0] * k

    route = Xoshiro256(inp.route_seed)
    samplers = [GapSampler(inp.streams[j], inp.stream_seeds[j]) for j in range(k)]
    next_ep = [samplers[j].next_epoch(0.0) for j in range(k)]

    keep_records = inp.keep_records
    keep_driver = inp.keep_driver
    rec_t = [[] for _ in range(k)]
    rec_v = [[] for _ in range(k)]
    drv_t = [[] for _ in range(k)]
    drv_d = [[] for _ in range(k)]

    out_Q = np.zeros((G, k), dtype=np.int64)
    out_Qij = np.zeros((G, r, k), dtype=np.int64)
    out_sigma = np.zeros((G, r), dtype=np.int64)
    out_pd = np.zeros((G, k), dtype=np.int64)
    out_pd_has = np.zeros((G, k), dtype=np.uint8)
    out_occ = np.zeros((G, k, L2))
    out_occ_q = np.zeros((G, k, L2))
    out_pd_time = np.zeros((G, k, L2))

    def iq(s):
        return level * (s + math.expm1(-speed * s) / speed)

    def snapshot(g, tg):
        iq_t = iq(tg)
        for i in range(r):
            out_sigma[g, i] = sigma[i]
            for j in range(k):
                out_Qij[g, i, j] = qij[i][j]
        for j in range(k):
            out_Q[g, j] = qlen[j]
            out_pd[g, j] = last_pd[j]
            out_pd_has[g, j] = has_pd[j]
            v = qlen[j] if qlen[j] < L1 else L1
            w = last_pd[j] if last_pd[j] < L1 else L1
            for lv in range(L2):
                a = acc_time[j][lv]
                b = acc_q[j][lv]
                c = acc_pd[j][lv]
                if lv == v:
                    a = a + (tg - last_change[j])
                    b = b + (iq_t - last_iq[j])
                if lv == w:
                    c = c + (tg - last_pd_change[j])
                out_occ[g, j, lv] = a
                out_occ_q[g, j, lv] = b
                out_pd_time[g, j, lv] = c

    def close(j, te, iq_te):
        v = qlen[j] if qlen[j] < L1 else L1
        acc_time[j][v] = acc_time[j][v] + (te - last_change[j])
        acc_q[j][v] = acc_q[j][v] + (iq_te - last_iq[j])
        last_change[j] = te
        last_iq[j] = iq_te

    t = 0.0
    g = 0
    anomalies = 0
    events = 0
    while True:
        R = 0.0
        last_pos = -1
        for i in range(r):
            R += lam[i] * sigma[i]
            if sigma[i] > 0:
                last_pos = i
        jmin = 0
        tc = next_ep[0]
        for j in range(1, k):
            if next_ep[j] < tc:
                tc = next_ep[j]
                jmin = j
        if R > 0.0:
            ts = t + route.exponential() / R
        else:
            ts = math.inf
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
            snapshot(g, grid[g])
            g += 1
        events += 1

        if server_event:
            u = route.uniform() * R
            src = last_pos
            acc = 0.0
            for i in range(r):
                acc += lam[i] * sigma[i]
                if u < acc:
                    src = i
                    break
            j = route.choice_cum(route_cum[src], k)
            qpre = qlen[j]
            if qpre < L1:
                up[j][qpre] += 1
            close(j, te, iq(te))
            sigma[src] -= 1
            qlen[j] = qpre + 1
            queues[j].append(src)
            qij[src][j] += 1
            aij[src][j] += 1
            A[j] += 1
            if keep_driver:
                drv_t[j].append(te)
                drv_d[j].append(1)
        else:
            j = jmin
            S[j] += 1
            qpre = qlen[j]
            w = last_pd[j] if last_pd[j] < L1 else L1
            acc_pd[j][w] = acc_pd[j][w] + (te - last_pd_change[j])
            last_pd_change[j] = te
            last_pd[j] = qpre
            has_pd[j] = 1
            if keep_records:
                rec_t[j].append(te)
                rec_v[j].append(qpre)
            if keep_driver:
                drv_t[j].append(te)
                drv_d[j].append(-1)
            if qpre > 0:
                if qpre < L1:
                    down[j][qpre] += 1
                close(j, te, iq(te))
                qu = queues[j]
                if discipline == FIFO:
                    src = qu.popleft()
                elif discipline == LIFO:
                    src = qu.pop()
                else:
                    idx = int(route.uniform() * qpre)
                    src = qu[idx]
                    qu[idx] = qu[-1]
                    qu.pop()
                qlen[j] = qpre - 1
                qij[src][j] -= 1
                sigma[src] += 1
                D[j] += 1
            next_ep[j] = samplers[j].next_epoch(te)
        t = te
        if strict:
            assert sum(sigma) + sum(qlen) == N
            for jj in range(k):
                assert A[jj] - D[jj] == qlen[jj] == len(queues[jj])
                assert sum(qij[i][jj] for i in range(r)) == qlen[jj]

    while g < G:
        snapshot(g, grid[g])
        g += 1

    result = {
        "Q": out_Q, "Qij": out_Qij, "sigma": out_sigma,
        "predep": out_pd, "predep_has": out_pd_has.astype(bool),
        "occ_time": out_occ, "occ_q": out_occ_q, "predep_time": out_pd_time,
        "up": np.array(up, dtype=np.int64), "down": np.array(down, dtype=np.int64),
        "final_Q": np.array(qlen, dtype=np.int64),
        "A": np.array(A, dtype=np.int64), "D": np.array(D, dtype=np.int64),
        "S": np.array(S, dtype=np.int64), "Aij": np.array(aij, dtype=np.int64),
        "anomalies": anomalies, "events": events,
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
