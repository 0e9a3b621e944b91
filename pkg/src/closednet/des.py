"""Exact discrete-event simulation of the closed network.

Units carry the index of their home server station.  A server station
holding ``m`` units completes service at aggregate rate ``lambda_i * m``
(one exponential alarm per station, exact by memorylessness); the unit then
joins client ``j`` with probability ``p[i][j]``.  Client stations serve only
at the epochs of their own point process; an epoch that finds the queue
empty is lost.  A served unit returns to its home server instantly.

The event loop runs in a compiled kernel when available and in a pure
Python mirror otherwise; set ``CLOSEDNET_BACKEND=python`` to force the
mirror.  Both produce identical trajectories.
"""

from __future__ import annotations

import dataclasses
import heapq
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from typing import Optional, Sequence

import numpy as np

from . import _kernel_py
from .model import NetworkSpec, derive, require_valid
from .pointproc import _cumulative, stream_tables
from .rng import Xoshiro256, derive_seed

log = logging.getLogger(__name__)

try:
    from . import _kernel_c
except ImportError:  # pragma: no cover - depends on the build
    _kernel_c = None

DISCIPLINES = {"fifo": 0, "lifo": 1, "random": 2}


def available_backends() -> list[str]:
    return (["cython"] if _kernel_c is not None else []) + ["python"]


def default_backend() -> str:
    forced = os.environ.get("CLOSEDNET_BACKEND")
    if forced:
        if forced not in available_backends():
            raise RuntimeError(f"backend {forced!r} is not available")
        return forced
    return available_backends()[0]


BACKEND = default_backend()


def _kernel(backend: Optional[str]):
    name = backend or BACKEND
    if name == "cython":
        if _kernel_c is None:
            raise RuntimeError("compiled kernel is not built")
        return _kernel_c
    if name == "python":
        return _kernel_py
    raise ValueError(f"unknown backend {name!r}")


@dataclasses.dataclass(frozen=True)
class SimConfig:
    spec: NetworkSpec
    horizon: float
    sample_grid: tuple
    seed: int = 0
    record_levels: int = 10
    discipline: str = "fifo"
    keep_records: bool = True
    keep_driver: bool = False

    def __post_init__(self):
        grid = tuple(float(x) for x in self.sample_grid)
        object.__setattr__(self, "sample_grid", grid)
        if not grid:
            raise ValueError("sample_grid must not be empty")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ValueError("sample_grid must be strictly increasing")
        if grid[0] < 0:
            raise ValueError("sample times must be nonnegative")
        if self.horizon < grid[-1]:
            raise ValueError("horizon must be at least the last sample time")
        if self.record_levels < 1:
            raise ValueError("record_levels must be >= 1")
        if self.discipline not in DISCIPLINES:
            raise ValueError(f"discipline must be one of {sorted(DISCIPLINES)}")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must fit in 64 unsigned bits")


def uniform_grid(t_max: float, points: int) -> tuple:
    """``points`` equally spaced times on [0, t_max], computed as ``n * t_max / (points - 1)``."""
    if points < 2:
        return (0.0,)
    return tuple(n * t_max / (points - 1) for n in range(points))


@dataclasses.dataclass
class KernelInput:
    r: int
    k: int
    N_i: np.ndarray
    lam: np.ndarray
    route_cum: np.ndarray
    streams: list
    route_seed: int
    stream_seeds: list
    grid: np.ndarray
    horizon: float
    L: int
    discipline: int
    q_level: float
    q_speed: float
    keep_records: bool
    keep_driver: bool


def kernel_input(config: SimConfig, rep: int) -> KernelInput:
    spec = config.spec
    require_valid(spec)
    params = derive(spec)
    b = spec.k - 1
    rho_k = float(params.rho[b])
    level = max(0.0, 1.0 - 1.0 / rho_k)
    return KernelInput(
        r=spec.r,
        k=spec.k,
        N_i=np.asarray(spec.N_i, dtype=np.int64),
        lam=np.asarray(spec.lam, dtype=float),
        route_cum=_cumulative(spec.p),
        streams=[stream_tables(spec.stream_spec(j)) for j in range(spec.k)],
        route_seed=derive_seed(config.seed, 0, rep),
        stream_seeds=[derive_seed(config.seed, j + 1, rep) for j in range(spec.k)],
        grid=np.asarray(config.sample_grid, dtype=float),
        horizon=float(config.horizon),
        L=int(config.record_levels),
        discipline=DISCIPLINES[config.discipline],
        q_level=level,
        q_speed=rho_k * float(spec.mu[b]),
        keep_records=bool(config.keep_records),
        keep_driver=bool(config.keep_driver),
    )


@dataclasses.dataclass
class Trajectory:
    """Observables of one replication.

    Grid arrays are indexed by sample index first.  ``occ_time[g, j, l]`` is
    the time on ``[0, grid[g]]`` that client ``j`` held exactly ``l`` units
    (the last bin collects ``l > L``); ``occ_q`` weights the same time by the
    fluid bottleneck path ``q(s)``; ``predep_time[g, j, l]`` is the time on
    ``[0, grid[g]]`` during which the queue seen just before the latest epoch
    was ``l``.  ``up[j, l]`` counts arrivals finding ``l`` units and
    ``down[j, l]`` epochs finding ``l`` units, for ``l <= L``.
    """

    rep: int
    grid: np.ndarray
    Q: np.ndarray
    Qij: np.ndarray
    sigma: np.ndarray
    predep: np.ndarray
    predep_has: np.ndarray
    occ_time: np.ndarray
    occ_q: np.ndarray
    predep_time: np.ndarray
    up: np.ndarray
    down: np.ndarray
    final_Q: np.ndarray
    A: np.ndarray
    D: np.ndarray
    S: np.ndarray
    Aij: np.ndarray
    anomalies: int
    events: int
    records: Optional[list] = None
    driver: Optional[list] = None

    @property
    def L(self) -> int:
        return self.up.shape[1] - 1

    def final_at_least(self) -> np.ndarray:
        """``[j, l]`` -> 1 if ``Q_j(T) >= l`` for ``l = 0..L``."""
        levels = np.arange(self.L + 1)
        return (self.final_Q[:, None] >= levels[None, :]).astype(np.int64)

    def grid_index(self, t: float) -> int:
        idx = np.nonzero(np.isclose(self.grid, t, rtol=0, atol=1e-9))[0]
        if idx.size == 0:
            raise ValueError(f"t = {t} is not on the sample grid")
        return int(idx[0])

    def same_as(self, other: "Trajectory") -> bool:
        for f in dataclasses.fields(self):
            a, b = getattr(self, f.name), getattr(other, f.name)
            if f.name in ("records", "driver"):
                if (a is None) != (b is None):
                    return False
                if a is not None and not all(
                    np.array_equal(x0, y0) and np.array_equal(x1, y1) for (x0, x1), (y0, y1) in zip(a, b)
                ):
                    return False
            elif isinstance(a, np.ndarray):
                if not np.array_equal(a, b):
                    return False
            elif a != b:
                return False
        return True


def run_replication(config: SimConfig, rep: int = 0, backend: Optional[str] = None,
                    strict: bool = False) -> Trajectory:
    inp = kernel_input(config, rep)
    kern = _kernel(backend)
    if strict:
        out = _kernel_py.simulate(inp, strict=True)
    else:
        out = kern.simulate(inp)
    return Trajectory(rep=rep, grid=inp.grid.copy(), **out)


def _run_chunk(args):
    config, reps, backend = args
    return [run_replication(config, m, backend) for m in reps]


def replicate(config: SimConfig, n_reps: int, workers: int = 1,
              backend: Optional[str] = None) -> list[Trajectory]:
    """Independent replications ``0..n_reps-1``; order and content do not depend on ``workers``."""
    if n_reps < 1:
        raise ValueError("n_reps must be >= 1")
    backend = backend or BACKEND
    if workers <= 1 or n_reps == 1:
        return [run_replication(config, m, backend) for m in range(n_reps)]
    chunks = [list(range(w, n_reps, workers)) for w in range(workers)]
    chunks = [c for c in chunks if c]
    with ProcessPoolExecutor(max_workers=len(chunks)) as pool:
        parts = list(pool.map(_run_chunk, [(config, c, backend) for c in chunks]))
    merged = {t.rep: t for part in parts for t in part}
    return [merged[m] for m in range(n_reps)]


def run_per_unit(config: SimConfig, rep: int = 0) -> dict:
    """Slow reference mode with one exponential timer per unit.

    Each unit at server ``i`` carries its own exponential(``lambda_i``)
    clock, as in the thinned unit-stream construction.  Used to check the
    aggregate-alarm kernel in distribution at small N.  Returns the grid
    queue lengths, server counts and crossing counters.
    """
    spec = config.spec
    inp = kernel_input(config, rep)
    rng = Xoshiro256(inp.route_seed)
    from .pointproc import GapSampler

    samplers = [GapSampler(inp.streams[j], inp.stream_seeds[j]) for j in range(spec.k)]
    k, r, L = spec.k, spec.r, config.record_levels
    heap: list = []
    uid = 0
    for i in range(r):
        for _ in range(spec.N_i[i]):
            heapq.heappush(heap, (rng.exponential() / spec.lam[i], uid, i))
            uid += 1
    epochs = [(samplers[j].next_epoch(0.0), j) for j in range(k)]
    heapq.heapify(epochs)
    queues = [[] for _ in range(k)]
    sigma = list(spec.N_i)
    grid = list(config.sample_grid)
    G = len(grid)
    Q = np.zeros((G, k), dtype=np.int64)
    S_out = np.zeros((G, r), dtype=np.int64)
    up = np.zeros((k, L + 1), dtype=np.int64)
    down = np.zeros((k, L + 1), dtype=np.int64)
    g = 0
    while True:
        ts = heap[0][0] if heap else math.inf
        tc = epochs[0][0]
        te = min(ts, tc)
        if te > config.horizon:
            break
        while g < G and grid[g] < te:
            Q[g] = [len(q) for q in queues]
            S_out[g] = sigma
            g += 1
        if tc <= ts:
            _, j = heapq.heappop(epochs)
            qpre = len(queues[j])
            if qpre > 0:
                if qpre <= L:
                    down[j, qpre] += 1
                i = queues[j].pop(0)
                sigma[i] += 1
                heapq.heappush(heap, (tc + rng.exponential() / spec.lam[i], uid, i))
                uid += 1
            heapq.heappush(epochs, (samplers[j].next_epoch(tc), j))
        else:
            _, _, i = heapq.heappop(heap)
            j = rng.choice_cum(inp.route_cum[i], k)
            qpre = len(queues[j])
            if qpre <= L:
                up[j, qpre] += 1
            queues[j].append(i)
            sigma[i] -= 1
    while g < G:
        Q[g] = [len(q) for q in queues]
        S_out[g] = sigma
        g += 1
    return {"Q": Q, "sigma": S_out, "up": up, "down": down,
            "final_Q": np.array([len(q) for q in queues], dtype=np.int64)}


__all__: Sequence[str] = [
    "SimConfig", "Trajectory", "run_replication", "replicate", "run_per_unit",
    "uniform_grid", "BACKEND", "available_backends",
]
