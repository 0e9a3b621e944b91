"""Estimators over replicated trajectories and limit-law comparisons."""

from __future__ import annotations

import dataclasses
import math
from typing import Sequence

import numpy as np

from . import fluid
from .des import Trajectory
from .model import DerivedParams


@dataclasses.dataclass
class DistEstimate:
    station: int
    t: float
    pmf: np.ndarray  # levels 0..L
    stderr: np.ndarray
    n_reps: int
    tail: float

    def full(self) -> np.ndarray:
        """pmf with the tail mass appended as a last bin."""
        return np.append(self.pmf, self.tail)

    def to_dict(self) -> dict:
        return {
            "station": self.station + 1,
            "t": self.t,
            "pmf": self.pmf.tolist(),
            "stderr": self.stderr.tolist(),
            "tail": self.tail,
            "n_reps": self.n_reps,
        }


@dataclasses.dataclass
class PreDepartureEstimate(DistEstimate):
    no_epoch_fraction: float = 0.0


@dataclasses.dataclass
class IntegralEstimate:
    station: int
    t: float
    lhs: np.ndarray
    rhs: np.ndarray
    lhs_stderr: np.ndarray
    rhs_stderr: np.ndarray
    diff_stderr: np.ndarray
    n_reps: int


def _frequencies(values: np.ndarray, L: int, station: int, t: float, cls=DistEstimate, **extra):
    n = values.size
    counts = np.bincount(np.minimum(values, L + 1), minlength=L + 2).astype(float)
    p = counts / n
    pmf = p[: L + 1]
    tail = 1.0 - pmf.sum()
    stderr = np.sqrt(pmf * (1.0 - pmf) / n)
    return cls(station, float(t), pmf, stderr, n, float(tail), **extra)


def _grid_index(trajectories: Sequence[Trajectory], t: float) -> int:
    if not trajectories:
        raise ValueError("no trajectories")
    return trajectories[0].grid_index(t)


def pmf_at(trajectories: Sequence[Trajectory], j: int, t: float, L: int = 10) -> DistEstimate:
    g = _grid_index(trajectories, t)
    values = np.array([tr.Q[g, j] for tr in trajectories], dtype=np.int64)
    return _frequencies(values, L, j, t)


def predeparture_values(trajectories: Sequence[Trajectory], j: int, t: float) -> tuple[np.ndarray, int]:
    """Queue seen just before the last epoch at or before ``t``, one per replication.

    Uses the full epoch records when present (binary search), otherwise the
    value captured at the sample time.  Replications with no epoch yet
    contribute the initial queue length 0.
    """
    values = np.empty(len(trajectories), dtype=np.int64)
    missing = 0
    for n, tr in enumerate(trajectories):
        if tr.records is not None:
            times, seen = tr.records[j]
            idx = int(np.searchsorted(times, t, side="right")) - 1
            if idx < 0:
                values[n] = 0
                missing += 1
            else:
                values[n] = seen[idx]
        else:
            g = tr.grid_index(t)
            values[n] = tr.predep[g, j]
            missing += int(not tr.predep_has[g, j])
    return values, missing


def predeparture_pmf_at(trajectories: Sequence[Trajectory], j: int, t: float,
                        L: int = 10) -> PreDepartureEstimate:
    values, missing = predeparture_values(trajectories, j, t)
    return _frequencies(values, L, j, t, PreDepartureEstimate,
                        no_epoch_fraction=missing / max(1, values.size))


def _mean_se(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    n = x.shape[0]
    mean = x.mean(axis=0)
    se = x.std(axis=0, ddof=1) / math.sqrt(n) if n > 1 else np.zeros_like(mean)
    return mean, se


def theorem1_integrals(trajectories: Sequence[Trajectory], j: int, t: float, L: int,
                       params: DerivedParams, form: str = "beta_product",
                       rho_scale: float = 1.0) -> IntegralEstimate:
    """Both sides of the integral relation for levels ``0..L``.

    ``lhs[l]`` integrates ``rho_j(s) 1{Q_j(s) = l}`` and ``rhs[l]`` integrates
    ``1{Q_j[S*(s)] = l + 1}`` over ``[0, t]``, each exactly along the event
    path and averaged over replications.  ``rho_scale`` multiplies the
    utilization (negative controls only).
    """
    g = _grid_index(trajectories, t)
    base, slope = fluid.rho_coefficients(params, j, form)
    base, slope = base * rho_scale, slope * rho_scale
    Lmax = trajectories[0].occ_time.shape[2] - 2
    if L > Lmax - 1:
        raise ValueError(f"L must be at most {Lmax - 1} for these trajectories")
    lhs_r = np.array([base * tr.occ_time[g, j, : L + 1] - slope * tr.occ_q[g, j, : L + 1]
                      for tr in trajectories])
    rhs_r = np.array([tr.predep_time[g, j, 1: L + 2] for tr in trajectories])
    lhs, lhs_se = _mean_se(lhs_r)
    rhs, rhs_se = _mean_se(rhs_r)
    _, diff_se = _mean_se(lhs_r - rhs_r)
    return IntegralEstimate(j, float(t), lhs, rhs, lhs_se, rhs_se, diff_se, len(trajectories))


def tv_distance(p, q) -> float:
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise ValueError("pmfs must share a support")
    return 0.5 * float(np.abs(p - q).sum())


def geometric_pmf(rho: float, L: int) -> np.ndarray:
    """``(1 - rho) rho**l`` for ``l = 0..L`` followed by the tail mass ``rho**(L+1)``."""
    levels = np.arange(L + 1)
    body = (1.0 - rho) * rho ** levels
    return np.append(body, rho ** (L + 1))


@dataclasses.dataclass
class InvarianceReport:
    station: int
    t1: float
    t2: float
    tv: float
    threshold: float
    burn_in: float
    passed: bool

    def to_dict(self) -> dict:
        return dataclasses.asdict(self) | {"station": self.station + 1}


def time_invariance_check(trajectories: Sequence[Trajectory], j: int, t1: float, t2: float,
                          mu_j: float = None, threshold: float = 0.03, L: int = 10) -> InvarianceReport:
    if not t1 < t2:
        raise ValueError("need t1 < t2")
    burn_in = 0.5 / mu_j if mu_j else 0.0
    if t1 < burn_in:
        raise ValueError(f"t1 = {t1} is inside the burn-in period {burn_in}")
    a = pmf_at(trajectories, j, t1, L).full()
    b = pmf_at(trajectories, j, t2, L).full()
    tv = tv_distance(a, b)
    return InvarianceReport(j, float(t1), float(t2), tv, threshold, burn_in, tv <= threshold)


def occupancy_at(trajectories: Sequence[Trajectory], i: int, t: float, N: int) -> tuple[float, float]:
    """Mean and standard error of ``Sigma_i(t) / N`` across replications."""
    g = _grid_index(trajectories, t)
    x = np.array([tr.sigma[g, i] / N for tr in trajectories])
    mean, se = _mean_se(x[:, None])
    return float(mean[0]), float(se[0])


def crossing_identity_violations(tr: Trajectory) -> list[tuple[int, int]]:
    """(station, level) pairs where ``up[l-1] != down[l] + 1{Q(T) >= l}``."""
    ind = tr.final_at_least()
    bad = []
    for j in range(tr.up.shape[0]):
        for l in range(1, tr.L + 1):
            if tr.up[j, l - 1] != tr.down[j, l] + ind[j, l]:
                bad.append((j, l))
    return bad
