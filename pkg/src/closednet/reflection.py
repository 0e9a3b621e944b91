"""One-sided reflection at zero for piecewise-constant paths.

For a step path ``X`` with ``X(0) = 0`` the regulator is
``psi_t(X) = -inf_{s<=t} X(s)`` and the reflected path is
``phi_t(X) = X(t) + psi_t(X)``.  A step path attains its infimum at the
start of some piece, so both maps reduce to running minima over the piece
values.
"""

from __future__ import annotations

import dataclasses

import numpy as np


class ReflectionError(ValueError):
    pass


@dataclasses.dataclass(frozen=True)
class StepPath:
    """Right-continuous step path: ``values[n]`` holds on ``[times[n], times[n+1])``."""

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if times.ndim != 1 or times.shape != values.shape or times.size == 0:
            raise ReflectionError("times and values must be equal-length 1-d arrays")
        if times[0] != 0.0:
            raise ReflectionError("a step path starts at time 0")
        if times.size > 1 and not np.all(np.diff(times) > 0):
            raise ReflectionError("jump epochs must be strictly increasing")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_jumps(cls, epochs, jumps, start: float = 0.0) -> "StepPath":
        """Build a path from jump epochs and sizes; coincident epochs are merged."""
        epochs = np.asarray(epochs, dtype=float)
        jumps = np.asarray(jumps, dtype=float)
        if epochs.size and epochs.min() <= 0.0:
            raise ReflectionError("jumps must occur at positive times")
        order = np.argsort(epochs, kind="stable")
        epochs, jumps = epochs[order], jumps[order]
        uniq, inverse = np.unique(epochs, return_inverse=True)
        merged = np.zeros(uniq.size)
        np.add.at(merged, inverse, jumps)
        times = np.concatenate([[0.0], uniq])
        values = start + np.concatenate([[0.0], np.cumsum(merged)])
        return cls(times, values)

    def index_at(self, t: float) -> int:
        if t < 0:
            raise ReflectionError("t must be nonnegative")
        return int(np.searchsorted(self.times, t, side="right")) - 1

    def __call__(self, t: float) -> float:
        return float(self.values[self.index_at(t)])

    def sup_distance(self, other: "StepPath", horizon: float) -> float:
        """sup over [0, horizon] of |self - other|."""
        ts = np.union1d(self.times, other.times)
        ts = ts[ts <= horizon]
        a = self.values[np.searchsorted(self.times, ts, side="right") - 1]
        b = other.values[np.searchsorted(other.times, ts, side="right") - 1]
        return float(np.max(np.abs(a - b)))


def _check_origin(path: StepPath) -> None:
    if path.values[0] != 0.0:
        raise ReflectionError("reflection requires X(0) = 0")


def psi(path: StepPath, t: float) -> float:
    _check_origin(path)
    idx = path.index_at(t)
    return max(0.0, -float(np.min(path.values[: idx + 1])))


def phi(path: StepPath, t: float) -> float:
    idx = path.index_at(t)
    return float(path.values[idx]) + psi(path, t)


def regulator(path: StepPath) -> StepPath:
    """The whole regulator path psi_t(X) on the epochs of X."""
    _check_origin(path)
    return StepPath(path.times, np.maximum.accumulate(np.maximum(-path.values, 0.0)))


def reflect(path: StepPath) -> StepPath:
    """Reflected path phi(X) in a single running-minimum pass."""
    reg = regulator(path)
    return StepPath(path.times, path.values + reg.values)
