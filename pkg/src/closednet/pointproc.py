"""Autonomous departure epoch streams for client stations.

A client station serves only at the epochs of an exogenous point process.
Supported inter-epoch laws:

``poisson``
    iid exponential gaps.
``gamma``
    iid gamma gaps with the given ``shape`` (Erlang when integral).
``deterministic``
    epochs at exactly ``mean, 2*mean, 3*mean, ...``.
``markov_modulated``
    a Markov renewal sequence: the gap is exponential with the rate of the
    current phase, after which the phase moves one step of a discrete-time
    chain.  The first phase is drawn from the chain's stationary law, so the
    gap sequence is strictly stationary but not independent.

Every kind is rescaled internally so the mean gap equals ``mean``.
"""

from __future__ import annotations

import bisect
import dataclasses
import math
from typing import Optional, Sequence

import numpy as np

from .rng import Xoshiro256

KINDS = ("poisson", "gamma", "deterministic", "markov_modulated")
KIND_CODE = {name: code for code, name in enumerate(KINDS)}

_ALIASES = {
    "renewal_gamma": "gamma",
    "erlang": "gamma",
    "renewal_deterministic": "deterministic",
    "mmpp": "markov_modulated",
}


class PointProcessError(ValueError):
    pass


@dataclasses.dataclass(frozen=True)
class PointProcessSpec:
    """Inter-epoch law of one client station.

    ``mean`` may be left as None inside a network description; the network
    fills it in as ``1 / (mu_j * N)``.
    """

    kind: str = "poisson"
    mean: Optional[float] = None
    shape: float = 1.0
    rates: tuple = ()
    transition: tuple = ()

    def __post_init__(self):
        kind = _ALIASES.get(self.kind, self.kind)
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "rates", tuple(float(x) for x in self.rates))
        object.__setattr__(
            self, "transition", tuple(tuple(float(x) for x in row) for row in self.transition)
        )

    def problems(self) -> list[str]:
        out = []
        if self.kind not in KINDS:
            out.append(f"unknown departure kind {self.kind!r}")
            return out
        if self.mean is not None and not (self.mean > 0):
            out.append("mean inter-epoch time must be positive")
        if self.kind == "gamma" and not (self.shape > 0):
            out.append("gamma shape must be positive")
        if self.kind == "markov_modulated":
            n = len(self.rates)
            if n == 0:
                out.append("markov_modulated needs at least one phase rate")
            if any(not (r > 0) for r in self.rates):
                out.append("phase rates must be positive")
            P = np.asarray(self.transition, dtype=float)
            if P.shape != (n, n):
                out.append("transition matrix must be square with one row per phase")
            elif (P < 0).any() or not np.allclose(P.sum(axis=1), 1.0, atol=1e-9):
                out.append("transition matrix must be row-stochastic")
        return out

    def with_mean(self, mean: float) -> "PointProcessSpec":
        return dataclasses.replace(self, mean=float(mean))

    def to_dict(self) -> dict:
        d = {"kind": self.kind}
        if self.kind == "gamma":
            d["shape"] = self.shape
        if self.kind == "markov_modulated":
            d["rates"] = list(self.rates)
            d["transition"] = [list(r) for r in self.transition]
        if self.mean is not None:
            d["mean"] = self.mean
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "PointProcessSpec":
        return cls(
            kind=d.get("kind", "poisson"),
            mean=d.get("mean"),
            shape=float(d.get("shape", 1.0)),
            rates=tuple(d.get("rates", ())),
            transition=tuple(tuple(r) for r in d.get("transition", ())),
        )

    def scv(self) -> float:
        """Asymptotic index of dispersion of the counting process.

        Equals ``Var S(t) / E S(t)`` as ``t`` grows.  For renewal kinds this
        is the squared coefficient of variation of a gap.
        """
        if self.kind == "poisson":
            return 1.0
        if self.kind == "gamma":
            return 1.0 / self.shape
        if self.kind == "deterministic":
            return 0.0
        return _markov_renewal_dispersion(self)


def stationary_distribution(P) -> np.ndarray:
    P = np.asarray(P, dtype=float)
    n = P.shape[0]
    A = np.vstack([P.T - np.eye(n), np.ones(n)])
    b = np.zeros(n + 1)
    b[-1] = 1.0
    pi, *_ = np.linalg.lstsq(A, b, rcond=None)
    pi = np.clip(pi, 0.0, None)
    return pi / pi.sum()


def _markov_renewal_dispersion(spec: PointProcessSpec) -> float:
    # Asymptotic variance of partial sums of the gap sequence, divided by
    # mean**2 (renewal-reward CLT for a Markov-driven stationary sequence).
    P = np.asarray(spec.transition, dtype=float)
    rates = modulated_rates(spec, 1.0)
    pi = stationary_distribution(P)
    m = 1.0 / rates
    mean = float(pi @ m)
    var0 = float(pi @ (2.0 * m * m)) - mean * mean
    n = len(pi)
    # sum_{h>=1} Cov(xi_0, xi_h) via the fundamental matrix.
    Z = np.linalg.inv(np.eye(n) - P + np.outer(np.ones(n), pi))
    centered = m - mean
    cov_sum = float((pi * centered) @ (Z - np.outer(np.ones(n), pi)) @ P @ m)
    return (var0 + 2.0 * cov_sum) / (mean * mean)


def modulated_rates(spec: PointProcessSpec, mean: float) -> np.ndarray:
    """Phase rates rescaled so the stationary mean gap equals ``mean``."""
    rates = np.asarray(spec.rates, dtype=float)
    pi = stationary_distribution(spec.transition)
    raw_mean = float(pi @ (1.0 / rates))
    return rates * (raw_mean / mean)


@dataclasses.dataclass
class StreamTables:
    """Flat numeric description of a stream, shared with the kernels."""

    kind: int
    mean: float
    shape: float
    rates: np.ndarray  # per phase
    trans_cum: np.ndarray  # cumulative rows, last column exactly 1
    init_cum: np.ndarray


def _cumulative(w) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    c = np.cumsum(w, axis=-1)
    c = c / c[..., -1:]
    # Pin every entry from the last positive weight onward to exactly 1 so a
    # uniform draw never lands on a zero-weight index.
    if c.ndim == 1:
        last = int(np.nonzero(w > 0)[0][-1])
        c[last:] = 1.0
    else:
        for row in range(c.shape[0]):
            last = int(np.nonzero(w[row] > 0)[0][-1])
            c[row, last:] = 1.0
    return c


def stream_tables(spec: PointProcessSpec) -> StreamTables:
    bad = spec.problems()
    if spec.mean is None:
        bad.append("mean must be set before building a stream")
    if bad:
        raise PointProcessError("; ".join(bad))
    if spec.kind == "markov_modulated":
        rates = modulated_rates(spec, spec.mean)
        trans_cum = _cumulative(spec.transition)
        init_cum = _cumulative(stationary_distribution(spec.transition))
    else:
        rates = np.ones(1)
        trans_cum = np.ones((1, 1))
        init_cum = np.ones(1)
    return StreamTables(KIND_CODE[spec.kind], float(spec.mean), float(spec.shape),
                        rates, trans_cum, init_cum)


class GapSampler:
    """Lazily draws gaps; the exact mirror of the compiled stream."""

    __slots__ = ("kind", "mean", "shape", "rates", "trans_cum", "nphase",
                 "phase", "count", "rng")

    def __init__(self, tables: StreamTables, seed: int):
        self.kind = tables.kind
        self.mean = tables.mean
        self.shape = tables.shape
        self.rates = [float(x) for x in tables.rates]
        self.trans_cum = [[float(x) for x in row] for row in tables.trans_cum]
        self.nphase = len(self.rates)
        self.count = 0
        self.rng = Xoshiro256(seed)
        self.phase = 0
        if self.kind == 3:
            self.phase = self.rng.choice_cum([float(x) for x in tables.init_cum], self.nphase)

    def next_epoch(self, previous: float) -> float:
        """Epoch following ``previous`` (0 before the first epoch)."""
        self.count += 1
        kind = self.kind
        if kind == 0:
            return previous + self.mean * self.rng.exponential()
        if kind == 1:
            return previous + (self.mean / self.shape) * self.rng.gamma(self.shape)
        if kind == 2:
            return self.count * self.mean
        gap = self.rng.exponential() / self.rates[self.phase]
        self.phase = self.rng.choice_cum(self.trans_cum[self.phase], self.nphase)
        return previous + gap


class EpochStream:
    """Stateful epoch generator with lookahead and history.

    ``peek()`` returns the next epoch without consuming it; ``advance()``
    consumes it.  All generated epochs are kept so that ``last_before`` can
    answer queries for any past time.
    """

    def __init__(self, spec: PointProcessSpec, seed: int):
        self.spec = spec
        self._sampler = GapSampler(stream_tables(spec), seed)
        self.history: list[float] = []
        self._next = self._sampler.next_epoch(0.0)

    def peek(self) -> float:
        return self._next

    def advance(self) -> float:
        epoch = self._next
        self.history.append(epoch)
        self._next = self._sampler.next_epoch(epoch)
        return epoch

    def take(self, n: int) -> np.ndarray:
        return np.array([self.advance() for _ in range(n)])

    def run_until(self, t: float) -> None:
        while self._next <= t:
            self.advance()

    def count(self, t: float) -> int:
        """S(t): number of epochs in (0, t]."""
        self.run_until(t)
        return bisect.bisect_right(self.history, t)

    def last_before(self, t: float) -> Optional[float]:
        """S*(t): the last epoch at or before ``t``; None when there is none."""
        if t < 0:
            raise ValueError("t must be nonnegative")
        self.run_until(t)
        idx = bisect.bisect_right(self.history, t)
        return self.history[idx - 1] if idx else None


def make_stream(spec: PointProcessSpec, seed: int) -> EpochStream:
    return EpochStream(spec, seed)


def last_before(stream: EpochStream, t: float) -> Optional[float]:
    return stream.last_before(t)


def empirical_rate(stream: EpochStream, t: float, N: int) -> float:
    """S(t) / N, the scaled count compared against ``mu * t``."""
    return stream.count(t) / N


def clt_constant(spec: PointProcessSpec, mu: float, t: float) -> float:
    """Standard deviation of ``sqrt(N) * (S(t)/N - mu*t)`` for large N."""
    return math.sqrt(mu * t * spec.scv())


def sample_gaps(spec: PointProcessSpec, seed: int, n: int) -> np.ndarray:
    s = make_stream(spec, seed)
    return np.diff(np.concatenate([[0.0], s.take(n)]))


__all__: Sequence[str] = [
    "PointProcessSpec", "EpochStream", "make_stream", "last_before",
    "empirical_rate", "clt_constant", "stream_tables", "GapSampler",
    "stationary_distribution", "KINDS",
]
