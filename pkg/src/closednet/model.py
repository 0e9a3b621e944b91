"""Network parameterization, derived quantities and topology analysis."""

from __future__ import annotations

import dataclasses
import math
from typing import Optional, Sequence

import numpy as np

from .pointproc import PointProcessSpec

BETA_CONVENTIONS = ("unit_sum", "literal_3_51")

COR_1_3 = "COR_1_3"
COR_1_4 = "COR_1_4"
COR_1_5 = "COR_1_5"
COR_1_6 = "COR_1_6"
GENERAL = "GENERAL"
BOTTLENECK = "BOTTLENECK"

_ROW_TOL = 1e-9
_BOTTLENECK_TOL = 1e-12


class SpecError(ValueError):
    """Raised when an invalid network is handed to an analysis."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(f"{v.code}: {v.message}" for v in self.violations))


@dataclasses.dataclass(frozen=True)
class Violation:
    code: str
    message: str


@dataclasses.dataclass(frozen=True)
class NetworkSpec:
    """Closed network of ``r`` infinite-server and ``k`` client stations.

    Parameters
    ----------
    N_i : units initially at each server station.
    lam : per-unit departure rate at each server station.
    p : routing matrix, ``p[i][j]`` = probability a unit leaving server ``i``
        joins client ``j``; the unit later returns to server ``i``.
    mu : normalized client service rates; mean gap between epochs at client
        ``j`` is ``1 / (mu[j] * N)``.
    departures : inter-epoch law per client (mean left unset).
    """

    N_i: tuple
    lam: tuple
    p: tuple
    mu: tuple
    departures: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "N_i", tuple(int(x) for x in self.N_i))
        object.__setattr__(self, "lam", tuple(float(x) for x in self.lam))
        object.__setattr__(self, "p", tuple(tuple(float(x) for x in row) for row in self.p))
        object.__setattr__(self, "mu", tuple(float(x) for x in self.mu))
        deps = tuple(
            d if isinstance(d, PointProcessSpec) else PointProcessSpec.from_dict(d)
            for d in self.departures
        )
        if not deps:
            deps = tuple(PointProcessSpec("poisson") for _ in self.mu)
        object.__setattr__(self, "departures", deps)

    @property
    def r(self) -> int:
        return len(self.N_i)

    @property
    def k(self) -> int:
        return len(self.mu)

    @property
    def N(self) -> int:
        return sum(self.N_i)

    def stream_spec(self, j: int) -> PointProcessSpec:
        return self.departures[j].with_mean(1.0 / (self.mu[j] * self.N))

    def scaled(self, N: int) -> "NetworkSpec":
        """Same network with population ``N`` split in the current proportions."""
        alpha = np.asarray(self.N_i, dtype=float) / self.N
        counts = np.floor(alpha * N).astype(int)
        counts[np.argmax(alpha - counts / N)] += N - counts.sum()
        return dataclasses.replace(self, N_i=tuple(int(c) for c in counts))

    def to_dict(self) -> dict:
        return {
            "N_i": list(self.N_i),
            "lambda": list(self.lam),
            "p": [list(row) for row in self.p],
            "mu": list(self.mu),
            "departures": [d.to_dict() for d in self.departures],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NetworkSpec":
        mu = d["mu"]
        deps = d.get("departures")
        if deps is None:
            one = d.get("departure", {"kind": "poisson"})
            deps = [one] * len(mu)
        return cls(N_i=d["N_i"], lam=d["lambda"], p=d["p"], mu=mu, departures=deps)


@dataclasses.dataclass(frozen=True)
class DerivedParams:
    """Quantities derived from a :class:`NetworkSpec`.

    ``I_j[j]`` is the set of servers feeding client ``j``; ``J_i[i]`` the set
    of clients fed by server ``i``.  Station indices are 0-based, so the
    bottleneck is ``k - 1``.
    """

    spec: NetworkSpec
    lambda_ij: np.ndarray
    alpha: np.ndarray
    rho_finite: np.ndarray
    rho: np.ndarray
    beta: np.ndarray
    I_j: tuple
    J_i: tuple
    beta_convention: str = "unit_sum"

    @property
    def r(self) -> int:
        return self.spec.r

    @property
    def k(self) -> int:
        return self.spec.k

    @property
    def mu(self) -> np.ndarray:
        return np.asarray(self.spec.mu)

    @property
    def bottleneck(self) -> int:
        return self.spec.k - 1

    @property
    def beta_unit(self) -> np.ndarray:
        """Arrival fractions under the unit-sum convention, whatever is configured."""
        if self.beta_convention == "unit_sum":
            return self.beta
        return _beta(self.lambda_ij, self.alpha, self.rho, self.mu, "unit_sum")


def _raw_params(spec: NetworkSpec):
    lam = np.asarray(spec.lam, dtype=float)
    p = np.asarray(spec.p, dtype=float)
    lambda_ij = lam[:, None] * p
    N_i = np.asarray(spec.N_i, dtype=float)
    N = N_i.sum()
    alpha = N_i / N
    mu = np.asarray(spec.mu, dtype=float)
    rho_finite = (lambda_ij * N_i[:, None]).sum(axis=0) / (mu * N)
    rho = (lambda_ij * alpha[:, None]).sum(axis=0) / mu
    return lambda_ij, alpha, rho_finite, rho


def _beta(lambda_ij, alpha, rho, mu, convention):
    weight = lambda_ij * alpha[:, None]
    if convention == "unit_sum":
        return weight / (rho * mu)[None, :]
    if convention == "literal_3_51":
        return weight / rho[None, :]
    raise ValueError(f"unknown beta convention {convention!r}")


def validate_spec(spec: NetworkSpec) -> list[Violation]:
    out: list[Violation] = []
    r, k = spec.r, spec.k
    if r < 1 or k < 1:
        return [Violation("EMPTY_NETWORK", "need at least one server and one client station")]
    if len(spec.lam) != r:
        out.append(Violation("DIMENSION_MISMATCH", f"lambda has {len(spec.lam)} entries, expected {r}"))
    if len(spec.p) != r or any(len(row) != k for row in spec.p):
        out.append(Violation("DIMENSION_MISMATCH", f"p must be {r} x {k}"))
    if len(spec.departures) != k:
        out.append(Violation("DIMENSION_MISMATCH", f"departures has {len(spec.departures)} entries, expected {k}"))
    if out:
        return out
    for i, n in enumerate(spec.N_i):
        if n < 1:
            out.append(Violation("NONPOSITIVE_UNITS", f"N_{i + 1} = {n} < 1"))
    for i, x in enumerate(spec.lam):
        if not (x > 0 and math.isfinite(x)):
            out.append(Violation("NONPOSITIVE_RATE", f"lambda_{i + 1} = {x} must be positive"))
    for j, x in enumerate(spec.mu):
        if not (x > 0 and math.isfinite(x)):
            out.append(Violation("NONPOSITIVE_RATE", f"mu_{j + 1} = {x} must be positive"))
    for i, row in enumerate(spec.p):
        if any(x < 0 for x in row):
            out.append(Violation("NEGATIVE_PROBABILITY", f"row {i + 1} of p has a negative entry"))
        s = sum(row)
        if abs(s - 1.0) > _ROW_TOL:
            out.append(Violation("ROW_NOT_STOCHASTIC", f"row {i + 1} of p sums to {s:.12g}"))
    for j, d in enumerate(spec.departures):
        for msg in d.problems():
            out.append(Violation("BAD_DEPARTURE_KIND", f"client {j + 1}: {msg}"))
    if out:
        return out

    _, _, _, rho = _raw_params(spec)
    for j in range(k):
        if not (rho[j] > 0):
            out.append(Violation("UNREACHED_CLIENT", f"client {j + 1} receives no traffic"))
    heavy = [j for j in range(k) if rho[j] >= 1.0 - _BOTTLENECK_TOL]
    if not heavy:
        out.append(Violation("NO_BOTTLENECK", "no client station has traffic intensity >= 1"))
    elif len(heavy) > 1:
        names = ", ".join(f"{j + 1} ({rho[j]:.6g})" for j in heavy)
        out.append(Violation("MULTIPLE_BOTTLENECKS", f"client stations {names} all have intensity >= 1"))
    elif heavy[0] != k - 1:
        out.append(Violation(
            "BOTTLENECK_NOT_LAST",
            f"bottleneck is client {heavy[0] + 1}; reorder so it is client {k} (see normalize_order)",
        ))
    return out


def require_valid(spec: NetworkSpec) -> None:
    v = validate_spec(spec)
    if v:
        raise SpecError(v)


def derive(spec: NetworkSpec, beta_convention: str = "unit_sum") -> DerivedParams:
    if beta_convention not in BETA_CONVENTIONS:
        raise ValueError(f"beta_convention must be one of {BETA_CONVENTIONS}")
    require_valid(spec)
    lambda_ij, alpha, rho_finite, rho = _raw_params(spec)
    mu = np.asarray(spec.mu, dtype=float)
    beta = _beta(lambda_ij, alpha, rho, mu, beta_convention)
    I_j = tuple(frozenset(int(i) for i in np.nonzero(lambda_ij[:, j] > 0)[0]) for j in range(spec.k))
    J_i = tuple(frozenset(int(j) for j in np.nonzero(lambda_ij[i] > 0)[0]) for i in range(spec.r))
    return DerivedParams(spec, lambda_ij, alpha, rho_finite, rho, beta, I_j, J_i, beta_convention)


def normalize_order(spec: NetworkSpec) -> tuple[NetworkSpec, list[int]]:
    """Permute client stations so the unique heavy station comes last.

    Returns the reordered spec and ``perm`` with ``new[j] = old[perm[j]]``.
    """
    _, _, _, rho = _raw_params(spec)
    heavy = [j for j in range(spec.k) if rho[j] >= 1.0 - _BOTTLENECK_TOL]
    if len(heavy) != 1:
        raise SpecError(validate_spec(spec) or [Violation("NO_BOTTLENECK", "no unique heavy station")])
    b = heavy[0]
    perm = [j for j in range(spec.k) if j != b] + [b]
    new = dataclasses.replace(
        spec,
        p=tuple(tuple(row[j] for j in perm) for row in spec.p),
        mu=tuple(spec.mu[j] for j in perm),
        departures=tuple(spec.departures[j] for j in perm),
    )
    return new, perm


@dataclasses.dataclass(frozen=True)
class TopologyReport:
    components: tuple  # each: (frozenset of servers, frozenset of clients)
    bottleneck_ids: tuple
    shares_hub_with_bottleneck: tuple
    applicable_corollary: tuple

    def to_dict(self) -> dict:
        return {
            "components": [
                {"servers": sorted(i + 1 for i in s), "clients": sorted(j + 1 for j in c)}
                for s, c in self.components
            ],
            "bottleneck_ids": [j + 1 for j in self.bottleneck_ids],
            "shares_hub_with_bottleneck": list(self.shares_hub_with_bottleneck),
            "applicable_corollary": list(self.applicable_corollary),
        }


class _UnionFind:
    def __init__(self, n):
        self.parent = list(range(n))

    def find(self, x):
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[max(ra, rb)] = min(ra, rb)


def classify(spec: NetworkSpec, params: Optional[DerivedParams] = None) -> TopologyReport:
    if params is None:
        params = derive(spec)
    r, k = spec.r, spec.k
    uf = _UnionFind(r + k)
    for i in range(r):
        for j in params.J_i[i]:
            uf.union(i, r + j)
    groups: dict[int, tuple[set, set]] = {}
    for node in range(r + k):
        servers, clients = groups.setdefault(uf.find(node), (set(), set()))
        (servers if node < r else clients).add(node if node < r else node - r)
    components = tuple(
        (frozenset(s), frozenset(c))
        for s, c in sorted(groups.values(), key=lambda sc: (min(sc[0], default=r), min(sc[1], default=k)))
    )

    bottlenecks = tuple(j for j in range(k) if params.rho[j] >= 1.0 - _BOTTLENECK_TOL)
    b = k - 1
    Ik = params.I_j[b]
    shares = tuple(bool(params.I_j[j] & Ik) for j in range(k))
    critical = abs(params.rho[b] - 1.0) <= _BOTTLENECK_TOL
    cors = []
    for j in range(k):
        if j == b:
            cors.append(BOTTLENECK)
        elif critical:
            cors.append(COR_1_6)
        elif r == 1:
            cors.append(COR_1_3)
        elif not (params.I_j[j] & Ik):
            cors.append(COR_1_5)
        elif params.I_j[j] == Ik:
            cors.append(COR_1_4)
        else:
            cors.append(GENERAL)
    return TopologyReport(components, bottlenecks, shares, tuple(cors))


__all__: Sequence[str] = [
    "NetworkSpec", "DerivedParams", "TopologyReport", "Violation", "SpecError",
    "validate_spec", "derive", "classify", "normalize_order", "BETA_CONVENTIONS",
]
