"""Fluid limits of the scaled network and their numerical cross-check.

The bottleneck's scaled queue follows the linear ODE
``q' = mu_k (rho_k - 1) - rho_k mu_k q`` with ``q(0) = 0``; every other
client's scaled queue vanishes.  Time-dependent utilizations of the
non-bottleneck clients and server occupancies are affine in ``q``.

Two forms are offered for those affine maps:

``"beta_product"``
    utilization ``rho_j (1 - q sum_i beta_ij beta_ik)`` over servers shared
    with the bottleneck, and occupancy ``alpha_i (1 - beta_ik q)``, with the
    configured beta convention.
``"balance"``
    the expressions implied by unit conservation at each server: the
    occupancy of server ``i`` is ``alpha_i - beta_ik q(t)`` (unit-sum
    beta) and client ``j`` sees arrival rate ``sum_i lambda_ij`` times that
    occupancy.  The two forms coincide when there is a single server
    station, when the client shares no server with the bottleneck, or when
    ``rho_k = 1``.
"""

from __future__ import annotations

import dataclasses
import math
from typing import Callable, Optional

import numpy as np

from .model import DerivedParams

FORMS = ("beta_product", "balance")


class FluidDomainError(ValueError):
    pass


@dataclasses.dataclass
class FluidCurves:
    grid: np.ndarray
    q: np.ndarray
    int_q: np.ndarray
    x_star_j: np.ndarray  # (k, G)
    x_star_ij: Optional[np.ndarray] = None  # (r, k, G)
    rho_t: Optional[np.ndarray] = None  # (k - 1, G)
    occupancy: Optional[np.ndarray] = None  # (r, G)


def q_coefficients(params: DerivedParams) -> tuple[float, float]:
    """``(level, speed)`` with ``q(t) = level * (1 - exp(-speed * t))``."""
    b = params.bottleneck
    rho_k = float(params.rho[b])
    if rho_k < 1.0 - 1e-12:
        raise FluidDomainError(f"rho_k = {rho_k:.6g} < 1: there is no bottleneck")
    level = max(0.0, 1.0 - 1.0 / rho_k)
    return level, rho_k * float(params.mu[b])


def _check_t(t):
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise FluidDomainError("time must be nonnegative")
    return t


def q_of_t(params: DerivedParams, t):
    level, speed = q_coefficients(params)
    t = _check_t(t)
    out = -level * np.expm1(-speed * t)
    return float(out) if out.ndim == 0 else out


def q_rate(params: DerivedParams, t):
    """Time derivative of the closed-form ``q``."""
    level, speed = q_coefficients(params)
    t = _check_t(t)
    out = level * speed * np.exp(-speed * t)
    return float(out) if out.ndim == 0 else out


def q_residual(params: DerivedParams, t):
    """``q'(t)`` minus the right-hand side of the bottleneck ODE."""
    b = params.bottleneck
    rho_k, mu_k = float(params.rho[b]), float(params.mu[b])
    q = np.asarray(q_of_t(params, t))
    return np.asarray(q_rate(params, t)) - (mu_k * (rho_k - 1.0) - rho_k * mu_k * q)


def int_q(params: DerivedParams, t):
    """Closed-form integral of q over [0, t]."""
    level, speed = q_coefficients(params)
    t = _check_t(t)
    out = level * (t + np.expm1(-speed * t) / speed)
    return float(out) if out.ndim == 0 else out


def rho_coefficients(params: DerivedParams, j: int, form: str = "beta_product") -> tuple[float, float]:
    """``(base, slope)`` with ``rho_j(t) = base - slope * q(t)``."""
    if j == params.bottleneck:
        raise FluidDomainError("the bottleneck station has no time-dependent utilization")
    if not 0 <= j < params.k:
        raise FluidDomainError(f"station index {j} out of range")
    b = params.bottleneck
    shared = sorted(params.I_j[j] & params.I_j[b])
    base = float(params.rho[j])
    if form == "beta_product":
        s = sum(params.beta[i, j] * params.beta[i, b] for i in shared)
        return base, base * float(s)
    if form == "balance":
        bu = params.beta_unit
        s = sum(params.lambda_ij[i, j] * bu[i, b] for i in shared)
        return base, float(s) / float(params.mu[j])
    raise ValueError(f"form must be one of {FORMS}")


def rho_j_of_t(params: DerivedParams, j: int, t, form: str = "beta_product"):
    base, slope = rho_coefficients(params, j, form)
    out = base - slope * np.asarray(q_of_t(params, t))
    return float(out) if out.ndim == 0 else out


def occupancy(params: DerivedParams, grid, form: str = "beta_product") -> np.ndarray:
    """Scaled server occupancy ``Sigma_i(t) / N``, shape ``(r, G)``."""
    grid = _check_t(np.atleast_1d(grid))
    q = np.atleast_1d(q_of_t(params, grid))
    b = params.bottleneck
    out = np.tile(params.alpha[:, None], (1, grid.size)).astype(float)
    for i in params.I_j[b]:
        if form == "beta_product":
            out[i] = params.alpha[i] * (1.0 - q * params.beta[i, b])
        elif form == "balance":
            out[i] = params.alpha[i] - params.beta_unit[i, b] * q
        else:
            raise ValueError(f"form must be one of {FORMS}")
    return out


def _check_grid(grid) -> np.ndarray:
    grid = _check_t(np.atleast_1d(grid))
    if grid.size > 1 and np.any(np.diff(grid) <= 0):
        raise FluidDomainError("grid must be strictly increasing")
    return grid


def _simpson(f: Callable[[float], float], a: float, b: float, fa: float, fm: float, fb: float,
             whole: float, tol: float, depth: int) -> float:
    m = 0.5 * (a + b)
    lm, rm = 0.5 * (a + m), 0.5 * (m + b)
    flm, frm = f(lm), f(rm)
    left = (m - a) * (fa + 4.0 * flm + fm) / 6.0
    right = (b - m) * (fm + 4.0 * frm + fb) / 6.0
    delta = left + right - whole
    if depth <= 0 or abs(delta) <= 15.0 * tol:
        return left + right + delta / 15.0
    return (_simpson(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + _simpson(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1))


def cumulative_simpson(f: Callable[[float], float], grid, tol: float = 1e-10,
                       max_depth: int = 30) -> np.ndarray:
    """Running integral of ``f`` from ``grid[0]`` at every grid point.

    Adaptive Simpson on each grid interval with absolute tolerance ``tol``
    per interval (Richardson-corrected).
    """
    grid = np.asarray(grid, dtype=float)
    out = np.zeros(grid.size)
    fa = f(float(grid[0]))
    for n in range(1, grid.size):
        a, b = float(grid[n - 1]), float(grid[n])
        fb = f(b)
        fm = f(0.5 * (a + b))
        whole = (b - a) * (fa + 4.0 * fm + fb) / 6.0
        out[n] = out[n - 1] + _simpson(f, a, b, fa, fm, fb, whole, tol, max_depth)
        fa = fb
    return out


def _ratio_function(params: DerivedParams, i: int, j: int, level: float, speed: float):
    # Share of class i in client j's arrivals, with the shared-server
    # indicator of the class-level derivation.
    b = params.bottleneck
    shared = params.I_j[j] & params.I_j[b]
    servers = sorted(params.I_j[j])
    w = {l: float(params.lambda_ij[l, j] * params.alpha[l]) for l in servers}
    ind = {l: (1.0 if l in shared else 0.0) for l in servers}
    wsh = sum(w[l] for l in servers if ind[l])
    limit = (w[i] * ind[i] / wsh) if wsh > 0 else 0.0

    def ratio(s: float) -> float:
        q = -level * math.expm1(-speed * s)
        num = {l: w[l] * (1.0 - ind[l] * (1.0 - q)) for l in servers}
        den = sum(num.values())
        if den <= 1e-300:
            return limit
        return num[i] / den

    return ratio


def x_star(params: DerivedParams, grid, form: str = "beta_product") -> FluidCurves:
    """Closed-form fluid paths on ``grid``."""
    grid = _check_grid(grid)
    level, speed = q_coefficients(params)
    r, k, b = params.r, params.k, params.bottleneck
    q = np.atleast_1d(q_of_t(params, grid))
    iq = np.atleast_1d(int_q(params, grid))
    x_ij = np.zeros((r, k, grid.size))
    for i in params.I_j[b]:
        x_ij[i, b] = params.beta[i, b] * q
    x_j = np.zeros((k, grid.size))
    x_j[b] = q
    for j in range(k - 1):
        for i in params.I_j[j]:
            lam_a = float(params.lambda_ij[i, j] * params.alpha[i])
            ratio = _ratio_function(params, i, j, level, speed)
            if grid[0] != 0.0:
                shift = cumulative_simpson(ratio, np.concatenate([[0.0], grid]))[1:]
            else:
                shift = cumulative_simpson(ratio, grid)
            beta_ik = float(params.beta[i, b]) if i in params.I_j[b] else 0.0
            x_ij[i, j] = lam_a * grid - params.mu[j] * shift - lam_a * beta_ik * iq
        shared = params.I_j[j] & params.I_j[b]
        coeff = sum(float(params.lambda_ij[i, j] * params.alpha[i] * params.beta[i, b]) for i in shared)
        x_j[j] = (params.rho[j] * params.mu[j] - params.mu[j]) * grid - coeff * iq
    rho_t = np.array([rho_j_of_t(params, j, grid, form) for j in range(k - 1)]).reshape(k - 1, grid.size)
    return FluidCurves(grid, q, iq, x_j, x_ij, rho_t, occupancy(params, grid, form))


def _uniform_step(grid: np.ndarray) -> float:
    if grid.size < 2:
        raise FluidDomainError("need at least two grid points")
    steps = np.diff(grid)
    h = float(steps[0])
    if h <= 0:
        raise FluidDomainError("step must be positive")
    if not np.allclose(steps, h, rtol=1e-9, atol=1e-12):
        raise FluidDomainError("numeric solver needs a uniform grid")
    return h


def solve_fluid_numeric(params: DerivedParams, grid, system: str = "aggregate") -> FluidCurves:
    """Explicit Euler with projection onto the nonnegative orthant.

    ``system="aggregate"`` integrates the comparison system in which every
    client sees the total scaled queue; ``system="class"`` tracks one fluid
    pool per (server, client) pair, draining each client's pools in
    proportion to their content.  Both are oracles for the closed forms.
    """
    grid = _check_t(np.atleast_1d(grid))
    h = _uniform_step(grid)
    r, k = params.r, params.k
    mu = params.mu
    G = grid.size
    if system == "aggregate":
        drive = params.rho * mu
        y = np.zeros(k)
        out = np.zeros((k, G))
        for n in range(1, G):
            y = np.maximum(0.0, y + h * (drive * (1.0 - y.sum()) - mu))
            out[:, n] = y
        q_num = out[k - 1].copy()
        return FluidCurves(grid, q_num, _trapezoid_cumulative(q_num, grid), out)
    if system == "class":
        lam = params.lambda_ij
        alpha = params.alpha
        y = np.zeros((r, k))
        pools = np.zeros((r, k, G))
        occ = np.zeros((r, G))
        occ[:, 0] = alpha
        for n in range(1, G):
            inflow = h * lam * (alpha - y.sum(axis=1))[:, None]
            total = y + inflow
            tot_j = total.sum(axis=0)
            served = np.minimum(h * mu, tot_j)
            keep = np.where(tot_j > 0, 1.0 - served / np.where(tot_j > 0, tot_j, 1.0), 0.0)
            y = np.maximum(0.0, total * keep[None, :])
            pools[:, :, n] = y
            occ[:, n] = alpha - y.sum(axis=1)
        x = pools.sum(axis=0)
        q_num = x[k - 1].copy()
        return FluidCurves(grid, q_num, _trapezoid_cumulative(q_num, grid), x, pools,
                           None, occ)
    raise ValueError("system must be 'aggregate' or 'class'")


def _trapezoid_cumulative(y: np.ndarray, grid: np.ndarray) -> np.ndarray:
    out = np.zeros_like(y)
    out[1:] = np.cumsum(0.5 * (y[1:] + y[:-1]) * np.diff(grid))
    return out
