"""Convergence-rate objects and trajectory diagnostics for gradient tracking.

The central object is the nonnegative 3x3 rate matrix

    [ sigma + beta*eta   beta*(eta*beta + 2)   eta*beta^2 ]
    [ eta                sigma                 0          ]
    [ 0                  eta*beta              lam        ]

with ``lam = max(|1 - alpha*eta|, |1 - beta*eta|)``, which contracts the
error vector ``(||s - 1g||, ||x - 1 xbar||, sqrt(n)||xbar - x*||)`` one round
at a time whenever every local objective is alpha-strongly convex and
beta-smooth. All bound evaluators here are pure formulas over measured
initial norms; they never recompute trajectory quantities themselves.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

ETA_MODES = (
    "strongly_convex",
    "convex",
    "metropolis_strongly_convex",
    "metropolis_convex",
)


@dataclass(frozen=True)
class RateMatrix:
    """Rate matrix with its step factor ``lam`` and spectral radius."""

    matrix: np.ndarray
    lam: float
    rho: float


def build_rate_matrix(eta: float, alpha: float, beta: float, sigma: float) -> RateMatrix:
    """Assemble the rate matrix and compute its spectral radius."""
    if eta <= 0:
        raise ValueError(f"step size must be positive, got {eta}")
    if not 0 < alpha <= beta:
        raise ValueError(f"need 0 < alpha <= beta, got alpha={alpha}, beta={beta}")
    if not 0 <= sigma < 1:
        raise ValueError(f"need 0 <= sigma < 1, got {sigma}")
    lam = max(abs(1.0 - alpha * eta), abs(1.0 - beta * eta))
    m = np.array(
        [
            [sigma + beta * eta, beta * (eta * beta + 2.0), eta * beta**2],
            [eta, sigma, 0.0],
            [0.0, eta * beta, lam],
        ]
    )
    return RateMatrix(matrix=m, lam=lam, rho=spectral_radius(m))


def spectral_radius(m: np.ndarray) -> float:
    """Spectral radius of a 3x3 nonnegative matrix via its characteristic cubic.

    For nonnegative matrices the radius is attained at a real root
    (Perron root), which the returned value tracks.
    """
    m = np.asarray(m, dtype=float)
    if m.shape != (3, 3):
        raise ValueError(f"expected a 3x3 matrix, got shape {m.shape}")
    c2 = -np.trace(m)
    c1 = (
        m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
        + m[0, 0] * m[2, 2] - m[0, 2] * m[2, 0]
        + m[1, 1] * m[2, 2] - m[1, 2] * m[2, 1]
    )
    c0 = -np.linalg.det(m)
    roots = np.roots([1.0, c2, c1, c0])
    rho = float(np.abs(roots).max())
    top = roots[np.argmax(np.abs(roots))]
    if abs(top.imag) > 1e-8 * max(1.0, rho):
        # conjugate pair at the top; the modulus is still the radius
        return rho
    return float(abs(top.real))


def power_iteration_radius(m: np.ndarray, tol: float = 1e-13, max_iter: int = 200000) -> float:
    """Spectral radius of a nonnegative matrix by power iteration.

    Independent cross-check for :func:`spectral_radius`; converges at the
    ratio of the two leading magnitudes.
    """
    m = np.asarray(m, dtype=float)
    v = np.ones(m.shape[0]) / math.sqrt(m.shape[0])
    estimate = 0.0
    for _ in range(max_iter):
        mv = m @ v
        nv = float(np.linalg.norm(mv))
        if nv == 0.0:
            return 0.0
        v = mv / nv
        if abs(nv - estimate) <= tol * max(1.0, nv):
            return nv
        estimate = nv
    return estimate


def spectral_radius_bound(eta: float, alpha: float, beta: float, sigma: float) -> float:
    """Closed-form bound ``max(1 - alpha*eta/2, sigma + 5 sqrt(eta*beta) sqrt(beta/alpha))``.

    Only claimed for ``0 < eta < 1/beta``.
    """
    if not 0 < alpha <= beta:
        raise ValueError(f"need 0 < alpha <= beta, got alpha={alpha}, beta={beta}")
    if not 0 <= sigma < 1:
        raise ValueError(f"need 0 <= sigma < 1, got {sigma}")
    if not 0 < eta < 1.0 / beta:
        raise ValueError(f"bound requires 0 < eta < 1/beta, got eta={eta}, beta={beta}")
    return max(
        1.0 - alpha * eta / 2.0,
        sigma + 5.0 * math.sqrt(eta * beta) * math.sqrt(beta / alpha),
    )


def recommend_eta(
    mode: str,
    *,
    alpha: float | None = None,
    beta: float | None = None,
    sigma: float | None = None,
    upper_n: int | None = None,
) -> float:
    """Step size for the requested guarantee.

    ``strongly_convex``: ``(alpha/beta^2) ((1-sigma)/6)^2`` (linear rate).
    ``convex``: the largest step ``(1-sigma)^2 / (160 beta)`` with the O(1/t)
    guarantee. The ``metropolis_*`` variants need only an agent-count bound
    ``upper_n`` instead of sigma and assume lazy Metropolis weights:
    ``(alpha/beta^2) (1/(426 U^2))^2`` and ``1/(160 beta (71 U^2)^2)``.
    """
    if mode not in ETA_MODES:
        raise ValueError(f"unknown mode {mode!r}; expected one of {ETA_MODES}")
    if beta is None or beta <= 0:
        raise ValueError("beta must be positive")
    strongly = mode in ("strongly_convex", "metropolis_strongly_convex")
    if strongly and (alpha is None or alpha <= 0):
        raise ValueError(f"mode {mode!r} requires alpha > 0")
    if mode.startswith("metropolis"):
        if upper_n is None or upper_n < 2:
            raise ValueError("metropolis modes need an agent-count bound upper_n >= 2")
        if mode == "metropolis_strongly_convex":
            return (alpha / beta**2) * (1.0 / (426.0 * upper_n**2)) ** 2
        return 1.0 / (160.0 * beta * (71.0 * upper_n**2) ** 2)
    if sigma is None or not 0 <= sigma < 1:
        raise ValueError(f"mode {mode!r} requires 0 <= sigma < 1")
    if mode == "strongly_convex":
        return (alpha / beta**2) * ((1.0 - sigma) / 6.0) ** 2
    return (1.0 - sigma) ** 2 / (160.0 * beta)


def error_vector(state, suite) -> np.ndarray:
    """``(||s - 1g||, ||x - 1 xbar||, sqrt(n) ||xbar - x*||)`` for a tracking state.

    Frobenius norms throughout; ``g`` is the column average of the cached
    gradients.
    """
    g = state.grad.mean(axis=0)
    xbar = state.x.mean(axis=0)
    return np.array(
        [
            float(np.linalg.norm(state.s - g)),
            float(np.linalg.norm(state.x - xbar)),
            math.sqrt(state.x.shape[0]) * float(np.linalg.norm(xbar - suite.x_star)),
        ]
    )


def check_error_recursion(path: np.ndarray, rate: RateMatrix, rel_slack: float = 1e-8) -> np.ndarray:
    """Componentwise check ``z(k) <= G z(k-1)`` along an error-vector path.

    ``path`` has one row per state, initial state first. Returns one boolean
    per transition; diagnostic only, never raises on violations.
    """
    path = np.asarray(path, dtype=float)
    if path.ndim != 2 or path.shape[1] != 3:
        raise ValueError(f"expected an (steps+1, 3) path, got shape {path.shape}")
    bound = path[:-1] @ rate.matrix.T
    return np.all(path[1:] <= bound * (1.0 + rel_slack), axis=1)


@dataclass(frozen=True)
class InitialNorms:
    """Measured norms of a run's initial state, inputs to the bound formulas."""

    n: int
    xbar_dist: float      # ||xbar(0) - x*||
    tracking_err: float   # ||s(0) - 1 g(0)||
    consensus_err: float  # ||x(0) - 1 xbar(0)||

    @classmethod
    def from_record(cls, record) -> "InitialNorms":
        return cls(
            n=record.n,
            xbar_dist=record.init["dist_to_opt"] / math.sqrt(record.n),
            tracking_err=record.init["tracking_err"],
            consensus_err=record.init["consensus_err"],
        )


def _check_convex_step(eta: float, beta: float, sigma: float) -> None:
    limit = (1.0 - sigma) ** 2 / (160.0 * beta)
    if not 0 < eta <= limit * (1.0 + 1e-12):
        raise ValueError(
            f"bound requires 0 < eta <= (1-sigma)^2/(160 beta) = {limit:.6e}, got {eta:.6e}"
        )


def objective_avg_bound(t: int, eta: float, beta: float, sigma: float, init: InitialNorms) -> float:
    """O(1/t) bound on the average running-average objective error.

    After ``t+1`` rounds the average over agents of
    ``f(running average) - f*`` is at most

        (1/(t+1)) * { ||xbar(0)-x*||^2 / (2 eta)
                      + (36 beta/(1-sigma)^2)
                        * [ ||s(0)-1g(0)||/(beta sqrt(n))
                            + 2 ||x(0)-1xbar(0)|| / sqrt(n) ]^2 }

    provided ``0 < eta <= (1-sigma)^2/(160 beta)``.
    """
    if t < 0:
        raise ValueError(f"t must be >= 0, got {t}")
    _check_convex_step(eta, beta, sigma)
    sqrt_n = math.sqrt(init.n)
    mix = init.tracking_err / (beta * sqrt_n) + 2.0 * init.consensus_err / sqrt_n
    constant = init.xbar_dist**2 / (2.0 * eta) + 36.0 * beta / (1.0 - sigma) ** 2 * mix**2
    return constant / (t + 1.0)


def consensus_min_bound(t: int, beta: float, sigma: float, init: InitialNorms) -> float:
    """O(1/t) bound on the smallest squared consensus error seen so far:

        min_{0<=k<=t} ||x(k) - 1 xbar(k)||^2
          <= (1/t) * { (1740/(1-sigma)^4) [ ||s(0)-1g(0)||/beta
                                            + 2 ||x(0)-1xbar(0)|| ]^2
                       + (24/(1-sigma)^2) n ||xbar(0)-x*||^2 }

    under the same step rule as :func:`objective_avg_bound`.
    """
    if t < 1:
        raise ValueError(f"t must be >= 1, got {t}")
    mix = init.tracking_err / beta + 2.0 * init.consensus_err
    constant = (
        1740.0 / (1.0 - sigma) ** 4 * mix**2
        + 24.0 / (1.0 - sigma) ** 2 * init.n * init.xbar_dist**2
    )
    return constant / t


@dataclass(frozen=True)
class EnvelopeConstants:
    """Constants of the consensus-error envelope ``A1 theta^k + A2 sum theta^(k-1-l) ||g(l)||``."""

    a1: float
    a2: float
    theta: float

    @classmethod
    def from_init(cls, init: InitialNorms, eta: float, beta: float, sigma: float) -> "EnvelopeConstants":
        return cls(
            a1=init.tracking_err / beta + 2.0 * init.consensus_err,
            a2=eta * math.sqrt(init.n),
            theta=(1.0 + sigma) / 2.0,
        )


def consensus_error_envelope(
    consensus_errs: np.ndarray,
    g_norms: np.ndarray,
    constants: EnvelopeConstants,
    rel_slack: float = 1e-8,
) -> np.ndarray:
    """Stepwise check of the consensus-error envelope.

    Both inputs include the initial state at index 0; ``g_norms[l]`` is the
    average-gradient norm at round ``l``. Returns one boolean per state.
    """
    consensus_errs = np.asarray(consensus_errs, dtype=float)
    g_norms = np.asarray(g_norms, dtype=float)
    if consensus_errs.shape != g_norms.shape:
        raise ValueError("consensus errors and gradient norms must align")
    theta, a1, a2 = constants.theta, constants.a1, constants.a2
    ok = np.empty(consensus_errs.shape[0], dtype=bool)
    decayed_a1 = a1
    tail = 0.0
    ok[0] = consensus_errs[0] <= a1 * (1.0 + rel_slack)
    for k in range(1, consensus_errs.shape[0]):
        tail = theta * tail + g_norms[k - 1]
        decayed_a1 *= theta
        ok[k] = consensus_errs[k] <= (decayed_a1 + a2 * tail) * (1.0 + rel_slack)
    return ok
