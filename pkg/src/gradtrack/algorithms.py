"""Round-synchronous iterations: gradient tracking, DGD, and centralized descent.

Gradient tracking keeps, per agent, an estimate ``x_i`` of the minimizer and a
tracker ``s_i`` of the network-average gradient, updated each round as

    x(t+1) = W x(t) - eta * s(t)
    s(t+1) = W s(t) + grad(t+1) - grad(t),    s(0) = grad(0)

with ``grad(t)`` the row-stack of local gradients at ``x(t)``. The update
order inside a step is fixed (x first, then gradients at the new x, then s)
so the cached gradient always matches the stored state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .objectives import ObjectiveSuite

ALGORITHMS = ("gt", "dgd_fixed", "dgd_vanishing", "cgd")


class DivergenceError(RuntimeError):
    """Iterates left the finite range; carries the failing iteration and norm."""

    def __init__(self, message: str, iteration: int | None = None, norm: float | None = None):
        super().__init__(message)
        self.iteration = iteration
        self.norm = norm


@dataclass(frozen=True)
class StepSchedule:
    """Fixed step ``eta`` or vanishing ``eta / sqrt(t+1)``."""

    kind: str
    eta: float

    def __post_init__(self) -> None:
        if self.kind not in ("fixed", "vanishing"):
            raise ValueError(f"unknown schedule kind {self.kind!r}")
        if self.eta <= 0:
            raise ValueError(f"step size must be positive, got {self.eta}")

    def at(self, t: int) -> float:
        if self.kind == "fixed":
            return self.eta
        return self.eta / math.sqrt(t + 1.0)


@dataclass
class TrackingState:
    """Iteration index plus the stacked estimates, trackers, and cached gradients."""

    t: int
    x: np.ndarray
    s: np.ndarray
    grad: np.ndarray


def gt_init(suite: ObjectiveSuite, x0: np.ndarray) -> TrackingState:
    """Start gradient tracking: trackers seeded with the local gradients at x0."""
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (suite.n, suite.dim):
        raise ValueError(f"x0 must have shape {(suite.n, suite.dim)}, got {x0.shape}")
    if not np.all(np.isfinite(x0)):
        raise ValueError("x0 must be finite")
    grad = suite.gradient_stack(x0)
    return TrackingState(t=0, x=x0.copy(), s=grad.copy(), grad=grad)


def gt_step(state: TrackingState, w: np.ndarray, eta: float, suite: ObjectiveSuite) -> TrackingState:
    """One gradient-tracking round."""
    if eta <= 0:
        raise ValueError(f"step size must be positive, got {eta}")
    x_new = w @ state.x - eta * state.s
    if not np.all(np.isfinite(x_new)):
        raise DivergenceError(
            f"non-finite iterate at round {state.t + 1}", iteration=state.t + 1
        )
    grad_new = suite.gradient_stack(x_new)
    # Grouping (W s - grad) + grad_new keeps the tracker bitwise equal to the
    # gradient when n = 1, where W s - grad vanishes exactly.
    s_new = (w @ state.s - state.grad) + grad_new
    return TrackingState(t=state.t + 1, x=x_new, s=s_new, grad=grad_new)


def dgd_step(x: np.ndarray, t: int, w: np.ndarray, schedule: StepSchedule, suite: ObjectiveSuite) -> np.ndarray:
    """One DGD round: consensus then a local-gradient step with ``eta_t``."""
    x_new = w @ x - schedule.at(t) * suite.gradient_stack(x)
    if not np.all(np.isfinite(x_new)):
        raise DivergenceError(f"non-finite iterate at round {t + 1}", iteration=t + 1)
    return x_new


def cgd_step(x: np.ndarray, eta: float, suite: ObjectiveSuite) -> np.ndarray:
    """One centralized gradient step on the average function."""
    if eta < 0:
        raise ValueError(f"step size must be nonnegative, got {eta}")
    x_new = x - eta * suite.global_gradient(x)
    if not np.all(np.isfinite(x_new)):
        raise DivergenceError("non-finite centralized iterate")
    return x_new


@dataclass
class TrajectoryRecord:
    """Per-round metric streams for one run.

    Rows cover rounds ``1..T`` (after each step); the matching metrics of the
    initial state live in ``init``. ``runavg_obj_err`` uses the running
    average of each agent's post-initial iterates. For gradient tracking the
    error vector per round is ``(tracking_err, consensus_err, dist_to_opt)``.
    """

    algorithm: str
    n: int
    eta: float | None
    schedule: StepSchedule | None
    t: np.ndarray
    avg_obj_err: np.ndarray
    runavg_obj_err: np.ndarray | None
    consensus_err: np.ndarray | None
    tracking_err: np.ndarray | None
    dist_to_opt: np.ndarray | None
    g_norm: np.ndarray | None
    init: dict[str, float]
    identities: dict[str, np.ndarray] | None
    max_state_norm: float
    reached_at: int | None
    final_x: np.ndarray
    final_s: np.ndarray | None = None
    extra: dict = field(default_factory=dict)

    @property
    def rounds(self) -> int:
        return int(self.t.shape[0])

    def error_vector_path(self) -> np.ndarray:
        """Stacked ``(rounds+1, 3)`` error vectors, initial state first."""
        if self.tracking_err is None:
            raise ValueError("error vectors are only recorded for gradient tracking")
        head = np.array(
            [[self.init["tracking_err"], self.init["consensus_err"], self.init["dist_to_opt"]]]
        )
        body = np.column_stack([self.tracking_err, self.consensus_err, self.dist_to_opt])
        return np.vstack([head, body])

    def g_norm_path(self) -> np.ndarray:
        """Average-gradient norms ``(rounds+1,)`` including the initial state."""
        if self.g_norm is None:
            raise ValueError("gradient norms were not recorded for this run")
        return np.concatenate([[self.init["g_norm"]], self.g_norm])


def run(
    algorithm: str,
    suite: ObjectiveSuite,
    rounds: int,
    x0: np.ndarray,
    *,
    w: np.ndarray | None = None,
    eta: float | None = None,
    schedule: StepSchedule | None = None,
    collect: str = "full",
    track_identities: bool = False,
    target_gap: float | None = None,
    max_norm_factor: float = 1e12,
) -> TrajectoryRecord:
    """Execute ``rounds`` synchronous rounds, recording metrics each round.

    ``collect="light"`` records only the average objective error (used by
    long tolerance-hunting runs); ``target_gap`` stops at the first round
    whose average objective error falls at or below it. Identity streams
    (average-state residuals and gradient-difference norms) are recorded when
    ``track_identities`` is set, for gradient tracking only.

    Deterministic given its inputs. Raises ``DivergenceError`` with the
    failing round index if an iterate leaves the finite range or exceeds
    ``max_norm_factor`` times the initial scale.
    """
    if rounds < 1:
        raise ValueError(f"rounds must be >= 1, got {rounds}")
    if algorithm not in ALGORITHMS:
        raise ValueError(f"unknown algorithm {algorithm!r}; expected one of {ALGORITHMS}")
    if collect not in ("full", "light"):
        raise ValueError(f"collect must be 'full' or 'light', got {collect!r}")
    if algorithm == "gt":
        if eta is None or w is None:
            raise ValueError("gradient tracking needs a weight matrix and a step size")
        return _run_gt(
            suite, rounds, np.asarray(x0, dtype=float), np.asarray(w, dtype=float),
            float(eta), collect, track_identities, target_gap, max_norm_factor,
        )
    if algorithm in ("dgd_fixed", "dgd_vanishing"):
        if w is None:
            raise ValueError("DGD needs a weight matrix")
        if schedule is None:
            if eta is None:
                raise ValueError("DGD needs a schedule or a step size")
            kind = "fixed" if algorithm == "dgd_fixed" else "vanishing"
            schedule = StepSchedule(kind, float(eta))
        return _run_dgd(
            algorithm, suite, rounds, np.asarray(x0, dtype=float),
            np.asarray(w, dtype=float), schedule, collect, target_gap, max_norm_factor,
        )
    if eta is None:
        raise ValueError("centralized descent needs a step size")
    return _run_cgd(suite, rounds, np.asarray(x0, dtype=float), float(eta),
                    collect, target_gap, max_norm_factor)


def _frob(a: np.ndarray) -> float:
    return float(np.linalg.norm(a))


def _run_gt(suite, rounds, x0, w, eta, collect, track_identities, target_gap, max_norm_factor):
    state = gt_init(suite, x0)
    n = suite.n
    sqrt_n = math.sqrt(n)
    full = collect == "full"
    norm_cap = max_norm_factor * (1.0 + _frob(x0))

    g = state.grad.mean(axis=0)
    xbar = state.x.mean(axis=0)
    init = {
        "avg_obj_err": float(suite.objective_gaps(state.x).mean()),
        "consensus_err": _frob(state.x - xbar),
        "tracking_err": _frob(state.s - g),
        "dist_to_opt": sqrt_n * float(np.linalg.norm(xbar - suite.x_star)),
        "g_norm": float(np.linalg.norm(g)),
        "sbar_gap": _frob(state.s.mean(axis=0) - g),
        "g_minus_h": float(np.linalg.norm(g - suite.global_gradient(xbar))),
    }

    avg_obj = np.empty(rounds)
    runavg_obj = np.empty(rounds) if full else None
    consensus = np.empty(rounds) if full else None
    tracking = np.empty(rounds) if full else None
    dist = np.empty(rounds) if full else None
    g_norms = np.empty(rounds) if full else None
    ident = (
        {k: np.empty(rounds) for k in
         ("sbar_gap", "xbar_resid", "grad_diff", "x_diff", "gbar_diff", "g_minus_h")}
        if track_identities else None
    )

    xhat = np.zeros_like(state.x)
    max_norm = _frob(state.x)
    reached_at = None
    done = 0
    for k in range(1, rounds + 1):
        prev_x, prev_g, prev_grad = state.x, g, state.grad
        prev_xbar, prev_sbar = xbar, state.s.mean(axis=0)
        state = gt_step(state, w, eta, suite)
        x_norm = _frob(state.x)
        if x_norm > norm_cap:
            raise DivergenceError(
                f"iterate norm {x_norm:.3e} exceeded {norm_cap:.3e} at round {k}",
                iteration=k, norm=x_norm,
            )
        max_norm = max(max_norm, x_norm)

        g = state.grad.mean(axis=0)
        xbar = state.x.mean(axis=0)
        gaps = suite.objective_gaps(state.x)
        avg_obj[k - 1] = gaps.mean()
        if full:
            xhat += (state.x - xhat) / k
            runavg_obj[k - 1] = suite.objective_gaps(xhat).mean()
            consensus[k - 1] = _frob(state.x - xbar)
            tracking[k - 1] = _frob(state.s - g)
            dist[k - 1] = sqrt_n * float(np.linalg.norm(xbar - suite.x_star))
            g_norms[k - 1] = float(np.linalg.norm(g))
        if ident is not None:
            ident["sbar_gap"][k - 1] = _frob(state.s.mean(axis=0) - g)
            ident["xbar_resid"][k - 1] = float(
                np.linalg.norm(xbar - (prev_xbar - eta * prev_sbar))
            )
            ident["grad_diff"][k - 1] = _frob(state.grad - prev_grad)
            ident["x_diff"][k - 1] = _frob(state.x - prev_x)
            ident["gbar_diff"][k - 1] = float(np.linalg.norm(g - prev_g))
            ident["g_minus_h"][k - 1] = float(
                np.linalg.norm(g - suite.global_gradient(xbar))
            )
        done = k
        if target_gap is not None and avg_obj[k - 1] <= target_gap:
            reached_at = k
            break

    sl = slice(0, done)
    return TrajectoryRecord(
        algorithm="gt", n=n, eta=eta, schedule=None,
        t=np.arange(1, done + 1),
        avg_obj_err=avg_obj[sl],
        runavg_obj_err=runavg_obj[sl] if full else None,
        consensus_err=consensus[sl] if full else None,
        tracking_err=tracking[sl] if full else None,
        dist_to_opt=dist[sl] if full else None,
        g_norm=g_norms[sl] if full else None,
        init=init,
        identities={k: v[sl] for k, v in ident.items()} if ident is not None else None,
        max_state_norm=max_norm,
        reached_at=reached_at,
        final_x=state.x,
        final_s=state.s,
    )


def _run_dgd(algorithm, suite, rounds, x0, w, schedule, collect, target_gap, max_norm_factor):
    if x0.shape != (suite.n, suite.dim):
        raise ValueError(f"x0 must have shape {(suite.n, suite.dim)}, got {x0.shape}")
    n = suite.n
    sqrt_n = math.sqrt(n)
    full = collect == "full"
    norm_cap = max_norm_factor * (1.0 + _frob(x0))

    x = x0.copy()
    xbar = x.mean(axis=0)
    init = {
        "avg_obj_err": float(suite.objective_gaps(x).mean()),
        "consensus_err": _frob(x - xbar),
        "dist_to_opt": sqrt_n * float(np.linalg.norm(xbar - suite.x_star)),
    }

    avg_obj = np.empty(rounds)
    runavg_obj = np.empty(rounds) if full else None
    consensus = np.empty(rounds) if full else None
    dist = np.empty(rounds) if full else None

    xhat = np.zeros_like(x)
    max_norm = _frob(x)
    reached_at = None
    done = 0
    for k in range(1, rounds + 1):
        x = dgd_step(x, k - 1, w, schedule, suite)
        x_norm = _frob(x)
        if x_norm > norm_cap:
            raise DivergenceError(
                f"iterate norm {x_norm:.3e} exceeded {norm_cap:.3e} at round {k}",
                iteration=k, norm=x_norm,
            )
        max_norm = max(max_norm, x_norm)
        avg_obj[k - 1] = suite.objective_gaps(x).mean()
        if full:
            xbar = x.mean(axis=0)
            xhat += (x - xhat) / k
            runavg_obj[k - 1] = suite.objective_gaps(xhat).mean()
            consensus[k - 1] = _frob(x - xbar)
            dist[k - 1] = sqrt_n * float(np.linalg.norm(xbar - suite.x_star))
        done = k
        if target_gap is not None and avg_obj[k - 1] <= target_gap:
            reached_at = k
            break

    sl = slice(0, done)
    return TrajectoryRecord(
        algorithm=algorithm, n=n, eta=schedule.eta, schedule=schedule,
        t=np.arange(1, done + 1),
        avg_obj_err=avg_obj[sl],
        runavg_obj_err=runavg_obj[sl] if full else None,
        consensus_err=consensus[sl] if full else None,
        tracking_err=None,
        dist_to_opt=dist[sl] if full else None,
        g_norm=None,
        init=init,
        identities=None,
        max_state_norm=max_norm,
        reached_at=reached_at,
        final_x=x,
    )


def _run_cgd(suite, rounds, x0, eta, collect, target_gap, max_norm_factor):
    if x0.ndim == 2:
        x0 = x0.mean(axis=0)
    if x0.shape != (suite.dim,):
        raise ValueError(f"x0 must be a point of dimension {suite.dim}, got {x0.shape}")
    full = collect == "full"
    norm_cap = max_norm_factor * (1.0 + float(np.linalg.norm(x0)))

    x = x0.copy()
    init = {
        "avg_obj_err": float(suite.objective_gaps(x[None, :])[0]),
        "consensus_err": 0.0,
        "dist_to_opt": float(np.linalg.norm(x - suite.x_star)),
    }

    avg_obj = np.empty(rounds)
    runavg_obj = np.empty(rounds) if full else None
    dist = np.empty(rounds) if full else None

    xhat = np.zeros_like(x)
    max_norm = float(np.linalg.norm(x))
    reached_at = None
    done = 0
    for k in range(1, rounds + 1):
        x = cgd_step(x, eta, suite)
        x_norm = float(np.linalg.norm(x))
        if x_norm > norm_cap:
            raise DivergenceError(
                f"iterate norm {x_norm:.3e} exceeded {norm_cap:.3e} at round {k}",
                iteration=k, norm=x_norm,
            )
        max_norm = max(max_norm, x_norm)
        avg_obj[k - 1] = suite.objective_gaps(x[None, :])[0]
        if full:
            xhat += (x - xhat) / k
            runavg_obj[k - 1] = suite.objective_gaps(xhat[None, :])[0]
            dist[k - 1] = float(np.linalg.norm(x - suite.x_star))
        done = k
        if target_gap is not None and avg_obj[k - 1] <= target_gap:
            reached_at = k
            break

    sl = slice(0, done)
    return TrajectoryRecord(
        algorithm="cgd", n=1, eta=eta, schedule=None,
        t=np.arange(1, done + 1),
        avg_obj_err=avg_obj[sl],
        runavg_obj_err=runavg_obj[sl] if full else None,
        consensus_err=np.zeros(done) if full else None,
        tracking_err=None,
        dist_to_opt=dist[sl] if full else None,
        g_norm=None,
        init=init,
        identities=None,
        max_state_norm=max_norm,
        reached_at=reached_at,
        final_x=x,
    )
