"""Objective suites: local functions with gradients, curvature constants, and
minimizer oracles.

A suite bundles ``n`` local objectives on R^dim with exact gradient oracles,
per-agent smoothness/strong-convexity constants (``beta``; ``alpha = 0``
means not strongly convex), and an exact or high-accuracy minimizer
``(x_star, f_star)`` of the average function. Gradients follow the row-vector
convention: points and gradients are 1-D arrays of length ``dim``; stacked
agent states are ``(n, dim)`` with one agent per row.

Suites are immutable after construction and their oracles are reentrant.
"""

from __future__ import annotations

import json

import numpy as np

from .seeding import substream


class DegenerateDataError(RuntimeError):
    """Generated data admits no usable minimizer; regenerate with a new seed."""


class OracleFailureError(RuntimeError):
    """A minimizer oracle failed to reach its required accuracy."""


def _sigmoid(z: np.ndarray) -> np.ndarray:
    # 0.5*(1+tanh(z/2)) equals the logistic function and never overflows
    return 0.5 * (1.0 + np.tanh(0.5 * z))


class ObjectiveSuite:
    """Base class; subclasses fill in the per-agent oracles."""

    n: int
    dim: int
    alpha: float
    beta: float
    x_star: np.ndarray
    f_star: float

    # -- per-agent oracles -------------------------------------------------

    def local_value(self, i: int, x: np.ndarray) -> float:
        raise NotImplementedError

    def local_gradient(self, i: int, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def gradient_stack(self, xs: np.ndarray) -> np.ndarray:
        """Rows ``grad f_i(xs[i])`` for an ``(n, dim)`` state matrix."""
        return np.stack([self.local_gradient(i, xs[i]) for i in range(self.n)])

    # -- average-function oracles ------------------------------------------

    def global_value(self, x: np.ndarray) -> float:
        """Average objective ``f(x) = (1/n) sum_i f_i(x)``."""
        return float(self.global_values(np.asarray(x, dtype=float)[None, :])[0])

    def global_values(self, xs: np.ndarray) -> np.ndarray:
        """``f`` evaluated at each row of ``xs``."""
        _check_finite(xs)
        out = np.empty(xs.shape[0])
        for k, row in enumerate(xs):
            out[k] = sum(self.local_value(i, row) for i in range(self.n)) / self.n
        return out

    def global_gradient(self, x: np.ndarray) -> np.ndarray:
        """Gradient of the average function at a single point.

        Evaluated through the same batched path as the per-agent oracles so
        single-agent suites agree with them bitwise.
        """
        x = np.asarray(x, dtype=float)
        tiled = np.repeat(x[None, :], self.n, axis=0)
        return self.gradient_stack(tiled).mean(axis=0)

    def objective_gaps(self, xs: np.ndarray) -> np.ndarray:
        """``f(xs[k]) - f_star`` per row; subclasses may use better-conditioned forms."""
        return self.global_values(xs) - self.f_star

    # -- serialization -----------------------------------------------------

    def to_json(self) -> str:
        return json.dumps(self._state_dict(), sort_keys=True)

    def _state_dict(self) -> dict:
        raise NotImplementedError


def _check_finite(x: np.ndarray) -> None:
    if not np.all(np.isfinite(x)):
        raise ValueError("objective evaluated at a non-finite point")


class SquareLossSuite(ObjectiveSuite):
    """Per-agent square losses ``f_i(x) = sum_m (<u_im, x> - v_im)^2``.

    ``alpha``/``beta`` are the extreme eigenvalues, over agents, of the
    per-agent Hessians ``2 sum_m u_im u_im^T``; the minimizer comes from the
    pooled normal equations.
    """

    kind = "square_loss"

    def __init__(self, features: np.ndarray, targets: np.ndarray):
        features = np.asarray(features, dtype=float)
        targets = np.asarray(targets, dtype=float)
        if features.ndim != 3 or targets.shape != features.shape[:2]:
            raise ValueError(
                f"features must be (n, samples, dim) with matching targets, "
                f"got {features.shape} and {targets.shape}"
            )
        self.features = features
        self.targets = targets
        self.n, _, self.dim = features.shape

        hessians = 2.0 * np.einsum("imk,iml->ikl", features, features)
        eigs = np.linalg.eigvalsh(hessians)
        self.alpha = float(max(eigs[:, 0].min(), 0.0))
        self.beta = float(eigs[:, -1].max())

        gram = np.einsum("imk,iml->kl", features, features)
        rhs = np.einsum("imk,im->k", features, targets)
        try:
            self.x_star = np.linalg.solve(gram, rhs)
        except np.linalg.LinAlgError as exc:
            raise DegenerateDataError(
                "pooled normal equations are singular; regenerate the data"
            ) from exc
        self.f_star = float(self.global_values(self.x_star[None, :])[0])
        # f(y) - f(x_star) = (y - x_star) @ _gap_h @ (y - x_star) exactly
        self._gap_h = gram / self.n

    def local_value(self, i: int, x: np.ndarray) -> float:
        _check_finite(x)
        r = self.features[i] @ x - self.targets[i]
        return float(r @ r)

    def local_gradient(self, i: int, x: np.ndarray) -> np.ndarray:
        _check_finite(x)
        r = self.features[i] @ x - self.targets[i]
        return 2.0 * (r @ self.features[i])

    def gradient_stack(self, xs: np.ndarray) -> np.ndarray:
        r = np.einsum("imk,ik->im", self.features, xs) - self.targets
        return 2.0 * np.einsum("im,imk->ik", r, self.features)

    def global_values(self, xs: np.ndarray) -> np.ndarray:
        _check_finite(xs)
        flat = self.features.reshape(-1, self.dim)
        r = flat @ xs.T - self.targets.reshape(-1)[:, None]
        return np.einsum("mk,mk->k", r, r) / self.n

    def objective_gaps(self, xs: np.ndarray) -> np.ndarray:
        d = xs - self.x_star
        return np.einsum("ik,kl,il->i", d, self._gap_h, d)

    def _state_dict(self) -> dict:
        return {
            "kind": self.kind,
            "features": self.features.tolist(),
            "targets": self.targets.tolist(),
            "alpha": self.alpha,
            "beta": self.beta,
            "x_star": self.x_star.tolist(),
            "f_star": self.f_star,
        }


class LogisticLossSuite(ObjectiveSuite):
    """Per-agent logistic losses ``f_i(x) = sum_m [ln(1+e^z) - v_im z]``,
    ``z = <u_im, x>``.

    Not globally strongly convex: ``alpha`` is recorded as 0 and
    ``curvature_at_minimizer`` carries the smallest Hessian eigenvalue of the
    average function at ``x_star`` as a local proxy. ``beta`` is the largest,
    over agents, of ``lambda_max(sum_m u_im u_im^T) / 4``.
    """

    kind = "logistic_loss"

    NEWTON_CAP = 200

    def __init__(
        self,
        features: np.ndarray,
        targets: np.ndarray,
        *,
        minimizer: np.ndarray | None = None,
        min_value: float | None = None,
    ):
        features = np.asarray(features, dtype=float)
        targets = np.asarray(targets, dtype=float)
        if features.ndim != 3 or targets.shape != features.shape[:2]:
            raise ValueError("features must be (n, samples, dim) with matching targets")
        if not np.all((targets == 0.0) | (targets == 1.0)):
            raise ValueError("logistic targets must be 0/1")
        self.features = features
        self.targets = targets
        self.n, _, self.dim = features.shape
        self.alpha = 0.0
        grams = np.einsum("imk,iml->ikl", features, features)
        self.beta = float(np.linalg.eigvalsh(grams)[:, -1].max() / 4.0)

        if minimizer is not None and min_value is not None:
            self.x_star = np.asarray(minimizer, dtype=float)
            self.f_star = float(min_value)
        else:
            self.x_star = self._solve_minimizer()
            self.f_star = self.global_value(self.x_star)
        hess = self._pooled_hessian(self.x_star)
        self.curvature_at_minimizer = float(np.linalg.eigvalsh(hess)[0])

    def local_value(self, i: int, x: np.ndarray) -> float:
        _check_finite(x)
        z = self.features[i] @ x
        return float(np.logaddexp(0.0, z).sum() - self.targets[i] @ z)

    def local_gradient(self, i: int, x: np.ndarray) -> np.ndarray:
        _check_finite(x)
        z = self.features[i] @ x
        return (_sigmoid(z) - self.targets[i]) @ self.features[i]

    def gradient_stack(self, xs: np.ndarray) -> np.ndarray:
        z = np.einsum("imk,ik->im", self.features, xs)
        return np.einsum("im,imk->ik", _sigmoid(z) - self.targets, self.features)

    def global_values(self, xs: np.ndarray) -> np.ndarray:
        _check_finite(xs)
        flat = self.features.reshape(-1, self.dim)
        z = flat @ xs.T
        return (np.logaddexp(0.0, z).sum(axis=0) - self.targets.reshape(-1) @ z) / self.n

    def _pooled_hessian(self, x: np.ndarray) -> np.ndarray:
        flat = self.features.reshape(-1, self.dim)
        p = _sigmoid(flat @ x)
        return (flat * (p * (1.0 - p))[:, None]).T @ flat / self.n

    def _check_not_separated(self, x: np.ndarray) -> None:
        # All samples near-perfectly classified means the data is linearly
        # separated and the true minimizer sits at infinity.
        z = self.features.reshape(-1, self.dim) @ x
        if np.abs(_sigmoid(z) - self.targets.reshape(-1)).max() < 1e-3:
            raise DegenerateDataError(
                "logistic data is linearly separated; the pooled minimizer "
                "diverges, regenerate with a new seed"
            )

    def _solve_minimizer(self) -> np.ndarray:
        # Damped Newton on the pooled average; the objective is convex and
        # smooth so this converges globally unless the data is separable.
        tol = 1e-12 * self.beta
        x = np.zeros(self.dim)
        fx = self.global_value(x)
        for _ in range(self.NEWTON_CAP):
            grad = self.global_gradient(x)
            if np.linalg.norm(grad) <= tol:
                self._check_not_separated(x)
                return x
            if np.linalg.norm(x) > 1e4:
                raise DegenerateDataError(
                    "pooled logistic minimizer diverges (separable data)"
                )
            try:
                step = np.linalg.solve(self._pooled_hessian(x), grad)
            except np.linalg.LinAlgError as exc:
                raise DegenerateDataError(
                    "singular logistic Hessian; pooled minimizer unreachable"
                ) from exc
            t = 1.0
            decrement = 1e-4 * float(grad @ step)
            for _ in range(60):
                candidate = x - t * step
                fc = self.global_value(candidate)
                if fc <= fx - t * decrement:
                    x, fx = candidate, fc
                    break
                t *= 0.5
            else:
                raise OracleFailureError("logistic line search stalled")
        raise OracleFailureError(
            f"logistic minimizer did not reach gradient norm {tol:.3e} "
            f"in {self.NEWTON_CAP} Newton steps"
        )

    def _state_dict(self) -> dict:
        return {
            "kind": self.kind,
            "features": self.features.tolist(),
            "targets": self.targets.tolist(),
            "alpha": self.alpha,
            "beta": self.beta,
            "x_star": self.x_star.tolist(),
            "f_star": self.f_star,
            "curvature_at_minimizer": self.curvature_at_minimizer,
        }


class QuarticTailSuite(ObjectiveSuite):
    """Scalar objectives ``f_i(x) = u(x) + b_i x`` with ``sum_i b_i = 0``.

    The core is ``u(x) = x^4/4`` for ``|x| <= 1`` and ``|x| - 3/4`` outside,
    a C^1 convex function whose curvature vanishes at the minimizer, so the
    average function has ``x_star = 0`` and ``f_star = 0`` exactly. Smoothness
    constant ``beta = 3`` (the peak of ``u''``); ``alpha = 0``.
    """

    kind = "quartic_tail"

    def __init__(self, tilts: np.ndarray):
        tilts = np.asarray(tilts, dtype=float)
        if tilts.ndim != 1:
            raise ValueError("tilts must be a 1-D array, one entry per agent")
        self.tilts = tilts
        self.n = tilts.shape[0]
        self.dim = 1
        self.alpha = 0.0
        self.beta = 3.0
        self.x_star = np.zeros(1)
        self.f_star = 0.0
        self._tilt_mean = float(tilts.sum()) / self.n

    @staticmethod
    def core_value(y):
        y = np.asarray(y, dtype=float)
        return np.where(np.abs(y) <= 1.0, 0.25 * y**4, np.abs(y) - 0.75)

    @staticmethod
    def core_gradient(y):
        y = np.asarray(y, dtype=float)
        return np.where(np.abs(y) <= 1.0, y**3, np.sign(y))

    def local_value(self, i: int, x: np.ndarray) -> float:
        _check_finite(x)
        return float(self.core_value(x[0]) + self.tilts[i] * x[0])

    def local_gradient(self, i: int, x: np.ndarray) -> np.ndarray:
        _check_finite(x)
        return np.array([float(self.core_gradient(x[0])) + self.tilts[i]])

    def gradient_stack(self, xs: np.ndarray) -> np.ndarray:
        return (self.core_gradient(xs[:, 0]) + self.tilts)[:, None]

    def global_values(self, xs: np.ndarray) -> np.ndarray:
        _check_finite(xs)
        return self.core_value(xs[:, 0]) + self._tilt_mean * xs[:, 0]

    def _state_dict(self) -> dict:
        return {
            "kind": self.kind,
            "tilts": self.tilts.tolist(),
            "alpha": self.alpha,
            "beta": self.beta,
            "x_star": self.x_star.tolist(),
            "f_star": self.f_star,
        }


# ---------------------------------------------------------------------------
# Generators for the three benchmark families
# ---------------------------------------------------------------------------


def _regression_features(n: int, samples: int, dim: int, rng: np.random.Generator):
    """Shared recipe: planted parameter uniform on [0,1]^dim; feature rows
    with the last coordinate pinned to 1 and the rest i.i.d. N(0, 25)."""
    planted = rng.uniform(0.0, 1.0, dim)
    features = np.ones((n, samples, dim))
    if dim > 1:
        features[:, :, :-1] = rng.normal(0.0, 5.0, (n, samples, dim - 1))
    return planted, features


def gen_linear_regression(n: int, samples: int, dim: int, seed: int) -> SquareLossSuite:
    """Square-loss suite with noisy linear targets from a planted parameter."""
    if min(n, samples, dim) < 1:
        raise ValueError("n, samples, and dim must be positive")
    rng = substream(seed, 0)
    planted, features = _regression_features(n, samples, dim, rng)
    targets = features @ planted + rng.normal(0.0, 1.0, (n, samples))
    return SquareLossSuite(features, targets)


def gen_logistic_regression(n: int, samples: int, dim: int, seed: int) -> LogisticLossSuite:
    """Logistic suite with Bernoulli labels whose log-odds follow the planted
    parameter."""
    if min(n, samples, dim) < 1:
        raise ValueError("n, samples, and dim must be positive")
    rng = substream(seed, 0)
    planted, features = _regression_features(n, samples, dim, rng)
    probs = _sigmoid(features @ planted)
    targets = (rng.random((n, samples)) < probs).astype(float)
    return LogisticLossSuite(features, targets)


def gen_quartic_tail(n: int, seed: int) -> QuarticTailSuite:
    """Scalar quartic-core suite with zero-sum uniform tilts.

    The tilts are mean-subtracted and the last entry is then forced to the
    exact negated partial sum, so the average function equals the core and
    ``f_star = 0`` is exact in floating point.
    """
    if n < 1:
        raise ValueError("n must be positive")
    rng = substream(seed, 0)
    tilts = rng.uniform(-1.0, 1.0, n)
    tilts -= tilts.mean()
    tilts[-1] = -tilts[:-1].sum()
    return QuarticTailSuite(tilts)


def suite_from_json(text: str) -> ObjectiveSuite:
    """Rebuild a suite from its serialized form without re-solving oracles."""
    doc = json.loads(text)
    kind = doc.get("kind")
    if kind == SquareLossSuite.kind:
        return SquareLossSuite(np.array(doc["features"]), np.array(doc["targets"]))
    if kind == LogisticLossSuite.kind:
        return LogisticLossSuite(
            np.array(doc["features"]),
            np.array(doc["targets"]),
            minimizer=np.array(doc["x_star"]),
            min_value=doc["f_star"],
        )
    if kind == QuarticTailSuite.kind:
        return QuarticTailSuite(np.array(doc["tilts"]))
    raise ValueError(f"unknown suite kind {kind!r}")


def finite_diff_check(suite: ObjectiveSuite, trials: int, seed: int) -> float:
    """Worst relative error of the gradient oracles against central differences.

    Points are drawn standard-normal; the step is ``1e-6 * (1 + ||x||)``.
    """
    if trials < 1:
        raise ValueError("trials must be positive")
    rng = substream(seed, 0)
    worst = 0.0
    for _ in range(trials):
        i = int(rng.integers(suite.n))
        x = rng.normal(0.0, 1.0, suite.dim)
        grad = suite.local_gradient(i, x)
        h = 1e-6 * (1.0 + np.linalg.norm(x))
        fd = np.empty(suite.dim)
        for k in range(suite.dim):
            e = np.zeros(suite.dim)
            e[k] = h
            fd[k] = (suite.local_value(i, x + e) - suite.local_value(i, x - e)) / (2 * h)
        err = np.linalg.norm(fd - grad) / (1.0 + np.linalg.norm(grad))
        worst = max(worst, float(err))
    return worst
