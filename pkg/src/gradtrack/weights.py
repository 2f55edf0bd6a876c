"""Doubly stochastic consensus weight matrices and their spectral gap.

The quantity ``sigma`` is the spectral norm of ``W - (1/n) 11^T``: the factor
by which one averaging round contracts disagreement. Both builders here
produce symmetric matrices, so it is computed from a symmetric
eigendecomposition of the deflated matrix; non-symmetric user-supplied
matrices fall back to singular values.
"""

from __future__ import annotations

import numpy as np

from .topology import Graph, is_connected

DEFAULT_TOL = 1e-12


def build_laplacian_weights(g: Graph) -> np.ndarray:
    """Weights ``W = I - L / (max_i d_i + 1)`` for a connected graph."""
    _require_connected(g)
    deg = g.degrees.astype(float)
    scale = 1.0 / (deg.max() + 1.0)
    w = g.adjacency() * scale
    np.fill_diagonal(w, 1.0 - deg * scale)
    return w


def build_lazy_metropolis(g: Graph) -> np.ndarray:
    """Off-diagonal ``1 / (2 max(d_i, d_j))`` on edges, remainder on the diagonal.

    Computable from local degrees only; every diagonal entry is at least 1/2.
    """
    _require_connected(g)
    deg = g.degrees.astype(float)
    w = np.zeros((g.n, g.n))
    for i, j in g.edges:
        w[i, j] = w[j, i] = 1.0 / (2.0 * max(deg[i], deg[j]))
    np.fill_diagonal(w, 1.0 - w.sum(axis=1))
    return w


def sigma(w: np.ndarray, tol: float = DEFAULT_TOL) -> float:
    """Spectral norm of ``W - (1/n) 11^T`` for a doubly stochastic ``W``.

    Raises ValueError if ``w`` is not doubly stochastic within ``tol``.
    For any connected-graph weight matrix the result lies in [0, 1).
    """
    w = np.asarray(w, dtype=float)
    _require_doubly_stochastic(w, tol)
    n = w.shape[0]
    deflated = w - 1.0 / n
    if np.abs(w - w.T).max() <= 10 * tol:
        return float(np.abs(np.linalg.eigvalsh(deflated)).max())
    return float(np.linalg.svd(deflated, compute_uv=False)[0])


def lazy_metropolis_sigma_bound(upper_n: int) -> float:
    """Upper bound ``1 - 1/(71 U^2)`` on sigma for lazy Metropolis weights.

    Valid whenever ``U`` is at least the true agent count.
    """
    if upper_n < 2:
        raise ValueError(f"agent-count bound must be >= 2, got {upper_n}")
    return 1.0 - 1.0 / (71.0 * upper_n**2)


def validate_weights(w: np.ndarray, g: Graph, tol: float = DEFAULT_TOL) -> list[str]:
    """Report contract violations of a weight matrix against its graph.

    Checks sparsity (positive exactly on edges and the diagonal), positive
    diagonal, row and column sums within ``tol``, and (informationally)
    symmetry. Returns a list of violation messages, empty when clean.
    """
    w = np.asarray(w, dtype=float)
    report: list[str] = []
    if w.shape != (g.n, g.n):
        return [f"shape {w.shape} does not match agent count {g.n}"]
    adj = g.adjacency().astype(bool)
    np.fill_diagonal(adj, True)
    if np.any(w[~adj] != 0.0):
        bad = int(np.count_nonzero(w[~adj]))
        report.append(f"{bad} nonzero entries outside the sparsity pattern")
    off_pattern = adj.copy()
    np.fill_diagonal(off_pattern, False)
    if np.any(w[off_pattern] <= 0.0):
        report.append("nonpositive weight on an edge")
    if np.any(np.diag(w) <= 0.0):
        report.append("nonpositive diagonal entry")
    row_err = np.abs(w.sum(axis=1) - 1.0).max()
    if row_err > tol:
        report.append(f"row sums deviate from 1 by {row_err:.3e} (tol {tol:.1e})")
    col_err = np.abs(w.sum(axis=0) - 1.0).max()
    if col_err > tol:
        report.append(f"column sums deviate from 1 by {col_err:.3e} (tol {tol:.1e})")
    asym = np.abs(w - w.T).max()
    if asym > tol:
        report.append(f"informational: matrix is asymmetric by {asym:.3e}")
    return report


def write_matrix_csv(w: np.ndarray, path) -> None:
    """Dump ``n`` rows of comma-separated round-trippable decimals."""
    with open(path, "w") as fh:
        for row in np.asarray(w, dtype=float):
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def _require_connected(g: Graph) -> None:
    if not is_connected(g):
        raise ValueError("weight construction requires a connected graph")


def _require_doubly_stochastic(w: np.ndarray, tol: float) -> None:
    if w.ndim != 2 or w.shape[0] != w.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {w.shape}")
    if np.any(w < -tol):
        raise ValueError("matrix has negative entries")
    row_err = np.abs(w.sum(axis=1) - 1.0).max()
    col_err = np.abs(w.sum(axis=0) - 1.0).max()
    if max(row_err, col_err) > tol:
        raise ValueError(
            f"matrix is not doubly stochastic within {tol:.1e} "
            f"(row error {row_err:.3e}, column error {col_err:.3e})"
        )
