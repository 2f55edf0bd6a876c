"""Experiment assembly and the four command implementations.

Each command builds the graph, weights, objective suite, and initial
condition from an :class:`~gradtrack.config.ExperimentConfig`, runs
whatever it needs, and writes CSV/JSON outputs. Numeric CSV cells use the
shortest decimal that round-trips to the same double; files are written
atomically and reruns of the same config are byte-identical.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass

import numpy as np

from . import bounds, topology, weights
from .algorithms import StepSchedule, TrajectoryRecord, run
from .config import ExperimentConfig
from .objectives import (
    ObjectiveSuite,
    gen_linear_regression,
    gen_logistic_regression,
    gen_quartic_tail,
)
from .seeding import derive_seed, substream


@dataclass
class Assembled:
    graph: topology.Graph
    w: np.ndarray
    sigma: float
    suite: ObjectiveSuite
    x0: np.ndarray


def build_graph(cfg: ExperimentConfig, n: int | None = None, seed: int | None = None) -> topology.Graph:
    n = cfg.graph_n if n is None else n
    seed = cfg.graph_seed if seed is None else seed
    if cfg.graph_model == "erdos_renyi":
        return topology.gen_erdos_renyi(n, cfg.graph_p, seed)
    if cfg.graph_model == "random_regular":
        return topology.gen_random_regular(n, cfg.graph_d, seed)
    if cfg.graph_model == "path":
        return topology.gen_path(n)
    return topology.gen_complete(n)


def build_weight_matrix(method: str, graph: topology.Graph) -> np.ndarray:
    if method == "laplacian":
        return weights.build_laplacian_weights(graph)
    return weights.build_lazy_metropolis(graph)


def build_suite(cfg: ExperimentConfig, n: int | None = None, seed: int | None = None) -> ObjectiveSuite:
    n = cfg.graph_n if n is None else n
    seed = cfg.data_seed if seed is None else seed
    if cfg.case == 1:
        return gen_linear_regression(n, cfg.samples, cfg.dim, seed)
    if cfg.case == 2:
        return gen_logistic_regression(n, cfg.samples, cfg.dim, seed)
    return gen_quartic_tail(n, seed)


def initial_condition(n: int, dim: int, seed: int) -> np.ndarray:
    """Rows i.i.d. Gaussian, mean 0, variance 25."""
    return substream(seed, 0).normal(0.0, 5.0, (n, dim))


def assemble(cfg: ExperimentConfig) -> Assembled:
    graph = build_graph(cfg)
    w = build_weight_matrix(cfg.weights, graph)
    sig = weights.sigma(w)
    suite = build_suite(cfg)
    x0 = initial_condition(suite.n, suite.dim, cfg.init_seed)
    return Assembled(graph=graph, w=w, sigma=sig, suite=suite, x0=x0)


def resolve_step(spec, suite: ObjectiveSuite, sigma: float, upper_n: int):
    """Return ``(eta, schedule)`` for an algorithm spec, filling defaults.

    Defaults: gradient tracking takes the recommended step for its guarantee
    (strongly convex when the suite has alpha > 0, otherwise the O(1/t)
    rule); DGD-fixed 1/(2 beta); DGD-vanishing and centralized descent
    1/beta.
    """
    if spec.eta_mode is not None:
        eta = bounds.recommend_eta(
            spec.eta_mode,
            alpha=suite.alpha,
            beta=suite.beta,
            sigma=sigma,
            upper_n=upper_n,
        )
    elif spec.eta is not None:
        eta = spec.eta
    elif spec.name == "gt":
        mode = "strongly_convex" if suite.alpha > 0 else "convex"
        eta = bounds.recommend_eta(mode, alpha=suite.alpha, beta=suite.beta, sigma=sigma)
    elif spec.name == "dgd_fixed":
        eta = 1.0 / (2.0 * suite.beta)
    else:
        eta = 1.0 / suite.beta
    if spec.name == "dgd_vanishing":
        return eta, StepSchedule("vanishing", eta)
    if spec.name == "dgd_fixed":
        return eta, StepSchedule("fixed", eta)
    return eta, None


def _fmt(value) -> str:
    return repr(float(value))


def _atomic_write(path: str, text: str) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def write_csv(path: str, header: list[str], columns: list[np.ndarray]) -> None:
    lines = [",".join(header)]
    rows = zip(*columns)
    for row in rows:
        lines.append(",".join(v if isinstance(v, str) else _fmt(v) for v in row))
    _atomic_write(path, "\n".join(lines) + "\n")


def write_json(path: str, doc: dict) -> None:
    _atomic_write(path, json.dumps(doc, sort_keys=True, indent=2) + "\n")


def fit_decay_rate(t: np.ndarray, values: np.ndarray) -> float | None:
    """Per-round decay factor from a log-linear fit over the last half."""
    half = t.shape[0] // 2
    tt, vv = t[half:], values[half:]
    mask = np.isfinite(vv) & (vv > 0)
    if mask.sum() < 2:
        return None
    slope = np.polyfit(tt[mask], np.log(vv[mask]), 1)[0]
    return float(math.exp(slope))


def _trajectory_columns(record: TrajectoryRecord, bound_a: np.ndarray | None):
    header = ["t", "avg_obj_err", "runavg_obj_err", "consensus_err"]
    cols = [record.t, record.avg_obj_err, record.runavg_obj_err, record.consensus_err]
    if record.tracking_err is not None:
        header.append("tracking_err")
        cols.append(record.tracking_err)
    header.append("dist_to_opt")
    cols.append(record.dist_to_opt)
    if record.tracking_err is not None:
        header.extend(["z1", "z2", "z3"])
        cols.extend([record.tracking_err, record.consensus_err, record.dist_to_opt])
    if bound_a is not None:
        header.append("bound_a")
        cols.append(bound_a)
    return header, cols


def _convex_bound_column(record: TrajectoryRecord, eta: float, beta: float, sigma: float):
    """O(1/t) objective bound per row, when the step qualifies."""
    if record.tracking_err is None:
        return None
    limit = (1.0 - sigma) ** 2 / (160.0 * beta)
    if not 0 < eta <= limit * (1.0 + 1e-12):
        return None
    init = bounds.InitialNorms.from_record(record)
    return np.array(
        [bounds.objective_avg_bound(int(tt) - 1, eta, beta, sigma, init) for tt in record.t]
    )


def _algo_summary(record: TrajectoryRecord, eta: float) -> dict:
    summary = {
        "eta": eta,
        "rounds": int(record.rounds),
        "final_avg_obj_err": float(record.avg_obj_err[-1]),
        "final_runavg_obj_err": float(record.runavg_obj_err[-1]),
        "final_consensus_err": float(record.consensus_err[-1]),
        "final_dist_to_opt": float(record.dist_to_opt[-1]),
        "fitted_rate": fit_decay_rate(record.t, record.avg_obj_err),
    }
    if record.schedule is not None:
        summary["schedule"] = record.schedule.kind
    return summary


def _run_one(cfg, spec, parts: Assembled):
    eta, schedule = resolve_step(spec, parts.suite, parts.sigma, cfg.upper_n or parts.suite.n)
    record = run(
        spec.name,
        parts.suite,
        cfg.rounds,
        parts.x0,
        w=parts.w,
        eta=eta,
        schedule=schedule,
        collect="full",
    )
    return eta, record


def experiment_run(cfg: ExperimentConfig, out_dir: str) -> dict:
    """One CSV per algorithm plus a JSON summary; returns the summary."""
    if not cfg.algorithms:
        raise ValueError("run needs at least one algorithm")
    os.makedirs(out_dir, exist_ok=True)
    parts = assemble(cfg)
    summary = {
        "n": parts.suite.n,
        "dim": parts.suite.dim,
        "sigma": parts.sigma,
        "alpha": parts.suite.alpha,
        "beta": parts.suite.beta,
        "f_star": parts.suite.f_star,
        "algorithms": {},
    }
    for spec in cfg.algorithms:
        eta, record = _run_one(cfg, spec, parts)
        bound_a = (
            _convex_bound_column(record, eta, parts.suite.beta, parts.sigma)
            if spec.name == "gt"
            else None
        )
        header, cols = _trajectory_columns(record, bound_a)
        write_csv(os.path.join(out_dir, f"{spec.name}.csv"), header, cols)
        summary["algorithms"][spec.name] = _algo_summary(record, eta)
    write_json(os.path.join(out_dir, "summary.json"), summary)
    return summary


def experiment_compare(cfg: ExperimentConfig, out_dir: str) -> dict:
    """Aligned per-round error columns for every algorithm, shared setup."""
    if len(cfg.algorithms) < 2:
        raise ValueError("compare needs at least two algorithms")
    names = [spec.name for spec in cfg.algorithms]
    if len(set(names)) != len(names):
        raise ValueError("compare needs distinct algorithm names")
    os.makedirs(out_dir, exist_ok=True)
    parts = assemble(cfg)
    header = ["t"]
    cols: list[np.ndarray] = []
    summary = {
        "n": parts.suite.n,
        "sigma": parts.sigma,
        "alpha": parts.suite.alpha,
        "beta": parts.suite.beta,
        "algorithms": {},
    }
    for spec in cfg.algorithms:
        eta, record = _run_one(cfg, spec, parts)
        if not cols:
            cols.append(record.t)
        header.append(f"{spec.name}_avg_obj_err")
        cols.append(record.avg_obj_err)
        summary["algorithms"][spec.name] = _algo_summary(record, eta)
    write_csv(os.path.join(out_dir, "compare.csv"), header, cols)
    write_json(os.path.join(out_dir, "compare_summary.json"), summary)
    return summary


def experiment_scaling(cfg: ExperimentConfig, out_dir: str) -> list[dict]:
    """Rounds needed to reach the target error, one row per graph size.

    Per-size seeds are derived from the config seeds and the size, so adding
    a size never perturbs the others. A size that does not reach the target
    within ``max_rounds`` is recorded as not reached.
    """
    if cfg.case != 1:
        raise ValueError("the scaling study runs on case 1 suites")
    sizes = cfg.sizes or (cfg.graph_n,)
    target = cfg.target_error if cfg.target_error is not None else 1e-10
    cap = cfg.max_rounds if cfg.max_rounds is not None else 2_000_000
    os.makedirs(out_dir, exist_ok=True)
    rows = []
    for n in sizes:
        graph = build_graph(cfg, n=n, seed=derive_seed(cfg.graph_seed, n))
        w = build_weight_matrix(cfg.weights, graph)
        sig = weights.sigma(w)
        suite = build_suite(cfg, n=n, seed=derive_seed(cfg.data_seed, n))
        x0 = initial_condition(suite.n, suite.dim, derive_seed(cfg.init_seed, n))
        spec = cfg.algorithms[0] if cfg.algorithms else None
        if spec is not None and spec.name != "gt":
            raise ValueError("the scaling study runs gradient tracking")
        eta, _ = resolve_step(
            spec if spec is not None else _GT_DEFAULT, suite, sig, cfg.upper_n or suite.n
        )
        record = run(
            "gt", suite, cap, x0, w=w, eta=eta, collect="light", target_gap=target
        )
        rows.append(
            {
                "n": n,
                "sigma": sig,
                "alpha": suite.alpha,
                "beta": suite.beta,
                "eta": eta,
                "reached": record.reached_at is not None,
                "iterations_to_tol": record.reached_at if record.reached_at is not None else cap,
            }
        )
    header = ["n", "sigma", "alpha", "beta", "eta", "iterations_to_tol", "reached"]
    cols = [
        np.array([r["n"] for r in rows]),
        np.array([r["sigma"] for r in rows]),
        np.array([r["alpha"] for r in rows]),
        np.array([r["beta"] for r in rows]),
        np.array([r["eta"] for r in rows]),
        [str(r["iterations_to_tol"]) if r["reached"] else "not_reached" for r in rows],
        np.array([int(r["reached"]) for r in rows]),
    ]
    write_csv(os.path.join(out_dir, "scaling.csv"), header, cols)
    write_json(os.path.join(out_dir, "scaling_summary.json"), {"rows": rows, "target": target})
    return rows


class _DefaultGT:
    name = "gt"
    eta = None
    eta_mode = None


_GT_DEFAULT = _DefaultGT()


def bounds_report(cfg: ExperimentConfig, out_dir: str | None = None) -> dict:
    """Rate matrix, spectral radius, step rules, and sigma bound; no simulation.

    Constants come from the config when given (``alpha``, ``beta``,
    ``sigma``, ``eta``) and are otherwise measured from the assembled graph,
    weights, and suite.
    """
    if cfg.alpha is not None and cfg.beta is not None and cfg.sigma is not None:
        alpha, beta, sig = cfg.alpha, cfg.beta, cfg.sigma
    else:
        graph = build_graph(cfg)
        w = build_weight_matrix(cfg.weights, graph)
        sig = weights.sigma(w)
        suite = build_suite(cfg)
        alpha, beta = suite.alpha, suite.beta
    upper_n = cfg.upper_n or cfg.graph_n
    if cfg.eta is not None:
        eta = cfg.eta
    elif alpha > 0:
        eta = bounds.recommend_eta("strongly_convex", alpha=alpha, beta=beta, sigma=sig)
    else:
        eta = bounds.recommend_eta("convex", beta=beta, sigma=sig)
    report: dict = {
        "alpha": alpha,
        "beta": beta,
        "sigma": sig,
        "eta": eta,
        "upper_n": upper_n,
        "metropolis_sigma_bound": weights.lazy_metropolis_sigma_bound(upper_n),
    }
    if alpha > 0:
        rate = bounds.build_rate_matrix(eta, alpha, beta, sig)
        report["rate_matrix"] = rate.matrix.tolist()
        report["spectral_radius"] = rate.rho
        report["lam"] = rate.lam
        report["rate_bound"] = (
            bounds.spectral_radius_bound(eta, alpha, beta, sig) if eta < 1.0 / beta else None
        )
    else:
        report["rate_matrix"] = None
        report["spectral_radius"] = None
        report["lam"] = None
        report["rate_bound"] = None
    recommended: dict = {
        "convex": bounds.recommend_eta("convex", beta=beta, sigma=sig),
        "metropolis_convex": bounds.recommend_eta(
            "metropolis_convex", beta=beta, upper_n=upper_n
        ),
    }
    if alpha > 0:
        recommended["strongly_convex"] = bounds.recommend_eta(
            "strongly_convex", alpha=alpha, beta=beta, sigma=sig
        )
        recommended["metropolis_strongly_convex"] = bounds.recommend_eta(
            "metropolis_strongly_convex", alpha=alpha, beta=beta, upper_n=upper_n
        )
    else:
        recommended["strongly_convex"] = None
        recommended["metropolis_strongly_convex"] = None
    report["recommended_eta"] = recommended
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        write_json(os.path.join(out_dir, "bounds.json"), report)
    return report
