"""Command-line benchmark harness emitting machine-readable CSV results.

Subcommands
-----------
eigen      trace-minimization benchmark comparing parameter-space descent
           against retraction-based descent, with convergence histories
singular   distance-cost runs with centers placed progressively closer to
           the excluded set, where descent is expected to stall
mobility   sensitivity sweep of the inverse transform against the
           closed-form rate bound
gradcheck  finite-difference validation of both gradient engines
bounds     sampled smoothness / norm / variance bound report

Every output file starts with ``# key=value`` provenance lines (never a
timestamp, so identical configurations produce identical bytes except for
measured wall-clock columns), then a CSV header row; floats carry 17
significant digits.  Exit status: 0 success, 2 usage error, 3 numerical
failure.  The worker pool size is ``min(cpu_count, $BENCH_THREADS)``.
"""

from __future__ import annotations

import argparse
import functools
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, fields
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import cayley, gradients, linalg, problems, retractions
from .cayley import Center, SkewParam
from .gradients import CostFunction
from .optimize import (
    BacktrackingConfig,
    RunRecord,
    StoppingConfig,
    run_gdm_cp,
    run_gdm_cp_retraction,
    run_gdm_retraction,
)
from .retractions import TangentVector

SCHEMA_VERSION = 1

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERICAL = 3

#: Solver names accepted by --algo, in canonical output order.
ALGORITHMS = ("gdm-cp", "gdm-cp-retraction", "gdm-cayley", "gdm-qr", "gdm-polar")

#: Center angles for the singular-point experiment, nearest to farthest
#: from the excluded set of the target.
SINGULAR_THETAS = (math.pi / 1000, math.pi / 4, math.pi / 2, math.pi)

#: Largest spectral norm of the swept lower block in the mobility sweep.
MOBILITY_BMAX = 5.0

#: Relative tolerance of the finite-difference gradient check.
GRADCHECK_RTOL = 1e-5


@dataclass(frozen=True)
class ExperimentConfig:
    """Fully resolved settings for one harness invocation."""

    experiment: str
    n: int
    p: int
    trials: int
    seed: int
    gammas: Tuple[float, ...]
    algorithms: Tuple[str, ...]
    out: str
    max_iters: Optional[int] = None
    grad_ratio_tol: Optional[float] = None
    fval_rel_tol: Optional[float] = None
    points: int = 26
    directions: int = 20
    fd_step: float = 1e-6
    samples: int = 1000
    sigma: float = 1.0
    variance_draws: int = 10000
    inject_sign_flip: bool = False

    def __post_init__(self):
        if self.experiment not in _COMMANDS:
            raise ValueError(f"unknown experiment {self.experiment!r}")
        if not (self.n > self.p >= 1):
            raise ValueError(f"need n > p >= 1, got n={self.n}, p={self.p}")
        if self.experiment == "singular" and self.p < 2:
            raise ValueError("the singular experiment needs p >= 2 for its rotation centers")
        if self.trials < 1:
            raise ValueError(f"trials must be >= 1, got {self.trials}")
        if self.seed < 0:
            raise ValueError(f"seed must be nonnegative, got {self.seed}")
        if any(g <= 0.0 for g in self.gammas):
            raise ValueError(f"every gamma must be positive, got {self.gammas}")
        for algo in self.algorithms:
            if algo not in ALGORITHMS:
                raise ValueError(f"unknown algorithm {algo!r}; choose from {ALGORITHMS}")
        if self.points < 2:
            raise ValueError(f"points must be >= 2, got {self.points}")
        if self.directions < 1 or self.samples < 1 or self.variance_draws < 0:
            raise ValueError("directions/samples must be >= 1 and variance_draws >= 0")
        if self.fd_step <= 0.0 or self.sigma < 0.0:
            raise ValueError("fd_step must be positive and sigma nonnegative")
        if self.max_iters is not None and self.max_iters < 0:
            raise ValueError(f"max_iters must be nonnegative, got {self.max_iters}")

    def stopping(self) -> StoppingConfig:
        base = StoppingConfig()
        return StoppingConfig(
            max_iters=base.max_iters if self.max_iters is None else self.max_iters,
            grad_ratio_tol=base.grad_ratio_tol if self.grad_ratio_tol is None else self.grad_ratio_tol,
            fval_rel_tol=base.fval_rel_tol if self.fval_rel_tol is None else self.fval_rel_tol,
        )


# --------------------------------------------------------------------------
# configuration resolution: defaults < config file < command-line flags


_DEFAULTS: Dict[str, Dict[str, object]] = {
    "eigen": dict(n=200, p=10, trials=3, seed=7, gammas=(0.1, 0.01, 0.001),
                  algorithms=ALGORITHMS, out="bench_eigen.csv"),
    "singular": dict(n=200, p=10, trials=3, seed=7, gammas=(0.1,),
                     algorithms=("gdm-cp",), out="bench_singular.csv"),
    "mobility": dict(n=200, p=10, trials=10, seed=7, gammas=(), algorithms=(),
                     out="bench_mobility.csv"),
    "gradcheck": dict(n=60, p=5, trials=5, seed=7, gammas=(), algorithms=(),
                      out="bench_gradcheck.csv"),
    "bounds": dict(n=60, p=5, trials=1, seed=7, gammas=(), algorithms=(),
                   out="bench_bounds.csv"),
}

_CASTS: Dict[str, Callable[[str], object]] = {
    "n": int,
    "p": int,
    "trials": int,
    "seed": int,
    "max_iters": int,
    "points": int,
    "directions": int,
    "samples": int,
    "variance_draws": int,
    "grad_ratio_tol": float,
    "fval_rel_tol": float,
    "fd_step": float,
    "sigma": float,
    "out": str,
    "gamma": lambda s: tuple(float(tok) for tok in s.split(",") if tok.strip()),
    "algo": lambda s: tuple(tok.strip() for tok in s.split(",") if tok.strip()),
}

#: config-file key -> ExperimentConfig field, where the names differ.
_KEY_ALIASES = {"gamma": "gammas", "algo": "algorithms"}


def _parse_config_file(path: str) -> Dict[str, object]:
    """Read a flat ``key=value`` file; ``#`` starts a comment."""
    values: Dict[str, object] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key=value, got {raw.strip()!r}")
            key, _, text = line.partition("=")
            key = key.strip().replace("-", "_")
            if key not in _CASTS:
                raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
            try:
                parsed = _CASTS[key](text.strip())
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: bad value for {key!r}: {exc}") from exc
            values[_KEY_ALIASES.get(key, key)] = parsed
    return values


def _resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    merged: Dict[str, object] = dict(_DEFAULTS[args.experiment])
    merged["experiment"] = args.experiment
    if args.config is not None:
        merged.update(_parse_config_file(args.config))
    field_names = {f.name for f in fields(ExperimentConfig)}
    for name, value in vars(args).items():
        if name in field_names and value is not None:
            merged[name] = tuple(value) if isinstance(value, list) else value
    _pool_size()  # reject a malformed BENCH_THREADS before any work starts
    return ExperimentConfig(**merged)


# --------------------------------------------------------------------------
# CSV plumbing


def _fmt(x: float) -> str:
    return f"{float(x):.17g}"


def _write_csv(path: str, provenance: Sequence[Tuple[str, object]],
               header: Sequence[str], rows: Sequence[Sequence[str]]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# schema={SCHEMA_VERSION}\n")
        for key, value in provenance:
            fh.write(f"# {key}={value}\n")
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(str(cell) for cell in row) + "\n")


def _history_path(out: str) -> str:
    stem, ext = os.path.splitext(out)
    return stem + "_history" + (ext or ".csv")


def _pool_size() -> int:
    size = os.cpu_count() or 1
    cap = os.environ.get("BENCH_THREADS", "").strip()
    if cap:
        try:
            size = min(size, max(1, int(cap)))
        except ValueError:
            raise ValueError(f"BENCH_THREADS must be an integer, got {cap!r}") from None
    return max(1, size)


def _run_tasks(tasks: Sequence[Tuple[tuple, Callable[[], object]]]) -> Dict[tuple, object]:
    """Run keyed closures on the pool; results come back keyed, so output
    order never depends on scheduling."""
    with ThreadPoolExecutor(max_workers=_pool_size()) as pool:
        futures = [(key, pool.submit(fn)) for key, fn in tasks]
        return {key: fut.result() for key, fut in futures}


def _final_metrics(rec: RunRecord, optimum: float) -> Tuple[float, ...]:
    return (
        rec.fvals[-1],
        rec.fvals[-1] - optimum,
        rec.feasibilities[-1],
        rec.grad_norms[-1],
        float(rec.iters[-1]),
        rec.times[-1],
    )


def _aggregate_rows(prefix: List[str], metrics: List[Tuple[float, ...]]) -> List[List[str]]:
    """mean/std rows over the trial axis (only meaningful for >= 2 trials)."""
    arr = np.asarray(metrics, dtype=np.float64)
    mean = arr.mean(axis=0)
    std = arr.std(axis=0, ddof=1)
    return [
        [*prefix, "mean", *(_fmt(x) for x in mean), ""],
        [*prefix, "std", *(_fmt(x) for x in std), ""],
    ]


def _trial_start_frames(cfg: ExperimentConfig, first: Optional[np.ndarray] = None) -> List[np.ndarray]:
    """One start frame per trial, shared across algorithms and stepsizes.

    When ``first`` is given it becomes trial 0's canonical start and only
    the remaining trials are drawn at random.
    """
    frames: List[np.ndarray] = []
    if first is not None:
        frames.append(first)
    for t in range(len(frames), cfg.trials):
        rng = np.random.default_rng([cfg.seed, 211, t])
        frames.append(problems.random_stiefel(rng, cfg.n, cfg.p))
    return frames


# --------------------------------------------------------------------------
# eigen


def _dispatch_solver(algo: str, f: CostFunction, u0: np.ndarray,
                     bt: BacktrackingConfig, stop: StoppingConfig,
                     center: Optional[Center] = None) -> RunRecord:
    if algo == "gdm-cp":
        return run_gdm_cp(f, u0, center=center, bt=bt, stop=stop)
    if algo == "gdm-cp-retraction":
        return run_gdm_cp_retraction(f, u0, u0, bt=bt, stop=stop)
    return run_gdm_retraction(f, u0, algo.removeprefix("gdm-"), bt=bt, stop=stop)


SUMMARY_HEADER = ("algorithm", "n", "p", "gamma_initial", "trial", "fval",
                  "fval_minus_optimal", "feasi", "nrmg", "itr", "time_s", "stop_reason")
HISTORY_HEADER = ("algorithm", "gamma_initial", "trial", "iter", "cum_time_s", "f_gap")


def cmd_eigen(cfg: ExperimentConfig) -> int:
    """Benchmark every requested solver/stepsize on one eigen instance."""
    inst = problems.make_eigen_instance(cfg.n, cfg.p, cfg.seed)
    f = problems.eigen_cost(inst)
    stop = cfg.stopping()
    starts = _trial_start_frames(cfg)

    tasks = []
    for ai, algo in enumerate(cfg.algorithms):
        for gi, gamma in enumerate(cfg.gammas):
            bt = BacktrackingConfig(gamma_initial=gamma)
            for t in range(cfg.trials):
                tasks.append(((ai, gi, t),
                              functools.partial(_dispatch_solver, algo, f, starts[t], bt, stop)))
    records = _run_tasks(tasks)

    summary: List[List[str]] = []
    history: List[List[str]] = []
    for ai, algo in enumerate(cfg.algorithms):
        for gi, gamma in enumerate(cfg.gammas):
            prefix = [algo, str(cfg.n), str(cfg.p), _fmt(gamma)]
            block: List[Tuple[float, ...]] = []
            for t in range(cfg.trials):
                rec: RunRecord = records[(ai, gi, t)]
                metrics = _final_metrics(rec, inst.optimum_value)
                block.append(metrics)
                summary.append([*prefix, str(t), *(_fmt(x) for x in metrics[:4]),
                                str(rec.iters[-1]), _fmt(metrics[5]), rec.stop_reason])
                for i, it in enumerate(rec.iters):
                    history.append([algo, _fmt(gamma), str(t), str(it), _fmt(rec.times[i]),
                                    _fmt(rec.fvals[i] - inst.optimum_value)])
            if cfg.trials > 1:
                summary.extend(_aggregate_rows(prefix, block))

    provenance = [
        ("command", "eigen"), ("n", cfg.n), ("p", cfg.p), ("trials", cfg.trials),
        ("seed", cfg.seed), ("gammas", ",".join(_fmt(g) for g in cfg.gammas)),
        ("algorithms", ",".join(cfg.algorithms)),
        ("max_iters", cfg.stopping().max_iters),
        ("optimum", _fmt(inst.optimum_value)),
    ]
    _write_csv(cfg.out, provenance, SUMMARY_HEADER, summary)
    _write_csv(_history_path(cfg.out), provenance, HISTORY_HEADER, history)
    print(f"eigen: wrote {len(summary)} summary rows to {cfg.out} "
          f"and {len(history)} history rows to {_history_path(cfg.out)}")
    return EXIT_OK


# --------------------------------------------------------------------------
# singular


SINGULAR_HEADER = ("algorithm", "theta", "n", "p", "gamma_initial", "trial", "fval",
                   "fval_minus_optimal", "feasi", "nrmg", "itr", "time_s", "stop_reason")
SINGULAR_HISTORY_HEADER = ("algorithm", "theta", "gamma_initial", "trial", "iter",
                           "cum_time_s", "f_gap")


def cmd_singular(cfg: ExperimentConfig) -> int:
    """Distance-cost descent toward a target sitting near the excluded set
    of progressively worse centers; the smallest angle is expected to stall."""
    _, u_star = problems.rotation_center(math.pi, cfg.n, cfg.p)
    f = problems.distance_cost(u_star)
    _, u0_canonical = problems.rotation_center(math.pi / 4.0, cfg.n, cfg.p)
    starts = _trial_start_frames(cfg, first=u0_canonical)
    centers = [problems.rotation_center(theta, cfg.n, cfg.p)[0] for theta in SINGULAR_THETAS]
    stop = cfg.stopping()

    tasks = []
    for ti in range(len(SINGULAR_THETAS)):
        for gi, gamma in enumerate(cfg.gammas):
            bt = BacktrackingConfig(gamma_initial=gamma)
            for t in range(cfg.trials):
                tasks.append(((ti, gi, t),
                              functools.partial(run_gdm_cp, f, starts[t],
                                                center=centers[ti], bt=bt, stop=stop)))
    records = _run_tasks(tasks)

    summary: List[List[str]] = []
    history: List[List[str]] = []
    for ti, theta in enumerate(SINGULAR_THETAS):
        for gi, gamma in enumerate(cfg.gammas):
            prefix = ["gdm-cp", _fmt(theta), str(cfg.n), str(cfg.p), _fmt(gamma)]
            block: List[Tuple[float, ...]] = []
            for t in range(cfg.trials):
                rec: RunRecord = records[(ti, gi, t)]
                metrics = _final_metrics(rec, 0.0)
                block.append(metrics)
                summary.append([*prefix, str(t), *(_fmt(x) for x in metrics[:4]),
                                str(rec.iters[-1]), _fmt(metrics[5]), rec.stop_reason])
                for i, it in enumerate(rec.iters):
                    history.append(["gdm-cp", _fmt(theta), _fmt(gamma), str(t), str(it),
                                    _fmt(rec.times[i]), _fmt(rec.fvals[i])])
            if cfg.trials > 1:
                summary.extend(_aggregate_rows(prefix, block))

    provenance = [
        ("command", "singular"), ("n", cfg.n), ("p", cfg.p), ("trials", cfg.trials),
        ("seed", cfg.seed), ("gammas", ",".join(_fmt(g) for g in cfg.gammas)),
        ("thetas", ",".join(_fmt(th) for th in SINGULAR_THETAS)),
        ("max_iters", cfg.stopping().max_iters),
    ]
    _write_csv(cfg.out, provenance, SINGULAR_HEADER, summary)
    _write_csv(_history_path(cfg.out), provenance, SINGULAR_HISTORY_HEADER, history)
    print(f"singular: wrote {len(summary)} summary rows to {cfg.out} "
          f"and {len(history)} history rows to {_history_path(cfg.out)}")
    return EXIT_OK


# --------------------------------------------------------------------------
# mobility


MOBILITY_HEADER = ("b_norm2", "observed_change", "mobility")


def _mobility_trial(cfg: ExperimentConfig, grid: np.ndarray, trial: int):
    """One sweep: fix the skew corner, scale the lower block through the
    grid of spectral norms, and record unit-perturbation response vs the
    rate bound."""
    n, p = cfg.n, cfg.p
    rng = np.random.default_rng([cfg.seed, 977, trial])

    def corner_free_param() -> SkewParam:
        m11 = rng.uniform(-0.5, 0.5, size=(p, p))
        m12 = rng.uniform(-0.5, 0.5, size=(p, n - p))
        m21 = rng.uniform(-0.5, 0.5, size=(n - p, p))
        return SkewParam(linalg.skew_part(m11), (m21 - m12.T) / 2.0)

    base = corner_free_param()
    e = corner_free_param()
    e = (1.0 / e.norm()) * e
    b_scale = np.linalg.norm(base.b, 2)
    center = Center.structured(np.eye(p), n)

    changes = np.empty(grid.size)
    rates = np.empty(grid.size)
    for i, x in enumerate(grid):
        v = SkewParam(base.a, (x / b_scale) * base.b)
        u_here = cayley.inverse(center, v)
        u_moved = cayley.inverse(center, v + e)
        changes[i] = np.linalg.norm(u_moved - u_here)
        rates[i] = cayley.mobility(v)
    return changes, rates


def cmd_mobility(cfg: ExperimentConfig) -> int:
    """Average inverse-transform sensitivity over trials on a shared grid."""
    grid = np.linspace(0.0, MOBILITY_BMAX, cfg.points)
    tasks = [((t,), functools.partial(_mobility_trial, cfg, grid, t))
             for t in range(cfg.trials)]
    results = _run_tasks(tasks)
    changes = np.mean([results[(t,)][0] for t in range(cfg.trials)], axis=0)
    rates = np.mean([results[(t,)][1] for t in range(cfg.trials)], axis=0)

    rows = [[_fmt(grid[i]), _fmt(changes[i]), _fmt(rates[i])] for i in range(grid.size)]
    provenance = [("command", "mobility"), ("n", cfg.n), ("p", cfg.p),
                  ("trials", cfg.trials), ("seed", cfg.seed), ("points", cfg.points)]
    _write_csv(cfg.out, provenance, MOBILITY_HEADER, rows)
    print(f"mobility: wrote {len(rows)} rows to {cfg.out}")
    return EXIT_OK


# --------------------------------------------------------------------------
# gradcheck


GRADCHECK_HEADER = ("cost", "engine", "states", "directions", "worst_rel_err",
                    "tolerance", "status")


def _sign_flipped(f: CostFunction) -> CostFunction:
    """Negative-control corruption: the check must catch this."""
    return CostFunction(dim_n=f.dim_n, dim_p=f.dim_p, eval=f.eval,
                        grad=lambda u: -f.grad(u))


def _central_diff(phi: Callable[[float], float], step: float) -> float:
    return (phi(step) - phi(-step)) / (2.0 * step)


def _check_parameter_engine(f: CostFunction, cfg: ExperimentConfig) -> float:
    """Worst relative FD error of the parameter-space gradient."""
    n, p = f.dim_n, f.dim_p
    worst = 0.0
    for state in range(cfg.trials):
        rng = np.random.default_rng([cfg.seed, 37, state])
        center = problems.random_center(rng, n, p)
        v = problems.random_skew_param(rng, n, p, norm=2.0)
        g = gradients.grad_pullback(center, v, f)
        for _ in range(cfg.directions):
            delta = problems.random_skew_param(rng, n, p, norm=1.0)
            fd = _central_diff(
                lambda t: f.eval(cayley.inverse(center, v + t * delta)), cfg.fd_step)
            worst = max(worst, abs(fd - g.inner(delta)) / max(1.0, abs(fd)))
    return worst


def _check_retraction_engine(f: CostFunction, cfg: ExperimentConfig) -> float:
    """Worst relative FD error of the retraction-pullback gradient."""
    n, p = f.dim_n, f.dim_p
    worst = 0.0
    for state in range(cfg.trials):
        rng = np.random.default_rng([cfg.seed, 53, state])
        u = problems.random_stiefel(rng, n, p)
        d = retractions.project_tangent(u, rng.standard_normal((n, p)))
        d = (1.0 / max(d.norm(), 1e-12)) * d
        g = retractions.grad_retraction_pullback(u, d, f)
        for _ in range(cfg.directions):
            delta = retractions.project_tangent(u, rng.standard_normal((n, p)))
            delta = (1.0 / max(delta.norm(), 1e-12)) * delta
            fd = _central_diff(
                lambda t: f.eval(retractions.retract_cayley(u, d + t * delta)), cfg.fd_step)
            analytic = float(np.sum(g.mat * delta.mat))
            worst = max(worst, abs(fd - analytic) / max(1.0, abs(fd)))
    return worst


def cmd_gradcheck(cfg: ExperimentConfig) -> int:
    """Validate both gradient engines against central differences."""
    rng = np.random.default_rng([cfg.seed, 11])
    inst = problems.make_eigen_instance(cfg.n, cfg.p, cfg.seed)
    costs = [
        ("eigen", problems.eigen_cost(inst)),
        ("distance", problems.distance_cost(problems.random_stiefel(rng, cfg.n, cfg.p))),
    ]
    if cfg.inject_sign_flip:
        costs = [(name, _sign_flipped(f)) for name, f in costs]

    engines = [("parameter-space", _check_parameter_engine),
               ("retraction-pullback", _check_retraction_engine)]
    rows: List[List[str]] = []
    all_ok = True
    for cost_name, f in costs:
        for engine_name, check in engines:
            worst = check(f, cfg)
            ok = worst <= GRADCHECK_RTOL
            all_ok = all_ok and ok
            rows.append([cost_name, engine_name, str(cfg.trials), str(cfg.directions),
                         _fmt(worst), _fmt(GRADCHECK_RTOL), "pass" if ok else "FAIL"])
            print(f"gradcheck {cost_name}/{engine_name}: worst rel err {worst:.3e} "
                  f"(tol {GRADCHECK_RTOL:g}) -> {'pass' if ok else 'FAIL'}")

    provenance = [("command", "gradcheck"), ("n", cfg.n), ("p", cfg.p),
                  ("trials", cfg.trials), ("seed", cfg.seed),
                  ("directions", cfg.directions), ("fd_step", _fmt(cfg.fd_step))]
    _write_csv(cfg.out, provenance, GRADCHECK_HEADER, rows)
    print(f"gradcheck: wrote {len(rows)} rows to {cfg.out}")
    return EXIT_OK if all_ok else EXIT_NUMERICAL


# --------------------------------------------------------------------------
# bounds


def cmd_bounds(cfg: ExperimentConfig) -> int:
    """Sampled bound report for the eigen cost with analytic constants."""
    inst = problems.make_eigen_instance(cfg.n, cfg.p, cfg.seed)
    f = problems.eigen_cost(inst)
    evals = np.linalg.eigvalsh(inst.a)
    mu = 2.0 * float(evals[-1])
    grad_norm_max = 2.0 * math.sqrt(float(np.sum(evals[-cfg.p:] ** 2)))
    family = problems.stochastic_eigen_family(inst, cfg.sigma, cfg.seed)
    center = Center.structured(np.eye(cfg.p), cfg.n)

    report = gradients.check_gradient_bounds(
        f, center, cfg.samples, mu=mu, lipschitz=mu, grad_norm_max=grad_norm_max,
        family=family, variance_draws=cfg.variance_draws, seed=cfg.seed)

    row = report.to_row()
    _write_csv(cfg.out,
               [("command", "bounds"), ("n", cfg.n), ("p", cfg.p), ("seed", cfg.seed),
                ("sigma", _fmt(cfg.sigma))],
               tuple(row.keys()),
               [[_fmt(v) if isinstance(v, float) else str(v) for v in row.values()]])
    print(f"bounds: lipschitz worst ratio {report.lipschitz_worst_ratio:.3f} "
          f"({report.lipschitz_violations} violations), "
          f"norm worst ratio {report.norm_worst_ratio:.3f} "
          f"({report.norm_violations} violations), "
          f"variance ratio {report.variance_ratio:.3f} "
          f"({report.variance_violations} violations) over {report.samples} samples")
    print(f"bounds: wrote {cfg.out}")
    return EXIT_OK if report.passed else EXIT_NUMERICAL


_COMMANDS: Dict[str, Callable[[ExperimentConfig], int]] = {
    "eigen": cmd_eigen,
    "singular": cmd_singular,
    "mobility": cmd_mobility,
    "gradcheck": cmd_gradcheck,
    "bounds": cmd_bounds,
}


# --------------------------------------------------------------------------
# argument parsing


def _add_common_flags(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--n", type=int, help="ambient dimension")
    sp.add_argument("--p", type=int, help="frame width (columns)")
    sp.add_argument("--trials", type=int, help="independent repetitions")
    sp.add_argument("--seed", type=int, help="root RNG seed")
    sp.add_argument("--gamma", type=float, action="append", dest="gammas",
                    metavar="G", help="initial stepsize (repeatable)")
    sp.add_argument("--algo", action="append", dest="algorithms", choices=ALGORITHMS,
                    help="solver to run (repeatable)")
    sp.add_argument("--out", help="output CSV path")
    sp.add_argument("--config", help="flat key=value config file; flags override it")
    sp.add_argument("--max-iters", type=int, dest="max_iters",
                    help="stopping override: iteration cap")
    sp.add_argument("--grad-ratio-tol", type=float, dest="grad_ratio_tol",
                    help="stopping override: gradient-ratio tolerance")
    sp.add_argument("--fval-rel-tol", type=float, dest="fval_rel_tol",
                    help="stopping override: relative f-change tolerance")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stiefel-bench",
        description="Benchmark harness for Cayley-parametrized optimization "
                    "on the Stiefel manifold.")
    sub = parser.add_subparsers(dest="experiment", required=True)

    sp = sub.add_parser("eigen", help="solver comparison on a trace-minimization instance")
    _add_common_flags(sp)

    sp = sub.add_parser("singular", help="descent with centers near the excluded set")
    _add_common_flags(sp)

    sp = sub.add_parser("mobility", help="inverse-transform sensitivity sweep")
    _add_common_flags(sp)
    sp.add_argument("--points", type=int, help="grid points along the sweep")

    sp = sub.add_parser("gradcheck", help="finite-difference gradient validation")
    _add_common_flags(sp)
    sp.add_argument("--directions", type=int, help="random directions per state")
    sp.add_argument("--fd-step", type=float, dest="fd_step",
                    help="central-difference step")
    sp.add_argument("--inject-sign-flip", action="store_true", default=None,
                    dest="inject_sign_flip", help=argparse.SUPPRESS)

    sp = sub.add_parser("bounds", help="sampled gradient bound report")
    _add_common_flags(sp)
    sp.add_argument("--samples", type=int, help="random parameter pairs to test")
    sp.add_argument("--sigma", type=float, help="stochastic family noise level")
    sp.add_argument("--variance-draws", type=int, dest="variance_draws",
                    help="draws for the variance estimate")

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = _resolve_config(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return _COMMANDS[cfg.experiment](cfg)
    except Exception as exc:  # solver/linear-algebra failures -> exit 3
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
