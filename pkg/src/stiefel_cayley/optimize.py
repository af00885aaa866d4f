"""Gradient descent on the parametrized manifold and its baselines.

Three solver families, all driven by the same Armijo backtracking rule and
the same three-clause stopping test:

* :func:`run_gdm_cp` -- descend in the fixed-center skew parameter space;
  every iterate is mapped back through the inverse transform, so
  feasibility holds to roundoff by construction.
* :func:`run_gdm_cp_retraction` -- descend in the tangent space at a fixed
  anchor frame, stepping through the Cayley retraction and its pulled-back
  gradient.
* :func:`run_gdm_retraction` -- classic retraction-based steepest descent
  (QR, polar, or Cayley), re-projecting the gradient at every new frame.

Stopping clauses are checked in a fixed order each iteration: iteration
budget first, then the gradient-norm ratio against the starting gradient,
then the relative change of the cost value.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np

from . import linalg
from .cayley import Center, SkewParam, construct_center, forward, inverse
from .gradients import CostFunction, pullback_from_euclidean
from .retractions import (
    StepTooLargeError,
    TangentVector,
    inverse_retract_cayley,
    grad_retraction_pullback,
    retract_cayley,
    retract_polar,
    retract_qr,
    riemannian_grad,
)

__all__ = [
    "BacktrackingConfig",
    "StoppingConfig",
    "RunRecord",
    "LineSearchStallError",
    "backtrack",
    "run_gdm_cp",
    "run_gdm_cp_retraction",
    "run_gdm_retraction",
    "RETRACTION_KINDS",
]

#: Stop reasons a run can record.
STOP_STATIONARY = "stationary start"
STOP_MAX_ITERS = "max iterations"
STOP_GRAD_RATIO = "gradient ratio"
STOP_FVAL_CHANGE = "relative f-value change"
STOP_STALL = "line-search stall"


@dataclass(frozen=True)
class BacktrackingConfig:
    """Armijo backtracking parameters.

    The step starts at ``gamma_initial`` every iteration and is multiplied
    by ``rho`` until the sufficient-decrease test with slope fraction ``c``
    passes, for at most ``max_halvings`` shrinkages.  Defaults: the
    standard c = 2^-13, rho = 0.5, gamma_initial = 0.1.
    """

    c: float = 2.0**-13
    rho: float = 0.5
    gamma_initial: float = 0.1
    max_halvings: int = 60

    def __post_init__(self):
        if not 0.0 < self.c < 1.0:
            raise ValueError(f"c must be in (0,1), got {self.c}")
        if not 0.0 < self.rho < 1.0:
            raise ValueError(f"rho must be in (0,1), got {self.rho}")
        if not self.gamma_initial > 0.0:
            raise ValueError(f"gamma_initial must be positive, got {self.gamma_initial}")
        if self.max_halvings < 1:
            raise ValueError(f"max_halvings must be >= 1, got {self.max_halvings}")


@dataclass(frozen=True)
class StoppingConfig:
    """Three-clause stopping rule, checked in declaration order."""

    max_iters: int = 5000
    grad_ratio_tol: float = 1e-10
    fval_rel_tol: float = 1e-20

    def __post_init__(self):
        if self.max_iters <= 0:
            raise ValueError(f"max_iters must be positive, got {self.max_iters}")
        if self.grad_ratio_tol <= 0.0:
            raise ValueError(f"grad_ratio_tol must be positive, got {self.grad_ratio_tol}")
        if self.fval_rel_tol <= 0.0:
            raise ValueError(f"fval_rel_tol must be positive, got {self.fval_rel_tol}")


@dataclass
class RunRecord:
    """Per-iteration trajectory of one solver run.

    Parallel lists indexed by recorded iterate (entry 0 is the starting
    point): iteration number, cost value, gradient norm in the geometry the
    algorithm descends in, orthonormality defect of the frame, and
    cumulative wall-clock seconds since the algorithm body started.
    """

    iters: List[int] = field(default_factory=list)
    fvals: List[float] = field(default_factory=list)
    grad_norms: List[float] = field(default_factory=list)
    feasibilities: List[float] = field(default_factory=list)
    times: List[float] = field(default_factory=list)
    final_u: Optional[np.ndarray] = None
    stop_reason: str = ""

    def append(self, it: int, fval: float, gnorm: float, feasi: float, t: float):
        if self.iters and it <= self.iters[-1]:
            raise ValueError("iteration numbers must be strictly increasing")
        self.iters.append(int(it))
        self.fvals.append(float(fval))
        self.grad_norms.append(float(gnorm))
        self.feasibilities.append(float(feasi))
        self.times.append(float(t))


class LineSearchStallError(RuntimeError):
    """Armijo never fired within the halving budget; carries the last step."""

    def __init__(self, msg: str, gamma: float):
        super().__init__(msg)
        self.gamma = gamma


def _backtrack_full(
    eval_step: Callable,
    x,
    g,
    f0: float,
    g_norm_sq: float,
    cfg: BacktrackingConfig,
    retry_errors: tuple = (),
):
    """Shared Armijo loop over candidates ``x - gamma_init rho^k g``.

    ``eval_step`` maps a candidate point to ``(fval, payload)``; raising one
    of ``retry_errors`` counts as a failed trial (the step was too large to
    evaluate at all).  Returns ``(gamma, candidate, fval, payload)`` for the
    first accepted step, largest first.
    """
    gamma = last_tried = cfg.gamma_initial
    for _ in range(cfg.max_halvings + 1):
        last_tried = gamma
        cand = x - gamma * g
        try:
            f_new, payload = eval_step(cand)
        except retry_errors:
            gamma *= cfg.rho
            continue
        if f_new <= f0 - cfg.c * gamma * g_norm_sq:
            return gamma, cand, f_new, payload
        gamma *= cfg.rho
    raise LineSearchStallError(
        f"sufficient decrease not reached within {cfg.max_halvings} halvings "
        f"(last step tried {last_tried:.3e})",
        gamma=last_tried,
    )


def backtrack(
    f_s: Callable[[SkewParam], float],
    v: SkewParam,
    g: SkewParam,
    cfg: Optional[BacktrackingConfig] = None,
) -> float:
    """Largest accepted Armijo step along ``-g`` from ``v``.

    ``g`` must be the gradient of ``f_s`` at ``v``; the decrease test uses
    the weighted parameter-space norm (factor 2 on the rectangular block).

    Raises
    ------
    LineSearchStallError
        If no candidate within the halving budget satisfies the test.
    """
    cfg = cfg or BacktrackingConfig()
    gamma, _, _, _ = _backtrack_full(
        lambda cand: (f_s(cand), None),
        v,
        g,
        float(f_s(v)),
        g.norm() ** 2,
        cfg,
    )
    return gamma


def _check_stop(
    n: int,
    d_cur: float,
    d0: float,
    f_cur: float,
    f_prev: Optional[float],
    stop: StoppingConfig,
) -> Optional[str]:
    """First stopping clause that fires at iterate ``n``, if any."""
    if n >= stop.max_iters:
        return STOP_MAX_ITERS
    if d_cur <= stop.grad_ratio_tol * d0:
        return STOP_GRAD_RATIO
    if f_prev is not None:
        if f_cur == 0.0:
            if f_prev == f_cur:
                return STOP_FVAL_CHANGE
        elif abs(f_cur - f_prev) / abs(f_cur) <= stop.fval_rel_tol:
            return STOP_FVAL_CHANGE
    return None


def _descend(x0, g0, f0, u0, *, grad_at, eval_step, frame_of, bt, stop, record, t0, retry):
    """Common descent loop over an additively updated variable ``x``.

    ``grad_at(x, u)`` returns the descent-geometry gradient at ``x`` (whose
    frame is ``u``); ``eval_step(cand)`` returns ``(fval, frame)``;
    ``frame_of`` extracts the frame from the payload.  The caller provides
    the starting gradient/value so fused evaluations can be reused.
    """
    x, g, f_cur, u = x0, g0, f0, u0
    d0 = g.norm()
    record.append(0, f_cur, d0, linalg.feasibility(u), time.perf_counter() - t0)
    if d0 == 0.0:
        record.stop_reason = STOP_STATIONARY
        record.final_u = u
        return record
    f_prev = None
    n = 0
    while True:
        reason = _check_stop(n, g.norm(), d0, f_cur, f_prev, stop)
        if reason is not None:
            record.stop_reason = reason
            break
        try:
            _, x_new, f_new, payload = _backtrack_full(
                eval_step, x, g, f_cur, g.norm() ** 2, bt, retry_errors=retry
            )
        except LineSearchStallError:
            record.stop_reason = STOP_STALL
            break
        n += 1
        f_prev, f_cur, x = f_cur, f_new, x_new
        u = frame_of(payload)
        g = grad_at(x, u)
        record.append(n, f_cur, g.norm(), linalg.feasibility(u), time.perf_counter() - t0)
    record.final_u = u
    return record


def run_gdm_cp(
    f: CostFunction,
    u0: np.ndarray,
    center: Optional[Center] = None,
    bt: Optional[BacktrackingConfig] = None,
    stop: Optional[StoppingConfig] = None,
) -> RunRecord:
    """Gradient descent in the skew parameter space of a fixed center.

    When no center is supplied, :func:`construct_center` builds one from
    the start frame (which then begins safely inside the domain).  Each
    iteration updates ``V <- V - gamma * grad`` with an Armijo step and
    maps back through the inverse transform, so every recorded frame is
    orthonormal to roundoff.

    Raises
    ------
    SingularPointError
        If the start frame is on the excluded set of the supplied center
        (a configuration error: pick another center).
    """
    bt = bt or BacktrackingConfig()
    stop = stop or StoppingConfig()
    u0 = np.asarray(u0, dtype=np.float64)
    t0 = time.perf_counter()
    s = construct_center(u0) if center is None else center
    v0 = forward(s, u0)

    def eval_step(v_cand: SkewParam):
        u_cand = inverse(s, v_cand)
        return f.eval(u_cand), u_cand

    def grad_at(v: SkewParam, u: np.ndarray) -> SkewParam:
        return pullback_from_euclidean(s, v, f.grad(u), u)

    f0, g_euclid = f.value_and_grad(u0)
    g0 = pullback_from_euclidean(s, v0, g_euclid, u0)
    return _descend(
        v0,
        g0,
        float(f0),
        u0,
        grad_at=grad_at,
        eval_step=eval_step,
        frame_of=lambda u: u,
        bt=bt,
        stop=stop,
        record=RunRecord(),
        t0=t0,
        retry=(),
    )


def run_gdm_cp_retraction(
    f: CostFunction,
    u_anchor: np.ndarray,
    u0: np.ndarray,
    bt: Optional[BacktrackingConfig] = None,
    stop: Optional[StoppingConfig] = None,
) -> RunRecord:
    """Gradient descent in the tangent space at a fixed anchor frame.

    The start frame is lifted through the inverse Cayley retraction at the
    anchor (zero when they coincide, in which case the first iteration
    matches plain Cayley-retraction steepest descent); updates move the
    tangent coordinate and re-retract.  Step-too-large failures inside the
    retraction count as failed line-search trials and shrink the step.

    Raises
    ------
    SingularPointError
        If the start frame is outside the retraction's range from the
        anchor.
    """
    bt = bt or BacktrackingConfig()
    stop = stop or StoppingConfig()
    u_anchor = np.asarray(u_anchor, dtype=np.float64)
    u0 = np.asarray(u0, dtype=np.float64)
    t0 = time.perf_counter()
    v0 = inverse_retract_cayley(u_anchor, u0)

    def eval_step(v_cand: TangentVector):
        u_cand = retract_cayley(u_anchor, v_cand)
        return f.eval(u_cand), u_cand

    def grad_at(v: TangentVector, u: np.ndarray) -> TangentVector:
        return grad_retraction_pullback(u_anchor, v, f)

    g0 = grad_retraction_pullback(u_anchor, v0, f)
    return _descend(
        v0,
        g0,
        float(f.eval(u0)),
        u0,
        grad_at=grad_at,
        eval_step=eval_step,
        frame_of=lambda u: u,
        bt=bt,
        stop=stop,
        record=RunRecord(),
        t0=t0,
        retry=(StepTooLargeError,),
    )


#: Retraction dispatch for :func:`run_gdm_retraction`.
RETRACTION_KINDS = {
    "qr": retract_qr,
    "polar": retract_polar,
    "cayley": retract_cayley,
}


def run_gdm_retraction(
    f: CostFunction,
    u0: np.ndarray,
    kind: str,
    bt: Optional[BacktrackingConfig] = None,
    stop: Optional[StoppingConfig] = None,
) -> RunRecord:
    """Retraction-based steepest descent with the chosen retraction.

    Each iteration projects the ambient gradient onto the tangent space at
    the current frame and retracts along its negative, with the Armijo test
    ``f(R_U(-gamma D)) <= f(U) - c gamma ||D||_F^2``.  Retraction failures
    (step too large, rank deficiency) count as failed trials.
    """
    if kind not in RETRACTION_KINDS:
        raise ValueError(f"unknown retraction kind {kind!r}; choose from {sorted(RETRACTION_KINDS)}")
    retraction = RETRACTION_KINDS[kind]
    bt = bt or BacktrackingConfig()
    stop = stop or StoppingConfig()
    u0 = np.asarray(u0, dtype=np.float64)
    t0 = time.perf_counter()

    record = RunRecord()
    f_cur = float(f.eval(u0))
    u = u0
    g = riemannian_grad(u, f)
    d0 = g.norm()
    record.append(0, f_cur, d0, linalg.feasibility(u), time.perf_counter() - t0)
    if d0 == 0.0:
        record.stop_reason = STOP_STATIONARY
        record.final_u = u
        return record
    f_prev = None
    n = 0
    while True:
        reason = _check_stop(n, g.norm(), d0, f_cur, f_prev, stop)
        if reason is not None:
            record.stop_reason = reason
            break
        zero = TangentVector(u, np.zeros_like(u))

        def eval_step(step: TangentVector):
            u_cand = retraction(u, step)
            return f.eval(u_cand), u_cand

        try:
            _, _, f_new, u_new = _backtrack_full(
                eval_step,
                zero,
                g,
                f_cur,
                g.norm() ** 2,
                bt,
                retry_errors=(StepTooLargeError, linalg.RankError),
            )
        except LineSearchStallError:
            record.stop_reason = STOP_STALL
            break
        n += 1
        f_prev, f_cur, u = f_cur, f_new, u_new
        g = riemannian_grad(u, f)
        record.append(n, f_cur, g.norm(), linalg.feasibility(u), time.perf_counter() - t0)
    record.final_u = u
    return record
