"""Time discretizations of the balanced adapter flow, plus baselines.

The flow steppers (Euler, Heun/RK2, classical RK4) re-evaluate the field at
each intermediate stage's effective weight ``W_pt + B A``. The baselines are
plain factor gradient descent, Gram-preconditioned descent, the
gradient-matching update with zero gauge (the X = 0 member of the same
solution family as the Euler flow step), and full-weight gradient descent.
All steppers are pure functions from state to state; ``run_trajectory``
iterates one of them and logs per-iteration diagnostics.
"""

from __future__ import annotations

import enum
import time
from dataclasses import dataclass, field as dataclass_field

import numpy as np

from .core import (
    DEFAULT_EPS,
    LoRAFactors,
    Objective,
    effective_weight,
    field_eval,
    gram_a,
    gram_b,
)
from .linalg import DegenerateSpectrum, NoConvergence, NotPositiveDefinite, cholesky_solve
from .metrics import ZeroGradient, balance_defect, eps_ratio

__all__ = [
    "Scheme",
    "SolverConfig",
    "TrajectoryRow",
    "TrajectoryLog",
    "DIVERGENCE_LOSS",
    "ode_euler_step",
    "ode_rk2_step",
    "ode_rk4_step",
    "classical_gd_step",
    "riemannian_step",
    "lorapro_step",
    "lorapro_direction",
    "full_ft_step",
    "run_trajectory",
]

# Loss level past which a run is recorded as diverged.
DIVERGENCE_LOSS = 1e12


class Scheme(enum.Enum):
    """The seven solvers, in the fixed order used for sweep layouts."""

    ODE_EULER = "ode_euler"
    ODE_RK2 = "ode_rk2"
    ODE_RK4 = "ode_rk4"
    CLASSICAL_GD = "classical_gd"
    RIEMANNIAN = "riemannian"
    LORA_PRO = "lora_pro"
    FULL_FT = "full_ft"


@dataclass(frozen=True)
class SolverConfig:
    scheme: Scheme
    step_size: float
    iterations: int
    eps_reg: float = DEFAULT_EPS

    def __post_init__(self):
        if self.step_size <= 0:
            raise ValueError("step_size must be positive")
        if self.iterations < 0:
            raise ValueError("iterations must be nonnegative")
        if self.eps_reg < 0:
            raise ValueError("eps_reg must be nonnegative")


def _grad_at(factors: LoRAFactors, w_pt, objective: Objective) -> np.ndarray:
    return objective.grad(effective_weight(w_pt, factors))


def ode_euler_step(
    factors: LoRAFactors, w_pt, objective: Objective, h: float, eps: float = DEFAULT_EPS
) -> LoRAFactors:
    """One forward-Euler step of the balanced flow."""
    k1 = field_eval(factors, _grad_at(factors, w_pt, objective), eps)
    return factors.move(k1.f_a, k1.f_b, h)


def ode_rk2_step(
    factors: LoRAFactors, w_pt, objective: Objective, h: float, eps: float = DEFAULT_EPS
) -> LoRAFactors:
    """One Heun (two-stage, second-order) step of the balanced flow."""
    k1 = field_eval(factors, _grad_at(factors, w_pt, objective), eps)
    predictor = factors.move(k1.f_a, k1.f_b, h)
    k2 = field_eval(predictor, _grad_at(predictor, w_pt, objective), eps)
    return factors.move(0.5 * (k1.f_a + k2.f_a), 0.5 * (k1.f_b + k2.f_b), h)


def ode_rk4_step(
    factors: LoRAFactors, w_pt, objective: Objective, h: float, eps: float = DEFAULT_EPS
) -> LoRAFactors:
    """One classical four-stage RK4 step of the balanced flow."""
    k1 = field_eval(factors, _grad_at(factors, w_pt, objective), eps)
    s1 = factors.move(k1.f_a, k1.f_b, 0.5 * h)
    k2 = field_eval(s1, _grad_at(s1, w_pt, objective), eps)
    s2 = factors.move(k2.f_a, k2.f_b, 0.5 * h)
    k3 = field_eval(s2, _grad_at(s2, w_pt, objective), eps)
    s3 = factors.move(k3.f_a, k3.f_b, h)
    k4 = field_eval(s3, _grad_at(s3, w_pt, objective), eps)
    f_a = (k1.f_a + 2.0 * k2.f_a + 2.0 * k3.f_a + k4.f_a) / 6.0
    f_b = (k1.f_b + 2.0 * k2.f_b + 2.0 * k3.f_b + k4.f_b) / 6.0
    return factors.move(f_a, f_b, h)


def classical_gd_step(
    factors: LoRAFactors, w_pt, objective: Objective, h: float
) -> LoRAFactors:
    """Plain gradient descent on the factors: the composite-loss gradients
    are B^T G in A and G A^T in B."""
    g = _grad_at(factors, w_pt, objective)
    return factors.move(-(factors.b.T @ g), -(g @ factors.a.T), h)


def riemannian_step(
    factors: LoRAFactors, w_pt, objective: Objective, h: float, eps: float = DEFAULT_EPS
) -> LoRAFactors:
    """Gram-preconditioned factor descent:
    A' = A - h (B^T B + eps I)^{-1} B^T G, B' = B - h G A^T (A A^T + eps I)^{-1}."""
    g = _grad_at(factors, w_pt, objective)
    da = -cholesky_solve(gram_b(factors, eps), factors.b.T @ g)
    db = -cholesky_solve(gram_a(factors, eps), (g @ factors.a.T).T).T
    return factors.move(da, db, h)


def lorapro_direction(
    factors: LoRAFactors, g: np.ndarray, eps: float = DEFAULT_EPS
) -> tuple[np.ndarray, np.ndarray]:
    """Gradient-matching direction with zero gauge (X = 0):
    dA = -(B^T B + eps I)^{-1} B^T G, dB = -P_B^null G A^T (A A^T + eps I)^{-1}."""
    b = factors.b
    gb = gram_b(factors, eps)
    da = -cholesky_solve(gb, b.T @ g)
    g_at_inv = cholesky_solve(gram_a(factors, eps), (g @ factors.a.T).T).T
    db = -(g_at_inv - b @ cholesky_solve(gb, b.T @ g_at_inv))
    return da, db


def lorapro_step(
    factors: LoRAFactors, w_pt, objective: Objective, h: float, eps: float = DEFAULT_EPS
) -> LoRAFactors:
    """One step along the zero-gauge gradient-matching direction."""
    da, db = lorapro_direction(factors, _grad_at(factors, w_pt, objective), eps)
    return factors.move(da, db, h)


def full_ft_step(w: np.ndarray, objective: Objective, h: float) -> np.ndarray:
    """Full-weight gradient descent: W - h grad(W)."""
    return w - h * objective.grad(w)


@dataclass(frozen=True)
class TrajectoryRow:
    iter: int
    loss: float
    grad_norm: float
    balance_defect: float | None
    eps_ratio: float | None
    dist_to_opt: float | None
    wall_nanos: int


@dataclass
class TrajectoryLog:
    """Per-iteration diagnostics; ``diverged`` marks an early halt."""

    rows: list[TrajectoryRow] = dataclass_field(default_factory=list)
    diverged: bool = False

    def losses(self) -> np.ndarray:
        return np.array([row.loss for row in self.rows])

    @property
    def final_loss(self) -> float:
        return self.rows[-1].loss


def _step_for(scheme: Scheme):
    return {
        Scheme.ODE_EULER: ode_euler_step,
        Scheme.ODE_RK2: ode_rk2_step,
        Scheme.ODE_RK4: ode_rk4_step,
        Scheme.CLASSICAL_GD: classical_gd_step,
        Scheme.RIEMANNIAN: riemannian_step,
        Scheme.LORA_PRO: lorapro_step,
    }[scheme]


def run_trajectory(
    init,
    objective: Objective,
    config: SolverConfig,
    w_pt: np.ndarray | None = None,
) -> TrajectoryLog:
    """Iterate the configured stepper, logging one row per state.

    ``init`` is a LoRAFactors for factor schemes (with ``w_pt`` the frozen
    base weight) or the full weight matrix for FULL_FT. Divergence (loss
    above DIVERGENCE_LOSS or non-finite state) is recorded, not raised:
    the log gets its final row and ``diverged`` is set.
    """
    log = TrajectoryLog()
    full = config.scheme is Scheme.FULL_FT
    if full:
        w = np.asarray(init, dtype=np.float64)
    else:
        if not isinstance(init, LoRAFactors):
            raise TypeError("factor schemes take a LoRAFactors initial state")
        if w_pt is None:
            raise ValueError("factor schemes require the frozen base weight w_pt")
        factors = init

    def record(i: int) -> bool:
        """Append a row for the current state; False halts the run."""
        state_w = w if full else effective_weight(w_pt, factors)
        finite = bool(np.all(np.isfinite(state_w)))
        loss = float(objective.loss(state_w)) if finite else float("nan")
        if not np.isfinite(loss) or loss > DIVERGENCE_LOSS:
            log.rows.append(
                TrajectoryRow(i, loss, float("nan"), None, None, None,
                              time.perf_counter_ns())
            )
            log.diverged = True
            return False
        g = objective.grad(state_w)
        grad_norm = float(np.linalg.norm(g))
        defect = ratio = None
        if not full:
            defect = balance_defect(factors)
            try:
                ratio = eps_ratio(factors, g, config.eps_reg)
            except ZeroGradient:
                ratio = 0.0
        dist = None
        if objective.optimum_w is not None:
            dist = float(np.linalg.norm(state_w - objective.optimum_w))
        log.rows.append(
            TrajectoryRow(i, loss, grad_norm, defect, ratio, dist,
                          time.perf_counter_ns())
        )
        return True

    if not record(0):
        return log
    step = None if full else _step_for(config.scheme)
    with np.errstate(over="ignore", invalid="ignore"):
        for i in range(1, config.iterations + 1):
            try:
                if full:
                    w = full_ft_step(w, objective, config.step_size)
                elif config.scheme is Scheme.CLASSICAL_GD:
                    factors = step(factors, w_pt, objective, config.step_size)
                else:
                    factors = step(factors, w_pt, objective, config.step_size, config.eps_reg)
            except (
                np.linalg.LinAlgError,
                FloatingPointError,
                ValueError,
                NotPositiveDefinite,
                DegenerateSpectrum,
                NoConvergence,
            ):
                # A blown-up state reached a factorization; record as divergence.
                log.diverged = True
                break
            if not record(i):
                break
    return log
