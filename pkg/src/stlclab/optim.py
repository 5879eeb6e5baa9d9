"""From-scratch Adam, RAdam, and Adafactor updates plus schedules.

All update rules follow their reference formulations (Adafactor with the
factored second moment, update clipping, and relative step sizes of its
published default configuration).  States are immutable-in-spirit: every
step returns a new state and a delta, and never mutates its inputs, so
distinct parameter groups can update in parallel.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Iterable, Union

import numpy as np

from .core import StlcError
from .objectives import Objective, Params, get_objective

#: Cap on Adafactor's relative step size (its published default).
RELATIVE_STEP_CAP = 1e-2
#: Loss above this, or any non-finite loss, flags a run as diverged.
DIVERGENCE_LOSS_LIMIT = 1e12


class NonFiniteGradientError(StlcError):
    """Raised by the update rules on inf/nan gradients (used to detect
    diverged training)."""


@dataclass(frozen=True)
class Hyper:
    """Hyperparameters for all three rules; defaults follow the reference
    implementations (see also :func:`defaults_text`)."""

    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    # Adafactor-specific knobs.
    eps1: float = 1e-30
    eps2: float = 1e-3
    clip_threshold: float = 1.0
    decay_rate: float = -0.8
    relative_step: bool = True
    scale_parameter: bool = True
    warmup_init: bool = False
    weight_decay: float = 0.0

    def __post_init__(self):
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
            raise ValueError("betas must lie in [0, 1)")
        if self.eps <= 0.0 or self.eps1 <= 0.0 or self.eps2 <= 0.0:
            raise ValueError("epsilons must be positive")


DEFAULT_HYPER = Hyper()


def _zeros_like(params: Params) -> dict[str, np.ndarray]:
    return {k: np.zeros_like(np.asarray(v, dtype=np.float64)) for k, v in params.items()}


def _check_finite(grads: Params) -> None:
    for key, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise NonFiniteGradientError(f"non-finite gradient for parameter {key!r}")


@dataclass(frozen=True)
class AdamState:
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)

    @classmethod
    def init(cls, params: Params) -> "AdamState":
        return cls(0, _zeros_like(params), _zeros_like(params))


@dataclass(frozen=True)
class RAdamState(AdamState):
    @classmethod
    def init(cls, params: Params) -> "RAdamState":
        return cls(0, _zeros_like(params), _zeros_like(params))


@dataclass(frozen=True)
class AdafactorState:
    step: int = 0
    row: dict[str, np.ndarray] = field(default_factory=dict)
    col: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)

    @classmethod
    def init(cls, params: Params) -> "AdafactorState":
        row, col, v = {}, {}, {}
        for key, p in params.items():
            arr = np.asarray(p, dtype=np.float64)
            if arr.ndim >= 2:
                row[key] = np.zeros(arr.shape[:-1])
                col[key] = np.zeros(arr.shape[:-2] + arr.shape[-1:])
            else:
                v[key] = np.zeros_like(arr)
        return cls(0, row, col, v)


def adam_step(
    state: AdamState, grads: Params, hyper: Hyper, lr: float
) -> tuple[AdamState, Params]:
    """One Adam update: decayed moments, bias correction, and the
    ``-lr * m_hat / (sqrt(v_hat) + eps)`` delta."""
    _check_finite(grads)
    t = state.step + 1
    bc1 = 1.0 - hyper.beta1**t
    bc2 = 1.0 - hyper.beta2**t
    m, v, delta = {}, {}, {}
    for key, g in grads.items():
        g = np.asarray(g, dtype=np.float64)
        m[key] = hyper.beta1 * state.m[key] + (1.0 - hyper.beta1) * g
        v[key] = hyper.beta2 * state.v[key] + (1.0 - hyper.beta2) * g * g
        delta[key] = -lr * (m[key] / bc1) / (np.sqrt(v[key] / bc2) + hyper.eps)
    return AdamState(t, m, v), delta


def radam_rho(t: int, beta2: float) -> float:
    """Length of the approximated SMA at step t (rho_t of the rectifier)."""
    rho_inf = 2.0 / (1.0 - beta2) - 1.0
    b2t = beta2**t
    return rho_inf - 2.0 * t * b2t / (1.0 - b2t)


def radam_rectifier(t: int, beta2: float) -> float:
    """Variance rectification r_t; only meaningful when rho_t > 4."""
    rho_inf = 2.0 / (1.0 - beta2) - 1.0
    rho_t = radam_rho(t, beta2)
    return math.sqrt(
        ((rho_t - 4.0) * (rho_t - 2.0) * rho_inf)
        / ((rho_inf - 4.0) * (rho_inf - 2.0) * rho_t)
    )


def radam_step(
    state: RAdamState, grads: Params, hyper: Hyper, lr: float
) -> tuple[RAdamState, Params]:
    """One RAdam update: the rectified adaptive step once rho_t exceeds 4,
    plain bias-corrected momentum (no denominator) before that."""
    _check_finite(grads)
    t = state.step + 1
    bc1 = 1.0 - hyper.beta1**t
    bc2 = 1.0 - hyper.beta2**t
    rectified = radam_rho(t, hyper.beta2) > 4.0
    r_t = radam_rectifier(t, hyper.beta2) if rectified else 0.0
    m, v, delta = {}, {}, {}
    for key, g in grads.items():
        g = np.asarray(g, dtype=np.float64)
        m[key] = hyper.beta1 * state.m[key] + (1.0 - hyper.beta1) * g
        v[key] = hyper.beta2 * state.v[key] + (1.0 - hyper.beta2) * g * g
        m_hat = m[key] / bc1
        if rectified:
            delta[key] = -lr * r_t * m_hat / (np.sqrt(v[key] / bc2) + hyper.eps)
        else:
            delta[key] = -lr * m_hat
    return RAdamState(t, m, v), delta


def relative_step_size(t: int, hyper: Hyper) -> float:
    """Adafactor's internal step: min(cap, 1/sqrt(t)), with the slow-start
    variant when ``warmup_init`` is set."""
    if hyper.warmup_init:
        return min(1e-6 * t, 1.0 / math.sqrt(t))
    return min(RELATIVE_STEP_CAP, 1.0 / math.sqrt(t))


def _rms(arr: np.ndarray) -> float:
    return float(np.sqrt(np.mean(arr * arr)))


def factored_second_moment(row: np.ndarray, col: np.ndarray) -> np.ndarray:
    """Reconstruct the second-moment estimate from its row/column means:
    outer(row, col) normalized by the mean of the row accumulator.

    Exact for rank-1 inputs and never negative for non-negative
    accumulators.
    """
    row = np.asarray(row, dtype=np.float64)
    col = np.asarray(col, dtype=np.float64)
    norm = np.mean(row, axis=-1, keepdims=True)
    return (row / norm)[..., :, None] * col[..., None, :]


def adafactor_step(
    state: AdafactorState,
    grads: Params,
    hyper: Hyper,
    params: Params,
    lr: float | None = None,
) -> tuple[AdafactorState, Params]:
    """One Adafactor update.

    Matrix parameters keep factored row/column second-moment means with
    decay ``1 - t**decay_rate``; the normalized update is RMS-clipped at
    ``clip_threshold`` and scaled by the step size.  With ``lr=None`` the
    internal relative step applies; an explicit ``lr`` replaces it (the
    annealed schedule feeds one in).  Parameter-scale multiplication by
    ``max(eps2, RMS(theta))`` happens in either case unless
    ``scale_parameter`` is off.
    """
    _check_finite(grads)
    t = state.step + 1
    beta2t = 1.0 - t**hyper.decay_rate
    if lr is None:
        if not hyper.relative_step:
            raise ValueError("an explicit lr is required when relative_step is off")
        rel = relative_step_size(t, hyper)
    else:
        rel = lr
    row, col, v, delta = dict(state.row), dict(state.col), dict(state.v), {}
    for key, g in grads.items():
        g = np.asarray(g, dtype=np.float64)
        gsq = g * g + hyper.eps1
        if g.ndim >= 2:
            row[key] = beta2t * state.row[key] + (1.0 - beta2t) * gsq.mean(axis=-1)
            col[key] = beta2t * state.col[key] + (1.0 - beta2t) * gsq.mean(axis=-2)
            norm = np.mean(row[key], axis=-1, keepdims=True)
            r_factor = 1.0 / np.sqrt(row[key] / norm)
            c_factor = 1.0 / np.sqrt(col[key])
            update = g * r_factor[..., :, None] * c_factor[..., None, :]
        else:
            v[key] = beta2t * state.v[key] + (1.0 - beta2t) * gsq
            update = g / np.sqrt(v[key])
        update = update / max(1.0, _rms(update) / hyper.clip_threshold)
        alpha = rel
        if hyper.scale_parameter:
            alpha *= max(hyper.eps2, _rms(np.asarray(params[key], dtype=np.float64)))
        delta[key] = -alpha * update
    return AdafactorState(t, row, col, v), delta


# ---------------------------------------------------------------------------
# Learning-rate schedules


@dataclass(frozen=True)
class Constant:
    lr: float


@dataclass(frozen=True)
class LinearWarmup:
    target_lr: float
    warmup_steps: int

    def __post_init__(self):
        if self.warmup_steps < 0:
            raise ValueError("warmup_steps must be >= 0")


@dataclass(frozen=True)
class VaswaniNoam:
    """``coeff * min(step**-0.5, step/knee)``; the default constants put
    the crossover at step 4000 (4000**1.5 == 252982 up to rounding)."""

    coeff: float = 0.0325
    knee: float = 252982.0

    @classmethod
    def from_model_size(cls, d_model: int, warmup_steps: int) -> "VaswaniNoam":
        return cls(coeff=d_model**-0.5, knee=float(warmup_steps) ** 1.5)


@dataclass(frozen=True)
class AdafactorAnneal:
    """Relative-step decay advanced once per ``call_every`` steps; with
    ``call_every=None`` the cadence is min(one epoch, 2/(1 - beta2))."""

    call_every: int | None = None
    beta2: float = 0.999

    def __post_init__(self):
        if self.call_every is not None and self.call_every < 1:
            raise ValueError("call_every must be >= 1")


Schedule = Union[Constant, LinearWarmup, VaswaniNoam, AdafactorAnneal]


def anneal_call_every(epoch_iters: int, beta2: float = 0.999) -> int:
    return min(epoch_iters, int(round(2.0 / (1.0 - beta2))))


def schedule_value(s: Schedule, step: int, epoch_iters: int | None = None) -> float:
    """Learning rate (relative step, for the anneal) at 1-based ``step``."""
    if step < 1:
        raise ValueError("schedules are defined for step >= 1")
    if isinstance(s, Constant):
        return s.lr
    if isinstance(s, LinearWarmup):
        if s.warmup_steps == 0:
            return s.target_lr
        return s.target_lr * min(1.0, step / s.warmup_steps)
    if isinstance(s, VaswaniNoam):
        return s.coeff * min(step**-0.5, step / s.knee)
    if isinstance(s, AdafactorAnneal):
        call_every = s.call_every
        if call_every is None:
            if epoch_iters is None:
                raise ValueError("AdafactorAnneal without call_every needs epoch_iters")
            call_every = anneal_call_every(epoch_iters, s.beta2)
        k = 1 + (step - 1) // call_every
        return min(RELATIVE_STEP_CAP, k**-0.5)
    raise TypeError(f"unknown schedule {s!r}")


# ---------------------------------------------------------------------------
# Simulation harness

OPTIMIZER_NAMES = ("adam", "radam", "adafactor")


@dataclass(frozen=True)
class TrajectoryPoint:
    step: int
    loss: float
    lr: float
    diverged: bool = False


def simulate(
    optimizer: str,
    schedule: Schedule | None,
    objective: str | Objective,
    steps: int,
    seed: int,
    hyper: Hyper | None = None,
) -> list[TrajectoryPoint]:
    """Deterministic optimization run on an analytic objective.

    Each point records the loss after that step's update.  Divergence
    (non-finite loss, loss above :data:`DIVERGENCE_LOSS_LIMIT`, or a
    non-finite gradient) terminates the trajectory with the flag set.
    ``schedule=None`` means Adafactor's internal relative step; the other
    optimizers require a schedule.
    """
    if optimizer not in OPTIMIZER_NAMES:
        raise ValueError(f"unknown optimizer {optimizer!r}")
    obj = get_objective(objective) if isinstance(objective, str) else objective
    hyper = hyper or DEFAULT_HYPER
    rng = np.random.default_rng(seed)
    params = obj.init(rng)
    if optimizer == "adam":
        state: AdamState | RAdamState | AdafactorState = AdamState.init(params)
    elif optimizer == "radam":
        state = RAdamState.init(params)
    else:
        state = AdafactorState.init(params)
    if schedule is None and optimizer != "adafactor":
        raise ValueError(f"{optimizer} requires a schedule")

    trajectory: list[TrajectoryPoint] = []
    for step in range(1, steps + 1):
        lr = None if schedule is None else schedule_value(schedule, step)
        try:
            grads = obj.grad(params)
            if optimizer == "adam":
                state, delta = adam_step(state, grads, hyper, lr)
            elif optimizer == "radam":
                state, delta = radam_step(state, grads, hyper, lr)
            else:
                state, delta = adafactor_step(state, grads, hyper, params, lr)
        except NonFiniteGradientError:
            trajectory.append(TrajectoryPoint(step, float("nan"), lr or 0.0, True))
            break
        params = {k: params[k] + delta[k] for k in params}
        loss = obj.value(params)
        if not math.isfinite(loss) or loss > DIVERGENCE_LOSS_LIMIT:
            trajectory.append(TrajectoryPoint(step, loss, lr or 0.0, True))
            break
        trajectory.append(TrajectoryPoint(step, loss, lr if lr is not None else 0.0))
    return trajectory


def write_trajectory(path, trajectory: Iterable[TrajectoryPoint]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "loss", "lr", "diverged"])
        for pt in trajectory:
            writer.writerow([pt.step, repr(pt.loss), repr(pt.lr), int(pt.diverged)])


def defaults_text(hyper: Hyper = DEFAULT_HYPER) -> str:
    """The key=value defaults file recording every constant in play."""
    pairs = [
        ("adam.beta1", hyper.beta1),
        ("adam.beta2", hyper.beta2),
        ("adam.eps", hyper.eps),
        ("radam.beta1", hyper.beta1),
        ("radam.beta2", hyper.beta2),
        ("radam.eps", hyper.eps),
        ("radam.rectify_threshold", 4.0),
        ("adafactor.eps1", hyper.eps1),
        ("adafactor.eps2", hyper.eps2),
        ("adafactor.clip_threshold", hyper.clip_threshold),
        ("adafactor.decay_rate", hyper.decay_rate),
        ("adafactor.relative_step", hyper.relative_step),
        ("adafactor.relative_step_cap", RELATIVE_STEP_CAP),
        ("adafactor.scale_parameter", hyper.scale_parameter),
        ("adafactor.warmup_init", hyper.warmup_init),
        ("weight_decay", hyper.weight_decay),
        ("noam.coeff", 0.0325),
        ("noam.knee", 252982),
        ("divergence.loss_limit", DIVERGENCE_LOSS_LIMIT),
    ]
    return "".join(f"{k}={v}\n" for k, v in pairs)


def write_defaults_file(path, hyper: Hyper = DEFAULT_HYPER) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(defaults_text(hyper))
