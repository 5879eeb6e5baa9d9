"""Analytic objectives for verifying optimizer updates without a DL stack.

Each objective owns its parameter shapes (a matrix is included where it
matters, so factored accumulators get exercised), an analytic gradient,
and a seeded start point.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

Params = dict[str, np.ndarray]


@dataclass(frozen=True)
class Objective:
    name: str
    init: Callable[[np.random.Generator], Params]
    value: Callable[[Params], float]
    grad: Callable[[Params], Params]


def _bowl_init(rng: np.random.Generator) -> Params:
    return {"w": rng.normal(0.0, 2.0, size=8), "m": rng.normal(0.0, 2.0, size=(4, 4))}


def _bowl_value(p: Params) -> float:
    return 0.5 * float(sum(np.sum(a * a) for a in p.values()))


def _bowl_grad(p: Params) -> Params:
    return {k: a.copy() for k, a in p.items()}


_ILLCOND_CURV = np.logspace(0.0, 4.0, 16)


def _illcond_init(rng: np.random.Generator) -> Params:
    return {"w": rng.normal(0.0, 1.0, size=16)}


def _illcond_value(p: Params) -> float:
    w = p["w"]
    return 0.5 * float(np.sum(_ILLCOND_CURV * w * w))


def _illcond_grad(p: Params) -> Params:
    return {"w": _ILLCOND_CURV * p["w"]}


def _rosenbrock_init(rng: np.random.Generator) -> Params:
    return {"w": rng.uniform(-1.5, 1.5, size=8)}


def _rosenbrock_value(p: Params) -> float:
    w = p["w"]
    return float(np.sum(100.0 * (w[1:] - w[:-1] ** 2) ** 2 + (1.0 - w[:-1]) ** 2))


def _rosenbrock_grad(p: Params) -> Params:
    w = p["w"]
    g = np.zeros_like(w)
    g[:-1] += -400.0 * w[:-1] * (w[1:] - w[:-1] ** 2) - 2.0 * (1.0 - w[:-1])
    g[1:] += 200.0 * (w[1:] - w[:-1] ** 2)
    return {"w": g}


OBJECTIVES: dict[str, Objective] = {
    "bowl": Objective("bowl", _bowl_init, _bowl_value, _bowl_grad),
    "illcond": Objective("illcond", _illcond_init, _illcond_value, _illcond_grad),
    "rosenbrock": Objective("rosenbrock", _rosenbrock_init, _rosenbrock_value, _rosenbrock_grad),
}


def get_objective(name: str) -> Objective:
    try:
        return OBJECTIVES[name]
    except KeyError:
        raise ValueError(f"unknown objective {name!r}; choose from {sorted(OBJECTIVES)}") from None


def finite_difference_grad(obj: Objective, params: Params, h: float = 1e-5) -> Params:
    """Central-difference gradient, the independent check on the analytic one.

    ``h`` balances truncation against roundoff; 1e-5 keeps the relative
    error near 1e-7 on these objectives.
    """
    out: Params = {}
    for key, arr in params.items():
        g = np.zeros_like(arr)
        flat = arr.reshape(-1)
        gflat = g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            hi = obj.value(params)
            flat[i] = orig - h
            lo = obj.value(params)
            flat[i] = orig
            gflat[i] = (hi - lo) / (2.0 * h)
        out[key] = g
    return out
