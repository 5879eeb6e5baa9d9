"""Torch-side optimizers and schedules for the comparison experiments.

Adam and RAdam come from torch.optim.  Adafactor is implemented here in
its reference default configuration (factored second moments for matrix
parameters, update clipping at 1.0, relative step min(1e-2, 1/sqrt(t))
scaled by max(1e-3, RMS(theta)), beta2_t = 1 - t**-0.8, no momentum), so
runs stay dependency-light and bit-comparable with the workbench's numpy
reference.
"""

from __future__ import annotations

import math

import torch
from torch.optim import Optimizer

from .config import TrainConfig

DIVERGENCE_LOSS_LIMIT = 1e12
RELATIVE_STEP_CAP = 1e-2


class Adafactor(Optimizer):
    def __init__(
        self,
        params,
        lr: float | None = None,
        eps1: float = 1e-30,
        eps2: float = 1e-3,
        clip_threshold: float = 1.0,
        decay_rate: float = -0.8,
        scale_parameter: bool = True,
    ):
        defaults = dict(
            lr=lr,
            eps1=eps1,
            eps2=eps2,
            clip_threshold=clip_threshold,
            decay_rate=decay_rate,
            scale_parameter=scale_parameter,
        )
        super().__init__(params, defaults)

    @staticmethod
    def _rms(tensor: torch.Tensor) -> float:
        return float(tensor.norm(2) / (tensor.numel() ** 0.5))

    @torch.no_grad()
    def step(self, closure=None):
        loss = None
        if closure is not None:
            with torch.enable_grad():
                loss = closure()
        for group in self.param_groups:
            for p in group["params"]:
                if p.grad is None:
                    continue
                grad = p.grad
                state = self.state[p]
                factored = grad.dim() >= 2
                if len(state) == 0:
                    state["step"] = 0
                    if factored:
                        state["row"] = torch.zeros(grad.shape[:-1], dtype=grad.dtype)
                        state["col"] = torch.zeros(
                            grad.shape[:-2] + grad.shape[-1:], dtype=grad.dtype
                        )
                    else:
                        state["v"] = torch.zeros_like(grad)
                state["step"] += 1
                t = state["step"]
                beta2t = 1.0 - t ** group["decay_rate"]
                rel = group["lr"]
                if rel is None:
                    rel = min(RELATIVE_STEP_CAP, 1.0 / math.sqrt(t))
                alpha = rel
                if group["scale_parameter"]:
                    alpha *= max(group["eps2"], self._rms(p))

                gsq = grad * grad + group["eps1"]
                if factored:
                    row, col = state["row"], state["col"]
                    row.mul_(beta2t).add_(gsq.mean(dim=-1), alpha=1.0 - beta2t)
                    col.mul_(beta2t).add_(gsq.mean(dim=-2), alpha=1.0 - beta2t)
                    r_factor = (row / row.mean(dim=-1, keepdim=True)).rsqrt().unsqueeze(-1)
                    c_factor = col.rsqrt().unsqueeze(-2)
                    update = grad * r_factor * c_factor
                else:
                    v = state["v"]
                    v.mul_(beta2t).add_(gsq, alpha=1.0 - beta2t)
                    update = grad * v.rsqrt()
                update.div_(max(1.0, self._rms(update) / group["clip_threshold"]))
                p.add_(update, alpha=-alpha)
        return loss


def build_optimizer(cfg: TrainConfig, model: torch.nn.Module) -> Optimizer:
    if cfg.optimizer == "adam":
        return torch.optim.Adam(model.parameters(), lr=cfg.lr, betas=(0.9, 0.999))
    if cfg.optimizer == "radam":
        return torch.optim.RAdam(model.parameters(), lr=cfg.lr, betas=(0.9, 0.999))
    lr = cfg.lr if cfg.schedule in ("const", "warmup") else None
    return Adafactor(model.parameters(), lr=lr)


def lr_at(cfg: TrainConfig, step: int, iters_per_epoch: int) -> float | None:
    """Learning rate for 1-based ``step``; None keeps Adafactor's internal
    relative step untouched."""
    if cfg.schedule == "const":
        return cfg.lr
    if cfg.schedule == "warmup":
        if cfg.warmup_steps == 0:
            return cfg.lr
        return cfg.lr * min(1.0, step / cfg.warmup_steps)
    if cfg.schedule == "anneal":
        call_every = cfg.anneal_call_every
        if call_every is None:
            call_every = min(iters_per_epoch, int(round(2.0 / (1.0 - 0.999))))
        k = 1 + (step - 1) // call_every
        return min(RELATIVE_STEP_CAP, k**-0.5)
    return None  # "none": adafactor internal step


def apply_lr(optimizer: Optimizer, lr: float | None) -> None:
    if lr is None:
        return
    for group in optimizer.param_groups:
        group["lr"] = lr


def current_lr(optimizer: Optimizer) -> float:
    lr = optimizer.param_groups[0]["lr"]
    if lr is None:  # adafactor internal step: report the relative step
        state = next(iter(optimizer.state.values()), None)
        t = state["step"] if state else 0
        return min(RELATIVE_STEP_CAP, 1.0 / math.sqrt(max(t, 1)))
    return float(lr)


def diverged(loss: float) -> bool:
    return not math.isfinite(loss) or loss > DIVERGENCE_LOSS_LIMIT
