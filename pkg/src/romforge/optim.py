"""AdamW with decoupled weight decay and a cosine warm-restart schedule."""

from __future__ import annotations

import math

import numpy as np

from .errors import ConfigurationError

__all__ = ["init_adamw_state", "adamw_step", "cosine_warm_restart_lr"]


def init_adamw_state(params: dict[str, np.ndarray]) -> dict:
    return {
        "t": 0,
        "m": {k: np.zeros_like(v) for k, v in params.items()},
        "v": {k: np.zeros_like(v) for k, v in params.items()},
    }


def adamw_step(params: dict[str, np.ndarray], grads: dict[str, np.ndarray],
               state: dict, lr: float, beta1: float = 0.9,
               beta2: float = 0.999, eps: float = 1e-8,
               weight_decay: float = 1e-4) -> None:
    """One AdamW update, in place.

    Weight decay is decoupled: it scales the pre-update parameter value and is
    not folded into the gradient, so the adaptive moments never see it.
    """
    state["t"] += 1
    t = state["t"]
    bc1 = 1.0 - beta1 ** t
    bc2 = 1.0 - beta2 ** t
    for name, p in params.items():
        g = grads[name]
        m = state["m"][name]
        v = state["v"][name]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        m_hat = m / bc1
        v_hat = v / bc2
        p -= lr * m_hat / (np.sqrt(v_hat) + eps) + lr * weight_decay * p


def cosine_warm_restart_lr(epoch: float, lr_max: float, lr_min: float,
                           t0: int, mult: int) -> float:
    """Learning rate at `epoch` under cosine annealing with warm restarts.

    Periods run t0, t0*mult, t0*mult^2, ... epochs; within each period the
    rate decays from lr_max to lr_min along a half cosine and snaps back to
    lr_max at the next restart. Fractional epochs evaluate the underlying
    continuous schedule (lr approaches lr_min just before a restart).
    """
    if t0 < 1 or mult < 1:
        raise ConfigurationError("t0 and mult must be at least 1")
    if epoch < 0:
        raise ConfigurationError("epoch must be non-negative")
    t_cur = epoch
    t_i = t0
    while t_cur >= t_i:
        t_cur -= t_i
        t_i *= mult
    return lr_min + 0.5 * (lr_max - lr_min) * (1.0 + math.cos(math.pi * t_cur / t_i))
