"""First-order optimizers: Adam, SGD, RMSprop, Adagrad.

Each has a pure per-tensor step function plus a shared Optimizer wrapper
that keeps one state per named parameter and updates a parameter dict in
sorted-name order (fixed order keeps runs reproducible).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ShapeMismatch


def _check_shapes(param: np.ndarray, grad: np.ndarray, *extra: np.ndarray) -> None:
    for other in (grad, *extra):
        if other.shape != param.shape:
            raise ShapeMismatch(f"state/gradient shape {other.shape} != parameter shape {param.shape}")


@dataclass
class AdamState:
    t: int
    m: np.ndarray
    v: np.ndarray
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def init(cls, param: np.ndarray, lr: float = 1e-3, beta1: float = 0.9,
             beta2: float = 0.999, eps: float = 1e-8) -> "AdamState":
        return cls(0, np.zeros_like(param), np.zeros_like(param), lr, beta1, beta2, eps)


def adam_step(param: np.ndarray, grad: np.ndarray, state: AdamState) -> tuple[np.ndarray, AdamState]:
    """Bias-corrected Adam update; returns the new parameter and state."""
    _check_shapes(param, grad, state.m, state.v)
    t = state.t + 1
    m = state.beta1 * state.m + (1.0 - state.beta1) * grad
    v = state.beta2 * state.v + (1.0 - state.beta2) * np.square(grad)
    m_hat = m / (1.0 - state.beta1**t)
    v_hat = v / (1.0 - state.beta2**t)
    new_param = param - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    new_state = AdamState(t, m.astype(param.dtype), v.astype(param.dtype),
                          state.lr, state.beta1, state.beta2, state.eps)
    return new_param.astype(param.dtype), new_state


@dataclass
class SgdState:
    lr: float = 1e-3

    @classmethod
    def init(cls, param: np.ndarray, lr: float = 1e-3) -> "SgdState":
        return cls(lr)


def sgd_step(param: np.ndarray, grad: np.ndarray, state: SgdState) -> tuple[np.ndarray, SgdState]:
    _check_shapes(param, grad)
    return (param - state.lr * grad).astype(param.dtype), state


@dataclass
class RmspropState:
    v: np.ndarray
    lr: float = 1e-3
    rho: float = 0.9
    eps: float = 1e-8

    @classmethod
    def init(cls, param: np.ndarray, lr: float = 1e-3, rho: float = 0.9, eps: float = 1e-8) -> "RmspropState":
        return cls(np.zeros_like(param), lr, rho, eps)


def rmsprop_step(param: np.ndarray, grad: np.ndarray, state: RmspropState) -> tuple[np.ndarray, RmspropState]:
    _check_shapes(param, grad, state.v)
    v = state.rho * state.v + (1.0 - state.rho) * np.square(grad)
    new_param = param - state.lr * grad / (np.sqrt(v) + state.eps)
    return new_param.astype(param.dtype), RmspropState(v.astype(param.dtype), state.lr, state.rho, state.eps)


@dataclass
class AdagradState:
    acc: np.ndarray
    lr: float = 1e-2
    eps: float = 1e-8

    @classmethod
    def init(cls, param: np.ndarray, lr: float = 1e-2, eps: float = 1e-8) -> "AdagradState":
        return cls(np.zeros_like(param), lr, eps)


def adagrad_step(param: np.ndarray, grad: np.ndarray, state: AdagradState) -> tuple[np.ndarray, AdagradState]:
    _check_shapes(param, grad, state.acc)
    acc = state.acc + np.square(grad)
    new_param = param - state.lr * grad / (np.sqrt(acc) + state.eps)
    return new_param.astype(param.dtype), AdagradState(acc.astype(param.dtype), state.lr, state.eps)


_STEP_FNS = {
    "adam": (AdamState, adam_step),
    "sgd": (SgdState, sgd_step),
    "rmsprop": (RmspropState, rmsprop_step),
    "adagrad": (AdagradState, adagrad_step),
}


@dataclass
class Optimizer:
    """Applies one step rule across a named parameter dict, in sorted order."""

    name: str
    lr: float = 1e-3
    states: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.name not in _STEP_FNS:
            raise ValueError(f"unknown optimizer {self.name!r}, pick from {sorted(_STEP_FNS)}")

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        state_cls, step_fn = _STEP_FNS[self.name]
        for key in sorted(params):
            if key not in grads:
                continue
            if key not in self.states:
                self.states[key] = state_cls.init(params[key], lr=self.lr)
            params[key][...], self.states[key] = step_fn(params[key], grads[key], self.states[key])


def make_optimizer(name: str, lr: float = 1e-3) -> Optimizer:
    return Optimizer(name=name, lr=lr)
