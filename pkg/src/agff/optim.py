"""Adam optimizer with bias correction, operating on named parameter arrays."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NumericalError, ShapeError


@dataclass
class AdamState:
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    scratch: dict[str, np.ndarray] = field(default_factory=dict)

    @classmethod
    def init(cls, params: dict[str, np.ndarray]) -> "AdamState":
        return cls(
            m={k: np.zeros_like(a) for k, a in params.items()},
            v={k: np.zeros_like(a) for k, a in params.items()},
            scratch={k: np.empty_like(a) for k, a in params.items()},
        )


def adam_step(params: dict[str, np.ndarray], grads: dict[str, np.ndarray],
              state: AdamState, lr: float) -> None:
    """One in-place update: m/v moment tracking, bias correction, then
    theta -= lr * m_hat / (sqrt(v_hat) + eps)."""
    if lr <= 0:
        raise ValueError(f"learning rate must be positive, got {lr}")
    state.t += 1
    bc1 = 1.0 - state.beta1 ** state.t
    bc2 = 1.0 - state.beta2 ** state.t
    for name, theta in params.items():
        g = grads[name]
        if g.shape != theta.shape:
            raise ShapeError(f"{name}: gradient shape {g.shape} != parameter shape {theta.shape}")
        m = state.m[name]
        v = state.v[name]
        s = state.scratch.get(name)
        if s is None or s.shape != theta.shape:
            s = state.scratch[name] = np.empty_like(theta)
        # m = beta1*m + (1-beta1)*g ; v = beta2*v + (1-beta2)*g^2
        m *= state.beta1
        np.multiply(g, 1.0 - state.beta1, out=s)
        m += s
        v *= state.beta2
        np.multiply(g, g, out=s)
        s *= 1.0 - state.beta2
        v += s
        # theta -= lr * (m/bc1) / (sqrt(v/bc2) + eps)
        np.divide(v, bc2, out=s)
        np.sqrt(s, out=s)
        s += state.eps
        np.divide(m, s, out=s)
        s *= lr / bc1
        theta -= s
        # single-pass probe: any NaN/Inf in theta poisons the sum
        if not np.isfinite(np.sum(theta)) and not np.all(np.isfinite(theta)):
            raise NumericalError(f"non-finite parameter after Adam update: {name}")
