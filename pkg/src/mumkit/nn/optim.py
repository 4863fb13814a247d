"""Adam with bias correction over named parameter arrays."""

from dataclasses import dataclass, field

import numpy as np

from mumkit.errors import ShapeError


@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(
    params: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
    state: AdamState,
) -> dict[str, np.ndarray]:
    """Update every parameter named in ``grads`` in place and return ``params``.

    Raises:
        ShapeError: a gradient names an unknown parameter or has the wrong shape
    """
    for name, grad in grads.items():
        if name not in params:
            raise ShapeError(f"gradient for unknown parameter {name!r}")
        if grad.shape != params[name].shape:
            raise ShapeError(
                f"gradient shape {grad.shape} != parameter shape "
                f"{params[name].shape} for {name!r}"
            )

    state.step += 1
    t = state.step
    correction1 = 1.0 - state.beta1**t
    correction2 = 1.0 - state.beta2**t
    for name, grad in grads.items():
        m = state.m.get(name)
        v = state.v.get(name)
        if m is None or v is None:
            m = np.zeros_like(params[name])
            v = np.zeros_like(params[name])
        m = state.beta1 * m + (1.0 - state.beta1) * grad
        v = state.beta2 * v + (1.0 - state.beta2) * grad * grad
        state.m[name], state.v[name] = m, v

        m_hat = m / correction1
        v_hat = v / correction2
        params[name] -= state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return params
