"""Adam with bias correction.

Defaults are the ones used throughout the experiments: step size 2e-4,
first-moment decay 0.5, second-moment decay 0.999.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ContractViolation
from .tensor import Tensor


@dataclass
class AdamState:
    """Moment estimates for one parameter tensor."""

    m: np.ndarray
    v: np.ndarray


def adam_step(param: Tensor, state: AdamState, step: int, alpha: float,
              beta1: float, beta2: float, epsilon: float) -> None:
    """One in-place Adam update; `step` is 1-based and drives bias correction."""
    if param.grad is None:
        raise ContractViolation("adam_step on a parameter with no gradient")
    g = param.grad
    state.m = beta1 * state.m + (1.0 - beta1) * g
    state.v = beta2 * state.v + (1.0 - beta2) * (g * g)
    m_hat = state.m / (1.0 - beta1 ** step)
    v_hat = state.v / (1.0 - beta2 ** step)
    param.data -= alpha * m_hat / (np.sqrt(v_hat) + epsilon)


@dataclass
class Adam:
    """Optimizer over a fixed parameter list; call order: backward, step, zero_grad."""

    params: list[Tensor]
    alpha: float = 2e-4
    beta1: float = 0.5
    beta2: float = 0.999
    epsilon: float = 1e-8
    step_count: int = 0
    _states: list[AdamState] = field(default_factory=list, repr=False)

    def __post_init__(self):
        if not self.params:
            raise ContractViolation("Adam needs at least one parameter")
        self._states = [
            AdamState(m=np.zeros_like(p.data), v=np.zeros_like(p.data))
            for p in self.params
        ]

    def step(self) -> None:
        """Apply one update to every parameter (all must hold gradients)."""
        self.step_count += 1
        for p, s in zip(self.params, self._states):
            adam_step(p, s, self.step_count, self.alpha, self.beta1,
                      self.beta2, self.epsilon)

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None
