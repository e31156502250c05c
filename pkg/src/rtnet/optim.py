"""Adam with L2-into-gradients and a stepwise learning-rate schedule."""
from __future__ import annotations

import numpy as np

from .tensor import Parameter


class Adam:
    """Adam optimizer.

    L2 regularization is added to the raw gradients before the moment
    updates (classic Adam-with-L2, not decoupled weight decay). The
    schedule is a sequence of (iteration, factor) pairs: once the step
    counter reaches an iteration, the base learning rate is multiplied
    by that factor from then on.
    """

    def __init__(
        self,
        params: list[Parameter],
        lr: float = 5e-4,
        betas: tuple[float, float] = (0.9, 0.999),
        eps: float = 1e-8,
        l2: float = 1e-5,
        schedule: tuple[tuple[int, float], ...] = (),
    ):
        if lr <= 0:
            raise ValueError(f"learning rate must be strictly positive, got {lr}")
        self.params = list(params)
        self.lr = lr
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.l2 = l2
        self.schedule = tuple(sorted(schedule))
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def effective_lr(self, t: int | None = None) -> float:
        t = self.t if t is None else t
        lr = self.lr
        for milestone, factor in self.schedule:
            if t >= milestone:
                lr *= factor
        return lr

    def step(self) -> None:
        self.t += 1
        lr = self.effective_lr()
        b1, b2 = self.beta1, self.beta2
        bias1 = 1.0 - b1**self.t
        bias2 = 1.0 - b2**self.t
        for p, m, v in zip(self.params, self.m, self.v):
            g = p.grad
            if self.l2:
                g = g + self.l2 * p.data
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * (g * g)
            m_hat = m / bias1
            v_hat = v / bias2
            p.data -= lr * m_hat / (np.sqrt(v_hat) + self.eps)

    def zero_grad(self) -> None:
        for p in self.params:
            p.zero_grad()
