"""Finite-difference verification of analytic gradients.

Central differences at eps=1e-5 against tape gradients, in float64. The
loss closure must be deterministic: any randomness (sampled regions,
dropout-style masks) has to be fixed before checking, otherwise the two
perturbed evaluations see different functions and the report is garbage.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .rng import RngStream
from .tensor import Parameter, no_grad


@dataclass
class GradCheckReport:
    eps: float
    tolerance: float
    per_param: dict = field(default_factory=dict)  # name -> max relative error

    @property
    def max_rel_err(self) -> float:
        return max(self.per_param.values()) if self.per_param else 0.0

    @property
    def passed(self) -> bool:
        return self.max_rel_err < self.tolerance

    def lines(self) -> list[str]:
        out = []
        for name, err in self.per_param.items():
            mark = "ok" if err < self.tolerance else "FAIL"
            out.append(f"  {name:40s} max rel err {err:.3e}  [{mark}]")
        out.append(f"overall max rel err {self.max_rel_err:.3e} "
                   f"({'PASS' if self.passed else 'FAIL'} at {self.tolerance:g})")
        return out

    def __str__(self) -> str:
        return "\n".join(self.lines())


def _rel_err(a: float, n: float) -> float:
    return abs(a - n) / max(abs(a) + abs(n), 1e-3)


def gradient_check(
    loss_fn,
    params: list[Parameter],
    eps: float = 1e-5,
    tolerance: float = 1e-4,
    max_entries: int | None = None,
    rng: RngStream | None = None,
) -> GradCheckReport:
    """Compare tape gradients of ``loss_fn()`` against central differences.

    loss_fn: zero-argument closure returning a scalar loss Tensor built
    from `params`. When `max_entries` is set, at most that many entries
    per parameter are probed (chosen by `rng`, default stream 0).
    """
    for p in params:
        if p.data.dtype != np.float64:
            raise ValueError(f"gradient_check requires float64 parameters; {p.name} is {p.data.dtype}")
    for p in params:
        p.zero_grad()
    loss = loss_fn()
    loss.backward()
    analytic = {p.name: p.grad.copy() for p in params}

    if rng is None:
        rng = RngStream(0)
    report = GradCheckReport(eps=eps, tolerance=tolerance)
    for p in params:
        flat = p.data.reshape(-1)
        n = flat.size
        if max_entries is not None and n > max_entries:
            idxs = np.sort(rng.choice(n, size=max_entries, replace=False))
        else:
            idxs = np.arange(n)
        a_flat = analytic[p.name].reshape(-1)
        worst = 0.0
        for i in idxs:
            orig = flat[i]
            flat[i] = orig + eps
            with no_grad():
                lo_plus = loss_fn().item()
            flat[i] = orig - eps
            with no_grad():
                lo_minus = loss_fn().item()
            flat[i] = orig
            numeric = (lo_plus - lo_minus) / (2.0 * eps)
            worst = max(worst, _rel_err(float(a_flat[i]), numeric))
        report.per_param[p.name] = worst
    return report
