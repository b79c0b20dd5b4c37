"""Central finite-difference gradient checking."""

from __future__ import annotations

import numpy as np

__all__ = ["finite_difference_check"]


def finite_difference_check(loss_and_grad_fn, params: dict, h: float = 1e-5,
                            floor: float = 1e-6) -> float:
    """Max relative error between analytic and numeric gradients.

    `loss_and_grad_fn(params)` must return (loss_value, grads_dict) and be
    deterministic in `params`. Every element of every parameter is perturbed
    by +/- h and compared against the analytic gradient with relative error
    |a - n| / max(|a|, |n|, floor).
    """
    _, grads = loss_and_grad_fn(params)
    worst = 0.0
    for k, p in params.items():
        p = np.asarray(p, dtype=np.float64)
        g = np.asarray(grads[k], dtype=np.float64)
        if g.shape != p.shape:
            raise ValueError(f"gradient shape mismatch for {k}")
        it = np.nditer(p, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            orig = p[idx]
            p[idx] = orig + h
            lo_plus, _ = loss_and_grad_fn(params)
            p[idx] = orig - h
            lo_minus, _ = loss_and_grad_fn(params)
            p[idx] = orig
            numeric = (lo_plus - lo_minus) / (2.0 * h)
            denom = max(abs(g[idx]), abs(numeric), floor)
            worst = max(worst, abs(g[idx] - numeric) / denom)
    return worst
