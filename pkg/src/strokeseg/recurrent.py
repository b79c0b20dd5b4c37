"""Layer-normalized LSTM cell and parameter initialization.

The cell follows the standard gate equations with layer normalization
applied to each gate pre-activation block separately and to the cell
state before it enters the output path. Recurrent dropout multiplies the
candidate update only, so the cell memory path is never zeroed.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from .autodiff import Tensor, as_tensor, sigmoid

__all__ = ["LstmParams", "xavier_init", "layer_norm", "lstm_step", "run_lstm"]


def xavier_init(rows: int, cols: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform Xavier/Glorot draw of shape (rows, cols)."""
    if rows <= 0 or cols <= 0:
        raise ValueError("xavier_init needs positive dimensions")
    bound = np.sqrt(6.0 / (rows + cols))
    return rng.uniform(-bound, bound, size=(rows, cols))


def layer_norm(v, gain, bias, eps: float = 1e-6) -> Tensor:
    """Normalize over the last axis, then scale and shift.

    Statistics are taken per vector (per row for batched input).
    """
    v = as_tensor(v)
    if v.shape[-1] < 2:
        raise ValueError("layer_norm needs vectors of length >= 2")
    mu = v.mean(axis=-1, keepdims=True)
    centered = v - mu
    var = (centered * centered).mean(axis=-1, keepdims=True)
    return centered * ((var + eps) ** -0.5) * as_tensor(gain) + as_tensor(bias)


@dataclass
class LstmParams:
    """Weights for one cell. Gate blocks are ordered [input, forget, candidate, output].

    w_x: (input_size, 4H) input weights, one Xavier block per gate.
    w_h: (H, 4H) recurrent weights.
    b:   (4H,) pre-activation bias.
    ln_g*/ln_b* pairs: layer-norm gain and bias per gate block; ln_gc/ln_bc
    normalize the cell state on the output path.
    """

    w_x: object
    w_h: object
    b: object
    ln_gi: object
    ln_bi: object
    ln_gf: object
    ln_bf: object
    ln_gg: object
    ln_bg: object
    ln_go: object
    ln_bo: object
    ln_gc: object
    ln_bc: object

    @classmethod
    def init(cls, input_size: int, hidden_size: int, rng: np.random.Generator) -> "LstmParams":
        h = hidden_size
        w_x = np.hstack([xavier_init(input_size, h, rng) for _ in range(4)])
        w_h = np.hstack([xavier_init(h, h, rng) for _ in range(4)])
        ones = np.ones(h)
        zeros = np.zeros(h)
        # Forget-gate layer-norm bias starts at 1 for stable early training.
        return cls(
            w_x=w_x, w_h=w_h, b=np.zeros(4 * h),
            ln_gi=ones.copy(), ln_bi=zeros.copy(),
            ln_gf=ones.copy(), ln_bf=np.ones(h),
            ln_gg=ones.copy(), ln_bg=zeros.copy(),
            ln_go=ones.copy(), ln_bo=zeros.copy(),
            ln_gc=ones.copy(), ln_bc=zeros.copy(),
        )

    def to_dict(self, prefix: str) -> dict:
        return {f"{prefix}.{f.name}": getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, d: dict, prefix: str) -> "LstmParams":
        return cls(**{f.name: d[f"{prefix}.{f.name}"] for f in fields(cls)})

    @property
    def hidden_size(self) -> int:
        arr = self.w_h.data if isinstance(self.w_h, Tensor) else self.w_h
        return arr.shape[0]


def lstm_step(p: LstmParams, x, h_prev, c_prev, dropout_mask=None):
    """One LSTM step on a (B, D) batch. Returns (h, c) Tensors.

    `dropout_mask`, when given, is an inverted-dropout mask applied to the
    candidate update (recurrent dropout without memory loss).
    """
    x = as_tensor(x)
    h_prev = as_tensor(h_prev)
    c_prev = as_tensor(c_prev)
    n = p.hidden_size
    if x.shape[-1] != (p.w_x.data if isinstance(p.w_x, Tensor) else p.w_x).shape[0]:
        raise ValueError(f"lstm_step input size {x.shape[-1]} does not match weights")

    z = x @ p.w_x + h_prev @ p.w_h + p.b
    zi = z[..., 0 * n:1 * n]
    zf = z[..., 1 * n:2 * n]
    zg = z[..., 2 * n:3 * n]
    zo = z[..., 3 * n:4 * n]

    i = sigmoid(layer_norm(zi, p.ln_gi, p.ln_bi))
    f = sigmoid(layer_norm(zf, p.ln_gf, p.ln_bf))
    g = layer_norm(zg, p.ln_gg, p.ln_bg).tanh()
    o = sigmoid(layer_norm(zo, p.ln_go, p.ln_bo))

    if dropout_mask is not None:
        g = g * dropout_mask

    c = f * c_prev + i * g
    h = o * layer_norm(c, p.ln_gc, p.ln_bc).tanh()
    return h, c


def run_lstm(p: LstmParams, xs: np.ndarray, mask: np.ndarray | None = None,
             dropout_mask=None, inputs_extra=None):
    """Run a cell over a (B, L, D) batch and return the final (h, c).

    `mask` (B, L) latches the state on padded steps, so the result is the
    state after each row's last real step. `inputs_extra` (a (B, E) Tensor)
    is concatenated to every step's input.
    """
    from .autodiff import concat

    b, length, _ = xs.shape
    n = p.hidden_size
    h = as_tensor(np.zeros((b, n)))
    c = as_tensor(np.zeros((b, n)))
    for t in range(length):
        x_t = as_tensor(xs[:, t, :])
        if inputs_extra is not None:
            x_t = concat([x_t, inputs_extra], axis=1)
        h_new, c_new = lstm_step(p, x_t, h, c, dropout_mask)
        if mask is not None:
            m = mask[:, t:t + 1].astype(np.float64)
            h = h_new * m + h * (1.0 - m)
            c = c_new * m + c * (1.0 - m)
        else:
            h, c = h_new, c_new
    return h, c
