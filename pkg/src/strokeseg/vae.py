"""Stroke-level sequence VAE: bidirectional encoder, latent layer,
autoregressive mixture-density decoder, and the training loop.

Strokes are consumed as Point5 sequences. The encoder reads each sequence
forward and backward and concatenates the two final hidden states into h;
a linear layer maps h to the posterior (mu, sigma_hat). The decoder starts
from tanh(W_z z + b_z), consumes [s_{t-1}; z] at every step, and emits a
6M+3 mixture parameter vector per step.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .autodiff import Tensor, as_tensor, concat
from .mixture import MixtureParams, RawMixture, mixture_nll, split_params, transform_params, apply_temperature, sample_point
from .offsets import PEN_DRAW, START_ROW, StrokeBatch, augment_scale, make_stroke_batches, to_offsets
from .optim import AdamState, adam_update, clip_gradients
from .recurrent import LstmParams, lstm_step, run_lstm, xavier_init
from .sketch import Sketch, Stroke

__all__ = [
    "VaeConfig", "VaeModel", "LatentCode", "reverse_valid", "encode",
    "sample_latent", "init_decoder", "decode_teacher_forced", "decode_sample",
    "kl_loss", "kl_weight", "total_loss", "loss_and_grads", "train",
    "reconstruct_sketch",
]


@dataclass
class VaeConfig:
    """Model and training hyperparameters."""

    enc_hidden: int = 512        # per direction
    dec_hidden: int = 1024
    num_mixtures: int = 20
    latent_size: int = 128
    batch_size: int = 100
    kl_weight_start: float = 0.01
    kl_decay_rate: float = 0.99995
    learning_rate: float = 1e-4
    grad_clip: float = 1.0
    keep_prob: float = 0.9
    max_len: int = 128

    def __post_init__(self):
        if not 0.0 < self.kl_decay_rate < 1.0:
            raise ValueError("kl_decay_rate must lie in (0, 1)")
        if not 0.0 <= self.kl_weight_start <= 1.0:
            raise ValueError("kl_weight_start must lie in [0, 1]")
        for name in ("enc_hidden", "dec_hidden", "num_mixtures", "latent_size",
                     "batch_size", "max_len"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "VaeConfig":
        return cls(**d)


@dataclass
class LatentCode:
    z: np.ndarray
    mu: np.ndarray
    sigma_hat: np.ndarray


class VaeModel:
    """Flat parameter dictionary plus config; step counts optimizer updates."""

    def __init__(self, config: VaeConfig, params: dict, step: int = 0):
        self.config = config
        self.params = params
        self.step = step

    @classmethod
    def init(cls, config: VaeConfig, rng: np.random.Generator) -> "VaeModel":
        e, d = config.enc_hidden, config.dec_hidden
        nz, m = config.latent_size, config.num_mixtures
        params = {}
        params.update(LstmParams.init(5, e, rng).to_dict("enc_fwd"))
        params.update(LstmParams.init(5, e, rng).to_dict("enc_bwd"))
        params.update(LstmParams.init(5 + nz, d, rng).to_dict("dec"))
        params["w_mu"] = xavier_init(2 * e, nz, rng)
        params["b_mu"] = np.zeros(nz)
        params["w_sigma"] = xavier_init(2 * e, nz, rng)
        params["b_sigma"] = np.zeros(nz)
        params["w_z"] = xavier_init(nz, 2 * d, rng)
        params["b_z"] = np.zeros(2 * d)
        params["w_y"] = xavier_init(d, 6 * m + 3, rng)
        params["b_y"] = np.zeros(6 * m + 3)
        return cls(config, params)

    def tensors(self, requires_grad: bool = False) -> dict:
        return {k: Tensor(v, requires_grad=requires_grad)
                for k, v in self.params.items()}


def _as_batch(seq: np.ndarray):
    seq = np.asarray(seq, dtype=np.float64)
    if seq.ndim == 2:
        return seq[None, :, :], True
    if seq.ndim == 3:
        return seq, False
    raise ValueError("expected (L, 5) or (B, L, 5) sequences")


def reverse_valid(seq: np.ndarray, mask: np.ndarray | None) -> np.ndarray:
    """Reverse each row's real steps in place of order, leaving padding put."""
    out = seq.copy()
    if mask is None:
        return out[:, ::-1, :]
    for i in range(seq.shape[0]):
        n = int(mask[i].sum())
        out[i, :n] = seq[i, :n][::-1]
    return out


def _dropout_masks(config: VaeConfig, batch_rows: int, rng: np.random.Generator) -> dict:
    keep = config.keep_prob
    if keep >= 1.0:
        return {}
    def draw(h):
        return (rng.random((batch_rows, h)) < keep) / keep
    return {"enc_fwd": draw(config.enc_hidden),
            "enc_bwd": draw(config.enc_hidden),
            "dec": draw(config.dec_hidden)}


def encode(m: VaeModel, seq, mask: np.ndarray | None = None,
           params: dict | None = None, dropout_masks: dict | None = None):
    """Bidirectional encoding to the posterior (mu, sigma_hat) Tensors.

    `seq` is (L, 5) or (B, L, 5); `mask` flags real steps for padded input.
    """
    seq, single = _as_batch(seq)
    tp = params if params is not None else m.tensors()
    dm = dropout_masks or {}
    fwd = LstmParams.from_dict(tp, "enc_fwd")
    bwd = LstmParams.from_dict(tp, "enc_bwd")
    h_f, _ = run_lstm(fwd, seq, mask, dropout_mask=dm.get("enc_fwd"))
    h_b, _ = run_lstm(bwd, reverse_valid(seq, mask), mask,
                      dropout_mask=dm.get("enc_bwd"))
    h = concat([h_f, h_b], axis=1)
    mu = h @ tp["w_mu"] + tp["b_mu"]
    sigma_hat = h @ tp["w_sigma"] + tp["b_sigma"]
    if single:
        return mu.reshape((m.config.latent_size,)), \
            sigma_hat.reshape((m.config.latent_size,))
    return mu, sigma_hat


def encoder_feature(m: VaeModel, seq, mask: np.ndarray | None = None) -> np.ndarray:
    """Deterministic stroke representation h = [h_fwd; h_bwd], plain numpy."""
    seq, single = _as_batch(seq)
    tp = m.tensors()
    h_f, _ = run_lstm(LstmParams.from_dict(tp, "enc_fwd"), seq, mask)
    h_b, _ = run_lstm(LstmParams.from_dict(tp, "enc_bwd"),
                      reverse_valid(seq, mask), mask)
    h = np.concatenate([h_f.data, h_b.data], axis=1)
    return h[0] if single else h


def sample_latent(mu, sigma_hat, rng: np.random.Generator | None = None,
                  noise: np.ndarray | None = None) -> Tensor:
    """Reparameterized draw z = mu + exp(sigma_hat / 2) * noise."""
    mu = as_tensor(mu)
    sigma_hat = as_tensor(sigma_hat)
    if noise is None:
        if rng is None:
            raise ValueError("sample_latent needs an rng or explicit noise")
        noise = rng.standard_normal(mu.shape)
    return mu + (sigma_hat * 0.5).exp() * np.asarray(noise, dtype=np.float64)


def init_decoder(m: VaeModel, z, params: dict | None = None):
    """Initial decoder state (h0, c0) = split(tanh(W_z z + b_z))."""
    tp = params if params is not None else m.tensors()
    z = as_tensor(z)
    d = m.config.dec_hidden
    hc = (z @ tp["w_z"] + tp["b_z"]).tanh()
    return hc[..., :d], hc[..., d:]


def decode_teacher_forced(m: VaeModel, z, seq, params: dict | None = None,
                          dropout_mask=None) -> RawMixture:
    """Decode with ground-truth inputs; returns per-step raw mixtures.

    At step t the decoder consumes [s_{t-1}; z], with s_0 = [0 0 1 0 0].
    Output fields have shape (B, L, M) (or (L, M) for a single sequence).
    """
    seq, single = _as_batch(seq)
    tp = params if params is not None else m.tensors()
    z = as_tensor(z)
    if z.data.ndim == 1:
        z = z.reshape((1, z.shape[0]))
    b, length, _ = seq.shape
    prev = np.concatenate([np.tile(START_ROW, (b, 1, 1)), seq[:, :-1, :]], axis=1)
    dec = LstmParams.from_dict(tp, "dec")
    h, c = init_decoder(m, z, tp)
    ys = []
    k = 6 * m.config.num_mixtures + 3
    for t in range(length):
        x_t = concat([as_tensor(prev[:, t, :]), z], axis=1)
        h, c = lstm_step(dec, x_t, h, c, dropout_mask)
        y_t = h @ tp["w_y"] + tp["b_y"]
        ys.append(y_t.reshape((b, 1, k)))
    y = concat(ys, axis=1)
    if single:
        y = y.reshape((length, k))
    return split_params(y, m.config.num_mixtures)


def decode_sample(m: VaeModel, z, tau: float, rng: np.random.Generator,
                  max_len: int | None = None) -> np.ndarray:
    """Autoregressive sampling of one stroke as (L, 5) Point5 rows.

    Each sampled point feeds back concatenated with z; sampling stops when
    a pen-up or end state is drawn, or at max_len steps.
    """
    max_len = max_len if max_len is not None else m.config.max_len
    tp = m.tensors()
    z = as_tensor(np.asarray(z, dtype=np.float64).reshape(1, -1))
    dec = LstmParams.from_dict(tp, "dec")
    h, c = init_decoder(m, z, tp)
    s = START_ROW.reshape(1, 5).copy()
    rows = []
    for _ in range(max_len):
        x_t = concat([as_tensor(s), z], axis=1)
        h, c = lstm_step(dec, x_t, h, c)
        y = (h @ tp["w_y"] + tp["b_y"]).data[0]
        raw = split_params(y, m.config.num_mixtures)
        tempered = apply_temperature(raw, transform_params(raw), tau)
        dx, dy, pen = sample_point(tempered, rng)
        s = np.zeros((1, 5))
        s[0, 0], s[0, 1] = dx, dy
        s[0, 2 + pen] = 1.0
        rows.append(s[0].copy())
        if pen != PEN_DRAW:
            break
    return np.array(rows)


def kl_loss(mu, sigma_hat) -> Tensor:
    """KL divergence to the unit Gaussian prior, averaged over batch rows.

    For one row: -(1 / 2N_z) * sum(1 + sigma_hat - mu^2 - exp(sigma_hat)).
    """
    mu = as_tensor(mu)
    sigma_hat = as_tensor(sigma_hat)
    n_z = mu.shape[-1]
    terms = 1.0 + sigma_hat - mu * mu - sigma_hat.exp()
    return terms.sum(axis=-1).mean() * (-0.5 / n_z)


def kl_weight(step: int, kl_weight_start: float, kl_decay_rate: float) -> float:
    """Annealed KL weight, rising from the start value toward 1.

    Algebraically 1 - (1 - start) * rate^step, arranged so step 0 returns
    the start value exactly.
    """
    if step < 0:
        raise ValueError("step must be nonnegative")
    return kl_weight_start + (1.0 - kl_weight_start) * (1.0 - kl_decay_rate ** step)


def _pen_log_loss(log_q: Tensor, pen_targets: np.ndarray) -> Tensor:
    """Mean cross entropy over every step, padding included."""
    per_step = (log_q * as_tensor(pen_targets)).sum(axis=-1) * -1.0
    return per_step.mean()


def _masked_displacement_loss(params: MixtureParams, dx, dy, mask) -> Tensor:
    """Per-row mean NLL over real steps, averaged over rows that have any."""
    mask = np.asarray(mask, dtype=np.float64)
    nll = mixture_nll(params, dx, dy)
    counts = mask.sum(axis=-1)
    rows = counts > 0
    if not rows.any():
        raise ValueError("batch contains no real steps")
    safe = np.where(rows, counts, 1.0)
    per_row = (nll * as_tensor(mask)).sum(axis=-1) * as_tensor(1.0 / safe)
    return (per_row * as_tensor(rows.astype(np.float64))).sum() * (1.0 / rows.sum())


def total_loss(m: VaeModel, batch: StrokeBatch, step: int,
               rng: np.random.Generator | None = None,
               noise: np.ndarray | None = None,
               dropout_masks: dict | None = None,
               params: dict | None = None):
    """Three-term loss on one batch: (total Tensor, per-term breakdown).

    With `noise` given (or rng None, which uses the posterior mean) the loss
    is a deterministic function of the parameters, which is what the
    finite-difference gradient checks need.
    """
    tp = params if params is not None else m.tensors()
    dm = dropout_masks or {}
    seq, mask = batch.sequences, batch.mask
    mu, sigma_hat = encode(m, seq, mask, tp, dm)
    if noise is None:
        noise = rng.standard_normal(mu.shape) if rng is not None \
            else np.zeros(mu.shape)
    z = sample_latent(mu, sigma_hat, noise=noise)
    raw = decode_teacher_forced(m, z, seq, tp, dm.get("dec"))
    mix = transform_params(raw)
    j_d = _masked_displacement_loss(mix, seq[:, :, 0], seq[:, :, 1], mask)
    j_ps = _pen_log_loss(mix.log_q, seq[:, :, 2:5])
    j_kl = kl_loss(mu, sigma_hat)
    w = kl_weight(step, m.config.kl_weight_start, m.config.kl_decay_rate)
    total = j_d + j_ps + j_kl * w
    breakdown = {
        "displacement_nll": float(j_d.data),
        "pen_ce": float(j_ps.data),
        "kl_div": float(j_kl.data),
        "kl_weight": w,
        "total": float(total.data),
    }
    return total, breakdown


def loss_and_grads(m: VaeModel, batch: StrokeBatch, step: int,
                   rng: np.random.Generator | None = None,
                   noise: np.ndarray | None = None,
                   dropout_masks: dict | None = None):
    """Backward pass: (total value, gradient dict, breakdown)."""
    tp = m.tensors(requires_grad=True)
    total, breakdown = total_loss(m, batch, step, rng=rng, noise=noise,
                                  dropout_masks=dropout_masks, params=tp)
    total.backward()
    grads = {k: t.grad if t.grad is not None else np.zeros_like(m.params[k])
             for k, t in tp.items()}
    return float(total.data), grads, breakdown


def _percentile_len(sketches) -> int:
    lengths = [len(s.points) for sk in sketches for s in sk.strokes]
    return int(math.ceil(np.percentile(lengths, 99)))


def train(m: VaeModel, sketches, epochs: int, rng: np.random.Generator,
          augment: bool = True, val_fraction: float = 1.0 / 30.0,
          checkpoint_dir=None, adam_state: AdamState | None = None,
          learning_rate: float | None = None):
    """Train in place over temporal stroke batches; returns (m, history).

    Per epoch: shuffle sketches, rebuild batches, optionally scale-augment
    displacements, clip gradients, Adam step. History holds one record per
    optimization step. A non-finite loss aborts with the offending step's
    breakdown. Validation (when the corpus is large enough for a split)
    tracks the best deterministic loss; checkpoints go to checkpoint_dir at
    every epoch end plus a best-validation snapshot.
    """
    from pathlib import Path

    from .checkpoint import save_checkpoint

    lr = learning_rate if learning_rate is not None else m.config.learning_rate
    state = adam_state if adam_state is not None else AdamState()
    if checkpoint_dir is not None:
        checkpoint_dir = Path(checkpoint_dir)
        checkpoint_dir.mkdir(parents=True, exist_ok=True)
    sketches = list(sketches)
    m.config.max_len = max(_percentile_len(sketches), 8)
    n_val = int(len(sketches) * val_fraction)
    order = rng.permutation(len(sketches))
    val = [sketches[i] for i in order[:n_val]]
    tr = [sketches[i] for i in order[n_val:]]
    val_batches = make_stroke_batches(val, m.config.batch_size) if val else []
    history = []
    best_val = np.inf
    for epoch in range(epochs):
        perm = rng.permutation(len(tr))
        shuffled = [tr[i] for i in perm]
        for batch in make_stroke_batches(shuffled, m.config.batch_size):
            seqs = batch.sequences
            if augment:
                seqs = np.stack([augment_scale(row, rng) for row in seqs])
                batch = StrokeBatch(seqs, batch.mask, batch.temporal_index)
            dm = _dropout_masks(m.config, seqs.shape[0], rng)
            total, grads, breakdown = loss_and_grads(
                m, batch, m.step, rng=rng, dropout_masks=dm)
            if not np.isfinite(total):
                raise RuntimeError(
                    f"non-finite loss at step {m.step}: {breakdown}")
            if lr > 0:
                grads = clip_gradients(grads, m.config.grad_clip)
                adam_update(m.params, grads, state, lr)
            history.append({"step": m.step, **breakdown})
            m.step += 1
        if val_batches:
            scores = [total_loss(m, vb, m.step)[1]["total"] for vb in val_batches]
            val_score = float(np.mean(scores))
            if val_score < best_val and checkpoint_dir is not None:
                best_val = val_score
                save_checkpoint(checkpoint_dir / "best.npz", m, state)
        if checkpoint_dir is not None:
            save_checkpoint(checkpoint_dir / f"epoch_{epoch + 1:04d}.npz", m, state)
    return m, history


def reconstruct_sketch(m: VaeModel, sketch: Sketch, tau: float,
                       rng: np.random.Generator) -> Sketch:
    """Encode, sample z, and redraw each stroke; reassemble in order.

    Absolute positions come from cumulative summation starting at the canvas
    origin, matching the first-point offset convention.
    """
    strokes = []
    for stroke in sketch.strokes:
        rows = to_offsets(stroke)
        mu, sigma_hat = encode(m, rows)
        z = sample_latent(mu, sigma_hat, rng=rng)
        sampled = decode_sample(m, z.data, tau, rng)
        pts = np.cumsum(sampled[:, :2], axis=0)
        if len(pts) < 2:
            pts = np.vstack([pts, pts[-1]])
        strokes.append(Stroke(points=pts))
    return Sketch(strokes=strokes, category=sketch.category)
