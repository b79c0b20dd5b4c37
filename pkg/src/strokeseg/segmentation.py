"""Stroke segmentation: a 3-layer MLP over fixed per-stroke features.

The feature extractor (a trained stroke encoder, or the orientation-map
baselines) is never updated here; features are precomputed and the MLP
(input -> 1024 -> 512 -> C) is trained with class-weighted cross entropy,
dropout, and early stopping on a held-out slice of the training fold.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autodiff import Tensor, as_tensor, log_softmax
from .offsets import to_offsets
from .optim import AdamState, adam_update, clip_gradients
from .recurrent import xavier_init
from .sketch import Sketch, Stroke
from .vae import VaeModel, encoder_feature

__all__ = [
    "SegConfig", "SegModel", "seg_forward", "class_weights", "seg_loss",
    "train_segmenter", "extract_feature", "predict_labels",
    "evaluate_accuracy", "confusion_matrix", "cross_validate",
]


@dataclass
class SegConfig:
    hidden1: int = 1024
    hidden2: int = 512
    keep_prob: float = 0.5
    batch_size: int = 16
    learning_rate: float = 1e-3
    grad_clip: float = 1.0
    epochs: int = 200
    patience: int = 20
    val_fraction: float = 0.1

    def to_dict(self) -> dict:
        from dataclasses import asdict
        return asdict(self)


class SegModel:
    """MLP weights plus the closed class list they predict over."""

    def __init__(self, params: dict, classes: list, keep_prob: float):
        self.params = params
        self.classes = list(classes)
        self.keep_prob = keep_prob
        self.history = []

    @classmethod
    def init(cls, input_size: int, classes, config: SegConfig,
             rng: np.random.Generator) -> "SegModel":
        c = len(classes)
        params = {
            "w_h1": xavier_init(input_size, config.hidden1, rng),
            "b_h1": np.zeros(config.hidden1),
            "w_h2": xavier_init(config.hidden1, config.hidden2, rng),
            "b_h2": np.zeros(config.hidden2),
            "w_o": xavier_init(config.hidden2, c, rng),
            "b_o": np.zeros(c),
        }
        return cls(params, classes, config.keep_prob)

    def tensors(self, requires_grad: bool = False) -> dict:
        return {k: Tensor(v, requires_grad=requires_grad)
                for k, v in self.params.items()}


def _log_probs(tp: dict, x, masks: tuple | None = None) -> Tensor:
    """relu -> dropout -> relu -> dropout -> affine -> log softmax."""
    h1 = (as_tensor(x) @ tp["w_h1"] + tp["b_h1"]).relu()
    if masks is not None:
        h1 = h1 * masks[0]
    h2 = (h1 @ tp["w_h2"] + tp["b_h2"]).relu()
    if masks is not None:
        h2 = h2 * masks[1]
    return log_softmax(h2 @ tp["w_o"] + tp["b_o"], axis=-1)


def seg_forward(m: SegModel, feature, training: bool = False,
                rng: np.random.Generator | None = None) -> np.ndarray:
    """Class probabilities for one feature vector or a (B, F) batch.

    Dropout fires only when training=True (an rng is then required);
    inference is deterministic.
    """
    x = np.asarray(feature, dtype=np.float64)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.shape[1] != m.params["w_h1"].shape[0]:
        raise ValueError(f"feature length {x.shape[1]} does not match model "
                         f"input {m.params['w_h1'].shape[0]}")
    masks = None
    if training and m.keep_prob < 1.0:
        if rng is None:
            raise ValueError("training-mode forward needs an rng for dropout")
        masks = tuple((rng.random((x.shape[0], w.shape[1])) < m.keep_prob)
                      / m.keep_prob for w in (m.params["w_h1"], m.params["w_h2"]))
    probs = np.exp(_log_probs(m.tensors(), x, masks).data)
    return probs[0] if single else probs


def class_weights(counts) -> np.ndarray:
    """softmax(-n_hat) over class proportions n_hat = counts / sum.

    Rarer classes get strictly larger weights; weights sum to 1.
    """
    counts = np.asarray(counts, dtype=np.float64)
    if np.any(counts <= 0):
        raise ValueError("every class needs at least one training instance")
    n_hat = counts / counts.sum()
    e = np.exp(-n_hat)
    return e / e.sum()


def seg_loss(probs, true_class: int, weights) -> float:
    """Weighted cross entropy -w_c * log(probs[c]) for the true class c."""
    probs = np.asarray(probs, dtype=np.float64)
    p = max(float(probs[true_class]), float(np.finfo(np.float64).tiny))
    return -float(weights[true_class]) * np.log(p)


def _weighted_ce(tp: dict, x, y_idx: np.ndarray, w: np.ndarray,
                 masks: tuple | None = None) -> Tensor:
    log_p = _log_probs(tp, x, masks)
    onehot = np.zeros((len(y_idx), w.size))
    onehot[np.arange(len(y_idx)), y_idx] = w[y_idx]
    return (log_p * as_tensor(onehot)).sum(axis=-1).mean() * -1.0


def train_segmenter(features, labels, classes, config: SegConfig,
                    rng: np.random.Generator) -> SegModel:
    """Train the MLP head; the feature extractor is untouched.

    10% of the rows (by default) are held out; training stops when the
    held-out weighted cross entropy fails to improve for `patience` epochs,
    and the best-validation parameters are returned. With too few rows for
    a split, the final parameters are returned instead.
    """
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if len(features) != len(labels):
        raise ValueError("features and labels must align")
    model = SegModel.init(features.shape[1], classes, config, rng)
    n_val = int(len(features) * config.val_fraction)
    order = rng.permutation(len(features))
    val_idx, tr_idx = order[:n_val], order[n_val:]
    counts = np.bincount(labels[tr_idx], minlength=len(model.classes))
    w = class_weights(counts)
    state = AdamState()
    best = {k: v.copy() for k, v in model.params.items()}
    best_val = np.inf
    stall = 0
    for epoch in range(config.epochs):
        perm = rng.permutation(len(tr_idx))
        for start in range(0, len(perm), config.batch_size):
            rows = tr_idx[perm[start:start + config.batch_size]]
            x, y = features[rows], labels[rows]
            masks = None
            if config.keep_prob < 1.0:
                masks = tuple((rng.random((len(rows), h)) < config.keep_prob)
                              / config.keep_prob
                              for h in (config.hidden1, config.hidden2))
            tp = model.tensors(requires_grad=True)
            loss = _weighted_ce(tp, x, y, w, masks)
            if not np.isfinite(loss.data):
                raise RuntimeError(f"non-finite segmentation loss at epoch {epoch}")
            if config.learning_rate > 0:
                loss.backward()
                grads = clip_gradients(
                    {k: t.grad if t.grad is not None else np.zeros_like(model.params[k])
                     for k, t in tp.items()}, config.grad_clip)
                adam_update(model.params, grads, state, config.learning_rate)
        record = {"epoch": epoch, "train_loss": float(loss.data)}
        if len(val_idx):
            val_loss = float(_weighted_ce(
                model.tensors(), features[val_idx], labels[val_idx], w).data)
            record["val_loss"] = val_loss
            if val_loss < best_val:
                best_val = val_loss
                best = {k: v.copy() for k, v in model.params.items()}
                stall = 0
            else:
                stall += 1
            model.history.append(record)
            if stall >= config.patience:
                break
        else:
            model.history.append(record)
    if len(val_idx):
        model.params = best
    return model


def extract_feature(encoder: VaeModel, stroke: Stroke) -> np.ndarray:
    """Deterministic per-stroke feature from a frozen encoder: [h_fwd; h_bwd]."""
    return encoder_feature(encoder, to_offsets(stroke))


def predict_labels(seg: SegModel, feature_fn, sketch: Sketch) -> list:
    """Predicted class name per stroke (argmax; ties go to the lowest index)."""
    labels = []
    for stroke in sketch.strokes:
        probs = seg_forward(seg, feature_fn(sketch, stroke))
        labels.append(seg.classes[int(np.argmax(probs))])
    return labels


def evaluate_accuracy(predictions, ground_truth) -> float:
    """Correct strokes over total strokes."""
    if len(predictions) != len(ground_truth):
        raise ValueError("prediction and truth lengths differ")
    if not len(predictions):
        raise ValueError("nothing to evaluate")
    hits = sum(p == t for p, t in zip(predictions, ground_truth))
    return hits / len(predictions)


def confusion_matrix(predictions, ground_truth, classes) -> np.ndarray:
    """(C, C) counts indexed [true, predicted]."""
    index = {c: i for i, c in enumerate(classes)}
    out = np.zeros((len(classes), len(classes)), dtype=np.int64)
    for p, t in zip(predictions, ground_truth):
        out[index[t], index[p]] += 1
    return out


@dataclass
class CvReport:
    fold_accuracies: list
    fold_stroke_counts: list
    mean_accuracy: float
    confusion: np.ndarray
    classes: list = field(default_factory=list)


def cross_validate(sketches, k: int, train_fn, rng: np.random.Generator,
                   classes=None) -> CvReport:
    """k-fold cross validation split at the sketch level.

    `train_fn(train_sketches, rng)` returns a predictor mapping a sketch to
    per-stroke labels. Every sketch lands in exactly one test fold; the mean
    accuracy weights folds by stroke count (total correct / total strokes).
    """
    if k < 2:
        raise ValueError("need at least 2 folds")
    if len(sketches) < k:
        raise ValueError(f"cannot split {len(sketches)} sketches into {k} folds")
    if classes is None:
        classes = sorted({s.label for sk in sketches for s in sk.strokes})
    order = rng.permutation(len(sketches))
    folds = np.array_split(order, k)
    seeds = rng.integers(0, 2 ** 63 - 1, size=k)
    accs, counts = [], []
    confusion = np.zeros((len(classes), len(classes)), dtype=np.int64)
    for i, fold in enumerate(folds):
        held_out = set(fold.tolist())
        test = [sketches[j] for j in fold]
        train_set = [sketches[j] for j in order if j not in held_out]
        predictor = train_fn(train_set, np.random.default_rng(seeds[i]))
        preds, truth = [], []
        for sk in test:
            preds.extend(predictor(sk))
            truth.extend(s.label for s in sk.strokes)
        accs.append(evaluate_accuracy(preds, truth))
        counts.append(len(truth))
        confusion += confusion_matrix(preds, truth, classes)
    mean = float(np.average(accs, weights=counts))
    return CvReport(fold_accuracies=accs, fold_stroke_counts=counts,
                    mean_accuracy=mean, confusion=confusion, classes=list(classes))
