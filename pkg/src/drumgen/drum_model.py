"""Dense 768 -> 400 -> 129 regression network for rhythm vectors.

Everything is hand-rolled double-precision numpy: He-uniform init, a ReLU
hidden layer, a top-quartile output activation on the 128 pattern
dimensions, Huber loss, mini-batch Adam, and a k-fold cross-validation
harness.  Training compares against targets whose tempo dimension has been
multiplied by ``tempo_scale`` (1/200 by default) so a raw BPM value cannot
dominate the loss against {0, 1} pattern targets; inference divides the
scale back out.  Setting ``tempo_scale`` to 1 disables the rescaling.

The output activation keeps the top 32 pattern values (ties broken toward
the lower index) and zeroes the rest; during training the kept/zeroed mask
is treated as a constant, so kept outputs pass their gradient straight
through and zeroed outputs receive none.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .corpus import DatasetRecord
from .errors import InputError, ModelFileError, NumericError

INPUT_DIM = 768
HIDDEN_DIM = 400
OUTPUT_DIM = 129
PATTERN_DIMS = OUTPUT_DIM - 1

KEEP_PERCENTILE = 75
KEEP_COUNT = PATTERN_DIMS - (KEEP_PERCENTILE * PATTERN_DIMS) // 100  # 32

MODEL_SCHEMA_VERSION = 1


@dataclass
class ModelParams:
    w1: np.ndarray  # (768, 400)
    b1: np.ndarray  # (400,)
    w2: np.ndarray  # (400, 129)
    b2: np.ndarray  # (129,)

    def as_dict(self) -> dict[str, np.ndarray]:
        return {"w1": self.w1, "b1": self.b1, "w2": self.w2, "b2": self.b2}

    def copy(self) -> "ModelParams":
        return ModelParams(self.w1.copy(), self.b1.copy(), self.w2.copy(), self.b2.copy())


@dataclass
class TrainConfig:
    learning_rate: float = 0.001
    batch_size: int = 5
    max_epochs: int = 500
    huber_delta: float = 1.0
    seed: int = 0
    folds: int = 10
    repeats: int = 3
    tempo_scale: float = 1.0 / 200.0
    early_stop_patience: int = 50

    def __post_init__(self):
        if self.batch_size < 1:
            raise InputError("batch_size must be >= 1")
        if self.folds < 2:
            raise InputError("folds must be >= 2")
        if self.huber_delta <= 0:
            raise InputError("huber_delta must be positive")
        if self.tempo_scale <= 0:
            raise InputError("tempo_scale must be positive")


@dataclass
class AdamState:
    """Adam moments, one array per parameter, with bias-corrected updates."""

    first: dict[str, np.ndarray]
    second: dict[str, np.ndarray]
    step_count: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    @classmethod
    def for_params(cls, params: ModelParams) -> "AdamState":
        return cls(
            first={k: np.zeros_like(v) for k, v in params.as_dict().items()},
            second={k: np.zeros_like(v) for k, v in params.as_dict().items()},
        )

    def update(self, params: ModelParams, grads: dict[str, np.ndarray], learning_rate: float) -> None:
        self.step_count += 1
        c1 = 1.0 - self.beta1**self.step_count
        c2 = 1.0 - self.beta2**self.step_count
        for key, value in params.as_dict().items():
            g = grads[key]
            m = self.first[key]
            v = self.second[key]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            value -= learning_rate * (m / c1) / (np.sqrt(v / c2) + self.epsilon)


@dataclass
class TrainResult:
    params: ModelParams
    train_history: list[float]
    val_history: list[float] = field(default_factory=list)


@dataclass
class CvRow:
    repeat: int
    fold: int
    train_loss: float
    val_loss: float


def init_params(seed: int) -> ModelParams:
    """He-uniform weights (bound sqrt(6/fan_in)) and zero biases."""
    rng = np.random.default_rng(seed)
    bound1 = np.sqrt(6.0 / INPUT_DIM)
    bound2 = np.sqrt(6.0 / HIDDEN_DIM)
    return ModelParams(
        w1=rng.uniform(-bound1, bound1, size=(INPUT_DIM, HIDDEN_DIM)),
        b1=np.zeros(HIDDEN_DIM),
        w2=rng.uniform(-bound2, bound2, size=(HIDDEN_DIM, OUTPUT_DIM)),
        b2=np.zeros(OUTPUT_DIM),
    )


def top_pattern_mask(pre_activation: np.ndarray) -> np.ndarray:
    """Boolean mask of the kept top-quartile pattern values.

    Exactly 32 positions are kept; ties at the cut keep the lower index
    (stable descending sort).
    """
    order = np.argsort(-pre_activation, axis=-1, kind="stable")
    mask = np.zeros(pre_activation.shape, dtype=bool)
    np.put_along_axis(mask, order[..., :KEEP_COUNT], True, axis=-1)
    return mask


def _forward_batch(params: ModelParams, x: np.ndarray):
    z1 = x @ params.w1 + params.b1
    h = np.maximum(z1, 0.0)
    z2 = h @ params.w2 + params.b2
    mask = top_pattern_mask(z2[:, 1:])
    y = z2.copy()
    y[:, 1:] *= mask
    return y, (z1, h, z2, mask)


def forward(params: ModelParams, x: np.ndarray) -> np.ndarray:
    """One forward pass: ReLU hidden layer, top-quartile output activation.

    The tempo dimension (index 0) is excluded from the percentile and passes
    through unchanged.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (INPUT_DIM,):
        raise InputError(f"input must have {INPUT_DIM} values, got {x.shape}")
    y, _ = _forward_batch(params, x[None, :])
    y = y[0]
    if not np.all(np.isfinite(y)):
        raise NumericError("non-finite value in forward pass")
    return y


def huber_loss(pred: np.ndarray, target: np.ndarray, delta: float = 1.0) -> float:
    """Mean elementwise Huber loss.

    By convention the tempo dimension of both vectors already carries the
    tempo scale when this is used for training or evaluation.
    """
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise InputError(f"shape mismatch: {pred.shape} vs {target.shape}")
    r = pred - target
    a = np.abs(r)
    elems = np.where(a <= delta, 0.5 * r * r, delta * (a - 0.5 * delta))
    return float(elems.mean())


def _huber_grad(residual: np.ndarray, delta: float) -> np.ndarray:
    return np.where(np.abs(residual) <= delta, residual, delta * np.sign(residual))


def _loss_and_grads(params: ModelParams, x: np.ndarray, t: np.ndarray, delta: float):
    """Mean Huber loss over a batch and its parameter gradients."""
    y, (z1, h, z2, mask) = _forward_batch(params, x)
    batch, dims = y.shape
    residual = y - t
    a = np.abs(residual)
    loss = float(np.where(a <= delta, 0.5 * residual * residual, delta * (a - 0.5 * delta)).mean())

    dy = _huber_grad(residual, delta) / (batch * dims)
    dz2 = dy.copy()
    dz2[:, 1:] *= mask  # zeroed outputs get no gradient; mask is constant
    grads = {
        "w2": h.T @ dz2,
        "b2": dz2.sum(axis=0),
    }
    dh = dz2 @ params.w2.T
    dz1 = dh * (z1 > 0.0)
    grads["w1"] = x.T @ dz1
    grads["b1"] = dz1.sum(axis=0)
    return loss, grads


def _dataset_arrays(records: list[DatasetRecord], tempo_scale: float):
    x = np.stack([np.asarray(r.embedding, dtype=np.float64) for r in records])
    t = np.stack([np.asarray(r.target, dtype=np.float64) for r in records])
    if x.shape[1] != INPUT_DIM or t.shape[1] != OUTPUT_DIM:
        raise InputError(f"bad record shapes: embeddings {x.shape}, targets {t.shape}")
    t = t.copy()
    t[:, 0] *= tempo_scale
    return x, t


def evaluate(params: ModelParams, records: list[DatasetRecord], cfg: TrainConfig) -> float:
    """Mean Huber loss of the current params over a record list."""
    x, t = _dataset_arrays(records, cfg.tempo_scale)
    y, _ = _forward_batch(params, x)
    return huber_loss(y, t, cfg.huber_delta)


def train(
    records: list[DatasetRecord],
    cfg: TrainConfig,
    validation: list[DatasetRecord] | None = None,
) -> TrainResult:
    """Mini-batch Adam training, deterministic per (record order, seed).

    Batches are drawn from a fresh seeded shuffle each epoch.  When a
    validation set is given, training stops after ``early_stop_patience``
    epochs without improvement and the best parameters are restored.
    """
    if not records:
        raise InputError("training requires at least one record")
    x_all, t_all = _dataset_arrays(records, cfg.tempo_scale)
    n = len(records)

    params = init_params(cfg.seed)
    adam = AdamState.for_params(params)
    shuffle_rng = np.random.default_rng([cfg.seed, 1])

    train_history: list[float] = []
    val_history: list[float] = []
    best_val = np.inf
    best_params = None
    since_best = 0

    for epoch in range(cfg.max_epochs):
        perm = shuffle_rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            batch = perm[start : start + cfg.batch_size]
            loss, grads = _loss_and_grads(params, x_all[batch], t_all[batch], cfg.huber_delta)
            if not np.isfinite(loss):
                raise NumericError(
                    f"non-finite loss at epoch {epoch}, batch {start // cfg.batch_size}"
                )
            adam.update(params, grads, cfg.learning_rate)
        # history records the post-epoch loss over the whole set, which is
        # independent of batch order
        y_all, _ = _forward_batch(params, x_all)
        train_history.append(huber_loss(y_all, t_all, cfg.huber_delta))

        if validation is not None:
            val_loss = evaluate(params, validation, cfg)
            val_history.append(val_loss)
            if val_loss < best_val:
                best_val = val_loss
                best_params = params.copy()
                since_best = 0
            else:
                since_best += 1
                if since_best >= cfg.early_stop_patience:
                    break

    if best_params is not None:
        params = best_params
    return TrainResult(params, train_history, val_history)


def cross_validate(records: list[DatasetRecord], cfg: TrainConfig) -> list[CvRow]:
    """K-fold cross-validation over ``cfg.repeats`` reshuffled repeats.

    Each repeat reshuffles the records (seeded), splits them into
    ``cfg.folds`` contiguous folds, and trains on the complement of each
    fold.  Rows come back in (repeat, fold) order.
    """
    n = len(records)
    if n < cfg.folds:
        raise InputError(f"dataset of {n} records is smaller than {cfg.folds} folds")

    rows: list[CvRow] = []
    for repeat in range(cfg.repeats):
        perm = np.random.default_rng([cfg.seed, 2, repeat]).permutation(n)
        base, extra = divmod(n, cfg.folds)
        start = 0
        bounds = []
        for fold in range(cfg.folds):
            size = base + (1 if fold < extra else 0)
            bounds.append((start, start + size))
            start += size
        for fold, (lo, hi) in enumerate(bounds):
            val_idx = perm[lo:hi]
            train_idx = np.concatenate([perm[:lo], perm[hi:]])
            fold_seed = int(np.random.SeedSequence([cfg.seed, repeat, fold]).generate_state(1)[0])
            fold_cfg = replace(cfg, seed=fold_seed)
            result = train(
                [records[i] for i in train_idx],
                fold_cfg,
                validation=[records[i] for i in val_idx],
            )
            rows.append(
                CvRow(
                    repeat=repeat,
                    fold=fold,
                    train_loss=evaluate(result.params, [records[i] for i in train_idx], cfg),
                    val_loss=evaluate(result.params, [records[i] for i in val_idx], cfg),
                )
            )
    return rows


def cv_table_csv(rows: list[CvRow]) -> str:
    lines = ["repeat,fold,train_loss,val_loss"]
    for row in rows:
        lines.append(f"{row.repeat},{row.fold},{row.train_loss!r},{row.val_loss!r}")
    return "\n".join(lines) + "\n"


def predict(params: ModelParams, embedding: np.ndarray, tempo_scale: float) -> np.ndarray:
    """Rhythm vector for one embedding: integer tempo plus binarized pattern."""
    y = forward(params, embedding)
    out = np.empty(OUTPUT_DIM)
    out[0] = round(y[0] / tempo_scale)
    out[1:] = (y[1:] != 0.0).astype(np.float64)
    return out


def save_model(path, params: ModelParams, seed: int, tempo_scale: float) -> None:
    """Write the model as deterministic JSON (shapes, seed, scale, weights)."""
    payload = {
        "schema_version": MODEL_SCHEMA_VERSION,
        "seed": seed,
        "tempo_scale": tempo_scale,
        "shapes": {k: list(v.shape) for k, v in params.as_dict().items()},
        "params": {k: v.tolist() for k, v in params.as_dict().items()},
    }
    Path(path).write_text(json.dumps(payload, sort_keys=True), encoding="utf-8")


def load_model(path) -> tuple[ModelParams, int, float]:
    expected = {
        "w1": (INPUT_DIM, HIDDEN_DIM),
        "b1": (HIDDEN_DIM,),
        "w2": (HIDDEN_DIM, OUTPUT_DIM),
        "b2": (OUTPUT_DIM,),
    }
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
        if payload["schema_version"] != MODEL_SCHEMA_VERSION:
            raise ModelFileError(f"unsupported model schema: {payload['schema_version']}")
        arrays = {}
        for key, shape in expected.items():
            arr = np.asarray(payload["params"][key], dtype=np.float64)
            if arr.shape != shape:
                raise ModelFileError(f"shape mismatch for {key}: {arr.shape} != {shape}")
            arrays[key] = arr
        return (
            ModelParams(**arrays),
            int(payload["seed"]),
            float(payload["tempo_scale"]),
        )
    except ModelFileError:
        raise
    except (OSError, KeyError, TypeError, ValueError) as exc:
        raise ModelFileError(f"cannot read model file {path}: {exc}") from exc
