"""Synthetic metric-learning harness.

A linear embedding layer followed by unit-sphere normalisation is trained
with the rank-based losses on clustered synthetic data.  Each batch element
is a query whose scores are its cosine similarities to every other batch
element (and to the embeddings kept in score memory).  Gradients are pushed
through similarity and normalisation analytically, so nothing here needs an
autodiff framework.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import InvalidInputError, UndefinedMetricError
from .losses import (
    WeightScheme,
    ap_loss,
    ap_loss_surrogate,
    apc_loss,
    average_precision,
    recall_at_k,
    recall_loss,
    recall_loss_surrogate,
)
from .memory import MemoryBuffer, mask_gradient

logger = logging.getLogger(__name__)

__all__ = [
    "LossKind",
    "SynthParams",
    "SynthDataset",
    "generate",
    "split",
    "EmbeddingModel",
    "normalize",
    "similarity_scores",
    "TrainConfig",
    "Adam",
    "batch_loss",
    "batch_loss_surrogate",
    "evaluate",
    "HistoryRow",
    "TrainResult",
    "TrainingDiverged",
    "train",
    "near_tie_weight",
    "similarity_spread",
    "CollapseRun",
    "collapse_experiment",
]


class LossKind(enum.Enum):
    RECALL_LOG = "recall_log"
    RECALL_LOGLOG = "recall_loglog"
    AP = "ap"
    MAP_PLUS_APC = "map_plus_apc"


# relative weights of the mAP and class-wide AP terms in MAP_PLUS_APC
MAP_APC_WEIGHTS = (2.0 / 3.0, 1.0 / 3.0)


@dataclass(frozen=True)
class SynthParams:
    num_classes: int = 16
    per_class: int = 32
    input_dim: int = 32
    cluster_spread: float = 0.22
    seed: int = 0
    # shared displacement of every point along the first input axis
    offset: float = 0.0


@dataclass(frozen=True)
class SynthDataset:
    points: np.ndarray
    class_ids: np.ndarray
    params: SynthParams

    def __len__(self) -> int:
        return self.points.shape[0]


def generate(params: SynthParams) -> SynthDataset:
    """Gaussian clusters around class centres drawn uniformly on the unit sphere."""
    if params.per_class < 2:
        raise InvalidInputError("per_class must be at least 2 so every query has a positive")
    if params.num_classes < 1 or params.input_dim < 1:
        raise InvalidInputError("num_classes and input_dim must be positive")
    rng = np.random.default_rng(params.seed)
    centers = rng.normal(size=(params.num_classes, params.input_dim))
    centers /= np.linalg.norm(centers, axis=1, keepdims=True)
    class_ids = np.repeat(np.arange(params.num_classes), params.per_class)
    noise = rng.normal(size=(class_ids.shape[0], params.input_dim))
    points = centers[class_ids] + params.cluster_spread * noise
    points[:, 0] += params.offset
    return SynthDataset(points, class_ids, params)


def split(dataset: SynthDataset, eval_fraction: float = 0.5) -> tuple[SynthDataset, SynthDataset]:
    """Per-class split into train and held-out parts (deterministic: first items go to train)."""
    train_idx, eval_idx = [], []
    for c in np.unique(dataset.class_ids):
        members = np.flatnonzero(dataset.class_ids == c)
        n_eval = int(round(eval_fraction * members.shape[0]))
        n_eval = min(max(n_eval, 2), members.shape[0] - 2)
        if n_eval < 2:
            raise InvalidInputError("every class needs at least 4 items to split")
        train_idx.append(members[: members.shape[0] - n_eval])
        eval_idx.append(members[members.shape[0] - n_eval :])
    tr = np.concatenate(train_idx)
    ev = np.concatenate(eval_idx)
    return (
        SynthDataset(dataset.points[tr], dataset.class_ids[tr], dataset.params),
        SynthDataset(dataset.points[ev], dataset.class_ids[ev], dataset.params),
    )


def normalize(u: np.ndarray) -> np.ndarray:
    return u / np.linalg.norm(u, axis=-1, keepdims=True)


@dataclass
class EmbeddingModel:
    """Linear map ``x -> x @ weight`` followed by unit-sphere normalisation."""

    weight: np.ndarray

    @classmethod
    def random(cls, input_dim: int, embed_dim: int, rng) -> "EmbeddingModel":
        return cls(rng.normal(scale=1.0 / math.sqrt(input_dim), size=(input_dim, embed_dim)))

    def embed(self, points: np.ndarray) -> np.ndarray:
        return normalize(points @ self.weight)


def similarity_scores(model: EmbeddingModel, points, class_ids, memory: MemoryBuffer | None = None):
    """Per-query cosine similarities against the rest of the batch and the memory.

    Returns ``(scores, labels, current)``, each of shape ``(B, B - 1 + M)``:
    row ``i`` holds query ``i``'s scores against the other batch items
    (in batch order, self removed) followed by the ``M`` memory items, the
    same-class indicator, and a mask that is 1 on batch (non-memory) columns.
    """
    z = model.embed(np.asarray(points, dtype=np.float64))
    scores, labels, current, _ = _query_rows(z, np.asarray(class_ids), memory)
    return scores, labels, current


def _query_rows(z, ids, memory):
    b = z.shape[0]
    if b < 2:
        raise InvalidInputError("a batch needs at least 2 items")
    if memory is None:
        z_all, ids_all, mask = z, ids, np.ones(b, dtype=np.int8)
    else:
        z_all, ids_all, mask = memory.extend(z, ids)
    total = z_all.shape[0]
    keep = ~np.eye(b, total, dtype=bool)
    sims = z @ z_all.T
    cols = np.broadcast_to(np.arange(total), (b, total))[keep].reshape(b, total - 1)
    scores = sims[keep].reshape(b, total - 1)
    labels = (ids[:, None] == ids_all[None, :])[keep].reshape(b, total - 1)
    current = mask[cols]
    return scores, labels, current, cols


@dataclass(frozen=True)
class TrainConfig:
    loss: LossKind = LossKind.RECALL_LOG
    alpha: float = 0.1
    lam: float = 1.0
    memory: int = 3
    batch_size: int = 64
    samples_per_class: int = 4
    embed_dim: int = 16
    learning_rate: float = 0.02
    steps: int = 600
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    weight_decay: float = 0.0
    # multiply the learning rate by lr_decay_factor once step lr_decay_step is reached
    lr_decay_step: int | None = 400
    lr_decay_factor: float = 0.3
    eval_every: int = 10
    eval_fraction: float = 0.25
    differentiate_relevant_rank: bool = False

    def __post_init__(self):
        if self.lam <= 0 or self.alpha < 0:
            raise InvalidInputError("need lam > 0 and alpha >= 0")
        if self.memory < 0:
            raise InvalidInputError("memory length must be nonnegative")
        if self.batch_size < 2 or self.samples_per_class < 2:
            raise InvalidInputError("batch_size and samples_per_class must be at least 2")
        if self.batch_size % self.samples_per_class:
            raise InvalidInputError("batch_size must be a multiple of samples_per_class")
        if self.steps < 0 or self.eval_every < 1 or self.learning_rate <= 0:
            raise InvalidInputError("invalid steps, eval_every or learning_rate")


class Adam:
    """Adaptive-moment gradient descent on a single parameter array."""

    def __init__(self, shape, lr, beta1=0.9, beta2=0.999, epsilon=1e-8, weight_decay=0.0):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.weight_decay = weight_decay
        self.m = np.zeros(shape)
        self.v = np.zeros(shape)
        self.t = 0

    def step(self, param: np.ndarray, grad: np.ndarray, lr: float | None = None) -> np.ndarray:
        lr = self.lr if lr is None else lr
        if self.weight_decay:
            grad = grad + self.weight_decay * param
        self.t += 1
        self.m = self.beta1 * self.m + (1 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1 - self.beta2) * grad**2
        m_hat = self.m / (1 - self.beta1**self.t)
        v_hat = self.v / (1 - self.beta2**self.t)
        return param - lr * m_hat / (np.sqrt(v_hat) + self.epsilon)


def _row_loss(kind: LossKind, scores, labels, config: TrainConfig, surrogate: bool):
    if kind in (LossKind.RECALL_LOG, LossKind.RECALL_LOGLOG):
        scheme = WeightScheme.LOG if kind is LossKind.RECALL_LOG else WeightScheme.LOGLOG
        args = (scores, labels, scheme, config.alpha, config.lam, config.differentiate_relevant_rank)
        return recall_loss_surrogate(*args) if surrogate else recall_loss(*args)
    if surrogate:
        return ap_loss_surrogate(scores, labels, config.alpha, config.lam)
    return ap_loss(scores, labels, config.alpha, config.lam)


def _score_loss(kind, scores, labels, current, config, surrogate=False):
    """Mean per-query loss and its gradient w.r.t. the score rows (memory masked)."""
    b = scores.shape[0]
    if kind is LossKind.MAP_PLUS_APC:
        # queries are the classes: columns of an (items, queries) matrix
        w_map, w_apc = MAP_APC_WEIGHTS
        if surrogate:
            per_query = np.mean([ap_loss_surrogate(scores[i], labels[i], config.alpha, config.lam) for i in range(b)])
            flat = ap_loss_surrogate(scores.ravel(), labels.ravel(), config.alpha, config.lam)
            return w_map * per_query + w_apc * flat, None
        value = 0.0
        grad = np.zeros_like(scores)
        for i in range(b):
            res = ap_loss(scores[i], labels[i], config.alpha, config.lam)
            value += w_map * res.value / b
            grad[i] = w_map * res.grad / b
        res = apc_loss(scores.T, labels.T, config.alpha, config.lam)
        value += w_apc * res.value
        grad += w_apc * res.grad.T
    else:
        if surrogate:
            return float(np.mean([_row_loss(kind, scores[i], labels[i], config, True) for i in range(b)])), None
        value = 0.0
        grad = np.zeros_like(scores)
        for i in range(b):
            res = _row_loss(kind, scores[i], labels[i], config, False)
            value += res.value / b
            grad[i] = res.grad / b
    for i in range(b):
        grad[i] = mask_gradient(grad[i], current[i])[0]
    return float(value), grad


def batch_loss(weight, points, class_ids, config: TrainConfig, memory: MemoryBuffer | None = None):
    """Batch loss and its gradient with respect to the weight matrix.

    Returns ``(value, grad_weight, embeddings)``; the embeddings are what a
    caller commits to the score memory.
    """
    x = np.asarray(points, dtype=np.float64)
    ids = np.asarray(class_ids)
    u = x @ weight
    norms = np.linalg.norm(u, axis=1, keepdims=True)
    z = u / norms
    scores, labels, current, cols = _query_rows(z, ids, memory)
    value, g_scores = _score_loss(config.loss, scores, labels, current, config)
    b = z.shape[0]
    # scatter back to the (B, B) similarity block; memory columns carry no gradient
    g_sim = np.zeros((b, b))
    rows = np.repeat(np.arange(b), cols.shape[1]).reshape(cols.shape)
    in_batch = cols < b
    g_sim[rows[in_batch], cols[in_batch]] = g_scores[in_batch]
    g_z = g_sim @ z + g_sim.T @ z
    g_u = (g_z - np.sum(g_z * z, axis=1, keepdims=True) * z) / norms
    return value, x.T @ g_u, z


def batch_loss_surrogate(
    weight,
    points,
    class_ids,
    config: TrainConfig,
    memory: MemoryBuffer | None = None,
    frozen_weight=None,
) -> float:
    """Interpolated batch loss; its weight gradient is :func:`batch_loss`'s.

    :func:`batch_loss` passes no gradient through memory columns, so here the
    query side of every memory similarity is computed with ``frozen_weight``
    (defaults to ``weight``) and treated as a constant.
    """
    x = np.asarray(points, dtype=np.float64)
    ids = np.asarray(class_ids)
    z = normalize(x @ weight)
    scores, labels, current, _ = _query_rows(z, ids, memory)
    if memory is not None and len(memory):
        z_frozen = normalize(x @ (weight if frozen_weight is None else frozen_weight))
        frozen_scores, *_ = _query_rows(z_frozen, ids, memory)
        scores = np.where(current.astype(bool), scores, frozen_scores)
    value, _ = _score_loss(config.loss, scores, labels, current, config, surrogate=True)
    return value


@dataclass(frozen=True)
class HistoryRow:
    step: int
    loss: float
    r_at_1: float
    r_at_4: float
    map: float


def evaluate(model: EmbeddingModel, dataset: SynthDataset, ks=(1, 4)) -> dict:
    """Dataset-wide R@K and mAP, every item querying all the others.

    Uses the plain ranker (no margin).  Queries without any positive are
    skipped with a warning.
    """
    z = model.embed(dataset.points)
    scores, labels, _, _ = _query_rows(z, dataset.class_ids, None)
    hits = {k: [] for k in ks}
    aps = []
    skipped = 0
    for i in range(scores.shape[0]):
        if not labels[i].any():
            skipped += 1
            continue
        for k in ks:
            hits[k].append(recall_at_k(scores[i], labels[i], k))
        aps.append(average_precision(scores[i], labels[i]))
    if skipped:
        logger.warning("%d queries without positives were skipped", skipped)
    if not aps:
        raise UndefinedMetricError("no query has a positive")
    out = {f"r_at_{k}": float(np.mean(hits[k])) for k in ks}
    out["map"] = float(np.mean(aps))
    return out


@dataclass
class TrainResult:
    history: list[HistoryRow]
    model: EmbeddingModel
    best: HistoryRow = field(init=False)

    def __post_init__(self):
        self.best = max(self.history, key=lambda row: (row.r_at_1, -row.step))


class TrainingDiverged(RuntimeError):
    pass


def _sample_batch(dataset: SynthDataset, config: TrainConfig, rng) -> np.ndarray:
    classes = np.unique(dataset.class_ids)
    n_classes = config.batch_size // config.samples_per_class
    if n_classes > classes.shape[0]:
        raise InvalidInputError(f"batch needs {n_classes} classes, dataset has {classes.shape[0]}")
    chosen = rng.choice(classes, size=n_classes, replace=False)
    picks = []
    for c in np.sort(chosen):
        members = np.flatnonzero(dataset.class_ids == c)
        if members.shape[0] < config.samples_per_class:
            raise InvalidInputError(f"class {c} has fewer than {config.samples_per_class} training items")
        picks.append(rng.choice(members, size=config.samples_per_class, replace=False))
    return np.concatenate(picks)


def train(
    config: TrainConfig,
    dataset: SynthDataset,
    initial_weight: np.ndarray | None = None,
) -> TrainResult:
    """Train an embedding model and record held-out metrics every ``eval_every`` steps.

    Row 0 holds the metrics of the initial model (its loss is that of the
    first batch before any update).  Deterministic for a fixed config.
    """
    train_set, eval_set = split(dataset, config.eval_fraction)
    init_ss, batch_ss = np.random.SeedSequence(config.seed).spawn(2)
    if initial_weight is None:
        model = EmbeddingModel.random(dataset.points.shape[1], config.embed_dim, np.random.default_rng(init_ss))
    else:
        model = EmbeddingModel(np.array(initial_weight, dtype=np.float64, copy=True))
    rng = np.random.default_rng(batch_ss)
    memory = MemoryBuffer(config.memory)
    opt = Adam(model.weight.shape, config.learning_rate, config.beta1, config.beta2, config.epsilon, config.weight_decay)

    history = []
    for step in range(config.steps + 1):
        batch = _sample_batch(train_set, config, rng)
        x, ids = train_set.points[batch], train_set.class_ids[batch]
        value, grad, z = batch_loss(model.weight, x, ids, config, memory)
        if not math.isfinite(value) or not np.isfinite(grad).all():
            raise TrainingDiverged(
                f"non-finite loss or gradient at step {step}: loss={value}, "
                f"|W|={np.linalg.norm(model.weight):.3g}"
            )
        if step % config.eval_every == 0 or step == config.steps:
            metrics = evaluate(model, eval_set)
            history.append(HistoryRow(step, value, metrics["r_at_1"], metrics["r_at_4"], metrics["map"]))
            logger.debug("step %d loss %.4f R@1 %.3f", step, value, metrics["r_at_1"])
        if step == config.steps:
            break
        lr = config.learning_rate
        if config.lr_decay_step is not None and step >= config.lr_decay_step:
            lr *= config.lr_decay_factor
        model.weight = opt.step(model.weight, grad, lr)
        memory.commit(z, ids)
    return TrainResult(history, model)


def near_tie_weight(dataset: SynthDataset, embed_dim: int, scale: float, seed: int = 0) -> np.ndarray:
    """Weights sending every point close to one common embedding direction.

    Needs a dataset with a positive ``offset``: the first input axis is mapped
    onto a fixed embedding direction and a random map of size ``scale`` adds
    the per-point variation, so all cosine similarities start within
    ``O(scale**2)`` of 1.
    """
    if dataset.params.offset <= 0:
        raise InvalidInputError("near-tie initialisation needs a dataset with positive offset")
    rng = np.random.default_rng(seed)
    w = scale * rng.normal(scale=1.0 / math.sqrt(dataset.points.shape[1]), size=(dataset.points.shape[1], embed_dim))
    w[0, 0] += 1.0
    return w


def similarity_spread(model: EmbeddingModel, dataset: SynthDataset) -> float:
    """Standard deviation of the pairwise cosine similarities (self-pairs excluded)."""
    z = model.embed(dataset.points)
    sims = z @ z.T
    return float(sims[~np.eye(sims.shape[0], dtype=bool)].std())


# a run counts as having left the tie once its similarity spread grew this much
ESCAPE_FACTOR = 100.0


@dataclass(frozen=True)
class CollapseRun:
    alpha: float
    result: TrainResult
    initial_spread: float
    final_spread: float

    @property
    def escaped(self) -> bool:
        return self.final_spread > ESCAPE_FACTOR * self.initial_spread


def collapse_experiment(
    dataset: SynthDataset | None = None,
    config: TrainConfig | None = None,
    scale: float = 0.01,
    alpha: float = 0.02,
) -> list[CollapseRun]:
    """Paired runs from one near-tie start, without and with a margin.

    The defaults use no memory and a ``lam`` large enough that, at the tie,
    ``lam * dL/drank`` of a relevant item exceeds ``alpha``; otherwise the
    margin-shifted ranking could not be perturbed at all.
    """
    if dataset is None:
        dataset = generate(SynthParams(offset=3.0))
    if config is None:
        config = TrainConfig(steps=300, lam=10.0, memory=0, lr_decay_step=None, eval_every=50)
    _, eval_set = split(dataset, config.eval_fraction)
    w0 = near_tie_weight(dataset, config.embed_dim, scale, config.seed)
    start = similarity_spread(EmbeddingModel(w0), eval_set)
    runs = []
    for a in (0.0, alpha):
        result = train(replace(config, alpha=a), dataset, w0)
        runs.append(CollapseRun(a, result, start, similarity_spread(result.model, eval_set)))
    return runs
