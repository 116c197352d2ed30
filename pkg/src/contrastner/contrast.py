"""Contrastive fine-tuning of the sentence encoder.

Each training pair contributes one anchor (query encoder) and one positive
(key encoder, no gradients). The positive similarity is stacked on top of
similarities against a fixed-size FIFO queue of past keys, and the loss is
the InfoNCE objective with the positive at index 0:

    loss = logsumexp(m / tau) - m[0] / tau

The queue rotates by one after each pair: eldest out, current key in.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import autodiff as ad
from . import encoder as enc
from .corpus import SentencePair
from .params import ParamStore, sgd_step

KEY_UPDATE_MODES = ("frozen", "momentum", "mirror")


@dataclass
class WclConfig:
    temperature: float = 0.07
    queue_size: int = 4096          # number of negatives kept
    epochs: int = 5
    lr: float = 0.05
    seed: int = 0
    key_update: str = "momentum"
    momentum: float = 0.999
    raw_dot: bool = False           # plain dot product instead of cosine

    def validate(self):
        if self.temperature <= 0:
            raise ValueError(f"temperature must be positive, got {self.temperature}")
        if self.queue_size < 1:
            raise ValueError(f"queue size must be >= 1, got {self.queue_size}")
        if self.epochs < 0:
            raise ValueError(f"epochs must be >= 0, got {self.epochs}")
        if self.key_update not in KEY_UPDATE_MODES:
            raise ValueError(f"key update must be one of {KEY_UPDATE_MODES}, "
                             f"got {self.key_update!r}")
        if self.key_update == "momentum" and not 0.0 < self.momentum < 1.0:
            raise ValueError(f"momentum must lie strictly in (0, 1), got {self.momentum}")


@dataclass
class WclLog:
    epoch_losses: list = field(default_factory=list)
    steps: int = 0
    queue: Optional["NegativeQueue"] = None  # final state, for inspection


def init_head(store: ParamStore, d_in: int, n_types: int,
              rng: Optional[np.random.Generator] = None, prefix: str = "head."):
    """Two-layer projection: d_in -> d_in (relu) -> n_types."""
    rng = rng or np.random.default_rng(0)
    store.add(prefix + "w1", rng.normal(0.0, 1.0 / np.sqrt(d_in), (d_in, d_in)))
    store.add(prefix + "b1", np.zeros(d_in))
    store.add(prefix + "w2", rng.normal(0.0, 1.0 / np.sqrt(d_in), (n_types, d_in)))
    store.add(prefix + "b2", np.zeros(n_types))


def project(store: ParamStore, v: ad.Tensor, prefix: str = "head.") -> ad.Tensor:
    h = ad.relu(ad.add(ad.matmul(store[prefix + "w1"], v), store[prefix + "b1"]))
    return ad.add(ad.matmul(store[prefix + "w2"], h), store[prefix + "b2"])


def similarity(a: ad.Tensor, b: ad.Tensor, raw: bool = False) -> ad.Tensor:
    """Cosine by default: normalize both sides, then dot."""
    if raw:
        return ad.dot(a, b)
    return ad.dot(ad.normalize(a), ad.normalize(b))


class NegativeQueue:
    """FIFO of past key vectors, fixed size, oldest first."""

    def __init__(self, size: int, dim: int, rng: np.random.Generator):
        if size < 1:
            raise ValueError(f"queue size must be >= 1, got {size}")
        self.size = size
        self.dim = dim
        self._q = deque(rng.standard_normal((size, dim)))

    def __len__(self):
        return len(self._q)

    def rotate(self, key: np.ndarray):
        """Dequeue the eldest vector, enqueue a copy of the new key."""
        key = np.asarray(key, dtype=np.float64)
        if key.shape != (self.dim,):
            raise ValueError(f"key shape {key.shape} does not match queue dim {self.dim}")
        self._q.popleft()
        self._q.append(key.copy())
        assert len(self._q) == self.size

    def as_matrix(self) -> np.ndarray:
        return np.stack(list(self._q))


def enqueue_dequeue(queue: NegativeQueue, key: np.ndarray):
    queue.rotate(key)


def build_msim(pos: ad.Tensor, queue: NegativeQueue, anchor: ad.Tensor,
               raw: bool = False) -> ad.Tensor:
    """Similarity vector [positive, negatives...] of length queue size + 1.

    Queue entries are constants; gradients flow only through the anchor
    (and whatever produced the positive score).
    """
    if queue is None or len(queue) == 0:
        raise ValueError("negative queue is not initialized")
    q = queue.as_matrix()
    if raw:
        a = anchor
    else:
        norms = np.linalg.norm(q, axis=1, keepdims=True)
        q = np.where(norms > 1e-9, q / np.maximum(norms, 1e-30), 0.0)
        a = ad.normalize(anchor)
    negs = ad.matmul(ad.constant(q), a)
    return ad.concat([pos, negs])


def info_nce(m: ad.Tensor, tau: float) -> ad.Tensor:
    """Contrastive loss with the positive at index 0."""
    if tau <= 0:
        raise ValueError(f"temperature must be positive, got {tau}")
    s = ad.scale(m, 1.0 / tau)
    return ad.sub(ad.logsumexp(s), ad.get_item(s, 0))


def train_wcl(pairs: Sequence[SentencePair], vocab: enc.Vocab,
              query: ParamStore, key: ParamStore, config: WclConfig,
              head_prefix: str = "head.", enc_prefix: str = "enc.") -> WclLog:
    """Fine-tune the query encoder and head on sentence pairs.

    Per pair: project and normalize both sides (key side without taping),
    score positive and queue negatives, rotate the queue with the new key,
    take the InfoNCE loss, backpropagate, step the query side only, then
    refresh the key per the configured mode. Returns per-epoch mean losses.
    """
    config.validate()
    if not pairs:
        raise ValueError("no training pairs")
    n_types = query[head_prefix + "b2"].values.shape[0]
    rng = np.random.default_rng(config.seed)
    queue = NegativeQueue(config.queue_size, n_types, rng)
    log = WclLog(queue=queue)
    order = list(range(len(pairs)))
    for epoch in range(config.epochs):
        rng.shuffle(order)
        total = 0.0
        for idx in order:
            pair = pairs[idx]
            anchor = project(
                query, enc.pool(enc.encode(query, vocab, pair.sentence, enc_prefix)),
                head_prefix)
            if not config.raw_dot:
                anchor = ad.normalize(anchor)
            with ad.no_grad():
                pos_key = project(
                    query, enc.pool(enc.encode(key, vocab, pair.positive, enc_prefix)),
                    head_prefix)
                if not config.raw_dot:
                    pos_key = ad.normalize(pos_key)
            pos = ad.dot(anchor, pos_key)
            msim = build_msim(pos, queue, anchor, raw=config.raw_dot)
            enqueue_dequeue(queue, pos_key.values)
            loss = info_nce(msim, config.temperature)
            if not np.isfinite(loss.values):
                raise RuntimeError(
                    f"non-finite loss at pair {idx}, epoch {epoch}")
            ad.backward(loss)
            sgd_step([query], config.lr)
            enc.update_key(key, query, config.key_update, config.momentum)
            log.steps += 1
            total += loss.item()
        log.epoch_losses.append(total / len(pairs))
    return log
