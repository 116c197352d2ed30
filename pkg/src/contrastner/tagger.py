"""BiLSTM feature extractor with a linear-chain CRF output layer.

The transition table is (K+2)x(K+2) over the K real tags plus a virtual
start tag (row K) and stop tag (column K+1). Training minimizes the
negative log-likelihood logZ - score(gold path); decoding is Viterbi.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import autodiff as ad
from . import encoder as enc
from .corpus import TaggedSentence
from .params import ParamStore, sgd_step

NEG_INF = -1e30  # stands in for -inf; keeps exp/log backward NaN-free


@dataclass
class NerConfig:
    epochs: int = 10
    lr: float = 0.05
    seed: int = 0
    hidden: int = 64
    train_encoder: bool = True
    strict: bool = False

    def validate(self):
        if self.epochs < 0:
            raise ValueError(f"epochs must be >= 0, got {self.epochs}")
        if self.hidden < 1:
            raise ValueError(f"hidden size must be >= 1, got {self.hidden}")


@dataclass
class NerLog:
    epoch_losses: list = field(default_factory=list)
    steps: int = 0


@dataclass
class TagPath:
    ids: list
    score: float


def bio_tag_list(types: Sequence[str]) -> list:
    """Tag inventory in id order: O first, then B-X, I-X per type."""
    tags = ["O"]
    for t in types:
        tags.append("B-" + t)
        tags.append("I-" + t)
    return tags


def init_tagger(store: ParamStore, d_in: int, hidden: int, n_tags: int,
                rng: Optional[np.random.Generator] = None):
    """Add BiLSTM, emission, and transition weights to the store.

    Gate weights are packed in row blocks [input, forget, cell, output],
    each `hidden` rows tall.
    """
    rng = rng or np.random.default_rng(0)
    for d in ("f", "b"):
        store.add(f"lstm.{d}.w_x",
                  rng.normal(0.0, 1.0 / np.sqrt(d_in), (4 * hidden, d_in)))
        store.add(f"lstm.{d}.w_h",
                  rng.normal(0.0, 1.0 / np.sqrt(hidden), (4 * hidden, hidden)))
        store.add(f"lstm.{d}.b", np.zeros(4 * hidden))
    store.add("emit.w", rng.normal(0.0, 1.0 / np.sqrt(2 * hidden), (2 * hidden, n_tags)))
    store.add("crf.trans", rng.normal(0.0, 0.01, (n_tags + 2, n_tags + 2)))


def _lstm_direction(store: ParamStore, key: str, xs):
    w_x, w_h, b = store[key + ".w_x"], store[key + ".w_h"], store[key + ".b"]
    h_dim = w_h.values.shape[1]
    h = ad.constant(np.zeros(h_dim))
    c = ad.constant(np.zeros(h_dim))
    states = []
    for x in xs:
        z = ad.add(ad.add(ad.matmul(w_x, x), ad.matmul(w_h, h)), b)
        i = ad.sigmoid(ad.slice_vec(z, 0, h_dim))
        f = ad.sigmoid(ad.slice_vec(z, h_dim, 2 * h_dim))
        g = ad.tanh(ad.slice_vec(z, 2 * h_dim, 3 * h_dim))
        o = ad.sigmoid(ad.slice_vec(z, 3 * h_dim, 4 * h_dim))
        c = ad.add(ad.mul(f, c), ad.mul(i, g))
        h = ad.mul(o, ad.tanh(c))
        states.append(h)
    return states


def bilstm_forward(store: ParamStore, inputs: ad.Tensor) -> ad.Tensor:
    """Per-token features: forward and backward final states, concatenated.

    Args:
        inputs: (T, d_in) matrix of token representations.

    Returns:
        (T, 2*hidden) feature matrix.
    """
    if inputs.values.ndim != 2 or inputs.values.shape[0] == 0:
        raise ValueError(f"bilstm_forward needs a (T, d) matrix with T >= 1, "
                         f"got shape {inputs.values.shape}")
    xs = [ad.get_row(inputs, t) for t in range(inputs.values.shape[0])]
    fwd = _lstm_direction(store, "lstm.f", xs)
    bwd = list(reversed(_lstm_direction(store, "lstm.b", list(reversed(xs)))))
    return ad.stack_rows([ad.concat([f, b]) for f, b in zip(fwd, bwd)])


def emissions(store: ParamStore, feats: ad.Tensor) -> ad.Tensor:
    """(T, K) tag scores from (T, 2*hidden) features."""
    return ad.matmul(feats, store["emit.w"])


def _split_transitions(trans: ad.Tensor, n_tags: int):
    start = ad.slice_vec(ad.get_row(trans, n_tags), 0, n_tags)
    stop = ad.slice_vec(ad.get_col(trans, n_tags + 1), 0, n_tags)
    inner = ad.submat(trans, 0, n_tags, 0, n_tags)
    return start, stop, inner


def crf_log_partition(emis: ad.Tensor, trans: ad.Tensor) -> ad.Tensor:
    """Log of the sum of exp scores over all tag paths (forward algorithm).

    Args:
        emis: (T, K) emission scores.
        trans: (K+2, K+2) transitions; row K is start, column K+1 is stop.

    Returns:
        scalar logZ.
    """
    t_len, n_tags = emis.values.shape
    if trans.values.shape != (n_tags + 2, n_tags + 2):
        raise ValueError(f"transition shape {trans.values.shape} does not match "
                         f"{n_tags} tags (want {(n_tags + 2, n_tags + 2)})")
    start, stop, inner = _split_transitions(trans, n_tags)
    alpha = ad.add(ad.get_row(emis, 0), start)
    inner_t = ad.transpose(inner)  # row j lists arrival scores into tag j
    for t in range(1, t_len):
        alpha = ad.add(ad.get_row(emis, t),
                       ad.logsumexp_rows(ad.add(inner_t, alpha)))
    return ad.logsumexp(ad.add(alpha, stop))


def path_score(emis: ad.Tensor, trans: ad.Tensor, tag_ids: Sequence[int]) -> ad.Tensor:
    """Score of one tag path: start + emissions + transitions + stop."""
    t_len, n_tags = emis.values.shape
    if len(tag_ids) != t_len:
        raise ValueError(f"path length {len(tag_ids)} does not match {t_len} tokens")
    for tid in tag_ids:
        if not 0 <= tid < n_tags:
            raise ValueError(f"tag id {tid} out of range for {n_tags} tags")
    score = ad.get_elem(trans, n_tags, tag_ids[0])
    for t, tid in enumerate(tag_ids):
        score = ad.add(score, ad.get_elem(emis, t, tid))
        if t + 1 < t_len:
            score = ad.add(score, ad.get_elem(trans, tid, tag_ids[t + 1]))
    return ad.add(score, ad.get_elem(trans, tag_ids[-1], n_tags + 1))


def crf_nll(emis: ad.Tensor, trans: ad.Tensor, tag_ids: Sequence[int]) -> ad.Tensor:
    """Negative log-likelihood of the gold path: logZ - score(path)."""
    return ad.sub(crf_log_partition(emis, trans), path_score(emis, trans, tag_ids))


def viterbi(emis: np.ndarray, trans: np.ndarray) -> TagPath:
    """Highest-scoring tag path by max-product dynamic programming.

    Ties break toward the smallest tag id at every argmax. Plain numpy;
    decoding never needs gradients.
    """
    emis = np.asarray(emis, dtype=np.float64)
    trans = np.asarray(trans, dtype=np.float64)
    t_len, n_tags = emis.shape
    if trans.shape != (n_tags + 2, n_tags + 2):
        raise ValueError(f"transition shape {trans.shape} does not match "
                         f"{n_tags} tags (want {(n_tags + 2, n_tags + 2)})")
    start = trans[n_tags, :n_tags]
    stop = trans[:n_tags, n_tags + 1]
    inner = trans[:n_tags, :n_tags]
    delta = emis[0] + start
    back = np.zeros((t_len, n_tags), dtype=np.int64)
    for t in range(1, t_len):
        arrive = delta[:, None] + inner          # arrive[i, j]: from i into j
        back[t] = np.argmax(arrive, axis=0)      # first index wins ties
        delta = emis[t] + arrive[back[t], np.arange(n_tags)]
    final = delta + stop
    best = int(np.argmax(final))
    ids = [best]
    for t in range(t_len - 1, 0, -1):
        ids.append(int(back[t, ids[-1]]))
    ids.reverse()
    return TagPath(ids, float(final[best]))


def transition_mask(tag_list: Sequence[str]) -> np.ndarray:
    """Additive mask, 0 for legal BIO transitions and NEG_INF for illegal.

    Illegal: entering I-X from anything other than B-X or I-X (including
    from the start tag).
    """
    n_tags = len(tag_list)
    mask = np.zeros((n_tags + 2, n_tags + 2))
    for j, to_tag in enumerate(tag_list):
        if not to_tag.startswith("I-"):
            continue
        want = to_tag[2:]
        mask[n_tags, j] = NEG_INF
        for i, from_tag in enumerate(tag_list):
            if from_tag == "B-" + want or from_tag == "I-" + want:
                continue
            mask[i, j] = NEG_INF
    return mask


def _masked_trans(store: ParamStore, tag_list, strict: bool):
    trans = store["crf.trans"]
    if not strict:
        return trans
    if tag_list is None:
        raise ValueError("strict transitions need the tag inventory")
    return ad.add(trans, ad.constant(transition_mask(tag_list)))


def sentence_nll(store: ParamStore, vocab: enc.Vocab, sent: TaggedSentence,
                 tag_ids: Sequence[int], strict: bool = False,
                 tag_list: Optional[Sequence[str]] = None,
                 enc_prefix: str = "enc.") -> ad.Tensor:
    feats = bilstm_forward(store, enc.encode(store, vocab, sent.tokens, enc_prefix))
    emis = emissions(store, feats)
    return crf_nll(emis, _masked_trans(store, tag_list, strict), tag_ids)


def train_ner(sentences: Sequence[TaggedSentence], vocab: enc.Vocab,
              store: ParamStore, tag_list: Sequence[str], config: NerConfig,
              enc_prefix: str = "enc.") -> NerLog:
    """Fit the tagger (and optionally the encoder) by per-sentence SGD.

    Zero epochs leave every parameter untouched. A non-finite loss aborts
    with the epoch and sentence index.
    """
    config.validate()
    if not sentences:
        raise ValueError("no training sentences")
    tag_ids = {tag: i for i, tag in enumerate(tag_list)}
    gold = []
    for sent in sentences:
        try:
            gold.append([tag_ids[t] for t in sent.tags])
        except KeyError as e:
            raise ValueError(f"tag {e.args[0]!r} not in the tag inventory") from None
    frozen = [] if config.train_encoder else list(store.subset(enc_prefix).items())
    for _, t in frozen:
        t.requires_grad = False  # keeps encoder ops off the tape entirely
    rng = np.random.default_rng(config.seed)
    order = list(range(len(sentences)))
    log = NerLog()
    try:
        for epoch in range(config.epochs):
            rng.shuffle(order)
            total = 0.0
            for idx in order:
                loss = sentence_nll(store, vocab, sentences[idx], gold[idx],
                                    config.strict, tag_list, enc_prefix)
                if not np.isfinite(loss.values):
                    raise RuntimeError(f"non-finite loss at epoch {epoch}, sentence {idx}")
                ad.backward(loss)
                sgd_step(store, config.lr)
                log.steps += 1
                total += loss.item()
            log.epoch_losses.append(total / len(sentences))
    finally:
        for _, t in frozen:
            t.requires_grad = True
    return log


def predict(sentences, vocab: enc.Vocab, store: ParamStore,
            tag_list: Sequence[str], strict: bool = False,
            enc_prefix: str = "enc.") -> list:
    """Viterbi-decode token lists (or TaggedSentences) into TaggedSentences."""
    trans = store["crf.trans"].values
    if strict:
        trans = trans + transition_mask(tag_list)
    out = []
    with ad.no_grad():
        for sent in sentences:
            tokens = sent.tokens if isinstance(sent, TaggedSentence) else list(sent)
            feats = bilstm_forward(store, enc.encode(store, vocab, tokens, enc_prefix))
            emis = emissions(store, feats)
            path = viterbi(emis.values, trans)
            out.append(TaggedSentence(tokens, [tag_list[i] for i in path.ids]))
    return out
