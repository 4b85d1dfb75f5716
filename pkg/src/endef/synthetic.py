"""Synthetic corpora with controlled, period-dependent entity-label correlations.

Each sample carries a genuine class signal in its content words plus one to
three injected entity tokens whose fake fraction is dialed per period.
Flipping those fractions between the train and test periods plants exactly
the shortcut trap the fused trainer is meant to dodge, while the content
signal stays stable so an entity-ignoring classifier keeps working.

Sampling scheme per piece: the label is drawn from the period's mean fake
fraction, then 1 to max_entities_per_piece entity draws are taken with
replacement with probabilities proportional to corr (fake pieces) or
1 - corr (real pieces), and deduplicated in draw order. With the label
marginal equal to mean(corr), Bayes gives P(fake | entity drawn) = corr_k
exactly per draw; presence-level fractions attenuate slightly toward the
mean when several draws land on few entities, so recipes with at least ~8
entities track their targets closely.
"""

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import Corpus, EntityBiasRow, NewsPiece


class SyntheticSpecError(ValueError):
    """Infeasible or malformed corpus recipe."""


def _as_corr_tuple(value, n_entities, name):
    if isinstance(value, (int, float)):
        value = (float(value),) * n_entities
    value = tuple(float(v) for v in value)
    if len(value) != n_entities:
        raise SyntheticSpecError(f"{name} must have one value per entity ({n_entities}), got {len(value)}")
    if any(not 0.0 <= v <= 1.0 for v in value):
        raise SyntheticSpecError(f"{name} values must lie in [0, 1]")
    return value


@dataclass(frozen=True)
class BiasSpec:
    """Recipe for one synthetic corpus.

    train_corr / test_corr give P(fake | entity present) per entity for the
    respective period; a scalar is broadcast to all entities.
    content_signal_strength is the chance each content token comes from the
    class-conditional pool instead of the neutral one.
    """

    n_entities: int = 12
    vocab_size: int = 400
    n_train: int = 1600
    n_val: int = 320
    n_test: int = 320
    train_corr: tuple | float = 0.9
    test_corr: tuple | float = 0.1
    content_signal_strength: float = 0.3
    min_tokens: int = 12
    max_tokens: int = 24
    max_entities_per_piece: int = 3
    period_boundary: int = 1_000_000
    seed: int = 0

    def __post_init__(self):
        if self.n_entities < 1:
            raise SyntheticSpecError("n_entities must be positive")
        if min(self.n_train, self.n_val, self.n_test) < 1:
            raise SyntheticSpecError("sample counts must be positive")
        if self.vocab_size < 8:
            raise SyntheticSpecError("vocab_size must be at least 8")
        if not 0.0 < self.content_signal_strength < 1.0:
            raise SyntheticSpecError("content_signal_strength must lie in (0, 1)")
        if not 1 <= self.min_tokens <= self.max_tokens:
            raise SyntheticSpecError("need 1 <= min_tokens <= max_tokens")
        if self.max_entities_per_piece < 1:
            raise SyntheticSpecError("max_entities_per_piece must be positive")
        if self.n_train > self.period_boundary:
            raise SyntheticSpecError("period_boundary must not fall inside the train period")
        object.__setattr__(self, "train_corr", _as_corr_tuple(self.train_corr, self.n_entities, "train_corr"))
        object.__setattr__(self, "test_corr", _as_corr_tuple(self.test_corr, self.n_entities, "test_corr"))

    def entity_names(self):
        return tuple(f"ent_{i:02d}" for i in range(self.n_entities))

    def to_payload(self):
        return {
            "n_entities": self.n_entities,
            "vocab_size": self.vocab_size,
            "n_train": self.n_train,
            "n_val": self.n_val,
            "n_test": self.n_test,
            "train_corr": list(self.train_corr),
            "test_corr": list(self.test_corr),
            "content_signal_strength": self.content_signal_strength,
            "min_tokens": self.min_tokens,
            "max_tokens": self.max_tokens,
            "max_entities_per_piece": self.max_entities_per_piece,
            "period_boundary": self.period_boundary,
            "seed": self.seed,
        }

    @classmethod
    def from_payload(cls, payload):
        d = dict(payload)
        for key in ("train_corr", "test_corr"):
            if isinstance(d.get(key), list):
                d[key] = tuple(d[key])
        return cls(**d)

    @classmethod
    def from_file(cls, path):
        return cls.from_payload(json.loads(Path(path).read_text(encoding="utf-8")))


def _content_pools(vocab_size):
    q = max(vocab_size // 4, 2)
    fake_pool = tuple(f"fw{i:03d}" for i in range(q))
    real_pool = tuple(f"rw{i:03d}" for i in range(q))
    neutral_pool = tuple(f"nw{i:03d}" for i in range(max(vocab_size - 2 * q, 2)))
    return fake_pool, real_pool, neutral_pool


def generate(spec):
    """Build the corpus and its ground-truth bias ledger.

    Returns (corpus, ledger). Ledger rows are realized per-entity counts
    tallied during generation; an entity-bias audit of the emitted corpus
    must reproduce them exactly. Generation is deterministic given the seed.
    """
    rng = np.random.default_rng(spec.seed)
    names = spec.entity_names()
    fake_pool, real_pool, neutral_pool = _content_pools(spec.vocab_size)
    counts = {}

    def emit(period, index, timestamp, corr):
        corr = np.asarray(corr, dtype=np.float64)
        label = int(rng.random() < corr.mean())
        weights = corr if label else 1.0 - corr
        total = float(weights.sum())
        if total <= 0.0:
            probs = np.full(spec.n_entities, 1.0 / spec.n_entities)
        else:
            probs = weights / total
        k = int(rng.integers(1, spec.max_entities_per_piece + 1))
        chosen = []
        for _ in range(k):
            idx = int(rng.choice(spec.n_entities, p=probs))
            if idx not in chosen:
                chosen.append(idx)
        n_content = int(rng.integers(spec.min_tokens, spec.max_tokens + 1))
        signal_pool = fake_pool if label else real_pool
        tokens = []
        for _ in range(n_content):
            pool = signal_pool if rng.random() < spec.content_signal_strength else neutral_pool
            tokens.append(pool[int(rng.integers(len(pool)))])
        entities = [names[int(i)] for i in chosen]
        for e in entities:
            tokens.insert(int(rng.integers(len(tokens) + 1)), e)
            n, nf = counts.get((e, period), (0, 0))
            counts[(e, period)] = (n + 1, nf + label)
        return NewsPiece(f"{period}-{index:05d}", tuple(tokens), tuple(entities), label, timestamp)

    pieces = [emit("pre", i, i, spec.train_corr) for i in range(spec.n_train)]
    pieces += [
        emit("post", i, spec.period_boundary + i, spec.test_corr)
        for i in range(spec.n_val + spec.n_test)
    ]

    for e in names:
        for period in ("pre", "post"):
            if (e, period) not in counts:
                raise SyntheticSpecError(
                    f"infeasible spec: entity {e!r} drew no samples in period {period!r}; increase sample counts"
                )

    totals = {e: counts[(e, "pre")][0] + counts[(e, "post")][0] for e in names}
    ledger = tuple(
        EntityBiasRow(e, period, counts[(e, period)][0], counts[(e, period)][1] / counts[(e, period)][0])
        for e in sorted(names, key=lambda e: (-totals[e], e))
        for period in ("pre", "post")
    )
    return Corpus(tuple(pieces), name=f"synthetic-seed{spec.seed}"), ledger
