"""Mini-batch training loops: augmentation wiring, early stopping, alpha grid search.

Both trainers share one loop skeleton and one pair of seeded random streams
(shuffling, augmentation), so a fused model run with alpha = 1 and beta = 0
walks bit-for-bit the same detector trajectory as the plain baseline trainer
under the same seed. Validation and test data are never augmented, and the
vocabulary must come from the train part alone.
"""

import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import augmentation as aug
from .augmentation import AUGMENT_ACTIONS, AUGMENT_KINDS, recompute_entities
from .framework import EndefModel, debiased_predict, loss_total, make_endef_model
from .metrics import DEFAULT_MAXFPR, PredictionSet, evaluate, f1_scores
from .models import (
    MAX_SEQ_LEN,
    AdamState,
    ModelError,
    adam_step,
    binary_cross_entropy,
    sigmoid,
)
from .vocab import build_vocabulary


class TrainingError(ValueError):
    """Bad training configuration or a diverged run."""


@dataclass(frozen=True)
class AugmentSettings:
    """Per-sample augmentation knobs used inside the training loops.

    probability is the per-token (or per-span) selection chance;
    apply_probability is the chance a sample gets augmented at all.
    """

    enabled: bool = True
    probability: float = 0.1
    apply_probability: float = 1.0
    kinds: tuple[str, ...] = AUGMENT_KINDS
    actions: tuple[str, ...] = AUGMENT_ACTIONS

    def __post_init__(self):
        object.__setattr__(self, "kinds", tuple(self.kinds))
        object.__setattr__(self, "actions", tuple(self.actions))
        if not 0.0 <= self.probability <= 1.0:
            raise TrainingError("augment probability must lie in [0, 1]")
        if not 0.0 <= self.apply_probability <= 1.0:
            raise TrainingError("augment apply_probability must lie in [0, 1]")
        if not set(self.kinds) <= set(AUGMENT_KINDS) or not self.kinds:
            raise TrainingError(f"augment kinds must be a non-empty subset of {AUGMENT_KINDS}")
        if not set(self.actions) <= set(AUGMENT_ACTIONS) or not self.actions:
            raise TrainingError(f"augment actions must be a non-empty subset of {AUGMENT_ACTIONS}")


@dataclass(frozen=True)
class TrainConfig:
    """Loop hyperparameters. alpha/beta are consumed at model construction time."""

    lr: float = 5e-3
    batch_size: int = 64
    max_epochs: int = 50
    patience: int = 5
    seed: int = 0
    alpha: float = 0.8
    beta: float = 0.2
    max_len: int = MAX_SEQ_LEN
    min_token_freq: int = 2
    stop_grad_entity_from_overall: bool = False
    augment: AugmentSettings = field(default_factory=AugmentSettings)

    def __post_init__(self):
        if self.lr <= 0:
            raise TrainingError("lr must be positive")
        if self.batch_size < 1:
            raise TrainingError("batch_size must be at least 1")
        if self.max_epochs < 1:
            raise TrainingError("max_epochs must be at least 1")
        if self.patience < 1:
            raise TrainingError("patience must be at least 1")
        if self.max_len < 1:
            raise TrainingError("max_len must be at least 1")

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if "augment" in d and isinstance(d["augment"], dict):
            d["augment"] = AugmentSettings(**d["augment"])
        return cls(**d)


@dataclass
class TrainResult:
    model: object
    history: list
    best_epoch: int
    best_val_macf1: float


def _rng_streams(seed):
    shuffle_ss, augment_ss = np.random.SeedSequence(seed).spawn(2)
    return np.random.default_rng(shuffle_ss), np.random.default_rng(augment_ss)


def truncate_piece(piece, max_len):
    """Cut tokens to max_len and re-locate entities on the shortened sequence."""
    if len(piece.tokens) <= max_len:
        return piece
    new_tokens = piece.tokens[:max_len]
    return replace(piece, tokens=new_tokens, entities=recompute_entities(piece, new_tokens))


def _maybe_augment(piece, settings, rng):
    if not settings.enabled:
        return piece
    if settings.apply_probability < 1.0 and rng.random() >= settings.apply_probability:
        return piece
    policy = aug.choose_policy(rng, settings.probability, settings.kinds, settings.actions)
    return aug.augment(piece, policy, rng)


def _encode_input(vocab, piece, max_len, input_mode):
    if input_mode == "tokens":
        return vocab.encode_tokens(piece.tokens, max_len)
    if input_mode == "entities":
        return vocab.encode_entities(piece.entities, max_len)
    raise TrainingError(f"unknown input_mode {input_mode!r}")


def labels_of(corpus):
    return np.array([p.label for p in corpus], dtype=np.int64)


def detector_scores(model, corpus, max_len=MAX_SEQ_LEN, scale_by_alpha=False):
    """Detector-only probabilities for every piece (never augments, never touches the entity branch)."""
    return np.array([debiased_predict(model, p, max_len, scale_by_alpha) for p in corpus], dtype=np.float64)


def scalar_scores(model, corpus, max_len=MAX_SEQ_LEN, input_mode="tokens"):
    """Sigmoid probabilities of a single encoder over a corpus."""
    return np.array(
        [sigmoid(model.forward(_encode_input(model.vocab, p, max_len, input_mode))) for p in corpus],
        dtype=np.float64,
    )


def evaluate_model(model, corpus, max_len=MAX_SEQ_LEN, maxfpr=DEFAULT_MAXFPR, input_mode="tokens", scale_by_alpha=False):
    """Full metric report for a trained model on an un-augmented corpus."""
    if isinstance(model, EndefModel):
        scores = detector_scores(model, corpus, max_len, scale_by_alpha)
    else:
        scores = scalar_scores(model, corpus, max_len, input_mode)
    return evaluate(PredictionSet(scores, labels_of(corpus)), maxfpr)


def _check_split(split):
    # the loop consumes train and validation; the test part is the caller's
    # business and may legitimately be absent from CLI-assembled splits
    for part, label in ((split.train, "train"), (split.validation, "validation")):
        if len(part) == 0:
            raise TrainingError(f"{label} part is empty")


def _run_loop(split, cfg, *, step_fn, val_score_fn, snapshot_fn, restore_fn):
    _check_split(split)
    shuffle_rng, augment_rng = _rng_streams(cfg.seed)
    train_pieces = [truncate_piece(p, cfg.max_len) for p in split.train]
    val_pieces = [truncate_piece(p, cfg.max_len) for p in split.validation]
    val_labels = np.array([p.label for p in val_pieces], dtype=np.int64)
    n = len(train_pieces)
    best_metric = -math.inf
    best_state = snapshot_fn()
    best_epoch = 0
    bad_epochs = 0
    history = []
    step = 0
    for epoch in range(1, cfg.max_epochs + 1):
        order = shuffle_rng.permutation(n)
        loss_sum = 0.0
        for start in range(0, n, cfg.batch_size):
            batch_idx = order[start : start + cfg.batch_size]
            batch = [_maybe_augment(train_pieces[i], cfg.augment, augment_rng) for i in batch_idx]
            step += 1
            try:
                loss = step_fn(batch, step)
            except ModelError as exc:
                raise TrainingError(f"epoch {epoch}, batch {start // cfg.batch_size + 1}: {exc}") from exc
            loss_sum += loss * len(batch_idx)
        val_macf1 = f1_scores(PredictionSet(val_score_fn(val_pieces), val_labels)).macf1
        improved = val_macf1 > best_metric
        history.append(
            {"epoch": epoch, "train_loss": loss_sum / n, "val_macf1": val_macf1, "improved": improved}
        )
        if improved:
            best_metric = val_macf1
            best_state = snapshot_fn()
            best_epoch = epoch
            bad_epochs = 0
        else:
            bad_epochs += 1
            if bad_epochs >= cfg.patience:
                break
    restore_fn(best_state)
    return history, best_epoch, best_metric


def train(model, split, cfg):
    """Fused training of both branches; early stop on validation macro F1 of the detector.

    The model is updated in place and, after the run, holds the parameters of
    the best validation epoch (not the last one).
    """
    opt_det = AdamState.zeros(model.detector.num_params)
    opt_ent = AdamState.zeros(model.entity_model.num_params)

    def step_fn(batch, step):
        loss, grads = loss_total(model, batch, cfg.max_len, cfg.stop_grad_entity_from_overall)
        model.detector.params = adam_step(model.detector.params, grads["detector"], opt_det, cfg.lr, step)
        model.entity_model.params = adam_step(model.entity_model.params, grads["entity"], opt_ent, cfg.lr, step)
        return loss

    def val_score_fn(pieces):
        return np.array([debiased_predict(model, p, cfg.max_len) for p in pieces], dtype=np.float64)

    def snapshot_fn():
        return (model.detector.params.copy(), model.entity_model.params.copy())

    def restore_fn(state):
        model.detector.params = state[0].copy()
        model.entity_model.params = state[1].copy()

    history, best_epoch, best_metric = _run_loop(
        split, cfg, step_fn=step_fn, val_score_fn=val_score_fn, snapshot_fn=snapshot_fn, restore_fn=restore_fn
    )
    return TrainResult(model, history, best_epoch, best_metric)


def train_baseline(model, split, cfg, input_mode="tokens"):
    """Plain cross-entropy training of a single encoder (no entity branch).

    input_mode "entities" trains the encoder on entity mentions alone, which
    is how an entity-only shortcut classifier is built.
    """
    opt = AdamState.zeros(model.num_params)

    def step_fn(batch, step):
        inv = 1.0 / len(batch)
        grads = np.zeros_like(model.params)
        total = 0.0
        for piece in batch:
            ids = _encode_input(model.vocab, piece, cfg.max_len, input_mode)
            logit, cache = model._forward_cache(ids)
            prob = sigmoid(logit)
            l = binary_cross_entropy(prob, piece.label)
            if not math.isfinite(l):
                raise ModelError(f"non-finite loss on sample {piece.id!r}")
            total += l
            grads += model._backward_from_cache(cache, (prob - piece.label) * inv)
        model.params = adam_step(model.params, grads, opt, cfg.lr, step)
        return total * inv

    def val_score_fn(pieces):
        return np.array(
            [sigmoid(model.forward(_encode_input(model.vocab, p, cfg.max_len, input_mode))) for p in pieces],
            dtype=np.float64,
        )

    def snapshot_fn():
        return model.params.copy()

    def restore_fn(state):
        model.params = state.copy()

    history, best_epoch, best_metric = _run_loop(
        split, cfg, step_fn=step_fn, val_score_fn=val_score_fn, snapshot_fn=snapshot_fn, restore_fn=restore_fn
    )
    return TrainResult(model, history, best_epoch, best_metric)


def grid_search_alpha(split, cfg, detector_spec, entity_spec):
    """Train one fused model per alpha in {0.0, 0.1, ..., 1.0}.

    Selection is by best validation macro F1; ties go to the larger alpha.
    Returns (best_alpha, rows) where rows is the full 11-entry table.
    """
    vocab = build_vocabulary(split.train, cfg.min_token_freq)
    rows = []
    for i in range(11):
        alpha = i / 10.0
        model = make_endef_model(detector_spec, entity_spec, vocab, seed=cfg.seed, alpha=alpha, beta=cfg.beta)
        result = train(model, split, cfg)
        rows.append({"alpha": alpha, "val_macf1": result.best_val_macf1, "best_epoch": result.best_epoch})
    best = max(rows, key=lambda r: (r["val_macf1"], r["alpha"]))
    return best["alpha"], rows
