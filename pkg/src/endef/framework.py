"""Fused two-branch training with detector-only inference.

The entity branch sees only the entity mentions of a sample and soaks up
whatever shortcut value they carry; the detector sees the full token stream.
Training couples both logits through a fused sigmoid plus an auxiliary
entity loss; inference drops the entity branch entirely so entity shortcuts
learned from historical data cannot steer predictions on future data.
"""

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .models import MAX_SEQ_LEN, ModelError, ScalarModel, binary_cross_entropy, sigmoid

DEFAULT_ALPHA = 0.8
DEFAULT_BETA = 0.2

# offset applied to the run seed for the entity branch so the two branches
# never share an initialization stream
ENTITY_SEED_OFFSET = 1_000_003


@dataclass
class EndefModel:
    """Detector + entity branch, fusion weight alpha, entity-loss weight beta."""

    entity_model: ScalarModel
    detector: ScalarModel
    alpha: float = DEFAULT_ALPHA
    beta: float = DEFAULT_BETA

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ModelError("alpha must lie in [0, 1]")
        if self.beta < 0.0:
            raise ModelError("beta must be non-negative")

    @property
    def vocab(self):
        return self.detector.vocab

    def copy(self):
        return EndefModel(self.entity_model.copy(), self.detector.copy(), self.alpha, self.beta)


def make_endef_model(detector_spec, entity_spec, vocab, *, seed=0, alpha=DEFAULT_ALPHA, beta=DEFAULT_BETA):
    """Build both branches; the detector initializes from `seed`, the entity branch from a derived seed."""
    detector = ScalarModel(detector_spec, vocab, seed=seed)
    entity_model = ScalarModel(entity_spec, vocab, seed=seed + ENTITY_SEED_OFFSET)
    return EndefModel(entity_model, detector, alpha, beta)


@dataclass(frozen=True)
class ForwardRecord:
    """Branch logits and the fused probability for one sample."""

    entity_logit: float
    detector_logit: float
    fused_prob: float


def fused_forward(model, piece, max_len=MAX_SEQ_LEN):
    """Evaluate both branches and fuse: sigmoid(alpha * detector + (1 - alpha) * entity).

    An empty entity list feeds a single [PAD] token to the entity branch so
    its logit stays well-defined.
    """
    ids_content = model.detector.vocab.encode_tokens(piece.tokens, max_len)
    ids_entity = model.entity_model.vocab.encode_entities(piece.entities, max_len)
    r_entity = model.entity_model.forward(ids_entity)
    r_detector = model.detector.forward(ids_content)
    fused = sigmoid(model.alpha * r_detector + (1.0 - model.alpha) * r_entity)
    return ForwardRecord(r_entity, r_detector, fused)


def loss_overall(fused_prob, label):
    """Cross-entropy of the fused prediction against the label."""
    return binary_cross_entropy(fused_prob, label)


def loss_entity(entity_logit, label):
    """Cross-entropy of the entity branch alone (auxiliary supervision)."""
    return binary_cross_entropy(sigmoid(entity_logit), label)


def loss_total(model, batch, max_len=MAX_SEQ_LEN, stop_grad_entity_from_overall=False):
    """Mean fused loss plus beta times mean entity loss, with gradients for both branches.

    Returns (loss, {"detector": grads, "entity": grads}). The fused term
    backpropagates into both branches (the fusion couples them); the
    auxiliary entity term touches only the entity branch. With
    stop_grad_entity_from_overall the fused term's gradient into the entity
    branch is suppressed.
    """
    if len(batch) == 0:
        raise ModelError("loss_total needs a non-empty batch")
    inv = 1.0 / len(batch)
    g_det = np.zeros_like(model.detector.params)
    g_ent = np.zeros_like(model.entity_model.params)
    total_overall = 0.0
    total_entity = 0.0
    for piece in batch:
        ids_c = model.detector.vocab.encode_tokens(piece.tokens, max_len)
        ids_e = model.entity_model.vocab.encode_entities(piece.entities, max_len)
        r_det, cache_det = model.detector._forward_cache(ids_c)
        r_ent, cache_ent = model.entity_model._forward_cache(ids_e)
        fused = sigmoid(model.alpha * r_det + (1.0 - model.alpha) * r_ent)
        p_ent = sigmoid(r_ent)
        l_overall = binary_cross_entropy(fused, piece.label)
        l_entity = binary_cross_entropy(p_ent, piece.label)
        if not math.isfinite(l_overall + model.beta * l_entity):
            raise ModelError(f"non-finite loss on sample {piece.id!r}")
        total_overall += l_overall
        total_entity += l_entity
        residual = fused - piece.label
        g_det += model.detector._backward_from_cache(cache_det, model.alpha * residual * inv)
        up_ent = model.beta * (p_ent - piece.label) * inv
        if not stop_grad_entity_from_overall:
            up_ent += (1.0 - model.alpha) * residual * inv
        g_ent += model.entity_model._backward_from_cache(cache_ent, up_ent)
    loss = total_overall * inv + model.beta * (total_entity * inv)
    return loss, {"detector": g_det, "entity": g_ent}


def debiased_predict(model, piece, max_len=MAX_SEQ_LEN, scale_by_alpha=False):
    """Detector-only probability; the entity branch is never evaluated.

    scale_by_alpha multiplies the detector logit by the fusion weight before
    the sigmoid; rankings (AUC-family metrics) are unaffected either way.
    """
    ids = model.detector.vocab.encode_tokens(piece.tokens, max_len)
    logit = model.detector.forward(ids)
    if scale_by_alpha:
        logit = model.alpha * logit
    return sigmoid(logit)


@dataclass(frozen=True)
class CaseRecord:
    """Diagnostic probabilities for one sample."""

    p_entity: float
    p_detector: float
    p_fused: float


def biased_predict(model, piece, max_len=MAX_SEQ_LEN):
    """Expose sigmoid of each branch logit plus the fused probability."""
    rec = fused_forward(model, piece, max_len)
    return CaseRecord(sigmoid(rec.entity_logit), sigmoid(rec.detector_logit), rec.fused_prob)


def case_report(model, corpus, max_len=MAX_SEQ_LEN, scale_by_alpha=False):
    """Per-sample diagnostic rows (corpus order) for case-by-case analysis."""
    rows = []
    for piece in corpus:
        case = biased_predict(model, piece, max_len)
        rows.append(
            {
                "id": piece.id,
                "p_entity": case.p_entity,
                "p_detector": case.p_detector,
                "p_fused": case.p_fused,
                "p_debiased": debiased_predict(model, piece, max_len, scale_by_alpha),
                "label": piece.label,
            }
        )
    return rows


def save_checkpoint(model, path):
    """Write a model (composite or single encoder) as self-describing JSON."""
    if isinstance(model, EndefModel):
        payload = {
            "format_version": 1,
            "kind": "endef_model",
            "alpha": model.alpha,
            "beta": model.beta,
            "detector": model.detector.to_payload(),
            "entity_model": model.entity_model.to_payload(),
        }
    elif isinstance(model, ScalarModel):
        payload = model.to_payload()
    else:
        raise ModelError(f"cannot checkpoint object of type {type(model).__name__}")
    Path(path).write_text(json.dumps(payload, sort_keys=True) + "\n", encoding="utf-8")


def load_checkpoint(path):
    """Read a checkpoint written by save_checkpoint; dispatches on its kind field."""
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    kind = payload.get("kind")
    if kind == "endef_model":
        if payload.get("format_version") != 1:
            raise ModelError(f"unsupported checkpoint format_version {payload.get('format_version')!r}")
        return EndefModel(
            ScalarModel.from_payload(payload["entity_model"]),
            ScalarModel.from_payload(payload["detector"]),
            float(payload["alpha"]),
            float(payload["beta"]),
        )
    if kind == "scalar_model":
        return ScalarModel.from_payload(payload)
    raise ModelError(f"unknown checkpoint kind {kind!r}")
