import numpy as np
import pytest

from endef.corpus import NewsPiece
from endef.models import BAG_OF_EMBEDDINGS, CONV_NGRAM, EncoderSpec
from endef.vocab import SPECIAL_TOKENS, Vocabulary


def tiny_vocab(n_words=8):
    return Vocabulary(SPECIAL_TOKENS + tuple(f"w{i}" for i in range(n_words)))


def tiny_spec(kind, rng=None):
    """A small random architecture of the given kind."""
    if rng is None:
        return (
            EncoderSpec(BAG_OF_EMBEDDINGS, embed_dim=3, hidden_dim=4)
            if kind == BAG_OF_EMBEDDINGS
            else EncoderSpec(CONV_NGRAM, embed_dim=3, hidden_dim=4, window_sizes=(1, 2), n_filters=2)
        )
    embed = int(rng.integers(2, 5))
    hidden = int(rng.integers(2, 5))
    if kind == BAG_OF_EMBEDDINGS:
        return EncoderSpec(BAG_OF_EMBEDDINGS, embed_dim=embed, hidden_dim=hidden)
    return EncoderSpec(CONV_NGRAM, embed_dim=embed, hidden_dim=hidden, window_sizes=(1, 2), n_filters=int(rng.integers(1, 3)))


def finite_difference(loss_fn, params, h=1e-4):
    """Central finite-difference gradient of loss_fn() with respect to `params` (mutated in place)."""
    grad = np.zeros_like(params)
    for i in range(params.size):
        orig = params[i]
        params[i] = orig + h
        lp = loss_fn()
        params[i] = orig - h
        lm = loss_fn()
        params[i] = orig
        grad[i] = (lp - lm) / (2.0 * h)
    return grad


def max_relative_error(analytic, numeric, floor=1e-6):
    analytic = np.asarray(analytic)
    numeric = np.asarray(numeric)
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return float(np.max(np.abs(analytic - numeric) / denom))


def relu_safety_margin(model, ids):
    """Smallest distance of any relu pre-activation or pooling race from a kink.

    Finite differences are only valid away from relu kinks and max-pool
    argmax ties; callers regenerate random models whose margin is too small.
    A filter whose positions are all clearly negative is safe (the pooled
    value stays pinned at zero under small perturbations), so its margin is
    the distance of the least-negative position from zero.
    """
    _, cache = model._forward_cache(ids)
    margins = [float(np.min(np.abs(cache["z1"])))]
    if model.spec.kind == CONV_NGRAM:
        for w in model.spec.window_sizes:
            Z = cache[f"Z{w}"]
            A = np.maximum(Z, 0.0)
            for f in range(Z.shape[1]):
                col = np.sort(A[:, f])
                top = col[-1]
                if top > 0.0:
                    margins.append(float(top if col.size == 1 else min(top, top - col[-2])))
                else:
                    margins.append(float(-Z[:, f].max()))
    return min(margins)


def make_piece(pid, tokens, entities=(), label=0, timestamp=0):
    return NewsPiece(pid, tuple(tokens), tuple(entities), label, timestamp)


@pytest.fixture
def rng():
    return np.random.default_rng(0)
