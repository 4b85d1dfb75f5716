"""Small differentiable text encoders with hand-written gradients and Adam.

Two scalar-logit encoders satisfy the detector contract: a mean-pooled
bag-of-embeddings MLP and an n-gram convolution encoder with per-window max
pooling. All parameters of a model live in one flat float64 vector; a layout
object maps named tensors into slices of it, which keeps finite-difference
checks and optimizer state trivial.
"""

import math
from dataclasses import dataclass

import numpy as np

BAG_OF_EMBEDDINGS = "bag_of_embeddings_mlp"
CONV_NGRAM = "conv_ngram"
ENCODER_KINDS = (BAG_OF_EMBEDDINGS, CONV_NGRAM)

MAX_SEQ_LEN = 170  # default truncation applied by callers before forward

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8

PROB_FLOOR = 1e-12


class ModelError(ValueError):
    """Invalid model configuration, input, or a diverged computation."""


def sigmoid(z):
    if z >= 0:
        return 1.0 / (1.0 + math.exp(-z))
    ez = math.exp(z)
    return ez / (1.0 + ez)


def binary_cross_entropy(prob, label, floor=PROB_FLOOR):
    """-y log p - (1-y) log(1-p) with p clamped away from {0, 1}."""
    p = min(max(prob, floor), 1.0 - floor)
    return -math.log(p) if label == 1 else -math.log(1.0 - p)


@dataclass(frozen=True)
class EncoderSpec:
    """Architecture knobs for one scalar-logit encoder.

    window_sizes and n_filters only apply to the conv_ngram kind; n_filters
    is the number of convolution channels per window size.
    """

    kind: str
    embed_dim: int = 64
    hidden_dim: int = 384
    window_sizes: tuple[int, ...] = (1, 2, 3, 5, 10)
    n_filters: int = 16
    activation: str = "relu"

    def __post_init__(self):
        object.__setattr__(self, "window_sizes", tuple(int(w) for w in self.window_sizes))
        if self.kind not in ENCODER_KINDS:
            raise ModelError(f"unknown encoder kind {self.kind!r}")
        if self.embed_dim < 1 or self.hidden_dim < 1:
            raise ModelError("embed_dim and hidden_dim must be positive")
        if self.activation != "relu":
            raise ModelError("only relu activation is supported")
        if self.kind == CONV_NGRAM:
            if not self.window_sizes or any(w < 1 for w in self.window_sizes):
                raise ModelError("window sizes must be positive integers")
            if len(set(self.window_sizes)) != len(self.window_sizes):
                raise ModelError("window sizes must be distinct")
            if self.n_filters < 1:
                raise ModelError("n_filters must be positive")

    def to_payload(self):
        return {
            "kind": self.kind,
            "embed_dim": self.embed_dim,
            "hidden_dim": self.hidden_dim,
            "window_sizes": list(self.window_sizes),
            "n_filters": self.n_filters,
            "activation": self.activation,
        }

    @classmethod
    def from_payload(cls, payload):
        return cls(
            kind=payload["kind"],
            embed_dim=int(payload.get("embed_dim", 64)),
            hidden_dim=int(payload.get("hidden_dim", 384)),
            window_sizes=tuple(payload.get("window_sizes", (1, 2, 3, 5, 10))),
            n_filters=int(payload.get("n_filters", 16)),
            activation=payload.get("activation", "relu"),
        )


class ParamLayout:
    """Named tensor shapes packed into one flat parameter vector."""

    def __init__(self, shapes):
        self.shapes = dict(shapes)
        self.offsets = {}
        size = 0
        for name, shape in self.shapes.items():
            self.offsets[name] = size
            size += int(np.prod(shape))
        self.size = size

    def view(self, flat, name):
        shape = self.shapes[name]
        off = self.offsets[name]
        return flat[off : off + int(np.prod(shape))].reshape(shape)


def _build_layout(spec, vocab_size):
    shapes = {"embed": (vocab_size, spec.embed_dim)}
    if spec.kind == CONV_NGRAM:
        for w in spec.window_sizes:
            shapes[f"conv{w}_w"] = (spec.n_filters, w * spec.embed_dim)
            shapes[f"conv{w}_b"] = (spec.n_filters,)
        feat_dim = spec.n_filters * len(spec.window_sizes)
    else:
        feat_dim = spec.embed_dim
    shapes["hidden_w"] = (spec.hidden_dim, feat_dim)
    shapes["hidden_b"] = (spec.hidden_dim,)
    shapes["out_w"] = (spec.hidden_dim,)
    shapes["out_b"] = (1,)
    return ParamLayout(shapes)


def _init_params(layout, rng):
    # embeddings uniform(-0.1, 0.1); dense/conv weights scaled normal
    # (std = sqrt(2 / fan_in)); biases zero
    flat = np.zeros(layout.size, dtype=np.float64)
    for name, shape in layout.shapes.items():
        v = layout.view(flat, name)
        if name == "embed":
            v[:] = rng.uniform(-0.1, 0.1, size=shape)
        elif name.endswith("_b"):
            continue
        else:
            fan_in = shape[-1] if len(shape) > 1 else shape[0]
            v[:] = rng.normal(0.0, math.sqrt(2.0 / fan_in), size=shape)
    return flat


class ScalarModel:
    """A scalar-logit encoder: architecture spec + vocabulary + flat parameters."""

    def __init__(self, spec, vocab, params=None, seed=0):
        self.spec = spec
        self.vocab = vocab
        self.layout = _build_layout(spec, vocab.size)
        if params is None:
            params = _init_params(self.layout, np.random.default_rng(seed))
        params = np.asarray(params, dtype=np.float64)
        if params.shape != (self.layout.size,):
            raise ModelError(f"parameter vector must have length {self.layout.size}, got {params.shape}")
        self.params = params

    @property
    def num_params(self):
        return self.layout.size

    def copy(self):
        return ScalarModel(self.spec, self.vocab, self.params.copy())

    def _clean_ids(self, token_ids):
        ids = np.asarray(token_ids, dtype=np.intp).ravel()
        if ids.size == 0:
            raise ModelError("cannot run the encoder on an empty token sequence")
        oov = (ids < 0) | (ids >= self.vocab.size)
        if oov.any():
            ids = np.where(oov, self.vocab.unk_id, ids)
        if self.spec.kind == CONV_NGRAM:
            need = max(self.spec.window_sizes)
            if ids.size < need:
                ids = np.concatenate([ids, np.full(need - ids.size, self.vocab.pad_id, dtype=np.intp)])
        return ids

    def forward(self, token_ids):
        """Scalar logit for one encoded sequence (pure function of params and input)."""
        return self._forward_cache(token_ids)[0]

    def _forward_cache(self, token_ids):
        ids = self._clean_ids(token_ids)
        p, layout = self.params, self.layout
        X = layout.view(p, "embed")[ids]
        cache = {"ids": ids, "X": X}
        if self.spec.kind == BAG_OF_EMBEDDINGS:
            feat = X.mean(axis=0)
        else:
            feats = []
            for w in self.spec.window_sizes:
                n_pos = X.shape[0] - w + 1
                M = np.lib.stride_tricks.sliding_window_view(X, (w, X.shape[1])).reshape(n_pos, -1)
                Z = M @ layout.view(p, f"conv{w}_w").T + layout.view(p, f"conv{w}_b")
                A = np.maximum(Z, 0.0)
                arg = A.argmax(axis=0)
                feats.append(A[arg, np.arange(A.shape[1])])
                cache[f"M{w}"] = M
                cache[f"Z{w}"] = Z
                cache[f"arg{w}"] = arg
            feat = np.concatenate(feats)
        z1 = layout.view(p, "hidden_w") @ feat + layout.view(p, "hidden_b")
        h = np.maximum(z1, 0.0)
        logit = float(layout.view(p, "out_w") @ h + layout.view(p, "out_b")[0])
        cache["feat"] = feat
        cache["z1"] = z1
        cache["h"] = h
        return logit, cache

    def backward(self, token_ids, upstream_grad):
        """d(logit)/d(params) scaled by upstream_grad, as a flat vector."""
        _, cache = self._forward_cache(token_ids)
        return self._backward_from_cache(cache, upstream_grad)

    def _backward_from_cache(self, cache, upstream_grad):
        g = float(upstream_grad)
        p, layout = self.params, self.layout
        grads = np.zeros_like(p)
        feat, z1, h = cache["feat"], cache["z1"], cache["h"]
        layout.view(grads, "out_b")[0] = g
        layout.view(grads, "out_w")[:] = g * h
        dz1 = (g * layout.view(p, "out_w")) * (z1 > 0.0)
        layout.view(grads, "hidden_b")[:] = dz1
        layout.view(grads, "hidden_w")[:] = np.outer(dz1, feat)
        dfeat = layout.view(p, "hidden_w").T @ dz1
        ids, X = cache["ids"], cache["X"]
        demb = layout.view(grads, "embed")
        if self.spec.kind == BAG_OF_EMBEDDINGS:
            np.add.at(demb, ids, dfeat / ids.size)
        else:
            dX = np.zeros_like(X)
            F = self.spec.n_filters
            off = 0
            for w in self.spec.window_sizes:
                dpool = dfeat[off : off + F]
                off += F
                Z, arg, M = cache[f"Z{w}"], cache[f"arg{w}"], cache[f"M{w}"]
                # gradient flows through the max-pooled position of each
                # filter, gated by the conv relu
                dZsel = np.where(Z[arg, np.arange(F)] > 0.0, dpool, 0.0)
                conv_w = layout.view(p, f"conv{w}_w")
                dW = layout.view(grads, f"conv{w}_w")
                db = layout.view(grads, f"conv{w}_b")
                for f in range(F):
                    if dZsel[f] == 0.0:
                        continue
                    i = int(arg[f])
                    dW[f] += dZsel[f] * M[i]
                    db[f] += dZsel[f]
                    dX[i : i + w] += (dZsel[f] * conv_w[f]).reshape(w, -1)
            np.add.at(demb, ids, dX)
        return grads

    def to_payload(self):
        return {
            "format_version": 1,
            "kind": "scalar_model",
            "spec": self.spec.to_payload(),
            "vocab": self.vocab.to_payload(),
            "params": self.params.tolist(),
        }

    @classmethod
    def from_payload(cls, payload):
        from .vocab import Vocabulary

        if payload.get("format_version") != 1:
            raise ModelError(f"unsupported checkpoint format_version {payload.get('format_version')!r}")
        if payload.get("kind") != "scalar_model":
            raise ModelError(f"expected a scalar_model payload, got {payload.get('kind')!r}")
        return cls(
            EncoderSpec.from_payload(payload["spec"]),
            Vocabulary.from_payload(payload["vocab"]),
            params=np.asarray(payload["params"], dtype=np.float64),
        )


@dataclass
class AdamState:
    """First and second moment accumulators for one flat parameter vector."""

    m: np.ndarray
    v: np.ndarray

    @classmethod
    def zeros(cls, n):
        return cls(np.zeros(n, dtype=np.float64), np.zeros(n, dtype=np.float64))


def adam_step(params, grads, state, lr, t):
    """One bias-corrected Adam update; returns new params, mutates state moments.

    `t` is the 1-based step count. Non-finite gradients abort training
    rather than silently corrupting the parameters.
    """
    if lr <= 0:
        raise ModelError("learning rate must be positive")
    if t < 1:
        raise ModelError("step count must be >= 1")
    grads = np.asarray(grads, dtype=np.float64)
    if grads.shape != params.shape:
        raise ModelError("gradient/parameter shape mismatch")
    if not np.all(np.isfinite(grads)):
        raise ModelError("non-finite gradient; training diverged")
    state.m *= ADAM_BETA1
    state.m += (1.0 - ADAM_BETA1) * grads
    state.v *= ADAM_BETA2
    state.v += (1.0 - ADAM_BETA2) * np.square(grads)
    m_hat = state.m / (1.0 - ADAM_BETA1**t)
    v_hat = state.v / (1.0 - ADAM_BETA2**t)
    return params - lr * m_hat / (np.sqrt(v_hat) + ADAM_EPS)
