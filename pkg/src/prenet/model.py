"""Two-stream ordinal regression scorer and its ablation variants.

A shared feature stack maps each pair member to a hidden representation;
a linear head scores the concatenated pair. Variants:

- ``prenet``: ternary targets (aa/au/uu), one hidden layer.
- ``bor``: same network, binary targets (aa and au merged to au).
- ``osnet``: one stream, single instances, targets au (from A) / uu.
- ``ldm``: no hidden layers, linear map on the concatenated raw pair.
- ``a2h``: ternary targets, three hidden layers.

Gradients are exact analytic subgradients of the batch objective
(mean absolute error plus L2 on weights); training uses RMSprop.
"""

from __future__ import annotations

import base64
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import NumericError
from .ndcore import glorot_uniform, matmul, relu
from .pairgen import InstanceBatch, OrdinalLabels, PairBatch, PairClass

VARIANTS = ("prenet", "bor", "osnet", "ldm", "a2h")
PAIR_VARIANTS = frozenset({"prenet", "bor", "ldm", "a2h"})

_HIDDEN_LAYER_COUNT = {"prenet": 1, "bor": 1, "osnet": 1, "ldm": 0, "a2h": 3}


def default_hidden_dims(variant: str) -> tuple[int, ...]:
    return {"prenet": (20,), "bor": (20,), "osnet": (20,), "ldm": (), "a2h": (20, 20, 20)}[
        variant
    ]


@dataclass(frozen=True)
class ModelConfig:
    variant: str
    input_dim: int
    hidden_dims: tuple[int, ...] | None = None
    l2_lambda: float = 0.01
    labels: OrdinalLabels = field(default_factory=OrdinalLabels)

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}, expected one of {VARIANTS}")
        if self.input_dim < 1:
            raise ValueError(f"input_dim must be >= 1, got {self.input_dim}")
        dims = self.hidden_dims
        if dims is None:
            dims = default_hidden_dims(self.variant)
        dims = tuple(int(d) for d in dims)
        expected = _HIDDEN_LAYER_COUNT[self.variant]
        if len(dims) != expected:
            raise ValueError(
                f"variant {self.variant!r} requires exactly {expected} hidden "
                f"layer(s), got dims {dims}"
            )
        if any(d < 1 for d in dims):
            raise ValueError(f"hidden dims must be >= 1, got {dims}")
        if self.l2_lambda < 0:
            raise ValueError(f"l2_lambda must be >= 0, got {self.l2_lambda}")
        object.__setattr__(self, "hidden_dims", dims)

    @property
    def is_pairwise(self) -> bool:
        return self.variant in PAIR_VARIANTS

    @property
    def feature_dim(self) -> int:
        """Width of one stream's representation fed to the linear head."""
        return self.hidden_dims[-1] if self.hidden_dims else self.input_dim

    @property
    def head_dim(self) -> int:
        return 2 * self.feature_dim if self.is_pairwise else self.feature_dim


@dataclass
class PReNetParams:
    """All trainable parameters. The hidden stack is stored once and
    shared by both streams; there is no second copy to drift."""

    hidden_weights: list[np.ndarray]
    hidden_biases: list[np.ndarray]
    output_weights: np.ndarray
    output_bias: float

    def copy(self) -> "PReNetParams":
        return PReNetParams(
            [w.copy() for w in self.hidden_weights],
            [b.copy() for b in self.hidden_biases],
            self.output_weights.copy(),
            float(self.output_bias),
        )

    @property
    def n_params(self) -> int:
        return (
            sum(w.size for w in self.hidden_weights)
            + sum(b.size for b in self.hidden_biases)
            + self.output_weights.size
            + 1
        )

    def all_finite(self) -> bool:
        return (
            all(np.all(np.isfinite(w)) for w in self.hidden_weights)
            and all(np.all(np.isfinite(b)) for b in self.hidden_biases)
            and bool(np.all(np.isfinite(self.output_weights)))
            and np.isfinite(self.output_bias)
        )


@dataclass
class Model:
    config: ModelConfig
    params: PReNetParams


def build_variant(config: ModelConfig, rng: np.random.Generator) -> Model:
    """Initialize a variant: Glorot-uniform weights (hidden stack in
    order, then output head), zero biases."""
    dims = (config.input_dim, *config.hidden_dims)
    hidden_weights = [
        glorot_uniform(dims[i], dims[i + 1], rng) for i in range(len(config.hidden_dims))
    ]
    hidden_biases = [np.zeros(d) for d in config.hidden_dims]
    output_weights = glorot_uniform(config.head_dim, 1, rng).ravel()
    params = PReNetParams(hidden_weights, hidden_biases, output_weights, 0.0)
    return Model(config, params)


def _forward_stack(
    params: PReNetParams, x: np.ndarray
) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Run the shared stack; returns (activations incl. input, preacts)."""
    acts = [x]
    pres = []
    for w, b in zip(params.hidden_weights, params.hidden_biases):
        pre = matmul(acts[-1], w) + b
        pres.append(pre)
        acts.append(relu(pre))
    return acts, pres


def features(params: PReNetParams, x: np.ndarray) -> np.ndarray:
    """Shared feature map applied to a batch of rows (identity when the
    stack has no hidden layers)."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    return _forward_stack(params, x)[0][-1]


def feature(params: PReNetParams, x: np.ndarray) -> np.ndarray:
    """Feature vector of a single instance."""
    return features(params, x)[0]


def forward_pairs(model: Model, left: np.ndarray, right: np.ndarray) -> np.ndarray:
    """Scores of a batch of ordered pairs: both members go through the
    same shared stack; the head is linear in the concatenated features."""
    if not model.config.is_pairwise:
        raise ValueError(f"variant {model.config.variant!r} does not score pairs")
    left = np.atleast_2d(np.asarray(left, dtype=np.float64))
    right = np.atleast_2d(np.asarray(right, dtype=np.float64))
    p = model.params
    zl = features(p, left)
    zr = features(p, right)
    m = model.config.feature_dim
    wl = p.output_weights[:m]
    wr = p.output_weights[m:]
    s = matmul(zl, wl[:, None]).ravel() + matmul(zr, wr[:, None]).ravel()
    return s + p.output_bias


def forward_pair(model: Model, x_i: np.ndarray, x_j: np.ndarray) -> float:
    """Score of one ordered pair."""
    return float(forward_pairs(model, np.atleast_2d(x_i), np.atleast_2d(x_j))[0])


def forward_singles(model: Model, x: np.ndarray) -> np.ndarray:
    """Scores of single instances for the one-stream variant."""
    if model.config.is_pairwise:
        raise ValueError(f"variant {model.config.variant!r} scores pairs, not singles")
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    p = model.params
    z = features(p, x)
    return matmul(z, p.output_weights[:, None]).ravel() + p.output_bias


def pair_loss(score: float, target: float) -> float:
    """Absolute prediction error; robust to occasional mislabeled pairs."""
    return abs(target - score)


def batch_targets(config: ModelConfig, batch: PairBatch | InstanceBatch) -> np.ndarray:
    """Regression targets for a batch under the given variant; the binary
    variant merges both anomaly-bearing pair classes down to au."""
    if isinstance(batch, InstanceBatch):
        return batch.targets
    if config.variant == "bor":
        return np.where(batch.classes == PairClass.UU, config.labels.uu, config.labels.au)
    return batch.targets


def _weight_square_sum(params: PReNetParams) -> float:
    total = 0.0
    for w in params.hidden_weights:
        total += float(np.sum(w * w))
    total += float(np.sum(params.output_weights * params.output_weights))
    return total


def _batch_scores(model: Model, batch: PairBatch | InstanceBatch) -> np.ndarray:
    if isinstance(batch, InstanceBatch):
        return forward_singles(model, batch.x)
    return forward_pairs(model, batch.left, batch.right)


def batch_objective(model: Model, batch: PairBatch | InstanceBatch) -> float:
    """Mean absolute error over the batch plus l2_lambda times the sum of
    squared weights (biases excluded)."""
    if len(batch) == 0:
        raise ValueError("empty batch")
    scores = _batch_scores(model, batch)
    targets = batch_targets(model.config, batch)
    mae = float(np.mean(np.abs(targets - scores)))
    return mae + model.config.l2_lambda * _weight_square_sum(model.params)


def objective_and_gradients(
    model: Model, batch: PairBatch | InstanceBatch
) -> tuple[float, PReNetParams]:
    """One forward/backward pass; returns the objective value and exact
    subgradients shaped like the parameters.

    Subgradient conventions: d|r|/dr = 0 at r = 0 and relu' = 0 at 0.
    """
    if len(batch) == 0:
        raise ValueError("empty batch")
    cfg = model.config
    p = model.params
    targets = batch_targets(cfg, batch)
    b = targets.shape[0]
    m = cfg.feature_dim

    if isinstance(batch, InstanceBatch):
        streams = [(batch.x, p.output_weights)]
    else:
        streams = [
            (np.asarray(batch.left, dtype=np.float64), p.output_weights[:m]),
            (np.asarray(batch.right, dtype=np.float64), p.output_weights[m:]),
        ]

    stack = [_forward_stack(p, x) for x, _ in streams]
    scores = np.zeros(b)
    for (acts, _), (_, w_head) in zip(stack, streams):
        scores += matmul(acts[-1], w_head[:, None]).ravel()
    scores += p.output_bias

    residual = scores - targets
    mae = float(np.mean(np.abs(residual)))
    objective = mae + cfg.l2_lambda * _weight_square_sum(p)
    g = np.sign(residual) / b

    g_hidden_w = [np.zeros_like(w) for w in p.hidden_weights]
    g_hidden_b = [np.zeros_like(bb) for bb in p.hidden_biases]
    g_out_w = np.zeros_like(p.output_weights)
    g_out_b = float(np.sum(g))

    n_layers = len(p.hidden_weights)
    for si, ((acts, pres), (_, w_head)) in enumerate(zip(stack, streams)):
        head_grad = matmul(acts[-1].T, g[:, None]).ravel()
        if isinstance(batch, InstanceBatch):
            g_out_w += head_grad
        elif si == 0:
            g_out_w[:m] += head_grad
        else:
            g_out_w[m:] += head_grad
        if n_layers == 0:
            continue
        delta = (g[:, None] * w_head[None, :]) * (pres[-1] > 0.0)
        for layer in range(n_layers - 1, -1, -1):
            g_hidden_w[layer] += matmul(acts[layer].T, delta)
            g_hidden_b[layer] += delta.sum(axis=0)
            if layer > 0:
                delta = matmul(delta, p.hidden_weights[layer].T) * (
                    pres[layer - 1] > 0.0
                )

    lam2 = 2.0 * cfg.l2_lambda
    for layer, w in enumerate(p.hidden_weights):
        g_hidden_w[layer] += lam2 * w
    g_out_w += lam2 * p.output_weights

    grads = PReNetParams(g_hidden_w, g_hidden_b, g_out_w, g_out_b)
    return objective, grads


def batch_gradients(model: Model, batch: PairBatch | InstanceBatch) -> PReNetParams:
    """Exact subgradient of :func:`batch_objective`."""
    return objective_and_gradients(model, batch)[1]


@dataclass
class OptimizerState:
    """RMSprop state: running average of squared gradients per parameter."""

    acc_hidden_weights: list[np.ndarray]
    acc_hidden_biases: list[np.ndarray]
    acc_output_weights: np.ndarray
    acc_output_bias: float
    learning_rate: float = 0.001
    rho: float = 0.9
    eps: float = 1e-7

    @classmethod
    def for_params(
        cls,
        params: PReNetParams,
        learning_rate: float = 0.001,
        rho: float = 0.9,
        eps: float = 1e-7,
    ) -> "OptimizerState":
        if learning_rate <= 0 or not 0.0 <= rho < 1.0 or eps <= 0:
            raise ValueError("invalid RMSprop hyperparameters")
        return cls(
            [np.zeros_like(w) for w in params.hidden_weights],
            [np.zeros_like(b) for b in params.hidden_biases],
            np.zeros_like(params.output_weights),
            0.0,
            learning_rate,
            rho,
            eps,
        )


def rmsprop_step(
    params: PReNetParams, grads: PReNetParams, state: OptimizerState
) -> None:
    """Apply one RMSprop update in place:
    acc <- rho*acc + (1-rho)*g^2; p <- p - lr*g / (sqrt(acc) + eps).
    """
    if not grads.all_finite():
        raise NumericError("non-finite gradient; aborting optimization")
    lr, rho, eps = state.learning_rate, state.rho, state.eps

    def update(p: np.ndarray, g: np.ndarray, a: np.ndarray) -> None:
        a *= rho
        a += (1.0 - rho) * g * g
        p -= lr * g / (np.sqrt(a) + eps)

    for w, gw, aw in zip(params.hidden_weights, grads.hidden_weights, state.acc_hidden_weights):
        update(w, gw, aw)
    for b, gb, ab in zip(params.hidden_biases, grads.hidden_biases, state.acc_hidden_biases):
        update(b, gb, ab)
    update(params.output_weights, grads.output_weights, state.acc_output_weights)
    state.acc_output_bias = rho * state.acc_output_bias + (1.0 - rho) * grads.output_bias**2
    params.output_bias = params.output_bias - lr * grads.output_bias / (
        np.sqrt(state.acc_output_bias) + eps
    )


def params_to_vector(params: PReNetParams) -> np.ndarray:
    """Flatten parameters in a fixed order (hidden weights, hidden
    biases, output weights, output bias); inverse of
    :func:`vector_to_params`."""
    parts = [w.ravel() for w in params.hidden_weights]
    parts += [b.ravel() for b in params.hidden_biases]
    parts.append(params.output_weights.ravel())
    parts.append(np.asarray([params.output_bias]))
    return np.concatenate(parts)


def vector_to_params(vec: np.ndarray, like: PReNetParams) -> PReNetParams:
    """Unflatten a vector produced by :func:`params_to_vector`."""
    vec = np.asarray(vec, dtype=np.float64).ravel()
    if vec.size != like.n_params:
        raise ValueError(f"expected {like.n_params} entries, got {vec.size}")
    pos = 0
    hw, hb = [], []
    for w in like.hidden_weights:
        hw.append(vec[pos : pos + w.size].reshape(w.shape).copy())
        pos += w.size
    for b in like.hidden_biases:
        hb.append(vec[pos : pos + b.size].copy())
        pos += b.size
    ow = vec[pos : pos + like.output_weights.size].copy()
    pos += like.output_weights.size
    return PReNetParams(hw, hb, ow, float(vec[pos]))


# -- checkpoint container ---------------------------------------------------

_CHECKPOINT_FORMAT = "prenet-checkpoint"
_CHECKPOINT_VERSION = 1


def _encode_array(a: np.ndarray) -> dict:
    a = np.ascontiguousarray(a, dtype="<f8")
    return {
        "shape": list(a.shape),
        "dtype": "<f8",
        "data": base64.b64encode(a.tobytes()).decode("ascii"),
    }


def _decode_array(d: dict) -> np.ndarray:
    raw = np.frombuffer(base64.b64decode(d["data"]), dtype=d["dtype"])
    return raw.reshape(d["shape"]).astype(np.float64)


def save_checkpoint(
    path,
    model: Model,
    mean: np.ndarray | None = None,
    scale: np.ndarray | None = None,
    anomaly_pool: np.ndarray | None = None,
    unlabeled_pool: np.ndarray | None = None,
) -> None:
    """Write a self-describing JSON checkpoint.

    Arrays are stored as base64-encoded little-endian float64 bytes, so
    save -> load round-trips bit-exactly and repeated saves of the same
    model are byte-identical. Standardization statistics and the A/U
    partner pools may be embedded so a checkpoint alone suffices to
    score new data.
    """
    cfg = model.config
    doc = {
        "format": _CHECKPOINT_FORMAT,
        "version": _CHECKPOINT_VERSION,
        "variant": cfg.variant,
        "input_dim": cfg.input_dim,
        "hidden_dims": list(cfg.hidden_dims),
        "l2_lambda": cfg.l2_lambda,
        "labels": [cfg.labels.aa, cfg.labels.au, cfg.labels.uu],
        "standardization": None
        if mean is None
        else {"mean": _encode_array(mean), "scale": _encode_array(scale)},
        "pools": None
        if anomaly_pool is None
        else {
            "anomaly": _encode_array(anomaly_pool),
            "unlabeled": _encode_array(unlabeled_pool),
        },
        "params": {
            "hidden_weights": [_encode_array(w) for w in model.params.hidden_weights],
            "hidden_biases": [_encode_array(b) for b in model.params.hidden_biases],
            "output_weights": _encode_array(model.params.output_weights),
            "output_bias": model.params.output_bias,
        },
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, sort_keys=True, indent=1)
        fh.write("\n")


def load_checkpoint(path) -> tuple[Model, dict]:
    """Read a checkpoint; returns the model plus an extras dict with
    ``mean``/``scale`` and ``anomaly_pool``/``unlabeled_pool`` when present."""
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("format") != _CHECKPOINT_FORMAT:
        raise ValueError(f"{path} is not a {_CHECKPOINT_FORMAT} file")
    cfg = ModelConfig(
        variant=doc["variant"],
        input_dim=doc["input_dim"],
        hidden_dims=tuple(doc["hidden_dims"]),
        l2_lambda=doc["l2_lambda"],
        labels=OrdinalLabels(*doc["labels"]),
    )
    pd = doc["params"]
    params = PReNetParams(
        [_decode_array(w) for w in pd["hidden_weights"]],
        [_decode_array(b).ravel() for b in pd["hidden_biases"]],
        _decode_array(pd["output_weights"]).ravel(),
        float(pd["output_bias"]),
    )
    extras: dict = {"mean": None, "scale": None, "anomaly_pool": None, "unlabeled_pool": None}
    if doc.get("standardization"):
        extras["mean"] = _decode_array(doc["standardization"]["mean"]).ravel()
        extras["scale"] = _decode_array(doc["standardization"]["scale"]).ravel()
    if doc.get("pools"):
        extras["anomaly_pool"] = _decode_array(doc["pools"]["anomaly"])
        extras["unlabeled_pool"] = _decode_array(doc["pools"]["unlabeled"])
    return Model(cfg, params), extras
