"""Pathway-masked sparse network with one sigmoid output head per layer.

Each masked layer stores its weights as a CSR matrix sharing the sparsity
pattern of its mask, so connections absent from the hierarchy do not exist
as parameters at all. Backpropagation is written out by hand for this
fixed topology.

Layer k computes ``h_k = act(h_{k-1} @ W_k + b_k)`` and head k computes
``p_k = sigmoid(h_k . w_k + c_k)``. The network output is the convex
combination ``sum_k head_weights[k] * p_k``.
"""

from __future__ import annotations

import copy
import json
import logging
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from . import metrics
from .dataset import Dataset, LocusId, split
from .errors import ConstraintViolation, DivergenceError, ShapeError
from .pathway import MaskStack

log = logging.getLogger(__name__)

_EPS = 1e-12


def sigmoid(x):
    out = np.empty_like(x, dtype=np.float64)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


ACTIVATIONS = {
    "tanh": (np.tanh, lambda z, h: 1.0 - h * h),
    "linear": (lambda z: z, lambda z, h: np.ones_like(z)),
    "sigmoid": (sigmoid, lambda z, h: h * (1.0 - h)),
}


class MaskedLayer:
    """Sparse weight matrix constrained to ``mask``'s pattern, plus a bias."""

    def __init__(self, mask: sp.csr_matrix, weights=None, bias=None):
        mask = sp.csr_matrix(mask, dtype=np.float64, copy=True)
        mask.sum_duplicates()
        mask.sort_indices()
        mask.data[:] = 1.0
        self.mask = mask
        self.W = mask.copy()
        self.W.data[:] = 0.0 if weights is None else np.asarray(weights, dtype=np.float64)
        self.WT = self.W.T.tocsr()
        self._perm = self._transpose_permutation()
        self.b = np.zeros(mask.shape[1]) if bias is None else np.array(bias, dtype=np.float64)
        self.rows = np.repeat(np.arange(mask.shape[0]), np.diff(mask.indptr))
        self.cols = mask.indices.astype(np.intp)

    def _transpose_permutation(self):
        # Position in WT.data of every entry of W.data, so both stay in sync
        # without rebuilding the transpose on every update.
        probe = self.W.copy()
        probe.data = np.arange(probe.nnz, dtype=np.float64)
        return probe.T.tocsr().data.astype(np.intp)

    @property
    def shape(self):
        return self.mask.shape

    @property
    def weights(self) -> np.ndarray:
        return self.W.data

    def sync(self):
        self.WT.data[:] = self.W.data[self._perm]

    def matmul(self, h):
        """``h @ W`` for a dense batch ``h`` of shape (n, in)."""
        return np.asarray((self.WT @ h.T).T)

    def rmatmul(self, g):
        """``g @ W.T`` for a dense batch ``g`` of shape (n, out)."""
        return np.asarray((self.W @ g.T).T)

    def dense_weight(self):
        return self.W.toarray()

    def copy(self):
        return MaskedLayer(self.mask, self.W.data.copy(), self.b.copy())


@dataclass
class Head:
    w: np.ndarray
    b: float = 0.0


@dataclass
class TrainConfig:
    learning_rate: float = 1e-3
    epochs: int = 100
    batch_size: int = 64
    seed: int = 0
    class_weight_positive: float | None = None
    early_stop_patience: int = 10
    validation_fraction: float = 0.1
    early_stop_metric: str = "auc"
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be > 0")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not 0.0 <= self.validation_fraction <= 0.5:
            raise ValueError("validation_fraction must lie in [0, 0.5]")
        if self.early_stop_metric not in ("auc", "recall", "loss"):
            raise ValueError(f"unknown early_stop_metric {self.early_stop_metric!r}")
        if self.class_weight_positive is not None and not self.class_weight_positive > 0:
            raise ValueError("class_weight_positive must be > 0")

    def replace(self, **changes) -> "TrainConfig":
        d = asdict(self)
        d.update(changes)
        return TrainConfig(**d)


@dataclass
class TrainReport:
    losses: list = field(default_factory=list)
    val_recall: list = field(default_factory=list)
    val_auc: list = field(default_factory=list)
    stopped_epoch: int = 0
    best_epoch: int = 0
    wall_time: float = 0.0
    class_weight_positive: float = 1.0


class MaskedNetwork:
    """The P-NET style model: masked layers, per-layer heads, weighted head average."""

    def __init__(self, masks: MaskStack, layers, heads, head_weights=None,
                 activation="tanh", head_activation="sigmoid"):
        if len(layers) != masks.depth or len(heads) != len(layers):
            raise ShapeError("need one layer and one head per mask")
        for k, (layer, mask) in enumerate(zip(layers, masks.masks)):
            if layer.shape != mask.shape:
                raise ShapeError(f"layer {k} shape {layer.shape} != mask shape {mask.shape}")
        if activation not in ACTIVATIONS or head_activation not in ACTIVATIONS:
            raise ValueError("unknown activation")
        self.masks = masks
        self.layers = list(layers)
        self.heads = list(heads)
        if head_weights is None:
            head_weights = np.full(len(layers), 1.0 / len(layers))
        head_weights = np.asarray(head_weights, dtype=np.float64)
        if np.any(head_weights < 0) or abs(head_weights.sum() - 1.0) > 1e-12:
            raise ValueError("head_weights must be non-negative and sum to 1")
        self.head_weights = head_weights
        self.activation = activation
        self.head_activation = head_activation

    @property
    def loci(self) -> tuple:
        return self.masks.loci

    @property
    def depth(self) -> int:
        return len(self.layers)

    @property
    def input_width(self) -> int:
        return self.layers[0].shape[0]

    def copy(self) -> "MaskedNetwork":
        return MaskedNetwork(
            self.masks,
            [layer.copy() for layer in self.layers],
            [Head(h.w.copy(), float(h.b)) for h in self.heads],
            self.head_weights.copy(),
            self.activation,
            self.head_activation,
        )

    # -- flat parameter view -------------------------------------------------
    # Layout: for each layer k, W_k nonzeros (CSR order) then b_k; then for
    # each head k, w_k then c_k.

    def parameter_arrays(self):
        arrays = []
        for layer in self.layers:
            arrays += [layer.W.data, layer.b]
        for head in self.heads:
            arrays.append(head.w)
        return arrays

    def get_params(self) -> np.ndarray:
        parts = []
        for layer in self.layers:
            parts += [layer.W.data, layer.b]
        for head in self.heads:
            parts += [head.w, [head.b]]
        return np.concatenate(parts)

    def set_params(self, flat):
        flat = np.asarray(flat, dtype=np.float64)
        i = 0
        for layer in self.layers:
            for arr in (layer.W.data, layer.b):
                arr[:] = flat[i:i + arr.size]
                i += arr.size
            layer.sync()
        for head in self.heads:
            head.w[:] = flat[i:i + head.w.size]
            i += head.w.size
            head.b = float(flat[i])
            i += 1
        if i != flat.size:
            raise ShapeError(f"expected {i} parameters, got {flat.size}")

    # -- forward ---------------------------------------------------------------

    def trace(self, X):
        """Forward pass keeping pre-activations ``z``, activations ``h``, head logits ``u`` and outputs ``p``."""
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.input_width:
            raise ShapeError(f"expected (n, {self.input_width}) input, got {X.shape}")
        act = ACTIVATIONS[self.activation][0]
        head_act = ACTIVATIONS[self.head_activation][0]
        zs, hs, us, ps = [], [], [], []
        h = X
        for layer, head in zip(self.layers, self.heads):
            z = layer.matmul(h) + layer.b
            h = act(z)
            u = h @ head.w + head.b
            zs.append(z)
            hs.append(h)
            us.append(u)
            ps.append(head_act(u))
        return zs, hs, us, ps

    def head_outputs(self, X) -> np.ndarray:
        """(n, depth) matrix of per-head outputs."""
        return np.column_stack(self.trace(X)[3])

    def predict_proba(self, X) -> np.ndarray:
        return self.head_outputs(X) @ self.head_weights


def init_network(masks: MaskStack, seed: int, activation="tanh", head_activation="sigmoid",
                 head_weights=None) -> MaskedNetwork:
    """Uniform init with bound ``1/sqrt(fan_in)`` per column; fan-in counts mask nonzeros."""
    rng = np.random.default_rng(seed)
    layers, heads = [], []
    for mask in masks.masks:
        layer = MaskedLayer(mask)
        fan_in = np.asarray(layer.mask.sum(axis=0)).ravel()
        bound = 1.0 / np.sqrt(np.maximum(fan_in, 1.0))
        layer.W.data[:] = rng.uniform(-1.0, 1.0, layer.W.nnz) * bound[layer.cols]
        layer.sync()
        layers.append(layer)
        width = mask.shape[1]
        heads.append(Head(rng.uniform(-1.0, 1.0, width) / np.sqrt(width), 0.0))
    return MaskedNetwork(masks, layers, heads, head_weights, activation, head_activation)


def forward(net: MaskedNetwork, x):
    """Single-sample forward pass: ``(head_outputs, final)``."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.size != net.input_width:
        raise ShapeError(f"expected a vector of length {net.input_width}, got shape {x.shape}")
    heads = net.head_outputs(x[None, :])[0]
    return heads, float(heads @ net.head_weights)


def _check_loci(net: MaskedNetwork, ds: Dataset):
    if tuple(ds.loci) == tuple(net.loci):
        return
    have = set(ds.loci)
    missing = [l for l in net.loci if l not in have]
    if missing:
        raise ConstraintViolation(missing)
    raise ConstraintViolation(
        [], f"{ds.name}: loci do not match the network's input ordering "
            f"({ds.m} columns vs {net.input_width}); restrict the dataset first",
    )


def predict(net: MaskedNetwork, ds: Dataset) -> np.ndarray:
    _check_loci(net, ds)
    return net.predict_proba(ds.X)


def count_params(net: MaskedNetwork) -> dict:
    per_layer = [int(layer.W.nnz + layer.b.size) for layer in net.layers]
    heads = [int(h.w.size + 1) for h in net.heads]
    return {
        "total": sum(per_layer) + sum(heads),
        "input_layer": per_layer[0],
        "input_connections": int(net.layers[0].W.nnz),
        "per_layer": per_layer,
        "heads": heads,
    }


# ---------------------------------------------------------------------------
# loss and gradients


def _sample_weights(y, class_weight_positive):
    return np.where(y == 1, class_weight_positive, 1.0)


def loss(net: MaskedNetwork, X, y, class_weight_positive=1.0) -> float:
    """Mean over heads of the class-weighted binary cross-entropy (averaged over samples)."""
    if net.head_activation != "sigmoid":
        raise ValueError("the training loss needs sigmoid heads")
    y = np.asarray(y, dtype=np.float64)
    c = _sample_weights(y, class_weight_positive)
    total = 0.0
    for u in net.trace(X)[2]:
        # log(1 + exp(-u)) for y=1 and log(1 + exp(u)) for y=0
        total += np.mean(c * np.logaddexp(0.0, np.where(y == 1, -u, u)))
    return float(total / net.depth)


def gradients(net: MaskedNetwork, X, y, class_weight_positive=1.0):
    """Loss and its gradient as a list of arrays aligned with ``parameter_arrays()``.

    Head biases are returned as length-1 arrays appended after the other
    arrays (one per head, in layer order).
    """
    if net.head_activation != "sigmoid":
        raise ValueError("the training loss needs sigmoid heads")
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = X.shape[0]
    c = _sample_weights(y, class_weight_positive)
    zs, hs, us, ps = net.trace(X)
    L = net.depth
    dact = ACTIVATIONS[net.activation][1]

    value = 0.0
    g_layer = [None] * L
    g_head = [None] * L
    g_head_b = [None] * L
    g_h = np.zeros_like(hs[-1])
    for k in range(L - 1, -1, -1):
        u, p = us[k], ps[k]
        value += np.mean(c * np.logaddexp(0.0, np.where(y == 1, -u, u)))
        du = c * (p - y) / (n * L)
        head = net.heads[k]
        g_head[k] = hs[k].T @ du
        g_head_b[k] = np.array([du.sum()])
        g_h = g_h + np.outer(du, head.w)
        g_z = g_h * dact(zs[k], hs[k])
        layer = net.layers[k]
        h_prev = X if k == 0 else hs[k - 1]
        g_w = np.einsum("ij,ij->j", h_prev[:, layer.rows], g_z[:, layer.cols])
        g_layer[k] = (g_w, g_z.sum(axis=0))
        if k > 0:
            g_h = layer.rmatmul(g_z)
    grads = []
    for g_w, g_b in g_layer:
        grads += [g_w, g_b]
    grads += g_head
    grads += g_head_b
    return float(value / L), grads


def flat_gradient(net, X, y, class_weight_positive=1.0) -> np.ndarray:
    """Gradient in the ``get_params`` layout."""
    _, grads = gradients(net, X, y, class_weight_positive)
    L = net.depth
    parts = grads[: 2 * L]
    for k in range(L):
        parts += [grads[2 * L + k], grads[3 * L + k]]
    return np.concatenate(parts)


# ---------------------------------------------------------------------------
# training


class _Adam:
    def __init__(self, arrays, lr, beta1, beta2, eps):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = [np.zeros_like(a) for a in arrays]
        self.v = [np.zeros_like(a) for a in arrays]
        self.t = 0

    def steps(self, grads):
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        out = []
        for i, g in enumerate(grads):
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g
            out.append(self.lr * (self.m[i] / c1) / (np.sqrt(self.v[i] / c2) + self.eps))
        return out


def _apply(net: MaskedNetwork, deltas):
    L = net.depth
    for k, layer in enumerate(net.layers):
        layer.W.data -= deltas[2 * k]
        layer.b -= deltas[2 * k + 1]
        layer.sync()
    for k, head in enumerate(net.heads):
        head.w -= deltas[2 * L + k]
        head.b = float(head.b - deltas[3 * L + k][0])


def _monitor_value(metric, scores, y, cw):
    if metric == "loss":
        c = _sample_weights(y, cw)
        s = np.clip(scores, _EPS, 1.0 - _EPS)
        return -float(np.mean(c * (y * np.log(s) + (1 - y) * np.log(1 - s))))
    if metric == "recall":
        return -metrics.recall(scores, y)
    return -metrics.auc(scores, y)


def train(net: MaskedNetwork, train_ds: Dataset, cfg: TrainConfig, check_masks: bool = False):
    """Fit a copy of ``net`` by mini-batch Adam; returns ``(trained, report)``.

    A stratified validation split (``cfg.validation_fraction``) drives early
    stopping on ``cfg.early_stop_metric``; the best epoch's weights are kept.
    ``check_masks`` re-verifies after every epoch that no weight exists
    outside its mask.
    """
    start = time.perf_counter()
    _check_loci(net, train_ds)
    train_ds.require_both_classes("training")
    if net.head_activation != "sigmoid":
        raise ValueError("training needs sigmoid heads")
    net = net.copy()

    fit_ds, val_ds = train_ds, None
    if cfg.validation_fraction > 0 and cfg.early_stop_patience > 0:
        fit_ds, val_ds = split(train_ds, cfg.validation_fraction, seed=cfg.seed + 7919)
    X, y = fit_ds.X, fit_ds.y.astype(np.float64)
    cw = cfg.class_weight_positive
    if cw is None:
        cw = fit_ds.n_negative / fit_ds.n_positive

    rng = np.random.default_rng(cfg.seed)
    opt = _Adam(net.parameter_arrays() + [np.zeros(1)] * net.depth,
                cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.adam_eps)
    report = TrainReport(class_weight_positive=float(cw))
    best, best_params, since_best = np.inf, None, 0

    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(X.shape[0])
        batch_losses, sizes = [], []
        for s in range(0, X.shape[0], cfg.batch_size):
            idx = order[s:s + cfg.batch_size]
            value, grads = gradients(net, X[idx], y[idx], cw)
            if not np.isfinite(value) or not all(np.all(np.isfinite(g)) for g in grads):
                raise DivergenceError(
                    f"non-finite loss at epoch {epoch} (learning rate {cfg.learning_rate})",
                    epoch=epoch, learning_rate=cfg.learning_rate,
                )
            _apply(net, opt.steps(grads))
            batch_losses.append(value)
            sizes.append(idx.size)
        epoch_loss = float(np.average(batch_losses, weights=sizes))
        report.losses.append(epoch_loss)
        report.stopped_epoch = epoch
        if check_masks:
            assert_masked(net)

        if val_ds is not None:
            scores = net.predict_proba(val_ds.X)
            yv = val_ds.y.astype(np.float64)
            report.val_recall.append(metrics.recall(scores, yv))
            report.val_auc.append(metrics.auc(scores, yv))
            current = _monitor_value(cfg.early_stop_metric, scores, yv, cw)
            if current < best:
                best, best_params, since_best = current, net.get_params(), 0
                report.best_epoch = epoch
            else:
                since_best += 1
                if since_best >= cfg.early_stop_patience:
                    break
        else:
            report.best_epoch = epoch

    if best_params is not None:
        net.set_params(best_params)
    report.wall_time = time.perf_counter() - start
    log.debug("trained %d epochs (best %d) in %.2fs", report.stopped_epoch, report.best_epoch, report.wall_time)
    return net, report


def assert_masked(net: MaskedNetwork):
    """Raise if any layer carries a weight outside its mask pattern."""
    for k, layer in enumerate(net.layers):
        W = layer.W
        if W.shape != layer.mask.shape or not (
            np.array_equal(W.indptr, layer.mask.indptr) and np.array_equal(W.indices, layer.mask.indices)
        ):
            raise AssertionError(f"layer {k}: weight pattern differs from mask")


# ---------------------------------------------------------------------------
# serialization


def save_model(net: MaskedNetwork, path) -> tuple[Path, Path]:
    """Write ``<path>.json`` (manifest) and ``<path>.bin`` (little-endian float64 weights).

    The blob holds ``get_params()`` in its documented order: per layer the
    nonzero weights in CSR order followed by the bias, then per head the
    weight vector followed by the bias.
    """
    path = Path(path)
    manifest = {
        "format": "prnet-masked-network/1",
        "loci": [str(l) for l in net.loci],
        "nodes": [list(map(str, n)) for n in net.masks.nodes[1:]],
        "masks": [
            {"shape": list(layer.shape), "indptr": layer.mask.indptr.tolist(),
             "indices": layer.mask.indices.tolist()}
            for layer in net.layers
        ],
        "hierarchy_digest": net.masks.hierarchy_digest,
        "head_weights": net.head_weights.tolist(),
        "activation": net.activation,
        "head_activation": net.head_activation,
        "parameter_layout": "per layer: W nonzeros (CSR order), b; then per head: w, bias",
        "parameter_count": int(net.get_params().size),
    }
    json_path = path.with_suffix(".json")
    bin_path = path.with_suffix(".bin")
    json_path.write_text(json.dumps(manifest, indent=1) + "\n", encoding="utf-8")
    net.get_params().astype("<f8").tofile(bin_path)
    return json_path, bin_path


def load_model(path) -> MaskedNetwork:
    path = Path(path)
    manifest = json.loads(path.with_suffix(".json").read_text(encoding="utf-8"))
    loci = [LocusId.parse(s) for s in manifest["loci"]]
    masks = []
    for spec in manifest["masks"]:
        indptr = np.asarray(spec["indptr"], dtype=np.int64)
        indices = np.asarray(spec["indices"], dtype=np.int64)
        masks.append(sp.csr_matrix((np.ones(indices.size), indices, indptr), shape=tuple(spec["shape"])))
    stack = MaskStack(masks, [loci] + [list(n) for n in manifest["nodes"]], manifest["hierarchy_digest"])
    net = MaskedNetwork(
        stack,
        [MaskedLayer(m) for m in masks],
        [Head(np.zeros(m.shape[1])) for m in masks],
        manifest["head_weights"],
        manifest["activation"],
        manifest["head_activation"],
    )
    net.set_params(np.fromfile(path.with_suffix(".bin"), dtype="<f8"))
    return net
