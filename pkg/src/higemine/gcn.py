"""Dual-path GCN classifiers and the label co-occurrence network.

A path is two GCN layers over a document-token graph, the concatenation of
the input features with both layer outputs cut down to document rows, and a
two-layer dense head. Level-1 fuses the scalar outputs of the blurb and
review paths; Level-2 scores documents against label representations refined
by a GCN over the label graph.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields, is_dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tape, TapeError, Var
from .errors import ShapeError
from .sparse import SparseMatrix


@dataclass
class GcnLayerParams:
    weight: np.ndarray
    bias: np.ndarray
    activation: str = "relu"


@dataclass
class DenseParams:
    weight: np.ndarray
    bias: np.ndarray


@dataclass
class PathParams:
    gcn1: GcnLayerParams
    gcn2: GcnLayerParams
    dense1: DenseParams
    dense2: DenseParams


@dataclass
class LabelNetParams:
    gcn1: GcnLayerParams
    gcn2: GcnLayerParams
    dense: DenseParams


@dataclass
class Level1Model:
    blurb: PathParams
    review: PathParams


@dataclass
class Level2Model:
    """One Level-2 head.

    Exactly one of ``label_net`` (label co-occurrence network) and
    ``label_head`` (plain per-label affine scorer) is set. ``label_learnable``
    is a trainable parameter only when ``learn_label_embeddings`` is true.
    """

    blurb: PathParams
    review: PathParams
    label_static: np.ndarray
    label_learnable: np.ndarray
    label_net: LabelNetParams | None = None
    label_head: DenseParams | None = None
    learn_label_embeddings: bool = True

    @property
    def n_labels(self) -> int:
        return self.label_static.shape[0]


@dataclass
class ModelConfig:
    gcn1_dim: int = 256
    gcn2_dim: int = 128
    dense_hidden: int = 128
    label_out_dim: int = 64


@dataclass
class DualGraphInputs:
    """Normalized adjacencies plus node features for both paths of one head."""

    blurb_adj: SparseMatrix
    review_adj: SparseMatrix
    blurb_features: np.ndarray
    review_features: np.ndarray
    n_docs: int

    def __post_init__(self):
        for adj, x in ((self.blurb_adj, self.blurb_features), (self.review_adj, self.review_features)):
            if adj.rows != x.shape[0]:
                raise ShapeError(f"adjacency {adj.shape} vs features {x.shape}")
            if self.n_docs > adj.rows:
                raise ShapeError("n_docs exceeds node count")


# -- parameters --------------------------------------------------------------

_FROZEN = {"label_static"}


def named_parameters(model, prefix: str = "") -> dict[str, np.ndarray]:
    """Trainable arrays keyed by dotted path, in a fixed field order."""
    out = {}
    for f in fields(model):
        value = getattr(model, f.name)
        name = prefix + f.name
        if f.name in _FROZEN or value is None:
            continue
        if f.name == "label_learnable" and not model.learn_label_embeddings:
            continue
        if isinstance(value, np.ndarray):
            out[name] = value
        elif is_dataclass(value):
            out.update(named_parameters(value, name + "."))
    return out


def _glorot(rng, fan_in, fan_out):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def init_gcn_layer(rng, fan_in, fan_out, activation="relu") -> GcnLayerParams:
    return GcnLayerParams(_glorot(rng, fan_in, fan_out), np.zeros(fan_out), activation)


def init_dense(rng, fan_in, fan_out) -> DenseParams:
    return DenseParams(_glorot(rng, fan_in, fan_out), np.zeros(fan_out))


def init_path(rng, in_dim: int, out_dim: int, cfg: ModelConfig) -> PathParams:
    concat = in_dim + cfg.gcn1_dim + cfg.gcn2_dim
    return PathParams(
        init_gcn_layer(rng, in_dim, cfg.gcn1_dim),
        init_gcn_layer(rng, cfg.gcn1_dim, cfg.gcn2_dim),
        init_dense(rng, concat, cfg.dense_hidden),
        init_dense(rng, cfg.dense_hidden, out_dim),
    )


def init_level1(in_dim: int, cfg: ModelConfig, seed: int) -> Level1Model:
    rng = np.random.default_rng(seed)
    return Level1Model(init_path(rng, in_dim, 1, cfg), init_path(rng, in_dim, 1, cfg))


def init_level2(
    in_dim: int,
    label_static,
    cfg: ModelConfig,
    seed: int,
    use_label_network: bool = True,
    learn_label_embeddings: bool = True,
) -> Level2Model:
    rng = np.random.default_rng(seed)
    static = np.array(label_static, dtype=np.float64)
    k, e = static.shape
    out = cfg.label_out_dim
    blurb = init_path(rng, in_dim, out, cfg)
    review = init_path(rng, in_dim, out, cfg)
    label_net = label_head = None
    if use_label_network:
        label_net = LabelNetParams(
            init_gcn_layer(rng, e, cfg.gcn1_dim),
            init_gcn_layer(rng, cfg.gcn1_dim, cfg.gcn2_dim),
            init_dense(rng, e + cfg.gcn1_dim + cfg.gcn2_dim, out),
        )
    else:
        label_head = init_dense(rng, out, k)
    return Level2Model(
        blurb, review, static, np.zeros_like(static), label_net, label_head, learn_label_embeddings
    )


def copy_model(model):
    if isinstance(model, np.ndarray):
        return model.copy()
    if is_dataclass(model):
        return type(model)(**{f.name: copy_model(getattr(model, f.name)) for f in fields(model)})
    return model


# -- forward -----------------------------------------------------------------


def _gcn(tape, adj, x, p: GcnLayerParams) -> Var:
    h = ad.spmm(tape, adj, x)
    h = ad.matmul(tape, h, ad.param(tape, p.weight))
    h = ad.add_bias(tape, h, ad.param(tape, p.bias))
    return ad.activate(tape, h, p.activation)


def _dense(tape, x, p: DenseParams) -> Var:
    return ad.add_bias(tape, ad.matmul(tape, x, ad.param(tape, p.weight)), ad.param(tape, p.bias))


def _graph_unit(tape, adj, x, p: PathParams, n_docs: int) -> Var:
    x = ad.const(x)
    h1 = _gcn(tape, adj, x, p.gcn1)
    h2 = _gcn(tape, adj, h1, p.gcn2)
    x2 = ad.take_rows(tape, ad.concat_cols(tape, [x, h1, h2]), n_docs)
    return _dense(tape, ad.relu(tape, _dense(tape, x2, p.dense1)), p.dense2)


def _label_network(tape, adj, x_c, p: LabelNetParams) -> Var:
    h1 = _gcn(tape, adj, x_c, p.gcn1)
    h2 = _gcn(tape, adj, h1, p.gcn2)
    return _dense(tape, ad.concat_cols(tape, [x_c, h1, h2]), p.dense)


def _label_features(tape, model: Level2Model) -> Var:
    if model.learn_label_embeddings:
        return ad.add(tape, ad.const(model.label_static), ad.param(tape, model.label_learnable))
    return ad.const(model.label_static + model.label_learnable)


def _level1(tape, model: Level1Model, inputs: DualGraphInputs, lam) -> Var:
    zb = _graph_unit(tape, inputs.blurb_adj, inputs.blurb_features, model.blurb, inputs.n_docs)
    zp = _graph_unit(tape, inputs.review_adj, inputs.review_features, model.review, inputs.n_docs)
    return ad.mix(tape, zb, zp, lam)


def _level2(tape, model: Level2Model, inputs: DualGraphInputs, label_adj: SparseMatrix, lam) -> Var:
    xb = _graph_unit(tape, inputs.blurb_adj, inputs.blurb_features, model.blurb, inputs.n_docs)
    xp = _graph_unit(tape, inputs.review_adj, inputs.review_features, model.review, inputs.n_docs)
    if model.label_net is not None:
        x_c = _label_features(tape, model)
        refined = _label_network(tape, label_adj, x_c, model.label_net)
        zb = ad.matmul_nt(tape, xb, refined)
        zp = ad.matmul_nt(tape, xp, refined)
    else:
        zb = _dense(tape, xb, model.label_head)
        zp = _dense(tape, xp, model.label_head)
    return ad.mix(tape, zb, zp, lam)


def gcn_layer(adj: SparseMatrix, x, p: GcnLayerParams) -> np.ndarray:
    """activation(adj @ x @ W + b)."""
    return _gcn(None, adj, x, p).value


def graph_unit(adj: SparseMatrix, x, p: PathParams, n_docs: int) -> np.ndarray:
    return _graph_unit(None, adj, x, p, n_docs).value


def label_network(label_adj: SparseMatrix, x_c, p: LabelNetParams) -> np.ndarray:
    return _label_network(None, label_adj, x_c, p).value


def level1_forward(model: Level1Model, inputs: DualGraphInputs, lam) -> np.ndarray:
    """Per-document Level-1 logits (sigmoid is left to the loss / prediction)."""
    return _level1(None, model, inputs, lam).value[:, 0]


def level2_logits(model: Level2Model, inputs: DualGraphInputs, label_adj: SparseMatrix, lam) -> np.ndarray:
    return _level2(None, model, inputs, label_adj, lam).value


def sigmoid(x):
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def level2_forward(model: Level2Model, inputs: DualGraphInputs, label_adj: SparseMatrix, lam) -> np.ndarray:
    """Genre probabilities, n_docs x k'."""
    return sigmoid(level2_logits(model, inputs, label_adj, lam))


# -- recording and backward --------------------------------------------------


@dataclass
class ForwardTrace:
    tape: Tape
    output: Var
    params: dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def value(self) -> np.ndarray:
        return self.output.value


def record_level1(model: Level1Model, inputs: DualGraphInputs, lam) -> ForwardTrace:
    """Level-1 forward with the tape on; the traced output has shape (n_docs, 1)."""
    tape = Tape()
    out = _level1(tape, model, inputs, lam)
    return ForwardTrace(tape, out, named_parameters(model))


def record_level2(model: Level2Model, inputs: DualGraphInputs, label_adj: SparseMatrix, lam) -> ForwardTrace:
    """Level-2 forward with the tape on; traced output is the n_docs x k' logit matrix."""
    tape = Tape()
    out = _level2(tape, model, inputs, label_adj, lam)
    return ForwardTrace(tape, out, named_parameters(model))


def backward(trace: ForwardTrace | None, upstream) -> dict[str, np.ndarray]:
    """Gradients of <upstream, output> for every trainable array of the traced model."""
    if trace is None or not isinstance(trace, ForwardTrace):
        raise TapeError("backward needs a recorded forward trace")
    trace.tape.backward(trace.output, upstream)
    return {name: trace.tape.grad_of(arr) for name, arr in trace.params.items()}
