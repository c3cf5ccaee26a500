"""Reversible integrator-chain model with MLP residuals.

The model wraps a third-order chain ``xd1 = x2, xd2 = x3, xd3 = gain*u`` with
learned additive residuals T1, T2, T3 and a strictly positive multiplicative
input gain ``exp(S)``, where ``S`` is soft-clamped through ``c*atan``. Because
the gain never reaches zero, the map between the input ``u`` and the top
derivative is exactly invertible in closed form; forward and inverse
evaluation share one parameter set.

Models are immutable after construction as far as callers are concerned:
evaluation never mutates, and training works on private copies.
"""

from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ModelFormatError

FORMAT_VERSION = 1


# ---------------------------------------------------------------------------
# feature layout
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FeatureLayout:
    """Declares how the feature vector ``h`` is assembled from plant state.

    The current block is ``[x1 of every feature joint, x2 ..., x3 ...]``;
    ``lags`` appends that block again for each delayed sample, and
    ``include_dt`` appends the sample interval as the last entry. The model
    predicts only ``output_joints`` (indices into the feature-joint list).
    """

    feature_joints: tuple[int, ...]
    output_joints: tuple[int, ...]
    lags: int = 0
    include_dt: bool = False

    def __post_init__(self):
        if self.lags < 0:
            raise ValueError("lag depth must be >= 0")
        if not self.output_joints:
            raise ValueError("need at least one output joint")
        missing = set(self.output_joints) - set(self.feature_joints)
        if missing:
            raise ValueError(f"output joints {missing} not in feature joints")

    @property
    def n_feature_joints(self) -> int:
        return len(self.feature_joints)

    @property
    def n_outputs(self) -> int:
        return len(self.output_joints)

    @property
    def width(self) -> int:
        return 3 * self.n_feature_joints * (self.lags + 1) \
            + (1 if self.include_dt else 0)

    def state_index(self, order: int, joint: int, lag: int = 0) -> int:
        """Position of x{order} of ``joint`` at ``lag`` within ``h``."""
        if order not in (1, 2, 3):
            raise ValueError("order must be 1, 2 or 3")
        col = self.feature_joints.index(joint)
        block = 3 * self.n_feature_joints
        return lag * block + (order - 1) * self.n_feature_joints + col

    def output_indices(self, order: int) -> np.ndarray:
        return np.array([self.state_index(order, j)
                         for j in self.output_joints])

    def to_dict(self) -> dict:
        return {"feature_joints": list(self.feature_joints),
                "output_joints": list(self.output_joints),
                "lags": self.lags, "include_dt": self.include_dt}

    @staticmethod
    def from_dict(d: dict) -> "FeatureLayout":
        return FeatureLayout(feature_joints=tuple(d["feature_joints"]),
                             output_joints=tuple(d["output_joints"]),
                             lags=int(d["lags"]),
                             include_dt=bool(d["include_dt"]))


# ---------------------------------------------------------------------------
# multilayer perceptron
# ---------------------------------------------------------------------------


@dataclass
class Mlp:
    """Dense network with rectified hidden layers and a linear output."""

    weights: list  # list of (out, in) arrays
    biases: list   # list of (out,) arrays

    def __post_init__(self):
        if len(self.weights) != len(self.biases):
            raise ValueError("weights/biases length mismatch")
        for w, b in zip(self.weights, self.biases):
            if w.shape[0] != b.shape[0]:
                raise ValueError("bias length does not match weight rows")
        for wa, wb in zip(self.weights, self.weights[1:]):
            if wb.shape[1] != wa.shape[0]:
                raise ValueError("layer dimensions do not chain")
        for w, b in zip(self.weights, self.biases):
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise ValueError("parameters must be finite")

    @property
    def input_dim(self) -> int:
        return self.weights[0].shape[1]

    @property
    def output_dim(self) -> int:
        return self.weights[-1].shape[0]

    def copy(self) -> "Mlp":
        return Mlp([w.copy() for w in self.weights],
                   [b.copy() for b in self.biases])


def mlp_eval(net: Mlp, x: np.ndarray) -> np.ndarray:
    """Evaluate the network on a single vector or a batch (rows)."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    a = x[None, :] if single else x
    if a.shape[1] != net.input_dim:
        raise ValueError(
            f"input dim {a.shape[1]} does not match network {net.input_dim}")
    for w, b in zip(net.weights[:-1], net.biases[:-1]):
        a = np.maximum(a @ w.T + b, 0.0)
    a = a @ net.weights[-1].T + net.biases[-1]
    return a[0] if single else a


def init_mlp(input_dim: int, output_dim: int, hidden=(64, 64), rng=None,
             zero_output: bool = True) -> Mlp:
    """Glorot-uniform initialization; the output layer starts at zero so a
    fresh model is the bare integrator chain."""
    rng = np.random.default_rng(rng)
    sizes = [input_dim, *hidden, output_dim]
    weights, biases = [], []
    for din, dout in zip(sizes[:-1], sizes[1:]):
        lim = math.sqrt(6.0 / (din + dout))
        weights.append(rng.uniform(-lim, lim, size=(dout, din)))
        biases.append(np.zeros(dout))
    if zero_output:
        weights[-1][:] = 0.0
    return Mlp(weights, biases)


# ---------------------------------------------------------------------------
# normalization
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MinMaxNorm:
    """Per-dimension affine map onto (0, 1) from recorded extrema.

    Degenerate dimensions (zero range) are passed through unscaled and their
    indices recorded in ``flat_dims``.
    """

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        if self.lo.shape != self.hi.shape:
            raise ValueError("lo/hi shape mismatch")
        if np.any(self.hi < self.lo):
            raise ValueError("hi must be >= lo")

    @property
    def span(self) -> np.ndarray:
        """Scale factor per dimension; 1 where the range is degenerate."""
        s = self.hi - self.lo
        return np.where(s > 0.0, s, 1.0)

    @property
    def flat_dims(self) -> np.ndarray:
        return np.flatnonzero(self.hi == self.lo)

    def scale(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        off = np.where(self.hi > self.lo, self.lo, 0.0)
        return (v - off) / self.span

    def unscale(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        off = np.where(self.hi > self.lo, self.lo, 0.0)
        return v * self.span + off

    def clip(self, v: np.ndarray) -> np.ndarray:
        """Clamp raw values into the recorded range (degenerate dims pass)."""
        lo = np.where(self.hi > self.lo, self.lo, -np.inf)
        hi = np.where(self.hi > self.lo, self.hi, np.inf)
        return np.clip(v, lo, hi)

    @staticmethod
    def identity(dim: int) -> "MinMaxNorm":
        return MinMaxNorm(lo=np.zeros(dim), hi=np.ones(dim))

    @staticmethod
    def from_data(v: np.ndarray) -> "MinMaxNorm":
        v = np.asarray(v, dtype=float)
        return MinMaxNorm(lo=v.min(axis=0), hi=v.max(axis=0))

    def to_dict(self) -> dict:
        return {"lo": self.lo.tolist(), "hi": self.hi.tolist()}

    @staticmethod
    def from_dict(d: dict) -> "MinMaxNorm":
        return MinMaxNorm(lo=np.array(d["lo"], dtype=float),
                          hi=np.array(d["hi"], dtype=float))


# ---------------------------------------------------------------------------
# the reversible model
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DerivativeTriple:
    xd1: np.ndarray
    xd2: np.ndarray
    xd3: np.ndarray


@dataclass
class RevnmModel:
    """Four subnetworks plus the clamp constant and normalization statistics.

    ``target_norm`` records the spans of the derivative targets as a
    ``(3, n_outputs)`` pair of extrema; ``input_norm`` those of the input
    signal. Both exist so losses can be compared in normalized space; the
    forward/inverse algebra itself runs in raw units.
    """

    layout: FeatureLayout
    t1: Mlp
    t2: Mlp
    t3: Mlp
    s_raw: Mlp
    clamp: float = 2.0
    feat_norm: MinMaxNorm = None
    target_norm: MinMaxNorm = None
    input_norm: MinMaxNorm = None

    def __post_init__(self):
        if self.clamp <= 0.0:
            raise ValueError("clamp must be strictly positive")
        m = self.layout.n_outputs
        d = self.layout.width
        for name, net in (("t1", self.t1), ("t2", self.t2), ("t3", self.t3),
                          ("s_raw", self.s_raw)):
            if net.input_dim != d or net.output_dim != m:
                raise ValueError(f"network {name} is {net.input_dim}->"
                                 f"{net.output_dim}, expected {d}->{m}")
        if self.feat_norm is None:
            self.feat_norm = MinMaxNorm.identity(d)
        if self.target_norm is None:
            self.target_norm = MinMaxNorm.identity(3 * m)
        if self.input_norm is None:
            self.input_norm = MinMaxNorm.identity(m)
        if self.feat_norm.lo.shape[0] != d:
            raise ValueError("feature normalizer width mismatch")
        if self.target_norm.lo.shape[0] != 3 * m:
            raise ValueError("target normalizer width mismatch")
        if self.input_norm.lo.shape[0] != m:
            raise ValueError("input normalizer width mismatch")

    @property
    def nets(self) -> tuple[Mlp, Mlp, Mlp, Mlp]:
        return self.t1, self.t2, self.t3, self.s_raw

    def parameters(self) -> list:
        """Flat list of parameter arrays (views, in a fixed order)."""
        out = []
        for net in self.nets:
            for w, b in zip(net.weights, net.biases):
                out.append(w)
                out.append(b)
        return out

    def copy(self) -> "RevnmModel":
        return RevnmModel(layout=self.layout, t1=self.t1.copy(),
                          t2=self.t2.copy(), t3=self.t3.copy(),
                          s_raw=self.s_raw.copy(), clamp=self.clamp,
                          feat_norm=copy.deepcopy(self.feat_norm),
                          target_norm=copy.deepcopy(self.target_norm),
                          input_norm=copy.deepcopy(self.input_norm))


def init_model(layout: FeatureLayout, hidden=(64, 64), clamp: float = 2.0,
               rng=None) -> RevnmModel:
    rng = np.random.default_rng(rng)
    d, m = layout.width, layout.n_outputs
    return RevnmModel(
        layout=layout,
        t1=init_mlp(d, m, hidden, rng), t2=init_mlp(d, m, hidden, rng),
        t3=init_mlp(d, m, hidden, rng), s_raw=init_mlp(d, m, hidden, rng),
        clamp=clamp)


def random_model(layout: FeatureLayout, hidden=(8, 8), clamp: float = 2.0,
                 scale: float = 0.3, rng=None) -> RevnmModel:
    """Model with non-zero output layers, for tests and synthetic plants."""
    rng = np.random.default_rng(rng)
    m = init_model(layout, hidden, clamp, rng)
    for net in m.nets:
        net.weights[-1][:] = rng.uniform(-scale, scale,
                                         size=net.weights[-1].shape)
        net.biases[-1][:] = rng.uniform(-scale, scale,
                                        size=net.biases[-1].shape)
    return m


def _normalized_features(m: RevnmModel, h: np.ndarray,
                         clip_inputs: bool) -> np.ndarray:
    if clip_inputs:
        h = m.feat_norm.clip(h)
    return m.feat_norm.scale(h)


def s_eval(m: RevnmModel, h: np.ndarray, clip_inputs: bool = False) -> np.ndarray:
    """Soft-clamped log-gain ``clamp * atan(S_raw(h))``, in (-c*pi/2, c*pi/2)."""
    hn = _normalized_features(m, np.asarray(h, dtype=float), clip_inputs)
    return m.clamp * np.arctan(mlp_eval(m.s_raw, hn))


def forward_model(m: RevnmModel, h: np.ndarray, u: np.ndarray,
                  clip_inputs: bool = False) -> DerivativeTriple:
    """Forward dynamics: the integrator chain plus learned residuals.

    ``h`` is raw (unnormalized); normalization is applied internally before
    the networks. Works on single vectors or batches (rows).
    """
    h = np.asarray(h, dtype=float)
    u = np.asarray(u, dtype=float)
    hn = _normalized_features(m, h, clip_inputs)
    x2 = h[..., m.layout.output_indices(2)]
    x3 = h[..., m.layout.output_indices(3)]
    xd1 = mlp_eval(m.t1, hn) + x2
    xd2 = mlp_eval(m.t2, hn) + x3
    xd3 = mlp_eval(m.t3, hn) + np.exp(m.clamp * np.arctan(
        mlp_eval(m.s_raw, hn))) * u
    return DerivativeTriple(xd1=xd1, xd2=xd2, xd3=xd3)


def inverse_model(m: RevnmModel, h: np.ndarray, d: DerivativeTriple,
                  clip_inputs: bool = False):
    """Closed-form inverse: recover (x2, x3, u) from the derivatives.

    ``h`` carries the measured state; the recovered x2/x3 serve as
    consistency checks against it rather than replacements.
    """
    h = np.asarray(h, dtype=float)
    hn = _normalized_features(m, h, clip_inputs)
    x2_rec = np.asarray(d.xd1, dtype=float) - mlp_eval(m.t1, hn)
    x3_rec = np.asarray(d.xd2, dtype=float) - mlp_eval(m.t2, hn)
    u = np.exp(-m.clamp * np.arctan(mlp_eval(m.s_raw, hn))) \
        * (np.asarray(d.xd3, dtype=float) - mlp_eval(m.t3, hn))
    return x2_rec, x3_rec, u


def predict_delta(m: RevnmModel, h: np.ndarray, u: np.ndarray, dt: float,
                  clip_inputs: bool = False):
    """Explicit-Euler state-change prediction over one interval ``dt``."""
    if dt < 0.0:
        raise ValueError("dt must be non-negative")
    d = forward_model(m, h, u, clip_inputs)
    return d.xd1 * dt, d.xd2 * dt, d.xd3 * dt


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------


def _net_to_dict(net: Mlp) -> dict:
    return {"sizes": [net.input_dim] + [w.shape[0] for w in net.weights],
            "weights": [w.tolist() for w in net.weights],
            "biases": [b.tolist() for b in net.biases]}


def _net_from_dict(d: dict) -> Mlp:
    try:
        weights = [np.array(w, dtype=float) for w in d["weights"]]
        biases = [np.array(b, dtype=float) for b in d["biases"]]
        net = Mlp(weights, biases)
        sizes = [net.input_dim] + [w.shape[0] for w in weights]
        if sizes != list(d["sizes"]):
            raise ModelFormatError("declared sizes do not match arrays")
    except (KeyError, TypeError, ValueError) as e:
        raise ModelFormatError(f"bad network block: {e}") from e
    return net


def model_to_dict(m: RevnmModel) -> dict:
    return {"format_version": FORMAT_VERSION,
            "layout": m.layout.to_dict(),
            "clamp": m.clamp,
            "feat_norm": m.feat_norm.to_dict(),
            "target_norm": m.target_norm.to_dict(),
            "input_norm": m.input_norm.to_dict(),
            "nets": {"t1": _net_to_dict(m.t1), "t2": _net_to_dict(m.t2),
                     "t3": _net_to_dict(m.t3), "s_raw": _net_to_dict(m.s_raw)}}


def model_from_dict(d: dict) -> RevnmModel:
    try:
        version = d["format_version"]
    except (KeyError, TypeError) as e:
        raise ModelFormatError("missing format_version") from e
    if version != FORMAT_VERSION:
        raise ModelFormatError(
            f"unsupported model format version {version!r}, "
            f"expected {FORMAT_VERSION}")
    try:
        layout = FeatureLayout.from_dict(d["layout"])
        model = RevnmModel(
            layout=layout,
            t1=_net_from_dict(d["nets"]["t1"]),
            t2=_net_from_dict(d["nets"]["t2"]),
            t3=_net_from_dict(d["nets"]["t3"]),
            s_raw=_net_from_dict(d["nets"]["s_raw"]),
            clamp=float(d["clamp"]),
            feat_norm=MinMaxNorm.from_dict(d["feat_norm"]),
            target_norm=MinMaxNorm.from_dict(d["target_norm"]),
            input_norm=MinMaxNorm.from_dict(d["input_norm"]))
    except ModelFormatError:
        raise
    except (KeyError, TypeError, ValueError) as e:
        raise ModelFormatError(f"inconsistent model file: {e}") from e
    return model


def save_model(m: RevnmModel, path) -> None:
    """Write the model as self-describing JSON; floats round-trip bit-exactly."""
    with open(path, "w", encoding="utf-8") as f:
        json.dump(model_to_dict(m), f, sort_keys=True, indent=1)
        f.write("\n")


def load_model(path, expect_layout: FeatureLayout | None = None) -> RevnmModel:
    """Load a model file; optionally enforce an expected feature layout."""
    try:
        with open(path, "r", encoding="utf-8") as f:
            d = json.load(f)
    except json.JSONDecodeError as e:
        raise ModelFormatError(f"corrupt model file {path}: {e}") from e
    model = model_from_dict(d)
    if expect_layout is not None and model.layout != expect_layout:
        raise ModelFormatError(
            f"model layout {model.layout} does not match expected "
            f"{expect_layout}")
    return model
