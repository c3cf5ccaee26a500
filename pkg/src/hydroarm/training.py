"""Offline supervised training of the reversible model from motion logs.

The pipeline is: zero-phase low-pass filtering of the logged kinematics,
target construction by central differences, min-max statistics taken on the
training split only, bidirectional (forward + inverse) mean-squared losses,
hand-written backpropagation through every path including the soft-clamped
gain, and Adam updates. Everything is deterministic given the seed.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, asdict

import numpy as np
from scipy import signal

from .errors import TrainingDivergedError
from .revmodel import (FeatureLayout, MinMaxNorm, Mlp, RevnmModel)


# ---------------------------------------------------------------------------
# configuration and containers
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    batch_size: int = 256
    iterations: int = 5000
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    lambda_y: float = 1.0        # forward-loss weight
    lambda_x: float = 1.0        # inverse-loss weight
    lambda_state: float = 1.0    # weight of the x2/x3 consistency terms
    dz_weight: float = 0.1       # inverse-loss weight for near-zero inputs
    dz_threshold: float = 0.25   # |u| below this counts as dead-zone resident
    filter_cutoff_hz: float = 10.0
    filter_order: int = 2
    dt_min: float = 1e-4
    dt_max: float = 1.0
    holdout_frac: float = 0.2
    split_seed: int = 0
    divergence_factor: float = 1e3
    divergence_patience: int = 100

    def __post_init__(self):
        if self.learning_rate <= 0.0:
            raise ValueError("learning rate must be positive")
        if not (0.0 < self.beta1 < 1.0 and 0.0 < self.beta2 < 1.0):
            raise ValueError("Adam betas must be in (0, 1)")
        if self.lambda_y < 0.0 or self.lambda_x < 0.0:
            raise ValueError("loss weights must be >= 0")
        if self.lambda_y == 0.0 and self.lambda_x == 0.0:
            raise ValueError("at least one loss weight must be non-zero")
        if self.dz_weight <= 0.0:
            raise ValueError("dz_weight must stay positive")


@dataclass
class EpisodeLog:
    """One logged motion episode: time, joint kinematics, raw input."""

    t: np.ndarray    # (N,)
    q: np.ndarray    # (N, n_joints)
    qd: np.ndarray   # (N, n_joints)
    u: np.ndarray    # (N, n_joints)
    episode_id: str = ""


@dataclass
class LossRecord:
    iteration: int
    loss_x: float
    loss_y: float


@dataclass
class Dataset:
    """Feature/target arrays plus split indices and normalization stats.

    Features are stored raw; the statistics (taken on the training split
    only) travel with the dataset and are frozen into any model trained on
    it, which applies them internally.
    """

    h: np.ndarray          # (N, d)
    u: np.ndarray          # (N, m)
    targets: np.ndarray    # (N, 3, m): xd1, xd2, xd3
    t: np.ndarray          # (N,)
    episode: np.ndarray    # (N,) index into meta["episode_ids"]
    train_idx: np.ndarray
    holdout_idx: np.ndarray
    feat_stats: MinMaxNorm
    target_stats: MinMaxNorm
    input_stats: MinMaxNorm
    layout: FeatureLayout
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return self.h.shape[0]


# ---------------------------------------------------------------------------
# preprocessing
# ---------------------------------------------------------------------------


def lowpass_filter(x: np.ndarray, fs: float, cutoff_hz: float,
                   order: int = 2) -> tuple[np.ndarray, bool]:
    """Zero-phase Butterworth low-pass along axis 0.

    Returns the filtered signal and whether filtering was actually applied;
    a cutoff at or above Nyquist passes the signal through.
    """
    wn = cutoff_hz / (fs / 2.0)
    if wn >= 0.999:
        return np.array(x, dtype=float), False
    b, a = signal.butter(order, wn)
    return signal.filtfilt(b, a, x, axis=0), True


def central_difference(x: np.ndarray, dt: float) -> np.ndarray:
    """Interior central differences; endpoints use one-sided differences."""
    out = np.gradient(x, dt, axis=0)
    return out


def _episode_dt(t: np.ndarray, cfg: TrainConfig) -> float:
    if t.shape[0] < 8:
        raise ValueError("episode too short to differentiate")
    dts = np.diff(t)
    if np.any(dts <= 0.0):
        raise ValueError("timestamps must be strictly increasing")
    dt = float(np.median(dts))
    if np.max(np.abs(dts - dt)) > 1e-6 * max(dt, 1.0):
        raise ValueError("sample interval is not uniform")
    if not cfg.dt_min <= dt <= cfg.dt_max:
        raise ValueError(f"sample interval {dt} outside "
                         f"[{cfg.dt_min}, {cfg.dt_max}]")
    return dt


def _episode_samples(log: EpisodeLog, layout: FeatureLayout,
                     cfg: TrainConfig):
    """Feature/target rows for one episode (interior samples only)."""
    dt = _episode_dt(log.t, cfg)
    fs = 1.0 / dt
    q_f, applied = lowpass_filter(log.q, fs, cfg.filter_cutoff_hz,
                                  cfg.filter_order)
    qd_f, _ = lowpass_filter(log.qd, fs, cfg.filter_cutoff_hz,
                             cfg.filter_order)
    x3 = central_difference(qd_f, dt)
    xd1 = central_difference(q_f, dt)
    xd2 = central_difference(qd_f, dt)
    xd3 = central_difference(x3, dt)

    # two differentiation passes plus lag history set the valid window
    lo = 2 + layout.lags
    hi = log.t.shape[0] - 2
    if hi <= lo:
        raise ValueError("episode too short for the requested lag depth")
    idx = np.arange(lo, hi)

    fj = list(layout.feature_joints)
    blocks = []
    for lag in range(layout.lags + 1):
        sel = idx - lag
        blocks.append(np.concatenate(
            [q_f[sel][:, fj], qd_f[sel][:, fj], x3[sel][:, fj]], axis=1))
    h = np.concatenate(blocks, axis=1)
    if layout.include_dt:
        h = np.concatenate([h, np.full((idx.shape[0], 1), dt)], axis=1)

    oj = list(layout.output_joints)
    u = log.u[idx][:, oj]
    targets = np.stack([xd1[idx][:, oj], xd2[idx][:, oj], xd3[idx][:, oj]],
                       axis=1)
    return h, u, targets, log.t[idx], applied, dt


def preprocess(logs, layout: FeatureLayout, cfg: TrainConfig) -> Dataset:
    """Build a training dataset from episode logs.

    Episodes are split whole into train/holdout with ``split_seed``; min-max
    statistics are computed on the training rows only. Constant feature
    dimensions are passed through unscaled and recorded in the metadata.
    """
    logs = list(logs)
    if not logs:
        raise ValueError("no episode logs given")
    parts, ep_index, filt_applied, dts = [], [], [], []
    for k, log in enumerate(logs):
        h, u, y, t, applied, dt = _episode_samples(log, layout, cfg)
        parts.append((h, u, y, t))
        ep_index.append(np.full(h.shape[0], k))
        filt_applied.append(applied)
        dts.append(dt)
    h = np.concatenate([p[0] for p in parts])
    u = np.concatenate([p[1] for p in parts])
    targets = np.concatenate([p[2] for p in parts])
    t = np.concatenate([p[3] for p in parts])
    episode = np.concatenate(ep_index)

    rng = np.random.default_rng(cfg.split_seed)
    order = rng.permutation(len(logs))
    n_hold = int(round(cfg.holdout_frac * len(logs)))
    if len(logs) > 1:
        n_hold = min(max(n_hold, 1 if cfg.holdout_frac > 0 else 0),
                     len(logs) - 1)
    hold_eps = set(order[:n_hold].tolist())
    hold_mask = np.isin(episode, list(hold_eps)) if hold_eps \
        else np.zeros(len(h), dtype=bool)
    train_idx = np.flatnonzero(~hold_mask)
    holdout_idx = np.flatnonzero(hold_mask)

    feat_stats = MinMaxNorm.from_data(h[train_idx])
    m = layout.n_outputs
    target_stats = MinMaxNorm.from_data(
        targets[train_idx].reshape(train_idx.shape[0], 3 * m))
    input_stats = MinMaxNorm.from_data(u[train_idx])

    meta = {
        "episode_ids": [log.episode_id or f"episode_{k}"
                        for k, log in enumerate(logs)],
        "filter": {"cutoff_hz": cfg.filter_cutoff_hz,
                   "order": cfg.filter_order,
                   "applied": filt_applied},
        "sample_dt": dts,
        "split_seed": cfg.split_seed,
        "holdout_frac": cfg.holdout_frac,
        "holdout_episodes": sorted(hold_eps),
        "flat_feature_dims": feat_stats.flat_dims.tolist(),
    }
    return Dataset(h=h, u=u, targets=targets, t=t, episode=episode,
                   train_idx=train_idx, holdout_idx=holdout_idx,
                   feat_stats=feat_stats, target_stats=target_stats,
                   input_stats=input_stats, layout=layout, meta=meta)


# ---------------------------------------------------------------------------
# losses and gradients
# ---------------------------------------------------------------------------


def _mlp_forward_cache(net: Mlp, x: np.ndarray):
    acts = [x]
    pre = []
    a = x
    for w, b in zip(net.weights[:-1], net.biases[:-1]):
        z = a @ w.T + b
        pre.append(z)
        a = np.maximum(z, 0.0)
        acts.append(a)
    out = a @ net.weights[-1].T + net.biases[-1]
    return out, (acts, pre)


def _mlp_backward(net: Mlp, cache, d_out: np.ndarray) -> list:
    acts, pre = cache
    grads = [None] * (2 * len(net.weights))
    d = d_out
    for li in range(len(net.weights) - 1, -1, -1):
        grads[2 * li] = d.T @ acts[li]
        grads[2 * li + 1] = d.sum(axis=0)
        if li > 0:
            d = (d @ net.weights[li]) * (pre[li - 1] > 0.0)
    return grads


def _terms(model: RevnmModel, h, u, targets, cfg: TrainConfig,
           with_caches: bool):
    lay = model.layout
    m = lay.n_outputs
    hn = model.feat_norm.scale(h)
    outs, caches = [], []
    for net in model.nets:
        if with_caches:
            o, c = _mlp_forward_cache(net, hn)
            caches.append(c)
        else:
            a = hn
            for w, b in zip(net.weights[:-1], net.biases[:-1]):
                a = np.maximum(a @ w.T + b, 0.0)
            o = a @ net.weights[-1].T + net.biases[-1]
        outs.append(o)
    t1, t2, t3, sr = outs
    s_val = model.clamp * np.arctan(sr)
    gain = np.exp(s_val)

    x2 = h[:, lay.output_indices(2)]
    x3 = h[:, lay.output_indices(3)]
    y1, y2, y3 = targets[:, 0, :], targets[:, 1, :], targets[:, 2, :]
    tspan = model.target_norm.span
    s1, s2, s3 = tspan[0:m], tspan[m:2 * m], tspan[2 * m:3 * m]
    su = model.input_norm.span

    r_y1 = (t1 + x2 - y1) / s1
    r_y2 = (t2 + x3 - y2) / s2
    r_y3 = (t3 + gain * u - y3) / s3
    u_hat = np.exp(-s_val) * (y3 - t3)
    w_dz = np.where(np.abs(u) < cfg.dz_threshold, cfg.dz_weight, 1.0)
    r_xu = (u_hat - u) / su
    r_x2 = (y1 - t1 - x2) / s1
    r_x3 = (y2 - t2 - x3) / s2

    n = h.shape[0] * m
    loss_y = (np.sum(r_y1 ** 2) + np.sum(r_y2 ** 2)
              + np.sum(r_y3 ** 2)) / (3.0 * n)
    loss_x = np.sum(w_dz * r_xu ** 2) / n + cfg.lambda_state * 0.5 \
        * (np.sum(r_x2 ** 2) + np.sum(r_x3 ** 2)) / n
    pieces = dict(t1=t1, t2=t2, t3=t3, sr=sr, s_val=s_val, gain=gain,
                  u_hat=u_hat, w_dz=w_dz, n=n,
                  r_y1=r_y1, r_y2=r_y2, r_y3=r_y3,
                  r_xu=r_xu, r_x2=r_x2, r_x3=r_x3,
                  s1=s1, s2=s2, s3=s3, su=su, caches=caches)
    return float(loss_y), float(loss_x), pieces


def bidirectional_loss(model: RevnmModel, h, u, targets,
                       cfg: TrainConfig) -> tuple[float, float]:
    """(LossY, LossX): forward and inverse mean-squared errors in
    normalized space."""
    if h.shape[0] == 0:
        raise ValueError("empty batch")
    loss_y, loss_x, _ = _terms(model, h, u, targets, cfg, with_caches=False)
    return loss_y, loss_x


def loss_and_gradients(model: RevnmModel, h, u, targets, cfg: TrainConfig):
    """Exact gradients of ``lambda_y*LossY + lambda_x*LossX`` for every
    weight and bias, in the order of :meth:`RevnmModel.parameters`."""
    if h.shape[0] == 0:
        raise ValueError("empty batch")
    loss_y, loss_x, p = _terms(model, h, u, targets, cfg, with_caches=True)
    n = p["n"]
    ly, lx, ls = cfg.lambda_y, cfg.lambda_x, cfg.lambda_state
    c_y = 2.0 * ly / (3.0 * n)
    c_x = 2.0 * lx / n

    d_t1 = c_y * p["r_y1"] / p["s1"] - c_x * ls * 0.5 * p["r_x2"] / p["s1"]
    d_t2 = c_y * p["r_y2"] / p["s2"] - c_x * ls * 0.5 * p["r_x3"] / p["s2"]
    d_t3 = c_y * p["r_y3"] / p["s3"] \
        - c_x * p["w_dz"] * p["r_xu"] * np.exp(-p["s_val"]) / p["su"]
    d_gain = c_y * p["r_y3"] * u / p["s3"]
    d_s = d_gain * p["gain"] \
        - c_x * p["w_dz"] * p["r_xu"] * p["u_hat"] / p["su"]
    d_sr = d_s * model.clamp / (1.0 + p["sr"] ** 2)

    grads = []
    for net, cache, d_out in zip(model.nets, p["caches"],
                                 (d_t1, d_t2, d_t3, d_sr)):
        grads.extend(_mlp_backward(net, cache, d_out))
    return grads, loss_y, loss_x


# ---------------------------------------------------------------------------
# Adam
# ---------------------------------------------------------------------------


@dataclass
class AdamState:
    m: list
    v: list
    step: int = 0

    @staticmethod
    def for_params(params) -> "AdamState":
        return AdamState(m=[np.zeros_like(p) for p in params],
                         v=[np.zeros_like(p) for p in params])


def adam_step(state: AdamState, params, grads, cfg: TrainConfig):
    """Bias-corrected Adam update, in place; returns (params, state)."""
    if len(params) != len(state.m) or len(params) != len(grads):
        raise ValueError("optimizer state does not match parameters")
    state.step += 1
    b1, b2 = cfg.beta1, cfg.beta2
    bc1 = 1.0 - b1 ** state.step
    bc2 = 1.0 - b2 ** state.step
    for p_arr, g, m, v in zip(params, grads, state.m, state.v):
        if p_arr.shape != g.shape:
            raise ValueError("gradient shape does not match parameter")
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p_arr -= cfg.learning_rate * (m / bc1) / (np.sqrt(v / bc2) + cfg.eps)
    return params, state


# ---------------------------------------------------------------------------
# training loop
# ---------------------------------------------------------------------------


def train(model: RevnmModel, dataset: Dataset,
          cfg: TrainConfig) -> tuple[RevnmModel, list[LossRecord]]:
    """Train a private copy of ``model`` on the dataset's training split.

    The model's normalizers are frozen from the dataset statistics before
    the first update. Raises :class:`TrainingDivergedError` if the total
    loss exceeds ``divergence_factor`` times its initial value for
    ``divergence_patience`` consecutive iterations (NaN counts as exceeded).
    """
    if dataset.layout != model.layout:
        raise ValueError("dataset layout does not match model layout")
    trained = model.copy()
    trained.feat_norm = dataset.feat_stats
    trained.target_norm = dataset.target_stats
    trained.input_norm = dataset.input_stats

    h_tr = dataset.h[dataset.train_idx]
    u_tr = dataset.u[dataset.train_idx]
    y_tr = dataset.targets[dataset.train_idx]
    n_tr = h_tr.shape[0]
    if n_tr == 0:
        raise ValueError("training split is empty")

    params = trained.parameters()
    opt = AdamState.for_params(params)
    rng = np.random.default_rng(cfg.seed)
    records: list[LossRecord] = []
    ref_total = None
    bad_streak = 0
    for it in range(cfg.iterations):
        idx = rng.integers(0, n_tr, size=min(cfg.batch_size, n_tr))
        grads, loss_y, loss_x = loss_and_gradients(
            trained, h_tr[idx], u_tr[idx], y_tr[idx], cfg)
        adam_step(opt, params, grads, cfg)
        records.append(LossRecord(iteration=it, loss_x=loss_x, loss_y=loss_y))
        total = cfg.lambda_y * loss_y + cfg.lambda_x * loss_x
        if ref_total is None:
            ref_total = max(total, 1e-300)
        exceeded = not math.isfinite(total) \
            or total > cfg.divergence_factor * ref_total
        bad_streak = bad_streak + 1 if exceeded else 0
        if bad_streak >= cfg.divergence_patience:
            raise TrainingDivergedError(
                f"loss exceeded {cfg.divergence_factor:g} x initial "
                f"({ref_total:.3e}) for {bad_streak} consecutive iterations, "
                f"last total {total:.3e} at iteration {it}")
    return trained, records


def holdout_loss(model: RevnmModel, dataset: Dataset,
                 cfg: TrainConfig) -> tuple[float, float]:
    """(LossY, LossX) evaluated on the holdout split."""
    idx = dataset.holdout_idx
    if idx.shape[0] == 0:
        raise ValueError("dataset has no holdout split")
    return bidirectional_loss(model, dataset.h[idx], dataset.u[idx],
                              dataset.targets[idx], cfg)


# ---------------------------------------------------------------------------
# file formats
# ---------------------------------------------------------------------------


def _feature_names(layout: FeatureLayout) -> list[str]:
    names = []
    for lag in range(layout.lags + 1):
        suffix = "" if lag == 0 else f"_lag{lag}"
        for order in (1, 2, 3):
            for j in layout.feature_joints:
                names.append(f"x{order}_j{j}{suffix}")
    if layout.include_dt:
        names.append("dt")
    return names


def save_dataset(dataset: Dataset, csv_path, meta_path=None) -> None:
    """Dataset as CSV with a declared header plus a JSON metadata sidecar."""
    meta_path = meta_path or str(csv_path) + ".meta.json"
    lay = dataset.layout
    header = ["t", "episode"] + _feature_names(lay) \
        + [f"u_j{j}" for j in lay.output_joints] \
        + [f"xd{o}_j{j}" for o in (1, 2, 3) for j in lay.output_joints]
    with open(csv_path, "w", newline="", encoding="utf-8") as f:
        wr = csv.writer(f)
        wr.writerow(header)
        m = lay.n_outputs
        flat_y = dataset.targets.reshape(len(dataset), 3 * m)
        for i in range(len(dataset)):
            wr.writerow([repr(dataset.t[i]), int(dataset.episode[i])]
                        + [repr(v) for v in dataset.h[i]]
                        + [repr(v) for v in dataset.u[i]]
                        + [repr(v) for v in flat_y[i]])
    meta = {
        "layout": lay.to_dict(),
        "feat_stats": dataset.feat_stats.to_dict(),
        "target_stats": dataset.target_stats.to_dict(),
        "input_stats": dataset.input_stats.to_dict(),
        "train_idx": dataset.train_idx.tolist(),
        "holdout_idx": dataset.holdout_idx.tolist(),
        "meta": dataset.meta,
    }
    with open(meta_path, "w", encoding="utf-8") as f:
        json.dump(meta, f, sort_keys=True, indent=1)
        f.write("\n")


def load_dataset(csv_path, meta_path=None) -> Dataset:
    meta_path = meta_path or str(csv_path) + ".meta.json"
    with open(meta_path, "r", encoding="utf-8") as f:
        side = json.load(f)
    layout = FeatureLayout.from_dict(side["layout"])
    rows = np.genfromtxt(csv_path, delimiter=",", skip_header=1)
    if rows.ndim == 1:
        rows = rows[None, :]
    d, m = layout.width, layout.n_outputs
    t = rows[:, 0]
    episode = rows[:, 1].astype(int)
    h = rows[:, 2:2 + d]
    u = rows[:, 2 + d:2 + d + m]
    targets = rows[:, 2 + d + m:2 + d + m + 3 * m].reshape(-1, 3, m)
    return Dataset(h=h, u=u, targets=targets, t=t, episode=episode,
                   train_idx=np.array(side["train_idx"], dtype=int),
                   holdout_idx=np.array(side["holdout_idx"], dtype=int),
                   feat_stats=MinMaxNorm.from_dict(side["feat_stats"]),
                   target_stats=MinMaxNorm.from_dict(side["target_stats"]),
                   input_stats=MinMaxNorm.from_dict(side["input_stats"]),
                   layout=layout, meta=side["meta"])


def save_loss_records(records, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        wr = csv.writer(f)
        wr.writerow(["iteration", "loss_x", "loss_y"])
        for r in records:
            wr.writerow([r.iteration, repr(r.loss_x), repr(r.loss_y)])


def load_loss_records(path) -> list[LossRecord]:
    out = []
    with open(path, "r", newline="", encoding="utf-8") as f:
        for row in csv.DictReader(f):
            out.append(LossRecord(iteration=int(row["iteration"]),
                                  loss_x=float(row["loss_x"]),
                                  loss_y=float(row["loss_y"])))
    return out
