"""Hybrid motion control: PD feedback plus model-inversion compensation.

The inversion controller is a three-step backstepping design on the
integrator-chain model; its collapsed form needs the rates of the learned
residuals (T1 twice, T2 once), which are estimated online by filtered
backward differences of the network outputs. The PD term provides robust
feedback; both are summed and saturated. A closed-form exponential decay
envelope is provided so closed-loop error energy can be checked against the
boundedness guarantee at runtime.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import ControlError
from .revmodel import RevnmModel, mlp_eval


# ---------------------------------------------------------------------------
# gains and configuration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PdGains:
    kp: float
    kd: float

    def __post_init__(self):
        if self.kp < 0.0 or self.kd < 0.0:
            raise ValueError("PD gains must be >= 0")


@dataclass(frozen=True)
class BacksteppingGains:
    """Backstepping gains; each must exceed 0.5 for the decay rate
    ``min(k_i - 0.5)`` to be positive."""

    k1: float
    k2: float
    k3: float

    def __post_init__(self):
        if min(self.k1, self.k2, self.k3) <= 0.5:
            raise ValueError("backstepping gains must each be > 0.5")

    @property
    def decay_rate(self) -> float:
        return min(self.k1, self.k2, self.k3) - 0.5


@dataclass(frozen=True)
class Reference:
    """Reference value and its first three derivatives for one joint."""

    x1: float
    x2: float
    x3: float
    xd3: float


@dataclass(frozen=True)
class HybridConfig:
    pd: PdGains
    backstepping: BacksteppingGains
    u_min: float = -1.0
    u_max: float = 1.0
    inv_min: float = -1.0           # clamp on the inversion term's output
    inv_max: float = 1.0
    clip_model_inputs: bool = True  # clamp h into the training range
    deriv_filter_ratio: float = 5.0  # filter time constant, in control periods
    w_pd: float = 1.0
    w_inv: float = 1.0
    use_measured_zdot: bool = False  # ablation: drop T1 from the z1 rate

    def __post_init__(self):
        if not (math.isfinite(self.u_min) and math.isfinite(self.u_max)
                and self.u_min < self.u_max):
            raise ValueError("need finite u_min < u_max")
        if not self.inv_min < self.inv_max:
            raise ValueError("need inv_min < inv_max")


@dataclass(frozen=True)
class ControllerMemory:
    """Discrete state of one joint controller.

    Holds previous network outputs and their filtered rates; ``ticks`` counts
    calls so the first two samples can be flagged as cold (second differences
    need that much history).
    """

    ticks: int = 0
    t1_prev: float = 0.0
    t2_prev: float = 0.0
    dt1_raw_prev: float = 0.0
    dt1_f: float = 0.0
    dt2_f: float = 0.0
    ddt1_f: float = 0.0
    last_u: float = 0.0

    @property
    def warm(self) -> bool:
        return self.ticks >= 2


@dataclass(frozen=True)
class HybridDiag:
    """Per-tick controller internals for logging."""

    z1: float
    z2: float
    z3: float
    u_pd: float
    u_inv: float
    u_presat: float
    u_sat: float
    lyapunov: float
    cold: bool


# ---------------------------------------------------------------------------
# elementary laws
# ---------------------------------------------------------------------------


def pd_control(e: float, edot: float, g: PdGains) -> float:
    """Proportional-derivative law on the tracking error."""
    return g.kp * e + g.kd * edot


def gain_polynomials(k1: float, k2: float, k3: float):
    """Coefficients of the collapsed backstepping law in (z1, z1', z1'')."""
    r1 = k1 * k2 * k3 + k1 + k3
    r2 = k1 * k2 + k1 * k3 + k2 * k3 + 2.0
    r3 = k1 + k2 + k3
    return r1, r2, r3


def lyapunov_envelope(v0: float, lam: float, gamma: float, t) -> float:
    """Decay envelope ``V0 e^{-lam t} + (gamma/lam)(1 - e^{-lam t})``."""
    if lam <= 0.0:
        raise ValueError("decay rate must be positive")
    if gamma < 0.0:
        raise ValueError("gamma must be >= 0")
    t = np.asarray(t, dtype=float)
    if np.any(t < 0.0):
        raise ValueError("t must be >= 0")
    e = np.exp(-lam * t)
    out = v0 * e + gamma / lam * (1.0 - e)
    return float(out) if out.ndim == 0 else out


def saturate(u: float, lo: float, hi: float) -> float:
    return min(max(u, lo), hi)


# ---------------------------------------------------------------------------
# model evaluation helpers
# ---------------------------------------------------------------------------


def build_features(model: RevnmModel, x1, x2, x3) -> np.ndarray:
    """Assemble ``h`` from full plant state arrays (current-state layouts)."""
    lay = model.layout
    if lay.lags or lay.include_dt:
        raise ValueError("online control supports current-state layouts only")
    fj = list(lay.feature_joints)
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    x3 = np.asarray(x3, dtype=float)
    return np.concatenate([x1[fj], x2[fj], x3[fj]])


def _joint_nets(model: RevnmModel, h: np.ndarray, clip_inputs: bool):
    """(t1, t2, t3, s) scalars for a single-output model."""
    if model.layout.n_outputs != 1:
        raise ValueError("joint controller needs a single-output model")
    if clip_inputs:
        h = model.feat_norm.clip(h)
    hn = model.feat_norm.scale(h)
    t1 = float(mlp_eval(model.t1, hn)[0])
    t2 = float(mlp_eval(model.t2, hn)[0])
    t3 = float(mlp_eval(model.t3, hn)[0])
    s = model.clamp * math.atan(float(mlp_eval(model.s_raw, hn)[0]))
    for name, v in (("T1", t1), ("T2", t2), ("T3", t3), ("S", s)):
        if not math.isfinite(v):
            raise ControlError(f"network output {name} is not finite "
                               f"(h={h.tolist()})")
    return t1, t2, t3, s


def _advance_memory(mem: ControllerMemory, t1: float, t2: float, dt: float,
                    filter_ratio: float) -> ControllerMemory:
    """Backward-difference rate estimates, first-order low-pass filtered."""
    if mem.ticks == 0:
        raw_dt1 = raw_dt2 = raw_ddt1 = 0.0
    else:
        raw_dt1 = (t1 - mem.t1_prev) / dt
        raw_dt2 = (t2 - mem.t2_prev) / dt
        raw_ddt1 = 0.0 if mem.ticks < 2 \
            else (raw_dt1 - mem.dt1_raw_prev) / dt
    alpha = math.exp(-1.0 / filter_ratio) if filter_ratio > 0.0 else 0.0
    return replace(
        mem, ticks=mem.ticks + 1, t1_prev=t1, t2_prev=t2,
        dt1_raw_prev=raw_dt1,
        dt1_f=alpha * mem.dt1_f + (1.0 - alpha) * raw_dt1,
        dt2_f=alpha * mem.dt2_f + (1.0 - alpha) * raw_dt2,
        ddt1_f=alpha * mem.ddt1_f + (1.0 - alpha) * raw_ddt1)


def _error_coordinates(model: RevnmModel, state, ref: Reference,
                       t1: float, use_measured_zdot: bool):
    x1, x2, x3 = state
    j = model.layout.output_joints[0]
    z1 = float(x1[j]) - ref.x1
    if use_measured_zdot:
        zd1 = float(x2[j]) - ref.x2
    else:
        zd1 = t1 + float(x2[j]) - ref.x2
    return j, z1, zd1


# ---------------------------------------------------------------------------
# backstepping laws
# ---------------------------------------------------------------------------


def inversion_control(model: RevnmModel, state, ref: Reference,
                      gains: BacksteppingGains, mem: ControllerMemory,
                      dt: float, *, pd: PdGains | None = None,
                      clip_inputs: bool = True, filter_ratio: float = 5.0,
                      use_measured_zdot: bool = False):
    """Collapsed backstepping law; returns ``(u, new_memory)``.

    During the two-sample cold start the PD fallback value is returned (zero
    if no PD gains are supplied); the memory still warms up.
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    x1, x2, x3 = state
    h = build_features(model, x1, x2, x3)
    t1, t2, t3, s = _joint_nets(model, h, clip_inputs)
    new_mem = _advance_memory(mem, t1, t2, dt, filter_ratio)
    j, z1, zd1 = _error_coordinates(model, state, ref, t1, use_measured_zdot)

    if not mem.warm:
        u = 0.0 if pd is None else pd_control(ref.x1 - float(x1[j]),
                                              ref.x2 - float(x2[j]), pd)
        return u, replace(new_mem, last_u=u)

    zdd1 = t2 + float(x3[j]) + new_mem.dt1_f - ref.x3
    r1, r2, r3 = gain_polynomials(gains.k1, gains.k2, gains.k3)
    u = math.exp(-s) * (ref.xd3 - t3 - new_mem.dt2_f - new_mem.ddt1_f
                        - r1 * z1 - r2 * zd1 - r3 * zdd1)
    if not math.isfinite(u):
        raise ControlError(f"inversion law produced non-finite output "
                           f"(s={s}, z1={z1})")
    return u, replace(new_mem, last_u=u)


def virtual_laws(model: RevnmModel, state, ref: Reference,
                 gains: BacksteppingGains, mem: ControllerMemory, *,
                 clip_inputs: bool = True, use_measured_zdot: bool = False):
    """Step-wise virtual controls and error coordinates (monitoring only).

    Uses the filtered T1 rate currently held in ``mem`` without advancing it.
    """
    x1, x2, x3 = state
    h = build_features(model, x1, x2, x3)
    t1, t2, _, _ = _joint_nets(model, h, clip_inputs)
    j, z1, zd1 = _error_coordinates(model, state, ref, t1, use_measured_zdot)
    alpha2 = ref.x2 - t1 - gains.k1 * z1
    z2 = float(x2[j]) - alpha2
    alpha3 = ref.x3 - t2 - mem.dt1_f - z1 - gains.k1 * zd1 - gains.k2 * z2
    z3 = float(x3[j]) - alpha3
    return alpha2, alpha3, z1, z2, z3


def stepwise_control(model: RevnmModel, state, ref: Reference,
                     gains: BacksteppingGains, mem: ControllerMemory, *,
                     clip_inputs: bool = True,
                     use_measured_zdot: bool = False) -> float:
    """Backstepping law assembled step by step through the virtual controls.

    Algebraically identical to the collapsed law evaluated on the same
    memory; exists so the gain-polynomial collapse can be cross-checked.
    """
    x1, x2, x3 = state
    h = build_features(model, x1, x2, x3)
    t1, t2, t3, s = _joint_nets(model, h, clip_inputs)
    j, z1, zd1 = _error_coordinates(model, state, ref, t1, use_measured_zdot)
    _, _, _, z2, z3 = virtual_laws(model, state, ref, gains, mem,
                                   clip_inputs=clip_inputs,
                                   use_measured_zdot=use_measured_zdot)
    zdd1 = t2 + float(x3[j]) + mem.dt1_f - ref.x3
    zd2 = zdd1 + gains.k1 * zd1
    return math.exp(-s) * (ref.xd3 - t3 - mem.dt2_f - mem.ddt1_f
                           - z2 - gains.k3 * z3
                           - zd1 - gains.k1 * zdd1 - gains.k2 * zd2)


def hybrid_control(model: RevnmModel, state, ref: Reference,
                   cfg: HybridConfig, mem: ControllerMemory, dt: float):
    """PD plus clamped inversion, saturated; returns ``(u, mem, diag)``."""
    x1, x2, x3 = state
    j = model.layout.output_joints[0]
    u_pd = pd_control(ref.x1 - float(x1[j]), ref.x2 - float(x2[j]), cfg.pd)
    cold = not mem.warm
    u_inv_raw, new_mem = inversion_control(
        model, state, ref, cfg.backstepping, mem, dt, pd=None,
        clip_inputs=cfg.clip_model_inputs,
        filter_ratio=cfg.deriv_filter_ratio,
        use_measured_zdot=cfg.use_measured_zdot)
    u_inv = 0.0 if cold else saturate(u_inv_raw, cfg.inv_min, cfg.inv_max)
    u_presat = cfg.w_pd * u_pd + cfg.w_inv * u_inv
    u_sat = saturate(u_presat, cfg.u_min, cfg.u_max)
    _, _, z1, z2, z3 = virtual_laws(
        model, state, ref, cfg.backstepping, new_mem,
        clip_inputs=cfg.clip_model_inputs,
        use_measured_zdot=cfg.use_measured_zdot)
    diag = HybridDiag(z1=z1, z2=z2, z3=z3, u_pd=u_pd, u_inv=u_inv,
                      u_presat=u_presat, u_sat=u_sat,
                      lyapunov=0.5 * (z1 * z1 + z2 * z2 + z3 * z3),
                      cold=cold)
    return u_sat, replace(new_mem, last_u=u_sat), diag


class JointController:
    """Stateful wrapper running one joint's hybrid controller."""

    def __init__(self, model: RevnmModel, cfg: HybridConfig):
        self.model = model
        self.cfg = cfg
        self.mem = ControllerMemory()

    def reset(self) -> None:
        self.mem = ControllerMemory()

    def tick(self, x1, x2, x3, ref: Reference, dt: float):
        u, self.mem, diag = hybrid_control(
            self.model, (x1, x2, x3), ref, self.cfg, self.mem, dt)
        return u, diag
