"""Deterministic fixed-step simulator of a two-link hydraulic manipulator.

Each joint couples three layers: planar rigid-body dynamics of the boom/arm
pair, a single-rod cylinder with compressible chambers and internal leakage,
and a proportional valve whose command channel carries a dead zone and a
play-type hysteresis. The module also provides a small synthetic plant whose
dynamics are an integrator chain with known residual networks; it serves as a
controllable ground truth for controller tests.

Conventions: joint angles are measured CCW from the +x axis (boom) and from
the boom line (arm); gravity acts along -y. Piston displacement is measured
from mid-stroke, so chamber volumes are ``V1 = V01 + A1*y`` and
``V2 = V02 - A2*y``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import DomainError

RPM_TO_RAD_S = 2.0 * math.pi / 60.0

# sin(theta) below this leaves the cylinder with no moment arm
_SINGULAR_SIN = 1e-6


# ---------------------------------------------------------------------------
# parameter containers
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LinkParams:
    """Rigid-link parameters for one joint of the planar chain.

    ``rot_damping`` is given in N*m per rev/min (vendor convention) and is
    converted to N*m*s/rad via :attr:`damping_si`.
    """

    mass: float          # kg
    inertia: float       # kg m^2, about the center of mass
    length: float        # m, pivot to next pivot
    com_offset: float    # m, pivot to center of mass
    rot_damping: float   # N m / (rev/min)

    def __post_init__(self):
        for name in ("mass", "inertia", "length", "com_offset", "rot_damping"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"LinkParams.{name} must be strictly positive")

    @property
    def damping_si(self) -> float:
        """Rotary damping in N*m*s/rad."""
        return self.rot_damping / RPM_TO_RAD_S


@dataclass(frozen=True)
class ActuatorParams:
    """Single-rod cylinder, its valve, and the oil properties."""

    piston_diameter: float   # m
    rod_diameter: float      # m
    stroke: float            # m
    dead_volume_1: float     # m^3, cap-side volume at mid-stroke
    dead_volume_2: float     # m^3, rod-side volume at mid-stroke
    bulk_modulus: float      # Pa
    leak_coeff: float        # m^3/s/Pa, internal leakage
    viscous_friction: float  # N s/m
    orifice_1: float         # m^2, lumped Cd*w for the cap-side land
    orifice_2: float         # m^2, lumped Cd*w for the rod-side land
    oil_density: float       # kg/m^3
    pump_pressure: float     # Pa
    tank_pressure: float     # Pa
    valve_gain: float        # spool position per unit conditioned signal

    def __post_init__(self):
        if not (0.0 < self.rod_diameter < self.piston_diameter):
            raise ValueError("need 0 < rod_diameter < piston_diameter")
        if not (self.pump_pressure > self.tank_pressure >= 0.0):
            raise ValueError("need pump_pressure > tank_pressure >= 0")
        for name in ("stroke", "dead_volume_1", "dead_volume_2", "bulk_modulus",
                     "oil_density", "orifice_1", "orifice_2"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"ActuatorParams.{name} must be strictly positive")
        if self.leak_coeff < 0.0 or self.viscous_friction < 0.0:
            raise ValueError("leak_coeff and viscous_friction must be >= 0")

    @property
    def area_1(self) -> float:
        """Cap-side piston area, m^2."""
        return math.pi * self.piston_diameter ** 2 / 4.0

    @property
    def area_2(self) -> float:
        """Rod-side annulus area, m^2."""
        return math.pi * (self.piston_diameter ** 2 - self.rod_diameter ** 2) / 4.0


@dataclass(frozen=True)
class NonlinearityParams:
    """Dead zone band and hysteresis width of the command channel."""

    dead_left: float    # <= 0
    dead_right: float   # >= 0
    hyst_width: float   # >= 0

    def __post_init__(self):
        if not (self.dead_left <= 0.0 <= self.dead_right):
            raise ValueError("need dead_left <= 0 <= dead_right")
        if self.hyst_width < 0.0:
            raise ValueError("hyst_width must be >= 0")


@dataclass(frozen=True)
class LinkageGeometry:
    """Triangle linkage between a joint and its cylinder.

    The cylinder spans two pivots at distances ``base_arm`` and ``rod_arm``
    from the joint axis; the cylinder length follows the law of cosines in
    the included angle ``q + angle_offset``.
    """

    base_arm: float      # m
    rod_arm: float       # m
    angle_offset: float  # rad, maps joint angle to the included angle
    y_min: float         # m, shortest admissible cylinder length
    y_max: float         # m, longest admissible cylinder length

    def __post_init__(self):
        if not (self.base_arm > 0.0 and self.rod_arm > 0.0):
            raise ValueError("lever arms must be strictly positive")
        if not (0.0 < self.y_min < self.y_max):
            raise ValueError("need 0 < y_min < y_max")
        lo = abs(self.base_arm - self.rod_arm)
        hi = self.base_arm + self.rod_arm
        if not (lo < self.y_min and self.y_max < hi):
            raise ValueError(
                "triangle inequality violated on [y_min, y_max]: "
                f"need {lo:.6g} < y_min and y_max < {hi:.6g}")

    @property
    def mid_length(self) -> float:
        return 0.5 * (self.y_min + self.y_max)


@dataclass(frozen=True)
class JointParams:
    link: LinkParams
    actuator: ActuatorParams
    nonlinearity: NonlinearityParams
    geometry: LinkageGeometry

    def __post_init__(self):
        travel = self.geometry.y_max - self.geometry.y_min
        if travel > self.actuator.stroke * (1.0 + 1e-9):
            raise ValueError("geometry travel exceeds actuator stroke")


@dataclass(frozen=True)
class PlantParams:
    joints: tuple[JointParams, JointParams]
    gravity: float = 9.81

    def __post_init__(self):
        if len(self.joints) != 2:
            raise ValueError("plant models exactly two joints (boom, arm)")


# ---------------------------------------------------------------------------
# state containers
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HysteresisState:
    """Memory of the play-type hysteresis: held output, last input, and the
    last movement direction (-1, 0, +1)."""

    held: float = 0.0
    last_input: float = 0.0
    direction: int = 0

    def __post_init__(self):
        if not math.isfinite(self.held):
            raise ValueError("held value must be finite")
        if self.direction not in (-1, 0, 1):
            raise ValueError("direction must be -1, 0 or +1")


@dataclass(frozen=True)
class PlantState:
    """Full simulator state at time ``t``."""

    q: np.ndarray                          # rad, shape (2,)
    qd: np.ndarray                         # rad/s, shape (2,)
    p1: np.ndarray                         # Pa, cap-side, shape (2,)
    p2: np.ndarray                         # Pa, rod-side, shape (2,)
    hyst: tuple[HysteresisState, HysteresisState]
    t: float = 0.0


@dataclass(frozen=True)
class PlantDerivative:
    qd: np.ndarray
    qdd: np.ndarray
    p1dot: np.ndarray
    p2dot: np.ndarray


# ---------------------------------------------------------------------------
# command-channel nonlinearities
# ---------------------------------------------------------------------------


def dead_zone(u: float, p: NonlinearityParams) -> float:
    """Dead zone: zero inside [dead_left, dead_right], shifted outside."""
    if u > p.dead_right:
        return u - p.dead_right
    if u < p.dead_left:
        return u - p.dead_left
    return 0.0


def hysteresis_output(state: HysteresisState, u: float,
                      p: NonlinearityParams) -> float:
    """Evaluate the hysteresis output for input ``u`` without mutating state.

    Play operator of width ``hyst_width`` with a hard zero inside the open
    central band: the output is pinned to the band ``u -/+ width/2`` and
    otherwise keeps the value held at the last direction change.
    """
    half = 0.5 * p.hyst_width
    if -half < u < half:
        return 0.0
    return min(max(state.held, u - half), u + half)


def hysteresis_step(state: HysteresisState, u: float, udot: float,
                    p: NonlinearityParams) -> tuple[HysteresisState, float]:
    """Advance the hysteresis memory one sample and return its output.

    ``udot`` is the caller's backward-difference slope estimate; it only
    refreshes the stored direction sign (the output itself is determined by
    the play-band projection, which resumes motion exactly when the input has
    moved ``hyst_width`` past the reversal point).
    """
    out = hysteresis_output(state, u, p)
    if udot > 0.0:
        direction = 1
    elif udot < 0.0:
        direction = -1
    else:
        direction = state.direction
    return HysteresisState(held=out, last_input=u, direction=direction), out


def conditioned_signal(u: float, state: HysteresisState,
                       p: NonlinearityParams) -> float:
    """Dead zone followed by hysteresis, evaluated read-only."""
    return hysteresis_output(state, dead_zone(u, p), p)


# ---------------------------------------------------------------------------
# hydraulics
# ---------------------------------------------------------------------------


def valve_flow(y_v: float, P1: float, P2: float,
               p: ActuatorParams) -> tuple[float, float]:
    """Orifice flows into the cap chamber and out of the rod chamber.

    Pressures are clamped to [tank, pump] before the square roots; a negative
    root argument after clamping indicates inconsistent parameters and raises
    :class:`DomainError`.
    """
    if y_v == 0.0:
        return 0.0, 0.0
    ps, p0 = p.pump_pressure, p.tank_pressure
    c1 = min(max(P1, p0), ps)
    c2 = min(max(P2, p0), ps)
    if y_v > 0.0:
        a1, a2 = ps - c1, c2 - p0
    else:
        a1, a2 = c1 - p0, ps - c2
    if a1 < 0.0 or a2 < 0.0:
        raise DomainError("valve pressure drop negative after clamping")
    root_rho = math.sqrt(p.oil_density)
    q1 = p.orifice_1 / root_rho * y_v * math.sqrt(a1)
    q2 = p.orifice_2 / root_rho * y_v * math.sqrt(a2)
    return q1, q2


def pressure_derivatives(y_piston: float, ydot: float, P1: float, P2: float,
                         Q1: float, Q2: float,
                         p: ActuatorParams) -> tuple[float, float]:
    """Chamber pressure rates from flow continuity with internal leakage.

    ``y_piston`` is the displacement from mid-stroke. Raises
    :class:`DomainError` when either chamber volume is non-positive.
    """
    v1 = p.dead_volume_1 + p.area_1 * y_piston
    v2 = p.dead_volume_2 - p.area_2 * y_piston
    if v1 <= 0.0 or v2 <= 0.0:
        raise DomainError("non-positive chamber volume (stroke limit violated)")
    leak = p.leak_coeff * (P1 - P2)
    p1dot = p.bulk_modulus / v1 * (Q1 - p.area_1 * ydot - leak)
    p2dot = p.bulk_modulus / v2 * (p.area_2 * ydot + leak - Q2)
    return p1dot, p2dot


def actuator_force(P1: float, P2: float, ydot: float,
                   p: ActuatorParams) -> float:
    """Net piston force: chamber pressures minus viscous friction."""
    return P1 * p.area_1 - P2 * p.area_2 - p.viscous_friction * ydot


# ---------------------------------------------------------------------------
# linkage
# ---------------------------------------------------------------------------


def piston_length(q: float, g: LinkageGeometry) -> float:
    """Cylinder length for joint angle ``q`` (law of cosines)."""
    th = q + g.angle_offset
    y2 = g.base_arm ** 2 + g.rod_arm ** 2 \
        - 2.0 * g.base_arm * g.rod_arm * math.cos(th)
    return math.sqrt(y2)


def joint_angle(y: float, g: LinkageGeometry) -> float:
    """Inverse of :func:`piston_length` on the admissible branch."""
    c = (g.base_arm ** 2 + g.rod_arm ** 2 - y ** 2) \
        / (2.0 * g.base_arm * g.rod_arm)
    if not -1.0 <= c <= 1.0:
        raise DomainError(f"cylinder length {y:.6g} outside the linkage triangle")
    return math.acos(c) - g.angle_offset


def _linkage_scalar(q: float, qd: float,
                    g: LinkageGeometry) -> tuple[float, float, float]:
    """(y, dy/dq, d/dt dy/dq) for one joint."""
    th = q + g.angle_offset
    ab = g.base_arm * g.rod_arm
    s, c = math.sin(th), math.cos(th)
    y = math.sqrt(g.base_arm ** 2 + g.rod_arm ** 2 - 2.0 * ab * c)
    if abs(s) < _SINGULAR_SIN:
        raise DomainError("linkage triangle degenerate (zero moment arm)")
    jac = ab * s / y
    jdot = ab * qd * (c / y - ab * s * s / y ** 3)
    return y, jac, jdot


def linkage_maps(q: np.ndarray, geoms, qd: np.ndarray | None = None):
    """Cylinder lengths and the (diagonal) joint-to-piston Jacobian.

    Returns ``(y, jac, jac_dot)``; ``jac_dot`` is zero when ``qd`` is not
    given. Raises :class:`DomainError` if the triangle degenerates or a
    cylinder leaves its admissible length range.
    """
    q = np.asarray(q, dtype=float)
    n = q.shape[0]
    qd = np.zeros(n) if qd is None else np.asarray(qd, dtype=float)
    y = np.empty(n)
    jac = np.zeros((n, n))
    jdot = np.zeros((n, n))
    for i, g in enumerate(geoms):
        yi, ji, jdi = _linkage_scalar(q[i], qd[i], g)
        if not g.y_min - 1e-9 <= yi <= g.y_max + 1e-9:
            raise DomainError(
                f"cylinder {i} length {yi:.4f} outside [{g.y_min}, {g.y_max}]")
        y[i] = yi
        jac[i, i] = ji
        jdot[i, i] = jdi
    return y, jac, jdot


# ---------------------------------------------------------------------------
# rigid body
# ---------------------------------------------------------------------------


def _rigid_body_scalars(q1, q2, qd1, qd2, l1: LinkParams, l2: LinkParams,
                        gravity: float):
    """Closed-form planar two-link M, C (Christoffel), G entries."""
    m1, m2 = l1.mass, l2.mass
    a1 = l1.length
    lc1, lc2 = l1.com_offset, l2.com_offset
    alpha = l1.inertia + l2.inertia + m1 * lc1 ** 2 + m2 * (a1 ** 2 + lc2 ** 2)
    beta = m2 * a1 * lc2
    delta = l2.inertia + m2 * lc2 ** 2
    c2, s2 = math.cos(q2), math.sin(q2)
    m11 = alpha + 2.0 * beta * c2
    m12 = delta + beta * c2
    m22 = delta
    h = -beta * s2
    c11 = h * qd2
    c12 = h * (qd1 + qd2)
    c21 = -h * qd1
    g1 = (m1 * lc1 + m2 * a1) * gravity * math.cos(q1) \
        + m2 * lc2 * gravity * math.cos(q1 + q2)
    g2 = m2 * lc2 * gravity * math.cos(q1 + q2)
    return m11, m12, m22, c11, c12, c21, g1, g2


def rigid_body_matrices(q: np.ndarray, qd: np.ndarray, links,
                        gravity: float = 9.81):
    """Inertia matrix, Christoffel Coriolis matrix, and gravity vector."""
    m11, m12, m22, c11, c12, c21, g1, g2 = _rigid_body_scalars(
        q[0], q[1], qd[0], qd[1], links[0], links[1], gravity)
    M = np.array([[m11, m12], [m12, m22]])
    C = np.array([[c11, c12], [c21, 0.0]])
    G = np.array([g1, g2])
    return M, C, G


def gravity_potential(q: np.ndarray, links, gravity: float = 9.81) -> float:
    """Potential energy whose gradient is the G vector."""
    l1, l2 = links
    return (l1.mass * l1.com_offset + l2.mass * l1.length) * gravity \
        * math.sin(q[0]) \
        + l2.mass * l2.com_offset * gravity * math.sin(q[0] + q[1])


# ---------------------------------------------------------------------------
# assembled plant
# ---------------------------------------------------------------------------


def _continuous_derivative(params: PlantParams, q1, q2, qd1, qd2,
                           p1a, p2a, p1b, p2b, yv1, yv2):
    """Right-hand side of the eight continuous states for latched spools."""
    ja, jb = params.joints

    ya, jac_a, jdot_a = _linkage_scalar(q1, qd1, ja.geometry)
    yb, jac_b, jdot_b = _linkage_scalar(q2, qd2, jb.geometry)
    yda = jac_a * qd1
    ydb = jac_b * qd2

    q1a, q2a = valve_flow(yv1, p1a, p2a, ja.actuator)
    q1b, q2b = valve_flow(yv2, p1b, p2b, jb.actuator)
    pda = pressure_derivatives(ya - ja.geometry.mid_length, yda, p1a, p2a,
                               q1a, q2a, ja.actuator)
    pdb = pressure_derivatives(yb - jb.geometry.mid_length, ydb, p1b, p2b,
                               q1b, q2b, jb.actuator)

    fa = actuator_force(p1a, p2a, yda, ja.actuator)
    fb = actuator_force(p1b, p2b, ydb, jb.actuator)
    tau1 = jac_a * fa - ja.link.damping_si * qd1
    tau2 = jac_b * fb - jb.link.damping_si * qd2

    m11, m12, m22, c11, c12, c21, g1, g2 = _rigid_body_scalars(
        q1, q2, qd1, qd2, ja.link, jb.link, params.gravity)
    r1 = tau1 - c11 * qd1 - c12 * qd2 - g1
    r2 = tau2 - c21 * qd1 - g2
    det = m11 * m22 - m12 * m12
    qdd1 = (r1 * m22 - r2 * m12) / det
    qdd2 = (r2 * m11 - r1 * m12) / det
    return qd1, qd2, qdd1, qdd2, pda[0], pda[1], pdb[0], pdb[1]


def _spools(params: PlantParams, state: PlantState,
            u1: float, u2: float) -> tuple[float, float]:
    ja, jb = params.joints
    w1 = conditioned_signal(u1, state.hyst[0], ja.nonlinearity)
    w2 = conditioned_signal(u2, state.hyst[1], jb.nonlinearity)
    return ja.actuator.valve_gain * w1, jb.actuator.valve_gain * w2


def plant_derivative(params: PlantParams, state: PlantState,
                     u: np.ndarray) -> PlantDerivative:
    """Full state derivative for raw input ``u`` at the current state.

    The command nonlinearity is evaluated read-only against the stored
    hysteresis memory (the memory itself advances once per :func:`step`).
    """
    yv1, yv2 = _spools(params, state, float(u[0]), float(u[1]))
    d = _continuous_derivative(
        params, state.q[0], state.q[1], state.qd[0], state.qd[1],
        state.p1[0], state.p2[0], state.p1[1], state.p2[1], yv1, yv2)
    return PlantDerivative(
        qd=np.array(d[0:2]), qdd=np.array(d[2:4]),
        p1dot=np.array([d[4], d[6]]), p2dot=np.array([d[5], d[7]]))


class Plant:
    """Simulator instance; owns parameters and the pressure-clamp counter.

    Instances are independent and safe to run in parallel processes; nothing
    is shared between them.
    """

    def __init__(self, params: PlantParams):
        self.params = params
        self.clamp_events = 0

    def initial_state(self, q, qd=None, pressure_frac: float = 0.25,
                      t: float = 0.0) -> PlantState:
        """State at rest with chamber pressures balancing gravity."""
        q = np.asarray(q, dtype=float)
        qd = np.zeros(2) if qd is None else np.asarray(qd, dtype=float)
        p1, p2 = self.balanced_pressures(q, pressure_frac)
        return PlantState(q=q, qd=qd, p1=p1, p2=p2,
                          hyst=(HysteresisState(), HysteresisState()), t=t)

    def balanced_pressures(self, q, pressure_frac: float = 0.25):
        """Chamber pressures that statically hold ``q`` against gravity."""
        q = np.asarray(q, dtype=float)
        _, jac, _ = linkage_maps(q, [j.geometry for j in self.params.joints])
        _, _, G = rigid_body_matrices(
            q, np.zeros(2), [j.link for j in self.params.joints],
            self.params.gravity)
        p1 = np.empty(2)
        p2 = np.empty(2)
        for i, joint in enumerate(self.params.joints):
            act = joint.actuator
            f_req = G[i] / jac[i, i]
            lo, hi = act.tank_pressure, act.pump_pressure
            p2[i] = lo + pressure_frac * (hi - lo)
            p1[i] = (f_req + p2[i] * act.area_2) / act.area_1
            if not lo <= p1[i] <= hi:
                p1[i] = min(max(p1[i], lo), hi)
                # fall back: adjust the rod side to absorb the remainder
                p2[i] = (p1[i] * act.area_1 - f_req) / act.area_2
                p2[i] = min(max(p2[i], lo), hi)
        return p1, p2

    def derivative(self, state: PlantState, u) -> PlantDerivative:
        return plant_derivative(self.params, state, np.asarray(u, dtype=float))

    def step(self, state: PlantState, u, dt: float) -> PlantState:
        """One RK4 step with ``u`` held constant (zero-order hold)."""
        return self.step_n(state, u, dt, 1)

    def step_n(self, state: PlantState, u, dt: float, n: int) -> PlantState:
        """``n`` RK4 steps under a single zero-order-held input.

        The hysteresis memory is latched once per call: with a constant input
        the play projection is idempotent, so per-substep updates would give
        bit-identical results.
        """
        if dt <= 0.0:
            raise ValueError("dt must be positive")
        u = np.asarray(u, dtype=float)
        ja, jb = self.params.joints

        hyst = []
        spools = []
        for i, joint in enumerate(self.params.joints):
            v = dead_zone(float(u[i]), joint.nonlinearity)
            vdot = (v - state.hyst[i].last_input) / dt
            h_new, w = hysteresis_step(state.hyst[i], v, vdot,
                                       joint.nonlinearity)
            hyst.append(h_new)
            spools.append(joint.actuator.valve_gain * w)
        yv1, yv2 = spools

        for i, joint in enumerate(self.params.joints):
            act = joint.actuator
            if not (act.tank_pressure <= state.p1[i] <= act.pump_pressure
                    and act.tank_pressure <= state.p2[i] <= act.pump_pressure):
                self.clamp_events += 1

        z = (state.q[0], state.q[1], state.qd[0], state.qd[1],
             state.p1[0], state.p2[0], state.p1[1], state.p2[1])
        par = self.params
        for _ in range(n):
            k1 = _continuous_derivative(par, *z, yv1, yv2)
            z2 = tuple(z[i] + 0.5 * dt * k1[i] for i in range(8))
            k2 = _continuous_derivative(par, *z2, yv1, yv2)
            z3 = tuple(z[i] + 0.5 * dt * k2[i] for i in range(8))
            k3 = _continuous_derivative(par, *z3, yv1, yv2)
            z4 = tuple(z[i] + dt * k3[i] for i in range(8))
            k4 = _continuous_derivative(par, *z4, yv1, yv2)
            z = tuple(z[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i]
                                         + k4[i]) for i in range(8))

        new = PlantState(
            q=np.array(z[0:2]), qd=np.array(z[2:4]),
            p1=np.array([z[4], z[6]]), p2=np.array([z[5], z[7]]),
            hyst=(hyst[0], hyst[1]), t=state.t + n * dt)
        self._check_state(new)
        return new

    def _check_state(self, state: PlantState) -> None:
        for i, joint in enumerate(self.params.joints):
            y = piston_length(state.q[i], joint.geometry)
            g = joint.geometry
            if not g.y_min - 1e-9 <= y <= g.y_max + 1e-9:
                raise DomainError(
                    f"joint {i} cylinder length {y:.4f} left "
                    f"[{g.y_min}, {g.y_max}] at t={state.t:.4f}")
            act = joint.actuator
            yp = y - g.mid_length
            if act.dead_volume_1 + act.area_1 * yp <= 0.0 \
                    or act.dead_volume_2 - act.area_2 * yp <= 0.0:
                raise DomainError(f"joint {i} chamber volume non-positive")

    def hydraulic_energy(self, state: PlantState) -> float:
        """Elastic energy stored in the compressed chambers, J."""
        total = 0.0
        for i, joint in enumerate(self.params.joints):
            act, g = joint.actuator, joint.geometry
            yp = piston_length(state.q[i], g) - g.mid_length
            v1 = act.dead_volume_1 + act.area_1 * yp
            v2 = act.dead_volume_2 - act.area_2 * yp
            total += (v1 * state.p1[i] ** 2 + v2 * state.p2[i] ** 2) \
                / (2.0 * act.bulk_modulus)
        return total

    def mechanical_energy(self, state: PlantState) -> float:
        """Kinetic plus gravitational potential energy, J."""
        links = [j.link for j in self.params.joints]
        M, _, _ = rigid_body_matrices(state.q, state.qd, links,
                                      self.params.gravity)
        ke = 0.5 * float(state.qd @ M @ state.qd)
        return ke + gravity_potential(state.q, links, self.params.gravity)


# ---------------------------------------------------------------------------
# default parameter set
# ---------------------------------------------------------------------------


def _default_joint(mass, inertia, length, com_offset, piston_d, rod_d, stroke,
                   base_arm, rod_arm, angle_offset, y_min, y_max,
                   dead_left, dead_right) -> JointParams:
    area_1 = math.pi * piston_d ** 2 / 4.0
    area_2 = math.pi * (piston_d ** 2 - rod_d ** 2) / 4.0
    return JointParams(
        link=LinkParams(mass=mass, inertia=inertia, length=length,
                        com_offset=com_offset, rot_damping=10000.0),
        actuator=ActuatorParams(
            piston_diameter=piston_d, rod_diameter=rod_d, stroke=stroke,
            dead_volume_1=0.55 * stroke * area_1,
            dead_volume_2=0.55 * stroke * area_2,
            bulk_modulus=7.0e8,
            leak_coeff=8.333e-13,          # 0.005 L/min/bar
            viscous_friction=1.0e5,
            orifice_1=2.9496e-4,           # 600 L/min at 10 bar, full spool
            orifice_2=2.9496e-4,
            oil_density=870.0,
            pump_pressure=2.0e7,           # 200 bar
            tank_pressure=0.0,
            valve_gain=1.0),
        nonlinearity=NonlinearityParams(dead_left=dead_left,
                                        dead_right=dead_right,
                                        hyst_width=0.05),
        geometry=LinkageGeometry(base_arm=base_arm, rod_arm=rod_arm,
                                 angle_offset=angle_offset,
                                 y_min=y_min, y_max=y_max))


def default_params() -> PlantParams:
    """Boom/arm parameter set used by the stock configuration files."""
    boom = _default_joint(
        mass=8000.0, inertia=38500.0, length=7.2, com_offset=3.6,
        piston_d=0.35, rod_d=0.22, stroke=1.8,
        base_arm=2.0, rod_arm=1.3, angle_offset=1.2, y_min=1.25, y_max=3.05,
        dead_left=-0.2, dead_right=0.1)
    arm = _default_joint(
        mass=2920.0, inertia=3600.0, length=2.9, com_offset=1.45,
        piston_d=0.18, rod_d=0.125, stroke=1.7,
        base_arm=1.6, rod_arm=1.4, angle_offset=3.1, y_min=1.0, y_max=2.7,
        dead_left=-0.1, dead_right=0.2)
    return PlantParams(joints=(boom, arm))
