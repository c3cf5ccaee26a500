"""Reference trajectory generation for the two-link arm.

Supports cartesian circles (resolved through inverse kinematics with the
full analytic derivative chain up to the reference jerk), joint-space
sinusoids, and joint-space or cartesian cubic splines.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from ..control import Reference
from ..errors import WorkspaceError

_IK_SINGULAR = 1e-8


# ---------------------------------------------------------------------------
# planar two-link kinematics (base at the origin)
# ---------------------------------------------------------------------------


def forward_kinematics(q, l1: float, l2: float) -> np.ndarray:
    q1, q2 = float(q[0]), float(q[1])
    return np.array([l1 * math.cos(q1) + l2 * math.cos(q1 + q2),
                     l1 * math.sin(q1) + l2 * math.sin(q1 + q2)])


def fk_jacobian(q, l1: float, l2: float) -> np.ndarray:
    q1, q12 = float(q[0]), float(q[0]) + float(q[1])
    return np.array([[-l1 * math.sin(q1) - l2 * math.sin(q12),
                      -l2 * math.sin(q12)],
                     [l1 * math.cos(q1) + l2 * math.cos(q12),
                      l2 * math.cos(q12)]])


def fk_jacobian_dot(q, qd, l1: float, l2: float) -> np.ndarray:
    q1, q12 = float(q[0]), float(q[0]) + float(q[1])
    w1, w12 = float(qd[0]), float(qd[0]) + float(qd[1])
    return np.array([[-l1 * math.cos(q1) * w1 - l2 * math.cos(q12) * w12,
                      -l2 * math.cos(q12) * w12],
                     [-l1 * math.sin(q1) * w1 - l2 * math.sin(q12) * w12,
                      -l2 * math.sin(q12) * w12]])


def fk_jacobian_ddot(q, qd, qdd, l1: float, l2: float) -> np.ndarray:
    q1, q12 = float(q[0]), float(q[0]) + float(q[1])
    w1, w12 = float(qd[0]), float(qd[0]) + float(qd[1])
    a1, a12 = float(qdd[0]), float(qdd[0]) + float(qdd[1])
    c1, s1 = math.cos(q1), math.sin(q1)
    c12, s12 = math.cos(q12), math.sin(q12)
    e1 = -l1 * (c1 * a1 - s1 * w1 * w1) - l2 * (c12 * a12 - s12 * w12 * w12)
    e2 = -l2 * (c12 * a12 - s12 * w12 * w12)
    e3 = -l1 * (s1 * a1 + c1 * w1 * w1) - l2 * (s12 * a12 + c12 * w12 * w12)
    e4 = -l2 * (s12 * a12 + c12 * w12 * w12)
    return np.array([[e1, e2], [e3, e4]])


def inverse_kinematics(p, l1: float, l2: float,
                       elbow_up: bool = False) -> np.ndarray:
    """Joint angles reaching cartesian point ``p``; raises
    :class:`WorkspaceError` outside the annulus or at the fold."""
    px, py = float(p[0]), float(p[1])
    r2 = px * px + py * py
    c2 = (r2 - l1 * l1 - l2 * l2) / (2.0 * l1 * l2)
    if abs(c2) > 1.0:
        raise WorkspaceError(f"point ({px:.3f}, {py:.3f}) unreachable")
    q2 = math.acos(max(-1.0, min(1.0, c2)))
    if not elbow_up:
        q2 = -q2
    if abs(math.sin(q2)) < _IK_SINGULAR:
        raise WorkspaceError("target at a kinematic fold (straight arm)")
    q1 = math.atan2(py, px) - math.atan2(l2 * math.sin(q2),
                                         l1 + l2 * math.cos(q2))
    return np.array([q1, q2])


# ---------------------------------------------------------------------------
# trajectory specification
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TrajectorySpec:
    """Reference trajectory description.

    kinds:
      - ``circle``: cartesian circle; params ``center`` (2,), ``radius``,
        ``angular_rate`` (rad/s), optional ``phase`` (rad, default 0).
      - ``sinusoid``: joint-space sum spec; params ``center``, ``amplitude``,
        ``angular_rate``, ``phase`` each per joint.
      - ``spline``: cubic spline through ``knot_times``/``knot_values``;
        joint-space values unless ``cartesian`` is set.
    """

    kind: str
    duration: float
    params: dict = field(default_factory=dict)
    cartesian: bool = True
    elbow_up: bool = False

    def __post_init__(self):
        if self.kind not in ("circle", "sinusoid", "spline"):
            raise ValueError(f"unknown trajectory kind {self.kind!r}")
        if self.duration <= 0.0:
            raise ValueError("duration must be positive")


class ReferenceGenerator:
    """Evaluates a :class:`TrajectorySpec` into per-joint references."""

    def __init__(self, spec: TrajectorySpec, l1: float, l2: float):
        self.spec = spec
        self.l1 = l1
        self.l2 = l2
        if spec.kind == "spline":
            times = np.asarray(spec.params["knot_times"], dtype=float)
            values = np.asarray(spec.params["knot_values"], dtype=float)
            if values.ndim != 2 or values.shape[1] != 2:
                raise ValueError("knot_values must be (n_knots, 2)")
            if spec.cartesian:
                values = np.array([
                    inverse_kinematics(v, l1, l2, spec.elbow_up)
                    for v in values])
            self._spline = CubicSpline(times, values, axis=0,
                                       bc_type="clamped")
        else:
            self._spline = None

    # -- cartesian sources -------------------------------------------------

    def _circle_point(self, t: float):
        p = self.spec.params
        cx, cy = p["center"]
        r = p["radius"]
        w = p["angular_rate"]
        ph = p.get("phase", 0.0)
        a = w * t + ph
        pos = np.array([cx + r * math.cos(a), cy + r * math.sin(a)])
        vel = np.array([-r * w * math.sin(a), r * w * math.cos(a)])
        acc = np.array([-r * w * w * math.cos(a), -r * w * w * math.sin(a)])
        jerk = np.array([r * w ** 3 * math.sin(a), -r * w ** 3 * math.cos(a)])
        return pos, vel, acc, jerk

    def _cartesian_to_joint(self, pos, vel, acc, jerk):
        q = inverse_kinematics(pos, self.l1, self.l2, self.spec.elbow_up)
        jac = fk_jacobian(q, self.l1, self.l2)
        det = jac[0, 0] * jac[1, 1] - jac[0, 1] * jac[1, 0]
        if abs(det) < _IK_SINGULAR:
            raise WorkspaceError("reference crosses a Jacobian singularity")
        inv = np.array([[jac[1, 1], -jac[0, 1]],
                        [-jac[1, 0], jac[0, 0]]]) / det
        qd = inv @ vel
        jdot = fk_jacobian_dot(q, qd, self.l1, self.l2)
        qdd = inv @ (acc - jdot @ qd)
        jddot = fk_jacobian_ddot(q, qd, qdd, self.l1, self.l2)
        qddd = inv @ (jerk - 2.0 * jdot @ qdd - jddot @ qd)
        return q, qd, qdd, qddd

    # -- public API ---------------------------------------------------------

    def joint_references(self, t: float) -> tuple[Reference, Reference]:
        if self.spec.kind == "circle":
            q, qd, qdd, qddd = self._cartesian_to_joint(*self._circle_point(t))
        elif self.spec.kind == "sinusoid":
            p = self.spec.params
            c = np.asarray(p["center"], dtype=float)
            a = np.asarray(p["amplitude"], dtype=float)
            w = np.asarray(p["angular_rate"], dtype=float)
            ph = np.asarray(p.get("phase", np.zeros(2)), dtype=float)
            arg = w * t + ph
            q = c + a * np.sin(arg)
            qd = a * w * np.cos(arg)
            qdd = -a * w ** 2 * np.sin(arg)
            qddd = -a * w ** 3 * np.cos(arg)
        else:
            q = self._spline(t)
            qd = self._spline(t, 1)
            qdd = self._spline(t, 2)
            qddd = self._spline(t, 3)
        return (Reference(x1=float(q[0]), x2=float(qd[0]), x3=float(qdd[0]),
                          xd3=float(qddd[0])),
                Reference(x1=float(q[1]), x2=float(qd[1]), x3=float(qdd[1]),
                          xd3=float(qddd[1])))

    def cartesian_point(self, t: float) -> np.ndarray:
        """Reference end-effector position at ``t`` (via FK for joint specs)."""
        if self.spec.kind == "circle":
            return self._circle_point(t)[0]
        ref_b, ref_a = self.joint_references(t)
        return forward_kinematics((ref_b.x1, ref_a.x1), self.l1, self.l2)

    def initial_joint_position(self) -> np.ndarray:
        ref_b, ref_a = self.joint_references(0.0)
        return np.array([ref_b.x1, ref_a.x1])


def gen_reference(spec: TrajectorySpec, t: float, l1: float,
                  l2: float) -> tuple[Reference, Reference]:
    """One-shot reference evaluation (builds a generator internally)."""
    return ReferenceGenerator(spec, l1, l2).joint_references(t)
