"""Rigid-body geometry: 3-vectors, unit quaternions, transforms, capsules.

Vectors and quaternions are plain tuples of Python floats. The per-joint
kinematics path runs hundreds of thousands of times per training run and
tuple math is both faster than small numpy arrays and trivially
deterministic. numpy enters only for matrix-shaped work (Jacobians, IK).

Conventions:
    Vec3       (x, y, z), meters unless noted
    Quat       (w, x, y, z), unit norm
    Transform  (Quat, Vec3) rotation-then-translation, i.e. p' = R p + t
"""

from __future__ import annotations

import math

Vec3 = tuple[float, float, float]
Quat = tuple[float, float, float, float]
Transform = tuple[Quat, Vec3]

VEC_ZERO: Vec3 = (0.0, 0.0, 0.0)
QUAT_IDENTITY: Quat = (1.0, 0.0, 0.0, 0.0)
IDENTITY: Transform = (QUAT_IDENTITY, VEC_ZERO)


# ---------------------------------------------------------------------------
# vectors

def vadd(a: Vec3, b: Vec3) -> Vec3:
    return (a[0] + b[0], a[1] + b[1], a[2] + b[2])


def vsub(a: Vec3, b: Vec3) -> Vec3:
    return (a[0] - b[0], a[1] - b[1], a[2] - b[2])


def vscale(a: Vec3, s: float) -> Vec3:
    return (a[0] * s, a[1] * s, a[2] * s)


def vdot(a: Vec3, b: Vec3) -> float:
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]


def vcross(a: Vec3, b: Vec3) -> Vec3:
    return (
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    )


def vnorm(a: Vec3) -> float:
    return math.sqrt(a[0] * a[0] + a[1] * a[1] + a[2] * a[2])


def vdist(a: Vec3, b: Vec3) -> float:
    return vnorm(vsub(a, b))


def vnormalize(a: Vec3) -> Vec3:
    n = vnorm(a)
    if n < 1e-12:
        raise ValueError("cannot normalize near-zero vector")
    return (a[0] / n, a[1] / n, a[2] / n)


def vlerp(a: Vec3, b: Vec3, t: float) -> Vec3:
    return (a[0] + (b[0] - a[0]) * t, a[1] + (b[1] - a[1]) * t, a[2] + (b[2] - a[2]) * t)


# ---------------------------------------------------------------------------
# quaternions

def quat_normalize(q: Quat) -> Quat:
    n = math.sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3])
    if n < 1e-12:
        raise ValueError("cannot normalize near-zero quaternion")
    return (q[0] / n, q[1] / n, q[2] / n, q[3] / n)


def quat_mul(a: Quat, b: Quat) -> Quat:
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return (
        aw * bw - ax * bx - ay * by - az * bz,
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
    )


def quat_conj(q: Quat) -> Quat:
    return (q[0], -q[1], -q[2], -q[3])


def quat_rotate(q: Quat, v: Vec3) -> Vec3:
    """Rotate v by unit quaternion q (expanded q v q*, no temporaries)."""
    w, x, y, z = q
    vx, vy, vz = v
    # t = 2 * cross(q.xyz, v)
    tx = 2.0 * (y * vz - z * vy)
    ty = 2.0 * (z * vx - x * vz)
    tz = 2.0 * (x * vy - y * vx)
    # v' = v + w*t + cross(q.xyz, t)
    return (
        vx + w * tx + (y * tz - z * ty),
        vy + w * ty + (z * tx - x * tz),
        vz + w * tz + (x * ty - y * tx),
    )


def quat_from_axis_angle(axis: Vec3, angle: float) -> Quat:
    half = 0.5 * angle
    s = math.sin(half)
    return (math.cos(half), axis[0] * s, axis[1] * s, axis[2] * s)


def quat_to_matrix(q: Quat) -> list[list[float]]:
    w, x, y, z = q
    return [
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ]


def quat_from_matrix(m) -> Quat:
    """Shepperd's method; stable for all rotation matrices."""
    t = m[0][0] + m[1][1] + m[2][2]
    if t > 0:
        s = math.sqrt(t + 1.0) * 2
        return quat_normalize((0.25 * s, (m[2][1] - m[1][2]) / s,
                               (m[0][2] - m[2][0]) / s, (m[1][0] - m[0][1]) / s))
    if m[0][0] > m[1][1] and m[0][0] > m[2][2]:
        s = math.sqrt(1.0 + m[0][0] - m[1][1] - m[2][2]) * 2
        return quat_normalize(((m[2][1] - m[1][2]) / s, 0.25 * s,
                               (m[0][1] + m[1][0]) / s, (m[0][2] + m[2][0]) / s))
    if m[1][1] > m[2][2]:
        s = math.sqrt(1.0 + m[1][1] - m[0][0] - m[2][2]) * 2
        return quat_normalize(((m[0][2] - m[2][0]) / s, (m[0][1] + m[1][0]) / s,
                               0.25 * s, (m[1][2] + m[2][1]) / s))
    s = math.sqrt(1.0 + m[2][2] - m[0][0] - m[1][1]) * 2
    return quat_normalize(((m[1][0] - m[0][1]) / s, (m[0][2] + m[2][0]) / s,
                           (m[1][2] + m[2][1]) / s, 0.25 * s))


def quat_angle(a: Quat, b: Quat) -> float:
    """Geodesic angle between two orientations, in [0, pi]."""
    d = abs(a[0] * b[0] + a[1] * b[1] + a[2] * b[2] + a[3] * b[3])
    return 2.0 * math.acos(min(1.0, d))


def quat_from_euler(roll: float, pitch: float, yaw: float) -> Quat:
    """ZYX intrinsic (yaw about z, then pitch about y, then roll about x)."""
    qz = quat_from_axis_angle((0.0, 0.0, 1.0), yaw)
    qy = quat_from_axis_angle((0.0, 1.0, 0.0), pitch)
    qx = quat_from_axis_angle((1.0, 0.0, 0.0), roll)
    return quat_mul(quat_mul(qz, qy), qx)


# ---------------------------------------------------------------------------
# transforms

def t_compose(a: Transform, b: Transform) -> Transform:
    """a then b applied in a's frame: result maps p -> a(b(p))."""
    return (quat_mul(a[0], b[0]), vadd(quat_rotate(a[0], b[1]), a[1]))


def t_inverse(t: Transform) -> Transform:
    qi = quat_conj(t[0])
    return (qi, vscale(quat_rotate(qi, t[1]), -1.0))


def t_point(t: Transform, p: Vec3) -> Vec3:
    return vadd(quat_rotate(t[0], p), t[1])


def t_vector(t: Transform, v: Vec3) -> Vec3:
    return quat_rotate(t[0], v)


def transform_point(t: Transform, p: Vec3) -> Vec3:
    return t_point(t, p)


def t_from_pos(p: Vec3) -> Transform:
    return (QUAT_IDENTITY, p)


# ---------------------------------------------------------------------------
# segments and capsules

def closest_point_on_segment(p: Vec3, a: Vec3, b: Vec3) -> tuple[float, Vec3]:
    ab = vsub(b, a)
    denom = vdot(ab, ab)
    if denom < 1e-18:
        return 0.0, a
    t = vdot(vsub(p, a), ab) / denom
    t = 0.0 if t < 0.0 else (1.0 if t > 1.0 else t)
    return t, vadd(a, vscale(ab, t))


def segment_segment_closest(p0: Vec3, p1: Vec3, q0: Vec3, q1: Vec3):
    """Closest points between segments [p0,p1] and [q0,q1].

    Returns (s, t, point_on_p, point_on_q, distance). Standard clamped
    quadratic minimization; handles parallel and degenerate segments.
    """
    d1x = p1[0] - p0[0]
    d1y = p1[1] - p0[1]
    d1z = p1[2] - p0[2]
    d2x = q1[0] - q0[0]
    d2y = q1[1] - q0[1]
    d2z = q1[2] - q0[2]
    rx = p0[0] - q0[0]
    ry = p0[1] - q0[1]
    rz = p0[2] - q0[2]
    a = d1x * d1x + d1y * d1y + d1z * d1z
    e = d2x * d2x + d2y * d2y + d2z * d2z
    f = d2x * rx + d2y * ry + d2z * rz
    EPS = 1e-14
    if a <= EPS and e <= EPS:
        s = t = 0.0
    elif a <= EPS:
        s = 0.0
        t = min(max(f / e, 0.0), 1.0)
    else:
        c = d1x * rx + d1y * ry + d1z * rz
        if e <= EPS:
            t = 0.0
            s = min(max(-c / a, 0.0), 1.0)
        else:
            b = d1x * d2x + d1y * d2y + d1z * d2z
            denom = a * e - b * b
            s = min(max((b * f - c * e) / denom, 0.0), 1.0) if denom > EPS else 0.0
            t = (b * s + f) / e
            if t < 0.0:
                t = 0.0
                s = min(max(-c / a, 0.0), 1.0)
            elif t > 1.0:
                t = 1.0
                s = min(max((b - c) / a, 0.0), 1.0)
    cp = (p0[0] + d1x * s, p0[1] + d1y * s, p0[2] + d1z * s)
    cq = (q0[0] + d2x * t, q0[1] + d2y * t, q0[2] + d2z * t)
    dx = cp[0] - cq[0]
    dy = cp[1] - cq[1]
    dz = cp[2] - cq[2]
    return s, t, cp, cq, math.sqrt(dx * dx + dy * dy + dz * dz)


class Capsule:
    """Capsule in a link frame: segment [a, b] swept by a sphere of radius r."""

    __slots__ = ("a", "b", "r")

    def __init__(self, a: Vec3, b: Vec3, r: float):
        if r <= 0:
            raise ValueError("capsule radius must be positive")
        self.a = a
        self.b = b
        self.r = r

    def transformed(self, t: Transform) -> "Capsule":
        return Capsule(t_point(t, self.a), t_point(t, self.b), self.r)

    def __repr__(self):
        return f"Capsule(a={self.a}, b={self.b}, r={self.r})"


def capsule_distance(ca: Capsule, cb: Capsule):
    """Surface distance between capsules; negative means penetration.

    Returns (distance, point_on_a_surface, point_on_b_surface, normal_b_to_a).
    """
    _, _, pa, pb, d = segment_segment_closest(ca.a, ca.b, cb.a, cb.b)
    if d > 1e-12:
        n = vscale(vsub(pa, pb), 1.0 / d)
    else:
        n = (0.0, 0.0, 1.0)
    sa = vsub(pa, vscale(n, ca.r))
    sb = vadd(pb, vscale(n, cb.r))
    return d - ca.r - cb.r, sa, sb, n


def capsule_point_distance(c: Capsule, p: Vec3) -> float:
    """Distance from point to capsule surface; negative when inside."""
    _, cp = closest_point_on_segment(p, c.a, c.b)
    return vdist(p, cp) - c.r
