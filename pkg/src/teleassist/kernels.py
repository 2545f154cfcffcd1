"""Numeric kernels for pose math.

Everything here operates on plain float64 ndarrays so it stays
nopython-compatible; the wrapping dataclasses live in
:mod:`teleassist.geometry`. Quaternions are scalar-first ``(w, x, y, z)``
and are kept canonical with ``w >= 0`` (on ``w == 0`` the first nonzero
component is made positive).
"""

import numpy as np

from ._accel import njit

_EPS = 1e-12


@njit(cache=True)
def quat_canonical(q):
    """Normalize and fix the sign ambiguity of a unit quaternion."""
    n = np.sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3])
    if np.abs(n - 1.0) > 1e-12:
        out = q / n
    else:
        out = q.copy()  # already unit: dividing would wobble the last ulp
    # q and -q are the same rotation; pick the half-space deterministically
    for i in range(4):
        if out[i] > _EPS:
            break
        if out[i] < -_EPS:
            out = -out
            break
    return out


@njit(cache=True)
def quat_mul(a, b):
    w = a[0] * b[0] - a[1] * b[1] - a[2] * b[2] - a[3] * b[3]
    x = a[0] * b[1] + a[1] * b[0] + a[2] * b[3] - a[3] * b[2]
    y = a[0] * b[2] - a[1] * b[3] + a[2] * b[0] + a[3] * b[1]
    z = a[0] * b[3] + a[1] * b[2] - a[2] * b[1] + a[3] * b[0]
    return np.array([w, x, y, z])


@njit(cache=True)
def quat_conj(q):
    return np.array([q[0], -q[1], -q[2], -q[3]])


@njit(cache=True)
def quat_rotate(q, v):
    """Rotate vector v by unit quaternion q (q v q*)."""
    # expanded form, avoids building the full product quaternions
    qw, qx, qy, qz = q[0], q[1], q[2], q[3]
    tx = 2.0 * (qy * v[2] - qz * v[1])
    ty = 2.0 * (qz * v[0] - qx * v[2])
    tz = 2.0 * (qx * v[1] - qy * v[0])
    return np.array(
        [
            v[0] + qw * tx + (qy * tz - qz * ty),
            v[1] + qw * ty + (qz * tx - qx * tz),
            v[2] + qw * tz + (qx * ty - qy * tx),
        ]
    )


@njit(cache=True)
def quat_to_mat(q):
    """3x3 rotation matrix; columns are the body axes in world frame."""
    w, x, y, z = q[0], q[1], q[2], q[3]
    return np.array(
        [
            [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y)],
            [2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x)],
            [2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y)],
        ]
    )


@njit(cache=True)
def quat_angle_rad(a, b):
    """Geodesic angle between two unit quaternions, in [0, pi]."""
    # atan2 of the relative quaternion: well conditioned near zero, where
    # arccos of the dot product throws away ~1e-8 rad to rounding
    rel = quat_mul(quat_conj(a), b)
    s = np.sqrt(rel[1] * rel[1] + rel[2] * rel[2] + rel[3] * rel[3])
    return 2.0 * np.arctan2(s, np.abs(rel[0]))


@njit(cache=True)
def quat_slerp(a, b, t):
    """Spherical interpolation along the shorter arc."""
    d = a[0] * b[0] + a[1] * b[1] + a[2] * b[2] + a[3] * b[3]
    bb = b.copy()
    if d < 0.0:
        bb = -bb
        d = -d
    if d > 0.9999995:
        out = a + t * (bb - a)
        return quat_canonical(out)
    th = np.arccos(d)
    s = np.sin(th)
    wa = np.sin((1.0 - t) * th) / s
    wb = np.sin(t * th) / s
    return quat_canonical(wa * a + wb * bb)


@njit(cache=True)
def compose(p1, q1, p2, q2):
    """Pose composition: world_T_a * a_T_b -> world_T_b."""
    p = p1 + quat_rotate(q1, p2)
    q = quat_canonical(quat_mul(q1, q2))
    return p, q


@njit(cache=True)
def relative(p1, q1, p2, q2):
    """a_T_b given world poses of a and b."""
    qc = quat_conj(q1)
    p = quat_rotate(qc, p2 - p1)
    q = quat_canonical(quat_mul(qc, q2))
    return p, q


@njit(cache=True)
def axis_angle_quat(axis, angle):
    n = np.sqrt(axis[0] ** 2 + axis[1] ** 2 + axis[2] ** 2)
    h = 0.5 * angle
    s = np.sin(h) / n
    return quat_canonical(
        np.array([np.cos(h), axis[0] * s, axis[1] * s, axis[2] * s])
    )


@njit(cache=True)
def quat_from_mat(m):
    """Unit quaternion from a proper rotation matrix (Shepperd's method)."""
    t = m[0, 0] + m[1, 1] + m[2, 2]
    if t > 0.0:
        s = np.sqrt(t + 1.0) * 2.0
        q = np.array(
            [0.25 * s, (m[2, 1] - m[1, 2]) / s, (m[0, 2] - m[2, 0]) / s, (m[1, 0] - m[0, 1]) / s]
        )
    elif m[0, 0] > m[1, 1] and m[0, 0] > m[2, 2]:
        s = np.sqrt(1.0 + m[0, 0] - m[1, 1] - m[2, 2]) * 2.0
        q = np.array(
            [(m[2, 1] - m[1, 2]) / s, 0.25 * s, (m[0, 1] + m[1, 0]) / s, (m[0, 2] + m[2, 0]) / s]
        )
    elif m[1, 1] > m[2, 2]:
        s = np.sqrt(1.0 + m[1, 1] - m[0, 0] - m[2, 2]) * 2.0
        q = np.array(
            [(m[0, 2] - m[2, 0]) / s, (m[0, 1] + m[1, 0]) / s, 0.25 * s, (m[1, 2] + m[2, 1]) / s]
        )
    else:
        s = np.sqrt(1.0 + m[2, 2] - m[0, 0] - m[1, 1]) * 2.0
        q = np.array(
            [(m[1, 0] - m[0, 1]) / s, (m[0, 2] + m[2, 0]) / s, (m[1, 2] + m[2, 1]) / s, 0.25 * s]
        )
    return quat_canonical(q)


@njit(cache=True)
def extent_along(q, half_extents, u):
    """Half-extent of the oriented box along world unit direction u."""
    m = quat_to_mat(q)
    e = 0.0
    for i in range(3):
        d = m[0, i] * u[0] + m[1, i] * u[1] + m[2, i] * u[2]
        e += half_extents[i] * abs(d)
    return e


@njit(cache=True)
def vertical_extent(q, half_extents):
    m = quat_to_mat(q)
    return (
        half_extents[0] * abs(m[2, 0])
        + half_extents[1] * abs(m[2, 1])
        + half_extents[2] * abs(m[2, 2])
    )


@njit(cache=True)
def footprints_overlap(p1, q1, p2, q2, half_extents):
    """Separating-axis test on the horizontal footprints of two equal boxes.

    Candidate axes are the horizontal projections of both bodies' axes; a
    near-vertical axis projects to ~0 and is skipped.
    """
    d = p2 - p1
    m1 = quat_to_mat(q1)
    m2 = quat_to_mat(q2)
    for src in range(2):
        m = m1 if src == 0 else m2
        for i in range(3):
            ux = m[0, i]
            uy = m[1, i]
            n = np.sqrt(ux * ux + uy * uy)
            if n < 1e-9:
                continue
            ux /= n
            uy /= n
            u = np.array([ux, uy, 0.0])
            sep = abs(d[0] * ux + d[1] * uy)
            if sep > extent_along(q1, half_extents, u) + extent_along(
                q2, half_extents, u
            ) + 1e-9:
                return False
    return True


@njit(cache=True)
def step_toward(p, q, tp, tq, max_lin, max_ang):
    """One bounded step from (p, q) toward (tp, tq); never overshoots."""
    dp = tp - p
    dist = np.sqrt(dp[0] ** 2 + dp[1] ** 2 + dp[2] ** 2)
    if dist <= max_lin or dist < _EPS:
        np_ = tp.copy()
    else:
        np_ = p + dp * (max_lin / dist)
    ang = quat_angle_rad(q, tq)
    if ang <= max_ang or ang < _EPS:
        nq = tq.copy()
    else:
        nq = quat_slerp(q, tq, max_ang / ang)
    return np_, nq


@njit(cache=True)
def twist_about_axis(q, axis):
    """Twist component of q about a world unit axis (swing removed)."""
    w = q[0]
    d = q[1] * axis[0] + q[2] * axis[1] + q[3] * axis[2]
    n = np.sqrt(w * w + d * d)
    if n < _EPS:
        # pure 180-degree swing: twist undefined, collapse to identity
        return np.array([1.0, 0.0, 0.0, 0.0])
    return quat_canonical(np.array([w, d * axis[0], d * axis[1], d * axis[2]]))
