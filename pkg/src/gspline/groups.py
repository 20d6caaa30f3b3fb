"""Lie groups acting on R^d: translations, SO(2), (R+,x), SO(3), and the
quotient 2-sphere.

Each group works on plain numpy parameter arrays (vectorized over leading
axes) and is exposed both through the :class:`GroupElement` wrapper and
through the module-level functional API (``product``, ``inverse``, ``log``,
...). Parameterizations:

* ``Trans(d)``   -- offset vector, shape ``(d,)``
* ``SO2``        -- rotation angle theta (radians), scalar
* ``ScalePos``   -- positive scale s, scalar
* ``SO3``        -- 3x3 rotation matrix, row-major
* ``Sphere2``    -- (beta, gamma) with beta in [0, pi], gamma in [0, 2pi)
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    BranchCutSingular,
    DimensionMismatch,
    GroupMismatch,
    QuotientHasNoProduct,
)

_TWO_PI = 2.0 * np.pi


def wrap_angle(theta):
    """Wrap angles into (-pi, pi].

    Symmetric wrapping keeps B-spline basis functions centered about their
    center elements; see the Log maps below.
    """
    theta = np.asarray(theta, dtype=float)
    wrapped = np.mod(theta + np.pi, _TWO_PI) - np.pi
    wrapped = np.where(wrapped == -np.pi, np.pi, wrapped)
    return wrapped if wrapped.ndim else float(wrapped)


def rot_z(angle):
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def rot_y(angle):
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def euler_zyz(alpha, beta, gamma):
    """R = R_z(gamma) . R_y(beta) . R_z(alpha)."""
    return rot_z(gamma) @ rot_y(beta) @ rot_z(alpha)


class Group:
    """A Lie group H together with its action on R^d."""

    name: str
    algebra_dim: int
    action_dim: int

    def __eq__(self, other):
        return type(self) is type(other) and self.action_dim == other.action_dim

    def __hash__(self):
        return hash((type(self), self.action_dim))

    def __repr__(self):
        return self.name

    # -- core structure, on raw parameter arrays -------------------------
    def identity_params(self):
        raise NotImplementedError

    def product(self, a, b):
        raise NotImplementedError

    def inverse(self, a):
        raise NotImplementedError

    def act(self, a, x):
        """Action of the element(s) ``a`` on vectors ``x`` (last axis = d)."""
        raise NotImplementedError

    def det_action(self, a):
        """|det| of the Jacobian of ``act``; strictly positive."""
        raise NotImplementedError

    def log(self, a):
        """Algebra coefficients of Log, shape (..., algebra_dim)."""
        raise NotImplementedError

    def exp(self, v):
        raise NotImplementedError

    def validate(self, params):
        return np.asarray(params, dtype=float)

    # -- derived ----------------------------------------------------------
    def relative_log(self, ref, a):
        """Log(ref^-1 . a); Sphere2 overrides with the quotient version."""
        return self.log(self.product(self.inverse(ref), a))

    def distance(self, a, b):
        rel = self.relative_log(a, b)
        return np.linalg.norm(np.atleast_1d(rel), axis=-1)

    def allclose(self, a, b, tol=1e-9):
        return np.all(np.abs(np.asarray(a) - np.asarray(b)) <= tol)


class Trans(Group):
    """Translation group (R^d, +)."""

    algebra_dim = None  # set per instance

    def __init__(self, d=2):
        self.name = f"Trans({d})"
        self.algebra_dim = d
        self.action_dim = d

    def identity_params(self):
        return np.zeros(self.action_dim)

    def product(self, a, b):
        return np.asarray(a, dtype=float) + np.asarray(b, dtype=float)

    def inverse(self, a):
        return -np.asarray(a, dtype=float)

    def act(self, a, x):
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.action_dim:
            raise DimensionMismatch(f"expected last axis {self.action_dim}")
        return x + np.asarray(a, dtype=float)

    def det_action(self, a):
        return np.ones(np.shape(a)[:-1]) if np.ndim(a) > 1 else 1.0

    def log(self, a):
        return np.asarray(a, dtype=float)

    def exp(self, v):
        return np.asarray(v, dtype=float)

    def validate(self, params):
        params = np.asarray(params, dtype=float)
        if params.shape[-1] != self.action_dim:
            raise DimensionMismatch(
                f"Trans({self.action_dim}) takes {self.action_dim}-vectors"
            )
        return params


class SO2(Group):
    """Planar rotations, parameterized by the angle."""

    name = "SO2"
    algebra_dim = 1
    action_dim = 2

    def identity_params(self):
        return 0.0

    def product(self, a, b):
        return wrap_angle(np.asarray(a, dtype=float) + np.asarray(b, dtype=float))

    def inverse(self, a):
        return wrap_angle(-np.asarray(a, dtype=float))

    def matrix(self, a):
        a = np.asarray(a, dtype=float)
        c, s = np.cos(a), np.sin(a)
        row0 = np.stack([c, -s], axis=-1)
        row1 = np.stack([s, c], axis=-1)
        return np.stack([row0, row1], axis=-2)

    def act(self, a, x):
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != 2:
            raise DimensionMismatch("SO2 acts on R^2")
        return np.einsum("...ij,...j->...i", self.matrix(a), x)

    def det_action(self, a):
        return np.ones(np.shape(a)) if np.ndim(a) else 1.0

    def log(self, a):
        return np.asarray(wrap_angle(a))[..., None]

    def exp(self, v):
        v = np.asarray(v, dtype=float)
        out = wrap_angle(v[..., 0])
        return out

    def validate(self, params):
        return wrap_angle(params)


class ScalePos(Group):
    """Positive scalings (R+, x) acting on R^d by scalar multiplication."""

    algebra_dim = 1

    def __init__(self, d=2):
        self.name = f"ScalePos(d={d})"
        self.action_dim = d

    def identity_params(self):
        return 1.0

    def product(self, a, b):
        return np.asarray(a, dtype=float) * np.asarray(b, dtype=float)

    def inverse(self, a):
        return 1.0 / np.asarray(a, dtype=float)

    def act(self, a, x):
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.action_dim:
            raise DimensionMismatch(f"ScalePos here acts on R^{self.action_dim}")
        return np.asarray(a, dtype=float)[..., None] * x if np.ndim(a) else np.asarray(a) * x

    def det_action(self, a):
        return np.asarray(a, dtype=float) ** self.action_dim

    def log(self, a):
        return np.log(np.asarray(a, dtype=float))[..., None]

    def exp(self, v):
        v = np.asarray(v, dtype=float)
        out = np.exp(v[..., 0])
        return out if out.ndim else float(out)

    def validate(self, params):
        params = np.asarray(params, dtype=float)
        if np.any(params <= 0):
            raise ValueError("scale must be strictly positive")
        return params


class SO3(Group):
    """3D rotations stored as 3x3 matrices.

    The Lie algebra basis {A_1, A_2, A_3} generates infinitesimal rotations
    about the x, y, z axes; Log returns the axis-angle coefficients in this
    basis and rejects angles within tolerance of the branch cut at pi.
    """

    name = "SO3"
    algebra_dim = 3
    action_dim = 3
    branch_tol = 1e-8

    def identity_params(self):
        return np.eye(3)

    def product(self, a, b):
        return np.asarray(a, dtype=float) @ np.asarray(b, dtype=float)

    def inverse(self, a):
        return np.swapaxes(np.asarray(a, dtype=float), -1, -2)

    def act(self, a, x):
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != 3:
            raise DimensionMismatch("SO3 acts on R^3")
        return np.einsum("...ij,...j->...i", np.asarray(a, dtype=float), x)

    def det_action(self, a):
        a = np.asarray(a, dtype=float)
        return np.ones(a.shape[:-2]) if a.ndim > 2 else 1.0

    def log(self, a):
        a = np.asarray(a, dtype=float)
        tr = np.trace(a, axis1=-2, axis2=-1)
        cos_angle = np.clip((tr - 1.0) / 2.0, -1.0, 1.0)
        angle = np.arccos(cos_angle)
        if np.any(angle >= np.pi - self.branch_tol):
            raise BranchCutSingular("SO3 Log within tolerance of angle pi")
        # skew part / (2 sinc) gives the axis-angle vector; use the series
        # expansion of angle/(2 sin angle) near 0
        skew = np.stack(
            [
                a[..., 2, 1] - a[..., 1, 2],
                a[..., 0, 2] - a[..., 2, 0],
                a[..., 1, 0] - a[..., 0, 1],
            ],
            axis=-1,
        )
        small = angle < 1e-7
        sin_angle = np.sin(angle)
        factor = np.where(
            small,
            0.5 + angle**2 / 12.0,
            angle / np.where(small, 1.0, 2.0 * np.where(sin_angle == 0, 1.0, sin_angle)),
        )
        return skew * factor[..., None]

    def exp(self, v):
        v = np.asarray(v, dtype=float)
        angle = np.linalg.norm(v, axis=-1)
        out_shape = v.shape[:-1] + (3, 3)
        # Rodrigues: I + sinc(angle) K + (1-cos)/angle^2 K^2  with K = hat(v)
        K = np.zeros(out_shape)
        K[..., 0, 1] = -v[..., 2]
        K[..., 0, 2] = v[..., 1]
        K[..., 1, 0] = v[..., 2]
        K[..., 1, 2] = -v[..., 0]
        K[..., 2, 0] = -v[..., 1]
        K[..., 2, 1] = v[..., 0]
        small = angle < 1e-7
        safe = np.where(small, 1.0, angle)
        s = np.where(small, 1.0 - angle**2 / 6.0, np.sin(safe) / safe)
        c = np.where(small, 0.5 - angle**2 / 24.0, (1.0 - np.cos(safe)) / safe**2)
        eye = np.broadcast_to(np.eye(3), out_shape)
        return eye + s[..., None, None] * K + c[..., None, None] * (K @ K)

    def validate(self, params, tol=1e-10):
        params = np.asarray(params, dtype=float)
        if params.shape[-2:] != (3, 3):
            raise DimensionMismatch("SO3 elements are 3x3 matrices")
        err = np.abs(params @ np.swapaxes(params, -1, -2) - np.eye(3)).max()
        det = np.linalg.det(params)
        if err > tol or np.any(np.abs(det - 1.0) > tol):
            raise ValueError("matrix is not in SO(3) to tolerance")
        return params


class Sphere2(Group):
    """The 2-sphere as the quotient SO(3)/SO(2).

    Points are (beta, gamma) with n(beta, gamma) = R_z(gamma).R_y(beta).z,
    z = (0,0,1)^T. The Log map is the torsion-free choice
    Log n(beta, gamma) = Log_SO3 R_{-gamma, beta, gamma} projected to the
    (a1, a2) plane, i.e. beta * (-sin gamma, cos gamma). There is no group
    product or inverse.
    """

    name = "Sphere2"
    algebra_dim = 2
    action_dim = 3

    def identity_params(self):
        return np.zeros(2)

    def product(self, a, b):
        raise QuotientHasNoProduct("S^2 is a quotient of SO(3), not a group")

    def inverse(self, a):
        raise QuotientHasNoProduct("S^2 is a quotient of SO(3), not a group")

    def act(self, a, x):
        raise QuotientHasNoProduct("S^2 does not act on R^d as a group")

    def det_action(self, a):
        a = np.asarray(a, dtype=float)
        return np.ones(a.shape[:-1]) if a.ndim > 1 else 1.0

    def point(self, a):
        """Unit vector n(beta, gamma) in R^3."""
        a = np.asarray(a, dtype=float)
        beta, gamma = a[..., 0], a[..., 1]
        return np.stack(
            [np.sin(beta) * np.cos(gamma), np.sin(beta) * np.sin(gamma), np.cos(beta)],
            axis=-1,
        )

    def from_point(self, n):
        """Inverse of :meth:`point`; n need not be exactly unit length."""
        n = np.asarray(n, dtype=float)
        n = n / np.linalg.norm(n, axis=-1, keepdims=True)
        beta = np.arccos(np.clip(n[..., 2], -1.0, 1.0))
        gamma = np.mod(np.arctan2(n[..., 1], n[..., 0]), _TWO_PI)
        return np.stack([beta, gamma], axis=-1)

    def log(self, a):
        a = np.asarray(a, dtype=float)
        beta, gamma = a[..., 0], a[..., 1]
        return np.stack([-beta * np.sin(gamma), beta * np.cos(gamma)], axis=-1)

    def exp(self, v):
        v = np.asarray(v, dtype=float)
        beta = np.linalg.norm(v, axis=-1)
        gamma = np.mod(np.arctan2(-v[..., 0], v[..., 1]), _TWO_PI)
        gamma = np.where(beta < 1e-15, 0.0, gamma)
        return np.stack([beta, gamma], axis=-1)

    def center_rotation(self, a):
        """R_{0, beta, gamma} mapping the north pole to the point (alpha=0)."""
        a = np.asarray(a, dtype=float)
        return rot_z(a[..., 1]) @ rot_y(a[..., 0])

    def relative_log(self, ref, a):
        """Log of ``a`` seen from the frame of center ``ref`` (alpha_i = 0)."""
        ref = np.asarray(ref, dtype=float)
        rot = np.swapaxes(self.center_rotation(ref), -1, -2)
        moved = np.einsum("...ij,...j->...i", rot, self.point(a))
        return self.log(self.from_point(moved))

    def validate(self, params):
        params = np.asarray(params, dtype=float)
        if params.shape[-1] != 2:
            raise DimensionMismatch("Sphere2 points are (beta, gamma) pairs")
        return params


def get_group(name, d=2):
    """Look up a group by short name ('trans', 'so2', 'scale', 'so3', 'sphere2')."""
    name = name.lower()
    if name in ("trans", "translation"):
        return Trans(d)
    if name == "so2":
        return SO2()
    if name in ("scale", "scalepos", "r+"):
        return ScalePos(d)
    if name == "so3":
        return SO3()
    if name in ("sphere2", "s2"):
        return Sphere2()
    raise ValueError(f"unknown group {name!r}")


@dataclass(frozen=True)
class GroupElement:
    """A point of H in its per-group parameterization."""

    group: Group
    params: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "params", self.group.validate(self.params))


@dataclass(frozen=True)
class LieAlgebraVector:
    """Coefficients of Log h in the fixed algebra basis."""

    group: Group
    components: np.ndarray

    def __post_init__(self):
        comp = np.atleast_1d(np.asarray(self.components, dtype=float))
        if comp.shape[-1] != self.group.algebra_dim:
            raise DimensionMismatch(
                f"{self.group} algebra has dimension {self.group.algebra_dim}"
            )
        object.__setattr__(self, "components", comp)


@dataclass(frozen=True)
class AffineElement:
    """An element (x, h) of R^d x| H."""

    x: np.ndarray
    h: GroupElement

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        if x.shape != (self.h.group.action_dim,):
            raise DimensionMismatch("translation dimension must match the action of H")
        object.__setattr__(self, "x", x)


def _check_same_group(h1, h2):
    if h1.group != h2.group:
        raise GroupMismatch(f"{h1.group} vs {h2.group}")


def identity(group):
    return GroupElement(group, group.identity_params())


def product(h1: GroupElement, h2: GroupElement) -> GroupElement:
    _check_same_group(h1, h2)
    return GroupElement(h1.group, h1.group.product(h1.params, h2.params))


def inverse(h: GroupElement) -> GroupElement:
    return GroupElement(h.group, h.group.inverse(h.params))


def affine_product(g1: AffineElement, g2: AffineElement) -> AffineElement:
    _check_same_group(g1.h, g2.h)
    x = g1.x + g1.h.group.act(g1.h.params, g2.x)
    return AffineElement(x, product(g1.h, g2.h))


def affine_inverse(g: AffineElement) -> AffineElement:
    h_inv = inverse(g.h)
    return AffineElement(-g.h.group.act(h_inv.params, g.x), h_inv)


def act_on_rd(h: GroupElement, x) -> np.ndarray:
    return h.group.act(h.params, np.asarray(x, dtype=float))


def det_action(h: GroupElement) -> float:
    return float(h.group.det_action(h.params))


def log(h: GroupElement) -> LieAlgebraVector:
    return LieAlgebraVector(h.group, h.group.log(h.params))


def exp(a: LieAlgebraVector) -> GroupElement:
    return GroupElement(a.group, a.group.exp(a.components))


def distance(h1: GroupElement, h2: GroupElement) -> float:
    _check_same_group(h1, h2)
    return float(h1.group.distance(h1.params, h2.params))
