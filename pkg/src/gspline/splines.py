"""Cardinal B-splines on R and R^d, B-splines on Lie groups via the Log
map, tensor-product kernels on R^d x H, and grid builders (uniform,
localized, atrous, repulsion, spatial disk masks)."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import groups as gp
from .errors import BranchCutSingular, InvalidSpacing, UnsupportedDegree
from .groups import Group, GroupElement


def cardinal_bspline_1d(n, x):
    """Cardinal B-spline of degree n (n-fold self-convolution of the unit
    indicator), evaluated via its closed-form piecewise polynomial.

    Support is [-(n+1)/2, (n+1)/2]; degrees 0..3 only.
    """
    x = np.asarray(x, dtype=float)
    a = np.abs(x)
    if n == 0:
        # half-open convention [-1/2, 1/2): keeps shifted copies a partition
        return np.where((x >= -0.5) & (x < 0.5), 1.0, 0.0)
    if n == 1:
        return np.maximum(0.0, 1.0 - a)
    if n == 2:
        out = np.zeros_like(a)
        inner = a <= 0.5
        mid = (a > 0.5) & (a < 1.5)
        out[inner] = 0.75 - a[inner] ** 2
        out[mid] = 0.5 * (a[mid] - 1.5) ** 2
        return out
    if n == 3:
        out = np.zeros_like(a)
        inner = a <= 1.0
        mid = (a > 1.0) & (a < 2.0)
        ai = a[inner]
        out[inner] = 2.0 / 3.0 - ai**2 + 0.5 * ai**3
        out[mid] = (2.0 - a[mid]) ** 3 / 6.0
        return out
    raise UnsupportedDegree(f"degree {n} not supported (use 0..3)")


def cardinal_bspline_1d_deriv(n, x):
    """Derivative of the degree-n cardinal B-spline.

    At knot points the one-sided value of the polynomial piece selected by
    the same branch conditions as above is returned (subgradient choice).
    """
    x = np.asarray(x, dtype=float)
    a = np.abs(x)
    sign = np.sign(x)
    if n == 0:
        return np.zeros_like(x)
    if n == 1:
        return np.where(a < 1.0, -sign, 0.0)
    if n == 2:
        out = np.zeros_like(a)
        inner = a <= 0.5
        mid = (a > 0.5) & (a < 1.5)
        out[inner] = -2.0 * a[inner]
        out[mid] = a[mid] - 1.5
        return out * sign
    if n == 3:
        out = np.zeros_like(a)
        inner = a <= 1.0
        mid = (a > 1.0) & (a < 2.0)
        out[inner] = -2.0 * a[inner] + 1.5 * a[inner] ** 2
        out[mid] = -0.5 * (2.0 - a[mid]) ** 2
        return out * sign
    raise UnsupportedDegree(f"degree {n} not supported (use 0..3)")


def cardinal_bspline(n, x):
    """Multivariate cardinal B-spline: product of 1-D factors over the last
    axis of ``x`` (scalar input treated as 1-D)."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    return np.prod(cardinal_bspline_1d(n, x), axis=-1)


@dataclass(frozen=True)
class GroupGrid:
    """Discrete sampling H_d of H with Haar quadrature weights."""

    group: Group
    elements: np.ndarray  # stacked parameter arrays, leading axis = sample
    weights: np.ndarray
    spacing: float = 0.0

    def __post_init__(self):
        weights = np.asarray(self.weights, dtype=float)
        if len(weights) != len(self.elements):
            raise ValueError("one weight per grid element required")
        if np.any(weights <= 0):
            raise ValueError("Haar weights must be positive")
        object.__setattr__(self, "elements", np.asarray(self.elements, dtype=float))
        object.__setattr__(self, "weights", weights)

    def __len__(self):
        return len(self.elements)

    def element(self, i) -> GroupElement:
        return GroupElement(self.group, self.elements[i])

    def same_as(self, other, tol=1e-9):
        return (
            self.group == other.group
            and self.elements.shape == other.elements.shape
            and np.allclose(self.elements, other.elements, atol=tol)
            and np.allclose(self.weights, other.weights, atol=tol)
        )

    def index_of(self, params, tol=1e-9):
        """Index of the grid element closest to ``params``, or None if the
        nearest one is further than ``tol`` (group distance)."""
        dists = np.array(
            [self.group.distance(e, np.asarray(params, dtype=float)) for e in self.elements]
        )
        i = int(np.argmin(dists))
        return i if dists[i] <= tol else None


def trivial_grid(group=None):
    """Single-element grid {identity} with unit weight (N_h = 1)."""
    group = group if group is not None else gp.SO2()
    e = np.asarray(group.identity_params(), dtype=float)
    return GroupGrid(group, e[None, ...], np.array([1.0]), spacing=0.0)


@dataclass(frozen=True)
class SplineKernel:
    """Tensor-product B-spline kernel on R^d x H.

    ``coefficients`` is indexed [out_channel, in_channel, center_index]
    with center_index = ix * len(h_centers) + ih. When ``h_constant`` is
    set the H factor is identically one and the kernel reduces to a pure
    spatial spline (used by lifting layers and 2D correlations).
    """

    group: Group
    degree: int
    spatial_centers: np.ndarray  # (N_x, d)
    h_centers: np.ndarray  # stacked params (N_hc, ...), ignored if h_constant
    s_x: float
    s_h: float
    coefficients: np.ndarray  # (out, in, N_x * N_hc)
    h_constant: bool = False

    def __post_init__(self):
        sc = np.asarray(self.spatial_centers, dtype=float)
        if sc.ndim != 2:
            raise ValueError("spatial_centers must be (N_x, d)")
        hc = np.asarray(self.h_centers, dtype=float)
        c = np.asarray(self.coefficients, dtype=float)
        if self.s_x <= 0 or self.s_h <= 0:
            raise ValueError("scales s_x and s_h must be positive")
        n_h = 1 if self.h_constant else len(hc)
        if c.ndim != 3 or c.shape[2] != len(sc) * n_h:
            raise ValueError(
                f"coefficients must be (out, in, {len(sc) * n_h}), got {c.shape}"
            )
        object.__setattr__(self, "spatial_centers", sc)
        object.__setattr__(self, "h_centers", hc)
        object.__setattr__(self, "coefficients", c)

    @property
    def n_spatial(self):
        return len(self.spatial_centers)

    @property
    def n_h(self):
        return 1 if self.h_constant else len(self.h_centers)

    @property
    def out_channels(self):
        return self.coefficients.shape[0]

    @property
    def in_channels(self):
        return self.coefficients.shape[1]

    @property
    def spatial_dim(self):
        return self.spatial_centers.shape[1]

    def coeff_grid(self):
        """Coefficients reshaped to (out, in, N_x, N_hc)."""
        return self.coefficients.reshape(
            self.out_channels, self.in_channels, self.n_spatial, self.n_h
        )

    def with_coefficients(self, c):
        return SplineKernel(
            self.group,
            self.degree,
            self.spatial_centers,
            self.h_centers,
            self.s_x,
            self.s_h,
            np.asarray(c, dtype=float),
            self.h_constant,
        )

    # -- basis evaluation -------------------------------------------------
    def spatial_basis(self, points):
        """B^{d,n}((x - x_i)/s_x) for points (..., d) -> (..., N_x)."""
        pts = np.asarray(points, dtype=float)
        rel = (pts[..., None, :] - self.spatial_centers) / self.s_x
        return np.prod(cardinal_bspline_1d(self.degree, rel), axis=-1)

    def spatial_basis_grad(self, points):
        """Gradient of spatial_basis w.r.t. the centers x_i: (..., N_x, d)."""
        pts = np.asarray(points, dtype=float)
        rel = (pts[..., None, :] - self.spatial_centers) / self.s_x
        vals = cardinal_bspline_1d(self.degree, rel)
        derivs = cardinal_bspline_1d_deriv(self.degree, rel)
        d = rel.shape[-1]
        out = np.empty(rel.shape)
        for axis in range(d):
            others = np.prod(np.delete(vals, axis, axis=-1), axis=-1)
            out[..., axis] = -derivs[..., axis] * others / self.s_x
        return out

    def h_basis(self, h_params):
        """B^{m,n}(Log(h_i^-1 h)/s_h) for stacked h params -> (..., N_hc)."""
        if self.h_constant:
            shape = np.shape(h_params)
            lead = shape[: len(shape) - self._h_param_ndim()] if len(shape) else ()
            return np.ones(lead + (1,))
        vals = []
        for hc in self.h_centers:
            rel = self.group.relative_log(hc, np.asarray(h_params, dtype=float))
            vals.append(cardinal_bspline(self.degree, rel / self.s_h))
        return np.stack(vals, axis=-1)

    def h_basis_center_grad(self, h_params):
        """Gradient of h_basis w.r.t. algebra offsets of the centers.

        Only 1-D abelian H (SO2, ScalePos) is supported; there
        Log(Exp(a_i)^-1 h) = Log(h) - a_i (up to wrapping) so the
        derivative w.r.t. a_i is -B'(u)/s_h.
        """
        if self.h_constant:
            raise ValueError("no H centers on an h-constant kernel")
        if self.group.algebra_dim != 1:
            raise NotImplementedError("deformable H centers need a 1-D abelian H")
        grads = []
        for hc in self.h_centers:
            rel = self.group.relative_log(hc, np.asarray(h_params, dtype=float))
            grads.append(
                -cardinal_bspline_1d_deriv(self.degree, rel[..., 0] / self.s_h) / self.s_h
            )
        return np.stack(grads, axis=-1)

    def _h_param_ndim(self):
        e = np.asarray(self.group.identity_params())
        return e.ndim


def eval_spline_h(group, degree, h_centers, s_h, coeffs, h: GroupElement):
    """Sum_i c_i B(Log(h_i^-1 h)/s_h) for a single group element."""
    coeffs = np.asarray(coeffs, dtype=float)
    vals = np.array(
        [
            cardinal_bspline(degree, group.relative_log(hc, h.params) / s_h)
            for hc in np.asarray(h_centers, dtype=float)
        ]
    )
    return float(coeffs @ vals)


def eval_spline_g(kernel: SplineKernel, x, h: GroupElement, out_ch=0, in_ch=0):
    """Tensor-product kernel value at a single (x, h) point."""
    sb = kernel.spatial_basis(np.asarray(x, dtype=float))
    hb = kernel.h_basis(h.params) if not kernel.h_constant else np.ones(1)
    c = kernel.coeff_grid()[out_ch, in_ch]
    return float(np.einsum("xh,x,h->", c, sb, hb))


def build_spatial_centers(size, disk_radius=None):
    """Integer-offset centers of a size x size kernel, optionally masked to
    a disk of the given radius (discarding e.g. the 4 corners of a 5x5
    grid at r = sqrt(5))."""
    if size % 2 != 1:
        raise ValueError("kernel size must be odd")
    r = size // 2
    axis = np.arange(-r, r + 1, dtype=float)
    yy, xx = np.meshgrid(axis, axis, indexing="ij")
    centers = np.stack([yy.ravel(), xx.ravel()], axis=-1)
    if disk_radius is not None:
        keep = np.linalg.norm(centers, axis=-1) <= disk_radius + 1e-12
        centers = centers[keep]
    return centers


def build_h_grid(group, n_h, s_grid, layout="global_uniform", n_k=None, stride=2):
    """Build the sampling grid H_d on H plus a kernel-center list.

    Returns (GroupGrid, centers) where centers is a stacked parameter array
    for the B-spline basis on H:

    * ``global_uniform`` -- centers coincide with the N_h grid elements.
    * ``localized``      -- n_k centers Exp(i * s_grid * A) for
      i in -floor(n_k/2) .. floor(n_k/2).
    * ``atrous``         -- centers on every ``stride``-th grid element,
      with the basis scale kept at s_grid (callers keep s_h = s_grid).
    """
    if n_h < 1:
        raise ValueError("n_h must be >= 1")
    if isinstance(group, gp.SO2):
        if layout == "global_uniform" and abs(s_grid - 2 * np.pi / n_h) > 1e-9:
            raise InvalidSpacing("global uniform SO2 grid needs s_grid = 2*pi/n_h")
        thetas = gp.wrap_angle(np.arange(n_h) * s_grid)
        weights = np.full(n_h, 2 * np.pi / n_h)
        grid = GroupGrid(group, np.asarray(thetas, dtype=float), weights, s_grid)
    elif isinstance(group, gp.ScalePos):
        # Haar measure ds/s is uniform in log coordinates
        scales = np.exp(np.arange(n_h) * s_grid)
        weights = np.full(n_h, s_grid)
        grid = GroupGrid(group, scales, weights, s_grid)
    else:
        raise ValueError(f"uniform 1-D grids are defined for SO2/ScalePos, not {group}")

    if layout == "global_uniform":
        centers = grid.elements.copy()
    elif layout == "localized":
        if n_k is None:
            raise ValueError("localized layout needs n_k")
        idx = np.arange(-(n_k // 2), n_k // 2 + 1, dtype=float)
        centers = group.exp((idx * s_grid)[:, None])
    elif layout == "atrous":
        if isinstance(group, gp.SO2) and n_h % stride != 0:
            raise InvalidSpacing("atrous stride must divide n_h on SO2")
        centers = grid.elements[::stride].copy()
    else:
        raise ValueError(f"unknown layout {layout!r}")
    return grid, np.asarray(centers, dtype=float)


def _sphere_energy(points):
    dots = np.clip(points @ points.T, -1.0, 1.0)
    d = np.arccos(dots)
    iu = np.triu_indices(len(points), k=1)
    return float(np.sum(1.0 / d[iu] ** 2))


def _sphere_min_distance(points):
    dots = np.clip(points @ points.T, -1.0, 1.0)
    d = np.arccos(dots)
    iu = np.triu_indices(len(points), k=1)
    return float(d[iu].min())


def _fibonacci_sphere(n):
    """Fibonacci spiral on S^2: near-uniform for any n."""
    i = np.arange(n, dtype=float)
    golden = (1.0 + np.sqrt(5.0)) / 2.0
    z = 1.0 - (2.0 * i + 1.0) / n
    r = np.sqrt(np.maximum(0.0, 1.0 - z**2))
    phi = 2.0 * np.pi * i / golden
    return np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=-1)


def build_repulsion_grid(group, n, iterations=300, step=0.05, seed=0, init="random"):
    """Approximately uniform centers on a compact group/quotient by
    minimizing the inverse-square geodesic energy sum_{i != j} d_ij^-2.

    Tangent-space descent with backtracking: a step is only accepted if
    the energy does not increase, so the energy is monotone. Returns
    stacked parameter arrays ((beta, gamma) pairs for Sphere2, matrices
    for SO3). ``init='fibonacci'`` (Sphere2 only) starts from a Fibonacci
    spiral under a seeded random rotation, so large grids need few
    iterations while the seed still perturbs the layout."""
    if n < 2:
        raise ValueError("need at least 2 centers")
    rng = np.random.default_rng(seed)
    if isinstance(group, gp.Sphere2):
        if init == "fibonacci":
            axis = rng.normal(size=3)
            axis *= rng.uniform(0.0, np.pi * 0.9) / np.linalg.norm(axis)
            pts = _fibonacci_sphere(n) @ gp.SO3().exp(axis).T
        else:
            pts = rng.normal(size=(n, 3))
            pts /= np.linalg.norm(pts, axis=-1, keepdims=True)
        energy = _sphere_energy(pts)
        cur_step = step
        for _ in range(iterations):
            dots = np.clip(pts @ pts.T, -1.0, 1.0)
            d = np.arccos(dots)
            np.fill_diagonal(d, 1.0)  # placeholder; diagonal coef zeroed below
            sin_d = np.sin(d)
            # dE/dn_i = sum_j 2 n_j / (d^3 sin d), projected to the tangent
            coef = 2.0 / (np.maximum(d, 1e-9) ** 3 * np.maximum(sin_d, 1e-9))
            np.fill_diagonal(coef, 0.0)
            grad = coef @ pts
            grad -= np.sum(grad * pts, axis=-1, keepdims=True) * pts
            trial_step = cur_step
            for _ in range(20):
                trial = pts - trial_step * grad
                trial /= np.linalg.norm(trial, axis=-1, keepdims=True)
                e = _sphere_energy(trial)
                if e <= energy:
                    pts, energy = trial, e
                    cur_step = min(trial_step * 1.5, 1.0)
                    break
                trial_step *= 0.5
        return group.from_point(pts)
    if isinstance(group, gp.SO3):
        algebra = rng.normal(size=(n, 3))
        algebra *= (rng.uniform(0, np.pi * 0.9, size=n) / np.linalg.norm(algebra, axis=-1))[
            :, None
        ]
        mats = group.exp(algebra)

        def rel_log(a, b):
            # pairs that drift to the cut locus (angle ~ pi) exert no force;
            # report the limiting distance instead of failing
            try:
                return group.log(a.T @ b)
            except BranchCutSingular:
                return None

        def energy_of(ms):
            total = 0.0
            for i in range(n):
                for j in range(i + 1, n):
                    v = rel_log(ms[i], ms[j])
                    d2 = np.pi**2 if v is None else max(np.dot(v, v), 1e-12)
                    total += 1.0 / d2
            return total

        energy = energy_of(mats)
        cur_step = step
        for _ in range(iterations):
            grad = np.zeros((n, 3))
            for i in range(n):
                for j in range(n):
                    if i == j:
                        continue
                    v = rel_log(mats[i], mats[j])
                    if v is None:
                        continue
                    d2 = max(np.dot(v, v), 1e-12)
                    # first-order: d(dist)/d(tangent at i) = -v/dist
                    grad[i] += 2.0 * v / d2**2
            trial_step = cur_step
            for _ in range(20):
                trial = np.array(
                    [mats[i] @ group.exp(-trial_step * grad[i]) for i in range(n)]
                )
                e = energy_of(trial)
                if e <= energy:
                    mats, energy = trial, e
                    cur_step = min(trial_step * 1.5, 0.5)
                    break
                trial_step *= 0.5
        return mats
    raise ValueError("repulsion grids are built on SO3 or Sphere2")
