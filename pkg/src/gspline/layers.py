"""Equivariant layer operators: lifting correlation, group correlation,
projection over H, plus analytic sampling of transformed kernels and the
group-representation transform used for equivariance testing.

Kernels are always *sampled analytically*: the spline is evaluated at
transformed coordinates exactly, never interpolated from a sampled array.
The correlation forwards have matching adjoint helpers used by the manual
backward pass; per-output-element summation order is fixed (einsum over a
fixed layout) so results are run-to-run identical.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from . import groups as gp
from .errors import (
    ChannelMismatch,
    GridMismatch,
    GroupMismatch,
    NotLifted,
    OffGridElement,
    ShapeUnderflow,
)
from .groups import AffineElement, GroupElement
from .splines import GroupGrid, SplineKernel


@dataclass
class FeatureMap:
    """Dense real array over a spatial grid, optionally with an H axis.

    ``data`` is [channel, spatial...] for planar maps and
    [channel, h, spatial...] for lifted maps (``grid`` set iff lifted).
    """

    data: np.ndarray
    grid: GroupGrid | None = None
    spatial_step: float = 1.0

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=float)
        if self.grid is not None and self.data.shape[1] != len(self.grid):
            raise GridMismatch("h axis length must match the grid")

    @property
    def lifted(self):
        return self.grid is not None

    @property
    def channels(self):
        return self.data.shape[0]

    @property
    def h_size(self):
        return len(self.grid) if self.lifted else 0

    @property
    def spatial_shape(self):
        return self.data.shape[2:] if self.lifted else self.data.shape[1:]


@dataclass
class SampledKernelStack:
    """Per-h-element analytic samples of a spline kernel.

    ``values`` is [h, out, in, ky, kx] in lifting mode (with the
    1/|det h| front factor applied exactly once) and
    [h, out, in, h_tilde, ky, kx] in group mode. The basis matrices used
    to assemble the values from the coefficients are kept for the
    backward pass.
    """

    mode: str
    values: np.ndarray
    grid: GroupGrid
    kernel: SplineKernel
    spatial_shape: tuple
    spatial_step: float
    spatial_basis: np.ndarray  # [h, n_pts, N_x]
    h_basis: np.ndarray | None  # [h, h_tilde, N_hc] (group mode)
    det: np.ndarray  # [h]
    points: np.ndarray  # transformed sample points [h, n_pts, d]
    h_rel: np.ndarray | None  # params of h^-1 h_tilde, [h, h_tilde, ...]

    @property
    def out_channels(self):
        return self.values.shape[1]

    @property
    def in_channels(self):
        return self.values.shape[2]


def kernel_sample_points(spatial_shape, spatial_step=1.0):
    """Centered physical offsets of an odd k x k sampling grid, (n_pts, d)."""
    axes = [spatial_step * (np.arange(s) - (s - 1) / 2.0) for s in spatial_shape]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


def _assemble_stack(kernel, spatial_basis, h_basis, det, mode):
    c = kernel.coeff_grid()  # (O, I, N_x, N_hc)
    if mode == "lifting":
        vals = np.einsum("oixg,hpx->hoigp", c, spatial_basis)
        vals = vals.sum(axis=3)  # N_hc == 1 for lifting kernels
        return vals / det[:, None, None, None]
    vals = np.einsum("oixg,hpx,htg->hoitp", c, spatial_basis, h_basis)
    return vals


def sample_transformed_kernels(
    kernel: SplineKernel, grid: GroupGrid, spatial_shape, mode, spatial_step=1.0
) -> SampledKernelStack:
    """Sample the kernel under every h in the grid.

    For each h and sample point x the value is
    (1/|det h|) * kernel(h^-1 . x) in lifting mode, and
    kernel(h^-1 . x, h^-1 . h_tilde) (no front factor; the Haar-measure
    ratio on G is one) in group mode.
    """
    if not kernel.h_constant and kernel.group != grid.group:
        raise GroupMismatch("kernel and grid must live on the same group")
    if mode == "lifting" and not kernel.h_constant:
        raise ValueError("lifting kernels are pure spatial splines (h_constant)")
    if any(s % 2 != 1 for s in spatial_shape):
        raise ValueError("spatial_shape must be odd per axis")
    group = grid.group
    pts = kernel_sample_points(spatial_shape, spatial_step)
    n_h = len(grid)
    sb = np.empty((n_h,) + (len(pts), kernel.n_spatial))
    tp = np.empty((n_h, len(pts), kernel.spatial_dim))
    det = np.empty(n_h)
    hb = None
    h_rel = None
    if mode == "group":
        hb = np.empty((n_h, n_h, kernel.n_h))
        h_rel = np.empty((n_h,) + grid.elements.shape)
    for i in range(n_h):
        e = grid.elements[i]
        e_inv = group.inverse(e)
        tp[i] = group.act(e_inv, pts)
        sb[i] = kernel.spatial_basis(tp[i])
        det[i] = float(group.det_action(e))
        if mode == "group":
            h_rel[i] = group.product(e_inv, grid.elements)
            hb[i] = kernel.h_basis(h_rel[i])
    values = _assemble_stack(kernel, sb, hb, det, mode)
    values = values.reshape(values.shape[: (3 if mode == "lifting" else 4)] + tuple(spatial_shape))
    return SampledKernelStack(
        mode=mode,
        values=values,
        grid=grid,
        kernel=kernel,
        spatial_shape=tuple(spatial_shape),
        spatial_step=spatial_step,
        spatial_basis=sb,
        h_basis=hb,
        det=det,
        points=tp,
        h_rel=h_rel,
    )


def restack(stack: SampledKernelStack, kernel: SplineKernel) -> SampledKernelStack:
    """Re-assemble a stack for new coefficients on the same centers/grid.

    Reuses the cached basis matrices, so it is cheap inside training loops.
    """
    values = _assemble_stack(kernel, stack.spatial_basis, stack.h_basis, stack.det, stack.mode)
    values = values.reshape(
        values.shape[: (3 if stack.mode == "lifting" else 4)] + stack.spatial_shape
    )
    return SampledKernelStack(
        mode=stack.mode,
        values=values,
        grid=stack.grid,
        kernel=kernel,
        spatial_shape=stack.spatial_shape,
        spatial_step=stack.spatial_step,
        spatial_basis=stack.spatial_basis,
        h_basis=stack.h_basis,
        det=stack.det,
        points=stack.points,
        h_rel=stack.h_rel,
    )


def coefficient_grad(stack: SampledKernelStack, d_values):
    """Adjoint of stack assembly: gradient w.r.t. kernel coefficients."""
    kernel = stack.kernel
    n_pts = stack.spatial_basis.shape[1]
    if stack.mode == "lifting":
        dv = d_values.reshape(d_values.shape[:3] + (n_pts,))
        g = np.einsum("hoip,hpx,h->oix", dv, stack.spatial_basis, 1.0 / stack.det)
        return g.reshape(kernel.coefficients.shape)
    dv = d_values.reshape(d_values.shape[:4] + (n_pts,))
    g = np.einsum("hoitp,hpx,htg->oixg", dv, stack.spatial_basis, stack.h_basis)
    return g.reshape(kernel.coefficients.shape)


def center_grads(stack: SampledKernelStack, d_values):
    """Adjoint of stack assembly w.r.t. the kernel centers.

    Returns (d_spatial_centers (N_x, d), d_h_centers (N_hc,) or None).
    H-center gradients are taken w.r.t. the algebra offset of each center
    (centers materialized through Exp); 1-D abelian H only.
    """
    kernel = stack.kernel
    c = kernel.coeff_grid()
    n_pts = stack.spatial_basis.shape[1]
    n_h = len(stack.grid)
    d = kernel.spatial_dim
    sgrad = np.empty((n_h, n_pts, kernel.n_spatial, d))
    for i in range(n_h):
        sgrad[i] = kernel.spatial_basis_grad(stack.points[i])
    if stack.mode == "lifting":
        dv = d_values.reshape(d_values.shape[:3] + (n_pts,))
        d_sp = np.einsum(
            "hoip,oixg,hpxa,h->xa", dv, c, sgrad, 1.0 / stack.det
        )
        return d_sp, None
    dv = d_values.reshape(d_values.shape[:4] + (n_pts,))
    d_sp = np.einsum("hoitp,oixg,hpxa,htg->xa", dv, c, sgrad, stack.h_basis)
    hb_grad = np.empty_like(stack.h_basis)
    for i in range(n_h):
        hb_grad[i] = kernel.h_basis_center_grad(stack.h_rel[i])
    d_h = np.einsum("hoitp,oixg,hpx,htg->g", dv, c, stack.spatial_basis, hb_grad)
    return d_sp, d_h


# ---------------------------------------------------------------------------
# batched correlation cores (leading batch axis), used by both the public
# FeatureMap API and the network composer


def _pad_spatial(x, ky, kx, padding):
    if padding == "zero":
        pad = [(0, 0)] * (x.ndim - 2) + [(ky // 2, ky // 2), (kx // 2, kx // 2)]
        return np.pad(x, pad)
    if padding != "valid":
        raise ValueError(f"unknown padding {padding!r}")
    return x


def _lift_windows(x, ky, kx):
    """Contiguous [B*Ho*Wo, C*ky*kx] window matrix of a padded input."""
    win = sliding_window_view(x, (ky, kx), axis=(-2, -1))  # [B,C,Ho,Wo,ky,kx]
    b, c, ho, wo = win.shape[:4]
    wm = np.ascontiguousarray(win.transpose(0, 2, 3, 1, 4, 5))
    return wm.reshape(b * ho * wo, c * ky * kx), (b, c, ho, wo)


def lift_corr_batched(x, k, spatial_step=1.0, padding="valid"):
    """x [B,C,H,W], k [Nh,O,C,ky,kx] -> [B,O,Nh,Ho,Wo]."""
    ky, kx = k.shape[-2:]
    x = _pad_spatial(x, ky, kx, padding)
    if x.shape[-2] < ky or x.shape[-1] < kx:
        raise ShapeUnderflow("input smaller than kernel under valid padding")
    wm, (b, c, ho, wo) = _lift_windows(x, ky, kx)
    nh, o = k.shape[:2]
    km = np.ascontiguousarray(k).reshape(nh * o, c * ky * kx)
    out = (wm @ km.T).reshape(b, ho, wo, nh, o)
    return out.transpose(0, 4, 3, 1, 2) * spatial_step**2


def lift_corr_grad(x, k, d_out, spatial_step=1.0, padding="valid"):
    """Adjoint of lift_corr_batched: returns (d_x, d_k)."""
    ky, kx = k.shape[-2:]
    xp = _pad_spatial(x, ky, kx, padding)
    wm, (b, c, ho, wo) = _lift_windows(xp, ky, kx)
    nh, o = k.shape[:2]
    dm = np.ascontiguousarray(d_out.transpose(2, 1, 0, 3, 4)).reshape(nh * o, b * ho * wo)
    d_k = (dm @ wm).reshape(k.shape) * spatial_step**2
    d_xp = np.zeros_like(xp)
    ho, wo = d_out.shape[-2:]
    for i in range(ky):
        for j in range(kx):
            d_xp[:, :, i : i + ho, j : j + wo] += (
                np.einsum("bohyx,hoc->bcyx", d_out, k[:, :, :, i, j], optimize=True)
                * spatial_step**2
            )
    if padding == "zero":
        d_xp = d_xp[:, :, ky // 2 : d_xp.shape[-2] - (ky // 2), kx // 2 : d_xp.shape[-1] - (kx // 2)]
    return d_xp, d_k


def _group_windows(x, ky, kx):
    """Contiguous [B*Ho*Wo, C*T*ky*kx] window matrix of a padded input."""
    win = sliding_window_view(x, (ky, kx), axis=(-2, -1))  # [B,C,T,Ho,Wo,ky,kx]
    b, c, t, ho, wo = win.shape[:5]
    wm = np.ascontiguousarray(win.transpose(0, 3, 4, 1, 2, 5, 6))
    return wm.reshape(b * ho * wo, c * t * ky * kx), (b, c, t, ho, wo)


def group_corr_batched(x, k, weights, spatial_step=1.0, padding="valid"):
    """x [B,C,T,H,W], k [Nh,O,C,T,ky,kx], weights [T] -> [B,O,Nh,Ho,Wo]."""
    ky, kx = k.shape[-2:]
    x = _pad_spatial(x, ky, kx, padding)
    if x.shape[-2] < ky or x.shape[-1] < kx:
        raise ShapeUnderflow("input smaller than kernel under valid padding")
    wm, (b, c, t, ho, wo) = _group_windows(x, ky, kx)
    nh, o = k.shape[:2]
    kw = k * weights[None, None, None, :, None, None]
    km = kw.reshape(nh * o, c * t * ky * kx)
    out = (wm @ km.T).reshape(b, ho, wo, nh, o)
    return out.transpose(0, 4, 3, 1, 2) * spatial_step**2


def group_corr_grad(x, k, weights, d_out, spatial_step=1.0, padding="valid"):
    """Adjoint of group_corr_batched: returns (d_x, d_k)."""
    ky, kx = k.shape[-2:]
    xp = _pad_spatial(x, ky, kx, padding)
    wm, (b, c, t, ho, wo) = _group_windows(xp, ky, kx)
    nh, o = k.shape[:2]
    dm = np.ascontiguousarray(d_out.transpose(2, 1, 0, 3, 4)).reshape(nh * o, b * ho * wo)
    d_k = (dm @ wm).reshape(k.shape) * weights[None, None, None, :, None, None] * spatial_step**2
    d_xp = np.zeros_like(xp)
    ho, wo = d_out.shape[-2:]
    for i in range(ky):
        for j in range(kx):
            d_xp[:, :, :, i : i + ho, j : j + wo] += (
                np.einsum(
                    "bohyx,hoct,t->bctyx", d_out, k[:, :, :, :, i, j], weights, optimize=True
                )
                * spatial_step**2
            )
    if padding == "zero":
        d_xp = d_xp[
            :, :, :, ky // 2 : d_xp.shape[-2] - (ky // 2), kx // 2 : d_xp.shape[-1] - (kx // 2)
        ]
    return d_xp, d_k


# ---------------------------------------------------------------------------
# public FeatureMap API


def lift_correlate(f: FeatureMap, stack: SampledKernelStack, padding="valid") -> FeatureMap:
    """Lifting correlation: planar input -> lifted output."""
    if f.lifted:
        raise ValueError("lifting expects a planar feature map")
    if stack.mode != "lifting":
        raise ValueError("stack must be in lifting mode")
    if f.channels != stack.in_channels:
        raise ChannelMismatch(f"{f.channels} input channels vs kernel {stack.in_channels}")
    out = lift_corr_batched(f.data[None], stack.values, f.spatial_step, padding)[0]
    return FeatureMap(out, grid=stack.grid, spatial_step=f.spatial_step)


def group_correlate(F: FeatureMap, stack: SampledKernelStack, padding="valid") -> FeatureMap:
    """Group correlation: lifted input -> lifted output (Haar-weighted sum
    over the h axis; the transformed kernel handles the h shift, so for
    SO2 the shift is periodic and for ScalePos off-grid contributions
    vanish, which matches zero padding along the h axis)."""
    if not F.lifted:
        raise NotLifted("group correlation expects a lifted feature map")
    if stack.mode != "group":
        raise ValueError("stack must be in group mode")
    if not F.grid.same_as(stack.grid):
        raise GridMismatch("feature map and stack use different H grids")
    if F.channels != stack.in_channels:
        raise ChannelMismatch(f"{F.channels} input channels vs kernel {stack.in_channels}")
    out = group_corr_batched(
        F.data[None], stack.values, stack.grid.weights, F.spatial_step, padding
    )[0]
    return FeatureMap(out, grid=stack.grid, spatial_step=F.spatial_step)


def project_h(F: FeatureMap, mode="integral") -> FeatureMap:
    """Project a lifted map back to the plane: Haar integral, weighted
    mean, or pointwise max over the h axis."""
    if not F.lifted:
        raise NotLifted("projection expects a lifted feature map")
    w = F.grid.weights
    if mode == "integral":
        out = np.einsum("ch...,h->c...", F.data, w)
    elif mode == "mean":
        out = np.einsum("ch...,h->c...", F.data, w / w.sum())
    elif mode == "max":
        out = F.data.max(axis=1)
    else:
        raise ValueError(f"unknown projection mode {mode!r}")
    return FeatureMap(out, grid=None, spatial_step=F.spatial_step)


# ---------------------------------------------------------------------------
# representation transforms (test plumbing; bilinear except on exact
# grid permutations)


def _grid_coords(shape, step):
    axes = [step * (np.arange(s) - (s - 1) / 2.0) for s in shape]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack(mesh, axis=-1)  # (*shape, d)


def resample_planar(data, src_idx):
    """Sample channel-first planar data at fractional index coordinates
    ``src_idx`` (*spatial, 2); zero outside the domain; exact gather when
    all coordinates are integral."""
    h, w = data.shape[-2:]
    y, x = src_idx[..., 0], src_idx[..., 1]
    if np.allclose(y, np.round(y), atol=1e-9) and np.allclose(x, np.round(x), atol=1e-9):
        yi = np.round(y).astype(int)
        xi = np.round(x).astype(int)
        valid = (yi >= 0) & (yi < h) & (xi >= 0) & (xi < w)
        out = np.zeros(data.shape[:-2] + y.shape)
        yc, xc = np.clip(yi, 0, h - 1), np.clip(xi, 0, w - 1)
        out[..., valid] = data[..., yc[valid], xc[valid]]
        return out
    y0 = np.floor(y).astype(int)
    x0 = np.floor(x).astype(int)
    ty, tx = y - y0, x - x0
    out = np.zeros(data.shape[:-2] + y.shape)
    for dy, wy in ((0, 1 - ty), (1, ty)):
        for dx, wx in ((0, 1 - tx), (1, tx)):
            yi, xi = y0 + dy, x0 + dx
            valid = (yi >= 0) & (yi < h) & (xi >= 0) & (xi < w)
            wgt = np.where(valid, wy * wx, 0.0)
            yc, xc = np.clip(yi, 0, h - 1), np.clip(xi, 0, w - 1)
            out += data[..., yc, xc] * wgt
    return out


def _h_axis_permutation(grid, h0: GroupElement, tol=1e-9):
    """For each output slot j, the source index of h0^-1 . h_j (or -1)."""
    group = grid.group
    if grid.index_of(h0.params, tol) is None:
        # h0 must sit on the lattice generated by the grid spacing
        a = group.log(h0.params)[..., 0] if group.algebra_dim == 1 else None
        if a is None or grid.spacing <= 0 or abs(a / grid.spacing - round(a / grid.spacing)) > 1e-9:
            raise OffGridElement(f"{h0.params} is not on the H grid lattice")
    h0_inv = group.inverse(h0.params)
    perm = np.full(len(grid), -1, dtype=int)
    for j in range(len(grid)):
        target = group.product(h0_inv, grid.elements[j])
        idx = grid.index_of(target, tol)
        if idx is not None:
            perm[j] = idx
    return perm


def apply_representation(f: FeatureMap, g: AffineElement) -> FeatureMap:
    """L_g f, i.e. f((x0, h0)^-1 . x) with an h-axis shift for lifted maps.

    Spatial resampling is bilinear except when the action permutes grid
    points exactly (90 degree rotations, integer shifts/scalings), where
    it is exact.
    """
    group = g.h.group
    shape = f.spatial_shape
    step = f.spatial_step
    coords = _grid_coords(shape, step)
    h0_inv = group.inverse(g.h.params)
    src_phys = group.act(h0_inv, coords - g.x)
    src_idx = src_phys / step + (np.asarray(shape) - 1) / 2.0
    if not f.lifted:
        return FeatureMap(resample_planar(f.data, src_idx), spatial_step=step)
    perm = _h_axis_permutation(f.grid, g.h)
    out = np.zeros_like(f.data)
    spatial = resample_planar(f.data, src_idx)  # [C, Nh, *shape] resampled
    for j in range(len(f.grid)):
        if perm[j] >= 0:
            out[:, j] = spatial[:, perm[j]]
    return FeatureMap(out, grid=f.grid, spatial_step=step)
