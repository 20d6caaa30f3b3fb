"""Config-driven composer for equivariant networks.

A network is a JSON-style list of layer records. Supported types:
lift | gconv | project | relu | bias | norm | maxpool | upsample |
conv1x1 | softmax | sigmoid.

Internally data flows with a batch axis: planar maps are [B, C, H, W]
and lifted maps are [B, C, T, H, W] with T the H-grid size. The forward
pass caches what the manual backward needs; ``backward`` is the exact
adjoint of ``forward``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import layers as ly
from .errors import CacheMismatch, ConfigTypeError
from .groups import get_group
from .layers import FeatureMap
from .splines import SplineKernel, build_h_grid, build_spatial_centers

_EPS = 1e-5


def _odd_ceil(x):
    k = int(np.ceil(x))
    return k if k % 2 == 1 else k + 1


class _Layer:
    kind = None
    params: dict

    def __init__(self):
        self.params = {}

    def forward(self, x):
        raise NotImplementedError

    def backward(self, cache, dy):
        raise NotImplementedError

    def grad_shapes(self):
        return {k: v.shape for k, v in self.params.items()}


class _CorrLayer(_Layer):
    """Shared machinery of lifting and group-correlation layers."""

    def __init__(self, spec, group, grid, in_channels, rng, mode):
        super().__init__()
        self.kind = "lift" if mode == "lifting" else "gconv"
        self.mode = mode
        self.group = group
        self.grid = grid
        self.padding = spec.get("padding", "valid")
        self.deformable = bool(spec.get("deformable", False))
        size = spec["size"]
        degree = spec.get("degree", 2)
        s_x = spec.get("s_x", 1.0)
        disk_radius = spec.get("disk_radius")
        out_channels = spec["out_channels"]
        spatial_centers = build_spatial_centers(size, disk_radius)
        if mode == "lifting":
            h_centers = np.asarray(group.identity_params())[None, ...]
            s_h = 1.0
            h_constant = True
        else:
            layout = spec.get("layout", "global_uniform")
            _, h_centers = build_h_grid(
                group,
                len(grid),
                grid.spacing,
                layout,
                n_k=spec.get("n_k"),
                stride=spec.get("stride", 2),
            )
            s_h = spec.get("s_h", grid.spacing)
            h_constant = False
        n_hc = 1 if h_constant else len(h_centers)
        n_centers = len(spatial_centers) * n_hc
        std = 1.0 / np.sqrt(in_channels * n_centers)
        coeff = rng.normal(0.0, std, size=(out_channels, in_channels, n_centers))
        self.kernel = SplineKernel(
            group, degree, spatial_centers, h_centers, s_x, s_h, coeff, h_constant
        )
        self.params = {"coeff": coeff}
        if self.deformable:
            self.params["centers_spatial"] = spatial_centers.copy()
            self.params["centers_h"] = (
                np.zeros(0) if h_constant else group.log(h_centers)[..., 0].copy()
            )
        max_scale = float(np.max(group.det_action(grid.elements))) ** (
            1.0 / group.action_dim
        )
        # rotations keep the k x k footprint (tails truncated as usual);
        # scalings need the dilated footprint sampled in full
        default_size = size if abs(max_scale - 1.0) < 1e-12 else _odd_ceil(max_scale * size)
        self.sample_size = max(spec.get("sample_size", default_size), size)
        self._base_stack = None

    def _current_kernel(self):
        k = self.kernel
        if self.deformable:
            h_centers = (
                k.h_centers
                if k.h_constant
                else self.group.exp(self.params["centers_h"][:, None])
            )
            k = SplineKernel(
                k.group,
                k.degree,
                self.params["centers_spatial"],
                h_centers,
                k.s_x,
                k.s_h,
                self.params["coeff"],
                k.h_constant,
            )
        else:
            k = k.with_coefficients(self.params["coeff"])
        return k

    def _stack(self):
        kernel = self._current_kernel()
        shape = (self.sample_size, self.sample_size)
        if self.deformable or self._base_stack is None:
            stack = ly.sample_transformed_kernels(kernel, self.grid, shape, self.mode)
            if not self.deformable:
                self._base_stack = stack
            return stack
        return ly.restack(self._base_stack, kernel)

    def forward(self, x):
        stack = self._stack()
        if self.mode == "lifting":
            y = ly.lift_corr_batched(x, stack.values, padding=self.padding)
        else:
            y = ly.group_corr_batched(
                x, stack.values, self.grid.weights, padding=self.padding
            )
        return y, (x, stack)

    def backward(self, cache, dy):
        x, stack = cache
        if self.mode == "lifting":
            dx, dk = ly.lift_corr_grad(x, stack.values, dy, padding=self.padding)
        else:
            dx, dk = ly.group_corr_grad(
                x, stack.values, self.grid.weights, dy, padding=self.padding
            )
        grads = {"coeff": ly.coefficient_grad(stack, dk)}
        if self.deformable:
            d_sp, d_h = ly.center_grads(stack, dk)
            grads["centers_spatial"] = d_sp
            grads["centers_h"] = d_h if d_h is not None else np.zeros(0)
        return dx, grads


class _Lift(_CorrLayer):
    def __init__(self, spec, group, grid, in_channels, rng):
        super().__init__(spec, group, grid, in_channels, rng, "lifting")


class _GConv(_CorrLayer):
    def __init__(self, spec, group, grid, in_channels, rng):
        super().__init__(spec, group, grid, in_channels, rng, "group")


class _Project(_Layer):
    kind = "project"

    def __init__(self, spec, grid):
        super().__init__()
        self.mode = spec.get("mode", "integral")
        self.grid = grid

    def forward(self, x):
        w = self.grid.weights
        if self.mode == "integral":
            y = np.einsum("bct...,t->bc...", x, w)
            return y, None
        if self.mode == "mean":
            y = np.einsum("bct...,t->bc...", x, w / w.sum())
            return y, None
        if self.mode == "max":
            idx = np.argmax(x, axis=2)
            y = np.take_along_axis(x, idx[:, :, None], axis=2)[:, :, 0]
            return y, idx
        raise ValueError(f"unknown projection mode {self.mode!r}")

    def backward(self, cache, dy):
        w = self.grid.weights
        if self.mode == "integral":
            dx = dy[:, :, None] * w[None, None, :, None, None]
        elif self.mode == "mean":
            wn = w / w.sum()
            dx = dy[:, :, None] * wn[None, None, :, None, None]
        else:
            idx = cache
            dx = np.zeros(dy.shape[:2] + (len(w),) + dy.shape[2:])
            np.put_along_axis(dx, idx[:, :, None], dy[:, :, None], axis=2)
        return dx, {}


class _ReLU(_Layer):
    kind = "relu"

    def forward(self, x):
        mask = x > 0
        return x * mask, mask

    def backward(self, cache, dy):
        return dy * cache, {}


class _Bias(_Layer):
    kind = "bias"

    def __init__(self, channels):
        super().__init__()
        self.params = {"bias": np.zeros(channels)}

    def forward(self, x):
        shape = (1, -1) + (1,) * (x.ndim - 2)
        return x + self.params["bias"].reshape(shape), x.ndim

    def backward(self, cache, dy):
        axes = tuple(i for i in range(dy.ndim) if i != 1)
        return dy, {"bias": dy.sum(axis=axes)}


class _Norm(_Layer):
    """Per-channel standardization over batch, H, and spatial positions,
    with learned gain/shift (simplified batch normalization; statistics
    always come from the current batch)."""

    kind = "norm"

    def __init__(self, channels):
        super().__init__()
        self.params = {"gain": np.ones(channels), "shift": np.zeros(channels)}

    def forward(self, x):
        axes = tuple(i for i in range(x.ndim) if i != 1)
        mu = x.mean(axis=axes, keepdims=True)
        var = x.var(axis=axes, keepdims=True)
        inv = 1.0 / np.sqrt(var + _EPS)
        xhat = (x - mu) * inv
        shape = (1, -1) + (1,) * (x.ndim - 2)
        y = self.params["gain"].reshape(shape) * xhat + self.params["shift"].reshape(shape)
        return y, (xhat, inv, axes)

    def backward(self, cache, dy):
        xhat, inv, axes = cache
        shape = (1, -1) + (1,) * (dy.ndim - 2)
        gain = self.params["gain"].reshape(shape)
        m = np.prod([dy.shape[i] for i in axes])
        d_xhat = dy * gain
        dx = (
            inv
            / m
            * (
                m * d_xhat
                - d_xhat.sum(axis=axes, keepdims=True)
                - xhat * (d_xhat * xhat).sum(axis=axes, keepdims=True)
            )
        )
        grads = {
            "gain": (dy * xhat).sum(axis=axes),
            "shift": dy.sum(axis=axes),
        }
        return dx, grads


class _MaxPool(_Layer):
    kind = "maxpool"

    def __init__(self, factor):
        super().__init__()
        self.factor = factor

    def forward(self, x):
        p = self.factor
        h, w = x.shape[-2:]
        if h % p or w % p:
            raise ValueError(f"maxpool factor {p} must divide spatial shape {(h, w)}")
        lead = x.shape[:-2]
        xr = x.reshape(lead + (h // p, p, w // p, p))
        xr = np.moveaxis(xr, -3, -2).reshape(lead + (h // p, w // p, p * p))
        idx = np.argmax(xr, axis=-1)
        y = np.take_along_axis(xr, idx[..., None], axis=-1)[..., 0]
        return y, (idx, x.shape)

    def backward(self, cache, dy):
        idx, in_shape = cache
        p = self.factor
        lead = in_shape[:-2]
        h, w = in_shape[-2:]
        dxr = np.zeros(lead + (h // p, w // p, p * p))
        np.put_along_axis(dxr, idx[..., None], dy[..., None], axis=-1)
        dxr = dxr.reshape(lead + (h // p, w // p, p, p))
        dx = np.moveaxis(dxr, -2, -3).reshape(in_shape)
        return dx, {}


class _Upsample(_Layer):
    kind = "upsample"

    def __init__(self, factor=2):
        super().__init__()
        self.factor = factor

    def forward(self, x):
        p = self.factor
        y = np.repeat(np.repeat(x, p, axis=-2), p, axis=-1)
        return y, x.shape

    def backward(self, cache, dy):
        p = self.factor
        in_shape = cache
        lead = in_shape[:-2]
        h, w = in_shape[-2:]
        dx = dy.reshape(lead + (h, p, w, p)).sum(axis=(-3, -1))
        return dx, {}


class _Conv1x1(_Layer):
    kind = "conv1x1"

    def __init__(self, in_channels, out_channels, rng):
        super().__init__()
        std = 1.0 / np.sqrt(in_channels)
        self.params = {"weight": rng.normal(0.0, std, size=(out_channels, in_channels))}

    def forward(self, x):
        y = np.einsum("oc,bcyx->boyx", self.params["weight"], x)
        return y, x

    def backward(self, cache, dy):
        x = cache
        dw = np.einsum("boyx,bcyx->oc", dy, x)
        dx = np.einsum("oc,boyx->bcyx", self.params["weight"], dy)
        return dx, {"weight": dw}


class _Softmax(_Layer):
    kind = "softmax"

    def forward(self, x):
        z = x - x.max(axis=1, keepdims=True)
        e = np.exp(z)
        p = e / e.sum(axis=1, keepdims=True)
        return p, p

    def backward(self, cache, dy):
        p = cache
        dot = (dy * p).sum(axis=1, keepdims=True)
        return p * (dy - dot), {}


class _Sigmoid(_Layer):
    kind = "sigmoid"

    def forward(self, x):
        s = 1.0 / (1.0 + np.exp(-x))
        return s, s

    def backward(self, cache, dy):
        s = cache
        return dy * s * (1.0 - s), {}


class Network:
    """A sequential equivariant network built from a config dict."""

    def __init__(self, config, seed=0):
        if isinstance(config, str):
            with open(config) as fh:
                config = json.load(fh)
        self.config = config
        rng = np.random.default_rng(seed)
        inp = config.get("input", {})
        channels = inp.get("channels", 1)
        group_name = config.get("group", "so2")
        d = inp.get("spatial_dim", 2)
        self.group = get_group(group_name, d)
        self.layers: list[_Layer] = []
        grid = None
        lifted = False
        for i, spec in enumerate(config["layers"]):
            kind = spec["type"]
            if kind == "lift":
                if lifted:
                    raise ConfigTypeError(i, "lift expects a planar input")
                n_h = spec.get("n_h", 1)
                default_spacing = (
                    2 * np.pi / n_h if group_name == "so2" else 0.5 * np.log(2.0)
                )
                s_grid = spec.get("s_grid", default_spacing)
                grid, _ = build_h_grid(self.group, n_h, s_grid, "global_uniform")
                layer = _Lift(spec, self.group, grid, channels, rng)
                channels = spec["out_channels"]
                lifted = True
            elif kind == "gconv":
                if not lifted:
                    raise ConfigTypeError(i, "gconv expects a lifted input")
                layer = _GConv(spec, self.group, grid, channels, rng)
                channels = spec["out_channels"]
            elif kind == "project":
                if not lifted:
                    raise ConfigTypeError(i, "project expects a lifted input")
                layer = _Project(spec, grid)
                lifted = False
                grid = None
            elif kind == "relu":
                layer = _ReLU()
            elif kind == "bias":
                layer = _Bias(channels)
            elif kind == "norm":
                layer = _Norm(channels)
            elif kind == "maxpool":
                layer = _MaxPool(spec.get("factor", 2))
            elif kind == "upsample":
                layer = _Upsample(spec.get("factor", 2))
            elif kind == "conv1x1":
                if lifted:
                    raise ConfigTypeError(i, "conv1x1 expects a planar input")
                layer = _Conv1x1(channels, spec["out_channels"], rng)
                channels = spec["out_channels"]
            elif kind == "softmax":
                layer = _Softmax()
            elif kind == "sigmoid":
                layer = _Sigmoid()
            else:
                raise ConfigTypeError(i, f"unknown layer type {kind!r}")
            self.layers.append(layer)
        self.output_lifted = lifted
        self.output_grid = grid

    # -- parameter plumbing ------------------------------------------------
    def parameters(self):
        """(layer_index, name, array) triples for all trainable params."""
        out = []
        for i, layer in enumerate(self.layers):
            for name, arr in layer.params.items():
                out.append((i, name, arr))
        return out

    def get_flat(self):
        return np.concatenate([arr.ravel() for _, _, arr in self.parameters()] or [np.zeros(0)])

    def set_flat(self, flat):
        pos = 0
        for i, name, arr in self.parameters():
            n = arr.size
            self.layers[i].params[name] = flat[pos : pos + n].reshape(arr.shape).copy()
            pos += n
        self._invalidate()

    def _invalidate(self):
        for layer in self.layers:
            if isinstance(layer, _CorrLayer):
                layer.kernel = layer.kernel.with_coefficients(layer.params["coeff"])

    # -- forward / backward -------------------------------------------------
    def forward(self, x):
        """x [B, C, H, W] -> (output, caches)."""
        caches = []
        for i, layer in enumerate(self.layers):
            try:
                x, cache = layer.forward(x)
            except ValueError as exc:
                raise ConfigTypeError(i, str(exc)) from exc
            caches.append(cache)
        return x, caches

    def backward(self, caches, d_out):
        """Exact adjoint of :meth:`forward`.

        Returns (grads, d_input) with grads a list of per-layer dicts
        whose shapes mirror the parameters exactly."""
        if len(caches) != len(self.layers):
            raise CacheMismatch("cache does not match the layer chain")
        grads = [None] * len(self.layers)
        dy = d_out
        for i in range(len(self.layers) - 1, -1, -1):
            dy, g = self.layers[i].backward(caches[i], dy)
            grads[i] = g
        return grads, dy


def network_forward(network: Network, fmap: FeatureMap):
    """Run a single FeatureMap through the network.

    Returns (output FeatureMap, cached intermediates for backward)."""
    out, caches = network.forward(fmap.data[None])
    if network.output_lifted:
        result = FeatureMap(out[0], grid=network.output_grid, spatial_step=fmap.spatial_step)
    else:
        result = FeatureMap(out[0], spatial_step=fmap.spatial_step)
    return result, caches


def network_backward(network: Network, caches, d_output):
    """Adjoint of :func:`network_forward` for a single FeatureMap."""
    d_out = np.asarray(d_output, dtype=float)
    if d_out.ndim == (4 if not network.output_lifted else 5):
        batched = d_out
    else:
        batched = d_out[None]
    grads, dx = network.backward(caches, batched)
    return grads, dx[0] if batched.shape[0] == 1 and d_out.ndim != batched.ndim else dx
