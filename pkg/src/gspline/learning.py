"""Losses, a minimal SGD training loop, synthetic desk-scale datasets, and
checkpoint I/O. All arithmetic is 64-bit; checkpoints may be stored at
32 bits for file size."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import DivergenceDetected, ShapeMismatch
from .network import Network
from .tensorio import read_tensor, write_tensor


@dataclass
class ParameterGradients:
    """Per-layer gradient dicts; shapes mirror the parameters exactly."""

    layers: list


@dataclass
class SyntheticDataset:
    inputs: np.ndarray  # [N, C, H, W]
    targets: np.ndarray  # class labels [N] or heatmaps [N, 1, H, W]
    generator_seed: int
    task_id: str

    def __len__(self):
        return len(self.inputs)


def loss_eval(prediction, target, kind):
    """Loss value plus analytic gradient w.r.t. the prediction.

    * ``softmax_ce``: prediction = logits [..., n_classes], target = class
      indices; mean over leading axes.
    * ``sigmoid_bce``: prediction = logits, target = same-shape values in
      [0, 1]; mean over all elements.
    """
    prediction = np.asarray(prediction, dtype=float)
    if kind == "softmax_ce":
        target = np.asarray(target)
        if prediction.shape[:-1] != target.shape:
            raise ShapeMismatch(f"logits {prediction.shape} vs labels {target.shape}")
        z = prediction - prediction.max(axis=-1, keepdims=True)
        logp = z - np.log(np.exp(z).sum(axis=-1, keepdims=True))
        n = max(1, int(np.prod(target.shape)))
        picked = np.take_along_axis(logp, target[..., None], axis=-1)[..., 0]
        loss = -picked.mean() if target.ndim else -float(picked)
        p = np.exp(logp)
        onehot = np.zeros_like(p)
        np.put_along_axis(onehot, target[..., None], 1.0, axis=-1)
        return float(loss), (p - onehot) / n
    if kind == "sigmoid_bce":
        target = np.asarray(target, dtype=float)
        if prediction.shape != target.shape:
            raise ShapeMismatch(f"{prediction.shape} vs {target.shape}")
        # stable log(1 + exp(x)) formulation
        loss_el = np.maximum(prediction, 0.0) - prediction * target + np.log1p(
            np.exp(-np.abs(prediction))
        )
        n = prediction.size
        sig = 1.0 / (1.0 + np.exp(-prediction))
        return float(loss_el.mean()), (sig - target) / n
    raise ValueError(f"unknown loss kind {kind!r}")


# ---------------------------------------------------------------------------
# synthetic datasets


def _rot_coords(size, theta, center):
    """Rotated, centered coordinates (u_par, u_perp) of a size x size grid."""
    axis = np.arange(size) - (size - 1) / 2.0
    yy, xx = np.meshgrid(axis, axis, indexing="ij")
    yy = yy - center[0]
    xx = xx - center[1]
    c, s = np.cos(theta), np.sin(theta)
    u_par = c * xx + s * yy
    u_perp = -s * xx + c * yy
    return u_par, u_perp


def _ridge(u_par, u_perp, length, width):
    return np.exp(-(u_perp**2) / (2 * width**2) - (u_par**2) / (2 * length**2))


def _rot_sample(label, theta, center, rng, size=24):
    """Chiral flag motif: a long ridge with a perpendicular arm attached on
    one side of its tip. The two classes are mirror images, so they share
    every orientation-agnostic statistic (total mass, spectrum) and are
    separable only through the handedness of the arm relative to the
    ridge direction -- which rotations preserve."""
    u_par, u_perp = _rot_coords(size, theta, center)
    side = 1.0 if label == 0 else -1.0
    img = _ridge(u_par, u_perp, 4.5, 0.8)
    img = img + _ridge(u_perp - side * 2.0, u_par - 4.0, 2.0, 0.8)
    img = img + rng.normal(0.0, 0.05, size=img.shape)
    return img[None]


def _rot_angles(rng, n, test):
    """Angles from interleaved quarter-circle arcs; train and test arcs
    are disjoint so the 2D baseline cannot interpolate orientations."""
    if test:
        arcs = [(np.pi / 2, np.pi), (3 * np.pi / 2, 2 * np.pi)]
    else:
        arcs = [(0.0, np.pi / 2), (np.pi, 3 * np.pi / 2)]
    lo, hi = arcs[0] if n == 1 else (0, 0)
    picks = rng.integers(0, 2, size=n)
    u = rng.uniform(0.0, 1.0, size=n)
    out = np.empty(n)
    for i in range(n):
        lo, hi = arcs[picks[i]]
        out[i] = lo + u[i] * (hi - lo)
    return out


def _make_rot_patterns(n, seed, test):
    rng = np.random.default_rng((seed, 1 if test else 0, 17))
    labels = np.arange(n) % 2
    rng.shuffle(labels)
    thetas = _rot_angles(rng, n, test)
    centers = rng.uniform(-2.0, 2.0, size=(n, 2))
    imgs = np.stack(
        [_rot_sample(labels[i], thetas[i], centers[i], rng) for i in range(n)]
    )
    return imgs, labels.astype(int)


def _gauss_heatmap(size, center, sigma=1.5):
    axis = np.arange(size) - (size - 1) / 2.0
    yy, xx = np.meshgrid(axis, axis, indexing="ij")
    return np.exp(-(((yy - center[0]) ** 2) + (xx - center[1]) ** 2) / (2 * sigma**2))

def _blob_sample(scale, center, rng, size=32):
    axis = np.arange(size) - (size - 1) / 2.0
    yy, xx = np.meshgrid(axis, axis, indexing="ij")
    r = np.sqrt((yy - center[0]) ** 2 + (xx - center[1]) ** 2)
    img = np.exp(-((r - 3.0 * scale) ** 2) / (2 * (0.4 * scale) ** 2))
    img = img + rng.normal(0.0, 0.15, size=img.shape)
    target = _gauss_heatmap(size, center)
    return img[None], target[None]


def _make_scale_blobs(n, seed, test):
    rng = np.random.default_rng((seed, 1 if test else 0, 29))
    # scales log-uniform over [1, 2 sqrt 2]; train/test take interleaved
    # log-strata so the splits are disjoint by construction
    n_strata = 12
    edges = np.linspace(0.0, 1.5 * np.log(2.0), n_strata + 1)
    strata = np.arange(1 if test else 0, n_strata, 2)
    pick = rng.integers(0, len(strata), size=n)
    u = rng.uniform(0.0, 1.0, size=n)
    logs = edges[strata[pick]] + u * (edges[1] - edges[0])
    scales = np.exp(logs)
    centers = rng.uniform(-7.0, 7.0, size=(n, 2))
    imgs, targets = [], []
    for i in range(n):
        img, tgt = _blob_sample(scales[i], centers[i], rng)
        imgs.append(img)
        targets.append(tgt)
    return np.stack(imgs), np.stack(targets)


def make_synthetic_dataset(task_id, n_train, n_test, seed=0):
    """Deterministic synthetic data; train/test disjoint by construction
    (disjoint angle arcs / scale strata)."""
    if n_train <= 0 or n_test <= 0:
        raise ValueError("counts must be positive")
    if task_id == "rot_patterns":
        xi, yi = _make_rot_patterns(n_train, seed, test=False)
        xt, yt = _make_rot_patterns(n_test, seed, test=True)
    elif task_id == "scale_blobs":
        xi, yi = _make_scale_blobs(n_train, seed, test=False)
        xt, yt = _make_scale_blobs(n_test, seed, test=True)
    else:
        raise ValueError(f"unknown task {task_id!r}")
    train = SyntheticDataset(xi, yi, seed, task_id)
    test = SyntheticDataset(xt, yt, seed, task_id)
    return train, test


# ---------------------------------------------------------------------------
# training


def _loss_kind_for(network: Network):
    last = network.layers[-1].kind if network.layers else None
    if last == "softmax":
        return "softmax_ce", True
    if last == "sigmoid":
        return "sigmoid_bce", True
    return None, False


def batch_loss(network: Network, x, target, kind=None):
    """Forward a batch, return (loss, grads, caches).

    When the network ends in softmax/sigmoid, the loss is taken on the
    pre-activation logits (numerically stable) and backward skips that
    layer, so the forward pass stops before it."""
    auto_kind, strip = _loss_kind_for(network)
    kind = kind or auto_kind
    y = x
    caches = []
    for layer in network.layers[: len(network.layers) - (1 if strip else 0)]:
        y, cache = layer.forward(y)
        caches.append(cache)
    logits = y
    if kind == "softmax_ce":
        squeezed = logits.reshape(logits.shape[0], logits.shape[1])
        loss, d_logits = loss_eval(squeezed, target, kind)
        d_logits = d_logits.reshape(logits.shape)
    else:
        loss, d_logits = loss_eval(logits, target, kind)
    grads = [None] * len(network.layers)
    dy = d_logits
    upto = len(network.layers) - (1 if strip else 0)
    for i in range(upto - 1, -1, -1):
        dy, g = network.layers[i].backward(caches[i], dy)
        grads[i] = g
    if strip:
        grads[-1] = {}
    return loss, ParameterGradients(grads), caches


def sgd_train(network_or_config, dataset, lr, epochs, batch=32, seed=0, callback=None):
    """Plain SGD with fixed learning rate; deterministic given the seed.

    Returns (network, per-epoch mean losses)."""
    if lr < 0:
        raise ValueError("lr must be non-negative")
    network = (
        network_or_config
        if isinstance(network_or_config, Network)
        else Network(network_or_config, seed=seed)
    )
    rng = np.random.default_rng((seed, 0xB0))
    losses = []
    n = len(dataset)
    for epoch in range(epochs):
        order = rng.permutation(n)
        epoch_losses = []
        for start in range(0, n, batch):
            idx = order[start : start + batch]
            x = dataset.inputs[idx]
            t = dataset.targets[idx]
            loss, grads, _ = batch_loss(network, x, t)
            if not np.isfinite(loss):
                raise DivergenceDetected(f"loss became {loss} at epoch {epoch}")
            epoch_losses.append(loss)
            if lr > 0:
                for i, g in enumerate(grads.layers):
                    if not g:
                        continue
                    for name, arr in g.items():
                        network.layers[i].params[name] = (
                            network.layers[i].params[name] - lr * arr
                        )
        losses.append(float(np.mean(epoch_losses)))
        if callback is not None:
            callback(epoch, losses[-1])
    return network, losses


def predict_classes(network: Network, inputs, batch=64):
    preds = []
    for start in range(0, len(inputs), batch):
        out, _ = network.forward(inputs[start : start + batch])
        preds.append(np.argmax(out.reshape(out.shape[0], out.shape[1]), axis=1))
    return np.concatenate(preds)


def classification_accuracy(network: Network, dataset, batch=64):
    preds = predict_classes(network, dataset.inputs, batch)
    return float(np.mean(preds == dataset.targets))


def detection_fraction(pred_maps, target_maps, radius=3.0):
    """Fraction of samples whose predicted heatmap peak lies within
    ``radius`` pixels of the target heatmap peak."""
    pred_maps = np.asarray(pred_maps)
    target_maps = np.asarray(target_maps)
    hits = 0
    for p, t in zip(pred_maps, target_maps):
        py, px = np.unravel_index(np.argmax(p[0]), p[0].shape)
        ty, tx = np.unravel_index(np.argmax(t[0]), t[0].shape)
        if np.hypot(py - ty, px - tx) <= radius:
            hits += 1
    return hits / max(1, len(pred_maps))


def predict_maps(network: Network, inputs, batch=32):
    outs = []
    for start in range(0, len(inputs), batch):
        out, _ = network.forward(inputs[start : start + batch])
        outs.append(out)
    return np.concatenate(outs)


# ---------------------------------------------------------------------------
# checkpoints: GST1 tensor of the flat parameter vector followed by a JSON
# manifest of parameter names/shapes


def save_checkpoint(path, network: Network):
    manifest = [
        {"layer": i, "name": name, "shape": list(arr.shape)}
        for i, name, arr in network.parameters()
    ]
    with open(path, "wb") as fh:
        write_tensor(fh, network.get_flat())
        fh.write(json.dumps(manifest).encode("utf-8"))


def load_checkpoint(path, network: Network):
    with open(path, "rb") as fh:
        flat = read_tensor(fh)
        manifest = json.loads(fh.read().decode("utf-8"))
    expected = [
        {"layer": i, "name": name, "shape": list(arr.shape)}
        for i, name, arr in network.parameters()
    ]
    if manifest != expected:
        raise ShapeMismatch("checkpoint manifest does not match the network")
    network.set_flat(flat)
    return network
