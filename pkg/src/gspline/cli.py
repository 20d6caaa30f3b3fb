"""Command-line entry point.

Subcommands: kernel-sample, verify, pou, train-toy, reconstruct-sphere,
gradcheck, equivariance. All randomness flows from ``--seed`` (default 0)
and repeated runs produce identical files and reports. Exit codes:
0 = all invoked checks passed, 1 = a check failed, 2 = argument error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from importlib import resources

import numpy as np

from . import verification as vf
from .errors import GSplineError
from .groups import get_group
from .layers import sample_transformed_kernels
from .learning import (
    classification_accuracy,
    detection_fraction,
    make_synthetic_dataset,
    predict_maps,
    sgd_train,
)
from .network import Network
from .splines import SplineKernel, build_h_grid, build_spatial_centers
from .tensorio import save_tensor


def _apply_thread_cap():
    """Best-effort cap on BLAS threads from GSPLINE_THREADS (0 = auto)."""
    cap = os.environ.get("GSPLINE_THREADS")
    if not cap or cap == "0":
        return
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(var, cap)


def resolve_config(name_or_path):
    """A config path on disk, or the name of a bundled preset."""
    if os.path.exists(name_or_path):
        with open(name_or_path) as fh:
            return json.load(fh)
    base = os.path.basename(name_or_path)
    if not base.endswith(".json"):
        base += ".json"
    ref = resources.files("gspline").joinpath("presets", base)
    if ref.is_file():
        return json.loads(ref.read_text())
    raise FileNotFoundError(f"no config file or preset named {name_or_path!r}")


def _emit(reports, json_path=None):
    lines = [r.to_json() for r in reports]
    for line in lines:
        print(line)
    if json_path:
        with open(json_path, "w") as fh:
            fh.write("\n".join(lines) + "\n")
    return 0 if all(r.passed for r in reports) else 1


def _cmd_kernel_sample(args):
    group = get_group(args.group, 2)
    grid, h_centers = build_h_grid(
        group,
        args.n_h,
        args.s_grid if args.s_grid is not None else _default_spacing(args.group, args.n_h),
        args.layout,
        n_k=args.n_k,
        stride=args.stride,
    )
    centers = build_spatial_centers(args.size, args.disk_radius)
    rng = np.random.default_rng(args.seed)
    if args.mode == "lifting":
        kernel = SplineKernel(
            group, args.degree, centers,
            np.asarray(group.identity_params())[None, ...],
            1.0, grid.spacing or 1.0,
            rng.normal(size=(args.out_channels, args.in_channels, len(centers))),
            h_constant=True,
        )
    else:
        kernel = SplineKernel(
            group, args.degree, centers, h_centers,
            1.0, grid.spacing,
            rng.normal(
                size=(args.out_channels, args.in_channels, len(centers) * len(h_centers))
            ),
            h_constant=False,
        )
    stack = sample_transformed_kernels(kernel, grid, (args.size, args.size), args.mode)
    save_tensor(args.out, stack.values)
    print(f"wrote {args.out}: shape {list(stack.values.shape)}")
    return 0


def _default_spacing(group_name, n_h):
    return 2 * np.pi / n_h if group_name == "so2" else 0.5 * np.log(2.0)


def _cmd_verify(args):
    return _emit(vf.run_suite(args.suite, args.seed), args.json)


def _cmd_pou(args):
    group = get_group(args.group, 2)
    s_grid = args.s_grid if args.s_grid is not None else _default_spacing(args.group, args.n_h)
    grid, _ = build_h_grid(group, args.n_h, s_grid)
    s_h = args.s_h if args.s_h is not None else s_grid
    report = vf.partition_of_unity_deviation(
        group, grid, args.degree, s_h, args.samples, args.seed,
        tolerance=args.tolerance,
        check_id=f"pou_{args.group}_n{args.degree}",
    )
    return _emit([report], args.json)


def _cmd_train_toy(args):
    config = resolve_config(args.config)
    train, test = make_synthetic_dataset(args.task, args.n_train, args.n_test, args.seed)
    lr = args.lr if args.lr is not None else (0.1 if args.task == "rot_patterns" else 0.5)
    batch = args.batch if args.batch is not None else (32 if args.task == "rot_patterns" else 8)
    net, losses = sgd_train(config, train, lr, args.epochs, batch, args.seed)
    result = {"task": args.task, "seed": args.seed, "losses": [round(l, 6) for l in losses]}
    if args.task == "rot_patterns":
        result["test_accuracy"] = classification_accuracy(net, test)
        print(json.dumps(result, sort_keys=True))
        print(f"test accuracy: {result['test_accuracy']:.4f}")
    else:
        preds = predict_maps(net, test.inputs, batch)
        result["detection_fraction"] = detection_fraction(preds, test.targets, radius=3.0)
        print(json.dumps(result, sort_keys=True))
        print(f"detections within 3 px: {result['detection_fraction']:.4f}")
    return 0


def _cmd_reconstruct_sphere(args):
    ns = tuple(int(v) for v in args.n.split(","))
    report = vf.sphere_reconstruction_error(ns=ns, degree=args.degree, seed=args.seed)
    lines = ["n,rms"] + [
        f"{n},{rms:.10g}" for n, rms in zip(report.metadata["ns"], report.metadata["rms"])
    ]
    csv = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(csv)
    print(csv, end="")
    print(report.to_json())
    return 0 if report.passed else 1


def _cmd_gradcheck(args):
    config = resolve_config(args.config)
    report = vf.gradcheck(config, seed=args.seed, probes=args.probes)
    return _emit([report], args.json)


def _cmd_equivariance(args):
    reports = vf.run_suite("equivariance", args.seed)
    return _emit(reports, args.json)


def build_parser():
    p = argparse.ArgumentParser(prog="gspline", description=__doc__)
    p.add_argument("--seed", type=int, default=0, help="seed for all randomness")
    sub = p.add_subparsers(dest="command", required=True)

    ks = sub.add_parser("kernel-sample", help="sample a transformed kernel stack to a tensor file")
    ks.add_argument("--group", default="so2", choices=["so2", "scale"])
    ks.add_argument("--n-h", type=int, default=8)
    ks.add_argument("--size", type=int, default=5)
    ks.add_argument("--degree", type=int, default=2)
    ks.add_argument("--layout", default="global_uniform",
                    choices=["global_uniform", "localized", "atrous"])
    ks.add_argument("--n-k", type=int, default=3)
    ks.add_argument("--stride", type=int, default=2)
    ks.add_argument("--s-grid", type=float, default=None)
    ks.add_argument("--disk-radius", type=float, default=None)
    ks.add_argument("--mode", default="group", choices=["lifting", "group"])
    ks.add_argument("--in-channels", type=int, default=1)
    ks.add_argument("--out-channels", type=int, default=1)
    ks.add_argument("--out", required=True)
    ks.set_defaults(func=_cmd_kernel_sample)

    ve = sub.add_parser("verify", help="run a verification suite")
    ve.add_argument("--suite", default="all",
                    choices=["all", "pou", "equivariance", "scale_space", "gauge",
                             "gradcheck", "sphere"])
    ve.add_argument("--json", default=None, help="also write JSON-lines report here")
    ve.set_defaults(func=_cmd_verify)

    po = sub.add_parser("pou", help="partition-of-unity deviation")
    po.add_argument("--group", default="so2", choices=["so2", "scale"])
    po.add_argument("--n-h", type=int, default=8)
    po.add_argument("--degree", type=int, default=2)
    po.add_argument("--s-grid", type=float, default=None)
    po.add_argument("--s-h", type=float, default=None)
    po.add_argument("--samples", type=int, default=1000)
    po.add_argument("--tolerance", type=float, default=1e-9)
    po.add_argument("--json", default=None)
    po.set_defaults(func=_cmd_pou)

    tt = sub.add_parser("train-toy", help="train a preset on a synthetic task")
    tt.add_argument("--task", required=True, choices=["rot_patterns", "scale_blobs"])
    tt.add_argument("--config", required=True)
    tt.add_argument("--n-train", type=int, default=512)
    tt.add_argument("--n-test", type=int, default=256)
    tt.add_argument("--epochs", type=int, default=4)
    tt.add_argument("--lr", type=float, default=None)
    tt.add_argument("--batch", type=int, default=None)
    tt.set_defaults(func=_cmd_train_toy)

    rs = sub.add_parser("reconstruct-sphere", help="sphere texture reconstruction RMS vs N")
    rs.add_argument("--n", default="50,500,5000")
    rs.add_argument("--degree", type=int, default=2)
    rs.add_argument("--out", default=None, help="write CSV here")
    rs.set_defaults(func=_cmd_reconstruct_sphere)

    gc = sub.add_parser("gradcheck", help="finite-difference gradient check of a config")
    gc.add_argument("--config", required=True)
    gc.add_argument("--probes", type=int, default=100)
    gc.add_argument("--json", default=None)
    gc.set_defaults(func=_cmd_gradcheck)

    eq = sub.add_parser("equivariance", help="equivariance error reports")
    eq.add_argument("--json", default=None)
    eq.set_defaults(func=_cmd_equivariance)
    return p


def main(argv=None):
    _apply_thread_cap()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (GSplineError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
