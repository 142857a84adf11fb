"""Command-line interface.

Subcommands: ingest-images, ingest-colors, barycenter, interpolate, wpg,
render. Exit codes: 0 on success, 1 on usage/input errors, 2 on numerical
failure.

Epsilon convention: every --epsilon flag is relative to the mean squared
distance of the problem it parameterizes (grid-to-grid for fixed-support
barycenters, pooled-atom pairs for free support, base-to-data for component
fitting) and is converted once to an absolute value; the default 1e-2 keeps
the entropic blur about two orders below the typical cost.
"""

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .barycenter import (
    barycenter_fixed_support,
    barycenter_free_support,
    barycenter_multimarginal_exact,
)
from .geodesics import GeneralizedGeodesic, mccann_interpolant, sample_geodesic
from .ingest import image_to_measure, quantize_colors, read_pgm, read_ppm
from .measures import (
    DiscreteMeasure,
    cost_matrix,
    load_measure_csv,
    save_measure_csv,
)
from .principal import SolverConfig, fit
from .render import (
    image_to_ppm,
    measure_to_raster,
    raster_to_pgm,
    render_palette_strip,
    render_scatter_svg,
)
from .transport import NumericalError, exact_transport

POOL_CAP = 2000  # atoms sampled when estimating the mean cost scale


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _save_measure(m, path, fmt):
    path = Path(path)
    if fmt == "json":
        path = path.with_suffix(".json")
        payload = {
            "weights": m.weights.tolist(),
            "locations": m.locations.tolist(),
        }
        path.write_text(json.dumps(payload, sort_keys=True) + "\n")
    else:
        save_measure_csv(m, path)
    return path


def _load_measure(path):
    path = Path(path)
    if path.suffix == ".json":
        payload = json.loads(path.read_text())
        return DiscreteMeasure(np.asarray(payload["locations"]),
                               np.asarray(payload["weights"]))
    return load_measure_csv(path)


def _save_velocity_csv(V, path):
    with open(path, "w", newline="") as fh:
        fh.write(",".join(f"x{i + 1}" for i in range(V.shape[0])) + "\n")
        for k in range(V.shape[1]):
            fh.write(",".join(f"{c:.17g}" for c in V[:, k]) + "\n")


def _plan_to_csv(plan, path):
    with open(path, "w", newline="") as fh:
        fh.write("row,col,mass\n")
        rows, cols = np.nonzero(plan.matrix)
        for r, c in zip(rows, cols):
            fh.write(f"{r},{c},{plan.matrix[r, c]:.17g}\n")


def _mean_cost(Z, X):
    if Z.shape[1] > POOL_CAP:
        Z = Z[:, :POOL_CAP]
    if X.shape[1] > POOL_CAP:
        X = X[:, :POOL_CAP]
    return float(cost_matrix(Z, X).mean())


def _outdir(args):
    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


# ---------------------------------------------------------------- ingest

def _cmd_ingest_images(args):
    out = _outdir(args)
    for image_path in args.images:
        image_path = Path(image_path)
        pixels = read_pgm(image_path)
        m = image_to_measure(pixels)
        target = _save_measure(m, out / (image_path.stem + ".csv"), args.format)
        print(target)
    return 0


def _cmd_ingest_colors(args):
    out = _outdir(args)
    for input_path in args.inputs:
        input_path = Path(input_path)
        if input_path.suffix == ".csv":
            pixels = np.loadtxt(input_path, delimiter=",", ndmin=2)
        else:
            pixels = read_ppm(input_path).reshape(-1, 3)
        m = quantize_colors(pixels, args.k, args.seed)
        target = _save_measure(m, out / (input_path.stem + ".csv"), args.format)
        print(target)
    return 0


# ------------------------------------------------------------ barycenter

def _cmd_barycenter(args):
    measures = [_load_measure(p) for p in args.inputs]
    if not measures:
        raise UsageError("no input measures")
    if args.mode == "fixed":
        if args.grid is None:
            raise UsageError("--grid W H is required in fixed mode")
        w, h = args.grid
        xs, ys = np.meshgrid(np.arange(w) + 0.5, np.arange(h) + 0.5)
        grid = np.stack([xs.ravel(), ys.ravel()])
        hists = np.stack([_measure_to_grid_histogram(m, w, h) for m in measures])
        epsilon = args.epsilon * _mean_cost(grid, grid)
        result = barycenter_fixed_support(hists, grid, epsilon)
    elif args.mode == "free":
        pooled = np.concatenate([m.locations for m in measures], axis=1)
        epsilon = args.epsilon * _mean_cost(pooled, pooled)
        result = barycenter_free_support(measures, args.p, epsilon, seed=args.seed)
    else:
        result = barycenter_multimarginal_exact(measures)
    target = _save_measure(result, args.output, args.format)
    print(target)
    return 0


def _measure_to_grid_histogram(m, w, h):
    if m.d != 2:
        raise UsageError("fixed mode requires planar measures")
    cols = np.clip(np.floor(m.locations[0]).astype(int), 0, w - 1)
    rows = np.clip(np.floor(m.locations[1]).astype(int), 0, h - 1)
    hist = np.zeros(w * h)
    np.add.at(hist, rows * w + cols, m.weights)
    return hist


# ----------------------------------------------------------- interpolate

def _cmd_interpolate(args):
    nu = _load_measure(args.source)
    eta = _load_measure(args.target)
    out = _outdir(args)
    for t in np.linspace(0.0, 1.0, args.t_samples):
        m = mccann_interpolant(nu, eta, float(t))
        target = _save_measure(m, out / f"interp_t{t:.4f}.csv", args.format)
        print(target)
    if args.export_plan:
        plan = exact_transport(
            nu.weights, eta.weights, cost_matrix(nu.locations, eta.locations)
        )
        _plan_to_csv(plan, out / "plan.csv")
        print(out / "plan.csv")
    return 0


# ------------------------------------------------------------------ wpg

def _expand_inputs(paths):
    if len(paths) == 1 and paths[0].endswith(".json"):
        manifest_path = Path(paths[0])
        listed = json.loads(manifest_path.read_text()).get("measures")
        if listed is None:
            raise UsageError(f"{manifest_path}: manifest lacks a 'measures' list")
        return [manifest_path.parent / p for p in listed]
    return [Path(p) for p in paths]


def _cmd_wpg(args):
    base = _load_measure(args.base)
    inputs = _expand_inputs(args.inputs)
    measures = [_load_measure(p) for p in inputs]
    if not measures:
        raise UsageError("no input measures")
    out = _outdir(args)
    pooled = np.concatenate([m.locations for m in measures], axis=1)
    epsilon = args.epsilon * _mean_cost(base.locations, pooled)
    cfg = SolverConfig(
        epsilon=epsilon,
        n_components=args.components,
        lam=args.lam,
        beta=args.beta,
        grid_k=args.grid_k,
        max_outer_iter=args.max_iter,
        obj_tol=args.tol,
        seed=args.seed,
    )
    result = fit(measures, base, cfg)

    base_path = out / "base_measure.csv"
    save_measure_csv(result.base, base_path)
    sample_times = np.linspace(0.0, 1.0, args.t_samples)
    components = []
    for c, (V1, V2) in enumerate(result.components):
        tag = f"component{c + 1}"
        v1_path = out / f"{tag}_v1.csv"
        v2_path = out / f"{tag}_v2.csv"
        _save_velocity_csv(V1, v1_path)
        _save_velocity_csv(V2, v2_path)
        geod = GeneralizedGeodesic(result.base, V1, V2)
        samples = []
        for t in sample_times:
            sample_path = out / f"{tag}_t{t:.4f}.csv"
            save_measure_csv(sample_geodesic(geod, float(t)), sample_path)
            samples.append({"t": float(t), "path": sample_path.name})
        components.append({
            "v1_path": v1_path.name,
            "v2_path": v2_path.name,
            "samples": samples,
            "objective_trace": result.objective_trace[c],
            "projection_times": result.projection_times[c].tolist(),
        })
    manifest = {
        "config": {
            "components": args.components,
            "epsilon_relative": args.epsilon,
            "epsilon_absolute": epsilon,
            "lambda": args.lam,
            "beta": args.beta,
            "grid_k": args.grid_k,
            "max_iter": args.max_iter,
            "tol": args.tol,
            "seed": args.seed,
            "t_samples": args.t_samples,
        },
        "coordinate_convention": "image measures use raster order: y increases downward",
        "base_measure_path": base_path.name,
        "components": components,
    }
    manifest_path = out / "manifest.json"
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    print(manifest_path)
    return 0


# ---------------------------------------------------------------- render

def _cmd_render(args):
    out = _outdir(args)
    measures = [_load_measure(p) for p in args.inputs]
    if args.kind == "scatter":
        labels = [Path(p).stem for p in args.inputs]
        target = out / "scatter.svg"
        target.write_text(render_scatter_svg(measures, labels=labels))
    elif args.kind == "raster":
        if len(measures) != 1:
            raise UsageError("raster rendering takes exactly one measure")
        h, w = args.raster_size
        target = out / (Path(args.inputs[0]).stem + ".pgm")
        target.write_text(raster_to_pgm(measure_to_raster(measures[0], h, w)))
    else:
        if len(measures) != 1:
            raise UsageError("palette rendering takes exactly one measure")
        strip = render_palette_strip(measures[0], width=args.strip_width)
        target = out / (Path(args.inputs[0]).stem + ".ppm")
        target.write_text(image_to_ppm(strip))
    print(target)
    return 0


# ----------------------------------------------------------------- main

def build_parser():
    parser = _Parser(prog="wassgeo", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--output-dir", default=".")
        p.add_argument("--format", choices=("csv", "json"), default="csv")

    p = sub.add_parser("ingest-images", help="PGM images to measure files")
    common(p)
    p.add_argument("images", nargs="+")
    p.set_defaults(func=_cmd_ingest_images)

    p = sub.add_parser("ingest-colors", help="quantize RGB pixel clouds")
    common(p)
    p.add_argument("--k", type=int, default=128)
    p.add_argument("inputs", nargs="+", help="PPM images or CSV files of r,g,b rows")
    p.set_defaults(func=_cmd_ingest_colors)

    p = sub.add_parser("barycenter", help="Wasserstein mean of measures")
    common(p)
    p.add_argument("--mode", choices=("fixed", "free", "exact"), required=True)
    p.add_argument("--p", type=int, default=64, help="free-support atom count")
    p.add_argument("--epsilon", type=float, default=1e-2,
                   help="entropic regularization relative to the mean cost")
    p.add_argument("--grid", type=int, nargs=2, metavar=("W", "H"),
                   help="fixed-support pixel grid")
    p.add_argument("--output", default="barycenter.csv")
    p.add_argument("inputs", nargs="+")
    p.set_defaults(func=_cmd_barycenter)

    p = sub.add_parser("interpolate", help="displacement interpolation samples")
    common(p)
    p.add_argument("--t-samples", type=int, default=5)
    p.add_argument("--export-plan", action="store_true",
                   help="also write the coupling as row,col,mass CSV")
    p.add_argument("source")
    p.add_argument("target")
    p.set_defaults(func=_cmd_interpolate)

    p = sub.add_parser("wpg", help="fit principal geodesic components")
    common(p)
    p.add_argument("--components", type=int, default=1)
    p.add_argument("--epsilon", type=float, default=1e-2,
                   help="entropic regularization relative to the mean cost")
    p.add_argument("--lambda", dest="lam", type=float, default=1.0)
    p.add_argument("--beta", type=float, default=0.1)
    p.add_argument("--grid-k", type=int, default=17)
    p.add_argument("--max-iter", type=int, default=200)
    p.add_argument("--tol", type=float, default=1e-5)
    p.add_argument("--t-samples", type=int, default=5)
    p.add_argument("--base", required=True, help="barycenter measure CSV")
    p.add_argument("inputs", nargs="+",
                   help="measure CSVs, or one JSON manifest with a 'measures' list")
    p.set_defaults(func=_cmd_wpg)

    p = sub.add_parser("render", help="render measures to SVG/PGM/PPM")
    common(p)
    p.add_argument("--kind", choices=("scatter", "raster", "palette"),
                   required=True)
    p.add_argument("--raster-size", type=int, nargs=2, default=(32, 32),
                   metavar=("H", "W"))
    p.add_argument("--strip-width", type=int, default=512)
    p.add_argument("inputs", nargs="+")
    p.set_defaults(func=_cmd_render)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
