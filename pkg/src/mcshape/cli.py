"""Command-line interface.

Exit codes: 0 ok, 2 usage/parse error, 3 degenerate shape, 4 degenerate
histogram, 5 affine-invariance failure.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import report
from .errors import (
    DegenerateHistogramError,
    DegenerateShapeError,
    ImageFormatError,
    SingularMapError,
)
from .geometry import AffineMap, PolygonSet, RasterMask, apply_affine_polygon, load_polygons
from .imaging import LabelImage, label_counts, label_to_components, median_filter, multi_otsu
from .invariants import MultiComponentShape, measure_M
from .oracles import (
    discrete_moment_side,
    discrete_tuple_sum,
    expected_sq_area,
    mc_expected_sq_area,
)
from .pnm import read_image, write_label

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_DEGENERATE = 3
EXIT_HISTOGRAM = 4
EXIT_INVARIANCE = 5

MAX_DISCRETE_PIXELS = 400


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    subcommand: str
    inputs: dict = field(default_factory=dict)
    options: dict = field(default_factory=dict)

    @classmethod
    def from_args(cls, ns: argparse.Namespace) -> "RunConfig":
        d = vars(ns).copy()
        sub = d.pop("command")
        d.pop("func", None)
        paths = {k: d.pop(k) for k in ("labels", "polygons", "input", "output", "shape") if k in d}
        return cls(sub, paths, d)

    def validate(self) -> None:
        o = self.options
        checks = {
            "threads": lambda v: v is None or v >= 1,
            "median": lambda v: v == 0 or (v >= 3 and v % 2 == 1),
            "side": lambda v: v > 0 and math.isfinite(v),
            "spacing": lambda v: v >= 0 and math.isfinite(v),
            "resolution": lambda v: v >= 1,
            "margin": lambda v: v >= 0,
            "trials": lambda v: v >= 1,
            "samples": lambda v: v >= 2,
            "overlap_resolution": lambda v: v >= 4,
            "tolerance": lambda v: v >= 0,
        }
        messages = {
            "median": "--median must be 0 (off) or an odd window >= 3",
            "spacing": "--spacing must be >= 0 (squares would overlap)",
            "samples": "--samples must be >= 2",
        }
        for key, ok in checks.items():
            if key in o and o[key] is not None and not ok(o[key]):
                raise UsageError(messages.get(key, f"invalid value for --{key.replace('_', '-')}: {o[key]}"))


def _out(text: str) -> None:
    sys.stdout.write(text if text.endswith("\n") else text + "\n")


# ---------------------------------------------------------------------------
# measure
# ---------------------------------------------------------------------------


def _load_labels(path: str, background: int) -> MultiComponentShape:
    li = read_image(path, as_labels=True, background_label=background)
    return label_to_components(li)


def _measure_one(cfg: RunConfig, shape: MultiComponentShape):
    o = cfg.options
    return measure_M(shape, validate_overlap=o["validate_overlap"],
                     overlap_resolution=o["overlap_resolution"], threads=o["threads"])


def cmd_measure(cfg: RunConfig) -> int:
    labels, polygons = cfg.inputs.get("labels"), cfg.inputs.get("polygons")
    fmt = cfg.options["format"]
    if labels == "-":
        if fmt != "csv":
            raise UsageError("batch mode (--labels -) requires --format csv")
        _out(",".join(report.MEASURE_CSV_COLUMNS))
        for line in sys.stdin:
            path = line.strip()
            if not path:
                continue
            rep = _measure_one(cfg, _load_labels(path, cfg.options["background"]))
            _out(report.measure_csv_row(path, rep))
        return EXIT_OK
    if polygons is not None:
        comps = load_polygons(polygons)
        if not comps:
            raise DegenerateShapeError("no components")
        shape = MultiComponentShape(tuple(comps))
        source = polygons
    else:
        shape = _load_labels(labels, cfg.options["background"])
        source = labels
    rep = _measure_one(cfg, shape)
    if fmt == "csv":
        _out(",".join(report.MEASURE_CSV_COLUMNS))
        _out(report.measure_csv_row(source, rep))
    else:
        _out(rep.to_json())
    return EXIT_OK


# ---------------------------------------------------------------------------
# segment
# ---------------------------------------------------------------------------


def cmd_segment(cfg: RunConfig) -> int:
    o = cfg.options
    g = read_image(cfg.inputs["input"])
    if o["median"]:
        g = median_filter(g, o["median"])
    k = o["classes"]
    thresholds, li = multi_otsu(g, k, background_class=o["background_class"])
    write_label(cfg.inputs["output"], li)
    counts = label_counts(li)
    bounds = [-1, *thresholds, 255]
    rows = []
    label_of_class = []
    nxt = 1
    for c in range(k):
        if c == o["background_class"]:
            label_of_class.append(0)
        else:
            label_of_class.append(nxt)
            nxt += 1
    for c in range(k):
        lab = label_of_class[c]
        rows.append({"class": c, "label": lab, "lower": bounds[c] + 1, "upper": bounds[c + 1],
                     "pixels": counts.get(lab, 0)})
    if o["format"] == "csv":
        _out("class,label,lower,upper,pixels")
        for r in rows:
            _out(report.csv_row([r["class"], r["label"], r["lower"], r["upper"], r["pixels"]]))
    else:
        _out(report.dumps({"classes": k, "thresholds": list(thresholds), "output": cfg.inputs["output"],
                           "bands": rows}))
    return EXIT_OK


# ---------------------------------------------------------------------------
# synthesize
# ---------------------------------------------------------------------------


def grid2x2_labels(side: float, spacing: float, resolution: int, margin: int = 0) -> LabelImage:
    """Four side-``side`` squares centred at ``(+-c, +-c)``, ``c = (side + spacing) / 2``.

    Rendered at ``resolution`` pixels per unit with ``margin`` background pixels
    on every side; a pixel belongs to a square iff its centre does.  Labels run
    1..4 in row-major order (top-left, top-right, bottom-left, bottom-right).
    """
    c = (side + spacing) / 2.0
    half = c + side / 2.0
    n = int(math.ceil(2 * half * resolution - 1e-9)) + 2 * margin
    centers = (np.arange(n) + 0.5 - margin) / resolution - half  # world coordinate of pixel centres
    lab = np.zeros((n, n), dtype=np.int64)
    k = 1
    for cy in (-c, c):
        in_y = np.abs(centers - cy) < side / 2.0
        for cx in (-c, c):
            in_x = np.abs(centers - cx) < side / 2.0
            lab[np.ix_(in_y, in_x)] = k
            k += 1
    return LabelImage(lab)


def cmd_synthesize(cfg: RunConfig) -> int:
    o = cfg.options
    li = grid2x2_labels(o["side"], o["spacing"], o["resolution"], o["margin"])
    write_label(cfg.inputs["output"], li)
    c = (o["side"] + o["spacing"]) / 2.0
    _out(report.dumps({
        "layout": o["layout"], "side": float(o["side"]), "spacing": float(o["spacing"]),
        "resolution": o["resolution"], "width": li.width, "height": li.height,
        "centers": [[-c, -c], [c, -c], [-c, c], [c, c]], "output": cfg.inputs["output"],
    }))
    return EXIT_OK


# ---------------------------------------------------------------------------
# invariance
# ---------------------------------------------------------------------------


def random_affine(rng: np.random.Generator, lo: float = -3.0, hi: float = 3.0,
                  min_det: float = 0.1) -> AffineMap:
    """Entries uniform in ``[lo, hi]``, translation uniform in ``[-10, 10]``; |det| >= min_det."""
    while True:
        j = rng.uniform(lo, hi, size=4)
        t = rng.uniform(-10.0, 10.0, size=2)
        m = AffineMap(*j.tolist(), *t.tolist())
        if abs(m.det) >= min_det:
            return m


def cmd_invariance(cfg: RunConfig) -> int:
    o = cfg.options
    if cfg.inputs.get("labels") is not None:
        raise UsageError("invariance needs --polygons: raster affine transforms are approximate, "
                         "exact invariance is only defined on the polygon path")
    comps = load_polygons(cfg.inputs["polygons"])
    if not comps:
        raise DegenerateShapeError("no components")
    base = measure_M(MultiComponentShape(tuple(comps))).M
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(o["seed"])))
    maps = [AffineMap.identity()] if o["include_identity"] else []
    maps += [random_affine(rng) for _ in range(o["trials"])]
    rows = []
    for i, t in enumerate(maps):
        moved = MultiComponentShape(tuple(apply_affine_polygon(c, t) for c in comps))
        m = measure_M(moved).M
        dev = abs(m - base)
        rows.append([i, t.j11, t.j12, t.j21, t.j22, t.tx, t.ty, t.det, m, dev, dev / max(1.0, abs(base))])
    max_abs = max(r[9] for r in rows)
    max_rel = max(r[10] for r in rows)
    passed = max_rel <= o["tolerance"]
    cols = ["trial", "j11", "j12", "j21", "j22", "tx", "ty", "det", "M", "abs_dev", "rel_dev"]
    if o["format"] == "csv":
        _out(",".join(cols))
        for r in rows:
            _out(report.csv_row(r))
    else:
        _out(report.dumps({"M": base, "trials": len(rows), "seed": o["seed"], "max_abs_dev": max_abs,
                           "max_rel_dev": max_rel, "tolerance": o["tolerance"], "passed": passed,
                           "rows": [dict(zip(cols, r)) for r in rows]}))
    if not passed:
        print(f"invariance failure: max relative deviation {max_rel:.3e} > {o['tolerance']:.1e}",
              file=sys.stderr)
        return EXIT_INVARIANCE
    return EXIT_OK


# ---------------------------------------------------------------------------
# oracle
# ---------------------------------------------------------------------------


def load_single_shape(path: str):
    """A polygon file (all components merged) or a mask image (nonzero pixels)."""
    p = Path(path)
    head = p.read_bytes()[:64].lstrip()
    if p.suffix.lower() == ".json" or head.startswith(b"{"):
        comps = load_polygons(p)
        if not comps:
            raise DegenerateShapeError("no components")
        return PolygonSet(tuple(r for c in comps for r in c.rings))
    img = read_image(p)
    mask = RasterMask(img.pixels != 0)
    if mask.count == 0:
        raise DegenerateShapeError("mask has no occupied pixels")
    return mask


def cmd_oracle(cfg: RunConfig) -> int:
    o = cfg.options
    shape = load_single_shape(cfg.inputs["shape"])
    if o["discrete"]:
        if not isinstance(shape, RasterMask):
            raise UsageError("--discrete needs a mask image (pixel centres are the point set)")
        if shape.count > MAX_DISCRETE_PIXELS:
            raise UsageError(f"--discrete refused: {shape.count} pixels > {MAX_DISCRETE_PIXELS} "
                             "(cubic enumeration)")
        pts = shape.pixel_centers()
        out = {"mode": "discrete", "points": len(pts)}
        ok = True
        for order in (2, 3):
            lhs = discrete_tuple_sum(pts, order)
            rhs = discrete_moment_side(pts, order)
            rel = abs(lhs - rhs) / max(abs(rhs), 1e-300) if lhs != rhs else 0.0
            ok &= rel <= 1e-9
            out[f"order{order}"] = {"tuple_sum": lhs, "moment_form": rhs, "rel_error": rel}
        out["identity_holds"] = bool(ok)
        _out(report.dumps(out))
        return EXIT_OK
    est = mc_expected_sq_area(shape, o["samples"], o["seed"], threads=o["threads"])
    theory = expected_sq_area(shape)
    z = est.z_score(theory)
    _out(report.dumps({
        "mode": "monte_carlo", "samples": est.n_samples, "seed": est.seed,
        "estimate": est.mean, "std_error": est.std_error, "theoretical": theory, "z": z,
        "acceptance_ratio": est.acceptance_ratio,
    }))
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mcshape", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    m = sub.add_parser("measure", help="multi-component measure of a label image or polygon file")
    src = m.add_mutually_exclusive_group(required=True)
    src.add_argument("--labels", help="label PGM/PNG; '-' reads one path per stdin line (csv batch)")
    src.add_argument("--polygons", help="polygon JSON file")
    m.add_argument("--background", type=int, default=0, help="background label (default 0)")
    m.add_argument("--format", choices=("json", "csv"), default="json")
    m.add_argument("--validate-overlap", action="store_true")
    m.add_argument("--overlap-resolution", type=float, default=64.0)
    m.add_argument("--threads", type=int, default=None)
    m.set_defaults(func=cmd_measure)

    s = sub.add_parser("segment", help="median filter + k-class Otsu -> label PGM")
    s.add_argument("input")
    s.add_argument("--output", "-o", required=True)
    s.add_argument("--median", type=int, default=3, help="odd window >= 3, or 0 to skip (default 3)")
    s.add_argument("--classes", type=int, choices=(2, 3, 4), default=4)
    s.add_argument("--background-class", type=int, default=0,
                   help="class index (0 = darkest) written as background label 0")
    s.add_argument("--format", choices=("json", "csv"), default="json")
    s.set_defaults(func=cmd_segment)

    y = sub.add_parser("synthesize", help="synthetic four-square label image")
    y.add_argument("--layout", choices=("grid2x2",), default="grid2x2")
    y.add_argument("--side", type=float, default=1.0)
    y.add_argument("--spacing", type=float, default=1.0)
    y.add_argument("--resolution", type=int, default=32, help="pixels per unit length")
    y.add_argument("--margin", type=int, default=2, help="background border in pixels")
    y.add_argument("--output", "-o", required=True)
    y.set_defaults(func=cmd_synthesize)

    v = sub.add_parser("invariance", help="check M under random affine maps (polygon path)")
    vsrc = v.add_mutually_exclusive_group(required=True)
    vsrc.add_argument("--polygons")
    vsrc.add_argument("--labels", help=argparse.SUPPRESS)
    v.add_argument("--trials", type=int, default=100)
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--include-identity", action="store_true")
    v.add_argument("--tolerance", type=float, default=1e-10)
    v.add_argument("--format", choices=("json", "csv"), default="json")
    v.set_defaults(func=cmd_invariance)

    o = sub.add_parser("oracle", help="Monte Carlo / exact enumeration check of the triangle identity")
    o.add_argument("--shape", required=True, help="polygon JSON or mask image")
    o.add_argument("--samples", type=int, default=1_000_000)
    o.add_argument("--seed", type=int, default=0)
    o.add_argument("--discrete", action="store_true")
    o.add_argument("--threads", type=int, default=None)
    o.set_defaults(func=cmd_oracle)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    cfg = RunConfig.from_args(ns)
    try:
        cfg.validate()
        return ns.func(cfg)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"mcshape {cfg.subcommand}: error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (ImageFormatError, json.JSONDecodeError, FileNotFoundError, IsADirectoryError) as exc:
        print(f"mcshape {cfg.subcommand}: parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except DegenerateHistogramError as exc:
        print(f"mcshape {cfg.subcommand}: degenerate histogram: {exc}", file=sys.stderr)
        return EXIT_HISTOGRAM
    except DegenerateShapeError as exc:
        print(f"mcshape {cfg.subcommand}: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except (SingularMapError, ValueError) as exc:
        print(f"mcshape {cfg.subcommand}: parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE


if __name__ == "__main__":
    sys.exit(main())
