"""Command-line front end.

Subcommands: metric, example1, example2, lemma-sweep, bound-sweep.
Exit codes: 0 ok, 2 input error, 3 resource cap hit (degraded output).

CSV files never contain timestamps; run metadata goes to a
``<name>.meta.json`` sidecar next to each CSV.
"""

from __future__ import annotations

import argparse
import csv
import functools
import io
import json
import math
import platform
import sys
from dataclasses import dataclass, field, fields
from datetime import datetime, timezone
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .accompanying import load_row
from .compound import DEFAULT_TAIL_TOL
from .experiments import (
    DEFAULT_DELTA_GRID,
    DEFAULT_FACTOR_GRID,
    bound_ratio_sweep,
    example1_rows,
    example2_rows,
    lemma1_sweep,
    n_for_example1,
    n_for_example2,
    run_example1,
    run_example2,
)
from .lattice import (
    DEFAULT_ATOM_BUDGET,
    DEFAULT_FLOW_CAP,
    AtomBudgetExceeded,
    LatticeDistribution,
    LatticeError,
    use_limits,
)
from .metrics import (
    FlowCapExceeded,
    kolmogorov_distance,
    levy_distance,
    prokhorov_distance,
    prokhorov_fallback,
    total_variation,
)

EXIT_OK, EXIT_INPUT, EXIT_CAP = 0, 2, 3


class InputError(Exception):
    pass


@dataclass
class RunConfig:
    subcommand: str = ""
    inputs: list[str] = field(default_factory=list)
    out: str = "out"
    tail_tol: float = DEFAULT_TAIL_TOL
    metric_tol: float = 1e-9
    atom_budget: int = DEFAULT_ATOM_BUDGET
    flow_cap: int = DEFAULT_FLOW_CAP
    plot: bool = False
    method: str = "auto"
    j: int | None = None
    n: int | None = None
    c2: float | None = None
    tau: float = 1.0
    deltas: list[float] | None = None
    factors: list[float] | None = None
    family: str = "both"
    js: list[int] | None = None
    rows: list[str] = field(default_factory=list)

    def validate(self) -> None:
        if not (self.tail_tol > 0 and self.metric_tol > 0):
            raise InputError("tolerances must be positive")
        if self.tail_tol >= 1:
            raise InputError("tail-tol must be below 1")
        if self.atom_budget < 16 or self.flow_cap < 2:
            raise InputError("atom budget must be >= 16 and flow cap >= 2")
        if self.method not in ("auto", "flow", "greedy"):
            raise InputError(f"unknown Prokhorov method {self.method!r}")
        if self.family not in ("example1", "example2", "both"):
            raise InputError(f"unknown family {self.family!r}")


# -- parsing helpers -----------------------------------------------------------------


def _grid(text: str) -> list[float]:
    """``"1,2,4"`` or ``"geom:START:STOP:COUNT"``."""
    text = text.strip()
    if text.startswith("geom:"):
        try:
            _, a, b, k = text.split(":")
            a, b, k = float(a), float(b), int(k)
        except ValueError as exc:
            raise argparse.ArgumentTypeError(f"bad geometric grid {text!r}") from exc
        if a <= 0 or b <= 0 or k < 1:
            raise argparse.ArgumentTypeError("geometric grid needs positive ends and count >= 1")
        if k == 1:
            return [a]
        r = (b / a) ** (1.0 / (k - 1))
        return [a * r**i for i in range(k - 1)] + [b]
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad grid {text!r}") from exc


def _int_range(text: str) -> list[int]:
    """``"4-12"`` or ``"3,5,8"``."""
    try:
        if "-" in text and "," not in text:
            a, b = text.split("-")
            return list(range(int(a), int(b) + 1))
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad integer list {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file with option values (flags override it)")
    common.add_argument("--out", help="output directory")
    common.add_argument("--tail-tol", type=float, help="compound Poisson series tail bound")
    common.add_argument("--metric-tol", type=float, help="bisection tolerance for Levy/Prokhorov")
    common.add_argument("--atom-budget", type=int, help="maximal atoms per distribution")
    common.add_argument("--flow-cap", type=int, help="maximal combined support for the max-flow solver")
    common.add_argument("--plot", action="store_true", default=None, help="also write SVG plots")
    common.add_argument("--method", choices=("auto", "flow", "greedy"), help="Prokhorov solver")

    parser = argparse.ArgumentParser(prog="cpapprox", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("metric", parents=[common], help="four distances between two distribution files")
    p.add_argument("inputs", nargs=2, metavar="FILE")

    for name, what in (("example1", "integer-lattice example"), ("example2", "shifted example")):
        p = sub.add_parser(name, parents=[common], help=f"reproduce the {what}")
        p.add_argument("--j", type=int)
        p.add_argument("--n", type=int, help="row length (default ceil(2 c2 j^2) / ceil(2 c2 j^4))")
        p.add_argument("--c2", type=float, help="lemma constant (default: from the lemma sweep)")
        if name == "example1":
            p.add_argument("--tau", type=float, help="truncation radius for the centering")

    p = sub.add_parser("lemma-sweep", parents=[common], help="Poisson lattice lemma sweep")
    p.add_argument("--deltas", type=_grid, help="delta grid, e.g. geom:1:32:11")
    p.add_argument("--factors", type=_grid, help="lambda/delta^2 grid, e.g. geom:0.015625:256:15")

    p = sub.add_parser("bound-sweep", parents=[common], help="bound-shape ratio sweep")
    p.add_argument("--family", choices=("example1", "example2", "both"))
    p.add_argument("--js", type=_int_range, help="row indices (default 4-12 / 3-8)")
    p.add_argument("--c2", type=float)
    p.add_argument("--rows", nargs="+", help="row specification files (replace the presets)")
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig(subcommand=args.subcommand)
    names = {f.name for f in fields(RunConfig)}
    if getattr(args, "config", None):
        try:
            data = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise InputError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(data, dict):
            raise InputError("config must be a JSON object")
        for key, value in data.items():
            key = key.replace("-", "_")
            if key not in names or key == "subcommand":
                raise InputError(f"unknown config key {key!r}")
            setattr(cfg, key, value)
    for key, value in vars(args).items():
        if key in names and value is not None and key != "subcommand":
            setattr(cfg, key, value)
    cfg.validate()
    return cfg


# -- output helpers ------------------------------------------------------------------


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v)) if math.isfinite(v) else str(float(v))
    if isinstance(v, np.integer):
        return str(int(v))
    return str(v)


def _csv_text(header: Sequence[str], rows: Sequence[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    return buf.getvalue()


def _write(cfg: RunConfig, name: str, text: str, extra_meta: dict | None = None) -> Path:
    out = Path(cfg.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        path = out / name
        path.write_text(text)
        meta = {
            "file": name,
            "created": datetime.now(timezone.utc).isoformat(),
            "version": __version__,
            "python": platform.python_version(),
            "config": {k: v for k, v in vars(cfg).items()},
        }
        if extra_meta:
            meta.update(extra_meta)
        (out / f"{name}.meta.json").write_text(json.dumps(meta, indent=2, default=str))
    except OSError as exc:
        raise InputError(f"cannot write to {out}: {exc}") from exc
    return path


def _verdict(key: str, ok: bool, yes: str = "TRUE", no: str = "FALSE") -> None:
    print(f"{key}: {yes if ok else no}")


def _c2(cfg: RunConfig) -> float:
    if cfg.c2 is not None:
        return float(cfg.c2)
    c2 = _calibrated_c2(cfg.tail_tol)
    if c2 is None:
        raise InputError("lemma sweep found no passing region; pass --c2 explicitly")
    return c2


@functools.lru_cache(maxsize=None)
def _calibrated_c2(tail_tol: float) -> float | None:
    # calibration runs on the default grid under default caps, whatever the run's caps are
    with use_limits(DEFAULT_ATOM_BUDGET, DEFAULT_FLOW_CAP):
        return lemma1_sweep(tail_tol=tail_tol).c2_emp


# -- subcommands -----------------------------------------------------------------------


def _load_dist(path: str) -> LatticeDistribution:
    try:
        return LatticeDistribution.loads(Path(path).read_text())
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    except LatticeError as exc:
        raise InputError(f"{path}: {exc}") from exc


def cmd_metric(cfg: RunConfig) -> int:
    if len(cfg.inputs) != 2:
        raise InputError("metric needs exactly two distribution files")
    F, G = (_load_dist(p) for p in cfg.inputs)
    status = EXIT_OK
    rows = []
    for name, res in (
        ("tv", total_variation(F, G)),
        ("kolmogorov", kolmogorov_distance(F, G)),
        ("levy", levy_distance(F, G, tol=min(cfg.metric_tol, 1e-10))),
    ):
        rows.append((name, res.value, res.lower, res.upper, res.method))
    try:
        pi = prokhorov_distance(F, G, tol=cfg.metric_tol, method=cfg.method)
    except FlowCapExceeded as exc:
        print(f"warning: {exc}; reporting the Levy/TV bracket", file=sys.stderr)
        pi = prokhorov_fallback(F, G)
        status = EXIT_CAP
    rows.append(("prokhorov", pi.value, pi.lower, pi.upper, pi.method))
    text = _csv_text(["metric", "value", "lower", "upper", "method"], rows)
    sys.stdout.write(text)
    if cfg.out and cfg.out != "-":
        _write(cfg, "metric.csv", text)
    return status


def _example_out(cfg: RunConfig, report, name: str) -> int:
    text = _csv_text(["quantity", "value", "claim"], report.rows())
    _write(cfg, f"{name}.csv", text, {"notes": report.notes})
    _verdict("F_ON_Z", report.F_on_integers)
    _verdict("D_Z18_LE_5_8", report.D_mass_on_Z18 <= 5 / 8 + 1e-9)
    _verdict("CHAIN_D_LE_SUP_W", report.chain_ok)
    _verdict("PI_LOWER_1_8", report.pi_lower_certified, "CERTIFIED", "NOT_CERTIFIED")
    _verdict("D_EQUALS_G", report.D_equals_G)
    _verdict("TV_LE_P", report.tv_F_G <= report.p_j)
    if report.degraded:
        print("degraded=true")
        return EXIT_CAP
    return EXIT_OK


def _degraded_out(cfg: RunConfig, name: str, j: int, n: int, exc: Exception) -> int:
    rows = [("example", name[-1], ""), ("j", j, ""), ("n_j", n, "n_j_choice"), ("degraded", True, "")]
    _write(cfg, f"{name}.csv", _csv_text(["quantity", "value", "claim"], rows), {"error": str(exc)})
    print(f"error: resource cap exceeded: {exc}", file=sys.stderr)
    print("degraded=true")
    return EXIT_CAP


def cmd_example1(cfg: RunConfig) -> int:
    j = 8 if cfg.j is None else int(cfg.j)
    if j < 2:
        raise InputError("example1 needs j >= 2")
    c2 = _c2(cfg)
    n = n_for_example1(j, c2) if cfg.n is None else int(cfg.n)
    try:
        report = run_example1(j, c2, cfg.tau, n=n, tail_tol=cfg.tail_tol)
    except AtomBudgetExceeded as exc:
        return _degraded_out(cfg, "example1", j, n, exc)
    return _example_out(cfg, report, "example1")


def cmd_example2(cfg: RunConfig) -> int:
    j = 4 if cfg.j is None else int(cfg.j)
    if j < 3:
        raise InputError("example2 needs j >= 3")
    c2 = _c2(cfg)
    n = n_for_example2(j, c2) if cfg.n is None else int(cfg.n)
    try:
        report = run_example2(j, c2, n=n, tail_tol=cfg.tail_tol)
    except AtomBudgetExceeded as exc:
        return _degraded_out(cfg, "example2", j, n, exc)
    return _example_out(cfg, report, "example2")


def cmd_lemma_sweep(cfg: RunConfig) -> int:
    deltas = cfg.deltas or list(DEFAULT_DELTA_GRID)
    factors = cfg.factors or list(DEFAULT_FACTOR_GRID)
    if min(deltas) < 1 or min(factors) <= 0:
        raise InputError("delta grid must be >= 1 and factors positive")
    fr = lemma1_sweep(deltas, factors, cfg.tail_tol)
    rows = []
    for i, d in enumerate(fr.deltas):
        for k, f in enumerate(fr.factors):
            rows.append((d, f, f * d * d, float(fr.sup[i, k]), bool(fr.passed[i, k]), fr.in_region(i, k), "eq4669"))
    text = _csv_text(["delta", "factor", "lambda", "sup", "pass", "in_region", "claim"], rows)
    _write(cfg, "lemma_sweep.csv", text)
    frontier = [(d, "" if f is None else f, fr.monotone[i], "eq4669") for i, (d, f) in enumerate(fr.frontier)]
    _write(cfg, "lemma_frontier.csv", _csv_text(["c1_candidate", "c2_min", "monotone_in_lambda", "claim"], frontier))
    if fr.c1_emp is None:
        print("LEMMA_REGION: NONE")
    else:
        print(f"LEMMA_REGION: c1_emp={_fmt(fr.c1_emp)} c2_emp={_fmt(fr.c2_emp)}")
    _verdict("LEMMA_CONSISTENT", fr.consistent())
    _verdict("LEMMA_FAILING_POINT_OUTSIDE", bool((~fr.passed).any()))
    if cfg.plot:
        _plot_lemma(cfg)
    return EXIT_OK


BOUND_COLUMNS = [
    "family", "j", "n", "p_j", "tau_j", "sum_p_sq", "logstar_term", "levy", "pi_value",
    "pi_lower", "pi_upper", "pi_method", "tv", "ratio_levy", "ratio_pi", "ratio_pi_sum",
]  # fmt: skip


def cmd_bound_sweep(cfg: RunConfig) -> int:
    records = []
    if cfg.rows:
        for path in cfg.rows:
            try:
                data = json.loads(Path(path).read_text())
            except (OSError, json.JSONDecodeError) as exc:
                raise InputError(f"cannot read row file {path}: {exc}") from exc
            specs = data if isinstance(data, list) else [data]
            try:
                rows = [load_row(s) for s in specs]
            except LatticeError as exc:
                raise InputError(f"{path}: {exc}") from exc
            records += bound_ratio_sweep(rows, Path(path).stem, cfg.tail_tol)
    else:
        c2 = _c2(cfg)
        if cfg.family in ("example1", "both"):
            js = cfg.js or list(range(4, 13))
            records += bound_ratio_sweep(example1_rows(js, c2), "example1", cfg.tail_tol)
        if cfg.family in ("example2", "both"):
            js = cfg.js or list(range(3, 9))
            records += bound_ratio_sweep(example2_rows(js, c2), "example2", cfg.tail_tol)
    rows = [[r[c] for c in BOUND_COLUMNS] + ["eq703|eq743|eq7431"] for r in records]
    _write(cfg, "bound_sweep.csv", _csv_text(BOUND_COLUMNS + ["claim"], rows))
    for key in ("ratio_levy", "ratio_pi", "ratio_pi_sum"):
        print(f"MAX_{key.upper()}: {_fmt(max(r[key] for r in records))}")
    if cfg.plot:
        _plot_bounds(cfg)
    return EXIT_OK


# -- plots (drawn from the CSV files only) --------------------------------------------------


def _plot_lemma(cfg: RunConfig) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    import numpy as np

    with open(Path(cfg.out) / "lemma_sweep.csv") as fh:
        recs = list(csv.DictReader(fh))
    ds = sorted({float(r["delta"]) for r in recs})
    fs = sorted({float(r["factor"]) for r in recs})
    grid = np.full((len(ds), len(fs)), np.nan)
    for r in recs:
        grid[ds.index(float(r["delta"])), fs.index(float(r["factor"]))] = float(r["sup"])
    fig, ax = plt.subplots(figsize=(7, 4.5))
    im = ax.imshow(grid, origin="lower", aspect="auto", cmap="viridis", vmin=0, vmax=1)
    ax.contour(grid, levels=[5 / 8], colors="white", linewidths=1)
    ax.set_xticks(range(len(fs)), [f"{f:.3g}" for f in fs], rotation=60)
    ax.set_yticks(range(len(ds)), [f"{d:.3g}" for d in ds])
    ax.set_xlabel("lambda / delta^2")
    ax.set_ylabel("delta")
    fig.colorbar(im, ax=ax, label="sup mass in shifted 1/8-windows")
    fig.tight_layout()
    fig.savefig(Path(cfg.out) / "lemma_sweep.svg", metadata={"Date": None})
    plt.close(fig)


def _plot_bounds(cfg: RunConfig) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    with open(Path(cfg.out) / "bound_sweep.csv") as fh:
        recs = list(csv.DictReader(fh))
    fig, ax = plt.subplots(figsize=(6, 4))
    for fam in sorted({r["family"] for r in recs}):
        sel = [r for r in recs if r["family"] == fam]
        js = [int(r["j"]) for r in sel]
        ax.plot(js, [float(r["ratio_levy"]) for r in sel], "o-", label=f"{fam}: Levy ratio")
        ax.plot(js, [float(r["ratio_pi"]) for r in sel], "s--", label=f"{fam}: Prokhorov ratio")
    ax.set_xlabel("j")
    ax.set_ylabel("distance / (p_j + tau_j log* 1/tau_j)")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(Path(cfg.out) / "bound_sweep.svg", metadata={"Date": None})
    plt.close(fig)


COMMANDS = {
    "metric": cmd_metric,
    "example1": cmd_example1,
    "example2": cmd_example2,
    "lemma-sweep": cmd_lemma_sweep,
    "bound-sweep": cmd_bound_sweep,
}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code not in (0, None) else EXIT_OK
    try:
        cfg = resolve_config(args)
        with use_limits(cfg.atom_budget, cfg.flow_cap):
            return COMMANDS[cfg.subcommand](cfg)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (AtomBudgetExceeded, FlowCapExceeded) as exc:
        print(f"error: resource cap exceeded: {exc}", file=sys.stderr)
        print("degraded=true")
        return EXIT_CAP


if __name__ == "__main__":
    sys.exit(main())
