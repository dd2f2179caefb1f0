"""Command-line front end: configure sweeps, write CSV results, optional SVG plot.

The CSV is the single source of truth; the SVG is derived from the same points
and never contains values that are not in the CSV. Exit codes: 0 success,
1 usage error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import math
import sys
from dataclasses import dataclass
from pathlib import Path

from .link import BETA_EXACT, BETA_FIXED_SQR, BETA_NOISE_ADAPTIVE, BetaErrorModel
from .montecarlo import BerPoint, SimConfig, SweepError, sweep

CSV_HEADER = "scheme,snr_db,sigma_q2,trials,bits,bit_errors,ber,ci_half_width,seed"

_EXPONENTS = {"1": 1.0, "0.6667": 2.0 / 3.0, "0.5": 0.5}


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage errors by default; the CLI contract wants 1
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


@dataclass(frozen=True)
class RunSpec:
    """Parsed CLI request: one sweep per scheme, shared grid and error model."""

    n_t: int
    n_r: int
    mod_order: int
    schemes: tuple[str, ...]
    snr_grid_db: tuple[float, ...]
    beta_error: BetaErrorModel
    trials: int
    min_bit_errors: int
    master_seed: int
    workers: int
    out: str
    svg: bool

    def configs(self) -> tuple[SimConfig, ...]:
        return tuple(
            SimConfig(
                n_t=self.n_t,
                n_r=self.n_r,
                mod_order=self.mod_order,
                scheme=scheme,
                snr_grid_db=self.snr_grid_db,
                beta_error=self.beta_error,
                trials=self.trials,
                min_bit_errors=self.min_bit_errors,
                master_seed=self.master_seed,
                workers=self.workers,
            )
            for scheme in self.schemes
        )


def _parse_snr_grid(text: str) -> tuple[float, ...]:
    parts = text.split(":")
    if len(parts) != 3:
        raise ValueError("expected start:stop:step")
    start, stop, step = (float(p) for p in parts)
    if not all(math.isfinite(v) for v in (start, stop, step)):
        raise ValueError("grid values must be finite")
    if step <= 0:
        raise ValueError("step must be positive")
    if stop < start:
        raise ValueError("stop must be >= start")
    grid = []
    value = start
    while value <= stop + 1e-9:  # inclusive of stop when the step lands on it
        grid.append(round(value, 9))
        value += step
    return tuple(grid)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(
        prog="vpsim",
        description=(
            "Monte Carlo BER sweeps for vector-perturbation precoding "
            "(conventional, MMSE, and scaling-error-robust variants)."
        ),
    )
    p.add_argument(
        "--scheme",
        action="append",
        choices=["cvp", "mmse-vp", "robust-vp"],
        help="precoding scheme to sweep; repeatable (default: all three)",
    )
    p.add_argument("--nt", type=int, default=4, help="transmit antennas (default 4)")
    p.add_argument("--nr", type=int, default=2, help="single-antenna users (default 2)")
    p.add_argument("--mod", type=int, default=16, choices=[4, 16, 64], help="QAM order")
    p.add_argument("--snr", default="0:40:5", metavar="START:STOP:STEP", help="SNR grid in dB")
    p.add_argument("--sqr", type=float, default=None, metavar="DB",
                   help="fixed signal-to-quantization-error ratio in dB (implies --sqr-mode fixed)")
    p.add_argument("--sqr-mode", choices=["exact", "fixed", "adaptive"], default=None,
                   help="scaling-factor error model (default exact)")
    p.add_argument("--exponent", choices=sorted(_EXPONENTS), default=None,
                   help="sigma_q^2 = sigma_n^2**exponent (adaptive mode only)")
    p.add_argument("--trials", type=int, default=10000, help="frames per SNR point")
    p.add_argument("--min-errors", type=int, default=0,
                   help="early-stop once this many bit errors and 1%% of trials are in (0 = off)")
    p.add_argument("--seed", type=int, default=0, help="master seed")
    p.add_argument("--workers", type=int, default=1, help="parallel trial workers")
    p.add_argument("--out", default="ber_results.csv", help="output CSV path")
    p.add_argument("--svg", action="store_true", help="also write a BER-vs-SNR plot next to the CSV")
    return p


def parse_args(argv=None) -> RunSpec:
    """Map flags to a RunSpec; inconsistent combinations are usage errors."""
    parser = build_parser()
    args = parser.parse_args(argv)

    mode = args.sqr_mode
    if mode is None:
        mode = "fixed" if args.sqr is not None else "exact"
    if mode == "fixed":
        if args.sqr is None:
            parser.error("--sqr-mode fixed requires --sqr")
        if args.exponent is not None:
            parser.error("--exponent is only valid with --sqr-mode adaptive")
        model = BetaErrorModel(mode=BETA_FIXED_SQR, sqr_db=args.sqr)
    elif mode == "adaptive":
        if args.sqr is not None:
            parser.error("--sqr is only valid with --sqr-mode fixed")
        if args.exponent is None:
            parser.error("--sqr-mode adaptive requires --exponent")
        model = BetaErrorModel(mode=BETA_NOISE_ADAPTIVE, exponent=_EXPONENTS[args.exponent])
    else:
        if args.sqr is not None:
            parser.error("--sqr conflicts with --sqr-mode exact")
        if args.exponent is not None:
            parser.error("--exponent is only valid with --sqr-mode adaptive")
        model = BetaErrorModel(mode=BETA_EXACT)

    try:
        grid = _parse_snr_grid(args.snr)
    except ValueError as exc:
        parser.error(f"bad --snr value {args.snr!r}: {exc}")

    schemes = tuple(args.scheme) if args.scheme else ("cvp", "mmse-vp", "robust-vp")
    spec = RunSpec(
        n_t=args.nt,
        n_r=args.nr,
        mod_order=args.mod,
        schemes=schemes,
        snr_grid_db=grid,
        beta_error=model,
        trials=args.trials,
        min_bit_errors=args.min_errors,
        master_seed=args.seed,
        workers=args.workers,
        out=args.out,
        svg=args.svg,
    )
    try:
        spec.configs()  # every combination must expand to a valid SimConfig
    except ValueError as exc:
        parser.error(str(exc))
    return spec


def format_csv(points: list[BerPoint], master_seed: int) -> str:
    """Render BER points as CSV text.

    dB columns use fixed 2 decimals, rates use full round-trip precision, so
    reruns with the same seed diff byte-for-byte.
    """
    lines = [CSV_HEADER]
    for pt in points:
        lines.append(
            f"{pt.scheme},{pt.snr_db:.2f},{pt.sigma_q2!r},{pt.trials},{pt.bits},"
            f"{pt.bit_errors},{pt.ber!r},{pt.ci_half_width!r},{master_seed}"
        )
    return "\n".join(lines) + "\n"


def emit_results(points: list[BerPoint], spec: RunSpec) -> list[str]:
    """Write the CSV (and SVG when requested); returns the written paths."""
    if not points:
        raise ValueError("no BER points to emit")
    out = Path(spec.out)
    out.write_text(format_csv(points, spec.master_seed), encoding="utf-8")
    written = [str(out)]
    if spec.svg:
        svg_path = out.with_suffix(".svg")
        svg_path.write_text(render_svg(points), encoding="utf-8")
        written.append(str(svg_path))
    return written


# ---------------------------------------------------------------------------
# SVG rendering (self-contained; no plotting dependency)

_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _plot_value(pt: BerPoint) -> float:
    # zero-error points are drawn at the 95% upper bound 3/bits ("rule of
    # three"), the conventional log-plot stand-in for an all-zero count
    if pt.ber > 0:
        return pt.ber
    return 3.0 / pt.bits if pt.bits else 1e-8


def render_svg(points: list[BerPoint], width: int = 720, height: int = 540) -> str:
    """Log-scale BER vs SNR line plot, one series per scheme."""
    left, right, top, bottom = 70, 160, 20, 50
    series: dict[str, list[BerPoint]] = {}
    for pt in points:
        series.setdefault(pt.scheme, []).append(pt)

    finite_x = [pt.snr_db for pt in points if math.isfinite(pt.snr_db)]
    x_min = min(finite_x) if finite_x else 0.0
    x_max = max(finite_x) if finite_x else 1.0
    if x_max == x_min:
        x_max = x_min + 1.0
    values = [_plot_value(pt) for pt in points]
    y_lo = math.floor(math.log10(min(values)))
    y_hi = math.ceil(math.log10(max(values)))
    if y_hi <= y_lo:
        y_hi = y_lo + 1

    def sx(v: float) -> float:
        v = min(max(v, x_min), x_max)
        return left + (v - x_min) / (x_max - x_min) * (width - left - right)

    def sy(v: float) -> float:
        lv = math.log10(v)
        return top + (y_hi - lv) / (y_hi - y_lo) * (height - top - bottom)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
    ]
    # decade grid + y labels
    for decade in range(y_lo, y_hi + 1):
        y = sy(10.0**decade)
        parts.append(
            f'<line x1="{left}" y1="{y:.1f}" x2="{width - right}" y2="{y:.1f}" '
            f'stroke="#dddddd"/>'
        )
        parts.append(
            f'<text x="{left - 8}" y="{y + 4:.1f}" text-anchor="end" font-size="12" '
            f'font-family="sans-serif">1e{decade}</text>'
        )
    # x ticks at the observed grid
    for tick in sorted({pt.snr_db for pt in points if math.isfinite(pt.snr_db)}):
        x = sx(tick)
        parts.append(
            f'<line x1="{x:.1f}" y1="{height - bottom}" x2="{x:.1f}" '
            f'y2="{height - bottom + 5}" stroke="#333333"/>'
        )
        parts.append(
            f'<text x="{x:.1f}" y="{height - bottom + 18}" text-anchor="middle" '
            f'font-size="12" font-family="sans-serif">{tick:g}</text>'
        )
    parts.append(
        f'<rect x="{left}" y="{top}" width="{width - left - right}" '
        f'height="{height - top - bottom}" fill="none" stroke="#333333"/>'
    )
    parts.append(
        f'<text x="{(left + width - right) / 2:.1f}" y="{height - 12}" text-anchor="middle" '
        f'font-size="13" font-family="sans-serif">SNR (dB)</text>'
    )
    parts.append(
        f'<text x="18" y="{(top + height - bottom) / 2:.1f}" text-anchor="middle" '
        f'font-size="13" font-family="sans-serif" '
        f'transform="rotate(-90 18 {(top + height - bottom) / 2:.1f})">BER</text>'
    )

    for i, (name, pts) in enumerate(series.items()):
        color = _PALETTE[i % len(_PALETTE)]
        drawn = [pt for pt in pts if math.isfinite(pt.snr_db)]
        coords = [(sx(pt.snr_db), sy(_plot_value(pt))) for pt in drawn]
        if len(coords) > 1:
            path = " ".join(f"{x:.1f},{y:.1f}" for x, y in coords)
            parts.append(f'<polyline points="{path}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        for pt, (x, y) in zip(drawn, coords):
            if pt.ber > 0:
                parts.append(f'<circle cx="{x:.1f}" cy="{y:.1f}" r="3.5" fill="{color}"/>')
            else:
                # hollow marker: value shown is an upper bound, not a measurement
                parts.append(
                    f'<circle cx="{x:.1f}" cy="{y:.1f}" r="3.5" fill="white" '
                    f'stroke="{color}" stroke-width="1.5"/>'
                )
        ly = top + 16 + 18 * i
        lx = width - right + 10
        parts.append(
            f'<line x1="{lx}" y1="{ly - 4}" x2="{lx + 22}" y2="{ly - 4}" '
            f'stroke="{color}" stroke-width="1.5"/>'
        )
        parts.append(
            f'<text x="{lx + 28}" y="{ly}" font-size="12" font-family="sans-serif">{name}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def _describe_model(model: BetaErrorModel) -> str:
    if model.mode == BETA_FIXED_SQR:
        return f"fixed SQR {model.sqr_db:g} dB"
    if model.mode == BETA_NOISE_ADAPTIVE:
        return f"adaptive sigma_q^2 = sigma_n^2^{model.exponent:g}"
    return "exact beta"


def main(argv=None) -> int:
    spec = parse_args(argv)
    label = _describe_model(spec.beta_error)

    def report(pt: BerPoint) -> None:
        print(
            f"[{pt.scheme:9s} | {label}] SNR {pt.snr_db:6.2f} dB  "
            f"BER {pt.ber:.3e}  ({pt.bit_errors}/{pt.bits} bits)",
            file=sys.stderr,
        )

    points: list[BerPoint] = []
    try:
        for cfg in spec.configs():
            points.extend(sweep(cfg, progress=report))
    except SweepError as exc:
        print(f"vpsim: sweep failed: {exc}", file=sys.stderr)
        return 2
    try:
        written = emit_results(points, spec)
    except OSError as exc:
        print(f"vpsim: cannot write results: {exc}", file=sys.stderr)
        return 2
    for path in written:
        print(f"wrote {path}", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
