"""Command-line frontend.

Exit codes: 0 ok, 2 parse error, 3 invalid partition, 4 state not fully
entangled, 5 wrong orientation (side A larger than side B), 6 I/O error.
"""

from __future__ import annotations

import argparse
import io as _io
import logging
import sys

import numpy as np

from . import __version__
from . import io as fileio
from .errors import (
    DimensionMismatch,
    InvalidBipartition,
    NonSquare,
    NotFullyEntangled,
    NotNormalized,
    NotPositive,
    NotUnitary,
    OptimizerFailure,
    WrongOrientation,
    ZeroVector,
)
from .haar import RECOMMENDED_MIN_SAMPLES, HaarStream, element_density_check, element_modulus_mean, modulus_mean_zscore
from .measures import (
    OptimizerConfig,
    entanglement_entropy,
    entropy_normalized,
    min_fidelity_numeric,
    min_fidelity_pure,
    negativity,
    negativity_normalized,
    negativity_pure,
    normalized_estimate,
    symmetry_of_entanglement,
    symmetry_sweep,
)
from .statecore import PureState, as_bipartition, fig1_state, fig2_state, schmidt_decompose
from .symmetry import (
    analyze_related_map,
    is_fully_entangled,
    is_maximally_entangled,
    related_operator,
    schmidt_residual,
    verify_related,
)

logger = logging.getLogger(__name__)

EXIT_OK, EXIT_PARSE, EXIT_PARTITION, EXIT_NOT_FULL, EXIT_ORIENTATION, EXIT_IO = 0, 2, 3, 4, 5, 6


class CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _flag(b: bool) -> str:
    return "true" if b else "false"


def _partition(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(p) for p in text.split(",") if p.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"partition must be comma-separated indices, got {text!r}")


def _int_list(text: str) -> list[int]:
    try:
        return [int(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _load(loader, path):
    try:
        return loader(path)
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot read {path}: {exc.strerror or exc}")
    except (ValueError, TypeError) as exc:
        raise CliError(EXIT_PARSE, f"cannot parse {path}: {exc}")


def _split(state, side_a):
    try:
        return as_bipartition(state.dims, side_a)
    except InvalidBipartition as exc:
        raise CliError(EXIT_PARTITION, f"invalid partition: {exc}")


def _write(path, text: str):
    try:
        fileio.write_atomic(path, text)
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot write {path}: {exc.strerror or exc}")


def _require_pure(state, what: str) -> PureState:
    if not isinstance(state, PureState):
        raise CliError(EXIT_PARSE, f"{what} needs a pure state file (with 'amplitudes')")
    return state


def cmd_schmidt(args, out) -> int:
    state = _require_pure(_load(fileio.load_state, args.state), "schmidt")
    bp = _split(state, args.partition)
    sd = schmidt_decompose(state, bp, rank_tol=args.rank_tol)
    sigma = ", ".join(_fmt(s) for s in sd.sigma)
    print(
        f"sigma: {sigma}; rank {sd.rank}; "
        f"fully_entangled: {_flag(is_fully_entangled(sd))}; "
        f"maximally_entangled: {_flag(is_maximally_entangled(sd))}",
        file=out,
    )
    print(f"d_a: {sd.d_a}; d_b: {sd.d_b}", file=out)
    return EXIT_OK


def _related_errors(fn):
    try:
        return fn()
    except NotFullyEntangled as exc:
        raise CliError(EXIT_NOT_FULL, str(exc))
    except WrongOrientation as exc:
        raise CliError(EXIT_ORIENTATION, str(exc))
    except (DimensionMismatch, NonSquare) as exc:
        raise CliError(EXIT_PARSE, str(exc))


def cmd_related(args, out) -> int:
    state = _require_pure(_load(fileio.load_state, args.state), "related")
    u = _load(fileio.load_operator, args.operator)
    bp = _split(state, args.partition)
    sd = schmidt_decompose(state, bp, rank_tol=args.rank_tol)
    v = _related_errors(lambda: related_operator(u, sd))
    text = fileio.dumps(fileio.operator_to_dict(v)) + "\n"
    if args.out:
        _write(args.out, text)
    else:
        out.write(text)
    if args.verify:
        print(f"residual: {_fmt(verify_related(u, v, state, bp))}", file=out)
        print(f"schmidt_residual: {_fmt(schmidt_residual(u, v, sd))}", file=out)
    return EXIT_OK


def cmd_channel(args, out) -> int:
    state = _require_pure(_load(fileio.load_state, args.state), "channel")
    kmap = _load(fileio.load_kraus, args.kraus)
    bp = _split(state, args.partition)
    sd = schmidt_decompose(state, bp, rank_tol=args.rank_tol)
    rep = _related_errors(lambda: analyze_related_map(kmap, sd, state))
    if args.json:
        doc = {
            "related": fileio.kraus_to_dict(rep.related),
            "residual": rep.residual,
            "related_is_cp": rep.related_is_cp,
            "related_is_tp": rep.related_is_tp,
            "related_is_unital": rep.related_is_unital,
            "choi_min_eigenvalue": rep.choi_min_eigenvalue,
        }
        out.write(fileio.dumps(doc) + "\n")
        return EXIT_OK
    for i, j in enumerate(rep.related.ops):
        print(f"J_{i} =", file=out)
        print(np.array2string(j, precision=10, suppress_small=True), file=out)
    print(f"residual: {_fmt(rep.residual)}", file=out)
    print(f"cp: {_flag(rep.related_is_cp)}", file=out)
    print(f"tp: {_flag(rep.related_is_tp)}", file=out)
    print(f"unital: {_flag(rep.related_is_unital)}", file=out)
    print(f"choi_min_eigenvalue: {_fmt(rep.choi_min_eigenvalue)}", file=out)
    return EXIT_OK


def cmd_measure(args, out) -> int:
    state = _load(fileio.load_state, args.state)
    bp = _split(state, args.partition)
    wanted = {"m", "es", "entropy", "negativity"} if args.measure == "all" else {args.measure}
    pure = isinstance(state, PureState)
    sd = schmidt_decompose(state, bp) if pure else None
    if bp.d_a > bp.d_b and wanted & {"m", "es"}:
        raise CliError(EXIT_ORIENTATION, "side A must not be larger than side B")

    if "m" in wanted:
        if pure:
            print(f"m: {_fmt(min_fidelity_pure(sd))}", file=out)
        else:
            cfg = OptimizerConfig(n_restarts=args.restarts, seed=args.seed)
            try:
                print(f"m: {_fmt(min_fidelity_numeric(state, bp, cfg))} (numerical upper bound)", file=out)
            except OptimizerFailure as exc:
                logger.warning("%s", exc)
                print(f"m: {_fmt(exc.best)} (numerical upper bound; not converged)", file=out)
    if "es" in wanted:
        est = symmetry_of_entanglement(state, bp, args.samples, args.seed, workers=args.workers)
        norm, norm_se = normalized_estimate(est, bp.d_a)
        print(
            f"es: {_fmt(est.value)} +- {_fmt(est.std_error)}; "
            f"normalized {_fmt(norm)} +- {_fmt(norm_se)} "
            f"(samples {est.n_samples}, seed {est.seed})",
            file=out,
        )
    if "entropy" in wanted:
        if pure:
            print(f"entropy: {_fmt(entanglement_entropy(sd))}; normalized {_fmt(entropy_normalized(sd))}", file=out)
        else:
            print("entropy: n/a (mixed state)", file=out)
    if "negativity" in wanted:
        if pure:
            print(
                f"negativity: {_fmt(negativity_pure(sd))}; normalized {_fmt(negativity_normalized(sd))}",
                file=out,
            )
        else:
            print(f"negativity: {_fmt(negativity(state, bp))}", file=out)
    return EXIT_OK


def _provenance(command: str, **fields) -> str:
    extra = " ".join(f"{k}={v}" for k, v in fields.items())
    return f"# opsym {__version__} {command} {extra}\n"


def fig1_table(points: int, samples: int, seed: int, workers: int = 1) -> list[tuple[float, ...]]:
    """Rows (x, es_norm, es_stderr, min_fidelity, negativity_norm, entropy_norm)."""
    xs = np.linspace(0.0, 1.0, points)
    states = [fig1_state(float(x)) for x in xs]
    ests = symmetry_sweep(states, [0], samples, seed, workers)
    rows = []
    for x, st, est in zip(xs, states, ests):
        sd = schmidt_decompose(st, [0])
        es_norm, es_se = normalized_estimate(est, 4)
        rows.append(
            (float(x), es_norm, es_se, min_fidelity_pure(sd), negativity_normalized(sd), entropy_normalized(sd))
        )
    return rows


def fig2_table(dims: list[int], points: int, samples: int, seed: int, workers: int = 1) -> list[tuple]:
    """Rows (d, eps, es, es_norm, es_stderr) with es_stderr the error of es_norm."""
    eps_grid = np.linspace(0.0, 1.0, points)
    rows = []
    for d in dims:
        ests = symmetry_sweep([fig2_state(float(e), d) for e in eps_grid], [0], samples, seed, workers)
        for e, est in zip(eps_grid, ests):
            norm, se = normalized_estimate(est, d)
            rows.append((d, float(e), est.value, norm, se))
    return rows


def _csv(header: str, rows, comment: str) -> str:
    buf = _io.StringIO()
    buf.write(comment)
    buf.write(header + "\n")
    for row in rows:
        buf.write(",".join(str(v) if isinstance(v, (int, np.integer)) else _fmt(v) for v in row) + "\n")
    return buf.getvalue()


def cmd_fig1(args, out) -> int:
    if args.points < 2:
        raise CliError(EXIT_PARSE, "--points must be at least 2")
    rows = fig1_table(args.points, args.samples, args.seed, args.workers)
    text = _csv(
        "x,es_norm,es_stderr,min_fidelity,negativity_norm,entropy_norm",
        rows,
        _provenance("fig1", seed=args.seed, samples=args.samples, points=args.points),
    )
    _write(args.out, text)
    print(f"wrote {len(rows)} rows to {args.out}", file=out)
    return EXIT_OK


def cmd_fig2(args, out) -> int:
    if any(d < 2 for d in args.dims):
        raise CliError(EXIT_PARSE, "--dims entries must be at least 2")
    if args.points < 2:
        raise CliError(EXIT_PARSE, "--points must be at least 2")
    rows = fig2_table(args.dims, args.points, args.samples, args.seed, args.workers)
    text = _csv(
        "d,eps,es,es_norm,es_stderr",
        rows,
        _provenance(
            "fig2",
            seed=args.seed,
            samples=args.samples,
            points=args.points,
            dims=",".join(map(str, args.dims)),
        ),
    )
    _write(args.out, text)
    print(f"wrote {len(rows)} rows to {args.out}", file=out)
    return EXIT_OK


def cmd_haarcheck(args, out) -> int:
    if args.d < 2:
        raise CliError(EXIT_PARSE, "--d must be at least 2")
    if args.samples < RECOMMENDED_MIN_SAMPLES:
        logger.warning(
            "%d samples is below the recommended minimum of %d; the statistics are unreliable",
            args.samples,
            RECOMMENDED_MIN_SAMPLES,
        )
    if args.samples < 2:
        raise CliError(EXIT_PARSE, "--samples must be at least 2")
    stream = HaarStream(args.seed)
    mean, se, z = modulus_mean_zscore(args.d, args.samples, stream)
    chk = element_density_check(args.d, args.samples, stream)
    print(f"empirical mean |U11|: {_fmt(mean)} +- {_fmt(se)}", file=out)
    print(f"analytic mean |U11|: {_fmt(element_modulus_mean(args.d))}", file=out)
    print(f"z-score: {z:.3f}", file=out)
    print(
        f"chi-square: {chk.statistic:.3f} (critical {chk.critical:.3f} at 99.9%, {chk.bins} bins): "
        f"{'pass' if chk.passed else 'fail'}",
        file=out,
    )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="opsym",
        description="Operational symmetries of entangled states: related operators, related channels "
        "and symmetry-based entanglement measures.",
    )
    parser.add_argument("--version", action="version", version=f"opsym {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, partition=True):
        if partition:
            p.add_argument("--partition", type=_partition, default=(0,), help="side-A subsystem indices, e.g. 0,2")
            p.add_argument("--rank-tol", type=float, default=1e-10, help="relative Schmidt rank threshold")

    def mc(p, samples):
        p.add_argument("--samples", type=int, default=samples, help="Haar samples")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--workers", type=int, default=1, help="worker processes (output is unaffected)")

    p = sub.add_parser("schmidt", help="Schmidt coefficients and entanglement flags")
    p.add_argument("state")
    common(p)
    p.set_defaults(func=cmd_schmidt)

    p = sub.add_parser("related", help="operator on B equivalent to an operator on A")
    p.add_argument("state")
    p.add_argument("operator")
    common(p)
    p.add_argument("--verify", action="store_true", help="print the action residual")
    p.add_argument("--out", help="write V here instead of stdout")
    p.set_defaults(func=cmd_related)

    p = sub.add_parser("channel", help="related Kraus map and its CP/TP analysis")
    p.add_argument("state")
    p.add_argument("kraus")
    common(p)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_channel)

    p = sub.add_parser("measure", help="minimum fidelity, symmetry of entanglement, entropy, negativity")
    p.add_argument("state")
    common(p)
    p.add_argument("--measure", choices=["m", "es", "entropy", "negativity", "all"], default="all")
    p.add_argument("--restarts", type=int, default=16, help="optimizer restarts for mixed-state m")
    mc(p, 100_000)
    p.set_defaults(func=cmd_measure)

    p = sub.add_parser("fig1", help="measures along the four-level family, as CSV")
    p.add_argument("--points", type=int, default=101)
    p.add_argument("--out", default="fig1.csv")
    mc(p, 20_000)
    p.set_defaults(func=cmd_fig1)

    p = sub.add_parser("fig2", help="normalized symmetry of entanglement versus eps, as CSV")
    p.add_argument("--dims", type=_int_list, default=[2, 4, 8])
    p.add_argument("--points", type=int, default=21)
    p.add_argument("--out", default="fig2.csv")
    mc(p, 20_000)
    p.set_defaults(func=cmd_fig2)

    p = sub.add_parser("haarcheck", help="check sampled unitaries against the Haar element law")
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_haarcheck)
    return parser


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s: %(message)s",
        stream=sys.stderr,
    )
    if getattr(args, "samples", 100) < 100 and args.command != "haarcheck":
        print("error: --samples must be at least 100", file=sys.stderr)
        return EXIT_PARSE
    try:
        return args.func(args, out)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except (NotNormalized, NotPositive, ZeroVector, DimensionMismatch, NotUnitary) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE


if __name__ == "__main__":
    sys.exit(main())
