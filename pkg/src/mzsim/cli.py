"""``mzsim`` command-line front end.

Every data document starts with ``#``-prefixed JSON metadata lines followed by
CSV (or JSON-lines) rows.  Exit status: 0 on success, 2 on invalid input,
3 when a numerical procedure fails to converge.
"""
from __future__ import annotations

import argparse
import datetime as _dt
import json
import math
import os
import sys
import time
from dataclasses import dataclass, field
from importlib import metadata
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .bayes import CONFIDENCE_MEASURE, LikelihoodError, sensitivity_experiment
from .outcome import PORT_CONVENTION, outcome_table
from .scaling import (
    MAX_N_BAR,
    SCAN_TAIL_TOLERANCE,
    find_p_opt,
    heisenberg_fit,
    scan_p,
)
from .sensitivity import (
    ConvergenceError,
    crlb,
    error_propagation_sensitivity,
    fisher_analytic,
    fisher_information,
    fisher_one_port,
)
from .specfun import MemoryCeilingError
from .states import (
    DEFAULT_HARD_CAP,
    DEFAULT_TAIL_TOLERANCE,
    InputSpec,
    TruncationError,
    choose_cutoff,
    sector_amplitudes,
)
from .structure import (
    beam_splitter_rotate,
    noon_scan,
    phase_distribution,
    relative_number_distribution,
)

FIG2_ALPHA2 = 10.0
FIG2_R = 1.0
FIG2_BAYES_N_BAR_CEILING = 40.0
FIG4_N_BAR = 20.0


class UsageError(Exception):
    """Invalid command-line input; the message names the offending flag."""


def _version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:  # pragma: no cover
        return "0+unknown"


# ---------------------------------------------------------------------------
# output


@dataclass
class Table:
    name: str
    columns: list[str]
    rows: list[list] = field(default_factory=list)
    extra_meta: dict = field(default_factory=dict)


def _cell(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return ""
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(x)


def _json_value(x):
    if x is None or isinstance(x, (str, bool)):
        return x
    if isinstance(x, (int, np.integer)):
        return int(x)
    x = float(x)
    if math.isnan(x):
        return None
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return x


def _render(table: Table, header: list[dict], fmt: str) -> str:
    lines = ["# " + json.dumps(h, sort_keys=True) for h in header]
    if fmt == "csv":
        lines.append(",".join(table.columns))
        lines.extend(",".join(_cell(v) for v in row) for row in table.rows)
    else:
        lines.extend(
            json.dumps({c: _json_value(v) for c, v in zip(table.columns, row)}) for row in table.rows
        )
    return "\n".join(lines) + "\n"


def _resolved_config(args: argparse.Namespace) -> dict:
    skip = {"handler", "out"}
    return {k: _json_value(v) if not isinstance(v, (list, tuple)) else [_json_value(i) for i in v]
            for k, v in sorted(vars(args).items()) if k not in skip}


def _header(args, table: Table, started: str, elapsed: float) -> list[dict]:
    return [
        {"mzsim_version": _version(), "command": args.command, "table": table.name},
        {"config": _resolved_config(args)},
        {
            "seed": getattr(args, "seed", None),
            "tail_tolerance": getattr(args, "tail_tolerance", None),
            "hard_cap": getattr(args, "hard_cap", None),
            "threads": args.threads,
        },
        {"port_convention": PORT_CONVENTION, **table.extra_meta},
        {"started_utc": started, "wall_clock_s": round(elapsed, 3)},
    ]


def _emit(args, tables: list[Table], started: str, elapsed: float) -> None:
    ext = args.format
    if args.out is None:
        sys.stdout.write("\n".join(_render(t, _header(args, t, started, elapsed), ext) for t in tables))
        return
    out = Path(args.out)
    if len(tables) == 1:
        paths = [out]
    else:
        paths = [out.with_name(f"{out.stem}.{t.name}{out.suffix or '.' + ext}") for t in tables]
    for path, t in zip(paths, tables):
        path.write_text(_render(t, _header(args, t, started, elapsed), ext))


def _note(msg: str) -> None:
    print(f"mzsim: note: {msg}", file=sys.stderr)


# ---------------------------------------------------------------------------
# argument types


def _number(flag: str, lo: float | None = None, hi: float | None = None,
            lo_open: bool = False, hi_open: bool = False) -> Callable[[str], float]:
    def parse(text: str) -> float:
        try:
            x = float(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"{text!r} is not a number") from None
        if not math.isfinite(x):
            raise argparse.ArgumentTypeError(f"{text!r} is not finite")
        if lo is not None and (x < lo or (lo_open and x == lo)):
            raise argparse.ArgumentTypeError(f"must be {'>' if lo_open else '>='} {lo:g}, got {text}")
        if hi is not None and (x > hi or (hi_open and x == hi)):
            raise argparse.ArgumentTypeError(f"must be {'<' if hi_open else '<='} {hi:g}, got {text}")
        return x

    parse.__name__ = flag
    return parse


def _integer(lo: int) -> Callable[[str], int]:
    def parse(text: str) -> int:
        try:
            x = int(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"{text!r} is not an integer") from None
        if x < lo:
            raise argparse.ArgumentTypeError(f"must be >= {lo}, got {text}")
        return x

    return parse


def _int_list(lo: int) -> Callable[[str], list[int]]:
    one = _integer(lo)

    def parse(text: str) -> list[int]:
        items = [s for s in text.split(",") if s.strip()]
        if not items:
            raise argparse.ArgumentTypeError("empty list")
        return [one(s.strip()) for s in items]

    return parse


def _float_list(lo: float) -> Callable[[str], list[float]]:
    one = _number("list", lo=lo, lo_open=True)

    def parse(text: str) -> list[float]:
        items = [s for s in text.split(",") if s.strip()]
        if not items:
            raise argparse.ArgumentTypeError("empty list")
        return [one(s.strip()) for s in items]

    return parse


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # one-line diagnostic, exit status 2
        self.exit(2, f"mzsim: error: {message}\n")


# ---------------------------------------------------------------------------
# shared helpers


def _spec(args, alpha2: float | None = None, r: float | None = None) -> InputSpec:
    a2 = args.alpha2 if alpha2 is None else alpha2
    rr = args.r if r is None else r
    spec = InputSpec.from_alpha2(a2, rr, tail_tolerance=args.tail_tolerance, hard_cap=args.hard_cap)
    cut = choose_cutoff(spec)
    if cut.capped:
        raise UsageError(
            f"argument --hard-cap: {args.hard_cap} photons cannot reach --tail-tolerance "
            f"{args.tail_tolerance:g} for |alpha|^2={a2:g}, r={rr:g}"
        )
    return spec


def _require_open_theta(theta: float) -> None:
    if not 0 < theta < math.pi:
        raise UsageError(f"argument --theta: must lie strictly inside (0, pi), got {theta}")


def _sub_seed(seed: int, key: int) -> int:
    return int(np.random.SeedSequence(seed, spawn_key=(key,)).generate_state(1, np.uint64)[0])


def _bayes_point(spec: InputSpec, theta: float, args, key: int, what: str):
    """(mean, dispersion) or (None, None) with a stderr note on failure."""
    try:
        res = sensitivity_experiment(spec, theta, args.p, args.trials, _sub_seed(args.seed, key),
                                     grid_size=args.grid_size)
    except (TruncationError, MemoryCeilingError, LikelihoodError) as exc:
        _note(f"{what}: Bayesian point skipped ({exc})")
        return None, None
    return res.delta_theta, res.dispersion


# ---------------------------------------------------------------------------
# subcommands


def cmd_prob(args) -> list[Table]:
    table = outcome_table(_spec(args), args.theta)
    t = Table("prob", ["n_c", "n_d", "prob"],
              extra_meta={"kept_mass": table.kept_mass, "input_tail": table.input_tail, "slack": table.slack})
    t.rows = [[int(c), int(d), float(p)] for c, d, p in zip(table.n_c, table.n_d, table.probs)]
    return [t]


def cmd_fisher(args) -> list[Table]:
    _require_open_theta(args.theta)
    spec = _spec(args)
    if args.port == "both":
        numeric = fisher_information(spec, args.theta)
    else:
        numeric = fisher_one_port(spec, args.theta, args.port)
    analytic = fisher_analytic(spec)
    gap = abs(numeric - analytic) / analytic if analytic else math.nan
    t = Table("fisher", ["theta", "port", "fisher_numeric", "fisher_analytic", "relative_gap"])
    t.rows = [[args.theta, args.port, numeric, analytic, gap]]
    if args.out is None:
        print(f"fisher_numeric={numeric:.10g} fisher_analytic={analytic:.10g} relative_gap={gap:.3g}")
        return []
    return [t]


def _scalar(args, name: str, value: float) -> list[Table]:
    if args.out is None:
        print("inf" if math.isinf(value) else f"{value:.6g}")
        return []
    return [Table(name, [name], [[value]])]


def cmd_crlb(args) -> list[Table]:
    spec = InputSpec.from_alpha2(args.alpha2, args.r)
    return _scalar(args, "crlb", crlb(spec, args.p))


def cmd_epf(args) -> list[Table]:
    spec = InputSpec.from_alpha2(args.alpha2, args.r)
    return _scalar(args, "ep_sensitivity", error_propagation_sensitivity(spec, args.theta, args.p))


def cmd_bayes(args) -> list[Table]:
    spec = _spec(args)
    res = sensitivity_experiment(spec, args.theta, args.p, args.trials, args.seed, grid_size=args.grid_size)
    bound = crlb(spec, args.p)
    t = Table(
        "bayes",
        ["theta_true", "p", "trials", "delta_theta", "dispersion", "crlb", "ratio_to_crlb",
         "map_phase", "mean_photons", "multimodal_trials"],
        extra_meta={"confidence_measure": CONFIDENCE_MEASURE},
    )
    t.rows = [[args.theta, args.p, args.trials, res.delta_theta, res.dispersion, bound,
               res.delta_theta / bound, res.map_phase, res.mean_photons, res.multimodal_trials]]
    return [t]


def fig2a_r_grid(r_max: float, steps: int, alpha2: float) -> np.ndarray:
    """Uniform grid on ``[0, r_max]`` plus the divergence point ``sinh^2 r = |alpha|^2``."""
    grid = np.round(np.linspace(0.0, r_max, steps), 12)
    r_div = math.asinh(math.sqrt(alpha2))
    if r_div <= r_max:
        grid = np.union1d(grid, [r_div])
    return grid


def cmd_fig2a(args) -> list[Table]:
    t = Table("fig2a", ["r", "ep_sensitivity", "crlb", "bayes_mean", "bayes_dispersion"],
              extra_meta={"confidence_measure": CONFIDENCE_MEASURE,
                          "bayes_n_bar_ceiling": args.max_n_bar})
    for k, r in enumerate(fig2a_r_grid(args.r_max, args.r_steps, args.alpha2)):
        spec = InputSpec.from_alpha2(args.alpha2, r)
        ep = error_propagation_sensitivity(spec, args.theta, args.p)
        bm = bd = None
        if args.trials:
            if spec.n_bar > args.max_n_bar:
                _note(f"r={r:.6g}: n_bar={spec.n_bar:.4g} above --max-n-bar, Bayesian fields left empty")
            else:
                bm, bd = _bayes_point(_spec(args, r=r), args.theta, args, k, f"r={r:.6g}")
        t.rows.append([float(r), ep, crlb(spec, args.p), bm, bd])
    return [t]


def cmd_fig2b(args) -> list[Table]:
    t = Table("fig2b", ["theta", "ep_sensitivity", "crlb", "bayes_mean", "bayes_dispersion"],
              extra_meta={"confidence_measure": CONFIDENCE_MEASURE})
    spec = InputSpec.from_alpha2(args.alpha2, args.r)
    thetas = np.linspace(0.0, math.pi, args.theta_steps + 2)[1:-1]
    trunc = _spec(args) if args.trials else None
    for k, th in enumerate(thetas):
        bm = bd = None
        if trunc is not None:
            bm, bd = _bayes_point(trunc, float(th), args, k, f"theta={th:.6g}")
        t.rows.append([float(th), error_propagation_sensitivity(spec, float(th), args.p),
                       crlb(spec, args.p), bm, bd])
    return [t]


def cmd_fig3(args) -> list[Table]:
    budgets = sorted(set(args.budgets))
    a = Table("fig3a", ["N_T", "p", "n_bar", "mean_delta_theta", "dispersion"],
              extra_meta={"confidence_measure": CONFIDENCE_MEASURE})
    p_opts = []
    for nt in budgets:
        scan = scan_p(nt, args.p_values, args.trials, args.seed, args.theta,
                      args.tail_tolerance, args.max_n_bar, args.grid_size)
        for pt in scan.points:
            if pt.note:
                _note(f"N_T={nt:g}, p={pt.p}: {pt.note}")
            a.rows.append([nt, pt.p, pt.n_bar, pt.mean_delta_theta, pt.dispersion])
        try:
            opt = find_p_opt(scan)
        except ValueError as exc:
            _note(f"N_T={nt:g}: {exc}")
            continue
        if not opt.interior:
            _note(f"N_T={nt:g}: minimum at scan edge p={opt.p}, inconclusive")
        p_opts.append(opt.p)
    a.extra_meta["p_opt_per_budget"] = dict(zip([str(b) for b in budgets], p_opts))

    p_opt = args.p_opt or (int(np.median(p_opts)) if p_opts else None)
    if p_opt is None:
        raise UsageError("argument --p-values: no budget produced a usable scan; pass --p-opt")
    p_opt = min(args.p_values + ([args.p_opt] if args.p_opt else []), key=lambda p: abs(p - p_opt))
    fit = heisenberg_fit(budgets, p_opt, args.trials, args.seed, args.theta, args.tail_tolerance, args.grid_size)
    if fit.fit.poor_fit:
        _note(f"c/N_T fit residual {fit.fit_residual:.3g} exceeds threshold; prefactor unreliable")
    b = Table(
        "fig3b",
        ["N_T", "delta_theta_at_popt", "fit_c", "crlb_overlay", "caption_overlay", "shot_noise"],
        extra_meta={"p_opt": p_opt, "fit_residual": fit.fit_residual, "free_slope": fit.fit.slope,
                    "poor_fit": fit.fit.poor_fit},
    )
    for i, nt in enumerate(fit.budgets):
        b.rows.append([float(nt), fit.delta_theta[i], fit.prefactor, fit.crlb_overlay[i],
                       fit.caption_overlay[i], fit.shot_noise[i]])
    return [a, b]


def _mu_cell(two_mu: int):
    return two_mu // 2 if two_mu % 2 == 0 else two_mu / 2


def _splits(steps: int) -> np.ndarray:
    return np.round(np.linspace(0.0, 1.0, steps), 12)


def cmd_noon(args) -> list[Table]:
    n = int(round(args.n_bar))
    spec = InputSpec.optimal_split(args.n_bar, tail_tolerance=args.tail_tolerance, hard_cap=args.hard_cap)
    try:
        sector = sector_amplitudes(spec, n)
    except ValueError as exc:
        raise UsageError(f"argument --n-bar: {exc}") from None
    rotated = beam_splitter_rotate(sector)
    mu = Table("fig4_mu", ["mu", "P_mu_input", "P_mu_afterBS"], extra_meta={"total_n": n})
    for tm, p_in, p_out in zip(sector.two_mus, relative_number_distribution(sector),
                               relative_number_distribution(rotated)):
        mu.rows.append([_mu_cell(int(tm)), p_in, p_out])
    dist = phase_distribution(rotated, args.phase_grid)
    phi = Table("fig4_phi", ["phi", "P_phi"], [[float(x), float(y)] for x, y in zip(dist.grid, dist.density)],
                extra_meta={"total_n": n, "overlap_convention": "<phi|psi> = sum_nu exp(+i nu phi) A_nu"})
    curve = noon_scan(args.n_bar, _splits(args.split_steps), n)
    for s in curve.skipped:
        _note(f"split={s:g}: sector N={n} has zero weight, P_NOON left empty")
    noon = Table("fig4_noon", ["split", "P_NOON"], extra_meta={"total_n": n, "noon_norm": "1/sqrt(2)"})
    values = dict(zip(curve.split.tolist(), curve.p_noon.tolist()))
    for s in _splits(args.split_steps):
        noon.rows.append([float(s), values.get(float(s))])
    return [mu, phi, noon]


# ---------------------------------------------------------------------------
# parser


def _add_physics(p, alpha2=FIG2_ALPHA2, r=FIG2_R, theta=math.pi / 2):
    p.add_argument("--alpha2", type=_number("alpha2", lo=0), default=alpha2, help="coherent |alpha|^2")
    p.add_argument("--r", type=_number("r", lo=0), default=r, help="squeezing strength")
    p.add_argument("--theta", type=_number("theta", lo=0, hi=math.pi), default=theta,
                   help="phase shift in radians, [0, pi]")


def _add_truncation(p, tail=DEFAULT_TAIL_TOLERANCE):
    p.add_argument("--tail-tolerance", type=_number("tail-tolerance", lo=0, hi=1, lo_open=True, hi_open=True),
                   default=tail)
    p.add_argument("--hard-cap", type=_integer(1), default=DEFAULT_HARD_CAP)


def _add_mc(p, p_default=1000, trials=200, trials_min=1):
    p.add_argument("--p", type=_integer(1), default=p_default, help="measurements per experiment")
    p.add_argument("--trials", type=_integer(trials_min), default=trials)
    p.add_argument("--seed", type=_integer(0), default=0)
    p.add_argument("--grid-size", type=_integer(64), default=4096)


def _add_output(p):
    p.add_argument("--out", default=None, help="output path (stdout if omitted)")
    p.add_argument("--format", choices=("csv", "json"), default="csv")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mzsim", description="Mach-Zehnder phase-estimation simulator")
    parser.add_argument("--version", action="version", version=f"mzsim {_version()}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("prob", help="outcome table P(n_c, n_d | theta)")
    _add_physics(p)
    _add_truncation(p)
    _add_output(p)
    p.set_defaults(handler=cmd_prob)

    p = sub.add_parser("fisher", help="numeric vs analytic Fisher information")
    _add_physics(p)
    _add_truncation(p)
    p.add_argument("--port", choices=("both", "c", "d"), default="both")
    _add_output(p)
    p.set_defaults(handler=cmd_fisher)

    p = sub.add_parser("crlb", help="Cramer-Rao bound 1/sqrt(p F)")
    _add_physics(p)
    p.add_argument("--p", type=_integer(1), default=1)
    _add_output(p)
    p.set_defaults(handler=cmd_crlb)

    p = sub.add_parser("epf", help="error-propagation sensitivity")
    _add_physics(p)
    p.add_argument("--p", type=_integer(1), default=1)
    _add_output(p)
    p.set_defaults(handler=cmd_epf)

    p = sub.add_parser("bayes", help="Bayesian sensitivity experiment")
    _add_physics(p)
    _add_truncation(p)
    _add_mc(p)
    _add_output(p)
    p.set_defaults(handler=cmd_bayes)

    p = sub.add_parser("fig2a", help="sensitivity against r at fixed |alpha|^2")
    _add_physics(p)
    _add_truncation(p)
    _add_mc(p, trials_min=0)
    p.add_argument("--r-max", type=_number("r-max", lo=0, lo_open=True), default=3.0)
    p.add_argument("--r-steps", type=_integer(2), default=31)
    p.add_argument("--max-n-bar", type=_number("max-n-bar", lo=0, lo_open=True), default=FIG2_BAYES_N_BAR_CEILING)
    _add_output(p)
    p.set_defaults(handler=cmd_fig2a)

    p = sub.add_parser("fig2b", help="sensitivity against theta")
    _add_physics(p)
    _add_truncation(p)
    _add_mc(p, trials_min=0)
    p.add_argument("--theta-steps", type=_integer(1), default=31)
    _add_output(p)
    p.set_defaults(handler=cmd_fig2b)

    p = sub.add_parser("fig3", help="fixed-budget p scans and the 1/N_T fit")
    p.add_argument("--theta", type=_number("theta", lo=0, hi=math.pi), default=math.pi / 2)
    _add_truncation(p, tail=SCAN_TAIL_TOLERANCE)
    _add_mc(p, trials=100)
    p.add_argument("--budgets", type=_float_list(0), default=[300.0, 600.0, 1200.0])
    p.add_argument("--p-values", type=_int_list(1), default=[5, 10, 15, 20, 30, 40, 60, 100, 150])
    p.add_argument("--p-opt", type=_integer(1), default=None)
    p.add_argument("--max-n-bar", type=_number("max-n-bar", lo=0, lo_open=True), default=MAX_N_BAR)
    _add_output(p)
    p.set_defaults(handler=cmd_fig3)

    for name in ("noon", "fig4"):
        p = sub.add_parser(name, help="post-selected NOON structure")
        p.add_argument("--n-bar", type=_number("n-bar", lo=0, lo_open=True), default=FIG4_N_BAR)
        p.add_argument("--phase-grid", type=_integer(1), default=1024)
        p.add_argument("--split-steps", type=_integer(2), default=21)
        _add_truncation(p)
        _add_output(p)
        p.set_defaults(handler=cmd_noon)
    return parser


def _threads() -> int:
    raw = os.environ.get("MZSIM_THREADS", "0")
    try:
        n = int(raw)
    except ValueError:
        raise UsageError(f"MZSIM_THREADS: {raw!r} is not an integer") from None
    if n < 0:
        raise UsageError(f"MZSIM_THREADS: must be >= 0, got {n}")
    return n


def run(argv: Sequence[str] | None = None) -> int:
    """Parse ``argv``, execute the subcommand and return the exit status."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    started = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    t0 = time.perf_counter()
    try:
        args.threads = _threads()
        tables = args.handler(args)
    except UsageError as exc:
        print(f"mzsim: error: {exc}", file=sys.stderr)
        return 2
    except (ConvergenceError, LikelihoodError) as exc:
        print(f"mzsim: convergence failure: {exc}", file=sys.stderr)
        return 3
    except (TruncationError, MemoryCeilingError) as exc:
        print(f"mzsim: error: {exc}", file=sys.stderr)
        return 2
    if tables:
        _emit(args, tables, started, time.perf_counter() - t0)
    return 0


def main(argv: Sequence[str] | None = None) -> int:
    return run(argv)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
