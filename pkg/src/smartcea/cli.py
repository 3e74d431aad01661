"""Command-line interface: reproducible pipelines over files.

Nine subcommands tie the library together: simulate, truth, estimate,
icer-table, contrast, frontier, plot, mc-study, bootstrap.  Every setting
can come from a flag or from a flat key=value config file (--config); a
flag wins over the file and the override is noted on standard error.
Stochastic subcommands refuse to run without an explicit seed: there is no
wall-clock seeding anywhere, so a config rerun is byte-identical.

Every output file begins with comment lines recording the tool version, the
subcommand, the fully resolved configuration, and the master seed.  No
timestamps are written by design.

Exit codes: 0 success; 2 usage error (bad flag, bad config key, value out
of range); 1 runtime failure, reported as a single machine-readable line
``error kind=<ExceptionName> subcommand=<name> message="..."`` on standard
error.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import __version__
from .cea import (
    EmptyFrontier,
    Frontier,
    PlanePoint,
    efficient_frontier,
    plane_points,
    render_plane_svg,
)
from .core import Dataset, RegimeSpec
from .dgp import DgpConfig, embedded_regimes, simulate_smart, true_values
from .estimate import (
    RegimeMeanRequest,
    ZeroSupport,
    estimate_g,
    regime_mean,
)
from .glm import RankDeficient, SeparationDetected
from .inference import (
    PER_HUNDRED,
    DegenerateDenominator,
    IcerResult,
    TooManyDegenerate,
    bootstrap_ci,
    contrast,
    icer,
    risk_difference,
)
from .study import TRUTH_MC_DRAWS, StudyConfig, run_study

__all__ = ["main", "RunConfig", "ingest_dataset", "read_regime_file", "UsageError", "CliError"]

# Benchmark treatment supports; ingestion validates codes against these.
STAGE1_SUPPORT = frozenset({0, 1})
STAGE2_SUPPORT = {0: frozenset({3, 4}), 1: frozenset({1, 2})}


class UsageError(Exception):
    """Bad flags or config: reported and exited with code 2."""


class CliError(Exception):
    """Runtime failure: reported machine-readably and exited with code 1."""


@dataclass(frozen=True)
class Option:
    """One subcommand setting: flag, config-file key, and validation."""

    name: str
    type: Callable
    default: object = None
    help: str = ""
    domain: str = ""
    check: Callable[[object], bool] | None = None
    required: bool = False
    choices: tuple | None = None
    is_flag: bool = False


def _pos_int(v):
    return v >= 1


def _seed_opt():
    return Option(
        "seed",
        int,
        None,
        "master seed; required, no wall-clock fallback",
        "integer in [0, 2^64)",
        lambda v: 0 <= v < 2**64,
        required=True,
    )


def _alpha_opt():
    return Option(
        "alpha", float, 0.05, "two-sided error rate for intervals",
        "in (0, 1)", lambda v: 0.0 < v < 1.0,
    )


def _threads_opt():
    return Option(
        "threads", int, None,
        "parallelism cap (default: available cores)",
        ">= 1", _pos_int,
    )


def _estimator_opt(default="tmle"):
    return Option("estimator", str, default, "point estimator", choices=("ipw", "tmle"))


def _g_opt(default=None):
    return Option(
        "g", str, default,
        "treatment mechanism: design probabilities or logistic fits "
        "(default pairs known with ipw, fitted with tmle)",
        choices=("known", "fitted"),
    )


def _cv_opt():
    return Option(
        "cv_threshold", float, 2.0,
        "component coefficient-of-variation bound for the reliability flag",
        "> 0", lambda v: v > 0.0,
    )


def _out_opt(help="output CSV path"):
    return Option("out", str, None, help, required=True)


def _data_opt():
    return Option("data", str, None, "input dataset CSV", required=True)


def _regimes_opt():
    return Option(
        "regimes", str, None,
        "regime table file (default: the eight benchmark regimes)",
    )


def _reference_opt():
    return Option("reference", int, 1, "reference regime id", ">= 1", _pos_int)


SUBCOMMANDS: dict[str, tuple[str, tuple[Option, ...]]] = {
    "simulate": (
        "draw one trial from the benchmark generative process",
        (
            Option("n", int, 1809, "number of records", ">= 1", _pos_int),
            _seed_opt(),
            _out_opt("output dataset CSV path"),
        ),
    ),
    "truth": (
        "Monte-Carlo truth table for the benchmark regimes",
        (
            Option(
                "mc_draws", int, 2_000_000, "Monte-Carlo draws",
                ">= 10000", lambda v: v >= 10_000,
            ),
            _seed_opt(),
            _regimes_opt(),
            _reference_opt(),
            _out_opt(),
        ),
    ),
    "estimate": (
        "regime-specific mean outcome estimates on a dataset",
        (
            _data_opt(),
            _regimes_opt(),
            _estimator_opt(),
            _g_opt(),
            Option("outcome", str, "both", "outcome column(s)", choices=("y", "c", "both")),
            Option("ic_dir", str, None, "directory for per-estimate influence-curve files"),
            _out_opt(),
        ),
    ),
    "icer-table": (
        "per-regime ICERs against the reference, with intervals and flags",
        (
            _data_opt(),
            _regimes_opt(),
            _estimator_opt(),
            _g_opt(),
            _reference_opt(),
            _cv_opt(),
            _alpha_opt(),
            _out_opt(),
        ),
    ),
    "contrast": (
        "difference between two regimes' ICERs against the same reference",
        (
            _data_opt(),
            _regimes_opt(),
            Option("i", int, None, "first regime id", ">= 1", _pos_int, required=True),
            Option("j", int, None, "second regime id", ">= 1", _pos_int, required=True),
            _estimator_opt(),
            _g_opt(),
            _reference_opt(),
            _cv_opt(),
            _alpha_opt(),
            _out_opt(),
        ),
    ),
    "frontier": (
        "efficient frontier from an icer-table output",
        (
            Option("in_", str, None, "icer-table CSV to read", required=True),
            Option("drop_unreliable", bool, False, "drop flagged points before the hull", is_flag=True),
            Option("out_points", str, None, "plane points CSV path", required=True),
            Option("out_frontier", str, None, "frontier vertices CSV path", required=True),
        ),
    ),
    "plot": (
        "cost-effectiveness plane SVG from an icer-table output",
        (
            Option("in_", str, None, "icer-table CSV to read", required=True),
            Option("drop_unreliable", bool, False, "drop flagged points before the frontier", is_flag=True),
            Option("no_frontier", bool, False, "points only, no frontier polyline", is_flag=True),
            Option("width", int, 640, "SVG width in px", ">= 1", _pos_int),
            Option("height", int, 480, "SVG height in px", ">= 1", _pos_int),
            _out_opt("output SVG path"),
        ),
    ),
    "mc-study": (
        "repeated-simulation estimator comparison",
        (
            Option("reps", int, 500, "simulation repetitions", ">= 1", _pos_int),
            Option("n", int, 1809, "records per repetition", ">= 2", lambda v: v >= 2),
            _seed_opt(),
            Option(
                "estimators", str, "ipw,tmle",
                "comma-separated estimators to compare", choices=None,
            ),
            Option("retain_degenerate", bool, False,
                   "keep unreliable-but-defined reps in the moments", is_flag=True),
            _cv_opt(),
            _alpha_opt(),
            _threads_opt(),
            _out_opt(),
        ),
    ),
    "bootstrap": (
        "percentile bootstrap interval for an ICER or an ICER contrast",
        (
            _data_opt(),
            _regimes_opt(),
            Option("i", int, None, "regime id of interest", ">= 1", _pos_int, required=True),
            Option("j", int, None, "second regime id (contrast mode)", ">= 1", _pos_int),
            Option(
                "replicates", int, 500, "bootstrap replicates",
                ">= 100", lambda v: v >= 100,
            ),
            _seed_opt(),
            _estimator_opt(),
            _g_opt(),
            _reference_opt(),
            _alpha_opt(),
            _out_opt(),
        ),
    ),
}

# Subcommands that draw random numbers and therefore demand a seed.
STOCHASTIC = ("simulate", "truth", "mc-study", "bootstrap")


@dataclass(frozen=True)
class RunConfig:
    """Fully resolved settings for one subcommand invocation."""

    subcommand: str
    settings: dict
    master_seed: int | None = None
    overridden: tuple[str, ...] = field(default=())

    def header_lines(self) -> list[str]:
        # threads is an execution detail: results are thread-count
        # independent, so the header must be too.
        pairs = " ".join(
            f"{k}={self.settings[k]}" for k in sorted(self.settings) if k != "threads"
        )
        lines = [
            f"# tool: smartcea {__version__}",
            f"# subcommand: {self.subcommand}",
            f"# config: {pairs}",
        ]
        if self.master_seed is not None:
            lines.append(f"# master_seed: {self.master_seed}")
        return lines


def _flag_name(opt: Option) -> str:
    return "--" + opt.name.rstrip("_").replace("_", "-")


def _coerce(opt: Option, raw: str):
    if opt.is_flag:
        low = raw.strip().lower()
        if low in ("true", "1", "yes"):
            return True
        if low in ("false", "0", "no"):
            return False
        raise UsageError(f"{opt.name}: expected true/false, got {raw!r}")
    try:
        return opt.type(raw)
    except (TypeError, ValueError):
        raise UsageError(
            f"{opt.name}: malformed {opt.type.__name__} value {raw!r}"
        ) from None


def parse_config_file(path: str) -> dict[str, str]:
    """Flat key = value lines; blank lines and # comments ignored."""
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as err:
        raise UsageError(f"config file: {err}") from None
    out: dict[str, str] = {}
    for lineno, line in enumerate(lines, start=1):
        text = line.strip()
        if not text or text.startswith("#"):
            continue
        if "=" not in text:
            raise UsageError(f"config file line {lineno}: expected key = value")
        key, _, value = text.partition("=")
        key = key.strip().replace("-", "_")
        if key in out:
            raise UsageError(f"config file line {lineno}: duplicate key {key!r}")
        out[key] = value.strip()
    return out


def parse_and_validate(argv: Sequence[str]) -> RunConfig:
    """argv (without the program name) to a validated RunConfig."""
    parser = argparse.ArgumentParser(
        prog="smartcea",
        description="Cost-effectiveness estimation for two-stage SMART regimes.",
    )
    parser.add_argument("--version", action="version", version=f"smartcea {__version__}")
    subparsers = parser.add_subparsers(dest="subcommand", metavar="subcommand")
    for name, (help_text, options) in SUBCOMMANDS.items():
        sp = subparsers.add_parser(name, help=help_text, description=help_text)
        sp.add_argument("--config", default=None, help="flat key = value settings file")
        for opt in options:
            extra_help = f"{opt.help}" + (f" (default: {opt.default})" if opt.default is not None else "")
            if opt.is_flag:
                sp.add_argument(_flag_name(opt), dest=opt.name, action="store_true",
                                default=None, help=extra_help)
            elif opt.choices:
                sp.add_argument(_flag_name(opt), dest=opt.name, type=str,
                                choices=opt.choices, default=None, help=extra_help)
            else:
                sp.add_argument(_flag_name(opt), dest=opt.name, type=str,
                                default=None, help=extra_help)
    ns = parser.parse_args(list(argv))
    if ns.subcommand is None:
        parser.print_help(sys.stderr)
        raise UsageError("a subcommand is required")

    _, options = SUBCOMMANDS[ns.subcommand]
    known = {opt.name: opt for opt in options}
    file_cfg: dict[str, str] = {}
    if ns.config is not None:
        file_cfg = parse_config_file(ns.config)
        for key in file_cfg:
            if key not in known:
                raise UsageError(
                    f"config file: unknown key {key!r} for subcommand {ns.subcommand}"
                )

    settings: dict = {}
    overridden: list[str] = []
    for opt in options:
        flag_value = getattr(ns, opt.name)
        if flag_value is not None and opt.name in file_cfg:
            overridden.append(opt.name)
        if flag_value is not None:
            value = flag_value if opt.is_flag else _coerce(opt, flag_value)
        elif opt.name in file_cfg:
            value = _coerce(opt, file_cfg[opt.name])
        else:
            value = opt.default
        if value is None and opt.required:
            if opt.name == "seed":
                raise UsageError(
                    "seed: required for stochastic subcommands (no wall-clock seeding)"
                )
            raise UsageError(f"{opt.name}: required")
        if value is not None:
            if opt.choices and value not in opt.choices:
                raise UsageError(
                    f"{opt.name}: expected one of {', '.join(map(str, opt.choices))}"
                )
            if opt.check is not None and not opt.check(value):
                raise UsageError(f"{opt.name}: must be {opt.domain}, got {value}")
        settings[opt.name] = value
    seed = settings.get("seed")
    return RunConfig(
        subcommand=ns.subcommand,
        settings=settings,
        master_seed=seed,
        overridden=tuple(overridden),
    )


# ---------------------------------------------------------------- file I/O


def _fmt(value) -> str:
    """Deterministic, round-trippable text for one CSV cell."""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_csv(path: str, config: RunConfig, header: Sequence[str], rows) -> None:
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            for line in config.header_lines():
                fh.write(line + "\n")
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            for row in rows:
                writer.writerow([_fmt(v) for v in row])
    except OSError as err:
        raise CliError(f"cannot write {path}: {err}") from None


def ingest_dataset(path: str) -> Dataset:
    """Read and validate a trajectory CSV, with row-level diagnostics.

    Schema: id, x1 (or x1_1..x1_p), a1, l2, s2, a2, y, c.  Treatment codes
    are checked against the benchmark supports; a stage-2 code from the
    wrong branch names the line, the column, and the support it violated.
    """
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            lines = [ln for ln in fh]
    except OSError as err:
        raise CliError(f"cannot read {path}: {err}") from None
    rows = list(csv.reader([ln for ln in lines if not ln.startswith("#")]))
    if not rows:
        raise CliError(f"{path}: empty file")
    header = [name.strip() for name in rows[0]]
    x1_cols = [name for name in header if name == "x1" or name.startswith("x1_")]
    required = ["id"] + x1_cols + ["a1", "l2", "s2", "a2", "y", "c"]
    for name in ("id", "a1", "l2", "s2", "a2", "y", "c"):
        if name not in header:
            raise CliError(f"{path}: missing column {name!r}")
    if not x1_cols:
        raise CliError(f"{path}: missing column 'x1' (or x1_1..x1_p)")
    col = {name: header.index(name) for name in required}

    data_rows = rows[1:]
    if not data_rows:
        raise CliError(f"{path}: no data rows")
    n = len(data_rows)
    x1 = np.empty((n, len(x1_cols)))
    a1 = np.empty(n, dtype=np.int64)
    l2 = np.empty(n, dtype=np.int64)
    s2 = np.empty(n)
    a2 = np.empty(n, dtype=np.int64)
    y = np.empty(n)
    c = np.empty(n)

    def fail(line_no: int, column: str, reason: str):
        raise CliError(f"{path} line {line_no}, column {column!r}: {reason}")

    for i, row in enumerate(data_rows):
        line_no = i + 2  # 1-based, after the header line
        if len(row) != len(header):
            fail(line_no, "-", f"expected {len(header)} fields, got {len(row)}")

        def num(column: str) -> float:
            raw = row[col[column]].strip()
            try:
                value = float(raw)
            except ValueError:
                fail(line_no, column, f"malformed number {raw!r}")
            if not np.isfinite(value):
                fail(line_no, column, f"non-finite value {raw!r}")
            return value

        def code(column: str) -> int:
            value = num(column)
            if value != int(value):
                fail(line_no, column, f"expected an integer code, got {value}")
            return int(value)

        for j, name in enumerate(x1_cols):
            x1[i, j] = num(name)
        a1[i] = code("a1")
        if a1[i] not in STAGE1_SUPPORT:
            fail(line_no, "a1", f"out of stage-1 support {sorted(STAGE1_SUPPORT)}")
        l2[i] = code("l2")
        if l2[i] not in (0, 1):
            fail(line_no, "l2", "expected 0 or 1")
        s2[i] = num("s2")
        a2[i] = code("a2")
        branch = int(l2[i])
        if a2[i] not in STAGE2_SUPPORT[branch]:
            fail(
                line_no,
                "a2",
                f"out of stage-2 support {sorted(STAGE2_SUPPORT[branch])} "
                f"for records with l2={branch}",
            )
        y[i] = num("y")
        if y[i] not in (0.0, 1.0):
            fail(line_no, "y", "expected a binary 0/1 outcome")
        c[i] = num("c")
        if c[i] < 0:
            fail(line_no, "c", "expected a nonnegative cost")

    return Dataset(
        x1=x1, a1=a1, l2=l2, s2=s2, a2=a2, y=y, c=c,
        stage1_support=set(STAGE1_SUPPORT),
        stage2_support={b: set(v) for b, v in STAGE2_SUPPORT.items()},
        x1_names=tuple(x1_cols),
    )


def read_regime_file(path: str) -> tuple[RegimeSpec, ...]:
    """Regime table: one row per regime (id, d1, d2_if_lapse, d2_if_no_lapse).

    Comma- or whitespace-separated, # comments allowed, header optional.
    Ids must be unique; codes are validated against the benchmark supports.
    """
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as err:
        raise CliError(f"cannot read {path}: {err}") from None
    regimes: list[RegimeSpec] = []
    seen: set[int] = set()
    for lineno, line in enumerate(lines, start=1):
        text = line.strip()
        if not text or text.startswith("#"):
            continue
        fields = text.replace(",", " ").split()
        if lineno == 1 and fields and not fields[0].lstrip("-").isdigit():
            continue  # header row
        if len(fields) != 4:
            raise CliError(f"{path} line {lineno}: expected 4 fields, got {len(fields)}")
        try:
            rid, d1, dl, dn = (int(v) for v in fields)
        except ValueError:
            raise CliError(f"{path} line {lineno}: malformed integer") from None
        if rid in seen:
            raise CliError(f"{path} line {lineno}: duplicate regime id {rid}")
        seen.add(rid)
        if d1 not in STAGE1_SUPPORT:
            raise CliError(
                f"{path} line {lineno}: d1={d1} outside stage-1 support {sorted(STAGE1_SUPPORT)}"
            )
        if dl not in STAGE2_SUPPORT[1]:
            raise CliError(
                f"{path} line {lineno}: d2_if_lapse={dl} outside support {sorted(STAGE2_SUPPORT[1])}"
            )
        if dn not in STAGE2_SUPPORT[0]:
            raise CliError(
                f"{path} line {lineno}: d2_if_no_lapse={dn} outside support {sorted(STAGE2_SUPPORT[0])}"
            )
        regimes.append(RegimeSpec(id=rid, d1=d1, d2_if_lapse=dl, d2_if_no_lapse=dn))
    if not regimes:
        raise CliError(f"{path}: no regimes")
    return tuple(regimes)


def _load_regimes(settings: dict) -> tuple[RegimeSpec, ...]:
    if settings.get("regimes"):
        return read_regime_file(settings["regimes"])
    return embedded_regimes()


# ------------------------------------------------------------- subcommands


def _run_simulate(config: RunConfig) -> None:
    s = config.settings
    dataset = simulate_smart(DgpConfig(n=s["n"], seed=s["seed"]))
    header = ["id"] + list(dataset.x1_names) + ["a1", "l2", "s2", "a2", "y", "c"]
    rows = (
        [i + 1]
        + [dataset.x1[i, j] for j in range(dataset.x1.shape[1])]
        + [dataset.a1[i], dataset.l2[i], dataset.s2[i], dataset.a2[i], dataset.y[i], dataset.c[i]]
        for i in range(dataset.n)
    )
    write_csv(s["out"], config, header, rows)


def _run_truth(config: RunConfig) -> None:
    s = config.settings
    regimes = _load_regimes(s)
    table = true_values(
        DgpConfig(seed=s["seed"]),
        regimes=regimes,
        mc_draws=s["mc_draws"],
        seed=s["seed"],
        reference_id=s["reference"],
    )
    header = ["regime", "ey", "ec", "rd_cost", "rd_eff", "icer", "mc_se_ey", "mc_se_ec"]
    rows = [
        [r.id, table.ey[k], table.ec[k], table.rd_cost[k], table.rd_eff[k],
         table.icer[k], table.mc_se_ey[k], table.mc_se_ec[k]]
        for k, r in enumerate(table.regimes)
    ]
    write_csv(s["out"], config, header, rows)


def _g_mode(settings: dict) -> str:
    if settings.get("g"):
        return settings["g"]
    return "known" if settings["estimator"] == "ipw" else "fitted"


def _run_estimate(config: RunConfig) -> None:
    s = config.settings
    dataset = ingest_dataset(s["data"])
    regimes = _load_regimes(s)
    g = estimate_g(dataset, _g_mode(s))
    outcomes = ("y", "c") if s["outcome"] == "both" else (s["outcome"],)
    ic_dir = s.get("ic_dir")
    if ic_dir:
        os.makedirs(ic_dir, exist_ok=True)
    header = ["regime", "outcome", "psi", "se"] + (["ic_file"] if ic_dir else [])
    rows = []
    for regime in regimes:
        for outcome in outcomes:
            est = regime_mean(
                dataset,
                RegimeMeanRequest(
                    regime=regime, outcome=outcome, estimator=s["estimator"], g=g
                ),
            )
            row = [regime.id, outcome, est.psi, est.se]
            if ic_dir:
                ic_path = os.path.join(ic_dir, f"ic_{s['estimator']}_{regime.id}_{outcome}.csv")
                write_csv(ic_path, config, ["record", "ic"],
                          ([i + 1, v] for i, v in enumerate(est.ic)))
                row.append(ic_path)
            rows.append(row)
    write_csv(s["out"], config, header, rows)


def _icer_results(
    dataset: Dataset, regimes: tuple[RegimeSpec, ...], settings: dict
) -> list[tuple[int, IcerResult | None]]:
    """ICER per non-reference regime; None marks a degenerate denominator."""
    reference = next(
        (r for r in regimes if r.id == settings["reference"]), None
    )
    if reference is None:
        raise CliError(f"reference regime {settings['reference']} not in regime table")
    estimator = settings["estimator"]
    g = estimate_g(dataset, _g_mode(settings))

    def mean(regime: RegimeSpec, outcome: str):
        return regime_mean(
            dataset,
            RegimeMeanRequest(regime=regime, outcome=outcome, estimator=estimator, g=g),
        )

    ref_y = mean(reference, "y")
    ref_c = mean(reference, "c")
    out: list[tuple[int, IcerResult | None]] = []
    for regime in regimes:
        if regime.id == reference.id:
            continue
        rd_eff = risk_difference(mean(regime, "y"), ref_y, PER_HUNDRED)
        rd_cost = risk_difference(mean(regime, "c"), ref_c, 1.0)
        try:
            res = icer(
                rd_cost, rd_eff,
                cv_threshold=settings.get("cv_threshold", 2.0),
                alpha=settings.get("alpha", 0.05),
            )
        except DegenerateDenominator:
            res = None
        out.append((regime.id, res))
    return out


ICER_TABLE_HEADER = [
    "regime", "icer", "ci_lower", "ci_upper", "rd_cost", "rd_eff",
    "cv_cost", "cv_eff", "reliable",
]


def _run_icer_table(config: RunConfig) -> None:
    s = config.settings
    dataset = ingest_dataset(s["data"])
    regimes = _load_regimes(s)
    rows = []
    for rid, res in _icer_results(dataset, regimes, s):
        if res is None:
            rows.append([rid, float("nan"), float("nan"), float("nan"),
                         float("nan"), float("nan"), float("nan"), float("nan"), False])
        else:
            rows.append([rid, res.icer, res.ci[0], res.ci[1], res.rd_cost.psi,
                         res.rd_eff.psi, res.cv_cost, res.cv_eff, res.reliable])
    write_csv(s["out"], config, ICER_TABLE_HEADER, rows)


def _run_contrast(config: RunConfig) -> None:
    s = config.settings
    dataset = ingest_dataset(s["data"])
    regimes = _load_regimes(s)
    results = dict(_icer_results(dataset, regimes, s))
    for key in ("i", "j"):
        rid = s[key]
        if rid not in results:
            raise CliError(f"regime {rid} not in the analyzed table")
        if results[rid] is None:
            raise DegenerateDenominator(f"regime {rid}: ICER undefined on these data")
    res = contrast(results[s["i"]], results[s["j"]], alpha=s["alpha"])
    write_csv(
        s["out"], config,
        ["i", "j", "icer_i", "icer_j", "diff", "se", "ci_lower", "ci_upper"],
        [[s["i"], s["j"], res.component_icers[0], res.component_icers[1],
          res.diff, res.se, res.ci[0], res.ci[1]]],
    )


def _read_icer_table(path: str) -> list[PlanePoint]:
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            lines = [ln for ln in fh if not ln.startswith("#")]
    except OSError as err:
        raise CliError(f"cannot read {path}: {err}") from None
    reader = csv.DictReader(lines)
    points = []
    for row in reader:
        try:
            points.append(
                PlanePoint(
                    regime_id=int(row["regime"]),
                    rd_eff=float(row["rd_eff"]),
                    rd_cost=float(row["rd_cost"]),
                    icer=float(row["icer"]),
                    reliable=row["reliable"].strip().lower() == "true",
                )
            )
        except (KeyError, TypeError, ValueError) as err:
            raise CliError(f"{path}: not an icer-table file ({err})") from None
    if not points:
        raise CliError(f"{path}: no rows")
    return points


def _run_frontier(config: RunConfig) -> None:
    s = config.settings
    points = _read_icer_table(s["in_"])
    if s["drop_unreliable"]:
        points = [p for p in points if p.reliable]
        if not points:
            raise CliError("all points dropped as unreliable")
    frontier = efficient_frontier(points)
    on_frontier = set(frontier.regime_ids)
    write_csv(
        s["out_points"], config,
        ["regime", "rd_eff", "rd_cost", "icer", "reliable", "on_frontier"],
        [[p.regime_id, p.rd_eff, p.rd_cost, p.icer, p.reliable, p.regime_id in on_frontier]
         for p in points],
    )
    rows = [["", 0.0, 0.0, ""]]
    for rid, vertex, slope in zip(frontier.regime_ids, frontier.vertices[1:], frontier.slopes):
        rows.append([rid, vertex[0], vertex[1], slope])
    write_csv(s["out_frontier"], config, ["regime", "rd_eff", "rd_cost", "slope"], rows)


def _run_plot(config: RunConfig) -> None:
    s = config.settings
    points = _read_icer_table(s["in_"])
    hull_points = [p for p in points if p.reliable] if s["drop_unreliable"] else points
    frontier: Frontier | None = None
    if not s["no_frontier"]:
        try:
            frontier = efficient_frontier(hull_points)
        except EmptyFrontier:
            print("note: no frontier (no regime beats the reference); points only",
                  file=sys.stderr)
    svg = render_plane_svg(
        points, frontier=frontier, width=s["width"], height=s["height"]
    )
    try:
        with open(s["out"], "w", encoding="utf-8") as fh:
            for line in config.header_lines():
                fh.write(f"<!-- {line[2:]} -->\n")
            fh.write(svg)
    except OSError as err:
        raise CliError(f"cannot write {s['out']}: {err}") from None


def _run_mc_study(config: RunConfig) -> None:
    s = config.settings
    estimators = tuple(e.strip() for e in s["estimators"].split(",") if e.strip())
    study_config = StudyConfig(
        reps=s["reps"],
        n=s["n"],
        seed=s["seed"],
        estimators=estimators,
        alpha=s["alpha"],
        cv_threshold=s["cv_threshold"],
    )
    threads = s["threads"] if s["threads"] else (os.cpu_count() or 1)

    def progress(rep: int) -> None:
        done = rep + 1
        if done % 25 == 0 or done == s["reps"]:
            print(f"rep {done}/{s['reps']}", file=sys.stderr)

    print(f"computing truth table ({TRUTH_MC_DRAWS} draws)", file=sys.stderr)
    truth = true_values(
        DgpConfig(n=s["n"], seed=s["seed"]),
        regimes=study_config.regimes,
        mc_draws=TRUTH_MC_DRAWS,
        seed=s["seed"],
    )
    truth_path = s["out"] + ".truth.csv"
    write_csv(
        truth_path, config,
        ["regime", "ey", "ec", "rd_cost", "rd_eff", "icer", "mc_se_ey", "mc_se_ec"],
        [[r.id, truth.ey[k], truth.ec[k], truth.rd_cost[k], truth.rd_eff[k],
          truth.icer[k], truth.mc_se_ey[k], truth.mc_se_ec[k]]
         for k, r in enumerate(truth.regimes)],
    )
    result = run_study(
        study_config,
        truth=truth,
        retain_degenerate=s["retain_degenerate"],
        threads=threads,
        progress=progress,
    )
    header = [
        "estimator", "regime", "bias", "variance", "mse", "mean_ci_width",
        "coverage_pct", "avg_cv_cost", "avg_cv_eff", "rel_var_vs_ipw",
        "degenerate_count",
    ]
    rows = []
    for row in result.rows:
        m = row.metrics
        rows.append([
            row.estimator, row.regime_id, m.bias, m.variance, m.mse,
            m.mean_ci_width, m.coverage_pct, m.avg_cv_cost, m.avg_cv_eff,
            "" if m.rel_var_vs_ipw is None else m.rel_var_vs_ipw,
            row.degenerate_count,
        ])
    write_csv(s["out"], config, header, rows)


def _run_bootstrap(config: RunConfig) -> None:
    s = config.settings
    dataset = ingest_dataset(s["data"])
    regimes = _load_regimes(s)
    for key in ("i", "j"):
        rid = s.get(key)
        if rid is not None and not any(r.id == rid for r in regimes):
            raise CliError(f"regime {rid} not in regime table")
    if s["i"] == s["reference"]:
        raise CliError("regime of interest equals the reference")

    def statistic(resampled: Dataset) -> float:
        results = dict(_icer_results(resampled, regimes, s))
        res_i = results[s["i"]]
        if res_i is None:
            raise DegenerateDenominator(f"regime {s['i']}")
        if s.get("j") is None:
            return res_i.icer
        res_j = results[s["j"]]
        if res_j is None:
            raise DegenerateDenominator(f"regime {s['j']}")
        return res_i.icer - res_j.icer

    point = statistic(dataset)
    boot = bootstrap_ci(
        dataset,
        statistic,
        n_replicates=s["replicates"],
        seed=s["seed"],
        alpha=s["alpha"],
    )
    name = f"icer_{s['i']}" if s.get("j") is None else f"icer_{s['i']}_minus_{s['j']}"
    write_csv(
        s["out"], config,
        ["statistic", "estimate", "ci_lower", "ci_upper", "alpha",
         "n_replicates", "n_degenerate"],
        [[name, point, boot.lower, boot.upper, boot.alpha,
          boot.n_replicates, boot.n_degenerate]],
    )


RUNNERS = {
    "simulate": _run_simulate,
    "truth": _run_truth,
    "estimate": _run_estimate,
    "icer-table": _run_icer_table,
    "contrast": _run_contrast,
    "frontier": _run_frontier,
    "plot": _run_plot,
    "mc-study": _run_mc_study,
    "bootstrap": _run_bootstrap,
}

RUNTIME_ERRORS = (
    CliError,
    DegenerateDenominator,
    TooManyDegenerate,
    EmptyFrontier,
    ZeroSupport,
    SeparationDetected,
    RankDeficient,
    ValueError,
)


def main(argv: Sequence[str] | None = None) -> int:
    args = list(sys.argv[1:] if argv is None else argv)
    try:
        config = parse_and_validate(args)
    except UsageError as err:
        print(f"usage error: {err}", file=sys.stderr)
        return 2
    except SystemExit as err:  # argparse --help / bad flag
        return int(err.code or 0)
    for key in config.overridden:
        print(f"note: config key {key!r} overridden by flag", file=sys.stderr)
    try:
        RUNNERS[config.subcommand](config)
    except RUNTIME_ERRORS as err:
        message = str(err).replace('"', "'")
        print(
            f'error kind={type(err).__name__} subcommand={config.subcommand} '
            f'message="{message}"',
            file=sys.stderr,
        )
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
