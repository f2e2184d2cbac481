"""Command line front-end: ``levyito simulate|verify|recover``.

Every command reads an experiment document (JSON, schema
``levyito-experiment/1``), writes its artifacts into an output directory with
atomic renames and records the seed, the triplet hash and the tool version in
``metadata.json``. Identical inputs give byte-identical files.

Exit codes: 0 pass, 1 check failure, 2 inconclusive, 64 usage, 65 invalid data.
"""
import argparse
import dataclasses
import hashlib
import io
import json
import math
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import __version__
from .measure import CharacteristicExponent, InvalidExponentError, InvalidTripletError, NonIntegrableError, check_triplet
from .recover import RecoveryConfig, compare_to_truth, recover_triplet
from .serialize import SchemaError, dumps, triplet_from_dict, triplet_hash, triplet_to_dict
from .simulate import SimConfig, simulate_paths
from .verify import CHECK_NAMES, run_battery

EXIT_PASS = 0
EXIT_FAIL = 1
EXIT_INCONCLUSIVE = 2
EXIT_USAGE = 64
EXIT_DATA = 65

EXPERIMENT_SCHEMA = "levyito-experiment/1"
RUN_SCHEMA = "levyito-run/1"
TERMINAL_MODE_THRESHOLD = 100
_CONFIG_KEYS = {"schema", "triplet", "simulation", "replicates", "seed", "checks", "output", "output_mode", "recovery"}
_RECOVERY_KEYS = {"psi_table", "config"}
_OUTPUT_MODES = ("auto", "paths", "terminal")


class CliError(Exception):
    """Abort with ``code`` and ``message`` on stderr."""

    def __init__(self, code, message):
        super().__init__(message)
        self.code = code


def _usage(msg):
    return CliError(EXIT_USAGE, msg)


def _data(msg):
    return CliError(EXIT_DATA, msg)


# ---------------------------------------------------------------------------
# experiment documents
# ---------------------------------------------------------------------------

@dataclasses.dataclass(frozen=True)
class ExperimentConfig:
    """A validated experiment document with command line overrides applied."""

    triplet: object
    triplet_doc: dict
    sim: SimConfig
    replicates: int
    seed: int
    checks: tuple
    controls: tuple
    output: Path
    output_mode: str
    psi_table: Path = None
    recovery: RecoveryConfig = RecoveryConfig()
    doc: dict = None

    @property
    def config_hash(self):
        return hashlib.sha256(dumps(self.doc).encode()).hexdigest()


def _parse_seed(value):
    try:
        seed = int(value)
    except (TypeError, ValueError):
        raise _usage(f"seed must be an integer, got {value!r}") from None
    if isinstance(value, bool) or not 0 <= seed < 2**64:
        raise _usage("seed must be an unsigned 64-bit integer")
    return seed


def parse_checks(spec):
    """``all``, ``controls``, or names (optionally ``name[control]``).

    Returns ``(checks, controls)``: names run as checks and names run as
    negative controls.
    """
    tokens = spec.split(",") if isinstance(spec, str) else list(spec)
    checks, controls = [], []
    for tok in (str(t).strip() for t in tokens):
        if tok == "all":
            checks += CHECK_NAMES
        elif tok == "controls":
            controls += CHECK_NAMES
        elif tok.endswith("[control]") and tok[:-9] in CHECK_NAMES:
            controls.append(tok[:-9])
        elif tok in CHECK_NAMES:
            checks.append(tok)
        else:
            raise _usage(f"unknown check {tok!r}; choose from {', '.join(CHECK_NAMES)}, all, controls")
    dedup = lambda xs: tuple(dict.fromkeys(xs))
    return dedup(checks), dedup(controls)


def _read_json(path, what):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise _usage(f"cannot read {what} {path}: {exc.strerror}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise _data(f"{what} {path} is not valid JSON: {exc}") from None


def _sim_config(doc):
    if not isinstance(doc, dict):
        raise _usage("'simulation' must be an object")
    names = {f.name for f in dataclasses.fields(SimConfig)}
    unknown = set(doc) - names
    if unknown:
        raise _usage(f"unknown simulation fields: {sorted(unknown)}")
    try:
        return SimConfig(**doc)
    except (TypeError, ValueError) as exc:
        raise _usage(f"bad simulation settings: {exc}") from None


def _recovery_config(doc):
    names = {f.name for f in dataclasses.fields(RecoveryConfig)}
    unknown = set(doc) - names
    if unknown:
        raise _usage(f"unknown recovery config fields: {sorted(unknown)}")
    try:
        return RecoveryConfig(**doc)
    except (TypeError, ValueError) as exc:
        raise _usage(f"bad recovery settings: {exc}") from None


def load_experiment(path, seed=None, out=None, checks=None, replicates=None):
    """Read and validate an experiment document; flags override its fields.

    Relative file names inside the document are resolved against the
    document's directory.
    """
    doc = _read_json(path, "config")
    if not isinstance(doc, dict):
        raise _usage("config must be a JSON object")
    if doc.get("schema") != EXPERIMENT_SCHEMA:
        raise _usage(f"config schema must be {EXPERIMENT_SCHEMA!r}, got {doc.get('schema')!r}")
    unknown = set(doc) - _CONFIG_KEYS
    if unknown:
        raise _usage(f"unknown config fields: {sorted(unknown)}")
    base = Path(path).resolve().parent

    triplet_doc = doc.get("triplet")
    if triplet_doc is None:
        raise _usage("config needs a 'triplet' (a file name or an inline triplet document)")
    if isinstance(triplet_doc, str):
        tpath = base / triplet_doc
        if not tpath.is_file():
            raise _usage(f"triplet file {tpath} does not exist")
        triplet_doc = _read_json(tpath, "triplet document")
    try:
        triplet = triplet_from_dict(triplet_doc)
        check_triplet(triplet)
    except (SchemaError, InvalidTripletError, NonIntegrableError) as exc:
        raise _data(f"invalid triplet: {exc}") from None

    sim = _sim_config(doc.get("simulation", {}))
    n = replicates if replicates is not None else doc.get("replicates", 1)
    if isinstance(n, bool) or not isinstance(n, int) or n < 1:
        raise _usage("replicates must be an integer >= 1")
    seed = _parse_seed(seed if seed is not None else doc.get("seed", 0))
    sel, ctl = parse_checks(checks if checks is not None else doc.get("checks", "all"))
    output = out if out is not None else doc.get("output")
    if output is None:
        raise _usage("no output directory: pass --out or set 'output'")
    output = Path(output) if out is not None else base / output
    mode = doc.get("output_mode", "auto")
    if mode not in _OUTPUT_MODES:
        raise _usage(f"output_mode must be one of {_OUTPUT_MODES}")

    rec = doc.get("recovery", {})
    if not isinstance(rec, dict) or set(rec) - _RECOVERY_KEYS:
        raise _usage(f"'recovery' accepts only the fields {sorted(_RECOVERY_KEYS)}")
    table = rec.get("psi_table")
    if table is not None:
        table = base / table
        if not table.is_file():
            raise _usage(f"psi table {table} does not exist")
    rcfg = _recovery_config(rec.get("config", {}))

    effective = dict(doc, replicates=n, seed=seed, checks=list(sel) + [f"{c}[control]" for c in ctl])
    effective["triplet"] = triplet_doc
    effective.pop("output", None)
    return ExperimentConfig(triplet, triplet_doc, sim, n, seed, sel, ctl, output, mode, table, rcfg, effective)


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------

def _fmt(x):
    return repr(float(x))


def csv_text(header, rows):
    """CSV with shortest round-trip float formatting."""
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(_fmt(v) if not isinstance(v, (int, np.integer)) else str(int(v)) for v in row) + "\n")
    return buf.getvalue()


def write_atomic(path, text):
    """Write via a temporary file in the same directory and ``os.replace``."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _prepare_output(path):
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise _usage(f"cannot create output directory {path}: {exc.strerror}") from None
    if not os.access(path, os.W_OK):
        raise _usage(f"output directory {path} is not writable")


def _json_safe(obj):
    """Replace non-finite floats by ``None`` so the document stays strict JSON."""
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, np.generic):
        return _json_safe(obj.item())
    return obj


def _metadata(cfg, command, files, extra=None):
    meta = {
        "schema": RUN_SCHEMA,
        "command": command,
        "seed": cfg.seed,
        "triplet_sha256": triplet_hash(cfg.triplet),
        "config_sha256": cfg.config_hash,
        "version": __version__,
        "files": sorted(files),
    }
    meta.update(extra or {})
    return dumps(_json_safe(meta))


def _value_header(prefix, dim, first):
    return [first, prefix] + [f"{prefix}{k}" for k in range(2, dim + 1)]


def _simulate(cfg):
    try:
        return simulate_paths(cfg.triplet, cfg.sim, cfg.seed, cfg.replicates)
    except (InvalidTripletError, NonIntegrableError) as exc:
        raise _data(f"invalid triplet: {exc}") from None
    except ValueError as exc:
        raise _usage(str(exc)) from None


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_simulate(cfg, stdout=None):
    """Skeleton and jump CSVs per replicate, or one CSV of terminal values."""
    stdout = sys.stdout if stdout is None else stdout
    _prepare_output(cfg.output)
    batch = _simulate(cfg)
    mode = cfg.output_mode
    if mode == "auto":
        mode = "terminal" if cfg.replicates > TERMINAL_MODE_THRESHOLD else "paths"
    dim = batch.dim
    files = []
    if mode == "terminal":
        term = batch.terminal()
        rows = ([int(r)] + list(v) for r, v in zip(batch.replicates, term))
        write_atomic(cfg.output / "terminal.csv", csv_text(_value_header("value", dim, "replicate"), rows))
        files.append("terminal.csv")
    else:
        values = batch.values
        off = batch.offsets
        for i, rep in enumerate(batch.replicates):
            name = f"path_{int(rep):06d}.csv"
            rows = ([t] + list(v) for t, v in zip(batch.grid, values[i]))
            write_atomic(cfg.output / name, csv_text(_value_header("value", dim, "t"), rows))
            jname = f"jumps_{int(rep):06d}.csv"
            a, b = off[i], off[i + 1]
            jrows = ([t] + list(s) for t, s in zip(batch.jump_times[a:b], batch.jump_sizes[a:b]))
            write_atomic(cfg.output / jname, csv_text(_value_header("jump_size", dim, "jump_time"), jrows))
            files += [name, jname]
    extra = {
        "replicates": cfg.replicates,
        "output_mode": mode,
        "epsilon": batch.epsilon,
        "omitted_variance_bound": batch.omitted_variance,
        "simulation": dataclasses.asdict(cfg.sim),
    }
    write_atomic(cfg.output / "metadata.json", _metadata(cfg, "simulate", files + ["metadata.json"], extra))
    print(f"wrote {len(files)} file(s) to {cfg.output} ({mode} mode, N={cfg.replicates})", file=stdout)
    return EXIT_PASS


def battery_exit_code(reports):
    """1 if any check failed, else 2 if any was inconclusive, else 0."""
    if any(r.status == "fail" for r in reports):
        return EXIT_FAIL
    if any(r.status == "inconclusive" for r in reports):
        return EXIT_INCONCLUSIVE
    return EXIT_PASS


def cmd_verify(cfg, stdout=None):
    """Run the selected checks on fresh replicates and write ``report.json``."""
    stdout = sys.stdout if stdout is None else stdout
    if not cfg.checks and not cfg.controls:
        raise _usage("no checks selected")
    _prepare_output(cfg.output)
    batch = _simulate(cfg)
    reports = []
    if cfg.checks:
        reports += run_battery(cfg.triplet, batch, cfg.checks)
    if cfg.controls:
        reports += run_battery(cfg.triplet, batch, cfg.controls, controls=True)
    for r in reports:
        print(r.summary(), file=stdout)
    doc = [_json_safe(r.to_dict()) for r in reports]
    write_atomic(cfg.output / "report.json", dumps(doc))
    code = battery_exit_code(reports)
    extra = {"replicates": cfg.replicates, "epsilon": batch.epsilon, "exit_code": code,
             "simulation": dataclasses.asdict(cfg.sim)}
    write_atomic(cfg.output / "metadata.json", _metadata(cfg, "verify", ["report.json", "metadata.json"], extra))
    return code


def read_psi_table(path):
    """A CSV with header ``u,re,im``."""
    try:
        arr = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    except (OSError, ValueError) as exc:
        raise _data(f"cannot read psi table {path}: {exc}") from None
    if arr.shape[1] != 3:
        raise _data("psi table needs the columns u,re,im")
    try:
        return CharacteristicExponent.tabulated(arr[:, 0], arr[:, 1] + 1j * arr[:, 2])
    except InvalidExponentError as exc:
        raise _data(str(exc)) from None


def cmd_recover(cfg, stdout=None):
    """Recover a triplet from an exponent; compare with the triplet when it is the source."""
    stdout = sys.stdout if stdout is None else stdout
    if cfg.triplet.dim != 1:
        raise _usage("recovery is one-dimensional; got a multidimensional triplet")
    _prepare_output(cfg.output)
    psi = read_psi_table(cfg.psi_table) if cfg.psi_table is not None else CharacteristicExponent.from_triplet(cfg.triplet)
    try:
        rec = recover_triplet(psi, cfg.recovery)
    except InvalidExponentError as exc:
        raise _data(str(exc)) from None
    except ValueError as exc:
        raise _data(f"invalid exponent: {exc}") from None
    est = rec.measure
    write_atomic(cfg.output / "recovered_triplet.json", dumps(triplet_to_dict(rec.to_triplet())))
    write_atomic(cfg.output / "measure.csv", csv_text(["x", "rho", "nu"], zip(est.x, est.rho, est.nu)))
    files = ["recovered_triplet.json", "measure.csv"]
    report = compare_to_truth(rec, cfg.triplet)
    write_atomic(cfg.output / "roundtrip.json", dumps([_json_safe(report.to_dict())]))
    files.append("roundtrip.json")
    for c in report.components:
        print(f"{'PASS' if c.passed else 'FAIL':5s} {c.name}: recovered={c.statistic:.6g} true={c.expected:.6g} "
              f"tolerance={c.tolerance:.3g}", file=stdout)
    for flag in rec.flags:
        print(f"FLAG  {flag}", file=stdout)
    extra = {
        "source": "psi_table" if cfg.psi_table is not None else "triplet",
        "sigma2": rec.sigma2,
        "sigma2_error": rec.sigma2_error,
        "drift": rec.drift,
        "drift_error": rec.drift_error,
        "drift_check_gap": rec.drift_check_gap,
        "flags": list(rec.flags),
        "recovery_config": dataclasses.asdict(cfg.recovery),
    }
    write_atomic(cfg.output / "metadata.json", _metadata(cfg, "recover", files + ["metadata.json"], extra))
    return EXIT_PASS if report.passed else EXIT_FAIL


COMMANDS = {"simulate": cmd_simulate, "verify": cmd_verify, "recover": cmd_recover}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def build_parser():
    parser = _Parser(prog="levyito", description="Simulate, verify and recover Levy processes.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, fn in COMMANDS.items():
        p = sub.add_parser(name, help=fn.__doc__.splitlines()[0])
        p.add_argument("--config", required=True, help="experiment document (JSON)")
        p.add_argument("--seed", help="master seed (unsigned 64-bit)")
        p.add_argument("--out", help="output directory")
        p.add_argument("--checks", help="comma list of checks, 'all' or 'controls'")
        p.add_argument("--replicates", type=int, help="number of replicates N")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = load_experiment(args.config, args.seed, Path(args.out) if args.out else None,
                              args.checks, args.replicates)
        return COMMANDS[args.command](cfg)
    except CliError as exc:
        if exc.code == EXIT_USAGE:
            build_parser().print_usage(sys.stderr)
        print(f"levyito: error: {exc}", file=sys.stderr)
        return exc.code
