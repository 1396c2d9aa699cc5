"""Command-line front end.

Subcommands: simulate | estimate | diagnose | study | mdi. Data files are
comma-separated with a header row and no index column; structured results
are JSON with sorted keys. Exit codes: 0 success, 1 usage error, 2 data
error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys

import numpy as np

from . import __version__
from .diagnostics import order_by_volatility
from .estimators import LagSets, amuse, gsobi, pvc, sobi, vsobi
from .exceptions import (
    ConvergenceError,
    GsobiError,
    ModelFitError,
    SingularMatrixError,
    ValidationError,
)
from .metrics import mdi as mdi_index
from .metrics import scaled_mdi
from .modelfit import garch11_fit
from .sim import ArmaParams, ComponentSpec, GarchParams, SourceSpec, armagarch_simulate, mix
from .study import MethodSpec, StudyConfig, builtin_components, run_study

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERICAL = 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


class CsvError(ValidationError):
    pass


def read_data_csv(path) -> tuple[np.ndarray, list[str]]:
    """Read an n x p numeric CSV; a non-numeric first row is the header.

    Ragged rows and non-numeric or empty cells raise ``CsvError`` naming
    the offending row and column (1-based, header included).
    """
    rows: list[list[float]] = []
    header: list[str] = []
    width = None
    with open(path, newline="") as fh:
        for lineno, cells in enumerate(csv.reader(fh), start=1):
            if not cells:
                continue
            if width is None:
                width = len(cells)
                try:
                    rows.append([float(c) for c in cells])
                except ValueError:
                    header = [c.strip() for c in cells]
                    continue
                continue
            if len(cells) != width:
                raise CsvError(
                    f"{path}: row {lineno} has {len(cells)} cells, expected {width}"
                )
            parsed = []
            for col, cell in enumerate(cells, start=1):
                try:
                    parsed.append(float(cell))
                except ValueError:
                    raise CsvError(
                        f"{path}: non-numeric cell at row {lineno}, column {col}: {cell!r}"
                    ) from None
            rows.append(parsed)
    if not rows:
        raise CsvError(f"{path}: no numeric data rows")
    data = np.asarray(rows, dtype=float)
    if not np.all(np.isfinite(data)):
        bad = np.argwhere(~np.isfinite(data))[0]
        raise CsvError(f"{path}: non-finite value at data row {bad[0] + 1}, column {bad[1] + 1}")
    return data, header


def read_matrix_csv(path) -> np.ndarray:
    data, _ = read_data_csv(path)
    return data


def write_csv(path, data: np.ndarray, header: list[str]) -> None:
    data = np.atleast_2d(np.asarray(data, dtype=float))
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in data:
            writer.writerow([repr(float(v)) for v in row])


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    raise TypeError(f"not JSON serializable: {type(obj)}")


def write_json(path, payload) -> None:
    text = json.dumps(payload, indent=2, sort_keys=True, default=_json_default)
    if path == "-":
        sys.stdout.write(text + "\n")
    else:
        with open(path, "w") as fh:
            fh.write(text + "\n")


def _parse_lags(text: str) -> tuple[int, ...]:
    """Parse lag lists like ``1,2,3`` or ranges like ``1-12``."""
    out: list[int] = []
    for token in text.split(","):
        token = token.strip()
        if "-" in token[1:]:
            lo, hi = token.split("-", 1)
            out.extend(range(int(lo), int(hi) + 1))
        elif token:
            out.append(int(token))
    if not out:
        raise _UsageError(f"could not parse lag set from {text!r}")
    return tuple(out)


def _component_from_dict(entry: dict, where: str) -> ComponentSpec:
    arma = garch = None
    if not isinstance(entry, dict):
        raise ValidationError(f"{where}: component spec must be an object")
    unknown = set(entry) - {"arma", "garch"}
    if unknown:
        raise ValidationError(f"{where}: unknown component keys {sorted(unknown)}")
    if "arma" in entry and entry["arma"] is not None:
        arma = ArmaParams(
            phi=tuple(entry["arma"].get("phi", ())),
            theta=tuple(entry["arma"].get("theta", ())),
        )
    if "garch" in entry and entry["garch"] is not None:
        garch = GarchParams(
            alpha=float(entry["garch"]["alpha"]),
            beta=float(entry["garch"]["beta"]),
            omega=float(entry["garch"]["omega"]),
        )
    return ComponentSpec(arma=arma, garch=garch)


def _load_source_spec(args) -> SourceSpec:
    if args.spec is not None:
        with open(args.spec) as fh:
            raw = json.load(fh)
        components = tuple(
            _component_from_dict(c, f"{args.spec} component {i + 1}")
            for i, c in enumerate(raw.get("components", []))
        )
        n = args.n if args.n is not None else int(raw.get("n", 0))
        seed = args.seed if args.seed is not None else int(raw.get("seed", 0))
        burn_in = args.burn_in if args.burn_in is not None else int(raw.get("burn_in", 2000))
    elif args.model is not None:
        components = builtin_components(args.model)
        if args.n is None:
            raise _UsageError("--n is required with --model")
        n = args.n
        seed = args.seed if args.seed is not None else 0
        burn_in = args.burn_in if args.burn_in is not None else 2000
    else:
        raise _UsageError("one of --spec or --model is required")
    return SourceSpec(components=components, n=n, burn_in=burn_in, seed=seed)


def _cmd_simulate(args) -> int:
    spec = _load_source_spec(args)
    S = armagarch_simulate(spec)
    mixed = False
    if args.mix is not None and args.mix != "identity":
        S = mix(S, read_matrix_csv(args.mix))
        mixed = True
    prefix = "x" if mixed else "s"
    write_csv(args.out, S, [f"{prefix}{j + 1}" for j in range(S.shape[1])])
    return EXIT_OK


_ESTIMATE_DEFAULTS = {"b": 0.9, "lags1": tuple(range(1, 13)), "lags2": (1, 2, 3), "m": 5, "tau": 1}


def _cmd_estimate(args) -> int:
    X, _ = read_data_csv(args.input)
    method = args.method
    b = args.b if args.b is not None else _ESTIMATE_DEFAULTS["b"]
    lags1 = _parse_lags(args.lags1) if args.lags1 else _ESTIMATE_DEFAULTS["lags1"]
    lags2 = _parse_lags(args.lags2) if args.lags2 else _ESTIMATE_DEFAULTS["lags2"]
    m = args.m if args.m is not None else _ESTIMATE_DEFAULTS["m"]
    tau = args.tau if args.tau is not None else _ESTIMATE_DEFAULTS["tau"]
    if method == "amuse":
        est = amuse(X, lag=tau)
        params = {"tau": tau}
    elif method == "sobi":
        est = sobi(X, lags=lags1)
        params = {"lags": list(lags1)}
    elif method == "vsobi":
        est = vsobi(X, lags=lags2, seed=args.seed)
        params = {"lags": list(lags2), "seed": args.seed}
    elif method == "pvc":
        est = pvc(X, m=m)
        params = {"m": m}
    else:
        est = gsobi(X, LagSets(t1=lags1, t2=lags2, b=b), seed=args.seed)
        params = {"b": b, "lags1": list(lags1), "lags2": list(lags2), "seed": args.seed}
    if args.out_components:
        comps = est.transform(X)
        write_csv(args.out_components, comps, [f"s{j + 1}" for j in range(comps.shape[1])])
    payload = {
        "method": est.method,
        "parameters": params,
        "unmixing": est.gamma,
        "mean": est.mean,
        "iterations": est.iterations,
        "converged": est.converged,
        "criterion": est.criterion,
        "eigenvalues": est.eigenvalues,
        "near_degenerate": est.near_degenerate,
    }
    write_json(args.out_unmixing or "-", payload)
    return EXIT_OK


def _cmd_diagnose(args) -> int:
    X, _ = read_data_csv(args.input)
    lags = _parse_lags(args.lags)
    result = order_by_volatility(X, lags, level=args.level)
    components = []
    volatility = None
    for report in result.reports:
        entry = {
            "component": report.index + 1,
            "L": report.linear_test.statistic,
            "L_p_value": report.linear_test.p_value,
            "arma_order": list(report.arma_order) if report.arma_order else None,
            "arma_phi": list(report.arma_params.phi) if report.arma_params else None,
            "arma_theta": list(report.arma_params.theta) if report.arma_params else None,
            "Q": report.quadratic_test.statistic,
            "Q_p_value": report.quadratic_test.p_value,
            "volatility_criterion": report.volatility_criterion,
            "flags": list(report.flags),
        }
        if report.quadratic_test.p_value < args.level or args.garch_all:
            try:
                fit = garch11_fit(X[:, report.index])
                entry["garch"] = {
                    "omega": fit.params.omega,
                    "alpha": fit.params.alpha,
                    "beta": fit.params.beta,
                    "loglik": fit.loglik,
                    "converged": fit.converged,
                    "flags": list(fit.flags),
                }
                if volatility is None:
                    volatility = np.full(X.shape, np.nan)
                volatility[:, report.index] = fit.volatility
            except GsobiError as exc:
                entry["garch"] = None
                entry["flags"] = entry["flags"] + [f"garch fit failed: {exc}"]
        else:
            entry["garch"] = None
        components.append(entry)
    payload = {
        "lags": list(lags),
        "level": args.level,
        "order": [j + 1 for j in result.order],
        "components": components,
    }
    write_json(args.out or "-", payload)
    if args.order and args.out_components:
        write_csv(
            args.out_components,
            X[:, list(result.order)],
            [f"s{j + 1}" for j in result.order],
        )
    if args.order and args.out_volatility and volatility is not None:
        write_csv(
            args.out_volatility,
            volatility[:, list(result.order)],
            [f"sigma{j + 1}" for j in result.order],
        )
    return EXIT_OK


_STUDY_SCHEMA = {
    "type": "object",
    "required": ["model", "sample_sizes", "replicates", "methods"],
    "additionalProperties": False,
    "properties": {
        "model": {
            "oneOf": [
                {"enum": ["i", "ii", "iii", "iv"]},
                {"type": "object",
                 "required": ["components"],
                 "additionalProperties": False,
                 "properties": {"components": {"type": "array", "minItems": 1}}},
            ]
        },
        "sample_sizes": {"type": "array", "minItems": 1,
                         "items": {"type": "integer", "minimum": 100}},
        "replicates": {"type": "integer", "minimum": 1},
        "methods": {"type": "array", "minItems": 1, "items": {"type": "object"}},
        "seed": {"type": "integer", "minimum": 0},
        "burn_in": {"type": "integer", "minimum": 0},
        "tests": {"type": "boolean"},
        "test_lags_linear": {"type": "array", "items": {"type": "integer", "minimum": 1}},
        "test_lags_quadratic": {"type": "array", "items": {"type": "integer", "minimum": 1}},
        "level": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "keep_replicates": {"type": "boolean"},
        "output": {"type": "string"},
        "output_csv": {"type": "string"},
    },
}

_METHOD_KEYS = ("method", "b", "lags1", "lags2", "lags", "m", "tau")


def load_study_config(path) -> tuple[StudyConfig, dict]:
    """Parse and schema-validate a study configuration file."""
    import jsonschema

    with open(path) as fh:
        raw = json.load(fh)
    try:
        jsonschema.validate(raw, _STUDY_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise ValidationError(f"{path}: invalid study config: {exc.message}") from None
    model = raw["model"]
    if isinstance(model, dict):
        model = tuple(
            _component_from_dict(c, f"{path} component {i + 1}")
            for i, c in enumerate(model["components"])
        )
    methods = []
    for i, entry in enumerate(raw["methods"], start=1):
        unknown = set(entry) - set(_METHOD_KEYS)
        if unknown:
            raise ValidationError(f"{path}: method {i} has unknown keys {sorted(unknown)}")
        if "method" not in entry:
            raise ValidationError(f"{path}: method {i} is missing the 'method' key")
        methods.append(MethodSpec(**entry))
    config = StudyConfig(
        model=model,
        sample_sizes=tuple(raw["sample_sizes"]),
        replicates=int(raw["replicates"]),
        methods=tuple(methods),
        seed=int(raw.get("seed", 0)),
        burn_in=int(raw.get("burn_in", 2000)),
        tests=bool(raw.get("tests", True)),
        test_lags_linear=tuple(raw.get("test_lags_linear", (1, 2, 3))),
        test_lags_quadratic=tuple(raw.get("test_lags_quadratic", (1, 2, 3))),
        level=float(raw.get("level", 0.05)),
        keep_replicates=bool(raw.get("keep_replicates", False)),
    )
    return config, raw


def config_metadata(config: StudyConfig) -> dict:
    """Resolved configuration with explicit defaults, for output metadata."""
    if isinstance(config.model, str):
        model = config.model
    else:
        model = [
            {
                "arma": {"phi": list(c.arma.phi), "theta": list(c.arma.theta)} if c.arma else None,
                "garch": {"alpha": c.garch.alpha, "beta": c.garch.beta, "omega": c.garch.omega}
                if c.garch else None,
            }
            for c in config.model
        ]
    return {
        "model": model,
        "sample_sizes": list(config.sample_sizes),
        "replicates": config.replicates,
        "methods": [
            {k: (list(v) if isinstance(v, tuple) else v)
             for k, v in vars(m).items() if v is not None}
            for m in config.methods
        ],
        "seed": config.seed,
        "burn_in": config.burn_in,
        "tests": config.tests,
        "test_lags_linear": list(config.test_lags_linear),
        "test_lags_quadratic": list(config.test_lags_quadratic),
        "level": config.level,
        "keep_replicates": config.keep_replicates,
    }


_CSV_RATE_COLUMNS = ("reject_l_modified", "reject_l_classical", "reject_q")


def study_records_csv_rows(records, p_max: int) -> tuple[list[str], list[list]]:
    header = ["model", "n", "method", "replicates", "failures",
              "mean_mdi", "mean_scaled_mdi", "convergence_rate", "ordering_correct"]
    for name in _CSV_RATE_COLUMNS:
        header.extend(f"{name}_s{j + 1}" for j in range(p_max))
    rows = []
    for rec in records:
        row = [rec.get(k, "") for k in header[:9]]
        for name in _CSV_RATE_COLUMNS:
            rates = rec.get(name, [])
            row.extend(list(rates) + [""] * (p_max - len(rates)))
        rows.append(["" if v is None else v for v in row])
    return header, rows


def _cmd_study(args) -> int:
    config, raw = load_study_config(args.config)
    result = run_study(config, workers=args.workers)
    payload = {
        "config": config_metadata(config),
        "results": list(result.records),
    }
    if config.keep_replicates:
        payload["replicates"] = list(result.replicate_records)
    out_json = args.out_json or raw.get("output") or "-"
    write_json(out_json, payload)
    out_csv = args.out_csv or raw.get("output_csv")
    if out_csv:
        p_max = max(rec["p"] for rec in result.records)
        header, rows = study_records_csv_rows(result.records, p_max)
        with open(out_csv, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            writer.writerows(rows)
    return EXIT_OK


def _cmd_mdi(args) -> int:
    if args.gamma.endswith(".json"):
        with open(args.gamma) as fh:
            gamma = np.asarray(json.load(fh)["unmixing"], dtype=float)
    else:
        gamma = read_matrix_csv(args.gamma)
    omega = read_matrix_csv(args.omega) if args.omega else np.eye(gamma.shape[0])
    gain = gamma @ omega
    payload = {"mdi": mdi_index(gain)}
    if args.n is not None:
        payload["scaled_mdi"] = scaled_mdi(gain, args.n)
    write_json("-", payload)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="gsobi", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate ARMA-GARCH sources to CSV")
    p.add_argument("--spec", help="JSON source spec file")
    p.add_argument("--model", choices=["i", "ii", "iii", "iv"], help="built-in model")
    p.add_argument("--n", type=int, help="series length")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--burn-in", type=int, default=None, dest="burn_in")
    p.add_argument("--mix", help="p x p mixing matrix CSV, or 'identity'")
    p.add_argument("--out", required=True, help="output CSV path")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("estimate", help="estimate an unmixing matrix from CSV data")
    p.add_argument("input", help="n x p CSV data file")
    p.add_argument("--method", choices=["amuse", "sobi", "vsobi", "gsobi", "pvc"],
                   default="gsobi")
    p.add_argument("--b", type=float, default=None, help="linear-part weight (gsobi)")
    p.add_argument("--lags1", default=None, help="linear lags, e.g. 1-12 (default)")
    p.add_argument("--lags2", default=None, help="quadratic lags, e.g. 1,2,3 (default)")
    p.add_argument("--m", type=int, default=None, help="max lag for pvc (default 5)")
    p.add_argument("--tau", type=int, default=None, help="lag for amuse (default 1)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-components", dest="out_components", help="component CSV path")
    p.add_argument("--out-unmixing", dest="out_unmixing", help="JSON output path (default stdout)")
    p.set_defaults(func=_cmd_estimate)

    p = sub.add_parser("diagnose", help="test components and order by volatility")
    p.add_argument("input", help="n x p CSV of component series")
    p.add_argument("--lags", default="1-5", help="test lags (default 1-5)")
    p.add_argument("--level", type=float, default=0.05)
    p.add_argument("--order", action="store_true",
                   help="write reordered components / volatility CSVs")
    p.add_argument("--garch-all", action="store_true", dest="garch_all",
                   help="fit GARCH(1,1) to every component")
    p.add_argument("--out", help="JSON report path (default stdout)")
    p.add_argument("--out-components", dest="out_components")
    p.add_argument("--out-volatility", dest="out_volatility")
    p.set_defaults(func=_cmd_diagnose)

    p = sub.add_parser("study", help="run a replicated simulation study")
    p.add_argument("config", help="JSON study configuration")
    p.add_argument("--workers", type=int, default=None,
                   help="process count (default from GSOBI_WORKERS or 1)")
    p.add_argument("--out-json", dest="out_json")
    p.add_argument("--out-csv", dest="out_csv")
    p.set_defaults(func=_cmd_study)

    p = sub.add_parser("mdi", help="score an estimate against a known mixing matrix")
    p.add_argument("--gamma", required=True,
                   help="unmixing matrix: CSV, or JSON from 'estimate'")
    p.add_argument("--omega", help="true mixing matrix CSV (default identity)")
    p.add_argument("--n", type=int, help="sample size for the scaled index")
    p.set_defaults(func=_cmd_mdi)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (CsvError, ValidationError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (SingularMatrixError, ConvergenceError, ModelFitError, GsobiError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
