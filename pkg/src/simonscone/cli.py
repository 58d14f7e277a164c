"""Batch front end.

Usage::

    simonscone <command> [--config run.json] [--out-dir DIR] [--verbose]

Commands are ``spectrum``, ``sweep``, ``calibrate``, ``compare`` and
``compact-analog``. The run configuration is a single JSON document checked
against ``config_schema.json`` (shipped with the package); omitted keys take
the schema defaults. Every run writes ``report.json`` and one CSV per table.

Exit codes: 0 all checks passed, 1 a check failed, 2 invalid configuration,
3 I/O failure.
"""
from __future__ import annotations

import argparse
import copy
import json
import logging
import math
import os
import sys
import tempfile
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

import jsonschema
import numpy as np

from .errors import InvalidInputError, SimonsConeError
from .geometry import (DomainParams, PerturbationSpec, cone_region, make_competitor,
                       random_perturbation)
from .spectral import (AngularMode, RadialProblem, angular_eigenvalue,
                       compact_analog_eigenvalue, compact_analog_fd,
                       compact_analog_negative_eigenvalue, principal_eigenvalue,
                       radial_eigensolve_t, radial_eigensolve_z, stability_sweep,
                       zonal_sphere_spectrum)

log = logging.getLogger("simonscone")

COMMANDS = ("spectrum", "sweep", "calibrate", "compare", "compact-analog")
EXIT_OK, EXIT_CHECK, EXIT_CONFIG, EXIT_IO = 0, 1, 2, 3


class ConfigError(Exception):
    """Configuration rejected; ``violations`` lists readable messages."""

    def __init__(self, violations):
        super().__init__("; ".join(violations))
        self.violations = list(violations)


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

def load_schema() -> dict:
    text = resources.files("simonscone").joinpath("config_schema.json").read_text("utf-8")
    return json.loads(text)


def _defaults(schema: dict) -> dict:
    out = {}
    for key, sub in schema.get("properties", {}).items():
        if "default" in sub:
            out[key] = copy.deepcopy(sub["default"])
        elif sub.get("type") == "object":
            out[key] = _defaults(sub)
    return out


def _merge(base: dict, extra: dict) -> dict:
    out = dict(base)
    for key, value in extra.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = value
    return out


def _describe(err: jsonschema.ValidationError) -> str:
    name = ".".join(str(p) for p in err.absolute_path) or "config"
    kind, limit = err.validator, err.validator_value
    if kind == "exclusiveMinimum":
        return f"{name} must be positive" if limit == 0 else f"{name} must be greater than {limit}"
    if kind == "minimum":
        return f"{name} must be at least {limit}"
    if kind == "maximum":
        return f"{name} must be at most {limit}"
    if kind == "minItems":
        return f"{name} must not be empty"
    if kind == "enum":
        return f"{name} must be one of {', '.join(map(str, limit))}"
    if kind == "type":
        return f"{name} must be of type {limit}"
    if kind == "additionalProperties":
        return f"{name}: {err.message}"
    return f"{name}: {err.message}"


@dataclass
class RunConfig:
    command: str
    params: DomainParams
    solver: RadialProblem
    K_values: list
    kappa_values: list
    seeds: list
    samples: int
    raw: dict = field(repr=False, default_factory=dict)


def validate_config(raw_text: str | None, command: str | None = None) -> RunConfig:
    """Parse and check a JSON configuration.

    Raises
    ------
    ConfigError
        With every violation found, phrased for a reader of the config file.
    """
    schema = load_schema()
    if raw_text is None or not raw_text.strip():
        data = {}
    else:
        try:
            data = json.loads(raw_text)
        except json.JSONDecodeError as exc:
            raise ConfigError([f"config is not valid JSON: {exc}"]) from None
    if not isinstance(data, dict):
        raise ConfigError(["config must be a JSON object"])
    validator = jsonschema.Draft202012Validator(schema)
    errors = sorted(validator.iter_errors(data), key=lambda e: list(map(str, e.absolute_path)))
    violations = [_describe(e) for e in errors]
    if violations:
        raise ConfigError(violations)

    resolved = _merge(_defaults(schema), data)
    cmd = command or resolved.get("command")
    if cmd is None:
        raise ConfigError(["no command given"])
    if "command" in data and command and data["command"] != command:
        raise ConfigError([f"command {command!r} does not match config command {data['command']!r}"])
    resolved["command"] = cmd

    p, s = resolved["params"], resolved["solver"]
    try:
        params = DomainParams(K=p["K"], upsilon=p["upsilon"], chi=p["chi"])
    except (InvalidInputError, ValueError) as exc:
        violations.append(f"params: {exc}")
    try:
        solver = RadialProblem(K=p["K"], Z=s["Z"], step=s["step"],
                               coordinate=s["coordinate"], boundary=s["boundary"])
    except (InvalidInputError, ValueError) as exc:
        violations.append(f"solver: {exc}")
    if violations:
        raise ConfigError(violations)
    return RunConfig(cmd, params, solver, [float(k) for k in resolved["K_values"]],
                     [float(k) for k in resolved["kappa_values"]],
                     [int(x) for x in resolved["seeds"]], int(resolved["samples"]), resolved)


# ---------------------------------------------------------------------------
# Reports and CSV
# ---------------------------------------------------------------------------

@dataclass
class Table:
    name: str
    columns: list
    rows: list


@dataclass
class Report:
    command: str
    config: dict
    tables: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    checks: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    def to_json(self) -> dict:
        return {
            "command": self.command,
            "config": self.config,
            "summary": _jsonable(self.summary),
            "tables": {t.name: [dict(zip(t.columns, _jsonable(r))) for r in t.rows]
                       for t in self.tables},
            "checks": {k: bool(v) for k, v in self.checks.items()},
            "passed": self.passed,
            "timings": self.timings,
        }


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else str(x)
    return obj


def format_cell(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    if value is None:
        return ""
    return str(value)


def csv_text(table: Table) -> str:
    lines = [",".join(table.columns)]
    lines += [",".join(format_cell(v) for v in row) for row in table.rows]
    return "\n".join(lines) + "\n"


def emit_files(report: Report, out_dir: Path) -> list[Path]:
    """Write ``report.json`` and the CSV tables, all or nothing."""
    out_dir.mkdir(parents=True, exist_ok=True)
    payload = {f"{t.name}.csv": csv_text(t) for t in report.tables}
    payload["report.json"] = json.dumps(report.to_json(), indent=2, sort_keys=False) + "\n"
    staged = []
    try:
        for name, text in payload.items():
            fd, tmp = tempfile.mkstemp(prefix=f".{name}.", dir=out_dir)
            staged.append((tmp, out_dir / name))
            with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)
    except OSError:
        for tmp, _ in staged:
            Path(tmp).unlink(missing_ok=True)
        raise
    for tmp, final in staged:
        os.replace(tmp, final)
    return [final for _, final in staged]


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def _spectrum(cfg: RunConfig, rep: Report):
    prob = cfg.solver
    t0 = time.perf_counter()
    zres = radial_eigensolve_z(prob.with_coordinate("z"))
    tres = radial_eigensolve_t(prob.with_coordinate("t"))
    rep.timings["radial"] = time.perf_counter() - t0
    zonal = zonal_sphere_spectrum(6)
    rows = []
    for k in range(3):
        for l in range(k, 3):
            lam = angular_eigenvalue(AngularMode(k, l))
            rows.append([k, l, lam, zres.eigenvalue, lam + zres.eigenvalue])
    rep.tables.append(Table("spectrum", ["k", "l", "lambda", "delta1_fd", "mu"], rows))
    rep.tables.append(Table("zonal", ["k", "exact", "oracle"],
                            [[k, float(k * (k + 2)), zonal[k]] for k in range(6)]))
    rep.tables.append(Table("eigenfunction", ["z", "h"],
                            [[z, h] for z, h in zip(zres.grid, zres.eigenfunction)]))
    mu, _ = principal_eigenvalue(prob.K, AngularMode(), prob)
    rep.summary.update(delta1_z=zres.eigenvalue, delta1_t=tres.eigenvalue, mu1=mu,
                       residual_z=zres.residual, residual_t=tres.residual)
    rep.checks["residual"] = max(zres.residual, tres.residual) <= 1e-8
    rep.checks["t_z_agreement"] = abs(zres.eigenvalue - tres.eigenvalue) <= 1e-3
    rep.checks["zonal_oracle"] = bool(np.all(np.abs(zonal - [k * (k + 2) for k in range(6)]) <= 1e-3))


def _sweep(cfg: RunConfig, rep: Report):
    t0 = time.perf_counter()
    sweep = stability_sweep(cfg.K_values, cfg.solver)
    rep.timings["sweep"] = time.perf_counter() - t0
    rows = [[r.K, r.delta1_closed, r.delta1_fd, r.mu1_closed, r.mu1_fd, r.stable]
            for r in sweep.rows]
    rep.tables.append(Table("sweep", ["K", "delta1_closed", "delta1_fd", "mu1", "mu1_fd", "stable"],
                            rows))
    rep.summary.update(Z=sweep.Z, step=sweep.step, max_discrepancy=sweep.max_discrepancy,
                       max_residual=sweep.max_residual)
    rep.checks["solved"] = all(r.error is None for r in sweep.rows)
    rep.checks["formula_agreement"] = sweep.max_discrepancy <= 1e-2
    # flags are compared only away from the threshold, where the margin decides
    rep.checks["stability_agreement"] = all(
        r.stable == r.stable_fd for r in sweep.rows if abs(r.mu1_closed) > 1e-2)


def _calibrate(cfg: RunConfig, rep: Report):
    from .calibration import (build_calibration_field, divergence_residual,
                              gauss_green_check, interior_sample_grid, sign_band_check)
    t0 = time.perf_counter()
    fld = build_calibration_field()
    rep.timings["field"] = time.perf_counter() - t0
    t0 = time.perf_counter()
    band = sign_band_check(cfg.params, fld, n_samples=cfg.samples)
    gg = gauss_green_check(cone_region(cfg.params), fld, cfg.params)
    pts = interior_sample_grid()
    r1 = divergence_residual(pts, fld, 1e-3).max()
    r2 = divergence_residual(pts, fld, 5e-4).max()
    rep.timings["checks"] = time.perf_counter() - t0
    rep.tables.append(Table("signband", ["d", "flux_N_side", "flux_far_side"],
                            [list(r) for r in zip(band.d, band.flux_N_side, band.flux_far_side)]))
    rep.summary.update(center_value=band.center_value, d_safe=band.d_safe, d_crest=band.d_crest,
                       offending=band.offending, surface_area=gg.surface_area,
                       boundary_flux=gg.boundary_flux, gauss_green_discrepancy=gg.discrepancy,
                       divergence_residual=r1, divergence_ratio=r1 / r2)
    rep.checks["sign_center"] = band.center_ok
    rep.checks["sign_N_side"] = band.N_side_ok
    rep.checks["sign_far_side"] = band.far_side_ok
    rep.checks["gauss_green"] = gg.discrepancy <= 1e-4
    rep.checks["divergence"] = r1 <= 1e-3 and abs(r1 / r2 - 4) <= 0.5


def _compare(cfg: RunConfig, rep: Report):
    from .calibration import build_calibration_field, minimality_check
    fld = build_calibration_field()
    t0 = time.perf_counter()
    cols = ["seed", "area", "cone_area", "flux_lost", "flux_gained", "slack",
            "calibration_defect", "flux_identity_gap", "endpoint_distance", "in_regime", "passed"]
    rows = []
    cases = [(-1, PerturbationSpec())] + [(s, random_perturbation(s, cfg.params)) for s in cfg.seeds]
    ok_all = True
    for seed, spec in cases:
        try:
            curve = make_competitor(spec, cfg.params)
        except SimonsConeError as exc:
            log.warning("seed %s: competitor rejected (%s)", seed, exc)
            ok_all = False
            continue
        m = minimality_check(curve, cfg.params, fld)
        rows.append([seed, m.lhs, m.cone_area, m.flux_lost, m.flux_gained, m.slack,
                     m.calibration_defect, m.flux_identity_gap, m.endpoint_distance,
                     m.in_regime, bool(m.passed)])
    rep.timings["competitors"] = time.perf_counter() - t0
    rep.tables.append(Table("minimality", cols, rows))
    cone = [r for r in rows if r[0] == -1]
    others = [r for r in rows if r[0] != -1]
    rep.summary.update(n_competitors=len(others),
                       min_slack=min((r[5] for r in others), default=math.nan))
    rep.checks["competitors_built"] = ok_all
    rep.checks["cone_equality"] = bool(cone) and abs(cone[0][5]) <= 1e-6
    rep.checks["strict_minimality"] = all(r[5] > 0 and r[10] for r in others)


def _compact(cfg: RunConfig, rep: Report):
    rows = []
    for kappa in sorted(cfg.kappa_values):
        d = compact_analog_eigenvalue(kappa)
        asym = math.pi ** 2 * (1 + 2 / kappa)
        fd = compact_analog_fd(kappa)
        neg = compact_analog_negative_eigenvalue(kappa)
        rows.append([kappa, d, asym, d - asym, kappa * (d / math.pi ** 2 - 1),
                     fd[1], math.nan if neg is None else neg])
    rep.tables.append(Table("compact_analog",
                            ["kappa", "delta1", "asymptotic", "deviation", "first_order_coefficient",
                             "delta1_fd", "negative_eigenvalue"], rows))
    kap = np.array([r[0] for r in rows])
    coef = np.array([r[4] for r in rows])
    rep.checks["asymptotic_bound"] = all(abs(r[3]) <= 5 * math.pi ** 2 / r[0] ** 2 for r in rows)
    if len(rows) >= 2:
        # coefficient c(kappa) = 2 + b / kappa + ...; extrapolate linearly in 1/kappa
        fit = np.polyfit(1 / kap, coef, 1)
        rep.summary["fitted_coefficient"] = float(fit[1])
        rep.checks["first_order_coefficient"] = 1.9 <= fit[1] <= 2.1


DISPATCH = {"spectrum": _spectrum, "sweep": _sweep, "calibrate": _calibrate,
            "compare": _compare, "compact-analog": _compact}


def run(cfg: RunConfig) -> Report:
    rep = Report(cfg.command, cfg.raw)
    t0 = time.perf_counter()
    DISPATCH[cfg.command](cfg, rep)
    rep.timings["total"] = time.perf_counter() - t0
    return rep


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="simonscone",
                                 description="Numerical checks for the Simons cone in a bumped ball.")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", type=Path, help="JSON run configuration (defaults if omitted)")
    ap.add_argument("--out-dir", type=Path, default=Path("."), help="output directory")
    ap.add_argument("--verbose", action="store_true")
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    text = None
    if args.config is not None:
        try:
            text = args.config.read_text(encoding="utf-8")
        except OSError as exc:
            print(f"error: cannot read config: {exc}", file=sys.stderr)
            return EXIT_IO
    try:
        cfg = validate_config(text, args.command)
    except ConfigError as exc:
        for v in exc.violations:
            print(f"invalid config: {v}", file=sys.stderr)
        return EXIT_CONFIG
    log.info("running %s", cfg.command)
    try:
        rep = run(cfg)
    except SimonsConeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CHECK
    try:
        written = emit_files(rep, args.out_dir)
    except OSError as exc:
        print(f"error: cannot write outputs: {exc}", file=sys.stderr)
        return EXIT_IO
    for name, ok in rep.checks.items():
        log.info("%-24s %s", name, "pass" if ok else "FAIL")
    log.info("wrote %s", ", ".join(p.name for p in written))
    return EXIT_OK if rep.passed else EXIT_CHECK


if __name__ == "__main__":
    sys.exit(main())
