"""Command-line front end: spinprobe <field|sensitivity|optimize|sweep|verify>.

Configuration is a single JSON document (path or stdin) merged over
defaults that reproduce the reference NV parameter set; presets expand to
full configs for the bundled reference scenarios. Output is data only (CSV
or JSON) with full round-trip float precision; identical inputs produce
byte-identical output.

Exit codes: 0 success, 2 configuration error, 3 physics-domain error
(singular position, magic angle, zero signal, bad protocol), 4 numerical
non-convergence.
"""

from __future__ import annotations

import argparse
import copy
import csv
import io
import json
import math
import os
import sys

import numpy as np

from .errors import (ConfigError, InvalidProtocol, MagicAngle,
                     NoFeasiblePoint, QuadratureNoConvergence,
                     SingularPosition, ZeroSignal)
from .geometry import ColumnGeometry, CylinderGeometry
from .montecarlo import ESTIMATORS, McConfig, verify_uncertainty
from .optimize import (SHAPES, crossover_standoff, make_geometry,
                       optimize_geometry, sweep_standoff)
from .physics import (COUPLING_CONVENTIONS, PhysicalConstants,
                      dipole_angular_factor, dipole_coupling,
                      effective_field, spin_sign)
from .sensing import (EchoProtocol, ProbeSpinParams, ensemble_uncertainty,
                      optimal_interrogation_time, single_probe_uncertainty)

# Fields smaller than this print as exactly 0 in field tables.
FIELD_PRINT_FLOOR_T = 1e-18

BASE_CONFIG = {
    "constants": {
        "mu0_si": 1.25663706212e-6,
        "muB_J_per_T": 9.2740100783e-24,
        "g_e": 2.0028,
        "g_t": 2.0028,
        "hbar_J_s": 1.054571817e-34,
        "coupling_convention": "spin_half",
    },
    "T2_single_ms": 2.0,
    "T2_ens_us": 84.0,
    "rho_per_cm3": 6.7e16,
    "target_state_s": 1,
    "T_total_s": 1.0,
    "tI_s": None,
    "shape": "column",
    "standoff_um": 1.0,
    "geometry": None,
    "position_um": None,
    "positions_um": None,
    "sweep": {"start_um": 0.05, "stop_um": 3.0, "points": 30, "mode": "ratio"},
    "mc": {"shots": 300, "seed": 1, "estimator": "linearized",
           "spin_cap": 1_000_000, "field_bins": 10_000},
    "out": None,
    "format": None,
}

PRESETS = {
    "fig4": {"shape": "column", "standoff_um": 1.0},
    "fig7": {"shape": "cylinder", "standoff_um": 1.0},
    "fig5": {"shape": "column",
             "sweep": {"start_um": 0.05, "stop_um": 3.0, "points": 30,
                       "mode": "ratio"}},
    "fig8": {"shape": "cylinder",
             "sweep": {"start_um": 0.05, "stop_um": 3.0, "points": 30,
                       "mode": "ratio"}},
    "fig9": {"shape": "column", "T_total_s": 1.0,
             "sweep": {"start_um": 0.1, "stop_um": 2.0, "points": 30,
                       "mode": "absolute"}},
}

_GEOMETRY_KEYS = {
    "column": {"z_min_um", "z_max_um", "r_max_um"},
    "cylinder": {"r_min_um", "r_max_um", "z_max_um"},
}


def _merge(base: dict, overlay: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, value in overlay.items():
        where = f"{path}.{key}" if path else key
        if key not in base:
            raise ConfigError(f"unknown config key {where!r}")
        if isinstance(base[key], dict) and key not in ("geometry",):
            if not isinstance(value, dict):
                raise ConfigError(f"config key {where!r} must be an object")
            out[key] = _merge(base[key], value, where)
        else:
            out[key] = copy.deepcopy(value)
    return out


def _require_positive(cfg: dict, key: str, value) -> float:
    if not isinstance(value, (int, float)) or isinstance(value, bool) or value <= 0:
        raise ConfigError(f"config key {key!r} must be a positive number, "
                          f"got {value!r}")
    return float(value)


def _validate(cfg: dict) -> dict:
    for key in ("T2_single_ms", "T2_ens_us", "rho_per_cm3", "T_total_s",
                "standoff_um"):
        cfg[key] = _require_positive(cfg, key, cfg[key])
    if cfg["tI_s"] is not None:
        cfg["tI_s"] = _require_positive(cfg, "tI_s", cfg["tI_s"])
    if cfg["target_state_s"] not in (1, -1):
        raise ConfigError("config key 'target_state_s' must be 1 or -1")
    if cfg["shape"] not in SHAPES:
        raise ConfigError(f"config key 'shape' must be one of {SHAPES}")
    con = cfg["constants"]
    for key in ("mu0_si", "muB_J_per_T", "g_e", "hbar_J_s"):
        con[key] = _require_positive(cfg, f"constants.{key}", con[key])
    if not isinstance(con["g_t"], (int, float)) or con["g_t"] < 0:
        raise ConfigError("config key 'constants.g_t' must be non-negative")
    if con["coupling_convention"] not in COUPLING_CONVENTIONS:
        raise ConfigError("config key 'constants.coupling_convention' must be "
                          f"one of {COUPLING_CONVENTIONS}")
    sweep = cfg["sweep"]
    sweep["start_um"] = _require_positive(cfg, "sweep.start_um", sweep["start_um"])
    sweep["stop_um"] = _require_positive(cfg, "sweep.stop_um", sweep["stop_um"])
    if sweep["stop_um"] <= sweep["start_um"]:
        raise ConfigError("sweep.stop_um must exceed sweep.start_um")
    if not isinstance(sweep["points"], int) or sweep["points"] < 2:
        raise ConfigError("sweep.points must be an integer >= 2")
    if sweep["mode"] not in ("ratio", "absolute"):
        raise ConfigError("sweep.mode must be 'ratio' or 'absolute'")
    mc = cfg["mc"]
    if not isinstance(mc["shots"], int) or mc["shots"] < 100:
        raise ConfigError("mc.shots must be an integer >= 100")
    if not isinstance(mc["seed"], int) or mc["seed"] < 0:
        raise ConfigError("mc.seed must be a non-negative integer")
    if mc["estimator"] not in ESTIMATORS:
        raise ConfigError(f"mc.estimator must be one of {ESTIMATORS}")
    geom = cfg["geometry"]
    if geom is not None:
        if not isinstance(geom, dict):
            raise ConfigError("config key 'geometry' must be an object")
        keys = set(geom)
        if keys not in (_GEOMETRY_KEYS["column"], _GEOMETRY_KEYS["cylinder"]):
            raise ConfigError(
                "config key 'geometry' must carry exactly the keys "
                f"{sorted(_GEOMETRY_KEYS['column'])} (column) or "
                f"{sorted(_GEOMETRY_KEYS['cylinder'])} (cylinder)")
        for key, value in geom.items():
            geom[key] = _require_positive(cfg, f"geometry.{key}", value)
    for key in ("position_um",):
        if cfg[key] is not None and not _is_triple(cfg[key]):
            raise ConfigError(f"config key {key!r} must be a 3-element list")
    if cfg["positions_um"] is not None:
        if (not isinstance(cfg["positions_um"], list) or not cfg["positions_um"]
                or not all(_is_triple(p) for p in cfg["positions_um"])):
            raise ConfigError("config key 'positions_um' must be a nonempty "
                              "list of 3-element lists")
    return cfg


def _is_triple(value) -> bool:
    return (isinstance(value, list) and len(value) == 3
            and all(isinstance(v, (int, float)) and not isinstance(v, bool)
                    for v in value))


def load_config(config_arg: str | None, preset: str | None) -> dict:
    """Defaults <- preset <- user JSON document (path or '-' for stdin)."""
    cfg = copy.deepcopy(BASE_CONFIG)
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r}; expected one of "
                              f"{sorted(PRESETS)}")
        cfg = _merge(cfg, PRESETS[preset])
    if config_arg is not None:
        if config_arg == "-":
            text = sys.stdin.read()
        else:
            try:
                with open(config_arg, "r", encoding="utf-8") as fh:
                    text = fh.read()
            except OSError as exc:
                raise ConfigError(f"cannot read config file: {exc}")
        try:
            user = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}")
        if not isinstance(user, dict):
            raise ConfigError("config document must be a JSON object")
        cfg = _merge(cfg, user)
    return _validate(cfg)


# ---------------------------------------------------------------------------
# Config -> domain objects
# ---------------------------------------------------------------------------

def _constants(cfg: dict) -> PhysicalConstants:
    con = cfg["constants"]
    return PhysicalConstants(mu0=con["mu0_si"], muB=con["muB_J_per_T"],
                             g_e=con["g_e"], g_t=con["g_t"],
                             hbar=con["hbar_J_s"])


def _coupling(cfg: dict):
    return dipole_coupling(_constants(cfg),
                           cfg["constants"]["coupling_convention"])


def _params_single(cfg: dict) -> ProbeSpinParams:
    return ProbeSpinParams(T2=cfg["T2_single_ms"] * 1e-3,
                           g_e=cfg["constants"]["g_e"])


def _params_ensemble(cfg: dict) -> ProbeSpinParams:
    return ProbeSpinParams.from_density_cm3(T2=cfg["T2_ens_us"] * 1e-6,
                                            rho_cm3=cfg["rho_per_cm3"],
                                            g_e=cfg["constants"]["g_e"])


def _geometry(cfg: dict):
    geom = cfg["geometry"]
    if geom is None:
        return None
    try:
        if set(geom) == _GEOMETRY_KEYS["column"]:
            return ColumnGeometry(z_min=geom["z_min_um"],
                                  z_max=geom["z_max_um"],
                                  r_max=geom["r_max_um"])
        return CylinderGeometry(r_min=geom["r_min_um"],
                                r_max=geom["r_max_um"],
                                z_max=geom["z_max_um"])
    except ValueError as exc:
        raise ConfigError(f"invalid geometry: {exc}")


# ---------------------------------------------------------------------------
# Output helpers
# ---------------------------------------------------------------------------

def _fmt(value) -> str:
    if isinstance(value, float):
        return f"{value:.17g}"
    return str(value)


def _write_text(text: str, out_path: str | None) -> None:
    if out_path is None:
        sys.stdout.write(text)
    else:
        with open(out_path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _csv_text(header: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def _json_text(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _rows_as_json(header: list[str], rows: list[list]) -> str:
    return _json_text([dict(zip(header, row)) for row in rows])


def _flat_json_as_csv(obj: dict) -> str:
    """Single-row CSV rendering of a result object; lists stay JSON-encoded."""
    flat = {}

    def flatten(name, value):
        if isinstance(value, dict):
            for k in sorted(value):
                flatten(f"{name}_{k}" if name else k, value[k])
        elif isinstance(value, list):
            flat[name] = json.dumps(value)
        else:
            flat[name] = value

    flatten("", obj)
    return _csv_text(list(flat.keys()), [list(flat.values())])


def _emit_table(cfg: dict, header: list[str], rows: list[list],
                default_format: str = "csv") -> None:
    fmt = cfg["format"] or default_format
    if fmt == "csv":
        _write_text(_csv_text(header, rows), cfg["out"])
    else:
        _write_text(_rows_as_json(header, rows), cfg["out"])


def _emit_object(cfg: dict, obj: dict) -> None:
    fmt = cfg["format"] or "json"
    if fmt == "json":
        _write_text(_json_text(obj), cfg["out"])
    else:
        _write_text(_flat_json_as_csv(obj), cfg["out"])


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_field(cfg: dict) -> int:
    """Tabulate the angular factor and effective field at the configured positions."""
    if cfg["positions_um"] is None:
        raise ConfigError("the field command requires 'positions_um'")
    constants = _constants(cfg)
    coupling = _coupling(cfg)
    s = spin_sign(cfg["target_state_s"])
    rows = []
    for x, y, z in cfg["positions_um"]:
        factor = dipole_angular_factor((x, y, z))
        b_eff = effective_field((x, y, z), s, constants, coupling)
        if abs(b_eff) < FIELD_PRINT_FLOOR_T:
            b_eff = 0.0
        rows.append([float(x), float(y), float(z), factor, b_eff])
    _emit_table(cfg, ["x_um", "y_um", "z_um", "angular_factor", "B_eff_T"], rows)
    return 0


def _echo_inputs(cfg: dict) -> dict:
    keys = ("T2_single_ms", "T2_ens_us", "rho_per_cm3", "target_state_s",
            "T_total_s", "tI_s", "shape", "standoff_um", "geometry",
            "position_um")
    echoed = {k: cfg[k] for k in keys}
    echoed["constants"] = cfg["constants"]
    return echoed


def cmd_sensitivity(cfg: dict) -> int:
    """Analytic uncertainty for the configured ensemble geometry or probe position."""
    constants = _constants(cfg)
    coupling = _coupling(cfg)
    geom = _geometry(cfg)
    t_total = cfg["T_total_s"]
    if geom is not None:
        params = _params_ensemble(cfg)
        t_i = cfg["tI_s"] or optimal_interrogation_time(params)
        result = ensemble_uncertainty(geom, t_i, t_total, params, constants,
                                      coupling)
        kind = "ensemble"
    elif cfg["position_um"] is not None:
        params = _params_single(cfg)
        t_i = cfg["tI_s"] or optimal_interrogation_time(params)
        result = single_probe_uncertainty(cfg["position_um"], t_i, t_total,
                                          params, constants, coupling)
        kind = "single"
    else:
        raise ConfigError("the sensitivity command requires 'geometry' "
                          "or 'position_um'")
    _emit_object(cfg, {
        "kind": kind,
        "delta": result.delta,
        "tI_used_s": result.t_i_used,
        "signal": result.signal,
        "noise": result.noise,
        "trials": result.trials,
        "warnings": result.warnings,
        "inputs": _echo_inputs(cfg),
    })
    return 0


def cmd_optimize(cfg: dict) -> int:
    """Optimize (r_max, z_max) of the configured shape at the configured standoff."""
    res = optimize_geometry(cfg["shape"], cfg["standoff_um"],
                            _params_single(cfg), _params_ensemble(cfg),
                            _constants(cfg), _coupling(cfg))
    grid_r, grid_z, grid_ratio = res.grid_stage_best
    _emit_object(cfg, {
        "shape": cfg["shape"],
        "standoff_um": cfg["standoff_um"],
        "best_r_max_um": res.best_r_max,
        "best_z_max_um": res.best_z_max,
        "best_ratio": res.best_ratio,
        "evaluations": res.evaluations,
        "converged": res.converged,
        "grid_stage_best": {"r_max_um": grid_r, "z_max_um": grid_z,
                            "ratio": grid_ratio},
        "inputs": _echo_inputs(cfg),
    })
    return 0


def cmd_sweep(cfg: dict) -> int:
    """Optimize at each standoff of the configured grid; emit rows plus crossover."""
    sweep = cfg["sweep"]
    standoffs = np.geomspace(sweep["start_um"], sweep["stop_um"],
                             sweep["points"])
    rows = sweep_standoff(cfg["shape"], standoffs, sweep["mode"],
                          cfg["T_total_s"], _params_single(cfg),
                          _params_ensemble(cfg), _constants(cfg),
                          _coupling(cfg))
    header = ["standoff_um", "opt_r_max_um", "opt_z_max_um", "ratio"]
    table = [[r.standoff, r.opt_r_max, r.opt_z_max, r.ratio] for r in rows]
    if sweep["mode"] == "absolute":
        header.append("delta_s_ens")
        for row, r in zip(table, rows):
            row.append(math.nan if r.delta_s_ens is None else r.delta_s_ens)
    _emit_table(cfg, header, table)

    crossover = crossover_standoff(rows)
    if crossover is not None:
        sidecar = _json_text({"crossover_um": crossover})
        if cfg["out"] is not None:
            root, _ = os.path.splitext(cfg["out"])
            with open(root + ".crossover.json", "w", encoding="utf-8",
                      newline="") as fh:
                fh.write(sidecar)
        else:
            sys.stderr.write(sidecar)
    return 0


def cmd_verify(cfg: dict) -> int:
    """Monte Carlo check of the analytic uncertainty; target defaults to one probe at (0,0,1) um."""
    constants = _constants(cfg)
    coupling = _coupling(cfg)
    geom = _geometry(cfg)
    mc_cfg = cfg["mc"]
    try:
        mc = McConfig(shots=mc_cfg["shots"], seed=mc_cfg["seed"],
                      estimator=mc_cfg["estimator"],
                      spin_cap=mc_cfg["spin_cap"],
                      field_bins=mc_cfg["field_bins"])
    except ValueError as exc:
        raise ConfigError(str(exc))
    if geom is not None:
        params = _params_ensemble(cfg)
        target = geom
    else:
        params = _params_single(cfg)
        target = cfg["position_um"] or [0.0, 0.0, 1.0]
    t_i = cfg["tI_s"] or optimal_interrogation_time(params)
    protocol = EchoProtocol(t_i=t_i, t_total=cfg["T_total_s"])
    report = verify_uncertainty(target, protocol, params, constants, mc,
                                s=cfg["target_state_s"], coupling=coupling)
    _emit_object(cfg, {
        "empirical_mean": report.empirical_mean,
        "empirical_std_of_estimate": report.empirical_std_of_estimate,
        "analytic_delta": report.analytic_delta,
        "z_score": report.z_score,
        "pass": report.passed,
        "shots": report.shots,
        "n_repetitions": report.n_repetitions,
        "n_spins": report.n_spins,
        "seed": mc.seed,
        "estimator": mc.estimator,
    })
    return 0


COMMANDS = {
    "field": cmd_field,
    "sensitivity": cmd_sensitivity,
    "optimize": cmd_optimize,
    "sweep": cmd_sweep,
    "verify": cmd_verify,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spinprobe",
        description="Single-spin detection sensitivity: single probe spins "
                    "versus geometry-optimized probe-spin ensembles.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in COMMANDS.items():
        p = sub.add_parser(name, help=fn.__doc__)
        p.add_argument("--config", metavar="PATH",
                       help="JSON config document ('-' reads stdin)")
        p.add_argument("--preset", choices=sorted(PRESETS),
                       help="expand a bundled reference scenario")
        p.add_argument("--out", metavar="PATH",
                       help="write output here instead of stdout")
        p.add_argument("--seed", type=int, metavar="N",
                       help="override mc.seed")
        p.add_argument("--format", choices=("csv", "json"),
                       help="override the command's default output format")
    return parser


def _thread_cap() -> int:
    raw = os.environ.get("SPINPROBE_THREADS")
    if raw is None:
        return 1
    try:
        cap = int(raw)
    except ValueError:
        raise ConfigError(f"SPINPROBE_THREADS must be an integer, got {raw!r}")
    if cap < 1:
        raise ConfigError("SPINPROBE_THREADS must be >= 1")
    return cap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        _thread_cap()   # validated; execution is single-threaded (cap >= 1 holds)
        cfg = load_config(args.config, args.preset)
        if args.seed is not None:
            if args.seed < 0:
                raise ConfigError("--seed must be non-negative")
            cfg["mc"]["seed"] = args.seed
        if args.out is not None:
            cfg["out"] = args.out
        if args.format is not None:
            cfg["format"] = args.format
        return COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"spinprobe: config error: {exc}", file=sys.stderr)
        return 2
    except (SingularPosition, MagicAngle, ZeroSignal, InvalidProtocol) as exc:
        print(f"spinprobe: {exc}", file=sys.stderr)
        return 3
    except (QuadratureNoConvergence, NoFeasiblePoint) as exc:
        print(f"spinprobe: did not converge: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
