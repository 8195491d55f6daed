"""Command-line entry point: ``thinmag <subcommand> --config file.json``.

Exit codes: 0 success, 2 invalid input, 3 solver failure, 4 budget exceeded.
Errors are also written to stderr as one JSON object.
"""
from __future__ import annotations

import argparse
import copy
import csv
import io
import json
import os
import sys
import tempfile

import numpy as np

from . import magnetostatic3d as m3d
from .errors import BudgetExceeded, InvalidArgument, SolverFailure, ThinMagError
from .limit_wire_film import FilmEnergy, WireEnergy, WireFilmParams, minimize_wire_film
from .limit_wire_wire import CoupledEnergy, WireWireParams, minimize_wire_wire
from .mesh2d import CrossSection, footprint_mesh, polygon_from_disc
from .shape_coeffs import ShapeCoefficients, coefficients
from .sphere_field import MinimizeOptions, anisotropy_from_dict, fd_gradient_check, normalize, project_tangent

THREADS_ENV = "THINMAG_THREADS"

_COEFF_PARAMS = {"R_levels": [8.0, 16.0], "h": 0.05, "tol": 1e-10}
_OPTIMIZER = {k: f.default for k, f in MinimizeOptions.__dataclass_fields__.items()}
_UNIT_SQUARE = {"rectangle": {"lower": [-1.0, -1.0], "upper": [0.0, 0.0]}}

DEFAULTS = {
    "coeffs": {
        "section": {"disc": {"center": [0.0, 0.0], "radius": 1.0, "n_segments": 64}},
        **_COEFF_PARAMS,
        "grading": 0.25,
        "output": {"json": None, "csv": None},
    },
    "wire-film": {
        "lambda": 1.0,
        "theta": {"disc": {"center": [0.0, 0.0], "radius": 1.0, "n_segments": 64}},
        "coeffs": None,
        "coeff_params": dict(_COEFF_PARAMS),
        "film_h": 0.1,
        "anisotropy": {"kind": "zero"},
        "F_a": [0.0, 0.0, 0.0],
        "F_b": [0.0, 0.0, 0.0],
        "N": 64,
        "optimizer": dict(_OPTIMIZER),
        "output": {"json": None, "wire_csv": None, "film_csv": None},
    },
    "wire-wire": {
        "lambda": 1.0,
        "coeffs": None,
        "coeff_params": dict(_COEFF_PARAMS),
        "anisotropy": {"kind": "zero"},
        "F_a": [0.0, 0.0, 0.0],
        "F_bl": [0.0, 0.0, 0.0],
        "N_a": 64,
        "N_b": 64,
        "optimizer": dict(_OPTIMIZER),
        "output": {"json": None, "csv": None},
    },
    "validate3d": {
        "kind": "wire_film",
        "h_list": [0.4, 0.2, 0.1],
        "delta_ratio": 0.25,
        "L": 4.0,
        "film_cells": 4,
        "m_a": [1.0, 0.0, 0.0],
        "m_b": [0.0, 0.0, 1.0],
        "theta": {"rectangle": {"lower": [0.0, 0.0], "upper": [1.0, 1.0]}},
        "coeffs": None,
        "coeff_params": dict(_COEFF_PARAMS),
        "tol": 1e-8,
        "max_cells": 8000000,
        "output": {"json": None, "csv": None},
    },
    "gradcheck": {
        "energy": "wire",
        "lambda": 1.0,
        "coeffs": {"alpha": 1.5707963267948966, "beta": 1.5707963267948966, "gamma": 0.0},
        "theta": {"disc": {"center": [0.0, 0.0], "radius": 1.0, "n_segments": 32}},
        "film_h": 0.2,
        "anisotropy": {"kind": "uniaxial", "axis": [0.0, 0.0, 1.0], "strength": 0.5},
        "field": [0.3, -0.2, 0.5],
        "N": 32,
        "samples": 10,
        "h_fd": 1e-6,
        "seed": 0,
        "threshold": 1e-5,
        "output": {"json": None},
    },
}

_FREE_FORM = {"coeffs", "section", "theta", "anisotropy", "F_a", "F_b", "F_bl", "field"}


def merge_config(command, user):
    """Defaults overlaid with ``user``; unknown keys raise InvalidArgument."""
    base = copy.deepcopy(DEFAULTS[command])

    def merge(dst, src, path):
        for k, v in src.items():
            if k not in dst:
                raise InvalidArgument(f"unknown config key {path + k!r}")
            if isinstance(dst[k], dict) and isinstance(v, dict) and k not in _FREE_FORM:
                merge(dst[k], v, path + k + ".")
            else:
                dst[k] = v

    if not isinstance(user, dict):
        raise InvalidArgument("config must be a JSON object")
    merge(base, user, "")
    return base


def section_from_spec(spec):
    if not isinstance(spec, dict) or len(spec) != 1:
        raise InvalidArgument("geometry must be one of {'vertices': ...}, {'disc': ...}, {'rectangle': ...}")
    (kind, body), = spec.items()
    if kind == "vertices":
        return CrossSection.from_points(body)
    if kind == "disc":
        extra = set(body) - {"center", "radius", "n_segments"}
        if extra:
            raise InvalidArgument(f"unknown disc keys {sorted(extra)}")
        return polygon_from_disc(body.get("center", (0.0, 0.0)), float(body.get("radius", 1.0)),
                                 body.get("n_segments", 64))
    if kind == "rectangle":
        extra = set(body) - {"lower", "upper"}
        if extra:
            raise InvalidArgument(f"unknown rectangle keys {sorted(extra)}")
        return CrossSection.rectangle(body["lower"], body["upper"])
    raise InvalidArgument(f"unknown geometry kind {kind!r}")


def _positive(cfg, *keys):
    for k in keys:
        v = cfg[k]
        if not isinstance(v, (int, float)) or not v > 0:
            raise InvalidArgument(f"{k} must be a positive number, got {v!r}")


def _coeff_params(cfg):
    p = cfg["coeff_params"]
    if len(p["R_levels"]) < 2:
        raise InvalidArgument("coeff_params.R_levels needs at least two radii")
    _positive(p, "h", "tol")
    return p


def _coeffs(cfg, section):
    if cfg["coeffs"] is not None:
        try:
            return ShapeCoefficients.from_dict(cfg["coeffs"])
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidArgument(f"bad coeffs entry: {exc}") from None
    p = _coeff_params(cfg)
    return coefficients(section, p["R_levels"], p["h"], p["tol"])


def _workers():
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        raise InvalidArgument(f"{THREADS_ENV} must be an integer") from None


# --- output helpers ---------------------------------------------------------

def _atomic_write(path, text):
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise


def _csv_text(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in r])
    return buf.getvalue()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _emit(result, files, json_key="json"):
    """Write all outputs at once, after every computation has succeeded."""
    text = json.dumps(_jsonable(result), indent=2, sort_keys=True) + "\n"
    outputs = dict(files)
    if outputs.pop(json_key, None) is None:
        sys.stdout.write(text)
    else:
        _atomic_write(files[json_key], text)
    for path, content in outputs.values():
        _atomic_write(path, content)


# --- subcommands ----------------------------------------------------------

def run_coeffs(cfg):
    section = section_from_spec(cfg["section"])
    _positive(cfg, "h", "tol", "grading")
    if len(cfg["R_levels"]) < 2:
        raise InvalidArgument("R_levels needs at least two radii")
    c = coefficients(section, cfg["R_levels"], cfg["h"], cfg["tol"], cfg["grading"])
    result = c.as_dict()
    files = {"json": cfg["output"]["json"]}
    if cfg["output"]["csv"]:
        rows = [(lv.radius, lv.h, lv.alpha, lv.beta, lv.gamma, lv.gamma_boundary, lv.n_vertices) for lv in c.levels]
        files["csv"] = (cfg["output"]["csv"], _csv_text(
            ["R", "h", "alpha", "beta", "gamma", "gamma_boundary", "n_vertices"], rows))
    return result, files


def _options(cfg):
    return MinimizeOptions.from_dict(cfg["optimizer"])


def _result_dict(res):
    return {"energy": res.breakdown.as_dict(), "iterations": res.iterations, "converged": res.converged,
            "start_index": res.start_index, "candidate_energies": res.all_energies}


def run_wire_film(cfg):
    _positive(cfg, "lambda", "film_h", "N")
    theta = section_from_spec(cfg["theta"])
    options = _options(cfg)
    anis = anisotropy_from_dict(cfg["anisotropy"])
    coeffs = _coeffs(cfg, theta)
    film = footprint_mesh(theta, cfg["film_h"])
    params = WireFilmParams(cfg["lambda"], theta.area, coeffs, film, int(cfg["N"]), anis, cfg["F_a"], cfg["F_b"])
    out = minimize_wire_film(params, options, _workers())
    wire, fres = out["wire"], out["film"]
    x = np.linspace(0.0, 1.0, params.N + 1)
    result = {"coeffs": {"alpha": coeffs.alpha, "beta": coeffs.beta, "gamma": coeffs.gamma},
              "theta_area": theta.area,
              "wire": {**_result_dict(wire), "x3": x, "m": wire.field},
              "film": {**_result_dict(fres), "vertices": film.points, "m": fres.field},
              "total": wire.energy + fres.energy}
    o = cfg["output"]
    files = {"json": o["json"]}
    if o["wire_csv"]:
        files["wire_csv"] = (o["wire_csv"], _csv_text(["x3", "m1", "m2", "m3"],
                                                      [(t, *v) for t, v in zip(x, wire.field)]))
    if o["film_csv"]:
        files["film_csv"] = (o["film_csv"], _csv_text(["x1", "x2", "m1", "m2", "m3"],
                                                      [(*p, *v) for p, v in zip(film.points, fres.field)]))
    return result, files


def run_wire_wire(cfg):
    _positive(cfg, "lambda", "N_a", "N_b")
    options = _options(cfg)
    anis = anisotropy_from_dict(cfg["anisotropy"])
    coeffs = _coeffs(cfg, section_from_spec(_UNIT_SQUARE))
    params = WireWireParams(cfg["lambda"], coeffs, int(cfg["N_a"]), int(cfg["N_b"]), anis, cfg["F_a"], cfg["F_bl"])
    out = minimize_wire_wire(params, options, workers=_workers())
    f, res = out["field"], out["result"]
    xa = np.linspace(0.0, 1.0, f.N_a + 1)
    xb = np.linspace(0.0, 1.0, f.N_b + 1)
    result = {"coeffs": {"alpha": coeffs.alpha, "beta": coeffs.beta, "gamma": coeffs.gamma},
              **_result_dict(res), "junction": f.junction,
              "wire_a": {"x3": xa, "m": f.m_a}, "wire_b": {"x1": xb, "m": f.m_b}}
    files = {"json": cfg["output"]["json"]}
    if cfg["output"]["csv"]:
        rows = [("a", t, *v) for t, v in zip(xa, f.m_a)] + [("b", t, *v) for t, v in zip(xb, f.m_b)]
        files["csv"] = (cfg["output"]["csv"], _csv_text(["wire", "s", "m1", "m2", "m3"], rows))
    return result, files


def run_validate3d(cfg):
    if cfg["kind"] not in (m3d.WIRE_FILM, m3d.WIRE_WIRE):
        raise InvalidArgument("kind must be wire_film or wire_wire")
    _positive(cfg, "delta_ratio", "L", "tol", "max_cells")
    m_a, m_b = (normalize(np.asarray(cfg[k], dtype=float)) for k in ("m_a", "m_b"))
    theta = section_from_spec(cfg["theta"]) if cfg["kind"] == m3d.WIRE_FILM else None
    coeffs = _coeffs(cfg, theta if theta is not None else section_from_spec(_UNIT_SQUARE))
    study = m3d.convergence_study(cfg["kind"], m_a, m_b, cfg["h_list"], coeffs, theta, cfg["L"],
                                  cfg["delta_ratio"], int(cfg["film_cells"]), cfg["tol"], int(cfg["max_cells"]))
    files = {"json": cfg["output"]["json"]}
    if cfg["output"]["csv"]:
        files["csv"] = (cfg["output"]["csv"], _csv_text(
            ["h", "E_over_h2", "limit", "rel_error"],
            [(r["h"], r["E_over_h2"], r["limit"], r["rel_error"]) for r in study["rows"]]))
    return study, files


def run_gradcheck(cfg):
    _positive(cfg, "lambda", "samples", "N", "film_h")
    if not 1e-8 <= cfg["h_fd"] <= 1e-4:
        raise InvalidArgument("h_fd must lie in [1e-8, 1e-4]")
    anis = anisotropy_from_dict(cfg["anisotropy"])
    coeffs = ShapeCoefficients.from_dict(cfg["coeffs"])
    N = int(cfg["N"])
    kind = cfg["energy"]
    if kind == "wire":
        fn = WireEnergy(cfg["lambda"], coeffs, N, 1.0, anis, cfg["field"])
        n = N + 1
    elif kind == "film":
        mesh = footprint_mesh(section_from_spec(cfg["theta"]), cfg["film_h"])
        fn = FilmEnergy(cfg["lambda"], mesh, anis, cfg["field"])
        n = mesh.n_vertices
    elif kind == "coupled":
        fn = CoupledEnergy(cfg["lambda"], coeffs, N, N, anis, cfg["field"], cfg["field"])
        n = 2 * N + 1
    else:
        raise InvalidArgument("energy must be wire, film or coupled")
    rng = np.random.default_rng(cfg["seed"])
    errors = []
    for _ in range(int(cfg["samples"])):
        m = normalize(rng.standard_normal((n, 3)))
        d = project_tangent(m, rng.standard_normal((n, 3)))
        errors.append(fd_gradient_check(fn, m, d, cfg["h_fd"]))
    worst = max(errors)
    return {"energy": kind, "relative_errors": errors, "max_relative_error": worst,
            "passed": worst <= cfg["threshold"]}, {"json": cfg["output"]["json"]}


COMMANDS = {
    "coeffs": run_coeffs,
    "wire-film": run_wire_film,
    "wire-wire": run_wire_wire,
    "validate3d": run_validate3d,
    "gradcheck": run_gradcheck,
}


def _parser():
    ap = argparse.ArgumentParser(prog="thinmag", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON configuration file")
        p.add_argument("--dump-defaults", action="store_true", help="print the full default config and exit")
        if name == "validate3d":
            p.add_argument("--kind", choices=[m3d.WIRE_FILM, m3d.WIRE_WIRE])
            p.add_argument("--h", dest="h_list", type=float, nargs="+")
            p.add_argument("--delta-ratio", type=float)
            p.add_argument("--box", dest="L", type=float)
            p.add_argument("--m-a", type=float, nargs=3)
            p.add_argument("--m-b", type=float, nargs=3)
            p.add_argument("--csv")
            p.add_argument("--json")
    return ap


def _fail(code, exc):
    doc = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    for attr in ("residual", "offending", "triangle_index"):
        if getattr(exc, attr, None) is not None:
            doc[attr] = getattr(exc, attr)
    sys.stderr.write(json.dumps(_jsonable(doc)) + "\n")
    return code


def run(argv=None):
    try:
        args = _parser().parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 2
    if args.dump_defaults:
        sys.stdout.write(json.dumps(DEFAULTS[args.command], indent=2) + "\n")
        return 0
    try:
        user = {}
        if args.config:
            try:
                with open(args.config) as fh:
                    user = json.load(fh)
            except (OSError, json.JSONDecodeError) as exc:
                raise InvalidArgument(f"cannot read config: {exc}") from None
        if args.command == "coeffs" and isinstance(user, dict) and "vertices" in user:
            # a bare cross-section document
            user = {**{k: v for k, v in user.items() if k != "vertices"}, "section": {"vertices": user["vertices"]}}
        if args.command == "validate3d":
            for key in ("kind", "h_list", "delta_ratio", "L", "m_a", "m_b"):
                if getattr(args, key) is not None:
                    user[key] = getattr(args, key)
            for key in ("csv", "json"):
                if getattr(args, key) is not None:
                    user.setdefault("output", {})[key] = getattr(args, key)
        cfg = merge_config(args.command, user)
        result, files = COMMANDS[args.command](cfg)
        _emit(result, files)
    except BudgetExceeded as exc:
        return _fail(4, exc)
    except SolverFailure as exc:
        return _fail(3, exc)
    except (ThinMagError, ValueError, KeyError, TypeError) as exc:
        return _fail(2, exc)
    return 0


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
