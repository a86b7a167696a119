"""Command line entry point.

    pwlandscape SUBCOMMAND [--config PATH] [--out DIR] [--set key=value ...]
                [--threads N] [--seed N] [--dump-matrix]

Subcommands: landscape, spectrum, density, idos, minima, compare, example1,
example2.  ``--config`` takes a TOML file or a bundled recipe name
(``example1``, ``example2``); for the two example subcommands it is
optional and merged on top of the recipe.  ``--set`` values are parsed as
TOML (``--set basis.W=20``, ``--set 'grid.hi=[50.0]'``) and replace the
value at that dotted path.

CSV floats are written with ``repr`` (shortest string that round-trips)
unless ``output.float_format`` is set.  Every run writes ``manifest.json``;
failures write ``error.json`` instead and remove the partial outputs.  A run
first deletes the files listed by a previous manifest in the same directory,
so the directory never mixes results of different runs.
Exit codes: 0 success, 1 numerical failure, 2 configuration error.
"""
import argparse
import hashlib
import json
import logging
import os
import platform
import sys
import time
from importlib import metadata

import numpy as np

from . import config as config_mod
from . import kernels, landscape
from .errors import ConfigError, LandscapeError
from .hamiltonian import write_coo
from .pipeline import Experiment
from .weyl import mc_phase_volume, WeylConfig

log = logging.getLogger(__name__)

SUBCOMMANDS = ("landscape", "spectrum", "density", "idos", "minima", "compare", "example1", "example2")
RECIPES = ("example1", "example2")
FIELD_FILES = {landscape.U_FIELD: "u.csv", landscape.VEFF: "veff.csv", landscape.POTENTIAL: "potential.csv"}


def build_parser():
    p = argparse.ArgumentParser(prog="pwlandscape", description="Plane-wave landscape solver for incommensurate bilayers.")
    p.add_argument("subcommand", choices=SUBCOMMANDS)
    p.add_argument("config_pos", nargs="?", metavar="CONFIG", help="same as --config")
    p.add_argument("--config", help="TOML file or bundled recipe name")
    p.add_argument("--out", default="out", help="output directory (default: ./out)")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE")
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--dump-matrix", action="store_true", help="also write the Hamiltonian as hamiltonian.coo")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def _load_raw(path):
    if path in RECIPES and not os.path.exists(path):
        return config_mod.recipe(path)
    return config_mod.load_toml(path)


def resolve_config(args):
    path = args.config or args.config_pos
    if args.subcommand in RECIPES:
        raw = config_mod.recipe(args.subcommand)
        if path:
            raw = config_mod.merge(raw, _load_raw(path))
    else:
        if not path:
            raise ConfigError("a config is required: pass --config PATH or a recipe name")
        raw = _load_raw(path)
    overrides = list(args.overrides)
    if args.seed is not None:
        overrides.append(f"seed={args.seed}")
    if args.dump_matrix:
        overrides.append("output.dump_matrix=true")
    raw = config_mod.apply_overrides(raw, overrides)
    return config_mod.validate(raw)


class Writer:
    """Writes CSV/JSON into ``out`` and remembers what it wrote."""

    def __init__(self, out, float_format=""):
        self.out = out
        self.fmt = (lambda v: repr(float(v))) if not float_format else (lambda v: format(float(v), float_format))
        self.written = []

    def _path(self, name):
        return os.path.join(self.out, name)

    def _register(self, name):
        if name not in self.written:
            self.written.append(name)

    def csv(self, name, header, columns):
        cols = [np.asarray(c).reshape(-1) for c in columns]
        fmts = [(lambda v: str(int(v))) if c.dtype.kind in "iu" else self.fmt for c in cols]
        with open(self._path(name), "w", newline="\n") as fh:
            fh.write(",".join(header) + "\n")
            for row in zip(*cols):
                fh.write(",".join(f(v) for f, v in zip(fmts, row)) + "\n")
        self._register(name)

    def field(self, name, fld):
        pts = fld.grid.points()
        axes = ["x", "y"][: fld.grid.dim]
        self.csv(name, axes + ["value"], [pts[:, k] for k in range(fld.grid.dim)] + [fld.values])

    def extrema(self, name, ext):
        d = ext.positions.shape[1]
        ranks = np.arange(1, len(ext) + 1)
        self.csv(name, ["rank"] + ["x", "y"][:d] + ["value", "prominence"],
                 [ranks] + [ext.positions[:, k] for k in range(d)] + [ext.values, ext.prominences])

    def json(self, name, obj, register=True):
        with open(self._path(name), "w") as fh:
            json.dump(obj, fh, indent=2, sort_keys=True, default=_json_default)
            fh.write("\n")
        if register:
            self._register(name)

    def raw(self, name, fn):
        fn(self._path(name))
        self._register(name)

    def hashes(self):
        out = {}
        for name in self.written:
            with open(self._path(name), "rb") as fh:
                out[name] = hashlib.sha256(fh.read()).hexdigest()
        return out

    def remove_all(self):
        for name in self.written + ["manifest.json"]:
            try:
                os.remove(self._path(name))
            except FileNotFoundError:
                pass
        self.written = []


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, tuple):
        return list(o)
    raise TypeError(f"not serialisable: {type(o)}")


def _versions():
    out = {"python": platform.python_version()}
    for pkg in ("pwlandscape", "numpy", "scipy", "numba", "pydantic"):
        try:
            out[pkg] = metadata.version(pkg)
        except metadata.PackageNotFoundError:
            out[pkg] = None
    return out


# -- stage emitters ---------------------------------------------------------


def emit_landscape(exp, w, res):
    for key, fld in exp.fields.items():
        w.field(FIELD_FILES[key], fld)
    u, veff = exp.fields[landscape.U_FIELD], exp.fields[landscape.VEFF]
    res["landscape"] = dict(exp.landscape_coefficients.stats(),
                            u_min=float(u.values.min()), u_max=float(u.values.max()),
                            veff_min=float(veff.values.min()), veff_max=float(veff.values.max()),
                            n_flagged=veff.meta["n_flagged"])


def emit_spectrum(exp, w, res):
    sp = exp.spectrum
    w.csv("spectrum.csv", ["j", "lambda"], [np.arange(1, len(sp) + 1), sp.eigenvalues])
    res["spectrum"] = {"mode": sp.mode, "n": len(sp), "lambda_min": float(sp.eigenvalues[0]),
                       "lambda_max": float(sp.eigenvalues[-1])}


def emit_density(exp, w, res):
    rho = exp.density
    w.field("density.csv", rho)
    res["density"] = dict(rho.meta, max=float(rho.values.max()), min=float(rho.values.min()))


def emit_idos(exp, w, res):
    conv = exp.cfg.weyl.convention
    std, eff = exp.weyl_curves(conv)
    fits = exp.fits
    c = fits[conv]["effective"].c
    w.csv("idos.csv", ["E", "N_counting", "N_weyl_standard", "N_weyl_effective", "c_fit_applied"],
          [exp.energies, exp.counting.values, std.values, eff.values, c * eff.values])
    L, d = exp.cfg.basis.L, exp.cfg.dim
    res["idos"] = {
        "convention": conv,
        "fit_window": list(exp.fit_window),
        "weyl_window": exp.weyl_grid.window,
        "fits": {k: {kind: dict(f.as_dict(), c_over_Ld=f.c / L**d) for kind, f in v.items()} for k, v in fits.items()},
    }
    n_mc = exp.cfg.weyl.mc_samples
    if n_mc:
        pot = exp.weyl_fields[landscape.POTENTIAL]
        checks = []
        for k, E in enumerate(np.linspace(exp.energies[0], exp.energies[-1], 5)[1:]):
            est, err = mc_phase_volume(pot, float(E), n_mc, exp.cfg.seed + k, WeylConfig(conv))
            quad = float(np.interp(E, exp.energies, std.values))
            checks.append({"E": float(E), "quadrature": quad, "mc": est, "mc_stderr": err})
        res["idos"]["mc_check"] = checks


def emit_minima(exp, w, res):
    w.extrema("veff_minima.csv", exp.minima)
    res["minima"] = {"veff_minima": len(exp.minima)}
    if exp.cfg.density is not None:
        w.extrema("density_maxima.csv", exp.maxima)
        res["minima"]["density_maxima"] = len(exp.maxima)


def emit_compare(exp, w, res):
    emit_minima(exp, w, res)
    rep = exp.match
    w.json("match.json", rep.as_dict())
    bound = exp.bound
    w.csv("bound.csv", ["j", "lambda", "ratio"],
          [np.array([b["j"] for b in bound]), np.array([b["lambda"] for b in bound]), np.array([b["ratio"] for b in bound])])
    res["compare"] = {"matched_fraction": rep.matched_fraction, "order_agreement": rep.order_agreement, "K": rep.K,
                      "bound_ratio_max": max((b["ratio"] for b in bound), default=None)}


PLAN = {
    "landscape": [emit_landscape],
    "spectrum": [emit_spectrum],
    "density": [emit_density],
    "idos": [emit_idos],
    "minima": [emit_minima],
    "compare": [emit_compare],
    "example1": [emit_landscape, emit_spectrum, emit_density, emit_idos, emit_compare],
    "example2": [emit_landscape, emit_spectrum, emit_density, emit_idos, emit_compare],
}


def run(subcommand, config_path=None, overrides=(), out="out", threads=None, seed=None, dump_matrix=False):
    """Programmatic equivalent of the command line; returns the exit code."""
    argv = [subcommand, "--out", out]
    if config_path:
        argv += ["--config", str(config_path)]
    for o in overrides:
        argv += ["--set", o]
    if threads is not None:
        argv += ["--threads", str(threads)]
    if seed is not None:
        argv += ["--seed", str(seed)]
    if dump_matrix:
        argv.append("--dump-matrix")
    return main(argv)


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    os.makedirs(args.out, exist_ok=True)
    if args.threads is not None:
        kernels.set_threads(args.threads)
    _clear_previous(args.out)

    writer = Writer(args.out)
    cfg = None
    t0 = time.perf_counter()
    try:
        cfg = resolve_config(args)
        writer.fmt = Writer(args.out, cfg.output.float_format).fmt
        exp = Experiment(cfg)
        results = {}
        with exp.capture():
            results["incommensurability"] = exp.incommensurability
            results["basis_size"] = exp.basis.size
            if cfg.output.dump_matrix:
                writer.raw("hamiltonian.coo", lambda p: write_coo(exp.H, p))
            for emit in PLAN[args.subcommand]:
                emit(exp, writer, results)
        manifest = {
            "subcommand": args.subcommand,
            "config": cfg.model_dump(mode="json"),
            "versions": _versions(),
            "backend": kernels.BACKEND,
            "timings": dict(exp.timings, total=time.perf_counter() - t0),
            "warnings": exp.warnings,
            "results": results,
            "outputs": writer.hashes(),
        }
        writer.json("manifest.json", manifest, register=False)
        return 0
    except (LandscapeError, ValueError) as exc:
        code = exc.exit_code if isinstance(exc, LandscapeError) else 2
        return _fail(writer, args, exc, code, cfg)
    except Exception as exc:  # pragma: no cover - unexpected failures still leave an error record
        return _fail(writer, args, exc, 1, cfg)


def _clear_previous(out):
    """Remove outputs of an earlier run in ``out`` (those its manifest lists)."""
    stale = ["error.json", "manifest.json"]
    try:
        with open(os.path.join(out, "manifest.json")) as fh:
            stale += list(json.load(fh).get("outputs", {}))
    except (OSError, ValueError, AttributeError):
        pass
    for name in stale:
        path = os.path.join(out, os.path.basename(name))
        if os.path.isfile(path):
            os.remove(path)


def _fail(writer, args, exc, code, cfg):
    writer.remove_all()
    err = {
        "error": type(exc).__name__,
        "message": str(exc),
        "exit_code": code,
        "subcommand": args.subcommand,
        "keys": getattr(exc, "keys", []),
    }
    residuals = getattr(exc, "residuals", None)
    if residuals is not None:
        err["residuals"] = residuals
    writer.json("error.json", err, register=False)
    print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
