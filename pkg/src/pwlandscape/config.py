"""Experiment configuration: TOML files, ``--set`` overrides and validation.

Grammar: a TOML document with the top-level keys ``dim`` and ``seed`` and
the sections below.  Any numeric value may also be a string holding an
arithmetic expression over ``pi``, ``sqrt``, ``sin``, ``cos``, e.g.
``a2 = "sqrt(5) - 1"``.

==================  ========================================================
``[lattice]``       1D: ``a1``, ``a2`` (cell lengths).  2D: ``A1`` (2x2,
                    columns are lattice vectors), optional ``A2`` (default
                    ``A1``) and ``twist_deg`` (rotation applied to layer 2).
``[potential1/2]``  ``type = "gaussian"`` with ``s``, ``gamma``, ``eps_cut``
                    or ``type = "modes"`` with ``modes = [[n, re, im], ...]``.
``[basis]``         ``W``, ``L``, ``max_size``.
``[grid]``          field window ``lo``, ``hi`` (lists of length dim) and
                    optional spacing ``h`` (default ``pi / (4 W)``).
``[landscape]``     ``method``, ``tol``, ``max_iter``, ``cap``.
``[spectrum]``      ``mode`` (auto/full/partial), ``e_max``.
``[density]``       ``mu``, ``beta``, ``s_norm``, ``weight_floor``.
``[weyl]``          ``convention``, window ``lo``/``hi`` (default: grid
                    window), ``energies = {start, stop, num}``,
                    ``fit_window`` (default ``[min |V_eff|, stop]``),
                    ``mc_samples``.
``[analysis]``      ``prominence_frac``, ``min_separation``,
                    ``match_radius``, ``K``, ``bound_J``
                    (``min_separation`` defaults to ``pi / W``).
``[incommensurability]``  ``tol``, ``depth``.
``[output]``        ``float_format`` ("" = shortest round trip),
                    ``dump_matrix``.
==================  ========================================================

Unknown keys are rejected.
"""
import ast
import copy
import math
import operator
from importlib import resources
from typing import Annotated, Literal, Optional, Union

from pydantic import BaseModel, BeforeValidator, ConfigDict, Field, ValidationError, model_validator

from .errors import ConfigError

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

_FUNCS = {"sqrt": math.sqrt, "sin": math.sin, "cos": math.cos, "tan": math.tan, "exp": math.exp,
          "log": math.log, "radians": math.radians}
_CONSTS = {"pi": math.pi, "e": math.e}
_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul, ast.Div: operator.truediv,
           ast.Pow: operator.pow}


def _eval_node(node):
    if isinstance(node, ast.Expression):
        return _eval_node(node.body)
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
        return float(node.value)
    if isinstance(node, ast.Name) and node.id in _CONSTS:
        return _CONSTS[node.id]
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        v = _eval_node(node.operand)
        return -v if isinstance(node.op, ast.USub) else v
    if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
        return _BINOPS[type(node.op)](_eval_node(node.left), _eval_node(node.right))
    if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and node.func.id in _FUNCS and len(node.args) == 1:
        return _FUNCS[node.func.id](_eval_node(node.args[0]))
    raise ValueError(f"unsupported expression element {ast.dump(node)}")


def parse_number(v):
    if isinstance(v, bool):
        raise ValueError("booleans are not numbers")
    if isinstance(v, (int, float)):
        return float(v)
    if isinstance(v, str):
        try:
            return _eval_node(ast.parse(v.strip(), mode="eval"))
        except SyntaxError as exc:
            raise ValueError(f"cannot parse {v!r} as a number") from exc
    return v


Num = Annotated[float, BeforeValidator(parse_number)]


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class LatticeConfig(_Section):
    a1: Optional[Num] = None
    a2: Optional[Num] = None
    A1: Optional[list[list[Num]]] = None
    A2: Optional[list[list[Num]]] = None
    twist_deg: Num = 0.0


class GaussianConfig(_Section):
    type: Literal["gaussian"]
    s: Num
    gamma: Num
    eps_cut: Num = 1e-12


class ModesConfig(_Section):
    type: Literal["modes"]
    modes: list[list[Union[int, list[int], Num]]]


PotentialConfig = Annotated[Union[GaussianConfig, ModesConfig], Field(discriminator="type")]


class BasisConfig(_Section):
    W: Num
    L: Num
    max_size: int = 200_000


class GridConfig(_Section):
    lo: list[Num]
    hi: list[Num]
    h: Optional[Num] = None


class LandscapeConfig(_Section):
    method: Literal["iterative", "dense"] = "iterative"
    tol: Num = 1e-12
    max_iter: Optional[int] = None
    cap: Num = 1e6


class SpectrumConfig(_Section):
    mode: Literal["auto", "full", "partial"] = "auto"
    e_max: Optional[Num] = None


class DensityConfig(_Section):
    mu: Num
    beta: Num
    s_norm: Optional[Num] = None
    weight_floor: Num = 1e-12


class EnergyGrid(_Section):
    start: Num = 0.0
    stop: Num = 30.0
    num: int = 400


class WeylSection(_Section):
    convention: Literal["full", "half"] = "full"
    lo: Optional[list[Num]] = None
    hi: Optional[list[Num]] = None
    energies: EnergyGrid = EnergyGrid()
    fit_window: Optional[list[Num]] = None
    mc_samples: int = 0


class AnalysisConfig(_Section):
    prominence_frac: Num = 0.01
    min_separation: Optional[Num] = None
    match_radius: Num = 0.5
    K: int = 18
    bound_J: int = 10


class IncommConfig(_Section):
    tol: Num = 1e-10
    depth: int = 30


class OutputConfig(_Section):
    float_format: str = ""
    dump_matrix: bool = False


class ExperimentConfig(_Section):
    dim: Literal[1, 2]
    seed: int = 0
    lattice: LatticeConfig
    potential1: PotentialConfig
    potential2: PotentialConfig
    basis: BasisConfig
    grid: GridConfig
    landscape: LandscapeConfig = LandscapeConfig()
    spectrum: SpectrumConfig = SpectrumConfig()
    density: Optional[DensityConfig] = None
    weyl: WeylSection = WeylSection()
    analysis: AnalysisConfig = AnalysisConfig()
    incommensurability: IncommConfig = IncommConfig()
    output: OutputConfig = OutputConfig()

    @model_validator(mode="after")
    def _check_dims(self):
        d = self.dim
        lat = self.lattice
        if d == 1 and (lat.a1 is None or lat.a2 is None):
            raise ValueError("lattice.a1 and lattice.a2 are required for dim = 1")
        if d == 2:
            if lat.A1 is None:
                raise ValueError("lattice.A1 is required for dim = 2")
            for name in ("A1", "A2"):
                m = getattr(lat, name)
                if m is not None and (len(m) != 2 or any(len(r) != 2 for r in m)):
                    raise ValueError(f"lattice.{name} must be 2x2")
        for name in ("lo", "hi"):
            if len(getattr(self.grid, name)) != d:
                raise ValueError(f"grid.{name} must have {d} entries")
            w = getattr(self.weyl, name)
            if w is not None and len(w) != d:
                raise ValueError(f"weyl.{name} must have {d} entries")
        if self.weyl.fit_window is not None and len(self.weyl.fit_window) != 2:
            raise ValueError("weyl.fit_window must be [lo, hi]")
        return self


def _format_errors(exc):
    parts = []
    for err in exc.errors():
        loc = ".".join(str(x) for x in err["loc"] if not (isinstance(x, str) and x in ("gaussian", "modes")))
        parts.append(f"{loc}: {err['msg']}" if loc else err["msg"])
    return parts


def validate(raw):
    try:
        return ExperimentConfig.model_validate(raw)
    except ValidationError as exc:
        details = _format_errors(exc)
        keys = [d.split(":")[0] for d in details]
        err = ConfigError("invalid configuration: " + "; ".join(details))
        err.keys = keys
        raise err from None


def load_toml(path):
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from exc


def recipe(name):
    """Raw dictionary of a bundled recipe (``example1`` or ``example2``)."""
    text = resources.files("pwlandscape").joinpath("configs", f"{name}.toml").read_text()
    return tomllib.loads(text)


def _parse_value(text):
    try:
        return tomllib.loads(f"v = {text}")["v"]
    except tomllib.TOMLDecodeError:
        return text


def apply_overrides(raw, overrides):
    """Apply ``key.sub=value`` strings; the value replaces whatever was there."""
    out = copy.deepcopy(raw)
    for item in overrides or []:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        key, text = item.split("=", 1)
        path = key.strip().split(".")
        node = out
        for part in path[:-1]:
            nxt = node.get(part)
            if not isinstance(nxt, dict):
                nxt = {}
                node[part] = nxt
            node = nxt
        node[path[-1]] = _parse_value(text.strip())
    return out


def merge(base, extra):
    out = copy.deepcopy(base)
    for k, v in extra.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out
