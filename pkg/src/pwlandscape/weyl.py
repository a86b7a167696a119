"""Weyl-law estimates of the integrated density of states.

For a potential ``P`` sampled on a grid over a window ``Omega``::

    N_P(E) = (2 pi)^-d  vol{(x, xi) in Omega x R^d : P(x) + |xi|^2 / kappa <= E}
           = (2 pi)^-d  omega_d  kappa^(d/2)  sum_x (E - P(x))_+^(d/2)  h^d

with ``kappa = 1`` for the ``full`` kinetic symbol ``|xi|^2`` and
``kappa = 2`` for ``half`` (``|xi|^2 / 2``).
"""
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import DegenerateFit
from .landscape import VEFF
from .spectrum import UNIT_BALL, WEYL_EFFECTIVE, WEYL_STANDARD, IDoSCurve

FULL_SYMBOL = "full"
HALF_SYMBOL = "half"
_KAPPA = {FULL_SYMBOL: 1.0, HALF_SYMBOL: 2.0}


@dataclass(frozen=True)
class WeylConfig:
    convention: str = FULL_SYMBOL

    def __post_init__(self):
        if self.convention not in _KAPPA:
            raise ValueError(f"convention must be 'full' or 'half', not {self.convention!r}")

    @property
    def kappa(self):
        return _KAPPA[self.convention]


def _prefactor(d, kappa):
    return UNIT_BALL[d] * kappa ** (d / 2) / (2 * np.pi) ** d


def weyl_idos(potential_field, energies, config=WeylConfig()):
    """Phase-space volume IDoS from grid samples of a potential."""
    e = np.asarray(energies, dtype=float)
    if np.any(np.diff(e) < 0):
        raise ValueError("energy grid must be ascending")
    grid = potential_field.grid
    d = grid.dim
    sums = kernels.weyl_sums(potential_field.values, e, d / 2)
    vals = _prefactor(d, config.kappa) * grid.cell_volume * sums
    kind = WEYL_EFFECTIVE if potential_field.label == VEFF else WEYL_STANDARD
    return IDoSCurve(e, vals, kind, 1.0, config.convention, {"window": grid.window, "volume": grid.volume})


def mc_phase_volume(potential_field, E, n_samples, seed, config=WeylConfig(), chunk=1 << 20):
    """Monte-Carlo estimate of ``(2 pi)^-d vol{symbol <= E}`` and its standard error.

    Positions are uniform over the grid window (the potential is piecewise
    constant on grid cells), momenta uniform in the ball that bounds the
    sublevel set.
    """
    if n_samples < 10_000:
        raise ValueError("n_samples must be at least 1e4")
    grid = potential_field.grid
    d = grid.dim
    vals = potential_field.values
    pmin = float(vals.min())
    if E <= pmin:
        return 0.0, 0.0
    kappa = config.kappa
    radius = np.sqrt(kappa * (E - pmin))
    lo = np.array(grid.window[0])
    h = np.array(grid.spacing)
    counts = np.array(grid.counts)
    rng = np.random.default_rng(seed)
    hits = 0
    done = 0
    while done < n_samples:
        m = min(chunk, n_samples - done)
        x = lo + rng.random((m, d)) * h * counts
        idx = np.minimum(((x - lo) / h).astype(np.int64), counts - 1)
        p = vals[tuple(idx.T)]
        xi2 = radius**2 * rng.random(m) ** (2.0 / d)
        hits += int(np.count_nonzero(p + xi2 / kappa <= E))
        done += m
    frac = hits / n_samples
    scale = grid.volume * UNIT_BALL[d] * radius**d / (2 * np.pi) ** d
    return scale * frac, scale * np.sqrt(frac * (1 - frac) / n_samples)


@dataclass(frozen=True)
class ScaleFit:
    c: float
    misfit: float
    window: tuple
    n_points: int

    def as_dict(self):
        return {"c": self.c, "misfit": self.misfit, "window": list(self.window), "n_points": self.n_points}


def fit_scale(counting, weyl, window):
    """Least-squares ``c`` minimising ``sum (N - c N_weyl)^2`` over the window.

    ``misfit`` is ``||N - c N_weyl|| / ||N||`` over the same points.
    """
    if counting.energies.shape != weyl.energies.shape or not np.array_equal(counting.energies, weyl.energies):
        raise ValueError("curves must share the energy grid")
    lo, hi = window
    sel = (counting.energies >= lo) & (counting.energies <= hi)
    if not sel.any():
        raise ValueError(f"fit window [{lo}, {hi}] contains no energies")
    n = counting.values[sel]
    w = weyl.values[sel]
    den = float(w @ w)
    if den < 1e-300:
        raise DegenerateFit("Weyl curve vanishes on the fit window")
    c = float(n @ w) / den
    nn = float(np.linalg.norm(n))
    resid = float(np.linalg.norm(n - c * w))
    misfit = resid / nn if nn > 0 else (0.0 if resid == 0 else np.inf)
    return ScaleFit(c, misfit, (float(lo), float(hi)), int(sel.sum()))
