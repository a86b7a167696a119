"""Experiment orchestration: builds every stage lazily from a validated config
and remembers timings and warnings for the manifest."""
import logging
import time
import warnings
from contextlib import contextmanager
from functools import cached_property

import numpy as np

from . import analysis, basis as basis_mod, hamiltonian, landscape, lattice, potential, spectrum, weyl
from .errors import ConfigError


class _Collector(logging.Handler):
    def __init__(self, sink):
        super().__init__(logging.WARNING)
        self.sink = sink

    def emit(self, record):
        self.sink.append(f"{record.name}: {record.getMessage()}")


class Experiment:
    """One configured run.  Attributes are computed on first access."""

    def __init__(self, cfg):
        self.cfg = cfg
        self.timings = {}
        self.warnings = []

    @contextmanager
    def capture(self):
        """Route library log warnings and python warnings into ``self.warnings``."""
        handler = _Collector(self.warnings)
        root = logging.getLogger("pwlandscape")
        root.addHandler(handler)
        try:
            with warnings.catch_warnings(record=True) as caught:
                warnings.simplefilter("always")
                yield
        finally:
            root.removeHandler(handler)
            self.warnings.extend(f"{w.category.__name__}: {w.message}" for w in caught)

    @contextmanager
    def _timed(self, name):
        t0 = time.perf_counter()
        yield
        self.timings[name] = self.timings.get(name, 0.0) + time.perf_counter() - t0

    # -- geometry -----------------------------------------------------------

    @cached_property
    def lattices(self):
        lat = self.cfg.lattice
        if self.cfg.dim == 1:
            return lattice.make_lattice(1, lat.a1), lattice.make_lattice(1, lat.a2)
        A1 = np.array(lat.A1, dtype=float)
        A2 = np.array(lat.A2, dtype=float) if lat.A2 is not None else A1
        return lattice.make_lattice(2, A1), lattice.rotate(lattice.make_lattice(2, A2), lat.twist_deg)

    @cached_property
    def reciprocals(self):
        return tuple(lattice.reciprocal(x) for x in self.lattices)

    @cached_property
    def incommensurability(self):
        ic = self.cfg.incommensurability
        with self._timed("incommensurability"):
            direct = lattice.check_incommensurate(*self.lattices, tol=ic.tol, depth=ic.depth)
            recip = lattice.check_incommensurate(*self.reciprocals, tol=ic.tol, depth=ic.depth)
        if direct.verdict == lattice.COMMENSURATE:
            logging.getLogger(__name__).warning("layers are commensurate (witness %s); results are periodic",
                                                direct.as_dict()["witness"])
        return {"direct": direct.as_dict(), "reciprocal": recip.as_dict()}

    @cached_property
    def potentials(self):
        out = []
        for rl, pc in zip(self.reciprocals, (self.cfg.potential1, self.cfg.potential2)):
            if pc.type == "gaussian":
                out.append(potential.gaussian_potential(rl, pc.s, pc.gamma, pc.eps_cut))
            else:
                modes = [(m[0], m[1], m[2]) if len(m) == 3 else (m[0], m[1], 0.0) for m in pc.modes]
                out.append(potential.potential_from_modes(rl, modes))
        return tuple(out)

    @cached_property
    def basis(self):
        b = self.cfg.basis
        with self._timed("basis"):
            return basis_mod.build_basis(*self.reciprocals, b.W, b.L, max_size=b.max_size)

    @cached_property
    def H(self):
        with self._timed("assemble"):
            return hamiltonian.assemble(self.basis, *self.potentials)

    # -- grids --------------------------------------------------------------

    @cached_property
    def grid(self):
        g = self.cfg.grid
        return landscape.RealSpaceGrid.from_window(g.lo, g.hi, h=g.h, W=self.cfg.basis.W)

    @cached_property
    def weyl_grid(self):
        w = self.cfg.weyl
        if w.lo is None and w.hi is None:
            return self.grid
        g = self.cfg.grid
        lo = w.lo if w.lo is not None else g.lo
        hi = w.hi if w.hi is not None else g.hi
        return landscape.RealSpaceGrid.from_window(lo, hi, h=g.h, W=self.cfg.basis.W)

    # -- landscape ----------------------------------------------------------

    @cached_property
    def landscape_coefficients(self):
        lc = self.cfg.landscape
        with self._timed("landscape_solve"):
            return landscape.solve_landscape(self.H, self.basis, method=lc.method, tol=lc.tol, max_iter=lc.max_iter)

    def _fields_on(self, grid):
        with self._timed("fields"):
            u = landscape.eval_field(self.landscape_coefficients, self.basis, grid)
            veff = landscape.effective_potential(u, cap=self.cfg.landscape.cap)
            pot = landscape.potential_field(self.potentials, grid)
        return u, veff, pot

    @cached_property
    def fields(self):
        return dict(zip((landscape.U_FIELD, landscape.VEFF, landscape.POTENTIAL), self._fields_on(self.grid)))

    @cached_property
    def weyl_fields(self):
        if self.weyl_grid is self.grid:
            return self.fields
        return dict(zip((landscape.U_FIELD, landscape.VEFF, landscape.POTENTIAL), self._fields_on(self.weyl_grid)))

    # -- spectrum -----------------------------------------------------------

    @cached_property
    def energies(self):
        e = self.cfg.weyl.energies
        if e.num < 2 or e.stop <= e.start:
            raise ConfigError("weyl.energies needs num >= 2 and stop > start")
        return np.linspace(e.start, e.stop, e.num)

    def _needed_e_max(self):
        need = self.cfg.weyl.energies.stop
        if self.cfg.density is not None:
            need = max(need, self.cfg.density.mu + 30.0 / self.cfg.density.beta)
        return need

    @cached_property
    def spectrum(self):
        sc = self.cfg.spectrum
        mode = spectrum.auto_mode(self.basis.size) if sc.mode == "auto" else sc.mode
        e_max = sc.e_max if sc.e_max is not None else self._needed_e_max()
        with self._timed("eigensolve"):
            return spectrum.eigensolve(self.H, mode, e_max if mode == spectrum.PARTIAL else None)

    @cached_property
    def counting(self):
        return spectrum.counting_function(self.spectrum, self.energies)

    def weyl_curves(self, convention=None):
        cfg = weyl.WeylConfig(convention or self.cfg.weyl.convention)
        wf = self.weyl_fields
        with self._timed("weyl"):
            std = weyl.weyl_idos(wf[landscape.POTENTIAL], self.energies, cfg)
            eff = weyl.weyl_idos(wf[landscape.VEFF], self.energies, cfg)
        return std, eff

    @cached_property
    def fit_window(self):
        fw = self.cfg.weyl.fit_window
        if fw is not None:
            return float(fw[0]), float(fw[1])
        return float(self.weyl_fields[landscape.VEFF].values.min()), float(self.energies[-1])

    @cached_property
    def fits(self):
        """Scale fits for both conventions; keys ``<convention>`` -> {standard, effective}."""
        out = {}
        for conv in (weyl.FULL_SYMBOL, weyl.HALF_SYMBOL):
            std, eff = self.weyl_curves(conv)
            out[conv] = {
                "standard": weyl.fit_scale(self.counting, std, self.fit_window),
                "effective": weyl.fit_scale(self.counting, eff, self.fit_window),
            }
        return out

    # -- density and extrema --------------------------------------------------

    @cached_property
    def density(self):
        dc = self.cfg.density
        if dc is None:
            raise ConfigError("density: section [density] with mu and beta is required")
        with self._timed("density"):
            return spectrum.electron_density(self.spectrum, self.basis, self.grid, dc.mu, dc.beta,
                                             s_norm=dc.s_norm, weight_floor=dc.weight_floor)

    def _extrema_opts(self, field):
        a = self.cfg.analysis
        # pi/W: half the shortest wavelength the basis resolves
        sep = a.min_separation if a.min_separation is not None else np.pi / self.cfg.basis.W
        return {"prominence_floor": a.prominence_frac * float(np.ptp(field.values)), "min_separation": sep}

    @cached_property
    def minima(self):
        veff = self.fields[landscape.VEFF]
        with self._timed("extrema"):
            return analysis.local_minima(veff, **self._extrema_opts(veff))

    @cached_property
    def maxima(self):
        rho = self.density
        with self._timed("extrema"):
            return analysis.local_maxima(rho, **self._extrema_opts(rho))

    @cached_property
    def match(self):
        a = self.cfg.analysis
        K = min(a.K, len(self.minima))
        if K < a.K:
            logging.getLogger(__name__).warning("only %d |V_eff| minima found, K reduced from %d", K, a.K)
        return analysis.match_extrema(self.minima, self.maxima, match_radius=a.match_radius, K=K)

    @cached_property
    def bound(self):
        J = min(self.cfg.analysis.bound_J, len(self.spectrum))
        with self._timed("bound"):
            return analysis.landscape_bound_report(self.spectrum, self.fields[landscape.U_FIELD], self.basis, J)
