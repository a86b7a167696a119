"""Plane-wave landscape solver for incommensurate bilayer Schrodinger operators."""
from .analysis import landscape_bound_report, local_maxima, local_minima, match_extrema
from .basis import build_basis, pair_index
from .errors import ConfigError, LandscapeError
from .hamiltonian import assemble, matvec
from .landscape import RealSpaceGrid, ScalarField, effective_potential, eval_field, potential_field, solve_landscape
from .lattice import check_incommensurate, make_lattice, reciprocal, rotate
from .potential import eval_potential, gaussian_potential, potential_from_modes
from .spectrum import counting_function, eigensolve, electron_density, fermi_dirac
from .weyl import WeylConfig, fit_scale, mc_phase_volume, weyl_idos

__version__ = "0.1.0"
