"""Extremum detection on grid fields, minima/maxima matching and the
pointwise landscape-bound diagnostic."""
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from . import kernels
from .spectrum import eigenfunction_values

MINIMUM = "minimum"
MAXIMUM = "maximum"


@dataclass(eq=False)
class ExtremaList:
    positions: np.ndarray  # (K, d)
    values: np.ndarray
    prominences: np.ndarray
    indices: np.ndarray  # flat grid indices
    kind: str

    def __len__(self):
        return len(self.values)


@dataclass(eq=False)
class MatchReport:
    pairs: list  # (min_rank, max_rank, distance), ranks 0-based
    matched_fraction: float
    order_agreement: float
    K: int
    match_radius: float
    unmatched_maxima: int

    def as_dict(self):
        return {
            "pairs": [[int(a), int(b), float(c)] for a, b, c in self.pairs],
            "matched_fraction": self.matched_fraction,
            "order_agreement": self.order_agreement,
            "K": self.K,
            "match_radius": self.match_radius,
            "unmatched_maxima": self.unmatched_maxima,
        }


def _structure(ndim):
    return np.ones((3,) * ndim, dtype=bool)


def _shift(a, offset, fill):
    """``out[y] = a[y + offset]`` with ``fill`` outside the array."""
    out = np.full_like(a, fill)
    src, dst = [], []
    for o, n in zip(offset, a.shape):
        if o >= 0:
            src.append(slice(o, n))
            dst.append(slice(0, n - o))
        else:
            src.append(slice(0, n + o))
            dst.append(slice(-o, n))
    out[tuple(dst)] = a[tuple(src)]
    return out


def _strict_minima(v):
    """Labels of strict (plateau-collapsed) interior minima.

    Returns (labels array, list of valid label ids).
    """
    struct = _structure(v.ndim)
    footprint = struct.copy()
    footprint[(1,) * v.ndim] = False
    nb_min = ndimage.minimum_filter(v, footprint=footprint, mode="constant", cval=np.inf)
    cand = v <= nb_min
    labels, n = ndimage.label(cand, structure=struct)
    if n == 0:
        return labels, []
    invalid = np.zeros(n + 1, dtype=bool)
    offsets = np.argwhere(struct) - 1
    for off in offsets:
        if not off.any():
            continue
        lab_nb = _shift(labels, off, 0)
        v_nb = _shift(v, off, np.nan)
        # a non-candidate neighbour at the same height means the plateau leaks
        leak = ~cand & (lab_nb > 0) & (v == v_nb)
        invalid[lab_nb[leak]] = True
    edge = np.zeros(v.shape, dtype=bool)
    for ax in range(v.ndim):
        sl = [slice(None)] * v.ndim
        sl[ax] = 0
        edge[tuple(sl)] = True
        sl[ax] = -1
        edge[tuple(sl)] = True
    invalid[np.unique(labels[edge & cand])] = True
    valid = [k for k in range(1, n + 1) if not invalid[k]]
    return labels, valid


def _find_minima(field, values, prominence_floor, min_separation, kind):
    v = np.ascontiguousarray(values, dtype=float)
    shape = v.shape
    if prominence_floor is None:
        prominence_floor = 0.01 * float(np.ptp(v)) if v.size else 0.0
    labels, valid = _strict_minima(v)
    prom = kernels.basin_prominence(v)
    points = field.grid.points()
    flat_prom = prom.reshape(-1)
    flat_v = v.reshape(-1)

    cands = []
    if valid:
        members = ndimage.find_objects(labels)
        for k in valid:
            sl = members[k - 1]
            local = np.argwhere(labels[sl] == k) + np.array([s.start for s in sl])
            flat = np.ravel_multi_index(local.T, shape)
            if len(flat) == 1:
                rep = int(flat[0])
            else:
                centre = points[flat].mean(axis=0)
                rep = int(flat[np.argmin(np.linalg.norm(points[flat] - centre, axis=1))])
            p = float(flat_prom[flat].max())
            if p >= prominence_floor:
                cands.append((flat_v[rep], rep, p))
    cands.sort(key=lambda t: (t[0], t[1]))

    kept = []
    for val, rep, p in cands:
        pos = points[rep]
        if min_separation and any(np.linalg.norm(pos - points[r]) < min_separation for _, r, _ in kept):
            continue
        kept.append((val, rep, p))
    idx = np.array([r for _, r, _ in kept], dtype=np.int64)
    d = field.grid.dim
    positions = points[idx] if len(idx) else np.empty((0, d))
    sign = 1.0 if kind == MINIMUM else -1.0
    vals = sign * np.array([t[0] for t in kept], dtype=float)
    proms = np.array([t[2] for t in kept], dtype=float)
    return ExtremaList(positions, vals, proms, idx, kind)


def local_minima(field, prominence_floor=None, min_separation=0.0):
    """Interior local minima ordered by ascending value.

    A sample (or a flat plateau, collapsed to its most central sample) is a
    minimum when every neighbour (2 in 1D, 8 in 2D) is strictly larger.
    Minima touching the grid boundary are discarded.  Candidates need a
    topographic prominence of at least ``prominence_floor`` (default 1% of
    the field range) and are thinned greedily, deepest first, to
    ``min_separation``.
    """
    return _find_minima(field, field.values, prominence_floor, min_separation, MINIMUM)


def local_maxima(field, prominence_floor=None, min_separation=0.0):
    """Interior local maxima ordered by descending value (see local_minima)."""
    return _find_minima(field, -np.asarray(field.values, dtype=float), prominence_floor, min_separation, MAXIMUM)


def _concordance(pairs):
    if len(pairs) < 2:
        return float(len(pairs))
    agree = total = 0
    for a in range(len(pairs)):
        for b in range(a + 1, len(pairs)):
            total += 1
            agree += (pairs[a][1] < pairs[b][1]) == (pairs[a][0] < pairs[b][0])
    return agree / total


def match_extrema(minima, maxima, match_radius=0.5, K=None):
    """Greedy nearest matching of the first K minima to unmatched maxima.

    ``order_agreement`` is the fraction of matched pairs-of-pairs whose
    minimum ranks and maximum ranks are ordered the same way.
    """
    if K is None:
        K = len(minima)
    if K > len(minima):
        raise ValueError(f"K={K} exceeds the {len(minima)} minima found")
    free = np.ones(len(maxima), dtype=bool)
    pairs = []
    for i in range(K):
        if not free.any():
            break
        dist = np.linalg.norm(maxima.positions - minima.positions[i], axis=1)
        dist[~free] = np.inf
        j = int(np.argmin(dist))
        if dist[j] <= match_radius:
            free[j] = False
            pairs.append((i, j, float(dist[j])))
    frac = len(pairs) / K if K else 0.0
    return MatchReport(pairs, frac, _concordance(pairs), K, float(match_radius), int(free.sum()))


def landscape_bound_report(spectrum, u_field, basis, J):
    """Per-eigenpair ``max_x |psi_j(x)| / (lambda_j u(x) ||psi_j||_inf)``.

    Values <= 1 mean the bounded-domain landscape bound holds on this grid.
    """
    if J > len(spectrum):
        raise ValueError(f"J={J} exceeds the {len(spectrum)} available eigenpairs")
    u = u_field.values
    out = []
    for j in range(J):
        psi = np.abs(eigenfunction_values(spectrum, basis, u_field.grid, j))
        lam = float(spectrum.eigenvalues[j])
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = psi / (lam * u)
        ratio = np.where(u > 0, ratio, np.inf)
        out.append({"j": j + 1, "lambda": lam, "ratio": float(ratio.max() / psi.max())})
    return out
