"""Hot inner loops: grid Fourier sums, density accumulation, watershed
prominence and Weyl quadrature sums.

Every kernel exists twice, once as a numba ``@njit`` loop nest and once as a
pure numpy (or plain Python) reference.  The numba path is the default when
numba imports cleanly; set ``PWLANDSCAPE_DISABLE_NUMBA=1`` to force the numpy
path.  Both paths are exported (``numba_kernels`` / ``numpy_kernels``) so tests
and ``benchmarks/bench_kernels.py`` can compare them directly.

Grid conventions: a regular grid is given by ``origin`` (d,), ``spacing`` (d,)
and ``counts`` (d,) with points ``origin + i * spacing``.  One-dimensional
grids are handled as two-dimensional grids with a single column, so every
kernel returns an array of shape ``(nx, ny)``.
"""
import os

import numpy as np

_CHUNK_BYTES = 32 * 2**20

try:
    import numba
    from numba import njit, prange

    HAVE_NUMBA = True
    # the bundled TBB is too old on some hosts; prefer OpenMP, then workqueue
    if "NUMBA_THREADING_LAYER_PRIORITY" not in os.environ:
        numba.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and os.environ.get("PWLANDSCAPE_DISABLE_NUMBA", "") not in ("1", "true", "yes")


def _as_grid(q, origin, spacing, counts):
    """Normalise 1D/2D grid arguments to explicit 2D form."""
    q = np.asarray(q, dtype=np.float64)
    if q.ndim == 1:
        q = q[:, None]
    d = q.shape[1]
    origin = np.atleast_1d(np.asarray(origin, dtype=np.float64))
    spacing = np.atleast_1d(np.asarray(spacing, dtype=np.float64))
    counts = tuple(int(c) for c in np.atleast_1d(counts))
    if d == 1:
        qx, qy = q[:, 0].copy(), np.zeros(q.shape[0])
        x0, hx, nx = origin[0], spacing[0], counts[0]
        y0, hy, ny = 0.0, 0.0, 1
    else:
        qx, qy = q[:, 0].copy(), q[:, 1].copy()
        x0, hx, nx = origin[0], spacing[0], counts[0]
        y0, hy, ny = origin[1], spacing[1], counts[1]
    return qx, qy, x0, hx, nx, y0, hy, ny


# ---------------------------------------------------------------------------
# numpy reference path
# ---------------------------------------------------------------------------

def _fourier_sum_np(coef, qx, qy, x0, hx, nx, y0, hy, ny):
    coef = np.asarray(coef, dtype=np.complex128)
    ys = y0 + hy * np.arange(ny)
    py = np.exp(1j * np.outer(ys, qy))  # (ny, N)
    out = np.empty((nx, ny), dtype=np.complex128)
    n = len(qx)
    step = max(1, _CHUNK_BYTES // (16 * max(n, 1)))
    for a0 in range(0, nx, step):
        xs = x0 + hx * np.arange(a0, min(nx, a0 + step))
        px = np.exp(1j * np.outer(xs, qx)) * coef
        out[a0:a0 + len(xs)] = px @ py.T
    return out


def _density_np(phi, weights, qx, qy, x0, hx, nx, y0, hy, ny):
    phi = np.asarray(phi, dtype=np.complex128)
    weights = np.asarray(weights, dtype=np.float64)
    ys = y0 + hy * np.arange(ny)
    py = np.exp(1j * np.outer(ys, qy))
    out = np.empty((nx, ny))
    n, nj = phi.shape
    step = max(1, _CHUNK_BYTES // (16 * max(n, nj, 1) * ny))
    for a0 in range(0, nx, step):
        xs = x0 + hx * np.arange(a0, min(nx, a0 + step))
        px = np.exp(1j * np.outer(xs, qx))
        ph = (px[:, None, :] * py[None, :, :]).reshape(-1, n)
        psi = ph @ phi
        out[a0:a0 + len(xs)] = ((psi.real**2 + psi.imag**2) @ weights).reshape(len(xs), ny)
    return out


def _neighbor_offsets(shape):
    if len(shape) == 1 or shape[1] == 1:
        return np.array([[-1, 0], [1, 0]], dtype=np.int64)
    return np.array([[-1, -1], [-1, 0], [-1, 1], [0, -1], [0, 1], [1, -1], [1, 0], [1, 1]], dtype=np.int64)


def _prominence_py(values, order, offsets, nx, ny):
    # union-find flooding from the lowest sample upward; a basin dies when it
    # meets a basin with a lower (or earlier-ranked) minimum
    n = nx * ny
    parent = np.full(n, -1, dtype=np.int64)
    basin_min = np.full(n, -1, dtype=np.int64)
    rank = np.empty(n, dtype=np.int64)
    for i in range(n):
        rank[order[i]] = i
    prom = np.full(n, -1.0)

    def find(p):
        root = p
        while parent[root] != root:
            root = parent[root]
        while parent[p] != root:
            nxt = parent[p]
            parent[p] = root
            p = nxt
        return root

    for i in range(n):
        p = order[i]
        parent[p] = p
        basin_min[p] = p
        a, b = p // ny, p % ny
        for k in range(offsets.shape[0]):
            aa, bb = a + offsets[k, 0], b + offsets[k, 1]
            if aa < 0 or aa >= nx or bb < 0 or bb >= ny:
                continue
            nb = aa * ny + bb
            if parent[nb] < 0:
                continue
            r1, r2 = find(p), find(nb)
            if r1 == r2:
                continue
            m1, m2 = basin_min[r1], basin_min[r2]
            if rank[m1] > rank[m2]:
                prom[m1] = values[p] - values[m1]
                parent[r1] = r2
            else:
                prom[m2] = values[p] - values[m2]
                parent[r2] = r1
    root = find(order[0])
    g = basin_min[root]
    prom[g] = values[order[n - 1]] - values[g]
    return prom


def _weyl_sums_np(p_sorted, energies, power):
    out = np.empty(len(energies))
    # only samples below E contribute; p_sorted is ascending
    stop = np.searchsorted(p_sorted, energies)
    for i, (e, m) in enumerate(zip(energies, stop)):
        out[i] = ((e - p_sorted[:m]) ** power).sum()
    return out


# ---------------------------------------------------------------------------
# numba path
# ---------------------------------------------------------------------------

if HAVE_NUMBA:

    _BLOCK_ROWS = 32  # rows per block; the phase recurrence is reseeded per block

    @njit(cache=True)
    def _plane_waves_nb(qx, qy, x0, hx, a0, rows, py, out):
        """Fill ``out[(r*ny + b), k] = exp(i (qx_k x_r + qy_k y_b))`` for a row block."""
        n = qx.shape[0]
        ny = py.shape[0]
        px = np.empty(n, dtype=np.complex128)
        step = np.empty(n, dtype=np.complex128)
        x = x0 + hx * a0
        for k in range(n):
            px[k] = np.exp(1j * qx[k] * x)
            step[k] = np.exp(1j * qx[k] * hx)
        for r in range(rows):
            for b in range(ny):
                base = r * ny + b
                for k in range(n):
                    out[base, k] = px[k] * py[b, k]
            for k in range(n):
                px[k] *= step[k]

    @njit(cache=True)
    def _y_phases_nb(qy, y0, hy, ny):
        n = qy.shape[0]
        py = np.empty((ny, n), dtype=np.complex128)
        for b in range(ny):
            y = y0 + hy * b
            for k in range(n):
                py[b, k] = np.exp(1j * qy[k] * y)
        return py

    @njit(parallel=True, cache=True)
    def _fourier_sum_nb(coef, qx, qy, x0, hx, nx, y0, hy, ny):
        # out[a, b] = sum_k (coef_k e^{i qx_k x_a}) e^{i qy_k y_b}: one GEMM per row block
        n = qx.shape[0]
        pyt = np.ascontiguousarray(_y_phases_nb(qy, y0, hy, ny).T)
        ones = np.ones((1, n), dtype=np.complex128)
        out = np.empty((nx, ny), dtype=np.complex128)
        nblocks = (nx + _BLOCK_ROWS - 1) // _BLOCK_ROWS
        for blk in prange(nblocks):
            a0 = blk * _BLOCK_ROWS
            rows = min(_BLOCK_ROWS, nx - a0)
            px = np.empty((rows, n), dtype=np.complex128)
            _plane_waves_nb(qx, qy, x0, hx, a0, rows, ones, px)
            for r in range(rows):
                for k in range(n):
                    px[r, k] *= coef[k]
            out[a0:a0 + rows] = np.dot(px, pyt)
        return out

    @njit(parallel=True, cache=True)
    def _density_nb(phi, weights, qx, qy, x0, hx, nx, y0, hy, ny):
        n, nj = phi.shape
        py = _y_phases_nb(qy, y0, hy, ny)
        out = np.empty(nx * ny)
        nblocks = (nx + _BLOCK_ROWS - 1) // _BLOCK_ROWS
        for blk in prange(nblocks):
            a0 = blk * _BLOCK_ROWS
            rows = min(_BLOCK_ROWS, nx - a0)
            ph = np.empty((rows * ny, n), dtype=np.complex128)
            _plane_waves_nb(qx, qy, x0, hx, a0, rows, py, ph)
            psi = np.dot(ph, phi)
            for i in range(rows * ny):
                acc = 0.0
                for j in range(nj):
                    v = psi[i, j]
                    acc += weights[j] * (v.real * v.real + v.imag * v.imag)
                out[a0 * ny + i] = acc
        return out.reshape(nx, ny)

    @njit(cache=True)
    def _find_nb(parent, p):
        root = p
        while parent[root] != root:
            root = parent[root]
        while parent[p] != root:
            nxt = parent[p]
            parent[p] = root
            p = nxt
        return root

    @njit(cache=True)
    def _prominence_nb(values, order, offsets, nx, ny):
        n = nx * ny
        parent = np.full(n, -1, dtype=np.int64)
        basin_min = np.full(n, -1, dtype=np.int64)
        rank = np.empty(n, dtype=np.int64)
        for i in range(n):
            rank[order[i]] = i
        prom = np.full(n, -1.0)
        for i in range(n):
            p = order[i]
            parent[p] = p
            basin_min[p] = p
            a = p // ny
            b = p % ny
            for k in range(offsets.shape[0]):
                aa = a + offsets[k, 0]
                bb = b + offsets[k, 1]
                if aa < 0 or aa >= nx or bb < 0 or bb >= ny:
                    continue
                nb = aa * ny + bb
                if parent[nb] < 0:
                    continue
                r1 = _find_nb(parent, p)
                r2 = _find_nb(parent, nb)
                if r1 == r2:
                    continue
                m1 = basin_min[r1]
                m2 = basin_min[r2]
                if rank[m1] > rank[m2]:
                    prom[m1] = values[p] - values[m1]
                    parent[r1] = r2
                else:
                    prom[m2] = values[p] - values[m2]
                    parent[r2] = r1
        root = _find_nb(parent, order[0])
        g = basin_min[root]
        prom[g] = values[order[n - 1]] - values[g]
        return prom

    @njit(parallel=True, cache=True)
    def _weyl_sums_nb(p_sorted, energies, power):
        out = np.zeros(energies.shape[0])
        sqrt = power == 0.5
        linear = power == 1.0
        for i in prange(energies.shape[0]):
            e = energies[i]
            m = np.searchsorted(p_sorted, e)
            s = 0.0
            for k in range(m):
                t = e - p_sorted[k]
                if sqrt:
                    s += np.sqrt(t)
                elif linear:
                    s += t
                else:
                    s += t**power
            out[i] = s
        return out


# ---------------------------------------------------------------------------
# public entry points
# ---------------------------------------------------------------------------

def _make(impl):
    fourier, density, prominence, weyl = impl

    def grid_fourier_sum(coef, q, origin, spacing, counts):
        """Evaluate ``sum_k coef_k exp(i q_k . x)`` on every grid point."""
        qx, qy, x0, hx, nx, y0, hy, ny = _as_grid(q, origin, spacing, counts)
        return fourier(np.ascontiguousarray(coef, dtype=np.complex128), qx, qy, x0, hx, nx, y0, hy, ny)

    def grid_density(phi, weights, q, origin, spacing, counts):
        """Evaluate ``sum_j w_j |sum_k phi_kj exp(i q_k . x)|^2`` on the grid."""
        qx, qy, x0, hx, nx, y0, hy, ny = _as_grid(q, origin, spacing, counts)
        phi = np.ascontiguousarray(phi, dtype=np.complex128)
        return density(phi, np.ascontiguousarray(weights, dtype=np.float64), qx, qy, x0, hx, nx, y0, hy, ny)

    def basin_prominence(values):
        """Topographic prominence of every basin minimum of a 1D/2D array.

        Returns an array of the same shape holding the prominence at each
        basin's lowest sample (first in stable sort order for plateaus) and
        -1 elsewhere.  The global minimum gets the full field range.
        """
        arr = np.asarray(values, dtype=np.float64)
        shape = arr.shape if arr.ndim == 2 else (arr.shape[0], 1)
        flat = np.ascontiguousarray(arr.reshape(-1))
        order = np.argsort(flat, kind="stable").astype(np.int64)
        offsets = _neighbor_offsets(shape)
        return prominence(flat, order, offsets, shape[0], shape[1]).reshape(arr.shape)

    def weyl_sums(samples, energies, power):
        """``sum_x (E - P(x))_+^power`` for each energy."""
        p_sorted = np.sort(np.asarray(samples, dtype=np.float64).reshape(-1))
        return weyl(p_sorted, np.ascontiguousarray(energies, dtype=np.float64), float(power))

    return {
        "grid_fourier_sum": grid_fourier_sum,
        "grid_density": grid_density,
        "basin_prominence": basin_prominence,
        "weyl_sums": weyl_sums,
    }


numpy_kernels = _make((_fourier_sum_np, _density_np, _prominence_py, _weyl_sums_np))
numba_kernels = _make((_fourier_sum_nb, _density_nb, _prominence_nb, _weyl_sums_nb)) if HAVE_NUMBA else None

_active = numba_kernels if USE_NUMBA else numpy_kernels
BACKEND = "numba" if USE_NUMBA else "numpy"

grid_fourier_sum = _active["grid_fourier_sum"]
grid_density = _active["grid_density"]
basin_prominence = _active["basin_prominence"]
weyl_sums = _active["weyl_sums"]


def set_threads(n):
    """Limit numba's worker pool; a no-op on the numpy path."""
    if USE_NUMBA and n:
        numba.set_num_threads(min(int(n), numba.config.NUMBA_NUM_THREADS))
