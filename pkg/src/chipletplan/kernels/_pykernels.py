"""NumPy implementations of the hot kernels.

Signatures and semantics mirror ``_ckernels.pyx`` exactly; the compiled module
is preferred when importable.
"""
import math

import numpy as np

EPS = 1e-9


def anchor_mask(placed, w, h, spacing, width, height, lattice, pitch_x, pitch_y):
    """Feasible lower-left anchors for a ``w`` x ``h`` rectangle.

    ``placed`` is an ``(m, 4)`` array of ``x, y, w, h`` rectangles in mm.
    Returns a boolean ``(lattice, lattice)`` array indexed ``[iy, ix]``.
    """
    xs = np.arange(lattice) * pitch_x
    ys = np.arange(lattice) * pitch_y
    ok_x = xs + w <= width + EPS
    ok_y = ys + h <= height + EPS
    mask = ok_y[:, None] & ok_x[None, :]
    for px, py, pw, ph in np.asarray(placed, dtype=np.float64).reshape(-1, 4):
        sep_x = (xs + w + spacing <= px + EPS) | (px + pw + spacing <= xs + EPS)
        sep_y = (ys + h + spacing <= py + EPS) | (py + ph + spacing <= ys + EPS)
        mask &= sep_y[:, None] | sep_x[None, :]
    return mask


def _cell_overlaps(x0, w, n):
    lo = max(int(math.floor(x0)), 0)
    hi = min(int(math.ceil(x0 + w)), n)
    idx = np.arange(lo, hi)
    frac = np.minimum(idx + 1.0, x0 + w) - np.maximum(idx.astype(np.float64), x0)
    keep = frac > 1e-12
    return idx[keep], frac[keep]


def rasterize(rects, nx, ny):
    """Area-weighted power map from ``(n, 5)`` rects ``x, y, w, h, p`` in cell units."""
    out = np.zeros((ny, nx))
    for x0, y0, w, h, p in np.asarray(rects, dtype=np.float64).reshape(-1, 5):
        ix, fx = _cell_overlaps(x0, w, nx)
        iy, fy = _cell_overlaps(y0, h, ny)
        if ix.size and iy.size:
            out[iy[:, None], ix[None, :]] += np.outer(fy, fx) * (p / (w * h))
    return out


def _bracket(axis, q):
    n = axis.shape[0]
    if n == 1:
        return 0, 0, 0.0
    if q <= axis[0]:
        return 0, 1, 0.0
    if q >= axis[n - 1]:
        return n - 2, n - 1, 1.0
    i = int(np.searchsorted(axis, q, side="right")) - 1
    i = min(max(i, 0), n - 2)
    return i, i + 1, (q - axis[i]) / (axis[i + 1] - axis[i])


def bilinear(axis_w, axis_h, table, w, h):
    i0, i1, tx = _bracket(axis_w, w)
    j0, j1, ty = _bracket(axis_h, h)
    return ((1.0 - tx) * (1.0 - ty) * table[i0, j0] + tx * (1.0 - ty) * table[i1, j0]
            + (1.0 - tx) * ty * table[i0, j1] + tx * ty * table[i1, j1])


def _axis_offsets(idx, c, n, reach, images):
    """Offsets from centre cell ``c`` to source cells ``idx`` and their mirror images.

    Returns ``(position in idx, offset, is_direct)`` for every offset below ``reach``.
    """
    pos = np.arange(idx.size)
    cand = [(pos, np.abs(idx - c), np.ones(idx.size, dtype=bool))]
    if images:
        # reflections of cell centres about the two adiabatic edges
        cand.append((pos, idx + c + 1, np.zeros(idx.size, dtype=bool)))
        cand.append((pos, 2 * n - 1 - idx - c, np.zeros(idx.size, dtype=bool)))
    p, d, direct = (np.concatenate(v) for v in zip(*cand))
    keep = d < reach
    return p[keep], d[keep], direct[keep]


def mutual_rises(rects, kernel2d, nx, ny, images=True):
    """Temperature rise at each chiplet's centre cell caused by the other chiplets.

    ``rects`` are ``x, y, w, h, p`` in cell units. ``kernel2d[|dy|, |dx|]`` is
    the rise per watt at a cell offset; offsets outside it contribute nothing.
    With ``images`` the first-order mirror sources about each adiabatic edge
    are added, including those of the victim itself.
    """
    rects = np.asarray(rects, dtype=np.float64).reshape(-1, 5)
    n = rects.shape[0]
    ry, rx = kernel2d.shape
    rises = np.zeros(n)
    cx = np.clip(np.floor(rects[:, 0] + 0.5 * rects[:, 2]).astype(np.int64), 0, nx - 1)
    cy = np.clip(np.floor(rects[:, 1] + 0.5 * rects[:, 3]).astype(np.int64), 0, ny - 1)
    for j in range(n):
        x0, y0, w, h, p = rects[j]
        if p == 0.0:
            continue
        ix, fx = _cell_overlaps(x0, w, nx)
        iy, fy = _cell_overlaps(y0, h, ny)
        dens = p / (w * h)
        for i in range(n):
            px, dx, ex = _axis_offsets(ix, cx[i], nx, rx, images)
            py, dy, ey = _axis_offsets(iy, cy[i], ny, ry, images)
            if not (px.size and py.size):
                continue
            k = kernel2d[dy[:, None], dx[None, :]]
            wgt = fy[py][:, None] * fx[px][None, :] * k
            if i == j:
                wgt[ey[:, None] & ex[None, :]] = 0.0
            rises[i] += dens * float(wgt.sum())
    return rises


def anchored_rises(anchors, sizes, pitch_x, pitch_y, kernel2d, nx, ny, images=True):
    """``mutual_rises`` for chiplets of ``sizes`` (w, h, p) placed at lattice ``anchors``.

    Pitches and sizes are in cell units.
    """
    sizes = np.asarray(sizes, dtype=np.float64).reshape(-1, 3)
    anc = np.asarray(anchors, dtype=np.float64).reshape(-1, 2)
    rects = np.column_stack([anc[:, 0] * pitch_x, anc[:, 1] * pitch_y, sizes])
    return mutual_rises(rects, kernel2d, nx, ny, images)


def adam_update(p, g, m, v, step_size, b1, b2, inv_sqrt_c2, eps):
    """In-place Adam step: ``p -= step_size * m / (sqrt(v) * inv_sqrt_c2 + eps)``
    after the moment updates; ``step_size`` already carries the bias correction."""
    g = np.asarray(g, dtype=p.dtype)
    m *= b1
    m += (1.0 - b1) * g
    v *= b2
    v += (1.0 - b2) * g * g
    denom = np.sqrt(v)
    denom *= inv_sqrt_c2
    denom += eps
    p -= (step_size * m / denom).astype(p.dtype, copy=False)
