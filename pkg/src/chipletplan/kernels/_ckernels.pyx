# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels; see ``_pykernels`` for the reference semantics."""
import numpy as np
cimport numpy as cnp
from libc.math cimport floor, ceil, sqrt
from libc.stdlib cimport malloc, free

cnp.import_array()

cdef double EPS = 1e-9


def anchor_mask(placed, double w, double h, double spacing, double width,
                double height, int lattice, double pitch_x, double pitch_y):
    cdef double[:, ::1] rects = np.ascontiguousarray(placed, dtype=np.float64).reshape(-1, 4)
    out = np.zeros((lattice, lattice), dtype=np.uint8)
    cdef unsigned char[:, ::1] mask = out
    cdef Py_ssize_t m = rects.shape[0]
    cdef int ix, iy
    cdef Py_ssize_t k
    cdef double x, y
    cdef bint free
    for iy in range(lattice):
        y = iy * pitch_y
        if y + h > height + EPS:
            continue
        for ix in range(lattice):
            x = ix * pitch_x
            if x + w > width + EPS:
                continue
            free = True
            for k in range(m):
                if (x + w + spacing <= rects[k, 0] + EPS
                        or rects[k, 0] + rects[k, 2] + spacing <= x + EPS
                        or y + h + spacing <= rects[k, 1] + EPS
                        or rects[k, 1] + rects[k, 3] + spacing <= y + EPS):
                    continue
                free = False
                break
            if free:
                mask[iy, ix] = 1
    return out.view(np.bool_)


cdef inline void _span(double x0, double w, int n, int* lo, int* hi) noexcept:
    lo[0] = <int>floor(x0)
    hi[0] = <int>ceil(x0 + w)
    if lo[0] < 0:
        lo[0] = 0
    if hi[0] > n:
        hi[0] = n


cdef inline double _frac(int i, double x0, double w) noexcept:
    cdef double a = i + 1.0
    cdef double b = i
    if x0 + w < a:
        a = x0 + w
    if x0 > b:
        b = x0
    return a - b


def rasterize(rects, int nx, int ny):
    cdef double[:, ::1] r = np.ascontiguousarray(rects, dtype=np.float64).reshape(-1, 5)
    out = np.zeros((ny, nx))
    cdef double[:, ::1] pm = out
    cdef Py_ssize_t j
    cdef int xlo, xhi, ylo, yhi, ix, iy
    cdef double fx, fy, dens
    for j in range(r.shape[0]):
        _span(r[j, 0], r[j, 2], nx, &xlo, &xhi)
        _span(r[j, 1], r[j, 3], ny, &ylo, &yhi)
        dens = r[j, 4] / (r[j, 2] * r[j, 3])
        for iy in range(ylo, yhi):
            fy = _frac(iy, r[j, 1], r[j, 3])
            if fy <= 1e-12:
                continue
            for ix in range(xlo, xhi):
                fx = _frac(ix, r[j, 0], r[j, 2])
                if fx <= 1e-12:
                    continue
                pm[iy, ix] += fy * fx * dens
    return out


cdef inline void _bracket(double[::1] axis, double q, int* i0, int* i1, double* t) noexcept:
    cdef int n = axis.shape[0]
    cdef int lo, hi, mid
    if n == 1:
        i0[0] = 0; i1[0] = 0; t[0] = 0.0
        return
    if q <= axis[0]:
        i0[0] = 0; i1[0] = 1; t[0] = 0.0
        return
    if q >= axis[n - 1]:
        i0[0] = n - 2; i1[0] = n - 1; t[0] = 1.0
        return
    lo = 0
    hi = n - 1
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if axis[mid] <= q:
            lo = mid
        else:
            hi = mid
    i0[0] = lo; i1[0] = lo + 1
    t[0] = (q - axis[lo]) / (axis[lo + 1] - axis[lo])


def bilinear(axis_w, axis_h, table, double w, double h):
    cdef double[::1] aw = np.ascontiguousarray(axis_w, dtype=np.float64)
    cdef double[::1] ah = np.ascontiguousarray(axis_h, dtype=np.float64)
    cdef double[:, ::1] s = np.ascontiguousarray(table, dtype=np.float64)
    return _bilinear(aw, ah, s, w, h)


cdef inline double _bilinear(double[::1] aw, double[::1] ah, double[:, ::1] s,
                             double w, double h) noexcept:
    cdef int i0, i1, j0, j1
    cdef double tx, ty
    _bracket(aw, w, &i0, &i1, &tx)
    _bracket(ah, h, &j0, &j1, &ty)
    return ((1.0 - tx) * (1.0 - ty) * s[i0, j0] + tx * (1.0 - ty) * s[i1, j0]
            + (1.0 - tx) * ty * s[i0, j1] + tx * ty * s[i1, j1])


cdef int _axis_offsets(int lo, int hi, double x0, double w, long c, int n, int reach,
                       bint images, int* pos, int* off, unsigned char* direct,
                       double* frac) noexcept:
    # (cell position, offset, direct flag) triples with offset below reach
    cdef int m = 0
    cdef int i, d
    cdef double f
    for i in range(lo, hi):
        f = _frac(i, x0, w)
        frac[i - lo] = f
        if f <= 1e-12:
            continue
        d = i - c
        if d < 0:
            d = -d
        if d < reach:
            pos[m] = i - lo; off[m] = d; direct[m] = 1; m += 1
        if images:
            d = i + c + 1
            if d < reach:
                pos[m] = i - lo; off[m] = d; direct[m] = 0; m += 1
            d = 2 * n - 1 - i - c
            if d < reach:
                pos[m] = i - lo; off[m] = d; direct[m] = 0; m += 1
    return m


def mutual_rises(rects, kernel2d, int nx, int ny, bint images=True):
    cdef double[:, ::1] r = np.ascontiguousarray(rects, dtype=np.float64).reshape(-1, 5)
    cdef double[:, ::1] K = np.ascontiguousarray(kernel2d, dtype=np.float64)
    return _mutual(r, K, nx, ny, images)


def anchored_rises(anchors, double[:, ::1] sizes, double pitch_x, double pitch_y,
                   double[:, ::1] kernel2d, int nx, int ny, bint images=True):
    cdef Py_ssize_t n = sizes.shape[0]
    if len(anchors) != n:
        raise ValueError("anchors and sizes differ in length")
    buf = np.empty((n, 5))
    cdef double[:, ::1] r = buf
    cdef Py_ssize_t k
    for k in range(n):
        a = anchors[k]
        r[k, 0] = <double>a[0] * pitch_x
        r[k, 1] = <double>a[1] * pitch_y
        r[k, 2] = sizes[k, 0]
        r[k, 3] = sizes[k, 1]
        r[k, 4] = sizes[k, 2]
    return _mutual(r, kernel2d, nx, ny, images)


cdef _mutual(double[:, ::1] r, double[:, ::1] K, int nx, int ny, bint images):
    cdef Py_ssize_t n = r.shape[0]
    cdef int ry = K.shape[0]
    cdef int rx = K.shape[1]
    out = np.zeros(n)
    cdef double[::1] rises = out
    cdef long[::1] cx = np.empty(n, dtype=np.int64)
    cdef long[::1] cy = np.empty(n, dtype=np.int64)
    cdef int big = 3 * (nx if nx > ny else ny)
    # one block: offsets/positions (int), direct flags (char), fractions (double)
    cdef double* fx = <double*>malloc(2 * big * sizeof(double))
    cdef int* xpos = <int*>malloc(4 * big * sizeof(int))
    cdef unsigned char* xdir = <unsigned char*>malloc(2 * big)
    if fx == NULL or xpos == NULL or xdir == NULL:
        free(fx); free(xpos); free(xdir)
        raise MemoryError()
    cdef double* fy = fx + big
    cdef int* xoff = xpos + big
    cdef int* ypos = xpos + 2 * big
    cdef int* yoff = xpos + 3 * big
    cdef unsigned char* ydir = xdir + big
    cdef Py_ssize_t i, j
    cdef int xlo, xhi, ylo, yhi, mx, my, a, b
    cdef long c
    cdef double dens, acc, row
    cdef bint same
    for i in range(n):
        c = <long>floor(r[i, 0] + 0.5 * r[i, 2])
        cx[i] = 0 if c < 0 else (nx - 1 if c > nx - 1 else c)
        c = <long>floor(r[i, 1] + 0.5 * r[i, 3])
        cy[i] = 0 if c < 0 else (ny - 1 if c > ny - 1 else c)
    for j in range(n):
        if r[j, 4] == 0.0:
            continue
        _span(r[j, 0], r[j, 2], nx, &xlo, &xhi)
        _span(r[j, 1], r[j, 3], ny, &ylo, &yhi)
        dens = r[j, 4] / (r[j, 2] * r[j, 3])
        for i in range(n):
            mx = _axis_offsets(xlo, xhi, r[j, 0], r[j, 2], cx[i], nx, rx, images,
                               xpos, xoff, xdir, fx)
            if mx == 0:
                continue
            my = _axis_offsets(ylo, yhi, r[j, 1], r[j, 3], cy[i], ny, ry, images,
                               ypos, yoff, ydir, fy)
            same = i == j
            acc = 0.0
            for b in range(my):
                row = 0.0
                for a in range(mx):
                    if same and xdir[a] and ydir[b]:
                        continue
                    row += fx[xpos[a]] * K[yoff[b], xoff[a]]
                acc += fy[ypos[b]] * row
            rises[i] += dens * acc
    free(fx); free(xpos); free(xdir)
    return out


ctypedef fused real:
    float
    double


cdef void _adam_loop(real* p, const real* g, real* m, real* v, Py_ssize_t n, real step_size,
                    real b1, real b2, real c1, real c2, real inv_sqrt_c2,
                    real eps) noexcept nogil:
    # c1 = 1 - b1 and c2 = 1 - b2 come in precomputed: in float32, 1 - (float)0.999
    # is off by 1e-5 relative
    cdef Py_ssize_t i
    cdef real gi, mi, vi
    for i in range(n):
        gi = g[i]
        mi = b1 * m[i] + c1 * gi
        vi = b2 * v[i] + c2 * gi * gi
        m[i] = mi
        v[i] = vi
        p[i] -= step_size * mi / (sqrt(vi) * inv_sqrt_c2 + eps)


def _adam(real[::1] p, real[::1] g, real[::1] m, real[::1] v, double step_size,
          double b1, double b2, double inv_sqrt_c2, double eps):
    _adam_loop(&p[0], &g[0], &m[0], &v[0], p.shape[0], <real>step_size, <real>b1, <real>b2,
               <real>(1.0 - b1), <real>(1.0 - b2), <real>inv_sqrt_c2, <real>eps)


def adam_update(p, g, m, v, double step_size, double b1, double b2, double inv_sqrt_c2,
                double eps):
    """In-place Adam step on contiguous arrays of one dtype."""
    g = np.ascontiguousarray(g, dtype=p.dtype)
    _adam(p.reshape(-1), g.reshape(-1), m.reshape(-1), v.reshape(-1), step_size, b1, b2,
          inv_sqrt_c2, eps)
