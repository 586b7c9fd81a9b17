# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled integration kernel for x' = v(x) + A + B*F(t).

Each trajectory is integrated independently with a Dormand-Prince 5(4)
pair and PI step control, carrying an optional log-derivative channel
l' = v'(x) so that exp(l) is the spatial derivative of the flow.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport sin, cos, exp, fabs, floor, pow

cnp.import_array()

cdef double TWO_PI = 6.283185307179586

# forcing kinds, shared with the Python fallback
cdef enum:
    F_NONE = 0
    F_TRIG = 1
    F_STEP = 2
    F_SPLINE = 3

cdef struct Rhs:
    const double* va
    const double* vb
    int vdeg
    double A
    double B
    int fkind
    const double* fa
    const double* fb
    int fn
    double fdelta


cdef inline void field_eval(const Rhs* P, double x, double* val, double* dval) noexcept nogil:
    cdef double c1 = cos(x), s1 = sin(x)
    cdef double ck = c1, sk = s1, tmp
    cdef double acc = P.va[0], dacc = 0.0
    cdef int k
    for k in range(1, P.vdeg + 1):
        acc += P.va[k] * ck + P.vb[k] * sk
        dacc += k * (P.vb[k] * ck - P.va[k] * sk)
        tmp = ck * c1 - sk * s1
        sk = sk * c1 + ck * s1
        ck = tmp
    val[0] = acc
    dval[0] = dacc


cdef inline double psi(double u) noexcept nogil:
    cdef double a, b
    if u <= 1.0 / 3.0:
        return 0.0
    if u >= 2.0 / 3.0:
        return 1.0
    a = exp(-1.0 / (3.0 * u - 1.0))
    b = exp(-1.0 / (2.0 - 3.0 * u))
    return a / (a + b)


cdef inline double forcing_eval(const Rhs* P, double t) noexcept nogil:
    cdef double u, c1, s1, ck, sk, tmp, acc, d, d2, e, height, hh
    cdef int k, s, i
    if P.fkind == F_NONE:
        return 0.0
    u = t - TWO_PI * floor(t / TWO_PI)
    if P.fkind == F_TRIG:
        c1 = cos(u)
        s1 = sin(u)
        ck = c1
        sk = s1
        acc = P.fa[0]
        for k in range(1, P.fn + 1):
            acc += P.fa[k] * ck + P.fb[k] * sk
            tmp = ck * c1 - sk * s1
            sk = sk * c1 + ck * s1
            ck = tmp
        return acc
    if P.fkind == F_STEP:
        # fa: T_0..T_k (decreasing), fb: plateau heights t_s/delta
        d = P.fdelta
        d2 = d * d
        for s in range(1, P.fn + 1):
            e = P.fa[s - 1]
            if u >= P.fa[s] and u < e:
                height = P.fb[s - 1]
                if u < e - d - d2:
                    return 0.0
                if u < e - d:
                    return height * psi((u - e + d + d2) / d2)
                if u < e - d2:
                    return height
                return height * psi((e - u) / d2)
        return 0.0
    # periodic cubic spline, fa holds n rows of 4 coefficients (highest power first)
    hh = TWO_PI / P.fn
    i = <int>(u / hh)
    if i >= P.fn:
        i = P.fn - 1
    u = u - i * hh
    return ((P.fa[4 * i] * u + P.fa[4 * i + 1]) * u + P.fa[4 * i + 2]) * u + P.fa[4 * i + 3]


cdef inline void rhs(const Rhs* P, double t, double x, double* fx, double* fl) noexcept nogil:
    cdef double val, dval
    field_eval(P, x, &val, &dval)
    fx[0] = val + P.A + P.B * forcing_eval(P, t)
    fl[0] = dval


cdef int integrate_one(const Rhs* P, double x, double t, const double* stops, int nstops,
                       double tol, bint with_log, double hmax, long maxsteps,
                       double* outx, double* outl, long* nsteps) noexcept nogil:
    cdef double l = 0.0
    cdef double h, hs, hnew, err, ex, el, fac11, fac, facold = 1e-4
    cdef double k1x, k2x, k3x, k4x, k5x, k6x, k7x
    cdef double k1l, k2l, k3l, k4l, k5l, k6l, k7l
    cdef double xs, x5, l5, tend, hmin
    cdef bint last, reject = False
    cdef int j
    cdef long steps = 0

    h = 0.1 * pow(tol, 0.2)
    if h > hmax:
        h = hmax
    rhs(P, t, x, &k1x, &k1l)
    for j in range(nstops):
        tend = stops[j]
        while True:
            if tend - t <= 1e-15 * (1.0 + fabs(t)):
                t = tend
                break
            last = False
            hs = h
            if t + 1.01 * h >= tend:
                hs = tend - t
                last = True
            hmin = 4.4e-16 * (1.0 + fabs(t))
            if hs < hmin:
                nsteps[0] = steps
                return 1

            xs = x + hs * (0.2 * k1x)
            rhs(P, t + 0.2 * hs, xs, &k2x, &k2l)
            xs = x + hs * (3.0 / 40.0 * k1x + 9.0 / 40.0 * k2x)
            rhs(P, t + 0.3 * hs, xs, &k3x, &k3l)
            xs = x + hs * (44.0 / 45.0 * k1x - 56.0 / 15.0 * k2x + 32.0 / 9.0 * k3x)
            rhs(P, t + 0.8 * hs, xs, &k4x, &k4l)
            xs = x + hs * (19372.0 / 6561.0 * k1x - 25360.0 / 2187.0 * k2x
                          + 64448.0 / 6561.0 * k3x - 212.0 / 729.0 * k4x)
            rhs(P, t + 8.0 / 9.0 * hs, xs, &k5x, &k5l)
            xs = x + hs * (9017.0 / 3168.0 * k1x - 355.0 / 33.0 * k2x + 46732.0 / 5247.0 * k3x
                          + 49.0 / 176.0 * k4x - 5103.0 / 18656.0 * k5x)
            rhs(P, t + hs, xs, &k6x, &k6l)
            x5 = x + hs * (35.0 / 384.0 * k1x + 500.0 / 1113.0 * k3x + 125.0 / 192.0 * k4x
                          - 2187.0 / 6784.0 * k5x + 11.0 / 84.0 * k6x)
            l5 = l + hs * (35.0 / 384.0 * k1l + 500.0 / 1113.0 * k3l + 125.0 / 192.0 * k4l
                          - 2187.0 / 6784.0 * k5l + 11.0 / 84.0 * k6l)
            rhs(P, t + hs, x5, &k7x, &k7l)

            ex = hs * (71.0 / 57600.0 * k1x - 71.0 / 16695.0 * k3x + 71.0 / 1920.0 * k4x
                      - 17253.0 / 339200.0 * k5x + 22.0 / 525.0 * k6x - 1.0 / 40.0 * k7x)
            err = fabs(ex)
            if with_log:
                el = hs * (71.0 / 57600.0 * k1l - 71.0 / 16695.0 * k3l + 71.0 / 1920.0 * k4l
                          - 17253.0 / 339200.0 * k5l + 22.0 / 525.0 * k6l - 1.0 / 40.0 * k7l)
                if fabs(el) > err:
                    err = fabs(el)
            err = err / tol

            steps += 1
            if steps > maxsteps:
                nsteps[0] = steps
                return 2

            fac11 = pow(err, 0.17)
            if err <= 1.0:
                fac = fac11 / pow(facold, 0.04)
                fac = fac / 0.9
                if fac < 0.1:
                    fac = 0.1
                elif fac > 5.0:
                    fac = 5.0
                hnew = hs / fac
                if reject and hnew > hs:
                    hnew = hs
                facold = err if err > 1e-4 else 1e-4
                x = x5
                l = l5
                k1x = k7x
                k1l = k7l
                t = tend if last else t + hs
                reject = False
                if not last or hnew < h:
                    h = hnew
                if h > hmax:
                    h = hmax
                if last:
                    break
            else:
                fac = fac11 / 0.9
                if fac > 5.0:
                    fac = 5.0
                h = hs / fac
                reject = True
        outx[j] = x
        outl[j] = l
    nsteps[0] = steps
    return 0


def integrate(double[::1] va, double[::1] vb, double A, double B,
              int fkind, double[::1] fa, double[::1] fb, int fn, double fdelta,
              double[::1] x0, double t0, double[::1] stops,
              double tol, bint with_log=False, double hmax=1.0, long maxsteps=10000000):
    """Integrate every start point in `x0` from `t0` through the increasing `stops`.

    Returns ``(X, L, status, nsteps)`` where ``X[i, j]`` is the lifted position of
    trajectory ``i`` at ``stops[j]`` and ``L`` the accumulated log-derivative.
    ``status`` is 0 on success, 1 on step-size underflow, 2 on step budget exhaustion.
    """
    cdef Py_ssize_t n = x0.shape[0], m = stops.shape[0], i
    cdef cnp.ndarray[cnp.float64_t, ndim=2] X = np.empty((n, m))
    cdef cnp.ndarray[cnp.float64_t, ndim=2] L = np.zeros((n, m))
    cdef cnp.ndarray[cnp.int32_t, ndim=1] status = np.zeros(n, dtype=np.int32)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] nsteps = np.zeros(n, dtype=np.int64)
    cdef double[:, ::1] Xv = X
    cdef double[:, ::1] Lv = L
    cdef int[::1] sv = status
    cdef long[::1] nv = nsteps
    cdef Rhs P
    cdef double dummy = 0.0

    if va.shape[0] < 1 or vb.shape[0] != va.shape[0]:
        raise ValueError("field coefficient arrays must be non-empty and of equal length")
    if tol <= 0:
        raise ValueError("tol must be positive")
    P.va = &va[0]
    P.vb = &vb[0]
    P.vdeg = va.shape[0] - 1
    P.A = A
    P.B = B
    P.fkind = fkind
    P.fa = &fa[0] if fa.shape[0] > 0 else &dummy
    P.fb = &fb[0] if fb.shape[0] > 0 else &dummy
    P.fn = fn
    P.fdelta = fdelta
    if m == 0:
        return X, L, status, nsteps
    with nogil:
        for i in range(n):
            sv[i] = integrate_one(&P, x0[i], t0, &stops[0], <int>m, tol, with_log, hmax,
                                  maxsteps, &Xv[i, 0], &Lv[i, 0], &nv[i])
    return X, L, status, nsteps


def forcing_values(int fkind, double[::1] fa, double[::1] fb, int fn, double fdelta,
                   double[::1] t):
    """Evaluate a kernel-encoded forcing at the times `t` (used for cross-checks)."""
    cdef Py_ssize_t i, n = t.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(n)
    cdef Rhs P
    cdef double dummy = 0.0
    P.fkind = fkind
    P.fa = &fa[0] if fa.shape[0] > 0 else &dummy
    P.fb = &fb[0] if fb.shape[0] > 0 else &dummy
    P.fn = fn
    P.fdelta = fdelta
    for i in range(n):
        out[i] = forcing_eval(&P, t[i])
    return out
