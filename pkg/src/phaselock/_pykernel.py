"""Pure-numpy fallback for the integration kernel.

Same Dormand-Prince 5(4) scheme and step controller as the compiled
kernel. Trajectories are advanced as independent lanes of a vector: each
lane keeps its own time, step size and controller state, and only the
arithmetic is batched. Lane results never mix, so splitting the start
points into chunks gives identical numbers.
"""
import numpy as np

TWO_PI = 2.0 * np.pi

F_NONE = 0
F_TRIG = 1
F_STEP = 2
F_SPLINE = 3

# Dormand-Prince tableau
_C = (0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0)
_A = (
    (),
    (0.2,),
    (3.0 / 40.0, 9.0 / 40.0),
    (44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0),
    (19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0),
    (9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0),
)
_B5 = (35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0)
_E = (71.0 / 57600.0, 0.0, -71.0 / 16695.0, 71.0 / 1920.0, -17253.0 / 339200.0,
      22.0 / 525.0, -1.0 / 40.0)


def psi(u):
    u = np.asarray(u, dtype=float)
    out = np.where(u >= 2.0 / 3.0, 1.0, 0.0)
    mid = (u > 1.0 / 3.0) & (u < 2.0 / 3.0)
    if np.any(mid):
        um = u[mid]
        a = np.exp(-1.0 / (3.0 * um - 1.0))
        b = np.exp(-1.0 / (2.0 - 3.0 * um))
        out[mid] = a / (a + b)
    return out


def _trig_sum(a, b, x, with_derivative):
    deg = a.shape[0] - 1
    acc = np.full(x.shape, a[0])
    dacc = np.zeros(x.shape)
    if deg == 0:
        return acc, dacc
    ks = np.arange(1, deg + 1, dtype=float)
    arg = np.multiply.outer(x, ks)
    c = np.cos(arg)
    s = np.sin(arg)
    acc = acc + (c * a[1:] + s * b[1:]).sum(axis=-1)
    if with_derivative:
        dacc = (ks * (c * b[1:] - s * a[1:])).sum(axis=-1)
    return acc, dacc


def _forcing(fkind, fa, fb, fn, fdelta, t):
    if fkind == F_NONE:
        return np.zeros(t.shape)
    u = t - TWO_PI * np.floor(t / TWO_PI)
    if fkind == F_TRIG:
        return _trig_sum(fa[: fn + 1], fb[: fn + 1], u, False)[0]
    if fkind == F_STEP:
        d = fdelta
        d2 = d * d
        out = np.zeros(u.shape)
        for s in range(1, fn + 1):
            e = fa[s - 1]
            sel = (u >= fa[s]) & (u < e)
            if not np.any(sel):
                continue
            us = u[sel]
            height = fb[s - 1]
            val = np.zeros(us.shape)
            j = (us >= e - d - d2) & (us < e - d)
            r = (us >= e - d) & (us < e - d2)
            vv = us >= e - d2
            val[j] = height * psi((us[j] - e + d + d2) / d2)
            val[r] = height
            val[vv] = height * psi((e - us[vv]) / d2)
            out[sel] = val
        return out
    hh = TWO_PI / fn
    i = np.minimum((u / hh).astype(np.int64), fn - 1)
    w = u - i * hh
    c = fa.reshape(fn, 4)[i]
    return ((c[:, 0] * w + c[:, 1]) * w + c[:, 2]) * w + c[:, 3]


def forcing_values(fkind, fa, fb, fn, fdelta, t):
    return _forcing(fkind, np.asarray(fa, float), np.asarray(fb, float), fn, fdelta,
                    np.asarray(t, float))


def integrate(va, vb, A, B, fkind, fa, fb, fn, fdelta, x0, t0, stops, tol,
              with_log=False, hmax=1.0, maxsteps=10_000_000):
    """Integrate every start point in `x0` from `t0` through the increasing `stops`.

    Same contract as the compiled kernel: returns ``(X, L, status, nsteps)``.
    """
    va = np.asarray(va, dtype=float)
    vb = np.asarray(vb, dtype=float)
    fa = np.asarray(fa, dtype=float)
    fb = np.asarray(fb, dtype=float)
    x0 = np.asarray(x0, dtype=float)
    stops = np.asarray(stops, dtype=float)
    if va.shape[0] < 1 or vb.shape[0] != va.shape[0]:
        raise ValueError("field coefficient arrays must be non-empty and of equal length")
    if tol <= 0:
        raise ValueError("tol must be positive")
    n, m = x0.shape[0], stops.shape[0]
    X = np.empty((n, m))
    L = np.zeros((n, m))
    status = np.zeros(n, dtype=np.int32)
    nsteps = np.zeros(n, dtype=np.int64)
    if m == 0 or n == 0:
        return X, L, status, nsteps

    def rhs(t, x):
        val, dval = _trig_sum(va, vb, x, True)
        return val + A + B * _forcing(fkind, fa, fb, fn, fdelta, t), dval

    x = x0.copy()
    l = np.zeros(n)
    t = np.full(n, float(t0))
    h = np.full(n, min(0.1 * tol ** 0.2, hmax))
    facold = np.full(n, 1e-4)
    reject = np.zeros(n, dtype=bool)
    j = np.zeros(n, dtype=np.int64)
    k1x, k1l = rhs(t, x)
    active = np.ones(n, dtype=bool)

    while np.any(active):
        idx = np.nonzero(active)[0]
        tend = stops[j[idx]]
        ti = t[idx]
        # lanes already at their stop record output and move on
        done = tend - ti <= 1e-15 * (1.0 + np.abs(ti))
        if np.any(done):
            di = idx[done]
            t[di] = stops[j[di]]
            X[di, j[di]] = x[di]
            L[di, j[di]] = l[di]
            j[di] += 1
            active[di[j[di] >= m]] = False
            continue
        hi = h[idx]
        last = ti + 1.01 * hi >= tend
        hs = np.where(last, tend - ti, hi)
        bad = hs < 4.4e-16 * (1.0 + np.abs(ti))
        if np.any(bad):
            status[idx[bad]] = 1
            active[idx[bad]] = False
            continue

        xi, li = x[idx], l[idx]
        kx = [k1x[idx]]
        kl = [k1l[idx]]
        for s in range(1, 6):
            xs = xi + hs * sum(a * kx[r] for r, a in enumerate(_A[s]))
            fx, fl = rhs(ti + _C[s] * hs, xs)
            kx.append(fx)
            kl.append(fl)
        x5 = xi + hs * sum(b * kx[r] for r, b in enumerate(_B5) if b != 0.0)
        l5 = li + hs * sum(b * kl[r] for r, b in enumerate(_B5) if b != 0.0)
        k7x, k7l = rhs(ti + hs, x5)
        kx.append(k7x)
        kl.append(k7l)
        ex = hs * sum(e * kx[r] for r, e in enumerate(_E) if e != 0.0)
        err = np.abs(ex)
        if with_log:
            el = hs * sum(e * kl[r] for r, e in enumerate(_E) if e != 0.0)
            err = np.maximum(err, np.abs(el))
        err = err / tol

        nsteps[idx] += 1
        over = nsteps[idx] > maxsteps
        if np.any(over):
            status[idx[over]] = 2
            active[idx[over]] = False

        fac11 = err ** 0.17
        acc = (err <= 1.0) & ~over
        rej = (err > 1.0) & ~over

        a_idx = idx[acc]
        if a_idx.size:
            fac = fac11[acc] / facold[a_idx] ** 0.04 / 0.9
            fac = np.clip(fac, 0.1, 5.0)
            hsa = hs[acc]
            hnew = hsa / fac
            hnew = np.where(reject[a_idx] & (hnew > hsa), hsa, hnew)
            facold[a_idx] = np.maximum(err[acc], 1e-4)
            x[a_idx] = x5[acc]
            l[a_idx] = l5[acc]
            k1x[a_idx] = k7x[acc]
            k1l[a_idx] = k7l[acc]
            la = last[acc]
            t[a_idx] = np.where(la, tend[acc], ti[acc] + hsa)
            reject[a_idx] = False
            hold = h[a_idx]
            h[a_idx] = np.minimum(np.where(~la | (hnew < hold), hnew, hold), hmax)
            fin = a_idx[la]
            if fin.size:
                X[fin, j[fin]] = x[fin]
                L[fin, j[fin]] = l[fin]
                j[fin] += 1
                active[fin[j[fin] >= m]] = False

        r_idx = idx[rej]
        if r_idx.size:
            fac = np.minimum(fac11[rej] / 0.9, 5.0)
            h[r_idx] = hs[rej] / fac
            reject[r_idx] = True

    return X, L, status, nsteps
