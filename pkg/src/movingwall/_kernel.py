"""Compiled inner loops: wall evaluation, coefficient RHS, DOPRI5 stepping.

State layout: complex vector ``y`` of length ``N + 1``; ``y[:N]`` are the
expansion coefficients and ``y[N].real`` is the phase integral theta.

Step control, dense output and constants follow Hairer, Norsett & Wanner,
"Solving Ordinary Differential Equations I", routine DOPRI5.
"""
import math

import numba as nb
import numpy as np

# reassociation lets LLVM vectorise the matvec reductions
_MATVEC_FLAGS = {"reassoc", "contract"}

STATUS_OK = 0
STATUS_UNDERFLOW = 1
STATUS_SINGULAR = 2
STATUS_MAX_STEPS = 3

# Butcher tableau
C2, C3, C4, C5 = 1 / 5, 3 / 10, 4 / 5, 8 / 9
A21 = 1 / 5
A31, A32 = 3 / 40, 9 / 40
A41, A42, A43 = 44 / 45, -56 / 15, 32 / 9
A51, A52, A53, A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
A61, A62, A63, A64, A65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
A71, A73, A74, A75, A76 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
# error estimate: difference between 5th and embedded 4th order weights
E1, E3, E4, E5, E6, E7 = (71 / 57600, -71 / 16695, 71 / 1920,
                          -17253 / 339200, 22 / 525, -1 / 40)
# dense output
D1 = -12715105075 / 11282082432
D3 = 87487479700 / 32700410799
D4 = -10690763975 / 1880347072
D5 = 701980252875 / 199316789632
D6 = -1453857185 / 822651844
D7 = 69997945 / 29380423

# PI controller
BETA = 0.04
EXPO1 = 0.2 - BETA * 0.75
SAFE = 0.9
FAC_MIN = 0.2   # largest allowed step growth is 1/FAC_MIN
FAC_MAX = 10.0  # largest allowed step shrink


@nb.njit(cache=True)
def wall_state(table, t):
    """Return ``(L, Ldot)`` from a segment table at time ``t``."""
    lo = 0
    hi = table.shape[0] - 1
    while lo < hi:
        mid = (lo + hi + 1) // 2
        if table[mid, 0] <= t:
            lo = mid
        else:
            hi = mid - 1
    kind = int(table[lo, 1])
    tau = t - table[lo, 2]
    p0 = table[lo, 3]
    p1 = table[lo, 4]
    p2 = table[lo, 5]
    p3 = table[lo, 6]
    if kind == 0:
        return p0 + p1 * tau, p1
    if kind == 1:
        L = p0 * math.exp(p1 * tau)
        return L, p1 * L
    if kind == 2:
        arg = p2 * tau + p3
        return p0 + p1 * math.sin(arg), p1 * p2 * math.cos(arg)
    return (p0 + tau * (p1 + tau * (p2 + tau * p3)),
            p1 + tau * (2.0 * p2 + 3.0 * p3 * tau))


@nb.njit(cache=True, fastmath=_MATVEC_FLAGS)
def _matvec(A, xr, xi, outr, outi):
    N = A.shape[0]
    for k in range(N):
        sr = 0.0
        si = 0.0
        for n in range(N):
            a = A[k, n]
            sr += a * xr[n]
            si += a * xi[n]
        outr[k] = sr
        outi[k] = si


@nb.njit(cache=True)
def rhs(t, y, A, w1, table, out, work):
    """Evaluate the coefficient equations into ``out``.

    ``dC_k/dt = (Ldot/L) sum_n A[k,n] exp(-i (e_n - e_k) theta / hbar) C_n``
    with ``e_n / hbar = w1 n^2``; the phases ``z^(n^2)``, ``z = exp(-i w1
    theta)``, come from a multiplicative recurrence.  Returns False if
    ``L <= 0``.
    """
    N = A.shape[0]
    L, Ld = wall_state(table, t)
    if not L > 0.0:
        return False
    theta = y[N].real
    pr = work[0]
    pi = work[1]
    zr = work[2]
    zi = work[3]
    sr = work[4]
    si = work[5]
    cr = math.cos(w1 * theta)
    ci = -math.sin(w1 * theta)
    z2r = cr * cr - ci * ci
    z2i = 2.0 * cr * ci
    qr = cr          # z^(n^2)
    qi = ci
    rr = z2r * cr - z2i * ci   # z^(2n+1)
    ri = z2r * ci + z2i * cr
    for n in range(N):
        zr[n] = qr
        zi[n] = qi
        a = y[n].real
        b = y[n].imag
        pr[n] = qr * a - qi * b
        pi[n] = qr * b + qi * a
        tr = qr * rr - qi * ri
        qi = qr * ri + qi * rr
        qr = tr
        tr = rr * z2r - ri * z2i
        ri = rr * z2i + ri * z2r
        rr = tr
    _matvec(A, pr, pi, sr, si)
    g = Ld / L
    for k in range(N):
        # multiply by conj(z^(k^2))
        out[k] = complex(g * (zr[k] * sr[k] + zi[k] * si[k]),
                         g * (zr[k] * si[k] - zi[k] * sr[k]))
    out[N] = 1.0 / (L * L)
    return True


@nb.njit(cache=True)
def _err_norm(h, y, y1, k1, k3, k4, k5, k6, k7, rtol, atol):
    M = y.size
    acc = 0.0
    for i in range(M):
        e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i]
                 + E6 * k6[i] + E7 * k7[i])
        sk = atol + rtol * max(abs(y[i]), abs(y1[i]))
        q = abs(e) / sk
        acc += q * q
    return math.sqrt(acc / M)


@nb.njit(cache=True)
def _initial_step(t, y, f0, A, w1, table, rtol, atol, hmax, ytmp, f1, work):
    M = y.size
    dnf = 0.0
    dny = 0.0
    for i in range(M):
        sk = atol + rtol * abs(y[i])
        dnf += (abs(f0[i]) / sk) ** 2
        dny += (abs(y[i]) / sk) ** 2
    if dnf <= 1e-10 or dny <= 1e-10:
        h = 1e-6
    else:
        h = 0.01 * math.sqrt(dny / dnf)
    h = min(h, hmax)
    for i in range(M):
        ytmp[i] = y[i] + h * f0[i]
    if not rhs(t + h, ytmp, A, w1, table, f1, work):
        return h * 1e-3
    der2 = 0.0
    for i in range(M):
        sk = atol + rtol * abs(y[i])
        der2 += (abs(f1[i] - f0[i]) / sk) ** 2
    der2 = math.sqrt(der2) / h
    der12 = max(der2, math.sqrt(dnf))
    if der12 <= 1e-15:
        h1 = max(1e-6, h * 1e-3)
    else:
        h1 = (0.01 / der12) ** 0.2
    return min(100.0 * h, h1, hmax)


@nb.njit(cache=True)
def _record(idx, ts, yv, store, out, maxpop, argmax_t, N):
    if store:
        for i in range(N + 1):
            out[idx, i] = yv[i]
    norm = 0.0
    for i in range(N):
        p = yv[i].real * yv[i].real + yv[i].imag * yv[i].imag
        norm += p
        if p > maxpop[i]:
            maxpop[i] = p
            argmax_t[i] = ts
    # slot N holds the largest norm drift seen at the samples
    maxpop[N] = max(maxpop[N], abs(norm - 1.0))


@nb.njit(cache=True)
def dopri5(y0, t0, t_end, A, w1, table, breaks, samples, rtol, atol,
           h_init, hmax, store, max_steps):
    """Integrate from ``t0`` to ``t_end``.

    ``samples`` (sorted, inside ``[t0, t_end]``) are filled from the dense
    output.  ``breaks`` are times where the RHS may jump; steps land on them
    exactly and restart with a fresh derivative there.

    Returns ``(states, maxpop, argmax_t, stats, status, t_reached, y)`` with
    ``stats = [accepted, rejected, rhs_evals]``.  ``maxpop`` is the running
    maximum of each ``|C_n|^2`` over the sample times, followed by the largest
    ``| sum |C_n|^2 - 1 |`` seen there.
    """
    M = y0.size
    N = M - 1
    ns = samples.size
    out = np.zeros((ns if store else 0, M), dtype=np.complex128)
    maxpop = np.zeros(N + 1)
    argmax_t = np.zeros(N)
    stats = np.zeros(3, dtype=np.int64)

    work = np.empty((6, N))
    y = y0.copy()
    y1 = np.empty(M, np.complex128)
    yt = np.empty(M, np.complex128)
    k1 = np.empty(M, np.complex128)
    k2 = np.empty(M, np.complex128)
    k3 = np.empty(M, np.complex128)
    k4 = np.empty(M, np.complex128)
    k5 = np.empty(M, np.complex128)
    k6 = np.empty(M, np.complex128)
    k7 = np.empty(M, np.complex128)
    r2 = np.empty(M, np.complex128)
    r3 = np.empty(M, np.complex128)
    r4 = np.empty(M, np.complex128)
    r5 = np.empty(M, np.complex128)

    t = t0
    isample = 0
    while isample < ns and samples[isample] <= t0:
        _record(isample, samples[isample], y, store, out, maxpop, argmax_t, N)
        isample += 1

    if not rhs(t, y, A, w1, table, k1, work):
        return out, maxpop, argmax_t, stats, STATUS_SINGULAR, t, y
    stats[2] += 1
    if t >= t_end:
        return out, maxpop, argmax_t, stats, STATUS_OK, t, y

    if h_init > 0:
        h = min(h_init, hmax)
    else:
        h = _initial_step(t, y, k1, A, w1, table, rtol, atol, hmax, yt, k2, work)
        stats[2] += 1

    ibreak = 0
    while ibreak < breaks.size and breaks[ibreak] <= t:
        ibreak += 1

    facold = 1e-4
    last_rejected = False
    while t < t_end:
        if stats[0] + stats[1] >= max_steps:
            return out, maxpop, argmax_t, stats, STATUS_MAX_STEPS, t, y
        stop = t_end
        if ibreak < breaks.size and breaks[ibreak] < t_end:
            stop = breaks[ibreak]
        hit_stop = False
        if t + h >= stop - 1e-14 * max(1.0, abs(stop)) :
            h = stop - t
            hit_stop = True
        if h <= 16.0 * 2.220446049250313e-16 * max(1.0, abs(t)):
            return out, maxpop, argmax_t, stats, STATUS_UNDERFLOW, t, y

        ok = True
        for i in range(M):
            yt[i] = y[i] + h * A21 * k1[i]
        ok = ok and rhs(t + C2 * h, yt, A, w1, table, k2, work)
        for i in range(M):
            yt[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i])
        ok = ok and rhs(t + C3 * h, yt, A, w1, table, k3, work)
        for i in range(M):
            yt[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i])
        ok = ok and rhs(t + C4 * h, yt, A, w1, table, k4, work)
        for i in range(M):
            yt[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i])
        ok = ok and rhs(t + C5 * h, yt, A, w1, table, k5, work)
        for i in range(M):
            yt[i] = y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i]
                                + A64 * k4[i] + A65 * k5[i])
        # evaluate stage 6 at the left limit of a breakpoint
        t6 = t + h
        if hit_stop and stop < t_end:
            t6 = t + h * (1.0 - 1e-12)
        ok = ok and rhs(t6, yt, A, w1, table, k6, work)
        for i in range(M):
            y1[i] = y[i] + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i]
                                + A75 * k5[i] + A76 * k6[i])
        ok = ok and rhs(t6, y1, A, w1, table, k7, work)
        stats[2] += 6
        if not ok:
            # a stage left the box; shrink and retry
            stats[1] += 1
            h *= 0.25
            last_rejected = True
            continue

        err = _err_norm(h, y, y1, k1, k3, k4, k5, k6, k7, rtol, atol)
        fac11 = err ** EXPO1
        fac = fac11 / facold ** BETA
        fac = max(1.0 / FAC_MAX, min(1.0 / FAC_MIN, fac / SAFE))
        hnew = h / fac

        if err <= 1.0:
            facold = max(err, 1e-4)
            stats[0] += 1
            tnew = t + h
            if hit_stop:
                tnew = stop
            if isample < ns and samples[isample] <= tnew:
                for i in range(M):
                    ydiff = y1[i] - y[i]
                    bspl = h * k1[i] - ydiff
                    r2[i] = ydiff
                    r3[i] = bspl
                    r4[i] = ydiff - h * k7[i] - bspl
                    r5[i] = h * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i]
                                 + D5 * k5[i] + D6 * k6[i] + D7 * k7[i])
                while isample < ns and samples[isample] <= tnew:
                    s = (samples[isample] - t) / h
                    s1 = 1.0 - s
                    for i in range(M):
                        yt[i] = y[i] + s * (r2[i] + s1 * (r3[i] + s * (r4[i] + s1 * r5[i])))
                    _record(isample, samples[isample], yt, store, out, maxpop, argmax_t, N)
                    isample += 1
            t = tnew
            for i in range(M):
                y[i] = y1[i]
            if hit_stop and stop < t_end:
                ibreak += 1
                if not rhs(t, y, A, w1, table, k1, work):
                    return out, maxpop, argmax_t, stats, STATUS_SINGULAR, t, y
                stats[2] += 1
            else:
                for i in range(M):
                    k1[i] = k7[i]
            if last_rejected:
                hnew = min(hnew, h)
            h = min(hnew, hmax)
            last_rejected = False
        else:
            stats[1] += 1
            h = h / min(1.0 / FAC_MIN, fac11 / SAFE)
            last_rejected = True

    return out, maxpop, argmax_t, stats, STATUS_OK, t, y
