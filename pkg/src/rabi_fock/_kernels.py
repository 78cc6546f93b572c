"""Compiled kernels for the Hermitian eigensolver.

Band reduction follows the classical Givens bulge-chasing scheme: each
subdiagonal entry outside the tridiagonal band is annihilated by a plane
rotation, and the fill-in one position outside the band is chased off the
bottom of the matrix.  The work array holds one extra subdiagonal for that
fill-in.

Return codes are integers rather than exceptions so that the kernels stay
in nopython mode; the Python wrappers translate them.
"""
import numpy as np
from numba import njit

_EPS = np.finfo(np.float64).eps


@njit(cache=True)
def _get(W, kd1, i, j):
    # lower-storage accessor, i >= j
    k = i - j
    if k > kd1:
        return 0.0j
    return W[k, j]


@njit(cache=True)
def _apply_rotation(W, n, kd1, p, c, s, Q, want_q):
    """Similarity transform A <- G A G^H in the plane (p, p+1).

    ``G = [[c, s], [-conj(s), c]]`` with ``c`` real.
    """
    q = p + 1
    cs = np.conj(s)
    lo = p - kd1
    if lo < 0:
        lo = 0
    for j in range(lo, p):
        x = W[p - j, j] if p - j <= kd1 else 0.0j
        y = W[q - j, j] if q - j <= kd1 else 0.0j
        if x == 0.0 and y == 0.0:
            continue
        W[p - j, j] = c * x + s * y
        if q - j <= kd1:
            W[q - j, j] = -cs * x + c * y
    hi = q + kd1 + 1
    if hi > n:
        hi = n
    for j in range(q + 1, hi):
        x = W[j - p, p] if j - p <= kd1 else 0.0j
        y = W[j - q, q] if j - q <= kd1 else 0.0j
        if x == 0.0 and y == 0.0:
            continue
        if j - p <= kd1:
            W[j - p, p] = c * x + cs * y
        W[j - q, q] = -s * x + c * y
    app = W[0, p].real
    aqq = W[0, q].real
    aqp = W[1, p]
    apq = np.conj(aqp)
    # rows of G M
    m00 = c * app + s * aqp
    m01 = c * apq + s * aqq
    m10 = -cs * app + c * aqp
    m11 = -cs * apq + c * aqq
    # (G M) G^H, G^H = [[c, -s], [cs, c]]
    W[0, p] = (m00 * c + m01 * cs).real
    W[0, q] = (-m10 * s + m11 * c).real
    W[1, p] = m10 * c + m11 * cs
    if want_q:
        for r in range(Q.shape[0]):
            qp = Q[r, p]
            qq = Q[r, q]
            Q[r, p] = qp * c + qq * cs
            Q[r, q] = -qp * s + qq * c


@njit(cache=True)
def _givens(x, y):
    """c real, s complex with -conj(s) x + c y = 0 and c x + s y = r >= 0."""
    ax = abs(x)
    ay = abs(y)
    if ay == 0.0:
        return 1.0, 0.0j
    r = np.hypot(ax, ay)
    if ax == 0.0:
        return 0.0, np.conj(y) / ay
    c = ax / r
    s = (x / ax) * np.conj(y) / r
    return c, s


@njit(cache=True)
def band_to_tridiagonal(band, want_q, record):
    """Reduce a Hermitian lower-band matrix to real symmetric tridiagonal form.

    Returns ``(d, e, Q, phases, rot_p, rot_c, rot_s, count, status)``.  The
    original matrix equals ``Q diag(phases) T diag(phases)^H Q^H`` with
    ``T`` real tridiagonal.  When ``record`` is set, the sequence of plane
    rotations is returned instead of (or as well as) ``Q`` so that selected
    vectors can be back-transformed later.  ``status`` is 0 on success and
    1 if fill-in escaped the work band.
    """
    kd = band.shape[0] - 1
    n = band.shape[1]
    kd1 = kd + 1
    W = np.zeros((kd + 2, n), dtype=np.complex128)
    for k in range(kd + 1):
        for j in range(n):
            W[k, j] = band[k, j]
    if want_q:
        Q = np.eye(n, dtype=np.complex128)
    else:
        Q = np.zeros((1, 1), dtype=np.complex128)
    cap = 1
    if record and kd > 1:
        cap = n * n // kd + 8 * n
    rot_p = np.zeros(cap, dtype=np.int64)
    rot_c = np.zeros(cap, dtype=np.float64)
    rot_s = np.zeros(cap, dtype=np.complex128)
    count = 0
    status = 0
    if kd > 1:
        for k in range(n - 2):
            top = k + kd
            if top > n - 1:
                top = n - 1
            for i in range(top, k + 1, -1):
                y = _get(W, kd1, i, k)
                if y == 0.0:
                    continue
                x = _get(W, kd1, i - 1, k)
                c, s = _givens(x, y)
                _apply_rotation(W, n, kd1, i - 1, c, s, Q, want_q)
                W[i - k, k] = 0.0
                if record:
                    if count >= cap:
                        return (np.zeros(n), np.zeros(n), Q, np.ones(n, dtype=np.complex128),
                                rot_p, rot_c, rot_s, count, 2)
                    rot_p[count] = i - 1
                    rot_c[count] = c
                    rot_s[count] = s
                    count += 1
                col = i - 1
                r = i + kd
                while r < n:
                    y = W[r - col, col] if r - col <= kd1 else 0.0j
                    if y == 0.0:
                        break
                    x = W[r - 1 - col, col]
                    c, s = _givens(x, y)
                    _apply_rotation(W, n, kd1, r - 1, c, s, Q, want_q)
                    W[r - col, col] = 0.0
                    if record:
                        if count >= cap:
                            return (np.zeros(n), np.zeros(n), Q, np.ones(n, dtype=np.complex128),
                                    rot_p, rot_c, rot_s, count, 2)
                        rot_p[count] = r - 1
                        rot_c[count] = c
                        rot_s[count] = s
                        count += 1
                    col = r - 1
                    r = r + kd
        for k in range(2, kd + 2):
            for j in range(n - k):
                if W[k, j] != 0.0:
                    status = 1
    d = np.empty(n)
    e = np.zeros(n)
    phases = np.ones(n, dtype=np.complex128)
    for j in range(n):
        d[j] = W[0, j].real
    for j in range(n - 1):
        off = W[1, j] if kd >= 1 else 0.0j
        a = abs(off)
        e[j] = a
        if a > 0.0:
            phases[j + 1] = phases[j] * off / a
        else:
            phases[j + 1] = phases[j]
    return d, e, Q, phases, rot_p, rot_c, rot_s, count, status


@njit(cache=True)
def tridiagonal_ql(d_in, e_in, want_z, max_iter):
    """Implicit-shift QL iteration on a real symmetric tridiagonal matrix.

    ``e_in[i]`` is ``T[i+1, i]``.  Returns ``(w, Zt, status)`` where the rows
    of ``Zt`` are the eigenvectors (unsorted) and ``status`` is -1 on
    success or the index of the eigenvalue that failed to converge.
    """
    n = d_in.shape[0]
    d = d_in.copy()
    e = np.zeros(n)
    for i in range(n - 1):
        e[i] = e_in[i]
    if want_z:
        Zt = np.eye(n)
    else:
        Zt = np.zeros((1, 1))
    for l in range(n):
        it = 0
        while True:
            m = l
            while m < n - 1:
                dd = abs(d[m]) + abs(d[m + 1])
                if abs(e[m]) <= _EPS * dd:
                    break
                m += 1
            if m == l:
                break
            if it >= max_iter:
                return d, Zt, l
            it += 1
            g = (d[l + 1] - d[l]) / (2.0 * e[l])
            r = np.hypot(g, 1.0)
            g = d[m] - d[l] + e[l] / (g + (r if g >= 0.0 else -r))
            s = 1.0
            c = 1.0
            p = 0.0
            i = m - 1
            underflow = False
            while i >= l:
                f = s * e[i]
                b = c * e[i]
                r = np.hypot(f, g)
                e[i + 1] = r
                if r == 0.0:
                    d[i + 1] -= p
                    e[m] = 0.0
                    underflow = True
                    break
                s = f / r
                c = g / r
                g = d[i + 1] - p
                r = (d[i] - g) * s + 2.0 * c * b
                p = s * r
                d[i + 1] = g + p
                g = c * r - b
                if want_z:
                    for k in range(n):
                        f = Zt[i + 1, k]
                        Zt[i + 1, k] = s * Zt[i, k] + c * f
                        Zt[i, k] = c * Zt[i, k] - s * f
                i -= 1
            if underflow:
                continue
            d[l] -= p
            e[l] = g
            e[m] = 0.0
    return d, Zt, -1


@njit(cache=True)
def _tridiag_solve(d, e, lam, rhs, scale):
    """Solve (T - lam I) x = rhs by Gaussian elimination with partial pivoting."""
    n = d.shape[0]
    tiny = _EPS * scale
    if tiny == 0.0:
        tiny = _EPS
    # rows hold (main, super1, super2) after pivoting
    u0 = np.zeros(n)
    u1 = np.zeros(n)
    u2 = np.zeros(n)
    mult = np.zeros(n)
    swap = np.zeros(n, dtype=np.bool_)
    x = rhs.copy()
    cur0 = d[0] - lam
    cur1 = e[0] if n > 1 else 0.0
    for i in range(n - 1):
        nxt0 = e[i]
        nxt1 = d[i + 1] - lam
        nxt2 = e[i + 1] if i + 1 < n - 1 else 0.0
        if abs(nxt0) > abs(cur0):
            swap[i] = True
            piv0, piv1, piv2 = nxt0, nxt1, nxt2
            oth0, oth1, oth2 = cur0, cur1, 0.0
            t = x[i]
            x[i] = x[i + 1]
            x[i + 1] = t
        else:
            piv0, piv1, piv2 = cur0, cur1, 0.0
            oth0, oth1, oth2 = nxt0, nxt1, nxt2
        if piv0 == 0.0:
            piv0 = tiny
        m = oth0 / piv0
        mult[i] = m
        u0[i] = piv0
        u1[i] = piv1
        u2[i] = piv2
        x[i + 1] = x[i + 1] - m * x[i]
        cur0 = oth1 - m * piv1
        cur1 = oth2 - m * piv2
    if cur0 == 0.0:
        cur0 = tiny
    u0[n - 1] = cur0
    x[n - 1] = x[n - 1] / u0[n - 1]
    if n > 1:
        x[n - 2] = (x[n - 2] - u1[n - 2] * x[n - 1]) / u0[n - 2]
    for i in range(n - 3, -1, -1):
        x[i] = (x[i] - u1[i] * x[i + 1] - u2[i] * x[i + 2]) / u0[i]
    return x


@njit(cache=True)
def tridiagonal_inverse_iteration(d, e, lams, cluster_tol, n_iter):
    """Eigenvectors of a real tridiagonal matrix for the sorted shifts ``lams``.

    Vectors whose eigenvalues lie within ``cluster_tol`` of each other are
    kept orthogonal by Gram-Schmidt after every solve.
    """
    n = d.shape[0]
    k = lams.shape[0]
    scale = 0.0
    for i in range(n):
        a = abs(d[i]) + (abs(e[i]) if i < n - 1 else 0.0) + (abs(e[i - 1]) if i > 0 else 0.0)
        if a > scale:
            scale = a
    V = np.zeros((k, n))
    start = 0
    for j in range(k):
        if j > 0 and abs(lams[j] - lams[j - 1]) > cluster_tol:
            start = j
        x = np.empty(n)
        for i in range(n):
            # deterministic, non-degenerate starting vector
            x[i] = 1.0 + 0.5 * np.sin(1.0 + 7.0 * i + 3.0 * j)
        for _ in range(n_iter):
            x = _tridiag_solve(d, e, lams[j], x, scale)
            for jj in range(start, j):
                proj = 0.0
                for i in range(n):
                    proj += V[jj, i] * x[i]
                for i in range(n):
                    x[i] -= proj * V[jj, i]
            nrm = 0.0
            for i in range(n):
                nrm += x[i] * x[i]
            nrm = np.sqrt(nrm)
            for i in range(n):
                x[i] /= nrm
        for i in range(n):
            V[j, i] = x[i]
    return V


@njit(cache=True)
def back_transform(vecs, phases, rot_p, rot_c, rot_s, count):
    """Map tridiagonal-basis vectors (rows) back to the original basis."""
    k, n = vecs.shape
    out = np.empty((k, n), dtype=np.complex128)
    for j in range(k):
        for i in range(n):
            out[j, i] = phases[i] * vecs[j, i]
    for idx in range(count - 1, -1, -1):
        p = rot_p[idx]
        c = rot_c[idx]
        s = rot_s[idx]
        cs = np.conj(s)
        for j in range(k):
            zp = out[j, p]
            zq = out[j, p + 1]
            out[j, p] = c * zp - s * zq
            out[j, p + 1] = cs * zp + c * zq
    return out
