"""Pure NumPy implementations of the numerical kernels.

These mirror the compiled routines in ``_kernels.pyx`` one for one and are
used when the extension is unavailable (or when ``HDQKD_BACKEND=python``).
The Jacobi solver uses the round-robin ordering so that each round of
disjoint rotations can be applied as a single vectorised update.
"""
import numpy as np


def jacobi_eigh(a, tol=1e-12, max_sweeps=100):
    """Eigen-decompose a real symmetric matrix by cyclic Jacobi sweeps.

    Returns ``(eigenvalues, eigenvectors, sweeps)`` with eigenvectors in the
    columns, unsorted.
    """
    a = np.array(a, dtype=np.float64, copy=True)
    n = a.shape[0]
    v = np.eye(n)
    if n < 2:
        return a.diagonal().copy(), v, 0
    norm = np.sqrt(np.sum(a * a))
    m = n + (n % 2)
    players = list(range(m))
    sweeps = 0
    while sweeps < max_sweeps:
        off = np.sqrt(np.sum((a - np.diag(a.diagonal())) ** 2))
        if not off > tol * norm:
            break
        sweeps += 1
        for _ in range(m - 1):
            pairs = [(players[k], players[m - 1 - k]) for k in range(m // 2)]
            pairs = [(p, q) for p, q in pairs if p < n and q < n]
            p = np.array([min(x) for x in pairs])
            q = np.array([max(x) for x in pairs])
            apq = a[p, q]
            active = apq != 0.0
            if np.any(active):
                p, q, apq = p[active], q[active], apq[active]
                with np.errstate(over="ignore"):
                    theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                    t = np.sign(theta) / (np.abs(theta) + np.sqrt(theta * theta + 1.0))
                t[theta == 0.0] = 1.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                rp, rq = a[p, :].copy(), a[q, :].copy()
                a[p, :] = c[:, None] * rp - s[:, None] * rq
                a[q, :] = s[:, None] * rp + c[:, None] * rq
                cp, cq = a[:, p].copy(), a[:, q].copy()
                a[:, p] = cp * c - cq * s
                a[:, q] = cp * s + cq * c
                a[p, q] = 0.0
                a[q, p] = 0.0
                vp, vq = v[:, p].copy(), v[:, q].copy()
                v[:, p] = vp * c - vq * s
                v[:, q] = vp * s + vq * c
            players = [players[0], players[-1]] + players[1:-1]
    return a.diagonal().copy(), v, sweeps


def secular_max_root(mu, weights, max_iter=200):
    """Largest eigenvalue of ``diag(mu) + z z^T`` for each row of ``weights = z**2``.

    Bisection on the secular equation ``sum_i w_i / (lam - mu_i) = 1`` over
    ``[max(mu), max(mu) + sum(w)]``. The returned value is the upper end of
    the final bracket, so it never understates the root.
    """
    mu = np.asarray(mu, dtype=np.float64)
    w = np.atleast_2d(np.asarray(weights, dtype=np.float64))
    top = mu.max()
    lo = np.full(w.shape[0], top)
    hi = top + w.sum(axis=1)
    gap = top - mu
    at_top = gap == 0.0
    # With no weight on the top pole the secular root may sit below max(mu).
    no_pole = ~np.any((w > 0.0) & at_top[None, :], axis=1)
    if np.any(no_pole):
        with np.errstate(divide="ignore", invalid="ignore"):
            terms = np.where(at_top[None, :], 0.0, w / gap[None, :])
        f_top = terms.sum(axis=1) - 1.0
        settled = no_pole & (f_top <= 0.0)
        hi = np.where(settled, top, hi)
    for _ in range(max_iter):
        width = hi - lo
        if np.all(width <= 4.0 * np.finfo(float).eps * np.maximum(np.abs(hi), 1.0)):
            break
        mid = 0.5 * (lo + hi)
        den = mid[:, None] - mu[None, :]
        # zero-weight terms drop out, including at a pole
        f = np.sum(np.divide(w, den, out=np.zeros_like(w), where=w > 0.0), axis=1) - 1.0
        pos = f > 0.0
        lo = np.where(pos, mid, lo)
        hi = np.where(pos, hi, mid)
    return hi


EPS = float(np.finfo(np.float64).eps)
COS_PAD = 4.0 * EPS


def angle_pad(c):
    """Bound on the error of ``arccos(c)`` when ``c`` carries a few ulps of roundoff."""
    return COS_PAD / np.sqrt(np.maximum(1.0 - np.square(c), COS_PAD))


def completion_pass(lo, hi, avail, known, diag, pivot_tol=1e-14, empty_tol=1e-10):
    """One synchronous pass of 3x3-minor interval propagation.

    Each target ``(j, l)`` that is not Known is intersected with the bound
    derived through every usable pivot ``k``. Writing ``r_jk = sqrt(r_jj r_kk) cos(a)``
    and ``r_kl = sqrt(r_kk r_ll) cos(b)``, the minor condition confines
    ``r_jl`` to ``sqrt(r_jj r_ll) [cos(a + b), cos(a - b)]``; the envelope
    over the input boxes follows from the ranges of ``a + b`` and ``a - b``.

    Returns ``(lo, hi, avail, bad)`` where ``bad`` is a ``(j, k, l)`` triple
    whose intersection came out empty, or ``None``.
    """
    n = lo.shape[0]
    diag = np.asarray(diag, dtype=np.float64)
    root = np.sqrt(np.maximum(diag, 0.0))
    scale = root[:, None] * root[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        cos_lo = np.where(scale > 0.0, lo / scale, -1.0)
        cos_hi = np.where(scale > 0.0, hi / scale, 1.0)
    cos_lo = np.clip(np.nan_to_num(cos_lo, nan=-1.0, neginf=-1.0, posinf=1.0), -1.0, 1.0)
    cos_hi = np.clip(np.nan_to_num(cos_hi, nan=1.0, neginf=-1.0, posinf=1.0), -1.0, 1.0)
    # outward rounding: arccos amplifies input roundoff by 1/sin near +-1
    ang_min = np.maximum(np.arccos(cos_hi) - angle_pad(cos_hi), 0.0)
    ang_max = np.minimum(np.arccos(cos_lo) + angle_pad(cos_lo), np.pi)

    # axes: [j, l, k]
    a_min = ang_min[:, None, :]
    a_max = ang_max[:, None, :]
    b_min = ang_min.T[None, :, :]
    b_max = ang_max.T[None, :, :]
    s_min = a_min + b_min
    s_max = a_max + b_max
    cmin = np.where(
        (s_min <= np.pi) & (s_max >= np.pi), -1.0, np.minimum(np.cos(s_min), np.cos(s_max))
    )
    d_min = a_min - b_max
    d_max = a_max - b_min
    cmax = np.where((d_min <= 0.0) & (d_max >= 0.0), 1.0, np.maximum(np.cos(d_min), np.cos(d_max)))
    cmin = np.maximum(cmin - COS_PAD, -1.0)
    cmax = np.minimum(cmax + COS_PAD, 1.0)

    idx = np.arange(n)
    usable = avail[:, None, :] & avail.T[None, :, :]
    usable &= (diag > pivot_tol)[None, None, :]
    usable &= idx[:, None, None] != idx[None, None, :]
    usable &= idx[None, :, None] != idx[None, None, :]
    usable &= (idx[:, None] != idx[None, :])[:, :, None]
    usable &= ~known[:, :, None]

    d_lo = np.where(usable, scale[:, :, None] * cmin, -np.inf)
    d_hi = np.where(usable, scale[:, :, None] * cmax, np.inf)
    cand_lo = d_lo.max(axis=2)
    cand_hi = d_hi.min(axis=2)
    any_usable = usable.any(axis=2)

    new_lo = np.where(any_usable, np.maximum(lo, cand_lo), lo)
    new_hi = np.where(any_usable, np.minimum(hi, cand_hi), hi)
    new_avail = avail | any_usable

    crossed = new_lo > new_hi
    bad = None
    if np.any(crossed):
        width = new_lo - new_hi
        tol = empty_tol * np.maximum(scale, 1.0)
        hard = crossed & (width > tol)
        if np.any(hard):
            j, l = map(int, np.argwhere(hard)[0])
            bad = (j, int(np.argmax(d_lo[j, l])), l)
        swap_lo = np.where(crossed, new_hi, new_lo)
        swap_hi = np.where(crossed, new_lo, new_hi)
        new_lo, new_hi = swap_lo, swap_hi
    return new_lo, new_hi, new_avail, bad
