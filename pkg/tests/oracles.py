"""Independent reference computations used only by the tests."""
from __future__ import annotations

import itertools

import numpy as np
import scipy.linalg as sla

# entries in every test instance are O(1); anything below this is round-off
ABS_FLOOR = 1e-9


def rank(a, rtol=1e-9):
    a = np.asarray(a, dtype=float)
    if a.size == 0:
        return 0
    s = np.linalg.svd(a, compute_uv=False)
    return int(np.sum(s > max(rtol * s[0], ABS_FLOOR)))


def null(a):
    """Kernel basis with an absolute floor so that round-off matrices count as zero."""
    a = np.asarray(a, dtype=float)
    n = a.shape[1]
    if a.shape[0] == 0 or n == 0:
        return np.eye(n)
    _, s, vt = sla.svd(a)
    r = int(np.sum(s > max(1e-9 * s[0], ABS_FLOOR))) if s.size else 0
    return vt[r:].T


def orth(a):
    """Column-space basis with the same absolute floor as ``null``."""
    a = np.asarray(a, dtype=float)
    if a.size == 0:
        return np.zeros((a.shape[0], 0))
    u, s, _ = sla.svd(a, full_matrices=False)
    return u[:, :rank(a)]


def span_dim(*blocks):
    cols = [b for b in blocks if b.size and b.shape[1]]
    if not cols:
        return 0
    return rank(np.hstack(cols))


def _fp(f, p, q):
    return f.basis(p, q)


def z_space(f, p, q, j):
    """``{z in F_p C^q : dz in F_{p+j}}`` via scipy null spaces."""
    c = f.complex
    b = _fp(f, p, q)
    if b.size == 0 or b.shape[1] == 0:
        return np.zeros((c.dim(q), 0))
    d = c.dmat(q)
    if d.shape[0] == 0:
        return b
    target = _fp(f, p + j, q + 1)
    if target.shape[1] == 0:
        ann = np.eye(d.shape[0])
    else:
        ann = null(target.T)
    if ann.shape[1] == 0:
        return b
    return b @ null(ann.T @ d @ b)


def classical_page_dims(f, k):
    """``dim Z_k^{p,q} / (Z_{k-1}^{p+1,q} + d Z_{k-1}^{p-k+1,q-1})`` for every entry."""
    c = f.complex
    out = {}
    for p in range(f.p_min, f.p_max + 1):
        for q in c.degrees:
            zk = z_space(f, p, q, k)
            a = z_space(f, p + 1, q, k - 1)
            if q - 1 in c.degrees:
                b = c.dmat(q - 1) @ z_space(f, p - k + 1, q - 1, k - 1)
            else:
                b = np.zeros((c.dim(q), 0))
            out[(p, q)] = span_dim(zk) - span_dim(a, b)
    return out


def rank_nullity_betti(c):
    return {q: c.dim(q) - rank(c.dmat(q)) - rank(c.dmat(q - 1)) for q in c.degrees}


def laplacian_spectrum_oracle(c, q):
    """Non-zero eigenvalues of the Laplacian as squared singular values in whitened coordinates."""
    def whiten(m, gs, gt):
        ls = np.linalg.cholesky(gs) if gs.size else gs
        lt = np.linalg.cholesky(gt) if gt.size else gt
        if m.size == 0:
            return np.zeros(m.shape)
        return lt.T @ m @ np.linalg.inv(ls.T)
    vals = []
    for m, gs, gt in ((c.dmat(q), c.gram(q), c.gram(q + 1)), (c.dmat(q - 1), c.gram(q - 1), c.gram(q))):
        if m.size:
            s = np.linalg.svd(whiten(m, gs, gt), compute_uv=False)
            vals += [x * x for x in s if x > 1e-9 * max(s[0], 1e-300)]
    return sorted(vals)


def frame_log_torsion(c, rng=None):
    """``log T_C`` from explicit bases ``b, h, s`` of ``C^q`` built with scipy.

    Independent of the library's frame code: bases from ``scipy.linalg.orth``
    and lifts from least squares, optionally mixed by random matrices.
    """
    total = 0.0
    bnds, lifts, harm = {}, {}, {}
    for q in c.degrees:
        d_prev = c.dmat(q - 1)
        bnds[q] = orth(d_prev) if d_prev.size else np.zeros((c.dim(q), 0))
    for q in c.degrees:
        nxt = bnds.get(q + 1, np.zeros((0, 0)))
        if nxt.size and nxt.shape[1]:
            lifts[q] = np.linalg.lstsq(c.dmat(q), nxt, rcond=None)[0]
        else:
            lifts[q] = np.zeros((c.dim(q), 0))
        d = c.dmat(q)
        z = null(d) if d.shape[0] else np.eye(c.dim(q))
        g = c.gram(q)
        # cocycles G-orthogonal to the boundaries
        b = bnds[q]
        if b.shape[1]:
            z = z @ null(b.T @ g @ z) if z.shape[1] else z
        harm[q] = z
    for q in c.degrees:
        g = c.gram(q)
        b, h, s = bnds[q], harm[q], lifts[q]
        if rng is not None and h.shape[1]:
            h = h @ (rng.uniform(-1, 1, (h.shape[1], h.shape[1])) + 3 * np.eye(h.shape[1]))
            if b.shape[1]:
                h = h + b @ rng.uniform(-1, 1, (b.shape[1], h.shape[1]))
        frame = np.hstack([m for m in (b, h, s) if m.shape[1]]) if c.dim(q) else np.zeros((0, 0))
        if frame.size == 0:
            continue
        vol_c = 0.5 * np.linalg.slogdet(frame.T @ g @ frame)[1]
        if h.shape[1]:
            # Hodge norm of the classes: harmonic parts of h
            hz = harm[q]
            gz = hz.T @ g @ hz
            coeff = np.linalg.solve(gz, hz.T @ g @ h)
            vol_h = 0.5 * np.linalg.slogdet(coeff.T @ gz @ coeff)[1]
        else:
            vol_h = 0.0
        total += (-1) ** q * (vol_h - vol_c)
    return total


def small_complexes(max_dim=3, n_degrees=2, values=(-1.0, 0.0, 2.0)):
    """All complexes with per-degree dimension at most ``max_dim`` and entries from ``values`` (``d^2 = 0``)."""
    for dims in itertools.product(range(0, max_dim + 1), repeat=n_degrees):
        shapes = [(dims[i + 1], dims[i]) for i in range(n_degrees - 1)]
        sizes = [a * b for a, b in shapes]
        if sum(sizes) > 4:
            continue
        for entries in itertools.product(values, repeat=sum(sizes)):
            mats, o = [], 0
            for (r, k), sz in zip(shapes, sizes):
                mats.append(np.array(entries[o:o + sz], dtype=float).reshape(r, k))
                o += sz
            if all(not np.any(mats[i + 1] @ mats[i]) for i in range(len(mats) - 1)):
                yield dims, mats


def hodge_orthonormal(c, q):
    """Harmonic cocycles (orthogonal to boundaries), orthonormal for the Gram of ``C^q``."""
    g = c.gram(q)
    d = c.dmat(q)
    z = null(d) if d.shape[0] else np.eye(c.dim(q))
    prev = c.dmat(q - 1)
    if prev.size and z.shape[1]:
        b = orth(prev)
        if b.shape[1]:
            z = z @ null(b.T @ g @ z)
    if z.shape[1] == 0:
        return z
    lc = np.linalg.cholesky(z.T @ g @ z)
    return z @ np.linalg.inv(lc.T)


def les_matrices(c0, c1, c2, incl, proj):
    """Dimensions and maps of ``H C0 -> H C1 -> H C2 -> H C0[1]`` in orthonormal harmonic coordinates.

    The connecting map lifts by least squares (any lift), applies ``d`` and
    solves for the preimage under the inclusion.
    """
    qs = list(c1.degrees)
    u = {(k, q): hodge_orthonormal(c, q) for k, c in enumerate((c0, c1, c2)) for q in qs}
    dims, maps = [], []
    for q in qs:
        dims += [u[(0, q)].shape[1], u[(1, q)].shape[1], u[(2, q)].shape[1]]
        maps.append(u[(1, q)].T @ c1.gram(q) @ incl[q] @ u[(0, q)])
        maps.append(u[(2, q)].T @ c2.gram(q) @ proj[q] @ u[(1, q)])
        if q == qs[-1]:
            break
        z = u[(2, q)]
        lift = np.linalg.lstsq(proj[q], z, rcond=None)[0] if z.shape[1] else np.zeros((c1.dim(q), 0))
        dy = c1.dmat(q) @ lift
        x = np.linalg.lstsq(incl[q + 1], dy, rcond=None)[0] if dy.size else np.zeros((c0.dim(q + 1), z.shape[1]))
        maps.append(u[(0, q + 1)].T @ c0.gram(q + 1) @ x)
    return dims, maps


def small_ses_instances():
    """Every coordinate subcomplex of every small complex, with random metrics and quotient bases."""
    from torsionlab.complexes import GradedMetricComplex
    from torsionlab.generate import random_gram, ses_from_two_step
    from torsionlab.spectral import FilteredMetricComplex

    rng = np.random.default_rng(17)
    for n_deg in (2, 3):
        for dims, mats in small_complexes(max_dim=3, n_degrees=n_deg, values=(-1.0, 0.0, 2.0)):
            if sum(dims) == 0 or sum(dims) > 5:
                continue
            grams = [random_gram(rng, n) if n else np.zeros((0, 0)) for n in dims]
            c = GradedMetricComplex.from_matrices(grams, mats)
            total = sum(dims)
            for mask in range(1, 2**total - 1):
                bits = [(mask >> k) & 1 for k in range(total)]
                index, o = {}, 0
                for q, n in enumerate(dims):
                    index[q] = bits[o:o + n]
                    o += n
                # the coordinate span must be d-stable
                stable = True
                for q in range(n_deg - 1):
                    d = mats[q]
                    for j, inside in enumerate(index[q]):
                        if inside and any(d[i, j] and not index[q + 1][i] for i in range(d.shape[0])):
                            stable = False
                if not stable:
                    continue
                f = FilteredMetricComplex.from_coordinate_levels(c, index, 0, 1)
                yield ses_from_two_step(f, rng)


def les_sign():
    """The sign ``s`` with ``T1 - T0 - T2 = s T(LES)`` on every small instance, from frames alone.

    Returns ``(s, instances, determinate)``; ``s`` is 0 when neither sign fits.
    """
    from torsionlab.complexes import GradedMetricComplex

    plus, minus, determinate = [], [], 0
    for s in small_ses_instances():
        t0, t1, t2 = (frame_log_torsion(c) for c in (s.c0, s.c1, s.c2))
        dims, maps = les_matrices(s.c0, s.c1, s.c2, s.incl, s.proj)
        les = GradedMetricComplex.from_matrices([np.eye(n) for n in dims], maps, 0)
        if sum(rank_nullity_betti(les).values()):
            return 0, len(plus), determinate
        t_les = frame_log_torsion(les)
        gap = t1 - t0 - t2
        plus.append(abs(gap - t_les))
        minus.append(abs(gap + t_les))
        determinate += abs(t_les) > 1e-3
    for sign, fit, other in ((1, plus, minus), (-1, minus, plus)):
        if max(fit) < 1e-8 and max(other) > 1e-3:
            return sign, len(plus), determinate
    return 0, len(plus), determinate
