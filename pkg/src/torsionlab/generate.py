"""Seeded random instances that are valid by construction.

Complexes are orthogonal sums of cohomology atoms (one vector, ``d = 0``) and
acyclic atoms (``x -> y`` with ``dx = c y``), written in adapted coordinates and
then moved by random invertible maps with well-bounded condition numbers.
Scalar products are drawn afterwards, directly in the final coordinates.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .complexes import GradedMetricComplex
from .spectral import FilteredMetricComplex

# Basis changes are rejected above this condition number.  Transported Grams
# square it, so the cap sits well below the 1e-10 Gram floor's reach.
MAX_CONDITION = 1e3
_SALT = {"complex": 11, "filtered": 12, "ses": 13, "morse_bott": 14, "quasi_iso": 15,
         "wang": 16, "gysin": 17, "bundle": 18, "monodromy": 19}


def rng_for(kind: str, seed: int) -> np.random.Generator:
    if not (0 <= int(seed) < 2**64):
        raise ValueError("seed must be an unsigned 64-bit integer")
    return np.random.default_rng([int(seed), _SALT[kind]])


def random_invertible(rng: np.random.Generator, n: int, mask: np.ndarray | None = None) -> np.ndarray:
    """Entries uniform in [-1, 1] (restricted to ``mask``), condition number below ``MAX_CONDITION``.

    The smallest singular value is also kept above ``1 / MAX_CONDITION``; for
    ``n = 1`` the condition number alone would accept a scalar near zero.
    """
    if n == 0:
        return np.zeros((0, 0))
    for _ in range(1000):
        m = rng.uniform(-1.0, 1.0, (n, n))
        if mask is not None:
            m = m * mask
        sv = np.linalg.svd(m, compute_uv=False)
        if sv[-1] * MAX_CONDITION > max(sv[0], 1.0):
            return m
    raise RuntimeError("could not draw a well-conditioned matrix")


def random_gram(rng: np.random.Generator, n: int) -> np.ndarray:
    if n == 0:
        return np.zeros((0, 0))
    while True:
        a = rng.uniform(-1.0, 1.0, (n, n))
        g = a @ a.T / n + 0.05 * np.eye(n)
        g = 0.5 * (g + g.T)
        if np.linalg.cond(g) < MAX_CONDITION:
            return g


def random_scalar(rng: np.random.Generator) -> float:
    """Magnitude in [0.5, 2], random sign."""
    return float(rng.choice([-1.0, 1.0]) * np.exp(rng.uniform(np.log(0.5), np.log(2.0))))


@dataclass
class AtomLayout:
    """Adapted coordinates: per degree a list of filtration levels, plus the differential."""

    q_min: int
    levels: dict[int, list[int]]
    diffs: dict[int, np.ndarray]

    @property
    def degrees(self) -> range:
        return range(self.q_min, self.q_min + len(self.levels))

    def dim(self, q: int) -> int:
        return len(self.levels.get(q, []))


def atom_layout(rng: np.random.Generator, n_degrees: int, max_total: int, cap: int,
                n_levels: int = 1, q_min: int = 0) -> AtomLayout:
    """Random cohomology and acyclic atoms, total dimension at most ``max_total``."""
    degrees = range(q_min, q_min + n_degrees)
    while True:
        coh = {q: int(rng.integers(0, cap + 1)) for q in degrees}
        pairs = {q: int(rng.integers(0, cap + 1)) for q in degrees if q + 1 in degrees}
        if sum(coh.values()) + 2 * sum(pairs.values()) <= max_total:
            break
    levels: dict[int, list[int]] = {q: [] for q in degrees}
    arrows: list[tuple[int, int, int, float]] = []
    for q in degrees:
        for _ in range(coh[q]):
            levels[q].append(int(rng.integers(0, n_levels)))
    for q, n in pairs.items():
        for _ in range(n):
            px = int(rng.integers(0, n_levels))
            py = int(rng.integers(px, n_levels))
            levels[q].append(px)
            levels[q + 1].append(py)
            arrows.append((q, len(levels[q]) - 1, len(levels[q + 1]) - 1, random_scalar(rng)))
    diffs = {q: np.zeros((len(levels[q + 1]), len(levels[q]))) for q in degrees if q + 1 in degrees}
    for q, i, j, c in arrows:
        diffs[q][j, i] = c
    return AtomLayout(q_min, levels, diffs)


def _filtration_mask(levels: list[int]) -> np.ndarray:
    lv = np.asarray(levels)
    return (lv[:, None] >= lv[None, :]).astype(float)


def realise(rng: np.random.Generator, layout: AtomLayout, mix_filtration: bool = True,
            global_change: bool = True):
    """Move a layout by filtration-preserving and then arbitrary basis changes.

    Returns ``(complex, filtration_bases)`` where ``filtration_bases[p][q]``
    spans ``F_p C^q`` for ``p`` from 0 to the number of levels.
    """
    degrees = layout.degrees
    n_levels = max([max(v, default=0) for v in layout.levels.values()], default=0) + 1
    maps = {}
    for q in degrees:
        n = layout.dim(q)
        while True:
            t = random_invertible(rng, n, _filtration_mask(layout.levels[q])) if mix_filtration else np.eye(n)
            s = random_invertible(rng, n) if global_change else np.eye(n)
            if n == 0 or np.linalg.cond(s @ t) < MAX_CONDITION:
                break
        maps[q] = s @ t if n else np.zeros((0, 0))
    diffs = []
    for q in list(degrees)[:-1]:
        d = layout.diffs[q]
        if d.size:
            d = maps[q + 1] @ d @ np.linalg.inv(maps[q])
        diffs.append(d)
    grams = [random_gram(rng, layout.dim(q)) for q in degrees]
    c = GradedMetricComplex.from_matrices(grams, diffs, layout.q_min)
    bases = {}
    for p in range(0, n_levels + 1):
        bases[p] = []
        for q in degrees:
            cols = [j for j, v in enumerate(layout.levels[q]) if v >= p]
            m = maps[q][:, cols] if layout.dim(q) else np.zeros((0, 0))
            bases[p].append(m.reshape(layout.dim(q), len(cols)))
    return c, bases


def random_complex(seed: int, n_degrees: int = 5, max_total: int = 24, cap: int = 3,
                   q_min: int = 0) -> GradedMetricComplex:
    rng = rng_for("complex", seed)
    layout = atom_layout(rng, n_degrees, max_total, cap, 1, q_min)
    c, _ = realise(rng, layout, mix_filtration=False)
    return c


def random_filtered(seed: int, n_degrees: int = 4, max_total: int = 24, cap: int = 3,
                    n_levels: int | None = None) -> FilteredMetricComplex:
    """Filtered complex with at most 4 filtration steps unless ``n_levels`` is given."""
    rng = rng_for("filtered", seed)
    if n_levels is None:
        n_levels = int(rng.integers(1, 5))
    layout = atom_layout(rng, n_degrees, max_total, cap, n_levels)
    c, bases = realise(rng, layout)
    for p in range(max(bases) + 1, n_levels + 1):
        bases[p] = [np.zeros((c.dim(q), 0)) for q in c.degrees]
    return FilteredMetricComplex.from_levels(c, {p: bases[p] for p in range(0, n_levels + 1)})


@dataclass
class SESInstance:
    c0: GradedMetricComplex
    c1: GradedMetricComplex
    c2: GradedMetricComplex
    incl: dict[int, np.ndarray]
    proj: dict[int, np.ndarray]


def ses_from_two_step(f: FilteredMetricComplex, rng: np.random.Generator | None = None) -> SESInstance:
    """``0 -> F_1 -> C -> C / F_1 -> 0`` with sub and quotient scalar products."""
    from .numeric import g_complement, solve_in_span

    c1 = f.complex
    incl, proj, g0, g2, d0, d2 = {}, {}, [], [], [], []
    bases0, bases2 = {}, {}
    for q in c1.degrees:
        g = c1.gram(q)
        b = f.basis(f.p_min + 1, q)
        b = b[:, :np.linalg.matrix_rank(b)] if b.size else b
        v = g_complement(g, b) if c1.dim(q) else np.zeros((0, 0))
        s2 = random_invertible(rng, v.shape[1]) if rng is not None else np.eye(v.shape[1])
        incl[q] = b
        proj[q] = s2 @ (v.T @ g) if v.shape[1] else np.zeros((0, c1.dim(q)))
        bases0[q], bases2[q] = b, (v, s2)
        g0.append(b.T @ g @ b)
        if v.shape[1]:
            s2i = np.linalg.inv(s2)
            g2.append(s2i.T @ s2i)
        else:
            g2.append(np.zeros((0, 0)))
    for q in list(c1.degrees)[:-1]:
        d = c1.dmat(q)
        b, bn = bases0[q], bases0[q + 1]
        if b.shape[1] and bn.shape[1]:
            x, _ = solve_in_span(bn, d @ b)
        else:
            x = np.zeros((bn.shape[1], b.shape[1]))
        d0.append(x)
        v, s2 = bases2[q]
        if v.shape[1] and proj[q + 1].shape[0]:
            d2.append(proj[q + 1] @ d @ v @ np.linalg.inv(s2))
        else:
            d2.append(np.zeros((proj[q + 1].shape[0], v.shape[1])))
    g0 = [0.5 * (g + g.T) for g in g0]
    g2 = [0.5 * (g + g.T) for g in g2]
    c0 = GradedMetricComplex.from_matrices(g0, d0, c1.q_min)
    c2 = GradedMetricComplex.from_matrices(g2, d2, c1.q_min)
    return SESInstance(c0, c1, c2, incl, proj)


def random_ses(seed: int, n_degrees: int = 4, max_total: int = 18, cap: int = 2) -> SESInstance:
    """Compatible short exact sequence, all dims at most 6 by default."""
    rng = rng_for("ses", seed)
    while True:
        layout = atom_layout(rng, n_degrees, max_total, cap, 2)
        if all(layout.dim(q) <= 6 for q in layout.degrees):
            break
    c, bases = realise(rng, layout)
    bases.setdefault(2, [np.zeros((c.dim(q), 0)) for q in c.degrees])
    if 1 not in bases:
        bases[1] = [np.zeros((c.dim(q), 0)) for q in c.degrees]
    f = FilteredMetricComplex.from_levels(c, {p: bases[p] for p in (0, 1, 2)})
    return ses_from_two_step(f, rng)


# -- Morse-Bott models ---------------------------------------------------------


@dataclass
class ComponentAtoms:
    """Atoms in adapted coordinates ``(component, component degree)``."""

    indices: list[int]
    top: list[int]  # highest component degree of each component
    coh: list[tuple[int, int]]
    pairs: list[tuple[tuple[int, int], tuple[int, int], float]]


def random_component_atoms(rng: np.random.Generator, n_components: int, max_index: int,
                           max_comp_degree: int, cap: int, morse_smale: bool = False,
                           indices: list[int] | None = None) -> ComponentAtoms:
    if indices is None:
        indices = sorted(int(rng.integers(0, max_index + 1)) for _ in range(n_components))
    top = [0 if morse_smale else int(rng.integers(0, max_comp_degree + 1)) for _ in indices]
    coh, pairs = [], []
    for i, t in enumerate(top):
        for k in range(t + 1):
            coh += [(i, k)] * int(rng.integers(0, cap + 1))
            if k < t:
                pairs += [((i, k), (i, k + 1), random_scalar(rng))
                          for _ in range(int(rng.integers(0, cap + 1)))]
    cross = []
    for j, pj in enumerate(indices):
        for i, pi in enumerate(indices):
            if pi <= pj:
                continue
            for k in range(top[j] + 1):
                k2 = k + 1 - (pi - pj)
                if 0 <= k2 <= top[i]:
                    cross.append(((j, k), (i, k2)))
    for _ in range(int(rng.integers(0, cap * len(indices) + 1))):
        if not cross:
            break
        a, b = cross[int(rng.integers(0, len(cross)))]
        pairs.append((a, b, random_scalar(rng)))
    if not coh and not pairs:
        coh.append((0, 0))
    return ComponentAtoms(indices, top, coh, pairs)


def model_from_atoms(rng: np.random.Generator, atoms: ComponentAtoms, mix: bool = True,
                     metric: bool = True):
    """Realise component atoms as a Morse-Bott model.

    The total differential is conjugated by a basis change that is
    block-triangular for the index filtration and block-diagonal among
    components of equal index; its blocks are then read back as component
    differentials and instantons.
    """
    from .geomcx import Component, MorseBottModel

    n = len(atoms.indices)
    counts: dict[tuple[int, int], int] = {}

    def new(i, k):
        counts[(i, k)] = counts.get((i, k), 0) + 1
        return counts[(i, k)] - 1

    entries = []
    for i, k in atoms.coh:
        entries.append(("c", (i, k, new(i, k))))
    for (i, k), (i2, k2), s in atoms.pairs:
        entries.append(("p", ((i, k, new(i, k)), (i2, k2, new(i2, k2)), s)))
    dims = [[counts.get((i, k), 0) for k in range(atoms.top[i] + 1)] for i in range(n)]
    lo = min(atoms.indices)
    hi = max(p + t for p, t in zip(atoms.indices, atoms.top))
    # offsets inside total degree q
    off = {}
    size = {}
    for q in range(lo, hi + 1):
        o = 0
        for i in range(n):
            k = q - atoms.indices[i]
            m = dims[i][k] if 0 <= k < len(dims[i]) else 0
            off[(q, i)] = (o, m)
            o += m
        size[q] = o
    delta0 = {q: np.zeros((size[q + 1], size[q])) for q in range(lo, hi)}
    for kind, data in entries:
        if kind != "p":
            continue
        (i, k, a), (i2, k2, b), s = data
        q = atoms.indices[i] + k
        delta0[q][off[(q + 1, i2)][0] + b, off[(q, i)][0] + a] = s
    maps = {}
    for q in range(lo, hi + 1):
        while True:
            t = np.zeros((size[q], size[q]))
            for j in range(n):
                oj, mj = off[(q, j)]
                if not mj:
                    continue
                for i in range(n):
                    oi, mi = off[(q, i)]
                    if not mi:
                        continue
                    if i == j:
                        t[oi:oi + mi, oj:oj + mj] = random_invertible(rng, mi) if mix else np.eye(mi)
                    elif mix and atoms.indices[i] > atoms.indices[j]:
                        t[oi:oi + mi, oj:oj + mj] = rng.uniform(-1, 1, (mi, mj))
            if size[q] == 0 or np.linalg.cond(t) < MAX_CONDITION:
                break
        maps[q] = t
    delta = {q: maps[q + 1] @ delta0[q] @ np.linalg.inv(maps[q]) if delta0[q].size else delta0[q]
             for q in delta0}
    comps = []
    for i in range(n):
        p = atoms.indices[i]
        grams, diffs = [], []
        for k in range(atoms.top[i] + 1):
            grams.append(random_gram(rng, dims[i][k]) if metric else np.eye(dims[i][k]))
        for k in range(atoms.top[i]):
            q = p + k
            (os_, ms), (ot, mt) = off[(q, i)], off[(q + 1, i)]
            diffs.append(delta[q][ot:ot + mt, os_:os_ + ms])
        comps.append(Component(f"S{i}", p, GradedMetricComplex.from_matrices(grams, diffs, 0)))
    inst: dict[tuple[int, int], dict[int, np.ndarray]] = {}
    for j in range(n):
        for i in range(n):
            if atoms.indices[i] <= atoms.indices[j]:
                continue
            for k in range(atoms.top[j] + 1):
                q = atoms.indices[j] + k
                if q + 1 > hi:
                    continue
                (os_, ms), (ot, mt) = off[(q, j)], off[(q + 1, i)]
                k2 = q + 1 - atoms.indices[i]
                if not (0 <= k2 <= atoms.top[i]):
                    continue
                blk = delta[q][ot:ot + mt, os_:os_ + ms] * (-1) ** k
                inst.setdefault((i, j), {})[k] = blk
    return MorseBottModel(comps, inst)


def random_morse_bott(seed: int, max_components: int = 4, max_index: int = 3,
                      max_comp_degree: int = 2, cap: int = 1, morse_smale: bool = False):
    rng = rng_for("morse_bott", seed)
    n = int(rng.integers(1, max_components + 1))
    atoms = random_component_atoms(rng, n, max_index, max_comp_degree, cap, morse_smale)
    return model_from_atoms(rng, atoms)


def random_quasi_iso(rng: np.random.Generator, target: GradedMetricComplex, cap: int = 1):
    """Ambient complex ``M = C ⊕ A`` (``A`` acyclic) with a quasi-isomorphism ``M -> C``.

    The map is ``(id + dh + hd) ⊕ (dh' + h'd)`` for random ``h, h'``, then the
    ambient basis is changed at random and given a fresh scalar product.
    """
    from .geomcx import IntegrationMap

    degrees = target.degrees
    layout_levels = {q: [] for q in degrees}
    arrows = []
    for q in degrees:
        if q + 1 in degrees:
            for _ in range(int(rng.integers(0, cap + 1))):
                layout_levels[q].append(0)
                layout_levels[q + 1].append(0)
                arrows.append((q, len(layout_levels[q]) - 1, len(layout_levels[q + 1]) - 1, random_scalar(rng)))
    a_dims = {q: len(layout_levels[q]) for q in degrees}
    a_d = {q: np.zeros((a_dims[q + 1], a_dims[q])) for q in degrees if q + 1 in degrees}
    for q, i, j, c in arrows:
        a_d[q][j, i] = c
    h = {q: rng.uniform(-1, 1, (target.dim(q - 1), target.dim(q))) for q in degrees}
    h2 = {q: rng.uniform(-1, 1, (target.dim(q - 1), a_dims[q])) for q in degrees}

    def dm(q):
        return target.dmat(q)

    def ad(q):
        return a_d.get(q, np.zeros((a_dims.get(q + 1, 0), a_dims[q])))

    maps, amb_d = {}, {}
    for q in degrees:
        n = target.dim(q)
        dh = dm(q - 1) @ h[q] if q - 1 in degrees else np.zeros((n, n))
        hd = h[q + 1] @ dm(q) if q + 1 in degrees else np.zeros((n, n))
        left = np.eye(n) + dh + hd
        dh2 = dm(q - 1) @ h2[q] if q - 1 in degrees else np.zeros((n, a_dims[q]))
        h2d = h2[q + 1] @ ad(q) if q + 1 in degrees else np.zeros((n, a_dims[q]))
        maps[q] = np.hstack([left, dh2 + h2d])
    for q in list(degrees)[:-1]:
        top = np.hstack([dm(q), np.zeros((target.dim(q + 1), a_dims[q]))])
        bot = np.hstack([np.zeros((a_dims[q + 1], target.dim(q))), ad(q)])
        amb_d[q] = np.vstack([top, bot])
    change = {q: random_invertible(rng, target.dim(q) + a_dims[q]) for q in degrees}
    diffs = []
    for q in list(degrees)[:-1]:
        m = amb_d[q]
        diffs.append(change[q + 1] @ m @ np.linalg.inv(change[q]) if m.size else m)
    grams = [random_gram(rng, target.dim(q) + a_dims[q]) for q in degrees]
    ambient = GradedMetricComplex.from_matrices(grams, diffs, target.q_min)
    new_maps = {q: maps[q] @ np.linalg.inv(change[q]) if maps[q].size else maps[q] for q in degrees}
    return IntegrationMap(ambient, target, new_maps)


def random_geometric_instance(seed: int, **kw):
    """A Morse-Bott model together with an integration map into its total complex."""
    from .geomcx import assemble

    model = random_morse_bott(seed, **kw)
    g = assemble(model)
    rng = rng_for("quasi_iso", seed)
    return model, g, random_quasi_iso(rng, g.complex)


def _atoms_with_cross(rng, indices, top, coh_degrees, cross, cap):
    coh, pairs = [], []
    for i, t in enumerate(top):
        for k in coh_degrees(t):
            coh += [(i, k)] * int(rng.integers(0, cap + 1))
        for k in range(t):
            pairs += [((i, k), (i, k + 1), random_scalar(rng)) for _ in range(int(rng.integers(0, cap + 1)))]
    for _ in range(int(rng.integers(0, cap * len(indices) + 2))):
        if not cross:
            break
        a, b = cross[int(rng.integers(0, len(cross)))]
        pairs.append((a, b, random_scalar(rng)))
    if not coh and not pairs:
        coh.append((0, 0))
    return ComponentAtoms(list(indices), list(top), coh, pairs)


def random_wang(seed: int, max_n: int = 3, max_fiber_degree: int = 2, cap: int = 1):
    """Bundle over a sphere: fibers over one point of index 0 and one of index ``n``.

    Returns ``(model, n, integration)``.
    """
    from .geomcx import assemble

    rng = rng_for("wang", seed)
    n = int(rng.integers(1, max_n + 1))
    indices = [0, n]
    top = [int(rng.integers(0, max_fiber_degree + 1))] * 2
    cross = [((0, k), (1, k - n + 1)) for k in range(top[0] + 1) if 0 <= k - n + 1 <= top[1]]
    atoms = _atoms_with_cross(rng, indices, top, lambda t: range(t + 1), cross, cap)
    model = model_from_atoms(rng, atoms)
    return model, n, random_quasi_iso(rng, assemble(model).complex)


def random_gysin(seed: int, max_n: int = 2, max_components: int = 4, cap: int = 1):
    """Sphere bundle: every fiber has cohomology only in degrees 0 and ``n``.

    Cross terms are base arrows (index up by one, fiber degree kept) and
    transgressions from fiber degree ``n`` to fiber degree 0 over an index
    jump of ``n + 1``.  Returns ``(model, n, integration)``.
    """
    from .geomcx import assemble

    rng = rng_for("gysin", seed)
    n = int(rng.integers(1, max_n + 1))
    k = int(rng.integers(2, max_components + 1))
    indices = sorted(int(rng.integers(0, n + 3)) for _ in range(k))
    top = [n] * k
    cross = []
    for j, pj in enumerate(indices):
        for i, pi in enumerate(indices):
            if pi == pj + 1:
                cross += [((j, 0), (i, 0)), ((j, n), (i, n))]
            if pi == pj + n + 1:
                cross.append(((j, n), (i, 0)))
    atoms = _atoms_with_cross(rng, indices, top, lambda t: (0, t), cross, cap)
    model = model_from_atoms(rng, atoms)
    return model, n, random_quasi_iso(rng, assemble(model).complex)


def random_monodromy(seed: int, max_degree: int = 2, max_rank: int = 3) -> dict[int, np.ndarray]:
    """Monodromy matrices ``φ_r`` with ``φ_r - I`` safely invertible."""
    rng = rng_for("monodromy", seed)
    out = {}
    for r in range(int(rng.integers(0, max_degree + 1)) + 1):
        m = int(rng.integers(1, max_rank + 1))
        while True:
            phi = random_invertible(rng, m)
            s = np.linalg.svd(phi - np.eye(m), compute_uv=False)
            if s[-1] > 0.1:
                break
        out[r] = phi
    return out
