"""Acceptance battery: one PASS/FAIL line per criterion.

Run with ``pytest tests/test_acceptance.py -s`` to see the lines, or
``python tests/test_acceptance.py``.
"""
import subprocess
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

import oracles  # noqa: E402
from torsionlab import bundles  # noqa: E402
from torsionlab.cli import main  # noqa: E402
from torsionlab.complexes import torsion_log_sum, torsion_tc  # noqa: E402
from torsionlab.detline import LES_TORSION_SIGN, det_iso_c_hc, ses_torsion_check  # noqa: E402
from torsionlab.generate import (  # noqa: E402
    random_complex,
    random_filtered,
    random_geometric_instance,
    random_gysin,
    random_monodromy,
    random_morse_bott,
    random_ses,
    random_wang,
)
from torsionlab.geomcx import (  # noqa: E402
    assemble,
    e1_identification,
    euler_identity_check,
    geometric_torsion_ledger,
    morse_smale_check,
)
from torsionlab.io import dumps, loads, to_document  # noqa: E402
from torsionlab.spectral import log_t_comb, maumary_check, page_invariants  # noqa: E402


@dataclass
class Outcome:
    passed: bool
    worst: float
    tol: float | None
    count: int
    elapsed: float
    limit: float | None
    notes: list[str] = field(default_factory=list)

    def line(self, n: int) -> str:
        status = "PASS" if self.passed else "FAIL"
        limit = f" limit={self.limit:g}s" if self.limit else ""
        extra = f" [{'; '.join(self.notes[:3])}]" if self.notes else ""
        tol = "exact" if self.tol is None else f"{self.tol:g}"
        return (f"criterion {n}: {status} instances={self.count} worst={self.worst:.3e} "
                f"tol={tol} time={self.elapsed:.2f}s{limit}{extra}")


def _finish(t0, worst, tol, count, limit, notes):
    elapsed = time.perf_counter() - t0
    if limit is not None and elapsed >= limit:
        notes.append(f"runtime {elapsed:.1f}s over {limit}s")
    ok = not notes and (tol is None or worst < tol)
    return Outcome(ok, worst, tol, count, elapsed, limit, notes)


def criterion_1():
    # torsion from volumes against the Laplacian log-determinant sum
    t0, worst = time.perf_counter(), 0.0
    for seed in range(1000):
        c = random_complex(seed, n_degrees=5, max_total=24)
        worst = max(worst, abs(torsion_tc(c) - torsion_log_sum(c)))
    return _finish(t0, worst, 1e-8, 1000, 10.0, [])


def criterion_2():
    t0, worst = time.perf_counter(), 0.0
    for seed in range(200):
        c = random_complex(seed)
        rng = np.random.default_rng(seed)
        worst = max(worst, abs(det_iso_c_hc(c, rng=rng).log_vol - torsion_tc(c)))
    return _finish(t0, worst, 1e-7, 200, 10.0, [])


def criterion_3():
    t0, notes = time.perf_counter(), []
    sign, checked, determinate = oracles.les_sign()
    if sign != LES_TORSION_SIGN:
        notes.append(f"frame oracle sign {sign} != library sign {LES_TORSION_SIGN}")
    if determinate < 500:
        notes.append(f"only {determinate} small instances fix the sign")
    worst = 0.0
    for seed in range(200):
        s = random_ses(seed)
        worst = max(worst, abs(ses_torsion_check(s.c0, s.c1, s.c2, s.incl, s.proj).residual))
    return _finish(t0, worst, 1e-6, 200, 30.0, notes)


def criterion_4():
    t0, worst, notes = time.perf_counter(), 0.0, []
    for seed in range(300):
        f = random_filtered(seed)
        if f.length > 4:
            notes.append(f"seed {seed}: {f.length} filtration steps")
        res = log_t_comb(f)
        worst = max(worst, abs(maumary_check(f, result=res).residual))
        for pg in res.pages:
            want = oracles.classical_page_dims(f, pg.k)
            if {key: pg.dim(*key) for key in want} != want:
                notes.append(f"seed {seed}: E_{pg.k} dims differ from the classical formula")
    return _finish(t0, worst, 1e-6, 300, 60.0, notes)


def criterion_5():
    t0, worst, notes = time.perf_counter(), 0.0, []
    for seed in range(300):
        f = random_filtered(seed)
        checks = page_invariants(f, log_t_comb(f), np.random.default_rng(seed))
        by_name = {c.name: c for c in checks}
        for name in ("page_euler", "page_morse_chain"):
            if not by_name[name].passed:
                notes.append(f"seed {seed}: {by_name[name].violations[0]}")
        worst = max(worst, by_name["page_lift_independence"].residual, by_name["page_delta_squared"].residual)
    return _finish(t0, worst, 1e-8, 300, None, notes)


def criterion_6():
    t0, notes = time.perf_counter(), []
    for seed in range(200):
        g = assemble(random_morse_bott(seed))
        for check in (e1_identification(g), euler_identity_check(g)):
            if not check.passed:
                notes.append(f"seed {seed}: {check.violations[0]}")
        ms = morse_smale_check(assemble(random_morse_bott(seed, morse_smale=True)))
        if not ms.passed:
            notes.append(f"seed {seed}: {ms.violations[0]}")
    return _finish(t0, 0.0, None, 400, None, notes)


def criterion_7():
    t0, worst, notes = time.perf_counter(), 0.0, []
    for seed in range(100):
        m, n, integ = random_wang(seed)
        w = bundles.wes_check(bundles.WangData(m, n, integ))
        m, n, integ = random_gysin(seed)
        gy = bundles.ges_check(bundles.GysinData(m, n, integ))
        for c in (w, gy):
            worst = max(worst, abs(c.residual))
            if c.invariant == "unit_volume_i_p":
                notes.append(f"seed {seed}: {c.name} {c.violations[-1]}")
    mt_worst = 0.0
    for seed in range(50):
        phi = random_monodromy(seed)
        seq = bundles.build_sequence(bundles.WangData(bundles.mapping_torus(phi).model, 1))
        want = sum((-1) ** (r + 1) * np.log(abs(np.linalg.det(m - np.eye(len(m))))) for r, m in phi.items())
        mt_worst = max(mt_worst, abs(seq.log_t - want))
    if mt_worst >= 1e-8:
        notes.append(f"mapping torus off the closed form by {mt_worst:.2e}")
    return _finish(t0, worst, 1e-6, 250, 30.0, notes)


def criterion_8():
    t0, worst, notes = time.perf_counter(), 0.0, []
    if not bundles.term_cancellation_check().passed:
        notes.append("symbolic term cancellation")
    for seed in range(100):
        _, g, integ = random_geometric_instance(seed)
        worst = max(worst, abs(geometric_torsion_ledger(g, integ).residual))
        for make in (random_wang, random_gysin):
            b = bundles.BundleModel(make(seed)[0])
            rng = np.random.default_rng(seed)
            inputs = bundles.consistent_ledger_inputs(b, rng, float(rng.uniform(-1, 1)))
            worst = max(worst, abs(bundles.lst_ledger(b, inputs).residual))
    return _finish(t0, worst, 1e-6, 300, None, notes)


def _quiet_main(argv):
    import contextlib
    import io

    buf = io.StringIO()
    with contextlib.redirect_stdout(buf), contextlib.redirect_stderr(io.StringIO()):
        code = main(argv)
    return code, buf.getvalue()


def criterion_9():
    t0, notes = time.perf_counter(), []
    for seed in range(50):
        m, n, integ = random_wang(seed)
        mg, ng, ig = random_gysin(seed)
        docs = [to_document(random_complex(seed)), to_document(random_filtered(seed)),
                to_document(random_morse_bott(seed)), to_document(bundles.BundleModel(mg)),
                to_document(bundles.WangData(m, n, integ)), to_document(bundles.GysinData(mg, ng, ig))]
        for doc in docs:
            text = dumps(doc)
            back = loads(text)
            if dumps(to_document(back.model, kind=back.kind, integration=back.integration, n=back.n)) != text:
                notes.append(f"round trip {doc['kind']} seed {seed}")
        if dumps(to_document(random_filtered(seed))) != dumps(to_document(random_filtered(seed))):
            notes.append(f"generator determinism seed {seed}")
    if _quiet_main(["spectral", "--seed", "3"]) != _quiet_main(["spectral", "--seed", "3"]):
        notes.append("command output not deterministic")
    codes = {"pass": _quiet_main(["torsion", "--seed", "1"])[0],
             "fail": _quiet_main(["torsion", "--seed", "1", "--tolerance", "1e-30"])[0],
             "usage": _quiet_main(["torsion", "/nonexistent/doc.json"])[0]}
    if codes != {"pass": 0, "fail": 1, "usage": 2}:
        notes.append(f"exit codes {codes}")
    s0 = time.perf_counter()
    run = subprocess.run([sys.executable, "-m", "torsionlab.cli", "suite", "--seeds", "100"],
                         capture_output=True, text=True)
    suite_time = time.perf_counter() - s0
    if run.returncode != 0:
        failing = [ln for ln in run.stdout.splitlines() if "\tFAIL\t" in ln]
        notes.append(f"suite exit {run.returncode}: {failing[:2]}")
    if suite_time >= 180.0:
        notes.append(f"suite took {suite_time:.1f}s")
    out = _finish(t0, 0.0, None, 300, None, notes)
    if out.passed:
        out.notes.append(f"suite {suite_time:.1f}s of 180s")
    return out


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6, criterion_7,
            criterion_8, criterion_9]


@pytest.mark.parametrize("n", range(1, 10))
def test_criterion(n, capsys):
    out = CRITERIA[n - 1]()
    with capsys.disabled():
        print("\n" + out.line(n))
    assert out.passed, out.line(n)


if __name__ == "__main__":
    ok = True
    for i, crit in enumerate(CRITERIA, 1):
        out = crit()
        ok &= out.passed
        print(out.line(i), flush=True)
    sys.exit(0 if ok else 1)
