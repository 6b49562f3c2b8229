"""Acceptance suite: one PASS/FAIL line per criterion.

Run with ``pytest tests/test_acceptance.py`` or ``python tests/test_acceptance.py``; the
lines appear in the "acceptance criteria" section of the terminal summary.
"""

import json
import sys
import time
from collections import Counter

import numpy as np
import pytest
from conftest import ACCEPTANCE_LINES

from su2sps.cli_report import main as cli_main
from su2sps.fusion import FusionMaps, verify_fusion_dimensions, verify_fusion_equivariance, verify_registry
from su2sps.kk_gysin import AbelianGroup, KKContext, certify_all, gysin_k_theory
from su2sps.linalg_core import dagger, op_norm
from su2sps.ncpoly import verify_ideal_correspondence
from su2sps.sequences import dim_sequence, verify_sequence_identities
from su2sps.sps_core import build_system, determinant_dimension, determinant_dimension_numeric, verify_determinant
from su2sps.toeplitz import verify_commutator_decay, verify_toeplitz_relations

BUDGETS = [(1, 8), (2, 5), (3, 4)]
KNOWN_DIMS = {
    (1, 8): [1, 2, 3, 4, 5, 6, 7, 8, 9],
    (2, 5): [1, 3, 8, 21, 55, 144],
    (3, 4): [1, 4, 15, 56, 209],
}

_systems = {}


def system(n, M):
    if (n, M) not in _systems:
        _systems[(n, M)] = build_system(n, M)
    return _systems[(n, M)]


def report(number, ok, detail, elapsed):
    line = f"{'PASS' if ok else 'FAIL'}  criterion {number:>2}  {detail}  [{elapsed:.2f} s]"
    ACCEPTANCE_LINES[number] = line
    return ok


def summarise(reps):
    bad = [r for r in reps if not r.passed]
    worst = max((r.residual for r in reps if not r.shadowed), default=0.0)
    shadowed = sum(r.shadowed for r in reps)
    text = f"{len(reps)} checks, {len(bad)} failing, {shadowed} shadowed, worst residual {worst:.2e}"
    if bad:
        names = Counter(r.name for r in bad)
        text += " (failing: " + ", ".join(f"{k} x{v}" for k, v in sorted(names.items())) + ")"
    return not bad, text


def test_criterion_01_sequences():
    start = time.perf_counter()
    reps = [r for n in range(1, 7) for r in verify_sequence_identities(n, 40)]
    elapsed = time.perf_counter() - start
    ok, text = summarise(reps)
    integer = [r for r in reps if not r.name.startswith("gamma")]
    exact = all(r.tolerance == 0 and r.residual == 0 for r in integer)
    ok = ok and exact and elapsed < 1.0
    assert report(1, ok, f"{text}; {len(integer)} integer identities exact: {exact}", elapsed)


def test_criterion_02_dimensions():
    start = time.perf_counter()
    mismatches = []
    for n, M in BUDGETS:
        dims = system(n, M).dims
        if dims != KNOWN_DIMS[(n, M)] or dims != dim_sequence(n, M):
            mismatches.append((n, M, dims))
    elapsed = time.perf_counter() - start
    ok = not mismatches and elapsed < 60
    assert report(2, ok, f"built dims equal d_m for {BUDGETS}; mismatches {mismatches}", elapsed)


def test_criterion_03_determinant():
    start = time.perf_counter()
    reps = [r for n in (1, 2, 3) for r in verify_determinant(n, tol=1e-9)]
    ok, text = summarise(reps)
    patterns = {(2,): 4, (1, 1): 2, (0, 2): 4}
    numeric = {p: determinant_dimension_numeric(p) for p in patterns}
    ok = ok and all(numeric[p] == determinant_dimension(p) == patterns[p] for p in patterns)
    elapsed = time.perf_counter() - start
    assert report(3, ok, f"{text}; reducible dims {numeric}", elapsed)


def test_criterion_04_ideal_correspondence():
    start = time.perf_counter()
    reps = [r for n in (1, 2) for r in verify_ideal_correspondence(system(n, 5), tol=1e-9)]
    ok, text = summarise(reps)
    assert report(4, ok, text, time.perf_counter() - start)


def test_criterion_05_fusion():
    start = time.perf_counter()
    reps = []
    worst_unitary = 0.0
    for n, M in BUDGETS:
        fm = FusionMaps(system(n, M))
        for k in range(M + 1):
            for m in range(M + 1 - k):
                w = fm.fusion_unitary(k, m)
                worst_unitary = max(worst_unitary, op_norm(dagger(w) @ w - np.eye(w.shape[1])), op_norm(w @ dagger(w) - np.eye(w.shape[0])))
        reps += verify_fusion_equivariance(fm, samples=5, tol=1e-8) + verify_fusion_dimensions(fm)
    ok, text = summarise(reps)
    ok = ok and worst_unitary <= 1e-9
    assert report(5, ok, f"unitarity {worst_unitary:.2e}; {text}", time.perf_counter() - start)


def test_criterion_06_registry():
    start = time.perf_counter()
    reps = [r for n, M in BUDGETS for r in verify_registry(FusionMaps(system(n, M)), tol=1e-9)]
    ok, text = summarise(reps)
    kinds = len({r.name for r in reps})
    assert report(6, ok, f"{kinds} identities, {text}", time.perf_counter() - start)


def test_criterion_07_toeplitz():
    start = time.perf_counter()
    reps = []
    for n, M in BUDGETS:
        fm = FusionMaps(system(n, M))
        reps += verify_toeplitz_relations(system(n, M), tol=1e-9, fm=fm)
        reps += verify_commutator_decay(fm, tol=1e-9)
    ok, text = summarise(reps)
    n1 = {r.name for r in reps if r.params.get("n") == 1 and r.name.startswith("fundamental")}
    ok = ok and len(n1) >= 3
    assert report(7, ok, f"{text}; n=1 sphere relations {sorted(n1)}", time.perf_counter() - start)


def test_criterion_08_kk_certificates():
    start = time.perf_counter()
    reps = certify_all(KKContext.for_ranges(1, 5, 5)) + certify_all(KKContext.for_ranges(2, 3, 3))
    elapsed = time.perf_counter() - start
    ok, text = summarise(reps)
    ok = ok and elapsed < 300
    assert report(8, ok, text, elapsed)


def test_criterion_09_k_theory():
    expected = {1: (AbelianGroup(1), AbelianGroup(1)), 2: (AbelianGroup(0), AbelianGroup(0))}
    for n in range(3, 11):
        expected[n] = (AbelianGroup(0, (n - 1,)), AbelianGroup(0))
    start = time.perf_counter()
    got = {n: gysin_k_theory(n) for n in range(1, 11)}
    per_call = (time.perf_counter() - start) / 10
    ok = got == expected and per_call < 1e-3
    detail = ", ".join(f"n={n}: ({k0}, {k1})" for n, (k0, k1) in got.items() if n <= 4) + ", ..."
    assert report(9, ok, f"{detail} {per_call * 1e6:.0f} us per call", per_call)


def test_criterion_10_cli_verify_all(capsys):
    start = time.perf_counter()
    code = cli_main(["verify", "--n", "2", "--max-degree", "4", "--all", "--json"])
    out = capsys.readouterr().out
    elapsed = time.perf_counter() - start
    data = json.loads(out)
    counts = data["counts"]
    failing = sorted({r["name"] for r in data["reports"] if r["status"] == "fail"})
    ok = code == 0 and elapsed < 180
    assert report(10, ok, f"exit code {code}, counts {counts}, failing {failing}", elapsed)


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider", *sys.argv[1:]]))
