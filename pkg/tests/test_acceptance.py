"""The eleven acceptance criteria at their stated tolerances and time budgets.

Each test prints one ``criterion k: PASS|FAIL ...`` line (also repeated in
the terminal summary).  Criterion 9 fails for families B and D.  Their
pinning targets lie on a reflecting wall, and at ``t_star - eps`` the exact
process is still a reflected Brownian bridge of variance about ``eps`` there,
so its mean sits ``sqrt(2 eps / pi)`` (about 0.025 at ``eps = 1e-3``) inside
the wall.  With 1e4 paths the standard error is near 1e-3, so no step size
can bring the mean within 5 SE.  That test is an expected failure and keeps
its real verdict line.
"""

import math
import time

import pytest

from conftest import ACCEPTANCE_LINES
from elliptic_dyson import harness
from elliptic_dyson.harness import RunConfig

pytestmark = pytest.mark.slow


def _judge(number, title, records, elapsed, budget):
    bad = [r for r in records if not r.passed]
    in_time = elapsed < budget
    ok = bool(records) and not bad and in_time
    detail = f"{len(records) - len(bad)}/{len(records)} checks, {elapsed:.1f}s of {budget:.0f}s"
    if bad:
        detail += "; failing: " + ", ".join(f"{r.name} (measured {r.measured:.4g})" for r in bad)
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'} {title} [{detail}]"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok, line


def _run(number, title, checks, budget, **overrides):
    cfg = RunConfig(**overrides)
    start = time.perf_counter()
    records = [rec for check in checks for rec in check(cfg)]
    elapsed = time.perf_counter() - start
    return records, elapsed


def _criterion(number, title, checks, budget, **overrides):
    records, elapsed = _run(number, title, checks, budget, **overrides)
    ok, line = _judge(number, title, records, elapsed, budget)
    assert ok, line


def test_criterion_01_factorization():
    _criterion(1, "determinant factorization, 7 families x N=2..4, rel err < 1e-9", [harness.check_factorization], 10)


def test_criterion_02_theta_identities():
    _criterion(2, "theta identities, heat FD < 1e-5, asymptotics < 1e-6", [harness.check_theta], 5)


def test_criterion_03_interpolation():
    _criterion(3, "interpolation functions, delta / matrix / determinant ratio", [harness.check_interpolation], 5)


def test_criterion_04_martingale():
    _criterion(4, "|E[D] - 1| < 4 SE with 1e5 paths", [harness.check_martingale], 120)


def test_criterion_05_kolmogorov():
    _criterion(5, "backward Kolmogorov residual < 1e-3", [harness.check_kolmogorov], 60)


def test_criterion_06_integral_identity():
    _criterion(6, "type-D integral identity, N=2 < 1e-6, N=3 < 1e-4", [harness.check_integral], 180)


def test_criterion_07_kernel_vs_mc():
    _criterion(7, "kernel density vs SDE histogram, >= 18/20 bins within 4 SE", [harness.check_kernel_vs_mc], 300)


def test_criterion_08_equilibrium_relaxation():
    _criterion(8, "equilibrium mass = N to 1e-10, monotone relaxation", [harness.check_relaxation], 120)


@pytest.fixture(scope="module")
def pinning():
    return _run(9, "pinning", [harness.check_pinning], 180)


@pytest.mark.xfail(strict=True, reason="finite-eps offset sqrt(2 eps/pi) of wall-pinned B and D coordinates exceeds 5 SE")
def test_criterion_09_pinning(pinning):
    records, elapsed = pinning
    ok, line = _judge(9, "pinning means within 5 SE of the targets at eps = 1e-3 t*", records, elapsed, 180)
    assert ok, line


def test_criterion_09_pinning_type_c_passes(pinning):
    records, _ = pinning
    c = [r for r in records if r.name.startswith("pinning/C/")]
    assert c and all(r.passed for r in c)


def test_criterion_09_wall_bias_explains_failures(pinning):
    # the failing coordinates miss by the mean of a reflected bridge, |N(0, eps)|
    records, _ = pinning
    eps = 1e-3
    for r in records:
        if not r.passed:
            assert abs(r.measured - r.expected) == pytest.approx(math.sqrt(2 * eps / math.pi), rel=0.3)


def test_criterion_10_fredholm():
    _criterion(10, "Fredholm gauge invariance to 1e-8, gap in [-1e-6, 1 + 1e-6]", [harness.check_fredholm], 60)


def test_criterion_11_determinism(monkeypatch):
    monkeypatch.setenv("ELLIPTIC_DYSON_THREADS", "8")
    small = dict(suite="all", n_paths=2000, pinning_paths=500)
    start = time.perf_counter()
    outputs = []
    for workers in (1, 1, 8):
        rep = harness.run_suite(RunConfig(workers=workers, **small))
        outputs.append((rep.to_json().encode(), rep.to_csv().encode()))
    elapsed = time.perf_counter() - start
    same = outputs[0] == outputs[1] == outputs[2]
    line = (
        f"criterion 11: {'PASS' if same else 'FAIL'} suite=all byte-identical across two runs and 1 vs 8 threads "
        f"[json and csv, {small['n_paths']} paths, {elapsed:.1f}s]"
    )
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert same, line
