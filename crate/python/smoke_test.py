#!/usr/bin/env python3
"""Smoke test for the sparsity_subdiff_py extension module.

Builds the cdylib with cargo, stages it under a temporary directory with the
importable module name, and exercises the main surface end to end. Exits
nonzero on the first failed check.
"""

import math
import shutil
import subprocess
import sys
import tempfile
from pathlib import Path

REPO_ROOT = Path(__file__).resolve().parent.parent


def build_extension() -> Path:
    subprocess.run(
        ["cargo", "build", "-p", "sparsity-subdiff-py"],
        cwd=REPO_ROOT,
        check=True,
    )
    lib = REPO_ROOT / "target" / "debug" / "libsparsity_subdiff_py.so"
    if not lib.exists():  # macOS fallback
        lib = REPO_ROOT / "target" / "debug" / "libsparsity_subdiff_py.dylib"
    if not lib.exists():
        sys.exit("could not find the built extension library")
    staging = Path(tempfile.mkdtemp(prefix="sparsity-subdiff-py-"))
    shutil.copy(lib, staging / "sparsity_subdiff_py.so")
    return staging


def approx(a: float, b: float, tol: float = 1e-10) -> bool:
    return abs(a - b) <= tol * max(1.0, abs(b))


def main() -> None:
    sys.path.insert(0, str(build_extension()))
    import sparsity_subdiff_py as m

    # Grid functions and penalty evaluation.
    u = m.GridFunction([0.25] * 4, [4.0, 4.0, 4.0, 4.0])
    assert len(u) == 4
    assert approx(u.total_measure, 1.0)
    assert approx(m.evaluate(u, 2.0, 0.5), 2.0)
    assert approx(m.evaluate(u, 2.0, 0.0), 1.0)
    sparse = m.GridFunction([0.25] * 4, [3.0, 0.0, -2.0, 0.0])
    assert approx(sparse.support_measure(), 0.5)
    assert approx(m.evaluate(sparse, 2.0, 0.0), 0.5)
    back = m.GridFunction.from_json(sparse.to_json())
    assert back.values == sparse.values
    print("ok: grid functions and penalty evaluation")

    # Pointwise integrand and scalar prox maps.
    assert m.pointwise_integrand(-3.0, 0.0) == 1.0
    assert m.pointwise_integrand(4.0, 0.5) == 2.0
    assert m.prox_scalar(1.5, 0.5, 0.0) == 1.5
    assert m.prox_scalar(0.9, 0.5, 0.0) == 0.0
    v = m.prox_scalar(4.0, 1.0, 0.5)
    assert abs(v - 4.0 + 0.5 * v ** -0.5) < 1e-12
    print("ok: scalar prox maps")

    # Subdifferential descriptors and membership.
    d = m.descriptor(u, 2.0, 0.5, "frechet")
    assert d.shape == "pointwise_fixed" and d.regular
    eta = m.GridFunction([0.25] * 4, [0.25] * 4)
    assert d.contains(eta)
    wrong = m.GridFunction([0.25] * 4, [0.3] * 4)
    assert not d.contains(wrong)
    sing = m.descriptor(sparse, 2.0, 0.0, "singular")
    assert sing.shape == "support_constrained"
    print("ok: descriptors and membership")

    # Falsification: the exact dual value survives, a support violation dies.
    report = m.falsify_membership(u, eta, 2.0, 0.5)
    assert not report["falsified"], report
    bad_u = m.GridFunction([0.25] * 4, [1.0, 1.0, 0.0, 0.0])
    bad_eta = m.GridFunction([0.25] * 4, [1.0, 1.0, 0.0, 0.0])
    report = m.falsify_membership(bad_u, bad_eta, 2.0, 0.0)
    assert report["falsified"], report
    print("ok: falsification verdicts")

    # Slow-decay classification.
    shallow = m.sd_check_profile("power", 2.0, alpha=0.25)
    steep = m.sd_check_profile("power", 2.0, alpha=0.75)
    dyadic = m.sd_check_profile("dyadic", 2.0)
    assert shallow["is_sd"] and shallow["hoelder_converged"]
    assert not steep["is_sd"]
    assert dyadic["is_sd"] and not dyadic["hoelder_converged"]
    grid_verdict = m.sd_check_grid(sparse)
    assert grid_verdict["is_sd"] and grid_verdict["support_bound"] == 2.0
    print("ok: slow-decay classification")

    # Non-Lipschitz probe grows without bound.
    ones = m.GridFunction([1.0 / 16] * 16, [1.0] * 16)
    stages = m.lipschitz_probe(ones, 2.0, 0.0, stages=12)
    ratios = [r for (_, r) in stages]
    assert all(b >= a for a, b in zip(ratios, ratios[1:]))
    assert ratios[-1] > 1e3
    print("ok: non-Lipschitz probe")

    # Proximal solver on the worked identity fixture.
    sol = m.solve_identity([0.25] * 4, [3.0, 0.5, -2.0, 0.1], 1.0, 0.0,
                           max_iter=3000, tol=1e-15)
    assert approx(sol["objective"], 0.5325, 1e-12)
    assert max(abs(a - b) for a, b in zip(sol["values"], [3.0, 0.0, -2.0, 0.0])) < 1e-12
    assert sol["converged"]

    # A small Poisson control problem runs end to end.
    n = 32
    b = [0.05 * math.sin(math.pi * (i + 1) / (n + 1)) for i in range(n)]
    psol = m.solve_poisson1d(n, b, 1e-5, 0.5, max_iter=20000)
    assert psol["iterations"] > 0 and psol["objective"] >= 0.0
    print("ok: proximal solver")

    # Monotone crossing against a Python callable.
    gc = m.ivt_gamma(lambda g: g * g, 2.0, 16.0)
    assert approx(gc, 2.0, 1e-9)
    print("ok: monotone crossing")

    print("smoke test passed")


if __name__ == "__main__":
    main()
