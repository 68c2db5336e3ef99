"""Acceptance gate.

Each test checks one acceptance criterion at its stated tolerance and prints a
single ``PASS``/``FAIL`` line. Run it on its own with

    python3 -m pytest tests/test_acceptance.py -v -s
    python3 tests/test_acceptance.py

Randomized criteria average over seeds 0..3.
"""

from __future__ import annotations

import functools
import math
import os
import subprocess
import sys
import time

import numpy as np
import pytest
from scipy import integrate

from bnmrf import assembly as A
from bnmrf import experiments as E
from bnmrf import geometry as G
from bnmrf import kernels as K
from bnmrf import reference as R
from bnmrf import solver as S
from bnmrf import specfun as SF
from bnmrf.features import FeatureBasis, SamplerConfig
from bnmrf.geometry import BC

REPEATS = 4

# reference errors that the tolerances below are expressed against
FLOWER_BNM_REF = 2.02e-5
FLOWER_BEM_REF = 1.73e-4
STAR_BEM_REF_K2 = 8.00e-3
SPHERE_BEM_REF_K4 = 2.56e-2


# collected lines are echoed in the terminal summary by conftest.py
RESULTS: list[str] = []


def _report(name: str, ok: bool, detail: str) -> bool:
    line = f"{'PASS' if ok else 'FAIL'} {name}: {detail}"
    RESULTS.append(line)
    print(line)
    return ok


def _within(value, ref, lo, hi):
    return lo * ref <= value <= hi * ref


def _mean(problem, law, scale, M):
    return E.mean_error(problem, law, scale, M, seed=0, repeats=REPEATS)[0]


@functools.lru_cache(maxsize=None)
def _flower():
    return E.laplace_flower()


@functools.lru_cache(maxsize=None)
def _star(k):
    return E.exterior_helmholtz(k)


@functools.lru_cache(maxsize=None)
def _sphere(k):
    return E.scatter_sphere(k, grid=31)


# ---------------------------------------------------------------------------
# quantitative
# ---------------------------------------------------------------------------


def test_laplace_flower():
    p = _flower()
    bnm = _mean(p, "uniform_tanh", 1.0, 60)
    bem = p.solve_bem().rel_l2
    ok = bnm <= 1e-4 and _within(bem, FLOWER_BEM_REF, 0.5, 3.0)
    assert _report("laplace-flower", ok, f"BNM(60) mean {bnm:.3e} (<= 1e-4, ref {FLOWER_BNM_REF:.2e}); "
                   f"BEM {bem:.3e} (in [0.5, 3]x {FLOWER_BEM_REF:.2e})")


def test_initialization_robustness():
    p = _flower()
    tanh = {r: _mean(p, "uniform_tanh", r, 60) for r in (1.0, 2.0, 4.0)}
    cos = {g: _mean(p, "gaussian_cosine", g, 60) for g in (1.0, 2.0, 4.0)}
    errs = list(tanh.values()) + list(cos.values())
    spread = max(cos.values()) / min(cos.values())
    ok = max(errs) <= 2e-4 and spread <= 3.0
    detail = ", ".join([f"tanh R={r:g} {e:.2e}" for r, e in tanh.items()]
                       + [f"cos gamma={g:g} {e:.2e}" for g, e in cos.items()])
    assert _report("initialization-robustness", ok, f"{detail}; max {max(errs):.2e} (<= 2e-4), "
                   f"cosine spread {spread:.2f}x (<= 3x)")


def test_exterior_star():
    bnm = {k: _mean(_star(k), "uniform_tanh", 1.0, 60) for k in (2.0, 4.0, 6.0)}
    bem = {k: _star(k).solve_bem().rel_l2 for k in (2.0, 4.0, 6.0)}
    ok_bnm = bnm[2.0] <= 2.5e-2 and all(bnm[k] <= 3 * bnm[2.0] for k in (4.0, 6.0))
    ok_bem = _within(bem[2.0], STAR_BEM_REF_K2, 0.5, 3.0) and all(bem[k] <= 3 * bem[2.0] for k in (4.0, 6.0))
    detail = (f"BNM k=2,4,6: {bnm[2.0]:.2e}, {bnm[4.0]:.2e}, {bnm[6.0]:.2e} (k=2 <= 2.5e-2, growth <= 3x); "
              f"BEM k=2,4,6: {bem[2.0]:.2e}, {bem[4.0]:.2e}, {bem[6.0]:.2e} "
              f"(k=2 in [0.5, 3]x {STAR_BEM_REF_K2:.2e}, growth <= 3x)")
    assert _report("exterior-star", ok_bnm and ok_bem, detail)


def test_sphere_scattering():
    ks = (4.0, 8.0, 12.0)
    t0 = time.perf_counter()
    p4 = _sphere(4.0)
    bem = {4.0: p4.solve_bem().rel_l2}
    runtime = time.perf_counter() - t0
    for k in ks[1:]:
        bem[k] = _sphere(k).solve_bem().rel_l2
    bnm32 = {k: _mean(_sphere(k), "gaussian_cosine", 2.0, 32) for k in ks}
    bnm64 = {k: _mean(_sphere(k), "gaussian_cosine", 2.0, 64) for k in ks}
    checks = {
        "BEM k=4 band": _within(bem[4.0], SPHERE_BEM_REF_K4, 0.5, 2.0),
        "BNM(32) k=4": bnm32[4.0] <= 8e-2,
        "BEM increasing": bem[4.0] < bem[8.0] < bem[12.0],
        "BNM increasing": bnm32[4.0] < bnm32[8.0] < bnm32[12.0],
        "BNM(64) gain": all(bnm64[k] >= bnm32[k] / 2 for k in ks),
        "runtime": runtime <= 120.0,
    }
    detail = (f"BEM {', '.join(f'{bem[k]:.2e}' for k in ks)}; BNM(32) {', '.join(f'{bnm32[k]:.2e}' for k in ks)}; "
              f"BNM(64) {', '.join(f'{bnm64[k]:.2e}' for k in ks)}; BEM k=4 setup+solve {runtime:.1f} s; "
              f"failed: {[c for c, v in checks.items() if not v] or 'none'}")
    assert _report("sphere-scattering", all(checks.values()), detail)


def test_convergence_slope():
    Ms = (10, 20, 40, 80)
    slopes = {}
    for k in (3.0, 6.0, 9.0):
        p = E.interior_helmholtz(k, n_collocation=60)
        errs = [_mean(p, "gaussian_cosine", 0.5, M) for M in Ms]
        slopes[k] = float(np.polyfit(np.log10(Ms), np.log10(errs), 1)[0])
    ok = all(s <= -0.5 for s in slopes.values())
    assert _report("convergence-slope", ok, ", ".join(f"k={k:g} slope {s:.2f}" for k, s in slopes.items())
                   + " (<= -0.5)")


# ---------------------------------------------------------------------------
# property suites
# ---------------------------------------------------------------------------


def test_special_function_suite():
    x = np.geomspace(0.1, 100.0, 400)
    w = SF.bessel_j(1, x) * SF.bessel_y(0, x) - SF.bessel_j(0, x) * SF.bessel_y(1, x)
    wron = float(np.max(np.abs(w - 2 / (np.pi * x)) / (2 / (np.pi * x))))
    leg = max(max(abs(SF.legendre_p(n, 1.0) - 1.0), abs(SF.legendre_p(n, -1.0) - (-1.0) ** n)) for n in range(51))
    xs = np.linspace(0.5, 50.0, 200)
    rec = 0.0
    for n in range(1, 30):
        jm, j0, jp = (SF.spherical_bessel_j(m, xs) for m in (n - 1, n, n + 1))
        terms = np.max(np.abs([jm, (2 * n + 1) / xs * j0, jp]), axis=0)
        rec = max(rec, float(np.max(np.abs(jp - (2 * n + 1) / xs * j0 + jm) / terms)))
    h = 1e-6
    pts = np.array([0.7, 2.3, 9.1, 31.0])
    fd = 0.0
    for n in range(6):
        for kind, f in (("j", SF.spherical_bessel_j), ("h", SF.spherical_hankel1)):
            d = SF.spherical_deriv(kind, n, pts)
            approx = (f(n, pts + h) - f(n, pts - h)) / (2 * h)
            fd = max(fd, float(np.max(np.abs(d - approx) / np.abs(d))))
    dh0 = (SF.hankel1(0, pts + h) - SF.hankel1(0, pts - h)) / (2 * h)
    fd = max(fd, float(np.max(np.abs(dh0 + SF.hankel1(1, pts)) / np.abs(SF.hankel1(1, pts)))))
    ok = wron <= 1e-10 and leg <= 1e-12 and rec <= 1e-10 and fd <= 1e-5
    assert _report("special-functions", ok, f"Wronskian {wron:.1e}, Legendre ends {leg:.1e}, "
                   f"recurrence {rec:.1e}, derivative FD {fd:.1e}")


def test_kernel_suite():
    rng = np.random.default_rng(11)
    kinds = [K.laplace(2), K.laplace(3), K.helmholtz(2, 3.0), K.helmholtz(3, 3.0), K.helmholtz(2, 8.0),
             K.helmholtz(3, 8.0)]
    sym_ok = True
    worst = 0.0
    h = 1e-3
    for kind in kinds:
        for _ in range(50):
            x, y = rng.uniform(-3, 3, (2, kind.dim))
            sym_ok &= bool(K.fundamental(kind, x, y) == K.fundamental(kind, y, x))
        k2 = kind.k**2 if kind.operator == "helmholtz" else 0.0
        count = 0
        while count < 100:
            x, y = rng.uniform(-1, 1, (2, kind.dim))
            r = np.linalg.norm(x - y)
            if r < 0.3:
                continue
            count += 1
            lap = -2 * kind.dim * K.fundamental(kind, x, y)
            for i in range(kind.dim):
                e = np.zeros(kind.dim)
                e[i] = h
                lap = lap + K.fundamental(kind, x, y + e) + K.fundamental(kind, x, y - e)
            res = -lap / h**2 - k2 * K.fundamental(kind, x, y)
            g0, g1 = K.radial(kind, r, 1)
            worst = max(worst, abs(res) / max(abs(g0), abs(g1) * r) / h**2)
    diffs = [abs(K.fundamental(K.helmholtz(2, 5.0), [0.0, 0.0], [r, 0.0])
                 - K.fundamental(K.laplace(2), [0.0, 0.0], [r, 0.0])) for r in 10.0 ** -np.arange(2, 9)]
    ok = sym_ok and worst <= 500.0 and max(diffs) < 1.0
    assert _report("kernels", ok, f"symmetry exact {sym_ok}; FD residual {worst:.1f} h^2 (<= 500 h^2); "
                   f"Helmholtz minus Laplace max {max(diffs):.3f} for r=1e-2..1e-8")


def _layer_potentials(kind, density, x):
    """SL and DL of a density on the unit circle at x by adaptive quadrature in the angle."""
    theta0 = math.atan2(x[1], x[0])

    def point(t):
        return np.array([math.cos(t), math.sin(t)])

    def sl(t):
        y = point(t)
        return K.fundamental(kind, x, y) * density(y)

    def dl(t):
        y = point(t)
        return K.normal_derivative_y(kind, x, y, y) * density(y)

    # breakpoints graded geometrically toward the nearest boundary point
    dist = abs(np.linalg.norm(x) - 1.0)
    offsets = [dist * 10.0**j for j in range(10) if dist * 10.0**j < np.pi]
    edges = sorted({theta0 - np.pi, theta0, theta0 + np.pi, *(theta0 + s * o for s in (-1, 1) for o in offsets)})

    def quad(f):
        total = 0j
        for a, b in zip(edges, edges[1:]):
            kw = dict(limit=200, epsabs=1e-14, epsrel=1e-12)
            total += integrate.quad(lambda t: complex(f(t)).real, a, b, **kw)[0]
            total += 1j * integrate.quad(lambda t: complex(f(t)).imag, a, b, **kw)[0]
        return total

    return quad(sl), quad(dl)


def test_jump_relations():
    basis = FeatureBasis("cosine", np.array([[1.1, -0.4], [0.3, 0.9], [-0.7, 0.5]]), np.array([0.2, -1.0, 0.6]))
    beta = np.array([0.8, -0.5, 1.2])

    def density(y):
        return float(basis.eval(y[None, :])[0] @ beta)

    ring = np.linspace(0, 2 * np.pi, 721)
    norm = max(abs(density(np.array([math.cos(t), math.sin(t)]))) for t in ring)
    worst_limit = worst_sl = worst_dl = 0.0
    for kind in (K.laplace(2), K.helmholtz(2, 2.0)):
        for theta in (0.3, 2.1, 4.4):
            x0 = np.array([math.cos(theta), math.sin(theta)])
            phi = density(x0)
            lim = {eps: (_layer_potentials(kind, density, (1 - eps) * x0),
                         _layer_potentials(kind, density, (1 + eps) * x0)) for eps in (1e-3, 1e-5)}
            # one-sided limits are stable between the two standoffs
            for side in (0, 1):
                for which in (0, 1):
                    a, b = lim[1e-3][side][which], lim[1e-5][side][which]
                    worst_limit = max(worst_limit, abs(a - b) / max(abs(b), norm))
            (s_in, d_in), (s_out, d_out) = lim[1e-5]
            worst_sl = max(worst_sl, abs(s_in - s_out) / max(abs(s_in), norm))
            # inner limit is PV - phi/2, outer is PV + phi/2
            worst_dl = max(worst_dl, abs((d_out - d_in) - phi) / norm)
    ok = max(worst_limit, worst_sl, worst_dl) <= 1e-2
    assert _report("jump-relations", ok, f"limits at standoff 1e-3 vs 1e-5 {worst_limit:.1e}, "
                   f"single layer continuity {worst_sl:.1e}, double layer jump minus density {worst_dl:.1e} "
                   f"(<= 1e-2 relative to |density|)")


def test_green_identity_reconstruction():
    b = G.unit_square(80).with_tags(lambda i, p: BC.DIRICHLET if i < 40 else BC.NEUMANN)
    ref = R.make_reference("laplace_harmonic")
    trace = A.FunctionTrace(R.laplace_harmonic, R.laplace_harmonic_gradient)
    pts = S.evaluation_grid(b, "interior", 12, standoff=0.1)
    pts = pts[np.linspace(0, len(pts) - 1, 50).astype(int)]
    sol = S.reconstruct_field(b, trace, np.array([1.0]), K.laplace(2), 10, pts, g=ref.value,
                              q=ref.normal_derivative, reference=ref.value)
    err = float(np.max(sol.abs_error))
    assert _report("green-identity", err <= 1e-5 and len(pts) == 50, f"max error {err:.1e} at 50 points (<= 1e-5)")


def test_assembly_consistency():
    b = G.unit_square(40).with_tags(lambda i, p: BC.DIRICHLET if i < 20 else BC.NEUMANN)
    ref = R.make_reference("laplace_harmonic")
    trace = A.FunctionTrace(R.laplace_harmonic, R.laplace_harmonic_gradient)
    system = A.assemble_interior_mixed(b, trace, K.laplace(2), 10, g=ref.value, q=ref.normal_derivative)
    res = float(np.max(np.abs(system.residual(np.array([1.0])))))
    assert _report("assembly-consistency", res <= 1e-6, f"max row residual {res:.1e} (<= 1e-6)")


def test_mie_sound_hard():
    theta = np.linspace(0.0, np.pi, 50)
    h = 1e-5
    worst = 0.0
    for k in (4.0, 8.0, 12.0):
        def total(r):
            return np.exp(1j * k * r * np.cos(theta)) + R.sphere_scattered(k, 1.0, r, theta)
        dphi = (-3 * total(1.0) + 4 * total(1.0 + h) - total(1.0 + 2 * h)) / (2 * h)
        worst = max(worst, float(np.max(np.abs(dphi) / (k * np.abs(total(1.0))))))
    assert _report("mie-sound-hard", worst <= 1e-6, f"max |d phi/dr| / (k |phi|) {worst:.1e} (<= 1e-6)")


def test_solver_suite():
    rng = np.random.default_rng(0)

    def cplx(m, n):
        return rng.normal(size=(m, n)) + 1j * rng.normal(size=(m, n))

    A1, b1 = cplx(60, 40), cplx(60, 1)[:, 0]
    x1 = S.lstsq_min_norm(A1, b1).coefficients
    o1 = np.linalg.pinv(A1) @ b1
    e1 = np.linalg.norm(x1 - o1) / np.linalg.norm(o1)
    r1 = abs(np.linalg.norm(A1 @ x1 - b1) - np.linalg.norm(A1 @ o1 - b1)) / np.linalg.norm(A1 @ o1 - b1)
    A2, b2 = cplx(30, 12) @ cplx(12, 40), cplx(30, 1)[:, 0]
    x2 = S.lstsq_min_norm(A2, b2, rcond=1e-10).coefficients
    o2 = np.linalg.pinv(A2, rcond=1e-10) @ b2
    e2 = np.linalg.norm(x2 - o2) / np.linalg.norm(o2)
    # minimum norm: no component in the null space
    null = np.linalg.svd(A2)[2][12:].conj().T
    n2 = np.linalg.norm(null.conj().T @ x2) / np.linalg.norm(x2)
    worst = max(e1, r1, e2, n2)
    assert _report("solver", worst <= 1e-8, f"full rank {e1:.1e}, residual {r1:.1e}, "
                   f"rank deficient {e2:.1e}, null-space part {n2:.1e} (<= 1e-8)")


def _cli(argv, out, threads):
    env = dict(os.environ)
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        env[var] = str(threads)
    subprocess.run([sys.executable, "-m", "bnmrf", *argv, "--out", str(out)], check=True, env=env,
                   capture_output=True)


def _masked_summary(path):
    lines = path.read_text().splitlines()
    j = lines[0].split(",").index("runtime_ms")
    return [",".join(c for i, c in enumerate(line.split(",")) if i != j) for line in lines]


def test_determinism(tmp_path):
    mesh = tmp_path / "sphere.off"
    G.write_off(G.uv_sphere(1.0, 8, 6), mesh)
    runs = {
        "interior": ["--experiment", "interior-helmholtz", "--method", "both", "--repeats", "2", "--grid", "11"],
        "flower": ["--experiment", "laplace-flower", "--method", "both", "--repeats", "2", "--grid", "11",
                   "--seed", "5"],
        "star": ["--experiment", "exterior-helmholtz", "--method", "both", "--repeats", "2", "--grid", "11"],
        "sphere": ["--experiment", "scatter-sphere", "--mesh", str(mesh), "--method", "both", "--neurons", "8",
                   "--repeats", "2", "--grid", "7"],
        "convergence": ["--experiment", "convergence", "--k", "3", "--sweep-neurons", "10,20", "--repeats", "2",
                        "--grid", "11"],
    }
    mismatched = []
    for name, argv in runs.items():
        outs = []
        for i, threads in enumerate((1, 4, 1)):
            out = tmp_path / f"{name}{i}"
            _cli(argv, out, threads)
            outs.append(out)
        for other in outs[1:]:
            for f in sorted(outs[0].glob("*.csv")):
                if f.name == "timing.csv":
                    continue
                if f.name == "summary.csv":
                    same = _masked_summary(f) == _masked_summary(other / f.name)
                else:
                    same = f.read_bytes() == (other / f.name).read_bytes()
                if not same:
                    mismatched.append(f"{other.name}/{f.name}")
    ok = not mismatched
    assert _report("determinism", ok, f"{len(runs)} configurations x 3 runs at 1 and 4 threads; "
                   f"result files byte-identical, wall-clock columns excluded; mismatches: {mismatched or 'none'}")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
