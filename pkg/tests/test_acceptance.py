"""End-to-end acceptance gate: one test per shipping criterion.

Each test is self-contained, prints the measured margins, and asserts the
criterion at its stated tolerance.  Run with ``pytest -v tests/test_acceptance.py``
to get one pass/fail line per criterion.  The two experiment-scale criteria
(09 and 10) run the actual solvers at benchmark sizes and dominate the
wall-clock (a few minutes on one core).
"""

import math
import time

import numpy as np

from stiefel_cayley import cayley, cli, gradients, linalg, problems, retractions
from stiefel_cayley.cayley import Center, SkewParam
from stiefel_cayley.optimize import (
    BacktrackingConfig,
    StoppingConfig,
    run_gdm_cp,
    run_gdm_retraction,
)


def _random_tangent(rng, u, norm):
    d = retractions.project_tangent(u, rng.standard_normal(u.shape))
    return (norm / d.norm()) * d


def _random_shape(rng, n_max, p_max):
    n = int(rng.integers(2, n_max + 1))
    p = int(rng.integers(1, min(p_max, n - 1) + 1)) if n > 2 else 1
    return n, p


def test_criterion_01_round_trip_exactness():
    rng = np.random.default_rng(101)
    t0 = time.perf_counter()
    worst_fwd = worst_bwd = 0.0
    for i in range(1000):
        n, p = _random_shape(rng, 200, 20)
        center = problems.random_center(rng, n, p, structured=bool(i % 2))
        u = problems.random_stiefel(rng, n, p)
        v = cayley.forward(center, u)
        worst_fwd = max(worst_fwd, float(np.linalg.norm(cayley.inverse(center, v) - u)))
        v2 = problems.random_skew_param(rng, n, p, norm=float(rng.uniform(0.1, 5.0)))
        u2 = cayley.inverse(center, v2)
        worst_bwd = max(worst_bwd, (cayley.forward(center, u2) - v2).norm())
    elapsed = time.perf_counter() - t0
    print(f"inverse∘forward worst {worst_fwd:.3e}, forward∘inverse worst "
          f"{worst_bwd:.3e}, {elapsed:.1f}s")
    assert worst_fwd <= 1e-10
    assert worst_bwd <= 1e-10
    assert elapsed < 30.0


def test_criterion_02_feasibility_of_inverse_outputs():
    rng = np.random.default_rng(102)
    worst = 0.0
    for i in range(500):
        n, p = _random_shape(rng, 80, 12)
        center = problems.random_center(rng, n, p, structured=bool(i % 2))
        # cover the whole admissible norm range, endpoint included
        norm = 1e3 if i % 10 == 0 else float(10.0 ** rng.uniform(-2.0, 3.0))
        v = problems.random_skew_param(rng, n, p, norm=norm)
        worst = max(worst, linalg.feasibility(cayley.inverse(center, v)))
    print(f"worst ||U^T U - I||_F {worst:.3e} over norms up to 1e3")
    assert worst <= 1e-12


def test_criterion_03_gradients_match_finite_differences():
    rng = np.random.default_rng(103)
    n, p = 16, 3
    inst = problems.make_eigen_instance(n, p, seed=103)
    costs = {
        "eigen": problems.eigen_cost(inst),
        "distance": problems.distance_cost(problems.random_stiefel(rng, n, p)),
    }
    h = 1e-6
    for name, f in costs.items():
        worst_param = worst_retr = 0.0
        for state in range(20):
            center = problems.random_center(rng, n, p, structured=bool(state % 2))
            v = problems.random_skew_param(rng, n, p, norm=float(rng.uniform(0.2, 2.0)))
            g = gradients.grad_pullback(center, v, f)
            for _ in range(50):
                e = problems.random_skew_param(rng, n, p, norm=1.0)
                fd = (f.eval(cayley.inverse(center, v + h * e))
                      - f.eval(cayley.inverse(center, v - h * e))) / (2.0 * h)
                worst_param = max(worst_param,
                                  abs(g.inner(e) - fd) / max(1.0, abs(fd)))
            u = problems.random_stiefel(rng, n, p)
            d = _random_tangent(rng, u, norm=float(rng.uniform(0.2, 1.5)))
            gr = retractions.grad_retraction_pullback(u, d, f)
            for _ in range(50):
                e = _random_tangent(rng, u, norm=1.0)
                fd = (f.eval(retractions.retract_cayley(u, d + h * e))
                      - f.eval(retractions.retract_cayley(u, d - h * e))) / (2.0 * h)
                worst_retr = max(worst_retr,
                                 abs(gr.inner(e) - fd) / max(1.0, abs(fd)))
        print(f"{name}: parameter engine worst rel {worst_param:.2e}, "
              f"retraction engine worst rel {worst_retr:.2e}")
        assert worst_param <= 1e-5
        assert worst_retr <= 1e-5


def test_criterion_04_center_construction_guarantee():
    rng = np.random.default_rng(104)
    min_det, max_bnorm = math.inf, 0.0
    for _ in range(1000):
        n, p = _random_shape(rng, 200, 20)
        u = problems.random_stiefel(rng, n, p)
        s = cayley.construct_center(u)
        det = float(np.linalg.det(np.eye(p) + s.left(p).T @ u))
        min_det = min(min_det, det)
        max_bnorm = max(max_bnorm, float(np.linalg.norm(cayley.forward(s, u).b, 2)))
    print(f"min det {min_det:.15f}, max ||B||_2 {max_bnorm:.15f}")
    assert min_det >= 1.0 - 1e-10
    assert max_bnorm <= 1.0 + 1e-10


def test_criterion_05_right_invariant_alignment():
    rng = np.random.default_rng(105)
    worst_spec = 0.0
    worst_drift = 0.0
    for i in range(100):
        n = int(rng.integers(6, 80))
        p = int(rng.integers(2, min(10, n - 1) + 1))
        f = problems.eigen_cost(problems.make_eigen_instance(n, p, seed=i))
        center = problems.random_center(rng, n, p, structured=bool(i % 2))
        u = problems.random_stiefel(rng, n, p)
        aligned = cayley.align_right_invariant(center, u)
        worst_spec = max(worst_spec, cayley.forward(center, aligned).spectral_norm())
        # the alignment must not change a right-invariant cost's value
        worst_drift = max(worst_drift,
                          abs(f.eval(aligned) - f.eval(u)) / max(1.0, abs(f.eval(u))))
    print(f"max ||V*||_2 {worst_spec:.15f}, max cost drift {worst_drift:.2e}")
    assert worst_spec <= 1.0 + 1e-10
    assert worst_drift <= 1e-12


def test_criterion_06_retraction_equivalence_and_inverse():
    rng = np.random.default_rng(106)
    worst_eq = 0.0
    for _ in range(1000):
        n = int(rng.integers(4, 61))
        p = int(rng.integers(1, min(8, n - 1) + 1))
        u = problems.random_stiefel(rng, n, p)
        uperp = retractions.orth_complement(u)
        d = _random_tangent(rng, u, norm=float(rng.uniform(0.1, 3.0)))
        via_transform = cayley.inverse(Center.general(np.hstack([u, uperp]), check=False),
                                       retractions.psi_map(u, uperp, d))
        direct = retractions.retract_cayley(u, d)
        worst_eq = max(worst_eq, float(np.linalg.norm(via_transform - direct)))
    worst_rt = 0.0
    for _ in range(300):
        n = int(rng.integers(4, 61))
        p = int(rng.integers(1, min(8, n - 1) + 1))
        u = problems.random_stiefel(rng, n, p)
        d = _random_tangent(rng, u, norm=float(rng.uniform(0.05, 10.0)))
        back = retractions.inverse_retract_cayley(u, retractions.retract_cayley(u, d))
        worst_rt = max(worst_rt, float(np.linalg.norm(back.mat - d.mat)))
    print(f"transform-vs-retraction worst {worst_eq:.3e}, "
          f"inverse round-trip worst {worst_rt:.3e}")
    assert worst_eq <= 1e-10
    assert worst_rt <= 1e-9


def test_criterion_07_mobility_bound_never_violated():
    rng = np.random.default_rng(107)
    taus = (1e-3, 1.0, 10.0)
    violations = 0
    worst_ratio = 0.0
    for i in range(10_000):
        n, p = _random_shape(rng, 40, 8)
        center = problems.random_center(rng, n, p, structured=bool(i % 2))
        v = problems.random_skew_param(rng, n, p, norm=float(rng.uniform(0.0, 4.0)))
        e = problems.random_skew_param(rng, n, p, norm=1.0)
        tau = taus[i % 3]
        moved = float(np.linalg.norm(cayley.inverse(center, v + tau * e)
                                     - cayley.inverse(center, v)))
        bound = tau * cayley.mobility(v)
        worst_ratio = max(worst_ratio, moved / bound)
        violations += moved > bound
    print(f"violations {violations}/10000, worst observed/bound {worst_ratio:.6f}")
    assert violations == 0


def test_criterion_08_pullback_bound_suite():
    n, p = 40, 5
    inst = problems.make_eigen_instance(n, p, seed=108)
    f = problems.eigen_cost(inst)
    evals = np.linalg.eigvalsh(inst.a)
    lam_max = float(evals[-1])
    grad_norm_max = 2.0 * math.sqrt(float(np.sum(evals[-p:] ** 2)))
    rng = np.random.default_rng(108)
    center = problems.random_center(rng, n, p, structured=True)
    family = problems.stochastic_eigen_family(inst, noise_sigma=1.0, seed=108)
    report = gradients.check_gradient_bounds(
        f,
        center,
        samples=1000,
        mu=2.0 * lam_max,
        lipschitz=2.0 * lam_max,
        grad_norm_max=grad_norm_max,
        family=family,
        variance_draws=10_000,
        seed=108,
    )
    print(f"lipschitz worst {report.lipschitz_worst_ratio:.4f}, "
          f"norm worst {report.norm_worst_ratio:.4f}, "
          f"variance ratio {report.variance_ratio:.4f} "
          f"(limit {report.variance_limit:.4f})")
    assert report.lipschitz_violations == 0
    assert report.norm_violations == 0
    assert report.variance_draws == 10_000
    assert report.variance_ratio <= report.variance_limit
    assert report.passed


def test_criterion_09_desk_scale_eigen_experiment():
    t_start = time.perf_counter()
    n, p, trials = 500, 10, 10
    inst = problems.make_eigen_instance(n, p, seed=7)
    f = problems.eigen_cost(inst)
    optimum = inst.optimum_value
    conv_tol = 1e-6 * abs(optimum)
    starts = [problems.random_stiefel(np.random.default_rng([7, 211, t]), n, p)
              for t in range(trials)]
    stop = StoppingConfig(max_iters=5000)
    algos = ("gdm-cp", "gdm-cayley", "gdm-qr", "gdm-polar")

    def solve(algo, u0, gamma):
        bt = BacktrackingConfig(gamma_initial=gamma)
        if algo == "gdm-cp":
            return run_gdm_cp(f, u0, bt=bt, stop=stop)
        return run_gdm_retraction(f, u0, algo[len("gdm-"):], bt=bt, stop=stop)

    def gap_at(rec, it):
        idx = it if it < len(rec.fvals) else len(rec.fvals) - 1
        return rec.fvals[idx] - optimum

    # pilot on the first trial's start: best gamma = smallest final f-gap
    best_gamma, pilot = {}, {}
    for algo in algos:
        runs = [(solve(algo, starts[0], g), g) for g in (0.1, 0.01, 0.001)]
        rec, g = min(runs, key=lambda rg: rg[0].fvals[-1])
        best_gamma[algo] = g
        pilot[algo] = rec
    print("best gamma per algorithm:", best_gamma)

    records = {
        algo: [pilot[algo]] + [solve(algo, u0, best_gamma[algo]) for u0 in starts[1:]]
        for algo in algos
    }
    elapsed = time.perf_counter() - t_start

    cp_gaps = [rec.fvals[-1] - optimum for rec in records["gdm-cp"]]
    cp_converged = sum(g <= conv_tol for g in cp_gaps)
    cp_feasi = max(rec.feasibilities[-1] for rec in records["gdm-cp"])
    qr_conv = sum(rec.fvals[-1] - optimum <= conv_tol for rec in records["gdm-qr"])
    polar_conv = sum(rec.fvals[-1] - optimum <= conv_tol for rec in records["gdm-polar"])
    gap250_cp = [gap_at(rec, 250) for rec in records["gdm-cp"]]
    gap250_cay = [gap_at(rec, 250) for rec in records["gdm-cayley"]]
    wins = sum(a <= b for a, b in zip(gap250_cp, gap250_cay))

    print(f"cp converged {cp_converged}/10 (tol {conv_tol:.3e}), "
          f"worst final gap {max(cp_gaps):.3e}, worst feasi {cp_feasi:.3e}")
    print(f"qr converged {qr_conv}/10, polar converged {polar_conv}/10")
    print(f"iteration-250 gaps, cp vs cayley per trial: "
          + ", ".join(f"{a:.2e}/{b:.2e}" for a, b in zip(gap250_cp, gap250_cay)))
    print(f"elapsed {elapsed:.0f}s")

    assert cp_converged >= 9
    assert cp_feasi <= 1e-12
    assert qr_conv == trials
    assert polar_conv == trials
    assert elapsed < 600.0
    assert wins >= 7, (
        f"gdm-cp beats gdm-cayley at iteration 250 on only {wins}/10 trials "
        f"(cp gaps {['%.2e' % g for g in gap250_cp]}, "
        f"cayley gaps {['%.2e' % g for g in gap250_cay]})"
    )


def test_criterion_10_singular_point_experiment():
    n, p, trials = 200, 10, 10
    _, target = problems.rotation_center(math.pi, n, p)
    f = problems.distance_cost(target)
    _, canonical_start = problems.rotation_center(math.pi / 4.0, n, p)
    stop = StoppingConfig(max_iters=1500)
    ok = 0
    rows = []
    for t in range(trials):
        if t == 0:
            u0 = canonical_start
        else:
            u0 = problems.random_stiefel(np.random.default_rng([7, 211, t]), n, p)
        gaps = {}
        for theta in (math.pi, math.pi / 1000.0):
            center, _ = problems.rotation_center(theta, n, p)
            rec = run_gdm_cp(f, u0, center=center, stop=stop)
            gaps[theta] = rec.fvals[-1]  # distance cost has optimum 0
        good = gaps[math.pi] <= 1e-10 and gaps[math.pi / 1000.0] >= 10.0 * gaps[math.pi]
        ok += good
        rows.append(f"trial {t}: pi {gaps[math.pi]:.2e}, "
                    f"pi/1000 {gaps[math.pi / 1000.0]:.2e}, ok={good}")
    print("\n".join(rows))
    assert ok >= 8


def test_criterion_11_cmd_eigen_determinism(tmp_path):
    args = ["eigen", "--n", "16", "--p", "3", "--trials", "2", "--seed", "5",
            "--gamma", "0.1", "--algo", "gdm-cp", "--algo", "gdm-cayley",
            "--max-iters", "150"]
    snapshots = []
    for name in ("first.csv", "second.csv"):
        out = tmp_path / name
        assert cli.main(args + ["--out", str(out)]) == 0
        runs = []
        for suffix in ("", "_history"):
            path = out.with_name(out.stem + suffix + ".csv")
            lines = path.read_text().splitlines()
            header = next(l for l in lines if not l.startswith("#")).split(",")
            drop = {i for i, h in enumerate(header) if h in ("time_s", "cum_time_s")}
            kept = [[c for i, c in enumerate(l.split(","))
                     if i not in drop] if not l.startswith("#") else l
                    for l in lines]
            runs.append(kept)
        snapshots.append(runs)
    assert snapshots[0] == snapshots[1]
