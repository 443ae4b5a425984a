"""Acceptance suite: one PASS/FAIL line per criterion, printed to the terminal.

Every test gathers named checks, prints a single summary line with the elapsed
time against its runtime budget and then asserts all checks.  Tolerances are
the published acceptance tolerances; nothing here is tuned to make a check pass.
"""
import math
import time

import numpy as np
import pytest
from cases import cos, generic_linear_run, reversibility_error

from vortexsheet.errors import InadmissibleData, StabilityLost
from vortexsheet.evolution import (
    LinearProblem,
    SolverConfig,
    energy_identity_residual,
    higher_energy_identity_residual,
    solve_linear,
    solve_nonlinear,
)
from vortexsheet.experiments import (
    ExperimentConfig,
    run_continuous_dependence,
    run_equivalence_check,
    run_illposed_probe,
    run_resolution_study,
    run_triangulation,
    solve_family,
)
from vortexsheet.inequalities import (
    ratio_comm_bessel,
    ratio_comm_l2,
    ratio_comm_p,
    ratio_hilbert,
    ratio_interpolation,
    ratio_poincare,
    ratio_Q,
    ratio_Q_diff,
    ratio_Q_diff_s,
    run_campaign,
)
from vortexsheet.operators import commutator_bessel, commutator_bessel_difference, quadratic_Q
from vortexsheet.spectral import TrigPoly, nodal, random_trig, sobolev_norm

K_LEVELS = (16, 32, 64)
SAMPLES = 1000

# Largest observed ratio per parameter point (max over K in K_LEVELS) for
# run_campaign(name, 1000, K_LEVELS, seed=0).  Regression goldens, not bounds.
GOLDEN = {
    "comm_l2": {"tau=1.0": 0.581542},
    "comm_p": {"p=0,tau=0.0": 0.942179, "p=1,tau=0.0": 0.555125,
               "p=2,tau=0.0": 0.466311, "p=3,tau=0.0": 0.403659},
    "comm_bessel": {"sigma=1.0,tau=2.0,variant=i": 0.633645,
                    "sigma=0.75,tau=1.25,variant=ii": 0.419459,
                    "tau=1.5,variant=iii": 0.451191},
    "Q": {"s=3.0": 0.869965, "s=3.5": 1.032943},
    "Q_diff": {"-": 0.681701},
    "Q_diff_s": {"s=3.0": 0.449278, "s=3.5": 0.343994},
}


class Criterion:
    """Collects checks for one criterion and reports them as a single line."""

    def __init__(self, capsys, number, title, budget):
        self.capsys, self.number, self.title, self.budget = capsys, number, title, budget
        self.checks: dict[str, bool] = {}
        self.notes: list[str] = []
        self.start = time.perf_counter()

    def check(self, name, ok, note=None):
        self.checks[name] = bool(ok)
        if note is not None:
            self.notes.append(f"{name}: {note}")

    def finish(self):
        elapsed = time.perf_counter() - self.start
        self.check("runtime", elapsed < self.budget)
        failed = [name for name, ok in self.checks.items() if not ok]
        status = "FAIL" if failed else "PASS"
        line = f"CRITERION {self.number:>2}: {status} {self.title} [{elapsed:.1f}s / {self.budget:.0f}s]"
        if failed:
            line += " failed=" + ",".join(failed)
        if self.notes:
            line += " | " + "; ".join(self.notes)
        with self.capsys.disabled():
            print("\n" + line)
        assert not failed, line


@pytest.fixture
def criterion(capsys):
    return lambda number, title, budget: Criterion(capsys, number, title, budget)


def level_max(rep):
    return {key: max(lv[K]["max"] for K in lv) for key, lv in rep.by_params.items()}


def test_criterion_01_form_equivalence(criterion):
    c = criterion(1, "form equivalence", 5)
    rows = run_equivalence_check(count=50, K=32, seed=0)
    worst = max(max(r["dev_AB"], r["dev_AC"]) for r in rows)
    c.check("samples", len(rows) == 50)
    c.check("max_rel_dev", worst <= 1e-10, f"{worst:.2e}")
    c.finish()


def test_criterion_02_Q_closed_form(criterion):
    c = criterion(2, "Q closed form", 1)
    worst = 0.0
    for a in (0.1, 1.0, 3.0):
        Q = quadratic_Q(cos(a=a, K=1))
        worst = max(worst, float(np.max(np.abs(nodal(Q, 64) - a * a))))
    c.check("sup_error", worst <= 1e-12, f"{worst:.2e}")
    c.finish()


def test_criterion_03_hard_bounds(criterion):
    c = criterion(3, "Hilbert/Poincare/interpolation hard bounds", 10)
    for name in ("hilbert", "poincare", "interpolation"):
        rep = run_campaign(name, SAMPLES, K_LEVELS, seed=0)
        c.check(f"{name}_max", rep.max_ratio <= 1 + 1e-12, f"{rep.max_ratio:.15f}")
    rep = run_campaign("hilbert", SAMPLES, K_LEVELS, seed=1)
    dev = max(abs(s.ratio - 1.0) for s in rep.samples)
    c.check("hilbert_isometry", dev <= 1e-12, f"{dev:.1e}")
    rng = np.random.default_rng(0)
    dev = 0.0
    for _ in range(SAMPLES):
        a, b = rng.normal(size=2)
        f = TrigPoly.from_modes(1, cos={1: a}, sin={1: b})
        s = float(rng.uniform(1.0, 4.0))
        dev = max(dev, abs(ratio_poincare(f, s).ratio - 1.0))
    c.check("poincare_single_mode", dev <= 1e-12, f"{dev:.1e}")
    c.finish()


def _soft_campaigns(c, names):
    for name in names:
        rep = run_campaign(name, SAMPLES, K_LEVELS, seed=0)
        observed = level_max(rep)
        c.check(f"{name}_bounded", rep.verdict == "bounded" and rep.growth < 0.5,
                f"growth {rep.growth:.3f}")
        regress = observed.keys() == GOLDEN[name].keys() and all(
            abs(observed[k] - v) <= 1e-6 for k, v in GOLDEN[name].items())
        c.check(f"{name}_regression", regress)


def test_criterion_04_commutator_campaigns(criterion):
    c = criterion(4, "commutator campaigns", 60)
    _soft_campaigns(c, ("comm_l2", "comm_p", "comm_bessel"))
    worst = 0.0
    for K in K_LEVELS:
        for seed in range(SAMPLES // len(K_LEVELS)):
            v, f = random_trig(2 * seed, K, 2.0), random_trig(2 * seed + 1, K, 2.0)
            tau = 0.5 + 2.5 * ((seed * 0.618033988749895) % 1.0)
            a = commutator_bessel(tau, v, f).coeffs
            b = commutator_bessel_difference(tau, v, f).coeffs
            worst = max(worst, float(np.max(np.abs(a - b)) / np.max(np.abs(b))))
    c.check("convolution_vs_difference", worst <= 1e-12, f"{worst:.1e}")
    c.finish()


def test_criterion_05_Q_estimates(criterion):
    c = criterion(5, "Q estimates", 30)
    _soft_campaigns(c, ("Q", "Q_diff", "Q_diff_s"))
    c.finish()


def test_criterion_06_linear_exactness(criterion):
    c = criterion(6, "linear solver exactness", 10)
    T = 2.0
    for mu in (1.0, 4.0):
        final = {}
        bound_ok = True
        for dt in (0.1, 0.05, 0.025):
            cfg = SolverConfig(mu=mu, K=4, T=T, dt=dt)
            traj = solve_linear(cfg, LinearProblem(TrigPoly.zeros(4), cos(K=4), TrigPoly.zeros(4)))
            for st in traj.states[1:]:
                err = sobolev_norm(st.varphi - cos(a=math.cos(math.sqrt(mu) * st.t), K=4))
                bound_ok &= err <= 10 * dt ** 4 * st.t
            final[dt] = err
        ratios = [final[0.1] / final[0.05], final[0.05] / final[0.025]]
        c.check(f"bound_mu{mu:g}", bound_ok)
        c.check(f"halving_mu{mu:g}", all(abs(r - 16) <= 0.3 * 16 for r in ratios),
                "/".join(f"{r:.1f}" for r in ratios))
    c.finish()


def test_criterion_07_energy_identities(criterion):
    c = criterion(7, "energy identities", 30)
    runs = [generic_linear_run(dt) for dt in (0.04, 0.02, 0.01)]
    identities = {
        "L2": energy_identity_residual,
        "r2": lambda tr: higher_energy_identity_residual(tr, 2.0),
        "r3": lambda tr: higher_energy_identity_residual(tr, 3.0),
    }
    for name, identity in identities.items():
        res = [float(np.max(identity(tr).residual)) for tr in runs]
        ratios = [res[0] / res[1], res[1] / res[2]]
        c.check(f"order_{name}", all(abs(r - 4) <= 0.2 * 4 for r in ratios),
                "/".join(f"{r:.2f}" for r in ratios))
    cfg = SolverConfig(K=8, T=1.0, dt=1e-3)
    traj = solve_linear(cfg, LinearProblem(TrigPoly.zeros(8), random_trig(1, 8, 2.0), random_trig(2, 8, 2.0)))
    for name, identity in identities.items():
        res = float(np.max(identity(traj).residual))
        c.check(f"constant_{name}", res <= 1e-8, f"{res:.1e}")
    c.finish()


def test_criterion_08_nonlinear_solver(criterion):
    c = criterion(8, "nonlinear solver", 120)
    cfg = SolverConfig(K=32, T=1.0)
    traj = solve_nonlinear(cfg, random_trig(2, 32, 3.0, 0.05), random_trig(3, 32, 3.0, 0.05))
    drift = float(np.max(np.abs(traj.column("mean_phi"))))
    c.check("mean", drift <= 1e-12, f"{drift:.1e}")

    data = random_trig(1, 16, 3.0, 0.05), TrigPoly.zeros(16)
    errs = [reversibility_error(SolverConfig(K=16, T=0.5, dt=dt), *data) for dt in (0.04, 0.02, 0.01)]
    ratios = [errs[0] / errs[1], errs[1] / errs[2]]
    c.check("reversibility", all(abs(r - 16) <= 0.3 * 16 for r in ratios),
            "contraction " + "/".join(f"{r:.1f}" for r in ratios))

    study = ExperimentConfig(base=SolverConfig(K=64, T=1.0), data_family="exp", amplitude=0.1,
                             data_modes=128, data_decay=1.0)
    rows = run_resolution_study(study, [8, 16, 32, 64])
    drops = [a["distance"] / b["distance"] for a, b in zip(rows, rows[1:])]
    c.check("resolution", all(d >= 10 for d in drops), "drops " + "/".join(f"{d:.0f}" for d in drops))

    d0, d1 = random_trig(5, 32, 3.0, 0.05), random_trig(6, 32, 3.0, 0.05)
    finals = [solve_nonlinear(SolverConfig(K=32, T=1.0, dt=0.01, form=f), d0, d1).final.varphi for f in "ABC"]
    dev = max(sobolev_norm(f - finals[0], 3) for f in finals[1:])
    c.check("forms", dev <= 1e-8, f"{dev:.1e}")
    c.finish()


def test_criterion_09_continuous_dependence(criterion):
    c = criterion(9, "continuous dependence", 120)
    cfg = ExperimentConfig()
    records = run_continuous_dependence(cfg)
    D = [r.strong_distance for r in records]
    L = np.array([r.strong_distance / r.data_distance for r in records])
    median = float(np.median(L))
    c.check("n_list", [r.n for r in records] == [2, 4, 8, 16])
    c.check("strictly_decreasing", all(a > b for a, b in zip(D, D[1:])),
            "D " + "/".join(f"{d:.3g}" for d in D))
    c.check("lipschitz_band", bool(np.all((L <= 2 * median) & (L >= median / 2))),
            "D/d " + "/".join(f"{x:.3f}" for x in L))
    c.check("weak_le_strong", all(r.weak_le_strong for r in records))
    c.finish()


def test_criterion_10_triangulation(criterion):
    c = criterion(10, "triangulation pipeline", 120)
    cfg = ExperimentConfig(base=SolverConfig(K=32, T=0.5, C1=4.0), amplitude=0.2, data_modes=32,
                           data_decay=5.0, velocity_family="travelling", amp_scale=0.0, n_list=(1,))
    family = solve_family(cfg)
    reports = [run_triangulation(cfg, 1, eps, family) for eps in (1e-1, 1e-2, 1e-3)]
    C = np.array([r.total_over_eps for r in reports])
    variation = float(C.max() / C.min() - 1.0)
    c.check("total_le_C_eps", variation < 0.5, "C " + "/".join(f"{x:.3f}" for x in C))
    leg1 = np.array([r.leg1_over_eps for r in reports])
    c.check("leg1_bounded", bool(np.all(np.isfinite(leg1)) and leg1.max() / leg1.min() < 1.5),
            "leg1/eps " + "/".join(f"{x:.3f}" for x in leg1))
    c.check("triangle", all(r.triangle_ok for r in reports))
    c.finish()


def test_criterion_11_illposed_probe(criterion):
    c = criterion(11, "ill-posedness probe", 30)
    rates = dict(run_illposed_probe(1.0, 1.0, [8, 16, 32]))
    ratios = [rates[16] / rates[8], rates[32] / rates[16]]
    c.check("rate_doubling", all(abs(r - 2) <= 0.2 * 2 for r in ratios),
            "ratios " + "/".join(f"{r:.2f}" for r in ratios))
    control = max(abs(lam) for _, lam in run_illposed_probe(1.0, 0.25, [8, 16, 32]))
    c.check("hyperbolic_control", control <= 0.05, f"max |rate| {control:.3f}")
    c.finish()


def test_criterion_12_guardrails(criterion):
    c = criterion(12, "guardrails", 10)
    outcomes = []
    for _ in range(2):
        with pytest.raises(InadmissibleData) as info:
            solve_nonlinear(SolverConfig(K=16), cos(a=0.6, K=16), TrigPoly.zeros(16))
        outcomes.append(str(info.value))
    c.check("inadmissible", outcomes[0] == outcomes[1])
    hits = []
    cfg = SolverConfig(mu=1.0, delta=0.1, K=16, T=2.0)
    for _ in range(2):
        with pytest.raises(StabilityLost) as info:
            solve_nonlinear(cfg, cos(a=0.4, K=16), cos(a=1.0, K=16))
        hits.append((info.value.t, info.value.margin, info.value.trajectory.csv_text()))
    c.check("stability_lost", hits[0] == hits[1])

    zero, one = TrigPoly.zeros(8), TrigPoly.constant(2.0, 8)
    f = random_trig(4, 8, 2.0)
    degenerate = [
        ratio_hilbert(zero), ratio_poincare(zero), ratio_interpolation(zero),
        ratio_comm_l2(1.0, zero, f), ratio_comm_l2(1.0, f, zero),
        ratio_comm_p(0.0, 2, one, f), ratio_comm_p(0.5, 1, f, zero),
        ratio_comm_bessel("i", 2.0, 1.0, zero, f), ratio_comm_bessel("ii", 1.25, 0.75, f, zero),
        ratio_comm_bessel("iii", 1.5, None, zero, f),
        ratio_Q(3.0, zero), ratio_Q_diff(f, f), ratio_Q_diff_s(3.5, f, f),
    ]
    worst = max(s.lhs for s in degenerate)
    c.check("degenerate_lhs", worst <= 1e-14 and all(s.rhs_factor == 0 for s in degenerate),
            f"max lhs {worst:.1e}")
    c.finish()
