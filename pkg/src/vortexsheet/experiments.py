"""Experiment drivers: continuous dependence, triangulation through a
regularized linear problem, the ill-posedness probe, resolution studies and
the form-equivalence check.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import CutoffInfeasible, ParameterDomainError
from .evolution import (
    LinearProblem,
    SolverConfig,
    Trajectory,
    TrajectoryBackground,
    solve_linear,
    solve_nonlinear,
    t0_default,
)
from .operators import Form, acceleration, quadratic_Q
from .spectral import (
    TrigPoly,
    bessel,
    bracket_power,
    derivative,
    hilbert,
    multiply,
    nodal,
    random_trig,
    sobolev_norm,
    wavenumbers,
)


@dataclass(frozen=True)
class ExperimentConfig:
    """Parameters of the dependence and triangulation experiments.

    Base data: ``varphi0 = amplitude * sum_k w_k cos(kx)`` over
    ``k = 1..data_modes`` with ``w_k = k^-data_decay`` (family ``power``) or
    ``exp(-data_decay k)`` (family ``exp``), and ``varphi1`` built the same
    way from ``sin(kx)`` with ``velocity_amplitude`` (velocity family
    ``power``), or ``varphi1 = -sqrt(mu) varphi0_x`` (family ``travelling``,
    a right-moving linear wave).  The n-th perturbation
    adds ``(amp_scale / n) * <d/dx>^-smoothing cos(k_n x)`` with
    ``k_n = min(n, mode_cap)``.
    """

    base: SolverConfig = field(default_factory=SolverConfig)
    s: float = 3.0
    R: float = 1.0
    C2: float | None = None
    data_family: str = "power"
    amplitude: float = 0.01
    data_modes: int = 1
    data_decay: float = 4.0
    velocity_amplitude: float = 0.0
    velocity_family: str = "power"
    amp_scale: float = 1.0
    mode_cap: int | None = None
    smoothing: float | None = None
    n_list: tuple = (2, 4, 8, 16)
    epsilon_list: tuple = (1e-1, 1e-2, 1e-3)
    epsilon_prime_list: tuple = (1e-2, 1e-3, 1e-4)
    triangulate_n: int | None = None
    K_list: tuple = (8, 16, 32)
    seed: int = 0
    samples: int = 1000
    K_levels: tuple = (16, 32, 64)
    inequalities: tuple = ()
    equiv_samples: int = 50
    illposed_a: float = 1.0
    illposed_k_list: tuple = (8, 16, 32)
    illposed_T_short: float | None = None
    output_dir: str = "runs"

    def __post_init__(self):
        if self.s < 3:
            raise ParameterDomainError("experiments need s >= 3")
        if list(self.n_list) != sorted(set(self.n_list)) or min(self.n_list, default=1) < 1:
            raise ParameterDomainError("n_list must be strictly increasing positive integers")
        if self.data_family not in ("power", "exp"):
            raise ParameterDomainError(f"unknown data family {self.data_family!r}")
        if self.velocity_family not in ("power", "travelling"):
            raise ParameterDomainError(f"unknown velocity family {self.velocity_family!r}")
        if self.base.s != self.s:
            object.__setattr__(self, "base", self.base.replace(s=self.s))

    def to_dict(self) -> dict:
        return asdict(self)

    # -- data ---------------------------------------------------------------------
    def base_data(self, K: int | None = None):
        K = K or self.base.K
        m = min(self.data_modes, K)
        k = np.arange(1, m + 1, dtype=float)
        w = k ** -self.data_decay if self.data_family == "power" else np.exp(-self.data_decay * k)
        d0 = TrigPoly.from_modes(K, cos=dict(zip(range(1, m + 1), self.amplitude * w)))
        if self.velocity_family == "travelling":
            d1 = -math.sqrt(self.base.mu) * derivative(d0, 1)
        else:
            d1 = TrigPoly.from_modes(K, sin=dict(zip(range(1, m + 1), self.velocity_amplitude * w)))
        return d0, d1

    def perturbation(self, n: int, K: int | None = None):
        K = K or self.base.K
        cap = self.mode_cap or max(1, K // 2)
        k_n = min(n, cap)
        a_n = self.amp_scale / n
        smooth = self.s if self.smoothing is None else self.smoothing
        bump = bessel(TrigPoly.from_modes(K, cos={k_n: 1.0}), -smooth)
        return a_n, k_n, a_n * bump


# -- helpers ---------------------------------------------------------------------------

def strong_pair(u: TrigPoly, u_t: TrigPoly, s: float) -> float:
    """``(|u|_{H^s}^2 + |u_t|_{H^{s-1}}^2)^(1/2)``."""
    return math.hypot(sobolev_norm(u, s), sobolev_norm(u_t, s - 1))


def _max_phi_x(varphi: TrigPoly) -> float:
    return float(np.max(np.abs(nodal(derivative(hilbert(varphi), 1), 4 * (2 * varphi.K + 1)))))


def common_step(cfg: ExperimentConfig, data) -> SolverConfig:
    """Solver config shared by a family of runs.

    All runs use one fixed step so that saved times coincide; the horizon is
    capped at half the smallest default existence time of the data.
    """
    base = cfg.base
    T = base.T
    t0 = min(t0_default(d0, d1, base.C1) for d0, d1 in data)
    T = min(T, 0.5 * t0)
    if base.dt is not None:
        dt = base.dt
    else:
        c2 = base.mu + 2.0 * max(_max_phi_x(d0) for d0, _ in data)
        dt = base.cfl * (2.0 * np.pi / (2 * base.K + 1)) / math.sqrt(1.1 * c2)
    n = max(1, int(math.ceil(T / dt - 1e-9)))
    return base.replace(T=T, dt=T / n, save_stride=1)


@dataclass
class Family:
    """Base run and perturbed runs sharing one time grid."""

    config: SolverConfig
    base_data: tuple
    base: Trajectory
    data: dict
    runs: dict
    info: dict


def solve_family(cfg: ExperimentConfig, n_list=None) -> Family:
    n_list = cfg.n_list if n_list is None else n_list
    K = cfg.base.K
    d0, d1 = cfg.base_data(K)
    data, info = {}, {}
    for n in n_list:
        a_n, k_n, bump = cfg.perturbation(n, K)
        data[n] = (d0 + bump, d1)
        info[n] = (a_n, k_n)
    solver = common_step(cfg, [(d0, d1), *data.values()])
    base = solve_nonlinear(solver, d0, d1)
    runs = {}
    for n, (e0, e1) in data.items():
        if sobolev_norm(e0 - d0) == 0.0 and sobolev_norm(e1 - d1) == 0.0:
            runs[n] = base
        else:
            runs[n] = solve_nonlinear(solver, e0, e1)
    return Family(solver, (d0, d1), base, data, runs, info)


# -- continuous dependence -------------------------------------------------------

@dataclass(frozen=True)
class DependenceRecord:
    n: int
    a_n: float
    k_n: int
    data_distance: float
    strong_distance: float
    weak_distance: float
    data_weak_distance: float
    lipschitz_ratio: float
    max_weak_over_strong: float

    @property
    def weak_le_strong(self) -> bool:
        return self.max_weak_over_strong <= 1.0 + 1e-12


def _distance_series(a: Trajectory, b: Trajectory, s: float):
    strong, weak = [], []
    for x, y in zip(a.states, b.states):
        if abs(x.t - y.t) > 1e-12 * max(1.0, abs(x.t)):
            raise ValueError("trajectories are not on a common time grid")
        du, dv = x.varphi - y.varphi, x.varphi_t - y.varphi_t
        strong.append(strong_pair(du, dv, s))
        weak.append(strong_pair(du, dv, s - 1))
    return np.array(strong), np.array(weak)


def run_continuous_dependence(cfg: ExperimentConfig, family: Family | None = None):
    """One DependenceRecord per n: data distance, sup-in-time strong and weak
    distances between the base run and the n-th perturbed run."""
    family = family or solve_family(cfg)
    s = cfg.s
    d0, d1 = family.base_data
    records = []
    for n, traj in family.runs.items():
        e0, e1 = family.data[n]
        a_n, k_n = family.info[n]
        strong, weak = _distance_series(family.base, traj, s)
        if not (np.all(np.isfinite(strong)) and np.all(np.isfinite(weak))):
            raise FloatingPointError(f"non-finite distance for n={n}")
        d_n = strong_pair(d0 - e0, d1 - e1, s)
        D_n = float(strong.max())
        with np.errstate(invalid="ignore", divide="ignore"):
            q = np.where(strong > 0, weak / np.where(strong > 0, strong, 1.0), 0.0)
        records.append(DependenceRecord(
            n=n, a_n=a_n, k_n=k_n, data_distance=d_n, strong_distance=D_n,
            weak_distance=float(weak.max()), data_weak_distance=strong_pair(d0 - e0, d1 - e1, s - 1),
            lipschitz_ratio=D_n / d_n if d_n > 0 else (0.0 if D_n == 0 else math.inf),
            max_weak_over_strong=float(q.max()),
        ))
    return records


# -- triangulation ---------------------------------------------------------------------

def source_F(varphi: TrigPoly, K: int | None = None) -> TrigPoly:
    """``-Q[varphi]_x - 2 phi_xx varphi_xx``, projected to degree K."""
    K = K or varphi.K
    phi_xx = derivative(hilbert(varphi), 2)
    F = -derivative(quadratic_Q(varphi), 1) - 2.0 * multiply(phi_xx, derivative(varphi, 2))
    return F.resize(K)


def cutoff_weights(K: int, kappa: float) -> np.ndarray:
    """Filter weights on modes -K..K: 1 up to floor(kappa), a fractional
    weight on the next mode, 0 beyond."""
    k = np.abs(wavenumbers(K))
    return np.clip(kappa - k + 1.0, 0.0, 1.0) * (k > 0)


def apply_cutoff(f: TrigPoly, kappa: float) -> TrigPoly:
    return TrigPoly._trusted(cutoff_weights(f.K, kappa) * f.coeffs)


def _trapezoid(y, x):
    """Trapezoid rule along the first axis."""
    y, x = np.asarray(y, dtype=float), np.asarray(x, dtype=float)
    if len(x) < 2:
        return np.zeros(y.shape[1:]) if y.ndim > 1 else 0.0
    w = np.diff(x).reshape((-1,) + (1,) * (y.ndim - 1))
    out = np.sum(0.5 * (y[1:] + y[:-1]) * w, axis=0)
    return out if y.ndim > 1 else float(out)


@dataclass
class Regularization:
    kappa: float
    K_eps: int
    error: float
    psi0: TrigPoly
    psi1: TrigPoly
    M: float


def regularize(base: Trajectory, mu: float, s: float, epsilon: float,
               kappa_max: float | None = None, tol: float = 1e-12) -> Regularization:
    """Smallest (fractional) spectral cutoff whose three-term error meets ``epsilon``.

    The error is ``|Psi0 - varphi0_x|_{s-1} + |Psi1 - varphi1_x|_{s-2} +
    |F^eps - F|_{L2(I; H^{s-2})}`` and is monotone in the cutoff, so a
    bisection finds the threshold.  ``M`` is the data side of the a priori
    bound for the regularized solution.
    """
    if not epsilon > 0:
        raise CutoffInfeasible("epsilon must be positive")
    K = base.config.K
    kappa_max = float(K if kappa_max is None else kappa_max)
    times = base.times
    target0 = derivative(base.states[0].varphi, 1)
    target1 = derivative(base.states[0].varphi_t, 1)
    F_hist = np.array([source_F(st.varphi, K).coeffs for st in base.states])
    a0 = bracket_power(K, 2 * (s - 1)) * np.abs(target0.coeffs) ** 2
    a1 = bracket_power(K, 2 * (s - 2)) * np.abs(target1.coeffs) ** 2
    aF = bracket_power(K, 2 * (s - 2)) * _trapezoid(np.abs(F_hist) ** 2, times)

    def error(kappa):
        r = (1.0 - cutoff_weights(K, kappa)) ** 2
        return math.sqrt(r @ a0) + math.sqrt(r @ a1) + math.sqrt(max(r @ aF, 0.0))

    if error(kappa_max) > epsilon:
        raise CutoffInfeasible(
            f"cutoff {kappa_max} leaves error {error(kappa_max):.3e} > epsilon={epsilon}")
    if error(0.0) <= epsilon:
        kappa = 0.0
    else:
        lo, hi = 0.0, kappa_max
        while hi - lo > tol * max(1.0, kappa_max):
            mid = 0.5 * (lo + hi)
            if error(mid) <= epsilon:
                hi = mid
            else:
                lo = mid
        kappa = hi
    psi0, psi1 = apply_cutoff(target0, kappa), apply_cutoff(target1, kappa)
    wk = cutoff_weights(K, kappa) ** 2
    bF = _trapezoid(np.sum(bracket_power(K, 2 * (s - 1)) * wk * np.abs(F_hist) ** 2, axis=1), times)
    phi0_H2 = sobolev_norm(base.states[0].varphi, 2)
    M = sobolev_norm(psi1, s - 1) ** 2 + (mu + 2.0 * phi0_H2) * sobolev_norm(psi0, s) ** 2 + bF
    return Regularization(kappa, int(math.ceil(kappa)), error(kappa), psi0, psi1, M)


@dataclass
class TriangulationReport:
    n: int
    epsilon: float
    kappa: float
    K_eps: int
    regularization_error: float
    M_eps: float
    linear_bound_lhs: float
    linear_bound_constant: float
    leg1: float
    leg1_over_eps: float
    leg2: float
    leg2_solved: float
    leg2_mismatch: float
    leg2_constant: float
    total_distance: float
    total_over_eps: float
    strong_distance: float
    data_distance: float
    weak_distance: float
    bound_eps2: float
    bound_data2: float
    bound_MW2: float
    C3_fitted: float
    triangle_ok: bool
    triangle_slack: float

    def to_dict(self) -> dict:
        return asdict(self)


def _pair_norms(u, u_t, s):
    return sobolev_norm(u, s - 1), sobolev_norm(u_t, s - 2)


def run_triangulation(cfg: ExperimentConfig, n: int, epsilon: float,
                      family: Family | None = None,
                      max_cutoff: float | None = None) -> TriangulationReport:
    """Numerical pass through the regularization argument for one (n, epsilon).

    Builds the source F from the base run, regularizes data and source,
    solves the regularized linear problem, measures both legs of the triangle
    (including a second, independent solve of the leg-2 problem with the
    assembled source G), and reports the fitted constants of each bound.
    ``max_cutoff`` caps the admissible cutoff (default ``K``); the source is
    the Galerkin projection of F, so with the default cap every epsilon is
    reachable.
    """
    family = family or solve_family(cfg, n_list=[n])
    if n not in family.runs:
        raise ValueError(f"n={n} is not part of the family")
    s, mu, K = cfg.s, family.config.mu, family.config.K
    base, run = family.base, family.runs[n]
    lin_cfg = family.config.replace(dt=None)
    T = lin_cfg.T

    reg = regularize(base, mu, s, epsilon, kappa_max=max_cutoff)
    kappa = reg.kappa
    bg_base = TrajectoryBackground(base)
    bg_run = TrajectoryBackground(run)

    def F_eps(t):
        return apply_cutoff(source_F(bg_base(t)[0], K), kappa)

    psi_traj = solve_linear(lin_cfg, LinearProblem(base, reg.psi0, reg.psi1, F_eps))
    bound_lhs = max(sobolev_norm(st.varphi, s) ** 2 + sobolev_norm(st.varphi_t, s - 1) ** 2
                    for st in psi_traj.states)

    # leg 1: Psi - varphi_x, leg 2: Psi - varphi_{n,x}
    leg1_t, leg2_t, lhs6, strong_t, strong2_t, dist_s, dist_w = [], [], [], [], [], [], []
    for P, b, r in zip(psi_traj.states, base.states, run.states):
        u1 = _pair_norms(P.varphi - derivative(b.varphi, 1), P.varphi_t - derivative(b.varphi_t, 1), s)
        u2 = _pair_norms(P.varphi - derivative(r.varphi, 1), P.varphi_t - derivative(r.varphi_t, 1), s)
        leg1_t.append(sum(u1))
        leg2_t.append(sum(u2))
        lhs6.append(u2[0] ** 2 + u2[1] ** 2)
        du, dv = b.varphi - r.varphi, b.varphi_t - r.varphi_t
        strong_t.append(sobolev_norm(du, s) + sobolev_norm(dv, s - 1))
        strong2_t.append(sobolev_norm(du, s) ** 2 + sobolev_norm(dv, s - 1) ** 2)
        dist_s.append(sobolev_norm(du, s) ** 2)
        dist_w.append(sobolev_norm(du, s - 1))
    leg1_t, leg2_t = np.array(leg1_t), np.array(leg2_t)
    times = psi_traj.times

    # independent solve of the leg-2 problem with the assembled source G
    bg_psi = TrajectoryBackground(psi_traj)

    def G(t):
        varphi_n = bg_run(t)[0]
        diff_phi_x = derivative(hilbert(varphi_n - bg_base(t)[0]), 1)
        Psi_xx = derivative(bg_psi(t)[0], 2)
        return F_eps(t) - source_F(varphi_n, K) + 2.0 * multiply(diff_phi_x, Psi_xx, truncate_to=K)

    r0 = run.states[0]
    diff_traj = solve_linear(
        lin_cfg.replace(delta=min(lin_cfg.delta, 0.5 * lin_cfg.mu)),
        LinearProblem(run, reg.psi0 - derivative(r0.varphi, 1), reg.psi1 - derivative(r0.varphi_t, 1), G))
    leg2_solved_t = np.array([sum(_pair_norms(st.varphi, st.varphi_t, s)) for st in diff_traj.states])
    leg2_mismatch = float(np.max(np.abs(leg2_solved_t - leg2_t)))

    d0, d1 = family.base_data
    e0, e1 = family.data[n]
    data2 = sobolev_norm(d0 - e0, s) ** 2 + sobolev_norm(d1 - e1, s - 1) ** 2
    weak = float(max(dist_w))
    integral = np.concatenate([[0.0], np.cumsum(0.5 * (np.array(dist_s[1:]) + np.array(dist_s[:-1]))
                                                * np.diff(times))])
    rhs6 = epsilon ** 2 + data2 + integral + T * reg.M * weak ** 2
    strong2 = float(max(strong2_t))
    bound = epsilon ** 2 + data2 + reg.M * weak ** 2
    slack = np.sqrt(2.0) * (leg1_t + leg2_t) - np.array(strong_t)
    total = float(np.max(leg1_t + leg2_t))
    return TriangulationReport(
        n=n, epsilon=epsilon, kappa=kappa, K_eps=reg.K_eps, regularization_error=reg.error,
        M_eps=reg.M, linear_bound_lhs=bound_lhs, linear_bound_constant=bound_lhs / reg.M if reg.M > 0 else 0.0,
        leg1=float(leg1_t.max()), leg1_over_eps=float(leg1_t.max()) / epsilon,
        leg2=float(leg2_t.max()), leg2_solved=float(leg2_solved_t.max()), leg2_mismatch=leg2_mismatch,
        leg2_constant=float(np.max(np.array(lhs6) / rhs6)),
        total_distance=total, total_over_eps=total / epsilon,
        strong_distance=math.sqrt(strong2), data_distance=math.sqrt(data2), weak_distance=weak,
        bound_eps2=epsilon ** 2, bound_data2=data2, bound_MW2=reg.M * weak ** 2,
        C3_fitted=strong2 / bound,
        triangle_ok=bool(np.all(slack >= -1e-12 * max(1.0, float(np.max(strong_t))))),
        triangle_slack=float(slack.min()),
    )


def epsilon_prime_table(cfg: ExperimentConfig, family: Family, records, C3: float,
                        eps_primes=None):
    """Concrete (eps', eps, n0) choices following the eps'/3 splitting.

    For each eps' the regularization level is ``eps = sqrt(eps' / (3 C3))``;
    ``n0`` is the first n whose data and weak-distance terms are both below
    eps'/3.  ``verified`` reports whether every measured strong distance
    from n0 on is below eps'.
    """
    eps_primes = cfg.epsilon_prime_list if eps_primes is None else eps_primes
    rows = []
    for ep in eps_primes:
        eps = math.sqrt(ep / (3.0 * C3)) if C3 > 0 else math.inf
        try:
            M = regularize(family.base, family.config.mu, cfg.s, eps).M if math.isfinite(eps) else 0.0
        except CutoffInfeasible:
            M = math.nan
        n0 = None
        for rec in records:
            if C3 * rec.data_distance ** 2 < ep / 3 and C3 * M * rec.weak_distance ** 2 < ep / 3:
                n0 = rec.n
                break
        verified = n0 is not None and all(rec.strong_distance ** 2 < ep for rec in records if rec.n >= n0)
        rows.append({"epsilon_prime": ep, "epsilon": eps, "M_eps": M, "n0": n0, "verified": verified})
    return rows


# -- ill-posedness probe --------------------------------------------------------------

def run_illposed_probe(mu: float, a: float, k_list, T_short: float | None = None,
                       K: int | None = None, cfl: float = 0.5):
    """Growth rates of single modes on the frozen background ``a cos x``.

    Returns ``[(k, rate), ...]`` where ``rate`` is the least-squares slope of
    ``log sqrt(|psi_t|^2 + |psi_x|^2)`` over the second half of
    ``[0, T_short]``.  When ``T_short`` is omitted it is chosen so that the
    fastest frozen-coefficient growth stays below 1e6.
    """
    k_list = [int(k) for k in k_list]
    K = K or max(64, 4 * max(k_list))
    excess = 2.0 * abs(a) - mu
    if T_short is None:
        rate = max(k_list) * math.sqrt(excess) if excess > 0 else 1.0
        T_short = math.log(1e6) / rate if excess > 0 else 4.0
    background = TrigPoly.from_modes(K, cos={1: a})
    cfg = SolverConfig(mu=mu, delta=min(0.1, 0.5 * mu), K=K, cfl=cfl, T=T_short)
    rows = []
    for k in k_list:
        psi0 = TrigPoly.from_modes(K, cos={k: math.sqrt(2.0)})
        traj = solve_linear(cfg, LinearProblem(background, psi0, TrigPoly.zeros(K)),
                            enforce_margin=False)
        t = traj.times
        E = np.array([math.hypot(sobolev_norm(st.varphi_t), sobolev_norm(derivative(st.varphi, 1)))
                      for st in traj.states])
        late = t >= 0.5 * T_short
        slope = np.polyfit(t[late], np.log(E[late]), 1)[0]
        rows.append((k, float(slope)))
    return rows


# -- resolution study ----------------------------------------------------------------

def run_resolution_study(cfg: ExperimentConfig, K_list=None):
    """Solve the base problem at each K with one shared step and report the
    strong distance between consecutive resolutions at the final time."""
    K_list = sorted(cfg.K_list if K_list is None else K_list)
    K_top = K_list[-1]
    d_top = cfg.base_data(K_top)
    top_cfg = common_step(ExperimentConfig(**{**cfg.__dict__, "base": cfg.base.replace(K=K_top)}),
                          [d_top])
    finals = {}
    for K in K_list:
        d0, d1 = cfg.base_data(K)
        traj = solve_nonlinear(top_cfg.replace(K=K), d0, d1)
        finals[K] = traj.final
    rows = []
    prev = None
    for lo, hi in zip(K_list[:-1], K_list[1:]):
        a, b = finals[lo], finals[hi]
        dist = strong_pair(a.varphi - b.varphi, a.varphi_t - b.varphi_t, cfg.s)
        rows.append({"K": lo, "K_next": hi, "distance": dist,
                     "reduction": (prev / dist) if prev and dist > 0 else math.nan})
        prev = dist
    return rows


# -- form equivalence ---------------------------------------------------------------

def run_equivalence_check(count: int = 50, K: int = 32, seed: int = 0, mu: float = 1.0,
                          decay: float = 2.0, amplitude: float = 0.3):
    """Max nodal deviation between the three accelerations, relative to form A."""
    rows = []
    M = 2 * (2 * K) + 1
    for i in range(count):
        sd = int(np.random.SeedSequence([seed, i]).generate_state(1)[0])
        f = random_trig(sd, K, decay, amplitude)
        a, b, c = (nodal(acceleration(f, mu, form), M) for form in Form)
        scale = float(np.max(np.abs(a)))
        rows.append({"sample": i, "seed": sd,
                     "dev_AB": float(np.max(np.abs(a - b))) / scale,
                     "dev_AC": float(np.max(np.abs(a - c))) / scale})
    return rows
