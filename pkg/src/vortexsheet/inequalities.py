"""Randomized checks of the norm and commutator inequalities.

Each ``ratio_*`` function returns ``lhs / rhs_factor`` for one input.  Hard
inequalities have constant 1 and are checked per sample; for the others the
constant is unknown, so a campaign only certifies that the largest observed
ratio does not grow as the resolution ``K`` increases.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ParameterDomainError
from .operators import commutator_bessel, commutator_hilbert, quadratic_Q
from .spectral import TrigPoly, derivative, hilbert, random_trig, sobolev_norm

DEGENERATE_LHS = 1e-14
HARD = frozenset({"hilbert", "poincare", "interpolation"})


class DegenerateViolation(AssertionError):
    """A zero right-hand side came with a nonzero left-hand side."""


@dataclass(frozen=True)
class RatioSample:
    lhs: float
    rhs_factor: float
    seed: int = -1
    K: int = 0
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.rhs_factor <= 0.0 and self.lhs > DEGENERATE_LHS:
            raise DegenerateViolation(
                f"rhs_factor is zero but lhs = {self.lhs:.3e} exceeds {DEGENERATE_LHS}")

    @property
    def degenerate(self) -> bool:
        return self.rhs_factor <= 0.0

    @property
    def ratio(self) -> float:
        return math.nan if self.degenerate else self.lhs / self.rhs_factor


def _require_mean_zero(f: TrigPoly, name="input"):
    if abs(f.coeffs[f.K]) > 1e-14 * max(1.0, sobolev_norm(f)):
        raise ParameterDomainError(f"{name} must have zero mean")


def ratio_hilbert(f: TrigPoly, s: float = 0.0) -> RatioSample:
    return RatioSample(sobolev_norm(hilbert(f), s), sobolev_norm(f, s), params={"s": s})


def ratio_poincare(f: TrigPoly, s: float = 1.0) -> RatioSample:
    if s < 1:
        raise ParameterDomainError("Poincare inequality needs s >= 1")
    _require_mean_zero(f)
    return RatioSample(sobolev_norm(f, s), math.sqrt(2.0) * sobolev_norm(derivative(f, 1), s - 1),
                       params={"s": s})


def ratio_interpolation(f: TrigPoly, s: float = 3.0) -> RatioSample:
    """``|f|_{s-1} <= |f|_s^(1-1/(s-1)) |f|_1^(1/(s-1))`` (Holder, constant 1)."""
    if s <= 2:
        raise ParameterDomainError("interpolation check needs s > 2")
    _require_mean_zero(f)
    theta = 1.0 / (s - 1.0)
    rhs = sobolev_norm(f, s) ** (1.0 - theta) * sobolev_norm(f, 1.0) ** theta
    return RatioSample(sobolev_norm(f, s - 1), rhs, params={"s": s})


def ratio_comm_l2(tau: float, v: TrigPoly, f: TrigPoly) -> RatioSample:
    if tau <= 0.5:
        raise ParameterDomainError("the L2 commutator bound needs tau > 1/2")
    return RatioSample(sobolev_norm(commutator_hilbert(v, f)),
                       sobolev_norm(v, tau) * sobolev_norm(f), params={"tau": tau})


def ratio_comm_p(tau: float, p: int, v: TrigPoly, f: TrigPoly) -> RatioSample:
    if tau < 0 or p < 0 or int(p) != p:
        raise ParameterDomainError("need tau >= 0 and integer p >= 0")
    p = int(p)
    lhs = sobolev_norm(commutator_hilbert(v, derivative(f, p)), tau)
    rhs = sobolev_norm(derivative(v, p), tau) * sobolev_norm(f, 1.0)
    return RatioSample(lhs, rhs, params={"tau": tau, "p": p})


def ratio_comm_bessel(variant: str, tau: float, sigma: float | None, v: TrigPoly,
                      f: TrigPoly) -> RatioSample:
    """Commutator of ``<d/dx>^tau`` with multiplication, variants i, ii, iii."""
    if tau < 1:
        raise ParameterDomainError("Bessel commutator bounds need tau >= 1")
    if variant in ("i", "ii"):
        if sigma is None or sigma <= 0.5:
            raise ParameterDomainError(f"variant {variant} needs sigma > 1/2")
    elif variant == "iii":
        sigma = 0.5
    else:
        raise ParameterDomainError(f"unknown variant {variant!r}")
    lhs = sobolev_norm(commutator_bessel(tau, v, f))
    tail = sobolev_norm(derivative(v, 1), 1.0) * sobolev_norm(f, tau - 1.0)
    if variant == "i":
        head = sobolev_norm(v, tau) * sobolev_norm(f, sigma)
    elif variant == "ii":
        head = sobolev_norm(v, tau + sigma) * sobolev_norm(f)
    else:
        head = sobolev_norm(v, tau + 0.5) * sobolev_norm(f, 0.5)
    return RatioSample(lhs, head + tail, params={"variant": variant, "tau": tau, "sigma": sigma})


def ratio_Q(s: float, varphi: TrigPoly) -> RatioSample:
    if s < 1:
        raise ParameterDomainError("the Q bound needs s >= 1")
    _require_mean_zero(varphi)
    dx = derivative(varphi, 1)
    return RatioSample(sobolev_norm(quadratic_Q(varphi), s - 1),
                       sobolev_norm(dx, 2) * sobolev_norm(dx, s - 1), params={"s": s})


def ratio_Q_diff(varphi: TrigPoly, tvarphi: TrigPoly) -> RatioSample:
    _require_mean_zero(varphi)
    _require_mean_zero(tvarphi, "tvarphi")
    lhs = sobolev_norm(quadratic_Q(varphi) - quadratic_Q(tvarphi))
    rhs = (sobolev_norm(varphi, 3) + sobolev_norm(tvarphi, 3)) * \
        sobolev_norm(derivative(varphi - tvarphi, 1))
    return RatioSample(lhs, rhs)


def ratio_Q_diff_s(s: float, varphi: TrigPoly, tvarphi: TrigPoly) -> RatioSample:
    if s < 3:
        raise ParameterDomainError("the H^s difference bound needs s >= 3")
    _require_mean_zero(varphi)
    _require_mean_zero(tvarphi, "tvarphi")
    lhs = sobolev_norm(quadratic_Q(varphi) - quadratic_Q(tvarphi), s - 1)
    rhs = (sobolev_norm(varphi, s) + sobolev_norm(tvarphi, s)) * sobolev_norm(varphi - tvarphi, s)
    return RatioSample(lhs, rhs, params={"s": s})


# -- campaigns ----------------------------------------------------------------------

def _draw(seeds, K, decay, amplitude=1.0):
    return [random_trig(int(sd), K, decay, amplitude) for sd in seeds]


def _sample_hilbert(seeds, K, p):
    f, = _draw(seeds[:1], K, p.get("decay", p["s"]))
    mean = p.get("mean", 0.0)
    if mean:
        offset = np.random.default_rng(int(seeds[1])).uniform(-mean, mean)
        f = f + offset
    return ratio_hilbert(f, p["s"])


def _sample_bessel(seeds, K, p):
    variant, tau = p["variant"], p["tau"]
    sigma = 0.5 if variant == "iii" else p["sigma"]
    if variant == "i":
        v_decay, f_decay = max(tau, 2.0), max(tau - 1.0, sigma)
    elif variant == "ii":
        v_decay, f_decay = max(tau + sigma, 2.0), tau - 1.0
    else:
        v_decay, f_decay = max(tau + 0.5, 2.0), max(tau - 1.0, 0.5)
    v, = _draw(seeds[:1], K, v_decay)
    f, = _draw(seeds[1:2], K, f_decay)
    return ratio_comm_bessel(variant, tau, sigma, v, f)


def _sample_pair(seeds, K, decay):
    return _draw(seeds[:2], K, decay)


# Input laws: decay exponents follow the minimal regularity each bound asks for.
SAMPLERS = {
    "hilbert": _sample_hilbert,
    "poincare": lambda sd, K, p: ratio_poincare(_draw(sd[:1], K, p["s"])[0], p["s"]),
    "interpolation": lambda sd, K, p: ratio_interpolation(_draw(sd[:1], K, p["s"])[0], p["s"]),
    "comm_l2": lambda sd, K, p: ratio_comm_l2(
        p["tau"], _draw(sd[:1], K, p["tau"])[0], _draw(sd[1:2], K, 0.0)[0]),
    "comm_p": lambda sd, K, p: ratio_comm_p(
        p["tau"], p["p"], _draw(sd[:1], K, p["tau"] + p["p"])[0], _draw(sd[1:2], K, 1.0)[0]),
    "comm_bessel": _sample_bessel,
    "Q": lambda sd, K, p: ratio_Q(p["s"], _draw(sd[:1], K, max(p["s"], 3.0))[0]),
    "Q_diff": lambda sd, K, p: ratio_Q_diff(*_sample_pair(sd, K, 3.0)),
    "Q_diff_s": lambda sd, K, p: ratio_Q_diff_s(p["s"], *_sample_pair(sd, K, p["s"])),
}

DEFAULT_PARAMS = {
    "hilbert": [{"s": 0.0}, {"s": 1.0}, {"s": 2.5}, {"s": 3.0}],
    "poincare": [{"s": 1.0}, {"s": 2.0}, {"s": 2.5}, {"s": 3.0}],
    "interpolation": [{"s": 3.0}, {"s": 3.5}],
    "comm_l2": [{"tau": 1.0}],
    "comm_p": [{"tau": 0.0, "p": p} for p in range(4)],
    # tau = r - 1 for r = 3 (i), r = 2.25 (ii), r = 5/2 (iii)
    "comm_bessel": [{"variant": "i", "tau": 2.0, "sigma": 1.0},
                    {"variant": "ii", "tau": 1.25, "sigma": 0.75},
                    {"variant": "iii", "tau": 1.5}],
    "Q": [{"s": 3.0}, {"s": 3.5}],
    "Q_diff": [{}],
    "Q_diff_s": [{"s": 3.0}, {"s": 3.5}],
}


def _stats(ratios) -> dict:
    r = np.asarray(ratios, dtype=float)
    r = r[np.isfinite(r)]
    if r.size == 0:
        return {"count": 0, "max": math.nan, "median": math.nan, "p99": math.nan}
    return {"count": int(r.size), "max": float(r.max()), "median": float(np.median(r)),
            "p99": float(np.percentile(r, 99))}


def _param_key(p: dict) -> str:
    return ",".join(f"{k}={v}" for k, v in sorted(p.items())) or "-"


@dataclass
class RatioReport:
    """Aggregated ratios of one inequality over a sample campaign.

    ``levels`` maps each K to pooled statistics; ``by_params`` splits them
    per parameter point.  The verdict is ``bounded`` when, for every
    parameter point, the largest ratio at the finest K exceeds the one at the
    coarsest K by less than ``growth_threshold``.
    """

    inequality: str
    sample_count: int
    K_levels: list
    levels: dict
    by_params: dict
    degenerate: int
    verdict: str
    growth: float
    growth_threshold: float = 0.5
    samples: list = field(default_factory=list, repr=False)

    @property
    def max_ratio(self) -> float:
        return max(v["max"] for v in self.levels.values())

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("samples")
        d["levels"] = {str(k): v for k, v in self.levels.items()}
        d["by_params"] = {p: {str(k): v for k, v in lv.items()} for p, lv in self.by_params.items()}
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def csv_text(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["seed", "K", "params", "lhs", "rhs_factor", "ratio"])
        for smp in self.samples:
            w.writerow([smp.seed, smp.K, _param_key(smp.params), repr(smp.lhs),
                        repr(smp.rhs_factor), repr(smp.ratio)])
        return buf.getvalue()


def run_campaign(inequality: str, sample_count: int, K_levels, seed: int = 0,
                 params=None, growth_threshold: float = 0.5) -> RatioReport:
    """Evaluate ``sample_count`` random inputs per K level and parameter point.

    ``params`` is a dict (one point) or a list of dicts; ``None`` uses the
    default grid for the inequality.  Seeds derive from ``(seed, K, point,
    index)`` so results do not depend on evaluation order.
    """
    if inequality not in SAMPLERS:
        raise ParameterDomainError(f"unknown inequality {inequality!r}")
    if sample_count < 1:
        raise ValueError("sample_count must be at least 1")
    K_levels = sorted(int(K) for K in K_levels)
    grid = DEFAULT_PARAMS[inequality] if params is None else params
    grid = [grid] if isinstance(grid, dict) else list(grid)
    sampler = SAMPLERS[inequality]

    samples = []
    pooled = {K: [] for K in K_levels}
    split = {_param_key(p): {K: [] for K in K_levels} for p in grid}
    degenerate = 0
    for K in K_levels:
        for j, p in enumerate(grid):
            for i in range(sample_count):
                seeds = np.random.SeedSequence([seed, K, j, i]).generate_state(2)
                smp = sampler(seeds, K, p)
                smp = RatioSample(smp.lhs, smp.rhs_factor, int(seeds[0]), K, dict(p))
                samples.append(smp)
                degenerate += smp.degenerate
                pooled[K].append(smp.ratio)
                split[_param_key(p)][K].append(smp.ratio)

    levels = {K: _stats(pooled[K]) for K in K_levels}
    by_params = {key: {K: _stats(r) for K, r in lv.items()} for key, lv in split.items()}
    lo, hi = K_levels[0], K_levels[-1]
    growth = 0.0
    for lv in by_params.values():
        if lv[lo]["count"] and lv[hi]["count"] and lv[lo]["max"] > 0:
            growth = max(growth, lv[hi]["max"] / lv[lo]["max"] - 1.0)
    verdict = "bounded" if growth < growth_threshold else "suspicious"
    return RatioReport(inequality, sample_count, K_levels, levels, by_params, degenerate,
                       verdict, growth, growth_threshold, samples)
