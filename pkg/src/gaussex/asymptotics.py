"""Closed-form tail asymptotics P(sup X > u) ~ C u^e Psi(u / sigma_*).

Constants that have no closed form (Pickands, Piterbarg, H_W) are injected by
the caller as :class:`ConstantEstimate` objects or plain floats; nothing in
this module simulates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Optional, Union

import numpy as np
from scipy import special

from .constants import ConstantEstimate, known_value
from .errors import DomainError, ModelError, UsageError
from .models import ChiSpec, PerfTableSpec, unique_optimizer

ConstantLike = Union[ConstantEstimate, float, int]
REGIMES = ("lt1", "eq1", "gt1")
ALPHA_ONE_TOL = 1e-9


def psi(u):
    """Standard normal tail Psi(u) = P(N > u)."""
    out = special.ndtr(-np.asarray(u, dtype=float))
    return float(out) if np.ndim(out) == 0 else out


def log_psi(u):
    out = special.log_ndtr(-np.asarray(u, dtype=float))
    return float(out) if np.ndim(out) == 0 else out


def gamma_fn(x: float) -> float:
    if not x > 0:
        raise DomainError(f"Gamma is evaluated for x > 0 only, got {x}")
    return float(special.gamma(x))


def _value(c: ConstantLike) -> float:
    return float(c.value) if isinstance(c, ConstantEstimate) else float(c)


@dataclass(frozen=True)
class AsymptoticFormula:
    constant_C: float
    u_exponent: float
    sigma_star: float = 1.0
    description: str = ""
    factors: dict = field(default_factory=dict)

    def __post_init__(self):
        if not (self.constant_C > 0 and math.isfinite(self.constant_C)):
            raise ModelError(f"asymptotic constant must be positive and finite, got {self.constant_C}")
        if not self.sigma_star > 0:
            raise ModelError("sigma_* must be positive")

    def evaluate(self, u):
        u = np.asarray(u, dtype=float)
        return np.exp(self.log_evaluate(u)) if u.ndim else math.exp(self.log_evaluate(float(u)))

    def log_evaluate(self, u):
        u = np.asarray(u, dtype=float)
        if np.any(u <= 0):
            raise DomainError("asymptotic formulas are evaluated at u > 0")
        out = math.log(self.constant_C) + self.u_exponent * np.log(u) + log_psi(u / self.sigma_star)
        return float(out) if out.ndim == 0 else out

    def to_dict(self) -> dict:
        return {
            "constant_C": self.constant_C,
            "u_exponent": self.u_exponent,
            "sigma_star": self.sigma_star,
            "description": self.description,
            "factors": dict(self.factors),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AsymptoticFormula":
        return cls(d["constant_C"], d["u_exponent"], d["sigma_star"], d.get("description", ""), dict(d.get("factors", {})))


@dataclass(frozen=True)
class LambdaPartition:
    """Coordinate split for constant-coefficient local expansions.

    Indices are 1-based.  ``beta``, ``a`` and ``b`` are keyed by index;
    ``beta`` and ``b`` are needed on lambda1 and lambda2, ``a`` on
    lambda0, lambda1 and lambda2.
    """

    alpha: tuple
    lambda0: frozenset = frozenset()
    lambda1: frozenset = frozenset()
    lambda2: frozenset = frozenset()
    lambda3: frozenset = frozenset()
    beta: Mapping[int, float] = field(default_factory=dict)
    a: Mapping[int, float] = field(default_factory=dict)
    b: Mapping[int, float] = field(default_factory=dict)
    vol_M: float = 1.0

    def __post_init__(self):
        n = len(self.alpha)
        sets = [frozenset(int(i) for i in s) for s in (self.lambda0, self.lambda1, self.lambda2, self.lambda3)]
        for name, s in zip(("lambda0", "lambda1", "lambda2", "lambda3"), sets):
            object.__setattr__(self, name, s)
        union = frozenset().union(*sets)
        if sum(len(s) for s in sets) != len(union):
            raise ModelError("Lambda sets must be disjoint")
        if union != frozenset(range(1, n + 1)):
            raise ModelError(f"Lambda sets must cover 1..{n}")
        for al in self.alpha:
            if not 0.0 < al <= 2.0:
                raise ModelError(f"alpha_i must lie in (0, 2], got {al}")
        if not self.vol_M > 0:
            raise ModelError("vol_M must be positive")
        beta = {int(k): float(v) for k, v in self.beta.items()}
        for i in self.lambda1 | self.lambda2 | self.lambda3:
            if i not in beta:
                raise ModelError(f"beta_{i} is required")
        al = lambda i: self.alpha[i - 1]
        for i in self.lambda1:
            if not al(i) < beta[i]:
                raise ModelError(f"index {i} in Lambda1 needs alpha < beta")
        for i in self.lambda2:
            if not al(i) == beta[i]:
                raise ModelError(f"index {i} in Lambda2 needs alpha = beta")
        for i in self.lambda3:
            if not al(i) > beta[i]:
                raise ModelError(f"index {i} in Lambda3 needs alpha > beta")
        for i in self.lambda0 | self.lambda1 | self.lambda2:
            if not self.a.get(i, 0) > 0:
                raise ModelError(f"a_{i} must be positive")
        for i in self.lambda1 | self.lambda2:
            if not self.b.get(i, 0) > 0:
                raise ModelError(f"b_{i} must be positive")
        object.__setattr__(self, "alpha", tuple(float(x) for x in self.alpha))
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "a", {int(k): float(v) for k, v in self.a.items()})
        object.__setattr__(self, "b", {int(k): float(v) for k, v in self.b.items()})

    def drift(self, i: int) -> float:
        """Piterbarg drift a_i^{-beta_i} b_i for an index in Lambda2."""
        return self.a[i] ** (-self.beta[i]) * self.b[i]


def prop1_formula(
    partition: LambdaPartition,
    constants: Optional[Mapping[int, ConstantLike]] = None,
    pickands: Optional[Mapping[int, ConstantLike]] = None,
) -> AsymptoticFormula:
    """Product-form constant for constant coefficients.

    C = vol_M prod_{L0 u L1} a_i H_{alpha_i} prod_{L1} b_i^{-1/beta_i} Gamma(1/beta_i + 1)
        prod_{L2} P^{a_i^{-beta_i} b_i}_{alpha_i},
    exponent sum_{L0 u L1} 2/alpha_i - sum_{L1} 2/beta_i.
    """
    constants = dict(constants or {})
    pickands = dict(pickands or {})
    p = partition
    factors = {"vol_M": p.vol_M}
    C = p.vol_M
    for i in sorted(p.lambda0 | p.lambda1):
        if i not in pickands:
            kv = known_value("pickands", p.alpha[i - 1])
            if kv is None:
                raise UsageError(f"missing Pickands constant for index {i} (alpha = {p.alpha[i - 1]:g})")
            pickands[i] = kv
        h = _value(pickands[i])
        factors[f"a_{i}"] = p.a[i]
        factors[f"H_{i}"] = h
        C *= p.a[i] * h
    for i in sorted(p.lambda1):
        g = p.b[i] ** (-1.0 / p.beta[i]) * gamma_fn(1.0 / p.beta[i] + 1.0)
        factors[f"b_{i}^(-1/beta)Gamma(1/beta+1)"] = g
        C *= g
    for i in sorted(p.lambda2):
        drift = p.drift(i)
        if i not in constants:
            kv = known_value("piterbarg", p.alpha[i - 1], drift)
            if kv is None:
                raise UsageError(f"missing Piterbarg constant for index {i} (drift {drift:g})")
            constants[i] = kv
        c = constants[i]
        if isinstance(c, ConstantEstimate) and c.b is not None and abs(c.b - drift) > 1e-9 * max(1.0, drift):
            raise UsageError(f"Piterbarg constant for index {i} has drift {c.b:g}, expected {drift:g}")
        factors[f"P_{i}"] = _value(c)
        C *= _value(c)
    expo = sum(2.0 / p.alpha[i - 1] for i in p.lambda0 | p.lambda1) - sum(2.0 / p.beta[i] for i in p.lambda1)
    return AsymptoticFormula(C, expo, 1.0, "product-form constant", factors)


def _regime(alpha: float, regime: Optional[str]) -> str:
    if regime is not None:
        if regime not in REGIMES:
            raise UsageError(f"regime must be one of {REGIMES}")
        return regime
    if alpha != 1.0 and abs(alpha - 1.0) < ALPHA_ONE_TOL:
        raise UsageError("alpha is within 1e-9 of 1: choose the regime explicitly (lt1, eq1 or gt1)")
    return "lt1" if alpha < 1.0 else ("eq1" if alpha == 1.0 else "gt1")


def perf_table_formula(
    spec: PerfTableSpec,
    hw: Optional[ConstantLike] = None,
    pickands: Optional[ConstantLike] = None,
    regime: Optional[str] = None,
) -> AsymptoticFormula:
    """Tail of sup over S_n of the performance-table field, by alpha regime."""
    reg = _regime(spec.alpha, regime)
    n, al, m = spec.n, spec.alpha, spec.m
    a = spec.weights
    if reg == "gt1":
        return AsymptoticFormula(float(m), 0.0, 1.0, f"m Psi(u), m = {m}", {"m": m})
    if reg == "eq1":
        if hw is None:
            if m != n + 1:
                raise UsageError("alpha = 1 with m < n + 1 needs an H_W estimate")
            hw_val = 1.0
        else:
            hw_val = _value(hw)
        fact = math.factorial(m - 1)
        return AsymptoticFormula(
            hw_val / fact,
            2.0 * (m - 1),
            1.0,
            f"H_W / (m-1)! u^(2(m-1)) Psi(u), m = {m}",
            {"H_W": hw_val, "1/(m-1)!": 1.0 / fact, "m": m},
        )
    if pickands is None:
        kv = known_value("pickands", al)
        if kv is None:
            raise UsageError(f"alpha < 1 needs a Pickands constant H_(B^{al:g})")
        pickands = kv
    H = _value(pickands)
    _, sig = unique_optimizer(spec)
    sig = float(sig)
    f = {
        "H^n": H**n,
        "prod (a_i^2 + a_{i+1}^2)^(1/alpha)": float(np.prod((a[:-1] ** 2 + a[1:] ** 2) ** (1.0 / al))),
        "2^((1-1/alpha) n)": 2.0 ** ((1.0 - 1.0 / al) * n),
        "(pi / (alpha (1-alpha)))^(n/2)": (math.pi / (al * (1.0 - al))) ** (n / 2.0),
        "sigma_*^(-(alpha-2)^2 n / ((1-alpha) alpha))": sig ** (-((al - 2.0) ** 2) * n / ((1.0 - al) * al)),
        "(sum_j prod_{i != j} a_i^(2/(alpha-1)))^(-1/2)": float(
            sum(np.prod(np.delete(a, j) ** (2.0 / (al - 1.0))) for j in range(n + 1)) ** -0.5
        ),
    }
    C = float(np.prod(list(f.values())))
    f["sigma_*"] = sig
    return AsymptoticFormula(C, (2.0 / al - 1.0) * n, float(sig), "C u^((2/alpha-1) n) Psi(u / sigma_*)", f)


def chi_prefactor(n: int) -> float:
    return 2.0 ** ((3.0 - n) / 2.0) * math.sqrt(math.pi) / gamma_fn(n / 2.0)


def chi_formula(spec: ChiSpec, p_est: ConstantLike) -> AsymptoticFormula:
    """P(sup chi > u) ~ 2^{(3-n)/2} sqrt(pi) / Gamma(n/2) P_Y^{b/a} u^{n-1} Psi(u)."""
    if isinstance(p_est, ConstantEstimate):
        if p_est.kind not in ("piterbarg", "generalized_piterbarg"):
            raise UsageError(f"chi formula needs a Piterbarg-type constant, got {p_est.kind}")
        if p_est.b is not None and abs(p_est.b - spec.drift) > 1e-9 * max(1.0, spec.drift):
            raise UsageError(f"Piterbarg constant has drift {p_est.b:g}, expected b/a = {spec.drift:g}")
        if abs(p_est.alpha - spec.alpha) > 1e-12:
            raise UsageError(f"Piterbarg constant has alpha {p_est.alpha:g}, expected {spec.alpha:g}")
    pre = chi_prefactor(spec.n)
    P = _value(p_est)
    return AsymptoticFormula(
        pre * P,
        float(spec.n - 1),
        1.0,
        f"chi process, n = {spec.n}",
        {"2^((3-n)/2) sqrt(pi) / Gamma(n/2)": pre, "P_Y^(b/a)": P, "b/a": spec.drift},
    )
