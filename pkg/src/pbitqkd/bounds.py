"""Finite-size security bounds, key rates, and the protocol parameter solver.

All bound evaluators work in log2 space (exponents at cryptographic scale
overflow doubles long before they become interesting) and report both the
log2 value and the literal value, with a ``vacuous`` verdict whenever a
failure-probability bound is >= 1.  Formulas are kept verbatim -- including
constants that are known to be loose -- so that regression tests can pin
them digit-for-digit against an independent high-precision evaluation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

__all__ = [
    "binary_entropy",
    "binary_entropy_inv_left",
    "key_rate",
    "net_key_rate",
    "hoeffding_tail",
    "log2_hoeffding_tail",
    "substring_sampling_bound",
    "log2_substring_sampling_bound",
    "frequency_deviation_log2",
    "definetti_log2",
    "EstimationFailureTerms",
    "estimation_failure_terms",
    "relaxation_budget",
    "BoundParams",
    "FailureBound",
    "protocol_failure_bound",
    "composable_insecurity",
    "group_average_error_bound",
    "ParamSolution",
    "choose_params",
]

_LN2 = math.log(2.0)


def binary_entropy(x: float) -> float:
    """Binary entropy H(x) in bits; H(0) = H(1) = 0; ValueError outside [0, 1]."""
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"binary entropy argument {x} outside [0, 1]")
    if x == 0.0 or x == 1.0:
        return 0.0
    return -x * math.log2(x) - (1.0 - x) * math.log2(1.0 - x)


def binary_entropy_inv_left(y: float, tol: float = 1e-15) -> float:
    """Inverse of H on the increasing branch [0, 1/2] (bisection)."""
    if not 0.0 <= y <= 1.0:
        raise ValueError(f"entropy value {y} outside [0, 1]")
    lo, hi = 0.0, 0.5
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if binary_entropy(mid) < y:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def key_rate(eps_x: float, eps_z: float) -> float:
    """Asymptotic one-way rate max(0, 1 - H(eps_x) - H(eps_z)); 0 means abort."""
    return max(0.0, 1.0 - binary_entropy(eps_x) - binary_entropy(eps_z))


def net_key_rate(eps_x: float, eps_z: float, n: int, m_x: int, m_z: int) -> float:
    """Rate after discounting the copies consumed by estimation."""
    if m_x + m_z > n:
        raise ValueError(f"estimation budget m_x + m_z = {m_x + m_z} exceeds n = {n}")
    return (1.0 - (m_x + m_z) / n) * key_rate(eps_x, eps_z)


# --- elementary tail bounds --------------------------------------------------


def log2_hoeffding_tail(m: int, delta: float) -> float:
    """log2 of 2 * exp(-2 m delta^2): two-sided Hoeffding tail for a mean of
    m bounded samples deviating by more than delta."""
    if m < 1:
        raise ValueError(f"sample count must be positive, got {m}")
    return 1.0 - 2.0 * m * delta * delta / _LN2


def hoeffding_tail(m: int, delta: float) -> float:
    return 2.0 ** log2_hoeffding_tail(m, delta)


def log2_substring_sampling_bound(k: int, eps: float, z_size: int) -> float:
    """log2 of |Z| * exp(-k eps^2 / (8 |Z|)).

    Tail bound on the total-variation distance between the type of a random
    k-subset and the type of the whole string, over an alphabet of |Z|
    symbols.
    """
    if k < 1 or z_size < 1:
        raise ValueError("k and z_size must be positive")
    return math.log2(z_size) - k * eps * eps / (8.0 * z_size * _LN2)


def substring_sampling_bound(k: int, eps: float, z_size: int) -> float:
    return 2.0 ** log2_substring_sampling_bound(k, eps, z_size)


def frequency_deviation_log2(n: int, delta: float, r: int, z_size: int) -> float:
    """log2 of 2^{-n(delta^2/4 - H(r/n)) + |Z| log2(n/2 + 1)}.

    Probability that empirical frequencies over n trials deviate by delta
    when up to r positions may behave arbitrarily.  Requires r <= n/2 (the
    entropy term is only monotone on that branch).
    """
    if not 0 <= 2 * r <= n:
        raise ValueError(f"need 0 <= r <= n/2, got r={r}, n={n}")
    return -n * (delta * delta / 4.0 - binary_entropy(r / n)) + z_size * math.log2(
        n / 2.0 + 1.0
    )


def definetti_log2(n: int, k: int, r: int, dim: int, dim_power: int = 2) -> float:
    """log2 of 2 * exp(-k(r+1)/(2(n+k)) + (1/2) dim^dim_power ln k).

    Post-selection/de Finetti reduction cost for measuring k of n+k
    exchangeable systems.  Two exponent conventions circulate -- one with
    dim, one with dim squared; ``dim_power`` selects (default 2, the variant
    the aggregate protocol bound consumes).
    """
    if dim_power not in (1, 2):
        raise ValueError("dim_power must be 1 or 2")
    if k < 1 or n < 0:
        raise ValueError("need k >= 1 and n >= 0")
    expo = -k * (r + 1) / (2.0 * (n + k)) + 0.5 * dim**dim_power * math.log(k)
    return 1.0 + expo / _LN2


# --- per-observable estimation failure (three-term form) ---------------------


@dataclass(frozen=True)
class EstimationFailureTerms:
    """Three-term failure bound for estimating one decomposed observable."""

    log2_e1: float
    log2_e2: float
    log2_e3: float
    m_prime: float

    @property
    def log2_total(self) -> float:
        return _log2_sum([self.log2_e1, self.log2_e2, self.log2_e3])

    @property
    def total(self) -> float:
        return _pow2(self.log2_total)


def estimation_failure_terms(
    n: int,
    m: int,
    delta: float,
    r: int,
    d: int,
    t: int,
    hs_norm_sq: float,
) -> EstimationFailureTerms:
    """Failure terms for LOCC estimation of a t-term product decomposition.

    e1: de Finetti/post-selection over n untouched + 2m measured systems,
    e2: frequency-type deviation on the m' = m/t copies each group gets,
    e3: concentration of the weighted group averages.
    """
    if min(n, m, r, d, t) < 1:
        raise ValueError("n, m, r, d, t must be positive")
    if hs_norm_sq <= 0:
        raise ValueError("hs_norm_sq must be positive")
    m_prime = m / t
    log2_e1 = 1.0 + (-n * (r + 1) / (2.0 * (2 * m + n)) + 0.5 * d * d * math.log(n)) / _LN2
    ratio = r / m_prime
    if ratio > 1.0:
        log2_e2 = math.inf
    else:
        gap = delta * delta / (4.0 * t * hs_norm_sq) - binary_entropy(ratio)
        log2_e2 = math.log2(t + 1.0) + (-gap * m_prime + d * math.log2(m_prime / 2.0 + 1.0))
    log2_e3 = math.log2(d) - m * delta * delta / (8.0 * d * hs_norm_sq * _LN2)
    return EstimationFailureTerms(log2_e1, log2_e2, log2_e3, m_prime)


# --- aggregate protocol failure bound ----------------------------------------


def relaxation_budget(s: int, n: int, d: int = 2, d_prime: int = 4) -> int:
    """Exchangeability relaxation budget r = 4s + ceil(d^4 d'^2 ln n).

    The parameter prescription asks for r = 4s while also demanding
    r >= d^4 d'^2 ln n; read as a maximum the two are jointly unachievable
    (the post-selection term then never drops below 2^-s once
    d^4 d'^2 ln n > 4s), so the budget takes their sum -- which satisfies
    both stated inequalities and makes every aggregate-bound term
    exponentially small in s at large n.
    """
    if s < 1 or n < 2:
        raise ValueError("need s >= 1 and n >= 2")
    return 4 * s + math.ceil(d**4 * d_prime**2 * math.log(n))


@dataclass(frozen=True)
class BoundParams:
    """Parameters feeding the aggregate failure bound.

    n: total copies; m_x / m_z: copies spent on bit-error / phase-error
    estimation; delta: deviation tolerance; r: exchangeability relaxation
    budget; d / d_prime: key and shield dimensions; s: security exponent
    (abort quality beta_b defaults to 2^-s).
    """

    n: int
    m_x: int
    m_z: int
    delta: float
    r: int
    d: int = 2
    d_prime: int = 4
    s: int = 40
    beta_b: float | None = None

    @property
    def t(self) -> int:
        """Local basis size t = d^2 d' (per-side product basis cardinality)."""
        return self.d * self.d * self.d_prime

    @property
    def m_prime(self) -> float:
        """Copies per product-observable group when m_z splits into t^2 groups."""
        return self.m_z / (self.t**2)

    @property
    def beta(self) -> float:
        return 2.0 ** (-self.s) if self.beta_b is None else self.beta_b

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "m_x": self.m_x,
            "m_z": self.m_z,
            "m_prime": self.m_prime,
            "delta": self.delta,
            "r": self.r,
            "d": self.d,
            "d_prime": self.d_prime,
            "t": self.t,
            "s": self.s,
            "beta_b": self.beta,
        }


@dataclass(frozen=True)
class FailureBound:
    """Aggregate failure probability f with its four log2 terms."""

    log2_terms: dict = field(default_factory=dict)
    log2_f: float = math.inf

    @property
    def f(self) -> float:
        return _pow2(self.log2_f)

    @property
    def vacuous(self) -> bool:
        return not self.log2_f < 0.0  # f >= 1 (or nan/inf)

    def to_dict(self) -> dict:
        return {
            "log2_terms": {k: _json_float(v) for k, v in self.log2_terms.items()},
            "log2_f": _json_float(self.log2_f),
            "f": _json_float(self.f),
            "vacuous": self.vacuous,
        }


def protocol_failure_bound(params: BoundParams) -> FailureBound:
    """Total failure probability of the estimation-based protocol.

    Four contributions, kept verbatim:

    * bit-error sampling:      2 exp(-m_x delta^2 / 16)
    * post-selection cost:     2 exp(-(n - m_z)(r+1)/(2n) + (1/2) d^4 d'^2 ln(n - m_z))
    * phase-group frequencies: (t^2+1) 2^{-[delta^2/(36 t^2 d^2 d') - H(r t^2/m_z)](m_z/t^2)
                                          + d' d^2 log2(m_z/(2 t^2) + 1)}
    * phase-average tail:      2 exp(-m_z delta^2 / (144 d' d^2))
    """
    n, m_x, m_z = params.n, params.m_x, params.m_z
    d, dp, r, delta, t = params.d, params.d_prime, params.r, params.delta, params.t
    if m_x < 1 or m_z < 1 or n - m_z < 2:
        raise ValueError("need m_x >= 1, m_z >= 1 and n - m_z >= 2")
    t1 = 1.0 - m_x * delta * delta / (16.0 * _LN2)
    t2 = 1.0 + (
        -(n - m_z) * (r + 1) / (2.0 * n) + 0.5 * d**4 * dp**2 * math.log(n - m_z)
    ) / _LN2
    ratio = r * t * t / m_z
    if ratio > 1.0:
        t3 = math.inf
    else:
        gap = delta * delta / (36.0 * t * t * d * d * dp) - binary_entropy(ratio)
        t3 = math.log2(t * t + 1.0) + (
            -gap * (m_z / (t * t)) + dp * d * d * math.log2(m_z / (2.0 * t * t) + 1.0)
        )
    t4 = 1.0 - m_z * delta * delta / (144.0 * dp * d * d * _LN2)
    terms = {"bit_sampling": t1, "post_selection": t2, "phase_groups": t3, "phase_tail": t4}
    return FailureBound(log2_terms=terms, log2_f=_log2_sum(list(terms.values())))


def composable_insecurity(f: float, beta_b: float) -> float:
    """sqrt(4 f + beta_b^2): distance from an ideal key given failure bound f."""
    if f < 0.0 or beta_b < 0.0:
        raise ValueError("f and beta_b must be nonnegative")
    if math.isinf(f):
        return math.inf
    return math.sqrt(4.0 * f + beta_b * beta_b)


def group_average_error_bound(t: int, hs_norm: float, max_group_dist: float) -> float:
    """|<L> - weighted group averages| <= sqrt(t) ||L||_HS max_i ||P_i - Q_i||.

    If each group's empirical outcome distribution is within max_group_dist
    of the true one (total variation), the decomposed average of a t-term
    observable L moves by at most this much.
    """
    if t < 1:
        raise ValueError("t must be positive")
    return math.sqrt(t) * hs_norm * max_group_dist


# --- parameter solver ---------------------------------------------------------


@dataclass(frozen=True)
class ParamSolution:
    """Output of choose_params: a parameter set plus feasibility diagnostics."""

    feasible: bool
    s: int
    delta: float
    d: int
    d_prime: int
    t: int
    m_x: int
    r: int | None = None
    m_prime: int | None = None
    m_z: int | None = None
    n: int | None = None
    binding_constraint: str | None = None
    margins: dict = field(default_factory=dict)
    message: str = ""

    def to_dict(self) -> dict:
        return {
            "feasible": self.feasible,
            "s": self.s,
            "delta": self.delta,
            "d": self.d,
            "d_prime": self.d_prime,
            "t": self.t,
            "m_x": self.m_x,
            "r": self.r,
            "m_prime": self.m_prime,
            "m_z": self.m_z,
            "n": self.n,
            "binding_constraint": self.binding_constraint,
            "margins": {k: _json_float(v) for k, v in self.margins.items()},
            "message": self.message,
        }


def _mprime_constraints(
    s: int, delta: float, d: int, d_prime: int, r: int
) -> dict[str, Callable[[int], float]]:
    """Margin functions (>= 0 means satisfied) for the m' constraint groups."""
    t = d * d * d_prime
    target = delta * delta / (72.0 * t * t * d * d * d_prime)
    floor_c = 144.0 * s * t * t * d * d * d_prime / (delta * delta) - 2.0 * math.log2(t)
    floor_d = (s + 1.0) * 144.0 * d_prime * d * d / (t * t * delta * delta)

    def entropy_gap(mp: int) -> float:
        if r / mp > 0.5:
            return -math.inf
        return target - binary_entropy(r / mp)

    def log_overhead(mp: int) -> float:
        return mp * target - 2.0 * d_prime * d * d * math.log2(mp / 2.0 + 1.0)

    return {
        "entropy_gap": entropy_gap,
        "log_overhead": log_overhead,
        "sampling_floor": lambda mp: mp - floor_c,
        "per_group_floor": lambda mp: mp - floor_d,
    }


def _solve_mprime(
    s: int, delta: float, d: int, d_prime: int, r: int
) -> tuple[int | None, str | None, dict]:
    """Minimal m' meeting all constraint groups; (None, name, margins) if hopeless."""
    cons = _mprime_constraints(s, delta, d, d_prime, r)
    lo = max(2 * r, 2)
    mp = lo
    for _ in range(200):
        if all(fn(mp) >= 0.0 for fn in cons.values()):
            break
        mp *= 2
    else:
        failing = [name for name, fn in cons.items() if fn(mp) < 0.0]
        return None, failing[0], {name: fn(mp) for name, fn in cons.items()}
    hi = mp
    lo_search = lo
    while lo_search < hi:
        mid = (lo_search + hi) // 2
        if all(fn(mid) >= 0.0 for fn in cons.values()):
            hi = mid
        else:
            lo_search = mid + 1
    best = hi
    margins = {name: fn(best) for name, fn in cons.items()}
    binding = None
    if best > lo:
        failing = [name for name, fn in cons.items() if fn(best - 1) < 0.0]
        binding = failing[0] if failing else None
    return best, binding, margins


def choose_params(
    s: int,
    delta: float,
    d: int = 2,
    d_prime: int = 4,
    n: int | None = None,
    n_cap: int = 2**200,
) -> ParamSolution:
    """Solve the protocol parameter constraints for a security level s.

    Fixed-form pieces: m_x = ceil(16 s / delta^2) and r =
    relaxation_budget(s, n, d, d_prime).  The per-group count m' must
    satisfy four constraint groups (entropy gap, logarithmic overhead,
    sampling floor, per-group floor); the search doubles m' until all hold,
    then bisects down to the minimum, reporting which constraint binds.
    m_z = t^2 m'.  Feasibility in n demands the budget m_x + m_z < n AND
    every term of the aggregate failure bound at (n, m_x, m_z, r) coming
    in at or below 2^-s (within a 1e-6 relative slack); with n = None the
    minimal such n is located by doubling + bisection -- expect an
    astronomically large answer at meaningful s.
    """
    if s < 1 or not 0.0 < delta < 1.0 or d < 2 or d_prime < 1:
        raise ValueError("need s >= 1, 0 < delta < 1, d >= 2, d_prime >= 1")
    t = d * d * d_prime
    m_x = math.ceil(16.0 * s / (delta * delta))

    # every aggregate-bound term must come in at or below the per-term target
    term_target = -float(s) + math.log2(1.0 + 1e-6)

    def attempt(n_val: int) -> ParamSolution:
        r = relaxation_budget(s, n_val, d, d_prime)
        mp, binding, margins = _solve_mprime(s, delta, d, d_prime, r)
        margins = dict(margins)
        # r is additive in a security part and a dimension part; expose both so
        # callers can see which one dominates the relaxation budget
        margins["r_security_part"] = float(4 * s)
        margins["r_dimension_part"] = float(r - 4 * s)
        if mp is None:
            return ParamSolution(
                feasible=False, s=s, delta=delta, d=d, d_prime=d_prime, t=t,
                m_x=m_x, r=r, n=n_val, binding_constraint=binding, margins=margins,
                message=f"m' search failed: constraint {binding!r} unsatisfiable",
            )
        m_z = t * t * mp
        margins["n_budget"] = float(n_val - m_x - m_z)
        if m_x + m_z >= n_val:
            return ParamSolution(
                feasible=False, s=s, delta=delta, d=d, d_prime=d_prime, t=t,
                m_x=m_x, r=r, m_prime=mp, m_z=m_z, n=n_val,
                binding_constraint="n_budget", margins=margins,
                message=(
                    f"estimation budget m_x + m_z = {m_x + m_z} leaves no key copies"
                    f" out of n = {n_val}"
                ),
            )
        bound = protocol_failure_bound(
            BoundParams(n=n_val, m_x=m_x, m_z=m_z, delta=delta, r=r, d=d,
                        d_prime=d_prime, s=s)
        )
        for term_name, log2_term in bound.log2_terms.items():
            margins[f"term_{term_name}"] = term_target - log2_term
        weak = [name for name, val in bound.log2_terms.items() if val > term_target]
        if weak:
            return ParamSolution(
                feasible=False, s=s, delta=delta, d=d, d_prime=d_prime, t=t,
                m_x=m_x, r=r, m_prime=mp, m_z=m_z, n=n_val,
                binding_constraint=f"term_{weak[0]}", margins=margins,
                message=(
                    f"aggregate-bound term(s) {weak} exceed the 2^-{s} per-term"
                    f" target at n = {n_val}"
                ),
            )
        return ParamSolution(
            feasible=True, s=s, delta=delta, d=d, d_prime=d_prime, t=t,
            m_x=m_x, r=r, m_prime=mp, m_z=m_z, n=n_val,
            binding_constraint=binding, margins=margins,
        )

    if n is not None:
        return attempt(int(n))

    # locate the minimal feasible n (doubling, then bisection)
    n_lo = max(4 * m_x, 1024)
    n_hi = n_lo
    while n_hi <= n_cap:
        if attempt(n_hi).feasible:
            break
        n_hi *= 2
    else:
        sol = attempt(n_cap)
        return ParamSolution(
            feasible=False, s=s, delta=delta, d=d, d_prime=d_prime, t=t,
            m_x=m_x, r=sol.r, m_prime=sol.m_prime, m_z=sol.m_z, n=None,
            binding_constraint=sol.binding_constraint, margins=sol.margins,
            message=f"no feasible n below cap 2^{int(math.log2(n_cap))}",
        )
    lo, hi = n_lo, n_hi
    while lo < hi:
        mid = (lo + hi) // 2
        if attempt(mid).feasible:
            hi = mid
        else:
            lo = mid + 1
    return attempt(hi)


# --- helpers ------------------------------------------------------------------


def _pow2(x: float) -> float:
    if math.isinf(x):
        return math.inf if x > 0 else 0.0
    try:
        return 2.0**x
    except OverflowError:
        return math.inf


def _log2_sum(log_terms: list[float]) -> float:
    """log2 of a sum given the log2 of each (nonnegative) term."""
    if any(math.isinf(x) and x > 0 for x in log_terms):
        return math.inf
    mx = max(log_terms)
    if math.isinf(mx):  # all -inf
        return -math.inf
    return mx + math.log2(sum(2.0 ** (x - mx) for x in log_terms))


def _json_float(x: float) -> float | None:
    if isinstance(x, float) and (math.isinf(x) or math.isnan(x)):
        return None
    return float(x) if isinstance(x, (int, float)) else x
