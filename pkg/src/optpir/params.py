"""Integer parameters of the scheme derived from (N, T, M).

Indices k of ``alpha``/``beta`` are 1-based in the public helpers
(``params.alpha_k(1)``) and stored 0-based in the tuples.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

from sympy import nextprime

from .errors import InternalError, InvalidConfig
from .field import PrimeField

DEFAULT_GRID = ((2, 1, 2), (3, 2, 2), (3, 2, 3), (4, 2, 3), (5, 3, 3), (4, 3, 2), (2, 1, 4))


@dataclass(frozen=True)
class SchemeConfig:
    N: int
    T: int
    M: int

    def __post_init__(self) -> None:
        for name in ("N", "T", "M"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, int):
                raise InvalidConfig(f"{name} must be an integer, got {v!r}")
        if self.M < 2:
            raise InvalidConfig(f"need M >= 2 records, got M = {self.M}")
        if not 1 <= self.T < self.N:
            raise InvalidConfig(f"need 1 <= T < N, got N = {self.N}, T = {self.T}")

    def __str__(self) -> str:
        return f"(N={self.N}, T={self.T}, M={self.M})"


@dataclass(frozen=True)
class SchemeParams:
    config: SchemeConfig
    d: int
    n: int
    t: int
    alpha: tuple[int, ...]
    beta: tuple[int, ...]
    L: int
    D: int
    ell: int
    gamma_a: int
    gamma_b: int
    q_min: int
    q: int

    @property
    def N(self) -> int:
        return self.config.N

    @property
    def T(self) -> int:
        return self.config.T

    @property
    def M(self) -> int:
        return self.config.M

    @property
    def field(self) -> PrimeField:
        return PrimeField(self.q)

    @property
    def rate(self) -> Fraction:
        return Fraction(self.L, self.D)

    def alpha_k(self, k: int) -> int:
        return self.alpha[k - 1]

    def beta_k(self, k: int) -> int:
        return self.beta[k - 1]

    def sums_per_type(self, server: int, k: int) -> int:
        """How many k-sums of each type Lambda the given (1-based) server answers."""
        return self.alpha_k(k) if server <= self.T else self.beta_k(k)

    def gamma(self, server: int) -> int:
        return self.gamma_a if server <= self.T else self.gamma_b

    def codeword_dim(self, k: int) -> int:
        """Symbols per record in all Lambda-type sums of one type, |Lambda| = k."""
        return self.T * self.alpha_k(k) + (self.N - self.T) * self.beta_k(k)

    def code_length(self, k: int) -> int:
        """Length of the rate-T/N code expanding the k-sums of one type, 1 <= k < M."""
        return self.codeword_dim(k) + self.codeword_dim(k + 1)


def _reduced(config: SchemeConfig) -> tuple[int, int, int]:
    d = math.gcd(config.N, config.T)
    return d, config.N // d, config.T // d


def _exact_int(x: Fraction, what: str) -> int:
    if x.denominator != 1 or x < 0:
        raise InternalError(f"{what} = {x} is not a non-negative integer")
    return int(x)


def solve_alpha_beta(config: SchemeConfig) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """Integer solution of the alpha/beta recursion from its boundary seeds.

    For N >= 2T the recursion runs forward from alpha_1 = t^(M-2), beta_1 = 0;
    for T < N < 2T it runs backward from alpha_M = 0, beta_M = (n-t)^(M-2).
    """
    N, T, M = config.N, config.T, config.M
    _, n, t = _reduced(config)
    alpha = [Fraction(0)] * M
    beta = [Fraction(0)] * M
    if N >= 2 * T:
        alpha[0], beta[0] = Fraction(t ** (M - 2)), Fraction(0)
        for k in range(M - 1):
            alpha[k + 1] = Fraction(N - T, T) * beta[k]
            beta[k + 1] = alpha[k] + alpha[k + 1] - beta[k]
    else:
        alpha[M - 1], beta[M - 1] = Fraction(0), Fraction((n - t) ** (M - 2))
        for k in range(M - 2, -1, -1):
            beta[k] = Fraction(T, N - T) * alpha[k + 1]
            alpha[k] = beta[k] + beta[k + 1] - alpha[k + 1]
    return (
        tuple(_exact_int(a, f"alpha_{k + 1}") for k, a in enumerate(alpha)),
        tuple(_exact_int(b, f"beta_{k + 1}") for k, b in enumerate(beta)),
    )


def closed_form_alpha_beta(config: SchemeConfig) -> tuple[tuple[Fraction, ...], tuple[Fraction, ...]]:
    """Closed-form alpha_k, beta_k evaluated in exact rationals.

    Boundary indices involve negative exponents; rational evaluation keeps
    them meaningful so the whole range can be compared with the recursion.
    """
    N, T, M = config.N, config.T, config.M
    _, n, t = _reduced(config)
    n, t = Fraction(n), Fraction(t)
    alpha, beta = [], []
    for k in range(1, M + 1):
        if N >= 2 * T:
            a = ((n - t) ** (k - 2) - (-t) ** (k - 2)) / n * (n - t) * t ** (M - k)
            b = ((n - t) ** (k - 1) - (-t) ** (k - 1)) / n * t ** (M - k)
        else:
            a = (t ** (M - k) - (t - n) ** (M - k)) / n * (n - t) ** (k - 1)
            b = (t ** (M - k - 1) - (t - n) ** (M - k - 1)) / n * t * (n - t) ** (k - 1)
        alpha.append(a)
        beta.append(b)
    return tuple(alpha), tuple(beta)


def field_bound(config: SchemeConfig) -> int:
    """Largest code length used, max{N t^(M-2), N (n-t)^(M-2)}."""
    _, n, t = _reduced(config)
    return max(config.N * t ** (config.M - 2), config.N * (n - t) ** (config.M - 2))


def baseline_field_bound(config: SchemeConfig) -> int:
    """Field-size requirement of the N^M sub-packetization baseline."""
    N, T, M = config.N, config.T, config.M
    return max(N * N * T ** (M - 2), N * N * (N - T) ** (M - 2))


def minimum_prime(config: SchemeConfig) -> int:
    bound = max(field_bound(config), 2)
    return int(nextprime(bound - 1))


def derive_params(config: SchemeConfig, q: int | None = None) -> SchemeParams:
    N, T, M = config.N, config.T, config.M
    d, n, t = _reduced(config)
    alpha, beta = solve_alpha_beta(config)

    for k in range(M - 1):
        if T * alpha[k + 1] != (N - T) * beta[k] or alpha[k] + alpha[k + 1] != beta[k] + beta[k + 1]:
            raise InternalError(f"recursion violated at k = {k + 1}")
    ca, cb = closed_form_alpha_beta(config)
    if ca != alpha or cb != beta:
        raise InternalError(f"closed forms {ca}, {cb} disagree with recursion {alpha}, {beta}")
    dims = [T * a + (N - T) * b for a, b in zip(alpha, beta)]
    for k, dim in enumerate(dims, start=1):
        if dim != d * (n - t) ** (k - 1) * t ** (M - k):
            raise InternalError(f"per-type symbol count identity fails at k = {k}")

    L = sum(math.comb(M - 1, k - 1) * dims[k - 1] for k in range(1, M + 1))
    D = sum(math.comb(M, k) * dims[k - 1] for k in range(1, M + 1))
    ell = sum(math.comb(M - 2, k - 1) * dims[k - 1] for k in range(1, M))
    gamma_a = sum(math.comb(M, k) * alpha[k - 1] for k in range(1, M + 1))
    gamma_b = sum(math.comb(M, k) * beta[k - 1] for k in range(1, M + 1))
    if L != d * n ** (M - 1):
        raise InternalError(f"L = {L} differs from d n^(M-1) = {d * n ** (M - 1)}")
    if D * (n - t) != d * (n**M - t**M):
        raise InternalError(f"D = {D} differs from d (n^M - t^M)/(n - t)")
    if ell != T * n ** (M - 2):
        raise InternalError(f"ell = {ell} differs from T n^(M-2)")
    if T * gamma_a + (N - T) * gamma_b != D:
        raise InternalError("per-server answer counts do not add up to D")

    q_min = minimum_prime(config)
    if q is None:
        q = q_min
    else:
        PrimeField(q)  # validates primality
        if q < field_bound(config):
            raise InvalidConfig(f"q = {q} is below the required field size {field_bound(config)} (q_min = {q_min})")
    return SchemeParams(config, d, n, t, alpha, beta, L, D, ell, gamma_a, gamma_b, q_min, int(q))


def capacity(config: SchemeConfig | Sequence[int]) -> Fraction:
    """1 / sum_{i<M} (T/N)^i as an exact fraction.

    Accepts a :class:`SchemeConfig` or a raw ``(N, T, M)`` triple; the raw form
    also admits the degenerate M = 1.
    """
    if isinstance(config, SchemeConfig):
        N, T, M = config.N, config.T, config.M
    else:
        N, T, M = config
        if M < 1 or not 1 <= T < N:
            raise InvalidConfig(f"invalid (N, T, M) = {(N, T, M)}")
    r = Fraction(T, N)
    return 1 / sum(r**i for i in range(M))


def optimal_subpacketization(config: SchemeConfig) -> int:
    d, n, _ = _reduced(config)
    return d * n ** (config.M - 1)


def undesired_count_L(params: SchemeParams) -> int:
    """Sub-packetization counted through the undesired symbols of one record."""
    M, T, N = params.M, params.T, params.N
    a, b = params.alpha, params.beta
    return sum(
        math.comb(M - 2, k - 1) * (T * (a[k - 1] + a[k]) + (N - T) * (b[k - 1] + b[k]))
        for k in range(1, M)
    )


def privacy_margins_hold(params: SchemeParams) -> bool:
    """Any T servers see at most dim symbols of each undesired MDS codeword."""
    T = params.T
    for k in range(1, params.M):
        a2 = params.alpha_k(k) + params.alpha_k(k + 1)
        b2 = params.beta_k(k) + params.beta_k(k + 1)
        for x in range(T + 1):
            if x * a2 + (T - x) * b2 > params.codeword_dim(k):
                return False
    return True


@dataclass(frozen=True)
class ComparisonRow:
    N: int
    T: int
    M: int
    L: int
    D: int
    rate: Fraction
    q_min: int
    q_bound: int
    L_baseline: int
    q_bound_baseline: int

    @property
    def L_ratio(self) -> Fraction:
        return Fraction(self.L, self.L_baseline)

    @property
    def q_ratio(self) -> Fraction:
        return Fraction(self.q_bound, self.q_bound_baseline)


MACHINE_HEADER = "N,T,M,L,D,rate,q_min,q_bound,L_baseline,q_bound_baseline,L_ratio,q_ratio"


def comparison_table(configs: Iterable[SchemeConfig]) -> list[ComparisonRow]:
    rows = []
    for cfg in configs:
        p = derive_params(cfg)
        rows.append(ComparisonRow(
            cfg.N, cfg.T, cfg.M, p.L, p.D, p.rate, p.q_min, field_bound(cfg),
            cfg.N**cfg.M, baseline_field_bound(cfg),
        ))
    return rows


def format_machine(rows: Sequence[ComparisonRow]) -> str:
    lines = ["# " + MACHINE_HEADER]
    for r in rows:
        lines.append(",".join(str(x) for x in (
            r.N, r.T, r.M, r.L, r.D, r.rate, r.q_min, r.q_bound,
            r.L_baseline, r.q_bound_baseline, r.L_ratio, r.q_ratio,
        )))
    return "\n".join(lines)


def format_table(rows: Sequence[ComparisonRow]) -> str:
    header = ["N", "T", "M", "L", "D", "rate", "q_min", "q_bound", "L_base", "q_base", "L/L_base", "q/q_base"]
    body = [[str(x) for x in (
        r.N, r.T, r.M, r.L, r.D, r.rate, r.q_min, r.q_bound,
        r.L_baseline, r.q_bound_baseline, r.L_ratio, r.q_ratio,
    )] for r in rows]
    widths = [max(len(h), *(len(b[i]) for b in body)) if body else len(h) for i, h in enumerate(header)]
    fmt = "  ".join(f"{{:>{w}}}" for w in widths)
    return "\n".join([fmt.format(*header)] + [fmt.format(*b) for b in body])
