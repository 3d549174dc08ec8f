"""Verification harness: rank audits, privacy tests, rate checks and brute-force oracles."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field as dc_field
from fractions import Fraction
from itertools import combinations, permutations, product
from typing import Iterable, Sequence

import numpy as np

from .errors import TooLargeForExhaustive
from .field import FieldMatrix, PrimeField, batch_rank, rank
from .mds import encode, erasure_decode
from .params import SchemeConfig, SchemeParams, derive_params
from .scheme import (
    Database,
    MixState,
    QuerySet,
    Schedule,
    build_queries,
    build_schedule,
    record_transform,
    sample_mix_state,
    scheme_codes,
)

EXHAUSTIVE_LIMIT = 10**7


# ---------------------------------------------------------------- oracles

def oracle_mat_mul(a: FieldMatrix, b: FieldMatrix) -> list[list[int]]:
    """Schoolbook triple loop on Python ints."""
    q = a.field.q
    A, B = a.to_list(), b.to_list()
    return [
        [sum(A[i][k] * B[k][j] for k in range(a.cols)) % q for j in range(b.cols)]
        for i in range(a.rows)
    ]


def oracle_det(m: list[list[int]], q: int) -> int:
    """Leibniz-formula determinant mod q (tiny matrices only)."""
    n = len(m)
    total = 0
    for perm in permutations(range(n)):
        inversions = sum(1 for i in range(n) for j in range(i + 1, n) if perm[i] > perm[j])
        term = -1 if inversions % 2 else 1
        for i in range(n):
            term *= m[i][perm[i]]
        total += term
    return total % q


def oracle_rank(a: FieldMatrix) -> int:
    """Largest size of a non-vanishing minor, found by exhaustive search."""
    rows = a.to_list()
    for size in range(min(a.rows, a.cols), 0, -1):
        for rs in combinations(range(a.rows), size):
            for cs in combinations(range(a.cols), size):
                if oracle_det([[rows[r][c] for c in cs] for r in rs], a.field.q):
                    return size
    return 0


def full_rank_count(rows: int, cols: int, q: int) -> int:
    """Number of rows x cols matrices over GF(q) of rank cols."""
    return math.prod(q**rows - q**i for i in range(cols))


def gl_order(n: int, q: int) -> int:
    return full_rank_count(n, n, q)


def enumerate_full_rank(rows: int, cols: int, field: PrimeField) -> list[FieldMatrix]:
    out = []
    for entries in product(range(field.q), repeat=rows * cols):
        m = field.matrix(np.array(entries, dtype=np.int64).reshape(rows, cols))
        if rank(m) == cols:
            out.append(m)
    return out


def oracle_answer(db: Database, schedule: Schedule, query_set: QuerySet) -> list[FieldMatrix]:
    """Answers computed symbol by symbol: each slot returns the sum of its records' U-symbols."""
    params = schedule.params
    field = db.field
    q = field.q
    u = {
        i: (record_transform(params, schedule, query_set.mix_state, i).T @ db.record(i)).to_list()
        for i in range(1, params.M + 1)
    }
    out = []
    for slots in schedule.per_server:
        rows = []
        for s in slots:
            rows.append([
                sum(u[nu][s.symbol_index[nu]][c] for nu in s.lam) % q for c in range(db.stripes)
            ])
        out.append(field.matrix(np.array(rows, dtype=object).reshape(len(slots), db.stripes)))
    return out


# ---------------------------------------------------------------- rate

def measure_rate(params: SchemeParams, schedule: Schedule) -> Fraction:
    """Retrieved symbols over downloaded symbols, counted from the schedule."""
    return Fraction(params.L, len(schedule.slots))


# ---------------------------------------------------------------- ranks

def _server_columns(params: SchemeParams, coalition: Iterable[int]) -> list[int]:
    offsets = np.cumsum([0] + [params.gamma(j) for j in range(1, params.N + 1)])
    cols: list[int] = []
    for j in sorted(coalition):
        cols += list(range(offsets[j - 1], offsets[j]))
    return cols


def _record_rows(params: SchemeParams, records: Iterable[int]) -> list[int]:
    L = params.L
    return [r for i in sorted(records) for r in range((i - 1) * L, i * L)]


@dataclass
class RankAudit:
    config: SchemeConfig
    theta: int
    full_desired_rank: int
    coalition_ranks: dict[tuple[int, ...], tuple[int, int]]
    expected: tuple[int, int, int]

    @property
    def passed(self) -> bool:
        L, desired, undesired = self.expected
        return self.full_desired_rank == L and all(
            r == (desired, undesired) for r in self.coalition_ranks.values()
        )

    def to_text(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        worst = sorted(set(self.coalition_ranks.values()))
        return (
            f"ranks {self.config} theta={self.theta}: full={self.full_desired_rank} "
            f"coalition(desired, undesired) in {worst} expected {self.expected} -> {verdict}"
        )

    def to_machine(self) -> str:
        c = self.config
        worst = ";".join(f"{a}/{b}" for a, b in sorted(set(self.coalition_ranks.values())))
        return (
            f"ranks,N={c.N},T={c.T},M={c.M},theta={self.theta},full={self.full_desired_rank},"
            f"coalition={worst},expected={'/'.join(map(str, self.expected))},"
            f"verdict={'pass' if self.passed else 'fail'}"
        )


def audit_ranks(query_set: QuerySet, params: SchemeParams) -> RankAudit:
    """Check rank(Q^[N]_{theta,theta}) = L and, for every T-coalition,
    rank(Q^G_{theta,theta}) = TL/N and rank(Q^G_{theta,others}) = D - L."""
    theta = query_set.theta
    stacked = query_set.stacked()
    own = _record_rows(params, [theta])
    others = _record_rows(params, [i for i in range(1, params.M + 1) if i != theta])
    full = rank(stacked[own, :])
    coalition_ranks = {}
    for gamma in combinations(range(1, params.N + 1), params.T):
        cols = _server_columns(params, gamma)
        coalition_ranks[gamma] = (rank(stacked[own, cols]), rank(stacked[others, cols]))
    expected = (params.L, Fraction(params.T * params.L, params.N), params.D - params.L)
    if expected[1].denominator != 1:
        raise AssertionError("TL/N is not an integer")
    return RankAudit(params.config, theta, full, coalition_ranks,
                     (expected[0], int(expected[1]), expected[2]))


# ---------------------------------------------------------------- privacy

def coalition_view(query_set: QuerySet, coalition: Iterable[int]) -> bytes:
    """Bit-exact view: the coalition's query matrices in server order, row-major, 8 bytes per entry."""
    return b"".join(query_set.for_server(j).tobytes() for j in sorted(coalition))


def _monomial_columns(a: np.ndarray) -> int:
    return int(np.sum(np.count_nonzero(a, axis=0) == 1))


def view_signature(query_set: QuerySet, params: SchemeParams, coalition: Iterable[int]) -> tuple:
    """Small-support summary of a coalition's view.

    For the overall view and each record's row block: rank, number of columns
    touching the record, and number of single-entry columns. The first two are
    invariants of the column-dependency structure; the last exposes query
    entries that were not randomised.
    """
    coalition = sorted(coalition)
    if not coalition:
        return ()
    view = query_set.stacked(coalition)
    arr = view.array
    parts = [rank(view)]
    L = params.L
    for i in range(1, params.M + 1):
        block = arr[(i - 1) * L:i * L]
        parts.append((
            rank(FieldMatrix._raw(view.field, block)),
            int(np.count_nonzero(np.any(block, axis=0))),
            _monomial_columns(block),
        ))
    return tuple(parts)


def total_variation(p: Counter, q: Counter) -> Fraction:
    """Exact total-variation distance between two empirical (count) distributions."""
    np_, nq = sum(p.values()), sum(q.values())
    keys = set(p) | set(q)
    return sum((abs(Fraction(p.get(x, 0), np_) - Fraction(q.get(x, 0), nq)) for x in keys), Fraction(0)) / 2


def _max_pairwise_tv(dists: dict[int, Counter]) -> Fraction:
    thetas = sorted(dists)
    return max((total_variation(dists[a], dists[b]) for a, b in combinations(thetas, 2)), default=Fraction(0))


@dataclass
class PrivacyReport:
    config: SchemeConfig
    q: int
    coalition: tuple[int, ...]
    mode: str
    distributions: dict[int, Counter] = dc_field(repr=False)
    distance: Fraction
    threshold: float
    trials: int | None = None
    seed: int | None = None
    variant: str = "scheme"

    @property
    def support(self) -> int:
        return len(set().union(*(d.keys() for d in self.distributions.values())))

    @property
    def passed(self) -> bool:
        return self.distance <= self.threshold

    def to_text(self) -> str:
        extra = f", trials={self.trials}, seed={self.seed}" if self.mode == "statistical" else ""
        return (
            f"privacy[{self.mode}] {self.config} q={self.q} coalition={set(self.coalition) or '{}'} "
            f"variant={self.variant}{extra}: TV={float(self.distance):.6g} "
            f"(exact {self.distance}) threshold={self.threshold:.6g} support={self.support} "
            f"-> {'PASS' if self.passed else 'FAIL'}"
        )

    def to_machine(self) -> str:
        c = self.config
        return (
            f"privacy,N={c.N},T={c.T},M={c.M},q={self.q},coalition={'-'.join(map(str, self.coalition))},"
            f"mode={self.mode},variant={self.variant},trials={self.trials or ''},seed={'' if self.seed is None else self.seed},"
            f"support={self.support},distance={self.distance},threshold={self.threshold:.6g},"
            f"verdict={'pass' if self.passed else 'fail'}"
        )


def randomness_space_size(params: SchemeParams) -> int:
    return gl_order(params.L, params.q) * full_rank_count(params.L, params.ell, params.q) ** (params.M - 1)


def _check_coalition(params: SchemeParams, coalition: Sequence[int]) -> tuple[int, ...]:
    coalition = tuple(sorted(set(coalition)))
    if any(not 1 <= j <= params.N for j in coalition):
        raise ValueError(f"coalition {coalition} names servers outside 1..{params.N}")
    return coalition


def privacy_exhaustive(
    config: SchemeConfig,
    q: int,
    coalition: Sequence[int],
    limit: int = EXHAUSTIVE_LIMIT,
) -> PrivacyReport:
    """Exact view distributions over the complete randomness space, one per theta."""
    params = derive_params(config, q)
    coalition = _check_coalition(params, coalition)
    size = randomness_space_size(params)
    if size > limit:
        raise TooLargeForExhaustive(f"randomness space has {size} states (> {limit}); use statistical mode")
    schedule = build_schedule(params)
    field = params.field
    invertibles = enumerate_full_rank(params.L, params.L, field)
    mixers = enumerate_full_rank(params.L, params.ell, field)
    dists: dict[int, Counter] = {}
    for theta in range(1, params.M + 1):
        others = [i for i in range(1, params.M + 1) if i != theta]
        counts: Counter = Counter()
        for s in invertibles:
            for ks in product(mixers, repeat=len(others)):
                state = MixState(theta, s, dict(zip(others, ks)))
                counts[coalition_view(build_queries(params, schedule, state), coalition)] += 1
        dists[theta] = counts
    return PrivacyReport(config, q, coalition, "exhaustive", dists, _max_pairwise_tv(dists), 0.0)


def _unmixed_state(params: SchemeParams, theta: int, rng: np.random.Generator) -> MixState:
    """Broken variant: the desired record skips mixing and is queried in the coordinate basis."""
    state = sample_mix_state(params, theta, rng)
    return MixState(theta, params.field.identity(params.L), state.mixing)


VARIANTS = {"scheme": sample_mix_state, "unmixed": _unmixed_state}


def trial_rng(seed: int, theta: int, trial: int) -> np.random.Generator:
    """Independent stream per (master seed, theta, trial), stable under any parallel split."""
    return np.random.default_rng([seed, theta, trial])


def _statistical_threshold(support: int, trials: int) -> float:
    return 4.0 * math.sqrt(support / trials)


def signatures_batch(views: np.ndarray, params: SchemeParams, coalition: Sequence[int]) -> list[tuple]:
    """:func:`view_signature` for a stack of full query matrices ``(trials, M L, D)``."""
    coalition = sorted(coalition)
    if not coalition:
        return [()] * len(views)
    q, L = params.q, params.L
    sub = views[:, :, _server_columns(params, coalition)]
    columns = [batch_rank(sub, q)]
    for i in range(1, params.M + 1):
        block = sub[:, (i - 1) * L:i * L, :]
        nonzero = block != 0
        columns += [
            batch_rank(block, q),
            np.count_nonzero(nonzero.any(axis=1), axis=1),
            np.count_nonzero(nonzero.sum(axis=1) == 1, axis=1),
        ]
    table = np.stack(columns, axis=1).tolist()
    return [(row[0],) + tuple(tuple(row[1 + 3 * i:4 + 3 * i]) for i in range(params.M)) for row in table]


def privacy_statistical_many(
    config: SchemeConfig,
    q: int,
    coalitions: Sequence[Sequence[int]],
    trials: int,
    seed: int | np.random.Generator,
    variant: str = "scheme",
    chunk: int = 2000,
) -> list[PrivacyReport]:
    """Sampled privacy test for several coalitions sharing one set of query draws.

    Views are reduced by :func:`view_signature`; the verdict compares the
    largest pairwise TV distance between theta-indexed empirical distributions
    against 4 sqrt(S / trials), S the observed support size.
    """
    if trials < 1000:
        raise ValueError(f"statistical mode needs at least 1000 trials, got {trials}")
    if isinstance(seed, np.random.Generator):
        seed = int(seed.integers(0, 2**63))
    params = derive_params(config, q)
    coalitions = [_check_coalition(params, c) for c in coalitions]
    schedule = build_schedule(params)
    sampler = VARIANTS[variant]
    dists = {c: {} for c in coalitions}
    for theta in range(1, params.M + 1):
        for c in coalitions:
            dists[c][theta] = Counter()
        for start in range(0, trials, chunk):
            views = np.stack([
                build_queries(params, schedule, sampler(params, theta, trial_rng(seed, theta, t))).stacked().array
                for t in range(start, min(trials, start + chunk))
            ])
            for c in coalitions:
                dists[c][theta].update(signatures_batch(views, params, c))
    reports = []
    for c in coalitions:
        report = PrivacyReport(config, q, c, "statistical", dists[c], _max_pairwise_tv(dists[c]),
                               0.0, trials, seed, variant)
        report.threshold = _statistical_threshold(report.support, trials)
        reports.append(report)
    return reports


def privacy_statistical(
    config: SchemeConfig,
    q: int,
    coalition: Sequence[int],
    trials: int,
    seed: int | np.random.Generator,
    variant: str = "scheme",
) -> PrivacyReport:
    return privacy_statistical_many(config, q, [coalition], trials, seed, variant)[0]


def coalitions_up_to(N: int, size: int) -> list[tuple[int, ...]]:
    return [c for s in range(size + 1) for c in combinations(range(1, N + 1), s)]


# ---------------------------------------------------------------- MDS

@dataclass
class MdsCheck:
    length: int
    dimension: int
    q: int
    subsets_checked: int
    failures: int

    @property
    def passed(self) -> bool:
        return self.failures == 0

    def to_text(self) -> str:
        return (
            f"mds [{self.length},{self.dimension}] over GF({self.q}): {self.subsets_checked} subsets, "
            f"{self.failures} failures -> {'PASS' if self.passed else 'FAIL'}"
        )

    def to_machine(self) -> str:
        return (
            f"mds,n={self.length},k={self.dimension},q={self.q},subsets={self.subsets_checked},"
            f"failures={self.failures},verdict={'pass' if self.passed else 'fail'}"
        )


def check_scheme_codes(params: SchemeParams, rng: np.random.Generator) -> list[MdsCheck]:
    """Exhaustive submatrix invertibility and erasure round trips for every code the scheme uses."""
    results = []
    for k, code in sorted(scheme_codes(params).items()):
        failures = 0
        subsets = 0
        info = params.field.random_matrix(3, code.dimension, rng)
        word = encode(code, info)
        for cols in combinations(range(code.length), code.dimension):
            subsets += 1
            cols = list(cols)
            if rank(code.generator[:, cols]) != code.dimension:
                failures += 1
                continue
            if erasure_decode(code, cols, word[:, cols]) != word:
                failures += 1
        results.append(MdsCheck(code.length, code.dimension, params.q, subsets, failures))
    return results
