"""Query generation, server answers and decoding.

Conventions: servers, records, ``theta`` and repetition indices ``h`` are
1-based; symbol coordinates of a record (``Slot.symbol_index`` values) are
0-based because they index matrix columns directly.

A user retrieving record ``theta`` transforms every record into L symbols,
``U_i = W_i E_i``. The desired record uses an invertible ``E = S_theta``; each
other record uses ``E_i = K_i G_i`` where ``K_i`` is a random full-rank
``L x ell`` mixing matrix and ``G_i`` places ell fresh symbols and their
Reed-Solomon parities on the coordinates fixed by the schedule. Server j then
receives the matrix whose columns are the k-sums assigned to it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from functools import lru_cache
from itertools import combinations
from types import MappingProxyType
from typing import Mapping, Sequence

import numpy as np

from .errors import ShapeError
from .field import FieldMatrix, PrimeField, block_diag, invert, mat_mul, sample_full_rank, vstack
from .mds import SystematicMdsCode, make_code
from .params import SchemeParams


def canonical_subsets(M: int) -> list[tuple[int, ...]]:
    """Non-empty subsets of {1..M}, ordered by size then lexicographically."""
    return [lam for k in range(1, M + 1) for lam in combinations(range(1, M + 1), k)]


@dataclass(frozen=True, eq=False)
class Slot:
    server: int
    k: int
    lam: tuple[int, ...]
    h: int
    column: int
    symbol_index: Mapping[int, int]

    def __repr__(self) -> str:
        return f"Slot(server={self.server}, lam={set(self.lam)}, h={self.h})"


@dataclass(frozen=True, eq=False)
class Schedule:
    params: SchemeParams
    slots: tuple[Slot, ...]
    per_server: tuple[tuple[Slot, ...], ...]
    by_type: Mapping[tuple[int, ...], tuple[Slot, ...]]
    # placement[j][nu] = (columns of server j+1 touching record nu, matching coordinates of U_nu)
    placement: tuple[Mapping[int, tuple[np.ndarray, np.ndarray]], ...] = dc_field(repr=False)

    def server_slots(self, server: int) -> tuple[Slot, ...]:
        return self.per_server[server - 1]


def build_schedule(params: SchemeParams) -> Schedule:
    """Lay out every k-sum of the combining step; never looks at theta.

    Slots run over k ascending, Lambda in canonical order, server, then h.
    Each record's coordinates are consumed in that order.
    """
    M, N = params.M, params.N
    counters = {nu: 0 for nu in range(1, M + 1)}
    columns = [0] * N
    slots: list[Slot] = []
    by_type: dict[tuple[int, ...], tuple[Slot, ...]] = {}
    for lam in canonical_subsets(M):
        k = len(lam)
        group = []
        for server in range(1, N + 1):
            for h in range(1, params.sums_per_type(server, k) + 1):
                sym = {}
                for nu in lam:
                    sym[nu] = counters[nu]
                    counters[nu] += 1
                slot = Slot(server, k, lam, h, columns[server - 1], MappingProxyType(sym))
                columns[server - 1] += 1
                group.append(slot)
        by_type[lam] = tuple(group)
        slots.extend(group)

    per_server = tuple(tuple(s for s in slots if s.server == j) for j in range(1, N + 1))
    placement = []
    for j in range(N):
        place = {}
        for nu in range(1, M + 1):
            touching = [s for s in per_server[j] if nu in s.lam]
            place[nu] = (
                np.array([s.column for s in touching], dtype=np.intp),
                np.array([s.symbol_index[nu] for s in touching], dtype=np.intp),
            )
        placement.append(MappingProxyType(place))
    return Schedule(params, tuple(slots), per_server, MappingProxyType(by_type), tuple(placement))


@dataclass(frozen=True)
class ExpansionBlock:
    """One MDS codeword of an undesired record: a type Lambda not containing theta."""

    lam: tuple[int, ...]
    k: int
    offset: int
    dim: int
    info_coords: tuple[int, ...]
    parity_coords: tuple[int, ...]


def expansion_blocks(schedule: Schedule, theta: int, i: int) -> list[ExpansionBlock]:
    """Codewords of record ``i`` in canonical Lambda order, with mixing-column offsets.

    Information coordinates are U_i's symbols in the Lambda-type slots; parity
    coordinates are U_i's symbols in the (Lambda + theta)-type slots, both in
    (server, h) order.
    """
    blocks = []
    offset = 0
    for lam, group in schedule.by_type.items():
        if i not in lam or theta in lam:
            continue
        mixed = tuple(sorted(lam + (theta,)))
        info = tuple(s.symbol_index[i] for s in group)
        parity = tuple(s.symbol_index[i] for s in schedule.by_type[mixed])
        blocks.append(ExpansionBlock(lam, len(lam), offset, len(info), info, parity))
        offset += len(info)
    return blocks


@lru_cache(maxsize=64)
def scheme_codes(params: SchemeParams) -> Mapping[int, SystematicMdsCode]:
    """The public code for each sum order k < M: length (N/T)dim, dimension dim."""
    field = params.field
    return MappingProxyType({
        k: make_code(params.code_length(k), params.codeword_dim(k), field)
        for k in range(1, params.M)
    })


@dataclass(frozen=True, eq=False)
class MixState:
    """The user's private randomness for one retrieval."""

    theta: int
    s_theta: FieldMatrix
    mixing: Mapping[int, FieldMatrix]


@dataclass(frozen=True, eq=False)
class QuerySet:
    theta: int
    matrices: tuple[FieldMatrix, ...]
    mix_state: MixState

    def for_server(self, server: int) -> FieldMatrix:
        return self.matrices[server - 1]

    def stacked(self, servers: Sequence[int] | None = None) -> FieldMatrix:
        """Column-concatenated queries of the given servers (all by default), ``M L x sum gamma``."""
        servers = range(1, len(self.matrices) + 1) if servers is None else sorted(servers)
        field = self.matrices[0].field
        if not servers:
            return FieldMatrix._raw(field, np.zeros((self.matrices[0].rows, 0), dtype=field.dtype))
        return FieldMatrix._raw(field, np.hstack([self.matrices[j - 1].array for j in servers]))


@dataclass(frozen=True, eq=False)
class Database:
    field: PrimeField
    records: tuple[FieldMatrix, ...]

    def __post_init__(self) -> None:
        if not self.records:
            raise ShapeError("database needs at least one record")
        shape = self.records[0].shape
        for r in self.records:
            if r.field != self.field or r.shape != shape:
                raise ShapeError("all records must share field and shape")
        if shape[0] == 0 or shape[1] == 0:
            raise ShapeError(f"records must be non-empty, got shape {shape}")

    @property
    def M(self) -> int:
        return len(self.records)

    @property
    def L(self) -> int:
        return self.records[0].rows

    @property
    def stripes(self) -> int:
        return self.records[0].cols

    @property
    def stacked(self) -> FieldMatrix:
        return vstack(self.records)

    def record(self, index: int) -> FieldMatrix:
        return self.records[index - 1]

    @classmethod
    def random(cls, field: PrimeField, M: int, L: int, stripes: int, rng: np.random.Generator) -> Database:
        return cls(field, tuple(field.random_matrix(L, stripes, rng) for _ in range(M)))

    @classmethod
    def from_symbols(cls, field: PrimeField, L: int, records: Sequence[Sequence[int]]) -> Database:
        """Split each flat record into stripes of L symbols (stripe s is column s)."""
        mats = []
        for rec in records:
            if len(rec) == 0 or len(rec) % L:
                raise ShapeError(f"record length {len(rec)} is not a positive multiple of L = {L}")
            arr = np.array([int(x) for x in rec], dtype=object).reshape(-1, L).T
            mats.append(field.matrix(arr))
        return cls(field, tuple(mats))

    def check_params(self, params: SchemeParams) -> None:
        if self.M != params.M or self.L != params.L or self.field.q != params.q:
            raise ShapeError(
                f"database (M={self.M}, L={self.L}, q={self.field.q}) does not match "
                f"scheme (M={params.M}, L={params.L}, q={params.q})"
            )


def _check_theta(params: SchemeParams, theta: int) -> None:
    if not isinstance(theta, (int, np.integer)) or not 1 <= theta <= params.M:
        raise IndexError(f"theta must lie in 1..{params.M}, got {theta!r}")


def sample_mix_state(params: SchemeParams, theta: int, rng: np.random.Generator) -> MixState:
    """Draw S_theta uniformly from GL(L, q) and an L x ell full-rank K_i per other record."""
    _check_theta(params, theta)
    field = params.field
    s = sample_full_rank(params.L, params.L, field, rng)
    mixing = {
        i: sample_full_rank(params.L, params.ell, field, rng)
        for i in range(1, params.M + 1) if i != theta
    }
    return MixState(theta, s, MappingProxyType(mixing))


def record_transform(params: SchemeParams, schedule: Schedule, mix_state: MixState, i: int) -> FieldMatrix:
    """The L x L matrix E_i with U_i = W_i E_i, built slot by slot."""
    theta = mix_state.theta
    if i == theta:
        return mix_state.s_theta
    field = params.field
    k_mix = mix_state.mixing[i]
    out = np.zeros((params.L, params.L), dtype=field.dtype)
    codes = scheme_codes(params)
    for blk in expansion_blocks(schedule, theta, i):
        cols = k_mix[:, list(range(blk.offset, blk.offset + blk.dim))]
        out[:, list(blk.info_coords)] = cols.array
        out[:, list(blk.parity_coords)] = mat_mul(cols, codes[blk.k].parity).array
    return FieldMatrix._raw(field, out)


def build_queries(params: SchemeParams, schedule: Schedule, mix_state: MixState) -> QuerySet:
    """Assemble each server's ``M L x gamma_j`` query from the private randomness."""
    theta = mix_state.theta
    _check_theta(params, theta)
    field = params.field
    L, M = params.L, params.M
    transforms = {i: record_transform(params, schedule, mix_state, i).array for i in range(1, M + 1)}
    matrices = []
    for j in range(params.N):
        q = np.zeros((M * L, len(schedule.per_server[j])), dtype=field.dtype)
        for nu, (cols, syms) in schedule.placement[j].items():
            if cols.size:
                q[(nu - 1) * L:nu * L, cols] = transforms[nu][:, syms]
        matrices.append(FieldMatrix._raw(field, q))
    return QuerySet(theta, tuple(matrices), mix_state)


def generate_queries(params: SchemeParams, schedule: Schedule, theta: int, rng: np.random.Generator) -> QuerySet:
    return build_queries(params, schedule, sample_mix_state(params, theta, rng))


def answer(db: Database, server_matrix: FieldMatrix) -> FieldMatrix:
    """Server response: one symbol per query column and stripe (``gamma x b``).

    Depends only on the received matrix and the stored records.
    """
    if server_matrix.rows != db.M * db.L:
        raise ShapeError(f"query has {server_matrix.rows} rows, database needs {db.M * db.L}")
    if server_matrix.field != db.field:
        raise ShapeError(f"query over {server_matrix.field!r}, database over {db.field!r}")
    return mat_mul(server_matrix.T, db.stacked)


def decode(
    params: SchemeParams,
    schedule: Schedule,
    theta: int,
    mix_state: MixState,
    answers: Sequence[FieldMatrix],
) -> FieldMatrix:
    """Recover record ``theta`` (L x b) from all N answers."""
    _check_theta(params, theta)
    if mix_state.theta != theta:
        raise ValueError(f"mix state was drawn for theta = {mix_state.theta}, not {theta}")
    if len(answers) != params.N:
        raise ShapeError(f"need answers from all {params.N} servers, got {len(answers)}")
    b = answers[0].cols
    for j, a in enumerate(answers, start=1):
        if a.shape != (params.gamma(j), b):
            raise ShapeError(f"server {j} answer has shape {a.shape}, expected {(params.gamma(j), b)}")
    field = params.field
    q = field.q
    received = [a.array for a in answers]

    def rows_of(slots: Sequence[Slot]) -> np.ndarray:
        if not slots:
            return np.zeros((0, b), dtype=field.dtype)
        return np.vstack([received[s.server - 1][s.column] for s in slots])

    u_theta = np.zeros((params.L, b), dtype=field.dtype)
    direct = schedule.by_type[(theta,)]
    u_theta[[s.symbol_index[theta] for s in direct]] = rows_of(direct)

    codes = scheme_codes(params)
    for lam, group in schedule.by_type.items():
        if theta in lam:
            continue
        mixed = schedule.by_type[tuple(sorted(lam + (theta,)))]
        info = FieldMatrix._raw(field, rows_of(group))
        predicted = mat_mul(codes[len(lam)].parity.T, info).array
        u_theta[[s.symbol_index[theta] for s in mixed]] = (rows_of(mixed) - predicted) % q

    s_inv_t = invert(mix_state.s_theta).T
    return mat_mul(s_inv_t, FieldMatrix._raw(field, u_theta))


def materialize_expanded_generator(params: SchemeParams, schedule: Schedule, i: int, theta: int) -> FieldMatrix:
    """The ell x L generator G with U_i = (mixed symbols) G for undesired record i.

    Built as the block-diagonal stack of full systematic generators, one per
    type in canonical order, followed by the column permutation that maps each
    codeword's (information, parity) coordinates onto the schedule's positions.
    """
    _check_theta(params, theta)
    if i == theta:
        raise IndexError("the desired record has no expansion generator")
    _check_theta(params, i)
    codes = scheme_codes(params)
    gens, order = [], []
    for lam in canonical_subsets(params.M):
        if i not in lam or theta in lam:
            continue
        gens.append(codes[len(lam)].generator)
        mixed = tuple(sorted(lam + (theta,)))
        order += [s.symbol_index[i] for s in schedule.by_type[lam]]
        order += [s.symbol_index[i] for s in schedule.by_type[mixed]]
    g_tilde = block_diag(gens)
    if sorted(order) != list(range(params.L)):
        raise AssertionError("expansion coordinates do not partition the record")
    out = np.zeros((g_tilde.rows, params.L), dtype=params.field.dtype)
    out[:, order] = g_tilde.array
    return FieldMatrix._raw(params.field, out)


def retrieve_local(
    db: Database,
    params: SchemeParams,
    theta: int,
    rng: np.random.Generator,
    schedule: Schedule | None = None,
) -> FieldMatrix:
    """Full in-process retrieval: queries, all N answers, decoding."""
    db.check_params(params)
    schedule = schedule or build_schedule(params)
    qs = generate_queries(params, schedule, theta, rng)
    answers = [answer(db, m) for m in qs.matrices]
    return decode(params, schedule, theta, qs.mix_state, answers)
