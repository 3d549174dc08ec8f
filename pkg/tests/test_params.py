import math
from fractions import Fraction

import pytest
import sympy
from hypothesis import given, strategies as st

from optpir.errors import InvalidConfig
from optpir.params import (
    DEFAULT_GRID,
    MACHINE_HEADER,
    SchemeConfig,
    baseline_field_bound,
    capacity,
    closed_form_alpha_beta,
    comparison_table,
    derive_params,
    field_bound,
    format_machine,
    format_table,
    optimal_subpacketization,
    privacy_margins_hold,
    solve_alpha_beta,
    undesired_count_L,
)


def sympy_alpha_beta(N, T, M):
    """Independent oracle: solve the linear system for alpha, beta directly."""
    d = math.gcd(N, T)
    n, t = N // d, T // d
    a = sympy.symbols(f"a1:{M + 1}")
    b = sympy.symbols(f"b1:{M + 1}")
    eqs = []
    for k in range(M - 1):
        eqs.append(sympy.Eq(T * a[k + 1], (N - T) * b[k]))
        eqs.append(sympy.Eq(a[k] + a[k + 1], b[k] + b[k + 1]))
    for k in range(1, M + 1):
        eqs.append(sympy.Eq(T * a[k - 1] + (N - T) * b[k - 1], d * (n - t) ** (k - 1) * t ** (M - k)))
    eqs.append(sympy.Eq(b[0], 0) if N >= 2 * T else sympy.Eq(a[M - 1], 0))
    sol = sympy.solve(eqs, a + b, dict=True)
    assert len(sol) == 1
    return tuple(int(sol[0][x]) for x in a), tuple(int(sol[0][x]) for x in b)


configs = st.integers(2, 8).flatmap(
    lambda N: st.tuples(st.just(N), st.integers(1, N - 1), st.integers(2, 5))
)


@pytest.mark.parametrize("config,alpha,beta,L,D,ell", [
    ((3, 2, 2), (1, 0), (0, 1), 3, 5, 2),
    ((3, 2, 3), (1, 1, 0), (2, 0, 1), 9, 19, 6),
    ((2, 1, 2), (1, 0), (0, 1), 2, 3, 1),
])
def test_worked_examples(config, alpha, beta, L, D, ell):
    p = derive_params(SchemeConfig(*config))
    assert (p.alpha, p.beta, p.L, p.D, p.ell) == (alpha, beta, L, D, ell)


def test_answer_counts_3_2_2():
    p = derive_params(SchemeConfig(3, 2, 2))
    assert (p.gamma_a, p.gamma_b) == (2, 1)
    assert [p.gamma(j) for j in (1, 2, 3)] == [2, 2, 1]


def test_2_1_2_matches_hand_recursion():
    # alpha_1 = t^(M-2) = 1, beta_1 = 0; T alpha_2 = (N-T) beta_1 -> 0; beta_2 = alpha_1 + alpha_2 - beta_1 = 1
    assert solve_alpha_beta(SchemeConfig(2, 1, 2)) == ((1, 0), (0, 1))


@pytest.mark.parametrize("config", DEFAULT_GRID)
def test_grid_matches_linear_system_oracle(config):
    assert solve_alpha_beta(SchemeConfig(*config)) == sympy_alpha_beta(*config)


@given(configs)
def test_recursion_matches_closed_form_and_oracle(cfg):
    config = SchemeConfig(*cfg)
    alpha, beta = solve_alpha_beta(config)
    ca, cb = closed_form_alpha_beta(config)
    assert ca == alpha and cb == beta
    if cfg[0] <= 6 and cfg[2] <= 4:
        assert (alpha, beta) == sympy_alpha_beta(*cfg)


@given(configs)
def test_invariants(cfg):
    config = SchemeConfig(*cfg)
    p = derive_params(config)
    N, T, M = cfg
    assert all(a >= 0 for a in p.alpha) and all(b >= 0 for b in p.beta)
    assert p.L == optimal_subpacketization(config) == p.d * p.n ** (M - 1)
    assert p.rate == capacity(config)
    assert Fraction(p.D, p.L) == sum(Fraction(T, N) ** i for i in range(M))
    assert p.ell == T * p.n ** (M - 2)
    assert undesired_count_L(p) == p.L
    assert privacy_margins_hold(p)
    assert T * p.gamma_a + (N - T) * p.gamma_b == p.D
    assert sympy.isprime(p.q_min) and p.q_min >= field_bound(config)
    if p.q_min > 2:
        assert sympy.prevprime(p.q_min) < field_bound(config)
    for k in range(1, M):
        assert p.code_length(k) * T == N * p.codeword_dim(k)
        assert p.code_length(k) <= field_bound(config)
    assert field_bound(config) * N * p.d ** (M - 2) == baseline_field_bound(config)


def test_capacity_values():
    assert capacity(SchemeConfig(3, 2, 2)) == Fraction(3, 5)
    assert capacity(SchemeConfig(3, 2, 3)) == Fraction(9, 19)
    assert capacity(SchemeConfig(2, 1, 2)) == Fraction(2, 3)
    assert capacity((5, 3, 1)) == 1
    with pytest.raises(InvalidConfig):
        capacity((3, 3, 2))


def test_subpacketization_examples():
    assert optimal_subpacketization(SchemeConfig(3, 2, 2)) == 3
    assert optimal_subpacketization(SchemeConfig(3, 2, 3)) == 9
    assert optimal_subpacketization(SchemeConfig(4, 2, 3)) == 8


def test_comparison_rows():
    (r,) = comparison_table([SchemeConfig(3, 2, 3)])
    assert (r.L, r.L_baseline, r.L_ratio) == (9, 27, Fraction(1, 3))
    assert (r.q_min, r.q_bound, r.q_bound_baseline, r.q_ratio) == (7, 6, 18, Fraction(1, 3))
    (s,) = comparison_table([SchemeConfig(2, 1, 2)])
    assert (s.q_min, s.q_bound_baseline) == (2, 4)


def test_table_formats():
    rows = comparison_table([SchemeConfig(*c) for c in DEFAULT_GRID])
    machine = format_machine(rows).splitlines()
    assert machine[0] == "# " + MACHINE_HEADER
    assert machine[3] == "3,2,3,9,19,9/19,7,6,27,18,1/3,1/3"
    assert len(machine) == len(DEFAULT_GRID) + 1
    human = format_table(rows).splitlines()
    assert len({len(line) for line in human}) == 1


@pytest.mark.parametrize("args", [(2, 2, 2), (3, 0, 2), (3, 4, 2), (3, 2, 1)])
def test_invalid_configs(args):
    with pytest.raises(InvalidConfig):
        SchemeConfig(*args)


def test_q_override():
    assert derive_params(SchemeConfig(3, 2, 3), 11).q == 11
    with pytest.raises(InvalidConfig):
        derive_params(SchemeConfig(3, 2, 3), 5)
    with pytest.raises(InvalidConfig):
        derive_params(SchemeConfig(3, 2, 3), 9)


def test_one_based_accessors():
    p = derive_params(SchemeConfig(3, 2, 3))
    assert [p.alpha_k(k) for k in (1, 2, 3)] == [1, 1, 0]
    assert [p.beta_k(k) for k in (1, 2, 3)] == [2, 0, 1]
    assert [p.sums_per_type(1, k) for k in (1, 2, 3)] == [1, 1, 0]
    assert [p.sums_per_type(3, k) for k in (1, 2, 3)] == [2, 0, 1]
    assert (p.gamma(1), p.gamma(3)) == (6, 7)
