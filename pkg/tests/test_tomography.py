"""Degeneracy chains, moments, and the full inverse engine."""

import math

import numpy as np
import pytest

import oracles
from rotortomo.angular import gauss_legendre_grid
from rotortomo.rotor import (
    DensityBlock,
    RotorKind,
    RotorSpec,
    make_test_state,
    simulate_pr,
)
from rotortomo.tomography import (
    SamplingError,
    SamplingPlan,
    default_search_cap,
    degeneracy_set,
    degeneracy_set_cd,
    moment_integral,
    pattern_function,
    probe_frequency,
    reconstruct_block,
    reconstruct_diag,
    reconstruct_offdiag,
)

RIGID = RotorSpec(kind=RotorKind.RIGID, omega=1.0)


def _spec(kind=RotorKind.RIGID, omega=1.0, k=0, m=0, d_cd=0.0, omega2=0.0):
    return RotorSpec(kind=kind, omega=omega, omega2=omega2, d_cd=d_cd, k=k, m=m)


def _simulate(block, spec, n_periods=1):
    plan = SamplingPlan.derive(spec, block.j_max, n_periods=n_periods)
    return simulate_pr(block, spec, gauss_legendre_grid(plan.n_x), plan.n_t, n_periods)


# ------------------------------------------------------------------- chains


def test_search_cap_defaults():
    assert default_search_cap(5) == 30
    assert default_search_cap(6) == 21
    assert default_search_cap(3) == 12
    assert default_search_cap(8) == 36


def test_worked_degeneracy_chains():
    assert degeneracy_set(5, 5, 0, 40).pairs() == [(5, 5), (9, 3), (29, 1)]
    assert degeneracy_set(3, 3, 0, 40).pairs() == [(3, 3), (11, 1)]
    assert degeneracy_set(1, 1, 0, 40).pairs() == [(1, 1)]


def test_chain_negative_beta_mirrors_positive():
    chain = degeneracy_set(5, -5, 0, 40)
    assert chain.pairs() == [(5, -5), (9, -3), (29, -1)]


def test_chain_splits_members_at_the_cap():
    chain = degeneracy_set(5, 5, 0, 20)
    assert chain.pairs() == [(5, 5), (9, 3)]
    assert [mem.pair for mem in chain.neglected] == [(29, 1)]


def test_chain_member_level_labels():
    mem = degeneracy_set(5, 5, 0, 40).members[1]  # (9, 3)
    assert (mem.j1, mem.j2) == (6, 3)


def test_chains_match_exhaustive_scan():
    for m_min in (0, 1, 2):
        for alpha in range(2 * m_min, 13):
            for beta in range(1, alpha + 1):
                if (alpha - beta) % 2 or (alpha - beta) // 2 < m_min:
                    continue
                got = degeneracy_set(alpha, beta, m_min, 40).pairs()
                want = oracles.degeneracy_scan(alpha, beta, m_min, 40)
                assert got == want, (alpha, beta, m_min)


def test_chains_without_parity_filter_match_scan():
    # non-zero k lifts the S == alpha (mod 2) restriction
    for alpha, beta, m_min in [(2, 2, 1), (4, 2, 1), (5, 3, 1), (6, 2, 2)]:
        got = degeneracy_set(alpha, beta, m_min, 40, parity=False).pairs()
        want = oracles.degeneracy_scan(alpha, beta, m_min, 40, parity=False)
        assert got == want
    # frozen instances: without the parity filter the (4, 2) probe gains the
    # odd-S member (9, 1); and a target whose lower level sits below the
    # channel floor drops out of its own chain entirely
    assert degeneracy_set(4, 2, 1, 40, parity=False).pairs() == [(4, 2), (9, 1)]
    assert degeneracy_set(4, 2, 1, 40, parity=True).pairs() == [(4, 2)]
    assert degeneracy_set(2, 2, 1, 40, parity=False).pairs() == [(5, 1)]


def test_chain_ordering_is_strictly_decreasing_in_dj():
    for alpha in range(1, 15):
        for beta in range(1, alpha + 1):
            if (alpha - beta) % 2:
                continue
            djs = [abs(dj) for _, dj in degeneracy_set(alpha, beta, 0, 60).pairs()]
            assert djs == sorted(set(djs), reverse=True)
            assert degeneracy_set(alpha, beta, 0, 60).pairs()[0] == (alpha, beta)


def test_cd_chains_split_rigid_degeneracies():
    spec = _spec(RotorKind.CENTRIFUGAL, d_cd=1e-3)
    tol = 2.0 * spec.omega / 64
    chain = degeneracy_set_cd(5, 5, 0, 30, spec, tol)
    assert chain.pairs() == [(5, 5)]  # (9,3) and (29,1) are detuned past tol
    wide = degeneracy_set_cd(5, 5, 0, 30, spec, math.inf)
    assert set(wide.pairs()) >= {(5, 5), (9, 3)}


def test_cd_chains_with_zero_distortion_match_rigid():
    spec = _spec(RotorKind.CENTRIFUGAL, d_cd=0.0)
    for alpha, beta in [(5, 5), (3, 3), (4, 2), (7, 1)]:
        got = degeneracy_set_cd(alpha, beta, 0, 40, spec, 1e-9).pairs()
        assert got == degeneracy_set(alpha, beta, 0, 40).pairs()


def test_cd_scan_respects_monotone_limit():
    spec = _spec(RotorKind.CENTRIFUGAL, d_cd=1e-3)  # spectrum folds past J = 21
    chain = degeneracy_set_cd(5, 5, 0, 200, spec, math.inf)
    assert all(mem.j1 <= 21 for mem in chain.members)


# ------------------------------------------------------------------- moments


def test_probe_frequency_rigid_and_exact_cd():
    assert probe_frequency(RIGID, 5, 5) == 30.0
    assert probe_frequency(RIGID, 5, -5) == -30.0
    spec = _spec(RotorKind.CENTRIFUGAL, d_cd=1e-3)
    # target pair of (5, 1) is (3, 2): probe sits on the exact level difference
    want = (12 - 1e-3 * 144) - (6 - 1e-3 * 36)
    assert probe_frequency(spec, 5, 1) == pytest.approx(want, abs=1e-15)


def test_zero_frequency_moment_is_scaled_trace():
    blk = make_test_state("random-mixed", 0, 0, 4, seed=1)
    grid = _simulate(blk, RIGID)
    moment = moment_integral(grid, 0, 0, RIGID)
    assert moment.value == pytest.approx(blk.trace() / math.sqrt(2), abs=1e-12)
    assert abs(moment.value.imag) < 1e-14


def test_moment_picks_out_single_element():
    # one coherence: I(S, dJ) = c_S(S, dJ) * rho(J1, J2)
    blk = DensityBlock.zeros(0, 0, 4)
    blk.elements[blk.index(3), blk.index(1)] = 0.2 - 0.1j
    blk.elements[blk.index(1), blk.index(3)] = 0.2 + 0.1j
    spec = RIGID
    grid = _simulate(blk, spec)
    c = spec.coefficient_table().coefficient(4, 2, 4)
    moment = moment_integral(grid, 4, 2, spec)
    assert moment.value == pytest.approx(c * (0.2 - 0.1j), abs=1e-12)
    # the conjugate probe returns the conjugate element
    conj = moment_integral(grid, 4, -2, spec)
    assert conj.value == pytest.approx(c * (0.2 + 0.1j), abs=1e-12)
    # an off-resonance probe sees nothing
    off = moment_integral(grid, 4, 4, spec)
    assert abs(off.value) < 1e-13


def test_moment_hermiticity_on_random_data():
    blk = make_test_state("random-mixed", 0, 1, 5, seed=3)
    spec = _spec(m=1)
    grid = _simulate(blk, spec)
    for alpha, beta in [(2, 2), (5, 1), (7, 3), (4, 0)]:
        plus = moment_integral(grid, alpha, beta, spec).value
        minus = moment_integral(grid, alpha, -beta, spec).value
        assert abs(plus - np.conj(minus)) < 1e-13


def test_moment_validation():
    blk = make_test_state("random-mixed", 0, 0, 3, seed=0)
    grid = _simulate(blk, RIGID)
    with pytest.raises(ValueError):
        moment_integral(grid, -1, 0, RIGID)
    with pytest.raises(ValueError):
        moment_integral(grid, 2, 3, RIGID)
    with pytest.raises(SamplingError):
        moment_integral(grid, 2 * grid.n_x + 2, 0, RIGID)  # projection too deep
    coarse = simulate_pr(blk, RIGID, grid.x_grid, n_t=3)
    with pytest.raises(SamplingError):
        moment_integral(coarse, 3, 3, RIGID)  # 12 rad/time undersampled


# ------------------------------------------------------------------ diagonal


def test_pattern_rows_match_closed_form_inverse():
    for k, m, cap in [(0, 0, 6), (0, 2, 7), (1, 1, 5)]:
        for j1 in range(max(abs(k), abs(m)), cap + 1):
            ours = pattern_function(j1, k, m, cap).coeffs
            ref = oracles.pattern_row(k, m, cap, j1)
            # the system is triangular: rows carry no weight below their own J
            for J in set(ours) | set(ref):
                assert ours.get(J, 0.0) == pytest.approx(ref.get(J, 0.0), abs=1e-10)


def test_diagonal_two_routes_agree():
    rng = np.random.default_rng(6)
    for trial in range(4):
        blk = DensityBlock.zeros(0, 0, 6)
        pops = rng.dirichlet(np.ones(7))
        blk.elements[np.arange(7), np.arange(7)] = pops
        grid = _simulate(blk, RIGID)
        direct = reconstruct_diag(grid, RIGID, 6)
        via_patterns = np.array(
            [pattern_function(j, 0, 0, 6).apply(grid) for j in range(7)]
        )
        assert np.max(np.abs(direct - pops)) < 1e-11
        assert np.max(np.abs(direct - via_patterns)) < 1e-11


def test_diagonal_recovers_nonzero_m_channel():
    spec = _spec(m=2)
    blk = make_test_state("random-mixed", 0, 2, 6, seed=8)
    grid = _simulate(blk, spec)
    got = reconstruct_diag(grid, spec, 6)
    want = np.real(np.diag(blk.elements))
    assert np.max(np.abs(got - want)) < 1e-11


def test_pattern_function_range_check():
    with pytest.raises(ValueError):
        pattern_function(0, 0, 2, 5)  # j1 below the channel floor


# -------------------------------------------------------------- off-diagonal


def test_offdiag_round_trip_rigid():
    blk = make_test_state("random-mixed", 0, 0, 5, seed=4)
    grid = _simulate(blk, RIGID)
    off = reconstruct_offdiag(grid, RIGID, 5)
    for (j1, j2), val in off.values.items():
        assert val == pytest.approx(blk.element(j1, j2), abs=1e-11)
    assert off.flags == {}


def test_offdiag_reports_deep_members_beyond_block():
    # the (5,0) element's chain passes through (9,3) = levels (6,3): outside
    # a j_max = 5 block but inside the search cap, so it is solved and reported
    blk = make_test_state("random-pure", 0, 0, 5, seed=2)
    grid = _simulate(blk, RIGID)
    off = reconstruct_offdiag(grid, RIGID, 5)
    assert (6, 3) in off.deep_values
    assert off.deep_values[(6, 3)] == pytest.approx(0.0, abs=1e-11)


def test_offdiag_flags_truncated_chains():
    blk = make_test_state("random-mixed", 0, 0, 5, seed=5)
    grid = _simulate(blk, RIGID)
    off = reconstruct_offdiag(grid, RIGID, 5, j_search_cap=20)
    assert off.flags == {(5, 0): [(29, 1)], (5, 2): [(23, 1)]}
    # deep content is zero here, so values stay exact despite the truncation
    for (j1, j2), val in off.values.items():
        assert val == pytest.approx(blk.element(j1, j2), abs=1e-11)


def test_offdiag_rejects_distorted_spectra():
    spec = _spec(RotorKind.CENTRIFUGAL, d_cd=1e-3)
    blk = make_test_state("random-mixed", 0, 0, 3, seed=0)
    grid = _simulate(blk, spec, n_periods=64)
    with pytest.raises(ValueError):
        reconstruct_offdiag(grid, spec, 3)


# ------------------------------------------------------------- sampling plans


def test_plan_numbers_for_reference_blocks():
    plan = SamplingPlan.derive(RIGID, 5)
    assert (plan.n_t, plan.n_x) == (31, 20)
    assert (plan.tau_max, plan.alpha_max, plan.search_cap) == (30, 29, 30)
    plan6 = SamplingPlan.derive(RIGID, 6)
    assert (plan6.n_t, plan6.n_x) == (43, 17)
    assert (plan6.tau_max, plan6.alpha_max, plan6.search_cap) == (42, 20, 21)
    top = _spec(RotorKind.SYMTOP, omega2=0.3, k=1, m=1)
    plan_top = SamplingPlan.derive(top, 5)
    assert (plan_top.n_t, plan_top.n_x, plan_top.alpha_max) == (29, 19, 27)


def test_plan_respects_explicit_grids_and_rejects_small_ones():
    plan = SamplingPlan.derive(RIGID, 5, n_t=50, n_x=25)
    assert (plan.n_t, plan.n_x) == (50, 25)
    with pytest.raises(SamplingError, match="n_t"):
        SamplingPlan.derive(RIGID, 5, n_t=10)
    with pytest.raises(SamplingError, match="n_x"):
        SamplingPlan.derive(RIGID, 5, n_x=5)


def test_plan_rejects_excessive_distortion():
    spec = _spec(RotorKind.CENTRIFUGAL, d_cd=2e-2)
    with pytest.raises(ValueError):
        SamplingPlan.derive(spec, 5)


# ------------------------------------------------------------ full round trips


@pytest.mark.parametrize("m", [0, 1, 2, -2])
def test_round_trip_rigid_channels(m):
    spec = _spec(m=m)
    blk = make_test_state("random-mixed", 0, m, 5, seed=10 + m)
    grid = _simulate(blk, spec)
    result = reconstruct_block(grid, spec, 5)
    assert np.max(np.abs(result.block.elements - blk.elements)) < 1e-11
    assert result.residual_inf < 1e-11
    assert result.method == "chain-back-substitution"


@pytest.mark.parametrize("k,m", [(1, 1), (-1, 2), (2, 0)])
def test_round_trip_symmetric_top_channels(k, m):
    spec = _spec(RotorKind.SYMTOP, omega2=0.4, k=k, m=m)
    blk = make_test_state("random-mixed", k, m, 5, seed=20)
    grid = _simulate(blk, spec)
    result = reconstruct_block(grid, spec, 5)
    assert np.max(np.abs(result.block.elements - blk.elements)) < 1e-11


def test_round_trip_kicked_state():
    blk = make_test_state("cos2-kicked", 0, 0, 5, kick_strength=1.5)
    grid = _simulate(blk, RIGID)
    result = reconstruct_block(grid, RIGID, 5)
    assert np.max(np.abs(result.block.elements - blk.elements)) < 1e-11


def test_round_trip_centrifugal_windowed():
    spec = _spec(RotorKind.CENTRIFUGAL, d_cd=1e-3)
    blk = make_test_state("random-mixed", 0, 0, 5, seed=12)
    grid = _simulate(blk, spec, n_periods=64)
    result = reconstruct_block(grid, spec, 5)
    assert result.method == "windowed-least-squares"
    assert np.max(np.abs(result.block.elements - blk.elements)) < 1e-8
    assert result.block.hermiticity_defect() < 1e-14


def test_centrifugal_with_zero_distortion_reproduces_rigid():
    spec0 = _spec(RotorKind.CENTRIFUGAL, d_cd=0.0)
    blk = make_test_state("random-mixed", 0, 0, 4, seed=13)
    grid = _simulate(blk, spec0, n_periods=4)
    cd = reconstruct_block(grid, spec0, 4)
    rigid_grid = simulate_pr(blk, RIGID, grid.x_grid, grid.n_t, grid.n_periods)
    rigid = reconstruct_block(rigid_grid, RIGID, 4)
    assert np.max(np.abs(cd.block.elements - rigid.block.elements)) < 1e-10


def test_reconstruction_is_linear_in_the_data():
    spec = _spec(m=1)
    a = make_test_state("random-mixed", 0, 1, 4, seed=30)
    b = make_test_state("random-pure", 0, 1, 4, seed=31)
    ga, gb = _simulate(a, spec), _simulate(b, spec)
    lam = 0.3
    mix = simulate_pr(a, spec, ga.x_grid, ga.n_t)  # reuse the grid geometry
    mix.values = lam * ga.values + (1 - lam) * gb.values
    rec_mix = reconstruct_block(mix, spec, 4).block.elements
    rec_a = reconstruct_block(ga, spec, 4).block.elements
    rec_b = reconstruct_block(gb, spec, 4).block.elements
    assert np.max(np.abs(rec_mix - lam * rec_a - (1 - lam) * rec_b)) < 1e-10


def test_reconstruct_block_channel_mismatch():
    blk = make_test_state("random-mixed", 0, 0, 3, seed=0)
    grid = _simulate(blk, RIGID)
    with pytest.raises(ValueError):
        reconstruct_block(grid, _spec(m=1), 3)


def test_reconstruct_block_psd_projection_on_noisy_data():
    from rotortomo.rotor import add_shot_noise

    blk = make_test_state("cos2-kicked", 0, 0, 3, kick_strength=1.2)
    grid = add_shot_noise(_simulate(blk, RIGID), 200_000, seed=17)
    plain = reconstruct_block(grid, RIGID, 3)
    projected = reconstruct_block(grid, RIGID, 3, psd_project=True)
    assert projected.block.min_eigenvalue() >= -1e-10
    assert projected.block.trace() == pytest.approx(plain.block.trace(), abs=1e-10)


def test_truncation_flags_propagate_to_result():
    blk = make_test_state("random-mixed", 0, 0, 5, seed=5)
    grid = _simulate(blk, RIGID)
    result = reconstruct_block(grid, RIGID, 5, j_search_cap=20)
    assert result.flags == {(5, 0): [(29, 1)], (5, 2): [(23, 1)]}
    assert np.max(np.abs(result.block.elements - blk.elements)) < 1e-11
