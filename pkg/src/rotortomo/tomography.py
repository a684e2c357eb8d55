"""Inverse engine: moment integrals, degeneracy chains, and block reconstruction.

The data Pr(x, t) is linear in the density block: projecting onto the
normalized Legendre polynomial P~_alpha and Fourier-probing at the
interference frequency of a level pair isolates a small set of elements.
For the rigid (and symmetric-top) spectrum the frequency of the pair
(J1, J2) is omega * DJ * (S + 1) with S = J1 + J2 and DJ = J1 - J2, so
distinct pairs collide exactly when DJ * (S + 1) matches; those collisions
form finite chains resolved by back substitution, deepest member first.
Centrifugal distortion detunes the collisions but makes frequencies
incommensurate with the sampling window, so that path solves one linear
system whose matrix carries the exact finite-window Fourier kernel of every
(probe, element) pair instead of assuming Kronecker deltas.

Throughout, pairs are labeled (S, DJ) = (J1+J2, J1-J2); a probe (alpha,
beta) targets the element with S = alpha, DJ = beta, and only beta >= 0
moments are ever evaluated (beta < 0 follows by conjugation of real data).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .angular import assoc_legendre_norm, coefficient_table
from .rotor import (
    DensityBlock,
    MeasurementGrid,
    RotorKind,
    RotorSpec,
    bohr_frequency,
    check_distortion_range,
    monotone_j_limit,
    reference_period,
    simulate_pr,
)


class SamplingError(ValueError):
    """A grid violates a named sampling requirement of the reconstruction."""


@dataclass(frozen=True)
class MomentValue:
    """One probed moment: Legendre order alpha, pair offset beta, probe frequency."""

    alpha: int
    beta: int
    omega: float
    value: complex


@dataclass(frozen=True)
class ChainMember:
    """A level pair in sum/difference labels: S = J1 + J2, DJ = J1 - J2."""

    j_sum: int
    delta_j: int

    @property
    def j1(self) -> int:
        return (self.j_sum + self.delta_j) // 2

    @property
    def j2(self) -> int:
        return (self.j_sum - self.delta_j) // 2

    @property
    def pair(self) -> tuple[int, int]:
        return (self.j_sum, self.delta_j)


@dataclass
class DegeneracyChain:
    """All pairs sharing one probe's frequency, by decreasing |DJ|.

    ``members`` are within the search cap; ``neglected`` lists pairs that
    satisfy every frequency/parity condition but lie beyond it, i.e. the
    contributions the back substitution cannot subtract.
    """

    target: int
    members: list[ChainMember]
    neglected: list[ChainMember]

    def pairs(self) -> list[tuple[int, int]]:
        return [mem.pair for mem in self.members]


def default_search_cap(j_max: int) -> int:
    """Chain search horizon on S = J1 + J2: j_max(j_max+1), halved for even j_max."""
    n = j_max * (j_max + 1)
    return n // 2 if j_max % 2 == 0 else n


def degeneracy_set(
    alpha: int, beta: int, m_km: int, j_search_cap: int, parity: bool = True
) -> DegeneracyChain:
    """Enumerate the pairs degenerate with the probe (alpha, beta) of a rigid spectrum.

    A pair (S, DJ) shares the probe frequency iff DJ*(S+1) = beta*(alpha+1)
    with the sign of beta, and contributes to the alpha-projection only if
    its decomposition coefficient at order alpha survives: |DJ| <= |beta|,
    both levels exist (J2 = (S-|DJ|)/2 >= m_km), and -- with ``parity``
    set, the k = 0 selection rule -- S and DJ share alpha's parity.  Blocks
    with k != 0 have no such rule and must pass ``parity=False``, which
    keeps every integer pair on the frequency.  Divisor enumeration of the
    target integer walks |DJ| downward, so members come out in strictly
    decreasing |DJ| with the probe's own pair first.
    """
    if beta == 0:
        raise ValueError("beta must be non-zero; the diagonal is handled separately")
    if (alpha - beta) % 2:
        raise ValueError(f"beta = {beta} must share the parity of alpha = {alpha}")
    target = beta * (alpha + 1)
    sign = 1 if beta > 0 else -1
    members: list[ChainMember] = []
    neglected: list[ChainMember] = []
    for dj in range(abs(beta), 0, -1):
        if parity and (alpha - dj) % 2:
            continue
        if abs(target) % dj:
            continue
        j_sum = abs(target) // dj - 1
        if (j_sum - dj) % 2 or dj > j_sum:
            continue
        if parity and (j_sum - alpha) % 2:
            continue
        if (j_sum - dj) // 2 < m_km:
            continue
        mem = ChainMember(j_sum=j_sum, delta_j=sign * dj)
        (members if j_sum <= j_search_cap else neglected).append(mem)
    return DegeneracyChain(target=target, members=members, neglected=neglected)


def degeneracy_set_cd(
    alpha: int,
    beta: int,
    m_km: int,
    j_search_cap: int,
    spec: RotorSpec,
    freq_tolerance: float,
) -> DegeneracyChain:
    """Near-degenerate pairs of a centrifugally distorted spectrum.

    Same admissibility conditions as :func:`degeneracy_set`, but pairs are
    kept when their exact level-difference frequency falls within
    ``freq_tolerance`` of the probe pair's, instead of matching the rigid
    integer condition.  The scan stops at the search cap and at the J where
    the distorted spectrum stops increasing.  With d_cd = 0 the output
    reduces to the rigid chain.
    """
    if beta == 0:
        raise ValueError("beta must be non-zero; the diagonal is handled separately")
    if (alpha - beta) % 2:
        raise ValueError(f"beta = {beta} must share the parity of alpha = {alpha}")
    if freq_tolerance < 0:
        raise ValueError(f"freq_tolerance must be non-negative, got {freq_tolerance}")
    j1_t, j2_t = (alpha + beta) // 2, (alpha - beta) // 2
    if j2_t < m_km:
        raise ValueError(f"probe pair ({j1_t},{j2_t}) has no level below J = {m_km}")
    omega0 = bohr_frequency(spec, j1_t, j2_t) if beta > 0 else bohr_frequency(spec, j2_t, j1_t)
    sign = 1 if beta > 0 else -1
    j1_cap = min(j_search_cap, monotone_j_limit(spec))
    found: list[ChainMember] = []
    for dj in range(abs(beta), 0, -1):
        if (alpha - dj) % 2:
            continue
        for j2 in range(m_km, (j_search_cap - dj) // 2 + 1):
            j1 = j2 + dj
            if j1 > j1_cap or j1 + j2 < alpha:
                continue
            if (j1 + j2 - alpha) % 2:
                continue
            omega = bohr_frequency(spec, j1, j2) if sign > 0 else bohr_frequency(spec, j2, j1)
            if abs(omega - omega0) <= freq_tolerance:
                found.append(ChainMember(j_sum=j1 + j2, delta_j=sign * dj))
    target = beta * (alpha + 1)
    return DegeneracyChain(target=target, members=found, neglected=[])


def probe_frequency(spec: RotorSpec, alpha: int, beta: int) -> float:
    """Frequency probed by the (alpha, beta) moment.

    For rigid and symmetric-top spectra this is omega * beta * (alpha + 1).
    For the centrifugal kind it is the exact level difference
    E(J1) - E(J2) of the target pair J1 = (alpha+beta)/2, J2 = (alpha-beta)/2
    -- the quadratic distortion term depends on J1(J1+1) + J2(J2+1), not on
    beta*(alpha+1) alone, so no formula in (alpha, beta) alone reproduces it.
    """
    if beta == 0:
        return 0.0
    if (alpha - beta) % 2:
        raise ValueError(f"beta = {beta} must share the parity of alpha = {alpha}")
    if spec.kind is RotorKind.CENTRIFUGAL:
        j1, j2 = (alpha + beta) // 2, (alpha - beta) // 2
        lo = min(j1, j2)
        if lo < spec.m_min:
            raise ValueError(
                f"probe pair ({j1},{j2}) has no level below J = {spec.m_min}"
            )
        return bohr_frequency(spec, j1, j2)
    return spec.omega * beta * (alpha + 1)


def moment_integral(grid: MeasurementGrid, alpha: int, beta: int, spec: RotorSpec) -> MomentValue:
    """Project the data onto P~_alpha and Fourier-probe the (alpha, beta) frequency.

    Returns (1/N_t) sum_t exp(+i omega t) * integral P~_alpha(x) Pr(x, t) dx,
    which for exact sampling equals the coefficient-weighted sum of the
    degenerate elements.
    """
    if alpha < 0:
        raise ValueError(f"alpha must be non-negative, got {alpha}")
    if abs(beta) > alpha:
        raise ValueError(f"|beta| = {abs(beta)} exceeds alpha = {alpha}")
    omega = probe_frequency(spec, alpha, beta)
    if 2 * grid.n_x - 1 < alpha:
        raise SamplingError(
            f"n_x = {grid.n_x} cannot represent the order-{alpha} projection: "
            f"need n_x >= {(alpha + 1 + 1) // 2}"
        )
    if abs(omega) * grid.dt > np.pi:
        needed = math.ceil(abs(omega) * grid.n_periods * grid.period / np.pi)
        raise SamplingError(
            f"n_t = {grid.n_t} undersamples the probe frequency {omega:.6g} "
            f"(alpha={alpha}, beta={beta}): need n_t >= {needed}"
        )
    poly = assoc_legendre_norm(alpha, 0, grid.x_grid.nodes)
    y = grid.values @ (grid.x_grid.weights * poly)
    phases = np.exp(1j * omega * grid.times)
    value = complex(phases @ y) / grid.n_t
    return MomentValue(alpha=alpha, beta=beta, omega=omega, value=value)


@dataclass(frozen=True)
class PatternFunction:
    """Projection function extracting one diagonal element directly.

    The diagonal system I(2J', 0) = sum_J M[J', J] rho_JJ is upper
    triangular; ``coeffs`` is the j1-th row of its inverse, so
    rho(j1, j1) = sum_J coeffs[J] * I(2J, 0).  Equivalently the data-domain
    function F(x) = sum_J coeffs[J] * P~_{2J}(x) time-averaged against
    Pr(x, t) yields the element in one pass.
    """

    j1: int
    k: int
    m: int
    j_cap: int
    coeffs: dict[int, float]

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for J, c in self.coeffs.items():
            out += c * assoc_legendre_norm(2 * J, 0, x)
        return out

    def apply(self, grid: MeasurementGrid) -> float:
        f = self.evaluate(grid.x_grid.nodes)
        per_time = grid.values @ (grid.x_grid.weights * f)
        return float(np.mean(per_time))


def _diag_system(k: int, m: int, j_cap: int) -> np.ndarray:
    """Upper-triangular matrix M[a, j] = C(2*(M+j), 0, 2*(M+a))."""
    table = coefficient_table(k, m)
    m_min = max(abs(k), abs(m))
    n = j_cap - m_min + 1
    mat = np.zeros((n, n))
    for a in range(n):
        for j in range(a, n):
            mat[a, j] = table.coefficient(2 * (m_min + j), 0, 2 * (m_min + a))
    return mat


def pattern_function(j1: int, k: int, m: int, j_cap: int) -> PatternFunction:
    m_min = max(abs(k), abs(m))
    if not m_min <= j1 <= j_cap:
        raise ValueError(f"j1 = {j1} outside the reconstructible range {m_min}..{j_cap}")
    mat = _diag_system(k, m, j_cap)
    n = mat.shape[0]
    e = np.zeros(n)
    idx = j1 - m_min
    e[idx] = 1.0
    row = scipy.linalg.solve_triangular(mat.T, e, lower=True)
    coeffs = {m_min + j: float(row[j]) for j in range(idx, n)}
    return PatternFunction(j1=j1, k=k, m=m, j_cap=j_cap, coeffs=coeffs)


def reconstruct_diag(grid: MeasurementGrid, spec: RotorSpec, j_max: int) -> np.ndarray:
    """Diagonal of the block from zero-frequency moments, by backward substitution.

    Probes I(alpha, 0) for alpha = 2*M .. 2*j_max; the system truncates at
    j_max, i.e. population beyond the requested block is assumed absent.
    """
    m_min = spec.m_min
    if j_max < m_min:
        raise ValueError(f"j_max = {j_max} below channel minimum {m_min}")
    mat = _diag_system(spec.k, spec.m, j_max)
    n = mat.shape[0]
    b = np.empty(n)
    for a in range(n):
        b[a] = moment_integral(grid, 2 * (m_min + a), 0, spec).value.real
    diag = np.zeros(n)
    for a in range(n - 1, -1, -1):
        if abs(mat[a, a]) < 1e-13:
            raise ValueError(
                f"stretched diagonal coefficient vanished at alpha = {2 * (m_min + a)}"
            )
        diag[a] = (b[a] - mat[a, a + 1:] @ diag[a + 1:]) / mat[a, a]
    return diag


@dataclass
class OffdiagResult:
    """Upper-triangle values plus, for each element, its chain and truncation marks."""

    values: dict[tuple[int, int], complex]
    chains: dict[tuple[int, int], list[tuple[int, int]]]
    flags: dict[tuple[int, int], list[tuple[int, int]]]
    deep_values: dict[tuple[int, int], complex]


def reconstruct_offdiag(
    grid: MeasurementGrid,
    spec: RotorSpec,
    j_max: int,
    j_search_cap: int | None = None,
) -> OffdiagResult:
    """Off-diagonal elements by chain back substitution (rigid / symmetric top).

    Every pair appearing in any chain of a block element -- including pairs
    beyond the block -- is probed at its own stretched moment and solved in
    order of increasing |DJ|, so each probe's deeper partners are already
    known when it is divided by its stretched coefficient.  Elements whose
    chains reach past the search cap are flagged with the neglected pairs,
    whose (unsubtracted) contribution is whatever the data actually holds
    there.
    """
    if spec.kind is RotorKind.CENTRIFUGAL and spec.d_cd != 0.0:
        raise ValueError("chain back substitution assumes a rigid spectrum; "
                         "use reconstruct_block for centrifugal data")
    m_min = spec.m_min
    cap = default_search_cap(j_max) if j_search_cap is None else j_search_cap
    table = spec.coefficient_table()

    block_pairs = [
        (j1 + j2, j1 - j2)
        for j2 in range(m_min, j_max + 1)
        for j1 in range(j2 + 1, j_max + 1)
    ]
    parity = spec.k == 0
    chains: dict[tuple[int, int], DegeneracyChain] = {}
    todo = list(block_pairs)
    while todo:
        pair = todo.pop()
        if pair in chains:
            continue
        chain = degeneracy_set(pair[0], pair[1], m_min, cap, parity=parity)
        chains[pair] = chain
        for mem in chain.members:
            if mem.pair != pair and mem.pair not in chains:
                todo.append(mem.pair)

    solved: dict[tuple[int, int], complex] = {}
    neglect: dict[tuple[int, int], list[tuple[int, int]]] = {}
    for pair in sorted(chains, key=lambda p: (p[1], p[0])):
        chain = chains[pair]
        s, dj = pair
        moment = moment_integral(grid, s, dj, spec)
        acc = moment.value
        marks = [mem.pair for mem in chain.neglected]
        for mem in chain.members:
            if mem.pair == pair:
                continue
            acc -= table.coefficient(mem.j_sum, mem.delta_j, s) * solved[mem.pair]
            marks.extend(neglect[mem.pair])
        stretched = table.coefficient(s, dj, s)
        solved[pair] = acc / stretched
        # dedupe while keeping deterministic order
        neglect[pair] = sorted(set(marks), key=lambda p: (-p[1], p[0]))

    values: dict[tuple[int, int], complex] = {}
    out_chains: dict[tuple[int, int], list[tuple[int, int]]] = {}
    flags: dict[tuple[int, int], list[tuple[int, int]]] = {}
    deep: dict[tuple[int, int], complex] = {}
    for (s, dj), val in solved.items():
        j1, j2 = (s + dj) // 2, (s - dj) // 2
        if j1 <= j_max:
            values[(j1, j2)] = val
            out_chains[(j1, j2)] = chains[(s, dj)].pairs()
            if neglect[(s, dj)]:
                flags[(j1, j2)] = neglect[(s, dj)]
        else:
            deep[(j1, j2)] = val
    return OffdiagResult(values=values, chains=out_chains, flags=flags, deep_values=deep)


def _window_kernel(delta_omega: float, dt: float, n_t: int) -> complex:
    """(1/N_t) sum_n exp(i * delta_omega * n * dt), the finite-window Fourier kernel.

    Frequencies that land on an exact sampling bin (the rigid case) are
    snapped to 0 or 1 so the distortion-free limit reproduces Kronecker
    deltas to machine precision rather than through a 0/0 sine ratio.
    """
    s = delta_omega * dt * n_t / (2.0 * np.pi)
    r = round(s)
    if abs(s - r) < 1e-8:
        return complex(1.0 if r % n_t == 0 else 0.0)
    phi = delta_omega * dt
    return complex(
        np.exp(1j * phi * (n_t - 1) / 2.0) * np.sin(n_t * phi / 2.0) / (n_t * np.sin(phi / 2.0))
    )


def _reconstruct_windowed(
    grid: MeasurementGrid,
    spec: RotorSpec,
    j_max: int,
    cap: int,
    freq_tolerance: float,
) -> tuple[DensityBlock, dict]:
    """Joint linear solve for the centrifugal path.

    Unknowns are every ordered pair of the block plus any near-degenerate
    partners found outside it; each unknown owns one probe at its exact
    frequency.  The system matrix carries the window kernel of every
    (probe, unknown) frequency offset, so finite-window leakage between
    lines is modeled instead of ignored.  Only beta >= 0 moments are
    evaluated; conjugate rows reuse them.
    """
    m_min = spec.m_min
    pairs: list[tuple[int, int]] = [(j, j) for j in range(m_min, j_max + 1)]
    for j2 in range(m_min, j_max + 1):
        for j1 in range(j2 + 1, j_max + 1):
            pairs.append((j1, j2))
            pairs.append((j2, j1))
    chain_info: dict[tuple[int, int], list[tuple[int, int]]] = {}
    for j2 in range(m_min, j_max + 1):
        for j1 in range(j2 + 1, j_max + 1):
            chain = degeneracy_set_cd(j1 + j2, j1 - j2, m_min, cap, spec, freq_tolerance)
            chain_info[(j1, j2)] = chain.pairs()
            for mem in chain.members:
                for extra in ((mem.j1, mem.j2), (mem.j2, mem.j1)):
                    if extra[0] > j_max or extra[1] > j_max:
                        if extra not in pairs:
                            pairs.append(extra)

    n = len(pairs)
    freqs = np.array([bohr_frequency(spec, a, b) for a, b in pairs])
    table = spec.coefficient_table()
    moments: dict[tuple[int, int], complex] = {}
    b = np.empty(n, dtype=complex)
    for p, (a1, a2) in enumerate(pairs):
        alpha, beta = a1 + a2, a1 - a2
        if beta >= 0:
            key = (alpha, beta)
            if key not in moments:
                moments[key] = moment_integral(grid, alpha, beta, spec).value
            b[p] = moments[key]
        else:
            key = (alpha, -beta)
            if key not in moments:
                moments[key] = moment_integral(grid, alpha, -beta, spec).value
            b[p] = np.conj(moments[key])

    A = np.zeros((n, n), dtype=complex)
    for p, (a1, a2) in enumerate(pairs):
        alpha = a1 + a2
        for l, (b1, b2) in enumerate(pairs):
            coeff = table.coefficient(b1 + b2, b1 - b2, alpha)
            if coeff != 0.0:
                A[p, l] = coeff * _window_kernel(freqs[p] - freqs[l], grid.dt, grid.n_t)
    x = np.linalg.solve(A, b)

    block = DensityBlock.zeros(spec.k, spec.m, j_max)
    deep: dict[tuple[int, int], complex] = {}
    for l, (j1, j2) in enumerate(pairs):
        if j1 <= j_max and j2 <= j_max:
            block.elements[j1 - block.j_min, j2 - block.j_min] = x[l]
        else:
            deep[(j1, j2)] = complex(x[l])
    block.elements = (block.elements + block.elements.conj().T) / 2.0
    diagnostics = {
        "method": "windowed-least-squares",
        "n_unknowns": n,
        "freq_tolerance": freq_tolerance,
        "chains": chain_info,
        "flags": {},
        "deep_values": deep,
    }
    return block, diagnostics


@dataclass(frozen=True)
class SamplingPlan:
    """Grid sizes that make every probe of a reconstruction exact.

    tau_max is the largest frequency in the block in units of omega;
    sampling tau_max + 1 times per period puts every line on its own exact
    Fourier bin.  alpha_max is the deepest Legendre order any chain probe
    uses; the x grid must integrate that order against the block's own
    degree-2*j_max content exactly.
    """

    j_max: int
    m_min: int
    n_periods: int
    search_cap: int
    tau_max: int
    alpha_max: int
    n_t: int
    n_x: int

    @classmethod
    def derive(
        cls,
        spec: RotorSpec,
        j_max: int,
        n_periods: int = 1,
        n_t: int = 0,
        n_x: int = 0,
        search_cap: int | None = None,
        freq_tolerance: float | None = None,
    ) -> "SamplingPlan":
        """Fill n_t / n_x (0 = auto) and validate explicit values.

        Raises :class:`SamplingError` naming the violated requirement.
        """
        m_min = spec.m_min
        if j_max < m_min:
            raise ValueError(f"j_max = {j_max} below channel minimum {m_min}")
        if n_periods < 1:
            raise ValueError(f"n_periods must be >= 1, got {n_periods}")
        check_distortion_range(spec, j_max)
        cap = default_search_cap(j_max) if search_cap is None else search_cap
        tau_max = (j_max - m_min) * (j_max + m_min + 1)

        alpha_max = 2 * j_max
        if freq_tolerance is None:
            freq_tolerance = 2.0 * spec.omega / n_periods
        for j2 in range(m_min, j_max + 1):
            for j1 in range(j2 + 1, j_max + 1):
                if spec.kind is RotorKind.CENTRIFUGAL:
                    chain = degeneracy_set_cd(
                        j1 + j2, j1 - j2, m_min, cap, spec, freq_tolerance
                    )
                else:
                    chain = degeneracy_set(
                        j1 + j2, j1 - j2, m_min, cap, parity=spec.k == 0
                    )
                for mem in chain.members:
                    alpha_max = max(alpha_max, mem.j_sum)

        n_t_min = n_periods * tau_max + 1
        if n_t == 0:
            n_t = n_periods * (tau_max + 1)
        elif n_t < n_t_min:
            raise SamplingError(
                f"n_t = {n_t} cannot separate block frequencies up to {tau_max}*omega "
                f"over {n_periods} period(s): need n_t >= {n_t_min}"
            )
        n_x_min = (alpha_max + 2 * j_max + 1 + 1) // 2
        if n_x == 0:
            n_x = max(2 * j_max + 1, n_x_min)
        elif n_x < n_x_min:
            raise SamplingError(
                f"n_x = {n_x} cannot integrate the order-{alpha_max} chain probes "
                f"against degree-{2 * j_max} data exactly: need n_x >= {n_x_min}"
            )
        return cls(
            j_max=j_max,
            m_min=m_min,
            n_periods=n_periods,
            search_cap=cap,
            tau_max=tau_max,
            alpha_max=alpha_max,
            n_t=n_t,
            n_x=n_x,
        )


@dataclass
class ReconstructionResult:
    block: DensityBlock
    method: str
    residual_inf: float
    chains: dict[tuple[int, int], list[tuple[int, int]]]
    flags: dict[tuple[int, int], list[tuple[int, int]]]
    diagnostics: dict


def reconstruct_block(
    grid: MeasurementGrid,
    spec: RotorSpec,
    j_max: int,
    j_search_cap: int | None = None,
    freq_tolerance: float | None = None,
    psd_project: bool = False,
) -> ReconstructionResult:
    """Full Hermitian block from one measurement grid, with diagnostics.

    Routes by rotor kind: rigid and symmetric-top data go through exact
    chain back substitution; centrifugal data through the windowed joint
    solve.  The residual reported is the sup-norm mismatch between the data
    and a resimulation from the reconstructed block on the same grid.
    """
    if (grid.k, grid.m) != (spec.k, spec.m):
        raise ValueError(
            f"grid channel (k={grid.k}, m={grid.m}) does not match "
            f"spec channel (k={spec.k}, m={spec.m})"
        )
    plan = SamplingPlan.derive(
        spec,
        j_max,
        n_periods=grid.n_periods,
        n_t=grid.n_t,
        n_x=grid.n_x,
        search_cap=j_search_cap,
        freq_tolerance=freq_tolerance,
    )

    if spec.kind is RotorKind.CENTRIFUGAL:
        tol = 2.0 * spec.omega / grid.n_periods if freq_tolerance is None else freq_tolerance
        block, diag_info = _reconstruct_windowed(grid, spec, j_max, plan.search_cap, tol)
        chains = diag_info.pop("chains")
        flags = diag_info.pop("flags")
        method = diag_info.pop("method")
        diagnostics = diag_info
    else:
        method = "chain-back-substitution"
        diag = reconstruct_diag(grid, spec, j_max)
        off = reconstruct_offdiag(grid, spec, j_max, j_search_cap=plan.search_cap)
        block = DensityBlock.zeros(spec.k, spec.m, j_max)
        for i, val in enumerate(diag):
            block.elements[i, i] = val
        for (j1, j2), val in off.values.items():
            block.elements[j1 - block.j_min, j2 - block.j_min] = val
            block.elements[j2 - block.j_min, j1 - block.j_min] = np.conj(val)
        chains = off.chains
        flags = off.flags
        diagnostics = {"deep_values": off.deep_values}

    resim = simulate_pr(block, spec, grid.x_grid, grid.n_t, grid.n_periods)
    residual = float(np.max(np.abs(resim.values - grid.values)))
    if psd_project:
        block = block.project_psd()
    diagnostics.update(
        trace=block.trace(),
        min_eigenvalue=block.min_eigenvalue(),
        plan=plan,
    )
    return ReconstructionResult(
        block=block,
        method=method,
        residual_inf=residual,
        chains=chains,
        flags=flags,
        diagnostics=diagnostics,
    )
