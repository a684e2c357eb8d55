"""Rotor models, density-matrix blocks, and the forward simulator.

Natural units with hbar = 1.  The rotational constant ``omega`` sets the
frequency scale, so the rigid-rotor energy is E_J = omega * J(J+1) and the
revival period is T = pi / omega.  A density-matrix block is the restriction
of the full rotational density matrix to one (k, m) channel; for linear
rotors k = 0.  The angular distribution in x = cos(theta) is

    Pr(x, t) = sum_{J1, J2} rho(J1, J2) f_J1(x) f_J2(x)
               * exp(-i [E_J1 - E_J2] t)

with f_J the normalized eigenfunctions from :mod:`rotortomo.angular`.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .angular import QuadratureGrid, coefficient_table, eigenfunction_rows, gauss_legendre_grid


class RotorKind(enum.Enum):
    RIGID = "rigid-linear"
    CENTRIFUGAL = "centrifugal-linear"
    SYMTOP = "symmetric-top"


_KIND_BY_VALUE = {kind.value: kind for kind in RotorKind}


def rotor_kind(name: str | RotorKind) -> RotorKind:
    if isinstance(name, RotorKind):
        return name
    try:
        return _KIND_BY_VALUE[name]
    except KeyError:
        raise ValueError(
            f"unknown rotor kind {name!r}; expected one of {sorted(_KIND_BY_VALUE)}"
        ) from None


@dataclass(frozen=True)
class RotorSpec:
    """Rotor Hamiltonian parameters and the (k, m) channel.

    omega
        Rotational constant (hbar / 2I); must be positive.
    omega2
        Second rotational constant of a symmetric top.  Its k^2 term is
        constant within a (k, m) block and cancels from every interference
        frequency; it only shifts absolute energies.
    d_cd
        Centrifugal distortion constant for kind "centrifugal-linear".
    k, m
        Projection quantum numbers selecting the block.  Linear kinds
        require k = 0.
    """

    kind: RotorKind
    omega: float
    omega2: float = 0.0
    d_cd: float = 0.0
    k: int = 0
    m: int = 0

    def __post_init__(self):
        object.__setattr__(self, "kind", rotor_kind(self.kind))
        if self.omega <= 0:
            raise ValueError(f"omega must be positive, got {self.omega}")
        if self.kind is not RotorKind.SYMTOP and self.k != 0:
            raise ValueError(f"linear rotors have k = 0, got k = {self.k}")
        if self.d_cd < 0:
            raise ValueError(f"d_cd must be non-negative, got {self.d_cd}")
        if self.d_cd > 0 and self.kind is not RotorKind.CENTRIFUGAL:
            raise ValueError(f"d_cd is only meaningful for centrifugal-linear, got kind {self.kind.value}")

    @property
    def m_min(self) -> int:
        """Smallest J supported in this (k, m) channel."""
        return max(abs(self.k), abs(self.m))

    def basis_matrix(self, j_max: int, x: np.ndarray) -> np.ndarray:
        """Rows f_J(x) for J = m_min .. j_max."""
        return eigenfunction_rows(j_max, self.k, self.m, np.asarray(x, dtype=float))

    def coefficient_table(self):
        return coefficient_table(self.k, self.m)


def energy(spec: RotorSpec, J: int) -> float:
    """Eigenenergy of level J in the spec's (k, m) channel."""
    if J < spec.m_min:
        raise ValueError(f"J = {J} below channel minimum {spec.m_min}")
    n = J * (J + 1)
    if spec.kind is RotorKind.RIGID:
        return spec.omega * n
    if spec.kind is RotorKind.CENTRIFUGAL:
        return spec.omega * n - spec.d_cd * n * n
    return spec.omega * n - spec.omega2 * spec.k * spec.k


def bohr_frequency(spec: RotorSpec, j_upper: int, j_lower: int) -> float:
    """Interference frequency E(j_upper) - E(j_lower)."""
    return energy(spec, j_upper) - energy(spec, j_lower)


def revival_period(spec: RotorSpec) -> float:
    """Exact full-revival period pi/omega; undefined with centrifugal distortion."""
    if spec.kind is RotorKind.CENTRIFUGAL and spec.d_cd != 0.0:
        raise ValueError("centrifugal-distorted spectra are not exactly periodic")
    return np.pi / spec.omega


def reference_period(spec: RotorSpec) -> float:
    """Window unit pi/omega used for time sampling, for every kind."""
    return np.pi / spec.omega


def monotone_j_limit(spec: RotorSpec) -> int:
    """Largest J up to which E_J is strictly increasing.

    For the centrifugal kind the spectrum turns over at J(J+1) = omega/(2 d_cd);
    model content beyond that J would fold frequencies back onto lower lines.
    """
    if spec.kind is not RotorKind.CENTRIFUGAL or spec.d_cd == 0.0:
        return np.iinfo(np.int64).max
    limit = spec.omega / (2.0 * spec.d_cd)
    j = int(np.floor(0.5 * (np.sqrt(1.0 + 4.0 * limit) - 1.0)))
    while (j + 1) * (j + 2) < limit:
        j += 1
    while j > 0 and j * (j + 1) >= limit:
        j -= 1
    return j


def check_distortion_range(spec: RotorSpec, j_cap: int) -> None:
    """Require d_cd/omega < 1/(2 j_cap (j_cap+1)) so E_J is monotone up to j_cap."""
    if spec.kind is not RotorKind.CENTRIFUGAL or spec.d_cd == 0.0:
        return
    bound = 1.0 / (2.0 * j_cap * (j_cap + 1))
    ratio = spec.d_cd / spec.omega
    if ratio >= bound:
        raise ValueError(
            f"d_cd/omega = {ratio:.3e} too large for J up to {j_cap}: "
            f"spectrum must stay monotone, need d_cd/omega < {bound:.3e}"
        )


@dataclass
class DensityBlock:
    """Hermitian density-matrix block for one (k, m) channel.

    ``elements[a, b]`` is rho(J1, J2) with J1 = j_min + a, J2 = j_min + b and
    j_min = max(|k|, |m|).  For a normalized state the trace is 1;
    reconstructions of noisy data may deviate.
    """

    k: int
    m: int
    j_max: int
    elements: np.ndarray
    j_min: int = field(init=False)

    def __post_init__(self):
        self.j_min = max(abs(self.k), abs(self.m))
        n = self.j_max - self.j_min + 1
        if n < 1:
            raise ValueError(f"j_max = {self.j_max} below channel minimum {self.j_min}")
        self.elements = np.asarray(self.elements, dtype=complex)
        if self.elements.shape != (n, n):
            raise ValueError(
                f"elements shape {self.elements.shape} does not match J range "
                f"{self.j_min}..{self.j_max} (expected {(n, n)})"
            )
        defect = self.hermiticity_defect()
        scale = max(1.0, float(np.max(np.abs(self.elements))))
        if defect > 1e-9 * scale:
            raise ValueError(f"block is not Hermitian: max |rho - rho^H| = {defect:.3e}")

    @classmethod
    def zeros(cls, k: int, m: int, j_max: int) -> "DensityBlock":
        n = j_max - max(abs(k), abs(m)) + 1
        return cls(k=k, m=m, j_max=j_max, elements=np.zeros((n, n), dtype=complex))

    @property
    def j_values(self) -> np.ndarray:
        return np.arange(self.j_min, self.j_max + 1)

    def index(self, J: int) -> int:
        if not self.j_min <= J <= self.j_max:
            raise IndexError(f"J = {J} outside block range {self.j_min}..{self.j_max}")
        return J - self.j_min

    def element(self, j1: int, j2: int) -> complex:
        return complex(self.elements[self.index(j1), self.index(j2)])

    def trace(self) -> float:
        return float(np.real(np.trace(self.elements)))

    def hermiticity_defect(self) -> float:
        return float(np.max(np.abs(self.elements - self.elements.conj().T)))

    def min_eigenvalue(self) -> float:
        return float(np.min(scipy.linalg.eigvalsh(self.elements)))

    def is_positive_semidefinite(self, tol: float = 1e-10) -> bool:
        return self.min_eigenvalue() >= -tol

    def embedded(self, j_max: int) -> "DensityBlock":
        """Copy of the block zero-padded up to a larger j_max."""
        if j_max < self.j_max:
            raise ValueError(f"cannot shrink block from j_max = {self.j_max} to {j_max}")
        out = DensityBlock.zeros(self.k, self.m, j_max)
        n = self.elements.shape[0]
        out.elements[:n, :n] = self.elements
        return out

    def project_psd(self) -> "DensityBlock":
        """Nearest-PSD projection: clip negative eigenvalues, restore the trace."""
        vals, vecs = scipy.linalg.eigh(self.elements)
        clipped = np.clip(vals, 0.0, None)
        total = clipped.sum()
        if total > 0:
            clipped *= self.trace() / total
        mat = (vecs * clipped) @ vecs.conj().T
        return DensityBlock(k=self.k, m=self.m, j_max=self.j_max, elements=mat)


@dataclass
class MeasurementGrid:
    """Sampled Pr(x, t) on a Gauss-Legendre x grid and a uniform time grid.

    Time samples are t_i = i * dt for i = 0 .. n_t - 1 with
    dt = n_periods * period / n_t, i.e. uniform over [0, n_periods * T).
    ``values[i, j]`` is Pr(x_j, t_i).  The grid carries the rotor metadata
    needed to interpret it on its own (and to round-trip through CSV).
    """

    x_grid: QuadratureGrid
    period: float
    n_periods: int
    values: np.ndarray
    omega: float
    kind: RotorKind
    k: int
    m: int

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2 or self.values.shape[1] != self.x_grid.order:
            raise ValueError(
                f"values shape {self.values.shape} does not match x grid order {self.x_grid.order}"
            )
        if self.n_periods < 1:
            raise ValueError(f"n_periods must be >= 1, got {self.n_periods}")

    @property
    def n_t(self) -> int:
        return self.values.shape[0]

    @property
    def n_x(self) -> int:
        return self.x_grid.order

    @property
    def dt(self) -> float:
        return self.n_periods * self.period / self.n_t

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_t) * self.dt

    def x_integrals(self, f_of_x: np.ndarray) -> np.ndarray:
        """integral f(x) Pr(x, t) dx for every time sample."""
        return self.values @ (self.x_grid.weights * f_of_x)

    def trace_estimate(self) -> float:
        """Mean over t of integral Pr dx (equals the trace for exact data)."""
        return float(np.mean(self.values @ self.x_grid.weights))

    def alignment_trace(self) -> np.ndarray:
        """<cos^2 theta>(t) = integral x^2 Pr(x, t) dx."""
        return self.x_integrals(self.x_grid.nodes**2)


def simulate_pr(
    block: DensityBlock,
    spec: RotorSpec,
    x_grid: QuadratureGrid,
    n_t: int,
    n_periods: int = 1,
) -> MeasurementGrid:
    """Evolve the block and sample Pr(x, t) on the product grid.

    The x grid must have order >= 2*j_max + 1 so every x integral taken
    against the simulated data (normalization, basis projections up to the
    block bandwidth) is quadrature-exact.  The result of the coherent sum is
    real for Hermitian blocks; the imaginary residue is checked against
    1e-12 and discarded.
    """
    if (block.k, block.m) != (spec.k, spec.m):
        raise ValueError(
            f"block channel (k={block.k}, m={block.m}) does not match "
            f"spec channel (k={spec.k}, m={spec.m})"
        )
    if x_grid.order < 2 * block.j_max + 1:
        raise ValueError(
            f"x grid order {x_grid.order} aliases products of degree {2 * block.j_max}: "
            f"need order >= {2 * block.j_max + 1}"
        )
    if n_t < 1:
        raise ValueError(f"n_t must be >= 1, got {n_t}")
    check_distortion_range(spec, block.j_max)

    period = reference_period(spec)
    dt = n_periods * period / n_t
    times = np.arange(n_t) * dt
    energies = np.array([energy(spec, J) for J in block.j_values])
    f = spec.basis_matrix(block.j_max, x_grid.nodes)  # (n_j, n_x)
    phases = np.exp(-1j * np.outer(times, energies))  # (n_t, n_j)
    # Pr[t, x] = sum_ab phases[t,a] rho[a,b] conj(phases[t,b]) f[a,x] f[b,x]
    evolved = np.einsum("ta,ab,tb->tab", phases, block.elements, phases.conj(), optimize=True)
    values = np.einsum("tab,ax,bx->tx", evolved, f, f, optimize=True)
    imag_max = float(np.max(np.abs(values.imag))) if values.size else 0.0
    if imag_max >= 1e-12:
        raise ValueError(f"simulated distribution has imaginary residue {imag_max:.3e}")
    return MeasurementGrid(
        x_grid=x_grid,
        period=period,
        n_periods=n_periods,
        values=values.real,
        omega=spec.omega,
        kind=spec.kind,
        k=spec.k,
        m=spec.m,
    )


def make_test_state(
    state_kind: str,
    k: int,
    m: int,
    j_max: int,
    seed: int | None = None,
    kick_strength: float = 0.0,
) -> DensityBlock:
    """Construct a reference block: "random-pure", "random-mixed", or "cos2-kicked".

    Random states use ``numpy.random.default_rng(seed)``.  The kicked state
    applies exp(i * kick_strength * cos^2 theta) to the ground level of the
    channel; the unitary is built in a working space of twice the requested
    size and then truncated and renormalized, so the returned block is exactly
    unit trace while the truncation loss stays checkable by enlarging j_max.
    """
    j_min = max(abs(k), abs(m))
    if j_max < j_min:
        raise ValueError(f"j_max = {j_max} below channel minimum {j_min}")
    n = j_max - j_min + 1
    rng = np.random.default_rng(seed)

    def random_pure() -> np.ndarray:
        v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        v /= np.linalg.norm(v)
        return np.outer(v, v.conj())

    if state_kind == "random-pure":
        mat = random_pure()
    elif state_kind == "random-mixed":
        weights = rng.random(3)
        weights /= weights.sum()
        mat = sum(w * random_pure() for w in weights)
    elif state_kind == "cos2-kicked":
        j_work = 2 * j_max + 4
        table = coefficient_table(k, m)
        n_work = j_work - j_min + 1
        x2 = np.zeros((n_work, n_work))
        for a in range(n_work):
            for b in range(a, min(a + 2, n_work - 1) + 1):
                j1, j2 = j_min + a, j_min + b
                # x^2 = 1/3 + (2/3) sqrt(2/5) P~(2, 0)
                val = (2.0 / 3.0) * np.sqrt(2.0 / 5.0) * table.coefficient(j1 + j2, j1 - j2, 2)
                if a == b:
                    val += 1.0 / 3.0
                x2[a, b] = x2[b, a] = val
        v = scipy.linalg.expm(1j * kick_strength * x2)[:, 0]
        v = v[:n]
        norm = np.linalg.norm(v)
        if norm == 0:
            raise ValueError("kicked state truncated to nothing; increase j_max")
        v = v / norm
        mat = np.outer(v, v.conj())
    else:
        raise ValueError(
            f"unknown state kind {state_kind!r}; expected 'random-pure', "
            f"'random-mixed', or 'cos2-kicked'"
        )
    return DensityBlock(k=k, m=m, j_max=j_max, elements=mat)


def add_shot_noise(grid: MeasurementGrid, samples_per_time: int, seed: int) -> MeasurementGrid:
    """Replace each time slice by a finite-sample estimate of Pr(x, t).

    Draws ``samples_per_time`` x values per slice from the quadrature-weighted
    distribution and rebuilds node values from the counts, renormalized so the
    weighted x integral of every slice equals the trace carried by the input
    grid.  Deterministic for a fixed seed.
    """
    if samples_per_time < 1:
        raise ValueError(f"samples_per_time must be >= 1, got {samples_per_time}")
    rng = np.random.default_rng(seed)
    weights = grid.x_grid.weights
    trace = grid.trace_estimate()
    noisy = np.empty_like(grid.values)
    for i in range(grid.n_t):
        masses = np.clip(weights * grid.values[i], 0.0, None)
        total = masses.sum()
        if total <= 0:
            noisy[i] = 0.0
            continue
        counts = rng.multinomial(samples_per_time, masses / total)
        noisy[i] = trace * counts / (samples_per_time * weights)
    return MeasurementGrid(
        x_grid=grid.x_grid,
        period=grid.period,
        n_periods=grid.n_periods,
        values=noisy,
        omega=grid.omega,
        kind=grid.kind,
        k=grid.k,
        m=grid.m,
    )
