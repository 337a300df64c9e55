"""Domain records shared by the router modules.

Reduced-basis states are addressed with the labels 1..6 used throughout the
router literature; storage is 0-based, so label ``j`` lives at index ``j - 1``.
"""
import enum
import math
import typing as tp
from dataclasses import dataclass, field

import numpy as np

from chiralroute.errors import ValidationError

TWO_PI = 2.0 * math.pi
REDUCED_DIM = 6

HERMITIAN_ATOL = 1e-10
NORM_ATOL = 1e-10
UNITARY_ATOL = 1e-10
DENSITY_ATOL = 1e-10


def _require_finite(name: str, value: float) -> float:
    value = float(value)
    if not math.isfinite(value):
        raise ValidationError(f"{name} must be finite, got {value}")
    return value


def label_index(label: int) -> int:
    """Convert a 1-based reduced-basis label to a storage index."""
    if not isinstance(label, (int, np.integer)) or not 1 <= label <= REDUCED_DIM:
        raise ValidationError(f"reduced-basis label must be in 1..6, got {label!r}")
    return int(label) - 1


@dataclass(frozen=True)
class RouterParams:
    """One router instance: ``n`` outputs, link weight ``beta``, chiral phase ``phi``.

    ``phi`` is stored reduced modulo 2π.
    """

    n_outputs: int
    beta: float = 1.0
    phi: float = 0.0

    def __post_init__(self):
        if int(self.n_outputs) != self.n_outputs or self.n_outputs < 2:
            raise ValidationError(
                f"router needs at least 2 outputs, got n_outputs={self.n_outputs}"
            )
        object.__setattr__(self, "n_outputs", int(self.n_outputs))
        object.__setattr__(self, "beta", _require_finite("beta", self.beta))
        phi = _require_finite("phi", self.phi) % TWO_PI
        # float modulo may land exactly on 2π for tiny negative inputs
        object.__setattr__(self, "phi", 0.0 if phi >= TWO_PI else phi)

    def with_phi(self, phi: float) -> "RouterParams":
        return RouterParams(self.n_outputs, self.beta, phi)

    def with_beta(self, beta: float) -> "RouterParams":
        return RouterParams(self.n_outputs, beta, self.phi)


@dataclass(frozen=True)
class FullGraphLayout:
    """Vertex numbering of the full router graph.

    Internal (complete-graph) vertices ``x_m`` take indices ``0..n`` and the
    external vertex ``y_m`` attached to ``x_m`` takes index ``n + 1 + m``.
    ``input_port`` and ``output_port`` pick which pairs act as sender and
    receiver.
    """

    n_outputs: int
    input_port: int = 0
    output_port: int = 1

    def __post_init__(self):
        if self.n_outputs < 2:
            raise ValidationError(
                f"router needs at least 2 outputs, got n_outputs={self.n_outputs}"
            )
        for name in ("input_port", "output_port"):
            port = getattr(self, name)
            if not 0 <= port <= self.n_outputs:
                raise ValidationError(
                    f"{name}={port} outside 0..{self.n_outputs}"
                )
        if self.input_port == self.output_port:
            raise ValidationError("input and output ports must differ")

    @property
    def dim(self) -> int:
        return 2 * (self.n_outputs + 1)

    @property
    def internal_indices(self) -> range:
        return range(0, self.n_outputs + 1)

    @property
    def external_indices(self) -> range:
        return range(self.n_outputs + 1, self.dim)

    def external_of(self, internal: int) -> int:
        return self.n_outputs + 1 + internal

    @property
    def input_internal(self) -> int:
        return self.input_port

    @property
    def output_internal(self) -> int:
        return self.output_port

    @property
    def input_external(self) -> int:
        return self.external_of(self.input_port)

    @property
    def output_external(self) -> int:
        return self.external_of(self.output_port)

    @property
    def bulk_internal(self) -> tp.List[int]:
        """Internal vertices not assigned to the input or output pair."""
        return [
            m
            for m in self.internal_indices
            if m not in (self.input_internal, self.output_internal)
        ]

    @property
    def bulk_external(self) -> tp.List[int]:
        return [self.external_of(m) for m in self.bulk_internal]


@dataclass(frozen=True, eq=False)
class HermitianMatrix:
    entries: np.ndarray

    def __post_init__(self):
        entries = np.asarray(self.entries, dtype=complex)
        if entries.ndim != 2 or entries.shape[0] != entries.shape[1]:
            raise ValidationError(f"expected a square matrix, got {entries.shape}")
        deviation = np.max(np.abs(entries - entries.conj().T), initial=0.0)
        if deviation > HERMITIAN_ATOL:
            raise ValidationError(
                f"matrix is not Hermitian (max deviation {deviation:.3e})"
            )
        object.__setattr__(self, "entries", entries)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]


@dataclass(frozen=True, eq=False)
class PureState:
    amplitudes: np.ndarray

    def __post_init__(self):
        amplitudes = np.asarray(self.amplitudes, dtype=complex)
        if amplitudes.ndim != 1 or amplitudes.size == 0:
            raise ValidationError(f"state must be a vector, got {amplitudes.shape}")
        norm = float(np.vdot(amplitudes, amplitudes).real)
        if abs(norm - 1.0) > NORM_ATOL:
            raise ValidationError(f"state is not normalised (norm² = {norm!r})")
        object.__setattr__(self, "amplitudes", amplitudes)

    @property
    def dim(self) -> int:
        return self.amplitudes.shape[0]

    @classmethod
    def localized(cls, label: int, dim: int = REDUCED_DIM) -> "PureState":
        """Walker localized on reduced-basis state ``|label⟩``."""
        amplitudes = np.zeros(dim, dtype=complex)
        amplitudes[label_index(label)] = 1.0
        return cls(amplitudes)

    def overlap(self, other: "PureState") -> complex:
        """⟨self|other⟩"""
        return complex(np.vdot(self.amplitudes, other.amplitudes))


@dataclass(frozen=True, eq=False)
class Propagator:
    matrix: np.ndarray
    time: float

    def __post_init__(self):
        matrix = np.asarray(self.matrix, dtype=complex)
        identity = np.eye(matrix.shape[0])
        error = np.linalg.norm(matrix.conj().T @ matrix - identity)
        if error > UNITARY_ATOL:
            raise ValidationError(f"propagator is not unitary (‖U†U − I‖ = {error:.3e})")
        object.__setattr__(self, "matrix", matrix)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    entries: np.ndarray

    def __post_init__(self):
        entries = np.asarray(self.entries, dtype=complex)
        if entries.ndim != 2 or entries.shape[0] != entries.shape[1]:
            raise ValidationError(f"expected a square matrix, got {entries.shape}")
        if np.max(np.abs(entries - entries.conj().T)) > DENSITY_ATOL:
            raise ValidationError("density matrix is not Hermitian")
        trace = complex(np.trace(entries))
        if abs(trace - 1.0) > DENSITY_ATOL:
            raise ValidationError(f"density matrix trace is {trace!r}, expected 1")
        min_eigenvalue = float(np.linalg.eigvalsh(entries)[0])
        if min_eigenvalue < -DENSITY_ATOL:
            raise ValidationError(
                f"density matrix is not positive semidefinite "
                f"(min eigenvalue {min_eigenvalue:.3e})"
            )
        object.__setattr__(self, "entries", entries)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @property
    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.entries)

    @classmethod
    def from_pure(cls, state: PureState) -> "DensityMatrix":
        psi = state.amplitudes
        return cls(np.outer(psi, psi.conj()))

    def expectation(self, state: PureState) -> float:
        """⟨w|ρ|w⟩"""
        psi = state.amplitudes
        return float(np.vdot(psi, self.entries @ psi).real)


@dataclass(frozen=True)
class SuperpositionParams:
    """Amplitude ``alpha`` and relative phase ``chi`` of a two-site superposition."""

    alpha: float = 1.0
    chi: float = 0.0

    def __post_init__(self):
        alpha = _require_finite("alpha", self.alpha)
        if not 0.0 <= alpha <= 1.0:
            raise ValidationError(f"alpha must lie in [0, 1], got {alpha}")
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "chi", _require_finite("chi", self.chi) % TWO_PI)


class AveragingMeasure(str, enum.Enum):
    UNIFORM = "uniform"
    HAAR = "haar"


@dataclass(frozen=True)
class SuperpositionGrid:
    """Rectangular (α, χ) grid used for average and worst-case fidelities.

    ``uniform`` spaces α evenly on [0, 1]; ``haar`` spaces α² evenly, which is
    the unitarily invariant measure on the two-site subspace.
    """

    alpha_points: int = 41
    chi_points: int = 64
    measure: AveragingMeasure = AveragingMeasure.UNIFORM

    def __post_init__(self):
        if self.alpha_points < 1 or self.chi_points < 1:
            raise ValidationError("superposition grid must not be empty")
        object.__setattr__(self, "measure", AveragingMeasure(self.measure))

    def alphas(self) -> np.ndarray:
        if self.alpha_points == 1:
            return np.array([1.0])
        u = np.linspace(0.0, 1.0, self.alpha_points)
        if self.measure is AveragingMeasure.HAAR:
            return np.sqrt(u)
        return u

    def chis(self) -> np.ndarray:
        return np.linspace(0.0, TWO_PI, self.chi_points, endpoint=False)

    def mesh(self) -> tp.Tuple[np.ndarray, np.ndarray]:
        """(α, χ) arrays of shape (alpha_points, chi_points)."""
        return np.meshgrid(self.alphas(), self.chis(), indexing="ij")


@dataclass(frozen=True, eq=False)
class FidelityCurve:
    times: np.ndarray
    values: np.ndarray
    params: RouterParams
    input_label: str = "|1>"
    target_label: str = "|4>"
    stderr: tp.Optional[np.ndarray] = None
    converged: bool = True

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if times.shape != values.shape:
            raise ValidationError("times and values must have the same length")
        if np.any(np.diff(times) < 0):
            raise ValidationError("curve times must be sorted")
        if np.any(values < -1e-12) or np.any(values > 1 + 1e-12):
            raise ValidationError("fidelity values must lie in [0, 1]")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)
        if self.stderr is not None:
            object.__setattr__(self, "stderr", np.asarray(self.stderr, dtype=float))

    def __len__(self) -> int:
        return self.times.shape[0]


@dataclass(frozen=True)
class VonMisesSpec:
    """Static phase disorder ε ~ p_k(ε) = e^{k cos ε} / (2π I₀(k))."""

    k: float
    quadrature_points: int = 129
    max_quadrature_points: int = 8256
    tolerance: float = 1e-8

    def __post_init__(self):
        k = _require_finite("k", self.k)
        if k < 0:
            raise ValidationError(f"concentration k must be non-negative, got {k}")
        if self.quadrature_points < 8:
            raise ValidationError("quadrature needs at least 8 points")
        object.__setattr__(self, "k", k)

    @property
    def variance(self) -> float:
        """Gaussian variance 1/k of the large-k approximation."""
        return math.inf if self.k == 0 else 1.0 / self.k


@dataclass(frozen=True)
class OUSpec:
    """Ornstein–Uhlenbeck phase noise dX = θ(μ − X)dt + Σ dW.

    ``mu=None`` means "the configured router phase".
    """

    theta: float = 1.0
    sigma_vol: float = 0.4
    mu: tp.Optional[float] = None
    dt: float = 0.01
    trajectories: int = 2000
    seed: int = 0

    def __post_init__(self):
        if _require_finite("theta", self.theta) <= 0:
            raise ValidationError(f"theta must be positive, got {self.theta}")
        if _require_finite("sigma_vol", self.sigma_vol) < 0:
            raise ValidationError(f"sigma_vol must be non-negative, got {self.sigma_vol}")
        if self.mu is not None:
            _require_finite("mu", self.mu)
        if _require_finite("dt", self.dt) <= 0:
            raise ValidationError(f"dt must be positive, got {self.dt}")
        if self.trajectories < 1:
            raise ValidationError("at least one trajectory is required")
        if not 0 <= self.seed < 2**64:
            raise ValidationError("seed must be a 64-bit unsigned integer")

    @property
    def stationary_variance(self) -> float:
        return self.sigma_vol**2 / (2.0 * self.theta)

    def centred_on(self, phi: float) -> "OUSpec":
        """Copy with ``mu`` defaulted to ``phi`` when unset."""
        if self.mu is not None:
            return self
        return OUSpec(
            theta=self.theta,
            sigma_vol=self.sigma_vol,
            mu=phi,
            dt=self.dt,
            trajectories=self.trajectories,
            seed=self.seed,
        )


NoiseModel = tp.Union[VonMisesSpec, OUSpec]


class ParamKind(str, enum.Enum):
    PHASE = "phase"
    WEIGHT = "weight"


class Objective(str, enum.Enum):
    LOCALIZED = "localized"
    AVERAGE = "average"
    WORST_CASE = "worst_case"


@dataclass(frozen=True)
class AxisRange:
    lo: float
    hi: float
    steps: int

    def __post_init__(self):
        if self.steps < 2:
            raise ValidationError(f"an axis needs at least 2 steps, got {self.steps}")
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)) or self.lo >= self.hi:
            raise ValidationError(f"invalid range [{self.lo}, {self.hi}]")


@dataclass(frozen=True)
class ScanGrid:
    """(t, parameter) grid. Phase axes are half-open [lo, hi); others closed."""

    t_range: AxisRange = field(default_factory=lambda: AxisRange(0.0, 50.0, 501))
    param_range: AxisRange = field(default_factory=lambda: AxisRange(0.0, TWO_PI, 256))
    param_kind: ParamKind = ParamKind.PHASE

    def __post_init__(self):
        object.__setattr__(self, "param_kind", ParamKind(self.param_kind))

    def t_values(self) -> np.ndarray:
        r = self.t_range
        return np.linspace(r.lo, r.hi, r.steps)

    def param_values(self) -> np.ndarray:
        r = self.param_range
        endpoint = self.param_kind is not ParamKind.PHASE
        return np.linspace(r.lo, r.hi, r.steps, endpoint=endpoint)


@dataclass(frozen=True)
class PeakReport:
    t: float
    param: float
    value: float
    width_t: float
    width_param: float
    wrong_output_prob: float

    @property
    def location(self) -> tp.Tuple[float, float]:
        return (self.t, self.param)

    @property
    def width_product(self) -> float:
        return self.width_t * self.width_param


@dataclass(frozen=True, eq=False)
class ScanResult:
    """Dense fidelity surface over a :class:`ScanGrid`.

    ``t_axis`` tells which array axis runs along time; the other runs along
    the scanned parameter.
    """

    t_values: np.ndarray
    param_values: np.ndarray
    fidelity: np.ndarray
    p_wrong: np.ndarray
    param_kind: ParamKind
    objective: Objective = Objective.LOCALIZED
    t_axis: int = 0

    def transpose(self) -> "ScanResult":
        return ScanResult(
            t_values=self.t_values,
            param_values=self.param_values,
            fidelity=self.fidelity.T,
            p_wrong=self.p_wrong.T,
            param_kind=self.param_kind,
            objective=self.objective,
            t_axis=1 - self.t_axis,
        )

    def oriented(self) -> tp.Tuple[np.ndarray, np.ndarray]:
        """(fidelity, p_wrong) with time along axis 0."""
        if self.t_axis == 0:
            return self.fidelity, self.p_wrong
        return self.fidelity.T, self.p_wrong.T

    def rows(self) -> tp.Iterator[tp.Tuple[float, float, float, float]]:
        """(t, param, fidelity, p_wrong) in t-major order."""
        fidelity, p_wrong = self.oriented()
        for i, t in enumerate(self.t_values):
            for j, param in enumerate(self.param_values):
                yield float(t), float(param), float(fidelity[i, j]), float(p_wrong[i, j])


@dataclass(frozen=True)
class RefineResult:
    point: tp.Tuple[float, float]
    value: float
    converged: bool
    iterations: int
    evaluations: int


class Objective2D(tp.Protocol):
    def __call__(self, t: float, param: float) -> float:
        """Figure of merit at time ``t`` and parameter value ``param``."""
        raise NotImplementedError()
