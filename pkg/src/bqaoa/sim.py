"""Density-matrix simulation under calibration-derived noise.

Noise model per scheduled unit: the unit's unitary, then a depolarizing
channel whose average gate infidelity equals the unit's effective error,
then thermal relaxation on each participating qubit for the unit's
duration.  Qubits relax while idling between units.  A global scale factor
s multiplies the depolarizing infidelity and the relaxation rates and
interpolates the readout confusion matrices; s = 0 is noiseless.

Bitstrings throughout read qubit 0 rightmost.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .circuit import CircuitIR, GateKind, apply_matrix, local_matrix, statevector
from .device import DeviceModel, EdgeCalibration
from .errors import (
    DimensionError,
    SingularConfusionError,
    TooLargeError,
    ValidationError,
)
from .lower import LoweredCircuit, RuleApplication, effective_error

MAX_DENSITY_QUBITS = 10


@dataclass
class DensityMatrix:
    """A 2^n x 2^n density operator."""

    n: int
    data: np.ndarray

    @classmethod
    def ground(cls, n: int) -> "DensityMatrix":
        dim = 2**n
        rho = np.zeros((dim, dim), dtype=complex)
        rho[0, 0] = 1.0
        return cls(n, rho)

    @classmethod
    def from_statevector(cls, psi: np.ndarray) -> "DensityMatrix":
        psi = np.asarray(psi, dtype=complex)
        n = int(round(np.log2(psi.size)))
        return cls(n, np.outer(psi, psi.conj()))

    def probabilities(self) -> np.ndarray:
        p = np.clip(np.real(np.diag(self.data)), 0.0, None)
        total = p.sum()
        return p / total if total > 0 else p

    def validate(self, tol: float = 1e-10) -> None:
        if not np.allclose(self.data, self.data.conj().T, atol=tol):
            raise ValidationError("density matrix is not Hermitian")
        if abs(np.trace(self.data).real - 1.0) > tol:
            raise ValidationError(f"trace is {np.trace(self.data).real}, not 1")
        eigenvalues = np.linalg.eigvalsh(self.data)
        if eigenvalues.min() < -1e-9:
            raise ValidationError(f"negative eigenvalue {eigenvalues.min()}")


# --- elementary channels ---


def depolarizing_kraus(lam: float, k: int) -> list[np.ndarray]:
    """Kraus family of rho -> (1-lam) rho + lam I/d on k qubits."""
    if not 0.0 <= lam <= 1.0:
        raise ValidationError(f"depolarizing strength {lam} not in [0, 1]")
    dim = 2**k
    pauli_1q = [
        np.eye(2, dtype=complex),
        np.array([[0, 1], [1, 0]], dtype=complex),
        np.array([[0, -1j], [1j, 0]], dtype=complex),
        np.array([[1, 0], [0, -1]], dtype=complex),
    ]
    paulis = pauli_1q
    for _ in range(k - 1):
        paulis = [np.kron(a, b) for a in pauli_1q for b in paulis]
    weight = lam / dim**2
    kraus = [np.sqrt(1.0 - lam + weight) * np.eye(dim, dtype=complex)]
    kraus.extend(np.sqrt(weight) * p for p in paulis[1:])
    return kraus


def relaxation_kraus(duration_ns: float, t1_us: float, t2_us: float) -> list[np.ndarray]:
    """Amplitude damping + pure dephasing over duration (requires T2 <= 2 T1)."""
    if duration_ns <= 0:
        return [np.eye(2, dtype=complex)]
    t = duration_ns * 1e-3  # us
    gamma = 1.0 - np.exp(-t / t1_us)
    # extra dephasing beyond the T1 contribution: 1/Tphi = 1/T2 - 1/(2 T1)
    rate_phi = 1.0 / t2_us - 1.0 / (2.0 * t1_us)
    rate_phi = max(rate_phi, 0.0)
    lam_phi = 1.0 - np.exp(-2.0 * t * rate_phi)
    amp = [
        np.array([[1, 0], [0, np.sqrt(1 - gamma)]], dtype=complex),
        np.array([[0, np.sqrt(gamma)], [0, 0]], dtype=complex),
    ]
    phase = [
        np.array([[1, 0], [0, np.sqrt(1 - lam_phi)]], dtype=complex),
        np.array([[0, 0], [0, np.sqrt(lam_phi)]], dtype=complex),
    ]
    return [p @ a for a in amp for p in phase]


def _apply_unitary(rho: np.ndarray, mat: np.ndarray, qubits, n: int) -> np.ndarray:
    rows = apply_matrix(rho, mat, tuple(qubits), n)
    cols = apply_matrix(rows.conj().T, mat, tuple(qubits), n)
    return cols.conj().T


def _apply_kraus(rho: np.ndarray, kraus, qubits, n: int) -> np.ndarray:
    # K rho K^dag = (K (K rho)^dag)^dag, so K applies on rows twice
    out = np.zeros_like(rho)
    for op in kraus:
        rows = apply_matrix(rho, op, tuple(qubits), n)
        cols = apply_matrix(rows.conj().T, op, tuple(qubits), n)
        out += cols.conj().T
    return out


class Channel:
    """A CPTP map given as a sequence of unitary / Kraus applications."""

    def __init__(self, num_qubits: int):
        self.num_qubits = num_qubits
        self.ops: list[tuple[str, object, tuple[int, ...]]] = []

    def add_unitary(self, mat: np.ndarray, qubits) -> "Channel":
        self.ops.append(("unitary", mat, tuple(qubits)))
        return self

    def add_kraus(self, kraus, qubits) -> "Channel":
        self.ops.append(("kraus", list(kraus), tuple(qubits)))
        return self

    def then(self, other: "Channel") -> "Channel":
        if other.num_qubits != self.num_qubits:
            raise DimensionError("channel qubit counts differ")
        combined = Channel(self.num_qubits)
        combined.ops = self.ops + other.ops
        return combined

    def apply(self, rho: np.ndarray) -> np.ndarray:
        out = rho
        for kind, payload, qubits in self.ops:
            if kind == "unitary":
                out = _apply_unitary(out, payload, qubits, self.num_qubits)
            else:
                out = _apply_kraus(out, payload, qubits, self.num_qubits)
        return out

    def repeated(self, times: int) -> "Channel":
        combined = Channel(self.num_qubits)
        for _ in range(times):
            combined.ops.extend(self.ops)
        return combined


# --- calibration-derived noise model ---


@dataclass(frozen=True)
class QubitNoise:
    t1_us: float
    t2_us: float
    confusion: np.ndarray  # confusion[measured][true]


@dataclass(frozen=True)
class NoiseModel:
    """Noise parameters for the qubits a circuit actually runs on."""

    qubits: tuple[QubitNoise, ...]
    scale: float = 1.0

    @classmethod
    def from_device(
        cls, dev: DeviceModel, physical_qubits, scale: float = 1.0
    ) -> "NoiseModel":
        if scale < 0:
            raise ValidationError(f"noise scale {scale} must be >= 0")
        entries = []
        for q in physical_qubits:
            cal = dev.qubits[q]
            t1, t2 = cal.t1_us, cal.t2_us
            if t2 > 2.0 * t1:
                warnings.warn(
                    f"qubit {q}: T2={t2} exceeds 2*T1={2 * t1}; clamping",
                    stacklevel=2,
                )
                t2 = 2.0 * t1
            p01, p10 = cal.prob_meas0_prep1, cal.prob_meas1_prep0
            confusion = np.array([[1.0 - p10, p01], [p10, 1.0 - p01]])
            entries.append(QubitNoise(t1_us=t1, t2_us=t2, confusion=confusion))
        return cls(qubits=tuple(entries), scale=scale)

    def depolarizing_strength(self, error: float, k: int) -> float:
        dim = 2**k
        lam = self.scale * error * dim / (dim - 1)
        return min(1.0, max(0.0, lam))

    def relaxation(self, position: int, duration_ns: float) -> list[np.ndarray]:
        if self.scale == 0 or duration_ns <= 0:
            return [np.eye(2, dtype=complex)]
        noise = self.qubits[position]
        return relaxation_kraus(
            duration_ns * self.scale, noise.t1_us, noise.t2_us
        )

    def scaled_confusion(self, position: int) -> np.ndarray:
        """Confusion interpolated/extrapolated by the noise scale."""
        m = np.eye(2) + self.scale * (self.qubits[position].confusion - np.eye(2))
        m = np.clip(m, 0.0, 1.0)
        sums = m.sum(axis=0)
        return m / sums

    def confusion_matrices(self) -> list[np.ndarray]:
        return [self.scaled_confusion(i) for i in range(len(self.qubits))]


def evolve(
    sc: LoweredCircuit, noise: NoiseModel, rho0: DensityMatrix | None = None
) -> DensityMatrix:
    """Run a lowered circuit's schedule as a density-matrix evolution.

    Units apply in program order: idle relaxation since the qubit was last
    busy, the unit's unitary, its depolarizing channel, then relaxation for
    the unit's own duration.  Measurement units only relax (readout noise is
    applied at sampling time).  Deterministic.
    """
    n = sc.num_qubits
    if n > MAX_DENSITY_QUBITS:
        raise TooLargeError(f"{n} qubits exceeds density-matrix limit")
    if len(noise.qubits) != n:
        raise DimensionError(
            f"noise model covers {len(noise.qubits)} qubits, circuit has {n}"
        )
    rho = (rho0 or DensityMatrix.ground(n)).data.copy()
    last_busy = [0.0] * n
    for unit, start in zip(sc.units, sc.start_times):
        for w in unit.wires:
            idle = start - last_busy[w]
            if idle > 0 and noise.scale > 0:
                rho = _apply_kraus(rho, noise.relaxation(w, idle), (w,), n)
            last_busy[w] = start + unit.duration_ns
        for g in unit.gates:
            if g.kind is GateKind.BARRIER:
                continue
            rho = _apply_unitary(rho, local_matrix(g.kind, g.param), g.qubits, n)
        if unit.error > 0 and noise.scale > 0:
            lam = noise.depolarizing_strength(unit.error, len(unit.wires))
            if lam > 0:
                rho = _apply_kraus(
                    rho, depolarizing_kraus(lam, len(unit.wires)), unit.wires, n
                )
        if unit.duration_ns > 0 and noise.scale > 0:
            for w in unit.wires:
                rho = _apply_kraus(
                    rho, noise.relaxation(w, unit.duration_ns), (w,), n
                )
    return DensityMatrix(n, rho)


# --- sampling and readout ---


def _bitstring(index: int, n: int) -> str:
    return format(index, f"0{n}b")


def apply_confusion(probs: np.ndarray, confusions: list[np.ndarray]) -> np.ndarray:
    """Push a probability vector through per-qubit confusion matrices."""
    n = len(confusions)
    t = probs.reshape((2,) * n)
    for q, m in enumerate(confusions):
        axis = n - 1 - q
        t = np.moveaxis(np.tensordot(m, t, axes=([1], [axis])), 0, axis)
    return t.reshape(-1)


def sample(
    rho: DensityMatrix,
    shots: int,
    confusions: list[np.ndarray] | None,
    seed: int,
) -> dict[str, int]:
    """Multinomial readout of diag(rho) through the confusion matrices."""
    if shots < 1:
        raise ValidationError(f"shots must be >= 1, got {shots}")
    probs = rho.probabilities()
    if confusions is not None:
        probs = apply_confusion(probs, confusions)
        probs = np.clip(probs, 0.0, None)
        probs = probs / probs.sum()
    rng = np.random.default_rng(seed)
    drawn = rng.multinomial(shots, probs)
    return {
        _bitstring(i, rho.n): int(c) for i, c in enumerate(drawn) if c > 0
    }


def counts_to_vector(counts: dict[str, float], n: int) -> np.ndarray:
    vec = np.zeros(2**n)
    for key, value in counts.items():
        if len(key) != n:
            raise DimensionError(f"key {key!r} has length {len(key)}, expected {n}")
        vec[int(key, 2)] += value
    return vec


def mitigate_readout(
    counts: dict[str, float], confusions: list[np.ndarray]
) -> tuple[dict[str, float], dict[str, float]]:
    """Invert the tensor-product confusion matrices.

    Returns (raw quasi-probabilities, clipped-and-renormalized distribution).
    """
    n = len(confusions)
    inverses = []
    for q, m in enumerate(confusions):
        if abs(np.linalg.det(m)) < 1e-12:
            raise SingularConfusionError(f"confusion matrix of qubit {q} is singular")
        inverses.append(np.linalg.inv(m))
    vec = counts_to_vector(counts, n)
    total = vec.sum()
    if total <= 0:
        raise ValidationError("empty counts")
    quasi_vec = apply_confusion(vec / total, inverses)
    quasi = {
        _bitstring(i, n): float(v) for i, v in enumerate(quasi_vec) if v != 0.0
    }
    clipped_vec = np.clip(quasi_vec, 0.0, None)
    norm = clipped_vec.sum()
    if norm <= 0:
        raise SingularConfusionError("mitigation produced no non-negative mass")
    clipped_vec = clipped_vec / norm
    clipped = {
        _bitstring(i, n): float(v) for i, v in enumerate(clipped_vec) if v > 0.0
    }
    return quasi, clipped


def remap_counts(counts: dict[str, float], wire_to_clbit: dict[int, int]) -> dict:
    """Re-key wire-indexed bitstrings by classical bit (qubit 0 rightmost)."""
    n = len(wire_to_clbit)
    out: dict[str, float] = {}
    for key, value in counts.items():
        bits = ["0"] * n
        for wire, clbit in wire_to_clbit.items():
            bits[n - 1 - clbit] = key[len(key) - 1 - wire]
        new_key = "".join(bits)
        out[new_key] = out.get(new_key, 0) + value
    return out


def ideal_distribution(c: CircuitIR) -> dict[str, float]:
    """Exact noiseless outcome distribution keyed by classical bits."""
    probs = np.abs(statevector(c)) ** 2
    mapping = c.measure_map()
    raw = {
        _bitstring(i, c.num_qubits): float(p)
        for i, p in enumerate(probs)
        if p > 1e-300
    }
    if not mapping:
        return raw
    return remap_counts(raw, mapping)


# --- Choi matrices and process fidelity ---


@dataclass(frozen=True)
class ChoiMatrix:
    """Trace-normalized Choi state of a channel on dim-dimensional inputs."""

    dim: int
    data: np.ndarray


def choi_of(channel: Channel) -> ChoiMatrix:
    """Exact Choi construction: send half a maximally entangled pair through.

    Index layout: row = input*dim + output; tracing out the output subsystem
    of a CPTP channel leaves I/dim.
    """
    dim = 2**channel.num_qubits
    choi = np.zeros((dim * dim, dim * dim), dtype=complex)
    for i in range(dim):
        for j in range(dim):
            basis = np.zeros((dim, dim), dtype=complex)
            basis[i, j] = 1.0
            block = channel.apply(basis)
            choi[i * dim : (i + 1) * dim, j * dim : (j + 1) * dim] = block
    return ChoiMatrix(dim=dim, data=choi / dim)


def unitary_channel(mat: np.ndarray) -> Channel:
    n = int(round(np.log2(mat.shape[0])))
    return Channel(n).add_unitary(mat, tuple(range(n)))


def composite_channel(
    app: RuleApplication,
    edge: EdgeCalibration,
    dev: DeviceModel,
    scale: float = 1.0,
) -> Channel:
    """Noisy channel of one lowered composite on a two-wire frame (0, 1).

    Wire 0 is the edge's native control, wire 1 its target (the frame
    apply_rule builds expansions in).
    """
    noise = NoiseModel.from_device(dev, (edge.control, edge.target), scale=scale)
    channel = Channel(2)
    for g in app.gates:
        channel.add_unitary(local_matrix(g.kind, g.param), g.qubits)
    error = effective_error(app, edge, dev)
    lam = noise.depolarizing_strength(error, 2)
    if lam > 0:
        channel.add_kraus(depolarizing_kraus(lam, 2), (0, 1))
    if scale > 0 and app.duration_ns > 0:
        for w in (0, 1):
            channel.add_kraus(noise.relaxation(w, app.duration_ns), (w,))
    return channel


def _sqrtm_psd(mat: np.ndarray) -> np.ndarray:
    """Hermitian square root; eigenvalues below 1e-12 of the largest are
    treated as exact zeros (sqrt would otherwise amplify rounding noise)."""
    values, vectors = np.linalg.eigh(mat)
    cutoff = 1e-12 * max(values.max(), 0.0)
    values = np.where(values > cutoff, values, 0.0)
    return (vectors * np.sqrt(values)) @ vectors.conj().T


def process_fidelity(a: ChoiMatrix, b: ChoiMatrix) -> float:
    """Uhlmann fidelity of two normalized Choi matrices, clamped to [0, 1]."""
    if a.data.shape != b.data.shape:
        raise DimensionError(
            f"Choi dimensions differ: {a.data.shape} vs {b.data.shape}"
        )
    root = _sqrtm_psd(a.data)
    inner = _sqrtm_psd(root @ b.data @ root)
    fidelity = float(np.real(np.trace(inner)) ** 2)
    return min(1.0, max(0.0, fidelity))


def qpt_infidelities(
    dev: DeviceModel,
    edge: EdgeCalibration,
    target: GateKind,
    opt,
    repetitions,
    angles,
    noise_scale: float = 1.0,
) -> list[dict]:
    """Infidelity 1-F of repeated lowered composites vs the ideal channel.

    Emits one row per (variant, angle, repetition count), where variants are
    the default CT/TC realizations plus the pulse-optimized ones where the
    edge supports them.  The noisy channel repeats the composite; the ideal
    repeats the target unitary.
    """
    from .lower import OptLevel, Polarity, apply_rule, uses_pulse

    if target not in (GateKind.ZZ, GateKind.CZ, GateKind.ZZ_SWAP):
        raise ValidationError(f"{target.value} is not an undirected two-qubit kind")
    variants: list[tuple[str, OptLevel, Polarity]] = [
        ("default-ct", OptLevel.DEFAULT, Polarity.CT),
        ("default-tc", OptLevel.DEFAULT, Polarity.TC),
    ]
    if uses_pulse(edge, opt, target) and opt is not OptLevel.DEFAULT:
        variants.append(("opt-ct", opt, Polarity.CT))
        variants.append(("opt-tc", opt, Polarity.TC))
    rows = []
    for name, level, polarity in variants:
        for theta in angles:
            app = apply_rule(target, theta, 0, 1, edge, dev, level, polarity)
            noisy = composite_channel(app, edge, dev, scale=noise_scale)
            ideal = unitary_channel(local_matrix(target, theta))
            for reps in repetitions:
                fid = process_fidelity(
                    choi_of(ideal.repeated(reps)), choi_of(noisy.repeated(reps))
                )
                rows.append(
                    {
                        "variant": name,
                        "angle": float(theta),
                        "repetitions": int(reps),
                        "duration_ns": app.duration_ns,
                        "infidelity": 1.0 - fid,
                    }
                )
    return rows
