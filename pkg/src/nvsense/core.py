"""Ground-state spin-1 model of the NV centre.

Physical constants, field containers, S=1 spin operators, the ground-state
spin Hamiltonian under combined magnetic / electric / strain fields, and its
exact spectral decomposition.

Unit conventions (used consistently across the package):
    frequencies    Hz   (every Hamiltonian is H/h)
    magnetic field Gauss
    electric field V/cm (strain expressed as an equivalent electric field)
    time           seconds
    angles         radians

Basis ordering is {|+1>, |0>, |-1>} everywhere.

Frame convention for the transverse (non-axial) Stark coupling: the
quadrupole operator pair is oriented so that exact diagonalization, the
second-order transition-shift formula (`nvsense.response.f_function`) and the
polar-pattern fit all share one transverse frame, with the magnetic-field
azimuth defined by tan(phi_b) = B_y / B_x.  Equivalent published forms of the
coupling differ from this one by a fixed 90-degree rotation of the transverse
axes; only the azimuth origin, not the physics, is affected.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

TWO_PI = 2.0 * math.pi

# Exact SI conversion factors.
GAUSS_PER_TESLA = 1.0e4
GAUSS_PER_MILLITESLA = 10.0
V_PER_M_PER_V_PER_CM = 100.0

_HERMITICITY_RTOL = 1e-12


def _wrap_angle(phi: float) -> float:
    """Map an angle onto [0, 2*pi)."""
    phi = math.fmod(phi, TWO_PI)
    return phi + TWO_PI if phi < 0.0 else phi


@dataclass(frozen=True)
class NVParams:
    """Physical constants of a single NV centre.

    d_gs         zero-field splitting, Hz
    d_par        axial Stark coefficient, Hz cm/V
    d_perp       non-axial Stark coefficient, Hz cm/V
    g_e          electron g-factor
    mu_b_over_h  Bohr magneton / Planck constant, Hz/Gauss
    a_hf         axial 14N hyperfine splitting magnitude, Hz
    """

    d_gs: float = 2.87e9
    d_par: float = 0.35
    d_perp: float = 17.0
    g_e: float = 2.0028
    mu_b_over_h: float = 1.39962e6
    a_hf: float = 2.2e6

    def __post_init__(self) -> None:
        for name in ("d_gs", "d_par", "d_perp", "g_e", "mu_b_over_h", "a_hf"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"NVParams.{name} must be strictly positive")
        if not self.d_par < self.d_perp:
            raise ValueError("NVParams requires d_par < d_perp")

    @property
    def gamma_e(self) -> float:
        """Electron Zeeman coefficient g_e * mu_B / h, Hz/Gauss."""
        return self.g_e * self.mu_b_over_h


@dataclass(frozen=True)
class MagneticField:
    """Magnetic field in polar form: axial b_z, transverse (b_perp, phi_b)."""

    b_z: float = 0.0
    b_perp: float = 0.0
    phi_b: float = 0.0

    def __post_init__(self) -> None:
        if self.b_perp < 0.0:
            raise ValueError("b_perp must be >= 0")
        object.__setattr__(self, "phi_b", _wrap_angle(self.phi_b))

    @property
    def cartesian(self) -> tuple[float, float, float]:
        return (
            self.b_perp * math.cos(self.phi_b),
            self.b_perp * math.sin(self.phi_b),
            self.b_z,
        )

    @classmethod
    def from_cartesian(cls, b_x: float, b_y: float, b_z: float) -> "MagneticField":
        return cls(b_z=b_z, b_perp=math.hypot(b_x, b_y), phi_b=math.atan2(b_y, b_x))


@dataclass(frozen=True)
class ElectricField:
    """Applied electric field in polar form, V/cm."""

    e_z: float = 0.0
    e_perp: float = 0.0
    phi_e: float = 0.0

    def __post_init__(self) -> None:
        if self.e_perp < 0.0:
            raise ValueError("e_perp must be >= 0")
        object.__setattr__(self, "phi_e", _wrap_angle(self.phi_e))

    @property
    def cartesian(self) -> tuple[float, float, float]:
        return (
            self.e_perp * math.cos(self.phi_e),
            self.e_perp * math.sin(self.phi_e),
            self.e_z,
        )


@dataclass(frozen=True)
class StrainField:
    """Crystal strain treated as an equivalent local electric field, V/cm.

    The frequency view (d_perp * sigma_perp, in Hz) is the stored quantity in
    most experiments; use `from_frequencies` / `perp_frequency` to convert.
    """

    sigma_z: float = 0.0
    sigma_perp: float = 0.0
    phi_sigma: float = 0.0

    def __post_init__(self) -> None:
        if self.sigma_perp < 0.0:
            raise ValueError("sigma_perp must be >= 0")
        object.__setattr__(self, "phi_sigma", _wrap_angle(self.phi_sigma))

    @property
    def cartesian(self) -> tuple[float, float, float]:
        return (
            self.sigma_perp * math.cos(self.phi_sigma),
            self.sigma_perp * math.sin(self.phi_sigma),
            self.sigma_z,
        )

    def perp_frequency(self, p: NVParams) -> float:
        """Transverse strain in frequency view, Hz."""
        return p.d_perp * self.sigma_perp

    def par_frequency(self, p: NVParams) -> float:
        """Axial strain in frequency view, Hz."""
        return p.d_par * self.sigma_z

    @classmethod
    def from_frequencies(
        cls,
        p: NVParams,
        perp_hz: float = 0.0,
        phi_sigma: float = 0.0,
        par_hz: float = 0.0,
    ) -> "StrainField":
        return cls(
            sigma_z=par_hz / p.d_par,
            sigma_perp=perp_hz / p.d_perp,
            phi_sigma=phi_sigma,
        )


@dataclass(frozen=True)
class EffectiveField:
    """Total effective electric field (applied + strain), Cartesian, V/cm."""

    pi_x: float = 0.0
    pi_y: float = 0.0
    pi_z: float = 0.0

    @property
    def pi_perp(self) -> float:
        return math.hypot(self.pi_x, self.pi_y)

    @property
    def phi_pi(self) -> float:
        if self.pi_x == 0.0 and self.pi_y == 0.0:
            return 0.0
        return _wrap_angle(math.atan2(self.pi_y, self.pi_x))


def effective_field(e: ElectricField, s: StrainField) -> EffectiveField:
    """Componentwise vector sum of the applied field and the strain field."""
    ex, ey, ez = e.cartesian
    sx, sy, sz = s.cartesian
    return EffectiveField(pi_x=ex + sx, pi_y=ey + sy, pi_z=ez + sz)


class SpinOperators(NamedTuple):
    s_x: np.ndarray
    s_y: np.ndarray
    s_z: np.ndarray


def spin_operators() -> SpinOperators:
    """Standard S=1 matrices in the {|+1>, |0>, |-1>} basis."""
    inv_sqrt2 = 1.0 / math.sqrt(2.0)
    s_x = inv_sqrt2 * np.array(
        [[0, 1, 0], [1, 0, 1], [0, 1, 0]], dtype=complex
    )
    s_y = inv_sqrt2 * np.array(
        [[0, -1j, 0], [1j, 0, -1j], [0, 1j, 0]], dtype=complex
    )
    s_z = np.diag([1.0, 0.0, -1.0]).astype(complex)
    return SpinOperators(s_x, s_y, s_z)


_SX, _SY, _SZ = spin_operators()
_SZ2_MINUS = _SZ @ _SZ - (2.0 / 3.0) * np.eye(3)       # S_z^2 - S(S+1)/3
_QUAD_A = _SX @ _SX - _SY @ _SY                        # |+1><-1| + h.c.
_QUAD_B = _SX @ _SY + _SY @ _SX                        # -i|+1><-1| + h.c.


def build_hamiltonian(
    p: NVParams, b: MagneticField, pi: EffectiveField
) -> np.ndarray:
    """Ground-state spin Hamiltonian H/h in Hz, 3x3 complex Hermitian.

    Three terms: the axial zero-field plus axial Stark splitting on
    S_z^2 - S(S+1)/3, the electron Zeeman interaction, and the transverse
    Stark/strain coupling on the spin quadrupole pair.  The transverse term
    is oriented per the package frame convention (see module docstring), so
    that <+1|H|-1> = -d_perp * (Pi_x + i Pi_y).
    """
    bx, by, bz = b.cartesian
    for v in (bx, by, bz, pi.pi_x, pi.pi_y, pi.pi_z):
        if not math.isfinite(v):
            raise ValueError("field components must be finite")
    h = (p.d_gs + p.d_par * pi.pi_z) * _SZ2_MINUS
    h = h + p.gamma_e * (bx * _SX + by * _SY + bz * _SZ)
    h = h - p.d_perp * (pi.pi_x * _QUAD_A - pi.pi_y * _QUAD_B)
    return h


def is_hermitian(h: np.ndarray, rtol: float = _HERMITICITY_RTOL) -> bool:
    scale = np.linalg.norm(h)
    if scale == 0.0:
        return True
    return np.linalg.norm(h - h.conj().T) <= rtol * scale


class EigenSystem(NamedTuple):
    """Ascending eigenvalues (Hz) and orthonormal eigenvector columns."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def _eigvals3_closed_form(h: np.ndarray) -> np.ndarray:
    """Eigenvalues of a 3x3 Hermitian matrix from the characteristic
    polynomial, via the trigonometric solution of the reduced cubic."""
    mu = np.trace(h).real / 3.0
    m = h - mu * np.eye(3)
    # theta^2 = Tr(M^2)/2 for the traceless part
    theta2 = 0.5 * np.vdot(m, m).real
    if theta2 <= 0.0:
        return np.full(3, mu)
    theta = math.sqrt(theta2)
    det = np.linalg.det(m).real
    arg = det / theta**3 * math.sqrt(27.0) / 2.0
    arg = min(1.0, max(-1.0, arg))
    phi = math.asin(arg) / 3.0
    lam = [
        2.0 / math.sqrt(3.0) * math.sin(phi + 2.0 * math.pi * k / 3.0)
        for k in range(3)
    ]
    return np.sort(mu + theta * np.asarray(lam))


def _eigvec_from_value(h: np.ndarray, lam: float) -> np.ndarray | None:
    """Null vector of (h - lam*I) from the largest cross product of rows."""
    m = h - lam * np.eye(3)
    best = None
    best_norm = 0.0
    for i, j in ((0, 1), (0, 2), (1, 2)):
        v = np.cross(m[i], m[j])
        n = np.linalg.norm(v)
        if n > best_norm:
            best, best_norm = v, n
    scale = np.linalg.norm(m)
    if best is None or best_norm <= 1e-7 * max(scale, 1.0) ** 2:
        return None
    return best / best_norm


def _fix_phase(vecs: np.ndarray) -> np.ndarray:
    """Deterministic gauge: largest-magnitude component real and positive."""
    out = vecs.copy()
    for k in range(out.shape[1]):
        idx = int(np.argmax(np.abs(out[:, k])))
        ref = out[idx, k]
        if abs(ref) > 0.0:
            out[:, k] *= ref.conjugate() / abs(ref)
    return out


def eigensolve(h: np.ndarray, rtol: float = _HERMITICITY_RTOL) -> EigenSystem:
    """Spectral decomposition of a Hermitian matrix.

    3x3 inputs take the closed-form characteristic-polynomial path with an
    automatic LAPACK fallback when the analytic eigenvectors are
    ill-conditioned (near-degenerate spectra); larger matrices go straight to
    the iterative Hermitian solver.  Output is deterministic for identical
    input: ascending eigenvalues, phase-fixed orthonormal columns.
    """
    h = np.asarray(h, dtype=complex)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise ValueError("eigensolve expects a square matrix")
    if not is_hermitian(h, rtol=max(rtol, 1e-10)):
        raise ValueError("matrix is not Hermitian within tolerance")
    h = 0.5 * (h + h.conj().T)

    if h.shape[0] == 3:
        vals = _eigvals3_closed_form(h)
        scale = max(np.linalg.norm(h), 1.0)
        gaps_ok = (vals[1] - vals[0] > 1e-9 * scale) and (
            vals[2] - vals[1] > 1e-9 * scale
        )
        if gaps_ok:
            cols = [_eigvec_from_value(h, lam) for lam in vals]
            if all(c is not None for c in cols):
                vecs = np.column_stack(cols)
                # Gram-Schmidt polish keeps orthogonality at roundoff level.
                for k in range(3):
                    for m in range(k):
                        vecs[:, k] -= vecs[:, m] * np.vdot(vecs[:, m], vecs[:, k])
                    vecs[:, k] /= np.linalg.norm(vecs[:, k])
                resid = np.linalg.norm(h @ vecs - vecs * vals)
                if resid <= 1e-9 * scale:
                    return EigenSystem(vals, _fix_phase(vecs))

    vals, vecs = np.linalg.eigh(h)
    return EigenSystem(vals, _fix_phase(vecs))


def transition_frequencies(
    p: NVParams, b: MagneticField, pi: EffectiveField
) -> tuple[float, float]:
    """Exact m_s = 0 -> -1/+1 transition frequencies (omega_minus, omega_plus), Hz.

    Branches are labelled by continuation from the B = 0 eigenbasis of the
    same effective field: the m_s = 0 branch is the eigenvector with maximum
    |0> weight (at B = 0 it is exactly |0>), and the remaining pair keeps its
    energy ordering, which coincides with adiabatic tracking because the pair
    splitting 2*sqrt((gamma_e B_z)^2 + |coupling|^2) never closes along a
    field sweep while any transverse coupling is present.  At an exact
    degeneracy both transitions are returned equal.
    """
    vals, vecs = eigensolve(build_hamiltonian(p, b, pi))
    weight0 = np.abs(vecs[1, :]) ** 2
    i0 = int(np.argmax(weight0))
    rest = [i for i in range(3) if i != i0]
    lo, hi = sorted(vals[i] for i in rest)
    return lo - vals[i0], hi - vals[i0]


# -- unit conversions --------------------------------------------------------

# (from, to) -> multiplicative factor, for pure factor pairs
_FACTORS = {
    ("gauss", "tesla"): 1.0 / GAUSS_PER_TESLA,
    ("tesla", "gauss"): GAUSS_PER_TESLA,
    ("gauss", "mT"): 1.0 / GAUSS_PER_MILLITESLA,
    ("mT", "gauss"): GAUSS_PER_MILLITESLA,
    ("tesla", "mT"): 1.0e3,
    ("mT", "tesla"): 1.0e-3,
    ("V/cm", "V/m"): V_PER_M_PER_V_PER_CM,
    ("V/m", "V/cm"): 1.0 / V_PER_M_PER_V_PER_CM,
}


def convert_units(
    value: float, from_unit: str, to_unit: str, p: NVParams | None = None
) -> float:
    """Exact factor conversion between supported unit pairs.

    Magnetic: gauss / tesla / mT.  Electric: V/cm / V/m.  Strain views:
    'strain_perp_hz' <-> 'V/cm' via d_perp and 'strain_par_hz' <-> 'V/cm'
    via d_par (these require `p`).  Unsupported pairs are rejected.
    """
    if from_unit == to_unit:
        return value
    key = (from_unit, to_unit)
    if key in _FACTORS:
        return value * _FACTORS[key]
    strain = {
        ("strain_perp_hz", "V/cm"): lambda q: q / p.d_perp,
        ("V/cm", "strain_perp_hz"): lambda q: q * p.d_perp,
        ("strain_par_hz", "V/cm"): lambda q: q / p.d_par,
        ("V/cm", "strain_par_hz"): lambda q: q * p.d_par,
    }
    if key in strain:
        if p is None:
            raise ValueError("strain view conversions need NVParams")
        return strain[key](value)
    raise ValueError(f"unsupported unit conversion: {from_unit!r} -> {to_unit!r}")
