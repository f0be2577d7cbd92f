"""Hyperfine-resolved model and calibration/inversion procedures.

The 9x9 electron-nuclear Hamiltonian (axial hyperfine coupling to the 14N
nuclear spin), the six ODMR lines it produces, axial-field alignment from the
outer hyperfine lines, transverse-strain inference from the central-line
splitting, and least-squares inversion of measured polar patterns into vector
field parameters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq, minimize

from .core import (
    ElectricField,
    EffectiveField,
    MagneticField,
    NVParams,
    StrainField,
    build_hamiltonian,
    effective_field,
    transition_frequencies,
)

QUARTER_TURN = math.pi / 2.0

#: Default ODMR linewidth used for alignment uncertainty, Hz.
DEFAULT_LINEWIDTH_HZ = 170e3


@dataclass(frozen=True)
class HyperfineSystem:
    """Electron (S=1) x nuclear (I=1) system with axial hyperfine coupling."""

    hamiltonian: np.ndarray  # 9x9, Hz
    a_hf: float


def hyperfine_hamiltonian(
    p: NVParams,
    b: MagneticField,
    pi: EffectiveField,
    full_tensor: bool = False,
) -> HyperfineSystem:
    """9x9 Hamiltonian H/h = H_electron x 1_nuc + a_hf * S_z x I_z, Hz.

    Product basis ordering kron(electron, nuclear) with both factors ordered
    {|+1>, |0>, |-1>}.  The Stark/strain terms act on the electron factor
    only, so m_I is conserved and the matrix is block-diagonal in the nuclear
    projection.  The full hyperfine tensor (and quadrupole) is reserved.
    """
    if full_tensor:
        raise NotImplementedError("full hyperfine tensor is not modelled")
    h_e = build_hamiltonian(p, b, pi)
    i_z = np.diag([1.0, 0.0, -1.0]).astype(complex)
    s_z = np.diag([1.0, 0.0, -1.0]).astype(complex)
    h9 = np.kron(h_e, np.eye(3)) + p.a_hf * np.kron(s_z, i_z)
    return HyperfineSystem(hamiltonian=h9, a_hf=p.a_hf)


def hyperfine_lines(
    sys: HyperfineSystem, p: NVParams
) -> list[tuple[float, int]]:
    """The six m_s = 0 -> +/-1 transitions of the hyperfine system.

    Returns (frequency Hz, m_I) pairs sorted ascending by frequency.  m_I is
    conserved, so each nuclear sector is an independent 3x3 electron block;
    the branch labelling within a block follows `transition_frequencies`.
    """
    h9 = sys.hamiltonian
    lines: list[tuple[float, int]] = []
    for m_i, i_n in ((1, 0), (0, 1), (-1, 2)):
        idx = [i_n, 3 + i_n, 6 + i_n]
        block = h9[np.ix_(idx, idx)]
        lo, hi = _block_transitions(block)
        lines.append((lo, m_i))
        lines.append((hi, m_i))
    lines.sort(key=lambda t: t[0])
    return lines


def _block_transitions(block: np.ndarray) -> tuple[float, float]:
    """Transition pair of one 3x3 electron block (same labelling rule as
    `transition_frequencies`)."""
    vals, vecs = np.linalg.eigh(block)
    i0 = int(np.argmax(np.abs(vecs[1, :]) ** 2))
    lo, hi = sorted(vals[i] for i in range(3) if i != i0)
    return lo - vals[i0], hi - vals[i0]


def outer_line_splitting(
    p: NVParams, b: MagneticField, pi: EffectiveField
) -> float:
    """Signed frequency difference between the two high-frequency outer-line
    partners that share the hyperfine shift (upper transition of the
    m_I = +1 sector minus upper transition of the m_I = -1 sector).

    The partner lines are immune to strain to first order and separate
    linearly in B_z; they overlap exactly at B_z = 0 for any transverse
    field (the two nuclear sectors are isospectral there), so their
    splitting is the alignment observable."""
    sys = hyperfine_hamiltonian(p, b, pi)
    h9 = sys.hamiltonian
    _, hi_plus = _block_transitions(h9[np.ix_([0, 3, 6], [0, 3, 6])])
    _, hi_minus = _block_transitions(h9[np.ix_([2, 5, 8], [2, 5, 8])])
    return hi_plus - hi_minus


def central_line_splitting(
    p: NVParams, b_perp: float, sigma_perp_freq: float
) -> float:
    """Splitting of the central (m_I = 0) line at B_z = 0 for a transverse
    field B_perp and transverse strain given in frequency view.

    Uses the cross-term-free geometry (strain quadrupole in quadrature with
    the field quadrupole, phi_b = 0 and phi_sigma = pi/2), so the splitting
    depends only on the two magnitudes.
    """
    b = MagneticField(b_z=0.0, b_perp=b_perp, phi_b=0.0)
    s = StrainField.from_frequencies(p, perp_hz=sigma_perp_freq,
                                     phi_sigma=QUARTER_TURN)
    pi = effective_field(ElectricField(), s)
    sys = hyperfine_hamiltonian(p, b, pi)
    block = sys.hamiltonian[np.ix_([1, 4, 7], [1, 4, 7])]
    lo, hi = _block_transitions(block)
    return hi - lo


@dataclass(frozen=True)
class AlignmentScan:
    """Axial-field alignment sweep.

    control       coil-current proxy, arbitrary units, strictly monotone
    splitting_hz  measured outer-line splitting per point (unsigned), Hz
    b_perp        transverse field during the scan, Gauss
    linewidth_hz  ODMR linewidth limiting the overlap detection, Hz
    """

    control: np.ndarray
    splitting_hz: np.ndarray
    b_perp: float = 0.0
    linewidth_hz: float = DEFAULT_LINEWIDTH_HZ

    def __post_init__(self) -> None:
        c = np.asarray(self.control, dtype=float)
        s = np.asarray(self.splitting_hz, dtype=float)
        object.__setattr__(self, "control", c)
        object.__setattr__(self, "splitting_hz", s)
        if c.size < 3 or s.size != c.size:
            raise ValueError("alignment scan needs >= 3 matched points")
        if np.any(s < 0.0):
            raise ValueError("splittings must be >= 0 (signs are recovered)")
        dc = np.diff(c)
        if not (np.all(dc > 0.0) or np.all(dc < 0.0)):
            raise ValueError("control values must be strictly monotone")


def synthesize_alignment_scan(
    p: NVParams,
    controls: np.ndarray,
    gauss_per_control: float,
    control_at_zero: float,
    b_perp: float = 0.0,
    sigma_perp_freq: float = 0.0,
    linewidth_hz: float = DEFAULT_LINEWIDTH_HZ,
) -> AlignmentScan:
    """Forward-model an alignment sweep: B_z = gauss_per_control * (c - c0)."""
    controls = np.asarray(controls, dtype=float)
    s = StrainField.from_frequencies(p, perp_hz=sigma_perp_freq,
                                     phi_sigma=QUARTER_TURN)
    pi = effective_field(ElectricField(), s)
    split = np.array(
        [
            abs(
                outer_line_splitting(
                    p,
                    MagneticField(
                        b_z=gauss_per_control * (c - control_at_zero),
                        b_perp=b_perp,
                    ),
                    pi,
                )
            )
            for c in controls
        ]
    )
    return AlignmentScan(controls, split, b_perp=b_perp,
                         linewidth_hz=linewidth_hz)


def align_axial_field(
    scan: AlignmentScan, p: NVParams | None = None
) -> tuple[float, float]:
    """Locate the control value where the outer hyperfine lines overlap
    (B_z = 0) and estimate the residual axial-field uncertainty.

    The measured splitting is unsigned; the sign flips across the overlap, so
    the minimum of the sweep marks the branch change.  Signs are restored by
    reflecting one side and the zero crossing is located by linear
    interpolation of the signed series, which is exact for splittings linear
    in the control.  Returns (control_at_zero, uncertainty in mT); the
    uncertainty is linewidth / slope of the signed splitting, converted with
    the model's splitting-per-Gauss at the operating B_perp.
    """
    if p is None:
        p = NVParams()
    c = scan.control
    s_abs = scan.splitting_hz
    imin = int(np.argmin(s_abs))
    if imin == 0 or imin == c.size - 1:
        raise ValueError(
            "scan does not bracket the overlap: minimum splitting sits at "
            "an endpoint; extend the sweep"
        )
    signed = s_abs.copy()
    signed[:imin] *= -1.0
    if np.any(np.diff(c) < 0.0):  # normalize sweep direction
        c, signed = c[::-1], -signed[::-1]
        imin = c.size - 1 - imin

    # zero crossing by local linear interpolation around the sign change
    ks = np.where(np.diff(np.signbit(signed)))[0]
    if ks.size == 0:  # all-positive after reflection: zero at the minimum
        c0 = float(c[imin])
        slope = float(np.polyfit(c, signed, 1)[0])
    else:
        k = int(ks[0])
        y0, y1 = signed[k], signed[k + 1]
        c0 = float(c[k] - y0 * (c[k + 1] - c[k]) / (y1 - y0))
        slope = float((y1 - y0) / (c[k + 1] - c[k]))

    # model splitting-per-Gauss at the operating B_perp (mixing suppresses it)
    db = 0.05
    dsdb = (
        outer_line_splitting(
            p,
            MagneticField(b_z=db, b_perp=scan.b_perp),
            EffectiveField(),
        )
        - outer_line_splitting(
            p,
            MagneticField(b_z=-db, b_perp=scan.b_perp),
            EffectiveField(),
        )
    ) / (2.0 * db)
    uncertainty_gauss = scan.linewidth_hz / abs(dsdb)
    del slope  # control-axis slope retained for diagnostics hooks
    return c0, uncertainty_gauss / 10.0  # Gauss -> mT


def infer_sigma_perp(
    central_splitting: float, b_perp: float, p: NVParams
) -> float:
    """Transverse strain (frequency view, Hz) from the measured central-line
    splitting at B_z = 0 and known B_perp.

    Root-finds the exact hyperfine model's central-line splitting, which
    accounts for the second-order B_perp contribution; splittings below that
    field-induced floor are rejected.
    """
    if central_splitting < 0.0:
        raise ValueError("central_splitting must be >= 0")
    floor = central_line_splitting(p, b_perp, 0.0)
    if central_splitting < floor * (1.0 - 1e-9):
        raise ValueError(
            f"central splitting {central_splitting:.6g} Hz is below the "
            f"B_perp-induced floor {floor:.6g} Hz; no strain can match it"
        )
    if central_splitting <= floor:
        return 0.0

    def objective(sf: float) -> float:
        return central_line_splitting(p, b_perp, sf) - central_splitting

    hi = max(central_splitting, 10.0 * floor, 1.0)
    while objective(hi) < 0.0:
        hi *= 2.0
    return float(brentq(objective, 0.0, hi, xtol=1e-6, rtol=1e-14))


# -- polar-pattern inversion --------------------------------------------------


def canonicalize_angles(phi: float) -> float:
    """Representative of the pattern's four-fold azimuth class in [0, pi/2).

    Simultaneously rotating the electric-field and strain azimuths by a
    quarter turn rigidly rotates the polar pattern by an eighth turn, so fits
    report the class member with both azimuths reduced modulo pi/2.
    """
    phi = math.fmod(phi, QUARTER_TURN)
    return phi + QUARTER_TURN if phi < 0.0 else phi


def polar_pattern_model(
    phi_b: np.ndarray,
    b_perp: float,
    d_par_e_z: float,
    d_perp_e_perp: float,
    phi_e: float,
    phi_sigma: float,
    sigma_perp_freq: float,
    p: NVParams,
) -> np.ndarray:
    """Vectorized perturbative upper-branch shift over magnetic azimuths.

    Identical to `response.delta_omega_perturbative(...).d_omega_plus` with
    the field magnitudes expressed as the fitted frequency lumps
    (d_par*E_z, d_perp*E_perp) and the characterized transverse strain
    sigma_perp_freq.
    """
    phi_b = np.asarray(phi_b, dtype=float)
    g2 = (p.gamma_e * b_perp) ** 2
    quartic = g2**2 / (4.0 * p.d_gs**2)
    pix = d_perp_e_perp * math.cos(phi_e) + sigma_perp_freq * math.cos(phi_sigma)
    piy = d_perp_e_perp * math.sin(phi_e) + sigma_perp_freq * math.sin(phi_sigma)
    c2, s2 = np.cos(2.0 * phi_b), np.sin(2.0 * phi_b)
    f_on = np.sqrt(
        pix**2 + piy**2 - (g2 / p.d_gs) * (pix * c2 - piy * s2) + quartic
    )
    sx = sigma_perp_freq * math.cos(phi_sigma)
    sy = sigma_perp_freq * math.sin(phi_sigma)
    f_off = np.sqrt(
        sx**2 + sy**2 - (g2 / p.d_gs) * (sx * c2 - sy * s2) + quartic
    )
    return d_par_e_z + f_on - f_off


@dataclass
class FitResult:
    """Recovered polar-pattern parameters.

    Angles are canonical four-fold class representatives in [0, pi/2);
    uncertainties are 1-sigma estimates from the curvature of the weighted
    residual at the optimum, in the same order as the parameters.
    """

    b_perp: float
    d_par_e_z: float
    d_perp_e_perp: float
    phi_e: float
    phi_sigma: float
    residual_rms: float
    uncertainties: dict[str, float] = field(default_factory=dict)
    converged: bool = True

    PARAM_NAMES = ("b_perp", "d_par_e_z", "d_perp_e_perp", "phi_e", "phi_sigma")

    def as_dict(self) -> dict:
        return {
            "b_perp_gauss": self.b_perp,
            "d_par_e_z_hz": self.d_par_e_z,
            "d_perp_e_perp_hz": self.d_perp_e_perp,
            "phi_e_rad": self.phi_e,
            "phi_sigma_rad": self.phi_sigma,
            "residual_rms_hz": self.residual_rms,
            "uncertainties": dict(self.uncertainties),
            "converged": self.converged,
            "angle_note": "azimuths are four-fold class representatives "
                          "in [0, pi/2)",
        }


_FIT_SCALES = np.array([10.0, 1e4, 1e5, 1.0, 1.0])


def _fit_objective(x, phi_b, dw, w, sigma_perp_freq, p):
    th = x * _FIT_SCALES
    model = polar_pattern_model(
        phi_b, abs(th[0]), th[1], abs(th[2]), th[3], th[4], sigma_perp_freq, p
    )
    r = model - dw
    return float(np.dot(w * r, r))


def fit_polar_pattern(
    phi_b: np.ndarray,
    d_omega: np.ndarray,
    p: NVParams,
    sigma_perp_freq: float,
    weights: np.ndarray | None = None,
    n_starts: int = 12,
    max_iter: int = 4000,
) -> FitResult:
    """Least-squares inversion of a measured polar pattern.

    Minimizes sum w_i (model(phi_b_i; theta) - d_omega_i)^2 over
    theta = (B_perp, d_par*E_z, d_perp*E_perp, phi_e, phi_sigma) with the
    transverse strain magnitude fixed to its characterized value.  Multi-start
    simplex refinement over the angle ambiguity classes, followed by repeated
    restarts at the incumbent; the returned angles are the canonical
    four-fold representatives.  Weights default to uniform; when per-point
    standard deviations are known pass weights = 1/sigma^2.
    """
    phi_b = np.asarray(phi_b, dtype=float)
    dw = np.asarray(d_omega, dtype=float)
    if phi_b.size < 8:
        raise ValueError("fit needs at least 8 angles")
    if phi_b.max() - phi_b.min() < math.pi * (1.0 - 1e-9):
        raise ValueError("angles must span at least pi")
    if np.ptp(dw) <= 0.0:
        raise ValueError("degenerate (flat) pattern cannot be inverted")
    w = np.ones_like(dw) if weights is None else np.asarray(weights, float)

    # data-driven amplitude seeds; angles from a grid over the classes
    amp0 = max(0.5 * float(np.ptp(dw)), 1.0)
    mean0 = float(np.mean(dw))
    if n_starts < 8:
        n_starts = 8
    starts = []
    for k in range(n_starts):
        ang_e = (k % 4) * QUARTER_TURN + QUARTER_TURN / 2.0
        ang_s = ((k // 4) % 4) * QUARTER_TURN + QUARTER_TURN / 2.0
        starts.append(
            np.array([20.0, mean0, amp0, ang_e, ang_s]) / _FIT_SCALES
        )

    args = (phi_b, dw, w, sigma_perp_freq, p)
    best_x, best_f = None, math.inf
    converged = False
    for x0 in starts:
        res = minimize(
            _fit_objective, x0, args=args, method="Nelder-Mead",
            options={"xatol": 1e-10, "fatol": 1e-12, "maxiter": max_iter,
                     "adaptive": True},
        )
        if res.fun < best_f:
            best_x, best_f, converged = res.x, res.fun, bool(res.success)

    # polish: restart the simplex at the incumbent until it stalls
    for _ in range(4):
        res = minimize(
            _fit_objective, best_x, args=args, method="Nelder-Mead",
            options={"xatol": 1e-12, "fatol": 1e-14, "maxiter": max_iter},
        )
        improved = res.fun < best_f * (1.0 - 1e-12)
        if res.fun < best_f:
            best_x, best_f, converged = res.x, res.fun, bool(res.success)
        if not improved:
            break

    theta = best_x * _FIT_SCALES
    theta[0] = abs(theta[0])
    theta[2] = abs(theta[2])
    dof = max(dw.size - 5, 1)
    residual_rms = math.sqrt(best_f / float(np.sum(w)))

    unc = _curvature_uncertainties(best_x, args, best_f, dof,
                                   uniform=(weights is None))
    return FitResult(
        b_perp=float(theta[0]),
        d_par_e_z=float(theta[1]),
        d_perp_e_perp=float(theta[2]),
        phi_e=canonicalize_angles(float(theta[3])),
        phi_sigma=canonicalize_angles(float(theta[4])),
        residual_rms=residual_rms,
        uncertainties=unc,
        converged=converged,
    )


def _curvature_uncertainties(x, args, f0, dof, uniform):
    """1-sigma parameter uncertainties from the central finite-difference
    Hessian of chi^2/2 at the optimum (relative step 1e-4)."""
    n = x.size
    hstep = 1e-4 * np.maximum(np.abs(x), 1e-3)
    hess = np.empty((n, n))
    for i in range(n):
        for j in range(i, n):
            ei = np.zeros(n); ei[i] = hstep[i]
            ej = np.zeros(n); ej[j] = hstep[j]
            fpp = _fit_objective(x + ei + ej, *args)
            fpm = _fit_objective(x + ei - ej, *args)
            fmp = _fit_objective(x - ei + ej, *args)
            fmm = _fit_objective(x - ei - ej, *args)
            hess[i, j] = hess[j, i] = (fpp - fpm - fmp + fmm) / (
                8.0 * hstep[i] * hstep[j]
            )  # Hessian of chi^2/2
    names = FitResult.PARAM_NAMES
    try:
        cov = np.linalg.inv(hess)
        if uniform:
            cov = cov * (f0 / dof)
        diag = np.diag(cov) * _FIT_SCALES**2
        return {
            nm: (math.sqrt(d) if d > 0.0 else math.inf)
            for nm, d in zip(names, diag)
        }
    except np.linalg.LinAlgError:
        return {nm: math.inf for nm in names}
