"""Measurement-protocol simulation.

CW-ODMR spectra, FID and Hahn-echo phase accumulation for arbitrary
piecewise-constant field waveforms, the oscillating readout signal with its
decoherence envelope, photon shot-noise Monte Carlo, and shot-noise-limited
sensitivity analysis.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

from .calibration import hyperfine_hamiltonian, hyperfine_lines
from .core import (
    ElectricField,
    MagneticField,
    NVParams,
    StrainField,
    effective_field,
)

#: Coulomb constant 1/(4 pi eps0), N m^2 / C^2.
COULOMB_CONSTANT = 8.9875517923e9
ELEMENTARY_CHARGE = 1.602176634e-19  # C

DEFAULT_TRAPEZOID_STEPS = 10_000


@dataclass(frozen=True)
class Waveform:
    """Piecewise-constant waveform: values[i] holds on
    [breakpoints[i], breakpoints[i+1]); zero outside the covered span."""

    breakpoints: np.ndarray
    values: np.ndarray

    def __post_init__(self) -> None:
        t = np.asarray(self.breakpoints, dtype=float)
        v = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "breakpoints", t)
        object.__setattr__(self, "values", v)
        if t.ndim != 1 or t.size < 2 or v.size != t.size - 1:
            raise ValueError("need n+1 breakpoints for n segment values")
        if np.any(np.diff(t) <= 0.0):
            raise ValueError("breakpoints must be strictly increasing")

    @property
    def start(self) -> float:
        return float(self.breakpoints[0])

    @property
    def end(self) -> float:
        return float(self.breakpoints[-1])

    def covers(self, t0: float, t1: float) -> bool:
        return self.start <= t0 + 1e-15 and self.end >= t1 - 1e-15

    def scaled(self, factor: float) -> "Waveform":
        return Waveform(self.breakpoints, self.values * factor)

    def integral(self, t0: float, t1: float, shift: float = 0.0) -> float:
        """Exact integral of the shifted waveform w(t - shift) over [t0, t1]."""
        lo, hi = t0 - shift, t1 - shift
        edges = np.clip(self.breakpoints, lo, hi)
        return float(np.dot(self.values, np.diff(edges)))

    @staticmethod
    def square_wave(amplitude: float, half_period: float,
                    n_halves: int = 2) -> "Waveform":
        """Alternating +/- amplitude, starting positive at t = 0."""
        edges = np.arange(n_halves + 1) * half_period
        vals = amplitude * (-1.0) ** np.arange(n_halves)
        return Waveform(edges, vals)


DeltaOmega = Union[Waveform, Callable[[float], float]]


@dataclass(frozen=True)
class PulseSequence:
    """FID or Hahn-echo schedule.

    kind          "fid" | "hahn"
    tau           free-evolution time, s (total evolution: tau FID, 2*tau Hahn)
    e_waveform    transverse electric field E_perp(t), V/cm, optional
    phase_offset  delay of the waveform relative to the first pi/2 pulse, s
    """

    kind: str
    tau: float
    e_waveform: Waveform | None = None
    phase_offset: float = 0.0

    def __post_init__(self) -> None:
        if self.kind not in ("fid", "hahn"):
            raise ValueError("kind must be 'fid' or 'hahn'")
        if not self.tau > 0.0:
            raise ValueError("tau must be positive")
        if self.e_waveform is not None and not self.e_waveform.covers(
            0.0, self.total_evolution
        ):
            raise ValueError(
                "waveform does not cover the free evolution window "
                f"[0, {self.total_evolution:g}] s"
            )

    @property
    def total_evolution(self) -> float:
        return self.tau if self.kind == "fid" else 2.0 * self.tau


@dataclass(frozen=True)
class SignalModel:
    """Readout and decoherence model of the oscillating signal.

    contrast             ODMR contrast A; the ideal signal spans [-A, +A]
    photons_per_readout  expected detected photons per shot
    t2_or_t2star         envelope time constant (T2* for FID, T2 for Hahn), s
    envelope_exponent    stretching exponent of exp(-(t/T)^p)
    dead_time            per-shot initialization/readout overhead, s
    central_line         hyperfine central-line mode (contrast capped at 1/3)
    """

    contrast: float = 0.1
    photons_per_readout: float = 0.015
    t2_or_t2star: float = 304e-6
    envelope_exponent: float = 1.0
    dead_time: float = 5e-6
    central_line: bool = False

    def __post_init__(self) -> None:
        if not 0.0 < self.contrast <= 1.0:
            raise ValueError("contrast must lie in (0, 1]")
        if self.central_line and self.contrast > 1.0 / 3.0 + 1e-12:
            raise ValueError("central-line mode caps the contrast at 1/3")
        if not self.photons_per_readout > 0.0:
            raise ValueError("photons_per_readout must be positive")
        for name in ("t2_or_t2star", "envelope_exponent"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be positive")
        if self.dead_time < 0.0:
            raise ValueError("dead_time must be >= 0")


def delta_omega_waveform(seq: PulseSequence, p: NVParams) -> Waveform:
    """Transition-shift waveform d_perp * E_perp(t) in Hz from the sequence's
    electric-field waveform."""
    if seq.e_waveform is None:
        raise ValueError("sequence carries no electric-field waveform")
    return seq.e_waveform.scaled(p.d_perp)


def _integrate(
    dw: DeltaOmega, t0: float, t1: float, shift: float, n_steps: int
) -> float:
    if isinstance(dw, Waveform):
        return dw.integral(t0, t1, shift=shift)
    t = np.linspace(t0, t1, n_steps + 1)
    y = np.array([dw(ti - shift) for ti in t])
    return float(np.trapz(y, t))


def _check_domain(seq: PulseSequence, dw: DeltaOmega) -> None:
    if isinstance(dw, Waveform):
        if seq.phase_offset == 0.0:
            if not dw.covers(0.0, seq.total_evolution):
                raise ValueError(
                    "waveform does not cover the evolution window "
                    f"[0, {seq.total_evolution:g}] s"
                )
        else:
            warnings.warn(
                "phase-offset waveforms are experimental; the field is "
                "taken as zero outside the shifted waveform span",
                stacklevel=3,
            )


def phase_fid(
    seq: PulseSequence,
    delta_omega: DeltaOmega,
    n_steps: int = DEFAULT_TRAPEZOID_STEPS,
) -> float:
    """Phase collected during free induction decay, radians:
    Phi = integral over [0, tau] of 2*pi*d_omega(t) dt.

    Piecewise-constant waveforms are summed exactly; callables are integrated
    by the trapezoid rule with `n_steps` panels.
    """
    if seq.kind != "fid":
        raise ValueError("phase_fid needs a FID sequence")
    return 2.0 * math.pi * _checked_integral(seq, delta_omega, 0.0, seq.tau,
                                             n_steps)


def phase_hahn(
    seq: PulseSequence,
    delta_omega: DeltaOmega,
    n_steps: int = DEFAULT_TRAPEZOID_STEPS,
) -> float:
    """Phase collected across a Hahn echo, radians:
    Phi = int_0^tau 2*pi*d_omega dt - int_tau^2tau 2*pi*d_omega dt.

    The pi pulse at t = tau inverts the phase sense, so static shifts
    refocus to exactly zero while fields alternating in step with the pulse
    add coherently.
    """
    if seq.kind != "hahn":
        raise ValueError("phase_hahn needs a Hahn-echo sequence")
    first = _checked_integral(seq, delta_omega, 0.0, seq.tau, n_steps)
    second = _checked_integral(seq, delta_omega, seq.tau, 2.0 * seq.tau,
                               n_steps, check=False)
    return 2.0 * math.pi * (first - second)


def _checked_integral(seq, delta_omega, t0, t1, n_steps, check=True):
    if check:
        _check_domain(seq, delta_omega)
    return _integrate(delta_omega, t0, t1, seq.phase_offset, n_steps)


def signal_intensity(
    phi: float, m: SignalModel, total_evolution: float
) -> float:
    """Oscillating readout signal with its decoherence envelope:
    dI = A * exp(-(t_evol / T)^p) * cos(Phi)."""
    envelope = math.exp(
        -((total_evolution / m.t2_or_t2star) ** m.envelope_exponent)
    )
    return m.contrast * envelope * math.cos(phi)


def cw_odmr_spectrum(
    p: NVParams,
    b: MagneticField,
    e: ElectricField,
    s: StrainField,
    linewidth: float,
    contrast: float,
    freq_grid: np.ndarray,
) -> np.ndarray:
    """CW-ODMR spectrum: unit fluorescence baseline with one Lorentzian dip
    of depth `contrast` per hyperfine transition (six lines from the 9x9
    model; degenerate lines stack)."""
    if not linewidth > 0.0:
        raise ValueError("linewidth must be positive")
    freq_grid = np.asarray(freq_grid, dtype=float)
    sys = hyperfine_hamiltonian(p, b, effective_field(e, s))
    half = 0.5 * linewidth
    spectrum = np.ones_like(freq_grid)
    for f0, _m_i in hyperfine_lines(sys, p):
        spectrum -= contrast * half**2 / ((freq_grid - f0) ** 2 + half**2)
    return spectrum


@dataclass(frozen=True)
class ReadoutSample:
    """Monte-Carlo photon-count sample at a fixed ideal signal."""

    counts: np.ndarray
    mean_counts: float
    std_counts: float
    sigma_sn: float           # per-shot std of the normalized signal
    sigma_sn_averaged: float  # std of the n-shot average


def simulate_readout(
    ideal_signal: float, m: SignalModel, n_repeats: int, seed: int
) -> ReadoutSample:
    """Poisson photon counts with mean photons_per_readout * (1 + signal).

    The normalized per-shot signal is counts / photons_per_readout - 1, so
    the ideal signal in [-A, +A] maps linearly onto the mean count rate.
    Deterministic for a fixed seed.
    """
    if n_repeats < 1:
        raise ValueError("n_repeats must be >= 1")
    rate = m.photons_per_readout * (1.0 + ideal_signal)
    if rate < 0.0:
        raise ValueError("ideal_signal drives the count rate negative")
    rng = np.random.default_rng(seed)
    counts = rng.poisson(rate, size=n_repeats)
    mean = float(np.mean(counts))
    std = float(np.std(counts, ddof=1)) if n_repeats > 1 else 0.0
    sigma_sn = std / m.photons_per_readout
    return ReadoutSample(
        counts=counts,
        mean_counts=mean,
        std_counts=std,
        sigma_sn=sigma_sn,
        sigma_sn_averaged=sigma_sn / math.sqrt(n_repeats),
    )


def min_detectable_field(sigma_sn: float, delta_s: float) -> float:
    """Minimum detectable field change: the signal noise divided by the
    signal gradient per V/cm."""
    if delta_s <= 0.0:
        raise ValueError(
            "delta_s must be positive: the operating point sits at a fringe "
            "extremum with no first-order field response"
        )
    return sigma_sn / delta_s


def _kind_factors(kind: str) -> tuple[int, int]:
    """(phase factor k, evolution factor k_e): FID accrues Phi = 2*pi*d*E*k*tau
    with k=1 over an evolution tau; Hahn doubles both."""
    if kind == "fid":
        return 1, 1
    if kind == "hahn":
        return 2, 2
    raise ValueError("kind must be 'fid' or 'hahn'")


def signal_slope(m: SignalModel, d_perp: float, kind: str, tau: float) -> float:
    """Gradient of the fringe signal per V/cm at its steepest point
    (cosine zero crossing): A * envelope * 2*pi*d_perp*k*tau."""
    k, k_e = _kind_factors(kind)
    envelope = math.exp(
        -((k_e * tau / m.t2_or_t2star) ** m.envelope_exponent)
    )
    return m.contrast * envelope * 2.0 * math.pi * d_perp * k * tau


def optimal_tau(m: SignalModel, d_perp: float, kind: str) -> float:
    """Free-evolution time maximizing the fringe slope |dS/dE|, found by
    golden-section search on [T/100, 5T]."""
    t_c = m.t2_or_t2star

    def neg_slope(tau: float) -> float:
        return -signal_slope(m, d_perp, kind, tau)

    return _golden_section(neg_slope, t_c / 100.0, 5.0 * t_c, rel_tol=1e-9)


def _golden_section(f, a, b, rel_tol):
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    c, d = b - invphi * (b - a), a + invphi * (b - a)
    fc, fd = f(c), f(d)
    while (b - a) > rel_tol * abs(a + b) / 2.0:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def cycle_time(m: SignalModel, kind: str, tau: float) -> float:
    """Wall-clock duration of one shot: evolution plus readout dead time."""
    _, k_e = _kind_factors(kind)
    return k_e * tau + m.dead_time


@dataclass(frozen=True)
class SensitivityPoint:
    total_time: float
    delta_e_min_mc: float
    delta_e_min_shot_noise: float


def sensitivity_curve(
    m: SignalModel,
    d_perp: float,
    kind: str,
    total_times: np.ndarray,
    seed: int,
    tau: float | None = None,
    max_mc_repeats: int = 1_000_000,
) -> list[SensitivityPoint]:
    """Minimum detectable field versus total measurement time.

    Operates at the steepest fringe point (ideal signal 0) with tau defaulting
    to `optimal_tau`.  The Monte-Carlo column divides the empirical per-shot
    shot noise by sqrt(repeats actually simulated); the analytic column uses
    the exact Poisson noise with the continuous repeat count T / t_cycle and
    therefore scales exactly as T^(-1/2).
    """
    if tau is None:
        tau = optimal_tau(m, d_perp, kind)
    slope = signal_slope(m, d_perp, kind, tau)
    t_cycle = cycle_time(m, kind, tau)
    sigma_shot = math.sqrt(1.0 / m.photons_per_readout)  # per-shot, signal 0
    points = []
    rng_seeds = np.random.default_rng(seed).integers(0, 2**63, len(total_times))
    for t_total, sub_seed in zip(np.asarray(total_times, float), rng_seeds):
        n = max(int(t_total / t_cycle), 2)
        sample = simulate_readout(
            0.0, m, min(n, max_mc_repeats), int(sub_seed)
        )
        sigma_avg_mc = sample.sigma_sn / math.sqrt(n)
        analytic = sigma_shot / math.sqrt(t_total / t_cycle)
        points.append(
            SensitivityPoint(
                total_time=float(t_total),
                delta_e_min_mc=min_detectable_field(sigma_avg_mc, slope),
                delta_e_min_shot_noise=min_detectable_field(analytic, slope),
            )
        )
    return points


def field_sensitivity(m: SignalModel, d_perp: float, kind: str,
                      tau: float | None = None) -> float:
    """Shot-noise-limited sensitivity, V/cm per sqrt(Hz): the minimum
    detectable field after one second of averaging."""
    if tau is None:
        tau = optimal_tau(m, d_perp, kind)
    slope = signal_slope(m, d_perp, kind, tau)
    t_cycle = cycle_time(m, kind, tau)
    sigma_one_second = math.sqrt(t_cycle / m.photons_per_readout)
    return min_detectable_field(sigma_one_second, slope)


def point_charge_field(charge: float, distance: float) -> float:
    """Coulomb field of a point charge, V/cm.

    charge in multiples of the elementary charge, distance in meters.
    """
    if not distance > 0.0:
        raise ValueError("distance must be positive")
    e_v_per_m = (
        COULOMB_CONSTANT * charge * ELEMENTARY_CHARGE / distance**2
    )
    return e_v_per_m / 100.0
