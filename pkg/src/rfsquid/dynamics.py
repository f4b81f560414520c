"""Time-domain protocols on the reduced qubit model.

Pulse schedules are piecewise-linear control fluxes versus time (ns).
Evolution integrates i hbar dpsi/dt = H(t) psi with H in GHz via
fixed-step RK4; piecewise-constant stretches use the exact eigenbasis
propagator.  The instantaneous H(t) comes from the circuit pipeline
evaluated on control-grid snapshots with cubic interpolation in between
(a direct pipeline call per time step would dominate the runtime by
orders of magnitude).
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import least_squares

from .constants import PH
from .coupled import Controls, calibrate_effective_delta
from .fitting import bias_for_m12, coupler_m12
from .params import SystemParams
from .reduction import ReducedTwoQubitHamiltonian, reduced_at

TWO_PI = 2.0 * np.pi
DEFAULT_DT_NS = 5e-4          # 0.5 ps
DEFAULT_RAMP_NS = 0.2
NORM_DRIFT_BOUND = 1e-8
DISTORTION_CAP = 0.05         # max |delta phi| in Phi0 units

CONTROL_NAMES = ("phiq1", "phiq2", "phicjj1", "phicjj2", "phico")

BASIS_LABELS = ("dd", "du", "ud", "uu")   # computational states, qubit 1 first


class StepSizeError(RuntimeError):
    """Integrator norm drift exceeded the bound; reduce dt."""


class FlatTraceError(RuntimeError):
    """No oscillation detected in the analysis window."""


class CompensationError(RuntimeError):
    """Distortion-compensation loop failed to converge."""


@dataclass(frozen=True)
class PulseSchedule:
    """Piecewise-linear breakpoints (times ns, values Phi0 units) per control."""

    controls: dict

    def __post_init__(self):
        for name, (t, v) in self.controls.items():
            if name not in CONTROL_NAMES:
                raise ValueError(f"unknown control {name!r}")
            t = np.asarray(t, dtype=float)
            if len(t) != len(v) or len(t) == 0:
                raise ValueError(f"control {name}: breakpoint shape mismatch")
            if np.any(np.diff(t) < 0):
                raise ValueError(f"control {name}: breakpoints not time-sorted")

    def window(self):
        t0 = max(np.asarray(t)[0] for t, _ in self.controls.values())
        t1 = min(np.asarray(t)[-1] for t, _ in self.controls.values())
        return float(t0), float(t1)

    def value(self, name: str, t) -> np.ndarray:
        tt, vv = self.controls[name]
        return np.interp(t, tt, vv)

    def values_at(self, t: float) -> dict:
        return {name: float(self.value(name, t)) for name in self.controls}

    def breakpoint_times(self) -> np.ndarray:
        times = np.unique(np.concatenate(
            [np.asarray(t, dtype=float) for t, _ in self.controls.values()]))
        t0, t1 = self.window()
        return times[(times >= t0) & (times <= t1)]


def constant_schedule(t0: float, t1: float, **values) -> PulseSchedule:
    return PulseSchedule({name: ((t0, t1), (v, v)) for name, v in values.items()})


@dataclass(frozen=True)
class Trajectory:
    """State and populations versus time for a reduced-model evolution."""

    times: np.ndarray = field(repr=False)
    states: np.ndarray = field(repr=False)        # (T, dim) complex
    populations: np.ndarray = field(repr=False)   # (T, dim)

    def __post_init__(self):
        norms = np.sum(self.populations, axis=1)
        drift = float(np.max(np.abs(norms - 1.0)))
        if drift > NORM_DRIFT_BOUND:
            raise StepSizeError(
                f"norm drift {drift:.2e} exceeds {NORM_DRIFT_BOUND:.0e}; reduce dt")


def snapshot_reduced_hamiltonian(sys_params: SystemParams, controls: dict,
                                 n_levels: int = 10,
                                 k_search: int = 8) -> ReducedTwoQubitHamiltonian:
    """Pipeline snapshot at instantaneous control values.

    controls carries Phi0-unit entries phiq1, phiq2, phicjj1, phicjj2 and
    either phico (converted through the coupler model) or m12_pH.
    k_search > 4 lets the reduction skip spectator states that cross the
    computational manifold at high barriers.
    """
    if "m12_pH" in controls:
        m12 = controls["m12_pH"] * PH
    else:
        m12 = coupler_m12(sys_params.coupler, controls["phico"])
    c = Controls(phiq1_x=controls.get("phiq1", 0.0),
                 phiq2_x=controls.get("phiq2", 0.0),
                 phicjj1_x=controls["phicjj1"],
                 phicjj2_x=controls["phicjj2"],
                 m12=m12)
    return reduced_at(sys_params, c, n_levels=n_levels, k_search=k_search)


def _traceless(h: np.ndarray) -> np.ndarray:
    return h - (np.trace(h) / h.shape[0]) * np.eye(h.shape[0])


class ScheduleSnapshots:
    """Reduced 4x4 H(t) along a schedule, from cached pipeline snapshots.

    Each inter-breakpoint segment is sampled at n_per_segment points and
    cubic-interpolated entrywise (linear for constant segments).  An
    optional transform hook rewrites each ReducedTwoQubitHamiltonian
    before its matrix is taken (used to switch off couplings by hand).
    """

    def __init__(self, sys_params: SystemParams, schedule: PulseSchedule,
                 n_per_segment: int = 9, n_levels: int = 10, transform=None):
        self.sys_params = sys_params
        self.schedule = schedule
        self.n_levels = n_levels
        self.transform = transform
        self._segments = []
        times = schedule.breakpoint_times()
        for a, b in zip(times[:-1], times[1:]):
            if b - a <= 0:
                continue
            self._segments.append(self._build_segment(float(a), float(b), n_per_segment))
        if not self._segments:
            t0, t1 = schedule.window()
            self._segments.append(self._build_segment(t0, max(t1, t0 + 1e-9), 1))

    def _matrix_at(self, t: float) -> np.ndarray:
        red = snapshot_reduced_hamiltonian(self.sys_params,
                                           self.schedule.values_at(t),
                                           n_levels=self.n_levels)
        if self.transform is not None:
            red = self.transform(red)
        return _traceless(red.to_matrix())

    def _build_segment(self, a: float, b: float, n: int):
        va, vb = self.schedule.values_at(a), self.schedule.values_at(b)
        constant = all(abs(va[k] - vb[k]) < 1e-15 for k in va)
        if constant:
            return (a, b, None, self._matrix_at(a))
        ts = np.linspace(a, b, max(n, 4))
        mats = np.stack([self._matrix_at(t) for t in ts])
        spline = CubicSpline(ts, mats, axis=0)
        return (a, b, spline, None)

    def h4(self, t: float) -> np.ndarray:
        for a, b, spline, const in self._segments:
            if a - 1e-12 <= t <= b + 1e-12:
                return const if spline is None else spline(np.clip(t, a, b))
        a, b, spline, const = self._segments[-1] if t > self._segments[-1][1] \
            else self._segments[0]
        return const if spline is None else spline(np.clip(t, a, b))

    def direct_h4(self, t: float) -> np.ndarray:
        """Uncached pipeline evaluation, for interpolation-accuracy checks."""
        return self._matrix_at(t)


def _rk4_step(h_func, t: float, dt: float, psi: np.ndarray) -> np.ndarray:
    k1 = -1j * TWO_PI * (h_func(t) @ psi)
    k2 = -1j * TWO_PI * (h_func(t + dt / 2) @ (psi + dt / 2 * k1))
    k3 = -1j * TWO_PI * (h_func(t + dt / 2) @ (psi + dt / 2 * k2))
    k4 = -1j * TWO_PI * (h_func(t + dt) @ (psi + dt * k3))
    return psi + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def evolve(psi0: np.ndarray, h_func, t0: float, t1: float,
           dt: float = DEFAULT_DT_NS, sample_stride: int = 1) -> Trajectory:
    """RK4 integration of the reduced-model Schroedinger equation.

    h_func(t) returns the (traceless) Hamiltonian in GHz at time t (ns);
    constant matrices are accepted directly.  Samples every
    sample_stride steps (plus the endpoint).
    """
    if not callable(h_func):
        h_const = np.asarray(h_func)
        h_func = lambda t: h_const
    psi = np.asarray(psi0, dtype=complex).copy()
    psi /= np.linalg.norm(psi)
    n_steps = max(int(np.ceil((t1 - t0) / dt - 1e-12)), 0)
    times = [t0]
    states = [psi.copy()]
    t = t0
    for i in range(n_steps):
        step = min(dt, t1 - t)
        psi = _rk4_step(h_func, t, step, psi)
        t += step
        if (i + 1) % sample_stride == 0 or i == n_steps - 1:
            times.append(t)
            states.append(psi.copy())
    states = np.array(states)
    return Trajectory(times=np.array(times), states=states,
                      populations=np.abs(states) ** 2)


def propagator(h_func, t0: float, t1: float, dt: float = DEFAULT_DT_NS) -> np.ndarray:
    """RK4 propagator U(t1, t0) of the same equation (state-independent)."""
    if not callable(h_func):
        h_const = np.asarray(h_func)
        h_func = lambda t: h_const
    dim = h_func(t0).shape[0]
    u = np.eye(dim, dtype=complex)
    n_steps = max(int(np.ceil((t1 - t0) / dt - 1e-12)), 1)
    t = t0
    for _ in range(n_steps):
        step = min(dt, t1 - t)
        u = _rk4_step(h_func, t, step, u)
        t += step
    return u


def evolve_constant_exact(psi0: np.ndarray, h4: np.ndarray, times) -> np.ndarray:
    """Exact evolution under a constant H (GHz) via its eigenbasis."""
    w, v = np.linalg.eigh(h4)
    c = v.conj().T @ np.asarray(psi0, dtype=complex)
    phases = np.exp(-1j * TWO_PI * np.outer(np.asarray(times), w))
    return (phases * c) @ v.T.conj()


# --- coherent-oscillation protocol -------------------------------------------

@dataclass(frozen=True)
class OscillationResult:
    """Populations after the full prepare-evolve-quench cycle, per dwell time."""

    dwell_times: np.ndarray
    populations: np.ndarray          # (n_tau, 4) in the (dd, du, ud, uu) basis
    operating_point: ReducedTwoQubitHamiltonian
    m12_pH: float


@functools.lru_cache(maxsize=64)
def _operating_cjj(sys_params: SystemParams, delta_op: float, delta_latch: float):
    f1_op = calibrate_effective_delta(sys_params, 1, delta_op)
    f2_op = calibrate_effective_delta(sys_params, 2, delta_op)
    f1_latch = calibrate_effective_delta(sys_params, 1, delta_latch)
    f2_latch = calibrate_effective_delta(sys_params, 2, delta_latch)
    return f1_op, f2_op, f1_latch, f2_latch


def oscillation_schedule(sys_params: SystemParams, m12_pH: float,
                         final_bias: tuple = (0.0, 0.0),
                         delta_op: float = 1.5, delta_latch: float = 0.15,
                         ramp_ns: float = DEFAULT_RAMP_NS,
                         dwell_max: float = 10.0) -> PulseSchedule:
    """Barrier-lowering segment of the coherent-oscillation sequence.

    Both barriers ramp from the latched to the operating point over
    ramp_ns and stay there for the dwell window; flux biases sit at their
    final values throughout, the coupler at the bias realizing m12_pH.
    """
    f1_op, f2_op, f1_latch, f2_latch = _operating_cjj(sys_params, delta_op, delta_latch)
    phico = bias_for_m12(sys_params.coupler, m12_pH * PH)
    t_end = ramp_ns + dwell_max
    return PulseSchedule({
        "phiq1": ((0.0, t_end), (final_bias[0], final_bias[0])),
        "phiq2": ((0.0, t_end), (final_bias[1], final_bias[1])),
        "phicjj1": ((0.0, ramp_ns, t_end), (f1_latch, f1_op, f1_op)),
        "phicjj2": ((0.0, ramp_ns, t_end), (f2_latch, f2_op, f2_op)),
        "phico": ((0.0, t_end), (phico, phico)),
    })


def run_oscillation_protocol(sys_params: SystemParams, init: str, m12_pH: float,
                             final_bias: tuple = (0.0, 0.0), dwell_times=None,
                             delta_op: float = 1.5, delta_latch: float = 0.15,
                             ramp_ns: float = DEFAULT_RAMP_NS,
                             dt: float = DEFAULT_DT_NS, n_levels: int = 10,
                             n_snapshots: int = 11, transform=None) -> OscillationResult:
    """Prepare a computational state, lower barriers, dwell, quench, read out.

    The system starts latched in `init` (one of dd/du/ud/uu), both
    barriers ramp down over ramp_ns, the state evolves at the operating
    point for each dwell time, and the barriers ramp back up; populations
    are projected in the computational basis at the end of the quench.
    The down-ramp, dwell, and quench propagators factorize, so one pair
    of ramp integrations covers every dwell time.
    """
    if init not in BASIS_LABELS:
        raise ValueError(f"init must be one of {BASIS_LABELS}")
    dwell_times = np.atleast_1d(np.asarray(
        [0.0] if dwell_times is None else dwell_times, dtype=float))
    schedule = oscillation_schedule(sys_params, m12_pH, final_bias, delta_op,
                                    delta_latch, ramp_ns, dwell_max=1.0)
    snaps = ScheduleSnapshots(sys_params, schedule, n_per_segment=n_snapshots,
                              n_levels=n_levels, transform=transform)
    controls_op = schedule.values_at(ramp_ns + 0.5)
    red_op = snapshot_reduced_hamiltonian(sys_params, controls_op, n_levels=n_levels)
    if transform is not None:
        red_op = transform(red_op)
    h_op = _traceless(red_op.to_matrix())

    u_down = propagator(snaps.h4, 0.0, ramp_ns, dt)
    u_up = propagator(lambda t: snaps.h4(ramp_ns - t), 0.0, ramp_ns, dt)
    psi0 = np.zeros(4, dtype=complex)
    psi0[BASIS_LABELS.index(init)] = 1.0
    psi_down = u_down @ psi0
    w, v = np.linalg.eigh(h_op)
    coeffs = v.conj().T @ psi_down
    phases = np.exp(-1j * TWO_PI * np.outer(dwell_times, w))
    psi_tau = (phases * coeffs) @ v.T.conj()
    psi_end = psi_tau @ u_up.T
    pops = np.abs(psi_end) ** 2
    norms = pops.sum(axis=1)
    if np.max(np.abs(norms - 1.0)) > NORM_DRIFT_BOUND:
        raise StepSizeError("protocol norm drift exceeds bound; reduce dt")
    return OscillationResult(dwell_times=dwell_times, populations=pops,
                             operating_point=red_op, m12_pH=m12_pH)


def oscillation_map(sys_params: SystemParams, init: str, tracked: str,
                    m12_values_pH, dwell_times, **kwargs) -> np.ndarray:
    """Tracked-state population map over (m12, dwell): rows = dwell times."""
    cols = []
    for m in np.asarray(m12_values_pH, dtype=float):
        res = run_oscillation_protocol(sys_params, init, float(m),
                                       dwell_times=dwell_times, **kwargs)
        cols.append(res.populations[:, BASIS_LABELS.index(tracked)])
    return np.array(cols).T


# --- oscillation-frequency estimation ----------------------------------------

def estimate_frequency(times: np.ndarray, values: np.ndarray,
                       window_start: float, window_len: float = 0.4,
                       amplitude_floor: float = 1e-3) -> float:
    """Dominant oscillation frequency (GHz) in one time window.

    FFT peak seeds a damped-cosine least-squares fit
    a cos(2 pi f t + phi) exp(-t/tau) + c on the window samples.
    """
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    sel = (times >= window_start - 1e-12) & (times <= window_start + window_len + 1e-12)
    t = times[sel]
    y = values[sel]
    if len(t) < 8:
        raise ValueError("window contains too few samples")
    if (y.max() - y.min()) / 2.0 < amplitude_floor:
        raise FlatTraceError("no oscillation above the amplitude floor")
    t = t - t[0]
    y0 = (y - y.mean()) * np.hanning(len(y))
    dt = np.median(np.diff(t))
    nfft = 8 * len(t)
    freqs = np.fft.rfftfreq(nfft, dt)
    spec = np.abs(np.fft.rfft(y0, nfft))
    spec[0] = 0.0
    order = np.argsort(-spec)
    seeds = []
    for i in order:
        f = float(freqs[i])
        if f <= 0 or any(abs(f - s) < 0.5 / window_len for s in seeds):
            continue
        seeds.append(f)
        if len(seeds) == 3:
            break
    if not seeds:
        raise FlatTraceError("spectrum has no nonzero peak")
    a_seed = (y.max() - y.min()) / 2.0

    def residual(x):
        a, f, phi, tau_inv, c = x
        return a * np.cos(TWO_PI * f * t + phi) * np.exp(-tau_inv * t) + c - y

    best = None
    for f_seed in seeds:
        for phi_seed in (0.0, np.pi / 2, np.pi):
            res = least_squares(
                residual, x0=(a_seed, f_seed, phi_seed, 0.0, float(y.mean())),
                bounds=((0.0, 0.25 / window_len, -TWO_PI, 0.0, -np.inf),
                        (np.inf, 0.5 / dt, TWO_PI, np.inf, np.inf)))
            if best is None or res.cost < best.cost:
                best = res
    return float(best.x[1])


# --- pulse-distortion compensation -------------------------------------------

@dataclass(frozen=True)
class DistortionModel:
    """Sum of exponentially decaying reflections added to the cjj pulse.

    terms are (amplitude in Phi0 units, decay constant ns, ringing
    frequency GHz); the perturbation starts at the pulse edge (t = 0).
    """

    terms: tuple

    def __post_init__(self):
        total = sum(abs(a) for a, _, _ in self.terms)
        if total > DISTORTION_CAP:
            raise ValueError(
                f"distortion amplitude {total:.3f} Phi0 exceeds cap {DISTORTION_CAP}")

    def delta_phi(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        live = t >= 0
        for a, tau, f in self.terms:
            out = out + np.where(live, a * np.exp(-t / tau) * np.cos(TWO_PI * f * t), 0.0)
        return out


ZERO_DISTORTION = DistortionModel(terms=())


@dataclass(frozen=True)
class CompensationReport:
    """Per-iteration measured tunneling amplitudes and final correction."""

    tau_grid: np.ndarray
    delta_m: tuple                   # one measured-Delta array per iteration
    max_rel_error: tuple             # per iteration
    correction: np.ndarray           # Phi0 units on tau_grid
    iterations: int
    converged: bool
    target_ghz: float


def _single_qubit_gap_spline(sys_params: SystemParams, qubit: int,
                             center: float, halfspan: float = 8e-3, n: int = 33):
    from .coupled import loaded_capacitances
    from .squid import gap_ghz
    p = sys_params.qubit1 if qubit == 1 else sys_params.qubit2
    caps = loaded_capacitances(sys_params.qubit1.c, sys_params.qubit2.c, sys_params.c12)
    ct = caps.c1_tilde if qubit == 1 else caps.c2_tilde
    xs = np.linspace(center - halfspan, center + halfspan, n)
    gs = [gap_ghz(p, ct, float(x)) for x in xs]
    return CubicSpline(xs, gs), (xs[0], xs[-1])


def compensate_distortion(sys_params: SystemParams, distortion: DistortionModel,
                          target_delta: float = 5.0, max_iter: int = 5,
                          qubit: int = 1, duration_ns: float = 8.0,
                          window_len: float = 0.4, tau_step: float = 0.1,
                          rel_tol: float = 0.01, dt: float = DEFAULT_DT_NS,
                          sample_stride: int = 4) -> CompensationReport:
    """Iterative in-situ correction of cjj pulse distortion.

    Single-qubit coherent oscillation at the target tunneling amplitude
    is simulated under the distorted pulse; windowed frequency estimates
    give the instantaneous Delta_m(tau), the first-order flux error
    (Delta_m - Delta)/ (dDelta/dPhi_cjj) is subtracted from the applied
    pulse, and the loop repeats until Delta_m stays within rel_tol of the
    target everywhere.
    """
    from .coupled import loaded_capacitances
    from .squid import find_cjj_for_delta
    p = sys_params.qubit1 if qubit == 1 else sys_params.qubit2
    caps = loaded_capacitances(sys_params.qubit1.c, sys_params.qubit2.c, sys_params.c12)
    ct = caps.c1_tilde if qubit == 1 else caps.c2_tilde
    center = find_cjj_for_delta(p, ct, target_delta)
    pad = sum(abs(a) for a, _, _ in distortion.terms) * 2.5 + 4e-3
    spline, (xlo, xhi) = _single_qubit_gap_spline(sys_params, qubit, center,
                                                  halfspan=pad)
    slope = float(spline(center, 1))

    tau_grid = np.arange(0.0, duration_ns - window_len + 1e-9, tau_step)
    sx = np.array([[0.0, 1.0], [1.0, 0.0]])
    psi0 = np.array([0.0, 1.0], dtype=complex)    # |up>
    correction = np.zeros_like(tau_grid)
    delta_m_hist, err_hist = [], []
    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        def phicjj_of_t(t):
            corr = np.interp(t, tau_grid, correction)
            return center + distortion.delta_phi(t) + corr

        def h_func(t):
            phi = np.clip(phicjj_of_t(t), xlo, xhi)
            return -0.5 * float(spline(phi)) * sx

        traj = evolve(psi0, h_func, 0.0, duration_ns, dt=dt,
                      sample_stride=sample_stride)
        trace = traj.populations[:, 1]
        delta_m = np.array([estimate_frequency(traj.times, trace, ts, window_len)
                            for ts in tau_grid])
        delta_m_hist.append(delta_m)
        err = float(np.max(np.abs(delta_m - target_delta)) / target_delta)
        err_hist.append(err)
        if err <= rel_tol:
            converged = True
            break
        correction = correction - (delta_m - target_delta) / slope
    return CompensationReport(tau_grid=tau_grid, delta_m=tuple(delta_m_hist),
                              max_rel_error=tuple(err_hist),
                              correction=correction, iterations=iterations,
                              converged=converged, target_ghz=target_delta)
