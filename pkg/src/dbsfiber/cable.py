"""Multi-compartment Hodgkin-Huxley cable driven by an extracellular field.

The fiber is an unmyelinated uniform cable of ``n_comp`` compartments with
sealed ends. Each compartment carries standard squid-axon Na/K/leak
channels; the extracellular potential enters as an equivalent injected
current proportional to its second spatial difference along the fiber
(the activating function), one-sided at the ends.

Units follow the common membrane convention: mV, ms, mS/cm**2,
uF/cm**2, uA/cm**2. Public interfaces take seconds and nanoamperes and
convert at the boundary.

Integration is exponential-Euler for the gating variables and implicit
(backward-Euler with a tridiagonal solve over the axial coupling) for the
membrane potentials. The deterministic path runs as a compiled numba
kernel; the stochastic path advances Markov channel populations per
compartment by tau-leaping, falling back to exact jumps where the
expected event count per step is small.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from numba import njit

from .errors import CalibrationError, NumericalError, ValidationError

REST_MV = -65.0
DEFAULT_DT_S = 1.0e-6
DETECTION_FRACTION = 0.75
SINGLE_CHANNEL_PS = 20.0  # both Na and K

# ---------------------------------------------------------------------------
# configuration and state


@dataclass(frozen=True)
class CableConfig:
    """Geometry, passive properties and channel densities of the fiber."""

    length_mm: float = 8.0
    n_comp: int = 40
    diameter_um: float = 2.0
    axial_resistivity_ohm_cm: float = 100.0
    c_m: float = 1.0  # uF/cm**2
    g_na: float = 120.0  # mS/cm**2
    g_k: float = 36.0
    g_leak: float = 0.3
    e_na: float = 50.0  # mV
    e_k: float = -77.0
    e_leak: float = -54.4
    temperature_factor: float = 1.0
    gating_mode: str = "deterministic"
    channel_scale: float = 1.0  # multiplies stochastic channel counts

    def __post_init__(self):
        problems = []
        if self.n_comp < 3:
            problems.append(f"need at least 3 compartments, got {self.n_comp}")
        for name in ("g_na", "g_k", "g_leak"):
            if getattr(self, name) < 0:
                problems.append(f"{name} must be >= 0")
        for name in ("length_mm", "diameter_um", "axial_resistivity_ohm_cm",
                     "c_m", "temperature_factor"):
            if getattr(self, name) <= 0:
                problems.append(f"{name} must be positive")
        if self.gating_mode not in ("deterministic", "stochastic"):
            problems.append(f"unknown gating mode {self.gating_mode!r}")
        if self.channel_scale <= 0:
            problems.append("channel_scale must be positive")
        if problems:
            raise ValidationError(problems)

    @property
    def compartment_length_um(self) -> float:
        return self.length_mm * 1000.0 / self.n_comp

    @property
    def area_cm2(self) -> float:
        """Membrane area of one compartment (cylinder side wall)."""
        d_cm = self.diameter_um * 1e-4
        l_cm = self.compartment_length_um * 1e-4
        return np.pi * d_cm * l_cm

    @property
    def g_axial(self) -> float:
        """Axial coupling conductance in mS/cm**2 of membrane.

        d / (4 R_i l**2) in S/cm**2 for diameter d and compartment
        length l, the standard discrete-cable coefficient.
        """
        d_cm = self.diameter_um * 1e-4
        l_cm = self.compartment_length_um * 1e-4
        return 1e3 * d_cm / (4.0 * self.axial_resistivity_ohm_cm * l_cm * l_cm)

    def channel_counts(self) -> tuple[int, int]:
        """(Na, K) channels per compartment from density x area / gamma."""
        gamma_ms = SINGLE_CHANNEL_PS * 1e-9  # pS -> mS
        n_na = int(round(self.g_na * self.area_cm2 / gamma_ms * self.channel_scale))
        n_k = int(round(self.g_k * self.area_cm2 / gamma_ms * self.channel_scale))
        return n_na, n_k

    def na_to_density(self, amplitude_na: float) -> float:
        """Convert a nA current into uA/cm**2 for one compartment."""
        return amplitude_na * 1e-3 / self.area_cm2

    @property
    def detection_compartment(self) -> int:
        return int(DETECTION_FRACTION * self.n_comp)


@dataclass
class CableState:
    """Instantaneous cable state; arrays are owned (never aliased)."""

    v_mv: np.ndarray
    t_s: float = 0.0
    m: np.ndarray | None = None
    h: np.ndarray | None = None
    n: np.ndarray | None = None
    counts: np.ndarray | None = None  # (13, n_comp) Markov state occupancies

    def copy(self) -> "CableState":
        return CableState(
            v_mv=self.v_mv.copy(),
            t_s=self.t_s,
            m=None if self.m is None else self.m.copy(),
            h=None if self.h is None else self.h.copy(),
            n=None if self.n is None else self.n.copy(),
            counts=None if self.counts is None else self.counts.copy(),
        )


@dataclass(frozen=True)
class AxonalInput:
    """Solitary current pulse entering the fiber at one compartment."""

    amplitude_na: float
    duration_ms: float = 1.0
    onset_s: float = 0.0
    compartment: int = 0

    def __post_init__(self):
        if self.duration_ms <= 0:
            raise ValidationError([f"input duration must be > 0, got {self.duration_ms}"])

    def at_onset(self, onset_s: float) -> "AxonalInput":
        return replace(self, onset_s=onset_s)


@dataclass
class ExtracellularDrive:
    """Sampled extracellular potential, time x compartment, in volts."""

    u_e_v: np.ndarray
    dt_s: float = 5.0e-6

    def __post_init__(self):
        self.u_e_v = np.ascontiguousarray(self.u_e_v, dtype=float)
        if self.u_e_v.ndim != 2:
            raise ValidationError(["drive must be a (time, compartment) matrix"])
        if not np.all(np.isfinite(self.u_e_v)):
            raise ValidationError(["drive contains non-finite values"])
        if self.dt_s <= 0:
            raise ValidationError(["drive dt must be positive"])

    @property
    def span_s(self) -> float:
        return self.u_e_v.shape[0] * self.dt_s


@dataclass
class MembraneTrace:
    """Recorded membrane potentials, time x compartment, in mV."""

    times_s: np.ndarray
    v_mv: np.ndarray

    def spike_time_s(self, compartment: int, threshold_mv: float = 0.0,
                     after_s: float = 0.0) -> float | None:
        """Time of the first upward threshold crossing, linearly interpolated."""
        v = self.v_mv[:, compartment]
        t = self.times_s
        up = (v[:-1] < threshold_mv) & (v[1:] >= threshold_mv) & (t[1:] > after_s)
        idx = np.nonzero(up)[0]
        if idx.size == 0:
            return None
        i = idx[0]
        frac = (threshold_mv - v[i]) / (v[i + 1] - v[i])
        return float(t[i] + frac * (t[i + 1] - t[i]))


# ---------------------------------------------------------------------------
# kinetics


@njit(cache=True)
def _rates(v):
    """Standard squid-axon rate constants (1/ms) at membrane potential v (mV)."""
    dv = v + 40.0
    if abs(dv) < 1e-6:
        am = 1.0  # limit of 0.1*dv / (1 - exp(-dv/10))
    else:
        am = 0.1 * dv / (1.0 - np.exp(-dv / 10.0))
    bm = 4.0 * np.exp(-(v + 65.0) / 18.0)
    ah = 0.07 * np.exp(-(v + 65.0) / 20.0)
    bh = 1.0 / (1.0 + np.exp(-(v + 35.0) / 10.0))
    dv = v + 55.0
    if abs(dv) < 1e-6:
        an = 0.1
    else:
        an = 0.01 * dv / (1.0 - np.exp(-dv / 10.0))
    bn = 0.125 * np.exp(-(v + 65.0) / 80.0)
    return am, bm, ah, bh, an, bn


def rate_table(v_mv) -> np.ndarray:
    """Vectorized rates, shape (6, len(v)): alpha/beta for m, h, n."""
    v = np.atleast_1d(np.asarray(v_mv, dtype=float))
    out = np.empty((6, v.size))
    with np.errstate(divide="ignore", invalid="ignore"):
        dv = v + 40.0
        out[0] = np.where(np.abs(dv) < 1e-6, 1.0,
                          0.1 * dv / (1.0 - np.exp(-dv / 10.0)))
        out[1] = 4.0 * np.exp(-(v + 65.0) / 18.0)
        out[2] = 0.07 * np.exp(-(v + 65.0) / 20.0)
        out[3] = 1.0 / (1.0 + np.exp(-(v + 35.0) / 10.0))
        dv = v + 55.0
        out[4] = np.where(np.abs(dv) < 1e-6, 0.1,
                          0.01 * dv / (1.0 - np.exp(-dv / 10.0)))
        out[5] = 0.125 * np.exp(-(v + 65.0) / 80.0)
    return out


def steady_gating(v_mv: float) -> tuple[float, float, float]:
    """Equilibrium (m, h, n) at a clamped potential."""
    am, bm, ah, bh, an, bn = _rates(v_mv)
    return am / (am + bm), ah / (ah + bh), an / (an + bn)


# ---------------------------------------------------------------------------
# deterministic kernel


@njit(cache=True)
def _integrate_det(v, m, h, n, n_steps, dt, g_ax, c_m, g_na, g_k, g_l,
                   e_na, e_k, e_l, phi, act, drive_stride, inj, inj_start,
                   inj_stop, record_stride, trace):
    """Advance the cable; returns (-1, -1) or the blow-up (step, compartment).

    act: (rows, n_comp) activating-function current in uA/cm**2 on the
    drive grid; inj: per-compartment injected density applied on steps in
    [inj_start, inj_stop). Records v into trace every record_stride steps
    (trace[0] is the initial state).
    """
    nc = v.shape[0]
    n_rows = act.shape[0]
    cdt = c_m / dt
    dg = np.empty(nc)
    rhs = np.empty(nc)
    cp = np.empty(nc)
    dp = np.empty(nc)
    for s in range(n_steps):
        # gating first (exponential Euler at the pre-step potential)
        for i in range(nc):
            am, bm, ah, bh, an, bn = _rates(v[i])
            a = phi * am
            b = phi * bm
            inf = a / (a + b)
            m[i] = inf + (m[i] - inf) * np.exp(-dt * (a + b))
            a = phi * ah
            b = phi * bh
            inf = a / (a + b)
            h[i] = inf + (h[i] - inf) * np.exp(-dt * (a + b))
            a = phi * an
            b = phi * bn
            inf = a / (a + b)
            n[i] = inf + (n[i] - inf) * np.exp(-dt * (a + b))

        row = s // drive_stride
        inject = inj_start <= s < inj_stop
        for i in range(nc):
            gna_i = g_na * m[i] * m[i] * m[i] * h[i]
            gk_i = g_k * n[i] * n[i] * n[i] * n[i]
            gion = gna_i + gk_i + g_l
            neighbors = 2.0 if 0 < i < nc - 1 else 1.0
            dg[i] = cdt + gion + g_ax * neighbors
            r = cdt * v[i] + gna_i * e_na + gk_i * e_k + g_l * e_l
            if row < n_rows:
                r += act[row, i]
            if inject:
                r += inj[i]
            rhs[i] = r

        # Thomas solve: off-diagonals are the constant -g_ax
        cp[0] = -g_ax / dg[0]
        dp[0] = rhs[0] / dg[0]
        for i in range(1, nc):
            denom = dg[i] + g_ax * cp[i - 1]
            cp[i] = -g_ax / denom
            dp[i] = (rhs[i] + g_ax * dp[i - 1]) / denom
        v[nc - 1] = dp[nc - 1]
        for i in range(nc - 2, -1, -1):
            v[i] = dp[i] - cp[i] * v[i + 1]

        for i in range(nc):
            if not np.isfinite(v[i]) or abs(v[i]) > 500.0:
                return s, i

        if (s + 1) % record_stride == 0:
            r = (s + 1) // record_stride
            for i in range(nc):
                trace[r, i] = v[i]
    return -1, -1


def activating_current(config: CableConfig, u_e_v: np.ndarray) -> np.ndarray:
    """Equivalent injected current from the extracellular potential.

    g_axial times the second spatial difference of u_e along the fiber
    (one-sided at the sealed ends), in uA/cm**2. Uniform u_e yields
    exactly zero. Accepts a single row or a (time, compartment) matrix.
    """
    ue_mv = np.atleast_2d(np.asarray(u_e_v, dtype=float)) * 1e3
    lap = np.empty_like(ue_mv)
    lap[:, 1:-1] = ue_mv[:, :-2] - 2.0 * ue_mv[:, 1:-1] + ue_mv[:, 2:]
    lap[:, 0] = ue_mv[:, 1] - ue_mv[:, 0]
    lap[:, -1] = ue_mv[:, -2] - ue_mv[:, -1]
    out = config.g_axial * lap
    return out if np.asarray(u_e_v).ndim == 2 else out[0]


# ---------------------------------------------------------------------------
# stochastic channel populations
#
# Na channels occupy 8 states indexed h*4 + j (j open m-gates, h the
# inactivation gate), open at state 7. K channels occupy states 8 + j
# (j open n-gates), open at state 12. The transition table lists each
# directed edge with its source, destination, rate kind (alpha/beta of
# m, h, n) and combinatorial multiplicity.

N_NA_STATES = 8
N_K_STATES = 5
NA_OPEN = 7
K_OPEN = 8 + 4
_KIND_AM, _KIND_BM, _KIND_AH, _KIND_BH, _KIND_AN, _KIND_BN = range(6)


def _build_edges():
    src, dst, kind, mult = [], [], [], []

    def add(s, d, k, c):
        src.append(s)
        dst.append(d)
        kind.append(k)
        mult.append(c)

    for hh in (0, 1):
        for j in range(3):
            add(hh * 4 + j, hh * 4 + j + 1, _KIND_AM, 3 - j)
        for j in range(1, 4):
            add(hh * 4 + j, hh * 4 + j - 1, _KIND_BM, j)
    for j in range(4):
        add(j, 4 + j, _KIND_AH, 1)
        add(4 + j, j, _KIND_BH, 1)
    for j in range(4):
        add(8 + j, 8 + j + 1, _KIND_AN, 4 - j)
    for j in range(1, 5):
        add(8 + j, 8 + j - 1, _KIND_BN, j)
    return (np.array(src), np.array(dst), np.array(kind),
            np.array(mult, dtype=float))


_EDGE_SRC, _EDGE_DST, _EDGE_KIND, _EDGE_MULT = _build_edges()
N_EDGES = len(_EDGE_SRC)  # 28
TAU_LEAP_MIN_EVENTS = 0.1


def _largest_remainder(p: np.ndarray, total: int) -> np.ndarray:
    """Integer apportionment of `total` by probabilities `p` (sums exactly)."""
    raw = p * total
    counts = np.floor(raw).astype(np.int64)
    short = total - counts.sum()
    order = np.argsort(raw - counts)[::-1]
    counts[order[:short]] += 1
    return counts


def equilibrium_counts(config: CableConfig, v_mv: float = REST_MV) -> np.ndarray:
    """Deterministic channel-state occupancies at a clamped potential."""
    from math import comb

    m_inf, h_inf, n_inf = steady_gating(v_mv)
    n_na, n_k = config.channel_counts()
    p_na = np.empty(N_NA_STATES)
    for hh in (0, 1):
        ph = h_inf if hh == 1 else 1.0 - h_inf
        for j in range(4):
            p_na[hh * 4 + j] = comb(3, j) * m_inf**j * (1 - m_inf) ** (3 - j) * ph
    p_k = np.array([comb(4, j) * n_inf**j * (1 - n_inf) ** (4 - j) for j in range(5)])
    counts = np.empty((N_NA_STATES + N_K_STATES, config.n_comp), dtype=np.int64)
    counts[:N_NA_STATES] = _largest_remainder(p_na, n_na)[:, None]
    counts[N_NA_STATES:] = _largest_remainder(p_k, n_k)[:, None]
    return counts


@njit(cache=True)
def _channel_step_compartment(counts, c, erate, dt, rng, src, dst, min_events,
                              outflow, k):
    """Advance one compartment's channel pools over one dt (in place).

    Tau-leap with proportional capping when the expected event count is
    large enough, otherwise the exact jump process.
    """
    n_edges = src.shape[0]
    lam_total = 0.0
    for e in range(n_edges):
        lam_total += counts[src[e], c] * erate[e] * dt

    if lam_total >= min_events:
        for e in range(n_edges):
            lam = counts[src[e], c] * erate[e] * dt
            k[e] = rng.poisson(lam) if lam > 0.0 else 0
        for s13 in range(counts.shape[0]):
            outflow[s13] = 0
        for e in range(n_edges):
            outflow[src[e]] += k[e]
        over = False
        for s13 in range(counts.shape[0]):
            if outflow[s13] > counts[s13, c]:
                over = True
        if over:
            # floor-scale departures from oversubscribed states
            for e in range(n_edges):
                o = outflow[src[e]]
                if o > counts[src[e], c]:
                    k[e] = int(np.floor(k[e] * counts[src[e], c] / o))
        for e in range(n_edges):
            counts[src[e], c] -= k[e]
            counts[dst[e], c] += k[e]
        return

    # exact jumps: inverse-transform the waiting time and the edge choice
    t = 0.0
    while True:
        total = 0.0
        for e in range(n_edges):
            total += counts[src[e], c] * erate[e]
        if total <= 0.0:
            return
        t += -np.log(1.0 - rng.random()) / total
        if t >= dt:
            return
        u = rng.random() * total
        acc = 0.0
        for e in range(n_edges):
            acc += counts[src[e], c] * erate[e]
            if u <= acc:
                counts[src[e], c] -= 1
                counts[dst[e], c] += 1
                break


@njit(cache=True)
def _integrate_sto(v, counts, n_steps, dt, g_ax, c_m, gamma, g_l,
                   e_na, e_k, e_l, phi, act, drive_stride, inj, inj_start,
                   inj_stop, record_stride, trace, rng, src, dst, kind, mult,
                   min_events):
    """Stochastic twin of _integrate_det; channel pools replace m/h/n."""
    nc = v.shape[0]
    n_edges = src.shape[0]
    n_rows = act.shape[0]
    cdt = c_m / dt
    rates = np.empty(6)
    erate = np.empty(n_edges)
    k = np.empty(n_edges, dtype=np.int64)
    outflow = np.empty(counts.shape[0], dtype=np.int64)
    dg = np.empty(nc)
    rhs = np.empty(nc)
    cp = np.empty(nc)
    dp = np.empty(nc)
    for s in range(n_steps):
        row = s // drive_stride
        inject = inj_start <= s < inj_stop
        for c in range(nc):
            am, bm, ah, bh, an, bn = _rates(v[c])
            rates[0] = phi * am
            rates[1] = phi * bm
            rates[2] = phi * ah
            rates[3] = phi * bh
            rates[4] = phi * an
            rates[5] = phi * bn
            for e in range(n_edges):
                erate[e] = mult[e] * rates[kind[e]]
            _channel_step_compartment(counts, c, erate, dt, rng, src, dst,
                                      min_events, outflow, k)
            gna_c = gamma * counts[NA_OPEN, c]
            gk_c = gamma * counts[K_OPEN, c]
            gion = gna_c + gk_c + g_l
            neighbors = 2.0 if 0 < c < nc - 1 else 1.0
            dg[c] = cdt + gion + g_ax * neighbors
            r = cdt * v[c] + gna_c * e_na + gk_c * e_k + g_l * e_l
            if row < n_rows:
                r += act[row, c]
            if inject:
                r += inj[c]
            rhs[c] = r

        cp[0] = -g_ax / dg[0]
        dp[0] = rhs[0] / dg[0]
        for c in range(1, nc):
            denom = dg[c] + g_ax * cp[c - 1]
            cp[c] = -g_ax / denom
            dp[c] = (rhs[c] + g_ax * dp[c - 1]) / denom
        v[nc - 1] = dp[nc - 1]
        for c in range(nc - 2, -1, -1):
            v[c] = dp[c] - cp[c] * v[c + 1]

        for c in range(nc):
            if not np.isfinite(v[c]) or abs(v[c]) > 500.0:
                return s, c

        if (s + 1) % record_stride == 0:
            r_i = (s + 1) // record_stride
            for c in range(nc):
                trace[r_i, c] = v[c]
    return -1, -1


# ---------------------------------------------------------------------------
# public stepping and simulation


def resting_state(config: CableConfig) -> CableState:
    """Cable at the resting potential with equilibrated gating."""
    nc = config.n_comp
    v = np.full(nc, REST_MV)
    if config.gating_mode == "stochastic":
        return CableState(v_mv=v, counts=equilibrium_counts(config))
    m_inf, h_inf, n_inf = steady_gating(REST_MV)
    return CableState(v_mv=v, m=np.full(nc, m_inf), h=np.full(nc, h_inf),
                      n=np.full(nc, n_inf))


def _gamma_density(config: CableConfig) -> float:
    """Conductance density of one open channel, mS/cm**2."""
    return SINGLE_CHANNEL_PS * 1e-9 / (config.area_cm2 * config.channel_scale)


def step(state: CableState, config: CableConfig, u_e_row_v=None,
         injected_na=None, dt_s: float = DEFAULT_DT_S,
         rng: np.random.Generator | None = None) -> CableState:
    """Advance the cable by one dt and return the new state.

    ``u_e_row_v``: extracellular potential per compartment (volts);
    ``injected_na``: intracellular current per compartment (nA). Runs the
    same compiled update as :func:`simulate`, one step at a time.
    """
    nc = config.n_comp
    out = state.copy()
    dt = dt_s * 1e3  # ms
    if u_e_row_v is None:
        act = np.zeros((1, nc))
    else:
        act = np.atleast_2d(
            activating_current(config, np.asarray(u_e_row_v, dtype=float)))
    if injected_na is None:
        inj = np.zeros(nc)
    else:
        inj = np.asarray(injected_na, dtype=float) * 1e-3 / config.area_cm2
    trace = np.empty((2, nc))
    trace[0] = out.v_mv

    if config.gating_mode == "stochastic":
        if rng is None:
            raise ValidationError(["stochastic stepping needs an rng"])
        blow_step, blow_comp = _integrate_sto(
            out.v_mv, out.counts, 1, dt, config.g_axial, config.c_m,
            _gamma_density(config), config.g_leak, config.e_na, config.e_k,
            config.e_leak, config.temperature_factor, act, 1, inj, 0, 1, 1,
            trace, rng, _EDGE_SRC, _EDGE_DST, _EDGE_KIND, _EDGE_MULT,
            TAU_LEAP_MIN_EVENTS)
    else:
        blow_step, blow_comp = _integrate_det(
            out.v_mv, out.m, out.h, out.n, 1, dt, config.g_axial, config.c_m,
            config.g_na, config.g_k, config.g_leak, config.e_na, config.e_k,
            config.e_leak, config.temperature_factor, act, 1, inj, 0, 1, 1,
            trace)
    out.t_s = state.t_s + dt_s
    if blow_step >= 0:
        raise NumericalError("membrane potential diverged",
                             compartment=int(blow_comp), time_s=out.t_s)
    return out


def _injection_schedule(config, axonal_input, dt_s, n_steps):
    inj = np.zeros(config.n_comp)
    if axonal_input is None or axonal_input.amplitude_na == 0.0:
        return inj, 0, 0
    if not 0 <= axonal_input.compartment < config.n_comp:
        raise ValidationError(
            [f"input compartment {axonal_input.compartment} out of range"])
    inj[axonal_input.compartment] = config.na_to_density(axonal_input.amplitude_na)
    start = int(round(axonal_input.onset_s / dt_s))
    stop = int(round((axonal_input.onset_s + axonal_input.duration_ms * 1e-3) / dt_s))
    return inj, min(start, n_steps), min(stop, n_steps)


def simulate(config: CableConfig, drive: ExtracellularDrive | None = None,
             axonal_input: AxonalInput | None = None,
             duration_s: float = 40.0e-3, dt_s: float = DEFAULT_DT_S,
             seed=None, record_stride: int = 1,
             initial: CableState | None = None) -> MembraneTrace:
    """Integrate the cable over ``duration_s`` and record the trace.

    The drive is held piecewise-constant between its samples and taken as
    zero beyond its span. Deterministic given (config, drive, input, seed).
    """
    if dt_s > 5.0e-6:
        raise ValidationError([f"dt must be <= 5 us, got {dt_s * 1e6:.1f} us"])
    dt = dt_s * 1e3
    n_steps = int(round(duration_s / dt_s))
    state = initial.copy() if initial is not None else resting_state(config)

    if drive is None:
        act = np.zeros((0, config.n_comp))
        stride = 1
    else:
        if drive.u_e_v.shape[1] != config.n_comp:
            raise ValidationError(
                [f"drive has {drive.u_e_v.shape[1]} columns, cable has {config.n_comp}"])
        stride = int(round(drive.dt_s / dt_s))
        if stride < 1 or abs(stride * dt_s - drive.dt_s) > 1e-12:
            raise ValidationError(["cable dt must divide the drive dt"])
        act = activating_current(config, drive.u_e_v)

    if record_stride < 1:
        raise ValidationError([f"record stride must be >= 1, got {record_stride}"])
    # round up to a whole number of recorded blocks so the trace covers the
    # full window
    n_steps = -(-n_steps // record_stride) * record_stride
    inj, inj_start, inj_stop = _injection_schedule(config, axonal_input, dt_s, n_steps)
    n_rec = n_steps // record_stride + 1
    trace = np.empty((n_rec, config.n_comp))
    trace[0] = state.v_mv
    times = np.arange(n_rec) * (dt_s * record_stride)

    if config.gating_mode == "deterministic":
        blow_step, blow_comp = _integrate_det(
            state.v_mv, state.m, state.h, state.n, n_steps, dt,
            config.g_axial, config.c_m, config.g_na, config.g_k, config.g_leak,
            config.e_na, config.e_k, config.e_leak, config.temperature_factor,
            act, stride, inj, inj_start, inj_stop, record_stride, trace)
        if blow_step >= 0:
            raise NumericalError(
                "membrane potential diverged", compartment=int(blow_comp),
                time_s=float((blow_step + 1) * dt_s))
        return MembraneTrace(times_s=times, v_mv=trace)

    rng = np.random.default_rng(seed)
    blow_step, blow_comp = _integrate_sto(
        state.v_mv, state.counts, n_steps, dt, config.g_axial, config.c_m,
        _gamma_density(config), config.g_leak, config.e_na, config.e_k,
        config.e_leak, config.temperature_factor, act, stride, inj,
        inj_start, inj_stop, record_stride, trace, rng, _EDGE_SRC, _EDGE_DST,
        _EDGE_KIND, _EDGE_MULT, TAU_LEAP_MIN_EVENTS)
    if blow_step >= 0:
        raise NumericalError(
            "membrane potential diverged", compartment=int(blow_comp),
            time_s=float((blow_step + 1) * dt_s))
    return MembraneTrace(times_s=times, v_mv=trace)


def detect_firing(trace: MembraneTrace, detection_compartment: int,
                  threshold_mv: float = 0.0, blank_ms: float = 0.0) -> bool:
    """True iff the detection compartment crosses threshold upward after
    ``blank_ms`` (typically the axonal-input onset)."""
    if not 0 <= detection_compartment < trace.v_mv.shape[1]:
        raise ValidationError(
            [f"detection compartment {detection_compartment} out of range"])
    return trace.spike_time_s(detection_compartment, threshold_mv,
                              after_s=blank_ms * 1e-3) is not None


@dataclass
class CalibrationResult:
    axonal_input: AxonalInput
    threshold_na: float
    iterations: int


def calibrate_input(config: CableConfig, duration_ms: float = 1.0,
                    target_fraction: float = 0.9,
                    compartment: int = 0, tolerance: float = 0.01,
                    amplitude_cap_na: float = 1000.0,
                    dt_s: float = DEFAULT_DT_S) -> CalibrationResult:
    """Bisect the solitary-input firing threshold (no DBS drive).

    Returns an input at ``target_fraction`` times the threshold amplitude,
    so the default 0.9 gives a just-subthreshold input that stimulation
    can promote to firing. Calibration always runs in deterministic mode.
    """
    det_config = config if config.gating_mode == "deterministic" else \
        replace(config, gating_mode="deterministic")
    onset_s = 1.0e-3
    window_s = onset_s + duration_ms * 1e-3 + 20.0e-3
    detection = det_config.detection_compartment

    def fires(amplitude_na: float) -> bool:
        inp = AxonalInput(amplitude_na=amplitude_na, duration_ms=duration_ms,
                          onset_s=onset_s, compartment=compartment)
        trace = simulate(det_config, None, inp, duration_s=window_s, dt_s=dt_s,
                         record_stride=5)
        return detect_firing(trace, detection, blank_ms=onset_s * 1e3)

    lo, hi = 0.0, 0.05
    iterations = 0
    while not fires(hi):
        lo, hi = hi, hi * 2.0
        iterations += 1
        if hi > amplitude_cap_na:
            raise CalibrationError(
                f"no firing up to {amplitude_cap_na} nA "
                f"({duration_ms} ms pulse at compartment {compartment})")
    while (hi - lo) / hi > tolerance:
        mid = 0.5 * (lo + hi)
        if fires(mid):
            hi = mid
        else:
            lo = mid
        iterations += 1
    inp = AxonalInput(amplitude_na=target_fraction * hi, duration_ms=duration_ms,
                      onset_s=0.0, compartment=compartment)
    return CalibrationResult(axonal_input=inp, threshold_na=hi,
                             iterations=iterations)
