"""Single-ion shelving experiment as a continuous-time Markov chain.

Laser-driven and spontaneous transitions are effective incoherent rates.
A trajectory is simulated exactly (exponential holding times, categorical
branching); photons are the fluorescent transitions thinned by the detection
efficiency plus an independent Poisson background.  The photon stream is
binned into a fluorescence trace, dark periods are detected with a two-level
threshold, and the lifetime of the shelf level is estimated from the aligned
dark-period durations.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Iterable, Mapping, NamedTuple

import numba
import numpy as np

from .errors import InsufficientDataError, InvalidInputError

LOGGER = logging.getLogger(__name__)

BACKGROUND = "background"
BACKGROUND_CODE = -1

# Ba+ levels of the shelving scheme
S12 = "6S1/2"
P12 = "6P1/2"
D32 = "5D3/2"
P32 = "6P3/2"
D52 = "5D5/2"
BARIUM_LEVELS = (S12, P12, D32, P32, D52)
BARIUM_SHELF = (P32, D52)

DEFAULT_GAMMA = 1.0 / 30.0  # placeholder, not a measured value
DEFAULT_BRIGHT_RATE = 16_000.0
DEFAULT_SHELVING_RATE = 0.1
DEFAULT_BIN_WIDTH = 0.1

_CHUNK = 1 << 22
_FIRST_CHUNK = 1 << 10  # short runs stay cheap; chunks double up to _CHUNK


class DetectionWarning(UserWarning):
    pass


class SimulationWarning(UserWarning):
    pass


@dataclass(frozen=True, eq=False)
class LevelSystem:
    """Atomic levels with transition rates in 1/s."""

    levels: tuple
    rates: Mapping
    fluorescent: frozenset = frozenset()
    detection_efficiency: float = 1.0
    background_rate: float = 0.0
    initial: str | None = None

    def __post_init__(self):
        levels = tuple(self.levels)
        if len(set(levels)) != len(levels) or not levels:
            raise InvalidInputError("levels must be a non-empty set of distinct names")
        rates = {}
        for key, rate in dict(self.rates).items():
            src, dst = key
            if src not in levels or dst not in levels:
                raise InvalidInputError(f"transition {src}->{dst} names an unknown level")
            if src == dst:
                raise InvalidInputError(f"self-transition {src}->{dst} is not allowed")
            rate = float(rate)
            if not (rate >= 0 and math.isfinite(rate)):
                raise InvalidInputError(f"rate for {src}->{dst} must be finite and >= 0")
            rates[(src, dst)] = rate
        fluorescent = frozenset(tuple(k) for k in self.fluorescent)
        if not fluorescent <= set(rates):
            raise InvalidInputError("every fluorescent transition must have a rate")
        if not 0 < self.detection_efficiency <= 1:
            raise InvalidInputError("detection efficiency must lie in (0, 1]")
        if not (self.background_rate >= 0 and math.isfinite(self.background_rate)):
            raise InvalidInputError("background rate must be finite and >= 0")
        initial = levels[0] if self.initial is None else self.initial
        if initial not in levels:
            raise InvalidInputError(f"initial level {initial!r} is not a level")
        object.__setattr__(self, "levels", levels)
        object.__setattr__(self, "rates", MappingProxyType(rates))
        object.__setattr__(self, "fluorescent", fluorescent)
        object.__setattr__(self, "detection_efficiency", float(self.detection_efficiency))
        object.__setattr__(self, "background_rate", float(self.background_rate))
        object.__setattr__(self, "initial", initial)

    @property
    def transitions(self) -> tuple:
        return tuple(self.rates)

    def generator(self) -> np.ndarray:
        """Rate matrix Q with rows summing to zero."""
        index = {name: i for i, name in enumerate(self.levels)}
        q = np.zeros((len(self.levels), len(self.levels)))
        for (src, dst), rate in self.rates.items():
            q[index[src], index[dst]] += rate
        q[np.diag_indices_from(q)] = -q.sum(axis=1)
        return q

    def to_dict(self) -> dict:
        return {
            "levels": list(self.levels),
            "rates": {f"{a}->{b}": r for (a, b), r in self.rates.items()},
            "fluorescent": [f"{a}->{b}" for a, b in sorted(self.fluorescent)],
            "detection_efficiency": self.detection_efficiency,
            "background_rate": self.background_rate,
            "initial": self.initial,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "LevelSystem":
        def key(text):
            parts = text.split("->")
            if len(parts) != 2:
                raise InvalidInputError(f"transition key {text!r} must look like 'A->B'")
            return parts[0].strip(), parts[1].strip()

        try:
            return cls(
                levels=tuple(data["levels"]),
                rates={key(k): v for k, v in data["rates"].items()},
                fluorescent=frozenset(key(k) for k in data.get("fluorescent", [])),
                detection_efficiency=data.get("detection_efficiency", 1.0),
                background_rate=data.get("background_rate", 0.0),
                initial=data.get("initial"),
            )
        except (KeyError, TypeError, AttributeError) as exc:
            raise InvalidInputError(f"malformed level system: {exc}") from None


def barium_ion(
    gamma: float = DEFAULT_GAMMA,
    bright_rate: float = DEFAULT_BRIGHT_RATE,
    shelving_rate: float = DEFAULT_SHELVING_RATE,
    detection_efficiency: float = 1.0,
    background_rate: float = 0.0,
    branching: float = 0.25,
    shelf_transfer_rate: float = 1.0e4,
) -> LevelSystem:
    """Effective-rate model of the Ba+ shelving scheme.

    The bright cycle 6S1/2 -> 6P1/2 -> (5D3/2 -> 6P1/2) -> 6S1/2 is scaled so
    the detected 6P1/2 -> 6S1/2 photon rate is ``bright_rate``, and the lamp
    rate 6S1/2 -> 6P3/2 so that shelving happens at ``shelving_rate`` per
    second of bright time.  6P3/2 feeds 5D5/2 at ``shelf_transfer_rate``;
    5D5/2 returns to the ground state at ``gamma``.  Real optical rates are
    ~1e8/s; only the ratios matter for the telegraph signal.
    """
    if not 0 < branching < 1:
        raise InvalidInputError("branching to 5D3/2 must lie in (0, 1)")
    for name, value in (("gamma", gamma), ("bright_rate", bright_rate),
                        ("shelving_rate", shelving_rate)):
        if not value > 0:
            raise InvalidInputError(f"{name} must be positive")
    # P decays at total rate A = pump / (1 - b): (1 - b) A = pump back to S and
    # b A to 5D3/2, repumped at b A.  S, P and 5D3/2 then each hold 1/3 of the
    # bright time, so photons leave at pump / 3 and the lamp acts at pi_S = 1/3.
    pump = 3.0 * bright_rate / detection_efficiency
    p_total = pump / (1.0 - branching)
    rates = {
        (S12, P12): pump,
        (P12, S12): (1.0 - branching) * p_total,
        (P12, D32): branching * p_total,
        (D32, P12): branching * p_total,
        (S12, P32): 3.0 * shelving_rate,
        (P32, D52): shelf_transfer_rate,
        (D52, S12): gamma,
    }
    return LevelSystem(
        levels=BARIUM_LEVELS,
        rates=rates,
        fluorescent=frozenset({(P12, S12)}),
        detection_efficiency=detection_efficiency,
        background_rate=background_rate,
        initial=S12,
    )


def default_thresholds(bright_rate, background_rate, bin_width):
    """Hysteresis thresholds (low, high) in counts per bin."""
    bg = background_rate * bin_width
    low = bg + 3.0 * math.sqrt(bg) + 1.0
    high = bg + 6.0 * math.sqrt(bg) + 10.0
    bright = bright_rate * bin_width
    if high >= 0.5 * (bright + bg):
        raise InvalidInputError(
            f"bright level {bright:g} counts/bin is too close to background {bg:g}; "
            "use wider bins"
        )
    return low, high


# --------------------------------------------------------------------------
# simulation


@dataclass(frozen=True, eq=False)
class EventLog:
    """Recorded transitions and photon detections of one trajectory."""

    times: np.ndarray
    codes: np.ndarray
    photon: np.ndarray
    transitions: tuple
    duration: float
    seed: int
    trajectory: int = 0
    final_level: str | None = None
    completed_early: bool = False
    diagnostic: str | None = None

    def __len__(self):
        return int(self.times.size)

    def label(self, code):
        if code == BACKGROUND_CODE:
            return BACKGROUND, BACKGROUND
        return self.transitions[code]

    @property
    def events(self) -> list:
        """``(t, from, to, photon)`` tuples; materialized on demand."""
        return [
            (float(t), *self.label(int(c)), bool(p))
            for t, c, p in zip(self.times, self.codes, self.photon)
        ]

    @property
    def photon_times(self) -> np.ndarray:
        return self.times[self.photon]

    def transition_times(self, src, dst) -> np.ndarray:
        code = self.transitions.index((src, dst))
        return self.times[self.codes == code]


@numba.njit(cache=True)
def _ctmc_kernel(state, t, duration, out_rate, ptr, cum, dest, code_of,
                 fluorescent, record, efficiency, u, pos,
                 out_t, out_code, out_photon, count):
    # status: 0 reached duration, 1 needs uniforms, 2 output full, 3 absorbed
    n_u = u.shape[0]
    cap = out_t.shape[0]
    while True:
        q = out_rate[state]
        if q <= 0.0:
            return state, t, pos, count, 3
        if pos + 3 > n_u:
            return state, t, pos, count, 1
        if count >= cap:
            return state, t, pos, count, 2
        t_next = t - math.log(1.0 - u[pos]) / q
        if t_next > duration:
            return state, t, pos + 1, count, 0
        pos += 1
        x = u[pos]
        pos += 1
        k = ptr[state]
        last = ptr[state + 1] - 1
        while k < last and x >= cum[k]:
            k += 1
        code = code_of[k]
        seen = False
        if fluorescent[code]:
            if efficiency >= 1.0:
                seen = True
            else:
                seen = u[pos] < efficiency
                pos += 1
        t = t_next
        state = dest[k]
        if seen or record[code]:
            out_t[count] = t
            out_code[count] = code
            out_photon[count] = seen
            count += 1


def _tables(sys: LevelSystem, record):
    index = {name: i for i, name in enumerate(sys.levels)}
    transitions = sys.transitions
    out_rate = np.zeros(len(sys.levels))
    ptr = [0]
    cum, dest, code_of = [], [], []
    for i, name in enumerate(sys.levels):
        outgoing = [(c, tr) for c, tr in enumerate(transitions)
                    if tr[0] == name and sys.rates[tr] > 0]
        total = math.fsum(sys.rates[tr] for _, tr in outgoing)
        out_rate[i] = total
        acc = 0.0
        for c, tr in outgoing:
            acc += sys.rates[tr] / total
            cum.append(acc)
            dest.append(index[tr[1]])
            code_of.append(c)
        if outgoing:
            cum[-1] = 1.0
        ptr.append(len(cum))
    fluorescent = np.array([tr in sys.fluorescent for tr in transitions], dtype=np.bool_)
    if record is None:
        rec = np.ones(len(transitions), dtype=np.bool_)
    else:
        wanted = {tuple(r) for r in record}
        unknown = wanted - set(transitions)
        if unknown:
            raise InvalidInputError(f"cannot record unknown transitions {sorted(unknown)}")
        rec = np.array([tr in wanted for tr in transitions], dtype=np.bool_)
    if fluorescent.size == 0:
        fluorescent = np.zeros(1, dtype=np.bool_)
        rec = np.zeros(1, dtype=np.bool_)
    return (out_rate, np.array(ptr, dtype=np.int64), np.array(cum + [1.0]),
            np.array(dest + [0], dtype=np.int64), np.array(code_of + [0], dtype=np.int64),
            fluorescent, rec)


def rng_streams(seed: int, trajectory: int = 0):
    """Independent generators (dynamics, background) for one trajectory."""
    def make(stream):
        ss = np.random.SeedSequence(int(seed), spawn_key=(int(trajectory), stream))
        return np.random.Generator(np.random.Philox(ss))

    return make(0), make(1)


def simulate(
    sys: LevelSystem,
    duration: float,
    seed: int,
    trajectory: int = 0,
    record: Iterable | None = None,
) -> EventLog:
    """Exact stochastic simulation of one trajectory over ``[0, duration]``.

    Parameters
    ----------
    sys : LevelSystem
    duration : float
        Seconds.
    seed, trajectory : int
        Key of the random streams; distinct trajectories never share a stream.
    record : iterable of (from, to), optional
        Transitions to log.  Photon detections are always logged.  Default is
        every transition; long runs of the bright cycle should restrict this.

    Returns
    -------
    EventLog
        Bit-for-bit reproducible for fixed arguments.  If the chain reaches a
        level with no way out, the log is marked ``completed_early``.
    """
    if not (duration > 0 and math.isfinite(duration)):
        raise InvalidInputError(f"duration must be positive and finite, got {duration}")
    out_rate, ptr, cum, dest, code_of, fluorescent, rec = _tables(sys, record)
    dyn_rng, bg_rng = rng_streams(seed, trajectory)
    state = sys.levels.index(sys.initial)
    t = 0.0
    pos = 0
    u = np.empty(0)
    chunks_t, chunks_c, chunks_p = [], [], []
    draw = _FIRST_CHUNK
    buf_t = np.empty(_FIRST_CHUNK)
    buf_c = np.empty(_FIRST_CHUNK, dtype=np.int16)
    buf_p = np.empty(_FIRST_CHUNK, dtype=np.bool_)
    count = 0
    completed_early = False
    diagnostic = None
    while True:
        state, t, pos, count, status = _ctmc_kernel(
            state, t, float(duration), out_rate, ptr, cum, dest, code_of,
            fluorescent, rec, sys.detection_efficiency, u, pos,
            buf_t, buf_c, buf_p, count,
        )
        if status == 1:
            u = np.concatenate([u[pos:], dyn_rng.random(draw)])
            draw = min(2 * draw, _CHUNK)
            pos = 0
        elif status == 2:
            chunks_t.append(buf_t[:count].copy())
            chunks_c.append(buf_c[:count].copy())
            chunks_p.append(buf_p[:count].copy())
            count = 0
            if buf_t.size < _CHUNK:
                size = min(2 * buf_t.size, _CHUNK)
                buf_t = np.empty(size)
                buf_c = np.empty(size, dtype=np.int16)
                buf_p = np.empty(size, dtype=np.bool_)
        else:
            if status == 3:
                completed_early = True
                diagnostic = (f"absorbed in level {sys.levels[state]!r} at t={t:.6g} s; "
                              "no outgoing rates")
                warnings.warn(diagnostic, SimulationWarning, stacklevel=2)
            break
    chunks_t.append(buf_t[:count].copy())
    chunks_c.append(buf_c[:count].copy())
    chunks_p.append(buf_p[:count].copy())
    times = np.concatenate(chunks_t)
    codes = np.concatenate(chunks_c)
    photon = np.concatenate(chunks_p)

    if sys.background_rate > 0:
        n_bg = int(bg_rng.poisson(sys.background_rate * duration))
        bg_times = np.sort(bg_rng.uniform(0.0, duration, n_bg))
        times = np.concatenate([times, bg_times])
        codes = np.concatenate([codes, np.full(n_bg, BACKGROUND_CODE, dtype=np.int16)])
        photon = np.concatenate([photon, np.ones(n_bg, dtype=np.bool_)])
        order = np.argsort(times, kind="stable")
        times, codes, photon = times[order], codes[order], photon[order]

    for arr in (times, codes, photon):
        arr.setflags(write=False)
    return EventLog(
        times=times,
        codes=codes,
        photon=photon,
        transitions=sys.transitions,
        duration=float(duration),
        seed=int(seed),
        trajectory=int(trajectory),
        final_level=sys.levels[state],
        completed_early=completed_early,
        diagnostic=diagnostic,
    )


# --------------------------------------------------------------------------
# traces and dark periods


@dataclass(frozen=True, eq=False)
class FluorescenceTrace:
    bin_width: float
    counts: np.ndarray
    t_start: float = 0.0

    @property
    def bin_starts(self) -> np.ndarray:
        return self.t_start + self.bin_width * np.arange(self.counts.size)

    @property
    def duration(self) -> float:
        return self.bin_width * self.counts.size


@dataclass(frozen=True, order=True)
class DarkPeriod:
    t0: float
    t1: float

    def __post_init__(self):
        if not self.t1 > self.t0:
            raise InvalidInputError(f"dark period must end after it starts: ({self.t0}, {self.t1})")

    @property
    def duration(self) -> float:
        return self.t1 - self.t0


def bin_counts(log: EventLog, bin_width: float) -> FluorescenceTrace:
    """Photon counts in ``[k w, (k+1) w)``; length ``ceil(duration / w)``."""
    if not bin_width > 0:
        raise InvalidInputError(f"bin width must be positive, got {bin_width}")
    n_bins = max(1, math.ceil(log.duration / bin_width - 1e-9))
    idx = np.floor(log.photon_times / bin_width).astype(np.int64)
    idx = np.minimum(idx, n_bins - 1)
    counts = np.bincount(idx, minlength=n_bins).astype(np.int64)
    return FluorescenceTrace(float(bin_width), counts, 0.0)


def detect_dark_periods(
    trace: FluorescenceTrace, low_threshold: float, high_threshold: float, min_bins: int = 1
) -> list[DarkPeriod]:
    """Two-threshold dark-period detector.

    A period opens at the first bin with ``counts <= low_threshold`` and
    closes at the first later bin with ``counts >= high_threshold``.  Periods
    that are already dark in the first bin or still dark in the last bin are
    censored and dropped, as are periods shorter than ``min_bins``.
    """
    if not low_threshold < high_threshold:
        raise InvalidInputError("need low_threshold < high_threshold")
    counts = np.asarray(trace.counts)
    if counts.size == 0:
        return []
    if low_threshold < counts.min() or high_threshold > counts.max():
        warnings.warn(
            f"thresholds ({low_threshold}, {high_threshold}) outside data range "
            f"[{counts.min()}, {counts.max()}]; no dark periods detected",
            DetectionWarning,
            stacklevel=2,
        )
        return []
    dark = counts <= low_threshold
    bright = counts >= high_threshold
    dark_idx = np.flatnonzero(dark)
    bright_idx = np.flatnonzero(bright)
    periods = []
    i = 0
    while True:
        # next onset: first dark bin after a bright bin at or after i
        k = np.searchsorted(bright_idx, i)
        if k >= bright_idx.size:
            break
        b = bright_idx[k]
        d = dark_idx[np.searchsorted(dark_idx, b)] if np.searchsorted(dark_idx, b) < dark_idx.size else None
        if d is None:
            break
        kc = np.searchsorted(bright_idx, d)
        if kc >= bright_idx.size:
            break  # still dark at the end of the trace
        c = bright_idx[kc]
        if c - d >= min_bins:
            periods.append(DarkPeriod(trace.t_start + d * trace.bin_width,
                                      trace.t_start + c * trace.bin_width))
        i = c
    return periods


def align_onsets(periods: Iterable[DarkPeriod]) -> list[float]:
    """Durations with every onset moved to the common time origin t0 = 0."""
    return [p.t1 - p.t0 for p in periods]


class LifetimeEstimate(NamedTuple):
    tau_hat: float
    stderr: float
    n: int


def survival_integral(durations) -> float:
    """Area under the empirical survival function ``#(d_i > t) / N``."""
    d = np.sort(np.asarray(durations, dtype=float))
    n = d.size
    steps = np.diff(np.concatenate([[0.0], d]))
    remaining = (n - np.arange(n)) / n
    return math.fsum(steps * remaining)


def empirical_survival(durations, t):
    d = np.sort(np.asarray(durations, dtype=float))
    t = np.asarray(t, dtype=float)
    return (d.size - np.searchsorted(d, t, side="right")) / d.size


def estimate_lifetime(durations) -> LifetimeEstimate:
    """Lifetime from dark-period durations: area under the empirical survival.

    This equals the sample mean; the standard error is the exponential-model
    value ``tau_hat / sqrt(N)``.
    """
    d = np.asarray(list(durations), dtype=float)
    if d.size < 2:
        raise InsufficientDataError(f"need at least 2 durations, got {d.size}")
    if np.any(~np.isfinite(d)) or np.any(d < 0):
        raise InvalidInputError("durations must be finite and non-negative")
    tau = survival_integral(d)
    return LifetimeEstimate(tau, tau / math.sqrt(d.size), int(d.size))


# --------------------------------------------------------------------------
# ground truth from the event log


def true_dark_periods(
    log: EventLog, shelf_levels=BARIUM_SHELF, include_open: bool = False
) -> list[DarkPeriod]:
    """Intervals spent in ``shelf_levels``, read from recorded transitions.

    Requires every transition into and out of the shelf to be recorded.
    An interval still open at the end of the run is dropped unless
    ``include_open``, in which case it is closed at ``log.duration``.
    """
    shelf = set(shelf_levels)
    entering = {c for c, (a, b) in enumerate(log.transitions) if a not in shelf and b in shelf}
    leaving = {c for c, (a, b) in enumerate(log.transitions) if a in shelf and b not in shelf}
    mask = np.isin(log.codes, list(entering | leaving))
    periods = []
    start = None
    for t, c in zip(log.times[mask], log.codes[mask]):
        if c in entering:
            start = float(t)
        elif start is not None:
            periods.append(DarkPeriod(start, float(t)))
            start = None
    if include_open and start is not None and start < log.duration:
        periods.append(DarkPeriod(start, log.duration))
    return periods


def shelf_transitions(sys: LevelSystem, shelf_levels=BARIUM_SHELF) -> list:
    """Transitions touching the shelf; the minimal ``record`` set for ground truth."""
    shelf = set(shelf_levels)
    return [tr for tr in sys.transitions if tr[0] in shelf or tr[1] in shelf]


def sojourn_durations(log: EventLog, level: str = D52) -> np.ndarray:
    """Exact holding times in ``level`` (complete visits only)."""
    into = {c for c, (a, b) in enumerate(log.transitions) if b == level}
    out = {c for c, (a, b) in enumerate(log.transitions) if a == level}
    mask = np.isin(log.codes, list(into | out))
    durations = []
    start = None
    for t, c in zip(log.times[mask], log.codes[mask]):
        if c in into:
            start = t
        elif start is not None:
            durations.append(t - start)
            start = None
    return np.array(durations)


@dataclass
class MatchSummary:
    n_true: int
    n_detected: int
    n_matched: int
    max_onset_error: float = field(default=float("nan"))
    max_end_error: float = field(default=float("nan"))

    @property
    def true_fraction(self) -> float:
        return self.n_matched / self.n_true if self.n_true else 1.0

    @property
    def detected_fraction(self) -> float:
        return self.n_matched / self.n_detected if self.n_detected else 1.0


def match_periods(true, detected, tolerance: float) -> MatchSummary:
    """Pair detected and true intervals whose endpoints agree within ``tolerance``."""
    true = sorted(true)
    detected = sorted(detected)
    onsets = np.array([p.t0 for p in detected])
    used = np.zeros(len(detected), dtype=bool)
    matched = 0
    e0, e1 = [], []
    for p in true:
        k = int(np.searchsorted(onsets, p.t0 - tolerance))
        while k < len(detected) and detected[k].t0 <= p.t0 + tolerance:
            q = detected[k]
            if not used[k] and abs(q.t1 - p.t1) <= tolerance:
                used[k] = True
                matched += 1
                e0.append(abs(q.t0 - p.t0))
                e1.append(abs(q.t1 - p.t1))
                break
            k += 1
    return MatchSummary(
        len(true), len(detected), matched,
        max(e0) if e0 else float("nan"), max(e1) if e1 else float("nan"),
    )
