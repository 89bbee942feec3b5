"""Proprioceptive label generation: vibration, bumpiness and energy metrics.

The vibration metric is ``ln(1 + B)`` with ``B`` the 1-30 Hz bandpower of the
Z acceleration inside a window of half-width ``alpha`` (the time the robot
needs to drive its own length). Bumpiness is the norm of the roll/pitch
rates; energy is the sum of ``I * V * dt`` over the same window. All three
series are smoothed with a discretised Gaussian.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import OutOfSupport, TooFewSamples, WindowOutOfRange

METRIC_KINDS = ("m_z", "m_omega", "m_p")
DEFAULT_SIGMA = 0.5
PAIR_TOLERANCE = 0.06
_EDGE_EPS = 1e-9


@dataclass(frozen=True)
class TimeSeries:
    timestamps: np.ndarray
    values: np.ndarray
    nominal_rate: float

    def __post_init__(self):
        t = np.asarray(self.timestamps, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if t.ndim != 1 or len(t) != len(v):
            raise ValueError("timestamps and values must have matching length")
        if len(t) > 1:
            if np.any(np.diff(t) <= 0):
                raise ValueError("timestamps must be strictly increasing")
            rate = 1.0 / np.median(np.diff(t))
            if abs(rate - self.nominal_rate) / self.nominal_rate >= 0.05:
                raise ValueError(f"median rate {rate:.3f} Hz disagrees with nominal {self.nominal_rate} Hz")
        object.__setattr__(self, "timestamps", t)
        object.__setattr__(self, "values", v)

    def __len__(self):
        return len(self.timestamps)


@dataclass(frozen=True)
class WindowSpec:
    """Half-window ``alpha = robot_length / (2 * speed)``."""

    robot_length: float = 1.5
    speed: float = 1.5

    def __post_init__(self):
        if self.robot_length <= 0 or self.speed <= 0:
            raise ValueError("robot_length and speed must be positive")

    @property
    def alpha(self):
        return self.robot_length / (2.0 * self.speed)


@dataclass(frozen=True)
class WelchConfig:
    segment_length: int = 128
    overlap_fraction: float = 0.5
    window_function: str = "hann"
    f_min: float = 1.0
    f_max: float = 30.0

    def __post_init__(self):
        if self.segment_length < 8:
            raise ValueError("segment_length must be >= 8")
        if not 0.0 <= self.overlap_fraction < 1.0:
            raise ValueError("overlap_fraction must be in [0, 1)")
        if self.window_function != "hann":
            raise ValueError(f"unsupported window {self.window_function!r}")
        if self.f_min >= self.f_max:
            raise ValueError("f_min must be below f_max")


@dataclass(frozen=True)
class MetricSeries:
    timestamps: np.ndarray
    values: np.ndarray
    metric_kind: str
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "timestamps", np.asarray(self.timestamps, dtype=float))
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))
        if self.metric_kind not in METRIC_KINDS:
            raise ValueError(f"unknown metric kind {self.metric_kind!r}")


def hann(n):
    """Periodic Hann window (the usual choice for spectral estimation)."""
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)


def welch_psd(x, rate, cfg=WelchConfig()):
    """One-sided Welch PSD estimate with per-segment mean removal.

    Returns ``(freqs, psd)``. The scaling makes ``sum(psd) * df`` equal to the
    mean square of the (detrended) signal, up to windowing bias.
    """
    x = np.asarray(x, dtype=float)
    n = cfg.segment_length
    if len(x) < n:
        raise TooFewSamples(f"{len(x)} samples, need at least {n}")
    step = max(1, int(round(n * (1.0 - cfg.overlap_fraction))))
    starts = np.arange(0, len(x) - n + 1, step)
    segs = x[starts[:, None] + np.arange(n)]
    segs = segs - segs.mean(axis=1, keepdims=True)
    win = hann(n)
    spec = np.abs(np.fft.rfft(segs * win, axis=1)) ** 2
    psd = spec.mean(axis=0) / (rate * np.sum(win ** 2))
    if n % 2 == 0:
        psd[1:-1] *= 2.0
    else:
        psd[1:] *= 2.0
    freqs = np.fft.rfftfreq(n, d=1.0 / rate)
    return freqs, psd


def integrate_band(freqs, psd, f_min, f_max):
    """Rectangle-rule integral of the PSD bins inside ``[f_min, f_max]``."""
    df = freqs[1] - freqs[0]
    band = (freqs >= f_min - 1e-12) & (freqs <= f_max + 1e-12)
    return float(np.sum(psd[band]) * df)


def window_slice(timestamps, t, alpha, closed=True):
    """Index slice of samples in ``[t - alpha, t + alpha]`` (half-open when ``closed`` is false)."""
    lo = np.searchsorted(timestamps, t - alpha - _EDGE_EPS, side="left")
    if closed:
        hi = np.searchsorted(timestamps, t + alpha + _EDGE_EPS, side="right")
    else:
        hi = np.searchsorted(timestamps, t + alpha - _EDGE_EPS, side="left")
    return slice(lo, hi)


def _check_window(series, t, alpha):
    ts = series.timestamps
    slack = 0.5 / series.nominal_rate
    if t - alpha < ts[0] - slack or t + alpha > ts[-1] + slack:
        raise WindowOutOfRange(f"window [{t - alpha:.3f}, {t + alpha:.3f}] s outside [{ts[0]:.3f}, {ts[-1]:.3f}] s")


def bandpower(t, series, spec=WindowSpec(), cfg=WelchConfig()):
    """Bandpower of ``series`` over ``[cfg.f_min, cfg.f_max]`` in the window around ``t``.

    The Welch segment length is clamped to the window length so short windows
    still yield one segment.
    """
    _check_window(series, t, spec.alpha)
    x = series.values[window_slice(series.timestamps, t, spec.alpha)]
    if x.ndim > 1:
        raise ValueError("bandpower expects a scalar series")
    seg = min(cfg.segment_length, len(x))
    if seg < 8:
        raise TooFewSamples(f"window holds {len(x)} samples")
    local = WelchConfig(seg, cfg.overlap_fraction, cfg.window_function, cfg.f_min, cfg.f_max)
    freqs, psd = welch_psd(x, series.nominal_rate, local)
    return integrate_band(freqs, psd, cfg.f_min, cfg.f_max)


def smooth_metric(m, sigma=DEFAULT_SIGMA):
    """Gaussian smoothing with a kernel truncated at 3 sigma (seconds).

    Samples are assumed uniformly spaced at the median spacing. Near the ends
    the kernel is renormalised over the samples that exist.
    """
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    values = np.asarray(m.values, dtype=float)
    if len(values) < 2:
        return m
    dt = float(np.median(np.diff(m.timestamps)))
    kernel = gaussian_kernel(sigma, dt)
    half = len(kernel) // 2
    # Smoothing deviations from the first sample keeps constant series bit-exact.
    ref = values[0]
    num = np.convolve(values - ref, kernel, mode="full")[half: half + len(values)]
    den = np.convolve(np.ones_like(values), kernel, mode="full")[half: half + len(values)]
    return MetricSeries(m.timestamps, ref + num / den, m.metric_kind, dict(m.meta, sigma=sigma))


def gaussian_kernel(sigma, dt):
    half = int(np.ceil(3.0 * sigma / dt))
    k = np.arange(-half, half + 1) * dt
    w = np.exp(-0.5 * (k / sigma) ** 2)
    return w / w.sum()


def vibration_metric(series, spec=WindowSpec(), cfg=WelchConfig(), query_times=None, sigma=DEFAULT_SIGMA):
    """``M_z(t) = ln(1 + B(t))`` at each query time, then smoothed (``sigma=None`` skips smoothing)."""
    query_times = np.asarray(query_times, dtype=float)
    b = np.array([bandpower(t, series, spec, cfg) for t in query_times])
    m = MetricSeries(query_times, np.log1p(b), "m_z", {"alpha": spec.alpha})
    return smooth_metric(m, sigma) if sigma else m


def bumpiness_metric(series, query_times, sigma=DEFAULT_SIGMA):
    """Norm of the (roll rate, pitch rate) sample nearest to each query time."""
    query_times = np.asarray(query_times, dtype=float)
    ts = series.timestamps
    slack = 0.5 / series.nominal_rate
    if np.any(query_times < ts[0] - slack) or np.any(query_times > ts[-1] + slack):
        raise WindowOutOfRange("query time outside the angular-rate series")
    idx = nearest_index(ts, query_times)
    w = np.asarray(series.values, dtype=float)[idx]
    m = MetricSeries(query_times, np.hypot(w[:, 0], w[:, 1]), "m_omega")
    return smooth_metric(m, sigma) if sigma else m


def nearest_index(timestamps, query):
    idx = np.searchsorted(timestamps, query)
    idx = np.clip(idx, 1, len(timestamps) - 1)
    left = timestamps[idx - 1]
    right = timestamps[idx]
    return np.where(np.abs(query - left) <= np.abs(right - query), idx - 1, idx)


def pair_power(current, voltage, tolerance=PAIR_TOLERANCE):
    """Instantaneous power ``I * V`` at current timestamps, pairing each current
    sample with the nearest voltage sample; pairs further apart than
    ``tolerance`` seconds are dropped."""
    ti = current.timestamps
    j = nearest_index(voltage.timestamps, ti)
    keep = np.abs(voltage.timestamps[j] - ti) <= tolerance + 1e-12
    power = np.asarray(current.values, dtype=float)[keep] * np.asarray(voltage.values, dtype=float)[j[keep]]
    return ti[keep], power


def energy_metric(current, voltage, spec=WindowSpec(), query_times=None, sigma=DEFAULT_SIGMA,
                  pair_tolerance=PAIR_TOLERANCE):
    """Energy ``sum(I * V * dt)`` over ``[t - alpha, t + alpha)`` for each query time.

    ``dt`` is the forward difference to the next paired sample (the last
    sample reuses the previous spacing).
    """
    query_times = np.asarray(query_times, dtype=float)
    t, p = pair_power(current, voltage, pair_tolerance)
    if len(t) < 2:
        raise WindowOutOfRange("not enough paired current/voltage samples")
    # Timestamps are treated at nanosecond resolution so regular logs get exactly equal steps.
    dt = np.round(np.diff(t), 9)
    dt = np.append(dt, dt[-1])
    energy = np.concatenate([[0.0], np.cumsum(p * dt)])
    alpha = spec.alpha
    slack = 0.5 / current.nominal_rate
    out = np.empty(len(query_times))
    for k, q in enumerate(query_times):
        if q - alpha < t[0] - slack or q + alpha > t[-1] + dt[-1] + slack:
            raise WindowOutOfRange(f"energy window around {q:.3f} s out of range")
        sl = window_slice(t, q, alpha, closed=False)
        out[k] = energy[sl.stop] - energy[sl.start]
    m = MetricSeries(query_times, out, "m_p", {"alpha": alpha})
    return smooth_metric(m, sigma) if sigma else m


def label_at_pose(metric, t):
    """Linear interpolation of a metric series at time ``t``."""
    ts = metric.timestamps
    if t < ts[0] - _EDGE_EPS or t > ts[-1] + _EDGE_EPS:
        raise OutOfSupport(f"t={t:.3f} s outside [{ts[0]:.3f}, {ts[-1]:.3f}] s")
    return float(np.interp(t, ts, metric.values))


def valid_query_times(imu_t, power_t, spec=WindowSpec(), rate=50.0):
    """Regular query grid on which every metric window is fully supported."""
    alpha = spec.alpha
    lo = max(imu_t[0], power_t[0]) + alpha
    hi = min(imu_t[-1], power_t[-1]) - alpha
    if hi <= lo:
        return np.empty(0)
    n = int(np.floor((hi - lo) * rate + 1e-9)) + 1
    return lo + np.arange(n) / rate


@dataclass
class LabelSet:
    """The three smoothed metric series on a shared time grid."""

    m_z: MetricSeries
    m_omega: MetricSeries
    m_p: MetricSeries

    def __getitem__(self, kind):
        return getattr(self, kind)

    @property
    def timestamps(self):
        return self.m_z.timestamps

    def items(self):
        return [(k, self[k]) for k in METRIC_KINDS]


def compute_labels(imu_t, az, omega_xy, power_t, current, voltage, spec=WindowSpec(), cfg=WelchConfig(),
                   sigma=DEFAULT_SIGMA, imu_rate=100.0, power_rate=10.0, query_rate=50.0):
    """All three metrics from raw arrays, on a common query grid."""
    q = valid_query_times(np.asarray(imu_t), np.asarray(power_t), spec, query_rate)
    if len(q) == 0:
        raise WindowOutOfRange("logs are shorter than one metric window")
    az_s = TimeSeries(imu_t, az, imu_rate)
    om_s = TimeSeries(imu_t, omega_xy, imu_rate)
    i_s = TimeSeries(power_t, current, power_rate)
    v_s = TimeSeries(power_t, voltage, power_rate)
    return LabelSet(
        vibration_metric(az_s, spec, cfg, q, sigma),
        bumpiness_metric(om_s, q, sigma),
        energy_metric(i_s, v_s, spec, q, sigma),
    )
