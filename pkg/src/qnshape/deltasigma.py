"""Delta-sigma realization of a target quantization-noise shape.

z-domain loop algebra (NTF = 1/(1+H), STF = H/(1+H)), the NTF-induced
quantization PSD, loop-filter synthesis against a shaped target, and
time-domain simulation of the single-loop modulator with an embedded
mid-rise quantizer and unit feedback.
"""

from dataclasses import dataclass

import numpy as np
from scipy import optimize, signal

from ._kernels import modulator_core
from .spectral import FrequencyGrid, Psd, estimate_psd, make_grid

_COEF_TOL = 1e-12


class DesignInfeasibleError(RuntimeError):
    """Raised when no stable NTF of the requested order meets the target."""

    def __init__(self, message, achieved_rms_db=None):
        super().__init__(message)
        self.achieved_rms_db = achieved_rms_db


@dataclass(frozen=True, eq=False)
class RationalTf:
    """z-domain rational transfer function in zero/pole/gain form.

    Polynomials are taken in descending powers of z.  Zeros and poles must
    occur in conjugate pairs so coefficients are real.
    """

    zeros: np.ndarray
    poles: np.ndarray
    gain: float

    def __post_init__(self):
        z = np.atleast_1d(np.asarray(self.zeros, dtype=complex)).copy()
        p = np.atleast_1d(np.asarray(self.poles, dtype=complex)).copy()
        if not (np.all(np.isfinite(z)) and np.all(np.isfinite(p)) and np.isfinite(self.gain)):
            raise ValueError("zeros, poles and gain must be finite")
        for roots, name in ((z, "zeros"), (p, "poles")):
            coeffs = np.poly(roots) if roots.size else np.array([1.0])
            scale = max(float(np.max(np.abs(coeffs))), 1.0)
            if float(np.max(np.abs(np.imag(coeffs)))) > 1e-8 * scale:
                raise ValueError(f"{name} must occur in conjugate pairs (real coefficients)")
        z.setflags(write=False)
        p.setflags(write=False)
        object.__setattr__(self, "zeros", z)
        object.__setattr__(self, "poles", p)
        object.__setattr__(self, "gain", float(self.gain))

    def __call__(self, z):
        """Evaluate at complex point(s) z."""
        zz = np.atleast_1d(np.asarray(z, dtype=complex))
        ones = np.ones(zz.shape, dtype=complex)
        num = np.prod(zz[:, None] - self.zeros[None, :], axis=1) if self.zeros.size else ones
        den = np.prod(zz[:, None] - self.poles[None, :], axis=1) if self.poles.size else ones
        out = self.gain * num / den
        return out if np.ndim(z) else out[0]

    @property
    def order(self):
        return max(self.zeros.size, self.poles.size)

    def coeffs(self):
        """(num, den) real coefficient arrays, descending powers of z."""
        num = self.gain * (np.poly(self.zeros) if self.zeros.size else np.array([1.0]))
        den = np.poly(self.poles) if self.poles.size else np.array([1.0])
        return np.real(np.atleast_1d(num)), np.real(np.atleast_1d(den))

    def is_monic(self, tol=1e-9):
        return self.zeros.size == self.poles.size and abs(self.gain - 1.0) <= tol

    def is_stable(self):
        return bool(np.all(np.abs(self.poles) < 1.0)) if self.poles.size else True


def _strip_leading(c):
    c = np.atleast_1d(np.asarray(c, dtype=float))
    scale = float(np.max(np.abs(c)))
    if scale == 0.0:
        return None
    keep = np.abs(c) > _COEF_TOL * scale
    first = int(np.argmax(keep))
    return c[first:]


def _tf_from_num_den(num, den):
    num = _strip_leading(num)
    den = _strip_leading(den)
    if den is None:
        raise ValueError("degenerate transfer function: denominator is zero")
    if num is None:
        return RationalTf(np.array([], dtype=complex), np.array([], dtype=complex), 0.0)
    zeros = np.roots(num) if num.size > 1 else np.array([], dtype=complex)
    poles = np.roots(den) if den.size > 1 else np.array([], dtype=complex)
    return RationalTf(zeros, poles, num[0] / den[0])


def _pad_left(c, length):
    return np.concatenate([np.zeros(length - c.size), c])


def ntf_from_loop(h):
    """Noise transfer function 1/(1+H) of the unit-feedback loop."""
    bn, ad = h.coeffs()
    length = max(bn.size, ad.size)
    den = _pad_left(ad, length) + _pad_left(bn, length)
    return _tf_from_num_den(_pad_left(ad, length), den)


def stf_from_loop(h):
    """Signal transfer function H/(1+H) of the unit-feedback loop."""
    bn, ad = h.coeffs()
    length = max(bn.size, ad.size)
    den = _pad_left(ad, length) + _pad_left(bn, length)
    return _tf_from_num_den(_pad_left(bn, length), den)


def loop_from_ntf(ntf):
    """Invert NTF = 1/(1+H): the loop filter H = (1-NTF)/NTF.

    Requires a monic, stable NTF; a zero at z -> infinity would make the
    loop non-realizable.
    """
    if ntf.zeros.size < ntf.poles.size or abs(ntf.gain) < 1e-12:
        raise ValueError("NTF has a zero at z->infinity; loop is not invertible")
    if not ntf.is_monic():
        raise ValueError("loop inversion requires a monic NTF")
    if not ntf.is_stable():
        raise ValueError("loop inversion requires a stable NTF")
    num_ntf, den_ntf = ntf.coeffs()
    return _tf_from_num_den(den_ntf - num_ntf, num_ntf)


@dataclass(frozen=True)
class ModulatorConfig:
    """Modulator parameters: loop order, oversampling, quantizer geometry.

    The mid-rise quantizer has quantizer_levels output levels (must be even)
    spaced by step; full scale is levels*step/2.  max_ntf_gain is the
    Lee-style peak-gain cap used during NTF synthesis.
    """

    order: int = 4
    osr: float = 12.0
    sample_rate: float = 1.0
    quantizer_levels: int = 16
    step: float = 0.125
    max_ntf_gain: float = 1.5
    dither: bool = False  # subtractive triangular-PDF dither, whitens y - v

    def __post_init__(self):
        if self.order < 1:
            raise ValueError("order must be >= 1: an order-0 loop cannot shape noise")
        if self.osr < 2:
            raise ValueError("osr must be >= 2")
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")
        if self.quantizer_levels < 2 or self.quantizer_levels % 2 != 0:
            raise ValueError("quantizer_levels must be an even integer >= 2")
        if self.step <= 0:
            raise ValueError("step must be positive")
        if self.max_ntf_gain <= 1.0:
            raise ValueError("max_ntf_gain must exceed 1")

    @property
    def full_scale(self):
        return self.quantizer_levels * self.step / 2.0

    @property
    def band_edge(self):
        """Upper edge of the signal band, sample_rate/(2*osr)."""
        return self.sample_rate / (2.0 * self.osr)


@dataclass(frozen=True, eq=False)
class SimulationTrace:
    """Per-sample record of one modulator run."""

    input: np.ndarray
    output: np.ndarray
    quantizer_error: np.ndarray
    saturation_count: int
    stability_flag: bool

    def __post_init__(self):
        if not (self.input.size == self.output.size == self.quantizer_error.size):
            raise ValueError("trace sequences must have equal length")


def ntf_quant_psd(ntf, cfg, grid):
    """Quantization PSD induced by an NTF: step^2/(12*fs) * |NTF(e^j2pi f/fs)|^2.

    Note this is the analytic model's two-sided density convention; see
    measured_vs_predicted for the reconciliation with one-sided estimates.
    """
    fs = cfg.sample_rate
    if grid.f_lo < -1e-12 * fs or grid.f_hi > fs / 2.0 * (1.0 + 1e-12):
        raise ValueError("grid must lie within [0, sample_rate/2]")
    z = np.exp(2j * np.pi * grid.centers / fs)
    mag2 = np.abs(ntf(z)) ** 2
    return Psd(grid, cfg.step ** 2 / (12.0 * fs) * mag2)


# ---------------------------------------------------------------------------
# NTF synthesis

_ZERO_RADIUS_BETA = 0.6      # sets null depth: 1-rho = beta*theta_b/(2*pairs)
_PEAK_GRID = 2048


def _poles_from_params(x, order):
    pairs = order // 2
    poles = []
    for j in range(pairs):
        r, phi = x[2 * j], x[2 * j + 1]
        poles.append(r * np.exp(1j * phi))
        poles.append(r * np.exp(-1j * phi))
    if order % 2:
        poles.append(complex(x[2 * pairs]))
    return np.array(poles, dtype=complex)


def _zeros_from_angles(angles, rho, odd):
    zeros = []
    for th in angles:
        zeros.append(rho * np.exp(1j * th))
        zeros.append(rho * np.exp(-1j * th))
    if odd:
        zeros.append(complex(rho))
    return np.array(zeros, dtype=complex)


def _carved_zero_angles(target_sq, cfg):
    """Initial in-band zero angles carved from the target: Legendre node
    fractions warped by the 1/target measure, so zeros concentrate where the
    target is lowest (evenly spread for a flat target)."""
    order = cfg.order
    fs = cfg.sample_rate
    weight = 1.0 / target_sq.values
    cum = np.concatenate([[0.0], np.cumsum(weight)])
    cum /= cum[-1]
    nodes = np.polynomial.legendre.leggauss(order)[0]
    pos = np.sort(nodes[nodes > 1e-12])
    zero_freqs = np.interp(pos, cum, target_sq.grid.edges)
    return 2.0 * np.pi * zero_freqs / fs


def _initial_pole_params(order, cfg):
    """Butterworth high-pass prototypes at a few cutoffs, as (r, phi) vectors."""
    fs = cfg.sample_rate
    starts = []
    for mult in (1.0, 1.8, 3.0):
        fc = min(cfg.band_edge * mult, 0.45 * fs)
        _, poles, _ = signal.butter(order, fc, btype="highpass", output="zpk", fs=fs)
        pairs = sorted((p for p in poles if p.imag > 1e-12), key=lambda p: abs(np.angle(p)))
        x = []
        for p in pairs:
            x.extend([min(abs(p), 0.955), min(abs(np.angle(p)), 0.55 * np.pi)])
        if order % 2:
            reals = [p.real for p in poles if abs(p.imag) <= 1e-12]
            x.append(min(max(reals[0] if reals else 0.5, 0.0), 0.955))
        starts.append(np.array(x))
    return starts


def design_ntf(target_sq, cfg, rms_limit_db=6.0):
    """Synthesize a monic stable NTF whose induced quantization PSD matches
    target_sq in-band.

    Two-stage nonlinear least squares on in-band log magnitude with the
    peak-gain cap as a penalty: first the poles alone, with zeros fixed near
    the unit circle at angles carved from the target shape, then a joint
    polish of zero angles and poles (zero radii stay on the fixed shallow
    rule).  Raises DesignInfeasibleError (carrying the achieved in-band RMS
    error) when the order cannot express the target's dynamic range or the
    gain cap cannot be met.
    """
    order = cfg.order
    fs = cfg.sample_rate
    if np.any(target_sq.values <= 0):
        raise ValueError("target PSD must be strictly positive in-band")
    if target_sq.grid.f_hi > cfg.band_edge * (1.0 + 1e-9) or target_sq.grid.f_lo < -1e-12 * fs:
        raise ValueError("target grid must lie within the signal band [0, fs/(2*osr)]")

    theta_b = np.pi / cfg.osr
    zero_angles0 = _carved_zero_angles(target_sq, cfg)
    n_zp = zero_angles0.size
    odd = bool(order % 2)
    rho = 1.0 - _ZERO_RADIUS_BETA * theta_b / (2.0 * max(n_zp, 1))

    z_in = np.exp(2j * np.pi * target_sq.grid.centers / fs)
    z_dense = np.exp(1j * np.linspace(0.0, np.pi, _PEAK_GRID))

    c0 = cfg.step ** 2 / (12.0 * fs)
    log_target = np.log10(target_sq.values)
    k_in = log_target.size
    pen_weight = 30.0 * np.sqrt(k_in)
    cap = cfg.max_ntf_gain

    def eval_resid(zeros, poles):
        num_in = np.prod(z_in[:, None] - zeros[None, :], axis=1) if zeros.size else 1.0
        den_in = np.prod(z_in[:, None] - poles[None, :], axis=1)
        fit = np.log10(c0 * np.abs(num_in / den_in) ** 2) - log_target
        num_d = np.prod(z_dense[:, None] - zeros[None, :], axis=1) if zeros.size else 1.0
        den_d = np.prod(z_dense[:, None] - poles[None, :], axis=1)
        peak = float(np.max(np.abs(num_d / den_d)))
        return np.append(fit, pen_weight * max(0.0, (peak - cap) / cap))

    pairs = order // 2
    pole_lo = np.array([0.0, 0.0] * pairs + ([0.0] if odd else []))
    pole_hi = np.array([0.97, 0.6 * np.pi] * pairs + ([0.97] if odd else []))

    def solve(fun, x0, lo, hi):
        x0 = np.clip(x0, lo + 1e-6, hi - 1e-6)
        return optimize.least_squares(fun, x0, bounds=(lo, hi), method="trf",
                                      xtol=1e-12, ftol=1e-12, max_nfev=500)

    # stage 1: poles only, zeros frozen at the carved placement
    zeros0 = _zeros_from_angles(zero_angles0, rho, odd)
    stage1 = None
    for x0 in _initial_pole_params(order, cfg):
        try:
            sol = solve(lambda x: eval_resid(zeros0, _poles_from_params(x, order)),
                        x0, pole_lo, pole_hi)
        except Exception:
            continue
        if stage1 is None or sol.cost < stage1.cost:
            stage1 = sol
    if stage1 is None:
        raise DesignInfeasibleError("pole optimization failed for all starting points")

    # stage 2: polish zero angles jointly with the poles
    def split(x):
        return (_zeros_from_angles(x[:n_zp], rho, odd),
                _poles_from_params(x[n_zp:], order))

    lo = np.concatenate([np.zeros(n_zp), pole_lo])
    hi = np.concatenate([np.full(n_zp, theta_b), pole_hi])
    best = None
    for x0 in (np.concatenate([zero_angles0, stage1.x]),
               np.concatenate([(np.arange(n_zp) + 0.5) / max(n_zp, 1) * theta_b, stage1.x])):
        try:
            sol = solve(lambda x: eval_resid(*split(x)), x0, lo, hi)
        except Exception:
            continue
        if best is None or sol.cost < best.cost:
            best = sol
    if best is None:
        raise DesignInfeasibleError("joint zero/pole polish failed")

    zeros, poles = split(best.x)
    ntf = RationalTf(zeros, poles, 1.0)
    peak = float(np.max(np.abs(ntf(z_dense))))
    fit = eval_resid(zeros, poles)[:-1]
    rms_db = 10.0 * float(np.sqrt(np.mean(fit ** 2)))
    if peak > cap * 1.01:
        raise DesignInfeasibleError(
            f"peak NTF gain {peak:.3f} exceeds the cap {cap:.3f}; "
            f"in-band RMS error {rms_db:.2f} dB",
            achieved_rms_db=rms_db,
        )
    if rms_db > rms_limit_db:
        raise DesignInfeasibleError(
            f"order-{order} NTF cannot express the target: in-band RMS error "
            f"{rms_db:.2f} dB exceeds {rms_limit_db:.2f} dB",
            achieved_rms_db=rms_db,
        )
    if not ntf.is_stable():
        raise DesignInfeasibleError("fitted NTF is unstable", achieved_rms_db=rms_db)
    return ntf


# ---------------------------------------------------------------------------
# time-domain simulation

def simulate(h, cfg, input_samples, seed=0, injected_error=None):
    """Run the single-loop modulator on an input sequence.

    The loop filter h must be strictly proper (no delay-free path).  The
    trace records the output, the per-sample quantizer error y-v, the
    saturation count, and a stability flag that clears when any loop state
    exceeds 10x quantizer full scale.  Instability is a reported state, not
    an exception.

    injected_error is a test hook: when given, the quantizer is replaced by
    adding this known sequence to the loop-filter output, exercising the
    linearized model with a controlled error source.
    """
    x = np.ascontiguousarray(input_samples, dtype=float)
    bn, ad = h.coeffs()
    bn = bn / ad[0]
    ad = ad / ad[0]
    bn = _pad_left(bn, ad.size)
    scale = max(float(np.max(np.abs(bn))), float(np.max(np.abs(ad))))
    if abs(bn[0]) > 1e-9 * scale:
        raise ValueError("loop filter must be strictly proper (H -> 0 as z -> infinity)")
    b = np.ascontiguousarray(bn[1:])
    a = np.ascontiguousarray(ad[1:])

    if cfg.dither:
        rng = np.random.default_rng(seed)
        dither = (rng.random(x.size) - rng.random(x.size)) * cfg.step
    else:
        dither = np.zeros(0)
    if injected_error is not None:
        inject = np.ascontiguousarray(injected_error, dtype=float)
        if inject.size != x.size:
            raise ValueError("injected_error must match the input length")
        use_inject = True
    else:
        inject = np.zeros(0)
        use_inject = False

    state_limit = 10.0 * cfg.full_scale
    y, q, sat, max_state = modulator_core(
        x, b, a, float(cfg.step), float(cfg.quantizer_levels),
        dither, inject, use_inject, state_limit,
    )
    return SimulationTrace(
        input=x,
        output=y,
        quantizer_error=q,
        saturation_count=int(sat),
        stability_flag=bool(max_state <= state_limit),
    )


def _bin_average(freqs, vals, grid):
    idx = np.searchsorted(grid.edges, freqs, side="right") - 1
    out = np.full(grid.num_bins, np.nan)
    for k in range(grid.num_bins):
        sel = idx == k
        if np.any(sel):
            out[k] = np.mean(vals[sel])
    empty = np.isnan(out)
    if np.any(empty):
        out[empty] = np.interp(grid.centers[empty], freqs, vals)
    return out


@dataclass(frozen=True, eq=False)
class TrackingReport:
    """Measured vs analytic in-band comparison of the shaped noise PSD."""

    grid: FrequencyGrid
    measured: np.ndarray
    predicted: np.ndarray
    per_bin_db_error: np.ndarray
    rms_db_error: float


def measured_vs_predicted(trace, ntf, cfg, inband_grid=None, reference=None,
                          segment_len=4096, overlap_fraction=0.5):
    """Welch-estimate the trace's shaped quantization noise and compare it
    in-band against the analytic model.

    The shaped noise is extracted exactly as output - STF*input (STF = 1-NTF
    for the unit-feedback loop).  The one-sided Welch estimate is halved to
    the analytic model's two-sided density convention, then bin-averaged onto
    the comparison grid.  reference overrides the NTF-induced PSD as the
    analytic curve (e.g. to compare against a shaping target), and supplies
    the grid when inband_grid is not given.
    """
    if not trace.stability_flag:
        raise ValueError("trace is from an unstable run; comparison is meaningless")
    fs = cfg.sample_rate

    num_ntf, den_ntf = ntf.coeffs()
    length = max(num_ntf.size, den_ntf.size)
    num_ntf = _pad_left(num_ntf, length)
    den_ntf = _pad_left(den_ntf, length)
    shaped = trace.output - signal.lfilter(den_ntf - num_ntf, den_ntf, trace.input)

    skip = min(segment_len, shaped.size // 4)
    est = estimate_psd(shaped[skip:], fs, segment_len, overlap_fraction)
    measured_fine = est.values / 2.0

    if inband_grid is None:
        inband_grid = reference.grid if reference is not None else make_grid(0.0, cfg.band_edge, 32)

    fine_f = est.grid.centers
    inband = fine_f <= inband_grid.f_hi * (1.0 + 1e-12)
    measured = _bin_average(fine_f[inband], measured_fine[inband], inband_grid)

    if reference is not None:
        predicted = np.interp(inband_grid.centers, reference.grid.centers, reference.values)
    else:
        z = np.exp(2j * np.pi * fine_f[inband] / fs)
        pred_fine = cfg.step ** 2 / (12.0 * fs) * np.abs(ntf(z)) ** 2
        predicted = _bin_average(fine_f[inband], pred_fine, inband_grid)

    per_bin = 10.0 * np.log10(measured / predicted)
    return TrackingReport(
        grid=inband_grid,
        measured=measured,
        predicted=predicted,
        per_bin_db_error=per_bin,
        rms_db_error=float(np.sqrt(np.mean(per_bin ** 2))),
    )


# ---------------------------------------------------------------------------
# serialization

def _fmt_pair(c):
    return f"{c.real:.17g},{c.imag:.17g}"


def write_tf(tf, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("zeros: " + " ".join(_fmt_pair(z) for z in tf.zeros) + "\n")
        fh.write("poles: " + " ".join(_fmt_pair(p) for p in tf.poles) + "\n")
        fh.write(f"gain: {tf.gain:.17g}\n")


def _parse_pairs(text):
    parts = text.split()
    vals = []
    for part in parts:
        re_s, im_s = part.split(",")
        vals.append(complex(float(re_s), float(im_s)))
    return np.array(vals, dtype=complex)


def read_tf(path):
    fields = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            key, _, rest = line.partition(":")
            fields[key.strip()] = rest.strip()
    if not {"zeros", "poles", "gain"} <= set(fields):
        raise ValueError("transfer function file must have zeros:, poles: and gain: lines")
    return RationalTf(_parse_pairs(fields["zeros"]), _parse_pairs(fields["poles"]),
                      float(fields["gain"]))


def write_trace_csv(trace, path):
    from .spectral import _fmt

    with open(path, "w", encoding="utf-8") as fh:
        fh.write("n,input,output,qerror\n")
        for n, (xi, yi, qi) in enumerate(zip(trace.input, trace.output,
                                             trace.quantizer_error)):
            fh.write(f"{n},{_fmt(xi)},{_fmt(yi)},{_fmt(qi)}\n")
