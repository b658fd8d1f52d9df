"""Optimal quantization-noise shaping under a converter power budget.

The closed form puts Sq proportional to Sv^(2/3) with a scale fixed by the
power constraint; evaluating it with the discrete band sum makes the
constraint exact on the grid.  An independent stochastic projected-descent
optimizer minimizes the information-loss functional directly and serves as a
numerical cross-check of the closed form, not as the production path.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from . import capacity
from .capacity import BitProfile, PowerBudget, as_budget, bits_from_sq
from .spectral import Psd, require_same_grid

_LN2 = np.log(2.0)
_SQRT12 = np.sqrt(12.0)

SMALLNESS_WARN_RATIO = 0.1


@dataclass(frozen=True, eq=False)
class ShapingResult:
    """Shaped quantization PSD with its bit profile and diagnostics.

    lagrange_scale is the squared bracket constant multiplying Sv^(2/3); the
    underlying Lagrange multiplier is recoverable from it (see the
    lagrange_multiplier property).  converged/iterations are meaningful for
    numerically optimized results only.
    """

    sq_opt: Psd
    bit_profile: BitProfile
    achieved_power: PowerBudget
    info_loss: float
    lagrange_scale: float
    converged: bool = True
    iterations: int = 0

    @property
    def lagrange_multiplier(self):
        w = self.sq_opt.grid.width
        return 2.0 * w * np.log2(np.e) * self.lagrange_scale ** 1.5


@dataclass(frozen=True)
class SearchConfig:
    """Knobs for the stochastic projected-descent verifier."""

    max_iters: int = 6000
    step_scale: float = 0.5
    tolerance: float = 1e-12
    seed: int = 0
    restarts: int = 2

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.tolerance <= 0:
            raise ValueError("tolerance must be positive")
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")


def _check_noise(noise):
    if np.any(noise.values <= 0):
        raise ValueError("noise PSD must be strictly positive")


def optimal_sq(noise, budget):
    """Closed-form information-maximizing quantization noise shape.

    Sq(f) = Sv(f)^(2/3) * [ integral(Sv^(-1/3)) / (sqrt(12)*P) ]^2, evaluated
    with the grid's own Riemann sum so the power constraint holds exactly.
    """
    _check_noise(noise)
    budget = as_budget(budget)
    g = noise.grid
    sv = noise.values
    bracket = g.delta * float(np.sum(sv ** (-1.0 / 3.0))) / (_SQRT12 * budget.p)
    scale = bracket * bracket
    sq_vals = sv ** (2.0 / 3.0) * scale
    ratio = float(np.max(sq_vals / sv))
    if ratio > SMALLNESS_WARN_RATIO:
        warnings.warn(
            f"quantization noise is not small relative to channel noise "
            f"(max Sq/Sv = {ratio:.3g}); the shape is outside its small-noise "
            f"validity regime",
            UserWarning,
            stacklevel=2,
        )
    sq = Psd(g, sq_vals)
    return ShapingResult(
        sq_opt=sq,
        bit_profile=bits_from_sq(sq),
        achieved_power=capacity.power_of_sq(sq),
        info_loss=capacity.info_loss(noise, sq),
        lagrange_scale=scale,
    )


def _loss(sq_vals, sv, delta):
    return delta * float(np.sum(np.log1p(sq_vals / sv))) / _LN2


def _renormalize(sq_vals, delta, power_target):
    # scaling Sq by g^2 scales the power integral by 1/g: one exact projection
    integral = delta * float(np.sum(sq_vals ** -0.5)) / _SQRT12
    return sq_vals * (integral / power_target) ** 2


def optimal_sq_numerical(ch, budget, cfg=None):
    """Minimize the information-loss functional directly under the power
    constraint, independently of the closed form.

    Projected descent in log(Sq): multiplicative steps along the constraint
    tangent with exact power re-normalization after every move, plus annealed
    random multiplicative kicks and independent restarts.  Non-convergence is
    reported through the result's converged flag, never raised.
    """
    if cfg is None:
        cfg = SearchConfig()
    budget = as_budget(budget)
    noise = ch.noise
    _check_noise(noise)
    g = noise.grid
    sv = noise.values
    delta = g.delta
    k = g.num_bins
    p = budget.p

    best_sq = None
    best_loss = np.inf
    best_converged = False
    best_iters = 0

    for restart in range(cfg.restarts):
        rng = np.random.default_rng([cfg.seed, restart])
        sq = np.full(k, g.width ** 2 / (12.0 * p * p))
        if restart > 0:
            sq = sq * np.exp(0.5 * rng.standard_normal(k))
        sq = _renormalize(sq, delta, p)
        cur = _loss(sq, sv, delta)
        step = cfg.step_scale
        converged = False
        iters = 0
        check = cur

        for it in range(cfg.max_iters):
            iters = it + 1
            grad = sq / (sv + sq)           # dL/d(ln Sq) up to a positive constant
            normal = sq ** -0.5             # constraint gradient in log coordinates
            tang = grad - (grad @ normal) / (normal @ normal) * normal
            gmax = float(np.max(np.abs(tang)))
            if gmax == 0.0:
                converged = True
                break
            trial = _renormalize(sq * np.exp(-step * tang / gmax), delta, p)
            t_loss = _loss(trial, sv, delta)
            if t_loss < cur:
                sq, cur = trial, t_loss
                step = min(step * 1.3, 2.0)
            else:
                step *= 0.5
            if (it & 31) == 0:
                kick = _renormalize(sq * np.exp(step * 0.2 * rng.standard_normal(k)), delta, p)
                k_loss = _loss(kick, sv, delta)
                if k_loss < cur:
                    sq, cur = kick, k_loss
            if (it & 63) == 63:
                if check - cur <= cfg.tolerance * max(abs(cur), 1e-300):
                    converged = True
                    break
                check = cur

        if cur < best_loss:
            best_sq, best_loss = sq, cur
            best_converged, best_iters = converged, iters

    sq = Psd(g, best_sq)
    scale = float(np.mean(best_sq / sv ** (2.0 / 3.0)))
    return ShapingResult(
        sq_opt=sq,
        bit_profile=bits_from_sq(sq),
        achieved_power=capacity.power_of_sq(sq),
        info_loss=best_loss,
        lagrange_scale=scale,
        converged=best_converged,
        iterations=best_iters,
    )


@dataclass(frozen=True)
class ShapingReport:
    """Constraint residual, loss figures, and small-PSD validity margins."""

    power_residual: float
    info_loss: float
    loss_vs_closed_form: float
    max_sq_over_noise: float
    max_noise_over_signal: float
    min_bits: float


def verify_shaping(ch, sq, budget):
    """Check a candidate quantization PSD against its budget and the closed form.

    Reports (never raises on) power mismatch; the margins quantify how far
    the small-noise assumptions are stretched, and min_bits surfaces any
    negative-bit condition.
    """
    budget = as_budget(budget)
    require_same_grid(ch.grid, sq.grid, "channel and quantization PSD")
    achieved = capacity.power_of_sq(sq).p
    loss = capacity.info_loss(ch.noise, sq)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        closed = optimal_sq(ch.noise, budget)
    sx = ch.signal.values
    total_noise = ch.noise.values + sq.values
    with np.errstate(divide="ignore"):
        noise_over_signal = np.where(sx > 0, total_noise / np.where(sx > 0, sx, 1.0), np.inf)
    return ShapingReport(
        power_residual=(achieved - budget.p) / budget.p,
        info_loss=loss,
        loss_vs_closed_form=loss - closed.info_loss,
        max_sq_over_noise=float(np.max(sq.values / ch.noise.values)),
        max_noise_over_signal=float(np.max(noise_over_signal)),
        min_bits=float(np.min(bits_from_sq(sq).bits)),
    )


# ---------------------------------------------------------------------------
# serialization

def write_shaping_csv(result, path):
    from .spectral import _fmt

    with open(path, "w", encoding="utf-8") as fh:
        fh.write("frequency_hz,sq_opt,bits\n")
        for f, s, b in zip(result.sq_opt.grid.centers, result.sq_opt.values,
                           result.bit_profile.bits):
            fh.write(f"{_fmt(f)},{_fmt(s)},{_fmt(b)}\n")


def write_summary(entries, path):
    """Flat key=value sidecar; values formatted deterministically."""
    from .spectral import _fmt

    with open(path, "w", encoding="utf-8") as fh:
        for key, val in entries.items():
            if isinstance(val, bool):
                fh.write(f"{key}={str(val).lower()}\n")
            elif isinstance(val, (int, np.integer)):
                fh.write(f"{key}={val}\n")
            elif isinstance(val, (float, np.floating)):
                fh.write(f"{key}={_fmt(val)}\n")
            else:
                fh.write(f"{key}={val}\n")
