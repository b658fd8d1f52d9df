"""Multi-channel converter planning: time-interleaved PSD composition and
frequency partitioning of the band across several converters.

Equal-power plans carry exact (interpolated) quantile edges, so the declared
per-band powers are equal by construction.  Band/bin alignment is handled at
shaping time: per_band_shaping snaps edges to grid-bin boundaries and then
recomputes the snapped budgets from the cumulative power integral of the
global solution, which keeps the concatenation identity exact on the grid.
"""

from dataclasses import dataclass
from itertools import combinations
from math import comb

import numpy as np

from .capacity import PowerBudget, as_budget
from .shaping import optimal_sq
from .spectral import FrequencyGrid, Psd

_SQRT12 = np.sqrt(12.0)

EQUAL_POWER_TOL = 1e-6


@dataclass(frozen=True, eq=False)
class PartitionPlan:
    """Contiguous band edges with per-band power and bandwidth.

    power_balance_tol declares how equal the per-band powers are meant to be;
    None means the plan intentionally carries unequal powers (constrained
    modes).
    """

    edges: np.ndarray
    per_band_power: np.ndarray
    per_band_bandwidth: np.ndarray
    power_balance_tol: float | None = None

    def __post_init__(self):
        e = np.asarray(self.edges, dtype=float).copy()
        p = np.asarray(self.per_band_power, dtype=float).copy()
        w = np.asarray(self.per_band_bandwidth, dtype=float).copy()
        if e.ndim != 1 or e.size < 2:
            raise ValueError("edges must hold at least two frequencies")
        if np.any(np.diff(e) <= 0):
            raise ValueError("edges must be strictly increasing")
        if p.size != e.size - 1 or w.size != e.size - 1:
            raise ValueError("need one power and one bandwidth per band")
        if not np.allclose(w, np.diff(e), rtol=1e-9, atol=0):
            raise ValueError("bandwidths must match the edge spacing")
        if np.any(p <= 0):
            raise ValueError("per-band powers must be positive")
        if self.power_balance_tol is not None:
            mean = float(np.mean(p))
            if float(np.max(np.abs(p - mean))) > self.power_balance_tol * mean:
                raise ValueError("per-band powers exceed the declared balance tolerance")
        for arr in (e, p, w):
            arr.setflags(write=False)
        object.__setattr__(self, "edges", e)
        object.__setattr__(self, "per_band_power", p)
        object.__setattr__(self, "per_band_bandwidth", w)

    @property
    def num_bands(self):
        return self.edges.size - 1

    @property
    def total_power(self):
        return float(np.sum(self.per_band_power))


def time_interleave_psd(sq_single, n):
    """Bandwidth-expanded PSD of n time-interleaved converters.

    Pure frequency-axis dilation: the value at n*f equals the single-converter
    value at f (ideal offsets and matching assumed).
    """
    if int(n) != n or n < 1:
        raise ValueError("interleave factor must be a positive integer")
    n = int(n)
    g = sq_single.grid
    new_grid = FrequencyGrid(n * g.f_lo, n * g.f_hi, g.num_bins)
    vals = np.interp(new_grid.centers / n, g.centers, sq_single.values)
    return Psd(new_grid, vals)


def _power_measure(noise, budget):
    """Per-bin power shares of the globally optimal shape (they sum to the
    budget), plus the cumulative integral at the grid edges."""
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        global_result = optimal_sq(noise, budget)
    g = noise.grid
    shares = g.delta * global_result.sq_opt.values ** -0.5 / _SQRT12
    cum = np.concatenate([[0.0], np.cumsum(shares)])
    return global_result, shares, cum


def partition_equal_power(noise, budget_total, n):
    """Split the band into n contiguous pieces of equal converter power.

    Edges are the n-quantiles of the cumulative power integral of the global
    optimal shape (interpolated within bins, so each band receives exactly
    total/n).
    """
    budget_total = as_budget(budget_total)
    if int(n) != n or n < 1:
        raise ValueError("number of bands must be a positive integer")
    n = int(n)
    g = noise.grid
    if n > g.num_bins:
        raise ValueError(f"cannot split {g.num_bins} bins into {n} bands")

    _, _, cum = _power_measure(noise, budget_total)
    p = budget_total.p
    targets = p * np.arange(1, n) / n
    interior = np.interp(targets, cum, g.edges)
    edges = np.concatenate([[g.f_lo], interior, [g.f_hi]])
    return PartitionPlan(
        edges=edges,
        per_band_power=np.full(n, p / n),
        per_band_bandwidth=np.diff(edges),
        power_balance_tol=EQUAL_POWER_TOL,
    )


def _snap_edges_to_bins(plan, grid):
    """Indices of the nearest bin boundaries for the plan's interior edges."""
    idx = np.rint((plan.edges[1:-1] - grid.f_lo) / grid.delta).astype(int)
    idx = np.clip(idx, 1, grid.num_bins - 1)
    if np.any(np.diff(idx) <= 0):
        raise ValueError("bands collapse after snapping edges to grid bins")
    return np.concatenate([[0], idx, [grid.num_bins]])


def _is_aligned(plan, grid):
    offs = (plan.edges[1:-1] - grid.f_lo) / grid.delta
    return bool(np.all(np.abs(offs - np.rint(offs)) <= 1e-6))


def per_band_shaping(noise, plan):
    """Shape each band with its own budget; returns one ShapingResult per band.

    Plans with bin-aligned edges are used verbatim (their budgets included),
    which is the hook for evaluating deliberately unequal splits.  Unaligned
    edges are snapped to bin boundaries and the snapped budgets are
    recomputed from the global solution's cumulative power integral rather
    than assumed equal.
    """
    g = noise.grid
    if plan.edges[0] < g.f_lo - 1e-9 * g.width or plan.edges[-1] > g.f_hi + 1e-9 * g.width:
        raise ValueError("partition plan exceeds the noise grid")
    idx = _snap_edges_to_bins(plan, g)

    if _is_aligned(plan, g):
        budgets = plan.per_band_power
    else:
        _, shares, _ = _power_measure(noise, PowerBudget(plan.total_power))
        budgets = np.array([np.sum(shares[idx[i]:idx[i + 1]]) for i in range(plan.num_bands)])

    results = []
    boundaries = g.edges
    for i in range(plan.num_bands):
        i0, i1 = idx[i], idx[i + 1]
        sub_grid = FrequencyGrid(boundaries[i0], boundaries[i1], i1 - i0)
        sub_noise = Psd(sub_grid, noise.values[i0:i1])
        results.append(optimal_sq(sub_noise, PowerBudget(budgets[i])))
    return results


def partition_constrained(noise, budget_total, n, mode="equal-bandwidth"):
    """Partition under a bandwidth constraint instead of exact power balance.

    equal-bandwidth: uniform edges; per-band powers are the global solution's
    integrals over each band, reported honestly unequal.  integer-ratio:
    exhaustive search over integer width compositions (total units <= 4n)
    minimizing the worst relative deviation from equal power.
    """
    budget_total = as_budget(budget_total)
    if int(n) != n or n < 1:
        raise ValueError("number of bands must be a positive integer")
    n = int(n)
    g = noise.grid
    if n > g.num_bins:
        raise ValueError(f"cannot split {g.num_bins} bins into {n} bands")

    _, _, cum = _power_measure(noise, budget_total)

    def band_powers(edges):
        at = np.interp(edges, g.edges, cum)
        return np.diff(at)

    if mode == "equal-bandwidth":
        edges = g.f_lo + np.arange(n + 1) * (g.width / n)
        edges[-1] = g.f_hi
    elif mode == "integer-ratio":
        if comb(4 * n - 1, n - 1) > 2_000_000:
            raise ValueError(f"integer-ratio search space too large for n={n}")
        p_even = budget_total.p / n
        best_edges = None
        best_dev = np.inf
        for total_units in range(n, 4 * n + 1):
            for cuts in combinations(range(1, total_units), n - 1):
                units = np.diff(np.concatenate([[0], cuts, [total_units]]))
                edges = g.f_lo + np.concatenate([[0], np.cumsum(units)]) * (g.width / total_units)
                edges[-1] = g.f_hi
                dev = float(np.max(np.abs(band_powers(edges) - p_even))) / p_even
                if dev < best_dev - 1e-15:
                    best_dev = dev
                    best_edges = edges
        edges = best_edges
    else:
        raise ValueError(f"unknown partition mode {mode!r}")

    powers = band_powers(edges)
    return PartitionPlan(
        edges=edges,
        per_band_power=powers,
        per_band_bandwidth=np.diff(edges),
        power_balance_tol=None,
    )


def write_plan_csv(plan, path):
    from .spectral import _fmt

    with open(path, "w", encoding="utf-8") as fh:
        fh.write("band_index,f_lo_hz,f_hi_hz,power,bandwidth_hz\n")
        for i in range(plan.num_bands):
            fh.write(
                f"{i},{_fmt(plan.edges[i])},{_fmt(plan.edges[i + 1])},"
                f"{_fmt(plan.per_band_power[i])},{_fmt(plan.per_band_bandwidth[i])}\n"
            )
