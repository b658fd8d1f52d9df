"""Hot inner loops with optional numba acceleration.

The delta-sigma modulator is a per-sample feedback recursion and cannot be
vectorized, so it is the one kernel worth JIT compiling.  Set the environment
variable ``QNSHAPE_DISABLE_NUMBA=1`` to force the pure-numpy fallback (the
same function body, undecorated).  ``benchmarks/bench_modulator.py`` compares
the two paths.
"""

import os

import numpy as np

_DISABLED = os.environ.get("QNSHAPE_DISABLE_NUMBA", "").lower() in ("1", "true", "yes")

try:
    if _DISABLED:
        raise ImportError
    from numba import njit

    HAVE_NUMBA = True
except ImportError:
    HAVE_NUMBA = False


def _modulator_core(x, b, a, step, levels, dither, inject, use_inject, state_limit):
    """Run the single-loop modulator: loop filter H, embedded quantizer, unit feedback.

    H(z) = (b[0] z^-1 + ... + b[n-1] z^-n) / (1 + a[0] z^-1 + ... + a[n-1] z^-n),
    realized in transposed direct-form II so the quantizer input v[t] depends
    only on past samples (H strictly proper, no delay-free loop).

    When ``use_inject`` is set the quantizer is bypassed and inject[t] is added
    to v[t] instead, which exercises the linearized model with a known error
    source.

    Returns (output, quantizer_error, saturation_count, max_abs_state).
    """
    n = b.shape[0]
    npts = x.shape[0]
    y = np.empty(npts)
    q = np.empty(npts)
    s = np.zeros(n)
    half = 0.5 * step
    top = (levels / 2.0 - 0.5) * step
    sat = 0
    max_state = 0.0
    use_dither = dither.shape[0] > 0

    for t in range(npts):
        v = s[0] if n > 0 else 0.0
        if use_inject:
            yt = v + inject[t]
            qt = inject[t]
        else:
            # subtractive dither keeps the effective error uniform white
            # without adding power: y - v equals the lattice error of v+d
            d = dither[t] if use_dither else 0.0
            vq = v + d
            yt = (np.floor(vq / step) + 0.5) * step
            if yt > top:
                yt = top
                sat += 1
            elif yt < -top:
                yt = -top
                sat += 1
            yt -= d
            qt = yt - v
        y[t] = yt
        q[t] = qt

        u = x[t] - yt
        for j in range(n - 1):
            s[j] = s[j + 1] + b[j] * u - a[j] * v
        if n > 0:
            s[n - 1] = b[n - 1] * u - a[n - 1] * v
            for j in range(n):
                m = abs(s[j])
                if m > max_state:
                    max_state = m
        if max_state > state_limit:
            # diverged: freeze remaining output at 0 and stop integrating
            for r in range(t + 1, npts):
                y[r] = 0.0
                q[r] = 0.0
            break

    return y, q, sat, max_state


modulator_core_py = _modulator_core
modulator_core_jit = njit(cache=True)(_modulator_core) if HAVE_NUMBA else None
modulator_core = modulator_core_jit if HAVE_NUMBA else modulator_core_py
