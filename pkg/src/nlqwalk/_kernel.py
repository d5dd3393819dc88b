"""Fused trajectory loop.

Same arithmetic as ``walk.step`` (phase, coin, shift) plus the per-step
observables, in one pass per step.  Compiled with ``nogil`` so sweeps can run
trajectories on a thread pool.
"""

import math

import numba
import numpy as np

STATUS_OK = 0
STATUS_STOPPED = 1
STATUS_NORM_DRIFT = 2


@numba.njit(cache=True, nogil=True)
def run_kernel(a, b, theta, chi, n_steps, coherence, participation, density, stride,
               stop_below, norm_tol):
    """Evolve ``(a, b)`` in place for up to ``n_steps`` steps.

    Writes observables for t = 0..steps_done into ``coherence`` and
    ``participation`` and, if ``stride > 0``, site densities for every t that
    is a multiple of ``stride`` into row ``t // stride`` of ``density``.
    Stops early once the coherence drops below ``stop_below``.

    Returns ``(steps_done, status, max_norm_dev)``.
    """
    n = a.shape[0]
    c = math.cos(theta)
    s = math.sin(theta)
    k = 2.0 * math.pi * chi
    na = np.empty(n, np.complex128)
    nb = np.empty(n, np.complex128)
    max_dev = 0.0
    t = 0
    while True:
        abs_sum = 0.0
        p2 = 0.0
        norm = 0.0
        record = stride > 0 and t % stride == 0
        row = t // stride if stride > 0 else 0
        for j in range(n):
            ia = a[j].real * a[j].real + a[j].imag * a[j].imag
            ib = b[j].real * b[j].real + b[j].imag * b[j].imag
            p = ia + ib
            abs_sum += math.sqrt(ia) + math.sqrt(ib)
            p2 += p * p
            norm += p
            if record:
                density[row, j] = p
        coherence[t] = abs_sum * abs_sum - 1.0
        participation[t] = 1.0 / p2
        dev = abs(norm - 1.0)
        if dev > max_dev:
            max_dev = dev
        if dev > norm_tol:
            return t, STATUS_NORM_DRIFT, max_dev
        if coherence[t] < stop_below:
            return t, STATUS_STOPPED, max_dev
        if t == n_steps:
            return t, STATUS_OK, max_dev

        for j in range(n):
            ia = a[j].real * a[j].real + a[j].imag * a[j].imag
            ib = b[j].real * b[j].real + b[j].imag * b[j].imag
            x = a[j] * complex(math.cos(k * ia), math.sin(k * ia))
            y = b[j] * complex(math.cos(k * ib), math.sin(k * ib))
            na[(j + 1) % n] = c * x - s * y
            nb[(j - 1) % n] = s * x + c * y
        a[:] = na
        b[:] = nb
        t += 1
