"""Sequential-probe random walk: the inner loop of every likelihood-ratio test.

Two interchangeable implementations are provided.  The numba one is used when
numba imports and the environment variable ``ASL_NUMBA`` is not ``"0"``; the
numpy one is the reference fallback.  Both consume the same noise draws in the
same order and produce bit-identical outputs.

Status codes returned by :func:`walk`:

* ``DONE``       all tests finished
* ``NEED_NOISE`` noise buffer ran dry mid-test; resume with a fresh buffer
* ``EXHAUSTED``  the energy allowance ran out; remaining tests are refused

Per-test decision codes: ``H0``, ``H1``, ``CAPPED`` (step cap hit), ``REFUSED``.
"""
import os

import numpy as np

H0, H1, CAPPED, REFUSED = 0, 1, 2, 3
DONE, NEED_NOISE, EXHAUSTED = 0, 1, 2


def _walk_py(noise, pos, means, slopes, offsets, sqs, lower, upper, max_steps,
             start, steps0, llr0, allowance, steps_out, dec_out, llr_out):
    n_tests = means.shape[0]
    n_noise = noise.shape[0]
    i = start
    steps = steps0
    llr = llr0
    while i < n_tests:
        mean = means[i]
        slope = slopes[i]
        off = offsets[i]
        sq = sqs[i]
        # steps this test may still take before the allowance is spent
        if sq > 0.0:
            afford = np.floor(allowance / sq)
        else:
            afford = np.inf
        dec = -1
        while True:
            if steps >= max_steps:
                dec = CAPPED
                break
            if steps >= afford:
                dec = REFUSED
                break
            if pos >= n_noise:
                return i, pos, steps, llr, allowance, NEED_NOISE
            y = mean + noise[pos]
            pos += 1
            llr = llr + (slope * y - off)
            steps += 1
            if llr >= upper:
                dec = H1
                break
            if llr <= lower:
                dec = H0
                break
        allowance = allowance - steps * sq
        steps_out[i] = steps
        dec_out[i] = dec
        llr_out[i] = llr
        i += 1
        steps = 0
        llr = 0.0
        if dec == REFUSED:
            while i < n_tests:
                steps_out[i] = 0
                dec_out[i] = REFUSED
                llr_out[i] = 0.0
                i += 1
            return i, pos, 0, 0.0, allowance, EXHAUSTED
    return i, pos, 0, 0.0, allowance, DONE


def walk_numpy(noise, pos, means, slopes, offsets, sqs, lower, upper, max_steps,
               start, steps0, llr0, allowance, steps_out, dec_out, llr_out, block=4096):
    """Vectorised reference: each test is advanced ``block`` steps at a time via cumsum."""
    n_tests = means.shape[0]
    n_noise = noise.shape[0]
    i = start
    steps = steps0
    llr = llr0
    while i < n_tests:
        mean, slope, off, sq = means[i], slopes[i], offsets[i], sqs[i]
        afford = np.floor(allowance / sq) if sq > 0.0 else np.inf
        dec = -1
        while True:
            if steps >= max_steps:
                dec = CAPPED
                break
            if steps >= afford:
                dec = REFUSED
                break
            if pos >= n_noise:
                return i, pos, steps, llr, allowance, NEED_NOISE
            take = int(min(block, max_steps - steps, afford - steps, n_noise - pos))
            y = mean + noise[pos:pos + take]
            z = slope * y - off
            # prepend the running value so the accumulation order matches the scalar loop
            path = np.cumsum(np.concatenate(([llr], z)))[1:]
            hit = np.flatnonzero((path >= upper) | (path <= lower))
            if hit.size:
                j = int(hit[0])
                llr = float(path[j])
                pos += j + 1
                steps += j + 1
                dec = H1 if llr >= upper else H0
                break
            llr = float(path[-1])
            pos += take
            steps += take
        allowance = allowance - steps * sq
        steps_out[i] = steps
        dec_out[i] = dec
        llr_out[i] = llr
        i += 1
        steps = 0
        llr = 0.0
        if dec == REFUSED:
            steps_out[i:] = 0
            dec_out[i:] = REFUSED
            llr_out[i:] = 0.0
            return n_tests, pos, 0, 0.0, allowance, EXHAUSTED
    return i, pos, 0, 0.0, allowance, DONE


def _numba_wanted():
    return os.environ.get("ASL_NUMBA", "1").strip().lower() not in ("0", "false", "no", "off")


walk_numba = None
if _numba_wanted():
    try:
        from numba import njit
    except ImportError:  # pragma: no cover - numba is a declared dependency
        njit = None
    if njit is not None:
        walk_numba = njit(cache=True, nogil=True)(_walk_py)

USE_NUMBA = walk_numba is not None
walk = walk_numba if USE_NUMBA else walk_numpy
