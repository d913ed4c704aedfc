"""Strided tensor-product kernels.

Each kernel computes one output entry per ``(i, j, k)`` as a length-n dot
product, contracting the unit-stride (right), stride-n (middle) or
stride-n^2 (left) index of ``x[i + j*n + k*n*n]``.
"""
import numba
import numpy as np
from numba import njit, prange

# the bundled TBB is often too old and numba warns on every start-up
numba.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]


@njit(parallel=True, cache=True)
def tensor_right(Q, x, out, n):
    nn = n * n
    for k in prange(n):
        for j in range(n):
            base = j * n + k * nn
            for i in range(n):
                acc = x[0] * 0
                for q in range(n):
                    acc = Q[i, q] * x[base + q] + acc
                out[base + i] = acc


@njit(parallel=True, cache=True)
def tensor_middle(Q, x, out, n):
    nn = n * n
    for k in prange(n):
        for j in range(n):
            for i in range(n):
                start = k * nn + i
                acc = x[0] * 0
                for q in range(n):
                    acc = Q[j, q] * x[start + q * n] + acc
                out[start + j * n] = acc


@njit(parallel=True, cache=True)
def tensor_left(Q, x, out, n):
    nn = n * n
    for k in prange(n):
        for j in range(n):
            for i in range(n):
                start = i + j * n
                acc = x[0] * 0
                for q in range(n):
                    acc = Q[k, q] * x[start + q * nn] + acc
                out[start + k * nn] = acc


def set_threads(threads: int):
    """0 selects every available core."""
    limit = numba.config.NUMBA_NUM_THREADS
    numba.set_num_threads(limit if threads <= 0 else min(threads, limit))


KERNELS = {"R": tensor_right, "M": tensor_middle, "L": tensor_left}


def warmup():
    """Compile every kernel/dtype combination up front so timings exclude JIT."""
    for dt in (np.float32, np.float64, np.complex64, np.complex128):
        Q = np.eye(2, dtype=dt)
        x = np.ones(8, dtype=dt)
        out = np.empty_like(x)
        for kern in KERNELS.values():
            kern(Q, x, out, 2)
