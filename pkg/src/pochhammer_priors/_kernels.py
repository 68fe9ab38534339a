"""Compiled inner loops for the random-walk samplers."""

from __future__ import annotations

import math

import numpy as np
from numba import njit


@njit(cache=True)
def lrise(x, n):
    """log of the rising factorial [x]^n for x > 0."""
    if n == 0:
        return 0.0
    if x > 1e7 and n < 32:
        s = 0.0
        for j in range(n):
            s += math.log(x + j)
        return s
    return math.lgamma(x + n) - math.lgamma(x)


@njit(cache=True)
def prior_log(alpha, m, a, b, c, d):
    """Unnormalized PH/PPH log-density at alpha > 0."""
    v = -lrise(c * alpha + a, b)
    if m > 0:
        v += lrise(alpha, m)
    if d > 0:
        v += d * math.log(alpha)
    return v


@njit(cache=True)
def total_term(A, uniq_n, mult_n):
    s = 0.0
    for u in range(uniq_n.shape[0]):
        s += mult_n[u] * lrise(A, uniq_n[u])
    return s


@njit(cache=True)
def data_term(alpha, indptr, values, k):
    s = 0.0
    for idx in range(indptr[k], indptr[k + 1]):
        s += lrise(alpha, values[idx])
    return s


@njit(cache=True)
def mwg_sweeps(
    alpha, log_alpha, data_ll, prior_ll,
    indptr, values, uniq_n, mult_n,
    m, a, b, c, d,
    sigma, normals, log_u, store_rows, out, accepted, counting,
):
    """Run ``normals.shape[0]`` Metropolis-within-Gibbs sweeps in place.

    Each sweep visits every coordinate once with a log-normal random-walk
    proposal. The target in log-space includes the Jacobian ``log alpha``.
    Rows with ``store_rows[t] >= 0`` are copied into ``out``.
    """
    K = alpha.shape[0]
    A = 0.0
    for k in range(K):
        A += alpha[k]
    LA = total_term(A, uniq_n, mult_n)
    for t in range(normals.shape[0]):
        for k in range(K):
            th = log_alpha[k]
            thp = th + sigma[k] * normals[t, k]
            ap = math.exp(thp)
            if ap <= 0.0 or not math.isfinite(ap):
                continue
            Ap = A - alpha[k] + ap
            if Ap <= 0.0:
                continue
            dn = data_term(ap, indptr, values, k)
            pn = prior_log(ap, m, a, b, c, d)
            LAp = total_term(Ap, uniq_n, mult_n)
            lar = (dn - data_ll[k]) + (pn - prior_ll[k]) - (LAp - LA) + (thp - th)
            if log_u[t, k] < lar:
                alpha[k] = ap
                log_alpha[k] = thp
                data_ll[k] = dn
                prior_ll[k] = pn
                A = Ap
                LA = LAp
                if counting:
                    accepted[k] += 1
        # refresh the running total to stop rounding drift
        A = 0.0
        for k in range(K):
            A += alpha[k]
        LA = total_term(A, uniq_n, mult_n)
        row = store_rows[t]
        if row >= 0:
            for k in range(K):
                out[row, k] = alpha[k]


@njit(cache=True)
def homog_target(alpha, K, cnt_vals, cnt_mult, uniq_n, mult_n, m, a, b, c, d):
    s = 0.0
    for v in range(cnt_vals.shape[0]):
        s += cnt_mult[v] * lrise(alpha, cnt_vals[v])
    s -= total_term(K * alpha, uniq_n, mult_n)
    return s + prior_log(alpha, m, a, b, c, d) + math.log(alpha)


@njit(cache=True)
def homog_steps(
    state, K, cnt_vals, cnt_mult, uniq_n, mult_n,
    m, a, b, c, d, sigma, normals, log_u, store_rows, out, accepted, counting,
):
    """Scalar random-walk MH on log alpha for a shared concentration."""
    alpha = state[0]
    cur = homog_target(alpha, K, cnt_vals, cnt_mult, uniq_n, mult_n, m, a, b, c, d)
    for t in range(normals.shape[0]):
        thp = math.log(alpha) + sigma * normals[t]
        ap = math.exp(thp)
        if ap > 0.0 and math.isfinite(ap):
            new = homog_target(ap, K, cnt_vals, cnt_mult, uniq_n, mult_n, m, a, b, c, d)
            if log_u[t] < new - cur:
                alpha = ap
                cur = new
                if counting:
                    accepted[0] += 1
        row = store_rows[t]
        if row >= 0:
            out[row] = alpha
    state[0] = alpha
