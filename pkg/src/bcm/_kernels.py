"""Compiled inner loops for the collapsed Gibbs sweep.

All kernels work on flat int64/float64/uint8 arrays and consume
pre-generated uniform variates, so a sweep is a pure function of
(state, counts, uniforms). The pure-Python reference sweep in
``bcm.gibbs`` mirrors the arithmetic here expression for expression;
the two are required to produce bit-identical trajectories, which the
test suite checks. Keep them in sync.
"""

import math

import numpy as np
from numba import njit


@njit(cache=True)
def lgamma(x):
    """Scalar log-gamma with the exact libm semantics the kernels use."""
    return math.lgamma(x)


@njit(cache=True)
def _pick(weights, n, u):
    """Sample an index proportional to nonnegative weights.

    Uses the threshold u * total against a running prefix sum; falls back
    to the last positive weight if rounding pushes the threshold past it.
    """
    total = 0.0
    for k in range(n):
        total += weights[k]
    t = u * total
    acc = 0.0
    last = 0
    for k in range(n):
        if weights[k] > 0.0:
            last = k
        acc += weights[k]
        if t < acc:
            return k
    return last


@njit(cache=True)
def sweep_assignments(codes, vocab_sizes, match, mcount, cand,
                      z, p, omega, njv, nj, ni,
                      alpha_per, lam, c, u_z, wbuf):
    """Resample every cell assignment once, row-major, counts maintained."""
    n_obs, n_feat = codes.shape
    n_clu = omega.shape[0]
    for i in range(n_obs):
        for j in range(n_feat):
            v = codes[i, j]
            s0 = z[i, j]
            njv[s0, j, v] -= 1
            nj[s0, j] -= 1
            ni[s0, i] -= 1
            vj = vocab_sizes[j]
            for s in range(n_clu):
                pv = cand[p[s], j]
                if omega[s, j] == 1:
                    gx = lam * (1.0 + c * match[j, pv, v])
                    gs = lam * (vj + c * mcount[j, pv])
                else:
                    gx = lam
                    gs = lam * vj
                wbuf[s] = (alpha_per + ni[s, i]) * ((gx + njv[s, j, v]) / (gs + nj[s, j]))
            s1 = _pick(wbuf, n_clu, u_z[i, j])
            z[i, j] = s1
            njv[s1, j, v] += 1
            nj[s1, j] += 1
            ni[s1, i] += 1


@njit(cache=True)
def subspace_one_probability(vj, total, njv_row, match_row, mc, lam, c, q):
    """Posterior probability that one cluster-feature indicator is on.

    Compares the boosted against the flat pseudo-count vector through
    their Beta-function ratios; with no assigned data the ratios cancel
    and the prior rate is returned exactly.
    """
    if total == 0:
        return q
    if q >= 1.0:
        return 1.0
    if q <= 0.0:
        return 0.0
    d = 0.0
    for v in range(vj):
        nv = njv_row[v]
        g1 = lam * (1.0 + c * match_row[v])
        d += math.lgamma(g1 + nv) - math.lgamma(g1)
        d -= math.lgamma(lam + nv) - math.lgamma(lam)
    gs1 = lam * (vj + c * mc)
    gs0 = lam * vj
    d -= math.lgamma(gs1 + total) - math.lgamma(gs1)
    d += math.lgamma(gs0 + total) - math.lgamma(gs0)
    logit = math.log(q) - math.log(1.0 - q) + d
    # branch-stable logistic; large counts push the logit far out
    if logit >= 0.0:
        return 1.0 / (1.0 + math.exp(-logit))
    e = math.exp(logit)
    return e / (1.0 + e)


@njit(cache=True)
def sweep_subspaces(vocab_sizes, match, mcount, cand,
                    p, omega, njv, nj, lam, c, q, u_w):
    n_clu, n_feat = omega.shape
    for s in range(n_clu):
        for j in range(n_feat):
            pv = cand[p[s], j]
            p1 = subspace_one_probability(
                vocab_sizes[j], nj[s, j], njv[s, j], match[j, pv], mcount[j, pv], lam, c, q
            )
            omega[s, j] = 1 if u_w[s, j] < p1 else 0


@njit(cache=True)
def prototype_log_scores(s, vocab_sizes, match, mcount, cand,
                         omega, njv, nj, lam, c, scores, vbuf):
    """Collapsed log-likelihood of cluster s's data per prototype candidate.

    Features outside the subspace contribute the same factor to every
    candidate and are skipped. Scores are grouped by the candidate's
    outcome, so the cost is V_j^2 log-gammas plus one table lookup per
    candidate and feature.
    """
    n_cand = cand.shape[0]
    n_feat = vocab_sizes.shape[0]
    for i in range(n_cand):
        scores[i] = 0.0
    for j in range(n_feat):
        if omega[s, j] == 0:
            continue
        vj = vocab_sizes[j]
        total = nj[s, j]
        for u in range(vj):
            acc = 0.0
            for v in range(vj):
                gv = lam * (1.0 + c * match[j, u, v])
                acc += math.lgamma(gv + njv[s, j, v]) - math.lgamma(gv)
            gsum = lam * (vj + c * mcount[j, u])
            acc -= math.lgamma(gsum + total) - math.lgamma(gsum)
            vbuf[u] = acc
        for i in range(n_cand):
            scores[i] += vbuf[cand[i, j]]


@njit(cache=True)
def sweep_prototypes(vocab_sizes, match, mcount, cand,
                     p, omega, njv, nj, lam, c,
                     sample_flag, u_p, scores, vbuf):
    n_clu = omega.shape[0]
    n_cand = cand.shape[0]
    for s in range(n_clu):
        prototype_log_scores(s, vocab_sizes, match, mcount, cand,
                             omega, njv, nj, lam, c, scores, vbuf)
        if sample_flag:
            m = scores[0]
            for i in range(1, n_cand):
                if scores[i] > m:
                    m = scores[i]
            for i in range(n_cand):
                scores[i] = math.exp(scores[i] - m)
            p[s] = _pick(scores, n_cand, u_p[s])
        else:
            best = 0
            for i in range(1, n_cand):
                if scores[i] > scores[best]:
                    best = i
            p[s] = best


@njit(cache=True)
def gibbs_sweep(codes, vocab_sizes, match, mcount, cand,
                z, p, omega, njv, nj, ni,
                alpha_per, lam, c, q,
                sample_prototypes, u_z, u_w, u_p,
                wbuf, scores, vbuf):
    """One full scan: all assignments, then all subspace bits, then prototypes."""
    sweep_assignments(codes, vocab_sizes, match, mcount, cand,
                      z, p, omega, njv, nj, ni, alpha_per, lam, c, u_z, wbuf)
    sweep_subspaces(vocab_sizes, match, mcount, cand,
                    p, omega, njv, nj, lam, c, q, u_w)
    sweep_prototypes(vocab_sizes, match, mcount, cand,
                     p, omega, njv, nj, lam, c,
                     sample_prototypes, u_p, scores, vbuf)
