"""Gaussian-representation distances between rotated boxes: the 2-Wasserstein
distance (GWD), Kullback-Leibler divergence (KLD), and the Kalman-fusion
overlap ratio (KFIoU), plus the standard log loss transform applied on top.
"""

from __future__ import annotations

import math
from enum import Enum

import numpy as np

from .errors import NonFiniteInput, NotPD
from .geometry import Gaussian2D, RotatedBox, rbox_to_gaussian

# Strict positive-definiteness guards for KLD/KFIoU (see kld docstring).
_PD_EIG_MIN = 1e-12
_PD_DET_MIN = 1e-24


class GaussianDistanceKind(Enum):
    GWD = "gwd"
    KLD_FORWARD = "kld"
    KLD_SYMMETRIC = "kld-sym"
    KFIOU = "kfiou"


def sqrtm_2x2(mat: np.ndarray) -> np.ndarray:
    """Principal square root of a symmetric PSD 2x2 matrix.

    Uses the closed form (M + sqrt(det M) I) / sqrt(tr M + 2 sqrt(det M)),
    falling back to an eigendecomposition when the denominator is below 1e-12.
    """
    m = np.asarray(mat, dtype=float)
    det = max(m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0], 0.0)
    tr = m[0, 0] + m[1, 1]
    root_det = math.sqrt(det)
    denom_sq = tr + 2 * root_det
    if denom_sq < 1e-12:
        vals, vecs = np.linalg.eigh(m)
        return (vecs * np.sqrt(np.maximum(vals, 0.0))) @ vecs.T
    return (m + root_det * np.eye(2)) / math.sqrt(denom_sq)


def _det2(m: np.ndarray) -> float:
    return float(m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0])


def _inv2(m: np.ndarray, det: float) -> np.ndarray:
    return np.array([[m[1, 1], -m[0, 1]], [-m[1, 0], m[0, 0]]]) / det


def _require_pd(sigma: np.ndarray, who: str) -> float:
    """Return det(sigma), raising NotPD when sigma is (near-)singular."""
    det = _det2(sigma)
    tr = sigma[0, 0] + sigma[1, 1]
    disc = max(tr * tr / 4 - det, 0.0)
    eig_min = tr / 2 - math.sqrt(disc)
    if det < _PD_DET_MIN or eig_min <= _PD_EIG_MIN:
        raise NotPD(f"{who} covariance is singular (det={det}, min eig={eig_min})")
    return det


def gwd(p: Gaussian2D, q: Gaussian2D) -> float:
    """2-Wasserstein distance between Gaussians.

    sqrt(||mu_p - mu_q||^2 + tr(S_p + S_q - 2 (S_p^1/2 S_q S_p^1/2)^1/2)).
    Symmetric, non-negative, and 0 iff p equals q.
    """
    dmu = p.mu - q.mu
    sp_half = sqrtm_2x2(p.sigma)
    cross = sp_half @ q.sigma @ sp_half
    cross = (cross + cross.T) / 2
    val = float(dmu @ dmu) + float(np.trace(p.sigma) + np.trace(q.sigma)) \
        - 2 * float(np.trace(sqrtm_2x2(cross)))
    return math.sqrt(max(val, 0.0))


def kld(p: Gaussian2D, q: Gaussian2D, symmetric: bool = False) -> float:
    """Kullback-Leibler divergence D(p || q) between Gaussians.

    0.5 * [tr(S_q^-1 S_p) + (mu_q - mu_p)^T S_q^-1 (mu_q - mu_p) - 2
    + ln(det S_q / det S_p)].  With ``symmetric`` the two directions are
    averaged.  Covariances must be strictly positive definite (eigenvalues
    above 1e-12 and determinant above 1e-24); degenerate boxes should be
    inflated by the caller rather than regularized here.

    Raises:
        NotPD: if either covariance is singular.
    """
    det_p = _require_pd(p.sigma, "p")
    det_q = _require_pd(q.sigma, "q")
    forward = _kld_one_way(p, q, det_p, det_q)
    if not symmetric:
        return forward
    return 0.5 * (forward + _kld_one_way(q, p, det_q, det_p))


def _kld_one_way(p: Gaussian2D, q: Gaussian2D, det_p: float, det_q: float) -> float:
    q_inv = _inv2(q.sigma, det_q)
    d = q.mu - p.mu
    term = float(np.trace(q_inv @ p.sigma)) + float(d @ q_inv @ d) - 2.0 \
        + math.log(det_q / det_p)
    return max(0.5 * term, 0.0)


def kfiou(a: RotatedBox, b: RotatedBox) -> float:
    """Kalman-fusion Gaussian overlap ratio in [0, 1/3].

    Both boxes are embedded as Gaussians; the fused covariance is
    S' = S_a (S_a + S_b)^-1 S_b and volumes are v(S) = 4 sqrt(det S) (= w*h
    for a box).  The overlap volume v3 = v(S') is attenuated by the Gaussian
    product's center factor exp(-0.5 d^T (S_a + S_b)^-1 d), and
    KFIoU = v3 / (v(S_a) + v(S_b) - v3).  Identical boxes attain the maximum
    1/3 exactly.  Note the center attenuation folds the fused Gaussian's
    position term into a single self-contained overlap measure; trainers that
    keep a separate center loss should drop it.

    Raises:
        NotPD: for boxes without positive area.
    """
    if a.area <= 0.0 or b.area <= 0.0:
        raise NotPD("kfiou requires boxes with positive area")
    ga, gb = rbox_to_gaussian(a), rbox_to_gaussian(b)
    total = ga.sigma + gb.sigma
    det_total = _require_pd(total, "fused")
    total_inv = _inv2(total, det_total)
    fused = ga.sigma @ total_inv @ gb.sigma
    d = ga.mu - gb.mu
    atten = math.exp(-0.5 * float(d @ total_inv @ d))
    v3 = 4 * math.sqrt(max(_det2(fused), 0.0)) * atten
    va = 4 * math.sqrt(max(_det2(ga.sigma), 0.0))
    vb = 4 * math.sqrt(max(_det2(gb.sigma), 0.0))
    return v3 / (va + vb - v3)


def loss_transform(d: float, tau: float = 1.0) -> float:
    """Map a non-negative distance to the loss 1 - 1/(tau + ln(1 + d)).

    Strictly increasing in d with range [1 - 1/tau, 1).
    """
    if not (math.isfinite(d) and math.isfinite(tau)):
        raise NonFiniteInput(f"d and tau must be finite, got d={d}, tau={tau}")
    if d < 0:
        raise ValueError(f"d must be non-negative, got {d}")
    if tau <= 0:
        raise ValueError(f"tau must be positive, got {tau}")
    return 1.0 - 1.0 / (tau + math.log1p(d))


def box_distance(a: RotatedBox, b: RotatedBox,
                 kind: GaussianDistanceKind | str) -> float:
    """Evaluate one of the Gaussian box measures on a pair of boxes."""
    kind = GaussianDistanceKind(kind) if not isinstance(kind, GaussianDistanceKind) else kind
    if kind is GaussianDistanceKind.KFIOU:
        return kfiou(a, b)
    ga, gb = rbox_to_gaussian(a), rbox_to_gaussian(b)
    if kind is GaussianDistanceKind.GWD:
        return gwd(ga, gb)
    return kld(ga, gb, symmetric=kind is GaussianDistanceKind.KLD_SYMMETRIC)
