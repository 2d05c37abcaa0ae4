"""Inference of the covariance-matrix invariants from click statistics.

Two routes are implemented.  ``invert_two_point`` solves the exact 2x2
linear system relating 4/P^2 to (trace, det) for two transmittance
settings; it is algebraically exact but, at low detection efficiency,
amplifies probability errors in the determinant by a factor 4/eta more
than in the trace (see ``sensitivity``).  ``ml_estimate`` uses every
setting through a binomial likelihood maximized by a staged brute-force
grid search over the physical region 1 <= det <= (trace/2)^2, and flags
the determinant as unreliable whenever the likelihood is flat along det.

The module also carries the reference estimators (classical gain ratios,
loss-corrected homodyne variances), the efficiency calibration from
click rates, and a polynomial-order diagnostic for multimode light.
"""

import math
from dataclasses import dataclass

import numpy as np

from .gaussian import (
    PHYS_TOL,
    QuadratureVariances,
    SqueezerParams,
    UnphysicalStateError,
    _bs_gram_excess,
    check_physicality,
    click_probability_from_invariants,
    cov_from_squeezer,
    gain_bounds_from_trace,
    no_click_from_invariants,
    variances_from_invariants,
)

_LOG2 = math.log(2.0)

# Two transmittances closer than this give a numerically meaningless inversion.
DEGENERATE_T_TOL = 1e-6

# Log-likelihood range along the determinant direction below which the
# determinant estimate carries no information.  Even perfectly
# uninformative data produce a max-min spread of order 1 nat from score
# fluctuations alone, while informative data sit orders of magnitude
# higher (tens of nats upward), so 3 nats splits the regimes cleanly.
FLATNESS_NATS = 3.0


class EstimationError(ValueError):
    """Data insufficient or degenerate for the requested estimate."""


@dataclass(frozen=True)
class Estimate:
    """Recovered invariants plus the physical quantities they determine."""

    trace: float
    det: float
    det_reliable: bool
    log_likelihood_at_max: float
    vmin: float
    vmax: float
    purity: float
    g_max_bound: float
    h_max_bound: float


@dataclass
class LikelihoodGrid:
    """Log-likelihood sampled on a rectangular (trace, det) grid.

    Cells outside the physical region are excluded and hold -inf.
    log_l has shape (len(trace_axis), len(det_axis)).
    """

    trace_axis: np.ndarray
    det_axis: np.ndarray
    log_l: np.ndarray
    excluded: np.ndarray


def invert_two_point(t1: float, p1: float, t2: float, p2: float) -> tuple[float, float]:
    """Exact inversion of two (effective transmittance, no-click probability) pairs.

    Returns the raw (trace, det) solving the linear system; no physicality
    clamping is applied, so noisy inputs may yield det < 1.  The t's must
    already include the detection efficiency.
    """
    for t in (t1, t2):
        if not 0.0 < t <= 1.0:
            raise ValueError(f"effective transmittance {t} outside (0, 1]")
    for p in (p1, p2):
        if not 0.0 < p <= 1.0:
            raise ValueError(f"no-click probability {p} outside (0, 1]")
    if abs(t1 - t2) < DEGENERATE_T_TOL:
        raise EstimationError(
            f"transmittances {t1} and {t2} too close to invert (|dt| < {DEGENERATE_T_TOL})"
        )
    trace = (
        2.0 / (t2 - t1) * (t2 / (t1 * p1 * p1) - t1 / (t2 * p2 * p2))
        + 2.0
        - 2.0 / t1
        - 2.0 / t2
    )
    det = 2.0 / (t1 - t2) * (
        (2.0 - t2) / (t1 * p1 * p1) - (2.0 - t1) / (t2 * p2 * p2)
    ) + (2.0 - t1) * (2.0 - t2) / (t1 * t2)
    return trace, det


def sensitivity(p1: float, eta: float) -> tuple[float, float]:
    """Derivatives of the inverted invariants with respect to one probability.

    d(trace)/dP1 = 4/(eta*P1^3) and d(det)/dP1 = -16/(eta^2*P1^3): the
    determinant is 4/eta times more sensitive than the trace to a small
    error on P1, which is what ruins det estimation at percent-level
    efficiencies.
    """
    if not 0.0 < p1 <= 1.0:
        raise ValueError(f"p1 = {p1} outside (0, 1]")
    if not 0.0 < eta <= 1.0:
        raise ValueError(f"eta = {eta} outside (0, 1]")
    p3 = p1 * p1 * p1
    return 4.0 / (eta * p3), -16.0 / (eta * eta * p3)


def _loglike_arrays(trace, det, eff_ts, trials, clicks):
    """Binomial log-likelihood summed over settings, broadcasting over (trace, det).

    Written against the cancellation-free form of the no-click
    probability so it stays accurate when clicks are parts-per-million.
    Callers must restrict inputs to the physical region.
    """
    total = np.zeros(np.broadcast(np.asarray(trace), np.asarray(det)).shape)
    for t, n, c in zip(eff_ts, trials, clicks):
        u = np.maximum(_bs_gram_excess(trace, det, t), 0.0)
        s = np.sqrt(4.0 + u)
        total = total + (n - c) * (_LOG2 - np.log(s))
        if c > 0:
            with np.errstate(divide="ignore"):
                log_q = np.log(u) - np.log(s) - np.log(s + 2.0)
            total = total + c * log_q
    return total


def log_likelihood(trace: float, det: float, data: list, eta_assumed: float) -> float:
    """Log-likelihood of the click records at the given invariants.

    Sum over settings of (trials - clicks)*ln(P) + clicks*ln(1 - P) with
    P the no-click probability at effective transmittance
    eta_assumed * t_nominal.  P = 1 with zero clicks contributes nothing;
    P = 1 with clicks present returns -inf.
    """
    if not data:
        raise EstimationError("no click records supplied")
    if not 0.0 < eta_assumed <= 1.0:
        raise ValueError(f"eta_assumed = {eta_assumed} outside (0, 1]")
    if not check_physicality(trace, det):
        raise UnphysicalStateError(f"(trace, det) = ({trace}, {det}) is unphysical")
    total = 0.0
    for record in data:
        eff_t = eta_assumed * record.t_nominal
        p = no_click_from_invariants(trace, det, eff_t)
        q = click_probability_from_invariants(trace, det, eff_t)
        if q == 0.0:
            if record.clicks > 0:
                return float("-inf")
            continue
        total += (record.trials - record.clicks) * math.log(p)
        if record.clicks > 0:
            total += record.clicks * math.log(q)
    return total


def likelihood_grid(data, eta_assumed, trace_axis, det_axis) -> LikelihoodGrid:
    """Evaluate the log-likelihood on a rectangular grid of invariants.

    Grid cells violating 1 <= det <= (trace/2)^2 are marked excluded and
    set to -inf.
    """
    trace_axis = np.asarray(trace_axis, dtype=float)
    det_axis = np.asarray(det_axis, dtype=float)
    eff = np.array([eta_assumed * r.t_nominal for r in data])
    ns = np.array([r.trials for r in data], dtype=float)
    cs = np.array([r.clicks for r in data], dtype=float)
    tr = trace_axis[:, None]
    dt = det_axis[None, :]
    excluded = (dt > 0.25 * tr * tr + PHYS_TOL) | (dt < 1.0 - PHYS_TOL)
    with np.errstate(invalid="ignore", divide="ignore"):
        log_l = _loglike_arrays(tr, dt, eff, ns, cs)
    log_l = np.where(excluded, -np.inf, log_l)
    return LikelihoodGrid(trace_axis, det_axis, log_l, excluded)


def _argmax_prefer_small_det(grid: LikelihoodGrid) -> tuple[int, int]:
    """Index of the grid maximum; exact ties resolved toward smaller det, then trace."""
    best = np.max(grid.log_l)
    ii, jj = np.nonzero(grid.log_l == best)
    order = np.lexsort((grid.trace_axis[ii], grid.det_axis[jj]))
    k = order[0]
    return int(ii[k]), int(jj[k])


def _det_slice_spread(data, eta_assumed, trace_hat, n_det=401):
    """Log-likelihood range along det at the optimal trace.

    Evaluated over the admissible interval [1, (trace_hat/2)^2]; a small
    spread means every allowed determinant explains the data about
    equally well, i.e. the maximizer along det is arbitrary.  Returns
    +inf when the interval is effectively a point (det pinned by the
    constraints themselves).
    """
    det_hi = 0.25 * trace_hat * trace_hat
    if det_hi - 1.0 < 1e-9:
        return float("inf")
    eff = np.array([eta_assumed * r.t_nominal for r in data])
    ns = np.array([r.trials for r in data], dtype=float)
    cs = np.array([r.clicks for r in data], dtype=float)
    det_axis = np.linspace(1.0, det_hi, n_det)
    ll = _loglike_arrays(np.full(n_det, trace_hat), det_axis, eff, ns, cs)
    return float(ll.max() - ll.min())


def _finish_estimate(trace, det, det_reliable, log_l) -> Estimate:
    qv = variances_from_invariants(trace, det)
    g_max, h_max = gain_bounds_from_trace(max(trace, 2.0))
    return Estimate(
        trace=trace,
        det=det,
        det_reliable=det_reliable,
        log_likelihood_at_max=log_l,
        vmin=qv.vmin,
        vmax=qv.vmax,
        purity=1.0 / math.sqrt(det),
        g_max_bound=g_max,
        h_max_bound=h_max,
    )


def ml_estimate(
    data: list,
    eta_assumed: float,
    *,
    resolution: float = 1e-4,
    coarse_points: int = 200,
    flatness_nats: float = FLATNESS_NATS,
) -> Estimate:
    """Constrained maximum-likelihood estimate of (trace, det).

    Brute-force search: a coarse grid over trace in [2, trace_hi] and det
    in [1, (trace/2)^2], where trace_hi brackets the data-driven trace
    scale with a 10x overshoot, followed by re-centered grids 10x finer
    per stage until both axis steps are <= ``resolution``.  Exact
    log-likelihood ties prefer the smaller det (the more conservative,
    closer-to-pure claim).

    det_reliable is False when, at the optimal trace, the log-likelihood
    varies by less than ``flatness_nats`` across the whole admissible det
    interval, i.e. when the maximizer along det is essentially arbitrary.
    """
    if not data:
        raise EstimationError("no click records supplied")
    if not 0.0 < eta_assumed <= 1.0:
        raise ValueError(f"eta_assumed = {eta_assumed} outside (0, 1]")
    if len({r.t_nominal for r in data}) < 2:
        raise EstimationError("need at least two distinct transmittances")
    eff = np.array([eta_assumed * r.t_nominal for r in data])
    ns = np.array([r.trials for r in data], dtype=float)
    cs = np.array([r.clicks for r in data], dtype=float)
    if cs.sum() == 0:
        # Zero clicks anywhere: the data are certain only for the vacuum.
        return _finish_estimate(2.0, 1.0, True, 0.0)

    # Data-driven trace bracket: (4/p^2 - 4)/(2*eff_t) estimates trace - 2
    # to leading order in eff_t; overshoot by 10x.
    pos = eff > 0.0
    p_hat = np.maximum((ns - cs) / ns, 0.5 / ns)
    span = (4.0 / (p_hat[pos] * p_hat[pos]) - 4.0) / (2.0 * eff[pos])
    trace_hi = 2.0 + max(10.0 * float(span.max()), 1e-3)

    trace_axis = np.linspace(2.0, trace_hi, coarse_points)
    det_axis = np.linspace(1.0, max(0.25 * trace_hi * trace_hi, 1.0 + 1e-9), coarse_points)
    grid = likelihood_grid(data, eta_assumed, trace_axis, det_axis)
    i, j = _argmax_prefer_small_det(grid)
    trace_hat = float(grid.trace_axis[i])
    det_hat = float(grid.det_axis[j])
    log_l_max = float(grid.log_l[i, j])
    step_t = trace_axis[1] - trace_axis[0]
    step_d = det_axis[1] - det_axis[0]

    offsets = np.arange(-20, 21, dtype=float)
    for _ in range(12):
        if step_t <= resolution and step_d <= resolution:
            break
        if step_t > resolution:
            step_t /= 10.0
        if step_d > resolution:
            step_d /= 10.0
        trace_axis = np.unique(np.maximum(trace_hat + offsets * step_t, 2.0))
        det_axis = np.unique(np.maximum(det_hat + offsets * step_d, 1.0))
        grid = likelihood_grid(data, eta_assumed, trace_axis, det_axis)
        i, j = _argmax_prefer_small_det(grid)
        trace_hat = float(grid.trace_axis[i])
        det_hat = float(grid.det_axis[j])
        log_l_max = float(grid.log_l[i, j])

    spread = _det_slice_spread(data, eta_assumed, trace_hat)
    det_reliable = spread >= flatness_nats
    return _finish_estimate(trace_hat, det_hat, det_reliable, log_l_max)


def classical_estimate(gain_min: float, gain_max: float) -> SqueezerParams:
    """Amplifier gains from classical probe (de)amplification measurements.

    g = sqrt(gain_max/gain_min), h = sqrt(gain_max*gain_min).
    """
    if gain_min <= 0.0 or gain_max <= 0.0:
        raise ValueError(f"classical gains must be positive, got ({gain_min}, {gain_max})")
    return SqueezerParams(
        g=math.sqrt(gain_max / gain_min), h=math.sqrt(gain_max * gain_min)
    )


def homodyne_correct(v_hom_min: float, v_hom_max: float, eta_hom: float) -> QuadratureVariances:
    """Undo homodyne detection losses: V = (V_hom - 1 + eta_hom)/eta_hom.

    Vacuum (V_hom = 1) is a fixed point for any efficiency.
    """
    if not 0.0 < eta_hom <= 1.0:
        raise ValueError(f"eta_hom = {eta_hom} outside (0, 1]")
    vmin = (v_hom_min - 1.0 + eta_hom) / eta_hom
    vmax = (v_hom_max - 1.0 + eta_hom) / eta_hom
    if vmin <= 0.0 or vmin * vmax < 1.0 - PHYS_TOL:
        raise UnphysicalStateError(
            f"loss correction gave unphysical variances ({vmin}, {vmax})"
        )
    return QuadratureVariances(vmin=vmin, vmax=vmax)


def estimate_eta(click_rates: list, rep_rate: float) -> float:
    """Overall detection efficiency from click rates at full transmittance.

    Least-squares fit of the single scale factor eta in
    rate = eta * rep_rate * ((h-1/2)(g+1/g) - 1)/2 across calibration
    points (rate, SqueezerParams).  Result clamped to (0, 1].
    """
    if not click_rates:
        raise EstimationError("no calibration points supplied")
    preds = np.array(
        [
            0.5 * rep_rate * ((p.h - 0.5) * (p.g + 1.0 / p.g) - 1.0)
            for _, p in click_rates
        ]
    )
    rates = np.array([r for r, _ in click_rates], dtype=float)
    if np.max(preds) <= 0.0:
        raise EstimationError("all calibration points are at vacuum gain; eta undetermined")
    eta = float(np.dot(rates, preds) / np.dot(preds, preds))
    return min(max(eta, 1e-12), 1.0)


def _mode_fit_table(samples, max_modes):
    """Weighted polynomial fits of 4/p^2 - 4 for each candidate mode count.

    Returns (z_scale, rows) with one row per candidate:
    (n_modes, degree, rss, chi2_per_dof).  samples are (eff_t, p) or
    (eff_t, p, sigma_p) tuples; when sigma_p is present the chi^2 uses
    the propagated error 8*sigma_p/p^3, otherwise the noise scale is
    taken from the highest-degree fit (with a floor so exact data pass).
    """
    if max_modes < 1:
        raise ValueError("max_modes must be >= 1")
    n = len(samples)
    if n < 2 * max_modes + 1:
        raise EstimationError(
            f"{n} samples cannot constrain {max_modes} modes (need {2 * max_modes + 1})"
        )
    t = np.array([s[0] for s in samples], dtype=float)
    p = np.array([s[1] for s in samples], dtype=float)
    if np.unique(t).size != n:
        raise EstimationError("effective transmittances must be distinct")
    if np.any(p <= 0.0) or np.any(p > 1.0):
        raise ValueError("no-click probabilities must lie in (0, 1]")
    has_sigma = all(len(s) >= 3 for s in samples)
    z = 4.0 / (p * p) - 4.0
    scale = float(np.max(np.abs(z)))
    if scale < 1e-12:
        return scale, []

    powers = t[:, None] ** np.arange(1, 2 * max_modes + 1)[None, :]
    if has_sigma:
        sigma_z = 8.0 * np.array([s[2] for s in samples], dtype=float) / p**3
        if np.any(sigma_z <= 0.0):
            raise ValueError("sigma_p values must be positive")
        noise_var = None
    else:
        sigma_z = None
        coef, *_ = np.linalg.lstsq(powers, z, rcond=None)
        rss_sat = float(np.sum((z - powers @ coef) ** 2))
        noise_var = max(rss_sat / (n - 2 * max_modes), (1e-10 * scale) ** 2)

    rows = []
    for m in range(1, max_modes + 1):
        cols = powers[:, : 2 * m]
        if has_sigma:
            coef, *_ = np.linalg.lstsq(cols / sigma_z[:, None], z / sigma_z, rcond=None)
            resid = (z - cols @ coef) / sigma_z
            rss = float(np.sum((z - cols @ coef) ** 2))
            chi2 = float(np.sum(resid * resid))
        else:
            coef, *_ = np.linalg.lstsq(cols, z, rcond=None)
            rss = float(np.sum((z - cols @ coef) ** 2))
            chi2 = rss / noise_var
        dof = n - 2 * m
        rows.append((m, 2 * m, rss, chi2 / dof))
    return scale, rows


def mode_count_fit(samples: list, max_modes: int) -> int:
    """Smallest number of Gaussian modes consistent with P(eff_t) samples.

    For N modes, 1/P^2 is a polynomial of degree 2N in the effective
    transmittance with value 1 at zero; the fit therefore models
    4/p^2 - 4 without a constant term and returns the smallest N whose
    chi^2 per degree of freedom is below 2.  Identically-vacuum samples
    (p = 1 everywhere) return 0: no signal to fit.
    """
    scale, rows = _mode_fit_table(samples, max_modes)
    if not rows:
        return 0
    for m, _deg, _rss, chi2_dof in rows:
        if chi2_dof < 2.0:
            return m
    raise EstimationError(
        f"no mode count up to {max_modes} fits the samples (min chi2/dof = "
        f"{min(r[3] for r in rows):.3g})"
    )


def trace_det_from_squeezer(params: SqueezerParams) -> tuple[float, float]:
    """Invariants of the state generated by the given amplifier gains."""
    cov = cov_from_squeezer(params)
    return cov.trace, cov.det
