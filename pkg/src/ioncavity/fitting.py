"""Deterministic least-squares fits: Lorentzian lines, local minima, loss growth.

The Levenberg-Marquardt core uses a fixed damping schedule (lambda0 = 1e-3,
times 10 on reject, divide by 10 on accept) and automatic initial guesses, so
identical inputs always produce identical results.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

LAMBDA0 = 1e-3
LAMBDA_MAX = 1e12
LAMBDA_MIN = 1e-12
# Converged results always satisfy ||grad|| <= GRADIENT_RTOL (1 + ||p||).
# The tight threshold ends noiseless fits; stagnating noisy fits stop once
# SSR improvement falls below FTOL while the gradient bound already holds.
GRADIENT_RTOL = 1e-8
GRADIENT_RTOL_TIGHT = 1e-13
FTOL = 1e-12
MAX_ITERATIONS = 200


@dataclass(frozen=True)
class FitResult:
    params: dict[str, float]
    stderr: dict[str, float]
    residual_norm: float
    converged: bool
    iterations: int
    message: str = ""
    ssr_trace: tuple[float, ...] = field(default=(), repr=False)

    def __getitem__(self, name: str) -> float:
        return self.params[name]


def _numeric_jacobian(residual_fn, p: np.ndarray) -> np.ndarray:
    r0 = residual_fn(p)
    jac = np.empty((r0.size, p.size))
    for k in range(p.size):
        h = 1e-6 * (1.0 + abs(p[k]))
        pp = p.copy()
        pm = p.copy()
        pp[k] += h
        pm[k] -= h
        jac[:, k] = (residual_fn(pp) - residual_fn(pm)) / (2.0 * h)
    return jac


def levenberg_marquardt(
    residual_fn,
    p0,
    names: tuple[str, ...],
    max_iterations: int = MAX_ITERATIONS,
) -> FitResult:
    """Minimize sum residual_fn(p)^2 by damped Gauss-Newton iterations.

    Residuals are normalized internally to unit initial norm (the minimizer
    and the reported errors are invariant under that), so converged results
    satisfy the scale-free bound ||grad|| <= 1e-8 (1 + ||p||). Exhausting the
    iteration budget or the damping range returns converged=False with a
    diagnostic message.
    """
    p = np.asarray(p0, dtype=float).copy()
    raw = residual_fn
    r0_norm = float(np.linalg.norm(raw(p)))
    scale = r0_norm if r0_norm > 0 else 1.0

    def residual_fn(q):                # shadows the raw callable on purpose
        return raw(q) / scale

    lam = LAMBDA0
    r = residual_fn(p)
    ssr = float(r @ r)
    trace = [ssr]
    message = ""
    converged = False
    iterations = 0
    jac = _numeric_jacobian(residual_fn, p)

    def gradient_small(grad, factor):
        return np.linalg.norm(grad) <= factor * (1.0 + np.linalg.norm(p))

    while iterations < max_iterations:
        iterations += 1
        grad = jac.T @ r
        if gradient_small(grad, GRADIENT_RTOL_TIGHT):
            converged = True
            break
        jtj = jac.T @ jac
        damped = jtj + lam * np.diag(np.clip(np.diag(jtj), 1e-30, None))
        try:
            step = np.linalg.solve(damped, -grad)
        except np.linalg.LinAlgError:
            message = "normal equations singular (degenerate data)"
            break
        p_try = p + step
        r_try = residual_fn(p_try)
        ssr_try = float(r_try @ r_try)
        if ssr_try < ssr:
            improvement = (ssr - ssr_try) / max(ssr, 1e-300)
            p, r, ssr = p_try, r_try, ssr_try
            trace.append(ssr)
            lam = max(lam / 10.0, LAMBDA_MIN)
            jac = _numeric_jacobian(residual_fn, p)
            if improvement < FTOL and gradient_small(jac.T @ r, GRADIENT_RTOL):
                converged = True
                break
        else:
            lam *= 10.0
            if lam > LAMBDA_MAX:
                if gradient_small(grad, GRADIENT_RTOL):
                    converged = True    # stationary: no improving step exists
                else:
                    message = "damping limit reached without improvement"
                break
    else:
        message = "iteration budget exhausted"

    stderr = _standard_errors(jac, ssr, r.size, p.size)  # scale-invariant
    return FitResult(
        params=dict(zip(names, (float(v) for v in p))),
        stderr=dict(zip(names, stderr)),
        residual_norm=ssr * scale ** 2,
        converged=converged,
        iterations=iterations,
        message=message,
        ssr_trace=tuple(s * scale ** 2 for s in trace),
    )


def _standard_errors(jac: np.ndarray, ssr: float, n: int, n_params: int) -> list[float]:
    dof = max(n - n_params, 1)
    variance = ssr / dof
    try:
        cov = np.linalg.inv(jac.T @ jac) * variance
        diag = np.diag(cov)
        return [math.sqrt(d) if d >= 0 else math.inf for d in diag]
    except np.linalg.LinAlgError:
        return [math.inf] * n_params


def _as_xy(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.ndim != 1 or x.shape != y.shape:
        raise ValueError("x and y must be matching 1-d arrays")
    return x, y


def lorentzian(x, amplitude, center, width, offset):
    """amplitude * (w/2)^2 / ((x - center)^2 + (w/2)^2) + offset."""
    half = width / 2.0
    return amplitude * half * half / ((x - center) ** 2 + half * half) + offset


def _halfmax_width(x, y, peak_index, offset, amplitude):
    level = offset + amplitude / 2.0
    above = (y - level) * np.sign(amplitude) > 0
    left = peak_index
    while left > 0 and above[left - 1]:
        left -= 1
    right = peak_index
    while right < y.size - 1 and above[right + 1]:
        right += 1

    def crossing(i_in, i_out):
        x0, x1 = x[i_in], x[i_out]
        y0, y1 = y[i_in], y[i_out]
        if y1 == y0:
            return x0
        return x0 + (level - y0) * (x1 - x0) / (y1 - y0)

    if left == 0 or right == y.size - 1:
        return (x[-1] - x[0]) / 4.0
    return abs(crossing(right, right + 1) - crossing(left, left - 1))


def fit_lorentzian(x, y, weights=None) -> FitResult:
    """Fit a Lorentzian with automatic initial guesses.

    The peak orientation, center (arg extremum), width (half-maximum
    crossings) and offset are inferred from the data; weights multiply the
    residuals (1/sigma convention).
    """
    x, y = _as_xy(x, y)
    if x.size < 5:
        raise ValueError("need at least 5 points for a Lorentzian fit")
    if np.ptp(y) == 0.0:
        return FitResult(
            params={"amplitude": 0.0, "center": float(x[x.size // 2]),
                    "width": float(np.ptp(x)) / 4.0, "offset": float(y[0])},
            stderr={k: math.inf for k in ("amplitude", "center", "width", "offset")},
            residual_norm=0.0,
            converged=False,
            iterations=0,
            message="degenerate data: y is constant",
        )
    w = None
    if weights is not None:
        w = np.asarray(weights, dtype=float)
        if w.shape != y.shape:
            raise ValueError("weights must match y")

    median = float(np.median(y))
    peak_up = (y.max() - median) >= (median - y.min())
    if peak_up:
        offset0 = float(y.min())
        peak_index = int(np.argmax(y))
    else:
        offset0 = float(y.max())
        peak_index = int(np.argmin(y))
    amplitude0 = float(y[peak_index] - offset0)
    center0 = float(x[peak_index])
    width0 = float(_halfmax_width(x, y, peak_index, offset0, amplitude0))
    if width0 <= 0:
        width0 = float(np.ptp(x)) / 4.0

    def residuals(p):
        r = lorentzian(x, *p) - y
        return r * w if w is not None else r

    result = levenberg_marquardt(
        residuals, (amplitude0, center0, width0, offset0),
        names=("amplitude", "center", "width", "offset"),
    )
    if result.params["width"] < 0:      # width enters squared; report magnitude
        fixed = dict(result.params, width=-result.params["width"])
        result = FitResult(fixed, result.stderr, result.residual_norm,
                           result.converged, result.iterations,
                           result.message, result.ssr_trace)
    return result


def fit_poly_minimum(x, y, degree: int = 4, window: int | None = None):
    """Locate a local minimum by a polynomial fit around the discrete minimum.

    Returns (x_min, value, FitResult). The fit window spans `window` points
    on each side of the discrete minimum (default: enough points for the
    degree, at least 15% of the data). x_min is the derivative root nearest
    the discrete minimum that lies inside the window and has positive
    curvature.
    """
    x, y = _as_xy(x, y)
    if not 2 <= degree <= 6:
        raise ValueError("degree must be in [2, 6]")
    if x.size < degree + 2:
        raise ValueError(f"need at least {degree + 2} points for degree {degree}")
    k = int(np.argmin(y))
    if k == 0 or k == x.size - 1:
        raise ValueError("no interior minimum in window (data minimum at the edge)")
    if window is None:
        window = max(degree + 2, int(round(0.15 * x.size)))
    lo = max(k - window, 0)
    hi = min(k + window + 1, x.size)
    xw, yw = x[lo:hi], y[lo:hi]
    if xw.size < degree + 2:
        raise ValueError("window too small for the requested degree")

    poly = np.polynomial.Polynomial.fit(xw, yw, degree)
    derivative = poly.deriv()
    roots = derivative.roots()
    real = roots[np.abs(roots.imag) <= 1e-9 * (1.0 + np.abs(roots.real))].real
    inside = real[(real >= xw[0]) & (real <= xw[-1])]
    curving_up = [r for r in inside if poly.deriv(2)(r) > 0]
    if not curving_up:
        raise ValueError("no interior minimum in window")
    x_min = float(min(curving_up, key=lambda r: abs(r - x[k])))
    value = float(poly(x_min))

    fitted = poly(xw)
    ssr = float(np.sum((fitted - yw) ** 2))
    coeffs = poly.convert().coef
    params = {f"c{i}": float(c) for i, c in enumerate(coeffs)}
    result = FitResult(
        params=params,
        stderr={},
        residual_norm=ssr,
        converged=True,
        iterations=1,
        message=f"window [{lo}, {hi}) around index {k}",
    )
    return x_min, value, result


def saturating_exponential(t, loss0, rise, tau):
    return loss0 + rise * (1.0 - np.exp(-t / tau))


def fit_exponential_loss(t, loss) -> FitResult:
    """Fit loss(t) = loss0 + rise (1 - exp(-t/tau)); t in days, t >= 0.

    A vanishing rise leaves tau unidentifiable; that case converges but is
    flagged through the message field.
    """
    t, loss = _as_xy(t, loss)
    if t.size < 4:
        raise ValueError("need at least 4 points for the loss fit")
    if np.any(t < 0):
        raise ValueError("times must be nonnegative")
    order = np.argsort(t)
    t, loss = t[order], loss[order]

    span = float(t[-1] - t[0])
    if span <= 0:
        raise ValueError("times must span a nonzero interval")
    loss0_0 = float(loss[0])
    rise0 = 2.0 * float(loss[-1] - loss[0])
    if rise0 == 0.0:
        rise0 = float(np.ptp(loss))
    tau0 = span / 2.0

    def residuals(p):
        loss0, rise, tau = p
        tau = max(tau, 1e-9 * span)     # keep the model defined during stepping
        return saturating_exponential(t, loss0, rise, tau) - loss

    result = levenberg_marquardt(
        residuals, (loss0_0, rise0, tau0), names=("loss0", "rise", "tau")
    )
    scale = abs(result.params["loss0"]) + abs(result.params["rise"])
    if abs(result.params["rise"]) <= 1e-9 * (1.0 + scale):
        result = FitResult(
            result.params,
            dict(result.stderr, tau=math.inf),
            result.residual_norm,
            result.converged,
            result.iterations,
            "tau unidentifiable (rise ~ 0)",
            result.ssr_trace,
        )
    return result
