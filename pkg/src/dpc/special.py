"""Special functions for the Dirichlet losses.

Log-gamma uses the Lanczos approximation (g=7, 9 coefficients) with the
reflection formula below 0.5. Digamma and trigamma shift the argument up to
``x >= 6`` with the recurrence and finish with an asymptotic series.

Every function accepts scalars or arrays and returns the same kind.
"""

import numpy as np

_LANCZOS_G = 7.0
_LANCZOS_COEF = np.array([
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
])
_HALF_LOG_2PI = 0.5 * np.log(2.0 * np.pi)
_EULER_GAMMA = 0.5772156649015329
# zeta(k), k = 2..30: ln Gamma(1+z) = -euler*z + sum (-1)^k zeta(k) z^k / k
_ZETA = np.array([
    1.6449340668482264,
    1.2020569031595942,
    1.0823232337111381,
    1.03692775514337,
    1.0173430619844492,
    1.008349277381923,
    1.0040773561979444,
    1.0020083928260821,
    1.000994575127818,
    1.0004941886041194,
    1.000246086553308,
    1.0001227133475785,
    1.0000612481350588,
    1.000030588236307,
    1.0000152822594086,
    1.0000076371976379,
    1.000003817293265,
    1.0000019082127165,
    1.0000009539620338,
    1.0000004769329869,
    1.0000002384505027,
    1.000000119219926,
    1.000000059608189,
    1.0000000298035034,
    1.0000000149015549,
    1.0000000074507118,
    1.000000003725334,
    1.0000000018626598,
    1.0000000009313275,
])
_TAYLOR_RADIUS = 0.25

# B_2k / (2k) for k = 1..8, coefficients of x^{-2k} in the digamma series.
_DIGAMMA_SERIES = np.array([
    1.0 / 12.0,
    -1.0 / 120.0,
    1.0 / 252.0,
    -1.0 / 240.0,
    1.0 / 132.0,
    -691.0 / 32760.0,
    1.0 / 12.0,
    -3617.0 / 8160.0,
])
# B_2k for k = 1..8, coefficients of x^{-(2k+1)} in the trigamma series.
_TRIGAMMA_SERIES = np.array([
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
    -3617.0 / 510.0,
])
_SHIFT_TO = 6.0


def _positive(x, name):
    arr = np.asarray(x, dtype=np.float64)
    if np.any(np.isnan(arr)) or np.any(arr <= 0):
        raise ValueError(f"{name} is only defined for x > 0")
    return arr


def _wrap(arr, like):
    return float(arr) if np.ndim(like) == 0 else arr


def _lanczos_log_gamma(x):
    # valid for x >= 0.5
    z = x - 1.0
    acc = np.full_like(z, _LANCZOS_COEF[0])
    for i in range(1, len(_LANCZOS_COEF)):
        acc = acc + _LANCZOS_COEF[i] / (z + i)
    t = z + _LANCZOS_G + 0.5
    return _HALF_LOG_2PI + (z + 0.5) * np.log(t) - t + np.log(acc)


def _log_gamma_1p(z):
    # ln Gamma(1 + z) for |z| <= _TAYLOR_RADIUS; keeps relative accuracy at the zeros
    ks = np.arange(2, 2 + len(_ZETA))
    coef = _ZETA * (-1.0) ** ks / ks
    acc = np.zeros_like(z)
    for c in coef[::-1]:
        acc = (acc + c) * z
    return (acc - _EULER_GAMMA) * z


def log_gamma(x):
    """Natural log of the Gamma function for x > 0."""
    arr = _positive(x, "log_gamma")
    out = np.empty_like(arr)
    near1 = np.abs(arr - 1.0) <= _TAYLOR_RADIUS
    near2 = np.abs(arr - 2.0) <= _TAYLOR_RADIUS
    small = (arr < 0.5) & ~near1
    big = ~(small | near1 | near2)
    out[big] = _lanczos_log_gamma(arr[big])
    if np.any(small):
        xs = arr[small]
        out[small] = np.log(np.pi / np.sin(np.pi * xs)) - _lanczos_log_gamma(1.0 - xs)
    out[near1] = _log_gamma_1p(arr[near1] - 1.0)
    z2 = arr[near2] - 2.0
    out[near2] = _log_gamma_1p(z2) + np.log1p(z2)
    return _wrap(out, x)


def _shift_up(arr, term):
    """Apply a recurrence until every entry is >= _SHIFT_TO.

    Returns the shifted argument and the accumulated correction
    sum of ``term(x + k)`` over the shifted steps.
    """
    z = arr.copy()
    acc = np.zeros_like(z)
    mask = z < _SHIFT_TO
    while np.any(mask):
        acc[mask] += term(z[mask])
        z[mask] += 1.0
        mask = z < _SHIFT_TO
    return z, acc


def digamma(x):
    """psi(x) = d/dx ln Gamma(x) for x > 0."""
    arr = _positive(x, "digamma")
    z, corr = _shift_up(arr, lambda v: 1.0 / v)
    inv2 = 1.0 / (z * z)
    series = np.zeros_like(z)
    for coef in _DIGAMMA_SERIES[::-1]:
        series = (series + coef) * inv2
    out = np.log(z) - 0.5 / z - series - corr
    return _wrap(out, x)


def trigamma(x):
    """psi'(x) for x > 0."""
    arr = _positive(x, "trigamma")
    z, corr = _shift_up(arr, lambda v: 1.0 / (v * v))
    inv2 = 1.0 / (z * z)
    series = np.zeros_like(z)
    for coef in _TRIGAMMA_SERIES[::-1]:
        series = (series + coef) * inv2
    out = 1.0 / z + 0.5 * inv2 + series / z + corr
    return _wrap(out, x)


def log_exp_plus_const(o, gamma):
    """Overflow-free ln(exp(o) + gamma)."""
    if not np.all(np.asarray(gamma) > 0):
        raise ValueError("gamma must be positive")
    o_arr = np.asarray(o, dtype=np.float64)
    log_g = np.log(gamma)
    out = np.logaddexp(o_arr, log_g)
    return _wrap(out, o)
