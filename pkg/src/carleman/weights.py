"""Regular weight sequences and their associated functions.

A weight sequence M_k with m_k = M_k/k! drives every certification in the
toolkit: the associated functions

    h(r)  = inf_k m_k r^k,      h1(r) = inf_{k>=1} m_k r^{k-1},

the least minimizing index N(r) of h1, and the FBI decay envelope
E(A, lam) = inf_k A^{k+1} M_k lam^{-k}.  All infima are computed in log
space over a materialized table k = 0..K_max and are *certified*: when the
minimizer lands on the table boundary with the terms still decreasing, the
operation raises GuardExceeded instead of returning a wrong value.

Tables can be large (10^6 entries for Gevrey exponents close to 1), so the
minimizers use the log-convexity of the terms: the increments of
log(m_k) + k*log(r) are nondecreasing in k, hence the argmin is the first
index where the increment turns nonnegative, found by binary search.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import FitFailed, GuardExceeded, NonRegular

# Largest non-log-convex table we are willing to brute-force scan.
_BRUTE_MAX = 8192
_CONVEX_TOL = 1e-12


@dataclass(eq=False)
class WeightSequence:
    """Materialized weight sequence m_k = M_k/k!, k = 0..K_max.

    kind is "gevrey" (m_k = (k!)^(s-1)) or "table" (M_k given explicitly).
    m may overflow to inf for large k; log_m is the working representation.
    lfact[k] = log(k!), so log(M_k) = log_m[k] + lfact[k].
    """

    kind: str
    K_max: int
    s: float | None
    m: np.ndarray
    log_m: np.ndarray
    lfact: np.ndarray
    values: np.ndarray | None = None     # table kind only: the raw M_k
    log_convex: bool = field(init=False, default=False)

    def __post_init__(self):
        lr = np.diff(self.log_m)
        self.log_convex = bool(self.K_max < 2 or np.all(np.diff(lr) >= -_CONVEX_TOL))

    @property
    def increments(self) -> np.ndarray:
        """lr[k] = log(m_{k+1}) - log(m_k), nondecreasing iff log-convex."""
        return np.diff(self.log_m)

    @property
    def c_bound(self) -> float:
        """Empirical sup over the table of (m_{k+1}/m_k)^(1/k), k >= 1."""
        lr = self.increments
        ks = np.arange(1, self.K_max)
        return float(np.exp(np.max(lr[1:] / ks))) if self.K_max >= 2 else 1.0

    @property
    def log_M(self) -> np.ndarray:
        return self.log_m + self.lfact


def make_sequence(kind: str = "gevrey", s: float = 2.0, K_max: int = 64,
                  values=None) -> WeightSequence:
    """Materialize a weight sequence.

    kind="gevrey": M_k = (k!)^s, requires s > 1.  kind="table": values are
    the M_k themselves, need at least K_max+1 positive entries.
    Construction never rejects a sequence for failing the regularity
    conditions; run check_regularity / require_regular for that.
    """
    K_max = int(K_max)
    if K_max < 8:
        raise ValueError(f"K_max must be >= 8, got {K_max}")
    karr = np.arange(1, K_max + 1, dtype=float)
    lfact = np.concatenate([[0.0], np.cumsum(np.log(karr))])

    if kind == "gevrey":
        s = float(s)
        if not s > 1.0:
            raise ValueError(f"Gevrey exponent must be > 1, got {s}")
        log_m = (s - 1.0) * lfact
        # cumprod keeps small-k entries exact (m_2 = 2 exactly for s = 2);
        # the tail overflows to inf harmlessly, log_m is what gets used.
        with np.errstate(over="ignore"):
            m = np.concatenate([[1.0], np.cumprod(karr ** (s - 1.0))])
        return WeightSequence("gevrey", K_max, s, m, log_m, lfact)

    if kind == "table":
        vals = np.asarray(values, dtype=float)
        if vals.ndim != 1 or vals.size < K_max + 1:
            raise ValueError(f"table needs >= {K_max + 1} values, got {vals.shape}")
        vals = vals[:K_max + 1].copy()
        if not np.all(vals > 0.0):
            raise ValueError("table values must be positive")
        log_m = np.log(vals) - lfact
        with np.errstate(over="ignore"):
            m = np.exp(log_m)
        return WeightSequence("table", K_max, None, m, log_m, lfact, values=vals)

    raise ValueError(f"unknown sequence kind {kind!r}")


# ---------------------------------------------------------------------------
# regularity

@dataclass
class RegularityReport:
    passed: bool
    failures: list          # (condition tag in {a, b, c, d}, first offending index)
    c_bound: float
    d_threshold: float
    c_threshold: float


def check_regularity(seq: WeightSequence, d_threshold: float = 4.0,
                     c_threshold: float = 64.0, tol: float = 1e-12) -> RegularityReport:
    """Test conditions a)-d) over the materialized range.

    a) m_0 = m_1 = 1;  b) m_k^2 <= m_{k-1} m_{k+1};  c) (m_{k+1}/m_k)^{1/k}
    bounded, tested against c_threshold;  d) m_k^{1/k} -> infinity, tested as
    the finite proxy m_{K_max}^{1/K_max} >= d_threshold together with
    monotone growth of m_k^{1/k} over the top quartile of indices.
    """
    failures = []
    log_m = seq.log_m
    K = seq.K_max

    for idx in (0, 1):
        if abs(log_m[idx]) > tol:
            failures.append(("a", idx))
            break

    lr = np.diff(log_m)
    d2 = np.diff(lr)                       # d2[i] vs center index i+1
    bad = np.nonzero(d2 < -tol)[0]
    if bad.size:
        failures.append(("b", int(bad[0]) + 1))

    ks = np.arange(1, K)
    ratio_roots = lr[1:] / ks              # log (m_{k+1}/m_k)^{1/k}
    bad = np.nonzero(ratio_roots > np.log(c_threshold))[0]
    if bad.size:
        failures.append(("c", int(bad[0]) + 1))

    roots = log_m[1:] / np.arange(1, K + 1)    # log m_k^{1/k}
    if np.exp(roots[-1]) < d_threshold:
        failures.append(("d", K))
    else:
        lo = max(1, (3 * K) // 4)
        top = roots[lo - 1:]
        bad = np.nonzero(np.diff(top) < -tol)[0]
        if bad.size:
            failures.append(("d", lo + int(bad[0])))

    return RegularityReport(not failures, failures, seq.c_bound,
                            d_threshold, c_threshold)


def require_regular(seq: WeightSequence, **kwargs) -> None:
    """Raise NonRegular unless check_regularity passes."""
    report = check_regularity(seq, **kwargs)
    if not report.passed:
        raise NonRegular(report.failures)


# ---------------------------------------------------------------------------
# associated functions

def _argmin_from(seq: WeightSequence, t: np.ndarray, k0: int) -> np.ndarray:
    """Least argmin over k >= k0 of g(k) = log_m[k] + (k - k0)*t, certified.

    For log-convex tables the increments g(k+1) - g(k) = lr[k] + t are
    nondecreasing, so the least argmin is the first k with lr[k] + t >= 0:
    a searchsorted.  Ties (increment exactly 0) keep the lower index, so N
    always reports the least minimizer.  An argmin of K_max is
    only trusted when the last increment is nonnegative; otherwise the true
    infimum may lie beyond the table and we raise.
    """
    lr = seq.increments
    if seq.log_convex:
        # Tie tolerance: at an exact breakpoint r = m_k/m_{k+1} the increment
        # comparison lr[k] >= -t is an equality that float rounding can tip
        # either way; shifting the target keeps the least-index convention.
        target = -t - 1e-12 * (1.0 + np.abs(t))
        idx = k0 + np.searchsorted(lr[k0:], target, side="left")
        # idx == K_max means every materialized increment was negative:
        # the terms decrease through the table boundary, value uncertified.
        bad = idx == seq.K_max
    else:
        if seq.K_max > _BRUTE_MAX:
            raise ValueError(
                "table is not log-convex and too large for a direct argmin scan")
        terms = seq.log_m[None, k0:] + np.arange(seq.K_max + 1 - k0)[None, :] * t[:, None]
        idx = k0 + np.argmin(terms, axis=1)
        bad = (idx == seq.K_max) & (lr[-1] + t < 0)
    if np.any(bad):
        r_bad = float(np.exp(t[bad][0]))
        raise GuardExceeded(
            f"argmin hit K_max={seq.K_max} with terms still decreasing "
            f"(r = {r_bad:.6g}); enlarge K_max")
    return idx


def _log_assoc(seq: WeightSequence, variant: str, r) -> np.ndarray | float:
    """log of assoc(seq, variant, r); vectorized over r."""
    rr = np.asarray(r, dtype=float)
    scalar = rr.ndim == 0
    rr = np.atleast_1d(rr)
    if np.any(rr <= 0.0):
        raise ValueError("r must be positive")
    t = np.log(rr)
    out = np.empty_like(t)

    if variant == "h":
        idx = _argmin_from(seq, t, 0)
        out = seq.log_m[idx] + idx * t
    elif variant == "h1":
        big = rr >= 1.0
        # m_1 r^0 = 1 minimizes for r >= 1 (the Remark's h1 = 1 plateau),
        # and log_m[1] = 0 exactly, so these values are exact.
        out[big] = 0.0
        if np.any(~big):
            idx = _argmin_from(seq, t[~big], 1)
            out[~big] = seq.log_m[idx] + (idx - 1) * t[~big]
    else:
        raise ValueError(f"unknown variant {variant!r}")
    return float(out[0]) if scalar else out


def assoc(seq: WeightSequence, variant: str, r):
    """Associated function h (variant="h") or h1 (variant="h1") at r > 0.

    Scalar in, float out; array in, array out.  Raises GuardExceeded when
    r is too small for the materialized table to certify the infimum.
    """
    out = _log_assoc(seq, variant, r)
    with np.errstate(under="ignore"):
        return np.exp(out) if isinstance(out, np.ndarray) else float(np.exp(out))


def bigN(seq: WeightSequence, r):
    """Least index attaining h1(r) = inf_{k>=1} m_k r^{k-1}.

    The k = 0 term participates through its clamp min(1, 1/r), which makes
    N(r) = 0 for every r >= 1 and leaves r < 1 to the k >= 1 argmin.
    """
    rr = np.asarray(r, dtype=float)
    scalar = rr.ndim == 0
    rr = np.atleast_1d(rr)
    if np.any(rr <= 0.0):
        raise ValueError("r must be positive")
    out = np.zeros(rr.shape, dtype=int)
    small = rr < 1.0
    if np.any(small):
        out[small] = _argmin_from(seq, np.log(rr[small]), 1)
    return int(out[0]) if scalar else out


def bigN_capped(seq: WeightSequence, r, cap: int):
    """min(N(r), cap) elementwise, without the table guard when the cap decides.

    For a log-convex table a guarded argmin certifies N(r) >= K_max >= cap,
    so the capped value is cap and no raise is needed.  Non-log-convex
    tables keep the guard (the true argmin location is unknown there).
    """
    cap = int(cap)
    if cap > seq.K_max:
        raise ValueError(f"cap={cap} exceeds table K_max={seq.K_max}")
    rr = np.asarray(r, dtype=float)
    scalar = rr.ndim == 0
    rr = np.atleast_1d(rr)
    if np.any(rr <= 0.0):
        raise ValueError("r must be positive")
    out = np.zeros(rr.shape, dtype=int)
    small = rr < 1.0
    if np.any(small):
        t = np.log(rr[small])
        if seq.log_convex:
            # same comparison as _argmin_from(k0=1), minus the boundary raise
            target = -t - 1e-12 * (1.0 + np.abs(t))
            idx = 1 + np.searchsorted(seq.increments[1:], target, side="left")
            out[small] = np.minimum(idx, cap)
        else:
            out[small] = np.minimum(_argmin_from(seq, t, 1), cap)
    return int(out[0]) if scalar else out


def fbi_envelope(seq: WeightSequence, A: float, lam, certified: bool = True):
    """FBI decay envelope E(A, lam) = inf_k A^{k+1} M_k lam^{-k}.

    With certified=False the partial minimum over the table is returned even
    when the minimizer sits on the boundary; that value is an upper bound
    for the true envelope, which is the conservative direction for decay
    pass/fail decisions.
    """
    A = float(A)
    if A <= 0.0:
        raise ValueError("A must be positive")
    ll = np.asarray(lam, dtype=float)
    scalar = ll.ndim == 0
    ll = np.atleast_1d(ll)
    if np.any(ll <= 0.0):
        raise ValueError("lambda must be positive")

    log_M = seq.log_M
    linc = np.diff(log_M)
    target = np.log(ll) - np.log(A)
    if seq.log_convex:                     # linc nondecreasing, binary search
        idx = np.searchsorted(linc, target, side="left")
        at_end = idx == seq.K_max
    else:
        if seq.K_max > _BRUTE_MAX:
            raise ValueError(
                "table is not log-convex and too large for a direct argmin scan")
        ks = np.arange(seq.K_max + 1)
        terms = log_M[None, :] - ks[None, :] * target[:, None]
        idx = np.argmin(terms, axis=1)
        at_end = (idx == seq.K_max) & (linc[-1] < target)
    if np.any(at_end) and certified:
        raise GuardExceeded(
            f"envelope minimizer hit K_max={seq.K_max} at lambda="
            f"{ll[at_end][0]:.6g}; enlarge K_max or pass certified=False")
    vals = (idx + 1) * np.log(A) + log_M[idx] - idx * np.log(ll)
    with np.errstate(under="ignore"):
        out = np.exp(vals)
    return float(out[0]) if scalar else out


# ---------------------------------------------------------------------------
# absorption of powers of 1/r into a dilation of h

@dataclass
class AbsorptionFit:
    n: int
    Q: float
    C: float
    passed: bool


def absorption_fit(seq: WeightSequence, n: int, r_values,
                   q_grid=None, c_cap: float = 2.0 ** 16) -> AbsorptionFit:
    """Fit constants in r^{-n} h(r) <= C h(Q r) over the sampled r.

    Q runs over powers of two; for each Q the smallest admissible C comes
    from the log-space supremum, and the Q minimizing that C wins.  C is
    snapped up to the {2^{j/4}} grid.  FitFailed when even the best Q needs
    C > c_cap.
    """
    rr = np.asarray(r_values, dtype=float)
    if q_grid is None:
        q_grid = 2.0 ** np.arange(0, 7)
    log_h = _log_assoc(seq, "h", rr)
    best = None
    for Q in q_grid:
        log_hq = _log_assoc(seq, "h", Q * rr)
        need = np.max(log_h - n * np.log(rr) - log_hq)
        if best is None or need < best[1]:
            best = (float(Q), float(need))
    Q, log_c = best
    j = max(0, int(np.ceil(log_c / (0.25 * np.log(2.0)) - 1e-9)))
    C = 2.0 ** (j / 4.0)
    if C > c_cap:
        raise FitFailed(
            f"absorption with n={n} needs C ~ {np.exp(log_c):.3g} > cap {c_cap:.3g}")
    return AbsorptionFit(int(n), Q, C, True)


# ---------------------------------------------------------------------------
# serialization

def seq_to_dict(seq: WeightSequence) -> dict:
    if seq.kind == "gevrey":
        return {"kind": "gevrey", "s": seq.s, "K_max": seq.K_max}
    return {"kind": "table", "values": [float(v) for v in seq.values]}


def seq_from_dict(d: dict) -> WeightSequence:
    kind = d.get("kind")
    if kind == "gevrey":
        return make_sequence("gevrey", s=d["s"], K_max=d.get("K_max", 64))
    if kind == "table":
        vals = d["values"]
        return make_sequence("table", K_max=d.get("K_max", len(vals) - 1), values=vals)
    raise ValueError(f"unknown sequence kind {kind!r}")
