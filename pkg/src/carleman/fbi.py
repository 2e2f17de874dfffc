"""FBI transform, decay classification, wave front scans, phase bounds.

The transform is F[u](x, xi) = int u(y) exp(i(x-y).xi - |xi| (x-y)^2) dy,
discretized by tensor trapezoid sums over the grid box of u.  Scanning |F|
along rays xi = lambda omega and fitting the samples against the envelope
E(A, lambda) = inf_k A^{k+1} M_k lambda^{-k} separates directions where u
behaves like the weight class from directions where it does not.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import NoCone, Undersampled
from .weights import WeightSequence, fbi_envelope

_BOUNDARY_TOL = 1e-12


# ---------------------------------------------------------------------------
# sampled functions on tensor grids

@dataclass(eq=False)
class GridFunction:
    """Complex samples of a function on a uniform tensor-product grid."""
    lo: np.ndarray
    hi: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.lo = np.atleast_1d(np.asarray(self.lo, dtype=float))
        self.hi = np.atleast_1d(np.asarray(self.hi, dtype=float))
        self.values = np.asarray(self.values, dtype=complex)
        if self.lo.shape != self.hi.shape or self.lo.ndim != 1:
            raise ValueError("lo and hi must be matching one-dimensional")
        if self.values.ndim != self.lo.size:
            raise ValueError(
                f"values have {self.values.ndim} axes for {self.lo.size} bounds")
        if np.any(self.hi <= self.lo):
            raise ValueError("need hi > lo in every dimension")
        if min(self.values.shape) < 2:
            raise ValueError("need at least two samples per axis")

    @property
    def dim(self) -> int:
        return self.lo.size

    @property
    def n(self) -> tuple:
        return self.values.shape

    def axis(self, d: int) -> np.ndarray:
        return np.linspace(self.lo[d], self.hi[d], self.values.shape[d])

    def steps(self) -> np.ndarray:
        return (self.hi - self.lo) / (np.array(self.values.shape) - 1.0)

    def trapezoid_weights(self, d: int) -> np.ndarray:
        w = np.full(self.values.shape[d], self.steps()[d])
        w[0] *= 0.5
        w[-1] *= 0.5
        return w

    def boundary_max(self) -> float:
        m = 0.0
        for d in range(self.dim):
            first = np.take(self.values, 0, axis=d)
            last = np.take(self.values, -1, axis=d)
            m = max(m, float(np.max(np.abs(first))), float(np.max(np.abs(last))))
        return m

    @classmethod
    def from_function(cls, fn, lo, hi, n):
        lo = np.atleast_1d(np.asarray(lo, dtype=float))
        hi = np.atleast_1d(np.asarray(hi, dtype=float))
        nn = np.atleast_1d(np.asarray(n, dtype=int))
        if nn.size == 1 and lo.size > 1:
            nn = np.full(lo.size, nn[0])
        axes = [np.linspace(lo[d], hi[d], nn[d]) for d in range(lo.size)]
        grids = np.meshgrid(*axes, indexing="ij")
        vals = np.asarray(fn(*grids), dtype=complex)
        return cls(lo, hi, vals)

    def save(self, path):
        """Header: u4 dim, u4 n per axis, f8 lo/hi pairs; payload little
        endian complex64, row major."""
        with open(path, "wb") as fh:
            fh.write(struct.pack("<I", self.dim))
            fh.write(struct.pack(f"<{self.dim}I", *self.values.shape))
            for d in range(self.dim):
                fh.write(struct.pack("<2d", self.lo[d], self.hi[d]))
            fh.write(np.ascontiguousarray(self.values).astype("<c8").tobytes())

    @classmethod
    def load(cls, path):
        with open(path, "rb") as fh:
            raw = fh.read()
        (dim,) = struct.unpack_from("<I", raw, 0)
        off = 4
        shape = struct.unpack_from(f"<{dim}I", raw, off)
        off += 4 * dim
        lo = np.empty(dim)
        hi = np.empty(dim)
        for d in range(dim):
            lo[d], hi[d] = struct.unpack_from("<2d", raw, off)
            off += 16
        count = int(np.prod(shape))
        vals = np.frombuffer(raw, dtype="<c8", count=count, offset=off)
        return cls(lo, hi, vals.reshape(shape).astype(complex))


# ---------------------------------------------------------------------------
# the transform

def _check_sampling(gf: GridFunction, x, lam: float):
    """Oscillation and truncation guards for the discretized integral."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.size != gf.dim:
        raise ValueError(f"x has {x.size} components for a {gf.dim}-d grid")
    if np.any(x < gf.lo) or np.any(x > gf.hi):
        raise Undersampled(f"base point {x} outside the grid box")
    half = 0.5 * (gf.hi - gf.lo)
    steps = gf.steps()
    for d in range(gf.dim):
        allowed = np.pi / (4.0 * (lam + np.sqrt(lam) * half[d])) if lam > 0 \
            else np.inf
        if steps[d] > allowed:
            raise Undersampled(
                f"axis {d} step {steps[d]:.3g} exceeds {allowed:.3g} "
                f"needed at |xi| = {lam:.3g}")
    scale = max(1.0, float(np.max(np.abs(gf.values))))
    dist = float(np.min(np.minimum(x - gf.lo, gf.hi - x)))
    with np.errstate(under="ignore"):
        damping = np.exp(-lam * dist * dist)
    if gf.boundary_max() * damping > _BOUNDARY_TOL * scale:
        raise Undersampled(
            "integrand is not negligible at the box edge; enlarge the box "
            "or add a cutoff")
    return x


def fbi_transform(gf: GridFunction, x, xi) -> complex:
    """Trapezoid discretization of int u(y) e^{i(x-y).xi - |xi|(x-y)^2} dy."""
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    if xi.size != gf.dim:
        raise ValueError(f"xi has {xi.size} components for a {gf.dim}-d grid")
    lam = float(np.linalg.norm(xi))
    x = _check_sampling(gf, x, lam)
    out = gf.values
    for d in range(gf.dim - 1, -1, -1):
        v = x[d] - gf.axis(d)
        with np.errstate(under="ignore"):
            p = gf.trapezoid_weights(d) * np.exp(1j * v * xi[d] - lam * v * v)
        out = np.tensordot(out, p, axes=([d], [0]))
    return complex(out)


def fbi_direction_scan(gf: GridFunction, x, directions, lambdas) -> np.ndarray:
    """F(x, lambda omega) for every direction and magnitude; shape
    (n_directions, n_lambdas).  Separable in the tensor Gaussian, so each
    lambda costs one matrix product."""
    dirs = np.atleast_2d(np.asarray(directions, dtype=float))
    lams = np.atleast_1d(np.asarray(lambdas, dtype=float))
    if dirs.shape[1] != gf.dim:
        raise ValueError("direction dimension does not match the grid")
    if gf.dim not in (1, 2):
        raise NotImplementedError("direction scans cover one and two dimensions")
    out = np.empty((dirs.shape[0], lams.size), dtype=complex)
    for li, lam in enumerate(lams):
        xx = _check_sampling(gf, np.zeros(gf.dim) + np.asarray(x, dtype=float),
                             float(lam))
        planes = []
        for d in range(gf.dim):
            v = xx[d] - gf.axis(d)
            with np.errstate(under="ignore"):
                g = gf.trapezoid_weights(d) * np.exp(-lam * v * v)
                planes.append(g[:, None] *
                              np.exp(1j * lam * np.outer(v, dirs[:, d])))
        if gf.dim == 1:
            out[:, li] = gf.values @ planes[0]
        else:
            m = gf.values @ planes[1]
            out[:, li] = np.einsum("ad,ad->d", planes[0], m)
    return out


# ---------------------------------------------------------------------------
# decay classification

_A_GRID = 2.0 ** (0.5 * np.arange(-32, 33))       # 2^-16 .. 2^16


@dataclass
class DecayReport:
    passed: bool
    A_fit: float             # inf when no grid value certifies the decay
    lambda_min: float
    floor: float
    n_tail: int


def decay_classify(lambdas, samples, seq: WeightSequence, a_grid=None,
                   lambda_min: float = 4.0, floor_rel: float = 1e-11,
                   scale: float | None = None,
                   certified: bool = False) -> DecayReport:
    """Smallest grid A with |F(lambda)| <= max(E(A, lambda), floor) on the
    tail lambda >= lambda_min.

    The floor absorbs quadrature noise and underflow: floor_rel times the
    sample scale (max of these samples unless a global scale is given).
    """
    lams = np.asarray(lambdas, dtype=float)
    mags = np.abs(np.asarray(samples))
    if lams.shape != mags.shape or lams.ndim != 1 or lams.size == 0:
        raise ValueError("need matching one-dimensional lambda and sample arrays")
    a_grid = _A_GRID if a_grid is None else np.asarray(a_grid, dtype=float)
    if scale is None:
        scale = float(np.max(mags)) if np.max(mags) > 0 else 1.0
    floor = floor_rel * scale

    tail = lams >= lambda_min * (1.0 - 1e-12)
    n_tail = int(np.sum(tail))
    if n_tail == 0:
        raise ValueError(f"no samples at or above lambda_min={lambda_min}")
    lt, mt = lams[tail], mags[tail]

    for A in a_grid:
        env = fbi_envelope(seq, float(A), lt, certified=certified)
        if np.all(mt <= np.maximum(env, floor)):
            return DecayReport(True, float(A), lambda_min, floor, n_tail)
    return DecayReport(False, np.inf, lambda_min, floor, n_tail)


def decay_margin(lambdas, samples, seq: WeightSequence, A: float,
                 lambda_min: float) -> float:
    """max over the tail of log|F| - log E(A, lambda): positive means the
    samples poke above the envelope at level A."""
    lams = np.asarray(lambdas, dtype=float)
    mags = np.abs(np.asarray(samples))
    tail = lams >= lambda_min * (1.0 - 1e-12)
    env = fbi_envelope(seq, A, lams[tail], certified=False)
    with np.errstate(divide="ignore"):
        return float(np.max(np.log(mags[tail]) - np.log(env)))


# ---------------------------------------------------------------------------
# wave front scans

@dataclass
class ScanConfig:
    n_directions: int = 64
    lambdas: np.ndarray = field(
        default_factory=lambda: np.geomspace(4.0, 64.0, 12))
    a_threshold: float = 1.0
    floor_rel: float = 1e-11
    a_grid: np.ndarray | None = None
    lambda_min: float | None = None      # default: top third of the log range
    certified: bool = False


@dataclass
class ScanReport:
    directions: np.ndarray       # (n_directions, dim) unit covectors
    lambdas: np.ndarray
    samples: np.ndarray          # |F| normalized by its global max
    normalization: float
    reports: list
    failed_indices: list         # every direction whose fit exceeds threshold
    singular_indices: list       # per contiguous band, the peak direction
    lambda_min: float


def _circle_directions(n: int) -> np.ndarray:
    th = 2.0 * np.pi * np.arange(n) / n
    return np.column_stack([np.cos(th), np.sin(th)])


def _failed_bands(failed, n: int) -> list:
    """Group failed direction indices into circularly contiguous bands."""
    if not failed:
        return []
    fs = sorted(failed)
    if len(fs) == n:
        return [fs]
    bands = []
    cur = [fs[0]]
    for j in fs[1:]:
        if j == cur[-1] + 1:
            cur.append(j)
        else:
            bands.append(cur)
            cur = [j]
    bands.append(cur)
    # wrap-around: merge a band ending at n-1 into one starting at 0
    if len(bands) > 1 and bands[0][0] == 0 and bands[-1][-1] == n - 1:
        bands[0] = bands.pop() + bands[0]
    return bands


def wavefront_scan(gf: GridFunction, x, seq: WeightSequence,
                   config: ScanConfig | None = None) -> ScanReport:
    """Classify FBI decay over a fan of directions at one base point.

    Samples are normalized by their global max so the classification sees
    relative decay, and the fit only weighs the top third of the lambda
    range (in log), where the envelope has begun to separate regular from
    singular directions; the angular response of the transform at the top
    lambda is about 1/sqrt(lambda) wide, so a failed band spans several
    neighbors and the per-band envelope-excess peak names the direction.
    """
    cfg = config or ScanConfig()
    lams = np.asarray(cfg.lambdas, dtype=float)
    if gf.dim == 1:
        dirs = np.array([[1.0], [-1.0]])
    elif gf.dim == 2:
        dirs = _circle_directions(cfg.n_directions)
    else:
        raise NotImplementedError("scans cover one and two dimensions")

    raw = np.abs(fbi_direction_scan(gf, x, dirs, lams))
    norm = float(np.max(raw))
    if norm <= 0.0:
        raise ValueError("transform vanished identically; nothing to classify")
    samples = raw / norm

    if cfg.lambda_min is None:
        llo, lhi = np.log(lams.min()), np.log(lams.max())
        lambda_min = float(np.exp(llo + (2.0 / 3.0) * (lhi - llo)))
    else:
        lambda_min = float(cfg.lambda_min)

    reports = []
    failed = []
    for j in range(dirs.shape[0]):
        rep = decay_classify(lams, samples[j], seq, a_grid=cfg.a_grid,
                             lambda_min=lambda_min, floor_rel=cfg.floor_rel,
                             scale=1.0, certified=cfg.certified)
        reports.append(rep)
        if not rep.passed or rep.A_fit > cfg.a_threshold:
            failed.append(j)

    singular = []
    if gf.dim == 1:
        # two opposite covectors, no angular smearing to peel apart
        singular = list(failed)
    else:
        for band in _failed_bands(failed, dirs.shape[0]):
            margins = [decay_margin(lams, samples[j], seq, cfg.a_threshold,
                                    lambda_min) for j in band]
            singular.append(band[int(np.argmax(margins))])

    return ScanReport(dirs, lams, samples, norm, reports, failed,
                      sorted(singular), lambda_min)


# ---------------------------------------------------------------------------
# phase bounds along complex traces

@dataclass
class PhaseBoundReport:
    omega0: np.ndarray
    C0: float
    half_angle: float
    omegas: np.ndarray
    c_values: np.ndarray


def phase_bound_check(z_samples, t_values, y_values, omegas=None,
                      c_floor: float = 2.0 ** -10) -> PhaseBoundReport:
    """Concavity constants for Q(y, Z) = i omega.(y-Z) - <y-Z>^2 along a
    trace t -> Z(t).

    For each candidate direction omega the largest dyadic C with
    Re Q <= -(C/2) t over all samples is recorded; directions below
    c_floor carry no cone.  <v>^2 is the bilinear square sum v_d^2, not
    |v|^2: its real part changes sign off the reals, which is the whole
    point.  Raises NoCone when no direction qualifies.
    """
    t = np.asarray(t_values, dtype=float)
    if np.any(t <= 0.0):
        raise ValueError("trace times must be positive")
    z = np.asarray(z_samples, dtype=complex)
    if z.ndim == 1:
        z = z[:, None]
    if z.shape[0] != t.size:
        raise ValueError("one trace sample per time is required")
    dim = z.shape[1]
    y = np.asarray(y_values, dtype=float)
    if dim == 1 and y.ndim == 1:
        y = y[:, None]
    if y.shape[1] != dim:
        raise ValueError("y sample dimension does not match the trace")

    if omegas is None:
        omegas = np.array([[1.0], [-1.0]]) if dim == 1 \
            else _circle_directions(16)
    omegas = np.atleast_2d(np.asarray(omegas, dtype=float))

    # v[s, a, d] = y[a, d] - Z[s, d]
    v = y[None, :, :] - z[:, None, :]
    sq = np.real(np.sum(v * v, axis=2))                    # Re <v>^2
    c_values = np.zeros(omegas.shape[0])
    raw = np.full(omegas.shape[0], -np.inf)
    for k, om in enumerate(omegas):
        req = -np.imag(v @ om) - sq
        ratios = -2.0 * req / t[:, None]
        m = float(np.min(ratios))
        if m >= c_floor:
            c_values[k] = 2.0 ** np.floor(np.log2(m))
            raw[k] = m
    if np.all(c_values == 0.0):
        raise NoCone("no direction satisfies the phase concavity bound")

    # ties on the dyadic grid are broken by the raw minimum, which peaks at
    # the center of the qualifying arc
    best = int(np.argmax(raw))
    omega0 = omegas[best]
    good = c_values > 0.0
    if dim == 1:
        half_angle = np.pi if np.sum(good) > 1 else 0.5 * np.pi
    else:
        cosang = np.clip(omegas[good] @ omega0, -1.0, 1.0)
        half_angle = float(np.max(np.arccos(cosang)))
        if half_angle == 0.0:
            # a single direction still subtends half the angular step
            half_angle = np.pi / omegas.shape[0]
    return PhaseBoundReport(omega0, float(c_values[best]), half_angle,
                            omegas, c_values)
