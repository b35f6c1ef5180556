"""Trajectory generation and samplers for the Brownian-functional limit laws.

Simulation of error-correction paths from a :class:`~cointrr.model.VecmParams`,
plus Monte Carlo samplers for the stochastic objects the limit theorems are
stated in: the Brownian functionals (B, J₁₂, J₂₂, V) drawn from one joint
path, and the block-assembled limit matrices for fits at, above, or below the
true rank (and for weighted mixtures).

All operations take an explicit :class:`RngStream` and are otherwise pure, so
replication loops can be fanned out across workers with derived stream ids and
merged order-independently.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from ._kernels import sim_levels
from .errors import (
    DimensionMismatch,
    InvalidRank,
    InvalidSteps,
    NotPositiveDefinite,
    ParseError,
    TooShort,
    Unstable,
)
from .matops import gsym_eig, pd_sqrt
from .model import (
    VecmParams,
    _companion_eigenvalues,
    asymptotic_bias,
    check_i1_conditions,
    population_eigs,
    population_moments,
    q_transform,
)

_COORDINATE_SYSTEMS = ("original", "q_transformed")
_EXPLOSIVE_TOL = 1e-8


@dataclass(frozen=True)
class RngStream:
    """Deterministic, splittable random stream.

    A stream is identified by ``(seed, stream_id)`` within its lineage; the
    same triple always reproduces the same draws bit-exactly, and distinct
    ids give statistically independent PCG64 streams (SeedSequence spawn
    keys). ``child(i)`` derives substreams, so a replication at any nesting
    depth owns its own reproducible randomness independent of how work is
    split across workers.
    """

    seed: int
    stream_id: int = 0
    lineage: tuple = ()

    def generator(self) -> np.random.Generator:
        """Fresh generator positioned at the start of this stream."""
        key = (*self.lineage, self.stream_id)
        return np.random.Generator(np.random.PCG64(np.random.SeedSequence(self.seed, spawn_key=key)))

    def child(self, index: int) -> "RngStream":
        """Derived stream number ``index`` nested under this one."""
        return RngStream(self.seed, int(index), (*self.lineage, self.stream_id))

    def children(self, count: int) -> list["RngStream"]:
        """The first ``count`` derived streams."""
        return [self.child(i) for i in range(count)]


@dataclass(frozen=True)
class Trajectory:
    """A simulated or observed path: rows are Y_0..Y_T (X_0..X_T transformed)."""

    data: np.ndarray
    coordinate_system: str = "original"

    def __post_init__(self):
        data = np.asarray(self.data, dtype=float)
        if data.ndim != 2 or data.shape[0] < 2:
            raise TooShort(f"trajectory needs at least 2 rows (T >= 1), got shape {data.shape}")
        if not np.all(np.isfinite(data)):
            raise DimensionMismatch("trajectory contains non-finite entries")
        if self.coordinate_system not in _COORDINATE_SYSTEMS:
            raise ParseError(f"unknown coordinate system {self.coordinate_system!r}")
        object.__setattr__(self, "data", data)

    @property
    def t_steps(self) -> int:
        return self.data.shape[0] - 1

    @property
    def p(self) -> int:
        return self.data.shape[1]

    def _prefix(self) -> str:
        return "x" if self.coordinate_system == "q_transformed" else "y"

    def to_csv(self, path) -> None:
        """Write one header row y1..yp (x1..xp transformed) plus T+1 data rows."""
        prefix = self._prefix()
        header = ",".join(f"{prefix}{i + 1}" for i in range(self.p))
        with open(path, "w", newline="") as fh:
            fh.write(header + "\n")
            for row in self.data:
                fh.write(",".join(repr(float(v)) for v in row) + "\n")

    @classmethod
    def from_csv(cls, path) -> "Trajectory":
        """Inverse of :meth:`to_csv`; raises ParseError with cell location."""
        with open(path, "r", newline="") as fh:
            lines = [line.rstrip("\n").rstrip("\r") for line in fh if line.strip()]
        if len(lines) < 3:
            raise TooShort(f"{path}: need a header and at least 2 data rows")
        names = lines[0].split(",")
        prefixes = {name.strip()[:1] for name in names}
        if prefixes == {"y"}:
            system = "original"
        elif prefixes == {"x"}:
            system = "q_transformed"
        else:
            raise ParseError(f"{path}: header {lines[0]!r} is not y1..yp or x1..xp")
        p = len(names)
        rows = []
        for i, line in enumerate(lines[1:], start=2):
            cells = line.split(",")
            if len(cells) != p:
                raise ParseError(f"{path}: line {i} has {len(cells)} fields, expected {p}")
            try:
                rows.append([float(c) for c in cells])
            except ValueError as exc:
                raise ParseError(f"{path}: line {i}: {exc}") from None
        return cls(data=np.array(rows), coordinate_system=system)


@dataclass(frozen=True)
class BrownianFunctionals:
    """One joint draw of the limit objects (B, J₁₂, J₂₂) and optionally V.

    ``b`` (n×n) is almost surely positive definite; ``j12`` (r×n) and ``j22``
    (n×n) come from the same Brownian path as ``b``. ``v`` (p×r, or None when
    not requested) is independent with vec V ~ N(0, Σ_X^{11} ⊗ Σ_U).
    """

    b: np.ndarray
    j12: np.ndarray
    j22: np.ndarray
    v: np.ndarray | None = None


def _colored_gaussian(generator: np.random.Generator, t_steps: int, sigma: np.ndarray) -> np.ndarray:
    return generator.standard_normal((t_steps, sigma.shape[0])) @ np.linalg.cholesky(sigma).T


def simulate_vecm(
    params: VecmParams,
    t_steps: int,
    rng: RngStream,
    noise="gaussian",
    *,
    initial: str = "zero",
    check_assumptions: bool = True,
    coordinate_system: str = "original",
) -> Trajectory:
    """Simulate Y_0..Y_T from ΔY_t = ΠY_{t−1} + Σ_iΨ_iΔY_{t−i} + Z_t.

    ``noise`` is either ``"gaussian"`` (Z_t ~ N(0, Σ_Z)) or a callable
    ``noise(generator, t_steps) -> (t_steps, p)`` drawing the innovations
    itself (Σ_Z is then ignored). ``initial`` is ``"zero"`` (Y_0 = 0, the
    default) or ``"stationary"``, which draws the stationary block of Y_0
    from its invariant law N(0, Σ_X^{11}) (single-lag models only). The
    stationary draw, when requested, is consumed from the stream before the
    innovations.
    """
    if t_steps < 1:
        raise TooShort(f"t_steps must be >= 1, got {t_steps}")
    mu = _companion_eigenvalues(params)
    max_root = float(np.max(np.abs(mu)))
    if max_root > 1.0 + _EXPLOSIVE_TOL:
        raise Unstable(f"explosive companion root |mu| = {max_root:.6f} > 1")
    if check_assumptions:
        report = check_i1_conditions(params)
        if not (report.stable and report.a2_ok):
            warnings.warn(
                "model violates the unit-root assumptions (stable=%s, a2_ok=%s); "
                "simulating anyway" % (report.stable, report.a2_ok),
                RuntimeWarning,
                stacklevel=2,
            )

    p = params.p
    generator = rng.generator()

    y0 = np.zeros(p)
    if initial == "stationary":
        if params.d != 1:
            raise InvalidRank("stationary initialization supports single-lag models only")
        if params.r > 0:
            mom = population_moments(params)
            x1 = pd_sqrt(mom.sigma_x11) @ generator.standard_normal(params.r)
            if params.r == p:
                y0 = x1
            else:
                qt = q_transform(params)
                y0 = qt.q_inv @ np.concatenate([x1, np.zeros(params.n)])
    elif initial != "zero":
        raise ParseError(f"unknown initial condition {initial!r}")

    if noise == "gaussian":
        shocks = _colored_gaussian(generator, t_steps, params.sigma_z)
    elif callable(noise):
        shocks = np.asarray(noise(generator, t_steps), dtype=float)
        if shocks.shape != (t_steps, p):
            raise DimensionMismatch(
                f"noise sampler returned shape {shocks.shape}, expected {(t_steps, p)}"
            )
        if not np.all(np.isfinite(shocks)):
            raise DimensionMismatch("noise sampler returned non-finite values")
    else:
        raise ParseError(f"noise must be 'gaussian' or a callable, got {noise!r}")

    if params.d == 1 and initial == "zero":
        levels = sim_levels(np.eye(p) + params.pi, shocks)
    else:
        growth = np.eye(p) + params.pi
        levels = np.empty((t_steps + 1, p))
        levels[0] = y0
        diffs = [np.zeros(p) for _ in range(params.d - 1)]
        for t in range(1, t_steps + 1):
            dy = levels[t - 1] @ params.pi.T + shocks[t - 1]
            for i, psi in enumerate(params.lag_coeffs):
                dy = dy + psi @ diffs[i]
            levels[t] = levels[t - 1] + dy
            if diffs:
                diffs = [dy] + diffs[:-1]
    return Trajectory(data=levels, coordinate_system=coordinate_system)


def simulate_trials(
    params: VecmParams,
    t_steps: int,
    n_trials: int,
    rng: RngStream,
    noise="gaussian",
    **kwargs,
) -> list[Trajectory]:
    """``n_trials`` independent trajectories, trial i drawn from ``rng.child(i)``.

    Deterministic given (seed, n_trials) and independent of any worker split.
    """
    if n_trials < 1:
        raise TooShort(f"n_trials must be >= 1, got {n_trials}")
    return [
        simulate_vecm(params, t_steps, rng.child(i), noise, **kwargs)
        for i in range(n_trials)
    ]


def _brownian_integrals(dw: np.ndarray):
    """Left-endpoint Euler integrals of one discrete Brownian path.

    ``dw`` holds the increments (n_steps, p), each N(0, dt·I). Returns
    (∫WWᵀds, ∫W dWᵀ, W_1, Σ ΔWΔWᵀ); the last two exist to let tests verify
    the exact telescoping identity ∫WdWᵀ + (∫WdWᵀ)ᵀ = W₁W₁ᵀ − ΣΔWΔWᵀ on the
    same arrays the sampler consumes.
    """
    n_steps = dw.shape[0]
    w = np.vstack([np.zeros((1, dw.shape[1])), np.cumsum(dw, axis=0)])
    w_prev = w[:-1]
    int_ww = (w_prev.T @ w_prev) / n_steps
    int_wdw = w_prev.T @ dw
    return int_ww, int_wdw, w[-1], dw.T @ dw


def sample_brownian_functionals(
    sigma_u: np.ndarray,
    r: int,
    n_steps: int,
    rng: RngStream,
    *,
    sigma_x11: np.ndarray | None = None,
) -> BrownianFunctionals:
    """Draw (B, J₁₂, J₂₂) from one Euler path on [0,1], plus V when requested.

    B = DΣ_U^{1/2}(∫WWᵀds)Σ_U^{1/2}Dᵀ and (J₁₂; J₂₂) = Σ_U^{1/2}(∫WdWᵀ)ᵀΣ_U^{1/2}Dᵀ
    with D = (0 I_n) selecting the random-walk block and Σ_U^{1/2} the symmetric
    root. Passing ``sigma_x11`` additionally draws the independent Gaussian
    V = Σ_U^{1/2} N Σ_X^{11,1/2} (so vec V ~ N(0, Σ_X^{11} ⊗ Σ_U)); the path
    increments are consumed from the stream first, then V. Discretization bias
    is O(1/n_steps).
    """
    sigma_u = np.asarray(sigma_u, dtype=float)
    p = sigma_u.shape[0]
    if sigma_u.shape != (p, p):
        raise DimensionMismatch(f"sigma_u must be square, got {sigma_u.shape}")
    if not 0 <= r < p:
        raise InvalidRank(f"need 0 <= r < p for a nonempty random-walk block, got r={r}, p={p}")
    if n_steps < 100:
        raise InvalidSteps(f"n_steps must be >= 100, got {n_steps}")
    root_u = pd_sqrt(sigma_u)

    generator = rng.generator()
    dw = generator.standard_normal((n_steps, p)) / np.sqrt(n_steps)
    int_ww, int_wdw, _, _ = _brownian_integrals(dw)

    scaled_ww = root_u @ int_ww @ root_u
    b = scaled_ww[r:, r:]
    b = (b + b.T) / 2.0
    j_cols = (root_u @ int_wdw.T @ root_u)[:, r:]

    v = None
    if sigma_x11 is not None:
        sigma_x11 = np.asarray(sigma_x11, dtype=float)
        if sigma_x11.shape != (r, r):
            raise DimensionMismatch(f"sigma_x11 must be {r}x{r}, got {sigma_x11.shape}")
        v = root_u @ generator.standard_normal((p, r)) @ pd_sqrt(sigma_x11) if r > 0 else np.zeros((p, 0))
    return BrownianFunctionals(b=b, j12=j_cols[:r], j22=j_cols[r:], v=v)


def _psd_factor(cov: np.ndarray) -> np.ndarray:
    """Square root of a PSD matrix, tolerating numerically singular ones."""
    sym = (cov + cov.T) / 2.0
    w, vecs = np.linalg.eigh(sym)
    if np.min(w) < -1e-8 * max(np.max(w), 1.0):
        raise NotPositiveDefinite(f"covariance has eigenvalue {np.min(w):.3e} < 0")
    return vecs * np.sqrt(np.clip(w, 0.0, None))


def sample_limit_law(
    params: VecmParams,
    k: int | None,
    n_samples: int,
    rng: RngStream,
    *,
    n_steps: int = 1000,
    weights: np.ndarray | None = None,
) -> np.ndarray:
    """Monte Carlo draws of the p×p limit matrix for a rank-k (or weighted) fit.

    Each sample assembles the limit of the block-scaled deviation
    [√T(Γ̂ − Γ − bias)^{·1}, T(Γ̂ − Γ)^{·2}] in transformed coordinates:
    Gaussian blocks from V (or Ṽ with covariance ξΞξᵀ below the true rank),
    Brownian blocks from :func:`sample_brownian_functionals`; above the true
    rank the projector onto the extra directions is recomputed per path from
    the random eigenproblem (J₂₂ᵀ(Σ_U^{22})⁻¹J₂₂, B). Passing ``weights``
    instead of ``k`` draws from the weighted-mixture law, with the random
    C₂w = G₂₂D₂G₂₂ᵀ evaluated per path. Returns (n_samples, p, p); sample i
    uses ``rng.child(i)``.
    """
    p, r, n = params.p, params.r, params.n
    if not 0 < r < p:
        raise InvalidRank(f"limit laws need 0 < r < p, got r={r}, p={p}")
    if n_samples < 1:
        raise TooShort(f"n_samples must be >= 1, got {n_samples}")
    if weights is None:
        if k is None or not 1 <= k <= p:
            raise InvalidRank(f"k must be in 1..{p}, got {k}")
    else:
        weights = np.asarray(weights, dtype=float)

    qt = q_transform(params)
    mom = population_moments(params)
    sigma_u = qt.sigma_u(params.sigma_z)
    sx11_inv = np.linalg.inv(mom.sigma_x11)
    u12 = sigma_u[:r, r:]
    u22 = sigma_u[r:, r:]
    u12_u22inv = u12 @ np.linalg.inv(u22)

    # Deferred: asymcov depends on model/matops only, but importing it at
    # module scope would be a heavier import than most callers need.
    gauss_factor = None
    c_left = np.eye(r)
    if weights is not None:
        from .asymcov import weight_asymptotics

        wa = weight_asymptotics(params, weights)
        gauss_factor = _psd_factor(wa.xi_w_cov)
        c_left = wa.c1w
        d2 = np.diag(weights[r:]) if p > r else np.zeros((0, 0))
        mode = "weighted"
    elif k < r:
        from .asymcov import under_rank_cov

        gauss_factor = _psd_factor(under_rank_cov(params, k))
        c_left = asymptotic_bias(params, k).c_m
        mode = "under"
    elif k == r:
        mode = "true"
    else:
        mode = "over"
        m_extra = k - r

    out = np.empty((n_samples, p, p))
    for i in range(n_samples):
        stream = rng.child(i)
        funcs = sample_brownian_functionals(
            sigma_u, r, n_steps, stream, sigma_x11=mom.sigma_x11 if gauss_factor is None else None
        )
        if gauss_factor is None:
            left = funcs.v @ sx11_inv
        else:
            gen = stream.child(0).generator()
            left = (gauss_factor @ gen.standard_normal(p * r)).reshape((p, r), order="F")
        j12_tilde = funcs.j12 - u12_u22inv @ funcs.j22
        b_inv = np.linalg.inv(funcs.b)
        sample = np.zeros((p, p))
        sample[:, :r] = left
        sample[:r, r:] = c_left @ j12_tilde @ b_inv
        if mode == "over":
            eig = gsym_eig(funcs.j22.T @ np.linalg.solve(u22, funcs.j22), funcs.b)
            proj = eig.projector_sum(m_extra)
            sample[:r, r:] += u12_u22inv @ funcs.j22 @ proj
            sample[r:, r:] = funcs.j22 @ proj
        elif mode == "weighted":
            eig = gsym_eig(funcs.j22.T @ np.linalg.solve(u22, funcs.j22), funcs.b)
            c2w = eig.vectors @ d2 @ eig.vectors.T
            sample[:r, r:] = c_left @ j12_tilde @ b_inv + u12_u22inv @ funcs.j22 @ c2w
            sample[r:, r:] = funcs.j22 @ c2w
        out[i] = sample
    return out
