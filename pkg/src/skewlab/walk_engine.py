"""Monte Carlo through the exact embedded Markov chain.

The diffusion observed at successive hitting times of neighbouring grid
nodes is a birth-death chain.  Its up-probabilities follow from the scale
function (``S(X)`` is a martingale) and its holding times are the exact mean
exit times of the cells ``(x[i-1], x[i+1])``.  Consequently hitting
probabilities and the expected absorption time of the chain coincide with
the closed forms at every node, and the only error left is statistical.

Long paths are shortened by dyadic block moves: from node ``i`` the walker
jumps straight to ``i +- k`` with the chain's own exit probability, and is
credited with the chain's expected accumulated ``f * hold`` inside the block
(a Rao-Blackwellised sum).  Blocks never straddle an absorbing or reflecting
node, so visits to those nodes, and hence local time and killing, have the
chain's exact law.  ``max_block=1`` recovers the plain step-by-step walk.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable

import numba
import numpy as np
from numba import njit, prange
from scipy.linalg import solve_banded

from .closed_form import cell_exit_time, reflected_cell_time
from .errors import GridTooCoarse, OutOfDomain, SingularSystem, UnboundedF
from .model import ModelSpec
from .rng import path_key, uniform
from .scale_speed import ScaleSpeed

__all__ = [
    "Boundary",
    "ChainSpec",
    "build_chain",
    "Killing",
    "PathFunctionalSpec",
    "EstimatorResult",
    "ExitSimulation",
    "simulate_exit",
    "estimate_killed_functional",
    "simulate_reflected_elastic",
    "chain_exit_probability",
    "chain_expected_functional",
    "DEFAULT_SHELL_NODES",
    "DEFAULT_MAX_BLOCK",
]

# skip numba's probe of an outdated system TBB
numba.config.THREADING_LAYER_PRIORITY = ["omp", "tbb", "workqueue"]

DEFAULT_SHELL_NODES = 16
DEFAULT_MAX_BLOCK = 1024


class Boundary(enum.Enum):
    ABSORB = "absorb"
    REFLECT = "reflect"


@dataclass(frozen=True, eq=False)
class ChainSpec:
    """Grid, jump probabilities and holding times of the embedded walk.

    With a reflecting right boundary the chain lives on ``[l, ell]`` (the
    limit problem); otherwise on ``[l, r]`` with ``ell`` a grid node.
    ``scale_steps[i] = S(x[i+1]) - S(x[i])``.
    """

    spec: ModelSpec
    grid: np.ndarray
    p_up: np.ndarray
    hold: np.ndarray
    scale_steps: np.ndarray
    boundaries: tuple[Boundary, Boundary]
    h: float
    interface_index: int | None = None

    @property
    def n_nodes(self) -> int:
        return len(self.grid)

    @property
    def reflecting(self) -> bool:
        return self.boundaries[1] is Boundary.REFLECT

    def node_index(self, x: float, tol: float = 1e-9) -> int:
        i = int(np.argmin(np.abs(self.grid - x)))
        if abs(self.grid[i] - x) > tol * max(1.0, abs(x)):
            raise OutOfDomain(f"x0={x} is not a grid node (nearest {self.grid[i]})")
        return i


def _uniform_side(lo: float, hi: float, step: float, min_cells: int) -> np.ndarray:
    n = max(min_cells, math.ceil((hi - lo) / step - 1e-9))
    return np.linspace(lo, hi, n + 1)


def build_chain(
    spec: ModelSpec,
    h: float,
    boundaries: tuple[Boundary, Boundary] = (Boundary.ABSORB, Boundary.ABSORB),
    shell_nodes: int = DEFAULT_SHELL_NODES,
) -> ChainSpec:
    """Construct the embedded chain with step at most ``h`` on ``(l, ell)``.

    The shell ``(ell, r)`` is resolved with ``max(shell_nodes, eps/h)``
    uniform cells, so it stays resolved however thin it is.  A reflecting
    right boundary truncates the chain to ``[l, ell]``.
    """
    left_b, right_b = boundaries
    if left_b is not Boundary.ABSORB:
        raise ValueError("only an absorbing left boundary is supported")
    if not (h > 0 and h < (spec.ell - spec.l) / 4):
        raise GridTooCoarse(f"h={h} must satisfy 0 < h < (ell - l)/4 = {(spec.ell - spec.l) / 4}")

    left = _uniform_side(spec.l, spec.ell, h, 4)
    if right_b is Boundary.REFLECT:
        grid = left
        iface = None
    else:
        right = _uniform_side(spec.ell, spec.r, min(h, spec.eps / shell_nodes), shell_nodes)
        grid = np.concatenate([left, right[1:]])
        iface = len(left) - 1
    n = len(grid)
    ss = ScaleSpeed(spec)
    ds = np.array([ss.scale_increment(grid[i], grid[i + 1]) for i in range(n - 1)])

    p_up = np.zeros(n)
    p_up[1:-1] = ds[:-1] / (ds[:-1] + ds[1:])
    hold = np.zeros(n)
    for i in range(1, n - 1):
        hold[i] = cell_exit_time(spec, grid[i - 1], grid[i + 1], grid[i])
    if right_b is Boundary.REFLECT:
        p_up[-1] = 0.0
        hold[-1] = reflected_cell_time(spec, grid[-2], grid[-1])
    return ChainSpec(spec, grid, p_up, hold, ds, (left_b, right_b), float(grid[1] - grid[0]), iface)


# --------------------------------------------------------------------------
# exact linear-system solutions of the chain

def _solve_tridiag(lower, diag, upper, rhs):
    n = len(diag)
    ab = np.zeros((3, n))
    ab[0, 1:] = upper[:-1]
    ab[1] = diag
    ab[2, :-1] = lower[1:]
    try:
        return solve_banded((1, 1), ab, rhs)
    except np.linalg.LinAlgError as exc:
        raise SingularSystem(str(exc)) from None


def chain_exit_probability(chain: ChainSpec) -> np.ndarray:
    """Probability of absorption at the right end, from every node."""
    if chain.reflecting:
        raise ValueError("exit probability needs two absorbing ends")
    n = chain.n_nodes
    lower, diag, upper, rhs = np.zeros(n), np.ones(n), np.zeros(n), np.zeros(n)
    lower[1:-1] = -(1 - chain.p_up[1:-1])
    upper[1:-1] = -chain.p_up[1:-1]
    rhs[-1] = 1.0
    return _solve_tridiag(lower, diag, upper, rhs)


def chain_expected_functional(chain: ChainSpec, weights: np.ndarray | None = None,
                              G: float = 0.0) -> np.ndarray:
    """Expected accumulated ``weights`` until absorption (or killing), per start node.

    ``weights`` defaults to the holding times, giving the expected absorption
    time.  On a reflecting chain each visit to the right end survives with
    probability ``exp(-G h)`` before its weight is credited.
    """
    w = chain.hold if weights is None else np.asarray(weights, dtype=float)
    n = chain.n_nodes
    lower, diag, upper, rhs = np.zeros(n), np.ones(n), np.zeros(n), np.zeros(n)
    lower[1:-1] = -(1 - chain.p_up[1:-1])
    upper[1:-1] = -chain.p_up[1:-1]
    rhs[1:-1] = w[1:-1]
    if chain.reflecting:
        s = _survival(G, chain.h)
        lower[-1] = -s
        rhs[-1] = s * w[-1]
    return _solve_tridiag(lower, diag, upper, rhs)


def _survival(G: float, dL: float) -> float:
    if G < 0:
        raise ValueError(f"elastic rate must be >= 0, got {G}")
    return 0.0 if math.isinf(G) else math.exp(-G * dL)


# --------------------------------------------------------------------------
# dyadic block tables

def _block_tables(chain: ChainSpec, weights: np.ndarray, max_block: int):
    n = chain.n_nodes
    N = n - 1
    reach = np.minimum(np.arange(n), N - np.arange(n))
    reach[0] = reach[N] = 0
    cap = min(max_block, int(reach.max()))
    n_levels = max(1, int(math.floor(math.log2(cap))) + 1) if cap >= 1 else 1
    level = np.zeros(n, dtype=np.int64)
    inner = reach >= 1
    level[inner] = np.floor(np.log2(np.minimum(reach[inner], cap))).astype(np.int64)

    ds = chain.scale_steps
    T = np.concatenate([[0.0], np.cumsum(ds)])
    c = np.zeros(n)
    c[1:-1] = ds[:-1] * ds[1:] / (ds[:-1] + ds[1:])

    P = np.zeros((n_levels, n))
    W = np.zeros((n_levels, n))
    P[0, 1:N] = chain.p_up[1:N]
    W[0, 1:N] = weights[1:N]
    for lev in range(1, n_levels):
        k = 1 << lev
        centres = np.nonzero(reach >= k)[0]
        if centres.size == 0:
            continue
        a, b = centres - k, centres + k
        span = T[b] - T[a]
        P[lev, centres] = (T[centres] - T[a]) / span
        offsets = np.arange(-k + 1, k)
        j = centres[:, None] + offsets[None, :]
        up = offsets[None, :] >= 0
        green = np.where(
            up,
            (T[centres] - T[a])[:, None] * (T[b][:, None] - T[j]),
            (T[b] - T[centres])[:, None] * (T[j] - T[a][:, None]),
        ) / (c[j] * span[:, None])
        W[lev, centres] = np.sum(green * weights[j], axis=1)
    return level, P, W


@njit(parallel=True, cache=True)
def _walk(start, n_paths, seed, level, P, W, reflect, survive, w_right, totals, exits):
    N = level.shape[0] - 1
    for p in prange(n_paths):
        key = path_key(seed, p)
        ctr = 0
        i = start
        total = 0.0
        code = 0
        while True:
            if i == 0:
                code = 0
                break
            if i == N:
                if not reflect:
                    code = 1
                    break
                if survive < 1.0:
                    u = uniform(key, ctr)
                    ctr += 1
                    if u >= survive:
                        code = 2
                        break
                total += w_right
                i = N - 1
                continue
            lev = level[i]
            total += W[lev, i]
            u = uniform(key, ctr)
            ctr += 1
            if u < P[lev, i]:
                i += 1 << lev
            else:
                i -= 1 << lev
        totals[p] = total
        exits[p] = code


@dataclass(frozen=True)
class EstimatorResult:
    mean: float
    std_error: float
    n_paths: int
    seed: int


@dataclass(frozen=True)
class ExitSimulation:
    """Exit-side frequencies and the total-time estimator of :func:`simulate_exit`."""

    freq_left: float
    freq_right: float
    time: EstimatorResult

    @property
    def right_se(self) -> float:
        p = self.freq_right
        return math.sqrt(max(p * (1 - p), 0.0) / self.time.n_paths)


def _summarise(values: np.ndarray, seed: int) -> EstimatorResult:
    n = len(values)
    mean = math.fsum(values) / n
    if n > 1:
        var = math.fsum((values - mean) ** 2) / (n - 1)
        se = math.sqrt(var / n)
    else:
        se = 0.0
    return EstimatorResult(mean, se, n, seed)


def _run(chain: ChainSpec, x0: float, weights: np.ndarray, n_paths: int, seed: int,
         G: float, max_block: int):
    if n_paths < 1:
        raise ValueError("n_paths must be >= 1")
    if max_block < 1:
        raise ValueError("max_block must be >= 1")
    start = chain.node_index(x0)
    level, P, W = _block_tables(chain, weights, max_block)
    totals = np.empty(n_paths)
    exits = np.empty(n_paths, dtype=np.int8)
    seed_u = np.uint64(int(seed) % 2**64)
    survive = _survival(G, chain.h) if chain.reflecting else 1.0
    _walk(start, n_paths, seed_u, level, P, W, chain.reflecting, survive,
          float(weights[-1]), totals, exits)
    return totals, exits


def simulate_exit(chain: ChainSpec, x0: float, n_paths: int, seed: int,
                  max_block: int = DEFAULT_MAX_BLOCK) -> ExitSimulation:
    """Run paths to absorption; estimate the exit probability at ``r`` and the mean exit time."""
    if chain.reflecting:
        raise ValueError("simulate_exit needs two absorbing ends")
    totals, exits = _run(chain, x0, chain.hold, n_paths, seed, 0.0, max_block)
    right = int(np.count_nonzero(exits == 1))
    return ExitSimulation((n_paths - right) / n_paths, right / n_paths, _summarise(totals, seed))


class Killing(enum.Enum):
    NONE = "none"
    ELASTIC = "elastic"
    ABSORBING_SHELL = "absorbing_shell"


@dataclass(frozen=True)
class PathFunctionalSpec:
    """Integrand ``f`` and killing mechanism of an additive path functional.

    ``ABSORBING_SHELL`` kills on leaving ``(l, r)``; ``ELASTIC`` kills at
    rate ``G`` per unit local time at ``ell`` (``G = inf`` is absorption at
    ``ell``); ``NONE`` is pure reflection at ``ell`` on a reflecting chain.
    """

    f: Callable[[float], float]
    killing: Killing = Killing.ABSORBING_SHELL
    G: float | None = None

    def __post_init__(self):
        if self.killing is Killing.ELASTIC and (self.G is None or self.G < 0):
            raise ValueError(f"elastic killing needs G >= 0, got {self.G}")

    @property
    def rate(self) -> float:
        return self.G if self.killing is Killing.ELASTIC else 0.0


def node_weights(chain: ChainSpec, f: Callable[[float], float]) -> np.ndarray:
    """``f(x_i) * hold[i]`` on the grid (cell-constant approximation of ``f``)."""
    fv = np.array([float(f(x)) for x in chain.grid])
    if not np.all(np.isfinite(fv)):
        raise UnboundedF("f is not finite on every grid node")
    return fv * chain.hold


def estimate_killed_functional(chain: ChainSpec, x0: float, fspec: PathFunctionalSpec,
                               n_paths: int, seed: int,
                               max_block: int = DEFAULT_MAX_BLOCK) -> EstimatorResult:
    """Estimate ``E_x0[ int_0^zeta f(X_t) dt ]`` with ``zeta`` the killing time."""
    if fspec.killing is Killing.ABSORBING_SHELL and chain.reflecting:
        raise ValueError("absorbing-shell functional needs a chain on [l, r]")
    if fspec.killing is Killing.ELASTIC and not chain.reflecting:
        raise ValueError("elastic functional needs a chain reflecting at ell")
    weights = node_weights(chain, fspec.f)
    totals, _ = _run(chain, x0, weights, n_paths, seed, fspec.rate, max_block)
    return _summarise(totals, seed)


def simulate_reflected_elastic(spec: ModelSpec, G: float, f: Callable[[float], float], x0: float,
                               n_paths: int, seed: int, h: float,
                               max_block: int = DEFAULT_MAX_BLOCK) -> EstimatorResult:
    """Walk on ``(l, ell]``, reflecting at ``ell`` and killed elastically there.

    Each visit to ``ell`` adds ``h`` of local time and survives with
    probability ``exp(-G h)``.  ``G = 0`` is pure reflection (Neumann),
    ``G = inf`` absorption at ``ell`` (Dirichlet).
    """
    chain = build_chain(spec, h, (Boundary.ABSORB, Boundary.REFLECT))
    if not (spec.l < x0 <= spec.ell):
        raise OutOfDomain(f"x0={x0} outside (l, ell] = ({spec.l}, {spec.ell}]")
    fspec = PathFunctionalSpec(f, Killing.ELASTIC, G)
    return estimate_killed_functional(chain, x0, fspec, n_paths, seed, max_block)
