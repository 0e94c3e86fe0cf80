"""Integer nested lattice pairs: fine lattice Z^N, coarse lattice qZ^N.

The fundamental region of the coarse lattice is the centered half-open cube
``(-q/2, q/2]^N``; the codebook is the ``q**N`` integer points inside it and
forms an Abelian group under addition followed by reduction.  Exact
computations (carries, leakage) run in integer arithmetic; rational dithers
live on a ``1/D`` refinement grid so every quantity stays an integer in
units of ``1/D``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np


class PointNotInCodebook(ValueError):
    pass


class StateSpaceTooLarge(ValueError):
    pass


DEFAULT_MAX_STATES = 10**7


def centered_mod(x, modulus):
    """Reduce ``x`` into ``(-modulus/2, modulus/2]`` elementwise.

    Works for integer arrays (exactly) and float arrays alike.
    """
    r = np.mod(x, modulus)
    return np.where(r > modulus / 2, r - modulus, r)


@dataclass(frozen=True)
class NestedLatticePair:
    N: int
    q: int

    def __post_init__(self):
        if self.N < 1:
            raise ValueError(f"dimension must be at least 1, got {self.N}")
        if self.q < 2:
            raise ValueError(f"nesting ratio must be at least 2, got {self.q}")

    @property
    def size(self) -> int:
        return self.q**self.N

    @property
    def rate(self) -> float:
        """Bits per dimension."""
        return math.log2(self.q)

    @property
    def coordinate_range(self) -> np.ndarray:
        """Integers of the centered region in one coordinate, ascending."""
        lo = -((self.q - 1) // 2)
        return np.arange(lo, lo + self.q)

    @property
    def second_moment(self) -> float:
        """Per-dimension second moment of the coarse fundamental region."""
        return self.q**2 / 12.0

    def codebook(self) -> np.ndarray:
        """All codewords, shape ``(q**N, N)``, in lexicographic order."""
        axis = self.coordinate_range
        grids = np.meshgrid(*([axis] * self.N), indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=-1)

    def mod_coarse(self, x):
        return centered_mod(np.asarray(x), self.q)

    def in_region(self, x) -> np.ndarray:
        x = np.asarray(x)
        return np.all((x > -self.q / 2) & (x <= self.q / 2), axis=-1)

    def canonical(self, t) -> np.ndarray:
        """Centered integer representative of a codeword given in any coset form."""
        t = np.asarray(t)
        if t.shape[-1] != self.N:
            raise PointNotInCodebook(f"expected {self.N} coordinates, got shape {t.shape}")
        if not np.all(np.equal(np.mod(t, 1), 0)):
            raise PointNotInCodebook(f"{t} is not a fine-lattice point")
        return self.mod_coarse(t.astype(np.int64))

    def index(self, t) -> np.ndarray:
        """Integer label in ``[0, q**N)`` of canonical codewords (last axis = N)."""
        digits = np.asarray(t) - self.coordinate_range[0]
        weights = self.q ** np.arange(self.N - 1, -1, -1)
        return digits @ weights

    def nearest_codeword(self, y) -> np.ndarray:
        """Codeword closest to each point of ``y``, distance taken modulo the coarse lattice.

        Rounding to the fine lattice and reducing gives the minimizer; a
        plain Euclidean search inside the cube would misdecode the codeword
        on the cube's boundary whenever noise wraps it to the far face.
        """
        return centered_mod(np.rint(y).astype(np.int64), self.q)

    def nearest_codeword_bruteforce(self, y) -> np.ndarray:
        """Exhaustive counterpart of :meth:`nearest_codeword`, for small codebooks."""
        book = self.codebook()
        y = np.atleast_2d(y)
        diff = centered_mod(y[:, None, :] - book[None, :, :], self.q)
        return book[np.argmin((diff**2).sum(axis=-1), axis=1)]


@dataclass(frozen=True)
class DitheredWord:
    t: np.ndarray
    d: np.ndarray
    x: np.ndarray


def encode(t, d, pair: NestedLatticePair) -> DitheredWord:
    """Dithered codeword ``x = (t + d) mod coarse``."""
    t = pair.canonical(t)
    d = np.asarray(d, dtype=float)
    return DitheredWord(t, d, pair.mod_coarse(t + d))


def decode_with_dither(x, d, pair: NestedLatticePair) -> np.ndarray:
    return pair.mod_coarse(np.rint(np.asarray(x) - np.asarray(d)).astype(np.int64))


@dataclass(frozen=True)
class CarryIndex:
    T: int
    carries: tuple


def carry_reconstruct(points, pair: NestedLatticePair):
    """Carry index of a sum of K codewords.

    Codewords are taken in the ``[0, q)`` representative system (any integer
    input is reduced into it).  Per coordinate the sum splits into its
    residue and ``q`` times a carry in ``[0, K-1]``; the carries are packed
    base K, first coordinate most significant, plus one.

    Returns the index, the true sum, and the sum rebuilt from
    ``(T, sum mod q)``.
    """
    pts = np.mod(np.asarray(points, dtype=np.int64), pair.q)
    K = pts.shape[0]
    if K < 2:
        raise ValueError("carry reconstruction needs at least two points")
    total = pts.sum(axis=0)
    carries = total // pair.q
    T = 1 + int(sum(int(c) * K**e for c, e in zip(carries, range(pair.N - 1, -1, -1))))
    rebuilt = unpack_carry(T, K, pair) * pair.q + np.mod(total, pair.q)
    return CarryIndex(T, tuple(int(c) for c in carries)), total, rebuilt


def unpack_carry(T: int, K: int, pair: NestedLatticePair) -> np.ndarray:
    value, out = T - 1, []
    for _ in range(pair.N):
        value, c = divmod(value, K)
        out.append(c)
    return np.asarray(out[::-1], dtype=np.int64)


def carry_index_batch(points: np.ndarray, q: int, K: int) -> np.ndarray:
    """Vectorized ``T`` for an array of shape ``(..., K, N)`` of ``[0, q)`` points."""
    carries = np.asarray(points).sum(axis=-2) // q
    N = carries.shape[-1]
    return 1 + carries @ (K ** np.arange(N - 1, -1, -1))


# --- exact leakage -----------------------------------------------------------


def entropy_bits(labels: np.ndarray) -> float:
    """Entropy of the empirical distribution of equally likely ``labels`` rows."""
    labels = np.asarray(labels)
    if labels.ndim == 1:
        labels = labels[:, None]
    _, counts = np.unique(labels, axis=0, return_counts=True)
    p = counts / counts.sum()
    return float(-(p * np.log2(p)).sum())


def mutual_information_bits(a: np.ndarray, b: np.ndarray) -> float:
    """I(A;B) in bits for equally likely outcomes ``(a[i], b[i])``."""
    a = np.asarray(a).reshape(len(a), -1)
    b = np.asarray(b).reshape(len(b), -1)
    return entropy_bits(a) + entropy_bits(b) - entropy_bits(np.hstack([a, b]))


def _user_tuples(pair: NestedLatticePair, K: int, max_states: int) -> np.ndarray:
    states = pair.size**K
    if states > max_states:
        raise StateSpaceTooLarge(f"{states} states exceed the limit of {max_states}")
    labels = np.indices((pair.size,) * K).reshape(K, -1).T
    return pair.codebook()[labels]  # shape (states, K, N)


@dataclass(frozen=True)
class LeakageResult:
    leakage_bits: float
    bound_bits: float
    mod_sum_leakage_bits: float
    T_max: int
    states: int

    def to_dict(self) -> dict:
        return {
            "leakage_bits": self.leakage_bits,
            "bound_bits": self.bound_bits,
            "mod_sum_leakage_bits": self.mod_sum_leakage_bits,
            "T_max": self.T_max,
            "states": self.states,
        }


def exact_leakage(pair: NestedLatticePair, K: int, dithers=None, dither_grid: int = 1,
                  max_states: int = DEFAULT_MAX_STATES) -> LeakageResult:
    """Exact I(t_1..t_{K-1}; sum_k x_k) with every t_k uniform on the codebook.

    ``dithers`` has shape ``(K, N)`` and holds integers in units of
    ``1/dither_grid``; it defaults to zero.  The eavesdropper observes the
    unreduced sum of the dithered words.  Also computed: the leakage
    against the reduced sum of the information points, and the largest
    carry index met.
    """
    if K < 2:
        raise ValueError("leakage needs at least two users")
    D = int(dither_grid)
    d = np.zeros((K, pair.N), dtype=np.int64) if dithers is None else np.asarray(dithers, dtype=np.int64)
    if d.shape != (K, pair.N):
        raise ValueError(f"dithers must have shape {(K, pair.N)}, got {d.shape}")
    t = _user_tuples(pair, K, max_states)
    secret = pair.index(t[:, :-1, :])
    x = centered_mod(t * D + d, pair.q * D)  # units of 1/D
    observed = x.sum(axis=1)
    leak = mutual_information_bits(secret, observed)
    mod_sum = pair.mod_coarse(t.sum(axis=1))
    mod_leak = mutual_information_bits(secret, mod_sum)
    T = carry_index_batch(np.mod(t, pair.q), pair.q, K)
    return LeakageResult(leak, pair.N * math.log2(K), mod_leak, int(T.max()), len(t))


def grid_dithers(pair: NestedLatticePair, K: int, dither_grid: int, rng) -> np.ndarray:
    """Random dithers on the ``1/D`` grid inside the fundamental region (units of ``1/D``)."""
    Q = pair.q * dither_grid
    lo = -((Q - 1) // 2)
    return rng.integers(lo, lo + Q, size=(K, pair.N))


# --- wrap probability --------------------------------------------------------


@dataclass(frozen=True)
class WrapEstimate:
    probability: float
    wraps: int
    trials: int
    mu: float


def wrap_probability(pair: NestedLatticePair, interferer_variances, noise_variance: float,
                     trials: int, seed: int) -> WrapEstimate:
    """Monte Carlo frequency of ``(sum U_i + Z) mod coarse != sum U_i + Z``.

    Each ``U_i`` is uniform on a cube with the given per-dimension variance;
    ``Z`` is Gaussian.  ``mu`` is the coarse second moment over the total
    interference-plus-noise power.
    """
    if trials < 1:
        raise ValueError("trials must be positive")
    rng = np.random.default_rng(seed)
    variances = [float(v) for v in interferer_variances]
    total = noise_variance + sum(variances)
    s = np.zeros((trials, pair.N))
    for v in variances:
        half = math.sqrt(3.0 * v)
        s += rng.uniform(-half, half, size=(trials, pair.N))
    if noise_variance > 0:
        s += math.sqrt(noise_variance) * rng.standard_normal((trials, pair.N))
    wrapped = ~pair.in_region(s)
    mu = math.inf if total == 0 else pair.second_moment / total
    wraps = int(wrapped.sum())
    return WrapEstimate(wraps / trials, wraps, trials, mu)


def all_tuples(q: int, N: int, K: int):
    """Every K-tuple of ``[0, q)^N`` points (generator, for brute-force checks)."""
    cells = list(itertools.product(range(q), repeat=N))
    return itertools.product(cells, repeat=K)
