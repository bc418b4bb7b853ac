"""Sampling and coarse-graining of the multiple Stratonovich integrals.

Each step carries the increments dW_i, the antisymmetric chordal areas
L_ij = J_ij - J_ji, and the time-area integrals I_i = J_i0 (origin shifted
to the step start).  Everything else a stepper needs is derived from these:

    J_ij = (dW_i dW_j + L_ij)/2   (i != j)
    J_ii = dW_i^2 / 2
    J_i0 = I_i,   J_0i = h dW_i - I_i,   J_0 = h

The two-channel area is sampled conditionally on the increments via a
truncated trigonometric (Karhunen-Loeve) expansion of the Brownian bridge
plus an independent Gaussian tail term matched to the exact residual
variance, so the conditional second moment of L_12 given (dW_1, dW_2) is
exact.  The time-area I_i is conditionally exact: I_i | dW_i is
Normal(h dW_i / 2, h^3 / 12).

Generators are expected to be counter-based (Philox) and keyed per
(run seed, path index); see :func:`path_rng`.  For a fixed (n_steps, d)
the draw order is fixed, so a path's noise never depends on how other
paths are scheduled.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

# Number of Karhunen-Loeve terms kept in the area expansion.  The Gaussian
# tail top-up makes the conditional variance exact for any p; 10 keeps the
# non-Gaussian part of the conditional law dominant.
KL_TERMS = 10

_MAGIC = b"LSDNOIS1"


def path_rng(seed: int, path: int) -> np.random.Generator:
    """Counter-based generator keyed on (run seed, path index)."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(path),))
    return np.random.Generator(np.random.Philox(ss))


@dataclass
class StepNoise:
    """One step's multiple Stratonovich integrals.

    Fields broadcast over leading axes (a batch of paths shares one h):
    ``dW`` has shape (..., d), ``L`` shape (..., d, d) antisymmetric with
    zero diagonal, ``I`` shape (..., d).
    """

    h: float
    dW: np.ndarray
    L: np.ndarray
    I: np.ndarray

    @property
    def d(self) -> int:
        return self.dW.shape[-1]

    @classmethod
    def zero(cls, d: int, h: float = 0.0) -> "StepNoise":
        return cls(h, np.zeros(d), np.zeros((d, d)), np.zeros(d))


def _chain_arrays(h_a, dWa, La, Ia, h_b, dWb, Lb, Ib):
    # Shared by chain() and NoiseSeq.coarsen() so both produce bitwise
    # identical results.
    dW = dWa + dWb
    cross = dWa[..., :, None] * dWb[..., None, :] - dWa[..., None, :] * dWb[..., :, None]
    L = (La + Lb) + cross
    I = (Ia + Ib) + h_b * dWa
    return h_a + h_b, dW, L, I


def chain(a: StepNoise, b: StepNoise) -> StepNoise:
    """Combine the integrals of two adjacent steps into one step."""
    if a.d != b.d:
        raise ValueError(f"channel count mismatch: {a.d} != {b.d}")
    h, dW, L, I = _chain_arrays(a.h, a.dW, a.L, a.I, b.h, b.dW, b.L, b.I)
    return StepNoise(h, dW, L, I)


def _kl_scales(p: int) -> np.ndarray:
    # Std dev of the bridge Fourier coefficients on the unit interval.
    k = np.arange(1, p + 1, dtype=float)
    return 1.0 / (np.sqrt(2.0) * np.pi * k)


def _kl_tail(p: int) -> float:
    # sum_{k>p} 1/k^2, the series residual feeding the tail variance.
    k = np.arange(1, p + 1, dtype=float)
    return np.pi**2 / 6.0 - float(np.sum(1.0 / k**2))


def sample_steps(rng: np.random.Generator, h: float, d: int, n: int) -> "NoiseSeq":
    """Sample ``n`` independent steps of length ``h`` with ``d`` channels.

    Draw order is fixed for given (n, d): increments, then (d = 2 only)
    bridge coefficients and area tail, then the time-area normals.
    """
    if h <= 0.0:
        raise ValueError("step length must be positive")
    if d not in (1, 2):
        raise ValueError("channel count must be 1 or 2")
    root_h = np.sqrt(h)
    z = rng.standard_normal((n, d))
    dW = root_h * z
    L = np.zeros((n, d, d))
    if d == 2:
        p = KL_TERMS
        scales = _kl_scales(p)
        a = rng.standard_normal((n, 2, p)) * scales
        b = rng.standard_normal((n, 2, p)) * scales
        tail = rng.standard_normal(n)
        series = (
            2.0 * (z[:, 1] * np.sum(a[:, 0], axis=-1) - z[:, 0] * np.sum(a[:, 1], axis=-1))
        )
        k = np.arange(1, p + 1, dtype=float)
        area = 2.0 * np.pi * np.sum(k * (a[:, 0] * b[:, 1] - b[:, 0] * a[:, 1]), axis=-1)
        tail_var = (2.0 / np.pi**2) * (1.0 + z[:, 0] ** 2 + z[:, 1] ** 2) * _kl_tail(p)
        l12 = h * (-series + area + np.sqrt(tail_var) * tail)
        L[:, 0, 1] = l12
        L[:, 1, 0] = -l12
    u = rng.standard_normal((n, d))
    I = 0.5 * h * dW + np.sqrt(h**3 / 12.0) * u
    return NoiseSeq(h, dW, L, I)


def sample_step(rng: np.random.Generator, h: float, d: int) -> StepNoise:
    """Sample a single step's integrals."""
    return sample_steps(rng, h, d, 1).step(0)


@dataclass
class NoiseSeq:
    """A contiguous sequence of equal-length steps as stacked arrays.

    Array layout is (n_steps, ..., d); any extra axes are path batches.
    """

    h: float
    dW: np.ndarray
    L: np.ndarray
    I: np.ndarray

    def __len__(self) -> int:
        return self.dW.shape[0]

    @property
    def d(self) -> int:
        return self.dW.shape[-1]

    def step(self, k: int) -> StepNoise:
        return StepNoise(self.h, self.dW[k], self.L[k], self.I[k])

    def steps(self):
        for k in range(len(self)):
            yield self.step(k)

    def coarsen(self) -> "NoiseSeq":
        """Merge adjacent step pairs; length must be even."""
        if len(self) % 2 != 0:
            raise ValueError("cannot coarsen an odd-length sequence")
        h, dW, L, I = _chain_arrays(
            self.h, self.dW[0::2], self.L[0::2], self.I[0::2],
            self.h, self.dW[1::2], self.L[1::2], self.I[1::2],
        )
        return NoiseSeq(h, dW, L, I)

    def total(self) -> StepNoise:
        """Chain the whole sequence into a single step."""
        seq = self
        while len(seq) > 1:
            if len(seq) % 2 == 1:
                head, rest = seq.step(0), NoiseSeq(seq.h, seq.dW[1:], seq.L[1:], seq.I[1:])
                folded = rest.total()
                return chain(head, folded)
            seq = seq.coarsen()
        return seq.step(0)


@dataclass
class PathHierarchy:
    """One driving path presented at dyadic resolutions.

    ``levels[l]`` holds n0 * 2^l steps of size T/(n0 * 2^l) covering [0, T].
    Coarse levels are derived from the finest by chaining, so every
    resolution sees the same underlying path; ``levels[l].step(k)`` equals
    chain() of its two children bitwise.
    """

    T: float
    n0: int
    d: int
    levels: list

    @property
    def depth(self) -> int:
        return len(self.levels)

    @classmethod
    def from_finest(cls, T: float, n0: int, depth: int, finest: NoiseSeq) -> "PathHierarchy":
        levels = [finest]
        for _ in range(depth - 1):
            levels.append(levels[-1].coarsen())
        levels.reverse()
        return cls(T, n0, finest.d, levels)


def build_hierarchy(
    rng: np.random.Generator, T: float, n_steps: int, levels: int, d: int
) -> PathHierarchy:
    """Sample the finest level and fill coarser levels by chaining."""
    if n_steps < 1 or levels < 1:
        raise ValueError("n_steps and levels must be >= 1")
    n_fine = n_steps * 2 ** (levels - 1)
    if n_fine > 2**26:
        raise ValueError(f"hierarchy too large: {n_fine} fine steps")
    finest = sample_steps(rng, T / n_fine, d, n_fine)
    return PathHierarchy.from_finest(T, n_steps, levels, finest)


def stack_seqs(seqs: list) -> NoiseSeq:
    """Stack per-path sequences into one batched sequence (axis 1)."""
    return NoiseSeq(
        seqs[0].h,
        np.stack([s.dW for s in seqs], axis=1),
        np.stack([s.L for s in seqs], axis=1),
        np.stack([s.I for s in seqs], axis=1),
    )


def stack_hierarchies(hierarchies: list) -> PathHierarchy:
    """Stack single-path hierarchies into one batched hierarchy (axis 1)."""
    first = hierarchies[0]
    levels = [
        stack_seqs([h.levels[l] for h in hierarchies]) for l in range(first.depth)
    ]
    return PathHierarchy(first.T, first.n0, first.d, levels)


def dump_hierarchy(hier: PathHierarchy, path: str, seed: int) -> None:
    """Write a single-path hierarchy as little-endian float64 binary."""
    if hier.levels[0].dW.ndim != 2:
        raise ValueError("only single-path hierarchies can be dumped")
    with open(path, "wb") as f:
        f.write(_MAGIC)
        f.write(struct.pack("<dQQQQ", hier.T, hier.n0, hier.depth, hier.d, seed))
        for seq in hier.levels:
            for arr in (seq.dW, seq.L, seq.I):
                f.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_hierarchy(path: str):
    """Read a hierarchy written by :func:`dump_hierarchy`.

    Returns (hierarchy, seed).
    """
    with open(path, "rb") as f:
        magic = f.read(len(_MAGIC))
        if magic != _MAGIC:
            raise ValueError(f"{path}: not a noise hierarchy file")
        T, n0, depth, d, seed = struct.unpack("<dQQQQ", f.read(8 * 5))
        levels = []
        for l in range(depth):
            n = n0 * 2**l
            h = T / n
            dW = np.frombuffer(f.read(8 * n * d), dtype="<f8").reshape(n, d).astype(float)
            L = np.frombuffer(f.read(8 * n * d * d), dtype="<f8").reshape(n, d, d).astype(float)
            I = np.frombuffer(f.read(8 * n * d), dtype="<f8").reshape(n, d).astype(float)
            levels.append(NoiseSeq(h, dW, L, I))
    return PathHierarchy(T, n0, d, levels), seed
