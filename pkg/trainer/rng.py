"""
Seeded pseudorandom stream shared by data generation, initialization and shuffling.

The generator is xorshift64* (shifts 12, 25, 27; multiplier
0x2545F4914F6CDD1D). The seed is expanded with one splitmix64 step so
that any 64-bit seed, including 0, gives a non-zero state. Uniform
doubles take the top 53 bits of each output; normal deviates use the
cosine branch of Box-Muller on two consecutive uniforms.
"""
import math

import numpy as np

MASK64 = (1 << 64) - 1
XORSHIFT_MULTIPLIER = 0x2545F4914F6CDD1D


def splitmix64(seed: int) -> int:
    z = (seed + 0x9E3779B97F4A7C15) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


class XorShift64Star:

    def __init__(self, seed: int):
        if not 0 <= seed <= MASK64:
            raise ValueError(f'seed must be an unsigned 64-bit integer, got {seed}')
        self.state = splitmix64(seed) or 1

    def next_u64(self) -> int:
        x = self.state
        x ^= x >> 12
        x ^= (x << 25) & MASK64
        x ^= x >> 27
        self.state = x
        return (x * XORSHIFT_MULTIPLIER) & MASK64

    def uniform(self) -> float:
        """Double in [0, 1)."""
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def normal(self) -> float:
        u1 = 1.0 - self.uniform()
        u2 = self.uniform()
        return math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)

    def normal_array(self, shape, scale: float = 1.0) -> np.ndarray:
        count = math.prod(shape)
        return np.array([self.normal() for _ in range(count)], dtype=np.float64).reshape(shape) * scale

    def laplace(self) -> float:
        """Laplace(0, 1) by inverting the CDF at a uniform drawn from the open interval."""
        u = ((self.next_u64() >> 12) + 0.5) / (1 << 52)
        return math.log(2.0 * u) if u < 0.5 else -math.log(2.0 * (1.0 - u))

    def laplace_array(self, shape, scale: float = 1.0) -> np.ndarray:
        count = math.prod(shape)
        return np.array([self.laplace() for _ in range(count)], dtype=np.float64).reshape(shape) * scale

    def permutation(self, n: int) -> np.ndarray:
        """Fisher-Yates shuffle of range(n)."""
        order = list(range(n))
        for i in range(n - 1, 0, -1):
            j = int(self.uniform() * (i + 1))
            order[i], order[j] = order[j], order[i]
        return np.array(order, dtype=np.intp)
