import numpy as np

MASK64 = (1 << 64) - 1


def splitmix64(x: int) -> int:
    """The splitmix64 finaliser, a bijection on 64-bit integers."""
    z = (x + 0x9E3779B97F4A7C15) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def derive_seed(seed: int, *labels: int) -> int:
    for label in labels:
        seed = splitmix64((seed ^ label) & MASK64)

    return seed


def spawn_generator(seed: int, index: int = 0) -> np.random.Generator:
    """Independent stream number `index`: splitmix64(seed XOR index) seeds a PCG64 generator."""
    return np.random.Generator(np.random.PCG64(splitmix64((seed ^ index) & MASK64)))
