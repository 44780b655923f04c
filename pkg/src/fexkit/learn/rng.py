"""SplitMix64 generator used for every random draw in training.

Draw order is part of the reproducibility contract:

* ``below(n)`` consumes exactly one 64-bit output: ``(u * n) >> 64``.
* ``shuffle`` is Fisher-Yates from the last index down, one ``below`` per step.
* ``spawn(k)`` draws ``k`` outputs and uses each as the seed of a child.
"""

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15


class SplitMix64:
    __slots__ = ("state",)

    def __init__(self, seed: int):
        self.state = int(seed) & MASK64

    def next_u64(self) -> int:
        self.state = (self.state + GOLDEN_GAMMA) & MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
        return z ^ (z >> 31)

    def below(self, n: int) -> int:
        return (self.next_u64() * n) >> 64

    def uniform(self) -> float:
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def shuffle(self, items: list) -> list:
        for i in range(len(items) - 1, 0, -1):
            j = self.below(i + 1)
            items[i], items[j] = items[j], items[i]
        return items

    def spawn(self, k: int) -> list["SplitMix64"]:
        return [SplitMix64(self.next_u64()) for _ in range(k)]
