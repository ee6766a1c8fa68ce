"""Seeded, thread-count-independent Monte Carlo over categorical outcomes.

Trials are cut into fixed-size blocks; block ``b`` draws from a Philox stream
keyed by ``(seed, b)``. Results depend only on ``(seed, trials)``.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from math import sqrt

import numpy as np

BLOCK = 8192


def stream(seed: int, index: int) -> np.random.Generator:
    """Independent counter-based stream for block/trial ``index``."""
    ss = np.random.SeedSequence(entropy=int(seed) & (2**64 - 1), spawn_key=(int(index),))
    return np.random.Generator(np.random.Philox(ss))


def _block_sizes(trials: int, block: int):
    full, rem = divmod(trials, block)
    return [block] * full + ([rem] if rem else [])


def draw_counts(probs, trials: int, seed: int, threads: int = 1, block: int = BLOCK) -> np.ndarray:
    """Tally ``trials`` independent draws from the categorical ``probs``."""
    p = np.asarray(probs, dtype=float)
    p = np.clip(p, 0.0, None)
    p = p / p.sum()
    sizes = _block_sizes(int(trials), block)

    def run(b):
        idx = stream(seed, b).choice(len(p), size=sizes[b], p=p)
        return np.bincount(idx, minlength=len(p))

    if threads > 1 and len(sizes) > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            parts = list(ex.map(run, range(len(sizes))))
    else:
        parts = [run(b) for b in range(len(sizes))]
    total = np.zeros(len(p), dtype=np.int64)
    for part in parts:
        total += part
    return total


@dataclass(frozen=True)
class BinomialEstimate:
    trials: int
    successes: int

    @property
    def frequency(self) -> float:
        return self.successes / self.trials if self.trials else float("nan")

    @property
    def stderr(self) -> float:
        f = self.frequency
        return sqrt(f * (1 - f) / self.trials) if self.trials else float("nan")

    def sigma_for(self, p: float) -> float:
        """Binomial standard deviation of the frequency under true rate ``p``."""
        return sqrt(p * (1 - p) / self.trials)

    def within(self, p: float, nsigma: float = 3.0) -> bool:
        s = self.sigma_for(p)
        if s == 0:
            return self.frequency == p
        return abs(self.frequency - p) <= nsigma * s

    def as_dict(self) -> dict:
        return {"trials": self.trials, "successes": self.successes,
                "frequency": self.frequency, "stderr": self.stderr}
