"""Streaming moments with exact pairwise merging.

Accumulators hold ``(n, mean, M2)`` per column and merge with Chan's update,
so chunk results can be combined in any grouping with only rounding-level
differences.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Moments:
    """Count, mean and sum of squared deviations for each column."""

    n: int
    mean: np.ndarray
    m2: np.ndarray

    @classmethod
    def empty(cls, shape=()) -> "Moments":
        return cls(0, np.zeros(shape), np.zeros(shape))

    @classmethod
    def from_samples(cls, y) -> "Moments":
        y = np.asarray(y, dtype=float)
        n = y.shape[0]
        if n == 0:
            return cls.empty(y.shape[1:])
        mean = y.mean(axis=0)
        return cls(n, mean, ((y - mean) ** 2).sum(axis=0))

    @classmethod
    def from_sparse(cls, n: int, base, deviations, axis: int = 0) -> "Moments":
        """Moments of ``n`` samples equal to ``base`` except for a few of them.

        ``deviations`` holds ``y - base`` for the samples that differ, stacked
        along ``axis``; all other samples contribute exactly zero deviation.
        """
        base = np.asarray(base, dtype=float)
        dev = np.asarray(deviations, dtype=float)
        if n == 0:
            return cls.empty(base.shape)
        if axis:
            dev = np.moveaxis(dev, axis, -1)
            s1 = dev.sum(axis=-1)
            s2 = np.einsum("...i,...i->...", dev, dev)
        else:
            s1 = dev.sum(axis=0)
            s2 = np.einsum("i...,i...->...", dev, dev)
        m2 = np.maximum(s2 - s1 * s1 / n, 0.0)
        return cls(n, base + s1 / n, m2)

    def merge(self, other: "Moments") -> "Moments":
        if other.n == 0:
            return self
        if self.n == 0:
            return other
        n = self.n + other.n
        delta = other.mean - self.mean
        mean = self.mean + delta * (other.n / n)
        m2 = self.m2 + other.m2 + delta * delta * (self.n * other.n / n)
        return Moments(n, mean, m2)

    @property
    def variance(self) -> np.ndarray:
        """Unbiased sample variance."""
        if self.n < 2:
            return np.zeros_like(self.mean)
        return self.m2 / (self.n - 1)

    @property
    def sd(self) -> np.ndarray:
        return np.sqrt(self.variance)

    @property
    def se(self) -> np.ndarray:
        return self.sd / math.sqrt(max(self.n, 1))
