"""Online Gaussian kernel density estimate of the context distribution."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from kdebo.kernels import gauss_kde

H_MIN = 1e-3


def rot_bandwidth(sd, t: int) -> np.ndarray:
    """``(4 / (D + 2))^(1 / (D + 4)) * sd * t^(-1 / (D + 4))`` per dimension,
    floored at ``H_MIN``."""
    sd = np.atleast_1d(np.asarray(sd, dtype=float))
    d = sd.shape[0]
    h = (4.0 / (d + 2.0)) ** (1.0 / (d + 4.0)) * sd * float(t) ** (-1.0 / (d + 4.0))
    return np.maximum(h, H_MIN)


def rule_of_thumb_bandwidth(samples) -> np.ndarray:
    """Rule-of-thumb bandwidth from the sample standard deviation.

    Dimensions without spread (including the single-sample case) get
    ``H_MIN``.
    """
    S = np.atleast_2d(np.asarray(samples, dtype=float))
    t, d = S.shape
    if t < 1:
        raise ValueError("bandwidth needs at least one sample")
    sd = S.std(axis=0, ddof=1) if t > 1 else np.zeros(d)
    return rot_bandwidth(sd, t)


@dataclass(frozen=True)
class KdeModel:
    samples: np.ndarray
    bandwidth: np.ndarray
    clip_box: tuple

    @classmethod
    def fit(cls, samples, clip_box=None):
        S = np.atleast_2d(np.asarray(samples, dtype=float))
        if len(S) == 0:
            raise ValueError("KDE needs at least one sample")
        if clip_box is None:
            clip_box = (np.zeros(S.shape[1]), np.ones(S.shape[1]))
        return cls(S, rule_of_thumb_bandwidth(S), clip_box)

    @property
    def dim(self):
        return self.samples.shape[1]

    def density(self, C):
        C = np.atleast_2d(np.asarray(C, dtype=float))
        if C.shape[1] != self.dim and self.dim == 1:
            C = C.reshape(-1, 1)
        return gauss_kde(np.ascontiguousarray(C), self.samples, self.bandwidth)

    def sample(self, m: int, stream) -> np.ndarray:
        idx = stream.integers(0, len(self.samples), size=m)
        noise = stream.normal(size=(m, self.dim))
        return np.clip(self.samples[idx] + noise * self.bandwidth, *self.clip_box)


def density(model: KdeModel, c) -> float:
    val = model.density(np.reshape(np.asarray(c, dtype=float), (1, -1)))
    return float(val[0])


def sample_kde(model: KdeModel, m: int, stream) -> np.ndarray:
    return model.sample(m, stream)
