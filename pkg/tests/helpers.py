"""Small synthetic problems shared by the loop, metrics and CLI tests."""

import numpy as np

from kdebo.problems import ClippedNormal, Problem, Uniform, register_problem


def concave_1d(noise=0.0):
    return Problem("concave-1d", 1, 1, lambda X, C: 1.0 - (X[:, 0] - 0.3) ** 2,
                   Uniform(1), noise)


def constant(noise=0.0):
    return Problem("constant", 1, 1, lambda X, C: np.full(len(X), 2.5), Uniform(1), noise)


def identity_context(noise=0.0):
    return Problem("identity-context", 1, 1, lambda X, C: C[:, 0], Uniform(1), noise)


def separable(noise=0.0):
    return Problem("separable", 1, 1, lambda X, C: -(X[:, 0] - 0.3) ** 2 + C[:, 0],
                   ClippedNormal((0.5,), (0.15,)), noise)


def decision_only(noise=0.0):
    return Problem("decision-only", 1, 1, lambda X, C: X[:, 0], Uniform(1), noise)


for _f in (concave_1d, constant, identity_context, separable, decision_only):
    register_problem(_f().name, _f)
