"""Multivariate monomial bases over a contiguous range of total orders.

Monomials are enumerated in graded order: total order ascending, and within
one order lexicographically with the first variable's exponent descending.
For two variables and orders 2..3 that gives

    x1^2, x1 x2, x2^2, x1^3, x1^2 x2, x1 x2^2, x2^3.

Evaluation works for real and complex points alike.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import comb

import numpy as np

from .errors import InputError


def _exponents_of_order(num_vars: int, order: int):
    if num_vars == 1:
        yield (order,)
        return
    for first in range(order, -1, -1):
        for rest in _exponents_of_order(num_vars - 1, order - first):
            yield (first,) + rest


def term_count(num_vars: int, min_order: int, max_order: int) -> int:
    """Number of monomials in ``num_vars`` variables of orders min..max."""
    return sum(comb(num_vars + k - 1, k) for k in range(min_order, max_order + 1))


@dataclass(frozen=True)
class MultiIndexBasis:
    """Monomial basis x^k for all exponent tuples k with min <= |k| <= max."""

    num_vars: int
    min_order: int
    max_order: int
    exponents: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.num_vars < 1:
            raise InputError("num_vars must be >= 1")
        if not 0 <= self.min_order <= self.max_order:
            raise InputError("need 0 <= min_order <= max_order")
        exps = [
            e
            for order in range(self.min_order, self.max_order + 1)
            for e in _exponents_of_order(self.num_vars, order)
        ]
        arr = np.asarray(exps, dtype=int)
        arr.flags.writeable = False
        object.__setattr__(self, "exponents", arr)

    def __len__(self):
        return self.exponents.shape[0]

    def index_of(self, exponent) -> int:
        """Position of an exponent tuple in the basis ordering."""
        key = tuple(int(e) for e in exponent)
        for i, row in enumerate(self.exponents):
            if tuple(row) == key:
                return i
        raise InputError(f"exponent {key} is not in this basis")

    def _power_tables(self, points: np.ndarray):
        # tables[i][p] = points[:, i] ** p, built by cumulative products
        n = points.shape[0]
        top = int(self.exponents.max(initial=0))
        tables = []
        for i in range(self.num_vars):
            tbl = np.ones((top + 1, n), dtype=points.dtype)
            for p in range(1, top + 1):
                tbl[p] = tbl[p - 1] * points[:, i]
            tables.append(tbl)
        return tables

    def _as_points(self, points) -> tuple:
        pts = np.asarray(points)
        single = pts.ndim == 1
        if single:
            pts = pts[None, :]
        if pts.ndim != 2 or pts.shape[1] != self.num_vars:
            raise InputError(f"points must be (n, {self.num_vars})")
        if not np.iscomplexobj(pts):
            pts = pts.astype(float)
        return pts, single

    def evaluate(self, points) -> np.ndarray:
        """Monomial values: shape (n_points, n_terms) or (n_terms,)."""
        pts, single = self._as_points(points)
        tables = self._power_tables(pts)
        out = np.ones((len(self), pts.shape[0]), dtype=pts.dtype)
        for i in range(self.num_vars):
            out *= tables[i][self.exponents[:, i]]
        out = out.T
        return out[0] if single else out

    def directional_derivative(self, points, velocities) -> np.ndarray:
        """d/dt of each monomial along given point velocities.

        Returns sum_i k_i x^(k - e_i) v_i per monomial, shape like evaluate().
        """
        pts, single = self._as_points(points)
        vel = np.asarray(velocities)
        if vel.shape != pts.shape and not (single and vel.shape == (self.num_vars,)):
            raise InputError("velocities must match points in shape")
        vel = vel.reshape(pts.shape)
        tables = self._power_tables(pts)
        dtype = np.result_type(pts.dtype, vel.dtype)
        out = np.zeros((len(self), pts.shape[0]), dtype=dtype)
        for i in range(self.num_vars):
            k_i = self.exponents[:, i]
            active = k_i > 0
            if not active.any():
                continue
            reduced = self.exponents[active].copy()
            reduced[:, i] -= 1
            term = np.ones((reduced.shape[0], pts.shape[0]), dtype=pts.dtype)
            for j in range(self.num_vars):
                term *= tables[j][reduced[:, j]]
            out[active] += k_i[active, None] * term * vel[:, i]
        out = out.T
        return out[0] if single else out

    def gradient_weighted(self, points, weights) -> np.ndarray:
        """For weights w per (point, monomial): sum_k w_k * grad(x^k).

        Returns shape (n_points, num_vars); entry (j, i) is
        sum_k w[j, k] * k_i * x_j^(k - e_i).
        """
        pts, single = self._as_points(points)
        w = np.asarray(weights)
        if single:
            w = w[None, :]
        if w.shape != (pts.shape[0], len(self)):
            raise InputError("weights must be (n_points, n_terms)")
        tables = self._power_tables(pts)
        dtype = np.result_type(pts.dtype, w.dtype)
        out = np.zeros((pts.shape[0], self.num_vars), dtype=dtype)
        for i in range(self.num_vars):
            k_i = self.exponents[:, i]
            active = k_i > 0
            if not active.any():
                continue
            reduced = self.exponents[active].copy()
            reduced[:, i] -= 1
            term = np.ones((reduced.shape[0], pts.shape[0]), dtype=pts.dtype)
            for j in range(self.num_vars):
                term *= tables[j][reduced[:, j]]
            out[:, i] = np.sum(w[:, active] * (k_i[active, None] * term).T, axis=1)
        return out[0] if single else out
