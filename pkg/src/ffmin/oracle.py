"""Objective oracles: the only interface optimizers see.

An oracle owns the call counters. Every optimizer trace snapshots
value_calls/grad_calls, so the accounting must flow through value(),
gradient() and value_and_gradient() and nothing else. A fused
value_and_gradient call increments both counters by one.
"""

from __future__ import annotations

import numpy as np

from .energy import energy_and_gradient, energy_total


class ObjectiveOracle:
    """Base class; subclasses implement _value/_gradient/_value_and_gradient."""

    def __init__(self, n):
        self.n = int(n)
        self.value_calls = 0
        self.grad_calls = 0

    def reset_counters(self):
        self.value_calls = 0
        self.grad_calls = 0

    def value(self, x) -> float:
        self.value_calls += 1
        return float(self._value(np.asarray(x, dtype=np.float64)))

    def gradient(self, x):
        self.grad_calls += 1
        return np.asarray(self._gradient(np.asarray(x, dtype=np.float64)), dtype=np.float64)

    def value_and_gradient(self, x):
        self.value_calls += 1
        self.grad_calls += 1
        f, g = self._value_and_gradient(np.asarray(x, dtype=np.float64))
        return float(f), np.asarray(g, dtype=np.float64)

    # default fused path; subclasses with a cheaper joint evaluation override
    def _value_and_gradient(self, x):
        return self._value(x), self._gradient(x)

    def _value(self, x):
        raise NotImplementedError

    def _gradient(self, x):
        raise NotImplementedError


class FunctionOracle(ObjectiveOracle):
    """Wrap plain callables f(x) and optionally g(x) as an oracle."""

    def __init__(self, n, f, grad=None, value_and_grad=None):
        super().__init__(n)
        self._f = f
        self._g = grad
        self._fg = value_and_grad

    def _value(self, x):
        return self._f(x)

    def _gradient(self, x):
        if self._g is None:
            raise NotImplementedError("no gradient supplied for this oracle")
        return self._g(x)

    def _value_and_gradient(self, x):
        if self._fg is not None:
            return self._fg(x)
        return super()._value_and_gradient(x)


class MolecularOracle(ObjectiveOracle):
    """Total force-field energy as a function of flattened coordinates.

    Coordinates are in angstrom, values in kJ/mol, gradient in
    kJ/(mol*angstrom). dtype selects the kernel precision; float32 results
    are still reported as python floats / float64 arrays at the oracle
    boundary so the optimizers stay precision-agnostic.
    """

    def __init__(self, system, dtype=np.float64, backend=None):
        super().__init__(3 * system.natoms)
        self.system = system
        self.dtype = np.dtype(dtype)
        self.backend = backend

    def system_at(self, x):
        return self.system.with_coords(np.asarray(x, dtype=np.float64))

    def _value(self, x):
        return energy_total(self.system_at(x), self.dtype, self.backend).total

    def _gradient(self, x):
        _, g = energy_and_gradient(self.system_at(x), self.dtype, self.backend)
        return g

    def _value_and_gradient(self, x):
        bd, g = energy_and_gradient(self.system_at(x), self.dtype, self.backend)
        return bd.total, g
