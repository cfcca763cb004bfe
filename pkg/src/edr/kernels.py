"""Float hot loops, served by the compiled extension when it is importable.

Set ``EDR_PURE_PYTHON=1`` to force the pure-Python implementation.  ``BACKEND``
names whichever one is active.
"""

import os

from . import _pykernels

_c = None
if os.environ.get("EDR_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        import numpy as _np

        from . import _ckernels as _c
    except ImportError:  # extension not built
        _c = None

BACKEND = "cython" if _c is not None else "python"


def _mat(rows):
    return _np.ascontiguousarray(rows, dtype=_np.float64)


def _vec(xs):
    return _np.ascontiguousarray(xs, dtype=_np.float64)


def _order(xs):
    return _np.ascontiguousarray(xs, dtype=_np.int64)


def water_fill(external, weights, budget):
    if _c is None:
        return _pykernels.water_fill([float(e) for e in external], [float(w) for w in weights], float(budget))
    return _c.water_fill(_vec(external), _vec(weights), float(budget)).tolist()


def displacements(values, contributions, rows):
    if _c is None:
        return _pykernels.displacements(values, [float(c) for c in contributions], rows)
    return _c.displacements(_mat(values), _vec(contributions), _mat(rows)).tolist()


def redistribute(values, contributions, rows, order, max_rounds, tol):
    if _c is None:
        return _pykernels.redistribute(values, [float(c) for c in contributions], rows, list(order), int(max_rounds), float(tol))
    out, t, res = _c.redistribute(_mat(values), _vec(contributions), _mat(rows), _order(order), int(max_rounds), float(tol))
    return out.tolist(), int(t), float(res)


def spend(values, contributions, order, rounds, window):
    if _c is None:
        return _pykernels.spend(values, [float(c) for c in contributions], list(order), int(rounds), int(window))
    cum, counts = _c.spend(_mat(values), _vec(contributions), _order(order), int(rounds), int(window))
    return cum.tolist(), counts.tolist()
