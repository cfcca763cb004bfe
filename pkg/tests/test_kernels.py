import os
import subprocess
import sys

import numpy as np
import pytest

from edr import _pykernels, kernels


def _case(rng, n, m):
    v = rng.integers(0, 5, size=(n, m)).astype(float)
    for i in range(n):
        if not v[i].any():
            v[i, rng.integers(m)] = 1.0
    c = rng.integers(1, 50, size=n).astype(float)
    rows = np.array([c[i] * v[i] / v[i].sum() for i in range(n)])
    return v.tolist(), c.tolist(), rows.tolist()


def test_backend_name():
    assert kernels.BACKEND in ("cython", "python")


def test_pure_python_switch():
    out = subprocess.run(
        [sys.executable, "-c", "import edr.kernels as k; print(k.BACKEND)"],
        env={**os.environ, "EDR_PURE_PYTHON": "1"},
        capture_output=True,
        text=True,
        check=True,
    )
    assert out.stdout.strip() == "python"


@pytest.mark.skipif(kernels.BACKEND != "cython", reason="extension not built")
@pytest.mark.parametrize("seed", range(30))
def test_backends_agree(seed):
    rng = np.random.default_rng(seed)
    n, m = int(rng.integers(1, 6)), int(rng.integers(1, 7))
    v, c, rows = _case(rng, n, m)
    e = rng.integers(0, 20, size=m).astype(float).tolist()
    w = v[0]
    assert kernels.water_fill(e, w, c[0]) == pytest.approx(_pykernels.water_fill(e, w, c[0]), abs=1e-12)
    assert kernels.displacements(v, c, rows) == pytest.approx(_pykernels.displacements(v, c, rows), abs=1e-9)
    a = kernels.redistribute(v, c, rows, list(range(n)), 500, 1e-12)
    b = _pykernels.redistribute(v, c, rows, list(range(n)), 500, 1e-12)
    assert a[1] == b[1]
    assert np.allclose(a[0], b[0], atol=1e-9)
    ca, na = kernels.spend(v, c, list(range(n)), 7 * n, n - 1)
    cb, nb = _pykernels.spend(v, c, list(range(n)), 7 * n, n - 1)
    assert list(na) == list(nb)
    assert np.allclose(ca, cb, atol=1e-9)


def test_figure1_float():
    assert kernels.water_fill([3, 0, 4, 7], [0, 1, 1, 1], 6) == pytest.approx([0, 5, 1, 0])


def test_benchmark_runs(tmp_path):
    script = os.path.join(os.path.dirname(__file__), os.pardir, "benchmarks", "bench_kernels.py")
    out = tmp_path / "bench.json"
    subprocess.run([sys.executable, script, "--repeat", "1", "--json", str(out)], check=True, capture_output=True)
    import json

    doc = json.loads(out.read_text())
    assert doc["backend"] == kernels.BACKEND
    assert all(r["cython"] > 0 and r["python"] > 0 for r in doc["rows"])
