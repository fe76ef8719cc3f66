"""Smoke test for the gpm_py extension.

Build first with ``cargo build --release -p gpm-py``; the script loads the
shared library from target/release unless gpm_py is already importable.
"""

import importlib.machinery
import importlib.util
import math
import pathlib
import random
import sys

ROOT = pathlib.Path(__file__).resolve().parent.parent


def load():
    try:
        import gpm_py

        return gpm_py
    except ImportError:
        pass
    for name in ("libgpm_py.so", "libgpm_py.dylib", "gpm_py.dll"):
        path = ROOT / "target" / "release" / name
        if path.exists():
            loader = importlib.machinery.ExtensionFileLoader("gpm_py", str(path))
            spec = importlib.util.spec_from_loader("gpm_py", loader)
            mod = importlib.util.module_from_spec(spec)
            loader.exec_module(mod)
            return mod
    sys.exit("gpm_py not built; run cargo build --release -p gpm-py")


def dist(p, q):
    return math.hypot(p[0] - q[0], p[1] - q[1])


def main():
    gpm = load()
    rng = random.Random(5)
    a = [(rng.random(), rng.random()) for _ in range(40)]
    b = [(rng.random(), rng.random()) for _ in range(60)]

    pairs, cost = gpm.solve_exact(a, b, 25)
    assert len(pairs) == 25
    assert len({x for x, _ in pairs}) == 25 and len({y for _, y in pairs}) == 25
    assert abs(cost - sum(dist(a[x], b[y]) for x, y in pairs)) < 1e-9

    _, approx = gpm.solve_approx(a, b, 25, eps=0.1)
    assert cost - 1e-9 <= approx <= 1.1 * cost + 1e-9

    supply = [3, 1, 2]
    demand = [2, 2, 1, 1]
    flows, tcost = gpm.solve_transport(a[:3], b[:4], supply, demand)
    for i, s in enumerate(supply):
        assert abs(sum(f for x, _, f in flows if x == i) - s) < 1e-9
    for j, d in enumerate(demand):
        assert abs(sum(f for _, y, f in flows if y == j) - d) < 1e-9
    assert tcost > 0

    try:
        gpm.solve_exact(a[:2], b[:2], 3)
    except ValueError as e:
        assert "infeasible" in str(e)
    else:
        raise AssertionError("k above min(|A|, |B|) accepted")

    print(f"ok: exact {cost:.6f}, approx {approx:.6f}, transport {tcost:.6f}")


if __name__ == "__main__":
    main()
