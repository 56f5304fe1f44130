#!/usr/bin/env python3
"""Smoke test for the pnpfv Python extension.

Builds nothing itself: run `cargo build -p pnpfv-py` first (or `--release`),
then `python3 python/smoke_test.py`. The script copies the built cdylib next
to itself under the importable name and exercises the main entry points.
"""

import math
import pathlib
import shutil
import sys
import tempfile

ROOT = pathlib.Path(__file__).resolve().parent.parent


def locate_extension():
    candidates = [
        ROOT / "target" / "release" / "libpnpfv.so",
        ROOT / "target" / "debug" / "libpnpfv.so",
        ROOT / "target" / "release" / "libpnpfv.dylib",
        ROOT / "target" / "debug" / "libpnpfv.dylib",
    ]
    existing = [p for p in candidates if p.exists()]
    if not existing:
        sys.exit("extension not built; run `cargo build -p pnpfv-py` first")
    return max(existing, key=lambda p: p.stat().st_mtime)


def import_module():
    lib = locate_extension()
    tmp = tempfile.mkdtemp(prefix="pnpfv_py_")
    target = pathlib.Path(tmp) / "pnpfv.so"
    shutil.copyfile(lib, target)
    sys.path.insert(0, tmp)
    import pnpfv

    return pnpfv


EXAMPLE3_SMALL = """
[grid]
dim = 3
lengths = [1.0, 1.0, 1.0]
counts = [8, 8, 8]

[model]
permittivity = "4*pi"
fixed_charge = "10*step(x-0.2)*step(0.4-x)*step(y-0.2)*step(0.4-y)*step(z-0.2)*step(0.4-z)"
k_bt = 1.0

[[species]]
name = "rho1"
charge = 1.0
diffusion = 1.0
initial = "step(x)*step(0.25-x)*step(y)*step(0.25-y)*step(z)*step(0.25-z)"

[[species]]
name = "rho2"
charge = -1.0
diffusion = 1.0
initial = "2*step(x)*step(0.25-x)*step(y)*step(0.25-y)*step(z)*step(0.25-z)"

[time]
tau = 0.05
t_end = 0.5

[solver]
tol = 1e-13
"""

PURE_DIFFUSION = """
[grid]
dim = 1
lengths = [2.0]
counts = [16]

[model]
permittivity = 1.0
k_bt = 1.0

[[species]]
name = "n"
charge = 0.0
diffusion = 1.0
initial = "2*step(1-x)"

[time]
tau = 0.25
t_end = 1.0

[solver]
tol = 1e-13
"""


def main():
    pnpfv = import_module()

    # grid round trip
    g = pnpfv.Grid(3, [1.0, 1.0, 1.0], [4, 3, 2])
    assert g.n_cells == 24
    assert abs(g.cell_volume - (0.25 * (1 / 3) * 0.5)) < 1e-15
    for flat in range(g.n_cells):
        assert g.flat(g.multi(flat)) == flat

    # interface weights at psi_l = 0, psi_r = ln 3
    r = math.log(3.0)
    assert abs(pnpfv.slotboom_weight(0.0, r, "harmonic") - 0.5) < 1e-14
    assert abs(pnpfv.slotboom_weight(0.0, r, "geometric") - 3 ** -0.5) < 1e-14
    assert abs(pnpfv.slotboom_weight(0.0, r, "algebraic") - 2.0 / 3.0) < 1e-14

    # limiter hand example
    repaired, patches = pnpfv.apply_limiter([-0.1, 0.5, 0.6])
    assert patches == 1
    assert abs(repaired[0]) < 1e-15
    assert abs(repaired[1] - 0.4) < 1e-15
    assert abs(repaired[2] - 0.6) < 1e-15
    assert abs(sum(repaired) - 1.0) < 1e-14

    # config validation errors carry the offending path
    try:
        pnpfv.check_config(EXAMPLE3_SMALL.replace("diffusion = 1.0", "diffusion = -1.0", 1))
    except ValueError as e:
        assert "diffusion" in str(e)
    else:
        raise AssertionError("invalid config was accepted")

    # closed-system run: conserved masses, non-negative densities,
    # non-increasing free energy
    res = pnpfv.run_toml(EXAMPLE3_SMALL)
    assert res.steps == 10
    for masses in res.masses:
        drift = max(abs(m - masses[0]) for m in masses)
        assert drift <= 1e-11 * abs(masses[0]), drift
    assert min(res.min_density) >= -1e-12 * 2.0
    assert all(b <= a + 1e-10 for a, b in zip(res.energy, res.energy[1:]))
    assert len(res.rho) == 2 and len(res.rho[0]) == 8**3 == len(res.phi)

    # steady state of pure diffusion is the uniform density mass/volume
    constants, residual, steps, rho, _phi = pnpfv.steady_toml(
        PURE_DIFFUSION, tol=1e-10, max_steps=10000
    )
    assert residual < 1e-10
    assert abs(constants[0] - 1.0) < 1e-8  # mass 2 over |Omega| = 2
    assert all(abs(v - 1.0) < 1e-8 for v in rho[0])

    # tiny convergence sweep: errors drop, observed order near 1 for tau = h
    rows = pnpfv.mms_sweep("first", "h", [4, 8])
    assert rows[1][1][0] < rows[0][1][0]
    assert rows[1][2][0] is not None

    print("smoke test passed")


if __name__ == "__main__":
    main()
