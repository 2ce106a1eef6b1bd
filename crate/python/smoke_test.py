"""Smoke test for the helmhj extension module.

Build and install with `maturin develop -m crates/py/Cargo.toml`, or build
with `cargo build -p helmhj-py --features extension-module` and put the
shared library on PYTHONPATH as `helmhj.so`.
"""

import json
import math
import os
import tempfile

import helmhj


def check(cond, what):
    if not cond:
        raise SystemExit(f"smoke test failed: {what}")
    print(f"ok  {what}")


def main():
    g = helmhj.Grid([33, 33], [-1.0, -1.0], [1.0, 1.0])
    pts = g.points()
    check(len(g) == 33 * 33 and g.dim == 2, "grid shape")

    s = helmhj.ScalarField(g, [x * x + y * y for x, y in pts])
    lap = helmhj.laplacian(s)
    check(all(abs(v - 4.0) < 1e-9 for v in lap.values), "laplacian of r^2 is 4")

    f = helmhj.VectorField(g, [[-y for x, y in pts], [x for x, y in pts]])
    check(abs(helmhj.curl(f).components[0][0] - 2.0) < 1e-12, "curl of rotation is 2")
    dec = helmhj.decompose(f, 1e-10)
    diag = json.loads(dec.diagnostics_json())
    check(dec.reconstruction_error() < 1e-12, "decomposition reconstructs f")
    check(diag["phi_solve"]["iterations"] > 0, "diagnostics populated")

    rotor = helmhj.RotorScenario()
    check(abs(rotor.hj_residual_at([1.0, 0.0, 0.0], 1.0)) < 1e-12, "rotor HJ residual vanishes")
    check(abs(abs(rotor.hj_residual_at([1.0, 0.0, 0.0], 1.0, printed=True)) - 0.25) < 1e-12,
          "printed theta is off by 1/4")
    check(abs(rotor.vorticity(1.0) - 1.0) < 1e-15, "vorticity 2mw/(1+w^2 t^2)")

    st = helmhj.Grid([129, 129], [0.0, 0.0], [2 * math.pi, 2 * math.pi])
    kg = helmhj.kg_check([(1.0, 1.0)], st)
    check(kg["kg"] < 1e-10 and kg["omega"] < 1e-10, "plane wave satisfies Klein-Gordon")

    with tempfile.TemporaryDirectory() as d:
        path = os.path.join(d, "f.field")
        helmhj.write_field(path, g, f.components)
        back_grid, comps = helmhj.read_field(path)
        check(back_grid.counts == [33, 33] and comps == f.components, "field file round trip")
        report = json.loads(helmhj.run("rotor", json.dumps({"steps": 5, "out": d})))
        check(report["pass"] and os.path.exists(os.path.join(d, "vorticity.csv")), "rotor command")

    try:
        helmhj.run("convergence", json.dumps({"levels": 1}))
        check(False, "single level rejected")
    except ValueError:
        check(True, "single level rejected")


if __name__ == "__main__":
    main()
