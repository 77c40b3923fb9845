"""Smoke test for the rhoharm Python bindings.

Build first, e.g. `pip install --no-build-isolation ./crates/py` or
`maturin develop -m crates/py/Cargo.toml`, then run this script.
"""

import math
import os
import tempfile

import rhoharm


def close(a, b, tol=1e-10):
    return abs(a - b) <= tol * max(1.0, abs(a), abs(b))


def main():
    grid = rhoharm.Grid(3, 8, 0.5)
    assert len(grid) == 512 and grid.dim == 3 and grid.n == 8

    one = rhoharm.GridFunction.constant(grid, 1.0)
    assert close(one.integral(), 4.0**3)

    v = rhoharm.Potential(grid, "const:1")
    rho = v.critical_radius()
    assert all(r > 0 for r in rho.values())
    bounds = rho.verify_bounds(1000)
    assert bounds["c_rho"] >= 1.0, bounds

    # Maximal operators of a constant.
    for out in (rhoharm.mtheta(one, rho, 1.0), rhoharm.mlocal(one, rho), rhoharm.sharp(one, rho)):
        assert len(out) == len(grid)
    assert all(close(x, 1.0) for x in rhoharm.mlocal(one, rho).values())
    # M♯_ρ also averages |f| on critical balls, so it fixes constants too.
    assert all(close(x, 1.0) for x in rhoharm.sharp(one, rho).values())

    p = rhoharm.Exponent(grid, "radial:2,0.5")
    assert 1.0 < p.p_minus <= p.p_plus
    w = rhoharm.Weight(grid, "power:0.5")
    spike = rhoharm.GridFunction.point(grid, grid.center_index())
    assert p.weighted_norm(spike, w) > 0.0

    report = rhoharm.weight_constant("apvar_rho", w, rho, p=p, theta=2.0)
    assert math.isfinite(report["constant"]), report

    op = rhoharm.Operator.build("V_Linv", v)
    tf = op.apply(spike)
    assert max(tf.values()) > 0.0
    with tempfile.TemporaryDirectory() as d:
        path = os.path.join(d, "op.bin")
        op.save(path)
        again = rhoharm.Operator.load(path)
        assert again.apply(spike).values() == tf.values()
        f_path = os.path.join(d, "f.csv")
        tf.write(f_path)
        back = rhoharm.GridFunction.read(f_path, grid)
        assert all(close(a, b) for a, b in zip(back.values(), tf.values()))

    h, info = rhoharm.majorant(spike.abs(), rho, 1.0, 4.0, terms=8)
    assert all(a >= b for a, b in zip(h.values(), spike.values()))
    assert info["fixed_point_excess"] <= 1e-12 * h.max_abs(), info

    result = rhoharm.run_suite(
        "[experiment]\nsuite = maximal_bounded\n[grid]\ndim = 2\nspacing = 0.5\nlevels = 8, 10\n"
        "[ensemble]\nsize = 8\n"
    )
    assert result["suite"] == "maximal_bounded" and result["series"], result.keys()
    assert "[thresholds]" in rhoharm.default_config()

    print("rhoharm", rhoharm.__version__, "smoke test ok; maximal_bounded pass =", result["pass"])


if __name__ == "__main__":
    main()
