"""Smoke test for the `hitchin` extension module.

Build first: pip install --no-build-isolation -e crates/python
"""

import math

import hitchin


def main() -> None:
    v = hitchin.profile_values(1.0, 2.0)
    assert abs(v["f"] + 1.6) < 1e-14 and abs(v["h"] + v["g"]) < 1e-15

    r1, r2, r3 = hitchin.ode_residual(1.5, 0.7)
    assert max(abs(r1), abs(r2), abs(r3)) < 1e-10

    rep = hitchin.reduced_action(1.0)
    assert abs(rep["reference_value"] - math.pi / 3) < 1e-9
    assert rep["convergent"]
    assert not hitchin.reduced_action(0.4)["convergent"]
    assert hitchin.full_action(1.0, "conjugate") > 0

    assert [hitchin.smoothness(c) for c in (0.5, 1.0, 2.0)] == [
        "meron_singular",
        "smooth",
        "meron_singular",
    ]

    h = hitchin.holonomy(1.0, 1e4)
    assert h["winding"] == 1
    assert abs(h["final"][0][0] - 1) < 1e-6
    assert hitchin.winding_number([(0.2, 0.3), (-0.5, 0.1), (0.0, -0.7)]) == 3

    kappa, lam = hitchin.calibrate()
    assert abs(kappa - 0.5j) < 1e-8 and abs(lam - 1) < 1e-8

    try:
        hitchin.holonomy(1.0, 0.0)
    except ValueError:
        pass
    else:
        raise AssertionError("radius 0 accepted")

    print("hitchin", hitchin.__version__, "smoke test ok")


if __name__ == "__main__":
    main()
