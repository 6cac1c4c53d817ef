"""Smoke test for the pyventcel extension.

Build and run with:

    (cd crates/python && maturin develop --release) && python python/smoke_test.py
"""

import math

import pyventcel


def main() -> None:
    disk = pyventcel.Domain.disk()
    assert abs(disk.area() - math.pi) < 1e-14
    assert abs(disk.signed_distance(0.0, 0.5) + 0.5) < 1e-14

    flower = pyventcel.Domain.flower(0.3, 0.4)
    (x, y), _ = flower.closest_point(1.5, 0.0)
    assert abs(flower.signed_distance(x, y)) < 1e-12
    assert math.hypot(1.5 - x, y) <= 0.2 + 1e-12

    mesh = pyventcel.Mesh(disk, nb=40, order=2)
    assert mesh.n_boundary_edges() == 40
    assert abs(mesh.boundary_length() - 2 * math.pi) < 1e-3

    values = mesh.eigenvalues(degree=2, n_eig=7)
    exact = [lam for lam, mult in pyventcel.analytic_eigenvalues_disk(7)]
    for got, want in zip(values, exact):
        assert abs(got - want) < 1e-2 * want, (values, exact)
    print("eigenvalues:", " ".join(f"{v:.6f}" for v in values))

    report = pyventcel.run_study("domain = disk\norder = 2\ndegree = 2\nlevels = 3\n")
    pair, order_lambda, order_l2, order_h10 = report.eoc()[-1]
    print(report.table(), end="")
    assert abs(order_lambda - 4.0) < 0.4, order_lambda

    try:
        pyventcel.Mesh(disk, nb=7)
    except ValueError:
        pass
    else:
        raise AssertionError("odd boundary count accepted")

    assert pyventcel.eoc([0.4, 0.1], [1.0, 0.5])[0] == 2.0
    print("smoke test passed")


if __name__ == "__main__":
    main()
