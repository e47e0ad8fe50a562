"""How well does the Gaussian-convolution perimeter track exact lengths?

Sweeps grid resolution and kernel width tau for two interfaces with known
measure inside the unit square: a straight vertical cut (length 1) and a
centered disk of radius 0.25 (the quarter of its circumference that the
estimator sees as chi(1 - G*chi) mass is pi/2 per unit... the full circle
has length 2 pi r = pi/2). The estimate is exact for a straight interface
as tau -> 0 and carries an O(tau) curvature correction for the disk.
"""

import numpy as np

from ictm_heat import IndicatorField, KernelParams, make_grid, node_multi_index, perimeter_estimate


def straight_and_disk(m: int):
    grid = make_grid(2, m)
    i, j = node_multi_index(grid, np.arange(grid.n_nodes))
    x = i * grid.spacing[0]
    y = j * grid.spacing[1]
    straight = IndicatorField(grid, (x <= 0.5).astype(np.uint8))
    disk = IndicatorField(grid, ((x - 0.5) ** 2 + (y - 0.5) ** 2 <= 0.25**2).astype(np.uint8))
    return grid, straight, disk


def main():
    print(f"{'grid':>6} {'tau':>10} {'straight':>10} {'err %':>8} {'disk':>10} {'err %':>8}")
    exact_disk = np.pi / 2.0
    for m in (64, 128, 256, 512):
        grid, straight, disk = straight_and_disk(m)
        for tau in (4e-4, 1e-4, 4e-5):
            # the sampled interface only resolves the kernel for tau >~ h^2
            if tau < grid.spacing[0] ** 2:
                continue
            params = KernelParams(tau=tau, extension="mirror")
            ps = perimeter_estimate(straight, params)
            pd = perimeter_estimate(disk, params)
            print(
                f"{m:>4}^2 {tau:>10.1e} {ps:>10.5f} {100 * abs(ps - 1):>8.3f}"
                f" {pd:>10.5f} {100 * abs(pd - exact_disk) / exact_disk:>8.3f}"
            )
    print("\nstraight-interface error decays with tau; the disk keeps an O(tau)")
    print("curvature bias, so refining the grid alone does not remove it.")


if __name__ == "__main__":
    main()
