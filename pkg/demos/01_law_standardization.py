"""Standardizing discrete entry laws.

Every entry distribution eta used in the experiments is written as
eta = delta * xi + b, where b is the most likely atom, delta rescales the
remaining atoms so the largest has absolute value 1, and xi carries the
conditional law away from the mode. This script walks a few raw pmfs
through that normal form and prints the derived constants the vector
decomposition depends on.
"""

import numpy as np

from singlab import (
    RawPmf,
    cf_grid,
    collision_probability,
    standardize,
    support_constants,
    zero_mass,
)

RAW = {
    "fair signed": {0: "1/2", 1: "1/4", -1: "1/4"},
    "bernoulli 0.3": {0: "7/10", 1: "3/10"},
    "shifted": {2: "4/5", 0: "1/10", 4: "1/10"},
    "sparse": {0: "99/100", 1: "1/200", -1: "1/200"},
}


def show(name, raw):
    law = standardize(RawPmf.from_dict(raw, name=name))
    print(f"--- {name}")
    print(f"  mode b = {law.b}, sparsity p = {law.p}, scale = {law.scale}")
    atoms = ", ".join(f"{a} ({m:g})" for a, m in zip(law.support, law.masses))
    print(f"  xi support: {atoms}")
    print(f"  integer denominator: {law.denominator}")
    print(f"  P(eta = 0) = {zero_mass(law):g}")
    print(f"  collision probability q_c = {collision_probability(law):g}")

    sc = support_constants(law)
    c2 = "none (centered)" if sc.C2 is None else f"{sc.C2:g}"
    print(f"  a = {sc.a:g}, a_bar = {sc.a_bar:g}, C1 = {sc.C1:g}, C2 = {c2}, "
          f"gamma = {sc.gamma:g}")
    return law


def main():
    laws = [show(k, v) for k, v in RAW.items()]

    # |phi_xi| on a coarse grid; the fair signed law gives cos(2 pi u)
    print("\ncharacteristic function magnitude |phi_xi(u)|")
    us = np.linspace(0.0, 0.5, 6)
    header = "  u:            " + "  ".join(f"{u:5.2f}" for u in us)
    print(header)
    for law in laws:
        vals = np.abs(cf_grid(law, us))
        print(f"  {law.name:<14}" + "  ".join(f"{v:5.3f}" for v in vals))

    fair = laws[0]
    assert np.allclose(np.abs(cf_grid(fair, us)),
                       np.abs(np.cos(2 * np.pi * us)))
    print("\nfair signed law matches cos(2 pi u), as it should")


if __name__ == "__main__":
    main()
