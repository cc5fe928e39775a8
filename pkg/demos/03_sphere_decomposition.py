"""Classifying unit vectors into the steep / flat zoo.

For sparse laws the sphere splits into gradually nonconstant vectors V_n
and a short list of structured classes: steep families T0, T1_j, T2, T3
keyed to an index grid n_j, and flat-but-spread families R1_k, R2_k. The
classifier walks that list in order and reports the first witness found.

This script derives the index grid for n = 5000 at p = 0.01, classifies a
few handmade profiles, and then measures class frequencies over a sample
of synthetic non-V_n vectors.
"""

import numpy as np

from singlab import (
    RawPmf,
    RngStream,
    classify,
    coverage_check,
    derive_params,
    growth_g,
    rearrange,
    standardize,
)

LAW = standardize(RawPmf.from_dict({0: "99/100", 1: "1/200", -1: "1/200"},
                                   name="sparse"))


def handmade(n):
    """A few recognizable profiles on n coordinates."""
    rng = np.random.default_rng(7)

    steep = np.ones(n)
    steep[0] = 4000.0  # one dominant coordinate

    plateau = np.full(n, 0.5)
    plateau[:707] = 350.0
    plateau[707] = 21.0

    flat = np.ones(n)

    gradual = rng.permutation(np.where(np.arange(n) < n // 2, 1.25, 0.75))

    return {"steep": steep, "plateau+flat tail": plateau,
            "constant": flat, "two-level shuffle": gradual}


def main():
    n = 5000
    params = derive_params(n, LAW.p, LAW)
    print(f"n = {n}, p = {LAW.p}: d = {params.d:g}, l0 = {params.l0}, "
          f"s0 = {params.s0}")
    print(f"index grid n_j = {params.n_grid}, kappa = {params.kappa:.3f}")
    print(f"growth envelope g(2) = {growth_g(2.0, params.d):g}, "
          f"g(50) = {growth_g(50.0, params.d):g}")

    print("\nhandmade profiles")
    for name, x in handmade(n).items():
        label = classify(x, params)
        loc = "" if label.k is None else f" at k = {label.k}"
        print(f"  {name:<18} -> {label.tag()}{loc}")

    # rearrangement is what the class tests actually look at
    x = np.array([0.5, -2.0, 1.0, 0.25])
    rr = rearrange(x)
    print(f"\nrearrange({x.tolist()}): sorted_abs = {rr.sorted_abs.tolist()}, "
          f"perm = {rr.perm.tolist()}")

    print("\nclass frequencies over 4000 synthetic draws")
    res = coverage_check(params, 4000, RngStream(99, ()))
    total = sum(res["class_counts"].values())
    for tag, cnt in sorted(res["class_counts"].items(), key=lambda kv: -kv[1]):
        print(f"  {tag:<12} {cnt:6d}  ({cnt / total:6.1%})")
    print(f"  non-V_n remainder {res['remainder']}, covered {res['covered']} "
          f"({res['fraction_covered']:.1%})")
    print(f"  unclassified counterexamples: {len(res['counterexamples'])}")


if __name__ == "__main__":
    main()
