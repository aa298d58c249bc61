"""Smoke test for the dsgda_py extension module."""

import math

import dsgda_py

SMALL = """
T = 200
seeds = 3
stride = 50

[problem]
family = "quadratic"

[data]
m = 4
n = 20
seed = 2

[sweep]
topology = ["full", "ring"]
"""


def main():
    ring = dsgda_py.MixingMatrix("ring", 8)
    want = (1 + 2 * math.cos(2 * math.pi / 8)) / 3
    assert abs(ring.lambda_ - want) < 1e-10, ring
    for row in ring.rows():
        assert abs(sum(row) - 1) < 1e-12

    assert dsgda_py.c_lambda(0.5, 1.0) > 0
    records = dsgda_py.parse_libsvm("+1 1:0.5 3:-2\n-1 2:1\n")
    assert records == [(1.0, [(1, 0.5), (3, -2.0)]), (-1.0, [(2, 1.0)])]
    assert "scsc_quadratic" in dsgda_py.presets()

    cfg = dsgda_py.Config(SMALL)
    names = [b["name"] for b in cfg.bounds()]
    assert "scsc_stability_fixed" in names, names
    summary = cfg.stability(seeds=2)
    assert isinstance(summary, dict)

    sweep_csv, bounds_csv = cfg.sweep()
    assert len(sweep_csv.strip().splitlines()) == 3
    report = dsgda_py.compare(sweep_csv, bounds_csv)
    assert report["rows"], report

    try:
        dsgda_py.Config(SMALL.replace("T = 200", "T = 0"))
    except ValueError as e:
        assert "T" in str(e)
    else:
        raise AssertionError("invalid config accepted")

    print("python smoke test passed")


if __name__ == "__main__":
    main()
