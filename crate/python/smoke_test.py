"""Smoke test for the lanewise Python extension.

Builds the extension with cargo, copies it next to this script as
lanewise.so and exercises the main entry points. Run from anywhere:

    python3 python/smoke_test.py
"""

import math
import os
import shutil
import subprocess
import sys
import tempfile

HERE = os.path.dirname(os.path.abspath(__file__))
ROOT = os.path.dirname(HERE)


def build():
    subprocess.run(
        ["cargo", "build", "--release", "-p", "lanewise-python", "--features", "extension-module"],
        cwd=ROOT,
        check=True,
    )
    target = os.environ.get("CARGO_TARGET_DIR", os.path.join(ROOT, "target"))
    shutil.copy(os.path.join(target, "release", "liblanewise_py.so"), os.path.join(HERE, "lanewise.so"))


def main():
    if "--no-build" not in sys.argv:
        build()
    sys.path.insert(0, HERE)
    import lanewise as lw

    q = lw.estimate_q(0.5, -1.0, 0.8, trials=100_000, seed=1)
    assert abs(q - 0.6602) < 0.015, q
    assert lw.estimate_q(1e-9, -2.0, 0.4, trials=10_000) == 1.0

    mini = lw.QTable.precompute("mini", trials=2_000, seed=3)
    assert mini.shape == (3, 3, 3)
    assert all(v == 1.0 for v in mini.values()[:9])
    assert mini.lookup(1.3, 0.0, 0.8) == 0.0

    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "mini.bin")
        mini.save(path)
        again = lw.QTable.load(path)
        assert again.values() == mini.values()
        try:
            lw.QTable.load(os.path.join(tmp, "missing.bin"))
        except FileNotFoundError:
            pass
        else:
            raise AssertionError("missing table should raise FileNotFoundError")

    # sigma = 0.8 on its own plane keeps the base-case lookups exact in sigma
    table = lw.QTable.precompute("default", trials=20_000, seed=5, sigma_values=[0.75, 0.8, 0.85])
    lanes = lw.base_case(3)
    assert [round(l.v * 3.6) for l in lanes] == [120, 110, 100]
    assert abs(math.exp(lanes[1].mu + lanes[1].sigma ** 2 / 2) - lanes[1].v * 3.0) < 1e-9

    scenario = lw.Scenario(lanes, 5000.0)
    d, p = lw.profile(scenario, table, sample_step=10.0)
    assert len(d) == len(p) == 501
    assert all(x == 0.0 for x, dist in zip(p, d) if dist <= scenario.min_maneuver_distance())
    assert all(b >= a - 0.02 for a, b in zip(p, p[1:]))
    p_end = lw.p_multilane(scenario, table)
    assert abs(p_end - p[-1]) < 1e-12
    assert abs(lw.p_multilane(scenario, table, fft=True) - p_end) < 1e-3

    two = lw.profiles_from_spec(1200.0, 2.0, [110.0, 100.0])
    p2 = lw.p_two_lane(1000.0, two[0].v, two[1], table)
    assert 0.0 < p2 < 1.0

    cmp = lw.compare(lw.Scenario(two, 5000.0), table, trials=20_000, seed=2)
    assert len(cmp["checkpoints"]) == 10
    assert cmp["max_abs_error"] < 0.03, cmp["max_abs_error"]
    report = lw.run_trials(lw.Scenario(two, 5000.0), trials=2_000, seed=2)
    assert report == lw.run_trials(lw.Scenario(two, 5000.0), trials=2_000, seed=2)

    mu, sigma = lw.fit_lognormal([math.e ** 2] * 40)
    assert abs(mu - 2.0) < 1e-12 and sigma == 0.0
    try:
        lw.fit_lognormal([1.0] * 5)
    except ValueError:
        pass
    else:
        raise AssertionError("short sample should raise ValueError")

    print(f"smoke test ok: q={q:.4f} p3(5 km)={p_end:.4f} p2(1 km)={p2:.4f} sim max err={cmp['max_abs_error']:.4f}")


if __name__ == "__main__":
    main()
