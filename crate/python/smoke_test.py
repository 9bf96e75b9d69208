"""Quick check that the extension imports and agrees with itself."""

import math

import pyiacsi as ia


def close(a, b, rel):
    return abs(a - b) <= rel * max(abs(a), abs(b))


def main():
    sys = ia.SystemConfig.table1(20.0)
    assert sys.k == 3 and sys.nt == 4 and sys.nr == 2 and sys.d == [1, 1, 1]
    assert sys.feasible()

    # more feedback never hurts
    outs = [ia.outage_probability(sys, b) for b in (2, 6, 10, "inf")]
    assert all(x >= y for x, y in zip(outs, outs[1:])), outs
    assert close(outs[-1], ia.outage_perfect(sys), 1e-10)
    assert ia.outage_probability(sys, None) == outs[-1]

    rates = [ia.ergodic_rate(sys, b) for b in (2, 6, 10)]
    assert rates[0] < rates[1] < rates[2] < ia.ergodic_rate_perfect(sys)
    assert ia.rate_ceiling(sys, 6) > 0

    psk = ia.Modulation("psk", 8)
    assert ia.ser_perfect(sys, psk) <= ia.ser_average(sys, 6, psk) <= 1.0
    assert 0 < ia.ser_floor(sys, 6, psk) < 1

    mix = ia.interference_mixture(sys, 6)
    assert close(sum(w for _, _, w in mix), 1.0, 1e-9)

    assert close(ia.z_term(2, 1.0), 1.0, 1e-12)
    assert close(ia.exp_integral_e1(1.0), 0.21938393439552029, 1e-13)
    assert close(ia.digamma_int(1), -0.5772156649015329, 1e-14)

    sched = ia.feedback_budget(sys, [10.0, 20.0, 30.0], 6, 10.0)
    assert [b for b, _ in sched] == sorted(b for b, _ in sched)

    res = ia.simulate(sys, [6, "inf"], [10.0], modulations=[psk], trials=20_000, seed=7)
    assert res["bits"] == ["6", "inf"]
    for i, b in enumerate([6, "inf"]):
        theory = ia.outage_probability(sys.with_snr_db(10.0), b)
        z = (res["outage"][i] - theory) / res["outage_se"][i]
        assert abs(z) < 4, (b, z)
    assert math.isfinite(res["ser_8psk"][0])

    try:
        ia.outage_probability(sys, -1)
    except (ValueError, OverflowError):
        pass
    else:
        raise AssertionError("negative bits accepted")

    print("smoke test ok")


if __name__ == "__main__":
    main()
