"""Battery FCR per ramp for the four benchmark ramps, and the worst-case frequency trace.

The PV power drop of each ramp is back-computed from the static requirement
(22.5 MW trip, three units ramping at 0.208 MW/s); the static and dynamic
columns then follow from the requirement formula. The second part simulates
the 19 s ramp together with the trip and prints the nadir.
"""

from fcsizing.domain import FrequencyLimits, GeneratorSpec
from fcsizing.model import battery_fcr_requirement
from fcsizing.sim import CommittedUnit, LoadStep, PowerRamp, SimConfig, simulate, verify_limits

RAMPS = ((2, 0.061), (19, 0.613), (36, 0.778), (48, 0.878))  # (s, kW/m2)
STATIC = (25.7, 33.3, 23.2, 15.3)
P_SUD, RR, UNITS, GT_FCR = 22.5, 0.208, 3, 22.5


def main():
    print(f"{'ramp':>4} {'dT [s]':>7} {'dI':>6} {'dP_PV':>7} {'static':>7} {'dynamic':>8}")
    for k, ((dt, di), s) in enumerate(zip(RAMPS, STATIC), start=1):
        frr = UNITS * RR * dt
        dp = s - P_SUD + frr
        st = battery_fcr_requirement(P_SUD, 0.0, dp, frr)
        dy = battery_fcr_requirement(P_SUD, GT_FCR, dp, frr)
        print(f"r{k:<3} {dt:7.0f} {di:6.3f} {dp:7.3f} {st:7.1f} {dy:8.1f}")

    units = tuple(CommittedUnit(GeneratorSpec(f"GT{i + 1}", 45.0, 0.0, 0.1, 5.51, RR), 30.0) for i in range(UNITS))
    cfg = SimConfig(units, (LoadStep(10.0, P_SUD), PowerRamp(10.0, 19.0, 22.656)), FrequencyLimits(),
                    p_base=45.0, s_base=75.0, battery_power=10.8, fcr_limit=GT_FCR / UNITS)
    tr = simulate(cfg)
    v = verify_limits(tr, cfg.freq)
    print(f"\ntrip + r2 with a 10.8 MW battery: nadir {tr.nadir_hz:.3f} Hz, "
          f"{'within limits' if v.passed else 'limits violated: ' + v.reason}")


if __name__ == "__main__":
    main()
