"""Kepler orbit with e = 0.5: <2T> = -<V> over one detected period.

Run with ``python3 demos/kepler_virial.py``.
"""

import numpy as np

from virialkit.averaging import IntegratorSettings, detect_period, integrate_dynamics, time_average, virial_report
from virialkit.models import build


def main():
    model = build("kepler_quasi", {"e": 0.5})
    dyn = model.dynamics("tq")
    s0 = model.initial_state("eccentric", "tq")
    traj = integrate_dynamics(dyn, s0, IntegratorSettings(9.5, rtol=1e-10, atol=1e-12, dense_dt=0.0025))
    tau = detect_period(traj, field_fn=dyn.field, angles=dyn.angles)
    print(f"detected period {tau:.10f} (2 pi = {2 * np.pi:.10f})")

    def kinetic(states):
        r, w1, w2 = states[:, 0], states[:, 2], states[:, 3]
        return 0.5 * (w1**2 + (w2 / r) ** 2)

    T = time_average(kinetic, traj, period=tau).value
    V = time_average(lambda s: -1.0 / s[:, 0], traj, period=tau).value
    print(f"<T> = {T:.12f}, <V> = {V:.12f}, <2T> + <V> = {2 * T + V:.3e}")

    report = virial_report(dyn, traj, period=tau)
    for name, e in report.entries.items():
        print(f"{name:20s} periodic {e.periodic:+.3e}  cesaro {e.cesaro:+.3e}  boundary {e.boundary_term:+.3e}")


if __name__ == "__main__":
    main()
