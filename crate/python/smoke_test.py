#!/usr/bin/env python3
"""Smoke test for the qmq_py extension module.

Builds are produced by cargo (`cargo build -p qmq-py`); this script locates
the cdylib under target/, stages it under the importable module name, and
exercises one representative call from each area of the API against known
values of the reference parameter point.

Run from anywhere:  python3 python/smoke_test.py
"""

import math
import shutil
import sys
import tempfile
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]


def load_module():
    names = ["libqmq_py.so", "libqmq_py.dylib", "qmq_py.dll"]
    candidates = [
        ROOT / "target" / profile / name
        for profile in ("release", "debug")
        for name in names
    ]
    built = next((p for p in candidates if p.exists()), None)
    if built is None:
        sys.exit(
            "qmq_py cdylib not found; run `cargo build -p qmq-py` (or --release) first"
        )
    stage = Path(tempfile.mkdtemp(prefix="qmq_py_"))
    shutil.copy2(built, stage / "qmq_py.so")
    sys.path.insert(0, str(stage))
    import qmq_py

    return qmq_py


def approx(value, target, rel=1e-6):
    assert math.isfinite(value), f"non-finite value {value}"
    assert abs(value - target) <= rel * max(abs(target), 1e-300), (
        f"{value} not within {rel} of {target}"
    )


def main():
    q = load_module()
    print(f"qmq_py {q.__version__} loaded")

    # Calibration and the physical current scale.
    dt = q.calibrate_timestep(5.0, 0.5, 0.0)
    approx(dt, 0.10883336043694744)
    mean_amps, contrast_amps = q.model_currents(dt, 5.0, 0.5)
    approx(mean_amps * 1e9, 0.7361, rel=1e-3)
    approx(contrast_amps * 1e9, 0.1216, rel=1e-3)
    print(f"calibration ok: dt = {dt:.6f} ns, mean current {mean_amps * 1e9:.3f} nA")

    # Closed-form rates at the reference point.
    dp = q.transmission_contrast(0.5, 0.0, dt)
    approx(dp, 0.08257934547233232)
    exact, leading = q.measurement_rate(0.5, 0.0, dt)
    approx(exact, 0.03154442297543572)
    approx(leading, 0.5 * (0.5 / q.HBAR) ** 2 * dt)
    rel, valid = q.relaxation_rate_charge(2.0, 0.5, 10.0, dt)
    assert valid and rel > 0.0
    closed, refined = q.ideal_integration_time(exact, rel)
    assert 0.0 < refined < closed
    print(f"rates ok: gamma_m = {exact:.6f} 1/ns, tau_id = {refined:.1f} ns")

    # Count-resolved channels, inference, and the Gaussian error estimate.
    params = q.ChargeQubitParams.reference()
    step = q.charge_step(params, dt)
    assert step.completeness_deviation() < 1e-12
    channels = q.evolve_count_resolved(step, 60)
    assert channels.trace_preservation_error() < 1e-12
    p_high = channels.distribution(q.basis_density(2, q.CHARGE_LEFT))
    p_low = channels.distribution(q.basis_density(2, q.CHARGE_RIGHT))
    assert abs(sum(p_high) - 1.0) < 1e-12 and abs(sum(p_low) - 1.0) < 1e-12
    rule = q.critical_ratio(p_high, p_low)
    approx(rule.k_critical, 0.5, rel=1e-12)
    assert rule.monotone and rule.assign(60) == "high" and rule.assign(0) == "low"
    infidelity = q.infidelity_from_distributions(p_high, p_low, rule)
    gauss = q.gaussian_inference_error(dp, 60)
    assert 0.0 < infidelity < 0.5 and abs(infidelity - gauss) < 0.01
    print(f"channels ok: N = 60 infidelity {infidelity:.4f} (Gaussian {gauss:.4f})")

    # Leakage growth of the spin model against the closed-form law.
    spin = q.SpinQubitParams.reference().with_delta(0.05, 0.0, 0.0)
    rate, valid = q.leakage_rate(0.05, spin.z_right, dt)
    assert valid
    evolver = q.UnconditionalEvolver(
        q.spin_step(spin, dt), q.spin_eigenstate(spin, q.SPIN_DOWN_DOWN)
    )
    evolver.advance_to(900)
    tau = 900 * dt
    leaked = evolver.expectation(q.spin_leakage_projector()).real
    predicted = 0.5 * (1.0 - math.exp(-rate * tau))
    approx(leaked, predicted, rel=0.02)
    assert abs(evolver.trace() - 1.0) < 1e-10
    print(f"leakage ok: {leaked:.5f} after {tau:.0f} ns vs law {predicted:.5f}")

    # Sweet-spot directions keep the transverse gradient at zero.
    g = [[2.0, 0.1, 0.0], [0.1, 2.5, 0.2], [0.0, 0.2, 3.0]]
    g_prime = [[0.1, 0.02, 0.0], [0.02, 0.15, 0.01], [0.0, 0.01, 0.3]]
    report = q.sweet_spot_directions(g, g_prime)
    assert report["spots"] and not report["degenerate"]
    direction = report["spots"][0]["direction"]
    delta_z, delta_x, zeeman = q.decompose_delta(g, g_prime, direction, 1.0)
    assert abs(delta_x) <= 1e-10 * math.hypot(delta_x, delta_z)
    print(f"sweet spot ok: delta_z = {delta_z:.4f} ueV at {tuple(round(c, 3) for c in direction)}")

    # Agreement factors against the diffusive-meter description.
    rates = q.compare_rates(5.0, 0.5, 10.0, 2.0, dt)
    approx(rates["ratio_m"], 2.0, rel=1e-3)
    approx(rates["ratio_d"], 2.0, rel=1e-3)
    print(f"rate comparison ok: ratios {rates['ratio_m']:.3f} / {rates['ratio_d']:.3f}")

    # Protocol identity and a short simulated experiment.
    probs = q.experiment_probabilities(0.03, 0.01, 0.02, q1=0.004, q2=0.006)
    budget = q.estimate_error_budget(**probs)
    approx(budget["leakage"], 0.03, rel=1e-12)
    approx(budget["q2"], 0.006, rel=1e-12)
    assert budget["clipped"] == []
    run = q.simulate_leakage_experiment(spin, 300, 2000, 7)
    assert abs(sum(run["frequencies"]) - 1.0) < 1e-9
    assert abs(sum(run["exact"]) - 1.0) < 1e-9
    assert 0.0 < run["true_leakage"] < 0.5
    print(
        f"protocol ok: true leakage {run['true_leakage']:.4f}, "
        f"estimated {run['estimated_leakage']:.4f} at {run['shots']} shots"
    )

    print("all smoke checks passed")


if __name__ == "__main__":
    main()
