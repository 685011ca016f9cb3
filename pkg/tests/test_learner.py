"""End-to-end learner tests: both variants, audit invariants, serialization."""

import numpy as np
import pytest

from mpslearn import (
    errors,
    learner,
    mps,
    planner,
    tomography,
)


def random_mps_vector(n, seed, D=2, boundary="open"):
    state = mps.random_mps(mps.StateSpec(n=n, d=2, D=D, boundary=boundary, seed=seed))
    return mps.expand(state)


def zero_sector_embedding(circuit):
    """The fully transformed frame: |0> on every projected site, residual on the rest."""
    n, d = circuit.n, circuit.d
    tensor = np.zeros((d,) * n, dtype=complex)
    index = [0] * n
    for s in circuit.residual_sites:
        index[s - 1] = slice(None)
    tensor[tuple(index)] = circuit.residual.reshape((d,) * len(circuit.residual_sites))
    return tensor.reshape(-1)


def test_exact_variant_recovers_random_mps():
    psi = random_mps_vector(12, seed=0)
    circuit, report = learner.learn(psi, 2, 2, 0.2, 0.01, seed=0)
    assert report.final_fidelity >= 1.0 - 1e-9
    assert report.variant == "exact"
    assert report.p == 2
    assert report.M == 3
    assert report.copies_used > 0
    assert len(report.per_layer) == 3
    assert circuit.num_layers == 3
    assert abs(np.linalg.norm(learner.reconstruct_state(circuit)) - 1.0) < 1e-9


def test_exact_variant_accepts_mps_input_directly():
    state = mps.random_mps(mps.StateSpec(n=10, d=2, D=2, seed=3))
    circuit, report = learner.learn(state, 2, 2, 0.2, 0.01)
    assert report.final_fidelity >= 1.0 - 1e-9
    fid = abs(np.vdot(learner.reconstruct_state(circuit), mps.expand(state))) ** 2
    assert fid >= 1.0 - 1e-9


def test_report_eta_matches_schedule_formula():
    psi = random_mps_vector(12, seed=1)
    _, report = learner.learn(psi, 2, 2, 0.2, 0.01)
    assert abs(report.eta - planner.eta_exact(0.2, report.M)) < 1e-18
    assert abs(report.tau - 0.2 / 4) < 1e-15


def test_s1_amendment_is_reported():
    psi = random_mps_vector(12, seed=2)
    _, report = learner.learn(psi, 2, 2, 0.2, 0.01)
    assert any("s1-amended" in note for note in report.deviations)


def test_audit_trail_exact_run_invariants():
    psi = random_mps_vector(10, seed=4)
    _, report = learner.learn(psi, 2, 2, 0.2, 0.01, audit=True)
    trail = report.audit
    assert trail is not None
    masses = [trail.success_mass(j) for j in range(trail.M + 1)]
    assert abs(masses[0] - 1.0) < 1e-12
    for before, after in zip(masses, masses[1:]):
        assert after <= before + 1e-12
    # an exact-oracle run keeps the full mass and never sinks a stage
    assert masses[-1] >= 1.0 - 1e-9
    for j in range(1, trail.M + 1):
        assert trail.monotonicity_margin(j) >= -1e-10
    # the input is stage 0
    assert abs(trail.fidelity_against(psi, 0) - 1.0) < 1e-12


def test_stepwise_overlap_identity_forward_vs_backward():
    # <phi|rho_j|phi> evaluated by undoing the circuit must equal the
    # residual-projection form evaluated in the collapsed frame
    psi = random_mps_vector(8, seed=5)
    rng = np.random.default_rng(6)
    circuit, report = learner.learn(psi, 2, 2, 0.2, 0.01, audit=True)
    trail = report.audit
    phi = rng.standard_normal(256) + 1j * rng.standard_normal(256)
    phi /= np.linalg.norm(phi)
    for j in range(trail.M + 1):
        backward = abs(np.vdot(trail.stepwise_vector(j), phi)) ** 2
        forward = trail.fidelity_against(phi, j)
        assert abs(backward - forward) < 1e-10
        chi = learner.residual_projection(circuit, phi, j)
        snap = trail.snapshots[j]
        assert abs(forward - abs(np.vdot(snap.state, chi)) ** 2) < 1e-10


def test_stepwise_state_matches_vector_outer_product():
    psi = random_mps_vector(8, seed=7)
    _, report = learner.learn(psi, 2, 2, 0.2, 0.01, audit=True)
    trail = report.audit
    for j in (0, trail.M):
        w = trail.stepwise_vector(j)
        np.testing.assert_allclose(
            trail.stepwise_state(j), np.outer(w, w.conj()), atol=1e-12
        )
    np.testing.assert_allclose(
        trail.stepwise_state(0), np.outer(psi, psi.conj()), atol=1e-10
    )


def test_stepwise_state_requires_audit():
    psi = random_mps_vector(8, seed=8)
    _, report = learner.learn(psi, 2, 2, 0.2, 0.01)
    with pytest.raises(errors.AuditDisabled):
        learner.stepwise_state(report, 1)


def test_bounded_noise_run_respects_layer_bounds():
    psi = random_mps_vector(12, seed=9)
    mode = tomography.BoundedNoiseMode()  # learner supplies its own budget
    _, report = learner.learn(psi, 2, 2, 0.2, 0.01, mode=mode, seed=9, audit=True)
    assert report.final_fidelity >= 0.8
    trail = report.audit
    phi = psi
    overlaps = [trail.fidelity_against(phi, j) for j in range(trail.M + 1)]
    for j, stats in enumerate(report.per_layer, start=1):
        drop = abs(overlaps[j - 1] - overlaps[j])
        assert drop <= stats.drop_bound + 1e-12
    # the documented bound for layer j of the exact variant
    for stats in report.per_layer:
        expected = 2.0 * np.sqrt(2.0 * report.eta * 2.0 ** (report.M - stats.layer))
        assert abs(stats.drop_bound - expected) < 1e-15


def test_noise_runs_differ_by_seed_but_reproduce_exactly():
    psi = random_mps_vector(10, seed=10)
    mode = tomography.BoundedNoiseMode()
    _, r1 = learner.learn(psi, 2, 2, 0.2, 0.01, mode=mode, seed=1)
    _, r2 = learner.learn(psi, 2, 2, 0.2, 0.01, mode=mode, seed=1)
    _, r3 = learner.learn(psi, 2, 2, 0.2, 0.01, mode=mode, seed=2)
    assert r1.final_fidelity == r2.final_fidelity
    assert r1.final_fidelity != r3.final_fidelity


def test_finite_sample_mode_end_to_end():
    psi = random_mps_vector(6, seed=11)
    mode = tomography.FiniteSampleMode(copies=200_000, seed=0)
    circuit, report = learner.learn(psi, 2, 2, 0.5, 0.05, mode=mode, seed=11)
    assert report.oracle == "finite_sample"
    assert report.copies_used > 0
    assert report.final_fidelity >= 0.7
    assert abs(np.linalg.norm(learner.reconstruct_state(circuit)) - 1.0) < 1e-9


def test_forward_transform_recovers_zero_sector():
    psi = random_mps_vector(8, seed=12)
    circuit, _ = learner.learn(psi, 2, 2, 0.2, 0.01)
    forwarded = learner.forward_transform(circuit, learner.reconstruct_state(circuit))
    np.testing.assert_allclose(
        forwarded, zero_sector_embedding(circuit), atol=1e-10
    )


def test_extract_mps_matches_reconstruction():
    psi = random_mps_vector(8, seed=13)
    circuit, report = learner.learn(psi, 2, 2, 0.2, 0.01)
    extracted = learner.extract_mps(circuit)
    dense = mps.expand(extracted)
    fid = abs(np.vdot(dense, learner.reconstruct_state(circuit))) ** 2
    assert fid >= 1.0 - 1e-8
    cap = 2 ** (report.M + 1) * 2 ** (2 * (report.M + 1))
    for t in extracted.tensors:
        assert t.shape[1] <= cap and t.shape[2] <= cap


def test_trivial_register_short_circuit():
    # n <= 2p has no layers to run; the whole register is one tomography call
    psi = random_mps_vector(4, seed=14)
    circuit, report = learner.learn(psi, 2, 2, 0.2, 0.01)
    assert report.M == 0
    assert any("trivial" in note for note in report.deviations)
    assert circuit.num_layers == 0
    assert report.final_fidelity >= 1.0 - 1e-9
    fid = abs(np.vdot(learner.reconstruct_state(circuit), psi)) ** 2
    assert fid >= 1.0 - 1e-9


def test_closest_variant_routes_through_block_solver():
    psi = random_mps_vector(8, seed=15)
    circuit, report = learner.learn(psi, 2, 2, 0.2, 0.01, variant="closest")
    # desk-scale parameters give a block size covering the whole register
    assert report.p >= 8 // 2
    assert report.M == 0
    assert report.final_fidelity >= 1.0 - 1e-9


def test_closest_variant_on_global_depolarized_state():
    phi = random_mps_vector(8, seed=16)
    lam = 0.1
    rho = (1 - lam) * np.outer(phi, phi.conj()) + lam * np.eye(256) / 256.0
    circuit, report = learner.learn(rho, 2, 2, 0.2, 0.01, variant="closest")
    phi_hat = learner.reconstruct_state(circuit)
    witness = float(np.real(phi_hat.conj() @ rho @ phi_hat))
    best = (1 - lam) + lam / 256.0
    m, eps_prime = planner.select_epsilon(8, 2, 2, 0.2)
    assert witness >= best - eps_prime
    assert report.effective_epsilon <= 0.2


def test_closest_layered_schedule_obeys_own_bounds():
    # force the layered path with an explicit schedule to exercise the
    # threshold builders and the closest-variant drop bounds
    psi = random_mps_vector(10, seed=17)
    plan = planner.plan_layers(10, 2, 2)
    eta = planner.eta_closest(0.5, 2, 2, 10)
    schedule = learner.LearnSchedule(plan=plan, eta=eta)
    mode = tomography.BoundedNoiseMode()
    circuit, report = learner.learn(
        psi, 2, 2, 0.5, 0.01, variant="closest", mode=mode, seed=17,
        audit=True, schedule=schedule,
    )
    assert report.M == plan.M
    trail = report.audit
    overlaps = [trail.fidelity_against(psi, j) for j in range(trail.M + 1)]
    for j, stats in enumerate(report.per_layer, start=1):
        expected = 2.0 * np.sqrt(2.0 * eta * 4.0 * 2.0 ** (report.M - j))
        assert abs(stats.drop_bound - expected) < 1e-15
        assert abs(overlaps[j - 1] - overlaps[j]) <= stats.drop_bound + 1e-12
    assert report.final_fidelity >= 0.5


def test_theta_is_recorded_but_inert():
    psi = random_mps_vector(8, seed=18)
    circuit_a, report_a = learner.learn(psi, 2, 2, 0.2, 0.01, theta=0.9)
    circuit_b, report_b = learner.learn(psi, 2, 2, 0.2, 0.01)
    assert report_a.theta == 0.9
    assert report_b.theta is None
    np.testing.assert_array_equal(
        learner.reconstruct_state(circuit_a), learner.reconstruct_state(circuit_b)
    )


def test_learn_validates_arguments():
    psi = random_mps_vector(6, seed=19)
    with pytest.raises(errors.BadParameter):
        learner.learn(psi, 2, 2, 0.2, 0.01, variant="fastest")
    with pytest.raises(errors.BadParameter):
        learner.learn(psi, 2, 2, 0.0, 0.01)
    with pytest.raises(errors.BadParameter):
        learner.learn(psi, 2, 2, 0.2, 1.0)
    with pytest.raises(errors.BadParameter):
        learner.learn(psi, 2, 0, 0.2, 0.01)
    with pytest.raises(errors.BadParameter):
        learner.learn(psi * 2.0, 2, 2, 0.2, 0.01)


def test_circuit_save_load_round_trip(tmp_path):
    psi = random_mps_vector(10, seed=20)
    circuit, _ = learner.learn(psi, 2, 2, 0.2, 0.01, seed=20)
    path = tmp_path / "circuit.json"
    learner.save_circuit(circuit, path)
    first = path.read_bytes()
    loaded = learner.load_circuit(path)
    np.testing.assert_array_equal(
        learner.reconstruct_state(loaded), learner.reconstruct_state(circuit)
    )
    assert loaded.residual_sites == circuit.residual_sites
    learner.save_circuit(loaded, path)
    assert path.read_bytes() == first


def test_load_circuit_rejects_tampering(tmp_path):
    import json

    psi = random_mps_vector(8, seed=21)
    circuit, _ = learner.learn(psi, 2, 2, 0.2, 0.01, seed=21)
    path = tmp_path / "circuit.json"
    learner.save_circuit(circuit, path)

    doc = json.loads(path.read_text())
    doc["format"] = "other-format"
    bad = tmp_path / "bad_format.json"
    bad.write_text(json.dumps(doc))
    with pytest.raises(errors.MalformedCircuit):
        learner.load_circuit(bad)

    doc = json.loads(path.read_text())
    doc["unitaries"][0]["entries"][0] += 0.5
    bent = tmp_path / "bent.json"
    bent.write_text(json.dumps(doc))
    with pytest.raises(errors.MalformedCircuit):
        learner.load_circuit(bent)


def test_exact_run_is_seed_stable_bytes(tmp_path):
    psi = random_mps_vector(10, seed=22)
    circuit_a, _ = learner.learn(psi, 2, 2, 0.2, 0.01, seed=5)
    circuit_b, _ = learner.learn(psi, 2, 2, 0.2, 0.01, seed=5)
    pa, pb = tmp_path / "a.json", tmp_path / "b.json"
    learner.save_circuit(circuit_a, pa)
    learner.save_circuit(circuit_b, pb)
    assert pa.read_bytes() == pb.read_bytes()
