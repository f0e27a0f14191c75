import json
import time

import numpy as np
import pytest

from coopreg import appendix_checks as ac
from coopreg import numlin
from coopreg.synthesis import local_loop


def test_divisible_model_report():
    rep = ac.appendix_a_first()
    assert rep.passed, [c for c in rep.claims if not c.ok]
    assert rep.data["eigenvalues"] == pytest.approx([-1.0, 0.0, 1.0, 2.0], abs=1e-9)
    assert rep.data["uncontrollable_modes"] == pytest.approx([1.0])
    np.testing.assert_allclose(rep.data["char_beta"], [1.0, -1.0, 0.0])


def test_divisible_model_eigenvalues_oracle():
    # det(sI - [[1, 2], [1, 0]]) = s^2 - s - 2 = (s - 2)(s + 1); beta_1 adds s(s - 1)
    A = np.array(ac.appendix_a_first().data["augmented_A"])
    np.testing.assert_allclose(np.poly(A), np.polymul([1, -1, -2], [1, -1, 0]), atol=1e-12)


def test_global_versus_local_stability_report():
    rep = ac.appendix_a_second()
    assert rep.passed
    assert rep.data["max_real_A_l"] < 0
    assert rep.data["max_real_per_agent"][2] == pytest.approx(0.1)
    np.testing.assert_allclose(rep.data["A_tilde_3"], [[0.2, -1.0], [1.0, 0.0]], atol=1e-12)
    assert rep.data["residual_regulation"] <= 1e-8


def test_second_configuration_graph():
    agents, ims, gains, g, exo = ac.appendix_a_second_setup()
    from coopreg.graph import graph_matrices
    gm = graph_matrices(g, 1)
    # rows of F A are the follower block of the row-stochastic matrix
    np.testing.assert_allclose(gm.FA, ac._Q_STAR[1:, 1:])
    assert gm.rho_FA == pytest.approx((1 + np.sqrt(5)) / 4, rel=1e-12)


def test_hidden_mode_report():
    rep = ac.appendix_b()
    assert rep.passed
    assert rep.data["max_real_A_l"] == pytest.approx(1.0)
    assert rep.data["rho_FA"] == 0.0
    assert rep.notes and "reconstructed" in rep.notes[0]
    agent, im, gains, g, exo = ac.appendix_b_setup()
    loop = local_loop(agent, im, gains)
    Am, Bm, Cm, Dm = numlin.minimal_realization(loop.A_f, loop.B_f, loop.C_f)
    assert rep.data["hinf_T1"] == pytest.approx(numlin.hinf_norm_sweep(Am, Bm, Cm, Dm), rel=1e-4)
    # the hidden mode is not visible from the transfer matrix
    assert numlin.hinf_norm_sweep(loop.A_f, loop.B_f, loop.C_f) == pytest.approx(rep.data["hinf_T1"], rel=1e-4)


def test_reports_serialise_and_are_deterministic():
    t0 = time.perf_counter()
    first = [r.to_dict() for r in ac.run_all()]
    assert time.perf_counter() - t0 < 5.0
    second = [r.to_dict() for r in ac.run_all()]
    assert json.dumps(first, sort_keys=True) == json.dumps(second, sort_keys=True)
    assert [r["name"] for r in first] == ["appendix_a_first", "appendix_a_second", "appendix_b"]
    assert all(r["pass"] for r in first)


def test_failed_claim_fails_report():
    rep = ac.CounterexampleReport("probe")
    rep.add("holds", True, True)
    assert rep.passed
    rep.add("does not hold", True, False)
    assert not rep.passed
    assert rep.to_dict()["claims"][1]["ok"] is False
