"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run ``pytest tests/test_acceptance.py -v`` to see the verdicts alongside the
test names.
"""
import math

import numpy as np
import pytest

from fiberpol import core
from fiberpol.decomposition import (
    analyze_fiber, birefringence, lu_chipman, retardance_from_birefringence, unwrap_to_prior,
)
from fiberpol.fiber import LinearPMF, StandardRandom, TwistedPCF, beat_length, noise_budget, propagate, scrambling_ensemble
from fiberpol.fixtures import generate_fixture
from fiberpol.psg import PsgConfig, TABLE1_SETTINGS, psg_state
from fiberpol.retrieval import (
    MeasurementRecord, MeasurementSet, linear_propagation_sigma, propagate_uncertainty,
)

from conftest import (
    random_depolarizer, random_diattenuator, random_retarder, toy_joint_measurement_variance,
)

LAM = 808e-9


@pytest.fixture
def verdict(capsys):
    def emit(number, title, ok, detail):
        with capsys.disabled():
            print(f"\n[criterion {number}] {'PASS' if ok else 'FAIL'}: {title} ({detail})")
        assert ok, f"criterion {number} failed: {detail}"
    return emit


def test_criterion_1_state_generator_table(verdict):
    worst = 0.0
    for label, (r1, r2) in TABLE1_SETTINGS.items():
        worst = max(worst, np.max(np.abs(psg_state(PsgConfig(), r1, r2) - core.STATES[label])))
    verdict(1, "six generator settings give H,V,D,A,+,-", worst <= 1e-12, f"max error {worst:.2e}")


# measured cells: (birefringence, fiber length in m)
TABLE2_CELLS = [
    ("twisted 0.8 m circular", 7.79e-7, 0.8),
    ("twisted 4.6 m circular", 8.18e-7, 4.6),
    ("PMF 2 m circular", 1.02e-8, 2.0),
    ("PMF 2 m linear", 3.00e-4, 2.0),
    ("PMF 5 m circular", 1.94e-8, 5.0),
    ("PMF 5 m linear", 4.18e-4, 5.0),
]


def _sig3(x):
    return float(f"{x:.3g}")


def test_criterion_2_birefringence_cells(verdict):
    misses = []
    for name, dn, l in TABLE2_CELLS:
        total = retardance_from_birefringence(dn, LAM, l)
        # go through the wrapped measurement and back with the cell as prior
        wrapped = math.acos(math.cos(total))
        unw = unwrap_to_prior(wrapped, l, LAM, dn)
        back = birefringence(unw.delta, LAM, l)
        if _sig3(back) != _sig3(dn):
            misses.append(f"{name}: {back:.4g}")
    verdict(2, "inverting retardance reproduces the measured cells to 3 s.f.", not misses,
            "; ".join(misses) or f"{len(TABLE2_CELLS)} cells reproduced")


def test_criterion_3_end_to_end_recovery(verdict):
    model = TwistedPCF(8e-7, residual_delta_n_lb=1e-7, residual_axis=0.3)
    l, sigma, repeats, trials = 0.8, 0.005, 400, 200

    clean = analyze_fiber(generate_fixture(model, l, LAM, 0.0, 2, seed=0), 8e-7, 1e-7, n_resamples=0)
    clean_err = max(abs(clean.circular.delta_n - 8e-7), abs(clean.linear.delta_n - 1e-7))

    inside = 0
    for trial in range(trials):
        mset = generate_fixture(model, l, LAM, sigma, repeats, seed=1000 + trial)
        res = analyze_fiber(mset, 8e-7, 1e-7, n_resamples=200, seed=trial)
        inside += abs(res.circular.delta_n - 8e-7) <= 3 * res.circular.sigma
    frac = inside / trials
    verdict(3, "synthetic twisted fiber recovered within 3 sigma", frac >= 0.95 and clean_err <= 1e-9,
            f"{frac:.1%} of {trials} trials inside 3 sigma; noise-free error {clean_err:.1e} RIU")


def test_criterion_4_polar_decomposition_round_trip(verdict):
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(1000):
        m = core.compose(random_depolarizer(rng), core.compose(random_retarder(rng), random_diattenuator(rng)))
        worst = max(worst, np.max(np.abs(lu_chipman(m).product() - m)))
    worst_dep = 0.0
    for _ in range(200):
        m = core.compose(random_retarder(rng), random_diattenuator(rng))
        worst_dep = max(worst_dep, abs(lu_chipman(m).depolarization_factor - 1))
    verdict(4, "factor triples reassemble; nondepolarizing factor is 1",
            worst <= 1e-9 and worst_dep <= 1e-9,
            f"max reassembly error {worst:.1e}, max |factor - 1| {worst_dep:.1e}")


def test_criterion_5_eigenmode_and_great_circle(verdict):
    S = core.STATES
    twisted, pmf = TwistedPCF(8e-7), LinearPMF(3.5e-4)
    errs = {}
    for label in "+-":
        traj = propagate(twisted, S[label], 4.6, LAM, 0.01)
        errs[f"twisted {label}"] = np.max(np.abs(traj.states - S[label]))
    for label in "HDA":
        traj = propagate(twisted, S[label], 4.6, LAM, 0.01)
        errs[f"twisted {label} |s3|"] = np.max(np.abs(traj.states[:, 3]))
    for label in "HV":
        traj = propagate(pmf, S[label], 5.0, LAM, 0.001)
        errs[f"PMF {label}"] = np.max(np.abs(traj.states - S[label]))
    worst = max(errs, key=errs.get)
    verdict(5, "circular kept by twisted fiber, linear on equator, H/V kept by PMF",
            errs[worst] < 1e-10, f"worst {worst}: {errs[worst]:.1e}")


def test_criterion_6_scrambling(verdict):
    stats = scrambling_ensemble(StandardRandom(1.0, 1.0, 0), 100.0, LAM, core.STATES["H"], 10_000, seed=0)
    verdict(6, "random fiber spreads states over the sphere", stats.resultant_length < 0.05,
            f"mean resultant length {stats.resultant_length:.4f}")


def test_criterion_7_beat_length(verdict):
    lb = beat_length(808e-9, 1e-6)
    rel = abs(lb - 0.8) / 0.8
    verdict(7, "beat length", abs(lb - 0.808) < 1e-12 and rel <= 0.015, f"{lb:.3f} m, {rel:.1%} from 0.8 m")


def test_criterion_8_noise_budget(verdict):
    units = [noise_budget(n) for n in (3, 2, 1)]
    rng = np.random.default_rng(8)
    var = [toy_joint_measurement_variance(n, 200_000, rng) for n in (3, 2, 1)]
    ok = units == [2, 1, 0] and var[0] > var[1] > var[2]
    verdict(8, "extra noise units 3->2, 2->1, 1->0 and toy variances ordered", ok,
            f"units {units}, toy variances {', '.join(f'{v:.2f}' for v in var)}")


def test_criterion_9_uncertainty_machinery(verdict):
    rng = np.random.default_rng(9)
    m = random_retarder(rng)
    states = [(lab, psg_state(PsgConfig(), *rs)) for lab, rs in TABLE1_SETTINGS.items()]
    worst = 0.0
    for sigma in (0.001, 0.005, 0.01):
        recs = [MeasurementRecord(lab, s, core.apply(m, s) + sigma * rng.standard_normal((400, 4)))
                for lab, s in states]
        mset = MeasurementSet(recs)
        mc = propagate_uncertainty(mset, 4000, seed=int(sigma * 1e4))
        lin = linear_propagation_sigma(mset)
        worst = max(worst, np.max(np.abs(mc / lin - 1)))
    verdict(9, "Monte Carlo sigmas match linear propagation", worst <= 0.15, f"max relative gap {worst:.1%}")
