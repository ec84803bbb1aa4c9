import csv

import numpy as np
import pytest

from gquasi.energy import energy
from gquasi.fields import refine_field
from gquasi.groups import group
from gquasi.lsc import (
    SequenceSpec,
    build_sequence,
    compose,
    default_limit_map,
    lsc_experiment,
    weak_star_diagnostics,
)
from gquasi.potentials import builtin, gauge, iso_family

GLP2 = group("gl+", 2)
F0 = np.array([[1.1, 0.2], [-0.1, 0.9]])


def test_spec_validation():
    with pytest.raises(ValueError):
        SequenceSpec(generator="spiral")
    with pytest.raises(ValueError):
        SequenceSpec(scales=())
    assert SequenceSpec().describe()["limit_map"] == "identity"


def test_laminate_sequence_weak_star_contract():
    fields = build_sequence(SequenceSpec(scales=(4, 8, 16, 32)), GLP2)
    diag = weak_star_diagnostics(fields)
    assert diag["decaying"] and diag["bounded"]
    ratios = [r["ratio"] for r in diag["rows"][1:]]
    assert all(0.4 <= r <= 0.6 for r in ratios)
    # sup-norm within a factor 2 of C/h with C from the coarsest scale
    C = diag["rows"][0]["sup_norm"] * 4
    for row, h in zip(diag["rows"], (4, 8, 16, 32)):
        assert C / (2 * h) <= row["sup_norm"] <= 2 * C / h


def test_zero_amplitude_sequence_is_identity():
    spec = SequenceSpec(slopes=(0.0, 0.0), scales=(4, 8))
    diag = weak_star_diagnostics(build_sequence(spec, GLP2))
    assert all(r["sup_norm"] == 0.0 for r in diag["rows"])


@pytest.mark.parametrize("generator", ["laminate_scaling", "bump_scaling", "composed"])
def test_det_energy_is_flat(generator):
    spec = SequenceSpec(generator=generator, scales=(4, 8, 16))
    rep = lsc_experiment(builtin("det"), F0, spec, GLP2)
    assert rep.passed
    for _, e in rep.energies:
        assert abs(e - rep.limit_energy) <= 1e-10
    assert rep.limit_energy == pytest.approx(np.linalg.det(F0), abs=1e-12)


@pytest.mark.parametrize("g", ["neg_sum_log", "log_sum_inv"])
def test_endorsed_potentials_pass_on_laminates(g):
    rep = lsc_experiment(iso_family(gauge(g)), F0, SequenceSpec(), GLP2, tol=1e-6)
    assert rep.passed, rep.drop


def test_concave_potential_fails():
    rep = lsc_experiment(-builtin("frobenius_sq"), np.eye(2), SequenceSpec(), GLP2)
    assert rep.verdict == "fail"
    assert rep.drop >= 0.01


def test_verdict_matches_numbers():
    rep = lsc_experiment(builtin("frobenius_sq"), F0, SequenceSpec(scales=(4, 8)), GLP2)
    tail = [e for _, e in rep.energies[1:]]
    assert rep.min_tail_energy == min(tail)
    assert rep.passed == (rep.min_tail_energy >= rep.limit_energy - rep.tol)


def test_composition_obeys_the_chain_rule():
    limit = default_limit_map(2, 4)
    spec = SequenceSpec(generator="composed")
    composed, outer, u = compose(limit, 8.0, spec, GLP2)
    # all three live on the same cell list, so the chain rule is cell-by-cell
    np.testing.assert_allclose(composed.gradients, outer.gradients @ u.gradients, atol=1e-12)
    bound = np.linalg.norm(outer.gradients, 2, axis=(1, 2)).max() * \
        np.linalg.norm(u.gradients, 2, axis=(1, 2)).max()
    assert np.linalg.norm(composed.gradients, 2, axis=(1, 2)).max() <= bound + 1e-12


def test_composed_sequence_converges_to_limit():
    limit = default_limit_map(2, 4)
    fields = build_sequence(SequenceSpec(generator="composed", scales=(4, 8, 16)), GLP2)
    diag = weak_star_diagnostics(fields, limit)
    assert diag["decaying"] and diag["bounded"]


def test_refinement_leaves_sequence_energies_unchanged():
    w = iso_family(gauge("log_sum_inv"))
    for f in build_sequence(SequenceSpec(scales=(4, 8)), GLP2):
        assert energy(w, F0, refine_field(f)) == pytest.approx(energy(w, F0, f), abs=1e-10)


def test_admissibility_failure_names_the_scale():
    spec = SequenceSpec(a=(1.0, 0.0), b=(1.0, 0.0), slopes=(1.5, -1.5), scales=(4, 8))
    with pytest.raises(ValueError, match="h = 4"):
        build_sequence(spec, GLP2)


def test_csv_and_json(tmp_path):
    rep = lsc_experiment(builtin("frobenius_sq"), F0, SequenceSpec(scales=(4, 8)), GLP2)
    path = tmp_path / "seq.csv"
    rep.write_csv(path)
    rows = list(csv.reader(open(path)))
    assert rows[0] == ["h", "energy"] and len(rows) == 3
    assert float(rows[2][1]) == rep.energies[1][1]
    assert '"verdict"' in rep.to_json()
