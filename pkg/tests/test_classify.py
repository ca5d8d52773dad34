import numpy as np
import pytest

from cuspkit.classify import (
    clear_domain_memo,
    cusp_count_for_design,
    discriminant_aux,
    discriminant_d4_values,
    domain_label,
    geometric_noncuspidality,
    noncuspidal_iff,
    transition_surfaces,
)
from cuspkit.cusp import find_cusps
from cuspkit.serial3r import Geometry3R


@pytest.mark.parametrize("geom, ident", [
    (Geometry3R(1, 2, 1, 1, 0, alpha2=0.0), 1),
    (Geometry3R(1, 2, 1, 1, 0, alpha3=np.pi), 2),
    (Geometry3R(0, 2, 1, 1, 0, alpha2=-1.0), 3),
    (Geometry3R(1, 0, 1, 1, 0, alpha3=1.0), 4),
    (Geometry3R(1, 2, 1, 0, 0, alpha3=1.0), 5),
    (Geometry3R(1, 2, 1, 0, 0.5), 6),
])
def test_geometric_conditions(geom, ident):
    assert geometric_noncuspidality(geom).identifier == ident


def test_no_condition_for_example(example):
    assert geometric_noncuspidality(example) is None


def test_aux_values():
    a = discriminant_aux(2.0, 1.0)
    assert (a.A, a.B) == pytest.approx((np.sqrt(10.0), np.sqrt(2.0)))


def test_surface_branches():
    lo = discriminant_d4_values(0.5, 1.0)
    hi = discriminant_d4_values(2.0, 1.0)
    assert lo["C2"].valid and not lo["C3"].valid
    assert hi["C3"].valid and not hi["C2"].valid
    assert hi["C3"].value == pytest.approx(2.0 * np.sqrt(2.0))


def test_c4_transition_surface():
    t = transition_surfaces(2.0, 1.0)
    assert t["C4"].value == pytest.approx(2.0 / 3.0 * np.sqrt(10.0))
    assert t["C1"].value == pytest.approx(0.2008, abs=1e-4)


@pytest.mark.parametrize("d3, r2", [(0.0, 1.0), (1.0, 0.0), (2.0, -1.0)])
def test_surface_argument_errors(d3, r2):
    with pytest.raises(ValueError):
        transition_surfaces(d3, r2)


@pytest.mark.parametrize("d4, expected", [(0.19, (True, "first")), (1.0, (False, None)), (3.5, (False, None))])
def test_noncuspidal_iff_branches_d3_above_one(d4, expected):
    assert noncuspidal_iff(Geometry3R(1.0, 2.0, d4, 1.0, 0.0)) == expected


def test_noncuspidal_second_branch(noncuspidal):
    assert noncuspidal_iff(noncuspidal) == (True, "second")


def test_noncuspidal_iff_requires_r3_zero():
    with pytest.raises(ValueError):
        noncuspidal_iff(Geometry3R(1.0, 2.0, 1.5, 1.0, 0.2))


def test_noncuspidal_iff_scale_invariant(example, noncuspidal):
    for g in (example, noncuspidal):
        for lam in (0.1, 3.0, 10.0):
            assert noncuspidal_iff(g.scaled(lam)) == noncuspidal_iff(g)


# counts on either side of each transition surface, from the cusp search
@pytest.mark.parametrize("d3, r2, below, above, name", [
    (2.0, 1.0, 0, 4, "C1"),
    (0.5, 1.0, 0, 4, "C1"),
    (2.0, 1.0, 4, 2, "C4"),
    (0.5, 1.0, 4, 2, "C4"),
    (0.5, 1.0, 2, 0, "C2"),
    (2.0, 1.0, 2, 4, "C3"),
])
def test_counts_across_surfaces(d3, r2, below, above, name):
    v = transition_surfaces(d3, r2)[name].value
    assert len(find_cusps(Geometry3R(1.0, d3, 0.97 * v, r2, 0.0))) == below
    assert len(find_cusps(Geometry3R(1.0, d3, 1.03 * v, r2, 0.0))) == above


def test_domain_label_and_memo(example):
    clear_domain_memo()
    lab = domain_label(example)
    assert lab.expected_count == 4
    assert cusp_count_for_design(example.scaled(2.0)) == 4
    assert domain_label(Geometry3R(1.0, 2.0, 1.5, 0.0, 0.0)).expected_count == 0


def test_domain_label_on_surface_rejected():
    c4 = transition_surfaces(2.0, 1.0)["C4"].value
    with pytest.raises(ValueError):
        domain_label(Geometry3R(1.0, 2.0, c4, 1.0, 0.0))


def test_domain_counts_match_search(rng):
    designs = 0
    while designs < 12:
        d3, d4, r2 = rng.uniform(0.2, 3.0), rng.uniform(0.1, 3.0), rng.uniform(0.1, 2.0)
        g = Geometry3R(1.0, d3, d4, r2, 0.0)
        try:
            expected = cusp_count_for_design(g)
        except ValueError:
            continue
        designs += 1
        assert expected == len(find_cusps(g))
        assert noncuspidal_iff(g)[0] == (expected == 0)
