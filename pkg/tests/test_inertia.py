import math

import pytest
from hypothesis import given, strategies as st

from morphopt.errors import InvalidSpecError
from morphopt.inertia import CylinderSpec, cylinder_inertia, parallel_axis_bound


def test_example_cylinder():
    li = cylinder_inertia(CylinderSpec(0.4, 0.05, 2.0))
    assert li.inertia_about_com == pytest.approx(0.0279167, abs=5e-8)
    assert li.com_offset == pytest.approx(0.2)
    assert li.mass == 2.0


@pytest.mark.parametrize("kwargs", [
    dict(length=0.4, radius=0.05, mass=0.0),
    dict(length=0.0, radius=0.05, mass=1.0),
    dict(length=0.4, radius=-0.01, mass=1.0),
    dict(length=math.nan, radius=0.05, mass=1.0),
])
def test_invalid_cylinders_rejected(kwargs):
    with pytest.raises(InvalidSpecError):
        CylinderSpec(**kwargs)


def test_thin_rod_limit():
    assert cylinder_inertia(CylinderSpec(1.0, 0.0, 3.0)).inertia_about_com == pytest.approx(0.25)


pos = st.floats(1e-3, 10.0)


@given(pos, st.floats(0.0, 1.0), pos)
def test_inertia_positive_and_bounded(length, radius, mass):
    spec = CylinderSpec(length, radius, mass)
    inertia = cylinder_inertia(spec).inertia_about_com
    assert 0 < inertia <= parallel_axis_bound(spec)


@given(pos, st.floats(0.0, 1.0), pos, st.floats(0.1, 10.0))
def test_inertia_linear_in_mass(length, radius, mass, k):
    a = cylinder_inertia(CylinderSpec(length, radius, mass)).inertia_about_com
    b = cylinder_inertia(CylinderSpec(length, radius, k * mass)).inertia_about_com
    assert b == pytest.approx(k * a, rel=1e-12)
