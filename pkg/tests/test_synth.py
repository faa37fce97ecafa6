import numpy as np
import pytest

from fairkit.cohort import write_csv
from fairkit.errors import SpecInvalid
from fairkit.synth import CohortSpec, expected_prevalence, generate_cohort, load_cohort_spec, solve_intercept

GAP = [("A", 0.5, 0.10), ("B", 0.5, 0.04)]


def test_prevalences_hit_targets():
    c = generate_cohort(CohortSpec(20000, GAP, seed=1))
    g = c.groups("group")
    assert abs(c.outcome[g == "A"].mean() - 0.10) <= 0.01
    assert abs(c.outcome[g == "B"].mean() - 0.04) <= 0.01


def test_zero_proxy_is_noise():
    c = generate_cohort(CohortSpec(20000, GAP, proxy_strength=0.0, seed=2))
    ind = (c.groups("group") == "A").astype(float)
    assert abs(np.corrcoef(c.columns["proxy"], ind)[0, 1]) <= 0.03


def test_proxy_strength_sets_correlation():
    c = generate_cohort(CohortSpec(20000, GAP, proxy_strength=0.5, seed=2))
    ind = (c.groups("group") == "A").astype(float)
    assert abs(np.corrcoef(c.columns["proxy"], ind)[0, 1] - 0.5) <= 0.03


def test_byte_identical(tmp_path):
    spec = CohortSpec(500, GAP, seed=9)
    write_csv(generate_cohort(spec), tmp_path / "a.csv")
    write_csv(generate_cohort(spec), tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_intercept_calibration():
    for prev in (0.01, 0.04, 0.1, 0.5, 0.93):
        assert abs(expected_prevalence(solve_intercept(prev)) - prev) <= 1e-4


@pytest.mark.parametrize("bad", [
    dict(n=50, groups=GAP),
    dict(n=500, groups=[("A", 1.0, 0.1)]),
    dict(n=500, groups=[("A", 0.6, 0.1), ("B", 0.6, 0.1)]),
    dict(n=500, groups=[("A", 0.5, 0.0), ("B", 0.5, 0.1)]),
    dict(n=500, groups=GAP, proxy_strength=1.5),
])
def test_invalid_specs(bad):
    with pytest.raises(SpecInvalid):
        CohortSpec(**bad)


def test_spec_file(tmp_path):
    (tmp_path / "s.yaml").write_text(
        "n: 300\nseed: 4\ngroups:\n- {label: F, proportion: 0.5, prevalence: 0.2}\n"
        "- {label: M, proportion: 0.5, prevalence: 0.1}\n")
    spec = load_cohort_spec(tmp_path / "s.yaml")
    assert spec.n == 300 and spec.groups[0].label == "F"
    assert CohortSpec.from_dict(spec.to_dict()) == spec
    (tmp_path / "t.yaml").write_text("n: 300\nbogus: 1\ngroups: []\n")
    with pytest.raises(SpecInvalid):
        load_cohort_spec(tmp_path / "t.yaml")
