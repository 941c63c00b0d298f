import pytest

from aiphase import config
from aiphase.config import ConfigError

BASE = {
    "atom": "mass_kg = 1.443e-25",
    "laser": "k_per_m = 1.61e7\nalpha_rad_per_s2 = 0.0",
    "geometry": "T_s = 0.5\ntau_s = 1e-5",
    "potential": "g_m_per_s2 = 9.81",
}


def doc(**override):
    tables = {**BASE, **override}
    return "\n".join(f"[{k}]\n{v}" for k, v in tables.items() if v is not None)


def test_minimal_document():
    sc = config.parse(doc())
    assert sc.seq.T == 0.5 and sc.perturbation is None and sc.kin.sigma_v == 0


def test_selection_time_sets_velocity_spread():
    sc = config.parse(doc(geometry="T_s = 0.5\ntau_s = 1e-5\ntau_select_s = 1e-4"))
    assert sc.kin.sigma_v == pytest.approx(1 / (1.61e7 * 1e-4))


@pytest.mark.parametrize("text, msg", [
    (doc(extra="x = 1"), "unknown table"),
    (doc(atom="mass_kg = 1.0\nmass = 2.0"), "unknown key"),
    (doc(atom=None), "missing table"),
    (doc(geometry="T_s = 0.5"), "missing key"),
    (doc(laser="k_per_m = 1.61e7"), "exactly one"),
    (doc(laser="k_per_m = 1.61e7\nalpha_rad_per_s2 = 0.0\nkg_minus_alpha_rad_per_s2 = 1.0"),
     "exactly one"),
    (doc(atom='mass_kg = "heavy"'), "wrong type"),
    (doc(atom="mass_kg = true"), "must be a number"),
    (doc(potential="g_m_per_s2 = 9.81\nperturbation_poly = [1, \"a\"]"), "perturbation_poly"),
    (doc(pulses='shape = "square"'), "pulses.shape"),
    (doc(pulses="area_scale = 1.01"), "area_scale"),
    (doc(geometry="T_s = 0.5\ntau_s = 0.3"), "tau"),
    ("[atom\n", "TOML syntax"),
])
def test_rejections(text, msg):
    with pytest.raises(ConfigError, match=msg):
        config.parse(text)


def test_non_ideal_rect_pulses():
    sc = config.parse(doc(pulses='shape = "rect"\nideal = false\narea_scale = 1.01'))
    assert not sc.seq.ideal


def test_gauss_pulses():
    assert config.parse(doc(pulses='shape = "gauss"')).seq.ideal


def test_file_pulses_relative_to_config(tmp_path):
    (tmp_path / "p.txt").write_text("0 0\n0.5 1\n1 0\n")
    path = tmp_path / "s.toml"
    path.write_text(doc(pulses='shape = "file"\nfile = "p.txt"'))
    assert config.load(path).seq.ideal


def test_polynomial_perturbation():
    sc = config.parse(doc(potential="g_m_per_s2 = 9.81\nperturbation_poly = [0, 0, 0, 1e-31]"))
    assert sc.perturbation.degree == 3
