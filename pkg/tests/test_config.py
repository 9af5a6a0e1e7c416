import pytest
import yaml

from fcsizing.config import ConfigError, load_config, parse_config


def bundled():
    return load_config()


def test_bundled_case():
    cfg = bundled()
    gens = cfg.plant.generators
    assert [g.name for g in gens] == ["GT1", "GT2", "GT3", "GT4"]
    assert all(g.p_max == 45.0 and g.inertia_h == 5.51 and g.rr_frr == 0.208 for g in gens)
    assert cfg.plant.pv_inst_max == 200.0
    assert cfg.plant.freq.r_ss == 0.01 and cfg.plant.freq.r_tr == 0.03
    assert cfg.econ.c_pv == 400.0 and cfg.econ.c_bat == 250.0
    assert cfg.solver.gap == 0.01


def test_fuel_scale_applied():
    assert bundled().plant.generators[0].fuel_a == pytest.approx(13782.0 * 0.018613)


def test_with_robust():
    cfg = bundled().with_robust(True)
    assert cfg.plant.freq.robust_mode and not bundled().plant.freq.robust_mode


def raw():
    from importlib import resources
    return yaml.safe_load(resources.files("fcsizing.data").joinpath("og_installation_160mw.yaml").read_text())


@pytest.mark.parametrize("edit, fragment", [
    (lambda d: d.update(colour="red"), "unknown top-level"),
    (lambda d: d["plant"].update(wat=1), "plant"),
    (lambda d: d["generators"][0].update(rr_frr=-1), "generators[0]"),
    (lambda d: d.update(generators=[]), "at least one generator"),
    (lambda d: d["economics"].update(e=1.5), "economics"),
    (lambda d: d["simulation"].update(speed=3), "unknown key"),
])
def test_bad_values_name_section(edit, fragment):
    d = raw()
    edit(d)
    with pytest.raises(ConfigError) as info:
        parse_config(d, "case.yaml")
    assert str(info.value).startswith("case.yaml: ") and fragment in str(info.value)


def test_yaml_syntax_error_has_line(tmp_path):
    p = tmp_path / "bad.yaml"
    p.write_text("case: x\nplant: [1, 2\n")
    with pytest.raises(ConfigError, match=r"line \d+"):
        load_config(p)


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(tmp_path / "nope.yaml")


def test_roundtrip_via_file(tmp_path):
    p = tmp_path / "c.yaml"
    d = raw()
    d["generators"][0]["count"] = 2
    p.write_text(yaml.safe_dump(d))
    cfg = load_config(p)
    assert len(cfg.plant.generators) == 2 and cfg.case == "og_installation_160mw"
