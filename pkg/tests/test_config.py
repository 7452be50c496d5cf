import json

import pytest

from boreg.config import ConfigError, RunConfig, load, parse, preset_names, read_text, validate
from boreg.datum import Mollified, OneSidedSingular

PRESETS = ["corollary-backward", "defocussing-mirror", "energy-identity", "gkdv-comparison",
           "mollification-ladder", "theorem1-forward", "window-sweep"]


def base() -> dict:
    return parse(*read_text("preset:theorem1-forward"))


class TestPresets:
    def test_names(self):
        assert preset_names() == sorted(PRESETS)

    @pytest.mark.parametrize("name", PRESETS)
    def test_load(self, name):
        assert isinstance(load(f"preset:{name}"), RunConfig)

    def test_unknown_preset(self):
        with pytest.raises(ConfigError, match="unknown preset"):
            load("preset:nope")

    def test_backward_and_defocusing(self):
        assert load("preset:corollary-backward").solver.t_end < 0
        assert load("preset:defocussing-mirror").pde.focusing_sign == -1
        assert load("preset:gkdv-comparison").pde.family.value == "gKdV"

    def test_defaults(self):
        cfg = load(None)
        assert cfg.grid.n == 1024 and cfg.seed == 0


class TestValidation:
    def test_unknown_key_path(self):
        data = base()
        data["solver"]["step"] = 0.1
        with pytest.raises(ConfigError) as info:
            validate(data)
        assert info.value.path == "solver.step"

    def test_b_below_five_eps(self):
        data = base()
        data["windows"][0]["b"] = 2.0
        with pytest.raises(ConfigError) as info:
            validate(data)
        assert info.value.path == "windows.0.b"
        assert "b >= 5*eps" in info.value.message

    def test_unresolved_window(self):
        data = base()
        data["grid"]["n"] = 64
        data["windows"][0].update(eps=0.1, b=0.5)
        with pytest.raises(ConfigError, match="4 grid cells"):
            validate(data)

    def test_grid_power_of_two(self):
        data = base()
        data["grid"]["n"] = 1000
        with pytest.raises(ConfigError) as info:
            validate(data)
        assert info.value.path == "grid.n"

    def test_gamma_path_strips_tag(self):
        data = base()
        data["datum"]["profile"]["gamma"] = 2.5
        with pytest.raises(ConfigError) as info:
            validate(data)
        assert info.value.path.startswith("datum.profile")
        assert "one_sided" not in info.value.path

    def test_duplicate_window_labels(self):
        data = base()
        data["windows"][1]["name"] = "E2"
        with pytest.raises(ConfigError, match="unique"):
            validate(data)

    def test_bo_power(self):
        data = base()
        data["pde"] = {"family": "BO", "k": 2}
        with pytest.raises(ConfigError):
            validate(data)

    def test_malformed_toml(self):
        with pytest.raises(ConfigError, match="malformed"):
            parse("grid = [", "toml")

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="cannot read"):
            load(str(tmp_path / "absent.toml"))

    def test_json_file(self, tmp_path):
        p = tmp_path / "c.json"
        p.write_text(json.dumps(base()))
        assert load(str(p)) == validate(base())


class TestRunConfig:
    def test_hash_stable_and_seed_sensitive(self):
        a, b = validate(base()), validate(base())
        assert a.config_hash() == b.config_hash()
        assert a.with_seed(5).config_hash() != a.config_hash()
        assert a.with_seed(None) is a

    def test_datum_build(self):
        cfg = validate(base())
        spec = cfg.datum.build(cfg.grid.build())
        assert isinstance(spec, Mollified) and isinstance(spec.inner, OneSidedSingular)
        assert spec.tau == pytest.approx(cfg.grid.build().spacing)
        assert cfg.datum.build(cfg.grid.build(), tau_cells=2.0).tau == pytest.approx(2 * spec.tau)

    def test_frozen(self):
        cfg = validate(base())
        with pytest.raises(Exception):
            cfg.seed = 3


class TestSweep:
    def test_points(self):
        cfg = load("preset:window-sweep")
        pts = cfg.sweep.points()
        assert pts == [{"eps": 0.1, "b": 0.5, "v": 1.0}, {"eps": 0.1, "b": 0.5, "v": 2.0},
                       {"eps": 0.2, "b": 1.0, "v": 1.0}, {"eps": 0.2, "b": 1.0, "v": 2.0}]

    def test_eps_b_exclusive(self):
        data = base()
        data["sweep"] = {"eps_b": [[0.1, 0.5]], "eps": [0.1]}
        with pytest.raises(ConfigError, match="eps_b"):
            validate(data)

    def test_size_guard(self):
        data = base()
        data["sweep"] = {"v": [1.0] * 200, "m": [1] * 100}
        with pytest.raises(ConfigError, match="limit"):
            validate(data)

    def test_empty_axis(self):
        data = base()
        data["sweep"] = {"v": []}
        with pytest.raises(ConfigError, match="empty"):
            validate(data)
