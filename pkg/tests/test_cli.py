import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from holonomy_lab.cli import main

CONFIGS = Path(__file__).resolve().parents[1] / "demos" / "configs"


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def write(tmp_path, name, obj):
    p = tmp_path / name
    p.write_text(json.dumps(obj))
    return p


class TestHolonomicDist:
    @pytest.mark.parametrize("u", [[0.3, 0.1], [2.0, -1.0], [0.0, 0.4]])
    def test_z2_antipodal_pair(self, capsys, u):
        cfg = CONFIGS / "z2_holonomic.json"
        v = [-x for x in u]
        code, out, _ = run(capsys, "holonomic-dist", "--config", cfg, "--u", *u, "--v", *v)
        assert code == 0
        c = json.loads(cfg.read_text())["space"]["group"]["elements"][1]["norm"]
        assert json.loads(out)["distance"] == pytest.approx(min(2 * np.linalg.norm(u), c))

    def test_config_vectors(self, capsys):
        code, out, _ = run(capsys, "holonomic-dist", "--config", CONFIGS / "sphere_holonomic.json")
        assert code == 0 and json.loads(out)["distance"] >= 0

    def test_missing_vector(self, capsys, tmp_path):
        cfg = write(tmp_path, "c.json", {"space": {"k": 2, "group": {"type": "trivial"}}, "u": [0, 1]})
        code, _, err = run(capsys, "holonomic-dist", "--config", cfg)
        assert code == 2 and "v" in err


class TestOtherCommands:
    def test_gh_identity_on_identical_files(self, capsys):
        x = CONFIGS / "gh_x.json"
        code, out, _ = run(capsys, "gh-bound", x, x, "--correspondence", "identity")
        assert code == 0 and json.loads(out)["gh_upper"] == 0.0

    def test_gh_two_lines(self, capsys):
        code, out, _ = run(capsys, "gh-bound", CONFIGS / "gh_x.json", CONFIGS / "gh_y.json")
        assert code == 0 and json.loads(out)["gh_upper"] == pytest.approx(0.1)

    def test_gh_explicit_pairs(self, capsys, tmp_path):
        corr = write(tmp_path, "r.json", {"pairs": [[0, 0], [1, 1], [2, 2]]})
        code, out, _ = run(capsys, "gh-bound", CONFIGS / "gh_x.json", CONFIGS / "gh_y.json",
                           "--correspondence", corr)
        assert code == 0 and json.loads(out)["distortion"] == pytest.approx(0.2)

    def test_sasaki_torus_and_curves(self, capsys, tmp_path):
        code, out, _ = run(capsys, "sasaki-dist", "--config", CONFIGS / "torus_sasaki.json", "--out", tmp_path)
        res = json.loads(out)
        assert code == 0 and res["exact"]
        assert (tmp_path / "curves.csv").read_text().strip()
        assert json.loads((tmp_path / "sasaki_dist.json").read_text()) == res

    def test_sasaki_sphere(self, capsys):
        code, out, _ = run(capsys, "sasaki-dist", "--config", CONFIGS / "sphere_sasaki.json")
        res = json.loads(out)
        assert code == 0 and not res["exact"] and res["distance"] >= res["lower_bound"]

    def test_quotient(self, capsys, tmp_path):
        code, out, _ = run(capsys, "quotient", "--config", CONFIGS / "quotient_so2.json", "--out", tmp_path)
        assert code == 0 and json.loads(out)["n_classes"] == 6
        assert (tmp_path / "quotient.csv").exists()

    def test_wane(self, capsys):
        code, out, _ = run(capsys, "wane", "--config", CONFIGS / "wane_sphere.json")
        res = json.loads(out)
        assert code == 0 and res["residual"] < 1e-3 and not res["unclassified"]


class TestExperiment:
    def test_totcollapse_rows_and_determinism(self, capsys, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        for d in (a, b):
            code, _, _ = run(capsys, "experiment", "totcollapse", "--i-max", 16, "--seed", 0, "--out", d)
            assert code == 0
        rows = (a / "rows.csv").read_text().splitlines()
        assert rows[0] == "i,gh_bound,budget,pass" and len(rows) == 17
        assert (a / "rows.csv").read_bytes() == (b / "rows.csv").read_bytes()
        assert json.loads((a / "report.json").read_text())["passed"] is True

    def test_flatstrip_via_config(self, capsys, tmp_path):
        cfg = write(tmp_path, "c.json", {"seed": 1})
        code, out, _ = run(capsys, "experiment", "flatstrip", "--config", cfg, "--out", tmp_path)
        assert code == 0 and "flatstrip: pass" in out


class TestUsageErrors:
    def test_unknown_subcommand(self, capsys):
        with pytest.raises(SystemExit) as e:
            main(["frobnicate"])
        assert e.value.code == 2

    def test_unknown_scenario(self, capsys):
        with pytest.raises(SystemExit) as e:
            main(["experiment", "nosuch"])
        assert e.value.code == 2

    def test_bad_config(self, capsys, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        assert run(capsys, "quotient", "--config", bad)[0] == 2
        cfg = write(tmp_path, "c.json", {"colour": "red"})
        assert run(capsys, "experiment", "flatstrip", "--config", cfg)[0] == 2
        cfg = write(tmp_path, "d.json", {"i_max": 1})
        assert run(capsys, "experiment", "totcollapse", "--config", cfg)[0] == 2
        assert run(capsys, "quotient", "--config", tmp_path / "missing.json")[0] == 2

    def test_module_entry_point(self):
        r = subprocess.run([sys.executable, "-m", "holonomy_lab", "gh-bound", str(CONFIGS / "gh_x.json"),
                            str(CONFIGS / "gh_x.json")], capture_output=True, text=True)
        assert r.returncode == 0 and json.loads(r.stdout)["gh_upper"] == 0.0
