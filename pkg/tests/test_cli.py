import json

import numpy as np
import pytest

from wassgeo import DiscreteMeasure, load_measure_csv, save_measure_csv
from wassgeo import cli
from wassgeo.render import raster_to_pgm
from wassgeo.transport import NumericalError


def write_toy_measures(tmp_path, seed=0, count=3, atoms=4):
    rng = np.random.default_rng(seed)
    shape = rng.standard_normal((2, atoms))
    paths = []
    for i in range(count):
        shift = np.array([1.5 * i, 0.1 * i])
        m = DiscreteMeasure.uniform(shape + shift[:, None])
        path = tmp_path / f"measure{i}.csv"
        save_measure_csv(m, path)
        paths.append(path)
    return paths


class TestBarycenterCommand:
    def test_exact_mode(self, tmp_path):
        paths = write_toy_measures(tmp_path)
        out = tmp_path / "bary.csv"
        rc = cli.main([
            "barycenter", "--mode", "exact", "--output", str(out),
            *map(str, paths),
        ])
        assert rc == 0
        bary = load_measure_csv(out)
        assert bary.d == 2

    def test_free_mode(self, tmp_path):
        paths = write_toy_measures(tmp_path)
        out = tmp_path / "bary_free.csv"
        rc = cli.main([
            "barycenter", "--mode", "free", "--p", "4", "--seed", "1",
            "--output", str(out), *map(str, paths),
        ])
        assert rc == 0
        assert load_measure_csv(out).n <= 4

    def test_fixed_mode_requires_grid(self, tmp_path):
        paths = write_toy_measures(tmp_path)
        rc = cli.main(["barycenter", "--mode", "fixed", *map(str, paths)])
        assert rc == 1


class TestInterpolateCommand:
    def test_writes_samples_and_plan(self, tmp_path):
        paths = write_toy_measures(tmp_path, count=2)
        outdir = tmp_path / "interp"
        rc = cli.main([
            "interpolate", "--t-samples", "3", "--export-plan",
            "--output-dir", str(outdir), str(paths[0]), str(paths[1]),
        ])
        assert rc == 0
        files = sorted(p.name for p in outdir.iterdir())
        assert "interp_t0.0000.csv" in files
        assert "interp_t0.5000.csv" in files
        assert "interp_t1.0000.csv" in files
        assert "plan.csv" in files
        plan_lines = (outdir / "plan.csv").read_text().splitlines()
        assert plan_lines[0] == "row,col,mass"
        total = sum(float(line.split(",")[2]) for line in plan_lines[1:])
        assert total == pytest.approx(1.0, abs=1e-9)


class TestWpgCommand:
    def run_wpg(self, tmp_path, outdir, seed=0):
        paths = write_toy_measures(tmp_path)
        bary = tmp_path / "bary.csv"
        assert cli.main([
            "barycenter", "--mode", "exact", "--output", str(bary),
            *map(str, paths),
        ]) == 0
        rc = cli.main([
            "wpg", "--components", "1", "--grid-k", "7", "--max-iter", "12",
            "--seed", str(seed), "--base", str(bary),
            "--output-dir", str(outdir), *map(str, paths),
        ])
        assert rc == 0
        return outdir / "manifest.json"

    def test_manifest_schema(self, tmp_path):
        manifest_path = self.run_wpg(tmp_path, tmp_path / "out")
        manifest = json.loads(manifest_path.read_text())
        assert set(manifest) >= {"config", "base_measure_path", "components"}
        comp = manifest["components"][0]
        assert set(comp) >= {
            "v1_path", "v2_path", "samples", "objective_trace", "projection_times"
        }
        assert [s["t"] for s in comp["samples"]] == [0.0, 0.25, 0.5, 0.75, 1.0]
        outdir = manifest_path.parent
        for s in comp["samples"]:
            assert (outdir / s["path"]).exists()
        assert (outdir / manifest["base_measure_path"]).exists()
        assert (outdir / comp["v1_path"]).exists()

    def test_manifest_input_listing(self, tmp_path):
        paths = write_toy_measures(tmp_path)
        listing = tmp_path / "inputs.json"
        listing.write_text(json.dumps({"measures": [p.name for p in paths]}))
        bary = tmp_path / "bary.csv"
        cli.main([
            "barycenter", "--mode", "exact", "--output", str(bary),
            *map(str, paths),
        ])
        rc = cli.main([
            "wpg", "--grid-k", "5", "--max-iter", "5", "--base", str(bary),
            "--output-dir", str(tmp_path / "out2"), str(listing),
        ])
        assert rc == 0


class TestRenderCommand:
    def test_scatter(self, tmp_path):
        paths = write_toy_measures(tmp_path)
        rc = cli.main([
            "render", "--kind", "scatter", "--output-dir", str(tmp_path / "r"),
            *map(str, paths),
        ])
        assert rc == 0
        assert (tmp_path / "r" / "scatter.svg").read_text().startswith("<svg")

    def test_raster(self, tmp_path):
        paths = write_toy_measures(tmp_path, count=1)
        rc = cli.main([
            "render", "--kind", "raster", "--raster-size", "8", "8",
            "--output-dir", str(tmp_path / "r"), str(paths[0]),
        ])
        assert rc == 0
        assert (tmp_path / "r" / "measure0.pgm").read_text().startswith("P2")

    def test_palette(self, tmp_path):
        m = DiscreteMeasure(
            np.array([[0.1, 0.9], [0.2, 0.8], [0.3, 0.7]]), np.array([0.5, 0.5])
        )
        path = tmp_path / "colors.csv"
        save_measure_csv(m, path)
        rc = cli.main([
            "render", "--kind", "palette", "--output-dir", str(tmp_path / "r"),
            str(path),
        ])
        assert rc == 0
        assert (tmp_path / "r" / "colors.ppm").read_text().startswith("P3")


class TestIngestCommands:
    def test_ingest_images(self, tmp_path):
        rng = np.random.default_rng(1)
        img = rng.random((6, 6))
        pgm = tmp_path / "digit.pgm"
        pgm.write_text(raster_to_pgm(img))
        rc = cli.main([
            "ingest-images", "--output-dir", str(tmp_path / "m"), str(pgm),
        ])
        assert rc == 0
        m = load_measure_csv(tmp_path / "m" / "digit.csv")
        assert m.d == 2

    def test_ingest_colors_from_csv(self, tmp_path):
        rng = np.random.default_rng(2)
        pixels = rng.random((40, 3))
        src = tmp_path / "pixels.csv"
        np.savetxt(src, pixels, delimiter=",")
        rc = cli.main([
            "ingest-colors", "--k", "4", "--seed", "3",
            "--output-dir", str(tmp_path / "m"), str(src),
        ])
        assert rc == 0
        m = load_measure_csv(tmp_path / "m" / "pixels.csv")
        assert m.d == 3 and m.n <= 4

    def test_json_format_output(self, tmp_path):
        rng = np.random.default_rng(3)
        img = rng.random((4, 4))
        pgm = tmp_path / "digit.pgm"
        pgm.write_text(raster_to_pgm(img))
        rc = cli.main([
            "ingest-images", "--format", "json",
            "--output-dir", str(tmp_path / "m"), str(pgm),
        ])
        assert rc == 0
        payload = json.loads((tmp_path / "m" / "digit.json").read_text())
        assert set(payload) == {"weights", "locations"}


class TestExitCodes:
    def test_usage_error_is_one(self):
        assert cli.main(["barycenter"]) == 1  # missing --mode and inputs
        assert cli.main(["no-such-command"]) == 1

    def test_missing_file_is_one(self, tmp_path):
        rc = cli.main([
            "barycenter", "--mode", "exact", str(tmp_path / "missing.csv"),
        ])
        assert rc == 1

    def test_numerical_failure_is_two(self, tmp_path, monkeypatch):
        paths = write_toy_measures(tmp_path)

        def boom(*args, **kwargs):
            raise NumericalError("synthetic failure")

        monkeypatch.setattr(cli, "barycenter_multimarginal_exact", boom)
        rc = cli.main(["barycenter", "--mode", "exact", *map(str, paths)])
        assert rc == 2
