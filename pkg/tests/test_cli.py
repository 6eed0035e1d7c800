import json

import numpy as np
import pytest

from ert_estimator.cli import main
from ert_estimator.ert import forward_point
from ert_estimator.fbp import smoothed_image
from ert_estimator.formats import read_grid, read_observations, read_risk, read_sinogram, sidecar_path
from ert_estimator.models import Disk, Phantom, RateFit, Ray


def test_sinogram_of_zero_phantom(tmp_path, phantom_file, empty_phantom):
    out = tmp_path / "zero.sino"
    code = main(["sinogram", "--phantom", str(phantom_file(empty_phantom)), "--ntheta", "8",
                 "--ns", "16", "--mu", "0.5", "--out", str(out)])
    assert code == 0
    g = read_sinogram(out)
    assert g.values.shape == (8, 16)
    assert np.all(g.values == 0.0)


def test_sinogram_of_disk(tmp_path, phantom_file):
    phantom = Phantom(components=(Disk(center=(0.0, 0.0), radius=1.0, amplitude=1.0),))
    out, csv = tmp_path / "disk.sino", tmp_path / "disk.csv"
    code = main(["sinogram", "--phantom", str(phantom_file(phantom)), "--ntheta", "4", "--ns", "8",
                 "--mu", "1.0", "--out", str(out), "--csv", str(csv)])
    assert code == 0
    g = read_sinogram(out)
    for j, phi in enumerate(g.phis):
        for k, s in enumerate(g.s_nodes):
            ray = Ray(phi=phi, s=s)
            assert g.values[j, k] == pytest.approx(forward_point(phantom, ray, 1.0), abs=1e-12)
    assert csv.read_text().startswith("phi,s,value\n")


def test_missing_required_option(tmp_path, phantom_file, unit_bump, capsys):
    assert main(["sinogram", "--phantom", str(phantom_file(unit_bump))]) == 2
    assert "error" in capsys.readouterr().err


def test_unknown_subcommand():
    assert main(["transmogrify"]) == 2


def test_fbp_of_zero_sinogram(tmp_path, phantom_file, empty_phantom):
    sino, image = tmp_path / "zero.sino", tmp_path / "zero.grid"
    assert main(["sinogram", "--phantom", str(phantom_file(empty_phantom)), "--ntheta", "8",
                 "--ns", "16", "--mu", "0.5", "--out", str(sino)]) == 0
    assert main(["fbp", "--sinogram", str(sino), "--rho", "0.2", "--nside", "8", "--out", str(image)]) == 0
    grid = read_grid(image)
    assert grid.n_side == 8
    assert np.all(grid.values == 0.0)


def test_fbp_rejects_nonpositive_bandwidth(tmp_path, phantom_file, empty_phantom):
    sino = tmp_path / "zero.sino"
    main(["sinogram", "--phantom", str(phantom_file(empty_phantom)), "--ntheta", "4", "--ns", "8",
          "--out", str(sino)])
    assert main(["fbp", "--sinogram", str(sino), "--rho", "0", "--out", str(tmp_path / "x.grid")]) == 2
    assert main(["fbp", "--sinogram", str(sino), "--rho", "-1", "--out", str(tmp_path / "x.grid")]) == 2


def test_phantom_command(tmp_path, phantom_file, unit_bump, capsys):
    out = tmp_path / "bump.bin"
    code = main(["phantom", "--phantom", str(phantom_file(unit_bump)), "--nside", "16", "--out", str(out),
                 "--beta", "2", "--binary"])
    assert code == 0
    assert read_grid(out).n_side == 16
    assert "certified H(beta=2" in capsys.readouterr().out


def test_phantom_command_declines_disks(tmp_path, phantom_file, centered_disk):
    code = main(["phantom", "--phantom", str(phantom_file(centered_disk)), "--nside", "8",
                 "--out", str(tmp_path / "disk.grid"), "--beta", "2"])
    assert code == 2


def test_estimate_rejects_zero_observations(tmp_path, phantom_file, unit_bump):
    code = main(["estimate", "--phantom", str(phantom_file(unit_bump)), "--n", "0",
                 "--out", str(tmp_path / "est.grid")])
    assert code == 2


def test_noiseless_estimate_tracks_smoothed_phantom(tmp_path, phantom_file, unit_bump):
    out = tmp_path / "est.grid"
    code = main(["estimate", "--phantom", str(phantom_file(unit_bump)), "--n", "100000", "--noise", "none",
                 "--rho", "0.2", "--nside", "16", "--seed", "3", "--out", str(out)])
    assert code == 0
    estimate = read_grid(out).values
    oracle = smoothed_image(unit_bump, 0.2, 16).values
    assert np.max(np.abs(estimate - oracle)) < 0.05 * np.max(oracle)


def test_estimate_is_reproducible(tmp_path, phantom_file, unit_bump):
    path = str(phantom_file(unit_bump))
    args = ["estimate", "--phantom", path, "--n", "2000", "--mu", "0.5", "--sigma", "0.1", "--nside", "8",
            "--seed", "42"]
    first, second = tmp_path / "a.grid", tmp_path / "b.grid"
    assert main(args + ["--out", str(first), "--observations", str(tmp_path / "obs.csv")]) == 0
    assert main(args + ["--out", str(second)]) == 0
    assert first.read_bytes() == second.read_bytes()

    obs = read_observations(tmp_path / "obs.csv")
    assert obs.n == 2000
    assert obs.seed == 42


def test_risk_on_zero_phantom_declines_the_fit(tmp_path, phantom_file, empty_phantom):
    out = tmp_path / "risk.csv"
    code = main(["risk", "--phantom", str(phantom_file(empty_phantom)), "--noise", "none",
                 "--n-values", "100,300,1000", "--trials", "3", "--out", str(out)])
    assert code == 3
    rows = read_risk(out)
    assert [row.n for row in rows] == [100, 300, 1000]
    assert all(row.risk == 0.0 for row in rows)
    assert not sidecar_path(out).exists()


def test_risk_writes_rate_fit(tmp_path, phantom_file, unit_bump):
    out = tmp_path / "risk.csv"
    code = main(["risk", "--phantom", str(phantom_file(unit_bump)), "--mu", "0.5", "--sigma", "0.2",
                 "--n-values", "200,400,800", "--trials", "4", "--x0", "0.1,0.2", "--out", str(out)])
    assert code == 0
    assert len(read_risk(out)) == 3
    fit = RateFit.model_validate_json(sidecar_path(out).read_text())
    assert fit.theory_slope == pytest.approx(-0.4)


def test_rate_fit_command(tmp_path, capsys):
    path = tmp_path / "risk.csv"
    lines = ["n,rho,risk,stderr,bias_sq,variance"]
    for n in (1000, 10_000, 100_000):
        lines.append(f"{n},0.1,{3.0 * n ** -0.4!r},0,0,0")
    path.write_text("\n".join(lines) + "\n")

    assert main(["rate-fit", "--risk", str(path), "--beta", "2"]) == 0
    fit = RateFit.model_validate_json(capsys.readouterr().out.strip())
    assert fit.slope == pytest.approx(-0.4, abs=1e-10)
    assert fit.r_squared == pytest.approx(1.0)


def test_rate_fit_needs_three_rows(tmp_path):
    path = tmp_path / "risk.csv"
    path.write_text("n,rho,risk,stderr,bias_sq,variance\n1000,0.1,0.01,0,0,0\n")
    assert main(["rate-fit", "--risk", str(path)]) == 2


def test_flags_override_config_file(tmp_path, phantom_file, empty_phantom):
    config = tmp_path / "run.json"
    out = tmp_path / "zero.sino"
    config.write_text(json.dumps({
        "phantom": str(phantom_file(empty_phantom)), "ntheta": 4, "ns": 8, "mu": 0.25, "out": str(out),
    }))
    assert main(["sinogram", "--config", str(config), "--ns", "12"]) == 0
    g = read_sinogram(out)
    assert (g.n_theta, g.n_s, g.mu) == (4, 12, 0.25)


def test_unknown_config_keys_are_rejected(tmp_path, phantom_file, empty_phantom):
    config = tmp_path / "run.json"
    config.write_text(json.dumps({"phantom": str(phantom_file(empty_phantom)), "out": "x.sino", "nthetas": 4}))
    assert main(["sinogram", "--config", str(config)]) == 2


def test_json_outputs_with_sidecars_are_rejected(tmp_path, phantom_file, unit_bump):
    path = str(phantom_file(unit_bump))
    out = tmp_path / "risk.json"
    assert main(["risk", "--phantom", path, "--n-values", "100,200,400", "--trials", "2",
                 "--out", str(out)]) == 2
    assert not out.exists()

    observations = tmp_path / "obs.json"
    assert main(["estimate", "--phantom", path, "--n", "100", "--nside", "4", "--out", str(tmp_path / "e.grid"),
                 "--observations", str(observations)]) == 2
    assert not observations.exists()


def _outputs(tmp_path, label, names):
    folder = tmp_path / label
    folder.mkdir()
    return [folder / name for name in names]


def test_phantom_command_is_byte_identical(tmp_path, phantom_file, offset_bump):
    path = str(phantom_file(offset_bump))
    first, = _outputs(tmp_path, "a", ["p.grid"])
    second, = _outputs(tmp_path, "b", ["p.grid"])
    assert main(["phantom", "--phantom", path, "--nside", "16", "--out", str(first)]) == 0
    assert main(["phantom", "--phantom", path, "--nside", "16", "--out", str(second)]) == 0
    assert first.read_bytes() == second.read_bytes()


def test_sinogram_and_fbp_do_not_depend_on_thread_count(tmp_path, phantom_file, offset_bump):
    path = str(phantom_file(offset_bump))
    files = {}
    for threads in ("1", "4"):
        sino, csv, image = _outputs(tmp_path, f"t{threads}", ["g.sino", "g.csv", "r.grid"])
        assert main(["sinogram", "--phantom", path, "--ntheta", "12", "--ns", "24", "--mu", "0.6",
                     "--threads", threads, "--out", str(sino), "--csv", str(csv)]) == 0
        assert main(["fbp", "--sinogram", str(sino), "--rho", "0.2", "--nside", "12", "--threads", threads,
                     "--out", str(image)]) == 0
        files[threads] = [p.read_bytes() for p in (sino, csv, image)]
    assert files["1"] == files["4"]


def test_risk_and_rate_fit_are_byte_identical(tmp_path, phantom_file, unit_bump):
    path = str(phantom_file(unit_bump))
    args = ["risk", "--phantom", path, "--mu", "0.5", "--sigma", "0.2", "--n-values", "200,400,800",
            "--trials", "4", "--seed", "9"]
    files = []
    for label, threads in (("a", "1"), ("b", "1"), ("c", "4")):
        risk, fit = _outputs(tmp_path, label, ["risk.csv", "fit.json"])
        assert main(args + ["--threads", threads, "--out", str(risk)]) == 0
        assert main(["rate-fit", "--risk", str(risk), "--beta", "2", "--out", str(fit)]) == 0
        files.append([risk.read_bytes(), sidecar_path(risk).read_bytes(), fit.read_bytes()])
    assert files[0] == files[1] == files[2]
