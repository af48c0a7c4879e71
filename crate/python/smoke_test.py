"""Build the extension, import it, and solve the two-node reference scene."""

import math
import pathlib
import shutil
import subprocess
import sys
import tempfile

ROOT = pathlib.Path(__file__).resolve().parent.parent


def build_module(dest: pathlib.Path) -> None:
    subprocess.run(
        ["cargo", "build", "--offline", "--release", "-p", "isac-beam-py"],
        cwd=ROOT,
        check=True,
    )
    lib = ROOT / "target" / "release" / "libisac_beam_py.so"
    shutil.copy(lib, dest / "isac_beam.so")


def main() -> int:
    with tempfile.TemporaryDirectory() as tmp:
        tmp = pathlib.Path(tmp)
        build_module(tmp)
        sys.path.insert(0, str(tmp))
        import isac_beam

        sv = isac_beam.steering_vector(4, 0.95e9, 90.0)
        assert all(abs(z - 1) < 1e-12 for z in sv), sv
        assert abs(isac_beam.rate(1.0) - 1.0) < 1e-15

        scenario = isac_beam.Scenario.load(ROOT / "configs" / "two_node.toml")
        print(scenario)
        run = isac_beam.solve(scenario)
        assert run.converged, run.message
        print(f"power {run.power_dbm:.4f} dBm after {run.iterations} iterations")
        assert all(r >= 1.0 - 1e-6 for r in run.rates), run.rates
        w = run.beamformers
        assert w is not None and len(w) == 1 and len(w[0]) == 15
        norm2 = sum(abs(z) ** 2 for z in w[0])
        tr = sum(run.covariances[0][i][i].real for i in range(15))
        assert math.isclose(norm2, tr, rel_tol=1e-6), (norm2, tr)
        ok, report = run.validate()
        print(report, end="")
        assert ok

        record = run.save(tmp / "out")
        ok, _ = isac_beam.validate_record_file(record)
        assert ok
        header = run.beampattern_csv().splitlines()[0]
        assert header == "angle_deg,total_dBm,comm_dBm,radar_dBm", header

        try:
            isac_beam.Scenario.from_toml("not = [valid")
        except ValueError:
            pass
        else:
            raise AssertionError("malformed scenario accepted")
    print("smoke test passed")
    return 0


if __name__ == "__main__":
    sys.exit(main())
