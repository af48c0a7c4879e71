use std::ffi::CString;
use std::sync::Once;

use pyo3::prelude::*;
use pyo3::types::PyDict;

use isac_beam_py::isac_beam_py;

static INIT: Once = Once::new();

fn run(code: &str) -> PyResult<()> {
    INIT.call_once(|| {
        pyo3::append_to_inittab!(isac_beam_py);
        Python::initialize();
    });
    Python::attach(|py| {
        let globals = PyDict::new(py);
        py.run(&CString::new(code).unwrap(), Some(&globals), None)
    })
}

const TWO_ANTENNAS: &str = r#"
TOML = """
rate_floor = 1.0
beam_width_deg = 5.0
target_receive_level_dbm = -13.0

[array]
num_antennas = 2
carrier_frequency_hz = 0.95e9

[[users]]
angle_deg = 20.0
distance_m = 20.0
noise_power_dbm = -75.0

[[targets]]
angle_deg = -30.0
distance_m = 20.0
"""
"#;

#[test]
fn module_exposes_types_and_functions() {
    run(r#"
import isac_beam
for name in ["Scenario", "Run", "solve", "sweep_antennas", "rate", "steering_vector", "validate_record_file"]:
    assert hasattr(isac_beam, name), name
assert abs(isac_beam.rate(3.0) - 2.0) < 1e-15
sv = isac_beam.steering_vector(3, 1e9, 60.0)
assert len(sv) == 3 and isinstance(sv[1], complex)
assert abs(sv[1] - complex(0.0, 1.0)) < 1e-12
"#)
    .unwrap();
}

#[test]
fn solve_small_scenario() {
    run(&format!(
        "{TWO_ANTENNAS}{}",
        r#"
import isac_beam
s = isac_beam.Scenario.from_toml(TOML)
assert s.num_antennas == 2 and s.user_angles == [20.0] and s.target_angles == [-30.0]
assert s.with_antennas(4).num_antennas == 4
lo = [p for p in s.desired_pattern() if p[0] == -30.0]
assert len(lo) == 1 and lo[0][1] < lo[0][2]
r = isac_beam.solve(s)
assert r.converged
assert r.power_mw >= r.sdr_power_mw * (1 - 1e-7)
assert min(r.rates) >= 1.0 - 1e-6
ok, text = r.validate()
assert ok, text
assert text.startswith("PASS")
assert '"summary"' in r.record_json()
"#
    ))
    .unwrap();
}

#[test]
fn errors_map_to_python_exceptions() {
    run(r#"
import isac_beam
try:
    isac_beam.Scenario.from_toml("rate_floor = ")
    raise SystemExit("accepted malformed toml")
except ValueError:
    pass
try:
    isac_beam.steering_vector(0, 1e9, 0.0)
    raise SystemExit("accepted empty array")
except ValueError:
    pass
try:
    isac_beam.validate_record_file("/nonexistent/run.json")
    raise SystemExit("loaded a missing record")
except ValueError:
    pass
"#)
    .unwrap();
}
