"""Smoke test for the Python bindings.

Builds the extension with cargo, imports it from a temporary directory and
exercises each entry point. Run with `python3 python/smoke_test.py` or
under pytest.
"""

import importlib
import json
import os
import shutil
import subprocess
import sys
import tempfile

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
CORE = os.path.join(ROOT, "crates", "core")

SHADER = """in float x;
out float o;
void main() {
  float acc = 0.0;
  for (int i = 0; i < 4; i++) {
    acc += x * 2.0;
  }
  if (acc > 1.0) {
    o = mix(acc, 0.0, 0.5);
  } else {
    o = acc;
  }
}
"""


def load():
    subprocess.run(["cargo", "build", "-q", "-p", "blobfuzz-py"], cwd=ROOT, check=True)
    target = os.environ.get("CARGO_TARGET_DIR", os.path.join(ROOT, "target"))
    lib = os.path.join(target, "debug", "libblobfuzz.so")
    tmp = tempfile.mkdtemp()
    shutil.copy(lib, os.path.join(tmp, "blobfuzz.so"))
    sys.path.insert(0, tmp)
    return importlib.import_module("blobfuzz")


bf = load()


def test_front_end_and_execution():
    assert "void main()" in bf.check(SHADER)
    ref = bf.interpret_shader(SHADER, seed=7)
    assert ref["status"] == "Ok"
    compiled = bf.compile(SHADER)
    assert compiled["status"] == "Completed"
    run = bf.execute_ir(compiled["ir"], seed=7)
    assert run["output_hash"] == ref["output_hash"]
    try:
        bf.check("void main() { x = ; }")
    except ValueError:
        pass
    else:
        raise AssertionError("bad shader accepted")


def test_variants_replay():
    v = bf.generate_variant(SHADER, name="s", seed=3, depth=4)
    again = bf.replay_recipe(SHADER, json.dumps(v["recipe"]), name="s")
    assert again == v["text"]
    a = bf.interpret_shader(SHADER, seed=1)["outputs"]["o"]
    b = bf.interpret_shader(v["text"], seed=1)["outputs"]["o"]
    assert a == b


def test_injected_fault_is_reported():
    out = bf.campaign(os.path.join(CORE, "fixtures", "manifest.toml"), variants=5, seed=0,
                      inject=["peephole_null_deref"], threads=2, minimize=False)
    assert out["stats"]["variants_tested"] > 0
    assert all(r["kind"] == "Crash" for r in out["reports"])


def test_forensics():
    with open(os.path.join(CORE, "fixtures", "elf", "qcom_blob.so"), "rb") as f:
        data = f.read()
    with open(os.path.join(CORE, "fixtures", "elf", "qcom_blob.build_id")) as f:
        assert bf.build_id(data) == f.read().strip()
    assert "EV031.42.23.11" in bf.strings(data)
    info = bf.inspect_blob(data)
    assert info["version"] == {"scheme": "qualcomm_internal", "components": [31, 42, 23, 11]}
    assert bf.parse_version({"r32p1"})["version"] == {"scheme": "arm_rp", "major": 32, "patch": 1}
    with open(os.path.join(CORE, "fixtures", "catalog", "catalog.csv")) as f:
        agg = bf.delay_report(f.read())
    assert agg["overall"]["max_delay_days"] == 152
    assert agg["overall"]["median_delay_days"] == 83.0


if __name__ == "__main__":
    tests = [v for k, v in sorted(globals().items()) if k.startswith("test_")]
    for t in tests:
        t()
        print(f"ok  {t.__name__}")
    print(f"{len(tests)} passed")
