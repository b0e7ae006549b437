import json
import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from resourcelab import io, linalg, presets, quantum
from resourcelab.errors import InvalidParams, InvalidState
from resourcelab.freesets import FlaggedIsotropicFreeSet, IncoherentFreeSet


class TestIo:
    def test_json_schema_and_nonfinite(self):
        text = io.dumps_json({"a": np.float64(1.5), "b": math.inf, "c": float("nan"), "d": np.int64(3),
                              "e": np.array([1, 2]), "f": np.bool_(True), "g": 1 + 2j})
        obj = json.loads(text)
        assert obj["schema"] == io.SCHEMA and list(obj)[0] == "schema"
        assert obj["b"] == "inf" and obj["c"] == "nan" and obj["d"] == 3 and obj["e"] == [1, 2]
        assert obj["f"] is True and obj["g"] == {"re": 1.0, "im": 2.0}
        assert text.endswith("\n")

    def test_csv_roundtrip_floats(self):
        x = 0.1 + 0.2
        text = io.dumps_csv([{"a": x, "b": None, "c": "s"}], ("a", "b", "c"))
        lines = text.split("\n")
        assert lines[0] == "schema,a,b,c"
        assert float(lines[1].split(",")[1]) == x
        assert lines[1].split(",")[2] == ""
        assert "\r" not in text

    def test_table_formats(self):
        rows = [{"a": 1}]
        assert json.loads(io.dumps_table(rows, ("a",), "json", extra={"note": "x"}))["note"] == "x"
        with pytest.raises(ValueError):
            io.dumps_table(rows, ("a",), "xml")

    def test_write_and_load(self, tmp_path):
        path = tmp_path / "x.json"
        io.write_text(path, io.dumps_json({"k": 1}))
        assert io.load_json(path) == {"schema": 1, "k": 1}


class TestPresets:
    @pytest.mark.parametrize("name,dim", [("plus", 2), ("zero", 2), ("max-coherent-5", 5), ("amp-0.9", 2),
                                          ("noisy-plus-0.2", 2), ("flagged-isotropic:1,0.1,0.05", 9)])
    def test_presets_are_states(self, name, dim):
        rho, F = presets.load_state(name)
        quantum.validate_state(rho)
        assert rho.shape == (dim, dim)

    def test_amp_values(self):
        rho, _ = presets.load_state("amp-0.9")
        assert rho[0, 0].real == pytest.approx(0.9)
        assert abs(rho[0, 1]) == pytest.approx(math.sqrt(0.09))

    def test_family_types(self):
        assert isinstance(presets.load_state("plus")[1], IncoherentFreeSet)
        assert isinstance(presets.load_state("flagged-isotropic:2,0.1,0.05")[1], FlaggedIsotropicFreeSet)

    @pytest.mark.parametrize("name", ["nope", "max-coherent-1", "amp-1.5", "amp-x", "noisy-plus-2",
                                      "flagged-isotropic:1,0.1", "flagged-isotropic:a,0,0",
                                      "flagged-isotropic:1,0.8,0.8"])
    def test_bad_names(self, name):
        with pytest.raises(InvalidParams):
            presets.load_state(name)

    def test_json_file(self, tmp_path):
        rho = 0.5 * quantum.plus_state() + 0.5 * np.diag([1.0, 0])
        path = tmp_path / "s.json"
        path.write_text(json.dumps(linalg.to_json(rho)))
        got, F = presets.load_state(str(path))
        assert_allclose(got, rho)
        assert F.local_dim == 2

    def test_json_file_with_dims(self, tmp_path):
        rho = linalg.tensor_power(quantum.plus_state(), 2)
        obj = dict(linalg.to_json(rho), dims=[2, 2])
        path = tmp_path / "s.json"
        path.write_text(json.dumps(obj))
        got, F = presets.load_state(str(path))
        assert F.local_dim == 2 and got.shape == (4, 4)

    @pytest.mark.parametrize("content", ["[1]", "{bad json", '{"dim": 2, "re": [1, 0, 0, 0], "x": 1}',
                                         '{"dim": 2, "re": [1, 0, 0, 1]}', '{"dim": 2, "re": [1, 0, 0]}',
                                         '{"dim": 4, "re": [1,0,0,0, 0,0,0,0, 0,0,0,0, 0,0,0,0], "dims": [2, 3]}'])
    def test_bad_files(self, tmp_path, content):
        path = tmp_path / "bad.json"
        path.write_text(content)
        with pytest.raises(InvalidState):
            presets.load_state(str(path))

    def test_missing_file(self, tmp_path):
        with pytest.raises(InvalidState):
            presets.load_state(str(tmp_path / "missing.json"))
