import json

import numpy as np
import pytest

from alignspace.errors import (
    NonFiniteError,
    TensorFormatError,
    ValidationError,
)
from alignspace.tensor_store import (
    YEO7_NETWORKS,
    load_atlas,
    load_manifest,
    load_tensor,
    read_array,
    read_tensor,
    write_array,
    write_tensor,
)


def test_round_trip_identity(tmp_path):
    path = tmp_path / "t.nft1"
    write_tensor(path, [2, 2], [1.0, 2.0, 3.0, 4.0])
    dims, values = read_tensor(path)
    assert dims == (2, 2)
    assert values.tolist() == [1.0, 2.0, 3.0, 4.0]


def test_round_trip_bitwise(tmp_path):
    rng = np.random.default_rng(0)
    vals = rng.standard_normal(6)
    path = tmp_path / "t.nft1"
    write_tensor(path, [2, 3], vals)
    dims, back = read_tensor(path)
    assert dims == (2, 3)
    assert back.tobytes() == vals.tobytes()


def test_rewrite_is_byte_identical(tmp_path):
    a, b = tmp_path / "a.nft1", tmp_path / "b.nft1"
    vals = np.linspace(-1, 1, 12)
    write_tensor(a, [3, 4], vals)
    write_tensor(b, [3, 4], vals)
    assert a.read_bytes() == b.read_bytes()


def test_exact_file_size(tmp_path):
    # 4 magic + 2 version + 1 ndim + 8 dims + 24 data = 39 bytes
    path = tmp_path / "t.nft1"
    write_tensor(path, [3], [0.0, 0.0, 0.0])
    assert path.stat().st_size == 39


def test_file_size_formula(tmp_path):
    path = tmp_path / "t.nft1"
    write_tensor(path, [2, 3, 4], np.zeros(24))
    assert path.stat().st_size == 7 + 8 * 3 + 8 * 24


def test_nan_rejected_with_index(tmp_path):
    with pytest.raises(NonFiniteError) as exc:
        write_tensor(tmp_path / "t.nft1", [2], [1.0, np.nan])
    assert exc.value.index == 1
    assert "index 1" in str(exc.value)


def test_length_mismatch_on_write(tmp_path):
    with pytest.raises(ValidationError):
        write_tensor(tmp_path / "t.nft1", [4], [1.0, 2.0])


def test_wrong_magic(tmp_path):
    path = tmp_path / "bad.nft1"
    write_tensor(path, [2], [1.0, 2.0])
    blob = bytearray(path.read_bytes())
    blob[:4] = b"XXXX"
    path.write_bytes(bytes(blob))
    with pytest.raises(TensorFormatError, match="not an NFT1 file"):
        read_tensor(path)


def test_unsupported_version(tmp_path):
    path = tmp_path / "bad.nft1"
    write_tensor(path, [2], [1.0, 2.0])
    blob = bytearray(path.read_bytes())
    blob[4] = 9
    path.write_bytes(bytes(blob))
    with pytest.raises(TensorFormatError, match="version"):
        read_tensor(path)


def test_truncated_data_reports_expected_bytes(tmp_path):
    path = tmp_path / "bad.nft1"
    write_tensor(path, [4], [1.0, 2.0, 3.0, 4.0])
    blob = path.read_bytes()
    path.write_bytes(blob[: len(blob) - 8])  # drop one value
    with pytest.raises(TensorFormatError, match="expected 32"):
        read_tensor(path)


def test_nonfinite_read_quarantine(tmp_path):
    path = tmp_path / "t.nft1"
    write_tensor(path, [2], [1.0, 2.0])
    blob = bytearray(path.read_bytes())
    blob[-16:-8] = np.array([np.inf]).tobytes()
    path.write_bytes(bytes(blob))
    with pytest.raises(NonFiniteError):
        read_tensor(path)
    tf = load_tensor(path, allow_nonfinite=True)
    assert tf.quarantined


def test_write_read_array_shape(tmp_path):
    arr = np.arange(12.0).reshape(3, 4)
    path = tmp_path / "t.nft1"
    write_array(path, arr)
    assert np.array_equal(read_array(path), arr)


def _atlas_csv(tmp_path, rows):
    path = tmp_path / "atlas.csv"
    lines = ["roi_index,roi_name,network,hemisphere"] + rows
    path.write_text("\n".join(lines) + "\n")
    return path


def test_atlas_200_rows(tmp_path):
    rows = [
        f"{i},ROI_{i:03d},{YEO7_NETWORKS[i % 7]},{'L' if i % 2 == 0 else 'R'}"
        for i in range(200)
    ]
    atlas = load_atlas(_atlas_csv(tmp_path, rows))
    assert atlas.n_rois == 200


def test_atlas_toy(tmp_path):
    rows = [
        "0,A,Visual,L",
        "1,B,Visual,R",
        "2,C,Default,L",
        "3,D,Default,R",
    ]
    atlas = load_atlas(_atlas_csv(tmp_path, rows))
    assert atlas.n_rois == 4
    assert atlas.networks == ("Visual", "Visual", "Default", "Default")


def test_atlas_unknown_network_lists_labels(tmp_path):
    rows = ["0,A,Motor,L", "1,B,Visual,R"]
    with pytest.raises(ValidationError) as exc:
        load_atlas(_atlas_csv(tmp_path, rows))
    for name in YEO7_NETWORKS:
        assert name in str(exc.value)


def test_atlas_gap_rejected(tmp_path):
    rows = ["0,A,Visual,L", "2,B,Visual,R"]
    with pytest.raises(ValidationError, match="contiguous"):
        load_atlas(_atlas_csv(tmp_path, rows))


def test_atlas_duplicate_rejected(tmp_path):
    rows = ["0,A,Visual,L", "0,B,Visual,R"]
    with pytest.raises(ValidationError, match="duplicate"):
        load_atlas(_atlas_csv(tmp_path, rows))


def _workspace(tmp_path, *, tr=1.5, drop_file=False, n_perm=999):
    write_array(tmp_path / "traj.nft1", np.random.default_rng(0).normal(size=(5, 3)))
    write_array(tmp_path / "brain.nft1", np.zeros((2, 8)))
    _atlas_csv(tmp_path, ["0,A,Visual,L", "1,B,Default,R"])
    doc = {
        "seed": 7,
        "models": [
            {
                "id": "m1",
                "modality": "vision",
                "trajectories": {"s0": "traj.nft1"},
            }
        ],
        "brain": {
            "roi_timeseries": "brain.nft1",
            "tr": tr,
            "atlas": "atlas.csv",
            "stimuli": [{"id": "s0", "onset": 0.0}],
        },
        "params": {"n_permutations": n_perm},
    }
    if drop_file:
        doc["models"][0]["trajectories"]["s0"] = "missing.nft1"
    path = tmp_path / "manifest.json"
    path.write_text(json.dumps(doc))
    return path


def test_manifest_loads_and_orders_models(tmp_path):
    m = load_manifest(_workspace(tmp_path))
    assert m.seed == 7
    assert m.model_ids() == ["m1"]
    assert m.brain.tr == 1.5


def test_manifest_missing_path_named(tmp_path):
    with pytest.raises(ValidationError, match="missing.nft1"):
        load_manifest(_workspace(tmp_path, drop_file=True))


def test_manifest_bad_tr(tmp_path):
    with pytest.raises(ValidationError, match="TR"):
        load_manifest(_workspace(tmp_path, tr=0.0))


def test_manifest_bad_permutations(tmp_path):
    with pytest.raises(ValidationError, match="permutation"):
        load_manifest(_workspace(tmp_path, n_perm=0))


def test_manifest_bad_modality(tmp_path):
    path = _workspace(tmp_path)
    doc = json.loads(path.read_text())
    doc["models"][0]["modality"] = "smell"
    path.write_text(json.dumps(doc))
    with pytest.raises(ValidationError, match="modality"):
        load_manifest(path)
