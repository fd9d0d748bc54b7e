import numpy as np
from click.testing import CliRunner

from faceswap3d.cli import main
from faceswap3d.render import save_image


class TestCleanErrors:
    def test_metrics_rejects_non_mask_png_cleanly(self, tmp_path):
        pred = tmp_path / "pred"
        gt = tmp_path / "gt"
        pred.mkdir()
        gt.mkdir()
        rgb = np.full((8, 8, 3), 120, dtype=np.uint8)
        save_image(rgb, pred / "a.png")  # RGB image, not a mask
        save_image(rgb, gt / "a.png")
        res = CliRunner().invoke(main, ["metrics", "--pred-dir", str(pred),
                                        "--gt-dir", str(gt)])
        assert res.exit_code == 1
        assert "a.png" in res.output
        assert "single-channel" in res.output
        assert "Traceback" not in res.output

    def test_augment_bad_mask_cleanly(self, tmp_path):
        import json

        rgb = np.full((8, 8, 3), 120, dtype=np.uint8)
        save_image(rgb, tmp_path / "img.png")
        save_image(rgb, tmp_path / "mask.png")  # invalid mask format
        placement = tmp_path / "p.json"
        placement.write_text(json.dumps({"type": "hand", "patch": "x",
                                         "position": [0, 0]}))
        res = CliRunner().invoke(main, [
            "augment", "--image", str(tmp_path / "img.png"),
            "--mask", str(tmp_path / "mask.png"),
            "--placement", str(placement),
            "--out-image", str(tmp_path / "o.png"),
            "--out-mask", str(tmp_path / "om.png"),
        ])
        assert res.exit_code == 1
        assert "augment failed" in res.output
