import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from hban.assignment import GroundTruth
from hban.estimators import AnchorQuantizer, BranchFusion, MissRateScorer, PartCutter, check_boxes
from hban.fusion import Detection
from hban.geometry import Box


def test_params_and_clone():
    est = AnchorQuantizer(num_bins=4)
    assert est.get_params() == {"num_bins": 4, "body_ratio": 2.44, "feature_stride": 8.0}
    c = clone(est.set_params(num_bins=5))
    assert c.num_bins == 5 and not hasattr(c, "scales_")


def test_anchor_quantizer():
    h = np.linspace(50, 350, 31)
    q = AnchorQuantizer(num_bins=3).fit(h)
    assert q.scales_.tolist() == [50.0, 150.0, 250.0, 350.0]
    assert q.transform([50, 149, 150, 350]).tolist() == [0, 0, 1, 2]
    assert len(q.head_anchors_.templates) == 4
    boxes = np.column_stack([np.zeros(31), np.zeros(31), h / 2.44, h])
    assert np.allclose(AnchorQuantizer(num_bins=3).fit(boxes).scales_, q.scales_)
    with pytest.raises(NotFittedError):
        AnchorQuantizer().transform(h)


def test_part_cutter_round_trip():
    X = np.array([[0.0, 0.0, 30.0, 90.0], [5.0, 5.0, 25.0, 50.0]])
    pc = PartCutter().fit()
    assert np.allclose(pc.inverse_transform(pc.transform(X)), X)
    assert np.allclose(PartCutter("lower").fit().transform(X)[0], [5, 60, 25, 90])
    with pytest.raises(ValueError):
        check_boxes([[0, 0, 0, 1]])


def test_branch_fusion():
    body = np.array([[0, 0, 40, 100, 0.9], [1, 0, 41, 100, 0.8]])
    head = np.array([[200 + 40 / 6, 0, 200 + 200 / 6, 100 / 3, 0.7]])
    out = BranchFusion().fit().predict(body, head)
    assert out.shape == (2, 5)
    assert np.allclose(out[1, :4], [200, 0, 240, 100])
    assert BranchFusion().fit().predict(np.zeros((0, 5))).shape == (0, 5)


def test_miss_rate_scorer():
    gts = {0: [GroundTruth(Box(0, 0, 40, 100))]}
    dets = {0: [Detection(0, Box(0, 0, 40, 100), 0.9, "body")]}
    s = MissRateScorer(subset="all").fit(gts)
    assert s.evaluate(dets) == 1e-6
    assert s.score({}) == -1.0
    with pytest.raises(ValueError):
        MissRateScorer(subset="nope").fit(gts)
