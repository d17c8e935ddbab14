from unittest.mock import patch

import pytest

from app.utils.track_stage_metrics import track_stage


@patch("app.utils.track_stage_metrics.record_stage_metrics")
def test_stage_success(mock_record):
    with track_stage("disk"):
        pass
    args, kwargs = mock_record.call_args
    assert args == ("disk",)
    assert kwargs["success"] is True
    assert kwargs["duration_sec"] >= 0


@patch("app.utils.track_stage_metrics.record_stage_metrics")
def test_stage_failure_is_recorded_and_reraised(mock_record):
    with pytest.raises(RuntimeError):
        with track_stage("sweep"):
            raise RuntimeError("boom")
    assert mock_record.call_args.kwargs["success"] is False


def test_empty_stage_label():
    with pytest.raises(ValueError):
        with track_stage(""):
            pass
